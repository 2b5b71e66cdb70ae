from ._pgts import (
    ConfigError,
    InvalidArgument,
    __version__,
    gaussian_env,
    laplace_fit_step,
    mixture_env,
    pg_conditional_posterior,
    pg_diagnose,
    pg_mean,
    prep_dataset,
    replay,
    sample_pg,
    sigmoid,
    simulate,
    synthetic_log,
    write_synthetic_cover,
)
