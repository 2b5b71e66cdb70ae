#pragma once

#include <cstdint>

#include "pgts/random.hpp"

namespace pgts {

/// Parameters of PG(b, c). Only integer shapes are supported; PG(b, c) is
/// drawn as a sum of b independent PG(1, c) variates.
struct PolyaGammaParams {
    int b = 1;
    double c = 0.0;

    /// Throws InvalidArgument if b < 1 or c is not finite.
    void validate() const;
};

/// Proposal/acceptance tallies for the exact PG(1, c) sampler.
struct PgCounters {
    std::uint64_t proposals = 0;
    std::uint64_t acceptances = 0;

    double acceptance_rate() const {
        return proposals == 0 ? 1.0 : static_cast<double>(acceptances) / static_cast<double>(proposals);
    }
};

/// Upper bound on outer accept-reject proposals for a single draw.
inline constexpr int kPgProposalCap = 10000;

/// Exact PG(1, c) draw (Devroye-style alternating-series accept-reject with a
/// truncated inverse-Gaussian / exponential mixture proposal split at 0.64).
/// Throws SamplerFault if kPgProposalCap proposals are rejected in a row.
double sample_pg1(double c, RandomSource& rng, PgCounters* counters = nullptr);

/// PG(b, c) as the sum of b PG(1, c) draws.
double sample_pg(const PolyaGammaParams& params, RandomSource& rng, PgCounters* counters = nullptr);

/// Mean of the PG(b, c) series truncated at `terms` summands. Test oracle.
double pg_mean(int b, double c, long terms = 1000000);

/// Draws PG(b, c) by simulating the gamma series directly, truncated at
/// `terms` (>= 100) summands. Reference sampler for cross-checks.
double sample_pg_series(const PolyaGammaParams& params, long terms, RandomSource& rng);

}  // namespace pgts
