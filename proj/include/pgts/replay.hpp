#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pgts/gauss.hpp"
#include "pgts/policies.hpp"
#include "pgts/random.hpp"

namespace pgts {

struct PoolEntry {
    std::string arm;
    Vector x;
};

/// One logged impression: the displayed arm, its click, and the candidate pool.
struct LogEvent {
    std::int64_t id = 0;
    std::string displayed;
    int reward = 0;
    std::vector<PoolEntry> pool;

    std::size_t displayed_index() const;
    std::size_t dim() const { return static_cast<std::size_t>(pool.front().x.size()); }
    /// Throws InvalidArgument describing the first violated invariant.
    void validate() const;
};

/// Parses one JSON-lines record. Errors carry `line_number`.
LogEvent parse_event(std::string_view line, std::size_t line_number = 1);

/// Canonical single-line text: fixed field order, 17 significant digits.
std::string serialize_event(const LogEvent& event);

std::vector<LogEvent> read_log(std::istream& in);
std::vector<LogEvent> read_log_file(const std::string& path);
void write_log(std::ostream& out, std::span<const LogEvent> events);

/// Uniformly-logged synthetic impressions: every event shows all K arms
/// ("a0".."a{K-1}") with fresh N(0, I_d) contexts, displays one uniformly at
/// random, and clicks with probability sigmoid(x' theta*).
std::vector<LogEvent> generate_synthetic_log(std::size_t arms, std::size_t d, const Vector& theta_star,
                                             std::size_t n_events, std::uint64_t seed);

/// Policy as seen by the replay evaluator: chooses a pool position and learns
/// from (arm id, context, reward) feedback.
class ReplayPolicy {
  public:
    virtual ~ReplayPolicy() = default;
    virtual std::size_t select(const LogEvent& event, RandomSource& rng) = 0;
    virtual void observe(const std::string& arm, const Vector& x, int reward) = 0;
    virtual std::size_t history_size() const = 0;
    virtual std::uint64_t state_digest() const = 0;
};

using ReplayPolicyFactory = std::function<std::unique_ptr<ReplayPolicy>()>;
using PolicyFactory = std::function<std::unique_ptr<Policy>(std::size_t d)>;

/// One model shared by all arms.
class SharedReplayPolicy final : public ReplayPolicy {
  public:
    explicit SharedReplayPolicy(PolicyFactory factory) : factory_(std::move(factory)) {}

    std::size_t select(const LogEvent& event, RandomSource& rng) override;
    void observe(const std::string& arm, const Vector& x, int reward) override;
    std::size_t history_size() const override { return model_ ? model_->history_size() : 0; }
    std::uint64_t state_digest() const override { return model_ ? model_->state_digest() : 0; }

  private:
    Policy& model(std::size_t d);

    PolicyFactory factory_;
    std::unique_ptr<Policy> model_;
};

/// One independent model per arm id, created on first sight. Each pool arm
/// is scored by its own model; ties go to the lexicographically smallest id.
class DisjointReplayPolicy final : public ReplayPolicy {
  public:
    explicit DisjointReplayPolicy(PolicyFactory factory) : factory_(std::move(factory)) {}

    std::size_t select(const LogEvent& event, RandomSource& rng) override;
    void observe(const std::string& arm, const Vector& x, int reward) override;
    std::size_t history_size() const override;
    std::uint64_t state_digest() const override;

    const std::map<std::string, std::unique_ptr<Policy>>& models() const { return models_; }

  private:
    Policy& model(const std::string& arm, std::size_t d);

    PolicyFactory factory_;
    std::map<std::string, std::unique_ptr<Policy>> models_;
};

ReplayPolicyFactory shared_policy_factory(PolicySpec spec);
ReplayPolicyFactory disjoint_policy_factory(PolicySpec spec);

struct ReplayOptions {
    std::size_t update_batch = 100;
    std::optional<std::size_t> budget;  // stop after this many valid events
};

struct ReplayReport {
    std::size_t events_seen = 0;
    std::size_t valid_events = 0;
    std::size_t clicks = 0;
    std::vector<std::pair<std::size_t, double>> ctr_trace;  // (valid index, running CTR)
    std::vector<std::string> arms;                          // chosen arm per valid event
    std::vector<int> rewards;
    double final_ctr = 0.0;

    double valid_fraction() const {
        return events_seen == 0 ? 0.0 : static_cast<double>(valid_events) / static_cast<double>(events_seen);
    }
};

/// Rejection replay: an event counts only when the policy picks the displayed
/// arm. Counted feedback is queued and handed to the policy in groups of
/// update_batch; discarded events never reach observe().
ReplayReport replay(ReplayPolicy& policy, std::span<const LogEvent> events, const ReplayOptions& options,
                    RandomSource& rng);
ReplayReport replay(const ReplayPolicyFactory& factory, std::span<const LogEvent> events,
                    const ReplayOptions& options, RandomSource& rng);

/// Shortest round-trip-safe text for a double (17 significant digits).
std::string format_double(double value);

}  // namespace pgts
