#include "pgts/replay.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "pgts/errors.hpp"

namespace pgts {

using nlohmann::json;

std::string format_double(double value) {
    char buf[40];
    const auto result = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
    return std::string(buf, result.ptr);
}

std::size_t LogEvent::displayed_index() const {
    for (std::size_t i = 0; i < pool.size(); ++i)
        if (pool[i].arm == displayed) return i;
    throw InvalidArgument("displayed arm '" + displayed + "' is not in the pool");
}

void LogEvent::validate() const {
    if (pool.empty()) throw InvalidArgument("empty pool");
    if (reward != 0 && reward != 1) throw InvalidArgument("reward must be 0 or 1");
    const auto d = pool.front().x.size();
    if (d == 0) throw InvalidArgument("empty context vector");
    std::set<std::string_view> seen;
    for (const auto& entry : pool) {
        if (entry.x.size() != d) throw InvalidArgument("context dimension mismatch in pool");
        if (!entry.x.allFinite()) throw InvalidArgument("non-finite context value");
        if (!seen.insert(entry.arm).second) throw InvalidArgument("duplicate arm '" + entry.arm + "' in pool");
    }
    displayed_index();
}

LogEvent parse_event(std::string_view line, std::size_t line_number) {
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(line_number, std::string("malformed JSON: ") + e.what());
    }
    const auto field = [&](const char* key) -> const json& {
        if (!doc.is_object() || !doc.contains(key)) throw ParseError(line_number, std::string("missing field '") + key + "'");
        return doc.at(key);
    };
    LogEvent event;
    const json& id = field("id");
    const json& displayed = field("displayed");
    const json& reward = field("reward");
    const json& pool = field("pool");
    if (!id.is_number_integer()) throw ParseError(line_number, "'id' must be an integer");
    if (!displayed.is_string()) throw ParseError(line_number, "'displayed' must be a string");
    if (!reward.is_number_integer()) throw ParseError(line_number, "'reward' must be 0 or 1");
    if (!pool.is_array()) throw ParseError(line_number, "'pool' must be an array");
    event.id = id.get<std::int64_t>();
    event.displayed = displayed.get<std::string>();
    event.reward = reward.get<int>();
    for (const json& entry : pool) {
        if (!entry.is_object() || !entry.contains("arm") || !entry.contains("x"))
            throw ParseError(line_number, "pool entries need 'arm' and 'x'");
        if (!entry["arm"].is_string() || !entry["x"].is_array())
            throw ParseError(line_number, "pool entry has wrong field types");
        PoolEntry p;
        p.arm = entry["arm"].get<std::string>();
        const json& xs = entry["x"];
        p.x.resize(static_cast<Eigen::Index>(xs.size()));
        for (std::size_t j = 0; j < xs.size(); ++j) {
            if (!xs[j].is_number()) throw ParseError(line_number, "context values must be numbers");
            p.x[static_cast<Eigen::Index>(j)] = xs[j].get<double>();
        }
        event.pool.push_back(std::move(p));
    }
    try {
        event.validate();
    } catch (const InvalidArgument& e) {
        throw ParseError(line_number, e.what());
    }
    return event;
}

std::string serialize_event(const LogEvent& event) {
    std::string out = "{\"id\": " + std::to_string(event.id) + ", \"displayed\": " + json(event.displayed).dump() +
                      ", \"reward\": " + std::to_string(event.reward) + ", \"pool\": [";
    for (std::size_t i = 0; i < event.pool.size(); ++i) {
        if (i) out += ", ";
        out += "{\"arm\": " + json(event.pool[i].arm).dump() + ", \"x\": [";
        const Vector& x = event.pool[i].x;
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            if (j) out += ", ";
            out += format_double(x[j]);
        }
        out += "]}";
    }
    out += "]}";
    return out;
}

std::vector<LogEvent> read_log(std::istream& in) {
    std::vector<LogEvent> events;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        events.push_back(parse_event(line, line_number));
    }
    return events;
}

std::vector<LogEvent> read_log_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open log file '" + path + "'");
    return read_log(in);
}

void write_log(std::ostream& out, std::span<const LogEvent> events) {
    for (const auto& e : events) out << serialize_event(e) << '\n';
}

std::vector<LogEvent> generate_synthetic_log(std::size_t arms, std::size_t d, const Vector& theta_star,
                                             std::size_t n_events, std::uint64_t seed) {
    if (arms < 2) throw InvalidArgument("generate_synthetic_log: need at least 2 arms");
    if (n_events < 1) throw InvalidArgument("generate_synthetic_log: need at least 1 event");
    if (static_cast<std::size_t>(theta_star.size()) != d)
        throw InvalidArgument("generate_synthetic_log: theta* dimension mismatch");
    RandomSource rng(seed);
    std::vector<LogEvent> events;
    events.reserve(n_events);
    for (std::size_t n = 0; n < n_events; ++n) {
        LogEvent e;
        e.id = static_cast<std::int64_t>(n);
        for (std::size_t a = 0; a < arms; ++a) {
            PoolEntry p{"a" + std::to_string(a), Vector(static_cast<Eigen::Index>(d))};
            for (auto& v : p.x) v = rng.normal();
            e.pool.push_back(std::move(p));
        }
        const std::size_t shown = rng.index(arms);
        e.displayed = e.pool[shown].arm;
        e.reward = rng.bernoulli(sigmoid(e.pool[shown].x.dot(theta_star))) ? 1 : 0;
        events.push_back(std::move(e));
    }
    return events;
}

// ---------------------------------------------------------------------------

Policy& SharedReplayPolicy::model(std::size_t d) {
    if (!model_) model_ = factory_(d);
    return *model_;
}

std::size_t SharedReplayPolicy::select(const LogEvent& event, RandomSource& rng) {
    std::vector<Vector> contexts;
    contexts.reserve(event.pool.size());
    for (const auto& p : event.pool) contexts.push_back(p.x);
    return model(event.dim()).select(contexts, rng);
}

void SharedReplayPolicy::observe(const std::string&, const Vector& x, int reward) {
    model(static_cast<std::size_t>(x.size())).observe(x, 0, reward);
}

Policy& DisjointReplayPolicy::model(const std::string& arm, std::size_t d) {
    auto it = models_.find(arm);
    if (it == models_.end()) it = models_.emplace(arm, factory_(d)).first;
    return *it->second;
}

std::size_t DisjointReplayPolicy::select(const LogEvent& event, RandomSource& rng) {
    if (event.pool.empty()) throw InvalidArgument("DisjointReplayPolicy: empty pool");
    std::size_t best = 0;
    double best_score = 0.0;
    for (std::size_t i = 0; i < event.pool.size(); ++i) {
        const PoolEntry& p = event.pool[i];
        const double s = model(p.arm, static_cast<std::size_t>(p.x.size())).scores({&p.x, 1}, rng).front();
        if (i == 0 || s > best_score || (s == best_score && p.arm < event.pool[best].arm)) {
            best = i;
            best_score = s;
        }
    }
    return best;
}

void DisjointReplayPolicy::observe(const std::string& arm, const Vector& x, int reward) {
    model(arm, static_cast<std::size_t>(x.size())).observe(x, 0, reward);
}

std::size_t DisjointReplayPolicy::history_size() const {
    std::size_t total = 0;
    for (const auto& [arm, m] : models_) total += m->history_size();
    return total;
}

std::uint64_t DisjointReplayPolicy::state_digest() const {
    std::uint64_t h = fnv1a(nullptr, 0);
    for (const auto& [arm, m] : models_) {
        h = fnv1a(arm.data(), arm.size(), h);
        const std::uint64_t inner = m->state_digest();
        h = fnv1a(&inner, sizeof(inner), h);
    }
    return h;
}

ReplayPolicyFactory shared_policy_factory(PolicySpec spec) {
    spec.validate();
    return [spec] {
        return std::make_unique<SharedReplayPolicy>([spec](std::size_t d) { return make_policy(spec, d); });
    };
}

ReplayPolicyFactory disjoint_policy_factory(PolicySpec spec) {
    spec.validate();
    return [spec] {
        return std::make_unique<DisjointReplayPolicy>([spec](std::size_t d) { return make_policy(spec, d); });
    };
}

// ---------------------------------------------------------------------------

ReplayReport replay(ReplayPolicy& policy, std::span<const LogEvent> events, const ReplayOptions& options,
                    RandomSource& rng) {
    if (options.update_batch < 1) throw InvalidArgument("replay: update_batch must be >= 1");
    struct Pending {
        std::string arm;
        Vector x;
        int reward;
    };
    std::vector<Pending> queue;
    queue.reserve(options.update_batch);
    ReplayReport report;
    for (const LogEvent& event : events) {
        if (options.budget && report.valid_events >= *options.budget) break;
        ++report.events_seen;
        const std::size_t choice = policy.select(event, rng);
        if (choice >= event.pool.size()) throw InvalidArgument("replay: policy chose an arm outside the pool");
        const PoolEntry& chosen = event.pool[choice];
        if (chosen.arm != event.displayed) continue;

        ++report.valid_events;
        report.clicks += static_cast<std::size_t>(event.reward);
        const double ctr = static_cast<double>(report.clicks) / static_cast<double>(report.valid_events);
        report.ctr_trace.emplace_back(report.valid_events, ctr);
        report.arms.push_back(chosen.arm);
        report.rewards.push_back(event.reward);

        queue.push_back({chosen.arm, chosen.x, event.reward});
        if (queue.size() == options.update_batch) {
            for (const auto& p : queue) policy.observe(p.arm, p.x, p.reward);
            queue.clear();
        }
    }
    if (report.valid_events > 0)
        report.final_ctr = static_cast<double>(report.clicks) / static_cast<double>(report.valid_events);
    return report;
}

ReplayReport replay(const ReplayPolicyFactory& factory, std::span<const LogEvent> events,
                    const ReplayOptions& options, RandomSource& rng) {
    const auto policy = factory();
    return replay(*policy, events, options, rng);
}

}  // namespace pgts
