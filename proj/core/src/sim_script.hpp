#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nudge/event_record.hpp"
#include "nudge/sim_harness.hpp"

namespace nudge::sim::detail {

/// Deterministic, library-independent samplers over mt19937_64.
class Sampler {
  public:
    explicit Sampler(std::uint64_t s0, std::uint64_t s1, std::uint64_t s2)
        : rng_(mix(mix(mix(0x9e3779b97f4a7c15ull, s0), s1), s2)) {}

    double uniform01() { return double(rng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    std::uint64_t uniform_index(std::uint64_t n) { return rng_() % n; }

    bool bernoulli(double p) { return uniform01() < p; }

    double normal() {
        // Box-Muller; one value per call keeps the stream layout simple.
        double u1 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    /// Log-normal parameterized by its mean (not the log-mean).
    double lognormal_mean(double mean, double sigma_log) {
        const double mu = std::log(mean) - sigma_log * sigma_log / 2.0;
        return std::exp(mu + sigma_log * normal());
    }

  private:
    static std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
        h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        h ^= h >> 33;
        h *= 0xff51afd7ed558ccdull;
        h ^= h >> 33;
        return h;
    }

    std::mt19937_64 rng_;
};

/// An event template; repo/pr ids are set, the timestamp is assigned when
/// the step executes.
struct StepEvent {
    EventKind kind = EventKind::Comment;
    std::string actor_id;
    std::string actor_name;
    nlohmann::json payload = nlohmann::json::object();
};

/// One planned response: who acts, how long after the previous step, and
/// which events fire.
struct PlannedStep {
    double delay_hours = 0.0;
    std::string owner_id;       ///< actor whose response delay this is
    bool business_time = true;  ///< consume delay skipping weekends
    std::vector<StepEvent> events;
};

struct PrScript {
    std::string repo_id;
    std::string pr_id;
    Instant created_at{};
    std::vector<StepEvent> creation_events;  ///< create + initial iteration
    std::vector<PlannedStep> steps;          ///< ends in merge or abandon
    double planned_lifetime_hours = 0.0;     ///< business hours, post scaling
};

/// Builds the deterministic scripts for one generation phase. `phase_salt`
/// separates the historical tranche from the live trial stream.
std::vector<PrScript> build_scripts(const SimConfig& config, std::uint64_t phase_salt,
                                    int count, Instant start, double span_days);

/// Materializes a script at its natural pace (no nudging) into timestamped
/// events, in apply order.
std::vector<EventRecord> materialize(const PrScript& script);

/// Timestamp of step `index` given the instant the previous step fired.
Instant step_due(const PrScript& script, std::size_t index, Instant previous,
                 double delay_scale);

EventRecord instantiate(const PrScript& script, const StepEvent& tmpl, Instant at);

}  // namespace nudge::sim::detail
