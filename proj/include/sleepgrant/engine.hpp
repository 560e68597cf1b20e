#pragma once

// Slot-loop simulation binding traffic, prediction, channel, reward and
// scheduling, plus regret/latency/throughput accounting and the regret bound.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "sleepgrant/channel.hpp"
#include "sleepgrant/config.hpp"
#include "sleepgrant/error.hpp"
#include "sleepgrant/policies.hpp"
#include "sleepgrant/qos.hpp"
#include "sleepgrant/random.hpp"
#include "sleepgrant/traffic.hpp"

namespace sleepgrant::engine {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream tags for scenario-level randomness (shared by all replications).
inline constexpr std::uint64_t kScenarioReplication = ~std::uint64_t{0};
inline constexpr std::uint64_t kPopulationStream = 10;
inline constexpr std::uint64_t kMeanEstimateStream = 11;
inline constexpr std::uint64_t kCalibrationStream = 12;

/// One granted MTD in one slot.
struct GrantRecord {
    MtdId id = 0;
    double reward = 0.0;
    bool was_active = false;
    bool delivered = false;
    double deadline_ms = kNaN;  // remaining budget at the grant; NaN when inactive
    double rate_bps = 0.0;      // achieved rate when delivered
};

struct SlotRecord {
    std::vector<GrantRecord> grants;
    std::vector<MtdId> oracle;
    double oracle_reward = 0.0;                // sum of true means of the oracle choice
    double active_mean_deadline_ms = kNaN;     // NaN when nobody is active
};

/// Read-only view of one slot of a trace.
struct SlotView {
    std::uint64_t slot = 0;  // 1-based
    std::span<const MtdId> granted;
    std::span<const double> rewards;
    std::span<const std::uint8_t> was_active;
    std::span<const std::uint8_t> delivered;
    std::span<const double> deadlines_ms;
    std::span<const double> rates_bps;
    std::span<const MtdId> oracle;
    double oracle_reward = 0.0;
    double active_mean_deadline_ms = kNaN;
};

/// Per-slot log of one replication, stored column-wise.
class ExperimentTrace {
public:
    std::size_t slots() const { return oracle_reward_.size(); }

    void append(const SlotRecord& rec) {
        for (const auto& g : rec.grants) {
            granted_.push_back(g.id);
            rewards_.push_back(g.reward);
            was_active_.push_back(g.was_active);
            delivered_.push_back(g.delivered);
            deadlines_.push_back(g.deadline_ms);
            rates_.push_back(g.rate_bps);
        }
        grant_offsets_.push_back(granted_.size());
        oracle_ids_.insert(oracle_ids_.end(), rec.oracle.begin(), rec.oracle.end());
        oracle_offsets_.push_back(oracle_ids_.size());
        oracle_reward_.push_back(rec.oracle_reward);
        active_mean_deadline_.push_back(rec.active_mean_deadline_ms);
    }

    SlotView slot(std::size_t i) const {
        const auto g0 = grant_offsets_[i], g1 = grant_offsets_[i + 1];
        const auto o0 = oracle_offsets_[i], o1 = oracle_offsets_[i + 1];
        SlotView v;
        v.slot = i + 1;
        v.granted = std::span(granted_).subspan(g0, g1 - g0);
        v.rewards = std::span(rewards_).subspan(g0, g1 - g0);
        v.was_active = std::span(was_active_).subspan(g0, g1 - g0);
        v.delivered = std::span(delivered_).subspan(g0, g1 - g0);
        v.deadlines_ms = std::span(deadlines_).subspan(g0, g1 - g0);
        v.rates_bps = std::span(rates_).subspan(g0, g1 - g0);
        v.oracle = std::span(oracle_ids_).subspan(o0, o1 - o0);
        v.oracle_reward = oracle_reward_[i];
        v.active_mean_deadline_ms = active_mean_deadline_[i];
        return v;
    }

    void reserve(std::size_t slots, std::size_t grants_per_slot) {
        grant_offsets_.reserve(slots + 1);
        oracle_offsets_.reserve(slots + 1);
        oracle_reward_.reserve(slots);
        active_mean_deadline_.reserve(slots);
        const std::size_t g = slots * grants_per_slot;
        granted_.reserve(g);
        rewards_.reserve(g);
        was_active_.reserve(g);
        delivered_.reserve(g);
        deadlines_.reserve(g);
        rates_.reserve(g);
        oracle_ids_.reserve(g);
    }

    std::vector<double> cumulative_regret;
    traffic::PredictionErrorStats prediction_errors;
    std::vector<policies::ArmStats> final_arms;  // per-arm counters after the last slot

private:
    std::vector<std::size_t> grant_offsets_{0};
    std::vector<MtdId> granted_;
    std::vector<double> rewards_;
    std::vector<std::uint8_t> was_active_;
    std::vector<std::uint8_t> delivered_;
    std::vector<double> deadlines_;
    std::vector<double> rates_;
    std::vector<std::size_t> oracle_offsets_{0};
    std::vector<MtdId> oracle_ids_;
    std::vector<double> oracle_reward_;
    std::vector<double> active_mean_deadline_;
};

/// Static part of an experiment shared by every replication.
struct Scenario {
    std::vector<traffic::MtdProfile> population;
    std::vector<double> true_means;       // expected reward of an immediate grant, per MTD
    std::vector<double> mean_std_errors;  // zero in synthetic mode
    double max_rate_bps = 1.0;
};

inline channel::LinkParams link_for(const ExperimentConfig& cfg, const traffic::MtdProfile& mtd) {
    channel::LinkParams link;
    link.distance_km = mtd.distance_km;
    link.tx_power_dbm = mtd.tx_power_dbm;
    link.shadowing_sigma_db = cfg.shadowing_sigma_db;
    link.bandwidth_hz = cfg.bandwidth_hz;
    link.noise_psd_dbm_hz = cfg.noise_psd_dbm_hz;
    return link;
}

/// Devices uniform over the annulus [min_distance, radius]. Each device gets
/// a characteristic access budget: a centre uniform over the configured
/// range, widened by +-spread, minus the fixed transmission and processing
/// delays.
inline std::vector<traffic::MtdProfile> make_population(const ExperimentConfig& cfg, RngStream& rng) {
    std::vector<traffic::MtdProfile> pop(cfg.population);
    const double r0 = cfg.min_distance_km, r1 = cfg.cell_radius_km;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        auto& m = pop[i];
        m.id = static_cast<MtdId>(i);
        m.distance_km = std::sqrt(r0 * r0 + rng.uniform01() * (r1 * r1 - r0 * r0));
        m.tx_power_dbm = cfg.tx_power_dbm;
        m.value_mean = rng.uniform01();
        const double centre = rng.uniform(cfg.deadline_min_ms, cfg.deadline_max_ms);
        const double lo = std::max(cfg.deadline_min_ms, centre - cfg.deadline_spread_ms);
        const double hi = std::min(cfg.deadline_max_ms, centre + cfg.deadline_spread_ms);
        m.deadline_min_ms = qos::deadline_from_budget(lo, cfg.transmit_delay_ms, cfg.processing_delay_ms);
        m.deadline_max_ms = qos::deadline_from_budget(hi, cfg.transmit_delay_ms, cfg.processing_delay_ms);
    }
    return pop;
}

inline double population_max_rate(const ExperimentConfig& cfg, std::span<const traffic::MtdProfile> pop) {
    if (pop.empty()) return 1.0;
    const auto closest = std::min_element(pop.begin(), pop.end(), [](const auto& a, const auto& b) {
        return a.distance_km < b.distance_km;
    });
    return channel::reference_max_rate(link_for(cfg, *closest));
}

/// Reward of granting `mtd` its `packet` at `slot`, drawing a fresh channel.
struct PhysicalOutcome {
    double reward = 0.0;
    double rate_bps = 0.0;
    bool delivered = false;
};

inline PhysicalOutcome physical_reward(const ExperimentConfig& cfg, const traffic::MtdProfile& mtd,
                                       const traffic::Packet& packet, std::uint64_t slot, double max_rate_bps,
                                       RngStream& rng) {
    const auto link = link_for(cfg, mtd);
    const auto ch = channel::sample_channel(link, rng);
    const double rate = channel::rate(link, channel::snr(link, ch.composite_gain));
    qos::RewardInputs in;
    in.value = packet.value;
    in.norm_rate = channel::normalized_rate(rate, max_rate_bps);
    in.rate_bps = rate;
    in.deadline_ms = packet.deadline_ms;
    in.elapsed_ms = packet.elapsed_ms(slot, cfg.slot_ms);
    in.rate_threshold_bps = cfg.rate_threshold_bps;
    PhysicalOutcome out;
    out.delivered = qos::deliverable(in);
    out.reward = qos::reward(in, cfg.weights, cfg.gompertz);
    out.rate_bps = out.delivered ? rate : 0.0;
    return out;
}

struct MeanEstimates {
    std::vector<double> means;
    std::vector<double> std_errors;
};

/// Monte-Carlo expected reward of each MTD when it is active and granted as
/// soon as its packet is ready.
inline MeanEstimates estimate_true_means(const ExperimentConfig& cfg,
                                         std::span<const traffic::MtdProfile> population, double max_rate_bps,
                                         std::size_t samples, RngStream& rng) {
    if (samples == 0) throw DomainError("at least one sample is required");
    MeanEstimates est;
    est.means.reserve(population.size());
    est.std_errors.reserve(population.size());
    for (const auto& mtd : population) {
        double mean = 0.0, m2 = 0.0;
        for (std::size_t k = 1; k <= samples; ++k) {
            traffic::Packet packet;
            packet.deadline_ms = rng.uniform(mtd.deadline_min_ms, mtd.deadline_max_ms);
            packet.value = std::clamp(rng.normal(mtd.value_mean, cfg.value_std), 0.0, 1.0);
            const double x = physical_reward(cfg, mtd, packet, 0, max_rate_bps, rng).reward;
            const double delta = x - mean;
            mean += delta / static_cast<double>(k);
            m2 += delta * (x - mean);
        }
        est.means.push_back(mean);
        est.std_errors.push_back(samples > 1 ? std::sqrt(m2 / static_cast<double>(samples - 1) /
                                                         static_cast<double>(samples))
                                             : 0.0);
    }
    return est;
}

/// Configured means, or `population` values evenly spaced from mean_max
/// down to mean_min (MTD 0 is the best arm).
inline std::vector<double> synthetic_means(const ExperimentConfig& cfg) {
    if (!cfg.means.empty()) return cfg.means;
    std::vector<double> out(cfg.population);
    if (cfg.population == 1) {
        out[0] = cfg.mean_max;
        return out;
    }
    const double step = (cfg.mean_max - cfg.mean_min) / static_cast<double>(cfg.population - 1);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = cfg.mean_max - step * static_cast<double>(i);
    return out;
}

inline Scenario build_scenario(const ExperimentConfig& cfg) {
    cfg.validate();
    Scenario sc;
    RngStream pop_rng(derive_seed(cfg.seed, kScenarioReplication, kPopulationStream));
    sc.population = make_population(cfg, pop_rng);
    sc.max_rate_bps = population_max_rate(cfg, sc.population);
    if (cfg.mode == RewardMode::synthetic) {
        sc.true_means = synthetic_means(cfg);
        sc.mean_std_errors.assign(sc.true_means.size(), 0.0);
    } else {
        RngStream mean_rng(derive_seed(cfg.seed, kScenarioReplication, kMeanEstimateStream));
        auto est = estimate_true_means(cfg, sc.population, sc.max_rate_bps, cfg.mean_samples, mean_rng);
        sc.true_means = std::move(est.means);
        sc.mean_std_errors = std::move(est.std_errors);
    }
    return sc;
}

namespace detail {

// Sum in descending order so equal multisets give bit-identical sums.
inline double ordered_sum(std::vector<double>& values) {
    std::sort(values.begin(), values.end(), std::greater<>());
    double s = 0.0;
    for (double v : values) s += v;
    return s;
}

inline std::vector<MtdId> choose(const ExperimentConfig& cfg, const policies::PolicyState& state,
                                 const traffic::SlotState& truth, const traffic::Prediction& pred,
                                 std::span<const double> means, RngStream& rng) {
    using policies::Policy;
    switch (cfg.policy) {
        case Policy::random:
            return policies::random_policy(pred, cfg.grants, rng);
        case Policy::oracle:
            return policies::oracle_policy(truth, means, cfg.grants);
        case Policy::prob_sleeping_ucb:
        case Policy::sleeping_ucb: {
            const auto w = cfg.policy == Policy::prob_sleeping_ucb ? policies::Weighting::probabilistic
                                                                   : policies::Weighting::unweighted;
            if (cfg.grants == 1) {
                auto one = policies::select_single(state, pred, rng, w);
                return one ? std::vector<MtdId>{*one} : std::vector<MtdId>{};
            }
            return policies::select_multiple(state, pred, cfg.grants, rng, w);
        }
    }
    return {};
}

}  // namespace detail

/// Regret increments are the summed true means of the per-slot oracle choice
/// minus those of the granted MTDs that were active. Inactive grants earn
/// nothing, so they cost the full oracle mean.
inline std::vector<double> cumulative_regret(const ExperimentTrace& trace, std::span<const double> true_means) {
    std::vector<double> out;
    out.reserve(trace.slots());
    double total = 0.0;
    std::vector<double> best, played;
    auto mean_of = [&](MtdId id) {
        if (id >= true_means.size()) throw ContractError("no true mean for MTD " + std::to_string(id));
        return true_means[id];
    };
    for (std::size_t i = 0; i < trace.slots(); ++i) {
        const auto s = trace.slot(i);
        best.clear();
        played.clear();
        for (MtdId id : s.oracle) best.push_back(mean_of(id));
        for (std::size_t g = 0; g < s.granted.size(); ++g) {
            const double mu = mean_of(s.granted[g]);
            if (s.was_active[g]) played.push_back(mu);
        }
        total += std::max(0.0, detail::ordered_sum(best) - detail::ordered_sum(played));
        out.push_back(total);
    }
    return out;
}

/// One replication of the slot loop.
inline ExperimentTrace run_replication(const ExperimentConfig& cfg, const Scenario& sc, std::uint64_t replication) {
    ReplicationStreams rng(cfg.seed, replication);
    policies::PolicyState state(cfg.population, cfg.psi);
    traffic::ActivityParams activity{cfg.active, cfg.slot_ms, cfg.value_std};
    traffic::PredictionErrorAccumulator errors;

    ExperimentTrace trace;
    trace.reserve(cfg.horizon, cfg.grants);
    std::vector<traffic::ActiveDevice> carry;
    SlotRecord rec;
    std::vector<double> oracle_means;

    for (std::uint64_t slot = 0; slot < cfg.horizon; ++slot) {
        const auto truth = traffic::step_activity(sc.population, activity, carry, slot, rng.traffic);
        const auto pred = traffic::predict(truth, cfg.population, cfg.predictor, rng.prediction);
        errors.add(truth, pred);

        const auto granted = detail::choose(cfg, state, truth, pred, sc.true_means, rng.policy);

        rec.grants.clear();
        std::vector<MtdId> served;
        for (MtdId id : granted) {
            GrantRecord g;
            g.id = id;
            if (const auto* dev = truth.find(id)) {
                g.was_active = true;
                g.deadline_ms = dev->packet.remaining_ms(slot, cfg.slot_ms);
                if (cfg.mode == RewardMode::synthetic) {
                    g.reward = rng.reward.bernoulli(sc.true_means[id]) ? 1.0 : 0.0;
                    g.delivered = true;
                } else {
                    const auto out = physical_reward(cfg, sc.population[id], dev->packet, slot, sc.max_rate_bps,
                                                     rng.channel);
                    g.reward = out.reward;
                    g.delivered = out.delivered;
                    g.rate_bps = out.rate_bps;
                }
                if (g.delivered) served.push_back(id);
            }
            policies::update(state, granted, id, g.reward, g.was_active);
            rec.grants.push_back(g);
        }
        policies::advance_slot(state);

        rec.oracle = policies::oracle_policy(truth, sc.true_means, cfg.grants);
        oracle_means.clear();
        for (MtdId id : rec.oracle) oracle_means.push_back(sc.true_means[id]);
        rec.oracle_reward = detail::ordered_sum(oracle_means);
        if (truth.size() > 0) {
            double sum = 0.0;
            for (const auto& d : truth.devices) sum += d.packet.remaining_ms(slot, cfg.slot_ms);
            rec.active_mean_deadline_ms = sum / static_cast<double>(truth.size());
        } else {
            rec.active_mean_deadline_ms = kNaN;
        }
        trace.append(rec);

        carry.clear();
        if (cfg.carryover == Carryover::failed) {
            for (const auto& g : rec.grants) {
                if (g.was_active && !g.delivered) carry.push_back(*truth.find(g.id));
            }
        } else if (cfg.carryover == Carryover::unscheduled) {
            for (const auto& d : truth.devices) {
                if (std::find(served.begin(), served.end(), d.id) == served.end()) carry.push_back(d);
            }
        }
    }

    trace.cumulative_regret = cumulative_regret(trace, sc.true_means);
    trace.prediction_errors = errors.result();
    trace.final_arms = state.arms;
    return trace;
}

/// Replication 0 of `cfg`.
inline ExperimentTrace run_experiment(const ExperimentConfig& cfg) {
    const auto sc = build_scenario(cfg);
    return run_replication(cfg, sc, 0);
}

/// Replications [first, first + count) on up to `threads` workers. Results
/// are ordered by replication index and independent of the thread count.
inline std::vector<ExperimentTrace> run_replications(const ExperimentConfig& cfg, const Scenario& sc,
                                                     std::uint64_t first, std::size_t count,
                                                     unsigned threads = std::thread::hardware_concurrency()) {
    std::vector<ExperimentTrace> out(count);
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) out[i] = run_replication(cfg, sc, first + i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        out[i] = run_replication(cfg, sc, first + i);
                    } catch (...) {
                        if (!failed.exchange(true)) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

struct DelayStats {
    double mean_selected_deadline_ms = 0.0;
    double mean_active_deadline_ms = 0.0;
    std::vector<std::pair<std::uint64_t, double>> scatter;  // slot, mean deadline of granted active MTDs
};

/// Remaining budgets of granted active MTDs against the active-set average.
/// Both means are averages of per-slot means.
inline DelayStats delay_stats(const ExperimentTrace& trace) {
    DelayStats out;
    double sel_sum = 0.0, pop_sum = 0.0;
    std::size_t sel_slots = 0, pop_slots = 0;
    for (std::size_t i = 0; i < trace.slots(); ++i) {
        const auto s = trace.slot(i);
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t g = 0; g < s.granted.size(); ++g) {
            if (!s.was_active[g]) continue;
            sum += s.deadlines_ms[g];
            ++n;
        }
        if (n > 0) {
            const double m = sum / static_cast<double>(n);
            out.scatter.emplace_back(s.slot, m);
            sel_sum += m;
            ++sel_slots;
        }
        if (!std::isnan(s.active_mean_deadline_ms)) {
            pop_sum += s.active_mean_deadline_ms;
            ++pop_slots;
        }
    }
    out.mean_selected_deadline_ms = sel_slots ? sel_sum / static_cast<double>(sel_slots) : 0.0;
    out.mean_active_deadline_ms = pop_slots ? pop_sum / static_cast<double>(pop_slots) : 0.0;
    return out;
}

struct ThroughputStats {
    double mean_sum_rate_bps = 0.0;
    std::vector<std::pair<std::uint64_t, double>> scatter;  // slot, sum of delivered rates
};

inline ThroughputStats throughput_stats(const ExperimentTrace& trace) {
    ThroughputStats out;
    out.scatter.reserve(trace.slots());
    double total = 0.0;
    for (std::size_t i = 0; i < trace.slots(); ++i) {
        const auto s = trace.slot(i);
        double sum = 0.0;
        for (double r : s.rates_bps) sum += r;
        out.scatter.emplace_back(s.slot, sum);
        total += sum;
    }
    out.mean_sum_rate_bps = trace.slots() ? total / static_cast<double>(trace.slots()) : 0.0;
    return out;
}

/// Closed-form regret bound with the O(1) term taken as zero:
///
///   (8 psi ln(T P_av) + f_e1 T) * sum_j 1 / (P_{j+1} mu_{j+1} - P_j mu_j)^2 + mu_1 f_e2 T
///
/// with arms ranked by decreasing mean and P_av the average probability.
inline double theoretical_regret_bound(std::span<const double> means, std::span<const double> probs, double psi,
                                       double horizon, double f_e1, double f_e2) {
    if (means.empty() || means.size() != probs.size()) {
        throw DomainError("bound needs one probability per arm");
    }
    if (!(psi > 0.0) || !(horizon >= 1.0) || f_e1 < 0.0 || f_e2 < 0.0) {
        throw DomainError("bound needs psi > 0, T >= 1 and nonnegative error terms");
    }
    std::vector<std::size_t> order(means.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return means[a] > means[b]; });

    std::vector<double> weighted;
    for (auto i : order) weighted.push_back(probs[i] * means[i]);
    auto sorted = weighted;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw DomainError("weighted means must be pairwise distinct");
    }

    double gap_sum = 0.0;
    for (std::size_t j = 0; j + 1 < weighted.size(); ++j) {
        const double gap = weighted[j + 1] - weighted[j];
        gap_sum += 1.0 / (gap * gap);
    }
    const double p_av = std::accumulate(probs.begin(), probs.end(), 0.0) / static_cast<double>(probs.size());
    const double log_term = 8.0 * psi * std::max(0.0, std::log(horizon * p_av));
    return (log_term + f_e1 * horizon) * gap_sum + means[order.front()] * f_e2 * horizon;
}

struct CoveragePoint {
    std::uint64_t t = 0;
    double violation_rate = 0.0;
    double bound = 0.0;       // 2 / t^(2 psi)
    double std_error = 0.0;   // binomial standard error at min(bound, 1)
};

/// Empirical check of the confidence interval mean_hat +- sqrt(psi ln t / t)
/// on a single always-active Bernoulli arm.
inline std::vector<CoveragePoint> confidence_coverage_test(double psi, std::uint64_t horizon,
                                                           std::size_t replications, double mean, RngStream& rng) {
    if (replications < 100) throw DomainError("coverage test needs at least 100 replications");
    if (!(psi > 0.0)) throw DomainError("psi must be positive");
    std::vector<std::uint64_t> violations(horizon, 0);
    for (std::size_t r = 0; r < replications; ++r) {
        double sum = 0.0;
        for (std::uint64_t t = 1; t <= horizon; ++t) {
            sum += rng.bernoulli(mean) ? 1.0 : 0.0;
            const double td = static_cast<double>(t);
            const double radius = std::sqrt(psi * std::log(td) / td);
            if (std::abs(sum / td - mean) > radius) ++violations[t - 1];
        }
    }
    std::vector<CoveragePoint> out(horizon);
    for (std::uint64_t t = 1; t <= horizon; ++t) {
        auto& p = out[t - 1];
        p.t = t;
        p.violation_rate = static_cast<double>(violations[t - 1]) / static_cast<double>(replications);
        p.bound = 2.0 / std::pow(static_cast<double>(t), 2.0 * psi);
        const double q = std::min(p.bound, 1.0);
        p.std_error = std::sqrt(q * (1.0 - q) / static_cast<double>(replications));
    }
    return out;
}

}  // namespace sleepgrant::engine
