#pragma once

// Ground-truth MTD activity and an emulated source-traffic predictor.
//
// Every slot a fixed number of MTDs hold a packet. Packets carried over from
// the previous slot keep their birth slot, so their remaining budget shrinks
// by one slot duration per slot until they are delivered or expire. The
// predictor reports a candidate set with per-member activity probabilities;
// truly active members are under-weighted (error 1 - P) and inactive members
// may leak in with weight P.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sleepgrant/error.hpp"
#include "sleepgrant/random.hpp"

namespace sleepgrant {

using MtdId = std::uint32_t;

namespace traffic {

struct MtdProfile {
    MtdId id = 0;
    double distance_km = 0.5;
    double tx_power_dbm = 10.0;
    double value_mean = 0.5;
    double deadline_min_ms = 1.0;
    double deadline_max_ms = 300.0;
};

struct Packet {
    std::uint64_t birth_slot = 0;
    double deadline_ms = 0.0;  // budget when the packet became ready
    double value = 0.0;

    double elapsed_ms(std::uint64_t slot, double slot_ms) const {
        return static_cast<double>(slot - birth_slot) * slot_ms;
    }
    double remaining_ms(std::uint64_t slot, double slot_ms) const {
        return deadline_ms - elapsed_ms(slot, slot_ms);
    }
};

struct ActiveDevice {
    MtdId id = 0;
    Packet packet;
};

/// Ground truth for one slot. `devices` is sorted by id and holds exactly
/// one packet per active MTD.
struct SlotState {
    std::uint64_t slot = 0;
    std::vector<ActiveDevice> devices;

    const ActiveDevice* find(MtdId id) const {
        auto it = std::lower_bound(devices.begin(), devices.end(), id,
                                   [](const ActiveDevice& d, MtdId v) { return d.id < v; });
        return (it != devices.end() && it->id == id) ? &*it : nullptr;
    }
    bool is_active(MtdId id) const { return find(id) != nullptr; }
    std::size_t size() const { return devices.size(); }

    std::vector<MtdId> active_ids() const {
        std::vector<MtdId> ids;
        ids.reserve(devices.size());
        for (const auto& d : devices) ids.push_back(d.id);
        return ids;
    }
};

struct ActivityParams {
    std::size_t k_active = 10;
    double slot_ms = 1.0;
    double value_std = 0.1;
};

/// Builds the slot's active set: surviving carry-over packets first, then
/// fresh MTDs drawn uniformly without replacement up to `k_active`.
/// Population ids must equal their index.
inline SlotState step_activity(std::span<const MtdProfile> population, const ActivityParams& params,
                               std::span<const ActiveDevice> carryover, std::uint64_t slot,
                               RngStream& rng) {
    const std::size_t m = population.size();
    if (params.k_active > m) {
        throw ConfigError("population.active", "active count exceeds population size");
    }

    SlotState state;
    state.slot = slot;
    state.devices.reserve(params.k_active);
    std::vector<char> taken(m, 0);
    for (const auto& carried : carryover) {
        if (carried.id >= m) throw ContractError("carry-over id outside the population");
        if (taken[carried.id]) throw ContractError("duplicate carry-over id");
        if (carried.packet.remaining_ms(slot, params.slot_ms) <= 0.0) continue;
        taken[carried.id] = 1;
        state.devices.push_back(carried);
    }

    // Rejection sampling; cheap while k_active is well below m.
    while (state.devices.size() < params.k_active) {
        const auto idx = static_cast<MtdId>(rng.uniform_index(m));
        if (taken[idx]) continue;
        taken[idx] = 1;
        const auto& mtd = population[idx];
        ActiveDevice fresh;
        fresh.id = mtd.id;
        fresh.packet.birth_slot = slot;
        fresh.packet.deadline_ms = rng.uniform(mtd.deadline_min_ms, mtd.deadline_max_ms);
        fresh.packet.value = std::clamp(rng.normal(mtd.value_mean, params.value_std), 0.0, 1.0);
        state.devices.push_back(fresh);
    }

    std::sort(state.devices.begin(), state.devices.end(),
              [](const ActiveDevice& a, const ActiveDevice& b) { return a.id < b.id; });
    return state;
}

struct Candidate {
    MtdId id = 0;
    double probability = 1.0;
};

/// Predicted active set with activity probabilities, sorted by id.
struct Prediction {
    std::vector<Candidate> members;

    bool empty() const { return members.empty(); }
    std::size_t size() const { return members.size(); }

    std::vector<MtdId> ids() const {
        std::vector<MtdId> out;
        out.reserve(members.size());
        for (const auto& c : members) out.push_back(c.id);
        return out;
    }
};

struct ProbabilityInterval {
    double lo = 1.0;
    double hi = 1.0;
};

struct PredictorConfig {
    ProbabilityInterval interval{0.8, 1.0};
    double miss_rate = 0.0;
    double false_positive_rate = 0.05;
    /// Weights given to inactive MTDs that leak into the candidate set. When
    /// unset, the mirror image of `interval`, [1 - hi, 1 - lo], floored at
    /// kMinProbability: a leaked member's error P is then distributed like an
    /// active member's error 1 - P.
    std::optional<ProbabilityInterval> false_positive_interval;

    static constexpr double kMinProbability = 0.01;

    ProbabilityInterval effective_false_positive_interval() const {
        if (false_positive_interval) return *false_positive_interval;
        return {std::max(kMinProbability, 1.0 - interval.hi),
                std::max(kMinProbability, 1.0 - interval.lo)};
    }

    static PredictorConfig perfect() {
        PredictorConfig cfg;
        cfg.interval = {1.0, 1.0};
        cfg.miss_rate = 0.0;
        cfg.false_positive_rate = 0.0;
        return cfg;
    }

    void validate() const {
        auto check = [](const ProbabilityInterval& iv, const char* key) {
            if (!(iv.lo > 0.0 && iv.lo <= iv.hi && iv.hi <= 1.0)) {
                throw ConfigError(key, "probability interval must satisfy 0 < lo <= hi <= 1");
            }
        };
        check(interval, "predictor.p_min");
        if (false_positive_interval) check(*false_positive_interval, "predictor.fp_p_min");
        if (!(miss_rate >= 0.0 && miss_rate <= 1.0)) {
            throw ConfigError("predictor.miss_rate", "must lie in [0, 1]");
        }
        if (!(false_positive_rate >= 0.0 && false_positive_rate < 1.0)) {
            throw ConfigError("predictor.false_positive_rate", "must lie in [0, 1)");
        }
    }
};

/// Emulated predictor. Draw order: truly active MTDs by id (miss test, then
/// probability), then leaked inactive MTDs by id.
inline Prediction predict(const SlotState& truth, std::size_t population_size,
                          const PredictorConfig& cfg, RngStream& rng) {
    Prediction pred;
    pred.members.reserve(truth.size() + 4);
    for (const auto& d : truth.devices) {
        if (cfg.miss_rate > 0.0 && rng.bernoulli(cfg.miss_rate)) continue;
        pred.members.push_back({d.id, rng.uniform(cfg.interval.lo, cfg.interval.hi)});
    }

    if (cfg.false_positive_rate > 0.0 && truth.size() < population_size) {
        std::vector<MtdId> inactive;
        inactive.reserve(population_size - truth.size());
        std::size_t cursor = 0;
        for (std::size_t id = 0; id < population_size; ++id) {
            if (cursor < truth.devices.size() && truth.devices[cursor].id == id) {
                ++cursor;
                continue;
            }
            inactive.push_back(static_cast<MtdId>(id));
        }
        const auto fp = cfg.effective_false_positive_interval();
        const std::size_t before = pred.members.size();
        std::uint64_t pos = rng.geometric(cfg.false_positive_rate);
        while (pos < inactive.size()) {
            pred.members.push_back({inactive[pos], rng.uniform(fp.lo, fp.hi)});
            const std::uint64_t skip = rng.geometric(cfg.false_positive_rate);
            if (skip >= inactive.size()) break;
            pos += skip + 1;
        }
        std::inplace_merge(pred.members.begin(), pred.members.begin() + static_cast<std::ptrdiff_t>(before),
                           pred.members.end(),
                           [](const Candidate& a, const Candidate& b) { return a.id < b.id; });
    }
    return pred;
}

struct PredictionErrorStats {
    double mean_e1 = 0.0;  // mean of 1 - P over truly active candidates
    double mean_e2 = 0.0;  // mean of P over inactive candidates
    std::uint64_t misses = 0;
    std::uint64_t false_positives = 0;
    std::uint64_t true_positives = 0;
    double false_positive_mass = 0.0;  // sum of P over inactive candidates
    double total_mass = 0.0;           // sum of P over all candidates
    std::uint64_t slots = 0;
};

/// Streaming form of prediction_error_stats.
class PredictionErrorAccumulator {
public:
    void add(const SlotState& truth, const Prediction& pred) {
        std::size_t ti = 0;
        std::uint64_t hits = 0;
        for (const auto& c : pred.members) {
            while (ti < truth.devices.size() && truth.devices[ti].id < c.id) ++ti;
            const bool active = ti < truth.devices.size() && truth.devices[ti].id == c.id;
            stats_.total_mass += c.probability;
            if (active) {
                e1_sum_ += 1.0 - c.probability;
                ++hits;
            } else {
                stats_.false_positive_mass += c.probability;
                ++stats_.false_positives;
            }
        }
        stats_.true_positives += hits;
        stats_.misses += truth.size() - hits;
        ++stats_.slots;
    }

    PredictionErrorStats result() const {
        PredictionErrorStats out = stats_;
        out.mean_e1 = out.true_positives ? e1_sum_ / static_cast<double>(out.true_positives) : 0.0;
        out.mean_e2 = out.false_positives
                          ? out.false_positive_mass / static_cast<double>(out.false_positives)
                          : 0.0;
        return out;
    }

private:
    PredictionErrorStats stats_;
    double e1_sum_ = 0.0;
};

inline PredictionErrorStats prediction_error_stats(std::span<const SlotState> truth,
                                                   std::span<const Prediction> predictions) {
    if (truth.size() != predictions.size()) {
        throw ContractError("truth and prediction streams have different lengths");
    }
    PredictionErrorAccumulator acc;
    for (std::size_t i = 0; i < truth.size(); ++i) acc.add(truth[i], predictions[i]);
    return acc.result();
}

}  // namespace traffic
}  // namespace sleepgrant
