#pragma once

// Grant scheduling policies.
//
// The learning policy keeps, per MTD, the reward sum z, the number of grants
// n and the number of grants that found the MTD active n'. Only active plays
// move z, n' and the global active-play counter t'; the index of an arm is
//
//     P_i * ( z_i / n'_i + sqrt(psi * ln t' / n'_i) )
//
// and arms with n'_i = 0 are always served first.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sleepgrant/error.hpp"
#include "sleepgrant/random.hpp"
#include "sleepgrant/traffic.hpp"

namespace sleepgrant::policies {

enum class Policy { prob_sleeping_ucb, sleeping_ucb, random, oracle };

inline std::string_view to_string(Policy p) {
    switch (p) {
        case Policy::prob_sleeping_ucb: return "prob-sleeping-ucb";
        case Policy::sleeping_ucb: return "sleeping-ucb";
        case Policy::random: return "random";
        case Policy::oracle: return "oracle";
    }
    return "unknown";
}

inline std::optional<Policy> parse_policy(std::string_view name) {
    for (Policy p : {Policy::prob_sleeping_ucb, Policy::sleeping_ucb, Policy::random, Policy::oracle}) {
        if (name == to_string(p)) return p;
    }
    return std::nullopt;
}

/// Whether activity probabilities scale the index. Unweighted selection is
/// the plain sleeping-UCB baseline.
enum class Weighting { probabilistic, unweighted };

struct ArmStats {
    double z = 0.0;
    std::uint64_t n = 0;
    std::uint64_t n_active = 0;
};

struct PolicyState {
    std::vector<ArmStats> arms;  // indexed by MtdId
    std::uint64_t t = 0;
    std::uint64_t t_active = 0;
    double psi = 1.0;

    PolicyState() = default;
    PolicyState(std::size_t num_arms, double exploration) : arms(num_arms), psi(exploration) {
        if (!(exploration > 0.0)) throw DomainError("psi must be positive");
    }

    const ArmStats& arm(MtdId id) const {
        if (id >= arms.size()) throw ContractError("arm id outside the policy state");
        return arms[id];
    }
};

inline double confidence_radius(std::uint64_t n_active, std::uint64_t t_active, double psi) {
    return std::sqrt(psi * std::log(static_cast<double>(t_active)) / static_cast<double>(n_active));
}

inline double ucb_index(const ArmStats& s, std::uint64_t t_active, double psi) {
    if (s.n_active == 0 || t_active == 0) {
        throw ContractError("ucb index needs at least one active play");
    }
    return s.z / static_cast<double>(s.n_active) + confidence_radius(s.n_active, t_active, psi);
}

namespace detail {

inline double weighted_index(const PolicyState& state, const traffic::Candidate& c, Weighting w) {
    const double index = ucb_index(state.arm(c.id), state.t_active, state.psi);
    return w == Weighting::probabilistic ? c.probability * index : index;
}

inline std::vector<MtdId> unplayed(const PolicyState& state, const traffic::Prediction& pred) {
    std::vector<MtdId> out;
    for (const auto& c : pred.members) {
        if (state.arm(c.id).n_active == 0) out.push_back(c.id);
    }
    return out;
}

// Position of the largest value; ties broken uniformly by `rng`, which is
// only consumed when a tie exists.
inline std::size_t argmax_random_ties(std::span<const double> values, RngStream& rng) {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> ties;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] > best) {
            best = values[i];
            ties.assign(1, i);
        } else if (values[i] == best) {
            ties.push_back(i);
        }
    }
    return ties[rng.uniform_index(ties.size())];
}

// First `count` entries become a uniform sample without replacement.
template <typename T>
void partial_shuffle(std::vector<T>& items, std::size_t count, RngStream& rng) {
    count = std::min(count, items.size());
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.uniform_index(items.size() - i);
        std::swap(items[i], items[j]);
    }
}

}  // namespace detail

/// One grant. Returns nullopt when the candidate set is empty.
inline std::optional<MtdId> select_single(const PolicyState& state, const traffic::Prediction& pred,
                                          RngStream& rng,
                                          Weighting weighting = Weighting::probabilistic) {
    if (pred.empty()) return std::nullopt;

    const auto fresh = detail::unplayed(state, pred);
    if (!fresh.empty()) return fresh[rng.uniform_index(fresh.size())];

    std::vector<double> values;
    values.reserve(pred.size());
    for (const auto& c : pred.members) values.push_back(detail::weighted_index(state, c, weighting));
    return pred.members[detail::argmax_random_ties(values, rng)].id;
}

/// Up to `grants` distinct grants: never-played candidates first (sampled
/// uniformly if they outnumber the grants), then the rest in descending
/// index order with random tie-breaking.
inline std::vector<MtdId> select_multiple(const PolicyState& state, const traffic::Prediction& pred,
                                          std::size_t grants, RngStream& rng,
                                          Weighting weighting = Weighting::probabilistic) {
    if (grants == 0) throw ContractError("at least one grant per slot is required");

    auto chosen = detail::unplayed(state, pred);
    if (chosen.size() >= grants) {
        detail::partial_shuffle(chosen, grants, rng);
        chosen.resize(grants);
        return chosen;
    }

    std::vector<MtdId> ids;
    std::vector<double> values;
    for (const auto& c : pred.members) {
        if (state.arm(c.id).n_active == 0) continue;
        ids.push_back(c.id);
        values.push_back(detail::weighted_index(state, c, weighting));
    }
    while (chosen.size() < grants && !ids.empty()) {
        const std::size_t pick = detail::argmax_random_ties(values, rng);
        chosen.push_back(ids[pick]);
        ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(pick));
        values.erase(values.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return chosen;
}

/// Feedback for one granted MTD. Inactive plays only count towards n.
inline void update(PolicyState& state, std::span<const MtdId> granted, MtdId id, double reward,
                   bool was_active) {
    if (std::find(granted.begin(), granted.end(), id) == granted.end()) {
        throw ContractError("update for an MTD that was not granted this slot");
    }
    if (id >= state.arms.size()) throw ContractError("arm id outside the policy state");
    auto& arm = state.arms[id];
    ++arm.n;
    if (!was_active) return;
    if (!(reward >= 0.0 && reward <= 1.0)) throw ContractError("reward must lie in [0, 1]");
    arm.z += reward;
    ++arm.n_active;
    ++state.t_active;
}

inline void advance_slot(PolicyState& state) { ++state.t; }

/// Uniform sample without replacement of up to `grants` candidates.
inline std::vector<MtdId> random_policy(const traffic::Prediction& pred, std::size_t grants,
                                        RngStream& rng) {
    if (grants == 0) throw ContractError("at least one grant per slot is required");
    auto ids = pred.ids();
    detail::partial_shuffle(ids, grants, rng);
    ids.resize(std::min(grants, ids.size()));
    return ids;
}

/// Clairvoyant choice: the `grants` truly active MTDs with the highest true
/// mean reward. Ties go to the lower id.
inline std::vector<MtdId> oracle_policy(const traffic::SlotState& truth, std::span<const double> true_means,
                                        std::size_t grants) {
    auto ids = truth.active_ids();
    for (MtdId id : ids) {
        if (id >= true_means.size()) throw ContractError("no true mean for an active MTD");
    }
    const std::size_t keep = std::min(grants, ids.size());
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep), ids.end(),
                      [&](MtdId a, MtdId b) {
                          return true_means[a] != true_means[b] ? true_means[a] > true_means[b] : a < b;
                      });
    ids.resize(keep);
    return ids;
}

}  // namespace sleepgrant::policies
