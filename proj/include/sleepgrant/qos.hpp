#pragma once

// Quality-of-service scoring: delay urgency, compound utility and the
// indicator-gated reward a scheduled MTD returns.

#include <cmath>

#include "sleepgrant/error.hpp"

namespace sleepgrant::qos {

/// Modified (decreasing) Gompertz curve a - a*exp(-b*exp(-c*d)).
struct GompertzParams {
    double a = 1.0;  // asymptote
    double b = 8.0;  // displacement
    double c = 0.03; // steepness, per ms

    void validate() const {
        if (!(a > 0.0 && a <= 1.0)) throw DomainError("gompertz a must lie in (0, 1]");
        if (!(b > 0.0)) throw DomainError("gompertz b must be positive");
        if (!(c > 0.0)) throw DomainError("gompertz c must be positive");
    }
};

struct UtilityWeights {
    double alpha = 0.2;  // data value
    double beta = 0.3;   // normalized rate
    double gamma = 0.5;  // delay score

    static constexpr double kSumTolerance = 1e-9;

    void validate() const {
        for (double w : {alpha, beta, gamma}) {
            if (!(w >= 0.0 && w <= 1.0)) throw DomainError("utility weights must lie in [0, 1]");
        }
        if (std::abs(alpha + beta + gamma - 1.0) > kSumTolerance) {
            throw DomainError("utility weights must sum to 1");
        }
    }
};

/// Everything the reward needs about one scheduled packet.
/// `deadline_ms` is the budget the packet had when it became ready and
/// `elapsed_ms` the time it has waited since; the delay score is taken on
/// what is left of the budget.
struct RewardInputs {
    double value = 0.0;
    double norm_rate = 0.0;
    double rate_bps = 0.0;
    double deadline_ms = 0.0;
    double elapsed_ms = 0.0;
    double rate_threshold_bps = 0.0;
};

inline double gompertz_score(double deadline_ms, const GompertzParams& p) {
    if (!(deadline_ms >= 0.0)) throw DomainError("deadline must be nonnegative");
    return p.a - p.a * std::exp(-p.b * std::exp(-p.c * deadline_ms));
}

inline double utility(double value, double norm_rate, double delay_score, const UtilityWeights& w) {
    return w.alpha * value + w.beta * norm_rate + w.gamma * delay_score;
}

/// True when both reward indicators hold: rate strictly above the threshold
/// and the packet still inside its budget.
inline bool deliverable(const RewardInputs& in) {
    return in.rate_bps > in.rate_threshold_bps && in.deadline_ms > in.elapsed_ms;
}

inline double reward(const RewardInputs& in, const UtilityWeights& w, const GompertzParams& g) {
    if (!deliverable(in)) return 0.0;
    return utility(in.value, in.norm_rate, gompertz_score(in.deadline_ms - in.elapsed_ms, g), w);
}

/// Access-delay budget left after the fixed transmission and processing delays.
inline double deadline_from_budget(double total_ms, double transmit_ms, double processing_ms) {
    if (!(total_ms >= 0.0 && transmit_ms >= 0.0 && processing_ms >= 0.0)) {
        throw DomainError("delay components must be nonnegative");
    }
    if (total_ms < transmit_ms + processing_ms) {
        throw DomainError("delay budget is smaller than its fixed components");
    }
    return total_ms - transmit_ms - processing_ms;
}

}  // namespace sleepgrant::qos
