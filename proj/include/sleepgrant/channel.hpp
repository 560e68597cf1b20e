#pragma once

// Large-scale and small-scale fading, SNR and Shannon rate for an MTD-to-BS
// uplink. Gains are linear power ratios; powers are configured in dBm.

#include <algorithm>
#include <cmath>
#include <string>

#include "sleepgrant/error.hpp"
#include "sleepgrant/random.hpp"

namespace sleepgrant::channel {

struct LinkParams {
    double distance_km = 0.5;
    double tx_power_dbm = 10.0;
    double shadowing_sigma_db = 10.0;
    double bandwidth_hz = 360e3;
    double noise_psd_dbm_hz = -174.0;

    void validate() const {
        if (!(distance_km > 0.0)) throw DomainError("link distance must be positive");
        if (!(bandwidth_hz > 0.0)) throw DomainError("link bandwidth must be positive");
        if (!(shadowing_sigma_db >= 0.0)) throw DomainError("shadowing sigma must be nonnegative");
    }
};

struct ChannelRealization {
    double large_scale_gain = 0.0;  // path loss and shadowing
    double small_scale_gain = 0.0;  // Rayleigh power gain |g|^2
    double composite_gain = 0.0;    // |h|^2
};

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

/// Macro-cell path loss in dB; distance in km.
inline double path_loss_db(double distance_km) {
    if (!(distance_km > 0.0)) throw DomainError("path loss requires a positive distance");
    return 128.1 + 37.6 * std::log10(distance_km);
}

inline double large_scale_gain(double distance_km, double shadowing_db) {
    return std::pow(10.0, -(path_loss_db(distance_km) + shadowing_db) / 10.0);
}

/// Shadowing is drawn first, then fading; both are drawn on every call.
inline ChannelRealization sample_channel(const LinkParams& link, RngStream& rng) {
    link.validate();
    const double shadow_db = link.shadowing_sigma_db * rng.normal();
    ChannelRealization out;
    out.large_scale_gain = large_scale_gain(link.distance_km, shadow_db);
    out.small_scale_gain = rng.exponential();
    out.composite_gain = out.large_scale_gain * out.small_scale_gain;
    return out;
}

inline double snr(const LinkParams& link, double gain) {
    if (!(gain >= 0.0)) throw DomainError("channel gain must be nonnegative");
    const double noise_w = link.bandwidth_hz * dbm_to_watts(link.noise_psd_dbm_hz);
    return dbm_to_watts(link.tx_power_dbm) * gain / noise_w;
}

/// Shannon rate in bit/s.
inline double rate(const LinkParams& link, double snr_linear) {
    if (!(snr_linear >= 0.0)) throw DomainError("snr must be nonnegative");
    return link.bandwidth_hz * std::log2(1.0 + snr_linear);
}

inline double normalized_rate(double rate_bps, double max_rate_bps) {
    if (!(max_rate_bps > 0.0)) throw DomainError("maximum rate must be positive");
    return std::min(rate_bps / max_rate_bps, 1.0);
}

/// 99th percentile of the unit-mean exponential fading gain, -ln(0.01).
inline constexpr double kFadingGainP99 = 4.605170185988091;

/// Rate normalizer for a population: the link of the closest device with no
/// shadowing and fading at its 99th percentile.
inline double reference_max_rate(const LinkParams& closest) {
    const double gain = large_scale_gain(closest.distance_km, 0.0) * kFadingGainP99;
    return rate(closest, snr(closest, gain));
}

}  // namespace sleepgrant::channel
