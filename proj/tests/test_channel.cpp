#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sleepgrant/channel.hpp"

namespace sg = sleepgrant;
using namespace sleepgrant::channel;

TEST(PathLoss, ReferenceDistances) {
    EXPECT_DOUBLE_EQ(path_loss_db(1.0), 128.1);
    EXPECT_NEAR(path_loss_db(0.5), 116.781, 1e-3);
    EXPECT_NEAR(path_loss_db(10.0), 165.7, 1e-3);
}

TEST(PathLoss, RejectsNonPositiveDistance) {
    EXPECT_THROW(path_loss_db(0.0), sg::DomainError);
    EXPECT_THROW(path_loss_db(-1.0), sg::DomainError);
}

TEST(PathLoss, StrictlyIncreasing) {
    double prev = path_loss_db(0.001);
    for (double d = 0.002; d < 5.0; d *= 1.37) {
        const double pl = path_loss_db(d);
        EXPECT_GT(pl, prev);
        prev = pl;
    }
}

TEST(SampleChannel, ZeroShadowingLargeScaleGain) {
    LinkParams link;
    link.distance_km = 1.0;
    link.shadowing_sigma_db = 0.0;
    sg::RngStream rng(7);
    for (int i = 0; i < 5; ++i) {
        const auto ch = sample_channel(link, rng);
        EXPECT_NEAR(ch.large_scale_gain / std::pow(10.0, -12.81), 1.0, 1e-12);
    }
}

TEST(SampleChannel, CompositeIsProductAndPositive) {
    LinkParams link;
    sg::RngStream rng(11);
    for (int i = 0; i < 10000; ++i) {
        const auto ch = sample_channel(link, rng);
        ASSERT_GT(ch.large_scale_gain, 0.0);
        ASSERT_GT(ch.small_scale_gain, 0.0);
        ASSERT_NEAR(ch.composite_gain / (ch.large_scale_gain * ch.small_scale_gain), 1.0, 1e-12);
    }
}

TEST(SampleChannel, FadingIsUnitMeanExponential) {
    LinkParams link;
    sg::RngStream rng(3);
    const int n = 1'000'000;
    double sum = 0.0;
    int below_half = 0, below_one = 0, below_two = 0;
    for (int i = 0; i < n; ++i) {
        const double g = sample_channel(link, rng).small_scale_gain;
        sum += g;
        below_half += g <= 0.5;
        below_one += g <= 1.0;
        below_two += g <= 2.0;
    }
    EXPECT_NEAR(sum / n, 1.0, 0.01);
    // Closed-form exponential CDF 1 - exp(-x).
    EXPECT_NEAR(static_cast<double>(below_half) / n, 1.0 - std::exp(-0.5), 0.01);
    EXPECT_NEAR(static_cast<double>(below_one) / n, 1.0 - std::exp(-1.0), 0.01);
    EXPECT_NEAR(static_cast<double>(below_two) / n, 1.0 - std::exp(-2.0), 0.01);
}

TEST(SampleChannel, SeededStreamIsReproducible) {
    LinkParams link;
    sg::RngStream a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        const auto x = sample_channel(link, a);
        const auto y = sample_channel(link, b);
        ASSERT_EQ(x.composite_gain, y.composite_gain);
        ASSERT_EQ(x.large_scale_gain, y.large_scale_gain);
    }
}

TEST(Snr, HandEvaluatedLink) {
    LinkParams link;
    link.tx_power_dbm = 10.0;
    link.bandwidth_hz = 360e3;
    link.noise_psd_dbm_hz = -174.0;
    // 10 dBm = 0.01 W; noise power = 10^-20.4 W/Hz * 360 kHz ~ 1.433e-15 W.
    EXPECT_NEAR(snr(link, 1e-13), 0.698, 0.005);
    EXPECT_EQ(snr(link, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(snr(link, 2e-13), 2.0 * snr(link, 1e-13));
    EXPECT_THROW(snr(link, -1.0), sg::DomainError);
}

TEST(Rate, ShannonInBits) {
    LinkParams unit;
    unit.bandwidth_hz = 1.0;
    EXPECT_EQ(rate(unit, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(rate(unit, 1.0), 1.0);
    LinkParams nb;
    nb.bandwidth_hz = 360e3;
    EXPECT_DOUBLE_EQ(rate(nb, 3.0), 720e3);
    double prev = 0.0;
    for (double s = 0.01; s < 1e4; s *= 2.3) {
        EXPECT_GT(rate(nb, s), prev);
        prev = rate(nb, s);
    }
}

TEST(NormalizedRate, ClampsAtOne) {
    EXPECT_EQ(normalized_rate(0.0, 5.0), 0.0);
    EXPECT_EQ(normalized_rate(5.0, 5.0), 1.0);
    EXPECT_EQ(normalized_rate(10.0, 5.0), 1.0);
    EXPECT_DOUBLE_EQ(normalized_rate(2.5, 5.0), 0.5);
    EXPECT_THROW(normalized_rate(1.0, 0.0), sg::DomainError);
}

TEST(ReferenceMaxRate, UsesNinetyNinthPercentileFading) {
    LinkParams link;
    link.distance_km = 0.035;
    EXPECT_NEAR(kFadingGainP99, -std::log(0.01), 1e-15);
    const double gain = std::pow(10.0, -path_loss_db(0.035) / 10.0) * kFadingGainP99;
    EXPECT_DOUBLE_EQ(reference_max_rate(link), rate(link, snr(link, gain)));
}
