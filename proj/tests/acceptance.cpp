// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "reference_ucb1.hpp"
#include "sleepgrant/sleepgrant.hpp"

namespace sg = sleepgrant;
namespace fs = std::filesystem;
using sg::ExperimentConfig;
using sg::policies::Policy;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0, double c = 0, double d = 0, double e = 0) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, a, b, c, d, e);
    return buf;
}

unsigned worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

// Streams replications through `visit` in index order without keeping them all.
void for_each_replication(const ExperimentConfig& cfg, std::size_t reps,
                          const std::function<void(const sg::engine::ExperimentTrace&)>& visit) {
    const auto sc = sg::engine::build_scenario(cfg);
    const unsigned w = worker_count();
    for (std::size_t first = 0; first < reps; first += w) {
        const auto count = std::min<std::size_t>(w, reps - first);
        for (const auto& t : sg::engine::run_replications(cfg, sc, first, count, w)) visit(t);
    }
}

double mean_final_regret(const ExperimentConfig& cfg, std::size_t reps) {
    sg::io::RunningStat s;
    for_each_replication(cfg, reps, [&](const auto& t) { s.add(t.cumulative_regret.back()); });
    return s.mean();
}

// Mean cumulative regret at each 1-based slot in `at`.
std::vector<double> mean_regret_at(const ExperimentConfig& cfg, std::size_t reps, const std::vector<std::uint64_t>& at) {
    std::vector<sg::io::RunningStat> s(at.size());
    for_each_replication(cfg, reps, [&](const auto& t) {
        for (std::size_t k = 0; k < at.size(); ++k) s[k].add(t.cumulative_regret[at[k] - 1]);
    });
    std::vector<double> out;
    for (const auto& x : s) out.push_back(x.mean());
    return out;
}

ExperimentConfig synthetic(std::uint64_t horizon) {
    ExperimentConfig cfg;
    cfg.horizon = horizon;
    cfg.predictor = sg::traffic::PredictorConfig::perfect();
    return cfg;
}

ExperimentConfig physical(std::uint64_t horizon) {
    ExperimentConfig cfg;
    cfg.mode = sg::RewardMode::physical;
    cfg.horizon = horizon;
    return cfg;
}

Outcome sublinear_regret() {
    const std::size_t reps = 50;
    std::vector<std::uint64_t> at;
    for (int k = 0; k <= 40; ++k) at.push_back(static_cast<std::uint64_t>(std::llround(1e4 * std::pow(10.0, k / 40.0))));

    auto cfg = synthetic(100000);
    const auto r = mean_regret_at(cfg, reps, at);
    const double ratio = (r.back() / 1e5) / (r.front() / 1e4);

    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    const double n = static_cast<double>(at.size());
    for (std::size_t k = 0; k < at.size(); ++k) {
        const double x = std::log(static_cast<double>(at[k])), y = r[k];
        sx += x, sy += y, sxx += x * x, sxy += x * y, syy += y * y;
    }
    const double cov = sxy - sx * sy / n, vx = sxx - sx * sx / n, vy = syy - sy * sy / n;
    const double r2 = cov * cov / (vx * vy);

    cfg.policy = Policy::random;
    const auto rr = mean_regret_at(cfg, reps, {10000, 100000});
    const double random_ratio = (rr[1] / 1e5) / (rr[0] / 1e4);

    return {ratio < 0.5 && r2 > 0.9 && std::abs(random_ratio - 1.0) <= 0.1,
            fmt("avg-regret ratio T=1e5/1e4 %.3f (< 0.5), R^2 vs ln T %.4f (> 0.9), random ratio %.3f (1 +- 0.1)",
                ratio, r2, random_ratio)};
}

Outcome weighting_helps() {
    const std::size_t reps = 50;
    std::string detail;
    bool ok = true;
    for (auto [lo, limit] : {std::pair{0.8, 0.70}, std::pair{0.9, 0.90}}) {
        ExperimentConfig cfg;
        cfg.horizon = 100000;
        cfg.predictor.interval = {lo, 1.0};
        cfg.predictor.false_positive_rate = 0.05;
        const double weighted = mean_final_regret(cfg, reps);
        cfg.policy = Policy::sleeping_ucb;
        const double plain = mean_final_regret(cfg, reps);
        ok = ok && weighted <= limit * plain;
        detail += fmt("[%.1f,1]: %.1f vs %.1f ratio %.3f (<= %.2f); ", lo, weighted, plain, weighted / plain, limit);
    }
    detail.resize(detail.size() - 2);
    return {ok, detail};
}

Outcome delay_reduction() {
    const std::size_t reps = 10;
    auto cfg = physical(100000);
    cfg.weights = {0.0, 0.0, 1.0};
    cfg.gompertz = {1.0, 13.0, 0.025};
    cfg.deadline_min_ms = 1.0;
    cfg.deadline_max_ms = 300.0;

    auto selected = [&](const ExperimentConfig& c, double* active) {
        sg::io::RunningStat sel, act;
        for_each_replication(c, reps, [&](const auto& t) {
            const auto d = sg::engine::delay_stats(t);
            sel.add(d.mean_selected_deadline_ms);
            act.add(d.mean_active_deadline_ms);
        });
        if (active) *active = act.mean();
        return sel.mean();
    };
    const double ucb = selected(cfg, nullptr);
    cfg.policy = Policy::random;
    double population = 0.0;
    const double rnd = selected(cfg, &population);
    const double ratio = ucb / rnd, drift = rnd / population - 1.0;
    return {ratio <= 0.45 && std::abs(drift) <= 0.05,
            fmt("selected deadline %.2f ms vs random %.2f ms ratio %.3f (<= 0.45); random vs active-set mean %.2f ms "
                "off by %+.2f%% (+-5%%)",
                ucb, rnd, ratio, population, 100.0 * drift)};
}

Outcome throughput_gain() {
    const std::size_t reps = 10;
    auto cfg = physical(100000);
    cfg.weights = {0.0, 1.0, 0.0};
    auto rate = [&](const ExperimentConfig& c) {
        sg::io::RunningStat s;
        for_each_replication(c, reps, [&](const auto& t) { s.add(sg::engine::throughput_stats(t).mean_sum_rate_bps); });
        return s.mean();
    };
    std::vector<double> rates;
    for (double psi : {0.5, 2.0, 4.0}) {
        cfg.psi = psi;
        rates.push_back(rate(cfg));
    }
    cfg.policy = Policy::random;
    cfg.psi = 1.0;
    const double rnd = rate(cfg);
    const bool monotone = rates[1] <= 1.05 * rates[0] && rates[2] <= 1.05 * rates[1];
    return {rates[0] >= 1.5 * rnd && monotone,
            fmt("sum-rate psi 0.5/2/4 = %.4g / %.4g / %.4g bit/s, random %.4g, gain %.2fx (>= 1.5), monotone within 5%%",
                rates[0], rates[1], rates[2], rnd, rates[0] / rnd)};
}

Outcome multi_select() {
    const std::size_t reps = 3;
    ExperimentConfig cfg;
    cfg.population = 500;
    cfg.active = 50;
    cfg.grants = 20;
    cfg.horizon = 100000;
    auto with_interval = [&](double lo, Policy p) {
        auto c = cfg;
        c.policy = p;
        c.predictor.interval = {lo, 1.0};
        return mean_final_regret(c, reps);
    };
    const double p8 = with_interval(0.8, Policy::prob_sleeping_ucb);
    const double p9 = with_interval(0.9, Policy::prob_sleeping_ucb);
    const double r8 = with_interval(0.8, Policy::random);
    const double r9 = with_interval(0.9, Policy::random);
    auto perfect_cfg = cfg;
    perfect_cfg.predictor = sg::traffic::PredictorConfig::perfect();
    const double perfect = mean_final_regret(perfect_cfg, reps);
    const bool ok = p8 <= 0.5 * r8 && p9 <= 0.5 * r9 && perfect < p8 && perfect < p9;
    return {ok, fmt("regret [0.8,1] %.0f vs random %.0f, [0.9,1] %.0f vs random %.0f, perfect %.0f", p8, r8, p9, r9,
                    perfect)};
}

Outcome ucb1_equivalence() {
    const auto start = std::chrono::steady_clock::now();
    auto cfg = synthetic(10000);
    cfg.population = 10;
    cfg.active = 10;
    const auto sc = sg::engine::build_scenario(cfg);
    const auto trace = sg::engine::run_replication(cfg, sc, 0);

    sg::ReplicationStreams streams(cfg.seed, 0);
    reference::Ucb1 ref(cfg.population, cfg.psi);
    std::size_t mismatch = 0, first_bad = 0;
    for (std::size_t i = 0; i < trace.slots(); ++i) {
        const auto arm = ref.choose(streams.policy);
        const auto s = trace.slot(i);
        if (s.granted.size() != 1 || s.granted[0] != arm) {
            if (mismatch++ == 0) first_bad = i + 1;
        }
        ref.observe(arm, streams.reward.bernoulli(sc.true_means[arm]) ? 1.0 : 0.0);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    auto detail = fmt("%.0f/10000 slots differ, %.3f s (< 1 s)", static_cast<double>(mismatch), secs);
    if (mismatch) detail += fmt(", first at slot %.0f", static_cast<double>(first_bad));
    return {mismatch == 0 && trace.slots() == 10000 && secs < 1.0, detail};
}

Outcome bound_dominance() {
    const std::size_t reps = 50;
    auto cfg = synthetic(100000);
    cfg.population = 5;
    cfg.active = 5;
    cfg.mean_min = 0.5;
    cfg.mean_max = 0.9;
    cfg.f_e1 = 0.0;
    cfg.f_e2 = 0.0;
    const std::vector<std::uint64_t> at{1000, 10000, 100000};
    const auto r = mean_regret_at(cfg, reps, at);
    const auto sc = sg::engine::build_scenario(cfg);
    bool ok = true;
    std::string detail;
    for (std::size_t k = 0; k < at.size(); ++k) {
        cfg.horizon = at[k];
        const double bound = sg::io::evaluate_bound(cfg, sc).value;
        ok = ok && r[k] <= bound;
        detail += fmt("T=%.0f regret %.1f <= bound %.1f; ", static_cast<double>(at[k]), r[k], bound);
    }
    detail.resize(detail.size() - 2);
    return {ok, detail};
}

Outcome coverage() {
    sg::RngStream rng(sg::derive_seed(1, 0, 99));
    const auto points = sg::engine::confidence_coverage_test(1.0, 1000, 1000, 0.5, rng);
    double worst = -1.0;
    std::uint64_t worst_t = 0, failures = 0;
    for (const auto& p : points) {
        if (p.t < 2) continue;
        const double slack = p.bound + 3.0 * p.std_error - p.violation_rate;
        if (slack < 0) ++failures;
        if (worst < 0 || p.violation_rate / p.bound > worst) {
            worst = p.violation_rate / p.bound;
            worst_t = p.t;
        }
    }
    return {failures == 0, fmt("%.0f slots above 2/t^2 + 3 se for t in [2, 1000]; max violation/bound %.3f at t=%.0f",
                               static_cast<double>(failures), worst, static_cast<double>(worst_t))};
}

Outcome unit_exactness() {
    const std::string binaries = SLEEPGRANT_UNIT_TESTS;
    const auto start = std::chrono::steady_clock::now();
    std::size_t failed = 0, ran = 0;
    std::stringstream list(binaries);
    for (std::string bin; std::getline(list, bin, '|');) {
        if (bin.empty()) continue;
        ++ran;
        const auto cmd = "\"" + bin + "\" --gtest_brief=1 > /dev/null 2>&1";
        if (std::system(cmd.c_str()) != 0) {
            ++failed;
            std::fprintf(stderr, "unit suite failed: %s\n", bin.c_str());
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {failed == 0 && ran > 0 && secs < 10.0,
            fmt("%.0f/%.0f unit suites green in %.2f s (< 10 s)", static_cast<double>(ran - failed),
                static_cast<double>(ran), secs)};
}

Outcome determinism() {
    const auto root = fs::temp_directory_path() / ("sleepgrant_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    const auto cfg_path = root / "run.cfg";
    {
        std::ofstream(cfg_path) << "mode = physical\npopulation.size = 60\npopulation.active = 6\nscheduler.grants = 2\n"
                                   "run.horizon = 2000\nregret.mean_samples = 500\nbound.calibration_slots = 500\n";
    }
    std::size_t files = 0, differing = 0;
    bool ran = true;
    for (const char* recipe : {"", "fig3"}) {
        std::vector<fs::path> outs;
        for (int k = 0; k < 2; ++k) {
            sg::io::RunManifest m;
            m.config_path = cfg_path;
            m.output_dir = root / (std::string("out_") + (*recipe ? recipe : "single") + std::to_string(k));
            m.replications = 2;
            m.seed = 424242;
            if (*recipe) m.recipe = recipe;
            std::ostringstream log, err;
            ran = ran && sg::io::run_command(m, log, err) == sg::io::kExitOk;
            outs.push_back(m.output_dir);
        }
        for (const auto& e : fs::recursive_directory_iterator(outs[0])) {
            if (!e.is_regular_file()) continue;
            ++files;
            const auto twin = outs[1] / fs::relative(e.path(), outs[0]);
            if (!fs::exists(twin) || sg::io::read_file(e.path()) != sg::io::read_file(twin)) ++differing;
        }
    }
    fs::remove_all(root);
    return {ran && files > 0 && differing == 0,
            fmt("%.0f files compared across reruns, %.0f differ", static_cast<double>(files),
                static_cast<double>(differing))};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"sublinear vs linear regret", sublinear_regret},
        {"probabilistic weighting helps", weighting_helps},
        {"three-fold delay reduction", delay_reduction},
        {"throughput gain", throughput_gain},
        {"multi-select regret", multi_select},
        {"UCB1 equivalence", ucb1_equivalence},
        {"regret bound dominance", bound_dominance},
        {"confidence coverage", coverage},
        {"unit-level exactness", unit_exactness},
        {"determinism", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s criterion %zu (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
