#pragma once

// Run orchestration and artifact emission: figure recipes, per-replication
// trace CSVs, aggregated regret, delay/throughput scatter and the summary
// table.
//
// CSV conventions: comma separated, header row, LF endings, reals printed
// with 9 significant digits, empty field for undefined values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sleepgrant/config.hpp"
#include "sleepgrant/engine.hpp"
#include "sleepgrant/error.hpp"

namespace sleepgrant::io {

namespace fs = std::filesystem;

inline std::string format_real(double v) {
    if (std::isnan(v)) return {};
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

/// Running mean and sample standard error, fed in a fixed order.
class RunningStat {
public:
    void add(double x) {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    /// NaN with fewer than two samples.
    double std_error() const {
        if (n_ < 2) return std::numeric_limits<double>::quiet_NaN();
        return std::sqrt(m2_ / static_cast<double>(n_ - 1)) / std::sqrt(static_cast<double>(n_));
    }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

// --- recipes ---------------------------------------------------------------

struct Variant {
    std::string label;
    std::vector<std::pair<std::string, std::string>> overrides;
};

inline std::string label_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

/// Variant axis of a figure; the base settings come from the config file.
inline std::optional<std::vector<Variant>> recipe(const std::string& name) {
    using V = std::vector<Variant>;
    const std::pair<std::string, std::string> prob{"scheduler.policy", "prob-sleeping-ucb"};
    const std::pair<std::string, std::string> rnd{"scheduler.policy", "random"};
    auto perfect = [&] {
        return Variant{"perfect",
                       {prob, {"predictor.p_min", "1"}, {"predictor.p_max", "1"}, {"predictor.miss_rate", "0"},
                        {"predictor.false_positive_rate", "0"}}};
    };
    auto deadline_sweep = [&] {
        V v;
        for (int dmax : {50, 100, 150, 200, 250, 300}) {
            const auto d = std::to_string(dmax);
            v.push_back({"prob-sleeping-ucb-d" + d, {prob, {"traffic.deadline_max_ms", d}}});
            v.push_back({"random-d" + d, {rnd, {"traffic.deadline_max_ms", d}}});
        }
        return v;
    };
    auto psi_sweep = [&](std::initializer_list<double> psis) {
        V v;
        for (double psi : psis) {
            v.push_back({"psi-" + label_number(psi), {prob, {"scheduler.psi", label_number(psi)}}});
        }
        v.push_back({"random", {rnd}});
        return v;
    };

    if (name == "fig3" || name == "fig8") {
        V v{{"prob-sleeping-ucb-p0.8", {prob, {"predictor.p_min", "0.8"}, {"predictor.p_max", "1"}}},
            {"prob-sleeping-ucb-p0.9", {prob, {"predictor.p_min", "0.9"}, {"predictor.p_max", "1"}}}};
        if (name == "fig3") {
            v.push_back({"sleeping-ucb", {{"scheduler.policy", "sleeping-ucb"}, {"predictor.p_min", "0.8"},
                                          {"predictor.p_max", "1"}}});
        }
        v.push_back(perfect());
        v.push_back({"random", {rnd, {"predictor.p_min", "0.8"}, {"predictor.p_max", "1"}}});
        return v;
    }
    if (name == "fig4" || name == "fig9") return deadline_sweep();
    if (name == "fig5") return psi_sweep({1, 6, 16});
    if (name == "fig6") return psi_sweep({0.5, 2, 4});
    if (name == "fig7") return psi_sweep({0.25, 0.5, 1, 2, 4, 8});
    return std::nullopt;
}

inline std::vector<std::string> recipe_names() {
    return {"fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9"};
}

// --- bound -----------------------------------------------------------------

struct BoundReport {
    double value = 0.0;
    double f_e1 = 0.0;
    double f_e2 = 0.0;
    double p_av = 1.0;
    bool f_e1_calibrated = false;
    bool f_e2_calibrated = false;
};

/// Evaluates the regret bound for `cfg`, filling unset error terms from a
/// calibration run of the emulated predictor.
inline BoundReport evaluate_bound(const ExperimentConfig& cfg, const engine::Scenario& sc) {
    BoundReport rep;
    if (!cfg.f_e1 || !cfg.f_e2) {
        RngStream rng(derive_seed(cfg.seed, engine::kScenarioReplication, engine::kCalibrationStream));
        traffic::ActivityParams activity{cfg.active, cfg.slot_ms, cfg.value_std};
        traffic::PredictionErrorAccumulator acc;
        for (std::uint64_t s = 0; s < cfg.calibration_slots; ++s) {
            const auto truth = traffic::step_activity(sc.population, activity, {}, s, rng);
            acc.add(truth, traffic::predict(truth, cfg.population, cfg.predictor, rng));
        }
        const auto stats = acc.result();
        rep.f_e1 = stats.mean_e1;
        rep.f_e2 = stats.total_mass > 0.0 ? stats.false_positive_mass / stats.total_mass : 0.0;
        rep.f_e1_calibrated = !cfg.f_e1;
        rep.f_e2_calibrated = !cfg.f_e2;
    }
    if (cfg.f_e1) rep.f_e1 = *cfg.f_e1;
    if (cfg.f_e2) rep.f_e2 = *cfg.f_e2;
    rep.p_av = 0.5 * (cfg.predictor.interval.lo + cfg.predictor.interval.hi);
    const std::vector<double> probs(sc.true_means.size(), rep.p_av);
    rep.value = engine::theoretical_regret_bound(sc.true_means, probs, cfg.psi,
                                                 static_cast<double>(std::max<std::uint64_t>(cfg.horizon, 1)),
                                                 rep.f_e1, rep.f_e2);
    return rep;
}

// --- summary ---------------------------------------------------------------

struct VariantSummary {
    std::string label;
    std::string policy;
    std::uint64_t seed = 0;
    std::uint64_t horizon = 0;
    RunningStat final_regret;
    RunningStat selected_deadline_ms;
    RunningStat active_deadline_ms;
    RunningStat sum_rate_bps;
    RunningStat mean_e1;
    RunningStat mean_e2;
    RunningStat misses;
    RunningStat false_positives;
    std::optional<double> bound;

    void add(const engine::ExperimentTrace& trace) {
        final_regret.add(trace.cumulative_regret.empty() ? 0.0 : trace.cumulative_regret.back());
        const auto d = engine::delay_stats(trace);
        selected_deadline_ms.add(d.mean_selected_deadline_ms);
        active_deadline_ms.add(d.mean_active_deadline_ms);
        sum_rate_bps.add(engine::throughput_stats(trace).mean_sum_rate_bps);
        const auto& e = trace.prediction_errors;
        mean_e1.add(e.mean_e1);
        mean_e2.add(e.mean_e2);
        misses.add(static_cast<double>(e.misses));
        false_positives.add(static_cast<double>(e.false_positives));
    }

    std::size_t replications() const { return final_regret.count(); }
};

/// Fixed-width table, one row per variant. Standard-error columns are blank
/// for a single replication.
inline std::string emit_summary(const std::vector<VariantSummary>& rows) {
    std::ostringstream out;
    char line[512];
    std::snprintf(line, sizeof line, "%-26s %-18s %6s %20s %10s %14s %12s %12s %12s %14s %12s %10s %10s %10s %10s %14s\n",
                  "variant", "policy", "reps", "seed", "horizon", "final_regret", "regret_se", "sel_delay_ms",
                  "delay_se", "active_delay_ms", "sum_rate_bps", "rate_se", "mean_e1", "mean_e2", "fp_count",
                  "bound");
    out << line;
    auto cell = [](double v) {
        const auto s = format_real(v);
        return s.empty() ? std::string("-") : s;
    };
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line,
                      "%-26s %-18s %6zu %20llu %10llu %14s %12s %12s %12s %14s %12s %10s %10s %10s %10s %14s\n",
                      r.label.c_str(), r.policy.c_str(), r.replications(), static_cast<unsigned long long>(r.seed),
                      static_cast<unsigned long long>(r.horizon), cell(r.final_regret.mean()).c_str(),
                      r.replications() > 1 ? cell(r.final_regret.std_error()).c_str() : "",
                      cell(r.selected_deadline_ms.mean()).c_str(),
                      r.replications() > 1 ? cell(r.selected_deadline_ms.std_error()).c_str() : "",
                      cell(r.active_deadline_ms.mean()).c_str(), cell(r.sum_rate_bps.mean()).c_str(),
                      r.replications() > 1 ? cell(r.sum_rate_bps.std_error()).c_str() : "",
                      cell(r.mean_e1.mean()).c_str(), cell(r.mean_e2.mean()).c_str(),
                      cell(r.false_positives.mean()).c_str(), r.bound ? cell(*r.bound).c_str() : "-");
        out << line;
    }
    return out.str();
}

// --- CSV writers -------------------------------------------------------------

/// Tracks every file it creates so a failed run can be rolled back.
class ArtifactWriter {
public:
    explicit ArtifactWriter(fs::path root) : root_(std::move(root)) {}

    fs::path path(const fs::path& relative) const { return root_ / relative; }

    std::ofstream open(const fs::path& relative) {
        const auto full = root_ / relative;
        std::error_code ec;
        for (auto dir = full.parent_path(); !dir.empty() && !fs::exists(dir, ec); dir = dir.parent_path()) {
            created_dirs_.push_back(dir);
        }
        fs::create_directories(full.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + full.parent_path().string() + ": " + ec.message());
        std::ofstream out(full, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + full.string() + " for writing");
        written_.push_back(full);
        return out;
    }

    static void finish(std::ofstream& out, const fs::path& where) {
        out.flush();
        if (!out) throw IoError("write failed for " + where.string());
    }

    void write_text(const fs::path& relative, const std::string& text) {
        auto out = open(relative);
        out << text;
        finish(out, path(relative));
    }

    /// Deletes everything this writer created.
    void rollback() noexcept {
        std::error_code ec;
        for (auto it = written_.rbegin(); it != written_.rend(); ++it) fs::remove(*it, ec);
        std::sort(created_dirs_.begin(), created_dirs_.end(), [](const fs::path& a, const fs::path& b) {
            return a.native().size() > b.native().size();
        });
        for (const auto& dir : created_dirs_) fs::remove(dir, ec);
        written_.clear();
        created_dirs_.clear();
    }

    const std::vector<fs::path>& written() const { return written_; }

private:
    fs::path root_;
    std::vector<fs::path> written_;
    std::vector<fs::path> created_dirs_;
};

inline void write_trace_csv(std::ostream& out, const engine::ExperimentTrace& trace) {
    out << "slot,granted,reward,oracle,oracle_reward,cumulative_regret,selected_deadline_ms,active_deadline_ms,"
           "sum_rate_bps\n";
    for (std::size_t i = 0; i < trace.slots(); ++i) {
        const auto s = trace.slot(i);
        std::string granted, oracle;
        double reward = 0.0, rate = 0.0, deadline = 0.0;
        std::size_t active = 0;
        for (std::size_t g = 0; g < s.granted.size(); ++g) {
            if (g) granted += ';';
            granted += std::to_string(s.granted[g]);
            reward += s.rewards[g];
            rate += s.rates_bps[g];
            if (s.was_active[g]) {
                deadline += s.deadlines_ms[g];
                ++active;
            }
        }
        for (std::size_t o = 0; o < s.oracle.size(); ++o) {
            if (o) oracle += ';';
            oracle += std::to_string(s.oracle[o]);
        }
        const double sel = active ? deadline / static_cast<double>(active) : std::numeric_limits<double>::quiet_NaN();
        out << s.slot << ',' << granted << ',' << format_real(reward) << ',' << oracle << ','
            << format_real(s.oracle_reward) << ',' << format_real(trace.cumulative_regret[i]) << ','
            << format_real(sel) << ',' << format_real(s.active_mean_deadline_ms) << ',' << format_real(rate) << '\n';
    }
}

inline void write_scatter_csv(std::ostream& out, const std::vector<std::pair<std::uint64_t, double>>& series) {
    out << "slot,value\n";
    for (const auto& [slot, value] : series) out << slot << ',' << format_real(value) << '\n';
}

// --- run command ---------------------------------------------------------------

struct RunManifest {
    fs::path config_path;
    fs::path output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replications;
    std::optional<std::string> recipe;
    unsigned threads = std::thread::hardware_concurrency();
};

enum ExitStatus : int { kExitOk = 0, kExitConfigError = 1, kExitIoError = 2 };

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Loads the manifest's config with command-line overrides applied.
inline ExperimentConfig load_config(const RunManifest& m) {
    auto cfg = parse_config(read_file(m.config_path));
    if (m.seed) cfg.seed = *m.seed;
    if (m.replications) {
        if (*m.replications == 0) throw ConfigError("run.replications", "must be at least 1");
        cfg.replications = *m.replications;
    }
    return cfg;
}

/// Runs every variant and writes, per variant directory:
///   trace_rep<k>.csv, regret.csv, delay_scatter.csv, throughput_scatter.csv
/// and a summary.txt table at the top level.
inline std::vector<VariantSummary> run_variants(const ExperimentConfig& base, const std::vector<Variant>& variants,
                                                ArtifactWriter& writer, unsigned threads) {
    std::vector<VariantSummary> summaries;
    for (const auto& variant : variants) {
        ExperimentConfig cfg = base;
        for (const auto& [key, value] : variant.overrides) set_config_value(cfg, key, value);
        cfg.validate();
        const auto sc = engine::build_scenario(cfg);

        VariantSummary summary;
        summary.label = variant.label;
        summary.policy = std::string(policies::to_string(cfg.policy));
        summary.seed = cfg.seed;
        summary.horizon = cfg.horizon;
        try {
            summary.bound = evaluate_bound(cfg, sc).value;
        } catch (const DomainError&) {
            summary.bound.reset();
        }

        std::vector<RunningStat> regret(cfg.horizon);
        const std::size_t batch = std::max(1u, threads);
        for (std::size_t first = 0; first < cfg.replications; first += batch) {
            const std::size_t count = std::min(batch, cfg.replications - first);
            const auto traces = engine::run_replications(cfg, sc, first, count, threads);
            for (std::size_t k = 0; k < traces.size(); ++k) {
                const auto& trace = traces[k];
                const auto rep = first + k;
                const fs::path dir = variant.label;
                {
                    const auto rel = dir / ("trace_rep" + std::to_string(rep) + ".csv");
                    auto out = writer.open(rel);
                    write_trace_csv(out, trace);
                    ArtifactWriter::finish(out, writer.path(rel));
                }
                for (std::size_t i = 0; i < trace.slots(); ++i) regret[i].add(trace.cumulative_regret[i]);
                summary.add(trace);
                if (rep == 0) {
                    auto out = writer.open(dir / "delay_scatter.csv");
                    write_scatter_csv(out, engine::delay_stats(trace).scatter);
                    ArtifactWriter::finish(out, writer.path(dir / "delay_scatter.csv"));
                    auto out2 = writer.open(dir / "throughput_scatter.csv");
                    write_scatter_csv(out2, engine::throughput_stats(trace).scatter);
                    ArtifactWriter::finish(out2, writer.path(dir / "throughput_scatter.csv"));
                }
            }
        }
        {
            const auto rel = fs::path(variant.label) / "regret.csv";
            auto out = writer.open(rel);
            out << "slot,mean_regret,stderr\n";
            for (std::size_t i = 0; i < regret.size(); ++i) {
                out << (i + 1) << ',' << format_real(regret[i].mean()) << ',' << format_real(regret[i].std_error())
                    << '\n';
            }
            ArtifactWriter::finish(out, writer.path(rel));
        }
        summaries.push_back(std::move(summary));
    }
    return summaries;
}

/// The `run` subcommand. Returns the process exit status; on an IO failure
/// every artifact written so far is removed.
inline int run_command(const RunManifest& manifest, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    ArtifactWriter writer(manifest.output_dir);
    try {
        const auto cfg = load_config(manifest);
        std::vector<Variant> variants;
        if (manifest.recipe) {
            auto r = recipe(*manifest.recipe);
            if (!r) throw ConfigError("recipe", "unknown recipe '" + *manifest.recipe + "'");
            variants = std::move(*r);
        } else {
            variants.push_back({std::string(policies::to_string(cfg.policy)), {}});
        }
        // Validate every variant before any simulation or output.
        for (const auto& v : variants) {
            ExperimentConfig probe = cfg;
            for (const auto& [key, value] : v.overrides) set_config_value(probe, key, value);
            probe.validate();
        }
        const auto summaries = run_variants(cfg, variants, writer, manifest.threads);
        const auto table = emit_summary(summaries);
        writer.write_text("summary.txt", table);
        log << table;
        return kExitOk;
    } catch (const ConfigError& e) {
        writer.rollback();
        err << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const IoError& e) {
        writer.rollback();
        err << "io error: " << e.what() << '\n';
        return kExitIoError;
    } catch (const fs::filesystem_error& e) {
        writer.rollback();
        err << "io error: " << e.what() << '\n';
        return kExitIoError;
    }
}

}  // namespace sleepgrant::io
