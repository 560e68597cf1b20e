#pragma once

// Experiment configuration and its flat text format:
//
//     # comment
//     population.size = 100
//     scheduler.policy = prob-sleeping-ucb
//
// One `key = value` per line. Unknown keys, malformed values and violated
// constraints raise ConfigError naming the key. serialize_config writes every
// key, so parse_config(serialize_config(c)) reproduces c exactly.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sleepgrant/error.hpp"
#include "sleepgrant/policies.hpp"
#include "sleepgrant/qos.hpp"
#include "sleepgrant/traffic.hpp"

namespace sleepgrant {

enum class RewardMode { synthetic, physical };

/// Which unserved packets stay pending into the next slot.
enum class Carryover { none, failed, unscheduled };

struct ExperimentConfig {
    RewardMode mode = RewardMode::synthetic;

    // population
    std::size_t population = 100;
    std::size_t active = 10;
    double cell_radius_km = 0.5;
    double min_distance_km = 0.035;
    double tx_power_dbm = 10.0;

    // traffic
    double deadline_min_ms = 1.0;
    double deadline_max_ms = 300.0;
    double deadline_spread_ms = 10.0;
    double value_std = 0.1;
    double transmit_delay_ms = 0.0;
    double processing_delay_ms = 0.0;
    Carryover carryover = Carryover::failed;

    // synthetic arms
    double mean_min = 0.05;
    double mean_max = 0.95;
    std::vector<double> means;  // explicit per-MTD means; overrides the range

    // scheduler
    policies::Policy policy = policies::Policy::prob_sleeping_ucb;
    double psi = 1.0;
    std::size_t grants = 1;

    // run
    std::uint64_t horizon = 10000;
    double slot_ms = 1.0;
    std::uint64_t seed = 1;
    std::size_t replications = 1;

    qos::UtilityWeights weights;
    qos::GompertzParams gompertz;
    traffic::PredictorConfig predictor;

    // channel
    double bandwidth_hz = 360e3;
    double noise_psd_dbm_hz = -174.0;
    double shadowing_sigma_db = 10.0;
    double rate_threshold_bps = 36e3;

    // regret accounting and bound
    std::size_t mean_samples = 20000;
    std::optional<double> f_e1;
    std::optional<double> f_e2;
    std::size_t calibration_slots = 10000;

    void validate() const;
};

inline std::string_view to_string(RewardMode m) {
    return m == RewardMode::synthetic ? "synthetic" : "physical";
}

inline std::string_view to_string(Carryover c) {
    switch (c) {
        case Carryover::none: return "none";
        case Carryover::failed: return "failed";
        case Carryover::unscheduled: return "unscheduled";
    }
    return "none";
}

namespace config_detail {

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& key, std::string_view text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw ConfigError(key, "expected a real number, got '" + std::string(text) + "'");
    }
    return v;
}

inline std::uint64_t parse_u64(const std::string& key, std::string_view text) {
    std::uint64_t v = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError(key, "expected a nonnegative integer, got '" + std::string(text) + "'");
    }
    return v;
}

inline std::vector<double> parse_list(const std::string& key, std::string_view text) {
    std::vector<double> out;
    if (trim(text).empty()) return out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto item = trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
        out.push_back(parse_double(key, item));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

struct Field {
    std::string key;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field real_field(std::string key, T ExperimentConfig::*member) {
    return {key, [key, member](ExperimentConfig& c, const std::string& v) { c.*member = parse_double(key, v); },
            [member](const ExperimentConfig& c) { return format_double(c.*member); }};
}

// `ref` is a generic lambda returning a reference into the config.
template <typename Ref>
Field nested_real_field(std::string key, Ref ref) {
    return {key, [key, ref](ExperimentConfig& c, const std::string& v) { ref(c) = parse_double(key, v); },
            [ref](const ExperimentConfig& c) { return format_double(ref(c)); }};
}

template <typename T>
Field count_field(std::string key, T ExperimentConfig::*member) {
    return {key,
            [key, member](ExperimentConfig& c, const std::string& v) { c.*member = static_cast<T>(parse_u64(key, v)); },
            [member](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}

inline Field optional_field(std::string key, std::optional<double> ExperimentConfig::*member) {
    return {key,
            [key, member](ExperimentConfig& c, const std::string& v) {
                if (v == "auto") c.*member = std::nullopt;
                else c.*member = parse_double(key, v);
            },
            [member](const ExperimentConfig& c) {
                return (c.*member) ? format_double(*(c.*member)) : std::string("auto");
            }};
}

// Both ends of the leaked-member interval are set together; "auto" restores
// the mirrored default.
inline Field fp_bound_field(std::string key, bool lower) {
    return {key,
            [key, lower](ExperimentConfig& c, const std::string& v) {
                auto& opt = c.predictor.false_positive_interval;
                if (v == "auto") {
                    opt.reset();
                    return;
                }
                if (!opt) opt = c.predictor.effective_false_positive_interval();
                (lower ? opt->lo : opt->hi) = parse_double(key, v);
            },
            [lower](const ExperimentConfig& c) {
                const auto& opt = c.predictor.false_positive_interval;
                if (!opt) return std::string("auto");
                return format_double(lower ? opt->lo : opt->hi);
            }};
}

inline const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        using C = ExperimentConfig;
        std::vector<Field> f;
        f.push_back({"mode",
                     [](C& c, const std::string& v) {
                         if (v == "synthetic") c.mode = RewardMode::synthetic;
                         else if (v == "physical") c.mode = RewardMode::physical;
                         else throw ConfigError("mode", "expected synthetic or physical, got '" + v + "'");
                     },
                     [](const C& c) { return std::string(to_string(c.mode)); }});
        f.push_back(count_field("population.size", &C::population));
        f.push_back(count_field("population.active", &C::active));
        f.push_back(real_field("population.cell_radius_km", &C::cell_radius_km));
        f.push_back(real_field("population.min_distance_km", &C::min_distance_km));
        f.push_back(real_field("population.tx_power_dbm", &C::tx_power_dbm));
        f.push_back(real_field("traffic.deadline_min_ms", &C::deadline_min_ms));
        f.push_back(real_field("traffic.deadline_max_ms", &C::deadline_max_ms));
        f.push_back(real_field("traffic.deadline_spread_ms", &C::deadline_spread_ms));
        f.push_back(real_field("traffic.value_std", &C::value_std));
        f.push_back(real_field("traffic.transmit_delay_ms", &C::transmit_delay_ms));
        f.push_back(real_field("traffic.processing_delay_ms", &C::processing_delay_ms));
        f.push_back({"traffic.carryover",
                     [](C& c, const std::string& v) {
                         if (v == "none") c.carryover = Carryover::none;
                         else if (v == "failed") c.carryover = Carryover::failed;
                         else if (v == "unscheduled") c.carryover = Carryover::unscheduled;
                         else throw ConfigError("traffic.carryover", "expected none, failed or unscheduled");
                     },
                     [](const C& c) { return std::string(to_string(c.carryover)); }});
        f.push_back(real_field("synthetic.mean_min", &C::mean_min));
        f.push_back(real_field("synthetic.mean_max", &C::mean_max));
        f.push_back({"synthetic.means",
                     [](C& c, const std::string& v) { c.means = parse_list("synthetic.means", v); },
                     [](const C& c) {
                         std::string out;
                         for (std::size_t i = 0; i < c.means.size(); ++i) {
                             if (i) out += ", ";
                             out += format_double(c.means[i]);
                         }
                         return out;
                     }});
        f.push_back({"scheduler.policy",
                     [](C& c, const std::string& v) {
                         auto p = policies::parse_policy(v);
                         if (!p) throw ConfigError("scheduler.policy", "unknown policy '" + v + "'");
                         c.policy = *p;
                     },
                     [](const C& c) { return std::string(policies::to_string(c.policy)); }});
        f.push_back(real_field("scheduler.psi", &C::psi));
        f.push_back(count_field("scheduler.grants", &C::grants));
        f.push_back(count_field("run.horizon", &C::horizon));
        f.push_back(real_field("run.slot_ms", &C::slot_ms));
        f.push_back(count_field("run.seed", &C::seed));
        f.push_back(count_field("run.replications", &C::replications));
        f.push_back(nested_real_field("utility.alpha", [](auto& c) -> auto& { return c.weights.alpha; }));
        f.push_back(nested_real_field("utility.beta", [](auto& c) -> auto& { return c.weights.beta; }));
        f.push_back(nested_real_field("utility.gamma", [](auto& c) -> auto& { return c.weights.gamma; }));
        f.push_back(nested_real_field("gompertz.a", [](auto& c) -> auto& { return c.gompertz.a; }));
        f.push_back(nested_real_field("gompertz.b", [](auto& c) -> auto& { return c.gompertz.b; }));
        f.push_back(nested_real_field("gompertz.c", [](auto& c) -> auto& { return c.gompertz.c; }));
        f.push_back(nested_real_field("predictor.p_min", [](auto& c) -> auto& { return c.predictor.interval.lo; }));
        f.push_back(nested_real_field("predictor.p_max", [](auto& c) -> auto& { return c.predictor.interval.hi; }));
        f.push_back(nested_real_field("predictor.miss_rate", [](auto& c) -> auto& { return c.predictor.miss_rate; }));
        f.push_back(nested_real_field("predictor.false_positive_rate",
                                  [](auto& c) -> auto& { return c.predictor.false_positive_rate; }));
        f.push_back(fp_bound_field("predictor.fp_p_min", true));
        f.push_back(fp_bound_field("predictor.fp_p_max", false));
        f.push_back(real_field("channel.bandwidth_hz", &C::bandwidth_hz));
        f.push_back(real_field("channel.noise_psd_dbm_hz", &C::noise_psd_dbm_hz));
        f.push_back(real_field("channel.shadowing_sigma_db", &C::shadowing_sigma_db));
        f.push_back(real_field("channel.rate_threshold_bps", &C::rate_threshold_bps));
        f.push_back(count_field("regret.mean_samples", &C::mean_samples));
        f.push_back(optional_field("bound.f_e1", &C::f_e1));
        f.push_back(optional_field("bound.f_e2", &C::f_e2));
        f.push_back(count_field("bound.calibration_slots", &C::calibration_slots));
        return f;
    }();
    return table;
}

}  // namespace config_detail

inline void ExperimentConfig::validate() const {
    auto require = [](bool ok, const char* key, const char* message) {
        if (!ok) throw ConfigError(key, message);
    };
    require(population >= 1, "population.size", "must be at least 1");
    require(active <= population, "population.active", "must not exceed population.size");
    require(min_distance_km > 0.0, "population.min_distance_km", "must be positive");
    require(cell_radius_km >= min_distance_km, "population.cell_radius_km", "must be at least the minimum distance");
    require(deadline_min_ms > 0.0, "traffic.deadline_min_ms", "must be positive");
    require(deadline_max_ms >= deadline_min_ms, "traffic.deadline_max_ms", "must be at least deadline_min_ms");
    require(deadline_spread_ms >= 0.0, "traffic.deadline_spread_ms", "must be nonnegative");
    require(value_std >= 0.0, "traffic.value_std", "must be nonnegative");
    require(transmit_delay_ms >= 0.0, "traffic.transmit_delay_ms", "must be nonnegative");
    require(processing_delay_ms >= 0.0, "traffic.processing_delay_ms", "must be nonnegative");
    require(deadline_min_ms > transmit_delay_ms + processing_delay_ms, "traffic.deadline_min_ms",
            "must exceed the fixed transmission and processing delays");
    require(mean_min >= 0.0 && mean_max <= 1.0 && mean_min <= mean_max, "synthetic.mean_min",
            "need 0 <= mean_min <= mean_max <= 1");
    require(population == 1 || mean_min < mean_max || !means.empty(), "synthetic.mean_max",
            "synthetic means must be distinct");
    if (!means.empty()) {
        require(means.size() == population, "synthetic.means", "needs one mean per MTD");
        for (double m : means) require(m >= 0.0 && m <= 1.0, "synthetic.means", "means must lie in [0, 1]");
        std::set<double> distinct(means.begin(), means.end());
        require(distinct.size() == means.size(), "synthetic.means", "means must be distinct");
    }
    require(psi > 0.0, "scheduler.psi", "must be positive");
    require(grants >= 1, "scheduler.grants", "must be at least 1");
    require(slot_ms > 0.0, "run.slot_ms", "must be positive");
    require(replications >= 1, "run.replications", "must be at least 1");
    try {
        weights.validate();
    } catch (const DomainError& e) {
        throw ConfigError("utility.alpha", e.what());
    }
    try {
        gompertz.validate();
    } catch (const DomainError& e) {
        throw ConfigError("gompertz.a", e.what());
    }
    predictor.validate();
    require(bandwidth_hz > 0.0, "channel.bandwidth_hz", "must be positive");
    require(shadowing_sigma_db >= 0.0, "channel.shadowing_sigma_db", "must be nonnegative");
    require(rate_threshold_bps >= 0.0, "channel.rate_threshold_bps", "must be nonnegative");
    require(mean_samples >= 1, "regret.mean_samples", "must be at least 1");
    require(!f_e1 || *f_e1 >= 0.0, "bound.f_e1", "must be nonnegative");
    require(!f_e2 || *f_e2 >= 0.0, "bound.f_e2", "must be nonnegative");
    require(calibration_slots >= 1, "bound.calibration_slots", "must be at least 1");
}

/// Sets one key from its text form. Does not validate the whole config.
inline void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& f : config_detail::fields()) {
        if (f.key == key) {
            f.set(cfg, value);
            return;
        }
    }
    throw ConfigError(key, "unknown key");
}

inline std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : config_detail::fields()) keys.push_back(f.key);
    return keys;
}

inline ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig cfg;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const auto trimmed = config_detail::trim(line);
        if (trimmed.empty()) continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
        }
        const auto key = config_detail::trim(std::string_view(trimmed).substr(0, eq));
        const auto value = config_detail::trim(std::string_view(trimmed).substr(eq + 1));
        if (!seen.insert(key).second) throw ConfigError(key, "duplicate key");
        set_config_value(cfg, key, value);
    }
    cfg.validate();
    return cfg;
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    for (const auto& f : config_detail::fields()) out << f.key << " = " << f.get(cfg) << '\n';
    return out.str();
}

}  // namespace sleepgrant
