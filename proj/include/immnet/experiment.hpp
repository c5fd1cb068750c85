#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "immnet/coverage.hpp"
#include "immnet/errors.hpp"
#include "immnet/geometry.hpp"
#include "immnet/metrics.hpp"
#include "immnet/mobility.hpp"
#include "immnet/parallel.hpp"
#include "immnet/random.hpp"

namespace immnet {

/// Every knob of an experiment run. Areas in km^2 and densities per km^2
/// as written in config files; the accessors convert to meters.
struct ExperimentConfig {
    double st_km2 = 10.0;
    double sc_km2 = 1.0;
    double aspect_total = 1.0;
    double aspect_community = 1.0;

    double lambda_c_bs_per_km2 = 20.0;
    double lambda_s_bs_per_km2 = 5.0;
    double lambda_m_bs_per_km2 = 1.0;

    double rho = 1.0;
    double gamma = 0.21;
    double beta_c = 0.5;
    double beta_s = 1.5;
    double t_min_s = 10.0;
    double t_max_s = 1e4;
    double speed_mps = 5.0;

    double p_t_w = 0.1;
    double lambda_h = 1.0;
    double alpha = 4.0;
    double gamma0_db = 0.0;
    std::vector<double> gamma0_sweep_db = {0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20};
    NoiseModel noise_model = NoiseModel::Constant;
    double noise_value = 1e-13;

    double delta_t_m_s = 10.0;

    std::uint64_t n_jumps = 1000;
    std::uint64_t n_users = 200;
    std::uint64_t n_mc = 100000;
    std::uint64_t seed = 1;
    std::uint64_t workers = 1;

    Layout layout_with_ratio(double ratio) const {
        return Layout::centered(st_km2 * 1e6, ratio * st_km2 * 1e6, aspect_total, aspect_community);
    }
    Layout layout() const { return layout_with_ratio(sc_km2 / st_km2); }

    Deployment deployment(double lc_km2, double ls_km2) const {
        return Deployment(lc_km2 * 1e-6, ls_km2 * 1e-6, lambda_m_bs_per_km2 * 1e-6);
    }
    Deployment deployment() const { return deployment(lambda_c_bs_per_km2, lambda_s_bs_per_km2); }
    double lambda_m() const { return lambda_m_bs_per_km2 * 1e-6; }

    ImmParams imm(double speed) const {
        ImmParams p;
        p.rho = rho;
        p.gamma = gamma;
        p.speed = speed;
        p.wait_in = {beta_c, t_min_s, t_max_s};
        p.wait_out = {beta_s, t_min_s, t_max_s};
        return p;
    }
    ImmParams imm() const { return imm(speed_mps); }

    /// RWP pauses follow the outside law everywhere.
    WaitModel rwp_wait() const { return {beta_s, t_min_s, t_max_s}; }

    ChannelParams channel(double gamma0_lin) const {
        ChannelParams ch;
        ch.p_t = p_t_w;
        ch.lambda_h = lambda_h;
        ch.alpha = alpha;
        ch.gamma0 = gamma0_lin;
        ch.noise = {noise_model, noise_value};
        return ch;
    }
    ChannelParams channel() const { return channel(db_to_linear(gamma0_db)); }

    MacroMobility macro(double speed) const { return {speed, delta_t_m_s}; }

    EnsembleSpec ensemble(std::uint64_t stream) const {
        EnsembleSpec s;
        s.n_users = n_users;
        s.n_jumps = n_jumps;
        s.seed = stream_seed(seed, {stream});
        s.workers = static_cast<unsigned>(workers);
        return s;
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double parse_real(std::string_view key, std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double v = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || end != text.data() + text.size() || !std::isfinite(v))
        throw ConfigError(std::string(key), "not a number: '" + std::string(text) + "'");
    return v;
}

inline std::uint64_t parse_count(std::string_view key, std::string_view text) {
    text = trim(text);
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || end != text.data() + text.size())
        throw ConfigError(std::string(key), "not a nonnegative integer: '" + std::string(text) + "'");
    return v;
}

inline std::string format_real(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

struct ConfigKey {
    std::string_view name;
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

inline ConfigKey real_key(std::string_view name, double ExperimentConfig::*m) {
    return {name, [=](ExperimentConfig& c, std::string_view v) { c.*m = parse_real(name, v); },
            [=](const ExperimentConfig& c) { return format_real(c.*m); }};
}

inline ConfigKey count_key(std::string_view name, std::uint64_t ExperimentConfig::*m) {
    return {name, [=](ExperimentConfig& c, std::string_view v) { c.*m = parse_count(name, v); },
            [=](const ExperimentConfig& c) { return std::to_string(c.*m); }};
}

inline const std::vector<ConfigKey>& config_keys() {
    using C = ExperimentConfig;
    static const std::vector<ConfigKey> keys = {
        real_key("st_km2", &C::st_km2),
        real_key("sc_km2", &C::sc_km2),
        real_key("aspect_total", &C::aspect_total),
        real_key("aspect_community", &C::aspect_community),
        real_key("lambda_c_bs_per_km2", &C::lambda_c_bs_per_km2),
        real_key("lambda_s_bs_per_km2", &C::lambda_s_bs_per_km2),
        real_key("lambda_m_bs_per_km2", &C::lambda_m_bs_per_km2),
        real_key("rho", &C::rho),
        real_key("gamma", &C::gamma),
        real_key("beta_c", &C::beta_c),
        real_key("beta_s", &C::beta_s),
        real_key("t_min_s", &C::t_min_s),
        real_key("t_max_s", &C::t_max_s),
        real_key("speed_mps", &C::speed_mps),
        real_key("p_t_w", &C::p_t_w),
        real_key("lambda_h", &C::lambda_h),
        real_key("alpha", &C::alpha),
        real_key("gamma0_db", &C::gamma0_db),
        {"gamma0_sweep_db",
         [](C& c, std::string_view v) {
             c.gamma0_sweep_db.clear();
             while (!trim(v).empty()) {
                 const auto comma = v.find(',');
                 c.gamma0_sweep_db.push_back(parse_real("gamma0_sweep_db", v.substr(0, comma)));
                 if (comma == std::string_view::npos) break;
                 v.remove_prefix(comma + 1);
                 if (trim(v).empty()) throw ConfigError("gamma0_sweep_db", "trailing comma");
             }
         },
         [](const C& c) {
             std::string s;
             for (double g : c.gamma0_sweep_db) s += (s.empty() ? "" : ",") + format_real(g);
             return s;
         }},
        {"noise_model",
         [](C& c, std::string_view v) {
             v = trim(v);
             if (v == "constant")
                 c.noise_model = NoiseModel::Constant;
             else if (v == "gaussian_amplitude")
                 c.noise_model = NoiseModel::GaussianAmplitude;
             else
                 throw ConfigError("noise_model", "expected constant or gaussian_amplitude, got '" + std::string(v) + "'");
         },
         [](const C& c) { return std::string(c.noise_model == NoiseModel::Constant ? "constant" : "gaussian_amplitude"); }},
        real_key("noise_value", &C::noise_value),
        real_key("delta_t_m_s", &C::delta_t_m_s),
        count_key("n_jumps", &C::n_jumps),
        count_key("n_users", &C::n_users),
        count_key("n_mc", &C::n_mc),
        count_key("seed", &C::seed),
        count_key("workers", &C::workers),
    };
    return keys;
}

}  // namespace detail

/// Throws ConfigError naming the first offending key. The lambda_c > lambda_s
/// deployment rule is not checked here; `validate` reports it as a finding.
inline void check_config(const ExperimentConfig& c) {
    auto positive = [](const char* key, double v) {
        if (!(v > 0.0)) throw ConfigError(key, "must be positive");
    };
    positive("st_km2", c.st_km2);
    positive("sc_km2", c.sc_km2);
    if (!(c.sc_km2 < c.st_km2)) throw ConfigError("sc_km2", "community must be smaller than the plane (st_km2)");
    positive("aspect_total", c.aspect_total);
    positive("aspect_community", c.aspect_community);
    try {
        (void)c.layout();
    } catch (const DomainError& e) {
        throw ConfigError("aspect_community", std::string("community does not fit inside the plane: ") + e.what());
    }
    positive("lambda_c_bs_per_km2", c.lambda_c_bs_per_km2);
    positive("lambda_s_bs_per_km2", c.lambda_s_bs_per_km2);
    positive("lambda_m_bs_per_km2", c.lambda_m_bs_per_km2);
    if (!(c.rho > 0.0 && c.rho <= 1.0)) throw ConfigError("rho", "must lie in (0, 1]");
    if (!(c.gamma >= 0.0)) throw ConfigError("gamma", "must be nonnegative");
    positive("beta_c", c.beta_c);
    positive("beta_s", c.beta_s);
    positive("t_min_s", c.t_min_s);
    if (!(c.t_max_s > c.t_min_s)) throw ConfigError("t_max_s", "must exceed t_min_s");
    positive("speed_mps", c.speed_mps);
    positive("p_t_w", c.p_t_w);
    positive("lambda_h", c.lambda_h);
    if (!(c.alpha > 2.0)) throw ConfigError("alpha", "must exceed 2");
    if (c.gamma0_sweep_db.empty()) throw ConfigError("gamma0_sweep_db", "must not be empty");
    if (!std::is_sorted(c.gamma0_sweep_db.begin(), c.gamma0_sweep_db.end()))
        throw ConfigError("gamma0_sweep_db", "must be sorted ascending");
    if (!(c.noise_value >= 0.0)) throw ConfigError("noise_value", "must be nonnegative");
    positive("delta_t_m_s", c.delta_t_m_s);
    if (c.n_jumps == 0) throw ConfigError("n_jumps", "must be at least 1");
    if (c.n_users == 0) throw ConfigError("n_users", "must be at least 1");
    if (c.n_mc == 0) throw ConfigError("n_mc", "must be at least 1");
    if (c.workers == 0 || c.workers > 1024) throw ConfigError("workers", "must lie in [1, 1024]");
}

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// Flat `key = value` text; `#` starts a comment. Overrides are applied
/// after the text, so they win.
inline ExperimentConfig parse_config(std::string_view text, const ConfigOverrides& overrides = {}) {
    ExperimentConfig c;
    auto apply = [&](std::string_view key, std::string_view value) {
        const auto& keys = detail::config_keys();
        const auto it = std::find_if(keys.begin(), keys.end(), [&](const auto& k) { return k.name == key; });
        if (it == keys.end()) throw ConfigError(std::string(key), "unknown key");
        it->set(c, value);
    };
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no), "expected key = value");
        apply(detail::trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    for (const auto& [k, v] : overrides) apply(detail::trim(k), v);
    check_config(c);
    return c;
}

/// Reads `path` (empty path: defaults only) and applies overrides.
inline ExperimentConfig load_config(const std::string& path, const ConfigOverrides& overrides = {}) {
    if (path.empty()) return parse_config("", overrides);
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), overrides);
}

inline std::string config_text(const ExperimentConfig& c) {
    std::string out;
    for (const auto& k : detail::config_keys()) out += std::string(k.name) + " = " + k.get(c) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Figure grids

struct FigureSpec {
    int id = 2;
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<std::string> columns;
};

inline FigureSpec figure_spec(int id) {
    const std::vector<std::string> small_cell = {"figure_id",     "lambda_c_bs_per_km2", "lambda_s_bs_per_km2",
                                                 "gamma0_db",     "n_cover",             "analytic",
                                                 "simulated",     "std_error",           "iterations",
                                                 "n_samples",     "seed"};
    switch (id) {
        case 2:
            return {2, "Pause probability vs community area ratio", "S_c / S_t", "pause probability",
                    {"figure_id", "model", "speed_mps", "area_ratio", "analytic", "simulated", "std_error", "n_samples",
                     "seed"}};
        case 3:
            return {3, "Community time fraction vs speed", "average speed (m/s)", "pi_c_in",
                    {"figure_id", "model", "speed_mps", "area_ratio", "analytic", "simulated", "std_error", "n_samples",
                     "seed"}};
        case 4:
            return {4, "Available small cells vs SINR threshold", "gamma0 (dB)", "N_cover", small_cell};
        case 5:
            return {5, "Inside coverage vs SINR threshold", "gamma0 (dB)", "P_c", small_cell};
        case 6:
            return {6, "Outside coverage vs SINR threshold", "gamma0 (dB)", "P_s", small_cell};
        case 7:
            return {7, "Moving-user macro coverage vs SINR threshold", "gamma0 (dB)", "coverage",
                    {"figure_id", "speed_mps", "gamma0_db", "analytic", "simulated", "std_error", "n_samples", "seed"}};
        default:
            throw ConfigError("id", "figure id must be one of 2..7, got " + std::to_string(id));
    }
}

inline const std::vector<double>& figure_speeds() {
    static const std::vector<double> v = {1.0, 5.0, 10.0, 20.0};
    return v;
}

inline std::vector<double> figure_area_ratios() {
    std::vector<double> r;
    for (int k = 1; k <= 10; ++k) r.push_back(k / 100.0);
    return r;
}

/// (lambda_c, lambda_s) per km^2: defaults, then lambda_c and lambda_s at
/// -50% and +50%.
inline std::vector<std::pair<double, double>> figure_densities(const ExperimentConfig& c) {
    const double lc = c.lambda_c_bs_per_km2, ls = c.lambda_s_bs_per_km2;
    return {{lc, ls}, {0.5 * lc, ls}, {1.5 * lc, ls}, {lc, 0.5 * ls}, {lc, 1.5 * ls}};
}

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    bool dashed = false;
};

struct FigureOutput {
    FigureSpec spec;
    std::string csv;
    std::vector<Series> series;
};

namespace detail {

inline std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::vector<std::string>& columns) { row(columns); }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ += (i ? "," : "") + cells[i];
        out_ += "\n";
    }

    std::string str() const { return out_; }

private:
    std::string out_;
};

// Rethrows a computation error with the grid point prefixed.
template <class Fn>
auto at_grid_point(const std::string& where, Fn&& fn) {
    try {
        return fn();
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(where + ": " + e.what(), e.estimate(), e.error_bound(), e.trace());
    } catch (const DomainError& e) {
        throw DomainError(where + ": " + e.what());
    }
}

inline std::string grid_label(int id, const std::string& rest) { return "figure " + std::to_string(id) + " (" + rest + ")"; }

enum class Model { Imm, Rwp };

inline const char* model_name(Model m) { return m == Model::Imm ? "IMM" : "RWP"; }

// Closed-form inputs for a model. RWP is the same accounting with one wait
// law for both regions.
inline MobilityInputs model_inputs(MobilityInputs base, Model m, const ExperimentConfig& c, double speed) {
    base.speed = speed;
    if (m == Model::Rwp) base.wait_in = base.wait_out = wait_mean(c.rwp_wait());
    return base;
}

inline EnsembleFractions model_ensemble(Model m, const ExperimentConfig& c, const Layout& l, double speed,
                                        const EnsembleSpec& spec) {
    if (m == Model::Imm) return imm_ensemble(c.imm(speed), l, spec);
    return rwp_ensemble(speed, c.rwp_wait(), l, spec);
}

inline FigureOutput mobility_figure(const FigureSpec& spec, const ExperimentConfig& c) {
    const bool pause = spec.id == 2;
    const std::vector<double> ratios = pause ? figure_area_ratios() : std::vector<double>{c.sc_km2 / c.st_km2};
    const unsigned workers = static_cast<unsigned>(c.workers);

    std::vector<MobilityInputs> inputs(ratios.size());
    parallel_for(ratios.size(), workers, [&](std::size_t i) {
        inputs[i] = at_grid_point(grid_label(spec.id, "area_ratio " + format_real(ratios[i])), [&] {
            return make_mobility_inputs(c.layout_with_ratio(ratios[i]), c.imm());
        });
    });

    CsvWriter csv(spec.columns);
    FigureOutput out{spec, {}, {}};
    for (Model m : {Model::Imm, Model::Rwp}) {
        const EnsembleSpec es = c.ensemble(10 * std::uint64_t(spec.id) + std::uint64_t(m));
        std::vector<Series> fam_a, fam_s;
        for (double v : figure_speeds()) {
            Series a{std::string(model_name(m)) + " v=" + format_real(v) + " analytic", {}, {}, false};
            Series s{std::string(model_name(m)) + " v=" + format_real(v) + " simulated", {}, {}, true};
            for (std::size_t i = 0; i < ratios.size(); ++i) {
                const std::string where = grid_label(spec.id, std::string(model_name(m)) + ", speed " + format_real(v) +
                                                                  ", area_ratio " + format_real(ratios[i]));
                at_grid_point(where, [&] {
                    const MobilityInputs in = model_inputs(inputs[i], m, c, v);
                    const EnsembleFractions e = model_ensemble(m, c, c.layout_with_ratio(ratios[i]), v, es);
                    const double an = pause ? analytic_pi_pause(in) : analytic_pi_c_in(in);
                    const double sim = pause ? e.pooled.pi_pause : e.pooled.pi_c_in;
                    const double se = pause ? e.se_pi_pause : e.se_pi_c_in;
                    csv.row({std::to_string(spec.id), model_name(m), format_real(v), format_real(ratios[i]), fixed6(an),
                             fixed6(sim), fixed6(se), std::to_string(e.jumps), std::to_string(c.seed)});
                    const double x = pause ? ratios[i] : v;
                    a.x.push_back(x);
                    a.y.push_back(an);
                    s.x.push_back(x);
                    s.y.push_back(sim);
                    return 0;
                });
            }
            fam_a.push_back(std::move(a));
            fam_s.push_back(std::move(s));
        }
        if (pause) {
            for (auto& s : fam_a) out.series.push_back(std::move(s));
            for (auto& s : fam_s) out.series.push_back(std::move(s));
        } else {
            // One curve over speed per model.
            Series a{std::string(model_name(m)) + " analytic", {}, {}, false};
            Series s{std::string(model_name(m)) + " simulated", {}, {}, true};
            for (std::size_t k = 0; k < fam_a.size(); ++k) {
                a.x.push_back(fam_a[k].x[0]);
                a.y.push_back(fam_a[k].y[0]);
                s.x.push_back(fam_s[k].x[0]);
                s.y.push_back(fam_s[k].y[0]);
            }
            out.series.push_back(std::move(a));
            out.series.push_back(std::move(s));
        }
    }
    out.csv = csv.str();
    return out;
}

}  // namespace detail

/// One small-cell grid point, solved with both fraction sets.
struct SmallCellPoint {
    double lambda_c_km2 = 0.0;
    double lambda_s_km2 = 0.0;
    double gamma0_db = 0.0;
    NCoverResult analytic;   // fractions from the closed form
    NCoverResult simulated;  // fractions from the IMM ensemble
};

/// Fixed points over densities x gamma0 sweep. Tables are built once per
/// density and shared by the whole sweep; every density uses the same
/// sample streams so the density comparison sees common draws.
inline std::vector<SmallCellPoint> small_cell_grid(const ExperimentConfig& c) {
    const Layout l = c.layout();
    const TimeFractions fa = [&] {
        const MobilityInputs in = make_mobility_inputs(l, c.imm());
        TimeFractions f;
        f.pi_c_in = analytic_pi_c_in(in);
        f.pi_c_out = 1.0 - f.pi_c_in;
        f.pi_pause = analytic_pi_pause(in);
        return f;
    }();
    const TimeFractions fs = imm_ensemble(c.imm(), l, c.ensemble(4)).pooled;

    std::vector<SmallCellPoint> out;
    const auto densities = figure_densities(c);
    for (std::size_t d = 0; d < densities.size(); ++d) {
        const auto [lc, ls] = densities[d];
        const std::string where = "densities " + detail::format_real(lc) + "/" + detail::format_real(ls) + " per km^2";
        detail::at_grid_point(where, [&] {
            const Deployment dep = c.deployment(lc, ls);
            const std::size_t mc = dep.count(RegionTag::Inside, l), ms = dep.count(RegionTag::Outside, l);
            const double bound = std::max(n_cover_bound(mc, ms, fa), n_cover_bound(mc, ms, fs));
            const SmallCellTables t = small_cell_tables(c.channel(), dep, l, bound, c.n_mc,
                                                        stream_seed(c.seed, {4}), static_cast<unsigned>(c.workers));
            for (double db : c.gamma0_sweep_db) {
                detail::at_grid_point("gamma0 " + detail::format_real(db) + " dB", [&] {
                    SmallCellPoint p{lc, ls, db, n_cover_fixed_point(t, db_to_linear(db), fa),
                                     n_cover_fixed_point(t, db_to_linear(db), fs)};
                    out.push_back(std::move(p));
                    return 0;
                });
            }
            return 0;
        });
    }
    return out;
}

namespace detail {

inline FigureOutput small_cell_figure(const FigureSpec& spec, const ExperimentConfig& c) {
    const std::vector<SmallCellPoint> grid =
        at_grid_point(grid_label(spec.id, "small-cell grid"), [&] { return small_cell_grid(c); });
    CsvWriter csv(spec.columns);
    FigureOutput out{spec, {}, {}};
    auto pick = [&](const NCoverResult& r) -> std::pair<double, double> {
        if (spec.id == 4) return {r.n_cover, r.std_error};
        if (spec.id == 5) return {r.p_c.probability, r.p_c.std_error};
        return {r.p_s.probability, r.p_s.std_error};
    };
    std::string current;
    for (const SmallCellPoint& p : grid) {
        const auto [an, an_se] = pick(p.analytic);
        const auto [sim, sim_se] = pick(p.simulated);
        (void)an_se;
        csv.row({std::to_string(spec.id), format_real(p.lambda_c_km2), format_real(p.lambda_s_km2),
                 format_real(p.gamma0_db), fixed6(p.simulated.n_cover), fixed6(an), fixed6(sim), fixed6(sim_se),
                 std::to_string(std::max(p.analytic.iterations, p.simulated.iterations)),
                 std::to_string(p.simulated.p_c.samples), std::to_string(c.seed)});
        const std::string label = "lc=" + format_real(p.lambda_c_km2) + " ls=" + format_real(p.lambda_s_km2);
        if (label != current) {
            out.series.push_back({label + " analytic", {}, {}, false});
            out.series.push_back({label + " simulated", {}, {}, true});
            current = label;
        }
        Series& a = out.series[out.series.size() - 2];
        Series& s = out.series.back();
        a.x.push_back(p.gamma0_db);
        a.y.push_back(an);
        s.x.push_back(p.gamma0_db);
        s.y.push_back(sim);
    }
    out.csv = csv.str();
    return out;
}

inline FigureOutput macro_figure(const FigureSpec& spec, const ExperimentConfig& c) {
    const auto& speeds = figure_speeds();
    const auto& dbs = c.gamma0_sweep_db;
    std::vector<double> gammas;
    for (double db : dbs) gammas.push_back(db_to_linear(db));

    std::vector<double> numeric(speeds.size() * dbs.size());
    parallel_for(numeric.size(), static_cast<unsigned>(c.workers), [&](std::size_t k) {
        const double v = speeds[k / dbs.size()], db = dbs[k % dbs.size()];
        numeric[k] = at_grid_point(grid_label(spec.id, "speed " + format_real(v) + ", gamma0 " + format_real(db) + " dB"),
                                   [&] {
                                       return macro_coverage_numeric(c.channel(db_to_linear(db)), c.lambda_m(),
                                                                     c.macro(v))
                                           .probability;
                                   });
    });

    CsvWriter csv(spec.columns);
    FigureOutput out{spec, {}, {}};
    for (std::size_t i = 0; i < speeds.size(); ++i) {
        const double v = speeds[i];
        const auto mc = at_grid_point(grid_label(spec.id, "speed " + format_real(v) + ", simulation"), [&] {
            return macro_coverage_mc_sweep(c.channel(), c.lambda_m(), c.macro(v), gammas, c.n_mc,
                                           stream_seed(c.seed, {7, i}), static_cast<unsigned>(c.workers));
        });
        Series a{"v=" + format_real(v) + " numeric", {}, {}, false};
        Series s{"v=" + format_real(v) + " simulated", {}, {}, true};
        for (std::size_t j = 0; j < dbs.size(); ++j) {
            const double an = numeric[i * dbs.size() + j];
            csv.row({std::to_string(spec.id), format_real(v), format_real(dbs[j]), fixed6(an), fixed6(mc[j].probability),
                     fixed6(mc[j].std_error), std::to_string(mc[j].samples), std::to_string(c.seed)});
            a.x.push_back(dbs[j]);
            a.y.push_back(an);
            s.x.push_back(dbs[j]);
            s.y.push_back(mc[j].probability);
        }
        out.series.push_back(std::move(a));
        out.series.push_back(std::move(s));
    }
    out.csv = csv.str();
    return out;
}

}  // namespace detail

/// Runs one figure grid. Output depends only on (spec, config); the worker
/// count changes speed, not bytes.
inline FigureOutput run_figure(const FigureSpec& spec, const ExperimentConfig& c) {
    check_config(c);
    switch (spec.id) {
        case 2:
        case 3:
            return detail::mobility_figure(spec, c);
        case 4:
        case 5:
        case 6:
            return detail::small_cell_figure(spec, c);
        case 7:
            return detail::macro_figure(spec, c);
        default:
            throw ConfigError("id", "figure id must be one of 2..7");
    }
}

// ---------------------------------------------------------------------------
// SVG

/// Minimal line chart: one polyline per series, dashed series drawn with
/// markers, legend on the right.
inline std::string render_svg(const FigureOutput& fig) {
    constexpr double W = 860, H = 480, L = 70, R = 250, T = 40, B = 60;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const Series& s : fig.series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) y1 = y0 + 1.0;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4g", v);
        return std::string(buf);
    };
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(H) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(W / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + fig.spec.title + "</text>\n";
    s += "<line x1=\"" + num(L) + "\" y1=\"" + num(H - B) + "\" x2=\"" + num(W - R) + "\" y2=\"" + num(H - B) +
         "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + num(L) + "\" y1=\"" + num(T) + "\" x2=\"" + num(L) + "\" y2=\"" + num(H - B) +
         "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 5; ++k) {
        const double xv = x0 + (x1 - x0) * k / 5, yv = y0 + (y1 - y0) * k / 5;
        s += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(H - B + 16) + "\" text-anchor=\"middle\">" + num(xv) +
             "</text>\n";
        s += "<text x=\"" + num(L - 6) + "\" y=\"" + num(py(yv) + 4) + "\" text-anchor=\"end\">" + num(yv) + "</text>\n";
    }
    s += "<text x=\"" + num((L + W - R) / 2) + "\" y=\"" + num(H - 18) + "\" text-anchor=\"middle\">" + fig.spec.x_label +
         "</text>\n";
    s += "<text x=\"18\" y=\"" + num((T + H - B) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         num((T + H - B) / 2) + ")\">" + fig.spec.y_label + "</text>\n";

    for (std::size_t k = 0; k < fig.series.size(); ++k) {
        const Series& ser = fig.series[k];
        const char* color = palette[(k / 2) % 8];
        std::string pts;
        for (std::size_t i = 0; i < ser.x.size(); ++i) pts += num(px(ser.x[i])) + "," + num(py(ser.y[i])) + " ";
        s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\"" +
             (ser.dashed ? " stroke-dasharray=\"5,3\"" : "") + " points=\"" + pts + "\"/>\n";
        if (ser.dashed)
            for (std::size_t i = 0; i < ser.x.size(); ++i)
                s += "<circle cx=\"" + num(px(ser.x[i])) + "\" cy=\"" + num(py(ser.y[i])) + "\" r=\"2.5\" fill=\"" +
                     color + "\"/>\n";
        const double ly = T + 14.0 * k;
        s += "<line x1=\"" + num(W - R + 12) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(W - R + 36) + "\" y2=\"" + num(ly) +
             "\" stroke=\"" + color + "\"" + (ser.dashed ? " stroke-dasharray=\"5,3\"" : "") + "/>\n";
        s += "<text x=\"" + num(W - R + 42) + "\" y=\"" + num(ly + 4) + "\">" + ser.label + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

// ---------------------------------------------------------------------------
// validate

enum class CheckStatus { Pass, Fail, Inconclusive };

inline const char* to_string(CheckStatus s) {
    switch (s) {
        case CheckStatus::Pass: return "pass";
        case CheckStatus::Fail: return "fail";
        default: return "inconclusive (noise floor)";
    }
}

struct Check {
    std::string name;
    CheckStatus status = CheckStatus::Pass;
    std::string detail;
};

struct ValidationReport {
    std::vector<Check> checks;

    bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.status == CheckStatus::Pass; });
    }

    std::string text() const {
        std::string out;
        for (const Check& c : checks) out += std::string(to_string(c.status)) + "  " + c.name + ": " + c.detail + "\n";
        return out;
    }
};

/// |observed - expected| <= tol, unless three standard errors already
/// exceed tol, in which case the comparison cannot tell.
inline Check compare_check(std::string name, double observed, double expected, double std_error, double tol) {
    const double diff = std::abs(observed - expected);
    Check c{std::move(name), CheckStatus::Pass, {}};
    if (3.0 * std_error >= tol)
        c.status = CheckStatus::Inconclusive;
    else if (!(diff <= tol))
        c.status = CheckStatus::Fail;
    c.detail = "observed " + detail::fixed6(observed) + ", expected " + detail::fixed6(expected) + ", |diff| " +
               detail::fixed6(diff) + ", tol " + detail::fixed6(tol) + ", se " + detail::fixed6(std_error);
    return c;
}

/// Fast invariant suite at reduced sample counts. Failures are report
/// content, never exceptions.
inline ValidationReport validate(const ExperimentConfig& c) {
    ValidationReport rep;
    auto guarded = [&](const std::string& name, auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            rep.checks.push_back({name, CheckStatus::Fail, std::string("error: ") + e.what()});
        }
    };

    const bool dense_inside = c.lambda_c_bs_per_km2 > c.lambda_s_bs_per_km2;
    rep.checks.push_back({"deployment_constraint", dense_inside ? CheckStatus::Pass : CheckStatus::Fail,
                          dense_inside ? "lambda_c_bs_per_km2 > lambda_s_bs_per_km2"
                                       : "violated: lambda_c_bs_per_km2 (" + detail::format_real(c.lambda_c_bs_per_km2) +
                                             ") must exceed lambda_s_bs_per_km2 (" +
                                             detail::format_real(c.lambda_s_bs_per_km2) + ")"});

    const Layout l = c.layout();
    const unsigned workers = static_cast<unsigned>(c.workers);
    // Fixed ensemble sizes keep the mobility checks conclusive at any
    // n_users / n_jumps; Monte Carlo checks follow n_mc, capped for speed.
    auto ensemble = [&](std::size_t users, std::size_t jumps, std::uint64_t stream) {
        EnsembleSpec s = c.ensemble(stream);
        s.n_users = users;
        s.n_jumps = jumps;
        return s;
    };

    guarded("community_hit_fraction", [&] {
        const EnsembleFractions e = imm_ensemble(c.imm(), l, ensemble(10000, 100, 100));
        rep.checks.push_back(compare_check("community_hit_fraction", e.hit_fraction, l.area_ratio(), e.se_hit_fraction,
                                           0.005));
    });

    guarded("closed_form_fractions", [&] {
        const MobilityInputs in = make_mobility_inputs(l, c.imm());
        const EnsembleFractions e = imm_ensemble(c.imm(), l, ensemble(1000, 1000, 101));
        const double a_in = analytic_pi_c_in(in), a_pause = analytic_pi_pause(in);
        rep.checks.push_back(compare_check("pi_c_in_closed_form", e.pooled.pi_c_in, a_in, e.se_pi_c_in, 0.05 * a_in));
        rep.checks.push_back(
            compare_check("pi_pause_closed_form", e.pooled.pi_pause, a_pause, e.se_pi_pause, 0.05 * a_pause));
    });

    guarded("pair_distance_quadrature", [&] {
        const std::size_t n = 100000;
        for (RegionPair p : {RegionPair::InIn, RegionPair::OutIn, RegionPair::OutOut}) {
            const double q = mean_pair_distance(p, l);
            Rng rng = make_stream(c.seed, {102, std::uint64_t(p)});
            double s = 0.0, s2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = sample_pair_distance(p, l, rng);
                s += d;
                s2 += d * d;
            }
            const double mean = s / n, se = std::sqrt(std::max(0.0, s2 / n - mean * mean) / n);
            rep.checks.push_back(compare_check("pair_distance_" + std::string(to_string(p)), mean, q, se,
                                               2e-3 * l.diagonal()));
        }
    });

    guarded("small_cell_single_interferer", [&] {
        ChannelParams ch = c.channel(1.0);
        ch.noise.value = 0.0;
        const CoverageResult r =
            sinr_coverage_mc(ch, 1, [](Rng&) { return 1.0; }, std::min<std::size_t>(c.n_mc, 100000), stream_seed(c.seed, {103}), workers);
        rep.checks.push_back(compare_check("small_cell_single_interferer", r.probability, 0.5, r.std_error, 0.01));
    });

    guarded("n_cover_fixed_point", [&] {
        const NCoverResult r = n_cover_fixed_point(c.channel(), c.deployment(), l,
                                                   imm_ensemble(c.imm(), l, c.ensemble(104)).pooled,
                                                   std::min<std::size_t>(c.n_mc, 20000),
                                                   stream_seed(c.seed, {104}), workers);
        rep.checks.push_back({"n_cover_fixed_point", CheckStatus::Pass,
                              "converged to " + detail::fixed6(r.n_cover) + " in " + std::to_string(r.iterations) +
                                  " iterations"});
    });

    guarded("macro_numeric_vs_simulation", [&] {
        ChannelParams ch = c.channel(1.0);
        ch.noise.value = 0.0;
        const MacroMobility still{0.0, c.delta_t_m_s};
        const double num = macro_coverage_numeric(ch, c.lambda_m(), still).probability;
        const CoverageResult mc = macro_coverage_mc(ch, c.lambda_m(), still, std::min<std::size_t>(c.n_mc, 20000),
                                                    stream_seed(c.seed, {105}), workers);
        rep.checks.push_back(compare_check("macro_numeric_vs_simulation", mc.probability, num, mc.std_error, 0.02));
    });
    return rep;
}

}  // namespace immnet
