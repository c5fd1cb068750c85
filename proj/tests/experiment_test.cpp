#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "immnet/experiment.hpp"

using namespace immnet;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
    return parse_config("n_users = 20\nn_jumps = 200\nn_mc = 4000\ngamma0_sweep_db = 0,10,20\n");
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    ADD_FAILURE() << "missing column " << name;
    return 0;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string config_error_key(const std::string& text, const ConfigOverrides& o = {}) {
    try {
        parse_config(text, o);
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "";
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

TEST(LoadConfig, EmptyFileGivesDefaultSet) {
    const ExperimentConfig c = parse_config("");
    EXPECT_EQ(c.st_km2, 10.0);
    EXPECT_EQ(c.sc_km2, 1.0);
    EXPECT_EQ(c.lambda_c_bs_per_km2, 20.0);
    EXPECT_EQ(c.lambda_s_bs_per_km2, 5.0);
    EXPECT_EQ(c.lambda_m_bs_per_km2, 1.0);
    EXPECT_EQ(c.rho, 1.0);
    EXPECT_EQ(c.beta_c, 0.5);
    EXPECT_EQ(c.beta_s, 1.5);
    EXPECT_EQ(c.p_t_w, 0.1);
    EXPECT_EQ(c.lambda_h, 1.0);
    EXPECT_EQ(c.alpha, 4.0);
    EXPECT_EQ(c.speed_mps, 5.0);
    EXPECT_EQ(c.delta_t_m_s, 10.0);
    EXPECT_EQ(c.gamma0_sweep_db.front(), 0.0);
    EXPECT_EQ(c.gamma0_sweep_db.back(), 20.0);
    EXPECT_EQ(c.gamma0_sweep_db.size(), 11u);
}

TEST(LoadConfig, ConvertsUnits) {
    const ExperimentConfig c = parse_config("");
    EXPECT_DOUBLE_EQ(c.layout().total_area(), 10e6);
    EXPECT_DOUBLE_EQ(c.layout().community_area(), 1e6);
    const Deployment d = c.deployment();
    EXPECT_DOUBLE_EQ(d.lambda_c(), 20e-6);
    EXPECT_DOUBLE_EQ(d.lambda_s(), 5e-6);
    EXPECT_DOUBLE_EQ(d.lambda_m(), 1e-6);
    EXPECT_DOUBLE_EQ(c.channel(db_to_linear(10.0)).gamma0, 10.0);
    EXPECT_DOUBLE_EQ(c.macro(20.0).delta_r(), 200.0);
}

TEST(LoadConfig, CommunityLargerThanPlaneNamesKey) {
    EXPECT_EQ(config_error_key("sc_km2 = 11\n"), "sc_km2");
}

TEST(LoadConfig, RejectsUnknownKeysAndBadValues) {
    EXPECT_EQ(config_error_key("speed = 5\n"), "speed");
    EXPECT_EQ(config_error_key("rho = one\n"), "rho");
    EXPECT_EQ(config_error_key("n_mc = 1.5\n"), "n_mc");
    EXPECT_EQ(config_error_key("seed = -3\n"), "seed");
    EXPECT_EQ(config_error_key("alpha = 2\n"), "alpha");
    EXPECT_EQ(config_error_key("gamma0_sweep_db = 0,10,5\n"), "gamma0_sweep_db");
    EXPECT_EQ(config_error_key("gamma0_sweep_db = \n"), "gamma0_sweep_db");
    EXPECT_EQ(config_error_key("noise_model = white\n"), "noise_model");
    EXPECT_EQ(config_error_key("t_max_s = 5\n"), "t_max_s");
    EXPECT_EQ(config_error_key("aspect_community = 20\n"), "aspect_community");
    EXPECT_EQ(config_error_key("just some words\n"), "line 1");
}

TEST(LoadConfig, OverrideBeatsFileValue) {
    const ExperimentConfig c = parse_config("seed = 3\nworkers = 2\n", {{"seed", "7"}});
    EXPECT_EQ(c.seed, 7u);
    EXPECT_EQ(c.workers, 2u);
}

TEST(LoadConfig, CommentsAndWhitespace) {
    const ExperimentConfig c = parse_config("# header\n\n  speed_mps=12.5   # fast\r\nnoise_model = gaussian_amplitude\n");
    EXPECT_EQ(c.speed_mps, 12.5);
    EXPECT_EQ(c.noise_model, NoiseModel::GaussianAmplitude);
}

TEST(LoadConfig, PrintedDefaultsRoundTrip) {
    const std::string text = config_text(ExperimentConfig{});
    EXPECT_EQ(config_text(parse_config(text)), text);
    ExperimentConfig odd = parse_config("gamma = 0.37\nseed = 18446744073709551615\ngamma0_sweep_db = -3,0.5,7\n");
    EXPECT_EQ(config_text(parse_config(config_text(odd))), config_text(odd));
}

TEST(LoadConfig, MissingFileIsConfigError) {
    EXPECT_THROW(load_config("/nonexistent/immnet.cfg"), ConfigError);
}

// ---------------------------------------------------------------------------
// Figures

TEST(FigureSpec, HeadersAreFixedPerFigure) {
    const std::string mobility = "figure_id,model,speed_mps,area_ratio,analytic,simulated,std_error,n_samples,seed";
    const std::string small =
        "figure_id,lambda_c_bs_per_km2,lambda_s_bs_per_km2,gamma0_db,n_cover,analytic,simulated,std_error,iterations,"
        "n_samples,seed";
    const std::string macro = "figure_id,speed_mps,gamma0_db,analytic,simulated,std_error,n_samples,seed";
    const std::vector<std::string> expected = {mobility, mobility, small, small, small, macro};
    const ExperimentConfig c = small_config();
    for (int id = 2; id <= 7; ++id) {
        const FigureOutput f = run_figure(figure_spec(id), c);
        EXPECT_EQ(f.csv.substr(0, f.csv.find('\n')), expected[id - 2]) << id;
    }
    EXPECT_THROW(figure_spec(1), ConfigError);
    EXPECT_THROW(figure_spec(8), ConfigError);
}

TEST(RunFigure, GridShapes) {
    const ExperimentConfig c = small_config();
    EXPECT_EQ(parse_csv(run_figure(figure_spec(2), c).csv).size(), 1u + 2 * 4 * 10);
    EXPECT_EQ(parse_csv(run_figure(figure_spec(3), c).csv).size(), 1u + 2 * 4);
    EXPECT_EQ(parse_csv(run_figure(figure_spec(4), c).csv).size(), 1u + 5 * 3);
    EXPECT_EQ(parse_csv(run_figure(figure_spec(7), c).csv).size(), 1u + 4 * 3);
}

TEST(RunFigure, ProbabilitiesInUnitIntervalAndErrorsNonnegative) {
    const ExperimentConfig c = small_config();
    for (int id = 2; id <= 7; ++id) {
        const auto rows = parse_csv(run_figure(figure_spec(id), c).csv);
        const auto& h = rows.front();
        const std::size_t se = column(h, "std_error");
        std::vector<std::size_t> probs;
        if (id != 4) probs = {column(h, "analytic"), column(h, "simulated")};
        for (std::size_t r = 1; r < rows.size(); ++r) {
            ASSERT_EQ(rows[r].size(), h.size());
            EXPECT_GE(std::stod(rows[r][se]), 0.0);
            for (std::size_t p : probs) {
                EXPECT_GE(std::stod(rows[r][p]), 0.0) << id;
                EXPECT_LE(std::stod(rows[r][p]), 1.0) << id;
            }
        }
    }
}

TEST(RunFigure, SameSeedSameBytesAnyWorkerCount) {
    ExperimentConfig a = small_config();
    ExperimentConfig b = a;
    b.workers = 4;
    for (int id : {2, 4, 7}) {
        const std::string first = run_figure(figure_spec(id), a).csv;
        EXPECT_EQ(run_figure(figure_spec(id), a).csv, first) << id;
        EXPECT_EQ(run_figure(figure_spec(id), b).csv, first) << id;
    }
    ExperimentConfig other = a;
    other.seed = 2;
    EXPECT_NE(run_figure(figure_spec(2), other).csv, run_figure(figure_spec(2), a).csv);
}

TEST(RunFigure, ProbabilitiesPrintedWithSixDecimals) {
    const auto rows = parse_csv(run_figure(figure_spec(3), small_config()).csv);
    const std::size_t a = column(rows.front(), "analytic");
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const std::string& v = rows[r][a];
        ASSERT_NE(v.find('.'), std::string::npos);
        EXPECT_EQ(v.size() - v.find('.') - 1, 6u) << v;
    }
}

TEST(RunFigure, ComputationErrorsNameTheGridPoint) {
    ExperimentConfig c = small_config();
    c.lambda_c_bs_per_km2 = 4.0;
    try {
        run_figure(figure_spec(4), c);
        FAIL() << "expected DomainError";
    } catch (const DomainError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("figure 4"), std::string::npos) << what;
        EXPECT_NE(what.find("densities 4/5"), std::string::npos) << what;
    }
}

TEST(RunFigure, RwpRowsTrackAreaRatioAtEverySpeed) {
    const ExperimentConfig c = parse_config("");
    const auto rows = parse_csv(run_figure(figure_spec(3), c).csv);
    const std::size_t model = column(rows.front(), "model"), sim = column(rows.front(), "simulated");
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r][model] != "RWP") continue;
        EXPECT_NEAR(std::stod(rows[r][sim]), 0.1, 0.01) << rows[r][2];
    }
}

TEST(RunFigure, ImmPauseCurveHasInteriorMinimum) {
    const ExperimentConfig c = parse_config("n_users = 50\n");
    const auto rows = parse_csv(run_figure(figure_spec(2), c).csv);
    const auto& h = rows.front();
    std::vector<double> curve;
    for (std::size_t r = 1; r < rows.size(); ++r)
        if (rows[r][column(h, "model")] == "IMM" && rows[r][column(h, "speed_mps")] == "5")
            curve.push_back(std::stod(rows[r][column(h, "analytic")]));
    ASSERT_EQ(curve.size(), 10u);
    const auto it = std::min_element(curve.begin(), curve.end());
    EXPECT_NE(it, curve.begin());
    EXPECT_NE(it, curve.end() - 1);
}

TEST(RenderSvg, OnePolylinePerSeries) {
    const FigureOutput f = run_figure(figure_spec(7), small_config());
    const std::string svg = render_svg(f);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
    std::size_t lines = 0;
    for (std::size_t p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++lines;
    EXPECT_EQ(lines, f.series.size());
    EXPECT_EQ(f.series.size(), 8u);
}

// ---------------------------------------------------------------------------
// validate

TEST(Validate, DefaultConfigPassesEveryCheck) {
    const ValidationReport r = validate(parse_config(""));
    EXPECT_TRUE(r.all_passed()) << r.text();
    EXPECT_GE(r.checks.size(), 8u);
}

TEST(Validate, DensityOrderViolationIsNamed) {
    const ValidationReport r = validate(parse_config("lambda_c_bs_per_km2 = 4\n"));
    ASSERT_FALSE(r.checks.empty());
    EXPECT_EQ(r.checks.front().name, "deployment_constraint");
    EXPECT_EQ(r.checks.front().status, CheckStatus::Fail);
    EXPECT_NE(r.checks.front().detail.find("lambda_c_bs_per_km2"), std::string::npos);
}

TEST(Validate, TinySampleCountIsInconclusiveNotFail) {
    const ValidationReport r = validate(parse_config("n_mc = 100\n"));
    for (const Check& c : r.checks) {
        if (c.name != "small_cell_single_interferer" && c.name != "macro_numeric_vs_simulation") continue;
        EXPECT_EQ(c.status, CheckStatus::Inconclusive) << c.name;
    }
    EXPECT_NE(r.text().find("inconclusive (noise floor)"), std::string::npos);
}

TEST(CompareCheck, StatusRules) {
    EXPECT_EQ(compare_check("a", 0.50, 0.5, 0.001, 0.01).status, CheckStatus::Pass);
    EXPECT_EQ(compare_check("b", 0.60, 0.5, 0.001, 0.01).status, CheckStatus::Fail);
    EXPECT_EQ(compare_check("c", 0.60, 0.5, 0.005, 0.01).status, CheckStatus::Inconclusive);
}

// ---------------------------------------------------------------------------
// Command line

#ifdef IMMNET_CLI_PATH
namespace {

int run_cli(const std::string& args, const fs::path& dir) {
    const std::string cmd = std::string(IMMNET_CLI_PATH) + " --out " + dir.string() + " " + args + " > " +
                            (dir / "stdout.txt").string() + " 2> " + (dir / "stderr.txt").string();
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("immnet_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST(Cli, ExitCodes) {
    const fs::path d = scratch("codes");
    EXPECT_EQ(run_cli("config --print-defaults", d), 0);
    EXPECT_EQ(read_file(d / "stdout.txt"), config_text(ExperimentConfig{}));
    EXPECT_EQ(run_cli("--set sc_km2=11 validate", d), 2);
    EXPECT_NE(read_file(d / "stderr.txt").find("sc_km2"), std::string::npos);
    EXPECT_EQ(run_cli("--config /nonexistent.cfg validate", d), 2);
    EXPECT_EQ(run_cli("figure --id 9", d), 2);
    EXPECT_EQ(run_cli("figure", d), 2);
    EXPECT_EQ(run_cli("--set lambda_c_bs_per_km2=4 --set n_mc=1000 --set gamma0_sweep_db=0 figure --id 5", d), 1);
    EXPECT_EQ(run_cli("--set lambda_c_bs_per_km2=4 --set n_mc=100 validate", d), 0);
    EXPECT_NE(read_file(d / "stdout.txt").find("fail  deployment_constraint"), std::string::npos);
}

TEST(Cli, SeedFlagBeatsConfigFile) {
    const fs::path d = scratch("seed");
    {
        std::ofstream cfg(d / "run.cfg");
        cfg << "seed = 3\nn_jumps = 50\n";
    }
    ASSERT_EQ(run_cli("--config " + (d / "run.cfg").string() + " --seed 7 simulate", d), 0);
    const std::string flag = read_file(d / "trajectory_imm.csv");
    ASSERT_EQ(run_cli("--set seed=7 --set n_jumps=50 simulate", d), 0);
    EXPECT_EQ(read_file(d / "trajectory_imm.csv"), flag);
    ASSERT_EQ(run_cli("--config " + (d / "run.cfg").string() + " simulate", d), 0);
    EXPECT_NE(read_file(d / "trajectory_imm.csv"), flag);
    EXPECT_EQ(std::count(flag.begin(), flag.end(), '\n'), 51);
}

TEST(Cli, FigureWritesCsvAndSvg) {
    const fs::path d = scratch("figure");
    ASSERT_EQ(run_cli("--set n_users=10 --set n_jumps=100 figure --id 3 --svg", d), 0);
    EXPECT_TRUE(fs::exists(d / "figure_3.csv"));
    EXPECT_TRUE(fs::exists(d / "figure_3.svg"));
    EXPECT_EQ(read_file(d / "figure_3.csv"),
              run_figure(figure_spec(3), parse_config("n_users = 10\nn_jumps = 100\n")).csv);
}
#endif
