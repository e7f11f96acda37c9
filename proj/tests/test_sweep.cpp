#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qdso/config.hpp"
#include "qdso/sweep.hpp"

using namespace qdso;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "qdso_tests";
    fs::create_directories(dir);
    const auto p = dir / name;
    fs::remove(p);
    fs::remove(p.string() + ".journal");
    return p;
}

SweepSpec small_spec(int workers) {
    SweepSpec s;
    s.base = with_bias(presets::thermal_bias(), -40.0, 0.0);
    s.base.system.lambda = 0.7;
    s.base.system.n_cut = 10;
    s.axis1 = {AxisParam::MuTilde, -30.0, 30.0, 3};
    s.axis2 = Axis{AxisParam::DeltaMu, -60.0, 60.0, 3};
    s.workers = workers;
    return s;
}

pt::ptree tree_from(const std::string& text) {
    std::istringstream is(text);
    pt::ptree t;
    pt::ini_parser::read_ini(is, t);
    return t;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(QDSO_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(Axis, ValuesAndApplication) {
    const Axis a{AxisParam::DeltaMu, -10.0, 10.0, 5};
    EXPECT_DOUBLE_EQ(a.value(0), -10.0);
    EXPECT_DOUBLE_EQ(a.value(4), 10.0);
    EXPECT_DOUBLE_EQ(a.value(2), 0.0);
    const auto c = apply_axis(presets::isothermal(), AxisParam::DeltaMu, 8.0);
    EXPECT_DOUBLE_EQ(c.lead_L.chem_potential, 4.0);
    EXPECT_DOUBLE_EQ(c.lead_R.chem_potential, -4.0);
    EXPECT_DOUBLE_EQ(apply_axis(c, AxisParam::Lambda, 0.3).system.lambda, 0.3);
}

TEST(Parsing, AxesOutputsAndErrors) {
    const auto a = parse_axis("mu_tilde -2pi*10 2pi*10 7");
    EXPECT_NEAR(a.min, -20.0 * std::numbers::pi, 1e-12);
    EXPECT_EQ(a.count, 7);
    EXPECT_THROW(parse_axis("gamma 0 1 3"), ConfigError);
    EXPECT_THROW(parse_axis("mu_tilde 0 1"), ConfigError);
    EXPECT_THROW(parse_axis("mu_tilde 0 1 2.5"), ConfigError);
    EXPECT_EQ(parse_outputs("transport, mode"), Transport | ModeGroup);
    EXPECT_EQ(parse_outputs("all"), AllOutputs);
    EXPECT_THROW(parse_outputs("bogus"), ConfigError);
    EXPECT_THROW(parse_outputs(""), ConfigError);
    EXPECT_THROW(parse_quantity("12 furlongs"), ConfigError);
    EXPECT_NEAR(parse_quantity("100mK"), units::millikelvin_to_ghz(100.0), 1e-12);

    const auto spec = sweep_from_tree(tree_from("[system]\nn_cut=12\n[sweep]\naxis1=delta_mu -50 50 11\n"
                                                "axis2=mu_tilde -60 60 5\noutputs=transport,thermo\n"
                                                "n_cut_policy=adaptive\n[torotropy]\ndr=0.01\n"));
    EXPECT_EQ(spec.size(), 55u);
    EXPECT_EQ(spec.base.system.n_cut, 12);
    EXPECT_EQ(spec.point.policy, NCutPolicy::Adaptive);
    EXPECT_EQ(spec.point.outputs, Transport | Thermo);
    EXPECT_DOUBLE_EQ(spec.point.torotropy.dr, 0.01);
    EXPECT_THROW(sweep_from_tree(tree_from("[sweep]\naxis1=mu_tilde 1 0 3\n")), ConfigError);
    EXPECT_THROW(sweep_from_tree(tree_from("[sweep]\naxis1=mu_tilde 0 1 3\naxis2=mu_tilde 0 1 3\n")), ConfigError);
    EXPECT_THROW(sweep_from_tree(tree_from("[system]\nn_cut=0\n[sweep]\naxis1=mu_tilde 0 1 3\n")), ConfigError);
    EXPECT_THROW(sweep_from_tree(tree_from("[system]\nlambda=0.5\n")), ConfigError);
}

TEST(Parsing, Overrides) {
    auto t = tree_from("[system]\nlambda=0.5\n");
    apply_override(t, "system.lambda=0.9");
    apply_override(t, "lead_R.temperature=60mK");
    const auto c = model_from_tree(t);
    EXPECT_DOUBLE_EQ(c.system.lambda, 0.9);
    EXPECT_NEAR(c.lead_R.temperature, units::millikelvin_to_ghz(60.0), 1e-12);
    EXPECT_THROW(apply_override(t, "novalue"), ConfigError);
}

TEST(RunPoint, DeterministicAndComplete) {
    auto c = with_bias(presets::thermal_bias(), -40.0, 0.0);
    c.system.lambda = 0.7;
    c.system.n_cut = 12;
    const auto a = run_point(c), b = run_point(c);
    EXPECT_EQ(a.status, "ok");
    EXPECT_EQ(a.thermo.current_R, b.thermo.current_R);
    EXPECT_EQ(a.torotropy, b.torotropy);
    EXPECT_EQ(a.ergotropy, b.ergotropy);
    EXPECT_TRUE(std::isfinite(a.torotropy));
    EXPECT_TRUE(std::isfinite(a.thermo.phonon_number));
    EXPECT_LT(a.residual, 1e-8);
}

TEST(RunPoint, BlockadeMode) {
    auto c = with_bias(presets::isothermal(), 0.0, 80.0);
    c.system.lambda = 0.7;
    c.system.n_cut = 10;
    const auto r = run_point(c);
    EXPECT_EQ(r.thermo.mode, Mode::Blockade);
}

TEST(RunPoint, DecoupledIsReportedDegenerate) {
    auto c = with_bias(presets::isothermal(), -30.0, 0.0);
    c.system.lambda = 0.0;
    c.system.n_cut = 6;
    const auto r = run_point(c);
    EXPECT_EQ(r.status, "degenerate");
    EXPECT_TRUE(std::isnan(r.thermo.phonon_number));
    EXPECT_TRUE(std::isfinite(r.thermo.current_R));
}

TEST(RunPoint, AdaptivePolicyGrowsCutoff) {
    auto c = with_bias(presets::isothermal(), -50.0, 0.0);
    c.system.lambda = 0.7;
    c.system.n_cut = 10;
    PointOptions opts;
    opts.policy = NCutPolicy::Adaptive;
    opts.adaptive_cap = 40;
    const auto r = run_point(c, opts);
    EXPECT_GE(r.n_cut, 30);
    EXPECT_LE(r.n_cut, 40);
}

TEST(Sweep, WorkerCountDoesNotChangeOutput) {
    const auto p1 = scratch("w1.csv"), p3 = scratch("w3.csv");
    const auto s1 = run_sweep(small_spec(1), p1.string());
    const auto s3 = run_sweep(small_spec(3), p3.string());
    EXPECT_EQ(s1.points, 9u);
    EXPECT_EQ(s1.failures, 0u);
    EXPECT_EQ(s3.failures, 0u);
    const auto text = slurp(p1);
    EXPECT_EQ(text, slurp(p3));
    EXPECT_EQ(text.rfind("# qdso sweep, version", 0), 0u);
    EXPECT_FALSE(fs::exists(p1.string() + ".journal"));
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n') - std::count(text.begin(), text.end(), '#'), 1 + 9);
}

TEST(Sweep, ResumeFromPartialJournal) {
    const auto full = scratch("full.csv"), part = scratch("part.csv");
    run_sweep(small_spec(1), full.string());
    // journal with two finished points and a torn third line
    const auto spec = small_spec(2);
    {
        std::ofstream j(part.string() + ".journal", std::ios::binary);
        for (std::size_t i : {4u, 7u}) {
            auto row = run_point(spec.config_at(i), spec.point);
            row.axis1 = spec.axis1.value(static_cast<int>(i / 3));
            row.axis2 = spec.axis2->value(static_cast<int>(i % 3));
            j << i << '\t' << csv_row(spec, row) << '\n';
        }
        j << "1\t-30,-60,o";
    }
    const auto summary = run_sweep(spec, part.string(), true);
    EXPECT_EQ(summary.resumed, 2u);
    EXPECT_EQ(slurp(full), slurp(part));
}

TEST(Sweep, ErrorsLandInStatusColumn) {
    auto spec = small_spec(1);
    spec.axis2.reset();
    spec.axis1 = {AxisParam::Lambda, -0.5, 0.5, 2}; // the negative coupling fails validation at its point only
    spec.base.system.n_cut = 4;
    const auto p = scratch("err.csv");
    const auto s = run_sweep(spec, p.string());
    const auto text = slurp(p);
    EXPECT_EQ(s.points, 2u);
    EXPECT_EQ(s.failures, 1u);
    EXPECT_NE(text.find(",error: lambda must be >= 0"), std::string::npos);
}

TEST(Cli, ExitCodes) {
    const auto dir = fs::temp_directory_path() / "qdso_tests";
    fs::create_directories(dir);
    EXPECT_EQ(run_cli("--help"), 0);
    EXPECT_EQ(run_cli("nonsense"), 1);
    EXPECT_EQ(run_cli("point --set system.n_cut=8 --set system.lambda=0.5"), 0);
    EXPECT_EQ(run_cli("point --set system.lambda=abc"), 1);
    EXPECT_EQ(run_cli("point --config /nonexistent.ini"), 1);
    EXPECT_EQ(run_cli("validate oracle"), 0);
    EXPECT_EQ(run_cli("validate nosuchsuite"), 1);
    const auto ini = dir / "cli_sweep.ini";
    {
        std::ofstream os(ini);
        os << "[system]\nn_cut=6\nlambda=0.5\n[sweep]\naxis1=mu_tilde -10 10 3\n";
    }
    const auto out = dir / "cli_sweep.csv";
    EXPECT_EQ(run_cli("sweep --config " + ini.string() + " --out " + out.string()), 0);
    EXPECT_TRUE(fs::exists(out));
    EXPECT_EQ(run_cli("markov-check --points 50 --out " + (dir / "markov.csv").string()), 0);
}
