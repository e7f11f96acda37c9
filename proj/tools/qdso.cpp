// qdso: command-line front end: point, sweep, husimi, torotropy, validate, markov-check

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qdso/config.hpp"
#include "qdso/leads.hpp"
#include "qdso/observables.hpp"
#include "qdso/phasespace.hpp"
#include "qdso/redfield.hpp"
#include "qdso/sweep.hpp"
#include "qdso/validation.hpp"

namespace {

enum ExitCode { Ok = 0, Usage = 1, ValidationFailure = 2, PartialFailure = 3 };

using nlohmann::json;

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
};

void add_common(CLI::App* app, Common& c, bool out_required = false) {
    app->add_option("--config", c.config, "INI configuration file")->check(CLI::ExistingFile);
    app->add_option("--set", c.sets, "override, section.key=value (repeatable)");
    auto* o = app->add_option("--out", c.out, "output path (stdout when omitted)");
    if (out_required)
        o->required();
}

qdso::pt::ptree load_tree(const Common& c) {
    qdso::pt::ptree tree;
    if (!c.config.empty())
        tree = qdso::read_ini(c.config);
    for (const auto& s : c.sets)
        qdso::apply_override(tree, s);
    return tree;
}

// Writes to --out, or stdout when it is empty.
template <class F>
void emit(const std::string& path, F&& write) {
    if (path.empty()) {
        write(std::cout);
        return;
    }
    std::ofstream os(path);
    if (!os)
        throw qdso::Error("cannot write " + path);
    write(os);
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json row_json(const qdso::ModelConfig& c, const qdso::SweepRow& r) {
    const auto& t = r.thermo;
    json j;
    j["status"] = r.status;
    j["n_cut"] = r.n_cut;
    j["config"] = {{"omega", c.system.omega},
                   {"lambda", c.system.lambda},
                   {"mu_tilde", c.system.mu_tilde},
                   {"mu", c.system.mu()},
                   {"mu_L", c.lead_L.chem_potential},
                   {"mu_R", c.lead_R.chem_potential},
                   {"T_L", c.lead_L.temperature},
                   {"T_R", c.lead_R.temperature}};
    j["occupation"] = number_or_null(t.occupation);
    j["phonon_number"] = number_or_null(t.phonon_number);
    j["current_L"] = number_or_null(t.current_L);
    j["current_R"] = number_or_null(t.current_R);
    j["heat_el_L"] = number_or_null(t.heat_el_L);
    j["heat_el_R"] = number_or_null(t.heat_el_R);
    j["heat_mec_L"] = number_or_null(t.heat_mec_L);
    j["heat_mec_R"] = number_or_null(t.heat_mec_R);
    j["power"] = number_or_null(t.power);
    j["first_law_residual"] = number_or_null(t.first_law_residual);
    j["zeta"] = number_or_null(t.zeta);
    j["mode"] = qdso::to_string(t.mode);
    j["eta_converter"] = t.eta_converter ? json(*t.eta_converter) : json(nullptr);
    j["eta_heater"] = t.eta_heater ? json(*t.eta_heater) : json(nullptr);
    j["torotropy"] = number_or_null(r.torotropy);
    j["ergotropy"] = number_or_null(r.ergotropy);
    j["alpha_c"] = {number_or_null(r.alpha_c.real()), number_or_null(r.alpha_c.imag())};
    j["barycenter"] = {number_or_null(r.barycenter.real()), number_or_null(r.barycenter.imag())};
    j["residual"] = number_or_null(r.residual);
    j["min_eigenvalue"] = number_or_null(r.min_eigenvalue);
    j["warnings"] = r.warnings;
    return j;
}

json report_json(const qdso::ValidationReport& rep) {
    json j;
    j["suite"] = rep.suite;
    j["passed"] = rep.passed();
    for (const auto& c : rep.checks)
        j["checks"].push_back({{"name", c.name}, {"value", number_or_null(c.value)}, {"threshold", c.threshold},
                               {"passed", c.passed}});
    return j;
}

void warn_regime(const qdso::ModelConfig& c) {
    for (const auto& d : qdso::validate_regime(c))
        std::cerr << "warning: " << d.message << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Steady-state transport and self-oscillation analysis of a dot coupled to a resonator"};
    app.require_subcommand(1);

    Common point_opts;
    std::string dump_path;
    auto* point = app.add_subcommand("point", "evaluate one parameter point (JSON)");
    add_common(point, point_opts);
    point->add_option("--dump-ness", dump_path, "write the polaron-frame NESS in binary form");

    Common sweep_opts;
    int workers = 0;
    bool resume = false;
    auto* sweep = app.add_subcommand("sweep", "evaluate a 1-D or 2-D parameter grid (CSV)");
    add_common(sweep, sweep_opts, true);
    sweep->add_option("--workers", workers, "worker threads (overrides sweep.workers)")->check(CLI::PositiveNumber);
    sweep->add_flag("--resume", resume, "continue from <out>.journal");

    Common husimi_opts;
    double extent = 6.0;
    int count = 121;
    auto* husimi = app.add_subcommand("husimi", "Husimi Q on a square grid centered at the origin (CSV)");
    add_common(husimi, husimi_opts);
    husimi->add_option("--extent", extent, "half-width of the grid")->check(CLI::PositiveNumber);
    husimi->add_option("--count", count, "points per axis")->check(CLI::Range(2, 2001));

    Common toro_opts;
    auto* toro = app.add_subcommand("torotropy", "per-angle torotropy detail (CSV)");
    add_common(toro, toro_opts);

    std::string suite;
    std::string validate_out;
    auto* validate = app.add_subcommand("validate", "run a validation suite (JSON report)");
    validate->add_option("suite", suite, "oracle | conservation | markov | truncation")
        ->required()
        ->check(CLI::IsMember(qdso::validation_suites()));
    validate->add_option("--out", validate_out, "report path (stdout when omitted)");

    Common markov_opts;
    double t_max = 2.0;
    int t_points = 401;
    auto* markov = app.add_subcommand("markov-check", "bath-correlation traces for both leads (CSV)");
    add_common(markov, markov_opts);
    markov->add_option("--t-max", t_max, "end of the time window in ns")->check(CLI::PositiveNumber);
    markov->add_option("--points", t_points, "samples in the window")->check(CLI::Range(2, 100000));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Ok : Usage;
    }

    try {
        if (*point) {
            const auto tree = load_tree(point_opts);
            const auto cfg = qdso::model_from_tree(tree);
            warn_regime(cfg);
            const auto popts = qdso::point_options_from_tree(tree);
            const auto row = qdso::run_point(cfg, popts);
            if (!dump_path.empty()) {
                auto c = cfg;
                c.system.n_cut = row.n_cut;
                const auto s = qdso::solve_point(c, qdso::DegeneracyPolicy::GroundSector);
                qdso::write_ness(dump_path, s.steady.ness, qdso::config_hash(c));
            }
            emit(point_opts.out, [&](std::ostream& os) { os << row_json(cfg, row).dump(2) << "\n"; });
            return row.status.rfind("error", 0) == 0 ? ValidationFailure : Ok;
        }
        if (*sweep) {
            const auto tree = load_tree(sweep_opts);
            auto spec = qdso::sweep_from_tree(tree);
            if (workers > 0)
                spec.workers = workers;
            warn_regime(spec.base);
            const auto summary = qdso::run_sweep(spec, sweep_opts.out, resume, &std::cerr);
            return summary.failures > 0 ? PartialFailure : Ok;
        }
        if (*husimi || *toro) {
            const Common& opts = *husimi ? husimi_opts : toro_opts;
            const auto tree = load_tree(opts);
            const auto cfg = qdso::model_from_tree(tree);
            warn_regime(cfg);
            const auto s = qdso::solve_point(cfg);
            const auto state = qdso::reduce_qmr(s.lab);
            if (*husimi) {
                qdso::GridSpec g{-extent, extent, -extent, extent, count, count};
                emit(opts.out, [&](std::ostream& os) { qdso::write_husimi_csv(os, state, g, "config " + std::to_string(qdso::config_hash(cfg))); });
            } else {
                const auto t = qdso::torotropy(s.lab, cfg.system.lambda, qdso::torotropy_from_tree(tree));
                emit(opts.out, [&](std::ostream& os) { qdso::write_torotropy_csv(os, t); });
            }
            return Ok;
        }
        if (*validate) {
            const auto rep = qdso::run_validation(suite);
            emit(validate_out, [&](std::ostream& os) { os << report_json(rep).dump(2) << "\n"; });
            return rep.passed() ? Ok : ValidationFailure;
        }
        if (*markov) {
            const auto tree = load_tree(markov_opts);
            const auto cfg = markov_opts.config.empty() && markov_opts.sets.empty() ? qdso::markov_reference()
                                                                                    : qdso::model_from_tree(tree);
            const auto check = qdso::markov_check(cfg, qdso::uniform_grid(0.0, t_max, t_points));
            emit(markov_opts.out, [&](std::ostream& os) {
                os << "lead,s,re_c00,im_c00,re_c11,im_c11\n";
                char buf[200];
                for (const auto& tr : check.traces)
                    for (std::size_t i = 0; i < tr.times.size(); ++i) {
                        std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g\n", qdso::to_string(tr.lead),
                                      tr.times[i], tr.c00[i].real(), tr.c00[i].imag(), tr.c11[i].real(),
                                      tr.c11[i].imag());
                        os << buf;
                    }
            });
            for (const auto& tr : check.traces) {
                if (tr.decay_time_estimate)
                    std::cerr << "lead " << qdso::to_string(tr.lead) << ": decays below 1% after s = "
                              << *tr.decay_time_estimate << " ns\n";
                else
                    std::cerr << "lead " << qdso::to_string(tr.lead) << ": no decay within the window\n";
            }
            return check.passed ? Ok : ValidationFailure;
        }
    } catch (const qdso::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return Usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return ValidationFailure;
    }
    return Ok;
}
