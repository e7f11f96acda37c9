// validation.hpp: Built-in validation suites (oracle, conservation, markov, truncation)

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "qdso/leads.hpp"
#include "qdso/model.hpp"
#include "qdso/observables.hpp"
#include "qdso/phasespace.hpp"
#include "qdso/sweep.hpp"

namespace qdso {

struct ValidationCheck {
    std::string name;
    double value{0.0};
    double threshold{0.0};
    bool passed{false};
};

struct ValidationReport {
    std::string suite;
    std::vector<ValidationCheck> checks;
    bool passed() const {
        for (const auto& c : checks)
            if (!c.passed)
                return false;
        return !checks.empty();
    }
};

// Classical two-state current into R at λ = 0: Υ_LΥ_R/(Υ_L+Υ_R)·(f_L − f_R) at μ̃.
inline double rate_equation_current(const ModelConfig& c) {
    const double e = c.system.mu_tilde;
    const double yl = tunneling_rate(e, c.lead_L), yr = tunneling_rate(e, c.lead_R);
    return yl * yr / (yl + yr) * (fermi(e, c.lead_L) - fermi(e, c.lead_R));
}

// Reference point for the Markov check: thermal bias with μ_R = −μ_L = 20.
inline ModelConfig markov_reference() { return with_bias(presets::thermal_bias(), -40.0, 0.0); }

inline ValidationReport validate_oracle() {
    ValidationReport rep{"oracle", {}};
    ModelConfig base = presets::isothermal();
    base.system.lambda = 0.0;
    double worst = 0.0;
    for (int i = 0; i < 21; ++i) {
        const auto c = with_bias(base, -50.0, -60.0 + 6.0 * i);
        const auto s = solve_point(c, DegeneracyPolicy::GroundSector);
        const double ir = particle_current(s.steady.ness, s.right);
        const double ref = rate_equation_current(c);
        worst = std::max(worst, std::abs(ir - ref) / std::abs(ref));
    }
    rep.checks.push_back({"lambda0_current_vs_rate_equation", worst, 1e-8, worst <= 1e-8});
    return rep;
}

inline ValidationReport validate_conservation() {
    ValidationReport rep{"conservation", {}};
    double worst_particle = 0.0, worst_first_law = 0.0, worst_power = 0.0, worst_mech0 = 0.0;
    bool first_law_ok = true;
    const ModelConfig base = presets::thermal_bias();
    const double gamma = base.lead_R.gamma_rate;
    for (double mt : {-30.0, 0.0, 30.0})
        for (double dmu : {-60.0, 0.0, 60.0}) {
            const auto c = with_bias(base, dmu, mt);
            const auto s = solve_point(c);
            const auto t = thermo_report(c, s.steady.ness, s.lab, s.left, s.right);
            worst_particle = std::max(worst_particle, std::abs(t.current_L + t.current_R) /
                                                          std::max(std::abs(t.current_R), 1e-6 * gamma));
            // relative gate with an absolute floor for blockaded points
            const double gate = 1e-8 * t.first_law_scale + 1e-12 * c.system.omega * gamma;
            first_law_ok = first_law_ok && std::abs(t.first_law_residual) <= gate;
            worst_first_law = std::max(worst_first_law, std::abs(t.first_law_residual) / std::max(t.first_law_scale, 1e-300));
            const double alt = power_from_potentials(c, t.current_L, t.current_R);
            worst_power = std::max(worst_power, std::abs(t.power - alt) / std::max(std::abs(t.power), 1e-300));
        }
    ModelConfig flat = base;
    flat.system.lambda = 0.0;
    for (double mt : {-20.0, 10.0}) {
        const auto c = with_bias(flat, -40.0, mt);
        const auto s = solve_point(c, DegeneracyPolicy::GroundSector);
        const auto t = thermo_report(c, s.steady.ness, s.lab, s.left, s.right);
        worst_mech0 = std::max({worst_mech0, std::abs(t.heat_mec_L), std::abs(t.heat_mec_R)});
    }
    const double mech_gate = 1e-12 * base.system.omega * gamma;
    rep.checks.push_back({"particle_conservation", worst_particle, 1e-8, worst_particle <= 1e-8});
    rep.checks.push_back({"first_law_closure", worst_first_law, 1e-8, first_law_ok});
    rep.checks.push_back({"power_identity", worst_power, 1e-10, worst_power <= 1e-10});
    rep.checks.push_back({"lambda0_mechanical_heat", worst_mech0, mech_gate, worst_mech0 <= mech_gate});
    return rep;
}

inline ValidationReport validate_markov(std::vector<CorrelationTrace>* traces = nullptr) {
    ValidationReport rep{"markov", {}};
    const auto check = markov_check(markov_reference(), uniform_grid(0.0, 2.0, 401));
    for (const auto& tr : check.traces) {
        const double t = tr.decay_time_estimate.value_or(std::numeric_limits<double>::infinity());
        rep.checks.push_back({std::string("lead_") + to_string(tr.lead) + "_decay_time", t, tr.times.back(),
                              tr.decay_time_estimate.has_value()});
    }
    if (traces)
        *traces = check.traces;
    return rep;
}

inline ValidationReport validate_truncation() {
    ValidationReport rep{"truncation", {}};
    const auto d = displacement_matrix(0.7, 30);
    const Eigen::MatrixXd dd = d.entries * d.entries.transpose();
    const double unitarity = (dd.topLeftCorner(15, 15) - Eigen::MatrixXd::Identity(15, 15)).cwiseAbs().maxCoeff();
    rep.checks.push_back({"displacement_unitarity_N30", unitarity, 1e-8, unitarity <= 1e-8});

    ModelConfig c = with_bias(presets::isothermal(), -50.0, 0.0);
    c.system.n_cut = 30;
    const auto a = run_point(c);
    c.system.n_cut = 40;
    const auto b = run_point(c);
    const double dtq = std::abs(a.torotropy - b.torotropy) / std::abs(b.torotropy);
    const double dir = std::abs(a.thermo.current_R - b.thermo.current_R) / std::abs(b.thermo.current_R);
    const double dnph = std::abs(a.thermo.phonon_number - b.thermo.phonon_number);
    rep.checks.push_back({"torotropy_N30_vs_N40", dtq, 1e-2, dtq < 1e-2});
    rep.checks.push_back({"current_N30_vs_N40", dir, 1e-6, dir < 1e-6});
    rep.checks.push_back({"phonon_number_N30_vs_N40", dnph, 1e-6, dnph < 1e-6});

    PointOptions adaptive;
    adaptive.policy = NCutPolicy::Adaptive;
    c.system.n_cut = 20;
    const auto ad = run_point(c, adaptive);
    rep.checks.push_back({"adaptive_n_cut_converged", static_cast<double>(ad.n_cut), 80.0, ad.warnings.empty()});

    ModelConfig flat = c;
    flat.system.lambda = 0.0;
    flat.system.n_cut = 10;
    const double p10 = run_point(flat).thermo.occupation;
    flat.system.n_cut = 30;
    const double p30 = run_point(flat).thermo.occupation;
    rep.checks.push_back({"lambda0_occupation_vs_n_cut", std::abs(p10 - p30), 1e-12, std::abs(p10 - p30) <= 1e-12});
    return rep;
}

inline const std::vector<std::string>& validation_suites() {
    static const std::vector<std::string> names{"oracle", "conservation", "markov", "truncation"};
    return names;
}

inline ValidationReport run_validation(const std::string& suite) {
    if (suite == "oracle")
        return validate_oracle();
    if (suite == "conservation")
        return validate_conservation();
    if (suite == "markov")
        return validate_markov();
    if (suite == "truncation")
        return validate_truncation();
    throw ConfigError("unknown validation suite '" + suite + "'");
}

} // namespace qdso
