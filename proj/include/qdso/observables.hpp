// observables.hpp: Currents, heat currents, power, operation modes and performance metrics

#pragma once

#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "qdso/error.hpp"
#include "qdso/model.hpp"
#include "qdso/redfield.hpp"

namespace qdso {

namespace detail {

// Per-lead gain/loss terms of the master equation acting on the NESS blocks.
struct LeadFlows {
    Eigen::MatrixXcd gain01; // into ρ¹ from ρ⁰ (electron enters from the lead)
    Eigen::MatrixXcd loss00;
    Eigen::MatrixXcd loss11;
    Eigen::MatrixXcd gain10; // into ρ⁰ from ρ¹ (electron leaves into the lead)
};

inline LeadFlows lead_flows(const BlockDensityMatrix& rho, const RedfieldTensors& t) {
    if (rho.dim() != t.n_cut)
        throw DimensionMismatch("observables: state and tensors have different n_cut");
    const Eigen::MatrixXcd A = t.A.cast<cplx>(), C = t.C.cast<cplx>(), G = t.G.cast<cplx>(), H = t.H.cast<cplx>(),
                           D = t.D.cast<cplx>();
    const auto& r0 = rho.rho0;
    const auto& r1 = rho.rho1;
    LeadFlows f;
    f.gain01 = 0.5 * (G * r0 * D.transpose() + D * r0 * G.transpose());
    f.loss00 = 0.5 * (A * r0 + r0 * A.transpose());
    f.loss11 = 0.5 * (C * r1 + r1 * C.transpose());
    f.gain10 = 0.5 * (H * r1 * D + D.transpose() * r1 * H.transpose());
    return f;
}

inline void require_polaron(const BlockDensityMatrix& rho, const char* who) {
    if (rho.frame != Frame::Polaron)
        throw FrameMismatch(std::string(who) + ": expects the polaron-frame NESS");
}

} // namespace detail

// I_ν = Re Σ_{j,k,l} (R¹⁰[j][j][k][l] ρ¹_kl − R⁰¹[j][j][k][l] ρ⁰_kl), positive toward lead ν.
inline double particle_current(const BlockDensityMatrix& rho, const RedfieldTensors& t) {
    detail::require_polaron(rho, "particle_current");
    const auto f = detail::lead_flows(rho, t);
    return (f.gain10.trace() - f.gain01.trace()).real();
}

// (μ − μ_ν)·I_ν with μ the bare dot energy.
inline double electrical_heat(double current, const ModelConfig& config, LeadLabel lead) {
    return (config.system.mu() - config.lead(lead).chem_potential) * current;
}

/// Q⁰¹ = R⁰¹ − R⁰⁰ and Q¹⁰ = R¹¹ − R¹⁰ of one lead.
struct MechanicalTensors {
    LeadLabel lead{LeadLabel::L};
    RedfieldTensors source;

    double q01(int j, int m, int k, int l) const { return source.r01(j, m, k, l) - source.r00(j, m, k, l); }
    double q10(int j, int m, int k, int l) const { return source.r11(j, m, k, l) - source.r10(j, m, k, l); }
};

inline MechanicalTensors mechanical_tensors(const RedfieldTensors& t) { return {t.lead, t}; }

// J̃ᵐᵉᶜ_ν = −[ Σ_{j,k,l} ω j (Q⁰¹[j][j][k][l] ρ⁰_kl − Q¹⁰[j][j][k][l] ρ¹_kl) + ωλ² I_ν ]
inline double mechanical_heat(const BlockDensityMatrix& rho, const MechanicalTensors& mech, double current,
                              const ModelConfig& config) {
    detail::require_polaron(rho, "mechanical_heat");
    const double w = config.system.omega;
    const double lam = config.system.lambda;
    const auto f = detail::lead_flows(rho, mech.source);
    const Eigen::MatrixXcd q0 = f.gain01 - f.loss00;
    const Eigen::MatrixXcd q1 = f.loss11 - f.gain10;
    double s = 0.0;
    for (int j = 1; j < rho.dim(); ++j)
        s += j * (q0(j, j) - q1(j, j)).real();
    return -(w * s + w * lam * lam * current);
}

// P̃ = −Δμ·I_R under the symmetric bias split.
inline double total_power(double current_R, double delta_mu) { return -delta_mu * current_R; }

// Same power from the lead potentials, Σ_ν μ_ν I_ν.
inline double power_from_potentials(const ModelConfig& config, double current_L, double current_R) {
    return config.lead_L.chem_potential * current_L + config.lead_R.chem_potential * current_R;
}

// ⟨N_ph⟩ = Σ_n Σ_j j ρⁿ_lab[j][j]
inline double phonon_number(const BlockDensityMatrix& lab) {
    if (lab.frame != Frame::Lab)
        throw FrameMismatch("phonon_number: expects the lab-frame state");
    double s = 0.0;
    for (int j = 1; j < lab.dim(); ++j)
        s += j * (lab.rho0(j, j) + lab.rho1(j, j)).real();
    return s;
}

// Diagnostic only: the same diagonal sum over the polaron-frame blocks.
inline double polaron_phonon_number(const BlockDensityMatrix& rho) {
    detail::require_polaron(rho, "polaron_phonon_number");
    double s = 0.0;
    for (int j = 1; j < rho.dim(); ++j)
        s += j * (rho.rho0(j, j) + rho.rho1(j, j)).real();
    return s;
}

inline double zeta(double current_R, double phonons, double omega) { return std::abs(current_R) * phonons / omega; }

enum class Mode { Engine, Refrigerator, Heater, Accelerator, Blockade, Unclassified };

inline const char* to_string(Mode m) {
    switch (m) {
    case Mode::Engine: return "engine";
    case Mode::Refrigerator: return "refrigerator";
    case Mode::Heater: return "heater";
    case Mode::Accelerator: return "accelerator";
    case Mode::Blockade: return "blockade";
    case Mode::Unclassified: return "unclassified";
    }
    return "unclassified";
}

// Sign table with L the hot lead; magnitudes below tol count as zero.
inline Mode classify_mode(double j_left, double j_right, double power, double tol) {
    auto sgn = [tol](double x) { return std::abs(x) < tol ? 0 : (x > 0 ? 1 : -1); };
    const int l = sgn(j_left), r = sgn(j_right), p = sgn(power);
    if (l == 0 && r == 0 && p == 0)
        return Mode::Blockade;
    if (l > 0 && r > 0)
        return Mode::Heater;
    if (l < 0 && r > 0 && p > 0)
        return Mode::Engine;
    if (l < 0 && r > 0 && p < 0)
        return Mode::Accelerator;
    if (r < 0 && l > 0 && p < 0)
        return Mode::Refrigerator;
    return Mode::Unclassified;
}

inline double default_mode_tolerance(const ModelConfig& config) {
    return 1e-6 * config.system.omega * std::max(config.lead_L.gamma_rate, config.lead_R.gamma_rate);
}

// ω·T_Q / |I_R|
inline double eta_converter(double torotropy, double current_R, double omega) {
    if (current_R == 0.0)
        throw UndefinedResultError("eta_converter: I_R = 0");
    return omega * torotropy / std::abs(current_R);
}

// |J_L|(1 − T_ref/T_L) / (|J_R|(1 − T_ref/T_R) + |P|), with T_R ≤ T_ref ≤ T_L.
inline double eta_heater(double j_left, double j_right, double power, double t_left, double t_right, double t_ref) {
    const double lo = std::min(t_left, t_right), hi = std::max(t_left, t_right);
    if (t_ref < lo || t_ref > hi)
        throw UndefinedResultError("eta_heater: T_ref outside [T_R, T_L]");
    const double den = std::abs(j_right) * (1.0 - t_ref / t_right) + std::abs(power);
    if (den == 0.0)
        throw UndefinedResultError("eta_heater: zero denominator");
    return std::abs(j_left) * (1.0 - t_ref / t_left) / den;
}

struct ThermoReport {
    double occupation{0.0};
    double phonon_number{0.0};
    double current_L{0.0}, current_R{0.0};
    double heat_el_L{0.0}, heat_el_R{0.0};
    double heat_mec_L{0.0}, heat_mec_R{0.0};
    double power{0.0};
    double zeta{0.0};
    Mode mode{Mode::Unclassified};
    std::optional<double> eta_converter; // needs T_Q; filled in by the caller
    std::optional<double> eta_heater;
    double first_law_residual{0.0};
    double first_law_scale{0.0}; // Σ_ν(|J̃ᵉˡ_ν| + |J̃ᵐᵉᶜ_ν|) + |P̃|

    double heat_L() const { return heat_el_L + heat_mec_L; }
    double heat_R() const { return heat_el_R + heat_mec_R; }
};

// Everything except quantities that need the phase-space layer. η_heater uses T_ref = T_R.
inline ThermoReport thermo_report(const ModelConfig& config, const BlockDensityMatrix& rho,
                                  const BlockDensityMatrix& lab, const RedfieldTensors& left,
                                  const RedfieldTensors& right) {
    ThermoReport r;
    r.occupation = rho.occupation();
    r.phonon_number = phonon_number(lab);
    r.current_L = particle_current(rho, left);
    r.current_R = particle_current(rho, right);
    r.heat_el_L = electrical_heat(r.current_L, config, LeadLabel::L);
    r.heat_el_R = electrical_heat(r.current_R, config, LeadLabel::R);
    r.heat_mec_L = mechanical_heat(rho, mechanical_tensors(left), r.current_L, config);
    r.heat_mec_R = mechanical_heat(rho, mechanical_tensors(right), r.current_R, config);
    r.power = total_power(r.current_R, config.delta_mu());
    r.zeta = zeta(r.current_R, r.phonon_number, config.system.omega);
    r.mode = classify_mode(r.heat_L(), r.heat_R(), r.power, default_mode_tolerance(config));
    r.first_law_residual = r.heat_L() + r.heat_R() + r.power;
    r.first_law_scale = std::abs(r.heat_el_L) + std::abs(r.heat_el_R) + std::abs(r.heat_mec_L) +
                        std::abs(r.heat_mec_R) + std::abs(r.power);
    try {
        r.eta_heater = eta_heater(r.heat_L(), r.heat_R(), r.power, config.lead_L.temperature,
                                  config.lead_R.temperature, config.lead_R.temperature);
    } catch (const UndefinedResultError&) {
        r.eta_heater.reset();
    }
    return r;
}

} // namespace qdso
