// model.hpp: Physical parameters of the dot + resonator + two-lead setup
//
// Unit convention: every energy, rate, frequency and temperature is an angular
// frequency in units of 1e9 rad/s (written "GHz"), with k_B = ħ = 1. Values that
// are usually quoted per cycle (Γ/(2π) = 0.2 GHz) are stored multiplied by 2π.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "qdso/error.hpp"

namespace qdso {

enum class LeadLabel { L, R };

inline const char* to_string(LeadLabel label) { return label == LeadLabel::L ? "L" : "R"; }

struct LeadParams {
    LeadLabel label{LeadLabel::L};
    double gamma_rate{0.0};     // Γ_ν, peak tunneling rate
    double delta{1.0};          // δ_ν, Lorentzian half-width
    double gamma_center{0.0};   // γ_ν, Lorentzian center
    double temperature{1.0};    // T_ν
    double chem_potential{0.0}; // μ_ν
};

struct SystemParams {
    double omega{1.0};     // resonator frequency
    double lambda{0.0};    // dimensionless dot-resonator coupling
    double mu_tilde{0.0};  // polaron-shifted dot energy μ̃
    int n_cut{30};         // Fock truncation

    // Bare dot energy μ = μ̃ + ωλ².
    double mu() const { return mu_tilde + omega * lambda * lambda; }
};

struct ModelConfig {
    SystemParams system;
    LeadParams lead_L{LeadLabel::L};
    LeadParams lead_R{LeadLabel::R};

    const LeadParams& lead(LeadLabel label) const { return label == LeadLabel::L ? lead_L : lead_R; }
    LeadParams& lead(LeadLabel label) { return label == LeadLabel::L ? lead_L : lead_R; }

    // Δμ = μ_L − μ_R
    double delta_mu() const { return lead_L.chem_potential - lead_R.chem_potential; }

    void validate() const {
        if (lead_L.label == lead_R.label)
            throw ConfigError("lead labels must be distinct");
        for (const auto* lead : {&lead_L, &lead_R}) {
            if (!(lead->gamma_rate > 0.0))
                throw ConfigError(std::string("lead ") + to_string(lead->label) + ": gamma_rate must be > 0");
            if (!(lead->delta > 0.0))
                throw ConfigError(std::string("lead ") + to_string(lead->label) + ": delta must be > 0");
            if (!(lead->temperature > 0.0))
                throw ConfigError(std::string("lead ") + to_string(lead->label) + ": temperature must be > 0");
        }
        if (!(system.omega > 0.0))
            throw ConfigError("omega must be > 0");
        if (system.n_cut < 2)
            throw ConfigError("n_cut must be >= 2");
        if (!(system.lambda >= 0.0))
            throw ConfigError("lambda must be >= 0");
    }
};

namespace units {

// k_B / ħ in rad s^-1 K^-1 (CODATA 2018, exact k_B).
inline constexpr double kB_over_hbar = 1.380649e-23 / 1.054571817e-34;

inline double millikelvin_to_ghz(double millikelvin) { return kB_over_hbar * millikelvin * 1e-3 * 1e-9; }
inline double ghz_to_millikelvin(double ghz) { return ghz * 1e9 / kB_over_hbar * 1e3; }

// x given per cycle (x/(2π) quoted) -> angular units
inline double per_cycle(double x) { return 2.0 * std::numbers::pi * x; }

} // namespace units

// Symmetric bias split μ_L = +Δμ/2, μ_R = −Δμ/2 and dot energy μ̃.
inline ModelConfig with_bias(const ModelConfig& base, double delta_mu, double mu_tilde) {
    ModelConfig out = base;
    out.lead_L.chem_potential = 0.5 * delta_mu;
    out.lead_R.chem_potential = -0.5 * delta_mu;
    out.system.mu_tilde = mu_tilde;
    return out;
}

enum class RegimeCondition {
    RateBelowTemperature, // Γ_ν ≪ T_ν
    RateBelowFrequency,   // Γ_ν ≪ ω
    BroadeningAboveRate,  // δ_ν ≫ Γ_ν
};

struct RegimeDiagnostic {
    LeadLabel lead;
    RegimeCondition condition;
    std::string message;
};

struct RegimeMargins {
    double factor{4.0}; // "≪" means at least this ratio
};

// Advisory check of the sequential-tunneling / energy-dependent-rate regime.
inline std::vector<RegimeDiagnostic> validate_regime(const ModelConfig& config, RegimeMargins margins = {}) {
    std::vector<RegimeDiagnostic> out;
    const double k = margins.factor;
    char buf[256];
    for (const auto* lead : {&config.lead_L, &config.lead_R}) {
        const double g = lead->gamma_rate;
        if (g * k > lead->temperature) {
            std::snprintf(buf, sizeof buf, "lead %s: Gamma=%.4g not << T=%.4g (margin %.3g)", to_string(lead->label), g,
                          lead->temperature, k);
            out.push_back({lead->label, RegimeCondition::RateBelowTemperature, buf});
        }
        if (g * k > config.system.omega) {
            std::snprintf(buf, sizeof buf, "lead %s: Gamma=%.4g not << omega=%.4g (margin %.3g)", to_string(lead->label),
                          g, config.system.omega, k);
            out.push_back({lead->label, RegimeCondition::RateBelowFrequency, buf});
        }
        if (lead->delta < k * g) {
            std::snprintf(buf, sizeof buf, "lead %s: delta=%.4g not >> Gamma=%.4g (margin %.3g)", to_string(lead->label),
                          lead->delta, g, k);
            out.push_back({lead->label, RegimeCondition::BroadeningAboveRate, buf});
        }
    }
    return out;
}

// FNV-1a over a canonical text rendering; stable across runs and platforms.
inline std::uint64_t config_hash(const ModelConfig& c) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%.17g|%.17g|%.17g|%d|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g",
                  c.system.omega, c.system.lambda, c.system.mu_tilde, c.system.n_cut, c.lead_L.gamma_rate,
                  c.lead_L.delta, c.lead_L.gamma_center, c.lead_L.temperature, c.lead_L.chem_potential,
                  c.lead_R.gamma_rate, c.lead_R.delta, c.lead_R.gamma_center, c.lead_R.temperature,
                  c.lead_R.chem_potential);
    std::uint64_t h = 1469598103934665603ULL;
    for (const char* p = buf; *p; ++p) {
        h ^= static_cast<unsigned char>(*p);
        h *= 1099511628211ULL;
    }
    return h;
}

namespace presets {

// Γ/(2π) = 0.2 GHz, ω/(2π) = 1 GHz, δ = 10 GHz, γ_L = −γ_R = −10 GHz, T_L = T_R = 13.09 GHz (100 mK), λ = 0.7.
inline ModelConfig isothermal() {
    ModelConfig c;
    c.system.omega = units::per_cycle(1.0);
    c.system.lambda = 0.7;
    c.system.mu_tilde = 0.0;
    c.system.n_cut = 30;
    for (auto label : {LeadLabel::L, LeadLabel::R}) {
        auto& lead = c.lead(label);
        lead.label = label;
        lead.gamma_rate = units::per_cycle(0.2);
        lead.delta = 10.0;
        lead.temperature = 13.09;
        lead.chem_potential = 0.0;
    }
    c.lead_L.gamma_center = -10.0;
    c.lead_R.gamma_center = 10.0;
    return c;
}

// Same as isothermal() but with the cold right lead, T_R = 7.86 GHz (60 mK).
inline ModelConfig thermal_bias() {
    ModelConfig c = isothermal();
    c.lead_R.temperature = 7.86;
    return c;
}

} // namespace presets

} // namespace qdso
