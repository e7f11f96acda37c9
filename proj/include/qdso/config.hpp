// config.hpp: INI configuration files and key=value overrides

#pragma once

#include <cctype>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "qdso/error.hpp"
#include "qdso/model.hpp"

namespace qdso {

namespace pt = boost::property_tree;

// Accepts plain numbers, "2pi*x" (per-cycle value), and temperatures with an "mK" suffix.
inline double parse_quantity(const std::string& raw) {
    std::string s;
    for (char c : raw)
        if (!std::isspace(static_cast<unsigned char>(c)))
            s += c;
    if (s.empty())
        throw ConfigError("empty value");
    auto number = [&](const std::string& t) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(t, &used);
        } catch (const std::exception&) {
            throw ConfigError("not a number: '" + raw + "'");
        }
        if (used != t.size())
            throw ConfigError("not a number: '" + raw + "'");
        return v;
    };
    if (s.size() > 2 && (s.ends_with("mK") || s.ends_with("mk")))
        return units::millikelvin_to_ghz(number(s.substr(0, s.size() - 2)));
    const bool negative = s.rfind("-2pi*", 0) == 0;
    if (negative || s.rfind("2pi*", 0) == 0)
        return (negative ? -1.0 : 1.0) * units::per_cycle(number(s.substr(negative ? 5 : 4)));
    return number(s);
}

inline pt::ptree read_ini(const std::string& path) {
    pt::ptree tree;
    try {
        pt::read_ini(path, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("cannot read config: ") + e.what());
    }
    return tree;
}

// "section.key=value"
inline void apply_override(pt::ptree& tree, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override must look like section.key=value: '" + assignment + "'");
    std::string key = assignment.substr(0, eq);
    std::string value = assignment.substr(eq + 1);
    if (key.find('.') == std::string::npos)
        throw ConfigError("override key needs a section: '" + key + "'");
    tree.put(key, value);
}

namespace detail {

inline void read_number(const pt::ptree& tree, const std::string& key, double& out) {
    if (auto v = tree.get_optional<std::string>(key))
        out = parse_quantity(*v);
}

inline void read_lead(const pt::ptree& tree, const std::string& section, LeadParams& lead) {
    read_number(tree, section + ".gamma_rate", lead.gamma_rate);
    read_number(tree, section + ".delta", lead.delta);
    read_number(tree, section + ".gamma_center", lead.gamma_center);
    read_number(tree, section + ".temperature", lead.temperature);
    read_number(tree, section + ".chem_potential", lead.chem_potential);
}

} // namespace detail

// Unspecified keys keep the isothermal preset values. [bias] delta_mu applies the symmetric split.
inline ModelConfig model_from_tree(const pt::ptree& tree) {
    ModelConfig c = presets::isothermal();
    detail::read_number(tree, "system.omega", c.system.omega);
    detail::read_number(tree, "system.lambda", c.system.lambda);
    detail::read_number(tree, "system.mu_tilde", c.system.mu_tilde);
    if (auto v = tree.get_optional<std::string>("system.n_cut")) {
        const double n = parse_quantity(*v);
        if (n != std::floor(n))
            throw ConfigError("system.n_cut must be an integer");
        c.system.n_cut = static_cast<int>(n);
    }
    detail::read_lead(tree, "lead_L", c.lead_L);
    detail::read_lead(tree, "lead_R", c.lead_R);
    if (auto v = tree.get_optional<std::string>("bias.delta_mu"))
        c = with_bias(c, parse_quantity(*v), c.system.mu_tilde);
    c.validate();
    return c;
}

// Canonical echo used in dataset headers.
inline std::string describe(const ModelConfig& c) {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf, "system: omega=%.17g lambda=%.17g mu_tilde=%.17g n_cut=%d\n", c.system.omega,
                  c.system.lambda, c.system.mu_tilde, c.system.n_cut);
    os << buf;
    for (const auto* l : {&c.lead_L, &c.lead_R}) {
        std::snprintf(buf, sizeof buf,
                      "lead_%s: gamma_rate=%.17g delta=%.17g gamma_center=%.17g temperature=%.17g "
                      "chem_potential=%.17g\n",
                      to_string(l->label), l->gamma_rate, l->delta, l->gamma_center, l->temperature,
                      l->chem_potential);
        os << buf;
    }
    return os.str();
}

} // namespace qdso
