#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qdso/config.hpp"
#include "qdso/model.hpp"

using namespace qdso;

TEST(Model, PresetHasNoRegimeWarnings) {
    EXPECT_TRUE(validate_regime(presets::isothermal()).empty());
    EXPECT_TRUE(validate_regime(presets::thermal_bias()).empty());
}

TEST(Model, RateEqualToTemperatureWarns) {
    auto c = presets::isothermal();
    c.lead_L.gamma_rate = c.lead_L.temperature;
    const auto d = validate_regime(c);
    ASSERT_FALSE(d.empty());
    bool found = false;
    for (const auto& x : d)
        found |= x.condition == RegimeCondition::RateBelowTemperature && x.lead == LeadLabel::L;
    EXPECT_TRUE(found);
}

TEST(Model, BroadeningEqualToRateWarns) {
    auto c = presets::isothermal();
    c.lead_R.delta = c.lead_R.gamma_rate;
    bool found = false;
    for (const auto& x : validate_regime(c))
        found |= x.condition == RegimeCondition::BroadeningAboveRate && x.lead == LeadLabel::R;
    EXPECT_TRUE(found);
}

TEST(Model, MarginIsConfigurable) {
    // with a factor-10 margin the Γ/ω = 0.2 preset is flagged
    EXPECT_FALSE(validate_regime(presets::isothermal(), RegimeMargins{10.0}).empty());
}

TEST(Model, SymmetricBiasSplit) {
    const auto base = presets::isothermal();
    auto c = with_bias(base, -50.0, 3.0);
    EXPECT_DOUBLE_EQ(c.lead_L.chem_potential, -25.0);
    EXPECT_DOUBLE_EQ(c.lead_R.chem_potential, 25.0);
    EXPECT_DOUBLE_EQ(c.system.mu_tilde, 3.0);
    EXPECT_DOUBLE_EQ(c.delta_mu(), -50.0);
    c = with_bias(base, 0.0, 0.0);
    EXPECT_EQ(c.lead_L.chem_potential, 0.0);
    EXPECT_EQ(c.lead_R.chem_potential, 0.0);
    c = with_bias(base, 100.0, 0.0);
    EXPECT_DOUBLE_EQ(c.lead_L.chem_potential, 50.0);
    EXPECT_DOUBLE_EQ(c.lead_R.chem_potential, -50.0);
}

TEST(Model, BareDotEnergy) {
    auto c = presets::isothermal();
    for (double mt : {-40.0, 0.0, 17.5}) {
        c.system.mu_tilde = mt;
        EXPECT_DOUBLE_EQ(c.system.mu() - c.system.mu_tilde, c.system.omega * c.system.lambda * c.system.lambda);
    }
}

TEST(Model, TemperatureAnchors) {
    EXPECT_NEAR(units::millikelvin_to_ghz(100.0), 13.09, 13.09 * 1e-3);
    EXPECT_NEAR(units::millikelvin_to_ghz(60.0), 7.86, 7.86 * 1e-3);
    EXPECT_NEAR(units::ghz_to_millikelvin(units::millikelvin_to_ghz(42.0)), 42.0, 1e-12);
}

TEST(Model, ValidateRejectsBadValues) {
    auto c = presets::isothermal();
    c.lead_L.temperature = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = presets::isothermal();
    c.system.n_cut = 1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = presets::isothermal();
    c.lead_R.label = LeadLabel::L;
    EXPECT_THROW(c.validate(), ConfigError);
    c = presets::isothermal();
    c.system.lambda = -0.1;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Model, ConfigHashDistinguishesParameters) {
    auto a = presets::isothermal();
    auto b = a;
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.system.mu_tilde = 1e-12;
    EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, QuantityParsing) {
    EXPECT_DOUBLE_EQ(parse_quantity("2.5"), 2.5);
    EXPECT_DOUBLE_EQ(parse_quantity(" 2pi*0.2 "), 2.0 * std::numbers::pi * 0.2);
    EXPECT_NEAR(parse_quantity("100mK"), 13.09, 0.01);
    EXPECT_NEAR(parse_quantity("60 mK"), 7.86, 0.01);
    EXPECT_THROW(parse_quantity("abc"), ConfigError);
    EXPECT_THROW(parse_quantity("1.0x"), ConfigError);
}

TEST(Config, TreeWithOverrides) {
    pt::ptree tree;
    apply_override(tree, "system.lambda=1.0");
    apply_override(tree, "lead_R.temperature=60mK");
    apply_override(tree, "bias.delta_mu=-40");
    const auto c = model_from_tree(tree);
    EXPECT_DOUBLE_EQ(c.system.lambda, 1.0);
    EXPECT_NEAR(c.lead_R.temperature, 7.86, 0.01);
    EXPECT_DOUBLE_EQ(c.lead_L.chem_potential, -20.0);
    EXPECT_DOUBLE_EQ(c.lead_R.chem_potential, 20.0);
    EXPECT_THROW(apply_override(tree, "lambda=1"), ConfigError);
    EXPECT_THROW(apply_override(tree, "system.lambda"), ConfigError);
}
