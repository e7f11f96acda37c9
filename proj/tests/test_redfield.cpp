#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "qdso/redfield.hpp"

using namespace qdso;

namespace {

ModelConfig small_config(double lambda, int n, double delta_mu = -50.0, double mu_tilde = 0.0) {
    auto c = with_bias(presets::isothermal(), delta_mu, mu_tilde);
    c.system.lambda = lambda;
    c.system.n_cut = n;
    return c;
}

Liouvillian build(const ModelConfig& c) {
    const auto d = displacement_matrix(c.system.lambda, c.system.n_cut);
    return assemble_liouvillian(build_tensors(c, c.lead_L, d), build_tensors(c, c.lead_R, d), c);
}

cplx block_trace_rate(const Liouvillian& L, const Eigen::MatrixXcd& r0, const Eigen::MatrixXcd& r1) {
    Eigen::MatrixXcd d0, d1;
    L.apply(r0, r1, d0, d1);
    return d0.trace() + d1.trace();
}

} // namespace

TEST(Tensors, MatchBruteForceWithExponentialD) {
    const auto c = small_config(0.7, 6);
    const Eigen::MatrixXd dref = oracle::displacement_expm(0.7, 6);
    for (const auto* lead : {&c.lead_L, &c.lead_R}) {
        const auto t = build_tensors(c, *lead, displacement_matrix(0.7, 6));
        oracle::BruteTensors b{c, *lead, dref};
        double worst = 0.0;
        for (int j = 0; j < 6; ++j)
            for (int m = 0; m < 6; ++m)
                for (int k = 0; k < 6; ++k)
                    for (int l = 0; l < 6; ++l) {
                        worst = std::max(worst, std::abs(t.r00(j, m, k, l) - b.r00(j, m, k, l)));
                        worst = std::max(worst, std::abs(t.r01(j, m, k, l) - b.r01(j, m, k, l)));
                        worst = std::max(worst, std::abs(t.r11(j, m, k, l) - b.r11(j, m, k, l)));
                        worst = std::max(worst, std::abs(t.r10(j, m, k, l) - b.r10(j, m, k, l)));
                    }
        EXPECT_LT(worst, 1e-10);
    }
}

TEST(Tensors, DecoupledLimit) {
    const auto c = small_config(0.0, 5, -20.0, 3.0);
    const auto t = build_tensors(c, c.lead_R, displacement_matrix(0.0, 5));
    const double out = transition_rate(3.0, c.lead_R, Direction::Out);
    for (int j = 0; j < 5; ++j)
        for (int m = 0; m < 5; ++m)
            for (int k = 0; k < 5; ++k)
                for (int l = 0; l < 5; ++l) {
                    const double expect = (j == k && m == l) ? out : 0.0;
                    EXPECT_NEAR(t.r11(j, m, k, l), expect, 1e-15);
                    EXPECT_NEAR(t.r10(j, m, k, l), expect, 1e-15);
                }
}

TEST(Tensors, SwapSymmetryAndMaterialize) {
    const auto c = small_config(0.7, 5);
    const auto t = build_tensors(c, c.lead_L, displacement_matrix(0.7, 5));
    for (int j = 0; j < 5; ++j)
        for (int m = 0; m < 5; ++m)
            for (int k = 0; k < 5; ++k)
                for (int l = 0; l < 5; ++l)
                    EXPECT_DOUBLE_EQ(t.r01(j, m, k, l), t.r01(m, j, l, k));
    const auto full = t.materialize(TensorKind::R10);
    ASSERT_EQ(full.size(), 625u);
    EXPECT_DOUBLE_EQ(full[((1 * 5 + 2) * 5 + 3) * 5 + 4], t.r10(1, 2, 3, 4));
    for (double x : full)
        EXPECT_TRUE(std::isfinite(x));
}

TEST(Tensors, DimensionMismatch) {
    const auto c = small_config(0.7, 6);
    EXPECT_THROW(build_tensors(c, c.lead_L, displacement_matrix(0.7, 5)), DimensionMismatch);
    EXPECT_THROW(build_tensors(c, c.lead_L, displacement_matrix(0.5, 6)), DimensionMismatch);
}

TEST(Liouvillian, DenseMatchesApply) {
    const auto c = small_config(0.7, 7);
    const auto L = build(c);
    const Eigen::MatrixXcd M = L.dense();
    std::mt19937 rng(7);
    for (int rep = 0; rep < 5; ++rep) {
        const auto r0 = oracle::random_hermitian(7, rng), r1 = oracle::random_hermitian(7, rng);
        const Eigen::VectorXcd v = L.pack(r0, r1);
        EXPECT_LT((M * v - L.apply(v)).cwiseAbs().maxCoeff(), 1e-12 * M.cwiseAbs().maxCoeff() * v.size());
    }
    EXPECT_EQ(L.entry(3, 5), M(3, 5));
}

TEST(Liouvillian, TraceAndHermiticityPreserved) {
    const auto c = small_config(0.7, 10);
    const auto L = build(c);
    std::mt19937 rng(11);
    double worst_tr = 0.0, worst_herm = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const auto r0 = oracle::random_hermitian(10, rng), r1 = oracle::random_hermitian(10, rng);
        worst_tr = std::max(worst_tr, std::abs(block_trace_rate(L, r0, r1)));
        Eigen::MatrixXcd d0, d1;
        L.apply(r0, r1, d0, d1);
        worst_herm = std::max({worst_herm, (d0 - d0.adjoint()).cwiseAbs().maxCoeff(),
                               (d1 - d1.adjoint()).cwiseAbs().maxCoeff()});
    }
    EXPECT_LT(worst_tr, 1e-10);
    EXPECT_LT(worst_herm, 1e-12);
}

TEST(Liouvillian, DecoupledPopulationsFollowRateEquation) {
    const auto c = small_config(0.0, 6, -30.0, 4.0);
    const auto L = build(c);
    Eigen::MatrixXcd r0 = Eigen::MatrixXcd::Zero(6, 6), r1 = Eigen::MatrixXcd::Zero(6, 6);
    for (int j = 0; j < 6; ++j) {
        r0(j, j) = 0.1 * (j + 1);
        r1(j, j) = 0.05 * (6 - j);
    }
    Eigen::MatrixXcd d0, d1;
    L.apply(r0, r1, d0, d1);
    double in = 0.0, out = 0.0;
    for (const auto* lead : {&c.lead_L, &c.lead_R}) {
        in += transition_rate(4.0, *lead, Direction::In);
        out += transition_rate(4.0, *lead, Direction::Out);
    }
    for (int j = 0; j < 6; ++j)
        EXPECT_NEAR(d1(j, j).real(), in * r0(j, j).real() - out * r1(j, j).real(), 1e-14);
}

TEST(SteadyState, DecoupledEquilibriumOccupation) {
    const auto c = small_config(0.0, 8, 0.0, 5.0);
    const auto L = build(c);
    EXPECT_THROW(steady_state(L), DegenerateNessError);
    SteadyStateOptions o;
    o.degeneracy = DegeneracyPolicy::GroundSector;
    const auto rep = steady_state(L, o);
    EXPECT_TRUE(rep.degenerate);
    EXPECT_EQ(rep.trace_components, 8);
    EXPECT_NEAR(rep.ness.occupation(), fermi(5.0, c.lead_L), 1e-12);
}

TEST(SteadyState, BlockadeEmptiesDot) {
    // far above both Fermi levels only the thermal tail e^{-μ̃/T} is left
    for (double mt : {80.0, 250.0}) {
        const auto c = small_config(0.7, 14, 0.0, mt);
        const auto rep = steady_state(build(c));
        EXPECT_LT(rep.ness.occupation(), 2.0 * std::exp(-mt / c.lead_L.temperature)) << mt;
    }
}

TEST(SteadyState, Contract) {
    const auto c = small_config(0.7, 16);
    const auto L = build(c);
    const auto rep = steady_state(L);
    EXPECT_LE(rep.residual, 1e-8 * rep.norm);
    EXPECT_NEAR(rep.ness.trace(), 1.0, 1e-10);
    EXPECT_LT((rep.ness.rho0 - rep.ness.rho0.adjoint()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((rep.ness.rho1 - rep.ness.rho1.adjoint()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_GE(rep.min_eigenvalue, -1e-8);
    EXPECT_FALSE(rep.degenerate);
    EXPECT_EQ(rep.ness.frame, Frame::Polaron);
}

TEST(SteadyState, PivotChoiceDoesNotMatter) {
    const auto c = small_config(0.7, 14, -40.0, 5.0);
    const auto L = build(c);
    const auto a = steady_state(L);
    SteadyStateOptions o;
    o.pivot_population = (a.pivot_population + 5) % (2 * 14);
    const auto b = steady_state(L, o);
    EXPECT_NE(a.pivot_population, b.pivot_population);
    EXPECT_LT((a.ness.rho0 - b.ness.rho0).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((a.ness.rho1 - b.ness.rho1).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SteadyState, IterativeMatchesDense) {
    const auto c = small_config(0.7, 18);
    const auto L = build(c);
    SteadyStateOptions o;
    o.solver = SolverKind::Iterative;
    const auto a = steady_state(L);
    const auto b = steady_state(L, o);
    EXPECT_EQ(b.solver, SolverKind::Iterative);
    EXPECT_GT(b.iterations, 0);
    EXPECT_LT((a.ness.rho0 - b.ness.rho0).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((a.ness.rho1 - b.ness.rho1).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SteadyState, IterativeHandlesDegenerateSector) {
    const auto c = small_config(0.0, 6, 0.0, 5.0);
    SteadyStateOptions o;
    o.solver = SolverKind::Iterative;
    o.degeneracy = DegeneracyPolicy::GroundSector;
    const auto rep = steady_state(build(c), o);
    EXPECT_NEAR(rep.ness.occupation(), fermi(5.0, c.lead_L), 1e-10);
}

TEST(LabFrame, IdentityAtZeroCoupling) {
    const auto c = small_config(0.0, 6, -10.0, 2.0);
    SteadyStateOptions o;
    o.degeneracy = DegeneracyPolicy::GroundSector;
    const auto rho = steady_state(build(c), o).ness;
    const auto lab = to_lab_frame(rho, 0.0);
    EXPECT_EQ(lab.frame, Frame::Lab);
    EXPECT_LT((lab.rho1 - rho.rho1).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((lab.rho0 - rho.rho0).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_THROW(to_lab_frame(lab, 0.0), FrameMismatch);
}

TEST(LabFrame, TraceAndDisplacedMean) {
    const auto c = small_config(0.7, 20);
    const auto rho = steady_state(build(c)).ness;
    const auto lab = to_lab_frame(rho, 0.7);
    EXPECT_GT(lab.dim(), rho.dim());
    EXPECT_NEAR(lab.rho1.trace().real(), rho.rho1.trace().real(), 1e-12);
    EXPECT_LT((lab.rho1 - lab.rho1.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    auto mean_b = [](const Eigen::MatrixXcd& r) {
        cplx s{0.0, 0.0};
        for (int k = 1; k < r.rows(); ++k)
            s += std::sqrt(static_cast<double>(k)) * r(k - 1, k);
        return s;
    };
    const cplx pol = mean_b(rho.rho0) + mean_b(rho.rho1);
    const cplx labb = mean_b(lab.rho0) + mean_b(lab.rho1);
    EXPECT_NEAR(std::abs(labb - (pol - 0.7 * rho.occupation())), 0.0, 1e-10);
    // truncated transform is the plain DᵀρD
    const auto same = to_lab_frame(rho, displacement_matrix(0.7, 20));
    EXPECT_EQ(same.dim(), 20);
}

TEST(NessDump, RoundTrip) {
    const auto c = small_config(0.7, 6);
    const auto rho = steady_state(build(c)).ness;
    const auto path = (std::filesystem::temp_directory_path() / "qdso_ness_roundtrip.bin").string();
    write_ness(path, rho, config_hash(c));
    EXPECT_EQ(std::filesystem::file_size(path), 32u + 2u * 36u * 16u);
    const auto f = read_ness(path);
    EXPECT_EQ(f.config_hash, config_hash(c));
    EXPECT_EQ(f.rho.frame, Frame::Polaron);
    EXPECT_EQ(f.rho.rho0, rho.rho0);
    EXPECT_EQ(f.rho.rho1, rho.rho1);
    std::filesystem::remove(path);
}
