// Independent reference implementations used only by the tests.

#pragma once

#include <cmath>
#include <complex>
#include <random>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "qdso/leads.hpp"
#include "qdso/model.hpp"

namespace oracle {

// exp(λ(b† − b)) in a padded space, cropped to n×n.
inline Eigen::MatrixXd displacement_expm(double lambda, int n, int pad = 60) {
    const int m = n + pad;
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, m);
    for (int k = 1; k < m; ++k)
        b(k - 1, k) = std::sqrt(static_cast<double>(k));
    const Eigen::MatrixXd gen = lambda * (b.transpose() - b);
    const Eigen::MatrixXd full = gen.exp();
    return full.topLeftCorner(n, n);
}

// Tensor elements straight from the defining sums, no factorization.
struct BruteTensors {
    const qdso::ModelConfig& c;
    const qdso::LeadParams& lead;
    const Eigen::MatrixXd& D;

    double eps(int k, int l) const { return c.system.mu_tilde - c.system.omega * (k - l); }
    double rin(double e) const { return qdso::tunneling_rate(e, lead) * qdso::fermi(e, lead); }
    double rout(double e) const { return qdso::tunneling_rate(e, lead) * (1.0 - qdso::fermi(e, lead)); }

    double r00(int j, int m, int k, int l) const {
        double s = 0.0;
        const int n = static_cast<int>(D.rows());
        for (int i = 0; i < n; ++i)
            s += rin(eps(k, i)) * D(i, j) * D(i, k) * (m == l) + rin(eps(l, i)) * D(i, l) * D(i, m) * (k == j);
        return 0.5 * s;
    }
    double r01(int j, int m, int k, int l) const {
        return 0.5 * D(j, k) * D(m, l) * (rin(eps(k, j)) + rin(eps(l, m)));
    }
    double r11(int j, int m, int k, int l) const {
        double s = 0.0;
        const int n = static_cast<int>(D.rows());
        for (int i = 0; i < n; ++i)
            s += rout(eps(i, k)) * D(j, i) * D(k, i) * (m == l) + rout(eps(i, l)) * D(l, i) * D(m, i) * (j == k);
        return 0.5 * s;
    }
    double r10(int j, int m, int k, int l) const {
        return 0.5 * D(k, j) * D(l, m) * (rout(eps(j, k)) + rout(eps(m, l)));
    }
};

inline Eigen::MatrixXcd random_hermitian(int n, std::mt19937& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Eigen::MatrixXcd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            a(i, j) = {g(rng), g(rng)};
    return 0.5 * (a + a.adjoint());
}

// Thermal state with mean occupation nbar on n levels.
inline Eigen::MatrixXcd thermal_state(double nbar, int n) {
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(n, n);
    const double q = nbar / (1.0 + nbar);
    double tr = 0.0;
    for (int k = 0; k < n; ++k) {
        rho(k, k) = std::pow(q, k);
        tr += std::pow(q, k);
    }
    return rho / tr;
}

inline Eigen::MatrixXcd fock_state(int m, int n) {
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(n, n);
    rho(m, m) = 1.0;
    return rho;
}

// |α⟩⟨α| truncated to n levels, built from the number-basis amplitudes.
inline Eigen::MatrixXcd coherent_state(std::complex<double> alpha, int n) {
    Eigen::VectorXcd v(n);
    double lf = 0.0;
    for (int k = 0; k < n; ++k) {
        if (k > 0)
            lf += std::log(static_cast<double>(k));
        v(k) = std::exp(-0.5 * std::norm(alpha) - 0.5 * lf) * std::pow(alpha, k);
    }
    return v * v.adjoint();
}

// Closed-form Husimi of a Fock state: e^{−|α|²}|α|^{2m}/(π m!)
inline double fock_husimi(int m, std::complex<double> alpha) {
    const double r2 = std::norm(alpha);
    return std::exp(-r2 + m * std::log(r2 > 0 ? r2 : 1e-300) - std::lgamma(m + 1.0)) / M_PI;
}

} // namespace oracle
