// phonon_algebra.hpp: Coherent-state overlaps and Franck–Condon displacement matrices

#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "qdso/error.hpp"

namespace qdso {

using cplx = std::complex<double>;

// ⟨α|k⟩ = e^{−|α|²/2} conj(α)^k / √(k!), evaluated in log-space.
inline cplx coherent_overlap(cplx alpha, int k) {
    const double r = std::abs(alpha);
    if (k == 0)
        return {std::exp(-0.5 * r * r), 0.0};
    if (r == 0.0)
        return {0.0, 0.0};
    const double log_mag = -0.5 * r * r + k * std::log(r) - 0.5 * std::lgamma(k + 1.0);
    return std::polar(std::exp(log_mag), -k * std::arg(alpha));
}

// Vector of ⟨α|k⟩ for k = 0..n−1.
inline Eigen::VectorXcd coherent_overlaps(cplx alpha, int n) {
    Eigen::VectorXcd out(n);
    const double r = std::abs(alpha);
    const double theta = std::arg(alpha);
    if (r == 0.0) {
        out.setZero();
        out(0) = 1.0;
        return out;
    }
    const double log_r = std::log(r);
    double log_fact = 0.0;
    for (int k = 0; k < n; ++k) {
        if (k > 0)
            log_fact += std::log(static_cast<double>(k));
        out(k) = std::polar(std::exp(-0.5 * r * r + k * log_r - 0.5 * log_fact), -k * theta);
    }
    return out;
}

// Generalized Laguerre polynomial L_n^{(a)}(x) by three-term recurrence.
inline double laguerre(int n, double a, double x) {
    if (n == 0)
        return 1.0;
    double prev = 1.0;
    double cur = 1.0 + a - x;
    for (int k = 1; k < n; ++k) {
        const double next = ((2.0 * k + 1.0 + a - x) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    return cur;
}

/// Franck–Condon matrix D[k][l] = ⟨k|exp(λ(b†−b))|l⟩ on the Fock levels 0..n_cut−1.
struct DisplacementMatrix {
    double lambda{0.0};
    int n_cut{0};
    Eigen::MatrixXd entries;

    double operator()(int k, int l) const { return entries(k, l); }
};

/// Closed form through associated Laguerre polynomials:
///   k ≥ l: √(l!/k!) λ^{k−l} e^{−λ²/2} L_l^{(k−l)}(λ²)
///   k < l: √(k!/l!) (−λ)^{l−k} e^{−λ²/2} L_k^{(l−k)}(λ²)
inline DisplacementMatrix displacement_matrix(double lambda, int n_cut) {
    if (n_cut < 1)
        throw DimensionMismatch("displacement_matrix: n_cut must be positive");
    DisplacementMatrix d{lambda, n_cut, Eigen::MatrixXd::Zero(n_cut, n_cut)};
    if (lambda == 0.0) {
        d.entries.setIdentity();
        return d;
    }
    std::vector<double> log_fact(n_cut + 1, 0.0);
    for (int i = 1; i <= n_cut; ++i)
        log_fact[i] = log_fact[i - 1] + std::log(static_cast<double>(i));

    const double x = lambda * lambda;
    const double log_abs_lambda = std::log(std::abs(lambda));
    for (int k = 0; k < n_cut; ++k) {
        for (int l = 0; l < n_cut; ++l) {
            const int lo = std::min(k, l);
            const int m = std::abs(k - l);
            const double log_scale = 0.5 * (log_fact[lo] - log_fact[lo + m]) + m * log_abs_lambda - 0.5 * x;
            double value = std::exp(log_scale) * laguerre(lo, m, x);
            // sign of λ^{k−l} for k ≥ l, of (−λ)^{l−k} otherwise
            const bool negative = (k >= l) ? (lambda < 0.0 && (m % 2 == 1)) : (lambda > 0.0 && (m % 2 == 1));
            d.entries(k, l) = negative ? -value : value;
        }
    }
    return d;
}

struct TruncationReport {
    int trusted_columns{0};  // columns 0..trusted_columns−1 have |norm − 1| ≤ tol
    double max_deviation{0.0};
};

// Column-norm check Σ_k D[k][l]² ≈ 1; columns near the cutoff leak weight out of the space.
inline TruncationReport truncation_report(const DisplacementMatrix& d, double tol) {
    TruncationReport rep;
    rep.trusted_columns = d.n_cut;
    for (int l = 0; l < d.n_cut; ++l) {
        const double dev = std::abs(d.entries.col(l).squaredNorm() - 1.0);
        rep.max_deviation = std::max(rep.max_deviation, dev);
        if (dev > tol && rep.trusted_columns == d.n_cut)
            rep.trusted_columns = l;
    }
    return rep;
}

// Smallest M ≥ n such that the first n rows of D (size M) are orthonormal to tol,
// i.e. the lab-frame image of any state on levels < n fits inside M levels.
inline int lab_dimension(double lambda, int n, double tol = 1e-13) {
    if (lambda == 0.0)
        return n;
    int m = n + static_cast<int>(std::ceil(lambda * lambda + 2.0 * std::abs(lambda) * std::sqrt(n))) + 4;
    for (;; m += 4) {
        const auto d = displacement_matrix(lambda, m);
        const Eigen::MatrixXd rows = d.entries.topRows(n);
        const double dev = (rows * rows.transpose() - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
        if (dev <= tol || m > 4 * n + 200)
            return m;
    }
}

} // namespace qdso
