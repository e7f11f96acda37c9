// phasespace.hpp: Husimi Q function, barycenter, torotropy and ergotropy of the resonator state

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qdso/error.hpp"
#include "qdso/phonon_algebra.hpp"
#include "qdso/redfield.hpp"

namespace qdso {

struct ReducedResonatorState {
    Eigen::MatrixXcd rho;
    double min_eigenvalue{0.0}; // before clipping
    bool clipped{false};

    int dim() const { return static_cast<int>(rho.rows()); }
};

// Clip eigenvalues in [−clip_floor, 0) and renormalize; anything below −invalid_floor is rejected.
inline ReducedResonatorState make_resonator_state(const Eigen::MatrixXcd& rho_in, double clip_floor = 1e-8,
                                                  double invalid_floor = 1e-4) {
    ReducedResonatorState s;
    Eigen::MatrixXcd rho = 0.5 * (rho_in + rho_in.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho);
    Eigen::VectorXd ev = es.eigenvalues();
    s.min_eigenvalue = ev.minCoeff();
    if (s.min_eigenvalue < -invalid_floor)
        throw InvalidStateError("resonator state has eigenvalue " + std::to_string(s.min_eigenvalue));
    bool touched = false;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev(i) < 0.0 && ev(i) >= -clip_floor) {
            ev(i) = 0.0;
            touched = true;
        }
    if (touched) {
        rho = es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
        rho = 0.5 * (rho + rho.adjoint()).eval();
        s.clipped = true;
    }
    const double tr = rho.trace().real();
    if (!(tr > 0.0))
        throw InvalidStateError("resonator state has non-positive trace");
    s.rho = rho / tr;
    return s;
}

// ρ_QMR = ρ⁰_lab + ρ¹_lab
inline ReducedResonatorState reduce_qmr(const BlockDensityMatrix& lab) {
    if (lab.frame != Frame::Lab)
        throw FrameMismatch("reduce_qmr: expects the lab-frame state");
    return make_resonator_state(lab.rho0 + lab.rho1);
}

// Q(α) = ⟨α|ρ|α⟩ / π
inline double husimi(const ReducedResonatorState& s, cplx alpha) {
    const Eigen::VectorXcd o = coherent_overlaps(alpha, s.dim()); // ⟨k|α⟩ conjugated
    const Eigen::VectorXcd c = o.conjugate();                     // ⟨k|α⟩
    return (c.adjoint() * s.rho * c)(0, 0).real() / std::numbers::pi;
}

// Tr(ρ b) over both dot blocks.
inline cplx barycenter(const BlockDensityMatrix& lab) {
    if (lab.frame != Frame::Lab)
        throw FrameMismatch("barycenter: expects the lab-frame state");
    cplx s{0.0, 0.0};
    for (int k = 1; k < lab.dim(); ++k)
        s += std::sqrt(static_cast<double>(k)) * (lab.rho0(k, k - 1) + lab.rho1(k, k - 1));
    return s;
}

inline cplx barycenter(const ReducedResonatorState& st) {
    cplx s{0.0, 0.0};
    for (int k = 1; k < st.dim(); ++k)
        s += std::sqrt(static_cast<double>(k)) * st.rho(k, k - 1);
    return s;
}

inline double mean_phonons(const ReducedResonatorState& st) {
    double s = 0.0;
    for (int k = 1; k < st.dim(); ++k)
        s += k * st.rho(k, k).real();
    return s;
}

struct RadialProfile {
    double phi{0.0};
    double dr{0.02};
    std::vector<double> r;
    std::vector<double> values; // normalized, Σ values·dr = 1
    double normalization{0.0};  // raw line integral before normalizing
};

struct ProfileOptions {
    std::optional<double> r_max; // auto when absent
    double dr{0.02};
    double tail{1e-10};          // auto extension stops once the last sample is below tail·max
};

inline RadialProfile radial_profile(const ReducedResonatorState& s, cplx alpha_c, double phi, ProfileOptions opts = {}) {
    if (!(opts.dr > 0.0))
        throw Error("radial_profile: dr must be positive");
    RadialProfile p;
    p.phi = phi;
    p.dr = opts.dr;
    const cplx dir = std::polar(1.0, phi);
    double r_max = opts.r_max ? *opts.r_max : 3.0 * (std::sqrt(std::max(mean_phonons(s), 0.0)) + 1.0) + std::abs(alpha_c);
    double peak = 0.0;
    std::size_t i = 0;
    for (;;) {
        for (;; ++i) {
            const double r = static_cast<double>(i) * opts.dr;
            if (r > r_max + 0.5 * opts.dr)
                break;
            const double q = std::max(husimi(s, alpha_c + r * dir), 0.0);
            p.r.push_back(r);
            p.values.push_back(q);
            peak = std::max(peak, q);
        }
        if (opts.r_max || p.values.back() <= opts.tail * peak || r_max > 1e3)
            break;
        r_max *= 1.5;
    }
    double integral = 0.0;
    for (double q : p.values)
        integral += q * opts.dr;
    if (!(integral >= 1e-30))
        throw EmptyProfileError("radial_profile: line integral vanishes along phi = " + std::to_string(phi));
    p.normalization = integral;
    for (double& q : p.values)
        q /= integral;
    return p;
}

// Non-increasing rearrangement on the same grid.
inline std::vector<double> decreasing_rearrangement(const std::vector<double>& values) {
    std::vector<double> out = values;
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

struct AngleContribution {
    double phi{0.0};
    double contribution{0.0};
    double entropy{0.0};
    double r_max{0.0};
};

struct TorotropyResult {
    double value{0.0};
    std::vector<AngleContribution> per_angle;
    cplx alpha_c{0.0, 0.0};    // anchor used
    cplx barycenter{0.0, 0.0}; // exact Tr(ρb), diagnostic
};

struct TorotropyOptions {
    std::vector<double> angles; // empty: default set chosen from λ
    double dr{0.02};
    double tail{1e-10};
    double flat_tol{1e-12};     // per-sample tolerance, relative to the profile maximum
};

inline std::vector<double> default_angles(double lambda) {
    if (lambda <= 1.0)
        return {0.0, std::numbers::pi / 2, std::numbers::pi, 3.0 * std::numbers::pi / 4};
    std::vector<double> a(16);
    for (int i = 0; i < 16; ++i)
        a[static_cast<std::size_t>(i)] = 2.0 * std::numbers::pi * i / 16.0;
    return a;
}

inline AngleContribution angle_contribution(const RadialProfile& p, double flat_tol) {
    AngleContribution c;
    c.phi = p.phi;
    c.r_max = p.r.back();
    const double peak = *std::max_element(p.values.begin(), p.values.end());
    double s = 0.0;
    for (double q : p.values)
        if (q > 0.0)
            s -= q * std::log(q) * p.dr;
    c.entropy = s;
    bool monotone = true;
    for (std::size_t i = 1; i < p.values.size() && monotone; ++i)
        monotone = p.values[i] <= p.values[i - 1] + flat_tol * peak;
    if (monotone) {
        c.contribution = 0.0;
        return c;
    }
    if (!(s > 0.0))
        throw EntropyDegenerateError("torotropy: profile entropy " + std::to_string(s) + " at phi = " +
                                     std::to_string(p.phi) + "; refine dr");
    const auto down = decreasing_rearrangement(p.values);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.values.size(); ++i)
        acc += p.r[i] * (p.values[i] - down[i]) * p.dr;
    c.contribution = acc / s;
    return c;
}

inline TorotropyResult torotropy(const ReducedResonatorState& s, cplx alpha_c, const std::vector<double>& angles,
                                 TorotropyOptions opts = {}) {
    if (angles.empty())
        throw Error("torotropy: empty angle set");
    TorotropyResult res;
    res.alpha_c = alpha_c;
    res.barycenter = barycenter(s);
    res.value = std::numeric_limits<double>::infinity();
    for (double phi : angles) {
        const auto prof = radial_profile(s, alpha_c, phi, {std::nullopt, opts.dr, opts.tail});
        auto c = angle_contribution(prof, opts.flat_tol);
        res.value = std::min(res.value, c.contribution);
        res.per_angle.push_back(c);
    }
    return res;
}

// Anchor at −λ⟨n̂⟩ on the full lab-frame state.
inline TorotropyResult torotropy(const BlockDensityMatrix& lab, double lambda, TorotropyOptions opts = {}) {
    if (lab.frame != Frame::Lab)
        throw FrameMismatch("torotropy: expects the lab-frame state");
    const auto s = reduce_qmr(lab);
    const cplx anchor{-lambda * lab.occupation(), 0.0};
    auto res = torotropy(s, anchor, opts.angles.empty() ? default_angles(lambda) : opts.angles, opts);
    res.barycenter = barycenter(lab);
    return res;
}

// Tr(ρH) − Σ_k p↓_k ωk
inline double ergotropy(const ReducedResonatorState& s, double omega) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(s.rho, Eigen::EigenvaluesOnly);
    std::vector<double> p(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(p.begin(), p.end(), std::greater<>());
    double passive = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k)
        passive += omega * static_cast<double>(k) * p[k];
    return std::max(omega * mean_phonons(s) - passive, 0.0);
}

struct GridSpec {
    double re_min{-6.0}, re_max{6.0};
    double im_min{-6.0}, im_max{6.0};
    int re_count{121}, im_count{121};
};

inline void write_husimi_csv(std::ostream& os, const ReducedResonatorState& s, const GridSpec& g,
                             const std::string& note = {}) {
    os << "# husimi grid\n";
    if (!note.empty())
        os << "# " << note << "\n";
    char buf[160];
    std::snprintf(buf, sizeof buf, "# re: %.17g %.17g %d\n# im: %.17g %.17g %d\n", g.re_min, g.re_max, g.re_count,
                  g.im_min, g.im_max, g.im_count);
    os << buf << "re_alpha,im_alpha,q\n";
    for (int a = 0; a < g.im_count; ++a) {
        const double y = g.im_count == 1 ? g.im_min : g.im_min + (g.im_max - g.im_min) * a / (g.im_count - 1.0);
        for (int b = 0; b < g.re_count; ++b) {
            const double x = g.re_count == 1 ? g.re_min : g.re_min + (g.re_max - g.re_min) * b / (g.re_count - 1.0);
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", x, y, husimi(s, {x, y}));
            os << buf;
        }
    }
}

inline void write_torotropy_csv(std::ostream& os, const TorotropyResult& t) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "# torotropy %.17g\n# alpha_c %.17g %.17g\n# barycenter %.17g %.17g\n", t.value,
                  t.alpha_c.real(), t.alpha_c.imag(), t.barycenter.real(), t.barycenter.imag());
    os << buf << "phi,contribution,entropy,r_max\n";
    for (const auto& c : t.per_angle) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", c.phi, c.contribution, c.entropy, c.r_max);
        os << buf;
    }
}

} // namespace qdso
