// redfield.hpp: Polaron-frame Redfield tensors, Liouvillian, steady state, lab-frame transform

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qdso/error.hpp"
#include "qdso/leads.hpp"
#include "qdso/model.hpp"
#include "qdso/phonon_algebra.hpp"

namespace qdso {

enum class Frame : std::uint64_t { Polaron = 0, Lab = 1 };

inline const char* to_string(Frame f) { return f == Frame::Polaron ? "polaron" : "lab"; }

/// NESS as the dot-empty (rho0) and dot-occupied (rho1) resonator blocks.
struct BlockDensityMatrix {
    Eigen::MatrixXcd rho0;
    Eigen::MatrixXcd rho1;
    Frame frame{Frame::Polaron};

    int dim() const { return static_cast<int>(rho0.rows()); }
    double trace() const { return rho0.trace().real() + rho1.trace().real(); }
    double occupation() const { return rho1.trace().real(); }
};

enum class TensorKind { R00, R01, R11, R10 };

// Rank-4 tensors of one lead, held through four N×N kernels. With ε_{k,l} = μ̃ − ω(k−l):
//   A_jk = Σ_i R⁰→¹(ε_{k,i}) D_ij D_ik      C_jk = Σ_i R¹→⁰(ε_{i,k}) D_ji D_ki
//   G_jk = D_jk R⁰→¹(ε_{k,j})               H_jk = D_kj R¹→⁰(ε_{j,k})
// and every tensor element is a two-term combination of them (see r00..r10).
struct RedfieldTensors {
    LeadLabel lead{LeadLabel::L};
    int n_cut{0};
    Eigen::MatrixXd D;
    Eigen::MatrixXd A, C, G, H;

    double r00(int j, int m, int k, int l) const {
        return 0.5 * (A(j, k) * (m == l) + A(m, l) * (k == j));
    }
    double r11(int j, int m, int k, int l) const {
        return 0.5 * (C(j, k) * (m == l) + C(m, l) * (j == k));
    }
    double r01(int j, int m, int k, int l) const { return 0.5 * (G(j, k) * D(m, l) + D(j, k) * G(m, l)); }
    double r10(int j, int m, int k, int l) const { return 0.5 * (H(j, k) * D(l, m) + D(k, j) * H(m, l)); }

    double operator()(TensorKind kind, int j, int m, int k, int l) const {
        switch (kind) {
        case TensorKind::R00: return r00(j, m, k, l);
        case TensorKind::R01: return r01(j, m, k, l);
        case TensorKind::R11: return r11(j, m, k, l);
        case TensorKind::R10: return r10(j, m, k, l);
        }
        return 0.0;
    }

    // Full N⁴ array, index ((j·N + m)·N + k)·N + l.
    std::vector<double> materialize(TensorKind kind) const {
        const int n = n_cut;
        std::vector<double> out(static_cast<std::size_t>(n) * n * n * n);
        std::size_t p = 0;
        for (int j = 0; j < n; ++j)
            for (int m = 0; m < n; ++m)
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l)
                        out[p++] = (*this)(kind, j, m, k, l);
        return out;
    }
};

inline RedfieldTensors build_tensors(const ModelConfig& config, const LeadParams& lead, const DisplacementMatrix& d) {
    const int n = config.system.n_cut;
    if (d.n_cut != n || d.entries.rows() != n || d.entries.cols() != n)
        throw DimensionMismatch("build_tensors: displacement matrix is " + std::to_string(d.n_cut) +
                                " but n_cut is " + std::to_string(n));
    if (d.lambda != config.system.lambda)
        throw DimensionMismatch("build_tensors: displacement matrix built for a different lambda");

    const double w = config.system.omega;
    const double mt = config.system.mu_tilde;
    // rates tabulated by level difference: ε_{k,l} depends on k−l only
    std::vector<double> in(2 * n - 1), out(2 * n - 1);
    for (int diff = -(n - 1); diff <= n - 1; ++diff) {
        const double e = mt - w * diff;
        in[diff + n - 1] = transition_rate(e, lead, Direction::In);
        out[diff + n - 1] = transition_rate(e, lead, Direction::Out);
    }
    auto r_in = [&](int k, int l) { return in[k - l + n - 1]; };
    auto r_out = [&](int k, int l) { return out[k - l + n - 1]; };

    RedfieldTensors t;
    t.lead = lead.label;
    t.n_cut = n;
    t.D = d.entries;
    const auto& D = t.D;
    t.A = Eigen::MatrixXd::Zero(n, n);
    t.C = Eigen::MatrixXd::Zero(n, n);
    t.G.resize(n, n);
    t.H.resize(n, n);
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
            double a = 0.0, c = 0.0;
            for (int i = 0; i < n; ++i) {
                a += r_in(k, i) * D(i, j) * D(i, k);
                c += r_out(i, k) * D(j, i) * D(k, i);
            }
            t.A(j, k) = a;
            t.C(j, k) = c;
            t.G(j, k) = D(j, k) * r_in(k, j);
            t.H(j, k) = D(k, j) * r_out(j, k);
        }
    }
    return t;
}

/// Superoperator on the stacked vectorization v[n·N² + j·N + m] = ρⁿ_{jm}:
///   dρ⁰ = −iω(j−m)ρ⁰ − ½(Aρ⁰ + ρ⁰Aᵀ) + ½(Hρ¹D + Dᵀρ¹Hᵀ)
///   dρ¹ = −iω(j−m)ρ¹ − ½(Cρ¹ + ρ¹Cᵀ) + ½(Gρ⁰Dᵀ + Dρ⁰Gᵀ)
/// with A, C, G, H summed over both leads.
struct Liouvillian {
    int n_cut{0};
    double omega{1.0};
    std::uint64_t config_hash{0};
    Eigen::MatrixXd D, A, C, G, H;

    Eigen::Index dim() const { return 2 * static_cast<Eigen::Index>(n_cut) * n_cut; }

    struct Node {
        int n, j, m;
    };
    Node node(Eigen::Index r) const {
        const Eigen::Index nn = static_cast<Eigen::Index>(n_cut) * n_cut;
        const int n = static_cast<int>(r / nn);
        const Eigen::Index rem = r % nn;
        return {n, static_cast<int>(rem / n_cut), static_cast<int>(rem % n_cut)};
    }
    Eigen::Index index(int n, int j, int m) const {
        return (static_cast<Eigen::Index>(n) * n_cut + j) * n_cut + m;
    }

    cplx entry(int n, int j, int m, int np, int k, int l) const {
        if (n == np) {
            const Eigen::MatrixXd& K = n == 0 ? A : C;
            double v = 0.0;
            if (l == m)
                v -= 0.5 * K(j, k);
            if (k == j)
                v -= 0.5 * K(m, l);
            cplx out{v, 0.0};
            if (j == k && m == l)
                out += cplx{0.0, -omega * (j - m)};
            return out;
        }
        if (n == 0)
            return {0.5 * (H(j, k) * D(l, m) + D(k, j) * H(m, l)), 0.0};
        return {0.5 * (G(j, k) * D(m, l) + D(j, k) * G(m, l)), 0.0};
    }
    cplx entry(Eigen::Index r, Eigen::Index c) const {
        const Node a = node(r), b = node(c);
        return entry(a.n, a.j, a.m, b.n, b.j, b.m);
    }

    Eigen::MatrixXcd dense() const {
        const Eigen::Index d = dim();
        Eigen::MatrixXcd out(d, d);
        for (Eigen::Index c = 0; c < d; ++c) {
            const Node b = node(c);
            for (Eigen::Index r = 0; r < d; ++r) {
                const Node a = node(r);
                out(r, c) = entry(a.n, a.j, a.m, b.n, b.j, b.m);
            }
        }
        return out;
    }

    void apply(const Eigen::MatrixXcd& r0, const Eigen::MatrixXcd& r1, Eigen::MatrixXcd& d0,
               Eigen::MatrixXcd& d1) const {
        const int n = n_cut;
        if (r0.rows() != n || r0.cols() != n || r1.rows() != n || r1.cols() != n)
            throw DimensionMismatch("Liouvillian::apply: block size mismatch");
        const Eigen::MatrixXcd Ac = A.cast<cplx>(), Cc = C.cast<cplx>(), Gc = G.cast<cplx>(), Hc = H.cast<cplx>(),
                               Dc = D.cast<cplx>();
        d0 = -0.5 * (Ac * r0 + r0 * Ac.transpose()) + 0.5 * (Hc * r1 * Dc + Dc.transpose() * r1 * Hc.transpose());
        d1 = -0.5 * (Cc * r1 + r1 * Cc.transpose()) + 0.5 * (Gc * r0 * Dc.transpose() + Dc * r0 * Gc.transpose());
        for (int j = 0; j < n; ++j)
            for (int m = 0; m < n; ++m) {
                const cplx phase{0.0, -omega * (j - m)};
                d0(j, m) += phase * r0(j, m);
                d1(j, m) += phase * r1(j, m);
            }
    }

    Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const {
        const int n = n_cut;
        if (v.size() != dim())
            throw DimensionMismatch("Liouvillian::apply: vector length mismatch");
        Eigen::MatrixXcd r0(n, n), r1(n, n), d0, d1;
        unpack(v, r0, r1);
        apply(r0, r1, d0, d1);
        return pack(d0, d1);
    }

    void unpack(const Eigen::VectorXcd& v, Eigen::MatrixXcd& r0, Eigen::MatrixXcd& r1) const {
        const int n = n_cut;
        r0.resize(n, n);
        r1.resize(n, n);
        for (int j = 0; j < n; ++j)
            for (int m = 0; m < n; ++m) {
                r0(j, m) = v(index(0, j, m));
                r1(j, m) = v(index(1, j, m));
            }
    }
    Eigen::VectorXcd pack(const Eigen::MatrixXcd& r0, const Eigen::MatrixXcd& r1) const {
        const int n = n_cut;
        Eigen::VectorXcd v(dim());
        for (int j = 0; j < n; ++j)
            for (int m = 0; m < n; ++m) {
                v(index(0, j, m)) = r0(j, m);
                v(index(1, j, m)) = r1(j, m);
            }
        return v;
    }

    // max row sum of |L|
    double norm_inf() const {
        double best = 0.0;
        const int n = n_cut;
        for (int b = 0; b < 2; ++b)
            for (int j = 0; j < n; ++j)
                for (int m = 0; m < n; ++m) {
                    double s = 0.0;
                    // same-block entries are nonzero only on row j or column m
                    for (int k = 0; k < n; ++k)
                        s += std::abs(entry(b, j, m, b, k, m));
                    for (int l = 0; l < n; ++l)
                        if (l != m)
                            s += std::abs(entry(b, j, m, b, j, l));
                    for (int k = 0; k < n; ++k)
                        for (int l = 0; l < n; ++l)
                            s += std::abs(entry(b, j, m, 1 - b, k, l));
                    best = std::max(best, s);
                }
        return best;
    }
};

inline Liouvillian assemble_liouvillian(const RedfieldTensors& left, const RedfieldTensors& right,
                                        const ModelConfig& config) {
    const int n = config.system.n_cut;
    if (left.n_cut != n || right.n_cut != n)
        throw DimensionMismatch("assemble_liouvillian: tensor dimension differs from n_cut");
    if (left.lead == right.lead)
        throw DimensionMismatch("assemble_liouvillian: tensors for both leads required");
    Liouvillian L;
    L.n_cut = n;
    L.omega = config.system.omega;
    L.config_hash = config_hash(config);
    L.D = left.D;
    L.A = left.A + right.A;
    L.C = left.C + right.C;
    L.G = left.G + right.G;
    L.H = left.H + right.H;
    return L;
}

enum class SolverKind { Auto, Dense, Iterative };
enum class DegeneracyPolicy { Error, GroundSector };

struct SteadyStateOptions {
    SolverKind solver{SolverKind::Auto};
    int dense_limit{50};                  // Auto uses the dense path up to this n_cut
    std::optional<int> pivot_population;  // override: replace the row of population index n·N + j
    DegeneracyPolicy degeneracy{DegeneracyPolicy::Error};
    double residual_gate{1e-8};           // relative to ‖L‖∞
    double rcond_floor{1e-15};
    double gmres_tol{1e-13};
    int gmres_restart{200};
    int gmres_max_iter{4000};
};

struct SteadyStateReport {
    BlockDensityMatrix ness;
    double residual{0.0};       // ‖L·v‖∞
    double norm{0.0};           // ‖L‖∞
    double rcond{0.0};          // dense path only
    int pivot_population{-1};   // n·N + j of the replaced row, dense path only
    int iterations{0};          // iterative path only
    SolverKind solver{SolverKind::Dense};
    int trace_components{1};    // decoupled sectors carrying population
    bool degenerate{false};
    double min_eigenvalue{0.0}; // over both blocks, before any clipping
    std::vector<std::string> warnings;
};

namespace detail {

struct UnionFind {
    std::vector<Eigen::Index> parent;
    Eigen::Index groups;
    explicit UnionFind(Eigen::Index n) : parent(static_cast<std::size_t>(n)), groups(n) {
        std::iota(parent.begin(), parent.end(), Eigen::Index{0});
    }
    Eigen::Index find(Eigen::Index x) {
        while (parent[x] != x)
            x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(Eigen::Index a, Eigen::Index b) {
        a = find(a);
        b = find(b);
        if (a != b) {
            parent[b] = a;
            --groups;
        }
    }
};

// Connected components of the coupling graph of L (nonzero entries).
inline UnionFind coupling_components(const Liouvillian& L) {
    const int n = L.n_cut;
    UnionFind uf(L.dim());
    for (int b = 0; b < 2 && uf.groups > 1; ++b)
        for (int j = 0; j < n && uf.groups > 1; ++j)
            for (int m = 0; m < n; ++m) {
                const auto r = L.index(b, j, m);
                for (int k = 0; k < n; ++k)
                    if (L.entry(b, j, m, b, k, m) != 0.0)
                        uf.unite(r, L.index(b, k, m));
                for (int l = 0; l < n; ++l)
                    if (L.entry(b, j, m, b, j, l) != 0.0)
                        uf.unite(r, L.index(b, j, l));
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l)
                        if (L.entry(b, j, m, 1 - b, k, l) != 0.0)
                            uf.unite(r, L.index(1 - b, k, l));
            }
    return uf;
}

// Real coordinates of Hermitian block pairs restricted to a node subset:
// population ρⁿ_jj, and (Re, Im) of ρⁿ_jm for j < m.
struct HermitianBasis {
    struct Var {
        int n, j, m, part; // part 0: real/population, 1: imaginary
    };
    std::vector<Var> vars;
};

inline HermitianBasis hermitian_basis(const Liouvillian& L, const std::vector<char>& active) {
    HermitianBasis hb;
    const int n = L.n_cut;
    for (int b = 0; b < 2; ++b)
        for (int j = 0; j < n; ++j)
            for (int m = j; m < n; ++m) {
                if (!active[L.index(b, j, m)])
                    continue;
                hb.vars.push_back({b, j, m, 0});
                if (m != j)
                    hb.vars.push_back({b, j, m, 1});
            }
    return hb;
}

// Restarted GMRES with right preconditioning for a matrix-free operator.
template <class Op, class Prec>
int gmres(const Op& op, const Prec& prec, const Eigen::VectorXcd& b, Eigen::VectorXcd& x, double tol, int restart,
          int max_iter) {
    const Eigen::Index n = b.size();
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        x.setZero(n);
        return 0;
    }
    if (x.size() != n)
        x.setZero(n);
    int total = 0;
    while (total < max_iter) {
        Eigen::VectorXcd r = b - op(x);
        double beta = r.norm();
        if (beta <= tol * bnorm)
            return total;
        const int m = restart;
        std::vector<Eigen::VectorXcd> V;
        V.reserve(m + 1);
        V.push_back(r / beta);
        Eigen::MatrixXcd Hs = Eigen::MatrixXcd::Zero(m + 1, m);
        std::vector<cplx> cs(m), sn(m);
        Eigen::VectorXcd g = Eigen::VectorXcd::Zero(m + 1);
        g(0) = beta;
        int k = 0;
        for (; k < m && total < max_iter; ++k, ++total) {
            Eigen::VectorXcd w = op(prec(V[k]));
            for (int i = 0; i <= k; ++i) {
                Hs(i, k) = V[i].dot(w);
                w -= Hs(i, k) * V[i];
            }
            Hs(k + 1, k) = w.norm();
            if (std::abs(Hs(k + 1, k)) > 0.0)
                V.push_back(w / Hs(k + 1, k));
            else
                V.push_back(Eigen::VectorXcd::Zero(n));
            for (int i = 0; i < k; ++i) {
                const cplx t = std::conj(cs[i]) * Hs(i, k) + std::conj(sn[i]) * Hs(i + 1, k);
                Hs(i + 1, k) = -sn[i] * Hs(i, k) + cs[i] * Hs(i + 1, k);
                Hs(i, k) = t;
            }
            const double den = std::hypot(std::abs(Hs(k, k)), std::abs(Hs(k + 1, k)));
            if (den == 0.0) {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = Hs(k, k) / den;
                sn[k] = Hs(k + 1, k) / den;
            }
            Hs(k, k) = den;
            Hs(k + 1, k) = 0.0;
            g(k + 1) = -sn[k] * g(k);
            g(k) = std::conj(cs[k]) * g(k);
            if (std::abs(g(k + 1)) <= tol * bnorm) {
                ++k;
                ++total;
                break;
            }
        }
        Eigen::VectorXcd y = Hs.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
        Eigen::VectorXcd upd = Eigen::VectorXcd::Zero(n);
        for (int i = 0; i < k; ++i)
            upd += y(i) * V[i];
        x += prec(upd);
        if (std::abs(g(k)) <= tol * bnorm)
            return total;
    }
    return total;
}

inline void dense_solve(const Liouvillian& L, const std::vector<char>& active, const SteadyStateOptions& opts,
                        Eigen::VectorXcd& v, SteadyStateReport& rep) {
    const int n = L.n_cut;
    const HermitianBasis hb = hermitian_basis(L, active);
    const Eigen::Index R = static_cast<Eigen::Index>(hb.vars.size());
    Eigen::MatrixXd M(R, R);
    for (Eigen::Index c = 0; c < R; ++c) {
        const auto& cv = hb.vars[c];
        for (Eigen::Index r = 0; r < R; ++r) {
            const auto& rv = hb.vars[r];
            const cplx l1 = L.entry(rv.n, rv.j, rv.m, cv.n, cv.j, cv.m);
            cplx z;
            if (cv.j == cv.m)
                z = l1;
            else {
                const cplx l2 = L.entry(rv.n, rv.j, rv.m, cv.n, cv.m, cv.j);
                z = cv.part == 0 ? l1 + l2 : cplx{0.0, 1.0} * (l1 - l2);
            }
            M(r, c) = rv.part == 0 ? z.real() : z.imag();
        }
    }

    Eigen::Index pivot = -1;
    if (opts.pivot_population) {
        const int b = *opts.pivot_population / n, j = *opts.pivot_population % n;
        for (Eigen::Index r = 0; r < R; ++r)
            if (hb.vars[r].n == b && hb.vars[r].j == j && hb.vars[r].m == j)
                pivot = r;
        if (pivot < 0)
            throw Error("steady_state: pivot population row is not part of the solved sector");
    } else {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index r = 0; r < R; ++r) {
            if (hb.vars[r].j != hb.vars[r].m)
                continue;
            const double diag = std::abs(M(r, r));
            const double off = M.row(r).cwiseAbs().sum() - diag;
            const double dom = off > 0.0 ? diag / off : std::numeric_limits<double>::infinity();
            if (pivot < 0 || dom < best) {
                best = dom;
                pivot = r;
            }
        }
    }
    for (Eigen::Index c = 0; c < R; ++c)
        M(pivot, c) = hb.vars[c].j == hb.vars[c].m ? 1.0 : 0.0;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(R);
    rhs(pivot) = 1.0;

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
    rep.rcond = lu.rcond();
    if (!(rep.rcond > opts.rcond_floor))
        throw DegenerateNessError("steady_state: bordered system is singular (rcond " + std::to_string(rep.rcond) +
                                  ")");
    const Eigen::VectorXd x = lu.solve(rhs);
    rep.pivot_population = hb.vars[pivot].n * n + hb.vars[pivot].j;

    v = Eigen::VectorXcd::Zero(L.dim());
    for (Eigen::Index r = 0; r < R; ++r) {
        const auto& var = hb.vars[r];
        const auto a = L.index(var.n, var.j, var.m), at = L.index(var.n, var.m, var.j);
        if (var.j == var.m)
            v(a) = x(r);
        else if (var.part == 0) {
            v(a) += x(r);
            v(at) += x(r);
        } else {
            v(a) += cplx{0.0, x(r)};
            v(at) -= cplx{0.0, x(r)};
        }
    }
    rep.solver = SolverKind::Dense;
}

inline void iterative_solve(const Liouvillian& L, const std::vector<char>& active, const SteadyStateOptions& opts,
                            Eigen::VectorXcd& v, SteadyStateReport& rep) {
    const int n = L.n_cut;
    const Eigen::Index dim = L.dim();
    Eigen::VectorXd ell = Eigen::VectorXd::Zero(dim);
    for (int b = 0; b < 2; ++b)
        for (int j = 0; j < n; ++j)
            if (active[L.index(b, j, j)])
                ell(L.index(b, j, j)) = 1.0;
    const double scale = std::max(L.A.cwiseAbs().maxCoeff(), L.C.cwiseAbs().maxCoeff()) / (2.0 * n);
    const Eigen::VectorXcd x = (ell * (scale > 0.0 ? scale : 1.0)).cast<cplx>();

    // (P L P + (1 − P) + x ℓᵀ) with P the projector on active nodes
    auto op = [&](const Eigen::VectorXcd& u) {
        Eigen::VectorXcd w = u;
        for (Eigen::Index i = 0; i < dim; ++i)
            if (!active[i])
                w(i) = 0.0;
        Eigen::VectorXcd out = L.apply(w);
        for (Eigen::Index i = 0; i < dim; ++i)
            if (!active[i])
                out(i) = u(i);
        out += x * ell.cast<cplx>().dot(u);
        return out;
    };

    // block-Jacobi over offsets d = j − m (both dot blocks together)
    struct Block {
        std::vector<Eigen::Index> ids;
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu;
    };
    std::vector<Block> blocks;
    for (int d = -(n - 1); d <= n - 1; ++d) {
        Block blk;
        for (int b = 0; b < 2; ++b)
            for (int j = 0; j < n; ++j)
                if (j - d >= 0 && j - d < n)
                    blk.ids.push_back(L.index(b, j, j - d));
        const auto sz = static_cast<Eigen::Index>(blk.ids.size());
        Eigen::MatrixXcd B(sz, sz);
        for (Eigen::Index c = 0; c < sz; ++c) {
            const auto cn = L.node(blk.ids[c]);
            for (Eigen::Index r = 0; r < sz; ++r) {
                const auto rn = L.node(blk.ids[r]);
                const bool ra = active[blk.ids[r]], ca = active[blk.ids[c]];
                cplx e = ra && ca ? L.entry(rn.n, rn.j, rn.m, cn.n, cn.j, cn.m) : cplx{r == c ? 1.0 : 0.0};
                if (ra && ca)
                    e += x(blk.ids[r]) * ell(blk.ids[c]);
                B(r, c) = e;
            }
        }
        blk.lu.compute(B);
        blocks.push_back(std::move(blk));
    }
    auto prec = [&](const Eigen::VectorXcd& u) {
        Eigen::VectorXcd out(u.size());
        for (const auto& blk : blocks) {
            Eigen::VectorXcd seg(static_cast<Eigen::Index>(blk.ids.size()));
            for (std::size_t i = 0; i < blk.ids.size(); ++i)
                seg(static_cast<Eigen::Index>(i)) = u(blk.ids[i]);
            seg = blk.lu.solve(seg);
            for (std::size_t i = 0; i < blk.ids.size(); ++i)
                out(blk.ids[i]) = seg(static_cast<Eigen::Index>(i));
        }
        return out;
    };

    v = Eigen::VectorXcd::Zero(dim);
    rep.iterations = gmres(op, prec, x, v, opts.gmres_tol, opts.gmres_restart, opts.gmres_max_iter);
    rep.solver = SolverKind::Iterative;
}

} // namespace detail

inline double min_block_eigenvalue(const BlockDensityMatrix& rho) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> e0(rho.rho0, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> e1(rho.rho1, Eigen::EigenvaluesOnly);
    return std::min(e0.eigenvalues().minCoeff(), e1.eigenvalues().minCoeff());
}

inline SteadyStateReport steady_state(const Liouvillian& L, SteadyStateOptions opts = {}) {
    const int n = L.n_cut;
    const Eigen::Index dim = L.dim();
    SteadyStateReport rep;

    // sectors that carry population but are decoupled from each other make the null space degenerate
    auto uf = detail::coupling_components(L);
    std::vector<Eigen::Index> roots;
    for (int b = 0; b < 2; ++b)
        for (int j = 0; j < n; ++j) {
            const auto root = uf.find(L.index(b, j, j));
            if (std::find(roots.begin(), roots.end(), root) == roots.end())
                roots.push_back(root);
        }
    rep.trace_components = static_cast<int>(roots.size());
    rep.degenerate = roots.size() > 1;
    std::vector<char> active(static_cast<std::size_t>(dim), 1);
    if (rep.degenerate) {
        if (opts.degeneracy == DegeneracyPolicy::Error)
            throw DegenerateNessError("steady_state: " + std::to_string(roots.size()) +
                                      " decoupled population sectors, null space is not one-dimensional");
        const auto ground = uf.find(L.index(0, 0, 0));
        for (Eigen::Index i = 0; i < dim; ++i)
            active[i] = uf.find(i) == ground;
        rep.warnings.push_back("degenerate null space: solved the sector containing the empty-dot phonon vacuum");
    }

    const bool dense = opts.solver == SolverKind::Dense || (opts.solver == SolverKind::Auto && n <= opts.dense_limit);
    Eigen::VectorXcd v;
    if (dense)
        detail::dense_solve(L, active, opts, v, rep);
    else
        detail::iterative_solve(L, active, opts, v, rep);

    BlockDensityMatrix& rho = rep.ness;
    L.unpack(v, rho.rho0, rho.rho1);
    rho.rho0 = 0.5 * (rho.rho0 + rho.rho0.adjoint()).eval();
    rho.rho1 = 0.5 * (rho.rho1 + rho.rho1.adjoint()).eval();
    const double tr = rho.trace();
    rho.rho0 /= tr;
    rho.rho1 /= tr;
    rho.frame = Frame::Polaron;

    rep.norm = L.norm_inf();
    rep.residual = L.apply(L.pack(rho.rho0, rho.rho1)).cwiseAbs().maxCoeff();
    if (!(rep.residual <= opts.residual_gate * rep.norm))
        throw ConvergenceError("steady_state: residual " + std::to_string(rep.residual) + " exceeds gate " +
                               std::to_string(opts.residual_gate * rep.norm));
    rep.min_eigenvalue = min_block_eigenvalue(rho);
    if (rep.min_eigenvalue < -1e-4)
        rep.warnings.push_back("positivity violated: min eigenvalue " + std::to_string(rep.min_eigenvalue));
    return rep;
}

// ρ¹ ↦ Dᵀρ¹D with D the first N rows of the supplied matrix; a matrix with more than N columns
// embeds the result in a larger Fock space so no weight is lost at the cutoff.
inline BlockDensityMatrix to_lab_frame(const BlockDensityMatrix& rho, const DisplacementMatrix& d) {
    if (rho.frame != Frame::Polaron)
        throw FrameMismatch("to_lab_frame: input is already in the lab frame");
    const int n = rho.dim();
    if (d.n_cut < n)
        throw DimensionMismatch("to_lab_frame: displacement matrix smaller than the state");
    const int m = d.n_cut;
    const Eigen::MatrixXcd rows = d.entries.topRows(n).cast<cplx>();
    BlockDensityMatrix out;
    out.frame = Frame::Lab;
    out.rho0 = Eigen::MatrixXcd::Zero(m, m);
    out.rho0.topLeftCorner(n, n) = rho.rho0;
    out.rho1 = rows.transpose() * rho.rho1 * rows;
    return out;
}

// Lab frame in the padded space chosen by lab_dimension.
inline BlockDensityMatrix to_lab_frame(const BlockDensityMatrix& rho, double lambda) {
    return to_lab_frame(rho, displacement_matrix(lambda, lab_dimension(lambda, rho.dim())));
}

// Binary NESS dump: 32-byte header (magic "QDSONESS", N, frame, config hash as little-endian u64),
// then rho0 and rho1 row-major as (re, im) little-endian doubles.
namespace detail {

inline std::uint64_t to_le(std::uint64_t x) {
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t y = 0;
        for (int i = 0; i < 8; ++i)
            y |= ((x >> (8 * i)) & 0xffu) << (8 * (7 - i));
        return y;
    }
    return x;
}

} // namespace detail

inline void write_ness(const std::string& path, const BlockDensityMatrix& rho, std::uint64_t hash) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw Error("write_ness: cannot open " + path);
    os.write("QDSONESS", 8);
    const std::uint64_t header[3] = {detail::to_le(static_cast<std::uint64_t>(rho.dim())),
                                     detail::to_le(static_cast<std::uint64_t>(rho.frame)), detail::to_le(hash)};
    os.write(reinterpret_cast<const char*>(header), sizeof header);
    for (const auto* blk : {&rho.rho0, &rho.rho1})
        for (Eigen::Index j = 0; j < blk->rows(); ++j)
            for (Eigen::Index m = 0; m < blk->cols(); ++m) {
                const cplx z = (*blk)(j, m);
                const std::uint64_t parts[2] = {detail::to_le(std::bit_cast<std::uint64_t>(z.real())),
                                                detail::to_le(std::bit_cast<std::uint64_t>(z.imag()))};
                os.write(reinterpret_cast<const char*>(parts), sizeof parts);
            }
    if (!os)
        throw Error("write_ness: write failed for " + path);
}

struct NessFile {
    BlockDensityMatrix rho;
    std::uint64_t config_hash{0};
};

inline NessFile read_ness(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw Error("read_ness: cannot open " + path);
    char magic[8];
    std::uint64_t header[3];
    is.read(magic, 8);
    is.read(reinterpret_cast<char*>(header), sizeof header);
    if (!is || std::memcmp(magic, "QDSONESS", 8) != 0)
        throw Error("read_ness: bad header in " + path);
    const auto n = static_cast<Eigen::Index>(detail::to_le(header[0]));
    NessFile f;
    f.rho.frame = static_cast<Frame>(detail::to_le(header[1]));
    f.config_hash = detail::to_le(header[2]);
    for (auto* blk : {&f.rho.rho0, &f.rho.rho1}) {
        blk->resize(n, n);
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index m = 0; m < n; ++m) {
                std::uint64_t parts[2];
                is.read(reinterpret_cast<char*>(parts), sizeof parts);
                (*blk)(j, m) = {std::bit_cast<double>(detail::to_le(parts[0])),
                                std::bit_cast<double>(detail::to_le(parts[1]))};
            }
    }
    if (!is)
        throw Error("read_ness: truncated file " + path);
    return f;
}

} // namespace qdso
