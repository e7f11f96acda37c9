// leads.hpp: Fermi occupations, Lorentzian tunneling rates and bath correlation functions

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <numbers>
#include <optional>
#include <vector>

#include "qdso/error.hpp"
#include "qdso/model.hpp"

namespace qdso {

enum class Direction { In, Out }; // In: dot 0 -> 1 (electron enters), Out: 1 -> 0

inline double fermi(double energy, const LeadParams& lead) {
    const double x = (energy - lead.chem_potential) / lead.temperature;
    if (x > 700.0)
        return 0.0;
    if (x < -700.0)
        return 1.0;
    // symmetric form avoids exp overflow on either side
    return x >= 0.0 ? std::exp(-x) / (1.0 + std::exp(-x)) : 1.0 / (1.0 + std::exp(x));
}

// Υ_ν(E) = Γ_ν δ_ν² / ((E − γ_ν)² + δ_ν²)
inline double tunneling_rate(double energy, const LeadParams& lead) {
    const double d = energy - lead.gamma_center;
    return lead.gamma_rate * lead.delta * lead.delta / (d * d + lead.delta * lead.delta);
}

inline double transition_rate(double energy, const LeadParams& lead, Direction dir) {
    const double f = fermi(energy, lead);
    return tunneling_rate(energy, lead) * (dir == Direction::In ? f : 1.0 - f);
}

struct CorrelationTrace {
    LeadLabel lead{LeadLabel::L};
    std::vector<double> times;
    std::vector<std::complex<double>> c00;
    std::vector<std::complex<double>> c11;
    std::optional<double> decay_time_estimate; // first s after which both envelopes stay below threshold
    double threshold{0.01};
};

struct CorrelationOptions {
    double threshold{0.01};     // relative to |C(0)|
    double rate_cutoff{1e-6};   // Υ at the frequency-grid edges, relative to Γ
    int min_points{1 << 14};
};

// Frequency-grid half extent around γ_ν: the larger of |γ|+50·max(δ,T) and the distance at which the
// Lorentzian falls below rate_cutoff·Γ.
inline double correlation_grid_extent(const LeadParams& lead, double rate_cutoff) {
    const double generic = std::abs(lead.gamma_center) + 50.0 * std::max(lead.delta, lead.temperature);
    const double lorentz = std::abs(lead.gamma_center) + lead.delta * std::sqrt(1.0 / rate_cutoff - 1.0);
    return std::max(generic, lorentz);
}

// C00(s) = (1/2π)∫dω e^{−iωs} Υ(ω)[1−f(ω)],  C11(s) = (1/2π)∫dω e^{+iωs} Υ(ω) f(ω)
// by trapezoid sums on a uniform grid fine enough to resolve the largest requested time.
inline CorrelationTrace bath_correlation(const LeadParams& lead, const std::vector<double>& times,
                                         CorrelationOptions opts = {}) {
    if (times.empty())
        throw Error("bath_correlation: empty time grid");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw Error("bath_correlation: time grid must be increasing");

    const double extent = correlation_grid_extent(lead, opts.rate_cutoff);
    const double s_max = std::max(std::abs(times.front()), std::abs(times.back()));
    // at least 16 samples per period of e^{iωs} at s_max
    const double dw_needed = s_max > 0.0 ? 2.0 * std::numbers::pi / (16.0 * s_max) : 2.0 * extent;
    std::size_t n = static_cast<std::size_t>(std::ceil(2.0 * extent / dw_needed)) + 1;
    n = std::max<std::size_t>(n, static_cast<std::size_t>(opts.min_points));
    const double w0 = lead.gamma_center - extent;
    const double dw = 2.0 * extent / static_cast<double>(n - 1);

    std::vector<double> empty(n), full(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double w = w0 + dw * static_cast<double>(k);
        const double weight = (k == 0 || k == n - 1) ? 0.5 : 1.0;
        const double ups = tunneling_rate(w, lead);
        const double f = fermi(w, lead);
        empty[k] = weight * ups * (1.0 - f);
        full[k] = weight * ups * f;
    }

    CorrelationTrace out;
    out.lead = lead.label;
    out.times = times;
    out.threshold = opts.threshold;
    out.c00.resize(times.size());
    out.c11.resize(times.size());
    const double norm = dw / (2.0 * std::numbers::pi);
    for (std::size_t t = 0; t < times.size(); ++t) {
        const double s = times[t];
        // phasor recurrence e^{-iωs}, re-anchored every 1024 steps
        std::complex<double> acc00{0.0, 0.0}, acc11{0.0, 0.0};
        const std::complex<double> step = std::polar(1.0, -dw * s);
        std::complex<double> ph;
        for (std::size_t k = 0; k < n; ++k) {
            if (k % 1024 == 0)
                ph = std::polar(1.0, -(w0 + dw * static_cast<double>(k)) * s);
            acc00 += empty[k] * ph;
            acc11 += full[k] * std::conj(ph);
            ph *= step;
        }
        out.c00[t] = norm * acc00;
        out.c11[t] = norm * acc11;
    }

    // envelope reference |C(0)|, also valid when s = 0 is not on the grid
    const double ref00 = norm * std::accumulate(empty.begin(), empty.end(), 0.0);
    const double ref11 = norm * std::accumulate(full.begin(), full.end(), 0.0);
    std::optional<std::size_t> last_above;
    for (std::size_t t = 0; t < times.size(); ++t) {
        if (std::abs(out.c00[t]) >= opts.threshold * ref00 || std::abs(out.c11[t]) >= opts.threshold * ref11)
            last_above = t;
    }
    if (!last_above)
        out.decay_time_estimate = times.front();
    else if (*last_above + 1 < times.size())
        out.decay_time_estimate = times[*last_above + 1];
    return out;
}

struct MarkovCheck {
    bool passed{false};
    std::vector<CorrelationTrace> traces;
};

// Both leads' correlation envelopes must decay below the threshold within the grid.
inline MarkovCheck markov_check(const ModelConfig& config, const std::vector<double>& times,
                                CorrelationOptions opts = {}) {
    MarkovCheck out;
    out.passed = true;
    for (auto label : {LeadLabel::L, LeadLabel::R}) {
        out.traces.push_back(bath_correlation(config.lead(label), times, opts));
        if (!out.traces.back().decay_time_estimate)
            out.passed = false;
    }
    return out;
}

inline std::vector<double> uniform_grid(double lo, double hi, int count) {
    std::vector<double> g(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        g[static_cast<std::size_t>(i)] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1.0);
    return g;
}

} // namespace qdso
