// sweep.hpp: Single-point evaluation, adaptive truncation and parallel parameter sweeps

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qdso/config.hpp"
#include "qdso/error.hpp"
#include "qdso/model.hpp"
#include "qdso/observables.hpp"
#include "qdso/phasespace.hpp"
#include "qdso/redfield.hpp"

namespace qdso {

inline constexpr const char* artifact_version = "0.1.0";

enum class AxisParam { MuTilde, DeltaMu, Lambda };

inline const char* to_string(AxisParam p) {
    switch (p) {
    case AxisParam::MuTilde: return "mu_tilde";
    case AxisParam::DeltaMu: return "delta_mu";
    case AxisParam::Lambda: return "lambda";
    }
    return "?";
}

inline AxisParam parse_axis_param(const std::string& s) {
    if (s == "mu_tilde")
        return AxisParam::MuTilde;
    if (s == "delta_mu")
        return AxisParam::DeltaMu;
    if (s == "lambda")
        return AxisParam::Lambda;
    throw ConfigError("unknown axis parameter '" + s + "' (mu_tilde, delta_mu, lambda)");
}

struct Axis {
    AxisParam param{AxisParam::MuTilde};
    double min{0.0}, max{0.0};
    int count{1};

    double value(int i) const { return count == 1 ? min : min + (max - min) * i / (count - 1.0); }
};

inline ModelConfig apply_axis(const ModelConfig& c, AxisParam p, double v) {
    ModelConfig out = c;
    switch (p) {
    case AxisParam::MuTilde: out.system.mu_tilde = v; break;
    case AxisParam::DeltaMu: out = with_bias(c, v, c.system.mu_tilde); break;
    case AxisParam::Lambda: out.system.lambda = v; break;
    }
    return out;
}

enum Output : unsigned { Transport = 1u, Thermo = 2u, PhaseSpace = 4u, ModeGroup = 8u, AllOutputs = 15u };

inline unsigned parse_outputs(const std::string& s) {
    unsigned out = 0;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char ch) { return std::isspace(ch); }),
                   item.end());
        if (item == "transport")
            out |= Transport;
        else if (item == "thermo")
            out |= Thermo;
        else if (item == "phasespace")
            out |= PhaseSpace;
        else if (item == "mode")
            out |= ModeGroup;
        else if (item == "all")
            out |= AllOutputs;
        else if (!item.empty())
            throw ConfigError("unknown output group '" + item + "'");
    }
    if (out == 0)
        throw ConfigError("no output groups selected");
    return out;
}

enum class NCutPolicy { Fixed, Adaptive };

struct PointOptions {
    unsigned outputs{AllOutputs};
    NCutPolicy policy{NCutPolicy::Fixed};
    TorotropyOptions torotropy{};
    int adaptive_start{20};
    int adaptive_step{10};
    int adaptive_cap{80};
    double adaptive_tail{1e-6};
    double adaptive_drift{0.01};
};

struct SweepRow {
    double axis1{std::numeric_limits<double>::quiet_NaN()};
    double axis2{std::numeric_limits<double>::quiet_NaN()};
    std::string status{"ok"};
    ThermoReport thermo;
    double torotropy{std::numeric_limits<double>::quiet_NaN()};
    double ergotropy{std::numeric_limits<double>::quiet_NaN()};
    cplx alpha_c{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    cplx barycenter{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    int n_cut{0};
    double residual{std::numeric_limits<double>::quiet_NaN()};
    double min_eigenvalue{std::numeric_limits<double>::quiet_NaN()};
    std::vector<std::string> warnings;
};

/// Everything solved at one parameter point.
struct PointSolution {
    ModelConfig config;
    RedfieldTensors left, right;
    SteadyStateReport steady;
    BlockDensityMatrix lab;
};

inline PointSolution solve_point(const ModelConfig& config, DegeneracyPolicy degeneracy = DegeneracyPolicy::Error,
                                 SolverKind solver = SolverKind::Auto) {
    config.validate();
    PointSolution s;
    s.config = config;
    const auto d = displacement_matrix(config.system.lambda, config.system.n_cut);
    s.left = build_tensors(config, config.lead_L, d);
    s.right = build_tensors(config, config.lead_R, d);
    const auto L = assemble_liouvillian(s.left, s.right, config);
    SteadyStateOptions opts;
    opts.degeneracy = degeneracy;
    opts.solver = solver;
    s.steady = steady_state(L, opts);
    s.lab = to_lab_frame(s.steady.ness, config.system.lambda);
    return s;
}

// Population in the top 10% of Fock levels of the polaron-frame blocks.
inline double tail_population(const BlockDensityMatrix& rho) {
    const int n = rho.dim();
    const int from = n - std::max(1, (n + 9) / 10);
    double s = 0.0;
    for (int j = from; j < n; ++j)
        s += (rho.rho0(j, j) + rho.rho1(j, j)).real();
    return s;
}

namespace detail {

inline void fill_row(SweepRow& row, const PointSolution& s, const PointOptions& opts, double tq_known,
                     bool have_tq) {
    const auto& c = s.config;
    row.n_cut = c.system.n_cut;
    row.residual = s.steady.residual;
    row.min_eigenvalue = s.steady.min_eigenvalue;
    row.warnings.insert(row.warnings.end(), s.steady.warnings.begin(), s.steady.warnings.end());
    row.thermo = thermo_report(c, s.steady.ness, s.lab, s.left, s.right);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (s.steady.degenerate) {
        // only dot-sector quantities are determined
        row.status = "degenerate";
        row.thermo.phonon_number = nan;
        row.thermo.zeta = nan;
        return;
    }
    if (opts.outputs & PhaseSpace) {
        const auto st = reduce_qmr(s.lab);
        TorotropyResult t;
        if (have_tq) {
            t.value = tq_known;
            t.alpha_c = {-c.system.lambda * s.lab.occupation(), 0.0};
            t.barycenter = barycenter(s.lab);
        } else {
            t = torotropy(s.lab, c.system.lambda, opts.torotropy);
        }
        row.torotropy = t.value;
        row.alpha_c = t.alpha_c;
        row.barycenter = t.barycenter;
        row.ergotropy = ergotropy(st, c.system.omega);
        if (row.thermo.current_R != 0.0)
            row.thermo.eta_converter = eta_converter(t.value, row.thermo.current_R, c.system.omega);
    }
}

} // namespace detail

// Solve, transform and evaluate the requested outputs. Library errors end up in the status column.
inline SweepRow run_point(const ModelConfig& config, const PointOptions& opts = {}) {
    SweepRow row;
    row.n_cut = config.system.n_cut;
    try {
        const bool decoupled = config.system.lambda == 0.0;
        if (opts.policy == NCutPolicy::Fixed || decoupled) {
            const auto s = solve_point(config, DegeneracyPolicy::GroundSector);
            detail::fill_row(row, s, opts, 0.0, false);
            return row;
        }
        ModelConfig c = config;
        c.system.n_cut = std::max(opts.adaptive_start, config.system.n_cut);
        std::optional<double> prev_tq;
        for (;;) {
            const auto s = solve_point(c, DegeneracyPolicy::GroundSector);
            const double tq = torotropy(s.lab, c.system.lambda, opts.torotropy).value;
            const double tail = tail_population(s.steady.ness);
            const bool settled =
                prev_tq && std::abs(tq - *prev_tq) <= opts.adaptive_drift * std::max(std::abs(tq), std::abs(*prev_tq));
            if (tail < opts.adaptive_tail && settled) {
                detail::fill_row(row, s, opts, tq, true);
                return row;
            }
            if (c.system.n_cut + opts.adaptive_step > opts.adaptive_cap) {
                detail::fill_row(row, s, opts, tq, true);
                row.warnings.push_back("adaptive n_cut reached the cap without converging");
                return row;
            }
            prev_tq = tq;
            c.system.n_cut += opts.adaptive_step;
        }
    } catch (const Error& e) {
        row.status = std::string("error: ") + e.what();
    }
    return row;
}

struct SweepSpec {
    Axis axis1;
    std::optional<Axis> axis2;
    ModelConfig base = presets::isothermal();
    PointOptions point;
    int workers{1};

    std::size_t size() const { return static_cast<std::size_t>(axis1.count) * (axis2 ? axis2->count : 1); }

    void validate() const {
        for (const Axis* a : {&axis1, axis2 ? &*axis2 : nullptr}) {
            if (!a)
                continue;
            if (a->count < 1)
                throw ConfigError("axis count must be >= 1");
            if (!(a->min <= a->max))
                throw ConfigError("axis min must not exceed max");
        }
        if (axis2 && axis2->param == axis1.param)
            throw ConfigError("sweep axes must be distinct parameters");
        if (workers < 1)
            throw ConfigError("workers must be >= 1");
        base.validate();
    }

    ModelConfig config_at(std::size_t index) const {
        const int n2 = axis2 ? axis2->count : 1;
        const int i1 = static_cast<int>(index / n2), i2 = static_cast<int>(index % n2);
        ModelConfig c = apply_axis(base, axis1.param, axis1.value(i1));
        if (axis2)
            c = apply_axis(c, axis2->param, axis2->value(i2));
        return c;
    }
};

inline Axis parse_axis(const std::string& text) {
    std::stringstream ss(text);
    std::string name, lo, hi;
    double count = 0;
    if (!(ss >> name >> lo >> hi >> count))
        throw ConfigError("axis must be '<param> <min> <max> <count>': '" + text + "'");
    Axis a;
    a.param = parse_axis_param(name);
    a.min = parse_quantity(lo);
    a.max = parse_quantity(hi);
    if (count != std::floor(count))
        throw ConfigError("axis count must be an integer");
    a.count = static_cast<int>(count);
    return a;
}

inline TorotropyOptions torotropy_from_tree(const pt::ptree& tree) {
    TorotropyOptions t;
    if (auto v = tree.get_optional<std::string>("torotropy.dr"))
        t.dr = parse_quantity(*v);
    if (auto v = tree.get_optional<std::string>("torotropy.angles")) {
        std::stringstream ss(*v);
        std::string item;
        while (std::getline(ss, item, ','))
            if (item.find_first_not_of(" \t") != std::string::npos)
                t.angles.push_back(parse_quantity(item));
    }
    return t;
}

inline PointOptions point_options_from_tree(const pt::ptree& tree) {
    PointOptions p;
    if (auto v = tree.get_optional<std::string>("sweep.outputs"))
        p.outputs = parse_outputs(*v);
    if (auto v = tree.get_optional<std::string>("sweep.n_cut_policy")) {
        if (*v == "fixed")
            p.policy = NCutPolicy::Fixed;
        else if (*v == "adaptive")
            p.policy = NCutPolicy::Adaptive;
        else
            throw ConfigError("n_cut_policy must be fixed or adaptive");
    }
    p.torotropy = torotropy_from_tree(tree);
    return p;
}

inline SweepSpec sweep_from_tree(const pt::ptree& tree) {
    SweepSpec s;
    s.base = model_from_tree(tree);
    const auto a1 = tree.get_optional<std::string>("sweep.axis1");
    if (!a1)
        throw ConfigError("sweep.axis1 is required");
    s.axis1 = parse_axis(*a1);
    if (auto a2 = tree.get_optional<std::string>("sweep.axis2"))
        s.axis2 = parse_axis(*a2);
    s.point = point_options_from_tree(tree);
    if (auto v = tree.get_optional<int>("sweep.workers"))
        s.workers = *v;
    s.validate();
    return s;
}

// ---- CSV rows ----

namespace detail {

inline std::string fmt(double x) {
    if (std::isnan(x))
        return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string sanitize(std::string s) {
    for (char& ch : s)
        if (ch == ',' || ch == '\n' || ch == '\r')
            ch = ';';
    return s;
}

} // namespace detail

inline std::vector<std::string> csv_columns(const SweepSpec& spec) {
    std::vector<std::string> cols{to_string(spec.axis1.param)};
    if (spec.axis2)
        cols.emplace_back(to_string(spec.axis2->param));
    const unsigned o = spec.point.outputs;
    if (o & Transport)
        cols.insert(cols.end(), {"occupation", "current_L", "current_R"});
    if (o & Thermo)
        cols.insert(cols.end(), {"heat_el_L", "heat_el_R", "heat_mec_L", "heat_mec_R", "power", "first_law_residual",
                                 "eta_heater"});
    if (o & PhaseSpace)
        cols.insert(cols.end(), {"phonon_number", "zeta", "torotropy", "ergotropy", "alpha_c_re", "alpha_c_im",
                                 "barycenter_re", "barycenter_im", "eta_converter"});
    if (o & ModeGroup)
        cols.emplace_back("mode");
    cols.insert(cols.end(), {"status", "n_cut", "residual", "min_eigenvalue"});
    return cols;
}

inline std::string csv_row(const SweepSpec& spec, const SweepRow& r) {
    using detail::fmt;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> v{fmt(r.axis1)};
    if (spec.axis2)
        v.push_back(fmt(r.axis2));
    const bool ok = r.status.rfind("error", 0) != 0;
    auto val = [&](double x) { return fmt(ok ? x : nan); };
    const auto& t = r.thermo;
    const unsigned o = spec.point.outputs;
    if (o & Transport)
        v.insert(v.end(), {val(t.occupation), val(t.current_L), val(t.current_R)});
    if (o & Thermo)
        v.insert(v.end(), {val(t.heat_el_L), val(t.heat_el_R), val(t.heat_mec_L), val(t.heat_mec_R), val(t.power),
                           val(t.first_law_residual), val(t.eta_heater.value_or(nan))});
    if (o & PhaseSpace)
        v.insert(v.end(), {val(t.phonon_number), val(t.zeta), val(r.torotropy), val(r.ergotropy),
                           val(r.alpha_c.real()), val(r.alpha_c.imag()), val(r.barycenter.real()),
                           val(r.barycenter.imag()), val(t.eta_converter.value_or(nan))});
    if (o & ModeGroup)
        v.emplace_back(ok ? to_string(t.mode) : "nan");
    v.insert(v.end(), {detail::sanitize(r.status), std::to_string(r.n_cut), fmt(r.residual), fmt(r.min_eigenvalue)});
    std::string line;
    for (std::size_t i = 0; i < v.size(); ++i)
        line += (i ? "," : "") + v[i];
    return line;
}

inline std::string sweep_header(const SweepSpec& spec) {
    std::ostringstream os;
    os << "# qdso sweep, version " << artifact_version << "\n";
    std::istringstream cfg(describe(spec.base));
    for (std::string line; std::getline(cfg, line);)
        os << "# " << line << "\n";
    auto axis = [](const Axis& a) {
        return std::string(to_string(a.param)) + " " + detail::fmt(a.min) + " " + detail::fmt(a.max) + " " +
               std::to_string(a.count);
    };
    os << "# axis1: " << axis(spec.axis1) << "\n";
    if (spec.axis2)
        os << "# axis2: " << axis(*spec.axis2) << "\n";
    os << "# n_cut_policy: " << (spec.point.policy == NCutPolicy::Fixed ? "fixed" : "adaptive") << "\n";
    os << "# torotropy_dr: " << detail::fmt(spec.point.torotropy.dr) << "\n";
    const auto cols = csv_columns(spec);
    for (std::size_t i = 0; i < cols.size(); ++i)
        os << (i ? "," : "") << cols[i];
    os << "\n";
    return os.str();
}

struct SweepSummary {
    std::size_t points{0};
    std::size_t failures{0};
    std::size_t resumed{0};
};

// Journal lines are "<index>\t<csv row>"; a truncated last line is ignored.
inline std::map<std::size_t, std::string> read_journal(const std::string& path) {
    std::map<std::size_t, std::string> done;
    std::ifstream is(path, std::ios::binary);
    if (!is)
        return done;
    std::string content((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    while (pos < content.size()) {
        const auto nl = content.find('\n', pos);
        if (nl == std::string::npos)
            break;
        const std::string line = content.substr(pos, nl - pos);
        pos = nl + 1;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            continue;
        try {
            done[std::stoull(line.substr(0, tab))] = line.substr(tab + 1);
        } catch (const std::exception&) {
        }
    }
    return done;
}

inline SweepSummary run_sweep(const SweepSpec& spec, const std::string& out_path, bool resume = false,
                              std::ostream* log = nullptr) {
    spec.validate();
    const std::string journal_path = out_path + ".journal";
    {
        std::ofstream probe(out_path, std::ios::app);
        if (!probe)
            throw Error("run_sweep: cannot write " + out_path);
    }
    std::map<std::size_t, std::string> done;
    if (resume)
        done = read_journal(journal_path);
    else
        std::filesystem::remove(journal_path);

    const std::size_t total = spec.size();
    std::vector<std::string> rows(total);
    std::vector<char> have(total, 0);
    SweepSummary summary;
    summary.points = total;
    for (auto& [i, line] : done)
        if (i < total) {
            rows[i] = line;
            have[i] = 1;
            ++summary.resumed;
        }

    std::ofstream journal(journal_path, std::ios::app | std::ios::binary);
    if (!journal)
        throw Error("run_sweep: cannot write journal " + journal_path);
    std::mutex mu;
    std::atomic<std::size_t> next{0};
    std::size_t completed = summary.resumed;
    const int n2 = spec.axis2 ? spec.axis2->count : 1;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= total)
                return;
            if (have[i])
                continue;
            SweepRow row = run_point(spec.config_at(i), spec.point);
            row.axis1 = spec.axis1.value(static_cast<int>(i / n2));
            if (spec.axis2)
                row.axis2 = spec.axis2->value(static_cast<int>(i % n2));
            std::string line = csv_row(spec, row);
            std::lock_guard<std::mutex> lock(mu);
            journal << i << '\t' << line << '\n';
            journal.flush();
            rows[i] = std::move(line);
            ++completed;
            if (log && (completed % 25 == 0 || completed == total))
                *log << "sweep: " << completed << "/" << total << " points\n";
        }
    };
    const int nw = std::max(1, std::min<int>(spec.workers, static_cast<int>(total)));
    std::vector<std::thread> pool;
    for (int w = 0; w < nw; ++w)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();
    journal.close();

    const auto cols = csv_columns(spec);
    const auto status_col = static_cast<std::size_t>(std::find(cols.begin(), cols.end(), "status") - cols.begin());
    for (const auto& line : rows) {
        std::stringstream ss(line);
        std::string cell;
        for (std::size_t k = 0; k <= status_col && std::getline(ss, cell, ','); ++k) {
        }
        if (cell.rfind("error", 0) == 0)
            ++summary.failures;
    }

    const std::string tmp = out_path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os)
            throw Error("run_sweep: cannot write " + tmp);
        os << sweep_header(spec);
        for (const auto& line : rows)
            os << line << '\n';
        if (!os)
            throw Error("run_sweep: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, out_path);
    std::filesystem::remove(journal_path);
    if (log)
        *log << "sweep: " << summary.failures << " failed points\n";
    return summary;
}

} // namespace qdso
