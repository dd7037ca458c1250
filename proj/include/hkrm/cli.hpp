#pragma once

// Subcommand bodies for the hkrm tool. Each takes parsed arguments plus the
// run manifest and returns its outputs, so they can be tested without a process.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hkrm/density.hpp"
#include "hkrm/errors.hpp"
#include "hkrm/flow.hpp"
#include "hkrm/intertwine.hpp"
#include "hkrm/moments.hpp"
#include "hkrm/simulate.hpp"
#include "hkrm/trace_poly.hpp"

namespace hkrm::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.1.0";

/// Everything needed to re-run a command. Wall time is omitted from CSV
/// headers so that same-seed reruns are byte-identical.
struct RunManifest {
    std::string subcommand;
    std::vector<std::pair<std::string, std::string>> flags;
    std::uint64_t seed = 0;
    std::string version = kToolVersion;
    std::optional<double> wall_time_s;

    json to_json() const {
        json f = json::object();
        for (const auto& [k, v] : flags) f[k] = v;
        json out{{"subcommand", subcommand}, {"flags", f}, {"seed", seed}, {"version", version}};
        if (wall_time_s) out["wall_time_s"] = *wall_time_s;
        return out;
    }

    std::string csv_comment() const {
        RunManifest copy = *this;
        copy.wall_time_s.reset();
        return "# manifest: " + copy.to_json().dump() + "\n";
    }
};

inline std::string fmt(double x) { return detail::format_double(x); }
inline json complex_json(cplx c) { return json::array({c.real(), c.imag()}); }

// ---------------------------------------------------------------------------

struct MomentsArgs {
    double t = 0.0;
    int max_n = 10;
    bool unsafe_precision = false;
};

inline json cmd_moments(const MomentsArgs& a, const RunManifest& m) {
    if (a.max_n < 0) throw InvalidParameter("--max-n must be nonnegative");
    if (a.max_n > kExactMomentMaxN && !a.unsafe_precision) {
        throw PrecisionError("--max-n above " + std::to_string(kExactMomentMaxN) +
                             " loses exactness; pass --unsafe-precision to proceed");
    }
    json moments = json::array();
    bool warned = false;
    for (int n = 0; n <= a.max_n; ++n) {
        const MomentValue v = nu_moment_checked(n, a.t);
        warned = warned || v.precision_warning;
        moments.push_back({{"n", n}, {"value", v.value}});
    }
    return {{"manifest", m.to_json()}, {"t", a.t}, {"moments", moments}, {"precision_warning", warned}};
}

// ---------------------------------------------------------------------------

struct FlowArgs {
    std::string poly;
    double u = 0.0;
    std::string N = "limit"; // integer or "limit"
    int degree_cap = kDefaultDegreeCap;
};

/// Parses --N: a positive integer or the sentinel "limit" (nullopt).
inline std::optional<int> parse_dimension(const std::string& text) {
    if (text == "limit") return std::nullopt;
    std::size_t used = 0;
    int n = 0;
    try {
        n = std::stoi(text, &used);
    } catch (const std::exception&) {
        throw ParseError("--N must be a positive integer or 'limit', got '" + text + "'");
    }
    if (used != text.size() || n < 1) throw ParseError("--N must be a positive integer or 'limit', got '" + text + "'");
    return n;
}

inline json cmd_flow(const FlowArgs& a, const RunManifest& m) {
    const TracePoly p = parse_trace_poly(a.poly);
    const std::optional<int> n = parse_dimension(a.N);
    const cplx value = n ? finite_N_expectation(p, a.u, *n, a.degree_cap) : limit_expectation(p, a.u, a.degree_cap);
    return {{"manifest", m.to_json()},
            {"poly", p.to_string()},
            {"u", a.u},
            {"N", n ? json(*n) : json("limit")},
            {"value", complex_json(value)},
            {"ill_conditioned", backward_flow_ill_conditioned(a.u, p.degree())}};
}

// ---------------------------------------------------------------------------

/// Observable text: [f:][zz:]<poly>. "f:" reads the polynomial as a Laurent test
/// function (v_k stands for z^k) integrated against the spectrum; "zz:" targets Z Z^*.
inline Observable parse_observable(const std::string& text) {
    std::string_view rest = text;
    bool test_function = false;
    auto target = Observable::Target::Matrix;
    if (rest.starts_with("f:")) {
        test_function = true;
        rest.remove_prefix(2);
    }
    if (rest.starts_with("zz:")) {
        target = Observable::Target::PositiveMap;
        rest.remove_prefix(3);
    }
    const TracePoly p = parse_trace_poly(rest);
    if (!test_function) return Observable::trace_poly(text, p, target);
    std::map<int, cplx> coeffs;
    for (const auto& [mono, c] : p.terms()) {
        const auto& f = mono.factors();
        if (f.empty()) {
            coeffs[0] += c;
        } else if (f.size() == 1 && f[0].second == 1) {
            coeffs[f[0].first] += c;
        } else {
            throw ParseError("test function '" + text + "' must be linear in the v_k");
        }
    }
    return Observable::test_function(text, TestFunction(std::move(coeffs)), target);
}

struct SimulateArgs {
    EnsembleConfig config;
    std::vector<std::string> observables;
    bool singular_values = false; // dump eigenvalues of Z Z^* instead of Z
    int threads = 1;
};

struct SimulateOutput {
    json summary;
    std::string csv;
};

inline SimulateOutput cmd_simulate(const SimulateArgs& a, const RunManifest& m) {
    const EnsembleConfig& cfg = a.config;
    validate(cfg);
    std::vector<Observable> obs;
    for (const auto& s : a.observables) obs.push_back(parse_observable(s));
    const SpectralKind kind = a.singular_values ? SpectralKind::PositiveEig
                              : cfg.group == Group::Unitary ? SpectralKind::CircleEig
                                                            : SpectralKind::ComplexEig;
    const auto paths = static_cast<std::size_t>(cfg.paths);
    std::vector<std::vector<cplx>> values(obs.size(), std::vector<cplx>(paths));
    std::vector<std::vector<cplx>> spectra(paths);
    for_each_path(cfg, a.threads, [&](std::uint64_t p, const CMatrix& z) {
        for (std::size_t k = 0; k < obs.size(); ++k) {
            values[k][static_cast<std::size_t>(p)] = evaluate_observable(obs[k], z, cfg, p);
        }
        spectra[static_cast<std::size_t>(p)] = spectrum(z, kind);
    });

    json config{{"group", group_name(cfg.group)}, {"N", cfg.N},         {"t", cfg.t},
                {"s", cfg.s},                     {"steps", cfg.steps}, {"paths", cfg.paths},
                {"seed", cfg.seed}};
    json list = json::array();
    for (std::size_t k = 0; k < obs.size(); ++k) {
        const ObservableSummary s = summarize(obs[k].name, values[k]);
        list.push_back({{"name", s.name}, {"mean", complex_json(s.mean)}, {"variance", s.variance},
                        {"stderr", s.std_error}});
    }
    SimulateOutput out;
    out.summary = {{"manifest", m.to_json()}, {"config", config}, {"observables", list}};

    std::ostringstream csv;
    csv << "# group=" << group_name(cfg.group) << ", N=" << cfg.N << ", t=" << fmt(cfg.t) << ", s=" << fmt(cfg.s)
        << ", seed=" << cfg.seed << "\n";
    csv << m.csv_comment();
    csv << "path,index,re,im\n";
    for (std::size_t p = 0; p < paths; ++p) {
        for (std::size_t i = 0; i < spectra[p].size(); ++i) {
            csv << p << ',' << i << ',' << fmt(spectra[p][i].real()) << ',' << fmt(spectra[p][i].imag()) << '\n';
        }
    }
    out.csv = csv.str();
    return out;
}

// ---------------------------------------------------------------------------

struct DensityArgs {
    std::string law = "unitary"; // unitary | positive
    double t = 1.0;              // for positive, |tau|
    int grid = 512;
};

inline std::string cmd_density(const DensityArgs& a, const RunManifest& m) {
    DensityGrid g;
    if (a.law == "unitary") {
        g = unitary_density_grid(a.t, a.grid);
    } else if (a.law == "positive") {
        if (!(a.t > 0.0)) throw InvalidParameter("--t must be positive (it is |tau|)");
        g = positive_density_grid(-a.t, a.grid);
    } else {
        throw InvalidParameter("--law must be 'unitary' or 'positive'");
    }
    std::ostringstream csv;
    csv << "# law=" << a.law << ", t=" << fmt(a.t) << "\n";
    csv << m.csv_comment();
    csv << "theta_or_x,density\n";
    for (std::size_t i = 0; i < g.points.size(); ++i) csv << fmt(g.points[i]) << ',' << fmt(g.values[i]) << '\n';
    return csv.str();
}

// ---------------------------------------------------------------------------

struct VarianceScanArgs {
    std::vector<int> Ns;
    Group group = Group::Unitary;
    double t = 1.0;
    double s = 0.0;
    std::string observable = "v1";
    int paths = 1000;
    std::optional<int> steps;
    std::uint64_t seed = 0;
    int threads = 1;
};

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidParameter("slope fit needs at least two points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

inline json cmd_variance_scan(const VarianceScanArgs& a, const RunManifest& m) {
    if (a.Ns.empty()) throw InvalidConfig("--Ns must list at least one N");
    const Observable obs = parse_observable(a.observable);
    const auto* poly = std::get_if<TracePoly>(&obs.what);
    const bool exact_available =
        a.group == Group::Unitary && poly != nullptr && obs.target == Observable::Target::Matrix;
    json rows = json::array();
    std::vector<double> ns, mc, exact;
    for (int N : a.Ns) {
        EnsembleConfig cfg{a.group, N, a.t, a.s, a.steps.value_or(default_steps(a.group, a.s, a.t)), a.paths, a.seed};
        const MCSummary r = mc_experiment(cfg, {obs}, a.threads);
        json row{{"N", N}, {"variance", r.observables[0].variance}};
        if (exact_available) {
            const double e = finite_N_covariance_unitary(*poly, *poly, a.t, N).real();
            row["exact_variance"] = e;
            exact.push_back(e);
        } else {
            row["exact_variance"] = nullptr;
        }
        ns.push_back(N);
        mc.push_back(r.observables[0].variance);
        rows.push_back(row);
    }
    json out{{"manifest", m.to_json()}, {"observable", a.observable}, {"rows", rows}};
    out["slope"] = ns.size() >= 2 ? json(loglog_slope(ns, mc)) : json(nullptr);
    out["exact_slope"] = exact_available && ns.size() >= 2 ? json(loglog_slope(ns, exact)) : json(nullptr);
    return out;
}

// ---------------------------------------------------------------------------

struct CheckIntertwineArgs {
    int N = 3;
    std::uint64_t seed = 0;
    double hstep = 1e-3;
    double tolerance = 1e-4;
};

inline std::vector<TracePoly> intertwine_test_polys() {
    const auto v = [](int k) { return TracePoly::v(k); };
    return {v(2), v(3), v(2) * v(3), v(1) * v(-1), v(-2) * v(1) * v(1)};
}

inline json cmd_check_intertwine(const CheckIntertwineArgs& a, const RunManifest& m) {
    const IntertwineReport r = check_intertwine(a.N, a.seed, a.hstep, intertwine_test_polys(), a.tolerance);
    json cases = json::array();
    for (const auto& c : r.cases) {
        cases.push_back({{"poly", c.poly},
                         {"finite_difference", complex_json(c.finite_difference)},
                         {"intertwined", complex_json(c.intertwined)},
                         {"relative_error", c.relative_error},
                         {"pass", c.pass}});
    }
    return {{"manifest", m.to_json()}, {"N", r.N}, {"hstep", r.hstep}, {"tolerance", r.tolerance},
            {"cases", cases},          {"pass", r.all_pass()}};
}

} // namespace hkrm::cli
