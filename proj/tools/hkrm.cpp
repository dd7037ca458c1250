// hkrm: heat-kernel random-matrix experiments from the command line.
//
// Exit codes: 0 success, 2 invalid input or violated precondition, 1 anything else.

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hkrm/cli.hpp"

namespace {

using hkrm::cli::json;
using hkrm::cli::RunManifest;

RunManifest manifest_for(const CLI::App& sub, std::uint64_t seed) {
    RunManifest m;
    m.subcommand = sub.get_name();
    m.seed = seed;
    for (const CLI::Option* opt : sub.get_options()) {
        if (opt == sub.get_help_ptr()) continue;
        const std::string name = opt->get_name();
        if (name.empty()) continue;
        std::string value;
        if (opt->count() > 0) {
            const auto& res = opt->results();
            for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
            if (opt->get_expected_min() == 0) value = "true";
        } else {
            value = opt->get_default_str();
            if (value.empty() && opt->get_expected_min() == 0) value = "false";
        }
        m.flags.emplace_back(name, value);
    }
    return m;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << text;
}

hkrm::Group parse_group(const std::string& g) {
    if (g == "unitary") return hkrm::Group::Unitary;
    if (g == "gl") return hkrm::Group::GeneralLinear;
    throw hkrm::InvalidParameter("--group must be 'unitary' or 'gl'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heat-kernel random matrix experiments: exact flows, limit laws and Monte Carlo"};
    app.require_subcommand(1);
    app.set_version_flag("--version", hkrm::cli::kToolVersion);

    hkrm::cli::MomentsArgs moments;
    auto* c_moments = app.add_subcommand("moments", "Moments nu_n(t) of the limit law, n = 0..max-n (JSON)");
    c_moments->add_option("--t", moments.t, "Time parameter (any real)")->required();
    c_moments->add_option("--max-n", moments.max_n, "Largest moment index")->capture_default_str();
    c_moments->add_flag("--unsafe-precision", moments.unsafe_precision, "Allow max-n above 30");

    hkrm::cli::FlowArgs flow;
    auto* c_flow = app.add_subcommand("flow", "Expectation (e^{-u(D + L/N^2)} P)(1) of a trace polynomial (JSON)");
    c_flow->add_option("--poly", flow.poly, "Trace polynomial, e.g. '3*v2*v-1 + (0,-1)*v1'")->required();
    c_flow->add_option("--u", flow.u, "Flow time: t on U_N, s-t for GL eigenvalues, -2t for Z Z^*")->required();
    c_flow->add_option("--N", flow.N, "Matrix size, or 'limit'")->capture_default_str();
    c_flow->add_option("--degree-cap", flow.degree_cap, "Largest admissible trace degree")->capture_default_str();

    hkrm::cli::SimulateArgs sim;
    std::string sim_group = "unitary", sim_out, sim_json, sim_spectrum = "eig";
    int sim_steps = 0;
    sim.observables = {"v1"};
    auto* c_sim = app.add_subcommand("simulate", "Monte Carlo on the heat-kernel ensemble (JSON summary, CSV spectra)");
    c_sim->add_option("--group", sim_group, "unitary | gl")->capture_default_str();
    c_sim->add_option("--N", sim.config.N, "Matrix size")->required();
    c_sim->add_option("--t", sim.config.t, "Time t")->capture_default_str();
    c_sim->add_option("--s", sim.config.s, "Parameter s (gl only, s > t/2)")->capture_default_str();
    c_sim->add_option("--steps", sim_steps, "Increments per path (default 100 per unit time)");
    c_sim->add_option("--paths", sim.config.paths, "Number of paths")->capture_default_str();
    c_sim->add_option("--seed", sim.config.seed, "Base seed")->capture_default_str();
    c_sim->add_option("--out", sim_out, "CSV file for spectra (path,index,re,im)");
    c_sim->add_option("--json", sim_json, "Write the JSON summary here instead of stdout");
    c_sim->add_option("--observables", sim.observables, "Observables: [f:][zz:]<poly>")->capture_default_str();
    c_sim->add_option("--spectrum", sim_spectrum, "eig (of Z) | sv (eigenvalues of Z Z^*)")->capture_default_str();
    c_sim->add_option("--threads", sim.threads, "Worker threads")->capture_default_str();

    hkrm::cli::DensityArgs dens;
    std::string dens_out;
    auto* c_dens = app.add_subcommand("density", "Density of the limit law on a grid (CSV)");
    c_dens->add_option("--law", dens.law, "unitary (circle, t > 0) | positive (half-line, tau = -t)")
        ->capture_default_str();
    c_dens->add_option("--t", dens.t, "Time; for the positive law this is |tau|")->capture_default_str();
    c_dens->add_option("--grid", dens.grid, "Number of grid points")->capture_default_str();
    c_dens->add_option("--out", dens_out, "CSV file (stdout if omitted)");

    hkrm::cli::VarianceScanArgs scan;
    std::string scan_group = "unitary";
    int scan_steps = 0;
    auto* c_scan = app.add_subcommand("variance-scan", "MC variance of an observable across N, with slope fit (JSON)");
    c_scan->add_option("--Ns", scan.Ns, "Matrix sizes")->delimiter(',');
    c_scan->add_option("--group", scan_group, "unitary | gl")->capture_default_str();
    c_scan->add_option("--t", scan.t, "Time t")->capture_default_str();
    c_scan->add_option("--s", scan.s, "Parameter s (gl only)")->capture_default_str();
    c_scan->add_option("--observable", scan.observable, "Observable: [f:][zz:]<poly>")->capture_default_str();
    c_scan->add_option("--paths", scan.paths, "Paths per N")->capture_default_str();
    c_scan->add_option("--steps", scan_steps, "Increments per path (default 100 per unit time)");
    c_scan->add_option("--seed", scan.seed, "Base seed")->capture_default_str();
    c_scan->add_option("--threads", scan.threads, "Worker threads")->capture_default_str();

    hkrm::cli::CheckIntertwineArgs chk;
    auto* c_chk = app.add_subcommand("check-intertwine",
                                     "Finite-difference Laplacian vs -2(D + L/N^2) at a Haar unitary (JSON)");
    c_chk->add_option("--N", chk.N, "Matrix size")->capture_default_str();
    c_chk->add_option("--seed", chk.seed, "Seed for the Haar point")->capture_default_str();
    c_chk->add_option("--hstep", chk.hstep, "Finite-difference step")->capture_default_str();
    c_chk->add_option("--tolerance", chk.tolerance, "Relative error tolerance")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
    auto emit_json = [&](json j, const std::string& path = {}) {
        j["manifest"]["wall_time_s"] = elapsed();
        write_text(path, j.dump(2) + "\n");
    };
    auto log_manifest = [&](RunManifest m) {
        m.wall_time_s = elapsed();
        std::cerr << m.to_json().dump() << "\n";
    };

    try {
        if (c_moments->parsed()) {
            emit_json(hkrm::cli::cmd_moments(moments, manifest_for(*c_moments, 0)));
        } else if (c_flow->parsed()) {
            emit_json(hkrm::cli::cmd_flow(flow, manifest_for(*c_flow, 0)));
        } else if (c_sim->parsed()) {
            sim.config.group = parse_group(sim_group);
            sim.config.steps = sim_steps > 0 ? sim_steps : hkrm::default_steps(sim.config.group, sim.config.s, sim.config.t);
            if (sim_spectrum != "eig" && sim_spectrum != "sv") throw hkrm::InvalidParameter("--spectrum must be eig or sv");
            sim.singular_values = sim_spectrum == "sv";
            const RunManifest m = manifest_for(*c_sim, sim.config.seed);
            hkrm::cli::SimulateOutput out = hkrm::cli::cmd_simulate(sim, m);
            if (!sim_out.empty()) write_text(sim_out, out.csv);
            emit_json(out.summary, sim_json);
        } else if (c_dens->parsed()) {
            const RunManifest m = manifest_for(*c_dens, 0);
            write_text(dens_out, hkrm::cli::cmd_density(dens, m));
            log_manifest(m);
        } else if (c_scan->parsed()) {
            scan.group = parse_group(scan_group);
            if (scan_steps > 0) scan.steps = scan_steps;
            emit_json(hkrm::cli::cmd_variance_scan(scan, manifest_for(*c_scan, scan.seed)));
        } else if (c_chk->parsed()) {
            json report = hkrm::cli::cmd_check_intertwine(chk, manifest_for(*c_chk, chk.seed));
            const bool pass = report["pass"].get<bool>();
            emit_json(std::move(report));
            return pass ? 0 : 1;
        }
    } catch (const hkrm::PreconditionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
