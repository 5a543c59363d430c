#pragma once

// Command-line front end. Exit status: 0 ok, 1 usage or domain error, 2 convergence failure,
// 3 invariant violation found by a check.

#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "npc/barycenter.hpp"
#include "npc/corlette.hpp"
#include "npc/domain.hpp"
#include "npc/errors.hpp"
#include "npc/foliation.hpp"
#include "npc/harmonic_solver.hpp"
#include "npc/json_io.hpp"
#include "npc/smooth_checks.hpp"
#include "npc/target_spaces.hpp"

namespace npc {

enum ExitStatus { kExitOk = 0, kExitUsage = 1, kExitConvergence = 2, kExitInvariant = 3 };

struct RunConfig {
    std::string subcommand;
    // inputs
    std::string domain;
    std::string boundary;
    std::string rep;
    std::string cloud;
    std::string target;
    // outputs; an empty report path means stdout
    std::string report;
    std::string trace;
    std::string out;
    // numerics
    double tol = 1e-8;
    int max_sweeps = 100000;
    int max_iter = 10000;
    std::string order = "sequential";
    unsigned long seed = 1;
    int threads = 1;
    // verify
    std::string identity;
    std::string chart;
    int points = 100;
    double step = 1e-2;
    double check_tol = -1.0; // negative: per-identity default
    // corlette
    int n = 2;
    int cycle = 64;
    int levels = 3;
    std::string generator;
    // foliation
    int k = 1;
    double window = 1.0;
    int res = 65;
    // check-npc
    int samples = 10000;
    std::string config; // consumed before parsing
};

namespace cli_detail {

inline std::string fmt(double x) { return detail::format_double(x); }

inline void write_text(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw UsageError("cannot write " + path);
    f << text;
}

inline void emit_report(const RunConfig& c, const Json& j, std::ostream& out)
{
    std::string text = j.dump(2) + "\n";
    if (c.report.empty())
        out << text;
    else
        write_text(c.report, text);
}

inline std::string trace_csv(const SolveTrace& t)
{
    std::string s = "sweep,energy,max_disp\n";
    for (const auto& r : t.records)
        s += std::to_string(r.sweep) + "," + fmt(r.energy) + "," + fmt(r.max_disp) + "\n";
    return s;
}

inline DomainGraph load_graph(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw UsageError("cannot open " + path);
    return read_graph(in);
}

inline SolveConfig solve_config(const RunConfig& c)
{
    SolveConfig cfg;
    cfg.tol = c.tol;
    cfg.max_sweeps = c.max_sweeps;
    cfg.order = parse_sweep_order(c.order);
    cfg.seed = c.seed;
    cfg.threads = c.threads;
    cfg.validate();
    return cfg;
}

inline int run_solve(const RunConfig& c, std::ostream& out)
{
    if (c.domain.empty())
        throw UsageError("solve needs --domain");
    if (c.boundary.empty() == c.rep.empty())
        throw UsageError("solve needs exactly one of --boundary and --rep");
    DomainGraph d = load_graph(c.domain);
    SolveConfig cfg = solve_config(c);
    std::optional<Representation> rep;
    NpcSpace space;
    SolveResult res;
    try {
        if (!c.boundary.empty()) {
            auto b = boundary_from_json(detail::read_json_file(c.boundary));
            space = b.space;
            if (!c.target.empty() && !(NpcSpace::parse(c.target) == space))
                throw UsageError("--target does not match the boundary data space " + space.spec());
            res = solve_dirichlet(d, b.values, dirichlet_initial_map(d, space, b.values, c.seed), cfg);
        } else {
            rep.emplace(load_representation(c.rep, c.n));
            space = rep->space();
            if (!c.target.empty() && !(NpcSpace::parse(c.target) == space))
                throw UsageError("--target does not match the representation space " + space.spec());
            res = solve_equivariant(d, *rep, equivariant_initial_map(d, *rep), cfg);
        }
    } catch (const SolveError& e) {
        if (!c.trace.empty())
            write_text(c.trace, trace_csv(e.trace()));
        throw;
    }
    if (!c.trace.empty())
        write_text(c.trace, trace_csv(res.trace));
    Json j = new_report("solve");
    j["target"] = space.spec();
    j["mode"] = c.boundary.empty() ? "equivariant" : "dirichlet";
    j["vertices"] = d.vertex_count();
    j["status"] = res.trace.status;
    j["sweeps"] = res.trace.records.back().sweep;
    j["energy"] = energy(d, res.map, rep ? &*rep : nullptr);
    j["monotone"] = res.trace.monotone;
    j["tol"] = c.tol;
    Json vals = Json::array();
    for (const auto& p : res.map.values)
        vals.push_back(payload_json(space, p));
    j["values"] = vals;
    emit_report(c, j, out);
    return kExitOk;
}

inline int run_karcher(const RunConfig& c, std::ostream& out)
{
    if (c.cloud.empty())
        throw UsageError("karcher needs --cloud");
    auto cd = cloud_from_json(detail::read_json_file(c.cloud));
    KarcherOptions opt;
    opt.tol = c.tol;
    opt.max_iter = c.max_iter;
    auto r = karcher_mean(cd.space, cd.cloud, opt);
    Json j = new_report("karcher");
    j["target"] = cd.space.spec();
    j["points"] = cd.cloud.points.size();
    j["mean"] = point_json(cd.space, r.mean);
    j["displacement"] = r.displacement;
    j["iterations"] = r.iterations;
    emit_report(c, j, out);
    return kExitOk;
}

inline Json negativity_json(const NegativityReport& r)
{
    Json j;
    j["samples"] = r.samples;
    j["violations"] = r.violations;
    j["strictly_negative"] = r.strictly_negative;
    j["worst"] = r.worst;
    j["best"] = r.best;
    j["max_imag"] = r.max_imag;
    return j;
}

inline void accumulate(NegativityReport& acc, const NegativityReport& r)
{
    acc.samples += r.samples;
    acc.violations += r.violations;
    acc.strictly_negative += r.strictly_negative;
    acc.worst = std::max(acc.worst, r.worst);
    acc.best = std::min(acc.best, r.best);
    acc.max_imag = std::max(acc.max_imag, r.max_imag);
}

inline int run_verify(const RunConfig& c, std::ostream& out)
{
    if (c.points < 1)
        throw UsageError("--points must be positive");
    if (!(c.step > 0.0))
        throw UsageError("--step must be positive");
    std::mt19937_64 rng(c.seed);
    Json j = new_report("verify");
    j["identity"] = c.identity;
    j["chart"] = c.chart;
    j["points"] = c.points;
    bool pass = true;
    auto tol_or = [&](double def) { return c.check_tol >= 0.0 ? c.check_tol : def; };

    if (c.identity == "hermitian-neg" || c.identity == "strong-neg") {
        const int block = 100;
        NegativityReport acc;
        acc.worst = -std::numeric_limits<double>::infinity();
        acc.best = std::numeric_limits<double>::infinity();
        for (int done = 0, b = 0; done < c.points; done += block, ++b) {
            int m = std::min(block, c.points - done);
            std::uint64_t s = c.seed * 1000003ULL + static_cast<std::uint64_t>(b);
            if (c.identity == "hermitian-neg") {
                auto t = named_target(c.chart);
                accumulate(acc, hermitian_negativity_test(t.geometry.curvature(t.sample(rng)), m, s));
            } else {
                auto t = named_kahler_target(c.chart);
                accumulate(acc, strong_negativity_test(kahler_curvature_1d(t.metric, t.sample(rng)), m, s));
            }
        }
        j["result"] = negativity_json(acc);
        pass = acc.violations == 0;
    } else {
        auto spec = named_chart(c.chart);
        double worst = 0.0;
        Json extra;
        double tol = 0.0;
        bool order_ok = false; // weitzenbock: finite-difference order >= 1.8 also passes
        if (c.identity == "tension") {
            tol = tol_or(1e-6);
            for (int i = 0; i < c.points; ++i) {
                Vec x = spec.sample(rng);
                worst = std::max(worst, target_norm(spec.metrics, spec.map(x), tension_field(spec.map, spec.metrics, x)));
            }
        } else if (c.identity == "weitzenbock") {
            tol = tol_or(1e-6);
            Vec first;
            for (int i = 0; i < c.points; ++i) {
                Vec x = spec.sample(rng);
                if (i == 0)
                    first = x;
                auto r = weitzenbock_residual(spec.map, spec.metrics, x, c.step);
                worst = std::max(worst, std::abs(r.residual) / std::max(1.0, std::abs(r.lhs)));
            }
            auto st = weitzenbock_convergence(spec.map, spec.metrics, first, c.step, 3);
            extra["steps"] = st.steps;
            extra["residuals"] = st.residuals;
            Json orders = Json::array();
            for (double o : st.orders)
                orders.push_back(std::isfinite(o) ? Json(o) : Json(nullptr));
            extra["orders"] = orders;
            double min_order = std::numeric_limits<double>::infinity();
            for (double o : st.orders)
                if (std::isfinite(o))
                    min_order = std::min(min_order, o);
            if (std::isfinite(min_order))
                extra["min_order"] = min_order;
            order_ok = min_order >= 1.8;
        } else if (c.identity == "pluriharmonic") {
            tol = tol_or(1e-6);
            for (int i = 0; i < c.points; ++i) {
                Vec x = spec.sample(rng);
                auto t = pluriharmonic_tensor(spec.map, spec.metrics, x);
                worst = std::max(worst, std::sqrt(std::max(0.0, pluriharmonic_norm2(t, spec.metrics.target.metric(spec.map(x))))));
            }
        } else if (c.identity == "sampson") {
            tol = tol_or(1e-4);
            for (int i = 0; i < c.points; ++i)
                worst = std::max(worst, std::abs(sampson_identity_residual(spec.map, spec.metrics, spec.sample(rng), c.step).residual));
        } else {
            throw UsageError("unknown identity: " + c.identity);
        }
        j[c.identity == "weitzenbock" ? "max_relative_residual" : "max_residual"] = worst;
        j["tolerance"] = tol;
        if (!extra.is_null())
            j["convergence"] = extra;
        pass = worst <= tol || order_ok;
    }
    j["pass"] = pass;
    emit_report(c, j, out);
    return pass ? kExitOk : kExitInvariant;
}

inline int run_corlette(const RunConfig& c, std::ostream& out)
{
    if (c.rep.empty())
        throw UsageError("corlette needs --rep");
    if (c.levels < 1 || c.cycle < 3)
        throw UsageError("corlette needs --levels >= 1 and --cycle >= 3");
    auto rep = load_representation(c.rep, c.n);
    std::string gen = c.generator.empty() ? rep.generators().begin()->first : c.generator;
    std::vector<int> sizes;
    for (int l = c.levels - 1; l >= 0; --l) {
        int n = c.cycle >> l;
        if (n < 3)
            throw UsageError("--cycle is too small for the requested number of levels");
        sizes.push_back(n);
    }
    SolveConfig cfg = solve_config(c);
    auto st = corlette_refinement(rep, gen, sizes, cfg);
    Json j = new_report("corlette");
    j["target"] = rep.space().spec();
    j["generator"] = gen;
    j["translation_length"] = spd_translation_length(std::get<LinearAction>(rep.generator(gen)).g);
    Json lv = Json::array();
    for (const auto& l : st.levels) {
        Json e;
        e["cycle"] = l.n;
        e["energy"] = l.energy;
        e["expected_energy"] = l.expected_energy;
        e["sweeps"] = l.sweeps;
        e["tension_residual"] = l.residual.tension_residual;
        e["divergence_norm"] = l.residual.divergence_norm;
        e["identification"] = l.residual.identification;
        e["trace"] = l.residual.trace;
        e["selfadjoint"] = l.residual.selfadjoint;
        lv.push_back(e);
    }
    j["levels"] = lv;
    j["energy"] = st.levels.back().energy;
    j["tension_orders"] = st.tension_orders;
    j["divergence_orders"] = st.divergence_orders;
    emit_report(c, j, out);
    return kExitOk;
}

inline int run_foliation(const RunConfig& c, std::ostream& out)
{
    FoliationSpec s;
    s.k = c.k;
    s.half_width = c.window;
    s.resolution = c.res;
    s.seed = static_cast<unsigned>(c.seed);
    s.validate();
    auto g = sample_foliation(s);
    if (!c.out.empty()) {
        std::string csv = "x,y,ray,radius\n";
        for (int v = 0; v < g.graph.vertex_count(); ++v) {
            const auto& p = std::get<PodPoint>(g.map.values[v]);
            csv += fmt(g.points[v].real()) + "," + fmt(g.points[v].imag()) + "," + std::to_string(p.ray) + "," +
                   fmt(p.radius) + "\n";
        }
        write_text(c.out, csv);
    }
    auto h = tree_harmonicity_residual(s);
    auto locus = singular_locus(g);
    Json j = new_report("foliation");
    j["k"] = c.k;
    j["arms"] = s.arms();
    j["window"] = c.window;
    j["resolution"] = c.res;
    j["step"] = g.step;
    j["harmonicity_residual"] = h.residual;
    j["measured_vertices"] = h.vertices;
    j["singular_vertices"] = locus.size();
    j["hausdorff_distance"] = locus_hausdorff_distance(s, g, locus);
    emit_report(c, j, out);
    return kExitOk;
}

inline int run_check_npc(const RunConfig& c, std::ostream& out)
{
    std::vector<std::string> specs;
    if (c.target.empty() || c.target == "all")
        specs = {"euc:2", "hyp", "spd:2", "spd:3:c", "pod:3"};
    else
        specs = {c.target};
    if (c.samples < 1)
        throw UsageError("--samples must be positive");
    Json j = new_report("check-npc");
    j["samples"] = c.samples;
    Json res = Json::array();
    bool pass = true;
    for (const auto& sp : specs) {
        auto s = NpcSpace::parse(sp);
        auto r = npc_suite(s, static_cast<std::size_t>(c.samples), c.seed);
        Json e;
        e["target"] = s.spec();
        e["min_triangle"] = r.min_triangle;
        e["min_menelaus"] = r.min_menelaus;
        e["min_agamemnon"] = r.min_agamemnon;
        bool ok = std::min({r.min_triangle, r.min_menelaus, r.min_agamemnon}) >= -c.tol;
        e["pass"] = ok;
        pass = pass && ok;
        res.push_back(e);
    }
    j["targets"] = res;
    j["tolerance"] = c.tol;
    j["pass"] = pass;
    emit_report(c, j, out);
    return pass ? kExitOk : kExitInvariant;
}

/// Reads KEY=VALUE lines; blank lines and lines starting with '#' are skipped.
inline std::vector<std::string> config_tokens(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw UsageError("cannot open config file " + path);
    std::vector<std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto trim = [](std::string s) {
            auto a = s.find_first_not_of(" \t\r");
            auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty() || line[0] == '#')
            continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty())
            throw UsageError(path + ":" + std::to_string(lineno) + ": empty key");
        std::replace(key.begin(), key.end(), '_', '-');
        out.push_back("--" + key + "=" + value);
    }
    return out;
}

} // namespace cli_detail

inline int run(const RunConfig& c, std::ostream& out)
{
    using namespace cli_detail;
    if (c.threads < 1)
        throw UsageError("--threads must be >= 1");
    if (c.subcommand == "solve")
        return run_solve(c, out);
    if (c.subcommand == "karcher")
        return run_karcher(c, out);
    if (c.subcommand == "verify")
        return run_verify(c, out);
    if (c.subcommand == "corlette")
        return run_corlette(c, out);
    if (c.subcommand == "foliation")
        return run_foliation(c, out);
    if (c.subcommand == "check-npc")
        return run_check_npc(c, out);
    throw UsageError("unknown subcommand: " + c.subcommand);
}

/// args excludes the program name. A `--config FILE` anywhere after the subcommand is expanded in place
/// of the subcommand's first argument, so explicit flags override it.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err)
{
    RunConfig c;
    CLI::App app{"Harmonic maps into nonpositively curved targets"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    auto common = [&](CLI::App* s) {
        s->add_option("--report", c.report, "JSON report path (default: stdout)");
        s->add_option("--seed", c.seed, "random seed")->capture_default_str();
        s->add_option("--threads", c.threads, "worker threads")->capture_default_str();
        s->add_option("--config", c.config, "key=value config file; explicit flags win");
    };
    auto* solve = app.add_subcommand("solve", "relax a discrete harmonic map");
    solve->add_option("--domain", c.domain, "npcgraph v1 file")->required();
    solve->add_option("--boundary", c.boundary, "boundary JSON (Dirichlet problem)");
    solve->add_option("--rep", c.rep, "representation JSON or inline NAME=diag(...) (equivariant problem)");
    solve->add_option("--n", c.n, "matrix size for an inline representation")->capture_default_str();
    solve->add_option("--target", c.target, "target spec, checked against the input data");
    solve->add_option("--tol", c.tol, "max per-sweep displacement")->capture_default_str();
    solve->add_option("--max-sweeps", c.max_sweeps, "sweep budget")->capture_default_str();
    solve->add_option("--order", c.order, "sequential | red-black")->capture_default_str();
    solve->add_option("--trace", c.trace, "CSV trace path (sweep,energy,max_disp)");
    common(solve);

    auto* karcher = app.add_subcommand("karcher", "weighted Karcher mean of a point cloud");
    karcher->add_option("--cloud", c.cloud, "cloud JSON")->required();
    karcher->add_option("--tol", c.tol, "gradient tolerance")->capture_default_str();
    karcher->add_option("--max-iter", c.max_iter, "iteration budget")->capture_default_str();
    common(karcher);

    auto* verify = app.add_subcommand("verify", "pointwise differential-geometric identities");
    verify->add_option("--identity", c.identity, "tension | weitzenbock | pluriharmonic | sampson | hermitian-neg | strong-neg")
        ->required()
        ->check(CLI::IsMember({"tension", "weitzenbock", "pluriharmonic", "sampson", "hermitian-neg", "strong-neg"}));
    verify->add_option("--chart", c.chart, "chart, target or Kahler target name")->required();
    verify->add_option("--points", c.points, "sample points (draws for the negativity tests)")->capture_default_str();
    verify->add_option("--step", c.step, "finite-difference step")->capture_default_str();
    verify->add_option("--tol", c.check_tol, "pass threshold (default depends on the identity)");
    common(verify);

    auto* corl = app.add_subcommand("corlette", "harmonic metric on a twisted cycle and its flat-bundle residuals");
    corl->add_option("--rep", c.rep, "representation JSON or inline NAME=diag(...)")->required();
    corl->add_option("--n", c.n, "matrix size for an inline representation")->capture_default_str();
    corl->add_option("--cycle", c.cycle, "finest cycle length")->capture_default_str();
    corl->add_option("--levels", c.levels, "refinement levels, halving the cycle length")->capture_default_str();
    corl->add_option("--generator", c.generator, "generator twisting the cycle (default: first)");
    corl->add_option("--tol", c.tol, "solver tolerance")->capture_default_str();
    corl->add_option("--max-sweeps", c.max_sweeps, "sweep budget")->capture_default_str();
    common(corl);

    auto* fol = app.add_subcommand("foliation", "projection of C to the leaf-space pod of z^k dz^2");
    fol->add_option("--k", c.k, "order of the differential")->capture_default_str();
    fol->add_option("--window", c.window, "half-width of the square window around 0")->capture_default_str();
    fol->add_option("--res", c.res, "grid points per side")->capture_default_str();
    fol->add_option("--out", c.out, "CSV of samples (x,y,ray,radius)");
    common(fol);

    auto* chk = app.add_subcommand("check-npc", "random comparison-inequality suites");
    chk->add_option("--target", c.target, "target spec or 'all'")->capture_default_str();
    chk->add_option("--samples", c.samples, "random instances per inequality")->capture_default_str();
    chk->add_option("--tol", c.tol, "allowed negative residual")->capture_default_str();
    common(chk);

    // Expand --config after the subcommand token.
    try {
        std::size_t sub = args.size();
        for (std::size_t i = 0; i < args.size(); ++i)
            if (!args[i].starts_with("-")) {
                sub = i;
                break;
            }
        std::vector<std::string> cfg;
        for (std::size_t i = sub; i < args.size(); ++i) {
            std::string path;
            if (args[i] == "--config") {
                if (i + 1 >= args.size())
                    throw UsageError("--config needs a file");
                path = args[i + 1];
                args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
                --i;
            } else if (args[i].starts_with("--config=")) {
                path = args[i].substr(9);
                args.erase(args.begin() + static_cast<long>(i));
                --i;
            } else {
                continue;
            }
            auto t = cli_detail::config_tokens(path);
            cfg.insert(cfg.end(), t.begin(), t.end());
        }
        if (sub < args.size())
            args.insert(args.begin() + static_cast<long>(sub) + 1, cfg.begin(), cfg.end());
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    c.subcommand = app.get_subcommands().front()->get_name();

    try {
        return run(c, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const UnsupportedError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConvergenceError& e) {
        err << "convergence failure: " << e.what() << "\n";
        return kExitConvergence;
    } catch (const InvariantError& e) {
        err << "invariant violated: " << e.what() << "\n";
        return kExitInvariant;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

} // namespace npc
