#include "metaepi/commands.hpp"

#include "metaepi/dynamics.hpp"
#include "metaepi/equilibria.hpp"
#include "metaepi/verification.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

namespace metaepi {

using nlohmann::json;

std::string format_number(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

json state_json(const State& x)
{
    return {{"S1", x.s1}, {"I1", x.i1}, {"S2", x.s2}, {"I2", x.i2}};
}

json complex_json(std::complex<double> z)
{
    return json::array({z.real(), z.imag()});
}

json conditions_json(const std::vector<Condition>& cs)
{
    json a = json::array();
    for (const auto& c : cs) {
        a.push_back({{"name", c.name},
                     {"lhs", c.lhs},
                     {"relation", std::string(to_string(c.relation))},
                     {"rhs", c.rhs},
                     {"tolerance", c.tolerance},
                     {"holds", c.holds}});
    }
    return a;
}

json feasibility_json(const FeasibilityReport& f)
{
    json j{{"feasible", f.feasible}, {"conditions", conditions_json(f.conditions)}, {"notes", f.notes}};
    if (f.ell) j["ell"] = *f.ell;
    if (f.h) j["h"] = *f.h;
    if (f.discriminant) j["discriminant"] = *f.discriminant;
    return j;
}

json spectrum_json(const EigenSpectrum& s)
{
    json values = json::array();
    for (const auto& v : s.values) {
        values.push_back(complex_json(v));
    }
    return {{"eigenvalues", values},
            {"max_real_part", s.max_real_part},
            {"has_complex_pair", s.has_complex_pair},
            {"max_residual", s.max_residual}};
}

json indicators_json(const CoexIndicators& ind)
{
    return {{"a1", ind.a1},
            {"a0", ind.a0},
            {"k", ind.k},
            {"h", ind.h},
            {"a1_printed", ind.a1_printed},
            {"a0_printed", ind.a0_printed},
            {"a1_matches_printed", ind.a1_matches_printed},
            {"a0_matches_printed", ind.a0_matches_printed},
            {"k_block", ind.k_block},
            {"h_block", ind.h_block},
            {"lambda34", json::array({complex_json(ind.lambda34[0]), complex_json(ind.lambda34[1])})},
            {"reconstruction_error", ind.reconstruction_error}};
}

json stability_json(const StabilityReport& r)
{
    json j{{"spectrum", spectrum_json(r.spectrum)},
           {"verdict", std::string(to_string(r.verdict))},
           {"marginal_band", r.band},
           {"criterion", r.criterion},
           {"criterion_complete", r.criterion_complete},
           {"analytic_checks", conditions_json(r.analytic_checks)},
           {"agreement", r.agreement},
           {"notes", r.notes}};
    j["analytic_stable"] = r.analytic_stable ? json(*r.analytic_stable) : json(nullptr);
    json tr = json::array();
    for (const auto& t : r.transcription) {
        tr.push_back({{"name", t.name}, {"printed", t.printed}, {"derived", t.derived}, {"matches", t.matches}});
    }
    j["transcription_checks"] = tr;
    json ex = json::array();
    for (const auto& e : r.explicit_eigenvalues) {
        ex.push_back({{"name", e.name}, {"value", complex_json(e.value)}, {"present", e.present}});
    }
    j["explicit_eigenvalues"] = ex;
    if (r.cubic) {
        j["cubic"] = {{"c2", (*r.cubic)[0]}, {"c1", (*r.cubic)[1]}, {"c0", (*r.cubic)[2]}};
    }
    if (r.indicators) {
        j["indicators"] = indicators_json(*r.indicators);
    }
    if (r.hopf) {
        j["hopf"] = {{"set1", r.hopf->set1},
                     {"set2", r.hopf->set2},
                     {"set1_conditions", conditions_json(r.hopf->set1_conditions)},
                     {"set2_conditions", conditions_json(r.hopf->set2_conditions)},
                     {"set2_consistent_purely_imaginary", r.hopf->set2_consistent}};
    }
    return j;
}

json equilibrium_json(const Equilibrium& e, const Model& model)
{
    json j{{"identity", std::string(to_string(e.identity))},
           {"point", state_json(e.point)},
           {"feasible", e.feasible},
           {"provenance", std::string(to_string(e.provenance))},
           {"residual", e.residual},
           {"coincides_with_E1", e.coincides_with_e1}};
    if (e.feasible && e.residual < 1e-9 && e.point.vec().minCoeff() >= 0) {
        j["stability"] = stability_json(classify(e, model));
    }
    else {
        j["stability"] = nullptr;
    }
    return j;
}

json general_conditions_json(const GeneralConditionReport& g)
{
    json pairings = json::array();
    for (const auto& p : g.pairings) {
        pairings.push_back({{"name", p.name}, {"holds", p.holds}});
    }
    json j{{"diagnostics", g.diagnostics},
           {"first_set", conditions_json(g.first_set)},
           {"second_set", conditions_json(g.second_set)},
           {"interval_a", conditions_json(g.interval_a)},
           {"interval_b", conditions_json(g.interval_b)},
           {"pairings", pairings}};
    j["printed_S1"] = g.printed_s1 ? json(*g.printed_s1) : json(nullptr);
    j["printed_S2"] = g.printed_s2 ? json(*g.printed_s2) : json(nullptr);
    return j;
}

json header(const ScenarioConfig& cfg, const char* command)
{
    return {{"tool", {{"name", kToolName}, {"version", kToolVersion}}},
            {"command", command},
            {"config_hash", config_hash(cfg)},
            {"config", to_json(cfg)}};
}

void write_report(const std::filesystem::path& out_dir, const json& report)
{
    std::ofstream out(out_dir / "report.json");
    out << report.dump(2) << '\n';
}

std::filesystem::path prepare(const std::filesystem::path& out_dir)
{
    std::filesystem::create_directories(out_dir);
    return out_dir;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj)
{
    std::ofstream out(path);
    out << "t,S1,I1,S2,I2\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const auto& x = traj.states[i];
        out << format_number(traj.times[i]) << ',' << format_number(x.s1) << ',' << format_number(x.i1) << ','
            << format_number(x.s2) << ',' << format_number(x.i2) << '\n';
    }
}

json solver_json(const SolverStats& s)
{
    return {{"accepted_steps", s.accepted},
            {"rejected_steps", s.rejected},
            {"negativity_rejections", s.negativity_rejections},
            {"final_step", s.last_step}};
}

json oscillation_json(const OscillationReport& r)
{
    json comps = json::array();
    const char* names[] = {"S1", "I1", "S2", "I2"};
    for (int c = 0; c < 4; ++c) {
        const auto& k = r.components[c];
        comps.push_back({{"component", names[c]},
                         {"peaks", k.peaks},
                         {"period", k.period},
                         {"peak_slope", k.slope},
                         {"trend", std::string(to_string(k.trend))},
                         {"oscillating", k.oscillating}});
    }
    return {{"oscillating", r.oscillating}, {"period", r.period}, {"components", comps}, {"diagnostic", r.diagnostic}};
}

} // namespace

json equilibria_json(const Model& model, const ScenarioConfig& cfg)
{
    const auto catalog = closed_form_equilibria(model);
    json closed        = json::array();
    for (const auto& entry : catalog.entries) {
        json j           = equilibrium_json(entry.equilibrium, model);
        j["feasibility"] = feasibility_json(entry.feasibility);
        closed.push_back(j);
    }
    json complex = json::array();
    for (const auto& b : catalog.complex_branches) {
        complex.push_back({{"pair", b.pair}, {"feasibility", feasibility_json(b.report)}});
    }

    const auto seeds  = seed_grid(cfg.seed_grid);
    const auto search = solve_coexistence_numeric(model, seeds);
    json roots        = json::array();
    for (const auto& r : search.roots) {
        json j = equilibrium_json(r, model);
        if (model.variant() == Variant::General && r.identity == EquilibriumId::CoexistenceNumeric) {
            j["necessary_conditions"] = general_conditions_json(general_coexistence_conditions(r.point, model));
        }
        roots.push_back(j);
    }
    int singular = 0;
    for (const auto& f : search.failures) {
        singular += f.kind == SeedFailureKind::SingularJacobian ? 1 : 0;
    }
    return {{"closed_form", closed},
            {"complex_branches", complex},
            {"numeric_search",
             {{"seeds", seeds.size()},
              {"roots", roots},
              {"failed_seeds", search.failures.size()},
              {"singular_seeds", singular},
              {"discarded_infeasible", search.discarded_infeasible}}}};
}

json scan_json(const HopfScanResult& scan)
{
    json crossings = json::array();
    for (const auto& c : scan.crossings) {
        crossings.push_back({{"channel", std::string(to_string(c.channel))},
                             {"indicator", c.indicator},
                             {"cell", c.cell},
                             {"lower", c.lower},
                             {"upper", c.upper},
                             {"value", c.value},
                             {"bisected", c.bisected},
                             {"matched", c.matched},
                             {"lower_value", c.lower_value},
                             {"upper_value", c.upper_value}});
    }
    json jumps = json::array();
    for (const auto& c : scan.discontinuities) {
        jumps.push_back({{"channel", std::string(to_string(c.channel))},
                         {"indicator", c.indicator},
                         {"lower", c.lower},
                         {"upper", c.upper},
                         {"lower_value", c.lower_value},
                         {"upper_value", c.upper_value}});
    }
    json gaps = json::array();
    for (const auto& g : scan.gaps) {
        gaps.push_back({{"kind", "EquilibriumLost"}, {"from", g.from}, {"to", g.to}});
    }
    return {{"parameter", scan.path.parameter},
            {"start", scan.path.start},
            {"end", scan.path.end},
            {"steps", scan.path.steps},
            {"crossings", crossings},
            {"discontinuities", jumps},
            {"gaps", gaps},
            {"channels_agree", scan.channels_agree}};
}

int cmd_simulate(const ScenarioConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log)
{
    const Model model = model_of(cfg);
    prepare(out_dir);
    json report       = header(cfg, "simulate");

    IntegrateOptions opts;
    opts.rel_tol = cfg.tol_rel;
    opts.abs_tol = cfg.tol_abs;
    opts.samples = sample_grid(cfg.t_end, cfg.sample_dt);

    Trajectory traj;
    try {
        traj = integrate(cfg.initial, model, cfg.t_end, opts);
    }
    catch (const IntegrationError& e) {
        write_trajectory_csv(out_dir / "trajectory.csv", e.partial());
        report["error"] = {{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
        write_report(out_dir, report);
        log << "integration failed: " << e.what() << '\n';
        return ExitNumericError;
    }
    write_trajectory_csv(out_dir / "trajectory.csv", traj);

    json summary{{"samples", traj.times.size()},
                 {"final_time", traj.times.back()},
                 {"final_state", state_json(traj.states.back())},
                 {"solver", solver_json(traj.stats)}};

    const auto steady = detect_steady_state(traj, model, cfg.window, cfg.steady_tol);
    json ss{{"converged", steady.state.has_value()},
            {"diagnostic", steady.diagnostic},
            {"window_variation", steady.variation},
            {"terminal_rhs_norm", steady.rhs_norm}};
    if (steady.state) {
        const auto polished = newton_solve(model, *steady.state);
        ss["state"]         = state_json(*steady.state);
        if (polished.converged && polished.point.vec().minCoeff() >= 0) {
            Equilibrium e;
            e.point      = polished.point;
            e.residual   = residual_norm(e.point, model);
            e.feasible   = true;
            e.provenance = Provenance::NewtonSolve;
            e.identity   = EquilibriumId::CoexistenceNumeric;
            for (const auto& entry : closed_form_equilibria(model).entries) {
                if ((entry.equilibrium.point.vec() - e.point.vec()).cwiseAbs().maxCoeff() <=
                    1e-6 * (1 + e.point.vec().cwiseAbs().maxCoeff())) {
                    e.identity = entry.equilibrium.identity;
                }
            }
            ss["polished"] = equilibrium_json(e, model);
        }
    }
    summary["steady_state"] = ss;
    summary["oscillation"]  = oscillation_json(detect_oscillation(traj, cfg.window));
    report["trajectory"]    = summary;
    report["equilibria"]    = equilibria_json(model, cfg);
    write_report(out_dir, report);
    return ExitOk;
}

int cmd_equilibria(const ScenarioConfig& cfg, const std::filesystem::path& out_dir, std::ostream&)
{
    const Model model = model_of(cfg);
    prepare(out_dir);
    json report = header(cfg, "equilibria");
    if (model.variant() != Variant::NoInfectedMigration) {
        const auto f        = origin_factorization(model);
        report["origin"]    = {{"H", f.h}, {"K", f.k}};
    }
    const auto psi          = origin_hopf_excluded(model);
    report["origin_hopf"]   = {{"vertex_r1", psi.vertex_r1},
                               {"vertex_value", psi.vertex_value},
                               {"psi_at_vertex", psi.psi_at_vertex},
                               {"excluded", psi.excluded}};
    report["equilibria"]    = equilibria_json(model, cfg);
    write_report(out_dir, report);
    return ExitOk;
}

int cmd_scan(const ScenarioConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log)
{
    if (!cfg.scan) {
        log << "config has no scan specification (scan_parameter, scan_start, scan_end, scan_steps)\n";
        return ExitConfigError;
    }
    const Model model = model_of(cfg);
    prepare(out_dir);
    const auto scan   = hopf_scan(model, *cfg.scan);

    std::ofstream csv(out_dir / "scan.csv");
    csv << scan.path.parameter << ",S1,I1,S2,I2,a1,a0,k,h,max_re,status\n";
    for (const auto& p : scan.points) {
        csv << format_number(p.value);
        if (p.lost) {
            csv << ",nan,nan,nan,nan,nan,nan,nan,nan,nan,lost\n";
            continue;
        }
        const auto& x = p.equilibrium;
        csv << ',' << format_number(x.s1) << ',' << format_number(x.i1) << ',' << format_number(x.s2) << ','
            << format_number(x.i2) << ',' << format_number(p.a1) << ',' << format_number(p.a0) << ','
            << format_number(p.k) << ',' << format_number(p.h) << ',' << format_number(p.max_real_part) << ",ok\n";
    }

    json report    = header(cfg, "scan");
    report["scan"] = scan_json(scan);
    write_report(out_dir, report);
    return ExitOk;
}

int cmd_verify(std::ostream& out)
{
    const auto results = run_acceptance();
    bool all           = true;
    for (const auto& r : results) {
        out << format_result(r) << '\n';
        all = all && r.passed;
    }
    if (!all) {
        for (const auto& r : results) {
            if (!r.passed) {
                out << "first failing fixture: AC" << r.id << " " << r.name << '\n';
                break;
            }
        }
        return ExitVerificationFailure;
    }
    out << "all " << results.size() << " acceptance checks passed\n";
    return ExitOk;
}

} // namespace metaepi
