// Command-line driver: loads a scenario file, runs one operation and emits
// a deterministic report (JSON and CSV, no timestamps). Exit codes: 0 pass,
// 2 verification failure, 1 error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "branchform/measure.hpp"
#include "branchform/multisection.hpp"
#include "branchform/scenario.hpp"

using namespace branchform;
using ordered_json = nlohmann::ordered_json;

namespace {

struct Common {
    std::string scenario_path;
    int refine = 1;
    int quad_order = 0;  // 0: scenario default
    double tol = 0.0;    // 0: scenario default
    std::string report_path;
    std::string format = "json";
    int threads = 1;
    std::string form_name;
    std::string cover_name;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("scenario", c.scenario_path, "scenario file")->required();
    cmd->add_option("--refine", c.refine, "mesh-resolution multiplier")->check(CLI::PositiveNumber);
    cmd->add_option("--quad-order", c.quad_order, "Gauss-Legendre order per cell per axis");
    cmd->add_option("--tol", c.tol, "pass/fail tolerance");
    cmd->add_option("--report", c.report_path, "report file stem (writes <stem>.json and <stem>.csv)");
    cmd->add_option("--format", c.format, "stdout format")->check(CLI::IsMember({"json", "csv"}));
    cmd->add_option("--threads", c.threads, "worker threads (must not change results)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--form", c.form_name, "named form to use");
    cmd->add_option("--cover", c.cover_name, "named cover to use");
}

ordered_json rationals(const std::vector<Rational>& rs) {
    ordered_json a = ordered_json::array();
    for (const auto& r : rs) a.push_back(rational_to_string(r));
    return a;
}

ordered_json point(const Eigen::VectorXd& x) {
    ordered_json a = ordered_json::array();
    for (int c = 0; c < x.size(); ++c) a.push_back(x[c]);
    return a;
}

std::string csv_cell(const ordered_json& v) {
    std::string s = v.is_string() ? v.get<std::string>() : v.dump();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

void flatten_csv(const ordered_json& j, const std::string& prefix, std::string& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items())
            flatten_csv(v, prefix.empty() ? k : prefix + "." + k, out);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i)
            flatten_csv(j[i], prefix + "[" + std::to_string(i) + "]", out);
    } else {
        out += prefix;
        out += ',';
        out += csv_cell(j);
        out += '\n';
    }
}

std::string to_csv(const ordered_json& j) {
    std::string out = "key,value\n";
    flatten_csv(j, "", out);
    return out;
}

int emit(const ordered_json& report, const Common& c, bool passed) {
    const std::string json_text = report.dump(2) + "\n";
    const std::string csv_text = to_csv(report);
    if (!c.report_path.empty()) {
        std::ofstream(c.report_path + ".json", std::ios::binary) << json_text;
        std::ofstream(c.report_path + ".csv", std::ios::binary) << csv_text;
    }
    std::cout << (c.format == "csv" ? csv_text : json_text);
    return passed ? 0 : 2;
}

struct Loaded {
    Scenario scn;
    IntegrationOptions opt;
    double tol;
};

Loaded load(const Common& c) {
    Loaded l{load_scenario(c.scenario_path), {}, 0.0};
    l.opt.quad_order = c.quad_order > 0 ? c.quad_order : l.scn.quad_order;
    l.opt.threads = c.threads;
    l.tol = c.tol > 0.0 ? c.tol : l.scn.tol;
    return l;
}

ordered_json header(const char* operation, const Loaded& l, const Common& c) {
    ordered_json j;
    j["operation"] = operation;
    j["scenario"] = l.scn.name;
    j["refine"] = c.refine;
    j["quad_order"] = l.opt.quad_order;
    j["tolerance"] = l.tol;
    return j;
}

void put_measure(ordered_json& j, const char* key, const MeasureResult& m) {
    j[key] = m.value;
    j[std::string(key) + "_contributions"] = m.contributions;
    j[std::string(key) + "_prefactors"] = rationals(m.prefactors);
}

int cmd_integrate(const Common& c, bool boundary) {
    const Loaded l = load(c);
    const auto s = l.scn.structure(c.refine);
    const auto& omega = l.scn.form(c.form_name);
    const auto m = boundary ? boundary_measure(s, omega, Region::all(), l.opt)
                            : chart_measure(s, omega, Region::all(), l.opt);
    ordered_json j = header(boundary ? "boundary" : "integrate", l, c);
    put_measure(j, "value", m);
    j["pass"] = true;
    return emit(j, c, true);
}

int cmd_stokes(const Common& c) {
    const Loaded l = load(c);
    const auto s = l.scn.structure(c.refine);
    const auto pou = build_partition_of_unity(l.scn.chart, l.scn.cover(c.cover_name));
    const auto& omega = l.scn.form(c.form_name);
    ordered_json j = header("stokes", l, c);
    ordered_json table = ordered_json::array();
    StokesResult last;
    for (int q = 2; q <= std::max(l.opt.quad_order, 3); ++q) {
        IntegrationOptions opt = l.opt;
        opt.quad_order = q;
        last = stokes_residual(s, omega, pou, opt);
        table.push_back({{"quad_order", q},
                         {"interior", last.interior},
                         {"boundary", last.boundary},
                         {"residual", last.residual}});
    }
    j["table"] = table;
    j["interior"] = last.interior;
    j["boundary"] = last.boundary;
    j["residual"] = last.residual;
    const bool pass = std::abs(last.residual) <= l.tol;
    j["pass"] = pass;
    return emit(j, c, pass);
}

int cmd_independence(const Common& c) {
    const Loaded l = load(c);
    const auto rep = verify_independence(l.scn.structure(c.refine),
                                         l.scn.compare_structure(c.refine),
                                         l.scn.form(c.form_name), Region::all(), l.opt);
    ordered_json j = header("verify-independence", l, c);
    j["theta_ok"] = rep.theta_ok;
    if (!rep.theta_ok) {
        j["witness_point"] = point(rep.mismatch.witness);
        j["theta_lhs"] = rational_to_string(rep.mismatch.lhs);
        j["theta_rhs"] = rational_to_string(rep.mismatch.rhs);
    } else {
        j["value_1"] = rep.value1;
        j["value_2"] = rep.value2;
        j["defect"] = rep.defect;
    }
    const bool pass = rep.passed(l.tol);
    j["pass"] = pass;
    return emit(j, c, pass);
}

int cmd_restriction(const Common& c) {
    const Loaded l = load(c);
    if (!l.scn.restriction) throw ScenarioError("restriction: scenario has no restriction block");
    const auto& r = *l.scn.restriction;
    const auto rep = verify_restriction(l.scn.structure(c.refine), r.point, r.radius,
                                        l.scn.form(c.form_name), l.opt);
    ordered_json j = header("verify-restriction", l, c);
    j["valid_neighborhood"] = rep.valid_neighborhood;
    if (!rep.valid_neighborhood) {
        j["witness"] = rep.witness;
    } else {
        j["stabilizer_order"] = rep.stabilizer_order;
        j["coset_count"] = rep.coset_count;
        j["rational_lhs"] = rational_to_string(rep.lhs);
        j["rational_rhs"] = rational_to_string(rep.rhs);
        j["rational_ok"] = rep.rational_ok;
        j["measure_full"] = rep.measure_full;
        j["measure_restricted"] = rep.measure_restricted;
        j["defect"] = rep.defect;
    }
    const bool pass = rep.passed(l.tol);
    j["pass"] = pass;
    return emit(j, c, pass);
}

int cmd_morphism(const Common& c) {
    const Loaded l = load(c);
    if (!l.scn.morphism) throw ScenarioError("morphism: scenario has no morphism block");
    const auto rep = verify_morphism_invariance(l.scn.structure(c.refine), l.scn.morphism->first,
                                                l.scn.morphism->second, l.scn.form(c.form_name),
                                                l.opt);
    ordered_json j = header("verify-morphism", l, c);
    j["form_defect"] = rep.form_defect;
    j["form_invariant"] = rep.form_invariant;
    if (rep.form_invariant) {
        j["value_source"] = rep.value_source;
        j["value_pushed"] = rep.value_pushed;
        j["defect"] = rep.defect;
    }
    const bool pass = rep.passed(l.tol);
    j["pass"] = pass;
    return emit(j, c, pass);
}

int cmd_pou(const Common& c) {
    const Loaded l = load(c);
    const auto s = l.scn.structure(c.refine);
    const auto pou = build_partition_of_unity(l.scn.chart, l.scn.cover(c.cover_name));
    const auto nodes = support_nodes(s, l.opt.quad_order, 512);
    const double sum_defect = pou->sum_defect(nodes);
    const double inv_defect = pou->invariance_defect(nodes);
    ordered_json j = header("verify-pou", l, c);
    j["cover_sets"] = pou->size();
    j["nodes"] = nodes.size();
    j["sum_defect"] = sum_defect;
    j["invariance_defect"] = inv_defect;
    const bool pass = sum_defect <= 1e-12 && inv_defect <= l.tol;
    j["pass"] = pass;
    return emit(j, c, pass);
}

int cmd_classify(const Common& c) {
    const Loaded l = load(c);
    const auto s = l.scn.structure(1);
    const double radius = 0.1;
    ordered_json j = header("classify", l, c);
    ordered_json table = ordered_json::array();
    double prev = 0.0;
    for (int k = 0; k < 4; ++k) {
        const int res = 8 * c.refine * (1 << k);
        const double frac = s.bad_set_density(res, radius);
        ordered_json row = {{"resolution", res}, {"bad_fraction", frac}};
        if (k > 0 && frac > 0.0) row["ratio"] = prev / frac;
        table.push_back(row);
        prev = frac;
    }
    j["table"] = table;
    j["pass"] = true;
    return emit(j, c, true);
}

int cmd_invariant(const Common& c) {
    const Loaded l = load(c);
    if (!l.scn.section) throw ScenarioError("section: scenario has no section block");
    const ToySection f(l.scn.chart, *l.scn.section);
    const Multisection m = l.scn.multisection
                               ? *l.scn.multisection
                               : Multisection::trivial(f.base_dim(), f.fiber_dim());
    const auto sol = solve(f, m, 256 * c.refine);
    FormPtr omega;
    if (!l.scn.forms.empty() || !c.form_name.empty())
        omega = l.scn.form(c.form_name);
    else if (sol.dim == 0)
        omega = make_form(f.base_dim(), 0, {{{}, "1"}});
    else
        throw ScenarioError("forms: a 1-form is required for curve invariants");
    ordered_json j = header("invariant", l, c);
    j["solution_dim"] = sol.dim;
    if (sol.dim == 0) {
        ordered_json pts = ordered_json::array();
        for (const auto& p : sol.points)
            pts.push_back({{"x", point(p.x)},
                           {"section", p.section},
                           {"sign", p.sign},
                           {"weight", rational_to_string(p.weight)}});
        j["points"] = pts;
        j["signed_count"] = rational_to_string(signed_count(sol));
    } else {
        ordered_json cs = ordered_json::array();
        for (const auto& curve : sol.curves)
            cs.push_back({{"section", curve.section},
                          {"weight", rational_to_string(curve.weight)},
                          {"closed", curve.closed},
                          {"vertices", curve.points.size()}});
        j["curves"] = cs;
    }
    j["psi"] = invariant_psi(sol, omega, nullptr, l.opt.quad_order);
    j["pass"] = true;
    return emit(j, c, true);
}

int cmd_homotopy(const Common& c) {
    const Loaded l = load(c);
    if (!l.scn.homotopy) throw ScenarioError("homotopy: scenario has no homotopy block");
    const int dim = l.scn.chart->dim();
    const Multisection m =
        l.scn.multisection ? *l.scn.multisection : Multisection::trivial(dim, dim);
    FormPtr omega = l.scn.forms.empty() && c.form_name.empty()
                        ? make_form(dim, 0, {{{}, "1"}})
                        : l.scn.form(c.form_name);
    const auto rep = homotopy_invariance_check(l.scn.chart, *l.scn.homotopy, m, omega, 21,
                                               256 * c.refine);
    ordered_json j = header("homotopy", l, c);
    ordered_json steps = ordered_json::array();
    for (const auto& st : rep.steps) {
        ordered_json row = {{"t", st.t}, {"flagged", st.flagged}};
        if (!st.flagged) row["psi"] = st.psi;
        if (!st.note.empty()) row["note"] = st.note;
        steps.push_back(row);
    }
    j["steps"] = steps;
    j["flagged_count"] = rep.flagged_count;
    j["max_deviation"] = rep.max_deviation;
    j["proper"] = rep.proper;
    if (!rep.proper) j["properness_witness"] = rep.properness_witness;
    const bool pass = rep.proper && rep.max_deviation <= l.tol;
    j["pass"] = pass;
    return emit(j, c, pass);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Branched-structure integration driver"};
    app.require_subcommand(1);

    struct Entry {
        const char* name;
        const char* help;
        int (*run)(const Common&);
    };
    const std::vector<Entry> entries = {
        {"integrate", "chart measure of a form over the structure",
         [](const Common& c) { return cmd_integrate(c, false); }},
        {"boundary", "boundary measure of an (n-1)-form",
         [](const Common& c) { return cmd_integrate(c, true); }},
        {"stokes", "interior vs boundary measure residual", cmd_stokes},
        {"verify-independence", "compare two presentations of the same structure",
         cmd_independence},
        {"verify-restriction", "stabilizer-neighborhood restriction identity", cmd_restriction},
        {"verify-morphism", "measure invariance under a diffeomorphism", cmd_morphism},
        {"verify-pou", "partition-of-unity sum and invariance defects", cmd_pou},
        {"classify", "bad-point fraction across mesh refinements", cmd_classify},
        {"invariant", "solution set and invariant of a multisection", cmd_invariant},
        {"homotopy", "invariant constancy along a homotopy sweep", cmd_homotopy},
    };

    std::vector<Common> opts(entries.size());
    std::vector<int (*)(const Common&)> runners;
    std::vector<CLI::App*> cmds;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        CLI::App* cmd = app.add_subcommand(entries[i].name, entries[i].help);
        add_common(cmd, opts[i]);
        cmds.push_back(cmd);
        runners.push_back(entries[i].run);
    }

    CLI11_PARSE(app, argc, argv);

    for (std::size_t i = 0; i < cmds.size(); ++i) {
        if (!cmds[i]->parsed()) continue;
        try {
            return runners[i](opts[i]);
        } catch (const GoodPositionError& e) {
            std::cerr << "verification failure: " << e.what() << "\n";
            return 2;
        } catch (const PropernessError& e) {
            std::cerr << "verification failure: " << e.what() << "\n";
            return 2;
        } catch (const CoverGapError& e) {
            std::cerr << "verification failure: " << e.what() << "\n";
            return 2;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    return 1;
}
