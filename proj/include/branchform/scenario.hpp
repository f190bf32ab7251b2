#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "branchform/branched.hpp"
#include "branchform/forms.hpp"
#include "branchform/geometry.hpp"
#include "branchform/measure.hpp"
#include "branchform/multisection.hpp"
#include "branchform/rational.hpp"

namespace branchform {

// A scenario file is a JSON document describing a chart, its branching
// structure and the auxiliary data (forms, covers, multisections, ...) that
// the command-line driver operates on. Validation errors carry the
// path-to-field of the offending entry.

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RestrictionSpec {
    Eigen::VectorXd point;
    double radius = 0.0;
};

struct Scenario {
    std::string name;
    std::shared_ptr<const Chart> chart;
    std::vector<Branch> branches;
    std::vector<Rational> weights;
    std::vector<Branch> compare_branches;  // second presentation, same chart
    std::vector<Rational> compare_weights;

    std::map<std::string, FormPtr> forms;
    std::map<std::string, std::vector<ChartDomain>> covers;

    std::optional<Multisection> multisection;
    std::optional<SmoothMap> section;   // toy section f
    std::optional<SmoothMap> homotopy;  // f_t, last argument is t
    std::optional<RestrictionSpec> restriction;
    std::optional<std::pair<SmoothMap, SmoothMap>> morphism;  // phi, psi

    double tol = 1e-9;
    int quad_order = 5;
    std::string default_form;
    std::string default_cover;

    BranchingStructure structure(int refine = 1) const {
        return build(branches, weights, refine);
    }
    bool has_compare() const { return !compare_branches.empty(); }
    BranchingStructure compare_structure(int refine = 1) const {
        if (!has_compare()) throw ScenarioError("compare: scenario has no second presentation");
        return build(compare_branches, compare_weights, refine);
    }

    const FormPtr& form(const std::string& requested) const {
        const std::string key = requested.empty() ? default_form : requested;
        const auto it = forms.find(key);
        if (it == forms.end()) throw ScenarioError("forms: no form named '" + key + "'");
        return it->second;
    }

    BranchingStructure build(const std::vector<Branch>& bs, const std::vector<Rational>& ws,
                             int refine) const {
        if (bs.empty()) throw ScenarioError("branches: scenario has none");
        if (refine < 1) throw ScenarioError("refine must be >= 1");
        std::vector<Branch> refined;
        for (const auto& b : bs) refined.push_back(b.with_resolution(b.resolution() * refine));
        return BranchingStructure(chart, std::move(refined), ws);
    }

    const std::vector<ChartDomain>& cover(const std::string& requested) const {
        const std::string key = requested.empty() ? default_cover : requested;
        const auto it = covers.find(key);
        if (it == covers.end()) throw ScenarioError("covers: no cover named '" + key + "'");
        return it->second;
    }
};

namespace scn_detail {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
    throw ScenarioError(path + ": " + msg);
}

inline const json& need(const json& j, const char* key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) fail(path, std::string("missing field '") + key + "'");
    return j.at(key);
}

inline double number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

inline int integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<int>();
}

inline std::string text(const json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

inline Eigen::VectorXd vector(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of numbers");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = number(j[i], path + "[" + std::to_string(i) + "]");
    return v;
}

inline std::vector<std::string> strings(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(text(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

inline SmoothMap map(int arity, const json& j, const std::string& path) {
    try {
        return SmoothMap::parse(arity, strings(j, path));
    } catch (const ScenarioError&) {
        throw;
    } catch (const std::exception& e) {
        fail(path, e.what());
    }
}

inline Rational weight(const json& j, const std::string& path) {
    Rational w;
    try {
        w = parse_rational(text(j, path));
    } catch (const ScenarioError&) {
        throw;
    } catch (const std::exception& e) {
        fail(path, e.what());
    }
    if (w <= Rational(0)) fail(path, "weights must be positive rationals");
    return w;
}

inline ChartDomain domain_set(int dim, const json& j, const std::string& path) {
    const std::string kind = text(need(j, "kind", path), path + ".kind");
    if (kind == "box") {
        const auto lo = vector(need(j, "lo", path), path + ".lo");
        const auto hi = vector(need(j, "hi", path), path + ".hi");
        if (lo.size() != dim || hi.size() != dim) fail(path, "box extents must match the dimension");
        for (int c = 0; c < dim; ++c)
            if (!(lo[c] < hi[c])) fail(path, "box needs lo < hi in every coordinate");
        return ChartDomain::box(lo, hi);
    }
    if (kind == "ball") {
        const auto center = vector(need(j, "center", path), path + ".center");
        if (center.size() != dim) fail(path, "ball center must match the dimension");
        const double r = number(need(j, "radius", path), path + ".radius");
        if (!(r > 0.0)) fail(path, "ball radius must be positive");
        return ChartDomain::ball(center, r);
    }
    fail(path + ".kind", "expected 'box' or 'ball'");
}

inline DomainFactor factor(const json& j, const std::string& path) {
    const std::string kind = text(need(j, "kind", path), path + ".kind");
    if (kind == "quadrant") {
        const double b = number(need(j, "length", path), path + ".length");
        if (!(b > 0.0)) fail(path, "quadrant length must be positive");
        return DomainFactor::quadrant(b);
    }
    if (kind == "interval") {
        const double a = number(need(j, "lo", path), path + ".lo");
        const double c = number(need(j, "hi", path), path + ".hi");
        if (!(a < c)) fail(path, "interval needs lo < hi");
        return DomainFactor::interval(a, c);
    }
    if (kind == "periodic") {
        const double L = number(need(j, "length", path), path + ".length");
        if (!(L > 0.0)) fail(path, "period must be positive");
        return DomainFactor::periodic(L);
    }
    fail(path + ".kind", "expected 'quadrant', 'interval' or 'periodic'");
}

inline std::shared_ptr<const Chart> chart(const json& j, const std::string& path) {
    const int dim = integer(need(j, "dim", path), path + ".dim");
    if (dim < 1) fail(path + ".dim", "dimension must be >= 1");
    const ChartDomain dom = domain_set(dim, need(j, "domain", path), path + ".domain");
    if (!j.contains("group")) return std::make_shared<const Chart>(Chart::trivial(dom));

    const json& jg = j.at("group");
    const std::string gp = path + ".group";
    const json& jels = need(jg, "elements", gp);
    if (!jels.is_array() || jels.empty()) fail(gp + ".elements", "expected a non-empty array");
    std::vector<GroupElement> els;
    for (std::size_t i = 0; i < jels.size(); ++i) {
        const std::string ep = gp + ".elements[" + std::to_string(i) + "]";
        els.push_back({text(need(jels[i], "name", ep), ep + ".name"),
                       map(dim, need(jels[i], "map", ep), ep + ".map")});
    }
    const json& jt = need(jg, "table", gp);
    if (!jt.is_array() || jt.size() != els.size()) fail(gp + ".table", "table must be |G| x |G|");
    std::vector<std::vector<int>> table;
    for (std::size_t a = 0; a < jt.size(); ++a) {
        const std::string rp = gp + ".table[" + std::to_string(a) + "]";
        if (!jt[a].is_array() || jt[a].size() != els.size()) fail(rp, "table must be |G| x |G|");
        std::vector<int> row;
        for (std::size_t b = 0; b < jt[a].size(); ++b) {
            const int v = integer(jt[a][b], rp + "[" + std::to_string(b) + "]");
            if (v < 0 || v >= static_cast<int>(els.size()))
                fail(rp + "[" + std::to_string(b) + "]", "table entry out of range");
            row.push_back(v);
        }
        table.push_back(std::move(row));
    }
    int identity = 0;
    if (jg.contains("identity")) identity = integer(jg.at("identity"), gp + ".identity");
    try {
        return std::make_shared<const Chart>(dom, std::move(els), std::move(table), identity);
    } catch (const std::exception& e) {
        fail(gp, e.what());
    }
}

inline Branch branch(const std::shared_ptr<const Chart>& c, const json& j,
                     const std::string& path) {
    const json& jd = need(j, "domain", path);
    if (!jd.is_array() || jd.empty()) fail(path + ".domain", "expected an array of factors");
    std::vector<DomainFactor> fs;
    for (std::size_t i = 0; i < jd.size(); ++i)
        fs.push_back(factor(jd[i], path + ".domain[" + std::to_string(i) + "]"));
    int orientation = 1;
    if (j.contains("orientation")) {
        orientation = integer(j.at("orientation"), path + ".orientation");
        if (orientation != 1 && orientation != -1)
            fail(path + ".orientation", "orientation must be +1 or -1");
    }
    int resolution = 8;
    if (j.contains("resolution")) {
        resolution = integer(j.at("resolution"), path + ".resolution");
        if (resolution < 1) fail(path + ".resolution", "resolution must be >= 1");
    }
    std::string name = "branch";
    if (j.contains("name")) name = text(j.at("name"), path + ".name");
    try {
        ParamDomain dom(std::move(fs));
        SmoothMap phi = map(dom.dim(), need(j, "map", path), path + ".map");
        if (phi.coarity() != c->dim()) fail(path + ".map", "map must land in the chart dimension");
        return Branch(c, std::move(dom), std::move(phi), orientation, resolution, name);
    } catch (const ScenarioError&) {
        throw;
    } catch (const std::exception& e) {
        fail(path, e.what());
    }
}

inline void branch_list(const std::shared_ptr<const Chart>& c, const json& j,
                        const std::string& path, std::vector<Branch>& branches,
                        std::vector<Rational>& weights) {
    if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of branches");
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string bp = path + "[" + std::to_string(i) + "]";
        branches.push_back(branch(c, j[i], bp));
        weights.push_back(weight(need(j[i], "weight", bp), bp + ".weight"));
    }
}

inline FormPtr form(int dim, const json& j, const std::string& path) {
    const int degree = integer(need(j, "degree", path), path + ".degree");
    if (degree < 0 || degree > dim) fail(path + ".degree", "degree out of range");
    const json& jt = need(j, "terms", path);
    if (!jt.is_array()) fail(path + ".terms", "expected an array of terms");
    std::vector<std::pair<std::vector<int>, std::string>> terms;
    for (std::size_t i = 0; i < jt.size(); ++i) {
        const std::string tp = path + ".terms[" + std::to_string(i) + "]";
        const json& ji = need(jt[i], "indices", tp);
        if (!ji.is_array()) fail(tp + ".indices", "expected an array of indices");
        std::vector<int> idx;
        for (std::size_t k = 0; k < ji.size(); ++k)
            idx.push_back(integer(ji[k], tp + ".indices[" + std::to_string(k) + "]"));
        terms.push_back({std::move(idx), text(need(jt[i], "coeff", tp), tp + ".coeff")});
    }
    try {
        return make_form(dim, degree, terms);
    } catch (const std::exception& e) {
        fail(path, e.what());
    }
}

}  // namespace scn_detail

inline Scenario load_scenario(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ScenarioError(file + ": cannot open scenario file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ScenarioError(file + ": " + e.what());
    }
    using namespace scn_detail;

    Scenario s;
    if (j.contains("name")) s.name = text(j.at("name"), "name");
    s.chart = chart(need(j, "chart", "(root)"), "chart");
    const int dim = s.chart->dim();

    if (j.contains("branches")) {
        branch_list(s.chart, j.at("branches"), "branches", s.branches, s.weights);
        s.structure();  // validate eagerly
    }

    if (j.contains("compare")) {
        branch_list(s.chart, need(j.at("compare"), "branches", "compare"), "compare.branches",
                    s.compare_branches, s.compare_weights);
        s.compare_structure();  // validate eagerly
    }

    if (j.contains("forms")) {
        const json& jf = j.at("forms");
        if (!jf.is_object()) fail("forms", "expected an object of named forms");
        for (const auto& [key, val] : jf.items()) s.forms[key] = form(dim, val, "forms." + key);
    }

    if (j.contains("covers")) {
        const json& jc = j.at("covers");
        if (!jc.is_object()) fail("covers", "expected an object of named covers");
        for (const auto& [key, val] : jc.items()) {
            const std::string cp = "covers." + key;
            if (!val.is_array() || val.empty()) fail(cp, "expected a non-empty array of sets");
            std::vector<ChartDomain> sets;
            for (std::size_t i = 0; i < val.size(); ++i)
                sets.push_back(domain_set(dim, val[i], cp + "[" + std::to_string(i) + "]"));
            s.covers[key] = std::move(sets);
        }
    }

    if (j.contains("multisection")) {
        const json& jm = j.at("multisection");
        const json& js = need(jm, "sections", "multisection");
        const json& jw = need(jm, "weights", "multisection");
        if (!js.is_array() || js.empty()) fail("multisection.sections", "expected sections");
        if (!jw.is_array() || jw.size() != js.size())
            fail("multisection.weights", "one weight per section");
        std::vector<SmoothMap> secs;
        std::vector<Rational> ws;
        for (std::size_t i = 0; i < js.size(); ++i) {
            secs.push_back(map(dim, js[i], "multisection.sections[" + std::to_string(i) + "]"));
            ws.push_back(weight(jw[i], "multisection.weights[" + std::to_string(i) + "]"));
        }
        try {
            s.multisection.emplace(std::move(secs), std::move(ws));
        } catch (const std::exception& e) {
            fail("multisection", e.what());
        }
    }

    if (j.contains("section")) s.section = map(dim, j.at("section"), "section");
    if (j.contains("homotopy")) s.homotopy = map(dim + 1, j.at("homotopy"), "homotopy");

    if (j.contains("restriction")) {
        const json& jr = j.at("restriction");
        RestrictionSpec r;
        r.point = vector(need(jr, "point", "restriction"), "restriction.point");
        if (r.point.size() != dim) fail("restriction.point", "must match the chart dimension");
        r.radius = number(need(jr, "radius", "restriction"), "restriction.radius");
        if (!(r.radius > 0.0)) fail("restriction.radius", "radius must be positive");
        s.restriction = std::move(r);
    }

    if (j.contains("morphism")) {
        const json& jm = j.at("morphism");
        s.morphism.emplace(map(dim, need(jm, "phi", "morphism"), "morphism.phi"),
                           map(dim, need(jm, "psi", "morphism"), "morphism.psi"));
    }

    if (j.contains("defaults")) {
        const json& jd = j.at("defaults");
        if (jd.contains("tol")) s.tol = number(jd.at("tol"), "defaults.tol");
        if (jd.contains("quad_order")) {
            s.quad_order = integer(jd.at("quad_order"), "defaults.quad_order");
            if (s.quad_order < 1) fail("defaults.quad_order", "must be >= 1");
        }
        if (jd.contains("form")) s.default_form = text(jd.at("form"), "defaults.form");
        if (jd.contains("cover")) s.default_cover = text(jd.at("cover"), "defaults.cover");
    }
    if (s.default_form.empty() && s.forms.size() == 1) s.default_form = s.forms.begin()->first;
    if (s.default_cover.empty() && s.covers.size() == 1) s.default_cover = s.covers.begin()->first;
    return s;
}

}  // namespace branchform
