#include "koop/config.hpp"

#include "koop/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace koop {

namespace {

// Object view that rejects keys outside the allowed list.
class Obj {
public:
    Obj(const json& j, std::string ctx, std::initializer_list<const char*> allowed) : j_(j), ctx_(std::move(ctx)) {
        if (!j.is_object()) throw ConfigError(ctx_ + ": expected an object");
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!ok.count(it.key())) throw ConfigError(ctx_ + ": unknown key '" + it.key() + "'");
    }
    bool has(const char* k) const { return j_.contains(k); }
    const json& at(const char* k) const {
        if (!j_.contains(k)) throw ConfigError(ctx_ + ": missing key '" + std::string(k) + "'");
        return j_.at(k);
    }
    template <class T>
    T get(const char* k) const {
        try {
            return at(k).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(ctx_ + ": wrong type for '" + std::string(k) + "'");
        }
    }
    template <class T>
    T get(const char* k, T def) const {
        return has(k) ? get<T>(k) : def;
    }
    std::string ctx(const char* k) const { return ctx_ + "." + k; }

private:
    const json& j_;
    std::string ctx_;
};

Rational rational_of(const json& j, const std::string& ctx) {
    try {
        if (j.is_string()) return parse_rational(j.get<std::string>());
        if (j.is_number_integer()) return Rational(j.get<long long>());
        if (j.is_number_float()) return parse_rational(j.dump());
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
    }
    throw ConfigError(ctx + ": expected a rational number");
}

std::vector<Rational> rationals_of(const json& j, const std::string& ctx) {
    if (!j.is_array()) throw ConfigError(ctx + ": expected an array");
    std::vector<Rational> out;
    for (const auto& x : j) out.push_back(rational_of(x, ctx));
    return out;
}

template <class T>
std::vector<T> list_of(const json& j, const std::string& ctx) {
    if (!j.is_array()) throw ConfigError(ctx + ": expected an array");
    try {
        return j.get<std::vector<T>>();
    } catch (const json::exception&) {
        throw ConfigError(ctx + ": wrong element type");
    }
}

cd complex_of(const json& j, const std::string& ctx) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ConfigError(ctx + ": expected [re, im]");
    return {j[0].get<double>(), j[1].get<double>()};
}

Grouping parse_grouping(const json& j, const std::string& ctx) {
    if (j.is_number_integer()) return Grouping::single(j.get<int>());
    if (j.is_array() && j.size() == 2) return Grouping::pair(parse_grouping(j[0], ctx), parse_grouping(j[1], ctx));
    throw ConfigError(ctx + ": grouping is an atom index or a pair of groupings");
}

json grouping_to_json(const Grouping& g) {
    if (g.is_leaf()) return g.leaf;
    return json::array({grouping_to_json(g.kids[0]), grouping_to_json(g.kids[1])});
}

std::string rtext(const Rational& q) { return to_string(q); }

}  // namespace

// ---------------------------------------------------------------- space

SpaceDesc parse_space(const json& j) {
    Obj o(j, "space", {"kind", "masses", "grouping", "balanced", "count", "weights", "components"});
    auto kind = o.get<std::string>("kind");
    if (kind == "interval") return SpaceDesc::interval();
    if (kind == "circle") return SpaceDesc::circle();
    if (kind == "uniform_atoms") return SpaceDesc::uniform_atoms(o.get<int>("count"), o.get<bool>("balanced", false));
    if (kind == "atoms") {
        auto masses = rationals_of(o.at("masses"), o.ctx("masses"));
        std::optional<Grouping> g;
        if (o.has("grouping")) g = parse_grouping(o.at("grouping"), o.ctx("grouping"));
        else if (o.get<bool>("balanced", false)) g = Grouping::balanced(0, static_cast<int>(masses.size()));
        return SpaceDesc::atoms(std::move(masses), g);
    }
    if (kind == "union") {
        auto w = rationals_of(o.at("weights"), o.ctx("weights"));
        const json& cj = o.at("components");
        if (!cj.is_array()) throw ConfigError("space.components: expected an array");
        std::vector<SpaceDesc> comps;
        for (const auto& c : cj) comps.push_back(parse_space(c));
        return SpaceDesc::disjoint_union(std::move(w), std::move(comps));
    }
    throw ConfigError("space: unknown kind '" + kind + "'");
}

json space_to_json(const SpaceDesc& s) {
    switch (s.kind) {
        case SpaceKind::UnitInterval: return {{"kind", "interval"}};
        case SpaceKind::Circle: return {{"kind", "circle"}};
        case SpaceKind::FiniteAtoms: {
            json m = json::array();
            for (const auto& q : s.masses) m.push_back(rtext(q));
            json out = {{"kind", "atoms"}, {"masses", m}};
            if (s.grouping) out["grouping"] = grouping_to_json(*s.grouping);
            return out;
        }
        case SpaceKind::DisjointUnion: {
            json w = json::array(), c = json::array();
            for (const auto& q : s.weights) w.push_back(rtext(q));
            for (const auto& x : s.components) c.push_back(space_to_json(x));
            return {{"kind", "union"}, {"weights", w}, {"components", c}};
        }
    }
    return {};
}

// ---------------------------------------------------------------- map

BuiltinMap parse_map(const json& j) {
    Obj o(j, "map", {"kind", "theta", "q", "perm", "blocks", "prime_tail"});
    auto kind = o.get<std::string>("kind");
    if (kind == "identity") return BuiltinMap::identity();
    if (kind == "halving") return BuiltinMap::halving();
    if (kind == "cycle") return BuiltinMap::cycle(o.get<int>("q"));
    if (kind == "permutation") return BuiltinMap::permutation(list_of<int>(o.at("perm"), o.ctx("perm")));
    if (kind == "rotation") {
        if (o.has("prime_tail")) {
            auto v = list_of<long>(o.at("prime_tail"), o.ctx("prime_tail"));
            if (v.size() != 2) throw ConfigError("map.prime_tail: expected [m, beta]");
            return BuiltinMap::rotation(dyadic_adversary_pair(static_cast<int>(v[0]), v[1]).over);
        }
        const json& t = o.at("theta");
        if (t.is_string() && t.get<std::string>() == "golden") return BuiltinMap::rotation(IrrationalAngle::golden());
        return BuiltinMap::rotation(rational_of(t, o.ctx("theta")));
    }
    if (kind == "union") {
        const json& bj = o.at("blocks");
        if (!bj.is_array()) throw ConfigError("map.blocks: expected an array");
        std::vector<BuiltinMap> blocks;
        for (const auto& b : bj) blocks.push_back(parse_map(b));
        return BuiltinMap::block_union(std::move(blocks));
    }
    throw ConfigError("map: unknown kind '" + kind + "'");
}

json map_to_json(const BuiltinMap& m) {
    switch (m.kind) {
        case BuiltinKind::Identity: return {{"kind", "identity"}};
        case BuiltinKind::Halving: return {{"kind", "halving"}};
        case BuiltinKind::Cycle: return {{"kind", "cycle"}, {"q", m.q}};
        case BuiltinKind::AtomPermutation: return {{"kind", "permutation"}, {"perm", m.perm}};
        case BuiltinKind::Rotation:
            if (m.irrational) {
                if (m.irrational->name() == "golden") return {{"kind", "rotation"}, {"theta", "golden"}};
                return {{"kind", "rotation"}, {"theta_name", m.irrational->name()}};
            }
            return {{"kind", "rotation"}, {"theta", rtext(m.theta)}};
        case BuiltinKind::BlockUnion: {
            json b = json::array();
            for (const auto& x : m.blocks) b.push_back(map_to_json(x));
            return {{"kind", "union"}, {"blocks", b}};
        }
    }
    return {};
}

// ---------------------------------------------------------------- reference

namespace {

ReferenceSpectrum parse_spectrum(const json& j) {
    Obj o(j, "reference", {"kind", "center", "radius", "inner", "outer", "points", "theta", "eps", "parts", "sample_radius"});
    auto kind = o.get<std::string>("kind");
    if (kind == "disk") return ReferenceSpectrum::disk(complex_of(o.at("center"), o.ctx("center")), o.get<double>("radius"));
    if (kind == "annulus") return ReferenceSpectrum::annulus(o.get<double>("inner"), o.get<double>("outer"));
    if (kind == "finite") {
        PointSet pts;
        const json& pj = o.at("points");
        if (!pj.is_array()) throw ConfigError("reference.points: expected an array");
        for (const auto& p : pj) pts.push_back(complex_of(p, o.ctx("points")));
        return ReferenceSpectrum::finite(std::move(pts));
    }
    if (kind == "rotation") return rotation_reference(rational_of(o.at("theta"), o.ctx("theta")), o.get<double>("eps", 0.0));
    if (kind == "irrational_rotation") return irrational_rotation_reference(o.get<double>("eps", 0.0));
    if (kind == "union") {
        std::vector<ReferenceSpectrum> parts;
        const json& pj = o.at("parts");
        if (!pj.is_array()) throw ConfigError("reference.parts: expected an array");
        for (const auto& p : pj) parts.push_back(parse_spectrum(p));
        return ReferenceSpectrum::unite(std::move(parts));
    }
    throw ConfigError("reference: unknown kind '" + kind + "'");
}

}  // namespace

ReferenceConfig parse_reference(const json& j) {
    ReferenceConfig r;
    r.spectrum = parse_spectrum(j);
    if (j.contains("sample_radius")) r.sample_radius = j.at("sample_radius").get<double>();
    if (!(r.sample_radius > 0)) throw ConfigError("reference.sample_radius must be positive");
    return r;
}

// ---------------------------------------------------------------- markov / adversary

MarkovSpec parse_markov_spec(const json& j) {
    Obj o(j, "markov", {"atoms", "images", "base_blocks", "epsilon", "n", "p"});
    MarkovSpec s;
    s.masses = rationals_of(o.at("atoms"), o.ctx("atoms"));
    const json& ij = o.at("images");
    if (!ij.is_array()) throw ConfigError("markov.images: expected an array");
    for (const auto& x : ij) s.images.push_back(list_of<int>(x, o.ctx("images")));
    if (o.has("base_blocks")) {
        std::vector<std::vector<int>> b;
        for (const auto& x : o.at("base_blocks")) b.push_back(list_of<int>(x, o.ctx("base_blocks")));
        s.base_blocks = std::move(b);
    }
    s.validate();
    return s;
}

json markov_spec_to_json(const MarkovSpec& s) {
    json m = json::array();
    for (const auto& q : s.masses) m.push_back(rtext(q));
    json out = {{"atoms", m}, {"images", s.images}};
    if (s.base_blocks) out["base_blocks"] = *s.base_blocks;
    return out;
}

BlockSpec parse_block(const json& j) {
    Obj o(j, "block", {"kind", "q"});
    auto kind = o.get<std::string>("kind");
    if (kind == "cycle") return BlockSpec{BlockKind::Cycle, o.get<int>("q")};
    if (kind == "golden") return BlockSpec{BlockKind::GoldenRotation, 0};
    throw ConfigError("block: unknown kind '" + kind + "'");
}

namespace {

AdversaryConfig parse_adversary(const json& j) {
    Obj o(j, "adversary", {"experiment", "blocks", "schedule", "circle_extra_levels", "quadrature_extra", "eps_scale", "mesh",
                           "alt", "algorithms"});
    AdversaryConfig a;
    a.experiment = o.get<std::string>("experiment");
    if (a.experiment != "lock" && a.experiment != "dichotomy")
        throw ConfigError("adversary.experiment must be 'lock' or 'dichotomy'");
    if (o.has("blocks"))
        for (const auto& b : o.at("blocks")) a.blocks.push_back(parse_block(b));
    if (o.has("schedule")) a.dichotomy.schedule = list_of<int>(o.at("schedule"), o.ctx("schedule"));
    a.dichotomy.circle_extra_levels = o.get<int>("circle_extra_levels", a.dichotomy.circle_extra_levels);
    a.dichotomy.quadrature_extra = o.get<int>("quadrature_extra", a.dichotomy.quadrature_extra);
    a.dichotomy.eps_scale = o.get<double>("eps_scale", a.dichotomy.eps_scale);
    if (o.has("mesh")) a.dichotomy.mesh = rational_of(o.at("mesh"), o.ctx("mesh"));
    if (o.has("alt")) a.alt = parse_map(o.at("alt"));
    if (o.has("algorithms")) a.algorithms = list_of<std::string>(o.at("algorithms"), o.ctx("algorithms"));
    if (a.experiment == "dichotomy" && a.blocks.empty()) throw ConfigError("dichotomy needs blocks");
    if (a.experiment == "lock" && !a.alt) throw ConfigError("lock experiment needs an alternative map 'alt'");
    return a;
}

DictionaryConfig parse_dictionary(const json& j) {
    Obj o(j, "dictionary", {"kind", "count", "level", "max_level", "rho", "pstar"});
    DictionaryConfig d;
    d.kind = o.get<std::string>("kind");
    if (d.kind != "haar" && d.kind != "indicator" && d.kind != "lipschitz" && d.kind != "theta")
        throw ConfigError("dictionary: unknown kind '" + d.kind + "'");
    if (o.has("count")) d.count = o.get<std::size_t>("count");
    d.level = o.get<int>(d.kind == "theta" ? "max_level" : "level", d.kind == "haar" ? 0 : 3);
    if (o.has("rho")) d.rho = rational_of(o.at("rho"), o.ctx("rho"));
    d.pstar = o.get<int>("pstar", 1);
    return d;
}

ResidualOptions parse_residual(const json& j) {
    Obj o(j, "residual", {"mode", "p", "bits", "random_starts", "seed", "warm_start", "precision"});
    ResidualOptions r;
    r.mode = parse_residual_mode(o.get<std::string>("mode", "RatioNetSearch"));
    r.p = o.get<double>("p", 2.0);
    r.net.bits = o.get<int>("bits", r.net.bits);
    r.net.random_starts = o.get<int>("random_starts", r.net.random_starts);
    r.net.seed = o.get<std::uint64_t>("seed", r.net.seed);
    r.net.warm_start = o.get<bool>("warm_start", r.net.warm_start);
    r.precision = o.get<int>("precision", r.precision);
    if (!(r.p > 1.0) || std::isinf(r.p)) throw ConfigError("residual.p must lie in (1,inf)");
    return r;
}

TowerConfig parse_tower(const json& j) {
    Obj o(j, "tower", {"mode", "epsilon", "n2", "n1", "n0", "k_min", "radius", "paper_grid"});
    TowerConfig t;
    t.mode = parse_tower_mode(o.get<std::string>("mode", "Sigma2General"));
    t.epsilon = o.get<double>("epsilon");
    if (!(t.epsilon > 0)) throw ConfigError("tower.epsilon must be positive");
    t.n2 = list_of<std::size_t>(o.at("n2"), o.ctx("n2"));
    if (t.n2.empty()) throw ConfigError("tower.n2 must be nonempty");
    for (std::size_t i = 0; i < t.n2.size(); ++i) {
        if (t.n2[i] == 0) throw ConfigError("tower.n2 entries must be positive");
        if (i && t.n2[i] <= t.n2[i - 1]) throw ConfigError("tower.n2 must be strictly increasing");
    }
    if (o.has("n1")) t.n1 = list_of<int>(o.at("n1"), o.ctx("n1"));
    if (!t.n1.empty() && t.n1.size() != t.n2.size()) throw ConfigError("tower.n1 needs one entry per n2");
    if (o.has("n0")) t.n0 = list_of<int>(o.at("n0"), o.ctx("n0"));
    t.k_min = o.get<int>("k_min", 0);
    if (o.has("radius")) t.radius = o.get<double>("radius");
    t.paper_grid = o.get<bool>("paper_grid", false);
    return t;
}

}  // namespace

RunConfig parse_config(const json& j) {
    Obj o(j, "config", {"schema_version", "space", "depth", "map", "dictionary", "residual", "tower", "grid", "reference",
                        "markov", "adversary", "seed", "output_dir"});
    if (o.get<int>("schema_version", kSchemaVersion) != kSchemaVersion) throw ConfigError("unsupported schema_version");
    RunConfig c;
    if (o.has("space")) c.space = parse_space(o.at("space"));
    c.depth = o.get<int>("depth", c.depth);
    if (c.depth < 0) throw ConfigError("depth must be nonnegative");
    if (o.has("map")) c.map = parse_map(o.at("map"));
    if (o.has("dictionary")) c.dictionary = parse_dictionary(o.at("dictionary"));
    if (o.has("residual")) c.residual = parse_residual(o.at("residual"));
    if (o.has("tower")) c.tower = parse_tower(o.at("tower"));
    if (o.has("grid")) {
        Obj g(o.at("grid"), "grid", {"mesh", "radius"});
        c.grid.mesh = rational_of(g.at("mesh"), "grid.mesh");
        c.grid.radius = rational_of(g.at("radius"), "grid.radius");
        if (c.grid.mesh <= 0) throw ConfigError("grid.mesh must be positive");
        if (c.grid.radius < 0) throw ConfigError("grid.radius must be nonnegative");
    }
    if (o.has("reference")) c.reference = parse_reference(o.at("reference"));
    if (o.has("markov")) {
        const json& mj = o.at("markov");
        MarkovConfig m;
        m.spec = parse_markov_spec(mj);
        if (mj.contains("epsilon")) m.epsilon = mj.at("epsilon").get<double>();
        if (mj.contains("n")) m.n = list_of<std::size_t>(mj.at("n"), "markov.n");
        if (mj.contains("p")) m.p = mj.at("p").get<double>();
        c.markov = std::move(m);
    }
    if (o.has("adversary")) c.adversary = parse_adversary(o.at("adversary"));
    c.seed = o.get<std::uint64_t>("seed", 1);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed JSON in '" + path + "': " + e.what());
    }
    try {
        return parse_config(j);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

std::unique_ptr<Dictionary> make_dictionary(const DictionaryConfig& cfg, const DyadicTree& tree, double p) {
    if (cfg.kind == "haar") return std::make_unique<HaarDictionary>(tree, p, cfg.count.value_or(tree.level_size(tree.depth())));
    if (cfg.kind == "indicator") return std::make_unique<IndicatorDictionary>(tree, cfg.level);
    if (cfg.kind == "lipschitz") return std::make_unique<LipschitzDictionary>(tree, cfg.level, cfg.rho, cfg.pstar);
    if (cfg.kind == "theta") return std::make_unique<ThetaDictionary>(tree, cfg.level, cfg.rho, cfg.pstar);
    throw ConfigError("unknown dictionary kind '" + cfg.kind + "'");
}

// ---------------------------------------------------------------- outputs

namespace {

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

json complex_set_json(const std::vector<ComplexQ>& pts) {
    json a = json::array();
    for (const auto& z : pts) a.push_back(json::array({to_double(z.re), to_double(z.im)}));
    return a;
}

json compact_set_to_json(const CompactSet& s) {
    json exact = json::array();
    for (const auto& z : s.points) exact.push_back(json::array({rtext(z.re), rtext(z.im)}));
    json idx = json::object();
    for (const auto& [k, v] : s.indices) idx[k] = v;
    return {{"tower", s.tower},
            {"epsilon", finite_or_null(s.epsilon)},
            {"threshold", finite_or_null(s.threshold)},
            {"indices", idx},
            {"points", complex_set_json(s.points)},
            {"points_exact", exact},
            {"warnings", s.warnings}};
}

CompactSet compact_set_from_json(const json& j) {
    Obj o(j, "set", {"tower", "epsilon", "threshold", "indices", "points", "points_exact", "warnings"});
    CompactSet s;
    s.tower = o.get<std::string>("tower");
    s.epsilon = o.at("epsilon").is_null() ? std::numeric_limits<double>::quiet_NaN() : o.get<double>("epsilon");
    s.threshold = o.at("threshold").is_null() ? std::numeric_limits<double>::quiet_NaN() : o.get<double>("threshold");
    for (auto it = o.at("indices").begin(); it != o.at("indices").end(); ++it) s.indices[it.key()] = it.value().get<long>();
    for (const auto& p : o.at("points_exact")) {
        if (!p.is_array() || p.size() != 2) throw ConfigError("set.points_exact: expected pairs");
        s.points.push_back({parse_rational(p[0].get<std::string>()), parse_rational(p[1].get<std::string>())});
    }
    s.warnings = o.get<std::vector<std::string>>("warnings");
    return s;
}

bool same_set(const CompactSet& a, const CompactSet& b) {
    if (a.points.size() != b.points.size()) return false;
    for (std::size_t i = 0; i < a.points.size(); ++i)
        if (a.points[i].re != b.points[i].re || a.points[i].im != b.points[i].im) return false;
    return a.tower == b.tower && a.indices == b.indices && a.warnings == b.warnings;
}

json trace_to_json(const HausdorffTrace& t) {
    json v = json::array();
    for (double x : t.values) v.push_back(finite_or_null(x));
    return {{"values", v}, {"empty", t.empty}};
}

json dichotomy_to_json(const DichotomyReport& r) {
    json blocks = json::array(), verdicts = json::array(), betas = json::array(), sizes = json::array(), steps = json::array();
    for (const auto& b : r.blocks) blocks.push_back(b.describe());
    for (const auto& s : r.steps) {
        verdicts.push_back(to_string(s.probe.verdict));
        betas.push_back(s.probe.beta);
        sizes.push_back(s.queries);
        steps.push_back({{"n2", s.probe.n2},
                         {"prime", s.probe.prime},
                         {"beta", s.probe.beta},
                         {"a", rtext(s.probe.thresholds.a)},
                         {"b", rtext(s.probe.thresholds.b)},
                         {"epsilon", s.epsilon},
                         {"threshold", s.threshold},
                         {"probe_residuals", s.probe_residuals},
                         {"verdict", to_string(s.probe.verdict)}});
    }
    return {{"experiment", "dichotomy"},
            {"blocks", blocks},
            {"verdicts", verdicts},
            {"beta_trace", betas},
            {"transcript_sizes", sizes},
            {"steps", steps},
            {"final_verdict", verdicts.empty() ? json(nullptr) : verdicts.back()}};
}

json lock_reports_to_json(const std::vector<LockReport>& r) {
    json runs = json::array(), sizes = json::array();
    bool all = true;
    for (const auto& x : r) {
        all = all && x.identical;
        sizes.push_back(x.queries);
        runs.push_back({{"algorithm", x.algorithm},
                        {"outputs_identical", x.identical},
                        {"locked_points", x.locked_points},
                        {"queries", x.queries}});
    }
    return {{"experiment", "lock"}, {"runs", runs}, {"transcript_sizes", sizes}, {"outputs_identical", all}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace koop

namespace koop {

const std::vector<std::string>& base_algorithm_names() {
    static const std::vector<std::string> names{"gamma_base",   "gamma_stabilized",  "sigma_ap_cascade",  "sigma1_modulus",
                                                "markov_tower", "arithmetic_sigma2", "arithmetic_sigma3", "residual_sweep"};
    return names;
}

SerializedAlgorithm base_algorithm(const std::string& name, const AlgorithmContext& ctx) {
    if (!ctx.tree || !ctx.dict) throw ConfigError("algorithm context needs a tree and a dictionary");
    if (name == "gamma_base")
        return [ctx](const MapOracle& F) {
            return dump(compact_set_to_json(gamma_base(F, *ctx.dict, ctx.epsilon, ctx.n2, ctx.n1, ctx.grid, ctx.residual)));
        };
    if (name == "gamma_stabilized")
        return [ctx](const MapOracle& F) {
            return dump(compact_set_to_json(gamma_stabilized(F, *ctx.dict, ctx.epsilon, ctx.n2, ctx.n1, ctx.grid, ctx.residual)));
        };
    if (name == "sigma_ap_cascade")
        return [ctx](const MapOracle& F) {
            auto rep = sigma_ap_cascade(F, *ctx.dict, ctx.epsilon, 3, ctx.n2, ctx.n1, ctx.grid, ctx.residual);
            json sets = json::array();
            for (const auto& s : rep.sets) sets.push_back(compact_set_to_json(s));
            return dump({{"sets", sets}, {"nesting_violations", rep.nesting_violations}});
        };
    if (name == "sigma1_modulus")
        return [ctx](const MapOracle& F) {
            const auto R = static_cast<double>(ctx.n2);
            Sigma1Level lv;
            CompactSet s;
            if (const auto* theta = dynamic_cast<const ThetaDictionary*>(ctx.dict.get()))
                s = run_sigma1_modulus(F, *theta, ctx.epsilon, ctx.n2, ctx.grid, R, ctx.residual, &lv);
            else if (const auto* lip = dynamic_cast<const LipschitzDictionary*>(ctx.dict.get()))
                s = run_sigma1_modulus(F, *lip, ctx.epsilon, ctx.n2, ctx.grid, R, ctx.residual, &lv);
            else
                throw ConfigError("sigma1_modulus needs a theta or lipschitz dictionary");
            return dump({{"set", compact_set_to_json(s)}, {"m", lv.m}});
        };
    if (name == "markov_tower")
        return [ctx](const MapOracle& F) {
            return dump(compact_set_to_json(markov_tower_on(F, *ctx.tree, ctx.epsilon, ctx.n2, ctx.residual.p, ctx.grid)));
        };
    if (name == "arithmetic_sigma2" || name == "arithmetic_sigma3") {
        TowerMode mode = name == "arithmetic_sigma2" ? TowerMode::ArithmeticSigma2 : TowerMode::ArithmeticSigma3;
        return [ctx, mode](const MapOracle& F) {
            auto p = static_cast<unsigned>(std::lround(ctx.residual.p));
            return dump(compact_set_to_json(
                arithmetic_gamma(F, *ctx.dict, exact_rational(ctx.epsilon), std::min<std::size_t>(ctx.n2, 2), ctx.n1, 8, p, ctx.grid, mode)));
        };
    }
    if (name == "residual_sweep")
        return [ctx](const MapOracle& F) {
            SectionResidual r(F, *ctx.dict, ctx.n2, ctx.n1, ctx.residual);
            json rows = json::array();
            for (const auto& z : make_grid(ctx.grid)) {
                auto res = r(z.to_complex());
                rows.push_back(json::array({to_double(z.re), to_double(z.im), res.value, res.error_bar}));
            }
            return dump(rows);
        };
    throw ConfigError("unknown base algorithm '" + name + "'");
}

}  // namespace koop
