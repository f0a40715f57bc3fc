#include "koop/adversary_lab.hpp"

#include "koop/dictionary.hpp"
#include "koop/errors.hpp"
#include "koop/residual_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace koop {

void Transcript::append(const QueryRecord& r) {
    if (finalized_) throw ConfigError("transcript is finalized");
    entries_.push_back(r);
}

std::map<Point, Point> Transcript::table() const {
    std::map<Point, Point> t;
    for (const auto& e : entries_) t.emplace(e.query, e.value);
    return t;
}

MapOracle lock_adversary(const MapOracle& F0, const std::vector<Transcript>& transcripts, const MapOracle& alt,
                         const DyadicTree& tree) {
    auto locked = std::make_shared<std::map<Point, Point>>();
    for (const auto& t : transcripts)
        for (const auto& [q, v] : t.table()) locked->emplace(q, v);
    auto tree_copy = std::make_shared<DyadicTree>(tree);
    MapOracle::EvalFn fn = [locked, alt](const Point& x, int precision) {
        auto it = locked->find(x);
        if (it != locked->end()) return it->second;
        return alt.evaluate(x, precision);
    };
    return MapOracle("locked(" + F0.name() + "|" + alt.name() + ")", fn, F0.flags(),
                     [tree_copy](const Point& x) { tree_copy->validate_point(x); });
}

LockReport lock_experiment(const std::string& name, const SerializedAlgorithm& algorithm, const MapOracle& F0,
                           const MapOracle& alt, const DyadicTree& tree) {
    auto run = record_transcript(name, F0, algorithm);
    MapOracle F1 = lock_adversary(F0, {run.transcript}, alt, tree);
    LockReport r;
    r.algorithm = name;
    r.output_base = run.output;
    r.output_locked = algorithm(F1);
    r.identical = r.output_base == r.output_locked;
    r.locked_points = run.transcript.table().size();
    r.queries = run.query_delta;
    return r;
}

AdversaryPair dyadic_adversary_pair(int m, long beta) {
    if (m < 0 || m > 60) throw ConfigError("bit budget must lie in [0,60]");
    if (beta < 0 || beta >= (1L << m)) throw ConfigError("need 0 <= beta < 2^m");
    Rational under(beta, Integer(1) << m);
    // Truncation after max(k, m) bits; the tail is at most 2^-k.
    IrrationalAngle::Generator gen = [under, m](int k) {
        Rational t = under;
        for (int j = m + 1; j <= std::max(k, m); ++j)
            if (is_prime(j)) t += Rational(1, Integer(1) << j);
        return t;
    };
    return AdversaryPair{under, IrrationalAngle("prime-tail(" + std::to_string(beta) + "/2^" + std::to_string(m) + ")", gen)};
}

std::string binary_digits(const Rational& theta, int bits) {
    if (theta < 0 || theta >= 1) throw ConfigError("binary digits need theta in [0,1)");
    std::string s = "0.";
    Rational t = theta;
    for (int i = 0; i < bits; ++i) {
        t *= 2;
        if (t >= 1) {
            s += '1';
            t -= 1;
        } else {
            s += '0';
        }
    }
    return s;
}

std::string to_string(Verdict v) { return v == Verdict::Yes ? "Yes" : "No"; }

ProbeThresholds ProbeThresholds::vanishing(long p) {
    Integer pp = Integer(p) * p;
    return ProbeThresholds{Rational(Integer(1), 8 * pp), Rational(Integer(3), 8 * pp)};
}

PointSet prime_arc_probes(long p) {
    if (!is_prime(p)) throw NotPrime(std::to_string(p) + " is not prime");
    PointSet out;
    for (long m = 1; m < p; ++m) out.push_back(std::polar(1.0, 2.0 * M_PI * static_cast<double>(m) / static_cast<double>(p)));
    return out;
}

Verdict vanishing_rule(double beta, const ProbeThresholds& t) {
    if (beta <= to_double(t.a)) return Verdict::No;
    if (beta >= to_double(t.b)) return Verdict::Yes;
    return Verdict::No;
}

ProbeResult prime_arc_probe(const PointSet& candidate, int n2) {
    return prime_arc_probe(candidate, n2, ProbeThresholds::vanishing(nth_prime(n2)));
}

ProbeResult prime_arc_probe(const PointSet& candidate, int n2, const ProbeThresholds& t) {
    if (candidate.empty()) throw EmptyCandidate("probe needs a nonempty candidate set");
    ProbeResult r;
    r.n2 = n2;
    r.prime = nth_prime(n2);
    r.probes = prime_arc_probes(r.prime);
    r.thresholds = t;
    r.beta = directed_hausdorff(r.probes, candidate);
    r.verdict = vanishing_rule(r.beta, t);
    return r;
}

// ---------------------------------------------------------------- dichotomy

std::string BlockSpec::describe() const {
    return kind == BlockKind::Cycle ? "cycle(" + std::to_string(q) + ")" : "golden";
}

std::vector<Verdict> DichotomyReport::verdicts() const {
    std::vector<Verdict> v;
    for (const auto& s : steps) v.push_back(s.probe.verdict);
    return v;
}

std::vector<double> DichotomyReport::beta_trace() const {
    std::vector<double> v;
    for (const auto& s : steps) v.push_back(s.probe.beta);
    return v;
}

namespace {

int skeleton_depth(std::size_t k) {
    int c = 0;
    while ((std::size_t(1) << c) < k) ++c;
    return c;
}

}  // namespace

std::pair<DyadicTree, BuiltinMap> block_union_system(const std::vector<BlockSpec>& blocks, int circle_depth) {
    if (blocks.empty()) throw ConfigError("block union needs at least one block");
    std::vector<SpaceDesc> comps;
    std::vector<BuiltinMap> maps;
    int depth = 0;
    for (const auto& b : blocks) {
        if (b.kind == BlockKind::Cycle) {
            if (b.q < 1) throw ConfigError("cycle length must be positive");
            comps.push_back(SpaceDesc::uniform_atoms(b.q, true));
            maps.push_back(BuiltinMap::cycle(b.q));
            depth = std::max(depth, skeleton_depth(static_cast<std::size_t>(b.q)));
        } else {
            comps.push_back(SpaceDesc::circle());
            maps.push_back(BuiltinMap::rotation(IrrationalAngle::golden()));
            depth = std::max(depth, circle_depth);
        }
    }
    if (blocks.size() == 1) return {DyadicTree::build(comps.front(), depth), maps.front()};
    std::vector<Rational> w(blocks.size(), Rational(1, static_cast<long>(blocks.size())));
    int c = skeleton_depth(blocks.size());
    return {DyadicTree::build(SpaceDesc::disjoint_union(w, comps), c + depth), BuiltinMap::block_union(maps)};
}

DichotomyReport dichotomy_experiment(const std::vector<BlockSpec>& blocks, const DichotomyOptions& opt) {
    if (opt.schedule.empty()) throw ConfigError("empty probe schedule");
    for (std::size_t i = 1; i < opt.schedule.size(); ++i)
        if (opt.schedule[i] <= opt.schedule[i - 1]) throw ConfigError("probe schedule must be strictly increasing");
    DichotomyReport rep;
    rep.blocks = blocks;
    const int c = blocks.size() > 1 ? skeleton_depth(blocks.size()) : 0;
    const double mesh = to_double(opt.mesh);

    for (int n2 : opt.schedule) {
        const long p = nth_prime(n2);
        const int circle_level = n2 + opt.circle_extra_levels;
        auto [tree, map] = block_union_system(blocks, circle_level + opt.quadrature_extra);
        const int level = std::min(c + circle_level, tree.depth());
        const int n1 = std::min(level + opt.quadrature_extra, tree.depth());
        MapOracle F = make_oracle(map, tree);
        IndicatorDictionary dict(tree, level);
        ResidualOptions ro;
        ro.mode = ResidualMode::P2Oracle;
        SectionResidual h(F, dict, dict.size(), n1, ro);

        DichotomyStep step;
        step.epsilon = opt.eps_scale / static_cast<double>(p);
        step.threshold = step.epsilon - mesh;
        ProbeThresholds t = ProbeThresholds::vanishing(p);
        PointSet probes = prime_arc_probes(p);
        // The candidate grid is the lattice of the given mesh plus the probe points.
        // Distances are searched out to the window radius; a probe with no accepted
        // point inside the window is reported at the window radius (a lower bound).
        const double window = std::max(2.0 * to_double(t.b), 1.0 / static_cast<double>(p));
        const long K = static_cast<long>(std::ceil(window / mesh));
        double beta = 0.0;
        for (auto zeta : probes) {
            double hz = h(zeta).value;
            step.probe_residuals.push_back(hz);
            if (hz < step.threshold) continue;
            long k0 = std::lround(zeta.real() / mesh), l0 = std::lround(zeta.imag() / mesh);
            std::vector<std::pair<double, cd>> cand;
            for (long k = k0 - K; k <= k0 + K; ++k)
                for (long l = l0 - K; l <= l0 + K; ++l) {
                    cd z(static_cast<double>(k) * mesh, static_cast<double>(l) * mesh);
                    double d = std::abs(z - zeta);
                    if (d <= window) cand.push_back({d, z});
                }
            std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first < b.first;
                if (a.second.real() != b.second.real()) return a.second.real() < b.second.real();
                return a.second.imag() < b.second.imag();
            });
            // h is 1-Lipschitz in z: a candidate within (h(w) - threshold) of an evaluated w is rejected unseen.
            std::vector<std::pair<cd, double>> seen{{zeta, hz}};
            double dist = window;
            for (const auto& [d, z] : cand) {
                bool covered = false;
                for (const auto& [w, hw] : seen)
                    if (hw - std::abs(z - w) > step.threshold + 1e-9) {
                        covered = true;
                        break;
                    }
                if (covered) continue;
                double hv = h(z).value;
                if (hv < step.threshold) {
                    dist = d;
                    break;
                }
                seen.push_back({z, hv});
            }
            beta = std::max(beta, dist);
            if (beta >= window) break;
        }
        step.queries = F.query_count();
        step.probe.n2 = n2;
        step.probe.prime = p;
        step.probe.probes = std::move(probes);
        step.probe.thresholds = t;
        step.probe.beta = beta;
        step.probe.verdict = vanishing_rule(beta, t);
        rep.steps.push_back(std::move(step));
    }
    return rep;
}

}  // namespace koop
