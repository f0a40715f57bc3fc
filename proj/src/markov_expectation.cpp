#include "koop/markov_expectation.hpp"

#include "koop/dictionary.hpp"
#include "koop/errors.hpp"
#include "koop/residual_engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace koop {

void MarkovSpec::validate() const {
    const std::size_t n = masses.size();
    if (n == 0) throw ConfigError("Markov spec needs at least one atom");
    if (images.size() != n) throw ShapeMismatch("one image set per atom required");
    Rational total = 0;
    for (const auto& m : masses) {
        if (m <= 0) throw ConfigError("atom masses must be positive");
        total += m;
    }
    if (total != 1) throw ConfigError("atom masses must sum to 1, got " + to_string(total));
    for (const auto& img : images) {
        if (img.empty()) throw ConfigError("every atom needs a nonempty image");
        for (int j : img)
            if (j < 0 || static_cast<std::size_t>(j) >= n) throw UnknownAtom("image atom " + std::to_string(j) + " out of range");
    }
    if (base_blocks) make_partition(*base_blocks, masses);
}

std::optional<std::vector<int>> MarkovSpec::as_permutation() const {
    std::vector<int> perm;
    std::vector<char> hit(images.size(), 0);
    for (const auto& img : images) {
        std::set<int> s(img.begin(), img.end());
        if (s.size() != 1) return std::nullopt;
        int j = *s.begin();
        if (hit[static_cast<std::size_t>(j)]) return std::nullopt;
        hit[static_cast<std::size_t>(j)] = 1;
        perm.push_back(j);
    }
    return perm;
}

MarkovSpec MarkovSpec::from_permutation(const std::vector<int>& perm, std::vector<Rational> masses) {
    MarkovSpec s;
    if (masses.empty()) masses.assign(perm.size(), Rational(1, static_cast<long>(std::max<std::size_t>(perm.size(), 1))));
    s.masses = std::move(masses);
    for (int j : perm) s.images.push_back({j});
    s.validate();
    return s;
}

std::vector<int> AtomPartition::block_of(std::size_t atoms) const {
    std::vector<int> out(atoms, -1);
    for (std::size_t b = 0; b < blocks.size(); ++b)
        for (int a : blocks[b]) out[static_cast<std::size_t>(a)] = static_cast<int>(b);
    return out;
}

AtomPartition make_partition(const std::vector<std::vector<int>>& blocks, const std::vector<Rational>& masses) {
    AtomPartition p;
    std::vector<char> seen(masses.size(), 0);
    for (auto b : blocks) {
        if (b.empty()) throw ConfigError("empty partition block");
        std::sort(b.begin(), b.end());
        Rational m = 0;
        for (int a : b) {
            if (a < 0 || static_cast<std::size_t>(a) >= masses.size()) throw UnknownAtom("block atom out of range");
            if (seen[static_cast<std::size_t>(a)]) throw ConfigError("blocks overlap at atom " + std::to_string(a));
            seen[static_cast<std::size_t>(a)] = 1;
            m += masses[static_cast<std::size_t>(a)];
        }
        p.blocks.push_back(std::move(b));
        p.mass.push_back(m);
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw ConfigError("blocks do not cover every atom");
    std::vector<std::size_t> order(p.blocks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p.blocks[a].front() < p.blocks[b].front(); });
    AtomPartition sorted;
    for (auto i : order) {
        sorted.blocks.push_back(p.blocks[i]);
        sorted.mass.push_back(p.mass[i]);
    }
    return sorted;
}

AtomPartition refine_invariant_partition(const MarkovSpec& spec, std::size_t bound) {
    spec.validate();
    const std::size_t n = spec.atom_count();
    std::vector<std::vector<int>> init;
    if (spec.base_blocks) init = *spec.base_blocks;
    else
        for (std::size_t k = 0; k < n; ++k) init.push_back({static_cast<int>(k)});
    AtomPartition part = make_partition(init, spec.masses);
    if (bound < part.size()) throw ConfigError("bound is below the base partition size");

    for (;;) {
        auto label = part.block_of(n);
        std::map<std::pair<int, std::vector<int>>, std::vector<int>> groups;
        for (std::size_t k = 0; k < n; ++k) {
            std::set<int> hit;
            for (int j : spec.images[k]) hit.insert(label[static_cast<std::size_t>(j)]);
            groups[{label[k], std::vector<int>(hit.begin(), hit.end())}].push_back(static_cast<int>(k));
        }
        if (groups.size() > bound)
            throw InfiniteRefinement("refinement needs more than " + std::to_string(bound) + " blocks");
        if (groups.size() == part.size()) return part;
        std::vector<std::vector<int>> next;
        for (auto& [key, atoms] : groups) next.push_back(std::move(atoms));
        part = make_partition(next, spec.masses);
    }
}

AtomPartition invariant_blocks_from_cycles(const std::vector<int>& perm, const std::vector<Rational>& masses) {
    const std::size_t n = perm.size();
    std::vector<char> hit(n, 0);
    for (int j : perm) {
        if (j < 0 || static_cast<std::size_t>(j) >= n || hit[static_cast<std::size_t>(j)])
            throw ConfigError("not a permutation");
        hit[static_cast<std::size_t>(j)] = 1;
    }
    std::vector<Rational> w = masses;
    if (w.empty()) w.assign(n, Rational(1, static_cast<long>(std::max<std::size_t>(n, 1))));
    if (w.size() != n) throw ShapeMismatch("one mass per atom required");
    std::vector<char> seen(n, 0);
    std::vector<std::vector<int>> blocks;
    for (std::size_t s = 0; s < n; ++s) {
        if (seen[s]) continue;
        std::vector<int> cyc;
        for (std::size_t k = s; !seen[k]; k = static_cast<std::size_t>(perm[k])) {
            seen[k] = 1;
            cyc.push_back(static_cast<int>(k));
        }
        blocks.push_back(std::move(cyc));
    }
    return make_partition(blocks, w);
}

bool is_invariant(const MarkovSpec& spec, const AtomPartition& part) {
    auto label = part.block_of(spec.atom_count());
    // F(B) inside B for every block and preimages of blocks are whole blocks.
    for (std::size_t k = 0; k < spec.atom_count(); ++k)
        for (int j : spec.images[k])
            if (label[static_cast<std::size_t>(j)] != label[k]) return false;
    return true;
}

template <class T>
std::vector<T> expectation_EF(const AtomPartition& part, const std::vector<Rational>& masses, const std::vector<T>& g) {
    if (g.size() != masses.size()) throw ShapeMismatch("function and mass vector sizes differ");
    std::vector<T> out(g.size());
    for (std::size_t b = 0; b < part.blocks.size(); ++b) {
        T s = 0;
        for (int a : part.blocks[b]) {
            auto k = static_cast<std::size_t>(a);
            if constexpr (std::is_same_v<T, Rational>) s += g[k] * masses[k];
            else s += g[k] * to_double(masses[k]);
        }
        T avg;
        if constexpr (std::is_same_v<T, Rational>) avg = s / part.mass[b];
        else avg = s / to_double(part.mass[b]);
        for (int a : part.blocks[b]) out[static_cast<std::size_t>(a)] = avg;
    }
    return out;
}

template std::vector<Rational> expectation_EF<Rational>(const AtomPartition&, const std::vector<Rational>&,
                                                        const std::vector<Rational>&);
template std::vector<double> expectation_EF<double>(const AtomPartition&, const std::vector<Rational>&,
                                                    const std::vector<double>&);

double atom_norm_pow(const std::vector<Rational>& masses, const std::vector<double>& g, double p) {
    if (g.size() != masses.size()) throw ShapeMismatch("function and mass vector sizes differ");
    double s = 0;
    for (std::size_t k = 0; k < g.size(); ++k) s += std::pow(std::abs(g[k]), p) * to_double(masses[k]);
    return s;
}

MarkovSystem markov_system(const MarkovSpec& spec) {
    spec.validate();
    auto perm = spec.as_permutation();
    if (!perm) throw UnsupportedSpace("Markov tower supports atom permutations only");
    MarkovSystem sys;
    sys.refined = refine_invariant_partition(spec, spec.atom_count());
    sys.invariant = invariant_blocks_from_cycles(*perm, spec.masses);
    // Atoms of the refined partition become the leaves of the space model.
    std::vector<Rational> leaf_mass = sys.refined.mass;
    std::vector<int> leaf_of = sys.refined.block_of(spec.atom_count());
    std::vector<int> leaf_perm(sys.refined.size());
    for (std::size_t b = 0; b < sys.refined.size(); ++b) {
        int a = sys.refined.blocks[b].front();
        leaf_perm[b] = leaf_of[static_cast<std::size_t>((*perm)[static_cast<std::size_t>(a)])];
    }
    const int count = static_cast<int>(leaf_mass.size());
    int depth = 0;
    while ((1 << depth) < count) ++depth;
    auto space = SpaceDesc::atoms(leaf_mass, Grouping::balanced(0, count));
    sys.tree = std::make_shared<DyadicTree>(DyadicTree::build(space, depth));
    sys.map = BuiltinMap::permutation(leaf_perm);
    return sys;
}

CompactSet markov_tower_on(const MapOracle& F, const DyadicTree& tree, double eps, std::size_t n, double p,
                           const GridSpec& grid) {
    if (n == 0) throw ConfigError("n must be positive");
    const int depth = tree.depth();
    const std::size_t n2 = std::min(n, tree.level_size(depth));
    HaarDictionary dict(tree, p, tree.level_size(depth));
    ResidualOptions opt;
    opt.p = p;
    opt.mode = p == 2.0 ? ResidualMode::P2Oracle : ResidualMode::RatioNetSearch;
    SectionResidual r(F, dict, n2, depth, opt);
    auto pts = make_grid(grid);
    double thr = eps - 1.0 / static_cast<double>(n);
    CompactSet s = threshold_set(pts, evaluate_on_grid([&](cd z) { return r(z).value; }, pts), thr);
    s.tower = to_string(TowerMode::Sigma1Markov);
    s.epsilon = eps;
    s.indices = {{"n", static_cast<long>(n)}, {"n2", static_cast<long>(n2)}, {"n1", depth}};
    if (thr <= 0) s.warnings.push_back("threshold eps - 1/n is not positive; set is empty");
    return s;
}

CompactSet markov_tower(const MarkovSpec& spec, double eps, std::size_t n, double p, const GridSpec& grid) {
    MarkovSystem sys = markov_system(spec);
    MapOracle F = make_oracle(sys.map, *sys.tree);
    return markov_tower_on(F, *sys.tree, eps, n, p, grid);
}

}  // namespace koop
