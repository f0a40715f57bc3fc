#pragma once

#include "koop/map_library.hpp"
#include "koop/rational.hpp"
#include "koop/space_model.hpp"
#include "koop/tower_runner.hpp"

#include <optional>
#include <vector>

namespace koop {

// Atoms with masses; atom k maps onto the union of the atoms in images[k].
// The base partition groups atoms into blocks (singletons when absent).
struct MarkovSpec {
    std::vector<Rational> masses;
    std::vector<std::vector<int>> images;
    std::optional<std::vector<std::vector<int>>> base_blocks;

    void validate() const;
    std::size_t atom_count() const { return masses.size(); }
    // Permutation view when every image is a single atom and the map is bijective.
    std::optional<std::vector<int>> as_permutation() const;
    static MarkovSpec from_permutation(const std::vector<int>& perm, std::vector<Rational> masses = {});
};

struct AtomPartition {
    std::vector<std::vector<int>> blocks;   // sorted atoms, blocks sorted by first atom
    std::vector<Rational> mass;             // per block

    std::size_t size() const { return blocks.size(); }
    std::vector<int> block_of(std::size_t atoms) const;
};

AtomPartition make_partition(const std::vector<std::vector<int>>& blocks, const std::vector<Rational>& masses);

// Repeated join of the current partition with its pullback (atom k is labelled by
// its block and the set of blocks its image meets) until stable.
AtomPartition refine_invariant_partition(const MarkovSpec& spec, std::size_t bound);

// One block per permutation cycle.
AtomPartition invariant_blocks_from_cycles(const std::vector<int>& perm, const std::vector<Rational>& masses = {});

// Blocks B with preimage(B) = B.
bool is_invariant(const MarkovSpec& spec, const AtomPartition& part);

// Block-wise mass-weighted average of an atom function.
template <class T>
std::vector<T> expectation_EF(const AtomPartition& part, const std::vector<Rational>& masses, const std::vector<T>& g);

// (g o F) for a permutation: (Ug)[k] = g[perm[k]].
template <class T>
std::vector<T> compose_permutation(const std::vector<int>& perm, const std::vector<T>& g) {
    std::vector<T> out(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) out[k] = g[static_cast<std::size_t>(perm[k])];
    return out;
}

// sum_k |g_k|^p m_k.
double atom_norm_pow(const std::vector<Rational>& masses, const std::vector<double>& g, double p);

struct MarkovSystem {
    std::shared_ptr<DyadicTree> tree;
    BuiltinMap map;
    AtomPartition invariant;
    AtomPartition refined;
};
// Space model and map for an admissible permutation spec.
MarkovSystem markov_system(const MarkovSpec& spec);

CompactSet markov_tower_on(const MapOracle& F, const DyadicTree& tree, double eps, std::size_t n, double p,
                           const GridSpec& grid);
CompactSet markov_tower(const MarkovSpec& spec, double eps, std::size_t n, double p, const GridSpec& grid);

}  // namespace koop
