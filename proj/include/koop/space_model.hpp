#pragma once

#include "koop/rational.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace koop {

enum class SpaceKind { UnitInterval, Circle, FiniteAtoms, DisjointUnion };

// Binary grouping of atom indices: a leaf carries one atom, an inner node
// exactly two subgroups.
struct Grouping {
    int leaf = -1;
    std::vector<Grouping> kids;

    static Grouping single(int atom);
    static Grouping pair(Grouping a, Grouping b);
    // Splits [first, first+count) with the larger half on the left.
    static Grouping balanced(int first, int count);

    bool is_leaf() const { return kids.empty(); }
    std::vector<int> atoms() const;
    int leftmost() const;
};

struct SpaceDesc {
    SpaceKind kind = SpaceKind::UnitInterval;
    std::vector<Rational> masses;       // FiniteAtoms
    std::optional<Grouping> grouping;   // FiniteAtoms, required unless count is a power of two
    std::vector<Rational> weights;      // DisjointUnion
    std::vector<SpaceDesc> components;  // DisjointUnion

    static SpaceDesc interval();
    static SpaceDesc circle();
    static SpaceDesc atoms(std::vector<Rational> masses, std::optional<Grouping> grouping = {});
    static SpaceDesc uniform_atoms(int count, bool balanced_grouping = false);
    static SpaceDesc disjoint_union(std::vector<Rational> weights, std::vector<SpaceDesc> components);
};

// Interval/circle points use x in [0,1] (circle: [0,1)); atom spaces use
// atom. Union points name their component.
struct Point {
    std::uint32_t comp = 0;
    double x = 0.0;
    std::uint32_t atom = 0;

    static Point at(double x, std::uint32_t comp = 0) { return Point{comp, x, 0}; }
    static Point atom_at(std::uint32_t atom, std::uint32_t comp = 0) { return Point{comp, 0.0, atom}; }
};
bool operator==(const Point& a, const Point& b);
bool operator!=(const Point& a, const Point& b);
bool operator<(const Point& a, const Point& b);
std::string to_string(const Point& p);

struct AtomId {
    int level = 0;
    std::size_t index = 0;
};

enum class RegionKind { Components, Segment, AtomGroup };

struct Atom {
    AtomId id;
    std::string path;
    Rational mass;
    double mass_d = 0.0;
    Point rep;
    double diam = 0.0;
    RegionKind region = RegionKind::Segment;
    std::uint32_t comp = 0;
    std::uint32_t comp_end = 0;   // Components: [comp, comp_end)
    double lo = 0.0, hi = 1.0;    // Segment: [lo, hi)
    std::vector<int> atoms;       // AtomGroup
    bool terminal = false;        // carried unchanged to the next level
};

class DyadicTree {
public:
    static constexpr std::size_t kDefaultAtomLimit = std::size_t(1) << 28;

    static DyadicTree build(const SpaceDesc& space, int depth,
                            std::size_t atom_limit = kDefaultAtomLimit);

    const SpaceDesc& space() const { return space_; }
    int depth() const { return depth_; }
    std::size_t level_size(int m) const;
    std::size_t component_count() const { return comp_kind_.size(); }
    SpaceKind component_kind(std::uint32_t c) const { return comp_kind_.at(c); }
    const Rational& component_weight(std::uint32_t c) const { return comp_weight_.at(c); }

    Atom atom(int m, std::size_t idx) const;
    Rational atom_mass(const AtomId& id) const;
    double atom_mass_d(int m, std::size_t idx) const;
    // Dyadic lower approximation with absolute error <= 2^-n0 (exact for dyadic masses).
    Rational atom_mass_approx(const AtomId& id, int n0) const;

    Point rep(int m, std::size_t idx) const;
    std::size_t locate(int m, const Point& x) const;
    bool contains(const Atom& a, const Point& x) const;
    std::vector<std::size_t> children(int m, std::size_t idx) const;
    bool splits(int m, std::size_t idx) const;
    // Sorted indices of atoms at level m that are carried unchanged to m+1.
    std::vector<std::size_t> terminal_atoms(int m) const;
    double mesh(int m) const;
    double min_diam(int m) const;

    void validate_point(const Point& x) const;
    double distance(const Point& a, const Point& b) const;

private:
    struct Node {
        enum Type { Union, Group } type;
        std::uint32_t comp = 0, comp_end = 0;
        int gnode = -1;                // index into the component's flat grouping
        std::string path;
    };
    struct FlatGroup {
        int leaf = -1;
        int left = -1, right = -1;
        std::vector<int> atoms;
        Rational mass;   // unweighted mass inside the component
    };
    struct Entry {
        bool implicit = false;
        int node = -1;                 // skeleton node when !implicit
        std::uint32_t comp = 0;        // implicit: component
        int root_level = 0;            // implicit: level of the component root
        std::string root_path;         // implicit: path of the component root
        std::size_t offset = 0;
        std::size_t count = 1;
        std::size_t next = 0;          // first derived entry on the next level
        std::size_t nnext = 0;
    };
    struct Level {
        std::vector<Entry> entries;
        std::size_t size = 0;
        std::vector<int> entry_of_comp;                // -1: resolve per atom
        std::vector<std::vector<int>> entry_of_atom;   // per component
    };

    void check_level(int m) const;
    std::size_t entry_index(int m, std::size_t idx) const;
    Rational node_mass(const Node& n) const;
    double entry_diam(const Entry& e, int m) const;

    SpaceDesc space_;
    int depth_ = 0;
    std::vector<SpaceKind> comp_kind_;
    std::vector<Rational> comp_weight_;
    std::vector<double> comp_weight_d_;
    std::vector<std::vector<Rational>> comp_masses_;
    std::vector<std::vector<FlatGroup>> comp_group_;
    std::vector<Node> nodes_;
    std::vector<double> node_mass_d_;
    std::vector<Level> levels_;
};

}  // namespace koop
