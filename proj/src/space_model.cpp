#include "koop/space_model.hpp"

#include "koop/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <sstream>

namespace koop {

Grouping Grouping::single(int atom) {
    Grouping g;
    g.leaf = atom;
    return g;
}

Grouping Grouping::pair(Grouping a, Grouping b) {
    Grouping g;
    g.kids.push_back(std::move(a));
    g.kids.push_back(std::move(b));
    return g;
}

Grouping Grouping::balanced(int first, int count) {
    if (count <= 0) throw ConfigError("empty grouping");
    if (count == 1) return single(first);
    int left = (count + 1) / 2;
    return pair(balanced(first, left), balanced(first + left, count - left));
}

std::vector<int> Grouping::atoms() const {
    if (is_leaf()) return {leaf};
    auto a = kids[0].atoms();
    auto b = kids[1].atoms();
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

int Grouping::leftmost() const { return is_leaf() ? leaf : kids[0].leftmost(); }

SpaceDesc SpaceDesc::interval() { return SpaceDesc{}; }

SpaceDesc SpaceDesc::circle() {
    SpaceDesc s;
    s.kind = SpaceKind::Circle;
    return s;
}

SpaceDesc SpaceDesc::atoms(std::vector<Rational> masses, std::optional<Grouping> grouping) {
    SpaceDesc s;
    s.kind = SpaceKind::FiniteAtoms;
    s.masses = std::move(masses);
    s.grouping = std::move(grouping);
    return s;
}

SpaceDesc SpaceDesc::uniform_atoms(int count, bool balanced_grouping) {
    std::vector<Rational> m(static_cast<std::size_t>(count), Rational(1, count));
    std::optional<Grouping> g;
    if (balanced_grouping) g = Grouping::balanced(0, count);
    return atoms(std::move(m), std::move(g));
}

SpaceDesc SpaceDesc::disjoint_union(std::vector<Rational> weights, std::vector<SpaceDesc> components) {
    SpaceDesc s;
    s.kind = SpaceKind::DisjointUnion;
    s.weights = std::move(weights);
    s.components = std::move(components);
    return s;
}

bool operator==(const Point& a, const Point& b) {
    return a.comp == b.comp && a.atom == b.atom && std::memcmp(&a.x, &b.x, sizeof(double)) == 0;
}
bool operator!=(const Point& a, const Point& b) { return !(a == b); }
bool operator<(const Point& a, const Point& b) {
    if (a.comp != b.comp) return a.comp < b.comp;
    if (a.atom != b.atom) return a.atom < b.atom;
    return a.x < b.x;
}

std::string to_string(const Point& p) {
    std::ostringstream os;
    os.precision(17);
    os << "(" << p.comp << "," << p.x << "," << p.atom << ")";
    return os.str();
}

namespace {

bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

void check_grouping(const Grouping& g, std::vector<int>& seen, std::size_t count) {
    if (g.is_leaf()) {
        if (g.leaf < 0 || static_cast<std::size_t>(g.leaf) >= count)
            throw ConfigError("grouping names unknown atom " + std::to_string(g.leaf));
        if (seen[static_cast<std::size_t>(g.leaf)]++)
            throw ConfigError("grouping repeats atom " + std::to_string(g.leaf));
        return;
    }
    if (g.kids.size() != 2) throw ConfigError("grouping nodes need exactly two children");
    check_grouping(g.kids[0], seen, count);
    check_grouping(g.kids[1], seen, count);
}

std::string bits_of(std::size_t k, int width) {
    std::string s(static_cast<std::size_t>(width), '0');
    for (int i = width - 1; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = (k & 1) ? '1' : '0';
        k >>= 1;
    }
    return s;
}

}  // namespace

DyadicTree DyadicTree::build(const SpaceDesc& space, int depth, std::size_t atom_limit) {
    if (depth < 0) throw LevelOutOfRange("negative depth");
    if (depth > 60) throw DepthOverflow("depth " + std::to_string(depth) + " exceeds 60");
    DyadicTree t;
    t.space_ = space;
    t.depth_ = depth;

    std::vector<const SpaceDesc*> comps;
    if (space.kind == SpaceKind::DisjointUnion) {
        if (space.components.empty()) throw ConfigError("union without components");
        if (space.weights.size() != space.components.size())
            throw ConfigError("union needs one weight per component");
        Rational total = 0;
        for (std::size_t i = 0; i < space.components.size(); ++i) {
            if (space.weights[i] <= 0) throw ConfigError("union weights must be positive");
            if (space.components[i].kind == SpaceKind::DisjointUnion)
                throw ConfigError("nested unions are not supported");
            total += space.weights[i];
            comps.push_back(&space.components[i]);
            t.comp_weight_.push_back(space.weights[i]);
        }
        if (total != 1) throw ConfigError("union weights must sum to 1, got " + to_string(total));
    } else {
        comps.push_back(&space);
        t.comp_weight_.push_back(Rational(1));
    }

    for (const SpaceDesc* c : comps) {
        t.comp_kind_.push_back(c->kind);
        t.comp_weight_d_.push_back(to_double(t.comp_weight_[t.comp_kind_.size() - 1]));
        std::vector<FlatGroup> flat;
        if (c->kind == SpaceKind::FiniteAtoms) {
            if (c->masses.empty()) throw ConfigError("atom space without atoms");
            Rational total = 0;
            for (const auto& m : c->masses) {
                if (m <= 0) throw ConfigError("atom masses must be positive");
                total += m;
            }
            if (total != 1) throw ConfigError("atom masses must sum to 1, got " + to_string(total));
            Grouping g;
            if (c->grouping) {
                g = *c->grouping;
            } else {
                if (!is_power_of_two(c->masses.size()))
                    throw NonDyadicAtomCount(std::to_string(c->masses.size()) +
                                             " atoms need an explicit binary grouping");
                g = Grouping::balanced(0, static_cast<int>(c->masses.size()));
            }
            std::vector<int> seen(c->masses.size(), 0);
            check_grouping(g, seen, c->masses.size());
            for (int s : seen)
                if (s != 1) throw ConfigError("grouping must cover every atom once");
            std::function<int(const Grouping&)> flatten = [&](const Grouping& gg) -> int {
                int id = static_cast<int>(flat.size());
                flat.emplace_back();
                flat[static_cast<std::size_t>(id)].atoms = gg.atoms();
                Rational m = 0;
                for (int a : flat[static_cast<std::size_t>(id)].atoms) m += c->masses[static_cast<std::size_t>(a)];
                flat[static_cast<std::size_t>(id)].mass = m;
                if (gg.is_leaf()) {
                    flat[static_cast<std::size_t>(id)].leaf = gg.leaf;
                } else {
                    int l = flatten(gg.kids[0]);
                    int r = flatten(gg.kids[1]);
                    flat[static_cast<std::size_t>(id)].left = l;
                    flat[static_cast<std::size_t>(id)].right = r;
                }
                return id;
            };
            flatten(g);
            t.comp_masses_.push_back(c->masses);
        } else {
            t.comp_masses_.emplace_back();
        }
        t.comp_group_.push_back(std::move(flat));
    }

    const auto ncomp = static_cast<std::uint32_t>(comps.size());

    auto root_entry_for_comp = [&](std::uint32_t c, int level, const std::string& path) {
        Entry e;
        if (t.comp_kind_[c] == SpaceKind::FiniteAtoms) {
            Node n{Node::Group, c, c + 1, 0, path};
            t.nodes_.push_back(n);
            t.node_mass_d_.push_back(to_double(t.node_mass(n)));
            e.node = static_cast<int>(t.nodes_.size() - 1);
        } else {
            e.implicit = true;
            e.comp = c;
            e.root_level = level;
            e.root_path = path;
        }
        return e;
    };

    Level l0;
    if (ncomp >= 2) {
        Node n{Node::Union, 0, ncomp, -1, ""};
        t.nodes_.push_back(n);
        t.node_mass_d_.push_back(1.0);
        Entry e;
        e.node = 0;
        l0.entries.push_back(e);
    } else {
        l0.entries.push_back(root_entry_for_comp(0, 0, ""));
    }
    t.levels_.push_back(std::move(l0));

    for (int m = 1; m <= depth; ++m) {
        Level next;
        Level& prev = t.levels_[static_cast<std::size_t>(m - 1)];
        for (auto& e : prev.entries) {
            e.next = next.entries.size();
            if (e.implicit) {
                Entry c = e;
                c.count = e.count * 2;
                next.entries.push_back(c);
                e.nnext = 1;
                continue;
            }
            const Node node = t.nodes_[static_cast<std::size_t>(e.node)];
            if (node.type == Node::Union) {
                std::uint32_t n = node.comp_end - node.comp;
                std::uint32_t left = (n + 1) / 2;
                std::uint32_t ranges[2][2] = {{node.comp, node.comp + left}, {node.comp + left, node.comp_end}};
                for (int side = 0; side < 2; ++side) {
                    std::string path = node.path + (side ? "1" : "0");
                    std::uint32_t a = ranges[side][0], b = ranges[side][1];
                    if (b - a >= 2) {
                        Node u{Node::Union, a, b, -1, path};
                        t.nodes_.push_back(u);
                        t.node_mass_d_.push_back(to_double(t.node_mass(u)));
                        Entry ce;
                        ce.node = static_cast<int>(t.nodes_.size() - 1);
                        next.entries.push_back(ce);
                    } else {
                        next.entries.push_back(root_entry_for_comp(a, m, path));
                    }
                }
                e.nnext = 2;
            } else {
                const FlatGroup& g = t.comp_group_[node.comp][static_cast<std::size_t>(node.gnode)];
                if (g.leaf >= 0) {
                    Entry ce = e;
                    next.entries.push_back(ce);
                    e.nnext = 1;
                } else {
                    int kids[2] = {g.left, g.right};
                    for (int side = 0; side < 2; ++side) {
                        Node k{Node::Group, node.comp, node.comp + 1, kids[side], node.path + (side ? "1" : "0")};
                        t.nodes_.push_back(k);
                        t.node_mass_d_.push_back(to_double(t.node_mass(k)));
                        Entry ce;
                        ce.node = static_cast<int>(t.nodes_.size() - 1);
                        next.entries.push_back(ce);
                    }
                    e.nnext = 2;
                }
            }
        }
        t.levels_.push_back(std::move(next));
    }

    for (auto& lv : t.levels_) {
        std::size_t off = 0;
        lv.entry_of_comp.assign(ncomp, -1);
        lv.entry_of_atom.assign(ncomp, {});
        for (std::uint32_t c = 0; c < ncomp; ++c)
            if (t.comp_kind_[c] == SpaceKind::FiniteAtoms) lv.entry_of_atom[c].assign(t.comp_masses_[c].size(), -1);
        for (std::size_t i = 0; i < lv.entries.size(); ++i) {
            auto& e = lv.entries[i];
            e.offset = off;
            off += e.count;
            if (off > atom_limit)
                throw DepthOverflow("level exceeds the atom limit of " + std::to_string(atom_limit));
            if (e.implicit) {
                lv.entry_of_comp[e.comp] = static_cast<int>(i);
                continue;
            }
            const Node& n = t.nodes_[static_cast<std::size_t>(e.node)];
            if (n.type == Node::Union) {
                for (std::uint32_t c = n.comp; c < n.comp_end; ++c) lv.entry_of_comp[c] = static_cast<int>(i);
            } else {
                for (int a : t.comp_group_[n.comp][static_cast<std::size_t>(n.gnode)].atoms)
                    lv.entry_of_atom[n.comp][static_cast<std::size_t>(a)] = static_cast<int>(i);
            }
        }
        lv.size = off;
    }
    return t;
}

void DyadicTree::check_level(int m) const {
    if (m < 0 || m > depth_)
        throw LevelOutOfRange("level " + std::to_string(m) + " outside [0," + std::to_string(depth_) + "]");
}

std::size_t DyadicTree::level_size(int m) const {
    check_level(m);
    return levels_[static_cast<std::size_t>(m)].size;
}

std::size_t DyadicTree::entry_index(int m, std::size_t idx) const {
    check_level(m);
    const auto& lv = levels_[static_cast<std::size_t>(m)];
    if (idx >= lv.size)
        throw UnknownAtom("atom " + std::to_string(idx) + " at level " + std::to_string(m));
    auto it = std::upper_bound(lv.entries.begin(), lv.entries.end(), idx,
                               [](std::size_t v, const Entry& e) { return v < e.offset; });
    return static_cast<std::size_t>(it - lv.entries.begin()) - 1;
}

Rational DyadicTree::node_mass(const Node& n) const {
    if (n.type == Node::Union) {
        Rational s = 0;
        for (std::uint32_t c = n.comp; c < n.comp_end; ++c) s += comp_weight_[c];
        return s;
    }
    return comp_weight_[n.comp] * comp_group_[n.comp][static_cast<std::size_t>(n.gnode)].mass;
}

double DyadicTree::entry_diam(const Entry& e, int m) const {
    if (e.implicit) {
        double len = std::ldexp(1.0, -(m - e.root_level));
        return comp_kind_[e.comp] == SpaceKind::Circle ? std::min(len, 0.5) : len;
    }
    const Node& n = nodes_[static_cast<std::size_t>(e.node)];
    if (n.type == Node::Union) return 1.0;
    return comp_group_[n.comp][static_cast<std::size_t>(n.gnode)].leaf >= 0 ? 0.0 : 1.0;
}

Atom DyadicTree::atom(int m, std::size_t idx) const {
    std::size_t ei = entry_index(m, idx);
    const Entry& e = levels_[static_cast<std::size_t>(m)].entries[ei];
    Atom a;
    a.id = AtomId{m, idx};
    a.diam = entry_diam(e, m);
    if (e.implicit) {
        int rel = m - e.root_level;
        std::size_t k = idx - e.offset;
        a.region = RegionKind::Segment;
        a.comp = e.comp;
        a.comp_end = e.comp + 1;
        a.lo = std::ldexp(static_cast<double>(k), -rel);
        a.hi = std::ldexp(static_cast<double>(k + 1), -rel);
        a.path = e.root_path + bits_of(k, rel);
        a.mass = comp_weight_[e.comp] / Rational(Integer(1) << rel);
        a.rep = Point::at(a.lo, e.comp);
        a.terminal = false;
    } else {
        const Node& n = nodes_[static_cast<std::size_t>(e.node)];
        a.path = n.path;
        a.mass = node_mass(n);
        a.comp = n.comp;
        a.comp_end = n.comp_end;
        if (n.type == Node::Union) {
            a.region = RegionKind::Components;
            a.rep = rep(m, idx);
        } else {
            const FlatGroup& g = comp_group_[n.comp][static_cast<std::size_t>(n.gnode)];
            a.region = RegionKind::AtomGroup;
            a.atoms = g.atoms;
            a.rep = Point::atom_at(static_cast<std::uint32_t>(g.atoms.front()), n.comp);
            a.terminal = g.leaf >= 0;
        }
    }
    a.mass_d = to_double(a.mass);
    return a;
}

Rational DyadicTree::atom_mass(const AtomId& id) const { return atom(id.level, id.index).mass; }

double DyadicTree::atom_mass_d(int m, std::size_t idx) const {
    std::size_t ei = entry_index(m, idx);
    const Entry& e = levels_[static_cast<std::size_t>(m)].entries[ei];
    if (e.implicit) return std::ldexp(comp_weight_d_[e.comp], -(m - e.root_level));
    return node_mass_d_[static_cast<std::size_t>(e.node)];
}

Rational DyadicTree::atom_mass_approx(const AtomId& id, int n0) const {
    return floor_dyadic(atom_mass(id), n0);
}

Point DyadicTree::rep(int m, std::size_t idx) const {
    std::size_t ei = entry_index(m, idx);
    const Entry& e = levels_[static_cast<std::size_t>(m)].entries[ei];
    if (e.implicit)
        return Point::at(std::ldexp(static_cast<double>(idx - e.offset), -(m - e.root_level)), e.comp);
    const Node& n = nodes_[static_cast<std::size_t>(e.node)];
    std::uint32_t c = n.comp;
    if (n.type == Node::Union) {
        if (comp_kind_[c] == SpaceKind::FiniteAtoms)
            return Point::atom_at(static_cast<std::uint32_t>(comp_group_[c][0].atoms.front()), c);
        return Point::at(0.0, c);
    }
    return Point::atom_at(static_cast<std::uint32_t>(comp_group_[c][static_cast<std::size_t>(n.gnode)].atoms.front()), c);
}

void DyadicTree::validate_point(const Point& x) const {
    if (x.comp >= comp_kind_.size()) throw PointOutsideSpace("component " + std::to_string(x.comp) + " does not exist");
    switch (comp_kind_[x.comp]) {
        case SpaceKind::UnitInterval:
            if (!(x.x >= 0.0 && x.x <= 1.0)) throw PointOutsideSpace("interval point " + to_string(x));
            break;
        case SpaceKind::Circle:
            if (!(x.x >= 0.0 && x.x < 1.0)) throw PointOutsideSpace("circle point " + to_string(x));
            break;
        case SpaceKind::FiniteAtoms:
            if (x.atom >= comp_masses_[x.comp].size()) throw PointOutsideSpace("atom point " + to_string(x));
            break;
        default:
            throw PointOutsideSpace("malformed point");
    }
}

std::size_t DyadicTree::locate(int m, const Point& x) const {
    check_level(m);
    validate_point(x);
    const auto& lv = levels_[static_cast<std::size_t>(m)];
    int ei = lv.entry_of_comp[x.comp];
    if (ei < 0) ei = lv.entry_of_atom[x.comp][x.atom];
    const Entry& e = lv.entries[static_cast<std::size_t>(ei)];
    if (!e.implicit) return e.offset;
    auto k = static_cast<std::size_t>(std::ldexp(x.x, m - e.root_level));
    if (k >= e.count) k = e.count - 1;  // x = 1 on the closed interval
    return e.offset + k;
}

bool DyadicTree::contains(const Atom& a, const Point& x) const {
    validate_point(x);
    switch (a.region) {
        case RegionKind::Components:
            return x.comp >= a.comp && x.comp < a.comp_end;
        case RegionKind::AtomGroup:
            return x.comp == a.comp && std::find(a.atoms.begin(), a.atoms.end(), static_cast<int>(x.atom)) != a.atoms.end();
        case RegionKind::Segment:
            if (x.comp != a.comp) return false;
            if (x.x >= a.lo && x.x < a.hi) return true;
            return x.x == 1.0 && a.hi == 1.0 && comp_kind_[a.comp] == SpaceKind::UnitInterval;
    }
    return false;
}

std::vector<std::size_t> DyadicTree::children(int m, std::size_t idx) const {
    if (m >= depth_) throw LevelOutOfRange("no children below the deepest level");
    std::size_t ei = entry_index(m, idx);
    const Entry& e = levels_[static_cast<std::size_t>(m)].entries[ei];
    const auto& nx = levels_[static_cast<std::size_t>(m + 1)].entries;
    if (e.implicit) {
        std::size_t base = nx[e.next].offset + 2 * (idx - e.offset);
        return {base, base + 1};
    }
    if (e.nnext == 1) return {nx[e.next].offset};
    return {nx[e.next].offset, nx[e.next + 1].offset};
}

bool DyadicTree::splits(int m, std::size_t idx) const {
    std::size_t ei = entry_index(m, idx);
    const Entry& e = levels_[static_cast<std::size_t>(m)].entries[ei];
    if (e.implicit) return true;
    const Node& n = nodes_[static_cast<std::size_t>(e.node)];
    if (n.type == Node::Union) return true;
    return comp_group_[n.comp][static_cast<std::size_t>(n.gnode)].leaf < 0;
}

std::vector<std::size_t> DyadicTree::terminal_atoms(int m) const {
    check_level(m);
    std::vector<std::size_t> out;
    for (const auto& e : levels_[static_cast<std::size_t>(m)].entries) {
        if (e.implicit) continue;
        const Node& n = nodes_[static_cast<std::size_t>(e.node)];
        if (n.type == Node::Group && comp_group_[n.comp][static_cast<std::size_t>(n.gnode)].leaf >= 0)
            out.push_back(e.offset);
    }
    return out;
}

double DyadicTree::mesh(int m) const {
    check_level(m);
    double best = 0.0;
    for (const auto& e : levels_[static_cast<std::size_t>(m)].entries) best = std::max(best, entry_diam(e, m));
    return best;
}

double DyadicTree::min_diam(int m) const {
    check_level(m);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : levels_[static_cast<std::size_t>(m)].entries) best = std::min(best, entry_diam(e, m));
    return best;
}

double DyadicTree::distance(const Point& a, const Point& b) const {
    validate_point(a);
    validate_point(b);
    if (a.comp != b.comp) return 1.0;
    switch (comp_kind_[a.comp]) {
        case SpaceKind::UnitInterval:
            return std::abs(a.x - b.x);
        case SpaceKind::Circle: {
            double d = std::abs(a.x - b.x);
            return std::min(d, 1.0 - d);
        }
        default:
            return a.atom == b.atom ? 0.0 : 1.0;
    }
}

}  // namespace koop
