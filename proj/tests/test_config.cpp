#include "koop/config.hpp"
#include "koop/errors.hpp"

#include <doctest.h>

using namespace koop;

TEST_CASE("minimal config") {
    auto c = parse_config(json::parse(R"({
        "space": {"kind": "interval"}, "depth": 5, "map": {"kind": "identity"},
        "dictionary": {"kind": "haar", "count": 4},
        "residual": {"mode": "P2Oracle"},
        "tower": {"mode": "Sigma2General", "epsilon": 0.5, "n2": [4], "n1": [2]},
        "grid": {"mesh": "1/4", "radius": 2}})"));
    REQUIRE(c.space);
    CHECK(c.space->kind == SpaceKind::UnitInterval);
    CHECK(c.depth == 5);
    CHECK(c.dictionary.count == 4u);
    CHECK(c.residual.mode == ResidualMode::P2Oracle);
    REQUIRE(c.tower);
    CHECK(c.tower->n2 == std::vector<std::size_t>{4});
    CHECK(c.grid.mesh == Rational(1, 4));
}

TEST_CASE("strict loader rejects unknown keys and bad versions") {
    CHECK_THROWS_AS(parse_config(json::parse(R"({"space": {"kind": "interval"}, "colour": 3})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"schema_version": 7})")), ConfigError);
    CHECK_THROWS_AS(parse_space(json::parse(R"({"kind": "torus"})")), ConfigError);
    CHECK_THROWS_AS(parse_map(json::parse(R"({"kind": "cycle"})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"depth": "deep"})")), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("space and map round trip") {
    auto s = parse_space(json::parse(R"({"kind": "union", "weights": ["1/3", "2/3"],
        "components": [{"kind": "circle"}, {"kind": "atoms", "masses": ["1/2", "1/4", "1/4"], "balanced": true}]})"));
    CHECK(s.kind == SpaceKind::DisjointUnion);
    CHECK(s.weights[1] == Rational(2, 3));
    auto back = parse_space(space_to_json(s));
    CHECK(space_to_json(back) == space_to_json(s));

    for (const char* text : {R"({"kind": "rotation", "theta": "1/4"})", R"({"kind": "rotation", "theta": "golden"})",
                             R"({"kind": "cycle", "q": 3})", R"({"kind": "permutation", "perm": [1, 0, 2]})",
                             R"({"kind": "union", "blocks": [{"kind": "identity"}, {"kind": "halving"}]})"}) {
        auto m = parse_map(json::parse(text));
        CHECK(map_to_json(parse_map(map_to_json(m))) == map_to_json(m));
    }
    auto pt = parse_map(json::parse(R"({"kind": "rotation", "prime_tail": [3, 5]})"));
    REQUIRE(pt.irrational);
    CHECK(pt.irrational->value() > 0.625);
}

TEST_CASE("markov and adversary sections") {
    auto c = parse_config(json::parse(R"({
        "markov": {"atoms": ["1/4", "1/4", "1/4", "1/4"], "images": [[1], [2], [3], [0]],
                   "base_blocks": [[0, 1], [2, 3]], "epsilon": 0.25, "n": [4], "p": 2},
        "adversary": {"experiment": "dichotomy", "blocks": [{"kind": "cycle", "q": 2}, {"kind": "golden"}],
                      "schedule": [4, 5]}})"));
    REQUIRE(c.markov);
    CHECK(c.markov->spec.atom_count() == 4);
    CHECK(c.markov->epsilon == 0.25);
    auto back = parse_markov_spec(markov_spec_to_json(c.markov->spec));
    CHECK(back.images == c.markov->spec.images);
    REQUIRE(c.adversary);
    CHECK(c.adversary->blocks.size() == 2);
    CHECK(c.adversary->blocks[1].kind == BlockKind::GoldenRotation);
    CHECK(c.adversary->dichotomy.schedule == std::vector<int>{4, 5});
    CHECK_THROWS_AS(parse_config(json::parse(R"({"adversary": {"experiment": "lock"}})")), ConfigError);
}

TEST_CASE("references") {
    auto r = parse_reference(json::parse(R"({"kind": "rotation", "theta": "1/3", "eps": 0})"));
    CHECK(r.spectrum.points.size() == 3);
    auto u = parse_reference(json::parse(R"({"kind": "union", "parts": [{"kind": "disk", "center": [0, 0], "radius": 0.5},
                                                                        {"kind": "finite", "points": [[1, 0]]}]})"));
    CHECK(u.spectrum.parts.size() == 2);
}

TEST_CASE("compact set json round trip is exact") {
    CompactSet s;
    s.tower = "Sigma2General";
    s.epsilon = 0.5;
    s.threshold = 0.25;
    s.indices = {{"n2", 4}, {"n1", 2}};
    s.points = {ComplexQ{Rational(1, 3), Rational(-1, 4)}, ComplexQ{Rational(1), Rational(0)}};
    s.warnings = {"w"};
    auto back = compact_set_from_json(json::parse(dump(compact_set_to_json(s))));
    CHECK(same_set(s, back));
    CHECK(back.points[0].re == Rational(1, 3));
    CHECK(back.indices.at("n1") == 2);
    CHECK(dump(compact_set_to_json(back)) == dump(compact_set_to_json(s)));
}

TEST_CASE("dictionary factory") {
    auto t = DyadicTree::build(SpaceDesc::interval(), 3);
    DictionaryConfig d;
    CHECK(make_dictionary(d, t, 2.0)->size() == 8);
    d.kind = "indicator";
    d.level = 2;
    CHECK(make_dictionary(d, t, 2.0)->size() == 4);
    d.kind = "theta";
    CHECK(make_dictionary(d, t, 2.0)->kind() == "theta");
    CHECK(base_algorithm_names().size() == 8);
    AlgorithmContext ctx;
    CHECK_THROWS_AS(base_algorithm("gamma_base", ctx), ConfigError);
}
