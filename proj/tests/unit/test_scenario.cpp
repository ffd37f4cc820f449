#include <filesystem>
#include <string>

#include "doctest.h"
#include "robustutil/errors.hpp"
#include "robustutil/scenario.hpp"

using namespace robustutil;

namespace {

std::filesystem::path data(const char* name) {
    return std::filesystem::path(ROBUSTUTIL_TEST_DATA_DIR) / name;
}

}  // namespace

TEST_CASE("two-state file echoes its content") {
    const auto sc = load_scenario(data("two_state.json"));
    CHECK(sc.market.size() == 2);
    REQUIRE(sc.constraints.size() == 1);
    CHECK(sc.constraints.items[0].observable == "h");
    CHECK(sc.constraints.items[0].kind == ConstraintKind::GE);
    CHECK(sc.constraints.items[0].bound == 1.5);
    CHECK_FALSE(sc.generator);
}

TEST_CASE("validation errors name the invariant") {
    CHECK_THROWS_WITH_AS(load_scenario(data("bad_sum.json")), doctest::Contains("probs must sum to 1"),
                         ValidationError);
    CHECK_THROWS_WITH_AS(load_scenario(data("undeclared.json")), doctest::Contains("'g'"), ValidationError);
}

TEST_CASE("parse errors carry location or field context") {
    CHECK_THROWS_AS(load_scenario(data("malformed.json")), ParseError);
    CHECK_THROWS_WITH_AS(load_scenario(data("does_not_exist.json")), doctest::Contains("does_not_exist.json"),
                         ParseError);
    CHECK_THROWS_WITH_AS(parse_scenario(R"({"probs": [0.5, "x"]})"), doctest::Contains("probs[1]"), ParseError);
    CHECK_THROWS_WITH_AS(parse_scenario(R"({"observables": {}})"), doctest::Contains("probs"), ParseError);
    CHECK_THROWS_WITH_AS(
        parse_scenario(R"({"probs": [1.0], "observables": {"h": [1]}, "constraints": [{"observable": "h", "kind": "le", "bound": 1}]})"),
        doctest::Contains("constraints[0].kind"), ParseError);
    CHECK_THROWS_AS(parse_scenario("[1, 2]"), ParseError);
    CHECK_THROWS_AS(parse_scenario(R"({"generator": {"type": "heston", "sigma": 1, "T": 1}})"), ParseError);
}

TEST_CASE("generator form builds the quadrature market") {
    const auto sc = load_scenario(data("bs.json"));
    REQUIRE(sc.generator);
    CHECK(sc.generator->nodes == 64);
    CHECK(sc.market.size() == 64);
    CHECK(sc.market.has_observable("S_T"));
    const auto defaulted = parse_scenario(R"({"generator": {"type": "lognormal", "sigma": 0.5, "T": 1}})", "inline", 24);
    CHECK(defaulted.market.size() == 24);
    CHECK(defaulted.constraints.empty());
}

TEST_CASE("vectors and densities are length-checked") {
    const auto sc = load_scenario(data("norms.json"));
    CHECK(sc.vectors.size() == 3);
    CHECK(sc.vectors.at("mixed")[1] == -3.0);
    CHECK_THROWS_AS(parse_scenario(R"({"probs": [0.5, 0.5], "vectors": {"v": [1]}})"), ValidationError);
    CHECK_THROWS_AS(parse_scenario(R"({"probs": [0.5, 0.5], "densities": [[1, 1, 1]]})"), ValidationError);
    const auto mm = load_scenario(data("minimax_two_state.json"));
    CHECK(mm.densities.size() == 2);
}

TEST_CASE("explicit documents round-trip") {
    const auto sc = load_scenario(data("two_state.json"));
    const std::string text = write_scenario_json(sc.market, sc.constraints);
    const auto back = parse_scenario(text);
    CHECK(back.market.size() == 2);
    CHECK(back.market.observable("h")[1] == 2.0);
    CHECK(back.constraints.items[0].bound == 1.5);

    // Explicit files reject probabilities below 1e-14, so use a rule whose
    // tail weights stay above that.
    const auto bs = parse_scenario(R"({"generator": {"type": "lognormal", "sigma": 0.5, "T": 1, "nodes": 16}})");
    const auto bs_back = parse_scenario(write_scenario_json(bs.market, bs.constraints));
    for (std::size_t i = 0; i < bs.market.size(); ++i) {
        CHECK(bs_back.market.probs()[i] == bs.market.probs()[i]);
        CHECK(bs_back.market.observable("S_T")[i] == bs.market.observable("S_T")[i]);
    }
    CHECK(bs_back.market.price_observables().count("S_T") == 1);

    const auto wide = load_scenario(data("bs.json"));
    CHECK_THROWS_AS(parse_scenario(write_scenario_json(wide.market, wide.constraints)), ValidationError);
}
