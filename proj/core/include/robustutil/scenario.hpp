#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "robustutil/market.hpp"

namespace robustutil {

/// Everything a scenario document can carry. `vectors` feeds the norms
/// command; `densities` feeds the minimax command.
struct Scenario {
    FiniteMarket market;
    ConstraintSet constraints;
    std::map<std::string, std::vector<double>> vectors;
    std::vector<std::vector<double>> densities;
    std::optional<LognormalSpec> generator;
};

/// Reads and validates a scenario file. Throws ParseError (with line/column
/// or field context) or ValidationError (naming the violated invariant).
Scenario load_scenario(const std::filesystem::path& path);

/// Same as load_scenario for an in-memory document; `source` names it in errors.
/// `default_nodes` is used when a generator block omits "nodes".
Scenario parse_scenario(std::string_view text, std::string_view source = "<memory>",
                        int default_nodes = 64);

/// Explicit-form document (probs / observables / price_observables /
/// constraints), pretty-printed with two-space indent.
std::string write_scenario_json(const FiniteMarket& market, const ConstraintSet& constraints);

}  // namespace robustutil
