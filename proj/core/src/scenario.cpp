#include "robustutil/scenario.hpp"

#include <cmath>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "robustutil/errors.hpp"

namespace robustutil {
namespace {

using nlohmann::json;

[[noreturn]] void field_error(std::string_view source, const std::string& field,
                              const std::string& what) {
    throw ParseError(std::string(source) + ": field '" + field + "': " + what);
}

double number_at(const json& j, std::string_view source, const std::string& field) {
    if (!j.is_number()) field_error(source, field, "expected a number");
    return j.get<double>();
}

std::vector<double> number_array(const json& j, std::string_view source, const std::string& field) {
    if (!j.is_array()) field_error(source, field, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(number_at(j[i], source, field + "[" + std::to_string(i) + "]"));
    }
    return out;
}

const json& required(const json& doc, const char* key, std::string_view source) {
    const auto it = doc.find(key);
    if (it == doc.end()) field_error(source, key, "missing");
    return *it;
}

ConstraintSet parse_constraints(const json& doc, std::string_view source) {
    ConstraintSet cs;
    const auto it = doc.find("constraints");
    if (it == doc.end()) return cs;
    if (!it->is_array()) field_error(source, "constraints", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
        const auto& c = (*it)[i];
        const std::string base = "constraints[" + std::to_string(i) + "]";
        if (!c.is_object()) field_error(source, base, "expected an object");
        Constraint con;
        const auto& obs = required(c, "observable", source);
        if (!obs.is_string()) field_error(source, base + ".observable", "expected a string");
        con.observable = obs.get<std::string>();
        const auto& kind = required(c, "kind", source);
        if (!kind.is_string()) field_error(source, base + ".kind", "expected \"ge\" or \"eq\"");
        const auto k = kind.get<std::string>();
        if (k == "ge") {
            con.kind = ConstraintKind::GE;
        } else if (k == "eq") {
            con.kind = ConstraintKind::EQ;
        } else {
            field_error(source, base + ".kind", "expected \"ge\" or \"eq\", got \"" + k + "\"");
        }
        con.bound = number_at(required(c, "bound", source), source, base + ".bound");
        cs.items.push_back(std::move(con));
    }
    return cs;
}

FiniteMarket parse_explicit_market(const json& doc, std::string_view source) {
    auto probs = number_array(required(doc, "probs", source), source, "probs");
    FiniteMarket::ObservableMap observables;
    if (const auto it = doc.find("observables"); it != doc.end()) {
        if (!it->is_object()) field_error(source, "observables", "expected an object");
        for (const auto& [id, values] : it->items()) {
            observables.emplace(id, number_array(values, source, "observables." + id));
        }
    }
    double price_tol = -1.0;
    if (const auto it = doc.find("price_tolerance"); it != doc.end()) {
        price_tol = number_at(*it, source, "price_tolerance");
    }
    FiniteMarket::PriceMap prices;
    if (const auto it = doc.find("price_observables"); it != doc.end()) {
        if (!it->is_object()) field_error(source, "price_observables", "expected an object");
        for (const auto& [id, value] : it->items()) {
            const double v = number_at(value, source, "price_observables." + id);
            const double tol = price_tol >= 0.0 ? price_tol : 1e-9 * (1.0 + std::abs(v));
            prices.emplace(id, PriceObservable{v, tol});
        }
    }
    return FiniteMarket(std::move(probs), std::move(observables), std::move(prices));
}

LognormalSpec parse_generator(const json& gen, std::string_view source, int default_nodes) {
    if (!gen.is_object()) field_error(source, "generator", "expected an object");
    const auto& type = required(gen, "type", source);
    if (!type.is_string() || type.get<std::string>() != "lognormal") {
        field_error(source, "generator.type", "only \"lognormal\" is supported");
    }
    LognormalSpec spec;
    spec.sigma = number_at(required(gen, "sigma", source), source, "generator.sigma");
    spec.T = number_at(required(gen, "T", source), source, "generator.T");
    spec.s0 = 1.0;
    if (const auto it = gen.find("s0"); it != gen.end()) {
        spec.s0 = number_at(*it, source, "generator.s0");
    }
    spec.nodes = default_nodes;
    if (const auto it = gen.find("nodes"); it != gen.end()) {
        if (!it->is_number_integer()) field_error(source, "generator.nodes", "expected an integer");
        spec.nodes = it->get<int>();
    }
    return spec;
}

}  // namespace

Scenario parse_scenario(std::string_view text, std::string_view source, int default_nodes) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string(source) + ": " + e.what());
    }
    if (!doc.is_object()) throw ParseError(std::string(source) + ": top level must be an object");

    std::optional<LognormalSpec> generator;
    auto market = [&] {
        if (const auto it = doc.find("generator"); it != doc.end()) {
            generator = parse_generator(*it, source, default_nodes);
            return gauss_hermite_market(*generator);
        }
        return parse_explicit_market(doc, source);
    }();

    auto constraints = parse_constraints(doc, source);
    constraints.validate(market);

    std::map<std::string, std::vector<double>> vectors;
    if (const auto it = doc.find("vectors"); it != doc.end()) {
        if (!it->is_object()) field_error(source, "vectors", "expected an object");
        for (const auto& [name, values] : it->items()) {
            auto v = number_array(values, source, "vectors." + name);
            if (v.size() != market.size()) {
                throw ValidationError(std::string(source) + ": vector '" + name +
                                      "' length does not match the number of states");
            }
            vectors.emplace(name, std::move(v));
        }
    }
    std::vector<std::vector<double>> densities;
    if (const auto it = doc.find("densities"); it != doc.end()) {
        if (!it->is_array()) field_error(source, "densities", "expected an array of arrays");
        for (std::size_t i = 0; i < it->size(); ++i) {
            auto d = number_array((*it)[i], source, "densities[" + std::to_string(i) + "]");
            if (d.size() != market.size()) {
                throw ValidationError(std::string(source) + ": densities[" + std::to_string(i) +
                                      "] length does not match the number of states");
            }
            densities.push_back(std::move(d));
        }
    }
    return Scenario{std::move(market), std::move(constraints), std::move(vectors),
                    std::move(densities), generator};
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open scenario file '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str(), path.string());
}

std::string write_scenario_json(const FiniteMarket& market, const ConstraintSet& constraints) {
    json doc;
    const auto p = market.probs();
    doc["probs"] = std::vector<double>(p.begin(), p.end());
    doc["observables"] = json::object();
    for (const auto& [id, values] : market.observables()) doc["observables"][id] = values;
    doc["price_observables"] = json::object();
    double tol = 0.0;
    for (const auto& [id, price] : market.price_observables()) {
        doc["price_observables"][id] = price.initial_value;
        tol = std::max(tol, price.tolerance);
    }
    if (!market.price_observables().empty()) doc["price_tolerance"] = tol;
    doc["constraints"] = json::array();
    for (const auto& c : constraints.items) {
        doc["constraints"].push_back({{"observable", c.observable},
                                      {"kind", c.kind == ConstraintKind::GE ? "ge" : "eq"},
                                      {"bound", c.bound}});
    }
    return doc.dump(2) + "\n";
}

}  // namespace robustutil
