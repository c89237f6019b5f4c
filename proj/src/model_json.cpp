#include "cbp/model_json.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <tuple>

namespace cbp {

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& msg) {
  throw ValidationError({"model file: " + msg});
}

const json& require(const json& obj, const char* key,
                    const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end())
    schema_error(where + ": missing required field \"" + key + "\"");
  return *it;
}

double require_number(const json& obj, const char* key,
                      const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number())
    schema_error(where + ": field \"" + key + "\" must be a number");
  return v.get<double>();
}

std::string state_ref(const json& v, const std::string& where) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer())
    return std::to_string(v.get<std::int64_t>());
  schema_error(where + ": state reference must be a string or integer");
}

}  // namespace

ModelSpec model_from_json(const json& doc) {
  if (!doc.is_object()) schema_error("top level must be an object");

  ModelSpec spec;
  const json& jspace = require(doc, "space", "space");
  if (!jspace.is_object()) schema_error("\"space\" must be an object");
  const json& jkind = require(jspace, "kind", "space");
  if (!jkind.is_string()) schema_error("space.kind must be a string");
  const std::string kind = jkind.get<std::string>();

  if (kind == "finite") {
    const json& jstates = require(jspace, "states", "space");
    if (!jstates.is_array()) schema_error("space.states must be an array");
    for (const auto& s : jstates)
      spec.space.states.push_back(state_ref(s, "space.states"));
    const json& jgen = require(jspace, "generator", "space");
    if (!jgen.is_array()) schema_error("space.generator must be an array");
    for (const auto& t : jgen) {
      if (!t.is_array() || t.size() != 3)
        schema_error("space.generator entries must be [from, to, rate]");
      RateEntry e;
      e.from = state_ref(t[0], "space.generator");
      e.to = state_ref(t[1], "space.generator");
      if (!t[2].is_number())
        schema_error("space.generator rate must be a number");
      e.rate = t[2].get<double>();
      spec.space.rates.push_back(std::move(e));
    }
    spec.space.kind = SpaceKind::finite;
  } else if (kind == "lattice_z1") {
    spec.space.kind = SpaceKind::lattice_z1;
    spec.space.up_rate = require_number(jspace, "up_rate", "space");
    spec.space.down_rate = require_number(jspace, "down_rate", "space");
    const json& jr = require(jspace, "window_radius", "space");
    if (!jr.is_number_integer())
      schema_error("space.window_radius must be an integer");
    spec.space.window_radius = jr.get<int>();
  } else {
    schema_error("space.kind must be \"finite\" or \"lattice_z1\", got \"" +
                 kind + "\"");
  }

  const json& jcats = require(doc, "catalysts", "catalysts");
  if (!jcats.is_array()) schema_error("\"catalysts\" must be an array");
  for (std::size_t i = 0; i < jcats.size(); ++i) {
    const json& jc = jcats[i];
    const std::string where = "catalysts[" + std::to_string(i) + "]";
    if (!jc.is_object()) schema_error(where + " must be an object");
    Catalyst c;
    c.site = state_ref(require(jc, "site", where), where);
    c.beta = require_number(jc, "beta", where);
    c.alpha = require_number(jc, "alpha", where);
    const json& jlaw = require(jc, "offspring", where);
    if (!jlaw.is_object())
      schema_error(where + ".offspring must map counts to probabilities");
    for (const auto& [key, val] : jlaw.items()) {
      int count = 0;
      try {
        std::size_t pos = 0;
        count = std::stoi(key, &pos);
        if (pos != key.size()) throw std::invalid_argument(key);
      } catch (...) {
        schema_error(where + ".offspring key \"" + key +
                     "\" is not an integer count");
      }
      if (!val.is_number())
        schema_error(where + ".offspring[\"" + key +
                     "\"] must be a probability");
      c.offspring.pmf().emplace_back(count, val.get<double>());
    }
    spec.catalysts.push_back(std::move(c));
  }

  spec.start = state_ref(require(doc, "start", "start"), "start");
  return spec;
}

ModelSpec load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError({"cannot open model file '" + path + "'"});
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError({"model file '" + path +
                           "' is not valid JSON: " + e.what()});
  }
  return model_from_json(doc);
}

nlohmann::json model_to_json(const ModelSpec& spec) {
  json jspace;
  if (spec.space.kind == SpaceKind::finite) {
    jspace["kind"] = "finite";
    jspace["states"] = spec.space.states;
    json jgen = json::array();
    // Sort entries so the canonical form is independent of input order.
    auto rates = spec.space.rates;
    std::sort(rates.begin(), rates.end(), [](const RateEntry& l,
                                             const RateEntry& r) {
      return std::tie(l.from, l.to, l.rate) < std::tie(r.from, r.to, r.rate);
    });
    for (const auto& e : rates) jgen.push_back({e.from, e.to, e.rate});
    jspace["generator"] = std::move(jgen);
  } else {
    jspace["kind"] = "lattice_z1";
    jspace["up_rate"] = spec.space.up_rate;
    jspace["down_rate"] = spec.space.down_rate;
    jspace["window_radius"] = spec.space.window_radius;
  }

  json jcats = json::array();
  for (const auto& c : spec.catalysts) {
    json jlaw = json::object();
    auto pmf = c.offspring.pmf();
    std::sort(pmf.begin(), pmf.end());
    for (const auto& [k, p] : pmf) jlaw[std::to_string(k)] = p;
    jcats.push_back({{"site", c.site},
                     {"beta", c.beta},
                     {"alpha", c.alpha},
                     {"offspring", std::move(jlaw)}});
  }

  return json{{"space", std::move(jspace)},
              {"catalysts", std::move(jcats)},
              {"start", spec.start}};
}

std::string model_hash(const ModelSpec& spec) {
  const std::string canon = model_to_json(spec).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << std::nouppercase;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace cbp
