#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cbp/model.hpp"
#include "cbp/model_json.hpp"
#include "helpers.hpp"

using namespace cbp;
using namespace cbp::testing;

TEST_CASE("offspring law moments and pgf") {
  OffspringLaw law({{0, 0.25}, {2, 0.75}});
  CHECK(law.pgf(1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(law.pgf(0.0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(law.mean() == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(law.second_moment() == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(law.max_count() == 2);

  // pgf is nondecreasing on [0,1]
  double prev = law.pgf(0.0);
  for (int i = 1; i <= 100; ++i) {
    double cur = law.pgf(i / 100.0);
    CHECK(cur >= prev - 1e-15);
    prev = cur;
  }

  // mean matches one-sided numerical derivative of the pgf at 1
  const double h = 1e-6;
  const double fd = (law.pgf(1.0) - law.pgf(1.0 - h)) / h;
  CHECK(std::abs(fd - law.mean()) < 5e-6);

  OffspringLaw det({{3, 1.0}});
  CHECK(det.pgf(0.5) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(det.mean() == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("two-state model validates and exposes the generator") {
  auto m = two_state_rec();
  CHECK(m.kind() == SpaceKind::finite);
  CHECK(m.state_count() == 2);
  CHECK(m.exit_rate(0) == doctest::Approx(1.0));
  CHECK(m.exit_rate(1) == doctest::Approx(1.0));
  CHECK(m.generator_entry(0, 0) == doctest::Approx(-1.0));
  CHECK(m.generator_entry(0, 1) == doctest::Approx(1.0));
  CHECK(m.generator_bound() == doctest::Approx(1.0));

  // conservativeness: rows sum to zero
  for (State x = 0; x < 2; ++x) {
    double row = 0.0;
    for (State y = 0; y < 2; ++y) row += m.generator_entry(x, y);
    CHECK(std::abs(row) < 1e-12);
  }

  auto jumps = m.jumps_from(0);
  REQUIRE(jumps.size() == 1);
  CHECK(jumps[0].first == 1);
  CHECK(jumps[0].second == doctest::Approx(1.0));

  REQUIRE(m.catalysts().size() == 1);
  CHECK(m.catalysts()[0].site == 0);
  CHECK(m.catalysts()[0].alpha == doctest::Approx(0.5));
  CHECK(m.catalyst_index(0).has_value());
  CHECK(!m.catalyst_index(1).has_value());
  CHECK(m.start() == 0);
  CHECK(m.label_of(1) == "1");
  CHECK(m.state_from_label("1") == 1);
}

TEST_CASE("lattice model basics") {
  auto m = lattice_tra();
  CHECK(m.is_lattice());
  CHECK(m.exit_rate(17) == doctest::Approx(3.0));
  CHECK(m.generator_entry(5, 6) == doctest::Approx(2.0));
  CHECK(m.generator_entry(5, 4) == doctest::Approx(1.0));
  CHECK(m.generator_entry(5, 5) == doctest::Approx(-3.0));
  CHECK(m.generator_entry(5, 7) == 0.0);
  CHECK(m.lattice_up_prob() == doctest::Approx(2.0 / 3.0));
  CHECK(m.state_from_label("-3") == -3);
  CHECK(m.contains(-1000000));
  auto jumps = m.jumps_from(0);
  REQUIRE(jumps.size() == 2);
  CHECK(jumps[0].first == 1);
  CHECK(jumps[0].second == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("sample_jump partitions the unit interval by jump probabilities") {
  auto spec = ring_spec(4, 1.0, 0.5);
  auto m = ValidatedModel::validate(spec);
  // from state 0: to 1 w.p. 2/3, to 3 w.p. 1/3 (order as stored)
  auto jumps = m.jumps_from(0);
  REQUIRE(jumps.size() == 2);
  double p_first = jumps[0].second;
  CHECK(m.sample_jump(0, p_first / 2) == jumps[0].first);
  CHECK(m.sample_jump(0, p_first + (1 - p_first) / 2) == jumps[1].first);
  CHECK(m.sample_jump(0, 0.999999) == jumps[1].first);
}

TEST_CASE("validation collects all violations") {
  ModelSpec spec;
  spec.space = StateSpace::finite_space({"a", "a"}, {{"a", "zz", -1.0}});
  Catalyst c;
  c.site = "nowhere";
  c.beta = -2.0;
  c.alpha = 1.5;
  c.offspring = OffspringLaw({{-1, 0.5}, {1, 0.6}});
  spec.catalysts = {c};
  spec.start = "qq";

  auto issues = ValidatedModel::lint(spec);
  CHECK(issues.size() >= 6);  // duplicate label, unknown state, negative rate,
                              // bad site, bad beta, bad alpha, bad count, start
  CHECK_THROWS_AS((void)ValidatedModel::validate(spec), ValidationError);
  try {
    (void)ValidatedModel::validate(spec);
  } catch (const ValidationError& e) {
    CHECK(e.issues().size() == issues.size());
    CHECK(std::string(e.what()).find("duplicate state label") !=
          std::string::npos);
  }
}

TEST_CASE("pmf renormalization tolerates round-off but rejects gross error") {
  // within 1e-9 of 1: accepted and renormalized to exact total mass 1
  auto spec = two_state_spec({{0, 0.25}, {2, 0.7500000004}});
  auto m = ValidatedModel::validate(spec);
  CHECK(m.catalysts()[0].offspring.total_mass() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(m.catalysts()[0].offspring.pgf(1.0) == doctest::Approx(1.0).epsilon(1e-15));

  // far from 1: rejected
  auto bad = two_state_spec({{0, 0.25}, {2, 0.80}});
  CHECK_THROWS_AS((void)ValidatedModel::validate(bad), ValidationError);
}

TEST_CASE("zero exit rate is rejected") {
  ModelSpec spec;
  spec.space = StateSpace::finite_space({"a", "b"}, {{"a", "b", 1.0}});
  Catalyst c;
  c.site = "a";
  c.beta = 1.0;
  c.alpha = 0.5;
  c.offspring = OffspringLaw({{0, 1.0}});
  spec.catalysts = {c};
  spec.start = "a";
  auto issues = ValidatedModel::lint(spec);
  bool found = false;
  for (const auto& s : issues)
    if (s.find("zero total exit rate") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("model JSON round trip and hashing") {
  const char* text = R"({
    "space": {"kind": "finite", "states": ["0", "1"],
              "generator": [["0", "1", 1.0], ["1", "0", 1.0]]},
    "catalysts": [{"site": "0", "beta": 1.0, "alpha": 0.5,
                   "offspring": {"0": 0.25, "2": 0.75}}],
    "start": "0"
  })";
  auto spec = model_from_json(nlohmann::json::parse(text));
  auto m = ValidatedModel::validate(spec);
  CHECK(m.state_count() == 2);
  CHECK(m.catalysts()[0].offspring.mean() == doctest::Approx(1.5));

  // reordering fields or generator rows leaves the hash unchanged
  const char* permuted = R"({
    "start": "0",
    "catalysts": [{"alpha": 0.5, "offspring": {"2": 0.75, "0": 0.25},
                   "site": "0", "beta": 1.0}],
    "space": {"generator": [["1", "0", 1.0], ["0", "1", 1.0]],
              "states": ["0", "1"], "kind": "finite"}
  })";
  auto spec2 = model_from_json(nlohmann::json::parse(permuted));
  CHECK(model_hash(spec) == model_hash(spec2));
  CHECK(model_hash(spec).size() == 16);

  // a genuinely different model hashes differently
  auto spec3 = spec;
  spec3.catalysts[0].beta = 2.0;
  CHECK(model_hash(spec) != model_hash(spec3));

  // lattice round trip
  const char* lat = R"({
    "space": {"kind": "lattice_z1", "up_rate": 2.0, "down_rate": 1.0,
              "window_radius": 64},
    "catalysts": [{"site": 0, "beta": 1.0, "alpha": 0.5,
                   "offspring": {"0": 0.25, "2": 0.75}}],
    "start": 0
  })";
  auto lspec = model_from_json(nlohmann::json::parse(lat));
  auto lm = ValidatedModel::validate(lspec);
  CHECK(lm.is_lattice());
  CHECK(lm.rate_up() == doctest::Approx(2.0));
  CHECK(lm.start() == 0);

  // malformed documents carry position/context info
  CHECK_THROWS_AS((void)model_from_json(nlohmann::json::parse(
                      R"({"space": {"kind": "hyperbolic"}})")),
                  ValidationError);
}

TEST_CASE("integer state references are accepted in finite models") {
  const char* text = R"({
    "space": {"kind": "finite", "states": [0, 1],
              "generator": [[0, 1, 1.0], [1, 0, 1.0]]},
    "catalysts": [{"site": 0, "beta": 1.0, "alpha": 0.5,
                   "offspring": {"2": 1.0}}],
    "start": 1
  })";
  auto spec = model_from_json(nlohmann::json::parse(text));
  auto m = ValidatedModel::validate(spec);
  CHECK(m.state_from_label("1") == 1);
  CHECK(m.start() == 1);
}
