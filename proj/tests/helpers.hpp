#pragma once

// Shared model builders for the test suite. The three canonical models:
//   two_state_rec  — 2-state unit-rate chain, catalyst at state "0",
//                    beta=1, alpha=0.5, offspring {0:0.25, 2:0.75}
//   two_state_det  — same chain, deterministic offspring {3:1}
//   lattice_tra    — asymmetric walk on Z (up 2, down 1), catalyst at 0,
//                    beta=1, alpha=0.5, offspring {0:0.25, 2:0.75}

#include <string>
#include <utility>
#include <vector>

#include "cbp/model.hpp"

namespace cbp::testing {

inline ModelSpec two_state_spec(
    std::vector<std::pair<int, double>> pmf = {{0, 0.25}, {2, 0.75}},
    double alpha = 0.5, double beta = 1.0) {
  ModelSpec spec;
  spec.space = StateSpace::finite_space(
      {"0", "1"}, {{"0", "1", 1.0}, {"1", "0", 1.0}});
  Catalyst c;
  c.site = "0";
  c.beta = beta;
  c.alpha = alpha;
  c.offspring = OffspringLaw(std::move(pmf));
  spec.catalysts = {std::move(c)};
  spec.start = "0";
  return spec;
}

inline ValidatedModel two_state_rec() {
  return ValidatedModel::validate(two_state_spec());
}

inline ValidatedModel two_state_det() {
  return ValidatedModel::validate(two_state_spec({{3, 1.0}}));
}

inline ModelSpec lattice_spec(double up = 2.0, double down = 1.0,
                              int radius = 64) {
  ModelSpec spec;
  spec.space = StateSpace::lattice(up, down, radius);
  Catalyst c;
  c.site = "0";
  c.beta = 1.0;
  c.alpha = 0.5;
  c.offspring = OffspringLaw({{0, 0.25}, {2, 0.75}});
  spec.catalysts = {std::move(c)};
  spec.start = "0";
  return spec;
}

inline ValidatedModel lattice_tra() {
  return ValidatedModel::validate(lattice_spec());
}

/// Ring of n states with clockwise rate r_cw and counterclockwise rate r_ccw;
/// handy for >2-state finite checks.
inline ModelSpec ring_spec(int n, double r_cw = 1.0, double r_ccw = 0.5) {
  ModelSpec spec;
  std::vector<std::string> labels;
  for (int i = 0; i < n; ++i) labels.push_back(std::to_string(i));
  std::vector<RateEntry> rates;
  for (int i = 0; i < n; ++i) {
    rates.push_back({labels[i], labels[(i + 1) % n], r_cw});
    rates.push_back({labels[i], labels[(i + n - 1) % n], r_ccw});
  }
  spec.space = StateSpace::finite_space(std::move(labels), std::move(rates));
  Catalyst c;
  c.site = "0";
  c.beta = 1.0;
  c.alpha = 0.5;
  c.offspring = OffspringLaw({{0, 0.25}, {2, 0.75}});
  spec.catalysts = {std::move(c)};
  spec.start = "0";
  return spec;
}

}  // namespace cbp::testing
