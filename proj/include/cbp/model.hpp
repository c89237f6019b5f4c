#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cbp {

// States are indices 0..n-1 for finite spaces and lattice coordinates for Z^1.
using State = std::int64_t;

/// Carries the full list of invariant violations found during validation.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

/// An operation was called outside its stated precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative solver exhausted its budget without meeting its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what, double residual = 0.0)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

enum class SpaceKind { finite, lattice_z1 };

struct RateEntry {
  std::string from;
  std::string to;
  double rate = 0.0;
};

struct StateSpace {
  SpaceKind kind = SpaceKind::finite;

  // finite: state labels plus off-diagonal generator entries q(x,y) >= 0.
  // Diagonals are implied by conservativeness.
  std::vector<std::string> states;
  std::vector<RateEntry> rates;

  // lattice_z1: nearest-neighbor walk on the integers with the given up/down
  // rates; window_radius is the starting truncation radius for the analytic
  // solvers, not part of the model itself.
  double up_rate = 0.0;
  double down_rate = 0.0;
  int window_radius = 0;

  static StateSpace finite_space(std::vector<std::string> labels,
                                 std::vector<RateEntry> entries);
  static StateSpace lattice(double up, double down, int window_radius);
};

/// Finite-support offspring distribution. All moments exist by construction.
class OffspringLaw {
 public:
  OffspringLaw() = default;
  explicit OffspringLaw(std::vector<std::pair<int, double>> pmf)
      : pmf_(std::move(pmf)) {}

  /// E s^xi; requires 0 <= s <= 1.
  double pgf(double s) const;
  /// E xi = f'(1).
  double mean() const;
  double second_moment() const;
  double total_mass() const;
  int max_count() const;

  bool has_second_moment() const { return true; }
  bool xlogx_finite() const { return true; }

  const std::vector<std::pair<int, double>>& pmf() const { return pmf_; }
  std::vector<std::pair<int, double>>& pmf() { return pmf_; }

 private:
  std::vector<std::pair<int, double>> pmf_;
};

struct Catalyst {
  std::string site;
  double beta = 0.0;
  double alpha = 0.0;
  OffspringLaw offspring;
};

struct ModelSpec {
  StateSpace space;
  std::vector<Catalyst> catalysts;
  std::string start;
};

struct CatalystInfo {
  State site = 0;
  double beta = 0.0;
  double alpha = 0.0;
  OffspringLaw offspring;
};

/// Immutable model with precomputed embedded jump chain; safe to share
/// across threads after construction.
class ValidatedModel {
 public:
  /// Collects every invariant violation; empty result means valid.
  static std::vector<std::string> lint(const ModelSpec& spec);
  /// Throws ValidationError carrying the full issue list.
  static ValidatedModel validate(const ModelSpec& spec);

  SpaceKind kind() const { return kind_; }
  bool is_lattice() const { return kind_ == SpaceKind::lattice_z1; }

  std::size_t state_count() const { return labels_.size(); }  // finite only
  double rate_up() const { return up_; }
  double rate_down() const { return down_; }
  int base_radius() const { return base_radius_; }

  const std::vector<CatalystInfo>& catalysts() const { return catalysts_; }
  std::size_t num_catalysts() const { return catalysts_.size(); }
  std::optional<std::size_t> catalyst_index(State site) const;
  State start() const { return start_; }

  bool contains(State x) const;
  /// -q(x,x) > 0, the exit rate of the movement chain at x.
  double exit_rate(State x) const;
  double generator_entry(State x, State y) const;

  /// Embedded jump kernel: destinations with probabilities -q(x,y)/q(x,x).
  std::vector<std::pair<State, double>> jumps_from(State x) const;
  /// Samples a jump destination from u uniform in [0,1).
  State sample_jump(State x, double u) const;
  double lattice_up_prob() const { return up_ / (up_ + down_); }

  // Flags reported by validation.
  double generator_bound() const { return generator_bound_; }
  bool generator_bounded() const { return true; }
  bool second_moments_ok() const { return true; }
  bool xlogx_ok() const { return true; }

  State state_from_label(const std::string& label) const;
  std::string label_of(State x) const;

 private:
  ValidatedModel() = default;

  SpaceKind kind_ = SpaceKind::finite;
  // finite
  std::vector<std::string> labels_;
  std::unordered_map<std::string, State> label_index_;
  std::vector<std::vector<double>> q_;  // full generator, diagonals included
  std::vector<std::vector<std::pair<State, double>>> jump_rows_;
  // lattice
  double up_ = 0.0;
  double down_ = 0.0;
  int base_radius_ = 0;

  std::vector<CatalystInfo> catalysts_;
  std::unordered_map<State, std::size_t> catalyst_of_site_;
  State start_ = 0;
  double generator_bound_ = 0.0;
};

}  // namespace cbp
