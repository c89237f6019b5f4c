#include "cbp/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cbp {

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::ostringstream os;
  os << "model validation failed (" << issues.size() << " issue"
     << (issues.size() == 1 ? "" : "s") << "):";
  for (const auto& s : issues) os << "\n  - " << s;
  return os.str();
}

constexpr double kPmfSlack = 1e-9;

}  // namespace

ValidationError::ValidationError(std::vector<std::string> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

StateSpace StateSpace::finite_space(std::vector<std::string> labels,
                                    std::vector<RateEntry> entries) {
  StateSpace s;
  s.kind = SpaceKind::finite;
  s.states = std::move(labels);
  s.rates = std::move(entries);
  return s;
}

StateSpace StateSpace::lattice(double up, double down, int window_radius) {
  StateSpace s;
  s.kind = SpaceKind::lattice_z1;
  s.up_rate = up;
  s.down_rate = down;
  s.window_radius = window_radius;
  return s;
}

double OffspringLaw::pgf(double s) const {
  double v = 0.0;
  for (const auto& [k, p] : pmf_) v += p * std::pow(s, k);
  return v;
}

double OffspringLaw::mean() const {
  double v = 0.0;
  for (const auto& [k, p] : pmf_) v += p * k;
  return v;
}

double OffspringLaw::second_moment() const {
  double v = 0.0;
  for (const auto& [k, p] : pmf_) v += p * static_cast<double>(k) * k;
  return v;
}

double OffspringLaw::total_mass() const {
  double v = 0.0;
  for (const auto& [k, p] : pmf_) v += p;
  return v;
}

int OffspringLaw::max_count() const {
  int m = 0;
  for (const auto& [k, p] : pmf_)
    if (p > 0.0) m = std::max(m, k);
  return m;
}

std::vector<std::string> ValidatedModel::lint(const ModelSpec& spec) {
  std::vector<std::string> issues;
  auto bad = [&issues](const std::string& msg) { issues.push_back(msg); };

  const auto& sp = spec.space;
  std::unordered_map<std::string, State> index;

  if (sp.kind == SpaceKind::finite) {
    if (sp.states.empty()) bad("finite space has no states");
    for (std::size_t i = 0; i < sp.states.size(); ++i) {
      auto [it, inserted] =
          index.emplace(sp.states[i], static_cast<State>(i));
      if (!inserted) bad("duplicate state label '" + sp.states[i] + "'");
    }
    for (const auto& e : sp.rates) {
      if (!index.count(e.from))
        bad("generator entry references unknown state '" + e.from + "'");
      if (!index.count(e.to))
        bad("generator entry references unknown state '" + e.to + "'");
      if (e.from == e.to)
        bad("generator entry for '" + e.from +
            "' is diagonal; diagonals are implied by conservativeness");
      if (!(e.rate >= 0.0) || !std::isfinite(e.rate))
        bad("generator rate " + e.from + " -> " + e.to +
            " must be finite and nonnegative");
    }
    // Every state must be able to move, otherwise the movement chain is not
    // irreducible and exit clocks are undefined.
    std::vector<double> out(sp.states.size(), 0.0);
    for (const auto& e : sp.rates) {
      auto it = index.find(e.from);
      if (it != index.end() && e.rate > 0.0) out[it->second] += e.rate;
    }
    for (std::size_t i = 0; i < out.size(); ++i)
      if (out[i] <= 0.0)
        bad("state '" + sp.states[i] + "' has zero total exit rate");
    // Strong connectivity of the positive-rate graph (irreducibility).
    if (issues.empty() && !sp.states.empty()) {
      const std::size_t n = sp.states.size();
      std::vector<std::vector<std::size_t>> fwd(n), rev(n);
      for (const auto& e : sp.rates) {
        if (e.rate <= 0.0) continue;
        const auto i = static_cast<std::size_t>(index.at(e.from));
        const auto j = static_cast<std::size_t>(index.at(e.to));
        fwd[i].push_back(j);
        rev[j].push_back(i);
      }
      auto reaches_all = [n](const std::vector<std::vector<std::size_t>>& g) {
        std::vector<char> seen(n, 0);
        std::vector<std::size_t> stack{0};
        seen[0] = 1;
        std::size_t count = 1;
        while (!stack.empty()) {
          const std::size_t v = stack.back();
          stack.pop_back();
          for (std::size_t w : g[v])
            if (!seen[w]) {
              seen[w] = 1;
              ++count;
              stack.push_back(w);
            }
        }
        return count == n;
      };
      if (!reaches_all(fwd) || !reaches_all(rev))
        bad("movement chain is not irreducible: the graph of positive "
            "rates is not strongly connected");
    }
  } else {
    if (!(sp.up_rate > 0.0) || !std::isfinite(sp.up_rate))
      bad("lattice up_rate must be finite and positive");
    if (!(sp.down_rate > 0.0) || !std::isfinite(sp.down_rate))
      bad("lattice down_rate must be finite and positive");
    if (sp.window_radius < 1) bad("lattice window_radius must be >= 1");
  }

  auto site_known = [&](const std::string& label) {
    if (sp.kind == SpaceKind::finite) return index.count(label) > 0;
    // lattice sites are integer literals
    try {
      std::size_t pos = 0;
      (void)std::stoll(label, &pos);
      return pos == label.size();
    } catch (...) {
      return false;
    }
  };

  if (spec.catalysts.empty()) bad("model has no catalysts");
  std::unordered_map<std::string, int> seen_sites;
  for (const auto& c : spec.catalysts) {
    if (!site_known(c.site))
      bad("catalyst site '" + c.site + "' is not a state of the space");
    if (++seen_sites[c.site] == 2)
      bad("multiple catalysts share site '" + c.site + "'");
    if (!(c.beta > 0.0) || !std::isfinite(c.beta))
      bad("catalyst at '" + c.site + "': beta must be finite and positive");
    if (!(c.alpha >= 0.0 && c.alpha <= 1.0))
      bad("catalyst at '" + c.site + "': alpha must lie in [0,1]");
    if (c.offspring.pmf().empty()) {
      bad("catalyst at '" + c.site + "': offspring law is empty");
      continue;
    }
    bool pmf_ok = true;
    std::unordered_map<int, int> seen_counts;
    for (const auto& [k, p] : c.offspring.pmf()) {
      if (k < 0) {
        bad("catalyst at '" + c.site + "': offspring count " +
            std::to_string(k) + " is negative");
        pmf_ok = false;
      }
      if (!(p >= 0.0) || !std::isfinite(p)) {
        bad("catalyst at '" + c.site + "': offspring probability for count " +
            std::to_string(k) + " must be finite and nonnegative");
        pmf_ok = false;
      }
      if (++seen_counts[k] == 2) {
        bad("catalyst at '" + c.site + "': duplicate offspring count " +
            std::to_string(k));
        pmf_ok = false;
      }
    }
    if (pmf_ok) {
      const double mass = c.offspring.total_mass();
      if (std::abs(mass - 1.0) > kPmfSlack)
        bad("catalyst at '" + c.site + "': offspring probabilities sum to " +
            std::to_string(mass) + ", not 1");
    }
  }

  if (!site_known(spec.start))
    bad("start state '" + spec.start + "' is not a state of the space");

  return issues;
}

ValidatedModel ValidatedModel::validate(const ModelSpec& spec) {
  auto issues = lint(spec);
  if (!issues.empty()) throw ValidationError(std::move(issues));

  ValidatedModel m;
  const auto& sp = spec.space;
  m.kind_ = sp.kind;

  if (sp.kind == SpaceKind::finite) {
    m.labels_ = sp.states;
    for (std::size_t i = 0; i < m.labels_.size(); ++i)
      m.label_index_.emplace(m.labels_[i], static_cast<State>(i));
    const std::size_t n = m.labels_.size();
    m.q_.assign(n, std::vector<double>(n, 0.0));
    for (const auto& e : sp.rates) {
      const auto i = static_cast<std::size_t>(m.label_index_.at(e.from));
      const auto j = static_cast<std::size_t>(m.label_index_.at(e.to));
      m.q_[i][j] += e.rate;
    }
    m.jump_rows_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double out = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) out += m.q_[i][j];
      m.q_[i][i] = -out;
      m.generator_bound_ = std::max(m.generator_bound_, out);
      for (std::size_t j = 0; j < n; ++j)
        if (j != i && m.q_[i][j] > 0.0)
          m.jump_rows_[i].emplace_back(static_cast<State>(j),
                                       m.q_[i][j] / out);
    }
  } else {
    m.up_ = sp.up_rate;
    m.down_ = sp.down_rate;
    m.base_radius_ = sp.window_radius;
    m.generator_bound_ = m.up_ + m.down_;
  }

  for (const auto& c : spec.catalysts) {
    CatalystInfo info;
    info.site = m.state_from_label(c.site);
    info.beta = c.beta;
    info.alpha = c.alpha;
    info.offspring = c.offspring;
    // Normalize away representable round-off so downstream pgf evaluations
    // see an exact probability law.
    const double mass = info.offspring.total_mass();
    if (mass != 1.0)
      for (auto& [k, p] : info.offspring.pmf()) p /= mass;
    std::sort(info.offspring.pmf().begin(), info.offspring.pmf().end());
    m.catalyst_of_site_.emplace(info.site, m.catalysts_.size());
    m.catalysts_.push_back(std::move(info));
  }
  m.start_ = m.state_from_label(spec.start);
  return m;
}

std::optional<std::size_t> ValidatedModel::catalyst_index(State site) const {
  auto it = catalyst_of_site_.find(site);
  if (it == catalyst_of_site_.end()) return std::nullopt;
  return it->second;
}

bool ValidatedModel::contains(State x) const {
  if (kind_ == SpaceKind::lattice_z1) return true;
  return x >= 0 && static_cast<std::size_t>(x) < labels_.size();
}

double ValidatedModel::exit_rate(State x) const {
  if (kind_ == SpaceKind::lattice_z1) return up_ + down_;
  return -q_[static_cast<std::size_t>(x)][static_cast<std::size_t>(x)];
}

double ValidatedModel::generator_entry(State x, State y) const {
  if (kind_ == SpaceKind::lattice_z1) {
    if (y == x + 1) return up_;
    if (y == x - 1) return down_;
    if (y == x) return -(up_ + down_);
    return 0.0;
  }
  return q_[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)];
}

std::vector<std::pair<State, double>> ValidatedModel::jumps_from(
    State x) const {
  if (kind_ == SpaceKind::lattice_z1) {
    const double total = up_ + down_;
    return {{x + 1, up_ / total}, {x - 1, down_ / total}};
  }
  return jump_rows_[static_cast<std::size_t>(x)];
}

State ValidatedModel::sample_jump(State x, double u) const {
  if (kind_ == SpaceKind::lattice_z1)
    return u < up_ / (up_ + down_) ? x + 1 : x - 1;
  const auto& row = jump_rows_[static_cast<std::size_t>(x)];
  double acc = 0.0;
  for (const auto& [y, p] : row) {
    acc += p;
    if (u < acc) return y;
  }
  return row.back().first;
}

State ValidatedModel::state_from_label(const std::string& label) const {
  if (kind_ == SpaceKind::finite) {
    auto it = label_index_.find(label);
    if (it == label_index_.end())
      throw PreconditionError("unknown state label '" + label + "'");
    return it->second;
  }
  try {
    std::size_t pos = 0;
    State v = std::stoll(label, &pos);
    if (pos != label.size()) throw std::invalid_argument(label);
    return v;
  } catch (...) {
    throw PreconditionError("lattice state label '" + label +
                            "' is not an integer");
  }
}

std::string ValidatedModel::label_of(State x) const {
  if (kind_ == SpaceKind::finite) return labels_.at(static_cast<std::size_t>(x));
  return std::to_string(x);
}

}  // namespace cbp
