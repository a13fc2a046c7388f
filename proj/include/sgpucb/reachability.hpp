#pragma once

// Lipschitz machinery used by the SafeOpt-style baselines.

#include <algorithm>
#include <span>
#include <vector>

#include "sgpucb/environment.hpp"

namespace sgpucb {

/// max over distinct pairs of |v_i - v_j| / |x_i - x_j|.
inline double lipschitz_constant(const DecisionSet& ds, std::span<const double> values) {
  if (static_cast<Eigen::Index>(values.size()) != ds.size())
    throw InputError("lipschitz_constant: value count differs from decision set size");
  double L = 0.0;
  for (Eigen::Index i = 0; i < ds.size(); ++i)
    for (Eigen::Index j = 0; j < i; ++j)
      L = std::max(L, std::abs(values[static_cast<std::size_t>(i)] - values[static_cast<std::size_t>(j)]) /
                          ds.distance(i, j));
  return L;
}

inline double lipschitz_constant(const ProblemInstance& inst, Channel channel) {
  return lipschitz_constant(inst.decision_set, channel == Channel::Reward ? inst.f_true : inst.g_true);
}

/// One application of R_eps:
///   S u {x : exists x' in S, g(x') - eps - L d(x, x') >= h}.
/// `members` is an indicator over the decision set.
inline std::vector<char> reachability_step(const DecisionSet& ds, const std::vector<char>& members,
                                           std::span<const double> g, double h, double L,
                                           double epsilon) {
  std::vector<char> next = members;
  const Eigen::Index n = ds.size();
  for (Eigen::Index x = 0; x < n; ++x) {
    if (members[static_cast<std::size_t>(x)]) continue;
    for (Eigen::Index xp = 0; xp < n; ++xp) {
      if (!members[static_cast<std::size_t>(xp)]) continue;
      if (g[static_cast<std::size_t>(xp)] - epsilon - L * ds.distance(x, xp) >= h) {
        next[static_cast<std::size_t>(x)] = 1;
        break;
      }
    }
  }
  return next;
}

/// Iterates R_eps from S0 until a fixed point or `max_steps` applications.
/// Returns sorted indices.
inline std::vector<int> reachability_closure(const DecisionSet& ds, std::span<const int> S0,
                                             std::span<const double> g, double h, double L,
                                             double epsilon, int max_steps) {
  if (S0.empty()) throw InputError("reachability_closure: empty initial set");
  if (!(L >= 0.0)) throw InputError("reachability_closure: Lipschitz constant must be >= 0");
  if (static_cast<Eigen::Index>(g.size()) != ds.size())
    throw InputError("reachability_closure: value count differs from decision set size");
  std::vector<char> members(static_cast<std::size_t>(ds.size()), 0);
  for (int i : S0) members.at(static_cast<std::size_t>(i)) = 1;
  for (int step = 0; step < max_steps; ++step) {
    std::vector<char> next = reachability_step(ds, members, g, h, L, epsilon);
    if (next == members) break;
    members.swap(next);
  }
  std::vector<int> out;
  for (std::size_t i = 0; i < members.size(); ++i)
    if (members[i]) out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace sgpucb
