// Invariants that the implementation does not meet. Registered with ctest as
// expected failures so they run on every build; if one starts passing, ctest
// reports it and it should move into the regular suites.

#include <gtest/gtest.h>

#include "sgpucb/bench.hpp"

using namespace sgpucb;

// Fraction of post-T' rounds whose benchmark x*_eps lies in the estimated
// safe set, averaged over 30 seeds. Membership needs sigma_g(x*)^2 to fall
// below roughly eps^2 / (4 beta_t), i.e. sigma_g(x*) ~ 1e-3 at eps = 0.01,
// which phase 2 only reaches when it keeps sampling near x*. In practice the
// fraction is 1 for runs whose x* is a seed point and 0 otherwise.
TEST(KnownGap, BenchmarkContainment) {
  InstanceConfig ic;
  ic.seed_set_min = 21;
  ic.seed_set_max = 25;
  double total = 0.0;
  int runs = 0;
  for (std::uint64_t s = 1; s <= 30; ++s) {
    const ProblemInstance inst = sample_instance(ic, s);
    const RegretTrace tr = run_sgp_ucb(inst, AlgoConfig{}, run_seed_for(s));
    int in = 0, n = 0;
    for (const auto& r : tr.rounds) {
      if (r.phase != Phase::Exploit) continue;
      ++n;
      in += r.benchmark_in_safe_set;
    }
    if (n == 0) continue;
    total += static_cast<double>(in) / n;
    ++runs;
  }
  const double fraction = total / runs;
  std::printf("benchmark containment fraction: %.4f over %d runs\n", fraction, runs);
  EXPECT_GE(fraction, 0.9);
}
