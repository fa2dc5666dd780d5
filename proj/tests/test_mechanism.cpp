#include "mcc/mechanism.hpp"

#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mcc/rng.hpp"

namespace {

using mcc::Rng;
using namespace mcc::auction;

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// Exact binary expansion of a finite double.
Rational exact(double x) {
  EXPECT_TRUE(std::isfinite(x));
  if (x == 0.0) return Rational(0);
  int exponent = 0;
  const double mantissa = std::frexp(x, &exponent);
  const auto scaled = static_cast<long long>(std::ldexp(mantissa, 53));
  Rational result{BigInt(scaled)};
  const int shift = exponent - 53;
  if (shift >= 0) {
    result *= Rational(BigInt(1) << shift);
  } else {
    result /= Rational(BigInt(1) << -shift);
  }
  return result;
}

// Selection re-run in exact rational arithmetic: same ranking and prefix rule,
// no floating point anywhere. Certifies the double route on small instances.
struct RationalSelection {
  std::vector<std::size_t> winners;
  std::size_t threshold = kNoIndex;
  Rational threshold_rate = 0;
};

RationalSelection rational_select(const std::vector<Bid>& bids, double budget) {
  const std::size_t n = bids.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Rational> weights(n), rates(n);
  for (std::size_t i = 0; i < n; ++i) {
    weights[i] = exact(bids[i].service_quotient) / exact(bids[i].cost);
    rates[i] = exact(bids[i].cost) / exact(bids[i].service_quotient);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (weights[a] != weights[b]) return weights[a] > weights[b];
    return exact(bids[a].cost) < exact(bids[b].cost);
  });
  RationalSelection out;
  if (n < 2) return out;
  const Rational b = exact(budget);
  std::size_t k = 0;
  for (std::size_t candidate = 1; candidate <= n - 1; ++candidate) {
    if (Rational(candidate) * rates[order[candidate]] <= b) k = candidate;
  }
  out.winners.assign(order.begin(), order.begin() + k);
  if (k > 0) {
    out.threshold = order[k];
    out.threshold_rate = rates[order[k]];
  }
  return out;
}

std::vector<Bid> four_bid_instance() {
  return {{2, 4}, {3, 3}, {4, 2}, {5, 1}};
}

Bid draw_bid(Rng& rng) {
  return Bid{rng.uniform(1.0, 5.0), rng.uniform(50.0, 125.0)};
}

std::vector<Bid> draw_instance(Rng& rng, std::size_t n) {
  std::vector<Bid> bids(n);
  for (auto& bid : bids) bid = draw_bid(rng);
  return bids;
}

TEST(Weight, DirectEvaluation) {
  EXPECT_DOUBLE_EQ(weight({2, 4}), 2.0);
  EXPECT_DOUBLE_EQ(weight({5, 5}), 1.0);
  EXPECT_DOUBLE_EQ(weight({4, 2}), 0.5);
}

TEST(Weight, RejectsDegenerateBids) {
  EXPECT_THROW(weight({0, 4}), std::invalid_argument);
  EXPECT_THROW(weight({2, 0}), std::invalid_argument);
  EXPECT_THROW(weight({-1, 4}), std::invalid_argument);
  EXPECT_THROW(weight({2, std::numeric_limits<double>::infinity()}),
               std::invalid_argument);
  EXPECT_THROW(weight({std::nan(""), 4}), std::invalid_argument);
}

TEST(RankBids, DecreasingWeights) {
  const std::vector<Bid> bids = {{2, 4}, {3, 3}, {4, 2}};
  EXPECT_EQ(rank_bids(bids), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(RankBids, TieBreaksOnLowerCost) {
  const std::vector<Bid> bids = {{1, 2}, {2, 4}};  // equal weight 2.0
  EXPECT_EQ(rank_bids(bids), (std::vector<std::size_t>{0, 1}));
  const std::vector<Bid> flipped = {{2, 4}, {1, 2}};
  EXPECT_EQ(rank_bids(flipped), (std::vector<std::size_t>{1, 0}));
}

TEST(RankBids, EqualWeightEqualCostKeepsSubmissionOrder) {
  const std::vector<Bid> bids = {{2, 4}, {2, 4}, {2, 4}};
  EXPECT_EQ(rank_bids(bids), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(RankBids, EmptyInput) {
  EXPECT_TRUE(rank_bids(std::vector<Bid>{}).empty());
}

TEST(SelectWinners, TightBudget) {
  const auto bids = four_bid_instance();
  const auto result = select_winners(bids, 2.0);
  EXPECT_EQ(result.k, 1u);
  EXPECT_EQ(result.winner_indices, (std::vector<std::size_t>{0}));
  EXPECT_EQ(result.threshold_index, 1u);
  EXPECT_DOUBLE_EQ(result.threshold_rate, 1.0);
}

TEST(SelectWinners, LooserBudget) {
  const auto bids = four_bid_instance();
  const auto result = select_winners(bids, 5.0);
  EXPECT_EQ(result.k, 2u);
  EXPECT_EQ(result.winner_indices, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(result.threshold_index, 2u);
  EXPECT_DOUBLE_EQ(result.threshold_rate, 2.0);
}

TEST(SelectWinners, ZeroBudgetSelectsNobody) {
  EXPECT_EQ(select_winners(four_bid_instance(), 0.0).k, 0u);
}

TEST(SelectWinners, FewerThanTwoBiddersSelectsNobody) {
  EXPECT_EQ(select_winners(std::vector<Bid>{}, 10.0).k, 0u);
  EXPECT_EQ(select_winners(std::vector<Bid>{{1, 4}}, 10.0).k, 0u);
}

TEST(SelectWinners, RejectsBadBudget) {
  EXPECT_THROW(select_winners(four_bid_instance(), -1.0), std::invalid_argument);
  EXPECT_THROW(select_winners(four_bid_instance(),
                              std::numeric_limits<double>::quiet_NaN()),
               std::invalid_argument);
}

TEST(BruteForceSelect, MatchesWorkedInstances) {
  EXPECT_EQ(brute_force_select(four_bid_instance(), 2.0).k, 1u);
  EXPECT_EQ(brute_force_select(four_bid_instance(), 5.0).k, 2u);
  EXPECT_EQ(brute_force_select(std::vector<Bid>{{1, 4}}, 10.0).k, 0u);
}

TEST(BruteForceSelect, GuardsLargeInstances) {
  EXPECT_THROW(brute_force_select(std::vector<Bid>(13, Bid{1, 1}), 1.0),
               std::invalid_argument);
}

TEST(SelectWinners, AgreesWithBruteForceOnRandomInstances) {
  Rng rng(0x5e1ec7);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    const auto bids = draw_instance(rng, n);
    const double budget = rng.uniform(0.0, 0.6);
    const auto fast = select_winners(bids, budget);
    const auto slow = brute_force_select(bids, budget);
    ASSERT_EQ(fast.k, slow.k);
    ASSERT_EQ(fast.winner_indices, slow.winner_indices);
    ASSERT_EQ(fast.threshold_index, slow.threshold_index);
    ASSERT_EQ(fast.threshold_rate, slow.threshold_rate);
  }
}

TEST(SelectWinners, AgreesWithExactRationalRoute) {
  Rng rng(0xace);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(7);
    const auto bids = draw_instance(rng, n);
    const double budget = rng.uniform(0.0, 0.6);
    const auto result = select_winners(bids, budget);
    const auto oracle = rational_select(bids, budget);
    ASSERT_EQ(result.winner_indices, oracle.winners);
    ASSERT_EQ(result.threshold_index, oracle.threshold);
  }
}

TEST(SelectWinners, BudgetFeasibleAtTruthfulPayments) {
  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const auto bids = draw_instance(rng, 2 + rng.below(7));
    const double budget = rng.uniform(0.0, 0.6);
    const auto result = select_winners(bids, budget);
    EXPECT_LE(static_cast<double>(result.k) * result.threshold_rate,
              budget + 1e-9);
    for (std::size_t index : result.winner_indices) {
      EXPECT_GE(weight(bids[index]),
                weight(bids[result.threshold_index]));
    }
  }
}

TEST(SelectWinners, ScaleInvariance) {
  Rng rng(0xbeef);
  for (double lambda : {0.5, 2.0, 3.0, 1024.0}) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto bids = draw_instance(rng, 2 + rng.below(7));
      const double budget = rng.uniform(0.0, 0.6);
      std::vector<Bid> scaled = bids;
      for (auto& bid : scaled) bid.cost *= lambda;
      EXPECT_EQ(select_winners(bids, budget).winner_indices,
                select_winners(scaled, budget * lambda).winner_indices);
    }
  }
}

TEST(BasePayment, DirectEvaluation) {
  EXPECT_DOUBLE_EQ(base_payment({1, 4}, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(base_payment({1, 3}, 2.0), 6.0);
  // Boundary: a winner whose weight equals the threshold weight is exactly
  // cost-covered.
  EXPECT_DOUBLE_EQ(base_payment({1, 1}, 1.0), 1.0);
  EXPECT_THROW(base_payment({1, 4}, 0.0), std::invalid_argument);
}

TEST(Penalty, QuadraticOverReport) {
  const CompletionReport report{1.2, 0.9};  // declared 1.2, measured 0.9 MB/s
  EXPECT_NEAR(penalty(PenaltyPolicy::quadratic(), report, 1.0), 1.09, 1e-12);
}

TEST(Penalty, QuadraticUnderReportIsFree) {
  const CompletionReport report{0.7, 0.9};
  EXPECT_DOUBLE_EQ(penalty(PenaltyPolicy::quadratic(), report, 1.0), 0.0);
}

TEST(Penalty, FlatOverReport) {
  const CompletionReport report{0.8, 0.5};
  EXPECT_DOUBLE_EQ(penalty(PenaltyPolicy::flat(), report, 1.0), 1.0);
}

TEST(Penalty, NondecreasingInGap) {
  for (const auto& policy :
       {PenaltyPolicy::quadratic(), PenaltyPolicy::flat()}) {
    double prev = 0.0;
    for (double declared = 1.0; declared <= 3.0; declared += 0.1) {
      const double d = penalty(policy, {declared, 0.9}, 1.0);
      EXPECT_GT(d, 0.0);
      EXPECT_GE(d, prev);
      prev = d;
    }
  }
}

TEST(Penalty, RejectsBadInputs) {
  EXPECT_THROW(penalty(PenaltyPolicy::quadratic(), {0.0, 1.0}, 1.0),
               std::invalid_argument);
  EXPECT_THROW(penalty(PenaltyPolicy::quadratic(), {1.0, 1.0}, -1.0),
               std::invalid_argument);
  EXPECT_THROW(penalty(PenaltyPolicy::flat_with_reward(1.0), {1.0, 1.0}, 1.0),
               std::invalid_argument);
}

TEST(PerformancePayment, QuadraticOverReport) {
  const CompletionReport report{1.2, 0.9};
  EXPECT_NEAR(performance_payment(PenaltyPolicy::quadratic(), report, 1.0),
              1.09 * -0.3, 1e-12);
}

TEST(PerformancePayment, TruthfulReportIsZero) {
  for (const auto& policy : {PenaltyPolicy::quadratic(), PenaltyPolicy::flat(),
                             PenaltyPolicy::flat_with_reward()}) {
    EXPECT_DOUBLE_EQ(performance_payment(policy, {0.9, 0.9}, 1.0), 0.0);
  }
}

TEST(PerformancePayment, FlatOverReportRestoresTruthfulPayment) {
  // Flat policy: total payment after an over-report equals the truthful one.
  const CompletionReport report{0.8, 0.5};
  const double p2 = performance_payment(PenaltyPolicy::flat(), report, 1.0);
  EXPECT_NEAR(p2, -0.3, 1e-12);
  EXPECT_NEAR(0.8 * 1.0 + p2, 0.5 * 1.0, 1e-12);
}

TEST(PerformancePayment, FlatIdentityExactInRationalArithmetic) {
  // The flat-policy identity p1 + p2 = s * rate is algebraic; replaying the
  // same double inputs through exact rationals shows it holds with no
  // floating error of its own.
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const double measured = rng.uniform(50.0, 125.0);
    const double declared = measured * rng.uniform(1.0, 1.5);
    const double rate = rng.uniform(0.01, 0.1);
    const Rational total = exact(declared) * exact(rate) +
                           exact(rate) * (exact(measured) - exact(declared));
    EXPECT_EQ(total, exact(measured) * exact(rate));
    const double doubles = declared * rate + rate * (measured - declared);
    EXPECT_NEAR(doubles, measured * rate, 1e-12 * measured * rate);
  }
}

TEST(PerformancePayment, RewardStaysBelowTruthfulPayment) {
  const PenaltyPolicy policy = PenaltyPolicy::flat_with_reward(0.5);
  const double rate = 1.0;
  const double measured = 1.0;
  for (double declared : {0.9, 0.5, 0.2}) {
    const CompletionReport report{declared, measured};
    const double p2 = performance_payment(policy, report, rate);
    EXPECT_GT(p2, 0.0);  // under-report earns a reward
    EXPECT_LT(declared * rate + p2, measured * rate);  // but never beats truth
  }
}

TEST(TotalPayment, TruthfulWinner) {
  const auto bids = four_bid_instance();
  const auto selection = select_winners(bids, 2.0);  // winner (2,4), rate 1.0
  const auto breakdown = total_payment(selection, 0, {4.0, 4.0},
                                       PenaltyPolicy::quadratic(), 2.0);
  EXPECT_DOUBLE_EQ(breakdown.total, 4.0);
  EXPECT_DOUBLE_EQ(breakdown.utility, 2.0);
}

TEST(TotalPayment, LoserGetsNothing) {
  const auto selection = select_winners(four_bid_instance(), 2.0);
  const auto breakdown = total_payment(selection, 3, {1.0, 1.0},
                                       PenaltyPolicy::quadratic(), 5.0);
  EXPECT_DOUBLE_EQ(breakdown.total, 0.0);
  EXPECT_DOUBLE_EQ(breakdown.utility, 0.0);
}

TEST(TotalPayment, OverReportingWinnerFallsBelowTruth) {
  // Declared 1.2 against a measured 0.9 at rate 1.0, true cost 0.5: the
  // quadratic deduction leaves strictly less than the truthful utility.
  SelectionResult selection;
  selection.player_count = 2;
  selection.winner_indices = {0};
  selection.k = 1;
  selection.threshold_index = 1;
  selection.threshold_rate = 1.0;
  const auto breakdown = total_payment(selection, 0, {1.2, 0.9},
                                       PenaltyPolicy::quadratic(), 0.5);
  EXPECT_NEAR(breakdown.total, 0.873, 1e-12);
  EXPECT_NEAR(breakdown.utility, 0.373, 1e-12);
  EXPECT_LT(breakdown.utility, 0.9 - 0.5);
}

TEST(TotalPayment, IndexOutOfRange) {
  const auto selection = select_winners(four_bid_instance(), 2.0);
  EXPECT_THROW(total_payment(selection, 4, {1.0, 1.0},
                             PenaltyPolicy::quadratic(), 1.0),
               std::out_of_range);
}

TEST(DistributorUtility, DirectEvaluation) {
  EXPECT_DOUBLE_EQ(
      distributor_utility({1.0, 0.0, 1000.0, 400.0, 0.0, 0.0}), 600.0);
  EXPECT_DOUBLE_EQ(distributor_utility({1.0, 1.0, 100.0, 100.0, 5.0, 5.0}),
                   0.0);
  EXPECT_DOUBLE_EQ(distributor_utility({1.0, 0.0, 100.0, 150.0, 0.0, 0.0}),
                   -50.0);
  EXPECT_THROW(distributor_utility({-1.0, 0.0, 1.0, 1.0, 0.0, 0.0}),
               std::invalid_argument);
}

TEST(BudgetLimit, ConstantFunction) {
  const auto policy = BudgetPolicy::constant(50.0);
  EXPECT_DOUBLE_EQ(budget_limit(policy, 600.0), 50.0);
  EXPECT_DOUBLE_EQ(budget_limit(policy, 1e9), 50.0);  // saturates
  EXPECT_DOUBLE_EQ(budget_limit(policy, -1.0), 0.0);  // below u_min
}

TEST(BudgetLimit, SaturatesAboveUMax) {
  const auto policy = BudgetPolicy::linear(0.1, 1.0, 0.0, 100.0);
  EXPECT_DOUBLE_EQ(budget_limit(policy, 50.0), 6.0);
  EXPECT_DOUBLE_EQ(budget_limit(policy, 1000.0), 11.0);
}

TEST(BudgetLimit, GridCheckRejectsDecreasingFunction) {
  BudgetPolicy bad{0.0, 100.0, [](double u) { return 10.0 - u; }};
  EXPECT_THROW(check_nondecreasing(bad), std::invalid_argument);
  EXPECT_NO_THROW(check_nondecreasing(BudgetPolicy::constant(50.0)));
  EXPECT_THROW(budget_limit(BudgetPolicy{1.0, 0.0, [](double) { return 1.0; }}, 0.5),
               std::invalid_argument);
}

TEST(PlayerProfile, CostIncreasesInThetaAndQuotient) {
  double prev = 0.0;
  for (double theta = 1.0; theta <= 5.0; theta += 0.5) {
    const auto profile = derive_profile(theta, 100.0, 1.0, 5.0, 100.0);
    EXPECT_GT(profile.true_cost, prev);
    prev = profile.true_cost;
  }
  prev = 0.0;
  for (double quotient = 50.0; quotient <= 125.0; quotient += 5.0) {
    const auto profile = derive_profile(2.0, quotient, 1.0, 5.0, 100.0);
    EXPECT_GT(profile.true_cost, prev);
    prev = profile.true_cost;
  }
  EXPECT_THROW(derive_profile(0.5, 100.0, 1.0, 5.0), std::invalid_argument);
}

TEST(BestResponse, RequiresTruthfulPointInGrid) {
  Instance instance{four_bid_instance(), 5.0, PenaltyPolicy::quadratic()};
  const std::vector<Bid> grid = {{1.0, 1.0}};
  EXPECT_THROW(best_response_search(instance, 0, grid), std::invalid_argument);
}

TEST(BestResponse, TruthMaximizesOnWorkedInstance) {
  Instance instance{four_bid_instance(), 5.0, PenaltyPolicy::quadratic()};
  for (std::size_t player = 0; player < 4; ++player) {
    const auto grid = misreport_grid(instance.truthful_bids[player], 21);
    const auto outcome = best_response_search(instance, player, grid);
    EXPECT_LE(outcome.best_utility, outcome.truthful_utility + 1e-9);
    EXPECT_EQ(outcome.best_bid.cost, instance.truthful_bids[player].cost);
    EXPECT_EQ(outcome.best_bid.service_quotient,
              instance.truthful_bids[player].service_quotient);
  }
}

TEST(BestResponse, LoserUnderReportingCostWinsAtALoss) {
  // Two bidders, budget 1. Truthful ranking: (2,4) then (3,3); the second is
  // the threshold. If it under-reports cost to 1 it jumps ahead and wins,
  // paid s * c_1/s_1 = 3 * 2/4, below its true cost 3.
  Instance instance{{{2, 4}, {3, 3}}, 1.0, PenaltyPolicy::quadratic()};
  EXPECT_FALSE(select_winners(instance.truthful_bids, 1.0).is_winner(1));
  const double utility = deviation_utility(instance, 1, {1.0, 3.0});
  EXPECT_DOUBLE_EQ(utility, 3.0 * 2.0 / 4.0 - 3.0);
  EXPECT_LT(utility, 0.0);
}

TEST(BestResponse, WinnerOverReportingQuotientLosesCubically) {
  // Winner keeps its slot but inflates the quotient: utility drops by
  // gamma * (s' - s)^3 against truth.
  Instance instance{four_bid_instance(), 5.0, PenaltyPolicy::quadratic()};
  const double truthful = deviation_utility(instance, 0, {2.0, 4.0});
  EXPECT_DOUBLE_EQ(truthful, 4.0 * 2.0 - 2.0);
  const double deviated = deviation_utility(instance, 0, {1.9, 4.4});
  EXPECT_NEAR(deviated, truthful + (4.0 - 4.4) * 0.4 * 0.4, 1e-12);
  EXPECT_LT(deviated, truthful);
}

TEST(BestResponse, TruthDominatesOnRandomInstances) {
  Rng rng(0x1c);
  for (const auto& policy :
       {PenaltyPolicy::quadratic(), PenaltyPolicy::flat()}) {
    for (int trial = 0; trial < 60; ++trial) {
      Instance instance{draw_instance(rng, 2 + rng.below(7)),
                        rng.uniform(0.0, 0.6), policy};
      for (std::size_t player = 0; player < instance.truthful_bids.size();
           ++player) {
        const auto grid =
            misreport_grid(instance.truthful_bids[player], 11);
        const auto outcome = best_response_search(instance, player, grid);
        ASSERT_LE(outcome.best_utility, outcome.truthful_utility + 1e-9);
      }
    }
  }
}

TEST(BestResponse, UtilityPeaksAtTruthfulQuotient) {
  // Fixed cost, varying declared quotient: the utility maximum sits at the
  // true quotient on any grid containing it.
  Rng rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    Instance instance{draw_instance(rng, 4), rng.uniform(0.05, 0.5),
                      PenaltyPolicy::quadratic()};
    const std::size_t player = rng.below(4);
    const Bid truth = instance.truthful_bids[player];
    double best = -1e300;
    double best_declared = 0.0;
    for (int i = 0; i <= 40; ++i) {
      const double declared =
          truth.service_quotient * (0.5 + 1.0 * static_cast<double>(i) / 40.0);
      const double utility =
          deviation_utility(instance, player, {truth.cost, declared});
      if (utility > best) {
        best = utility;
        best_declared = declared;
      }
    }
    const double truthful = deviation_utility(instance, player, truth);
    EXPECT_LE(best, truthful + 1e-9);
    if (truthful > 1e-9) {
      EXPECT_DOUBLE_EQ(best_declared, truth.service_quotient);
    }
  }
}

TEST(IndividualRationality, TruthfulWinnersNeverLose) {
  Rng rng(0x1e4);
  for (int trial = 0; trial < 400; ++trial) {
    const auto bids = draw_instance(rng, 2 + rng.below(7));
    const double budget = rng.uniform(0.0, 0.6);
    const auto selection = select_winners(bids, budget);
    for (std::size_t index = 0; index < bids.size(); ++index) {
      const CompletionReport report{bids[index].service_quotient,
                                    bids[index].service_quotient};
      const auto breakdown = total_payment(selection, index, report,
                                           PenaltyPolicy::quadratic(),
                                           bids[index].cost);
      if (selection.is_winner(index)) {
        EXPECT_GE(breakdown.utility, -1e-12);
      } else {
        EXPECT_EQ(breakdown.total, 0.0);
        EXPECT_EQ(breakdown.utility, 0.0);
      }
    }
  }
}

TEST(IndividualRationality, ExactOnRationals) {
  // Same claim with no tolerance at all: s_i * rate - c_i >= 0 for every
  // winner, evaluated in exact arithmetic.
  Rng rng(0x1e5);
  for (int trial = 0; trial < 150; ++trial) {
    const auto bids = draw_instance(rng, 2 + rng.below(7));
    const double budget = rng.uniform(0.0, 0.6);
    const auto oracle = rational_select(bids, budget);
    for (std::size_t index : oracle.winners) {
      const Rational utility =
          exact(bids[index].service_quotient) * oracle.threshold_rate -
          exact(bids[index].cost);
      EXPECT_GE(utility, 0);
    }
  }
}

}  // namespace
