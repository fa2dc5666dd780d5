#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

// Multidimensional reverse auction for offloading compute work to nearby
// devices. A bidder declares a cost and a committed service quotient (data
// processed per second); the distributor ranks bidders by quotient-per-cost,
// keeps the largest prefix its budget allows, prices every winner at the
// first excluded bid, and settles a second payment component from the
// measured quotient after the task completes.

namespace mcc::auction {

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

// A player's declared (cost, committed service quotient) pair.
struct Bid {
  double cost = 0.0;              // money asked for performing the task
  double service_quotient = 0.0;  // data units processed per second

  bool valid() const {
    return std::isfinite(cost) && std::isfinite(service_quotient) &&
           cost > 0.0 && service_quotient > 0.0;
  }
};

inline void require_valid(const Bid& bid) {
  if (!bid.valid()) {
    throw std::invalid_argument("bid fields must be finite and positive");
  }
}

// A player's private type plus the abstract cost factor scenario generators
// draw it from.
struct PlayerProfile {
  double true_cost = 0.0;
  double true_quotient = 0.0;
  double theta = 0.0;  // private cost factor, bounded away from 0 and infinity

  Bid truthful_bid() const { return Bid{true_cost, true_quotient}; }
};

// Generator contract: cost strictly increases in both theta and quotient.
inline PlayerProfile derive_profile(double theta, double quotient,
                                    double theta_min, double theta_max,
                                    double quotient_ref = 1.0) {
  if (!(0.0 < theta_min && theta_min <= theta && theta <= theta_max) ||
      !std::isfinite(theta_max)) {
    throw std::invalid_argument("theta outside [theta_min, theta_max]");
  }
  if (!(quotient > 0.0) || !(quotient_ref > 0.0)) {
    throw std::invalid_argument("quotient must be positive");
  }
  return PlayerProfile{theta * quotient / quotient_ref, quotient, theta};
}

// Selection score. Higher is better: more committed throughput per unit cost.
inline double weight(const Bid& bid) {
  require_valid(bid);
  return bid.service_quotient / bid.cost;
}

// Indices sorted by decreasing weight. Equal weights put the cheaper bid
// first, then keep submission order; the ranking must be deterministic for
// the selection oracle to be reproducible.
inline std::vector<std::size_t> rank_bids(std::span<const Bid> bids) {
  std::vector<std::size_t> order(bids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     const double wa = weight(bids[a]);
                     const double wb = weight(bids[b]);
                     if (wa != wb) return wa > wb;
                     return bids[a].cost < bids[b].cost;
                   });
  return order;
}

struct SelectionResult {
  std::vector<std::size_t> winner_indices;  // original indices, best weight first
  std::size_t k = 0;                        // winner count
  std::size_t threshold_index = kNoIndex;   // original index of the (k+1)-th bid
  double threshold_rate = 0.0;              // cost per quotient unit of that bid
  std::size_t player_count = 0;

  bool is_winner(std::size_t index) const {
    return std::find(winner_indices.begin(), winner_indices.end(), index) !=
           winner_indices.end();
  }
};

namespace detail {

inline double cost_per_quotient(const Bid& bid) {
  return bid.cost / bid.service_quotient;
}

inline SelectionResult make_selection(std::span<const Bid> bids,
                                      const std::vector<std::size_t>& order,
                                      std::size_t k) {
  SelectionResult result;
  result.player_count = bids.size();
  result.k = k;
  if (k > 0) {
    result.winner_indices.assign(order.begin(), order.begin() + k);
    result.threshold_index = order[k];
    result.threshold_rate = cost_per_quotient(bids[order[k]]);
  }
  return result;
}

}  // namespace detail

// Greedy budget-feasible selection: with bids ranked, k is the largest count
// in [0, n-1] such that paying every winner at the (k+1)-th bid's rate stays
// within the budget, i.e. k * (c_{k+1}/s_{k+1}) <= B. k is capped at n-1 so
// a threshold bid always exists; with fewer than two bidders there is no
// threshold price and nobody is selected.
inline SelectionResult select_winners(std::span<const Bid> bids, double budget) {
  if (!std::isfinite(budget) || budget < 0.0) {
    throw std::invalid_argument("budget must be finite and nonnegative");
  }
  const std::size_t n = bids.size();
  const std::vector<std::size_t> order = rank_bids(bids);  // validates bids
  if (n < 2) return detail::make_selection(bids, order, 0);

  // Rates are nondecreasing along the ranking, so committed spend is
  // nondecreasing in k and the scan can stop at the first infeasible k.
  std::size_t k = 0;
  [[maybe_unused]] double prev_committed = 0.0;
  for (std::size_t candidate = 1; candidate <= n - 1; ++candidate) {
    const double rate = detail::cost_per_quotient(bids[order[candidate]]);
    const double committed = static_cast<double>(candidate) * rate;
    assert(committed >= prev_committed * (1.0 - 1e-12));
    prev_committed = committed;
    if (committed <= budget) {
      k = candidate;
    } else {
      break;
    }
  }
  return detail::make_selection(bids, order, k);
}

// Test oracle: checks every prefix length of the ranked ordering instead of
// relying on monotonicity. Must agree with select_winners exactly.
inline SelectionResult brute_force_select(std::span<const Bid> bids,
                                          double budget) {
  if (bids.size() > 12) {
    throw std::invalid_argument("brute_force_select is guarded to n <= 12");
  }
  if (!std::isfinite(budget) || budget < 0.0) {
    throw std::invalid_argument("budget must be finite and nonnegative");
  }
  const std::size_t n = bids.size();
  const std::vector<std::size_t> order = rank_bids(bids);
  std::size_t best = 0;
  if (n >= 2) {
    for (std::size_t candidate = 1; candidate <= n - 1; ++candidate) {
      const double rate = detail::cost_per_quotient(bids[order[candidate]]);
      if (static_cast<double>(candidate) * rate <= budget) best = candidate;
    }
  }
  return detail::make_selection(bids, order, best);
}

// First payment component: the winner's committed quotient priced at the
// threshold bid's cost-per-quotient rate.
inline double base_payment(const Bid& winner, double threshold_rate) {
  require_valid(winner);
  if (!std::isfinite(threshold_rate) || threshold_rate <= 0.0) {
    throw std::invalid_argument("threshold_rate must be positive");
  }
  return winner.service_quotient * threshold_rate;
}

enum class PenaltyKind { Quadratic, Flat, FlatWithReward };

// d(s, s'): converts the gap between measured and declared quotient into a
// per-unit deduction (or, for FlatWithReward, a small per-unit reward on
// under-reports).
struct PenaltyPolicy {
  PenaltyKind kind = PenaltyKind::Quadratic;
  // Scale on the squared gap. The squared term carries quotient-squared
  // units, so the scale is where a config fixes the unit convention (1.0
  // treats quotients as MB/s-sized numbers).
  double quadratic_scale = 1.0;
  // Fraction of the threshold rate rewarded per unit of under-report. Must
  // stay below 1 or an under-reporting player would match the truthful
  // payment.
  double reward_fraction = 0.5;

  static PenaltyPolicy quadratic(double scale = 1.0) {
    return PenaltyPolicy{PenaltyKind::Quadratic, scale, 0.0};
  }
  static PenaltyPolicy flat() {
    return PenaltyPolicy{PenaltyKind::Flat, 0.0, 0.0};
  }
  static PenaltyPolicy flat_with_reward(double fraction = 0.5) {
    return PenaltyPolicy{PenaltyKind::FlatWithReward, 0.0, fraction};
  }
};

// Declared-vs-measured service quotient for one completed assignment.
struct CompletionReport {
  double declared_quotient = 0.0;  // announced before the task ran
  double measured_quotient = 0.0;  // observed once results came back

  bool valid() const {
    return std::isfinite(declared_quotient) && std::isfinite(measured_quotient) &&
           declared_quotient > 0.0 && measured_quotient > 0.0;
  }
};

inline void validate(const PenaltyPolicy& policy) {
  switch (policy.kind) {
    case PenaltyKind::Quadratic:
      if (!std::isfinite(policy.quadratic_scale) || policy.quadratic_scale < 0.0) {
        throw std::invalid_argument("quadratic_scale must be nonnegative");
      }
      return;
    case PenaltyKind::Flat:
      return;
    case PenaltyKind::FlatWithReward:
      if (!(policy.reward_fraction >= 0.0) || !(policy.reward_fraction < 1.0)) {
        throw std::invalid_argument("reward_fraction must lie in [0, 1)");
      }
      return;
  }
  throw std::invalid_argument("unknown penalty kind");
}

inline double penalty(const PenaltyPolicy& policy, const CompletionReport& report,
                      double threshold_rate) {
  validate(policy);
  if (!report.valid()) {
    throw std::invalid_argument("completion report fields must be finite and positive");
  }
  if (!std::isfinite(threshold_rate) || threshold_rate <= 0.0) {
    throw std::invalid_argument("threshold_rate must be positive");
  }
  const double measured = report.measured_quotient;
  const double declared = report.declared_quotient;
  switch (policy.kind) {
    case PenaltyKind::Quadratic: {
      if (measured >= declared) return 0.0;
      const double gap = declared - measured;
      return policy.quadratic_scale * gap * gap + threshold_rate;
    }
    case PenaltyKind::Flat:
      return measured >= declared ? 0.0 : threshold_rate;
    case PenaltyKind::FlatWithReward:
      if (measured < declared) return threshold_rate;
      if (measured > declared) return policy.reward_fraction * threshold_rate;
      return 0.0;
  }
  return 0.0;
}

// Second payment component: d(s, s') * (s - s'). Negative for over-reports,
// zero at truth.
inline double performance_payment(const PenaltyPolicy& policy,
                                  const CompletionReport& report,
                                  double threshold_rate) {
  const double d = penalty(policy, report, threshold_rate);
  return d * (report.measured_quotient - report.declared_quotient);
}

struct PaymentBreakdown {
  double p1 = 0.0;
  double p2 = 0.0;
  double total = 0.0;
  double utility = 0.0;
};

// Settles one player. Losers are paid nothing and incur nothing. For a
// winner, report.declared_quotient must be the quotient of the bid that won.
inline PaymentBreakdown total_payment(const SelectionResult& selection,
                                      std::size_t index,
                                      const CompletionReport& report,
                                      const PenaltyPolicy& policy,
                                      double true_cost) {
  if (index >= selection.player_count) {
    throw std::out_of_range("player index outside the auction");
  }
  if (!selection.is_winner(index)) return PaymentBreakdown{};
  const double rate = selection.threshold_rate;
  const double p1 = report.declared_quotient * rate;  // validated by penalty()
  const double p2 = performance_payment(policy, report, rate);
  PaymentBreakdown out;
  out.p1 = p1;
  out.p2 = p2;
  out.total = p1 + p2;
  out.utility = out.total - true_cost;
  return out;
}

// What the distributor gains by offloading instead of running locally.
struct UtilityModel {
  double alpha = 1.0;  // weight on completion time
  double beta = 0.0;   // weight on energy
  double t_local = 0.0;
  double t_offload = 0.0;
  double e_local = 0.0;
  double e_offload = 0.0;

  bool valid() const {
    return alpha >= 0.0 && beta >= 0.0 && t_local >= 0.0 && t_offload >= 0.0 &&
           std::isfinite(alpha) && std::isfinite(beta) &&
           std::isfinite(t_local) && std::isfinite(t_offload) &&
           std::isfinite(e_local) && std::isfinite(e_offload);
  }
};

inline double distributor_utility(const UtilityModel& m) {
  if (!m.valid()) {
    throw std::invalid_argument("utility model requires nonnegative finite fields");
  }
  return m.alpha * (m.t_local - m.t_offload) + m.beta * (m.e_local - m.e_offload);
}

// Maximum money per unit of committed data rate, as a function of the
// distributor's utility: zero below u_min, a nondecreasing f+ in between,
// saturating at u_max.
struct BudgetPolicy {
  double u_min = 0.0;
  double u_max = 0.0;
  std::function<double(double)> f_plus;

  static BudgetPolicy constant(double rate, double u_min = 0.0,
                               double u_max = 86'400.0) {
    return BudgetPolicy{u_min, u_max, [rate](double) { return rate; }};
  }
  static BudgetPolicy linear(double slope, double intercept, double u_min,
                             double u_max) {
    return BudgetPolicy{u_min, u_max,
                        [slope, intercept](double u) { return intercept + slope * u; }};
  }
};

inline void validate(const BudgetPolicy& policy) {
  if (!(policy.u_min <= policy.u_max)) {
    throw std::invalid_argument("budget policy requires u_min <= u_max");
  }
  if (!policy.f_plus) {
    throw std::invalid_argument("budget policy requires f_plus");
  }
}

// Checks the nondecreasing contract of f+ on a sampled grid. Kept out of the
// budget_limit hot path; config validation and tests call it.
inline void check_nondecreasing(const BudgetPolicy& policy,
                                std::size_t grid_points = 64) {
  validate(policy);
  if (policy.u_min == policy.u_max || grid_points < 2) return;
  double prev = policy.f_plus(policy.u_min);
  for (std::size_t i = 1; i < grid_points; ++i) {
    const double u = policy.u_min + (policy.u_max - policy.u_min) *
                                        static_cast<double>(i) /
                                        static_cast<double>(grid_points - 1);
    const double value = policy.f_plus(u);
    if (value < prev) {
      throw std::invalid_argument("budget policy f_plus decreases on its domain");
    }
    prev = value;
  }
}

inline double budget_limit(const BudgetPolicy& policy, double u_d) {
  validate(policy);
  if (u_d < policy.u_min) return 0.0;
  if (u_d > policy.u_max) return policy.f_plus(policy.u_max);
  return policy.f_plus(u_d);
}

// One auction instance as the dominant-strategy oracle sees it: truthful
// bids, a budget, and the settlement policy.
struct Instance {
  std::vector<Bid> truthful_bids;
  double budget = 0.0;
  PenaltyPolicy policy;
};

// Utility the player realizes when declaring `declared` while its actual
// quotient stays at its true value. Re-runs selection with the deviated bid
// in place.
inline double deviation_utility(const Instance& instance, std::size_t player,
                                const Bid& declared) {
  if (player >= instance.truthful_bids.size()) {
    throw std::out_of_range("player index outside the instance");
  }
  std::vector<Bid> trial = instance.truthful_bids;
  trial[player] = declared;
  const SelectionResult selection = select_winners(trial, instance.budget);
  if (!selection.is_winner(player)) return 0.0;
  const Bid& truth = instance.truthful_bids[player];
  const CompletionReport report{declared.service_quotient, truth.service_quotient};
  return total_payment(selection, player, report, instance.policy, truth.cost)
      .utility;
}

struct DeviationOutcome {
  Bid best_bid;            // maximizing declaration (the truth when IC holds)
  double best_utility = 0.0;
  double truthful_utility = 0.0;
};

// Evaluates every candidate declaration in `grid` for one player and returns
// the maximizer. The grid must contain the truthful bid so the comparison is
// anchored; ties resolve to the truthful point.
inline DeviationOutcome best_response_search(const Instance& instance,
                                             std::size_t player,
                                             std::span<const Bid> grid) {
  if (player >= instance.truthful_bids.size()) {
    throw std::out_of_range("player index outside the instance");
  }
  const Bid truth = instance.truthful_bids[player];
  const bool has_truth =
      std::any_of(grid.begin(), grid.end(), [&](const Bid& bid) {
        return bid.cost == truth.cost &&
               bid.service_quotient == truth.service_quotient;
      });
  if (!has_truth) {
    throw std::invalid_argument("misreport grid must contain the truthful bid");
  }
  DeviationOutcome outcome;
  outcome.best_bid = truth;
  outcome.truthful_utility = deviation_utility(instance, player, truth);
  outcome.best_utility = outcome.truthful_utility;
  for (const Bid& candidate : grid) {
    const double utility = deviation_utility(instance, player, candidate);
    if (utility > outcome.best_utility) {
      outcome.best_utility = utility;
      outcome.best_bid = candidate;
    }
  }
  return outcome;
}

// Multiplicative (cost, quotient) deviation grid around the truthful bid,
// truth included exactly.
inline std::vector<Bid> misreport_grid(const Bid& truth, std::size_t points_per_axis,
                                       double lo = 0.5, double hi = 1.5) {
  require_valid(truth);
  if (points_per_axis < 2 || !(lo > 0.0) || !(lo < 1.0) || !(hi > 1.0)) {
    throw std::invalid_argument("grid must straddle the truthful point");
  }
  std::vector<double> factors;
  factors.reserve(points_per_axis + 1);
  for (std::size_t i = 0; i < points_per_axis; ++i) {
    factors.push_back(lo + (hi - lo) * static_cast<double>(i) /
                               static_cast<double>(points_per_axis - 1));
  }
  factors.push_back(1.0);
  std::vector<Bid> grid;
  grid.reserve(factors.size() * factors.size());
  for (double fc : factors) {
    for (double fs : factors) {
      grid.push_back(Bid{truth.cost * fc, truth.service_quotient * fs});
    }
  }
  return grid;
}

}  // namespace mcc::auction
