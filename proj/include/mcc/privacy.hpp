#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "mcc/mechanism.hpp"
#include "mcc/rng.hpp"
#include "mcc/sampling.hpp"

// Privacy accounting: an exposure count for the distributor, and bid masking
// for players who trade utility for concealment.

namespace mcc::privacy {

// Per-job sensitivity and visibility (how many devices saw each job).
struct PrivacyProfile {
  std::vector<double> sensitivities;        // rho_j in [0, 1]
  std::vector<std::uint32_t> visibilities;  // selected devices per job

  void validate() const {
    if (sensitivities.size() != visibilities.size()) {
      throw std::invalid_argument(
          "sensitivities and visibilities must have equal length");
    }
    for (double rho : sensitivities) {
      if (!(rho >= 0.0) || !(rho <= 1.0)) {
        throw std::invalid_argument("sensitivity must lie in [0, 1]");
      }
    }
  }
};

// Sensitivity-weighted exposure count.
inline double privacy_risk(const PrivacyProfile& profile) {
  profile.validate();
  double risk = 0.0;
  for (std::size_t j = 0; j < profile.sensitivities.size(); ++j) {
    risk += profile.sensitivities[j] *
            static_cast<double>(profile.visibilities[j]);
  }
  return risk;
}

// Conceals a bid by factor x: cost shrinks to x*c, quotient inflates to s/x.
// x = 1 reveals the truth.
inline auction::Bid masked_bid(const auction::Bid& truth, double x) {
  auction::require_valid(truth);
  if (!(x > 0.0) || !(x <= 1.0)) {
    throw std::invalid_argument("privacy parameter x must lie in (0, 1]");
  }
  return auction::Bid{x * truth.cost, truth.service_quotient / x};
}

struct SweepConfig {
  std::size_t instances = 200;
  std::size_t players_min = 2;
  std::size_t players_max = 8;
  sampling::BidModel bids;
  double budget_min = 0.0;  // budget drawn per instance
  double budget_max = 0.6;
  auction::PenaltyPolicy penalty = auction::PenaltyPolicy::quadratic();
  std::uint64_t seed = 0;

  void validate() const {
    if (instances == 0 || players_min < 2 || players_max < players_min) {
      throw std::invalid_argument("sweep needs instances and >= 2 players");
    }
    if (!(budget_min >= 0.0) || !(budget_max >= budget_min)) {
      throw std::invalid_argument("sweep budget range invalid");
    }
    bids.validate();
    auction::validate(penalty);
  }
};

struct SweepPoint {
  double x = 1.0;
  std::uint64_t seed = 0;  // instance replication index
  double utility = 0.0;    // the masking player's realized utility
};

// Realized utility of the designated masking player (index 0) when it
// declares (x*c, s/x) but performs at its true quotient. The same instances
// are replayed for every x, so points are paired across the grid.
inline std::vector<SweepPoint> privacy_sweep(const SweepConfig& config,
                                             std::span<const double> x_grid) {
  config.validate();
  bool has_truthful_point = false;
  for (double x : x_grid) {
    if (!(x > 0.0) || !(x <= 1.0)) {
      throw std::invalid_argument("x grid must lie in (0, 1]");
    }
    if (x == 1.0) has_truthful_point = true;
  }
  if (!has_truthful_point) {
    throw std::invalid_argument("x grid must contain 1.0");
  }
  std::vector<SweepPoint> points;
  points.reserve(x_grid.size() * config.instances);
  for (std::uint64_t instance = 0; instance < config.instances; ++instance) {
    Rng rng(Rng::mix(config.seed, instance));
    const std::size_t players =
        config.players_min +
        rng.below(config.players_max - config.players_min + 1);
    const auto truthful =
        sampling::draw_truthful_instance(rng, config.bids, players);
    const double budget = rng.uniform(config.budget_min, config.budget_max);
    const auction::Bid truth = truthful[0];
    for (double x : x_grid) {
      std::vector<auction::Bid> declared = truthful;
      declared[0] = masked_bid(truth, x);
      const auto selection = auction::select_winners(declared, budget);
      double utility = 0.0;
      if (selection.is_winner(0)) {
        const auction::CompletionReport report{
            declared[0].service_quotient, truth.service_quotient};
        utility = auction::total_payment(selection, 0, report, config.penalty,
                                         truth.cost)
                      .utility;
      }
      points.push_back(SweepPoint{x, instance, utility});
    }
  }
  return points;
}

}  // namespace mcc::privacy
