#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mcc/mechanism.hpp"
#include "mcc/rng.hpp"

// Scenario-level bid generation: how player types are drawn.

namespace mcc::sampling {

struct BidModel {
  enum class Kind {
    // Cost and quotient drawn independently from uniform ranges.
    IndependentUniform,
    // Quotient uniform; cost = theta * quotient / quotient_ref with theta
    // uniform, so cost strictly increases in both factors.
    ThetaLinear,
  };

  Kind kind = Kind::IndependentUniform;
  double cost_min = 1.0;
  double cost_max = 5.0;
  double quotient_min = 50'000.0;  // bytes per second
  double quotient_max = 125'000.0;
  double theta_min = 1.0;
  double theta_max = 5.0;
  double quotient_ref = 100'000.0;

  void validate() const {
    if (!(cost_min > 0.0) || !(cost_max >= cost_min) || !(quotient_min > 0.0) ||
        !(quotient_max >= quotient_min)) {
      throw std::invalid_argument("bid model ranges must be positive");
    }
    if (kind == Kind::ThetaLinear &&
        (!(theta_min > 0.0) || !(theta_max >= theta_min) ||
         !(quotient_ref > 0.0))) {
      throw std::invalid_argument("theta parameters must be positive");
    }
  }
};

inline auction::PlayerProfile draw_profile(Rng& rng, const BidModel& model) {
  model.validate();
  const double quotient = rng.uniform(model.quotient_min, model.quotient_max);
  if (model.kind == BidModel::Kind::ThetaLinear) {
    const double theta = rng.uniform(model.theta_min, model.theta_max);
    return auction::derive_profile(theta, quotient, model.theta_min,
                                   model.theta_max, model.quotient_ref);
  }
  const double cost = rng.uniform(model.cost_min, model.cost_max);
  return auction::PlayerProfile{cost, quotient, cost};
}

inline std::vector<auction::Bid> draw_truthful_instance(Rng& rng,
                                                        const BidModel& model,
                                                        std::size_t players) {
  std::vector<auction::Bid> bids;
  bids.reserve(players);
  for (std::size_t i = 0; i < players; ++i) {
    bids.push_back(draw_profile(rng, model).truthful_bid());
  }
  return bids;
}

}  // namespace mcc::sampling
