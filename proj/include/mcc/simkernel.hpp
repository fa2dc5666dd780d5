#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcc/jobs.hpp"
#include "mcc/mechanism.hpp"
#include "mcc/mobility.hpp"
#include "mcc/privacy.hpp"
#include "mcc/rng.hpp"
#include "mcc/sampling.hpp"

// Discrete-event simulation of repeated auctions over a contact trace. Each
// round probes the distributor's neighbors, selects winners under the budget
// derived from the estimated utility, hands out workload capped by the
// current interval, then settles the interval: connected nodes finish and
// get paid, disconnected nodes forfeit their piece back to the pool.

namespace mcc::sim {

using mobility::NodeId;

struct Overheads {
  double pre_processing = 0.0;     // once per run, seconds
  double per_task_division = 0.0;  // per selected winner per auction
  double post_processing = 0.0;    // once per run

  bool valid() const {
    return pre_processing >= 0.0 && per_task_division >= 0.0 &&
           post_processing >= 0.0;
  }
};

// Ex-ante completion-time estimate when `bidders` share the remaining bytes
// proportionally: division overhead grows with the group size, and the
// parallel part is the pooled rate.
inline double estimate_offload_time(std::span<const auction::Bid> bidders,
                                    jobs::Bytes remaining,
                                    const Overheads& overheads) {
  if (bidders.empty()) {
    throw std::invalid_argument("estimate requires at least one bidder");
  }
  double sum_quotient = 0.0;
  for (const auto& bid : bidders) {
    auction::require_valid(bid);
    sum_quotient += bid.service_quotient;
  }
  return overheads.pre_processing +
         overheads.per_task_division * static_cast<double>(bidders.size()) +
         static_cast<double>(remaining) / sum_quotient +
         overheads.post_processing;
}

struct IntervalPolicy {
  enum class Kind { Fixed, Aimd };
  Kind kind = Kind::Fixed;
  double fixed_T = 20.0;
  // AIMD parameters; the first interval starts at T_min.
  double T_min = 20.0;
  double T_max = 500.0;
  double additive_step = 20.0;

  void validate() const {
    if (kind == Kind::Fixed) {
      if (!(fixed_T > 0.0)) {
        throw std::invalid_argument("fixed interval must be positive");
      }
      return;
    }
    if (!(T_min > 0.0) || !(T_min <= T_max) || !(additive_step > 0.0)) {
      throw std::invalid_argument("requires 0 < T_min <= T_max and step > 0");
    }
  }
};

// Adaptive interval state: halve on any change in the contact set, creep up
// by the additive step otherwise, always clamped to [T_min, T_max].
struct AuctionScheduler {
  double T = 20.0;
  double T_min = 20.0;
  double T_max = 500.0;
  double additive_step = 20.0;
  std::vector<NodeId> last_contacts;  // sorted
  bool primed = false;                // first observation only stores the set
};

inline double aimd_update(AuctionScheduler& scheduler,
                          std::span<const NodeId> contacts_sorted) {
  const bool changed =
      scheduler.last_contacts.size() != contacts_sorted.size() ||
      !std::equal(scheduler.last_contacts.begin(),
                  scheduler.last_contacts.end(), contacts_sorted.begin());
  if (changed) {
    scheduler.T = std::max(scheduler.T / 2.0, scheduler.T_min);
  } else {
    scheduler.T = std::min(scheduler.T + scheduler.additive_step,
                           scheduler.T_max);
  }
  scheduler.last_contacts.assign(contacts_sorted.begin(),
                                 contacts_sorted.end());
  return scheduler.T;
}

// Serializable budget policy: constant rate or linear in the distributor
// utility. Money is quoted per MB/s of committed quotient and converted to
// the per-byte/s scale the mechanism sees.
struct BudgetSpec {
  enum class Kind { Constant, Linear };
  Kind kind = Kind::Constant;
  double rate_per_mbps = 50.0;       // constant value, money per MB/s
  double slope_per_mbps = 0.0;       // linear: rate = intercept + slope * u_d
  double intercept_per_mbps = 0.0;
  double u_min = 0.0;
  double u_max = 86'400.0;

  auction::BudgetPolicy to_policy() const {
    constexpr double kPerByte = 1e-6;
    if (kind == Kind::Constant) {
      return auction::BudgetPolicy::constant(rate_per_mbps * kPerByte, u_min,
                                             u_max);
    }
    return auction::BudgetPolicy::linear(slope_per_mbps * kPerByte,
                                         intercept_per_mbps * kPerByte, u_min,
                                         u_max);
  }
};

// Serializable penalty policy, quadratic scale quoted in the MB/s convention.
struct PenaltySpec {
  auction::PenaltyKind kind = auction::PenaltyKind::Quadratic;
  double quadratic_scale_mb = 1.0;
  double reward_fraction = 0.5;

  auction::PenaltyPolicy to_policy() const {
    // (bytes/s gap)^2 * scale must equal (MB/s gap)^2 * scale_mb / 1e6:
    // converting both the gap units and the money-per-rate scale.
    return auction::PenaltyPolicy{kind, quadratic_scale_mb * 1e-18,
                                  reward_fraction};
  }
};

struct MaskingStrategy {
  NodeId node = 0;
  double x = 1.0;  // declared bid becomes (x * c, s / x)
};

struct ScenarioConfig {
  std::string name = "scenario";
  // Workload: a single divisible job, or a DAG whose levels run as barriers.
  jobs::Bytes workload = 600'000'000;
  std::optional<jobs::DagJobSet> dag;
  NodeId distributor = 0;
  double local_rate = 50'000.0;  // bytes/s the distributor manages alone
  double alpha = 1.0;            // utility weight on time
  double beta = 0.0;             // utility weight on energy
  std::string trace_file;        // resolved by the caller/CLI
  std::optional<mobility::MobilityConfig> generator;
  IntervalPolicy interval;
  sampling::BidModel bids;
  BudgetSpec budget;
  PenaltySpec penalty;
  Overheads overheads;
  bool distributor_processes_residual = true;
  std::optional<MaskingStrategy> masking;
  // Pin exact player types; otherwise they are drawn per node from `bids`.
  std::optional<std::vector<auction::PlayerProfile>> profiles;
  std::uint64_t seed = 0;

  void validate() const {
    if (workload == 0 && !dag) {
      throw std::invalid_argument("workload must be positive");
    }
    if (dag) dag->validate();
    if (!(local_rate > 0.0)) {
      throw std::invalid_argument("local_rate must be positive");
    }
    if (!(alpha >= 0.0) || !(beta >= 0.0)) {
      throw std::invalid_argument("alpha and beta must be nonnegative");
    }
    interval.validate();
    bids.validate();
    if (!overheads.valid()) {
      throw std::invalid_argument("overheads must be nonnegative");
    }
    if (masking && (!(masking->x > 0.0) || !(masking->x <= 1.0))) {
      throw std::invalid_argument("masking x must lie in (0, 1]");
    }
    auction::check_nondecreasing(budget.to_policy());
    auction::validate(penalty.to_policy());
  }
};

struct Assignment {
  NodeId node = 0;
  std::size_t bid_index = 0;  // into RoundRecord::bids
  jobs::Bytes amount = 0;
  double t_done = 0.0;
  bool completed = false;
  bool disconnected = false;
  double paid = 0.0;
};

struct RoundRecord {
  double t = 0.0;
  double T = 0.0;  // effective interval length (clipped at the horizon)
  std::vector<NodeId> bidders;
  std::vector<auction::Bid> bids;  // declared, parallel to bidders
  auction::SelectionResult selection;
  double u_d_estimate = 0.0;
  double budget = 0.0;
  std::vector<Assignment> assignments;
  jobs::Bytes residual_kept = 0;    // bytes the distributor held back
  jobs::Bytes local_processed = 0;  // bytes it finished itself
  bool level_finished = false;
  double finish_time = 0.0;  // valid when level_finished
};

struct SimMetrics {
  bool complete = false;
  double completion_s = 0.0;  // horizon when incomplete
  std::size_t auctions = 0;
  double disconnected_frac = 0.0;
  double speedup = 0.0;
  double total_paid = 0.0;
  double overpayment = 0.0;
  double distributor_utility = 0.0;
  double t_local = 0.0;
};

class Simulation {
 public:
  Simulation(ScenarioConfig config, mobility::ContactTrace trace)
      : config_(std::move(config)), trace_(std::move(trace)) {
    config_.validate();
    scheduler_.T = config_.interval.kind == IntervalPolicy::Kind::Fixed
                       ? config_.interval.fixed_T
                       : config_.interval.T_min;
    scheduler_.T_min = config_.interval.T_min;
    scheduler_.T_max = config_.interval.T_max;
    scheduler_.additive_step = config_.interval.additive_step;
    if (config_.dag) {
      for (const auto& level : jobs::dag_levels(*config_.dag)) {
        jobs::Bytes pooled = 0;
        for (std::size_t job : level) pooled += config_.dag->workloads[job];
        level_workloads_.push_back(pooled);
      }
    } else {
      level_workloads_.push_back(config_.workload);
    }
    remaining_ = level_workloads_.front();
    profiles_.resize(trace_.node_count());
    for (NodeId node = 0; node < trace_.node_count(); ++node) {
      if (config_.profiles && node < config_.profiles->size()) {
        profiles_[node] = (*config_.profiles)[node];
      } else {
        Rng rng(Rng::mix(config_.seed, node));
        profiles_[node] = sampling::draw_profile(rng, config_.bids);
      }
    }
  }

  jobs::Bytes total_workload() const {
    jobs::Bytes total = 0;
    for (jobs::Bytes level : level_workloads_) total += level;
    return total;
  }
  jobs::Bytes remaining_current_level() const { return remaining_; }
  jobs::Bytes remaining_total() const {
    jobs::Bytes total = remaining_;
    for (std::size_t level = current_level_ + 1; level < level_workloads_.size();
         ++level) {
      total += level_workloads_[level];
    }
    return total;
  }
  jobs::Bytes completed_total() const { return completed_; }
  double now() const { return now_; }
  const AuctionScheduler& scheduler() const { return scheduler_; }
  const RoundRecord& last_round() const { return last_round_; }
  const auction::PlayerProfile& profile(NodeId node) const {
    return profiles_.at(node);
  }

  bool finished() const { return finished_; }
  bool exhausted() const { return exhausted_; }

  // Probe, bid, select, allocate. Leaves the clock untouched.
  RoundRecord auction_round(double t) {
    RoundRecord record;
    record.t = t;
    const auto contacts = trace_.neighbors(config_.distributor, t);
    if (config_.interval.kind == IntervalPolicy::Kind::Aimd) {
      if (!scheduler_.primed) {
        scheduler_.last_contacts = contacts;
        scheduler_.primed = true;
      } else {
        aimd_update(scheduler_, contacts);
      }
    }
    record.T = std::min(scheduler_.T, trace_.horizon() - t);
    record.bidders = contacts;
    for (NodeId node : contacts) {
      auction::Bid declared = profiles_[node].truthful_bid();
      if (config_.masking && config_.masking->node == node) {
        declared = privacy::masked_bid(declared, config_.masking->x);
      }
      record.bids.push_back(declared);
    }
    if (!record.bids.empty()) {
      const double t_local_remaining =
          static_cast<double>(remaining_) / config_.local_rate;
      const double t_offload_estimate =
          estimate_offload_time(record.bids, remaining_, config_.overheads);
      record.u_d_estimate = auction::distributor_utility(
          {config_.alpha, config_.beta, t_local_remaining, t_offload_estimate,
           0.0, 0.0});
      record.budget =
          auction::budget_limit(config_.budget.to_policy(), record.u_d_estimate);
      record.selection = auction::select_winners(record.bids, record.budget);
    }
    std::vector<auction::Bid> winner_bids;
    for (std::size_t index : record.selection.winner_indices) {
      winner_bids.push_back(record.bids[index]);
    }
    jobs::Bytes assigned_total = 0;
    if (!winner_bids.empty()) {
      const auto plan = jobs::split_single(remaining_, winner_bids, record.T);
      for (std::size_t i = 0; i < winner_bids.size(); ++i) {
        if (plan.assignments[i] == 0) continue;
        Assignment assignment;
        assignment.bid_index = record.selection.winner_indices[i];
        assignment.node = record.bidders[assignment.bid_index];
        assignment.amount = plan.assignments[i];
        record.assignments.push_back(assignment);
        assigned_total += assignment.amount;
      }
    }
    record.residual_kept = remaining_ - assigned_total;
    return record;
  }

  // Settles [t, t+T): completions, forfeits, payments, local progress, and
  // the clock. A finished level hands the next auction the finish instant.
  void advance_interval(RoundRecord& record) {
    const double t = record.t;
    const double interval_end = t + record.T;
    const auction::PenaltyPolicy penalty = config_.penalty.to_policy();
    double latest_finish = t;
    jobs::Bytes done_this_interval = 0;
    jobs::Bytes forfeited = 0;
    for (Assignment& assignment : record.assignments) {
      const auction::PlayerProfile& profile = profiles_[assignment.node];
      const double duration =
          static_cast<double>(assignment.amount) / profile.true_quotient;
      assignment.t_done = t + duration;
      const bool fits_interval =
          assignment.t_done <= interval_end * (1.0 + 1e-12);
      const bool connected =
          fits_interval &&
          trace_.connected_throughout(config_.distributor, assignment.node, t,
                                      std::min(assignment.t_done, interval_end));
      if (connected) {
        assignment.completed = true;
        done_this_interval += assignment.amount;
        latest_finish = std::max(latest_finish, assignment.t_done);
        const auction::Bid& declared = record.bids[assignment.bid_index];
        const auction::CompletionReport report{declared.service_quotient,
                                               profile.true_quotient};
        const auto payment = auction::total_payment(
            record.selection, assignment.bid_index, report, penalty,
            profile.true_cost);
        assignment.paid = payment.total;
        total_paid_ += payment.total;
        overpayment_ += payment.total - profile.true_cost;
        ++completed_assignments_;
      } else {
        assignment.disconnected = true;
        forfeited += assignment.amount;
        ++disconnected_assignments_;
      }
    }
    if (config_.distributor_processes_residual && record.residual_kept > 0) {
      const double capacity = config_.local_rate * record.T;
      record.local_processed =
          capacity >= static_cast<double>(record.residual_kept)
              ? record.residual_kept
              : static_cast<jobs::Bytes>(capacity);
      done_this_interval += record.local_processed;
      if (record.local_processed > 0) {
        latest_finish = std::max(
            latest_finish, t + static_cast<double>(record.local_processed) /
                                   config_.local_rate);
      }
    }
    completed_ += done_this_interval;
    remaining_ = remaining_ - done_this_interval;
    ++auctions_;
    if (remaining_ == 0) {
      record.level_finished = true;
      record.finish_time = latest_finish;
      if (current_level_ + 1 < level_workloads_.size()) {
        ++current_level_;
        remaining_ = level_workloads_[current_level_];
        now_ = std::min(latest_finish, interval_end);
      } else {
        finished_ = true;
        completion_sim_ = latest_finish;
        now_ = latest_finish;
      }
    } else {
      now_ = interval_end;
      (void)forfeited;  // already back in remaining_
    }
    last_round_ = record;
  }

  // One auction plus its interval. Returns false once the run is over.
  bool step() {
    if (finished_ || exhausted_) return false;
    if (now_ >= trace_.horizon() - 1e-9) {
      exhausted_ = true;
      return false;
    }
    RoundRecord record = auction_round(now_);
    division_overhead_ +=
        config_.overheads.per_task_division *
        static_cast<double>(record.selection.k);
    advance_interval(record);
    return true;
  }

  SimMetrics metrics() const {
    SimMetrics out;
    out.complete = finished_;
    const double sim_time = finished_ ? completion_sim_ : trace_.horizon();
    out.completion_s = config_.overheads.pre_processing + sim_time +
                       division_overhead_ + config_.overheads.post_processing;
    out.auctions = auctions_;
    const std::size_t pairs =
        completed_assignments_ + disconnected_assignments_;
    out.disconnected_frac =
        pairs == 0 ? 0.0
                   : static_cast<double>(disconnected_assignments_) /
                         static_cast<double>(pairs);
    out.t_local = static_cast<double>(total_workload()) / config_.local_rate;
    out.speedup = out.completion_s > 0.0 ? out.t_local / out.completion_s : 0.0;
    out.total_paid = total_paid_;
    out.overpayment = overpayment_;
    out.distributor_utility = auction::distributor_utility(
        {config_.alpha, config_.beta, out.t_local, out.completion_s, 0.0, 0.0});
    return out;
  }

 private:
  ScenarioConfig config_;
  mobility::ContactTrace trace_;
  AuctionScheduler scheduler_;
  std::vector<jobs::Bytes> level_workloads_;
  std::size_t current_level_ = 0;
  jobs::Bytes remaining_ = 0;
  jobs::Bytes completed_ = 0;
  std::vector<auction::PlayerProfile> profiles_;
  double now_ = 0.0;
  bool finished_ = false;
  bool exhausted_ = false;
  double completion_sim_ = 0.0;
  std::size_t auctions_ = 0;
  std::size_t completed_assignments_ = 0;
  std::size_t disconnected_assignments_ = 0;
  double total_paid_ = 0.0;
  double overpayment_ = 0.0;
  double division_overhead_ = 0.0;
  RoundRecord last_round_;
};

inline SimMetrics run_scenario(const ScenarioConfig& config,
                               const mobility::ContactTrace& trace) {
  Simulation simulation(config, trace);
  while (simulation.step()) {
  }
  return simulation.metrics();
}

// Resolves the trace source when the scenario carries a generator config;
// file-backed traces are the caller's job.
inline mobility::ContactTrace resolve_trace(const ScenarioConfig& config) {
  if (!config.generator) {
    throw std::invalid_argument(
        "scenario has no generator config; load the trace file instead");
  }
  return mobility::generate(*config.generator);
}

}  // namespace mcc::sim
