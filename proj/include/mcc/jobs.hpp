#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcc/mechanism.hpp"

// Workload models and allocation policies. Workloads are integral bytes and
// proportional shares are rounded by largest remainder, so every plan
// conserves bytes exactly.

namespace mcc::jobs {

using Bytes = std::uint64_t;

struct Job {
  Bytes workload = 0;
};

// Winner -> assigned bytes, parallel to the winner list handed in.
struct AllocationPlan {
  std::vector<Bytes> assignments;
  Bytes residual = 0;

  Bytes assigned_total() const {
    return std::accumulate(assignments.begin(), assignments.end(), Bytes{0});
  }
};

namespace detail {

// Largest-remainder apportionment of `total` proportional to `weights`.
// Remainder ties go to the lower index.
inline std::vector<Bytes> apportion(Bytes total, std::span<const double> weights) {
  const std::size_t n = weights.size();
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("weights must be finite and positive");
    }
    sum += w;
  }
  std::vector<Bytes> shares(n, 0);
  std::vector<std::pair<double, std::size_t>> remainders(n);
  Bytes allocated = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double quota = static_cast<double>(total) * (weights[i] / sum);
    const double floored = std::floor(quota);
    shares[i] = static_cast<Bytes>(floored);
    allocated += shares[i];
    remainders[i] = {quota - floored, i};
  }
  std::sort(remainders.begin(), remainders.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first > b.first;
              return a.second < b.second;
            });
  Bytes leftover = total - allocated;
  for (std::size_t i = 0; leftover > 0 && i < n; ++i, --leftover) {
    ++shares[remainders[i].second];
  }
  return shares;
}

}  // namespace detail

// Splits a divisible workload across the winners in proportion to their
// committed quotients. With an interval cap, no player receives more than it
// can finish before the next auction; excess stays in the residual.
inline AllocationPlan split_single(Bytes remaining,
                                   std::span<const auction::Bid> winners,
                                   std::optional<double> interval_cap_s = {}) {
  if (remaining == 0) {
    throw std::invalid_argument("remaining workload must be positive");
  }
  AllocationPlan plan;
  if (winners.empty()) {
    plan.residual = remaining;
    return plan;
  }
  if (interval_cap_s && !(*interval_cap_s > 0.0)) {
    throw std::invalid_argument("interval cap must be positive");
  }
  std::vector<double> quotients;
  quotients.reserve(winners.size());
  for (const auto& bid : winners) {
    auction::require_valid(bid);
    quotients.push_back(bid.service_quotient);
  }
  plan.assignments = detail::apportion(remaining, quotients);
  if (interval_cap_s) {
    for (std::size_t i = 0; i < winners.size(); ++i) {
      const double cap_bytes =
          std::floor(winners[i].service_quotient * *interval_cap_s);
      const Bytes cap = cap_bytes >= static_cast<double>(remaining)
                            ? remaining
                            : static_cast<Bytes>(cap_bytes);
      plan.assignments[i] = std::min(plan.assignments[i], cap);
    }
  }
  plan.residual = remaining - plan.assigned_total();
  return plan;
}

// Jobs with causal dependencies. Nodes are named; edges run prerequisite to
// dependent.
struct DagJobSet {
  std::vector<std::string> ids;
  std::vector<Bytes> workloads;  // parallel to ids
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  std::size_t size() const { return ids.size(); }

  void validate() const {
    if (ids.size() != workloads.size()) {
      throw std::invalid_argument("ids and workloads must align");
    }
    for (Bytes w : workloads) {
      if (w == 0) throw std::invalid_argument("workloads must be positive");
    }
    for (const auto& [from, to] : edges) {
      if (from >= size() || to >= size() || from == to) {
        throw std::invalid_argument("edge endpoints out of range");
      }
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = i + 1; j < ids.size(); ++j) {
        if (ids[i] == ids[j]) {
          throw std::invalid_argument("duplicate job id: " + ids[i]);
        }
      }
    }
  }

  std::size_t index_of(const std::string& id) const {
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw std::invalid_argument("unknown job id: " + id);
    return static_cast<std::size_t>(it - ids.begin());
  }
};

class CycleError : public std::runtime_error {
 public:
  CycleError(std::string message, std::vector<std::size_t> witness)
      : std::runtime_error(std::move(message)), witness_(std::move(witness)) {}

  const std::vector<std::size_t>& witness() const { return witness_; }

 private:
  std::vector<std::size_t> witness_;
};

namespace detail {

// Walks successor links inside the stuck node set until a node repeats.
inline std::vector<std::size_t> find_cycle(
    const DagJobSet& dag, const std::vector<bool>& stuck) {
  std::vector<std::size_t> path;
  std::vector<std::size_t> position(dag.size(), SIZE_MAX);
  std::size_t current = 0;
  while (!stuck[current]) ++current;
  for (;;) {
    if (position[current] != SIZE_MAX) {
      path.erase(path.begin(),
                 path.begin() + static_cast<std::ptrdiff_t>(position[current]));
      return path;
    }
    position[current] = path.size();
    path.push_back(current);
    for (const auto& [from, to] : dag.edges) {
      if (from == current && stuck[to]) {
        current = to;
        break;
      }
    }
  }
}

}  // namespace detail

// Topological level partition: jobs within a level are mutually independent;
// levels execute sequentially. Throws CycleError with a witness cycle.
inline std::vector<std::vector<std::size_t>> dag_levels(const DagJobSet& dag) {
  dag.validate();
  const std::size_t n = dag.size();
  std::vector<std::size_t> indegree(n, 0);
  for (const auto& [from, to] : dag.edges) {
    (void)from;
    ++indegree[to];
  }
  std::vector<std::vector<std::size_t>> levels;
  std::vector<bool> placed(n, false);
  std::size_t placed_count = 0;
  while (placed_count < n) {
    std::vector<std::size_t> level;
    for (std::size_t i = 0; i < n; ++i) {
      if (!placed[i] && indegree[i] == 0) level.push_back(i);
    }
    if (level.empty()) {
      std::vector<bool> stuck(n);
      for (std::size_t i = 0; i < n; ++i) stuck[i] = !placed[i];
      const auto cycle = detail::find_cycle(dag, stuck);
      std::ostringstream message;
      message << "dependency cycle:";
      for (std::size_t node : cycle) message << ' ' << dag.ids[node] << " ->";
      message << ' ' << dag.ids[cycle.front()];
      throw CycleError(message.str(), cycle);
    }
    for (std::size_t node : level) {
      placed[node] = true;
      ++placed_count;
      for (const auto& [from, to] : dag.edges) {
        if (from == node) --indegree[to];
      }
    }
    levels.push_back(std::move(level));
  }
  return levels;
}

// A level's independent jobs pool into one divisible workload; each winner
// takes its proportional slice of the pooled bytes.
inline AllocationPlan dag_allocate(std::span<const Bytes> level_workloads,
                                   std::span<const auction::Bid> winners,
                                   std::optional<double> interval_cap_s = {}) {
  if (level_workloads.empty()) {
    throw std::invalid_argument("level must contain at least one job");
  }
  const Bytes total = std::accumulate(level_workloads.begin(),
                                      level_workloads.end(), Bytes{0});
  return split_single(total, winners, interval_cap_s);
}

// Total workload reachable from `job`, the job itself included.
inline Bytes remaining_load(const DagJobSet& dag, std::size_t job) {
  if (job >= dag.size()) throw std::invalid_argument("job index out of range");
  std::vector<bool> seen(dag.size(), false);
  std::vector<std::size_t> stack = {job};
  Bytes total = 0;
  while (!stack.empty()) {
    const std::size_t current = stack.back();
    stack.pop_back();
    if (seen[current]) continue;
    seen[current] = true;
    total += dag.workloads[current];
    for (const auto& [from, to] : dag.edges) {
      if (from == current && !seen[to]) stack.push_back(to);
    }
  }
  return total;
}

// Frontier jobs ordered by decreasing remaining load (reachable workload
// sums); ties break on the job identifier so the ranking is deterministic.
inline std::vector<std::size_t> remaining_load_rank(
    const DagJobSet& dag, std::span<const std::size_t> frontier) {
  std::vector<std::size_t> ranked(frontier.begin(), frontier.end());
  std::vector<Bytes> loads(dag.size(), 0);
  for (std::size_t job : ranked) loads[job] = remaining_load(dag, job);
  std::sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
    if (loads[a] != loads[b]) return loads[a] > loads[b];
    return dag.ids[a] < dag.ids[b];
  });
  return ranked;
}

struct IndivisibleDecision {
  bool offload = false;
  std::size_t winner = SIZE_MAX;  // index into the winner list when offloading
};

// A whole indivisible job goes to the winner with the highest committed
// quotient, and only when that beats local execution strictly.
inline IndivisibleDecision indivisible_assign(
    const Job& job, std::span<const auction::Bid> winners, double local_rate) {
  if (!(local_rate > 0.0) || !std::isfinite(local_rate)) {
    throw std::invalid_argument("local_rate must be positive");
  }
  if (job.workload == 0) {
    throw std::invalid_argument("job workload must be positive");
  }
  IndivisibleDecision decision;
  if (winners.empty()) return decision;
  std::size_t best = 0;
  for (std::size_t i = 1; i < winners.size(); ++i) {
    if (winners[i].service_quotient > winners[best].service_quotient) best = i;
  }
  if (winners[best].service_quotient > local_rate) {
    decision.offload = true;
    decision.winner = best;
  }
  return decision;
}

}  // namespace mcc::jobs
