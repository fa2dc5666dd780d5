#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mcc/rng.hpp"

// Contact traces and the synthetic mobility models that produce them.
// Contacts are half-open [start, end) intervals between canonicalized node
// pairs; per-pair intervals never overlap or touch after construction.

namespace mcc::mobility {

using NodeId = std::uint32_t;

struct ContactEvent {
  NodeId node_a = 0;  // canonical: node_a < node_b
  NodeId node_b = 0;
  double start = 0.0;
  double end = 0.0;
};

class ContactTrace {
 public:
  ContactTrace() = default;

  // Canonicalizes, merges overlapping or touching intervals per pair, sorts.
  ContactTrace(std::vector<ContactEvent> events, double horizon,
               NodeId node_count)
      : horizon_(horizon), node_count_(node_count) {
    std::map<std::pair<NodeId, NodeId>, std::vector<std::pair<double, double>>>
        by_pair;
    for (ContactEvent event : events) {
      if (event.node_a == event.node_b) {
        throw std::invalid_argument("self-contact is not a contact");
      }
      if (event.node_a > event.node_b) std::swap(event.node_a, event.node_b);
      if (!(event.start < event.end) || event.start < 0.0 ||
          !std::isfinite(event.end)) {
        throw std::invalid_argument("contact requires 0 <= start < end");
      }
      if (event.node_b >= node_count_ || event.end > horizon_) {
        throw std::invalid_argument("contact outside trace bounds");
      }
      by_pair[{event.node_a, event.node_b}].push_back(
          {event.start, event.end});
    }
    for (auto& [pair, intervals] : by_pair) {
      std::sort(intervals.begin(), intervals.end());
      std::vector<std::pair<double, double>> merged;
      for (const auto& interval : intervals) {
        if (!merged.empty() && interval.first <= merged.back().second) {
          merged.back().second = std::max(merged.back().second, interval.second);
        } else {
          merged.push_back(interval);
        }
      }
      for (const auto& [start, end] : merged) {
        events_.push_back(ContactEvent{pair.first, pair.second, start, end});
      }
    }
    std::sort(events_.begin(), events_.end(),
              [](const ContactEvent& a, const ContactEvent& b) {
                if (a.start != b.start) return a.start < b.start;
                if (a.node_a != b.node_a) return a.node_a < b.node_a;
                return a.node_b < b.node_b;
              });
    adjacency_.resize(node_count_);
    for (std::size_t i = 0; i < events_.size(); ++i) {
      adjacency_[events_[i].node_a].push_back(i);
      adjacency_[events_[i].node_b].push_back(i);
    }
  }

  const std::vector<ContactEvent>& events() const { return events_; }
  double horizon() const { return horizon_; }
  NodeId node_count() const { return node_count_; }

  // Nodes in contact with `node` at instant t (start <= t < end), ascending.
  std::vector<NodeId> neighbors(NodeId node, double t) const {
    std::vector<NodeId> result;
    if (node >= node_count_) return result;
    for (std::size_t index : adjacency_[node]) {
      const ContactEvent& event = events_[index];
      if (event.start <= t && t < event.end) {
        result.push_back(event.node_a == node ? event.node_b : event.node_a);
      }
    }
    std::sort(result.begin(), result.end());
    return result;
  }

  // True iff one merged contact interval covers all of [t0, t1).
  bool connected_throughout(NodeId a, NodeId b, double t0, double t1) const {
    if (!(t0 < t1)) throw std::invalid_argument("requires t0 < t1");
    if (a == b || a >= node_count_ || b >= node_count_) return false;
    if (a > b) std::swap(a, b);
    for (std::size_t index : adjacency_[a]) {
      const ContactEvent& event = events_[index];
      if (event.node_a == a && event.node_b == b && event.start <= t0 &&
          event.end >= t1) {
        return true;
      }
    }
    return false;
  }

 private:
  std::vector<ContactEvent> events_;
  double horizon_ = 0.0;
  NodeId node_count_ = 0;
  std::vector<std::vector<std::size_t>> adjacency_;  // node -> event indices
};

inline constexpr const char* kTraceHeader = "node_a,node_b,start_s,end_s";

// Canonical trace CSV: "node_a,node_b,start_s,end_s", header optional.
inline ContactTrace parse_trace(std::istream& in) {
  std::vector<ContactEvent> events;
  double horizon = 0.0;
  NodeId max_node = 0;
  std::string line;
  std::size_t line_number = 0;
  bool saw_any = false;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line == kTraceHeader) continue;
    std::array<std::string, 4> fields;
    std::size_t field = 0;
    std::size_t begin = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        if (field >= 4) {
          throw std::invalid_argument("trace line " + std::to_string(line_number) +
                                      ": too many fields");
        }
        fields[field++] = line.substr(begin, i - begin);
        begin = i + 1;
      }
    }
    if (field != 4) {
      throw std::invalid_argument("trace line " + std::to_string(line_number) +
                                  ": expected 4 comma-separated fields");
    }
    ContactEvent event;
    try {
      std::size_t consumed = 0;
      const unsigned long a = std::stoul(fields[0], &consumed);
      if (consumed != fields[0].size()) throw std::invalid_argument("");
      const unsigned long b = std::stoul(fields[1], &consumed);
      if (consumed != fields[1].size()) throw std::invalid_argument("");
      event.node_a = static_cast<NodeId>(a);
      event.node_b = static_cast<NodeId>(b);
      event.start = std::stod(fields[2], &consumed);
      if (consumed != fields[2].size()) throw std::invalid_argument("");
      event.end = std::stod(fields[3], &consumed);
      if (consumed != fields[3].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw std::invalid_argument("trace line " + std::to_string(line_number) +
                                  ": malformed field");
    }
    if (event.node_a == event.node_b) {
      throw std::invalid_argument("trace line " + std::to_string(line_number) +
                                  ": self-contact");
    }
    if (!(event.start < event.end) || event.start < 0.0) {
      throw std::invalid_argument("trace line " + std::to_string(line_number) +
                                  ": requires 0 <= start < end");
    }
    horizon = std::max(horizon, event.end);
    max_node = std::max({max_node, event.node_a, event.node_b});
    events.push_back(event);
    saw_any = true;
  }
  return ContactTrace(std::move(events), horizon, saw_any ? max_node + 1 : 0);
}

inline void write_trace(const ContactTrace& trace, std::ostream& out) {
  out << kTraceHeader << '\n';
  for (const ContactEvent& event : trace.events()) {
    out << event.node_a << ',' << event.node_b << ',' << event.start << ','
        << event.end << '\n';
  }
}

enum class MobilityModel { RandomWalk, LevyWalkSlawLite };

struct MobilityConfig {
  MobilityModel model = MobilityModel::RandomWalk;
  double area_width = 1000.0;   // meters
  double area_height = 1000.0;  // meters
  NodeId node_count = 20;
  double range = 150.0;     // meters, disk propagation
  double duration = 3600.0;  // seconds
  double speed_min = 0.5;   // m/s
  double speed_max = 2.0;   // m/s
  // LevyWalkSlawLite: truncated power-law flight lengths and pause times.
  double flight_exponent = 1.5;
  double flight_min = 1.0;    // meters
  double flight_max = 500.0;  // meters
  double pause_exponent = 1.38;
  double pause_min = 1.0;   // seconds
  double pause_max = 60.0;  // seconds; 0 disables pauses
  std::uint64_t seed = 0;

  void validate() const {
    if (!(area_width > 0.0) || !(area_height > 0.0) || node_count == 0 ||
        range < 0.0 || !(duration > 0.0) || !(speed_min > 0.0) ||
        !(speed_max >= speed_min)) {
      throw std::invalid_argument("mobility config requires positive geometry");
    }
    if (!(flight_exponent > 1.0) || !(flight_min > 0.0) ||
        !(flight_max >= flight_min) || !(pause_exponent > 1.0) ||
        pause_max < 0.0) {
      throw std::invalid_argument("mobility config power-law parameters invalid");
    }
  }
};

// Positions sampled once per second; samples[t * node_count + node].
struct PositionLog {
  NodeId node_count = 0;
  std::size_t steps = 0;  // number of sampled instants
  std::vector<std::pair<double, double>> samples;

  const std::pair<double, double>& at(std::size_t t, NodeId node) const {
    return samples[t * node_count + node];
  }
};

inline void write_position_log(const PositionLog& log, std::ostream& out) {
  out << "t,node,x,y\n";
  for (std::size_t t = 0; t < log.steps; ++t) {
    for (NodeId node = 0; node < log.node_count; ++node) {
      const auto& [x, y] = log.at(t, node);
      out << t << ',' << node << ',' << x << ',' << y << '\n';
    }
  }
}

namespace detail {

// Inverse-CDF sample of a truncated power law with density ~ x^-alpha on
// [lo, hi], alpha > 1.
inline double truncated_power_law(Rng& rng, double alpha, double lo, double hi) {
  if (hi <= lo) return lo;
  const double one_minus = 1.0 - alpha;
  const double lo_pow = std::pow(lo, one_minus);
  const double hi_pow = std::pow(hi, one_minus);
  const double u = rng.next_double();
  return std::pow(lo_pow + u * (hi_pow - lo_pow), 1.0 / one_minus);
}

inline void reflect(double& position, double& direction, double limit) {
  while (position < 0.0 || position > limit) {
    if (position < 0.0) {
      position = -position;
      direction = -direction;
    } else {
      position = 2.0 * limit - position;
      direction = -direction;
    }
  }
}

// Turns per-second position samples into merged contact events: nodes within
// range at sample t are connected over [t, t+1).
inline ContactTrace contacts_from_positions(const PositionLog& log,
                                            double range, double horizon) {
  std::vector<ContactEvent> events;
  const double range_sq = range * range;
  for (NodeId a = 0; a < log.node_count; ++a) {
    for (NodeId b = a + 1; b < log.node_count; ++b) {
      double open_start = -1.0;
      for (std::size_t t = 0; t <= log.steps; ++t) {
        bool in_range = false;
        if (t < log.steps) {
          const auto& [ax, ay] = log.at(t, a);
          const auto& [bx, by] = log.at(t, b);
          const double dx = ax - bx;
          const double dy = ay - by;
          in_range = dx * dx + dy * dy <= range_sq;
        }
        if (in_range && open_start < 0.0) {
          open_start = static_cast<double>(t);
        } else if (!in_range && open_start >= 0.0) {
          events.push_back(ContactEvent{a, b, open_start,
                                        std::min(static_cast<double>(t), horizon)});
          open_start = -1.0;
        }
      }
    }
  }
  return ContactTrace(std::move(events), horizon, log.node_count);
}

}  // namespace detail

// Random-walk mobility: every second each node picks a fresh uniform heading
// and a uniform speed, reflecting off the area walls.
inline ContactTrace gen_random_walk(const MobilityConfig& config,
                                    PositionLog* log_out = nullptr) {
  config.validate();
  Rng rng(Rng::mix(config.seed, 0x77a1));
  const std::size_t steps = static_cast<std::size_t>(std::ceil(config.duration));
  PositionLog log;
  log.node_count = config.node_count;
  log.steps = steps;
  log.samples.resize(steps * config.node_count);
  std::vector<std::pair<double, double>> position(config.node_count);
  for (auto& [x, y] : position) {
    x = rng.uniform(0.0, config.area_width);
    y = rng.uniform(0.0, config.area_height);
  }
  for (std::size_t t = 0; t < steps; ++t) {
    for (NodeId node = 0; node < config.node_count; ++node) {
      log.samples[t * config.node_count + node] = position[node];
      const double heading = rng.uniform(0.0, 2.0 * M_PI);
      const double speed = rng.uniform(config.speed_min, config.speed_max);
      double dx = speed * std::cos(heading);
      double dy = speed * std::sin(heading);
      position[node].first += dx;
      position[node].second += dy;
      detail::reflect(position[node].first, dx, config.area_width);
      detail::reflect(position[node].second, dy, config.area_height);
    }
  }
  if (log_out) *log_out = log;
  return detail::contacts_from_positions(log, config.range, config.duration);
}

// Simplified Levy-walk surrogate for SLAW-like human mobility: alternating
// truncated-power-law flight lengths and pause times, straight-line flights
// at uniform speed, reflective walls. Not the full SLAW model.
inline ContactTrace gen_levy_walk_slaw_lite(const MobilityConfig& config,
                                            PositionLog* log_out = nullptr) {
  config.validate();
  Rng rng(Rng::mix(config.seed, 0x5a1e));
  const std::size_t steps = static_cast<std::size_t>(std::ceil(config.duration));
  PositionLog log;
  log.node_count = config.node_count;
  log.steps = steps;
  log.samples.resize(steps * config.node_count);

  struct WalkerState {
    double x = 0.0, y = 0.0;
    double heading = 0.0;
    double speed = 1.0;
    double flight_left = 0.0;  // meters still to fly
    double pause_left = 0.0;   // seconds still to pause
  };
  std::vector<WalkerState> walkers(config.node_count);
  for (auto& walker : walkers) {
    walker.x = rng.uniform(0.0, config.area_width);
    walker.y = rng.uniform(0.0, config.area_height);
  }
  const auto begin_flight = [&](WalkerState& walker) {
    walker.heading = rng.uniform(0.0, 2.0 * M_PI);
    walker.speed = rng.uniform(config.speed_min, config.speed_max);
    walker.flight_left = detail::truncated_power_law(
        rng, config.flight_exponent, config.flight_min, config.flight_max);
  };
  for (auto& walker : walkers) begin_flight(walker);

  for (std::size_t t = 0; t < steps; ++t) {
    for (NodeId node = 0; node < config.node_count; ++node) {
      WalkerState& walker = walkers[node];
      log.samples[t * config.node_count + node] = {walker.x, walker.y};
      double budget = 1.0;  // seconds of movement this tick
      while (budget > 1e-12) {
        if (walker.pause_left > 0.0) {
          const double wait = std::min(budget, walker.pause_left);
          walker.pause_left -= wait;
          budget -= wait;
          if (walker.pause_left <= 0.0) begin_flight(walker);
          continue;
        }
        const double distance = std::min(budget * walker.speed, walker.flight_left);
        double dx = distance * std::cos(walker.heading);
        double dy = distance * std::sin(walker.heading);
        walker.x += dx;
        walker.y += dy;
        detail::reflect(walker.x, dx, config.area_width);
        detail::reflect(walker.y, dy, config.area_height);
        walker.flight_left -= distance;
        budget -= distance / walker.speed;
        if (walker.flight_left <= 0.0) {
          if (config.pause_max > 0.0) {
            walker.pause_left = detail::truncated_power_law(
                rng, config.pause_exponent, config.pause_min, config.pause_max);
          } else {
            begin_flight(walker);
          }
        }
      }
    }
  }
  if (log_out) *log_out = log;
  return detail::contacts_from_positions(log, config.range, config.duration);
}

inline ContactTrace generate(const MobilityConfig& config,
                             PositionLog* log_out = nullptr) {
  return config.model == MobilityModel::RandomWalk
             ? gen_random_walk(config, log_out)
             : gen_levy_walk_slaw_lite(config, log_out);
}

// Mean over length-T windows of the fraction of nodes that were in contact
// with the distributor at the window start but not connected throughout the
// window. Windows with an empty starting contact set are skipped.
inline double disconnection_stats(const ContactTrace& trace, NodeId distributor,
                                  double window_s) {
  if (!(window_s > 0.0)) {
    throw std::invalid_argument("window length must be positive");
  }
  double sum = 0.0;
  std::size_t windows = 0;
  for (double t0 = 0.0; t0 + window_s <= trace.horizon(); t0 += window_s) {
    const auto present = trace.neighbors(distributor, t0);
    if (present.empty()) continue;
    std::size_t broken = 0;
    for (NodeId node : present) {
      if (!trace.connected_throughout(distributor, node, t0, t0 + window_s)) {
        ++broken;
      }
    }
    sum += static_cast<double>(broken) / static_cast<double>(present.size());
    ++windows;
  }
  return windows == 0 ? 0.0 : sum / static_cast<double>(windows);
}

}  // namespace mcc::mobility
