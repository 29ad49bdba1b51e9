#include "gpc/episode.hpp"

#include <cmath>
#include <cstring>
#include <limits>

namespace gpc {

double EpisodeLog::totalCost() const {
  double total = 0.0;
  for (const auto& r : records) total += r.stage_cost;
  return total;
}

double EpisodeLog::minObstacleDistance() const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : records) {
    best = std::min(best, (r.q.head<2>() - r.obstacle_position).norm());
  }
  return best;
}

double EpisodeLog::meanTrackingError() const {
  if (records.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : records) sum += (r.q.head<2>() - r.reference_head.head<2>()).norm();
  return sum / static_cast<double>(records.size());
}

std::string toString(Quality q) { return q == Quality::Ok ? "ok" : "notConverged"; }

std::string toString(ControllerKind c) { return c == ControllerKind::Mpc ? "mpc" : "gpc"; }

std::string toString(EpisodeKind k) {
  switch (k) {
    case EpisodeKind::Mpc:
      return "mpc";
    case EpisodeKind::Gpc:
      return "gpc";
    case EpisodeKind::Supervised:
      return "supervised";
  }
  return "unknown";
}

std::string digestBytes(const void* data, std::size_t size) {
  std::uint64_t hash = 14695981039346656037ull;
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 1099511628211ull;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = kHex[hash & 0xf];
    hash >>= 4;
  }
  return out;
}

std::string windowDigest(const ReferenceWindow& window) {
  std::vector<double> values;
  values.reserve(window.size() * 4);
  for (std::size_t k = 0; k < window.size(); ++k) {
    values.push_back(window.times[k]);
    values.push_back(window.states[k](0));
    values.push_back(window.states[k](1));
    values.push_back(window.states[k](2));
  }
  return digestBytes(values.data(), values.size() * sizeof(double));
}

}  // namespace gpc
