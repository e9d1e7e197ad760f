#include "xrsim/aggregation.hpp"

#include <algorithm>
#include <numeric>

namespace xrsim {

std::vector<aggregation_group> form_groups(std::span<const vec2> pos, std::span<const double> sinr, double radius_m,
                                           const cell_layout& layout, double capacity_bps, double hop_latency_ms)
{
  const int        n = static_cast<int>(pos.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sinr[a] > sinr[b]; });

  std::vector<char>              taken(n, 0);
  std::vector<aggregation_group> groups;
  for (int seed : order) {
    if (taken[seed]) {
      continue;
    }
    taken[seed] = 1;
    aggregation_group g;
    g.primary           = seed;
    g.link_capacity_bps = capacity_bps;
    g.hop_latency_ms    = hop_latency_ms;
    for (int u : order) {
      if (!taken[u] && layout.distance(pos[u], pos[seed]) <= radius_m) {
        taken[u] = 1;
        g.secondaries.push_back(u);
      }
    }
    if (!g.secondaries.empty()) {
      std::sort(g.secondaries.begin(), g.secondaries.end());
      groups.push_back(std::move(g));
    }
  }
  return groups;
}

std::vector<int> group_of(std::span<const aggregation_group> groups, int n_ues)
{
  std::vector<int> out(n_ues, -1);
  for (int g = 0; g < static_cast<int>(groups.size()); ++g) {
    out[groups[g].primary] = g;
    for (int s : groups[g].secondaries) {
      out[s] = g;
    }
  }
  return out;
}

std::vector<flow_route> route_flows(std::span<const aggregation_group> groups, int n_ues,
                                    std::span<const flow_spec> flows, bool enabled)
{
  std::vector<int> primary_of(n_ues, -1);
  for (const auto& g : groups) {
    for (int s : g.secondaries) {
      primary_of[s] = g.primary;
    }
  }
  std::vector<flow_route> out;
  out.reserve(static_cast<std::size_t>(n_ues) * flows.size());
  for (int u = 0; u < n_ues; ++u) {
    for (int f = 0; f < static_cast<int>(flows.size()); ++f) {
      flow_route r{u, f, route_path::direct, -1};
      if (enabled && primary_of[u] >= 0 && flows[f].direction == direction_t::dl &&
          flows[f].priority == priority_class_t::critical) {
        r.path    = route_path::via_primary;
        r.primary = primary_of[u];
      }
      out.push_back(r);
    }
  }
  return out;
}

double relay_link::added_delay_s(bytes_t bytes) const
{
  return processing_s_ + static_cast<double>(bytes) * 8.0 / capacity_ + latency_s_;
}

double relay_link::forward(bytes_t bytes, double t_primary)
{
  double start   = std::max(t_primary + processing_s_, free_at_);
  free_at_       = start + static_cast<double>(bytes) * 8.0 / capacity_;
  double deliver = free_at_ + latency_s_;
  in_ += bytes;
  pending_.emplace_back(deliver, bytes);
  return deliver;
}

void relay_link::advance(double t)
{
  while (!pending_.empty() && pending_.front().first <= t) {
    delivered_ += pending_.front().second;
    pending_.pop_front();
  }
}

bytes_t relay_link::bytes_in_flight() const
{
  bytes_t s = 0;
  for (const auto& p : pending_) {
    s += p.second;
  }
  return s;
}

} // namespace xrsim
