#pragma once

#include "xrsim/config.hpp"
#include "xrsim/geometry.hpp"

#include <deque>
#include <span>
#include <vector>

namespace xrsim {

struct aggregation_group {
  int              primary = -1;
  std::vector<int> secondaries;
  double           link_capacity_bps = 1e9;
  double           hop_latency_ms    = 1;
};

//! Static proximity groups. Repeatedly takes the unassigned UE with the highest
//! wideband SINR and gathers every unassigned UE within `radius_m` of it; groups
//! of one are discarded. The seed, having the highest SINR, is the primary.
std::vector<aggregation_group> form_groups(std::span<const vec2> positions, std::span<const double> wideband_sinr_db,
                                           double radius_m, const cell_layout& layout, double capacity_bps = 1e9,
                                           double hop_latency_ms = 1);

enum class route_path { direct, via_primary };

struct flow_route {
  int        ue   = -1;
  int        flow = -1;  // index into cfg.traffic
  route_path path = route_path::direct;
  int        primary = -1;  // set for via_primary
};

//! Network-aware routing: critical DL flows of grouped secondaries go via the
//! primary; everything else, and every flow of a primary, is direct.
std::vector<flow_route> route_flows(std::span<const aggregation_group> groups, int n_ues,
                                    std::span<const flow_spec> flows, bool enabled);

//! Group index per UE (-1 when ungrouped) and role lookup.
std::vector<int> group_of(std::span<const aggregation_group> groups, int n_ues);

//! Non-3GPP hop from a primary to its secondaries: FIFO serialization at a
//! fixed capacity, then a fixed latency. Processing at the primary precedes it.
class relay_link
{
public:
  relay_link(double capacity_bps = 1e9, double hop_latency_ms = 1, double processing_ms = 0.5) :
    capacity_(capacity_bps), latency_s_(hop_latency_ms * 1e-3), processing_s_(processing_ms * 1e-3)
  {
  }

  //! Delay added to a packet of `bytes` on an idle link.
  double added_delay_s(bytes_t bytes) const;

  //! Packet fully received at the primary at `t_primary`; returns delivery time at the secondary.
  double forward(bytes_t bytes, double t_primary);

  //! Retires every packet delivered by time `t`.
  void advance(double t);

  bytes_t bytes_in() const { return in_; }
  bytes_t bytes_delivered() const { return delivered_; }
  bytes_t bytes_in_flight() const;

private:
  double                                  capacity_;
  double                                  latency_s_;
  double                                  processing_s_;
  double                                  free_at_   = 0;
  bytes_t                                 in_        = 0;
  bytes_t                                 delivered_ = 0;
  std::deque<std::pair<double, bytes_t>>  pending_;
};

} // namespace xrsim
