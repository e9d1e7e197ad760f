#pragma once

#include "xrsim/config.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace xrsim {

//! Nearest-rank percentile: the ceil(p/100 * n)-th smallest sample (the minimum for p = 0).
double percentile(std::span<const double> values, double p);

struct ecdf_series {
  std::string         name;
  std::string         unit;
  std::vector<double> values;  // ascending

  double cdf(double x) const;  // fraction of samples <= x
  double quantile(double p) const { return percentile(values, p); }
  std::size_t size() const { return values.size(); }
};

ecdf_series make_ecdf(std::string name, std::string unit, std::vector<double> values);

struct packet_record {
  int         ue        = -1;  // destination UE
  int         flow      = -1;  // index into cfg.traffic
  direction_t dir       = direction_t::dl;
  bytes_t     bytes     = 0;
  double      arrival_s = 0;
  double      delivery_s = -1;  // < 0: not delivered (lost or still queued)
  bool        lost      = false;
  bool        relayed   = false;

  bool   delivered() const { return delivery_s >= 0 && !lost; }
  double latency_ms() const { return (delivery_s - arrival_s) * 1e3; }
};

struct tb_record {
  std::int32_t tti;
  std::int16_t ue;
  std::int16_t cell;
  std::int32_t bytes;
  std::int16_t prbs;
  std::int8_t  mcs;
  std::int8_t  flags;  // bit0 new tx, bit1 uplink

  bool        new_tx() const { return flags & 1; }
  direction_t dir() const { return flags & 2 ? direction_t::ul : direction_t::dl; }
};

struct ue_record {
  int     ue       = -1;
  int     cell     = -1;
  int     priority = 0;
  int     agg_role = 0;  // 0 ungrouped, 1 primary, 2 secondary
  double  wideband_sinr_db = 0;
  bytes_t offered[2]         = {0, 0};
  bytes_t delivered[2]       = {0, 0};
  double  first_arrival[2]   = {-1, -1};
  double  last_delivery[2]   = {-1, -1};
  long    demand_ttis[2]     = {0, 0};
  bytes_t scheduled_bytes[2] = {0, 0};
  long    scheduled_ttis[2]  = {0, 0};

  //! Delivered bytes over the active time (first arrival to last delivery), Mbps.
  double throughput_mbps(direction_t d) const;
  //! Mean scheduled TB bytes per TTI with pending data.
  double tb_bytes_per_demand_tti(direction_t d) const;
};

struct waste_counters {
  bytes_t ul_padding_bytes       = 0;  // granted UL capacity beyond what the UE had to send
  bytes_t dl_padding_bytes       = 0;
  bytes_t bsr_excess_bytes       = 0;  // sum over reports of estimate - true volume
  long    bsr_reports            = 0;
  bytes_t sps_idle_bytes         = 0;
  long    sps_idle_grants        = 0;
  long    control_failed_prbs    = 0;
  long    control_messages       = 0;
  long    control_failures       = 0;
  long    control_deferrals      = 0;
  long    control_requests       = 0;
  long    control_cru_requested  = 0;
  long    control_cru_used       = 0;
  long    control_grants_sent    = 0;
  long    tb_dropped             = 0;
  long    tb_count               = 0;
  long    prb_used               = 0;
};

struct relay_record {
  int     primary   = -1;
  bytes_t bytes_in  = 0;
  bytes_t delivered = 0;
  bytes_t in_flight = 0;
};

struct run_report {
  scenario_config            cfg;
  long                       ttis = 0;
  std::vector<ue_record>     ues;
  std::vector<packet_record> packets;
  std::vector<tb_record>     tbs;
  waste_counters             waste;
  std::vector<relay_record>  relays;
  bytes_t                    delivered_bytes = 0;  // engine-wide counter
  bytes_t                    generated_bytes = 0;
  std::vector<std::string>   sched_trace;   // optional CSV rows
  std::vector<std::string>   control_trace; // optional CSV rows

  std::vector<double> ue_throughput_mbps(direction_t d) const;
  //! Per-UE scheduled TB bytes per demand TTI, averaged over DL and UL (KB).
  std::vector<double> ue_mean_tb_kbytes() const;
  std::vector<double> latencies_ms(int flow, bool relayed_only = false) const;
};

struct satisfaction_spec {
  double threshold = 0.99;
};

struct satisfaction_result {
  std::vector<double> per_cell;   // NaN for cells without UEs
  std::vector<char>   satisfied;  // per UE
  double              aggregate = 0;
};

//! A UE is satisfied when, for every flow it receives or sends, at least
//! `threshold` of its packets due before the end of the run arrived within the
//! PDB, and each flow with a target rate achieved it.
satisfaction_result satisfaction_ratio(const run_report& r, const satisfaction_spec& spec);

struct export_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class export_level {
  full,     // every CSV family
  summary,  // per-UE throughput, satisfaction, waste and the manifest
};

//! Writes the CSV set plus manifest.cfg into `dir` (created if needed).
void export_report(const run_report& r, const std::filesystem::path& dir, export_level level = export_level::full);

//! Writes `content` to `path` atomically (temp file + rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string format_double(double v);

} // namespace xrsim
