#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace xrsim {

using bytes_t = std::int64_t;

//! Raised for malformed files and for values violating a documented constraint.
//! `key()` names the offending configuration key (empty for syntax errors).
class config_error : public std::runtime_error
{
public:
  config_error(std::string key, const std::string& what) : std::runtime_error(what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

private:
  std::string key_;
};

enum class direction_t { dl, ul };
enum class scheduler_mode_t { dynamic, semi_persistent };
enum class bsr_scheme_t { legacy8, uniform10, adaptive8 };
enum class control_design_t { legacy, two_stage };
enum class priority_class_t { critical, best_effort };
enum class priority_mode_t { traffic, random };
enum class rapi_mode_t { fixed, measured };

const char* to_string(direction_t d);
const char* to_string(scheduler_mode_t m);
const char* to_string(bsr_scheme_t s);
const char* to_string(control_design_t c);
const char* to_string(priority_class_t p);
const char* to_string(priority_mode_t p);
const char* to_string(rapi_mode_t m);

struct vec2 {
  double x = 0;
  double y = 0;
  bool   operator==(const vec2&) const = default;
};

struct deployment_layout {
  int    site_count            = 7;
  int    cells_per_site        = 3;
  double inter_site_distance_m = 500;
  bool   wraparound            = true;
  double ues_per_cell_mean     = 10;
  double min_drop_distance_m   = 35;
  bool   operator==(const deployment_layout&) const = default;
};

//! One FTP3-style Poisson flow instantiated for every UE.
struct flow_spec {
  std::string      name;
  direction_t      direction         = direction_t::dl;
  double           rate_pps          = 10;
  bytes_t          packet_size_bytes = 1'000'000;
  priority_class_t priority          = priority_class_t::critical;
  double           pdb_ms            = 30;
  double           target_rate_bps   = 30e6;
  bool             operator==(const flow_spec&) const = default;
};

struct scenario_config {
  deployment_layout deployment;

  double carrier_freq_hz       = 2.4e9;
  double bandwidth_hz          = 40e6;
  double subcarrier_spacing_hz = 30e3;
  int    tti_symbols           = 7;
  int    tx_antennas           = 8;
  int    rx_antennas           = 2;
  double bs_power_dbm          = 43;
  double ue_power_dbm          = 23;
  double ue_speed_kmh          = 3;

  std::vector<flow_spec> traffic = default_traffic();

  scheduler_mode_t scheduler_mode      = scheduler_mode_t::dynamic;
  bsr_scheme_t     bsr_scheme          = bsr_scheme_t::legacy8;
  control_design_t control_design      = control_design_t::legacy;
  bool             aggregation_enabled = false;

  double        sim_duration_s = 1.0;
  std::uint64_t rng_seed       = 1;

  // radio-env
  double shadowing_std_db      = 8;
  double ue_noise_figure_db    = 7;
  double bs_noise_figure_db    = 5;
  double bs_antenna_gain_dbi   = 8;
  double mmse_suppression_db   = 1;
  double cqi_backoff_db        = 1;
  int    cqi_delay_tti         = 4;
  int    fading_update_tti     = 4;
  std::string mcs_table_csv;  // empty -> built-in table

  // traffic
  double app_stats_tau_s = 1.0;

  // bsr
  double        bsr_max_bytes         = 81.3e6;
  double        rapi_alpha_bytes      = 5e6;
  double        rapi_refinement       = 3;
  double        rapi_mean_bytes       = 10e6;
  rapi_mode_t   rapi_mode             = rapi_mode_t::fixed;
  double        rapi_period_ms        = 100;
  int           bsr_period_tti        = 20;
  int           ul_report_delay_tti   = 2;
  std::string   bsr_legacy_table_csv;  // empty -> built-in geometric table

  // mac-scheduler
  double pf_time_constant_tti = 100;
  int    harq_max_tx          = 4;
  int    harq_feedback_tti    = 4;
  int    harq_retx_delay_tti  = 4;
  int    sps_period_tti       = 8;
  int    sps_prb_count        = 0;  // 0 -> equal share of the band

  // control-channel
  int             control_pool_cru       = 16;
  double          stage1_share           = 0.75;
  int             stage2_grants_per_msg  = 4;
  int             stage2_msg_cost_cru    = 2;
  double          control_base_threshold_db = 3;
  double          stage2_threshold_db    = 7;
  priority_mode_t priority_mode          = priority_mode_t::traffic;
  bool            edge_promotion         = false;
  double          edge_sinr_threshold_db = 0;

  // device-aggregation
  double agg_radius_m          = 25;
  double agg_link_capacity_bps = 1e9;
  double agg_hop_latency_ms    = 1;
  double agg_relay_processing_ms = 0.5;

  // metrics
  double satisfaction_threshold = 0.99;

  // explicit placement, overrides the random drop when non-empty
  std::vector<vec2>   ue_positions;
  std::vector<double> ue_extra_loss_db;

  bool trace = false;

  static std::vector<flow_spec> default_traffic();

  bool operator==(const scenario_config&) const = default;

  int    prb_count() const;
  int    subband_count() const;
  double tti_seconds() const;
  long   tti_count() const;
  int    cell_count() const { return deployment.site_count * deployment.cells_per_site; }
};

//! Number of PRBs in the NR transmission bandwidth configuration, or nullopt
//! when the (bandwidth, SCS) pair is not a standard one.
std::optional<int> nr_prb_count(double bandwidth_hz, double scs_hz);

constexpr int subband_size_prb = 8;

scenario_config parse_config(const std::string& text);
scenario_config load_config(const std::filesystem::path& path);
std::string     serialize_config(const scenario_config& cfg);

//! Applies one `key=value` override in place; throws config_error on unknown keys.
void apply_override(scenario_config& cfg, const std::string& key, const std::string& value);

//! Throws config_error naming the first violated constraint.
void validate(const scenario_config& cfg);

//! All recognized scalar keys (flow keys excluded), in serialization order.
std::vector<std::string> config_keys();

} // namespace xrsim
