#include "xrsim/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace xrsim {

const char* to_string(direction_t d)
{
  return d == direction_t::dl ? "DL" : "UL";
}
const char* to_string(scheduler_mode_t m)
{
  return m == scheduler_mode_t::dynamic ? "dynamic" : "semi-persistent";
}
const char* to_string(bsr_scheme_t s)
{
  switch (s) {
    case bsr_scheme_t::legacy8:
      return "legacy8";
    case bsr_scheme_t::uniform10:
      return "uniform10";
    case bsr_scheme_t::adaptive8:
      return "adaptive8";
  }
  return "?";
}
const char* to_string(control_design_t c)
{
  return c == control_design_t::legacy ? "legacy" : "two-stage";
}
const char* to_string(priority_class_t p)
{
  return p == priority_class_t::critical ? "critical" : "best-effort";
}
const char* to_string(priority_mode_t p)
{
  return p == priority_mode_t::traffic ? "traffic" : "random";
}
const char* to_string(rapi_mode_t m)
{
  return m == rapi_mode_t::fixed ? "fixed" : "measured";
}

std::vector<flow_spec> scenario_config::default_traffic()
{
  // video + audio in each direction; video carries the XR payload
  return {
      {"dl_video", direction_t::dl, 10, 1'000'000, priority_class_t::critical, 30, 30e6},
      {"dl_audio", direction_t::dl, 100, 100, priority_class_t::best_effort, 50, 0},
      {"ul_video", direction_t::ul, 10, 1'000'000, priority_class_t::critical, 30, 30e6},
      {"ul_audio", direction_t::ul, 100, 100, priority_class_t::best_effort, 50, 0},
  };
}

std::optional<int> nr_prb_count(double bandwidth_hz, double scs_hz)
{
  // 38.101-1 Table 5.3.2-1, FR1
  struct row {
    int scs_khz;
    int bw_mhz;
    int prb;
  };
  static constexpr row table[] = {
      {15, 5, 25},   {15, 10, 52},  {15, 15, 79},  {15, 20, 106}, {15, 25, 133}, {15, 30, 160},
      {15, 40, 216}, {15, 50, 270}, {30, 5, 11},   {30, 10, 24},  {30, 15, 38},  {30, 20, 51},
      {30, 25, 65},  {30, 30, 78},  {30, 40, 106}, {30, 50, 133}, {30, 60, 162}, {30, 70, 189},
      {30, 80, 217}, {30, 90, 245}, {30, 100, 273}, {60, 10, 11}, {60, 15, 18},  {60, 20, 24},
      {60, 25, 31},  {60, 30, 38},  {60, 40, 51},  {60, 50, 65},  {60, 60, 79},  {60, 70, 93},
      {60, 80, 107}, {60, 90, 121}, {60, 100, 135},
  };
  for (const auto& r : table) {
    if (std::abs(bandwidth_hz - r.bw_mhz * 1e6) < 1 && std::abs(scs_hz - r.scs_khz * 1e3) < 1e-3) {
      return r.prb;
    }
  }
  return std::nullopt;
}

int scenario_config::prb_count() const
{
  auto n = nr_prb_count(bandwidth_hz, subcarrier_spacing_hz);
  if (!n) {
    throw config_error("bandwidth_hz", "bandwidth_hz: no standard PRB count for this bandwidth/subcarrier spacing");
  }
  return *n;
}

int scenario_config::subband_count() const
{
  return (prb_count() + subband_size_prb - 1) / subband_size_prb;
}

double scenario_config::tti_seconds() const
{
  // 14 symbols per slot, slot = 1 ms * 15 kHz / scs
  double slot_s = 1e-3 * 15e3 / subcarrier_spacing_hz;
  return slot_s * tti_symbols / 14.0;
}

long scenario_config::tti_count() const
{
  return std::lround(sim_duration_s / tti_seconds());
}

namespace {

std::string trim(std::string_view s)
{
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return {};
  }
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt_double(double v)
{
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& key, const std::string& v)
{
  double out = 0;
  auto   r   = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw config_error(key, key + ": expected a number, got '" + v + "'");
  }
  return out;
}

long long parse_int(const std::string& key, const std::string& v)
{
  long long out = 0;
  auto      r   = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec == std::errc() && r.ptr == v.data() + v.size()) {
    return out;
  }
  // accept integral values written in exponent form (1e6)
  double d = parse_double(key, v);
  if (d != std::floor(d)) {
    throw config_error(key, key + ": expected an integer, got '" + v + "'");
  }
  return static_cast<long long>(d);
}

bool parse_bool(const std::string& key, const std::string& v)
{
  if (v == "true" || v == "1" || v == "yes" || v == "on") {
    return true;
  }
  if (v == "false" || v == "0" || v == "no" || v == "off") {
    return false;
  }
  throw config_error(key, key + ": expected true/false, got '" + v + "'");
}

template <typename E, std::size_t N>
E parse_enum(const std::string& key, const std::string& v, const E (&values)[N])
{
  std::string allowed;
  for (E e : values) {
    if (v == to_string(e)) {
      return e;
    }
    allowed += std::string(allowed.empty() ? "" : "|") + to_string(e);
  }
  throw config_error(key, key + ": expected one of " + allowed + ", got '" + v + "'");
}

direction_t parse_direction(const std::string& key, std::string v)
{
  std::transform(v.begin(), v.end(), v.begin(), ::toupper);
  if (v == "DL") {
    return direction_t::dl;
  }
  if (v == "UL") {
    return direction_t::ul;
  }
  throw config_error(key, key + ": expected DL or UL, got '" + v + "'");
}

std::vector<std::string> split(const std::string& s, char sep)
{
  std::vector<std::string> out;
  if (trim(s).empty()) {
    return out;
  }
  std::stringstream ss(s);
  std::string       item;
  while (std::getline(ss, item, sep)) {
    out.push_back(trim(item));
  }
  return out;
}

struct key_binding {
  std::string                                                  name;
  std::function<std::string(const scenario_config&)>           get;
  std::function<void(scenario_config&, const std::string&)>    set;
};

#define XR_DOUBLE(field, path)                                                                                          \
  key_binding                                                                                                          \
  {                                                                                                                    \
    #field, [](const scenario_config& c) { return fmt_double(c.path); },                                              \
        [](scenario_config& c, const std::string& v) { c.path = parse_double(#field, v); }                            \
  }
#define XR_INT(field, path)                                                                                             \
  key_binding                                                                                                          \
  {                                                                                                                    \
    #field, [](const scenario_config& c) { return std::to_string(c.path); },                                          \
        [](scenario_config& c, const std::string& v) { c.path = static_cast<decltype(c.path)>(parse_int(#field, v)); } \
  }
#define XR_BOOL(field, path)                                                                                            \
  key_binding                                                                                                          \
  {                                                                                                                    \
    #field, [](const scenario_config& c) { return std::string(c.path ? "true" : "false"); },                          \
        [](scenario_config& c, const std::string& v) { c.path = parse_bool(#field, v); }                              \
  }
#define XR_STRING(field, path)                                                                                          \
  key_binding                                                                                                          \
  {                                                                                                                    \
    #field, [](const scenario_config& c) { return c.path; }, [](scenario_config& c, const std::string& v) { c.path = v; } \
  }
#define XR_ENUM(field, path, ...)                                                                                       \
  key_binding                                                                                                          \
  {                                                                                                                    \
    #field, [](const scenario_config& c) { return std::string(to_string(c.path)); },                                  \
        [](scenario_config& c, const std::string& v) {                                                                 \
          using E = decltype(c.path);                                                                                  \
          static constexpr E values[] = {__VA_ARGS__};                                                                 \
          c.path                      = parse_enum(#field, v, values);                                                 \
        }                                                                                                              \
  }

const std::vector<key_binding>& bindings()
{
  static const std::vector<key_binding> keys = {
      XR_INT(site_count, deployment.site_count),
      XR_INT(cells_per_site, deployment.cells_per_site),
      XR_DOUBLE(inter_site_distance_m, deployment.inter_site_distance_m),
      XR_BOOL(wraparound, deployment.wraparound),
      XR_DOUBLE(ues_per_cell_mean, deployment.ues_per_cell_mean),
      XR_DOUBLE(min_drop_distance_m, deployment.min_drop_distance_m),
      XR_DOUBLE(carrier_freq_hz, carrier_freq_hz),
      XR_DOUBLE(bandwidth_hz, bandwidth_hz),
      XR_DOUBLE(subcarrier_spacing_hz, subcarrier_spacing_hz),
      XR_INT(tti_symbols, tti_symbols),
      XR_INT(tx_antennas, tx_antennas),
      XR_INT(rx_antennas, rx_antennas),
      XR_DOUBLE(bs_power_dbm, bs_power_dbm),
      XR_DOUBLE(ue_power_dbm, ue_power_dbm),
      XR_DOUBLE(ue_speed_kmh, ue_speed_kmh),
      XR_ENUM(scheduler_mode, scheduler_mode, scheduler_mode_t::dynamic, scheduler_mode_t::semi_persistent),
      XR_ENUM(bsr_scheme, bsr_scheme, bsr_scheme_t::legacy8, bsr_scheme_t::uniform10, bsr_scheme_t::adaptive8),
      XR_ENUM(control_design, control_design, control_design_t::legacy, control_design_t::two_stage),
      XR_BOOL(aggregation_enabled, aggregation_enabled),
      XR_DOUBLE(sim_duration_s, sim_duration_s),
      XR_INT(rng_seed, rng_seed),
      XR_DOUBLE(shadowing_std_db, shadowing_std_db),
      XR_DOUBLE(ue_noise_figure_db, ue_noise_figure_db),
      XR_DOUBLE(bs_noise_figure_db, bs_noise_figure_db),
      XR_DOUBLE(bs_antenna_gain_dbi, bs_antenna_gain_dbi),
      XR_DOUBLE(mmse_suppression_db, mmse_suppression_db),
      XR_DOUBLE(cqi_backoff_db, cqi_backoff_db),
      XR_INT(cqi_delay_tti, cqi_delay_tti),
      XR_INT(fading_update_tti, fading_update_tti),
      XR_STRING(mcs_table_csv, mcs_table_csv),
      XR_DOUBLE(app_stats_tau_s, app_stats_tau_s),
      XR_DOUBLE(bsr_max_bytes, bsr_max_bytes),
      XR_DOUBLE(rapi_alpha_bytes, rapi_alpha_bytes),
      XR_DOUBLE(rapi_refinement, rapi_refinement),
      XR_DOUBLE(rapi_mean_bytes, rapi_mean_bytes),
      XR_ENUM(rapi_mode, rapi_mode, rapi_mode_t::fixed, rapi_mode_t::measured),
      XR_DOUBLE(rapi_period_ms, rapi_period_ms),
      XR_INT(bsr_period_tti, bsr_period_tti),
      XR_INT(ul_report_delay_tti, ul_report_delay_tti),
      XR_STRING(bsr_legacy_table_csv, bsr_legacy_table_csv),
      XR_DOUBLE(pf_time_constant_tti, pf_time_constant_tti),
      XR_INT(harq_max_tx, harq_max_tx),
      XR_INT(harq_feedback_tti, harq_feedback_tti),
      XR_INT(harq_retx_delay_tti, harq_retx_delay_tti),
      XR_INT(sps_period_tti, sps_period_tti),
      XR_INT(sps_prb_count, sps_prb_count),
      XR_INT(control_pool_cru, control_pool_cru),
      XR_DOUBLE(stage1_share, stage1_share),
      XR_INT(stage2_grants_per_msg, stage2_grants_per_msg),
      XR_INT(stage2_msg_cost_cru, stage2_msg_cost_cru),
      XR_DOUBLE(control_base_threshold_db, control_base_threshold_db),
      XR_DOUBLE(stage2_threshold_db, stage2_threshold_db),
      XR_ENUM(priority_mode, priority_mode, priority_mode_t::traffic, priority_mode_t::random),
      XR_BOOL(edge_promotion, edge_promotion),
      XR_DOUBLE(edge_sinr_threshold_db, edge_sinr_threshold_db),
      XR_DOUBLE(agg_radius_m, agg_radius_m),
      XR_DOUBLE(agg_link_capacity_bps, agg_link_capacity_bps),
      XR_DOUBLE(agg_hop_latency_ms, agg_hop_latency_ms),
      XR_DOUBLE(agg_relay_processing_ms, agg_relay_processing_ms),
      XR_DOUBLE(satisfaction_threshold, satisfaction_threshold),
      key_binding{"ue_positions",
                  [](const scenario_config& c) {
                    std::string out;
                    for (const auto& p : c.ue_positions) {
                      out += (out.empty() ? "" : ",") + fmt_double(p.x) + ":" + fmt_double(p.y);
                    }
                    return out;
                  },
                  [](scenario_config& c, const std::string& v) {
                    c.ue_positions.clear();
                    for (const auto& item : split(v, ',')) {
                      auto colon = item.find(':');
                      if (colon == std::string::npos) {
                        throw config_error("ue_positions", "ue_positions: expected x:y pairs, got '" + item + "'");
                      }
                      c.ue_positions.push_back({parse_double("ue_positions", trim(item.substr(0, colon))),
                                                parse_double("ue_positions", trim(item.substr(colon + 1)))});
                    }
                  }},
      key_binding{"ue_extra_loss_db",
                  [](const scenario_config& c) {
                    std::string out;
                    for (double l : c.ue_extra_loss_db) {
                      out += (out.empty() ? "" : ",") + fmt_double(l);
                    }
                    return out;
                  },
                  [](scenario_config& c, const std::string& v) {
                    c.ue_extra_loss_db.clear();
                    for (const auto& item : split(v, ',')) {
                      c.ue_extra_loss_db.push_back(parse_double("ue_extra_loss_db", item));
                    }
                  }},
      XR_BOOL(trace, trace),
  };
  return keys;
}

#undef XR_DOUBLE
#undef XR_INT
#undef XR_BOOL
#undef XR_STRING
#undef XR_ENUM

const std::vector<std::string> flow_fields = {"direction", "rate_pps", "packet_size_bytes", "priority", "pdb_ms",
                                              "target_rate_bps"};

void set_flow_field(flow_spec& f, const std::string& key, const std::string& field, const std::string& v)
{
  if (field == "direction") {
    f.direction = parse_direction(key, v);
  } else if (field == "rate_pps") {
    f.rate_pps = parse_double(key, v);
  } else if (field == "packet_size_bytes") {
    f.packet_size_bytes = parse_int(key, v);
  } else if (field == "priority") {
    static constexpr priority_class_t values[] = {priority_class_t::critical, priority_class_t::best_effort};
    f.priority                                 = parse_enum(key, v, values);
  } else if (field == "pdb_ms") {
    f.pdb_ms = parse_double(key, v);
  } else if (field == "target_rate_bps") {
    f.target_rate_bps = parse_double(key, v);
  } else {
    throw config_error(key, key + ": unknown flow field '" + field + "'");
  }
}

std::string get_flow_field(const flow_spec& f, const std::string& field)
{
  if (field == "direction") {
    return to_string(f.direction);
  }
  if (field == "rate_pps") {
    return fmt_double(f.rate_pps);
  }
  if (field == "packet_size_bytes") {
    return std::to_string(f.packet_size_bytes);
  }
  if (field == "priority") {
    return to_string(f.priority);
  }
  if (field == "pdb_ms") {
    return fmt_double(f.pdb_ms);
  }
  return fmt_double(f.target_rate_bps);
}

// flow.<name>.<field> keys; returns false when `key` is not a flow key
bool apply_flow_key(scenario_config& cfg, const std::string& key, const std::string& value)
{
  if (key.rfind("flow.", 0) != 0) {
    return false;
  }
  auto dot = key.rfind('.');
  if (dot <= 5) {
    throw config_error(key, key + ": flow keys have the form flow.<name>.<field>");
  }
  std::string name  = key.substr(5, dot - 5);
  std::string field = key.substr(dot + 1);
  auto        it    = std::find_if(cfg.traffic.begin(), cfg.traffic.end(), [&](const flow_spec& f) { return f.name == name; });
  if (it == cfg.traffic.end()) {
    flow_spec f;
    f.name = name;
    cfg.traffic.push_back(f);
    it = std::prev(cfg.traffic.end());
  }
  set_flow_field(*it, key, field, value);
  return true;
}

} // namespace

std::vector<std::string> config_keys()
{
  std::vector<std::string> out;
  for (const auto& b : bindings()) {
    out.push_back(b.name);
  }
  return out;
}

void apply_override(scenario_config& cfg, const std::string& key, const std::string& value)
{
  if (apply_flow_key(cfg, key, value)) {
    return;
  }
  for (const auto& b : bindings()) {
    if (b.name == key) {
      b.set(cfg, value);
      return;
    }
  }
  throw config_error(key, "unknown configuration key '" + key + "'");
}

scenario_config parse_config(const std::string& text)
{
  scenario_config    cfg;
  bool               flows_seen = false;
  std::istringstream in(text);
  std::string        line;
  int                lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.resize(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw config_error("", "line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key   = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw config_error("", "line " + std::to_string(lineno) + ": empty key");
    }
    // a file that declares any flow replaces the default traffic mix
    if (key.rfind("flow.", 0) == 0 && !flows_seen) {
      cfg.traffic.clear();
      flows_seen = true;
    }
    apply_override(cfg, key, value);
  }
  validate(cfg);
  return cfg;
}

scenario_config load_config(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) {
    throw config_error("", "cannot open config file '" + path.string() + "'");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const scenario_config& cfg)
{
  std::string out;
  for (const auto& b : bindings()) {
    out += b.name + " = " + b.get(cfg) + "\n";
  }
  for (const auto& f : cfg.traffic) {
    for (const auto& field : flow_fields) {
      out += "flow." + f.name + "." + field + " = " + get_flow_field(f, field) + "\n";
    }
  }
  return out;
}

namespace {

void require(bool ok, const char* key, const std::string& constraint)
{
  if (!ok) {
    throw config_error(key, std::string(key) + ": " + constraint);
  }
}

} // namespace

void validate(const scenario_config& c)
{
  const auto& d = c.deployment;
  require(d.site_count >= 1, "site_count", "must be >= 1");
  require(d.site_count == 1 || d.site_count == 7, "site_count", "must be 1 or 7 (hexagonal cluster)");
  require(d.cells_per_site == 1 || d.cells_per_site == 3, "cells_per_site", "must be 1 or 3");
  require(d.inter_site_distance_m > 0, "inter_site_distance_m", "must be > 0");
  require(d.ues_per_cell_mean > 0, "ues_per_cell_mean", "must be > 0");
  require(d.min_drop_distance_m >= 0 && d.min_drop_distance_m < d.inter_site_distance_m / 2, "min_drop_distance_m",
          "must be in [0, inter_site_distance_m / 2)");
  require(c.carrier_freq_hz > 0, "carrier_freq_hz", "must be > 0");
  require(c.bandwidth_hz > 0, "bandwidth_hz", "must be > 0");
  require(c.subcarrier_spacing_hz > 0, "subcarrier_spacing_hz", "must be > 0");
  require(nr_prb_count(c.bandwidth_hz, c.subcarrier_spacing_hz).has_value(), "bandwidth_hz",
          "must map to an integer NR PRB count for the configured subcarrier_spacing_hz");
  require(c.tti_symbols == 7 || c.tti_symbols == 14, "tti_symbols", "must be 7 or 14");
  require(c.tx_antennas > 0, "tx_antennas", "must be > 0");
  require(c.rx_antennas > 0, "rx_antennas", "must be > 0");
  require(c.bs_power_dbm > 0, "bs_power_dbm", "must be > 0");
  require(c.ue_power_dbm > 0, "ue_power_dbm", "must be > 0");
  require(c.ue_speed_kmh > 0, "ue_speed_kmh", "must be > 0");
  require(c.sim_duration_s > 0, "sim_duration_s", "must be > 0");
  require(c.shadowing_std_db >= 0, "shadowing_std_db", "must be >= 0");
  require(c.cqi_delay_tti >= 0, "cqi_delay_tti", "must be >= 0");
  require(c.fading_update_tti >= 1, "fading_update_tti", "must be >= 1");
  require(c.app_stats_tau_s > 0, "app_stats_tau_s", "must be > 0");
  require(c.bsr_max_bytes > 0, "bsr_max_bytes", "must be > 0");
  require(c.rapi_alpha_bytes > 0, "rapi_alpha_bytes", "must be > 0");
  require(c.rapi_refinement > 1, "rapi_refinement", "must be > 1");
  require(c.rapi_mean_bytes >= 0, "rapi_mean_bytes", "must be >= 0");
  require(c.rapi_period_ms > 0, "rapi_period_ms", "must be > 0");
  require(c.bsr_period_tti >= 1, "bsr_period_tti", "must be >= 1");
  require(c.ul_report_delay_tti >= 0, "ul_report_delay_tti", "must be >= 0");
  require(c.pf_time_constant_tti >= 1, "pf_time_constant_tti", "must be >= 1");
  require(c.harq_max_tx >= 1, "harq_max_tx", "must be >= 1");
  require(c.harq_feedback_tti >= 1, "harq_feedback_tti", "must be >= 1");
  require(c.harq_retx_delay_tti >= 0, "harq_retx_delay_tti", "must be >= 0");
  require(c.sps_period_tti >= 1, "sps_period_tti", "must be >= 1");
  require(c.sps_prb_count >= 0, "sps_prb_count", "must be >= 0");
  require(c.control_pool_cru >= 8, "control_pool_cru", "must be >= 8 (the largest aggregation level)");
  require(c.stage1_share >= 0 && c.stage1_share <= 1, "stage1_share", "must be in [0, 1]");
  require(c.stage2_grants_per_msg >= 1, "stage2_grants_per_msg", "must be >= 1");
  require(c.stage2_msg_cost_cru >= 1, "stage2_msg_cost_cru", "must be >= 1");
  require(c.agg_radius_m >= 0, "agg_radius_m", "must be >= 0");
  require(c.agg_link_capacity_bps > 0, "agg_link_capacity_bps", "must be > 0");
  require(c.agg_hop_latency_ms >= 0, "agg_hop_latency_ms", "must be >= 0");
  require(c.agg_relay_processing_ms >= 0, "agg_relay_processing_ms", "must be >= 0");
  require(c.satisfaction_threshold > 0 && c.satisfaction_threshold <= 1, "satisfaction_threshold", "must be in (0, 1]");
  require(c.ue_extra_loss_db.empty() || c.ue_extra_loss_db.size() == c.ue_positions.size(), "ue_extra_loss_db",
          "must be empty or list one value per entry of ue_positions");
  for (const auto& f : c.traffic) {
    std::string prefix = "flow." + f.name;
    if (f.rate_pps <= 0) {
      throw config_error(prefix + ".rate_pps", prefix + ".rate_pps: must be > 0");
    }
    if (f.packet_size_bytes <= 0) {
      throw config_error(prefix + ".packet_size_bytes", prefix + ".packet_size_bytes: must be > 0");
    }
    if (f.pdb_ms <= 0) {
      throw config_error(prefix + ".pdb_ms", prefix + ".pdb_ms: must be > 0");
    }
    if (f.target_rate_bps < 0) {
      throw config_error(prefix + ".target_rate_bps", prefix + ".target_rate_bps: must be >= 0");
    }
  }
}

} // namespace xrsim
