#pragma once

#include "xrsim/config.hpp"
#include "xrsim/geometry.hpp"

#include <complex>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace xrsim {

struct mcs_entry {
  int    index;
  int    modulation_order;  // bits per symbol
  double code_rate;
  double efficiency;        // bits per resource element
  double threshold_db;      // SINR at 10% BLER
  bool   operator==(const mcs_entry&) const = default;
};

class mcs_table
{
public:
  explicit mcs_table(std::vector<mcs_entry> entries);

  static mcs_table builtin();
  static mcs_table parse_csv(const std::string& text);
  static mcs_table load_csv(const std::filesystem::path& path);
  std::string      to_csv() const;

  const std::vector<mcs_entry>& entries() const { return entries_; }
  std::size_t                   size() const { return entries_.size(); }
  const mcs_entry&              operator[](std::size_t i) const { return entries_[i]; }

  //! CQI range is [0, size()]; CQI 0 means below the lowest MCS threshold.
  int max_cqi() const { return static_cast<int>(entries_.size()); }

  bool operator==(const mcs_table&) const = default;

private:
  std::vector<mcs_entry> entries_;
};

// BLER model: logistic in dB, 10% at the threshold and one decade per dB above it.
constexpr double bler_anchor     = 0.1;
constexpr double bler_db_per_decade = 1.0;

double bler(double sinr_db, double threshold_db);
bool   decode_success(double effective_sinr_linear, double threshold_db, std::mt19937_64& rng);
bool   decode_success(double effective_sinr_linear, const mcs_entry& mcs, std::mt19937_64& rng);

struct cqi_report {
  std::vector<int> cqi;  // one entry per subband
  long             measured_tti = 0;
  int              delay_tti    = 0;
  long             available_tti() const { return measured_tti + delay_tti; }
};

//! Highest CQI whose threshold is <= SINR - backoff, per subband.
cqi_report sinr_to_cqi(std::span<const double> sinr_db, const mcs_table& table, double backoff_db, long tti = 0,
                       int delay_tti = 0);
int        sinr_to_cqi(double sinr_db, const mcs_table& table, double backoff_db);

const mcs_entry& select_mcs(int cqi, const mcs_table& table);

// One DMRS symbol's worth of REs per PRB per TTI is reserved for reference signals.
constexpr int rs_overhead_re_per_prb = 12;

//! Transport block size in bytes; throws std::invalid_argument for an empty grant.
bytes_t tb_size(const mcs_entry& mcs, int prb_count, int tti_symbols);

double db_to_lin(double db);
double lin_to_db(double lin);

//! UMa NLOS-style log-distance pathloss (dB), hBS 25 m, hUT 1.5 m.
double pathloss_db(double distance_2d_m, double carrier_freq_hz);

//! SINR from received powers (all linear, same units).
double sinr_linear(double signal, std::span<const double> interference, double noise, double suppression_db = 0);

//! Static per-link large-scale state plus a per-subband Rayleigh fading field.
class link_model
{
public:
  link_model(const scenario_config& cfg, const cell_layout& layout, std::uint64_t seed);

  //! Places UEs; coupling gains are fixed afterwards.
  void set_ues(std::vector<vec2> positions, std::vector<double> extra_loss_db);

  //! Coupling without fading: antenna gain - pathloss - shadowing - extra loss (dB).
  double coupling_db(int ue, int cell) const { return coupling_db_[ue * n_cells_ + cell]; }
  double coupling_db(vec2 pos, int ue, int cell) const;

  int n_ues() const { return n_ues_; }
  int n_cells() const { return n_cells_; }
  int n_subbands() const { return n_subbands_; }
  int subband_prbs(int sb) const;

  //! Advances the fading field by one update interval.
  void   advance_fading();
  double fading_power(int ue, int cell, int sb) const;

  // per-PRB powers in mW
  double dl_rx_power(int ue, int cell, int sb, bool serving) const;
  double ul_rx_power(int ue, int cell, int sb, bool serving) const;
  double dl_noise() const { return dl_noise_mw_; }
  double ul_noise() const { return ul_noise_mw_; }

  //! Full-load downlink SINR (every other cell transmitting on the subband).
  double dl_sinr(int ue, int serving, int sb) const;
  //! Uplink SINR at `serving`; interferers[c] is the UE active on `sb` in cell c, or -1.
  double ul_sinr(int ue, int serving, int sb, std::span<const int> interferers) const;

  //! Fading-free full-load downlink SINR in dB.
  double wideband_dl_sinr_db(int ue, int serving) const;

  double array_gain_db() const { return array_gain_db_; }
  double mmse_suppression_db() const { return cfg_.mmse_suppression_db; }

private:
  const scenario_config& cfg_;
  const cell_layout&     layout_;
  std::mt19937_64        rng_;
  int                    n_ues_      = 0;
  int                    n_cells_    = 0;
  int                    n_subbands_ = 0;
  int                    n_prb_      = 0;
  double                 rho_        = 0;  // fading correlation per update
  double                 array_gain_db_ = 0;
  double                 combining_db_  = 0;
  double                 dl_prb_power_dbm_ = 0;
  double                 ul_prb_power_dbm_ = 0;
  double                 dl_prb_mw_[2] = {};  // [interferer, serving]
  double                 ul_prb_mw_[2] = {};
  double                 suppression_lin_ = 1;
  double                 dl_noise_mw_ = 0;
  double                 ul_noise_mw_ = 0;
  std::vector<double>    shadow_db_;    // ue x site
  std::vector<double>    extra_loss_db_;
  std::vector<double>    coupling_db_;  // ue x cell
  std::vector<double>    coupling_lin_;
  std::vector<std::complex<float>> fading_;  // (ue x cell) x subband
};

} // namespace xrsim
