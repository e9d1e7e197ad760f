#include "xrsim/radio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace xrsim {

namespace {

// Kept byte-identical to data/mcs_table.csv.
constexpr const char* builtin_mcs_csv = R"(# mcs_table v1: NR PDSCH 256QAM table; threshold_db = SINR at 10% BLER (attenuated Shannon, 0.8)
index,modulation,code_rate,efficiency,threshold_db
0,2,0.117188,0.2344,-6.48
1,2,0.188477,0.3770,-4.13
2,2,0.300781,0.6016,-1.65
3,2,0.438477,0.8770,0.56
4,2,0.587891,1.1758,2.48
5,4,0.369141,1.4766,4.14
6,4,0.423828,1.6953,5.24
7,4,0.478516,1.9141,6.28
8,4,0.540039,2.1602,7.40
9,4,0.601562,2.4062,8.48
10,4,0.642578,2.5703,9.18
11,6,0.455078,2.7305,9.85
12,6,0.504883,3.0293,11.07
13,6,0.553711,3.3223,12.25
14,6,0.601562,3.6094,13.39
15,6,0.650391,3.9023,14.53
16,6,0.702148,4.2129,15.74
17,6,0.753906,4.5234,16.93
18,6,0.802734,4.8164,18.06
19,6,0.852539,5.1152,19.20
20,8,0.666504,5.3320,20.02
21,8,0.694336,5.5547,20.87
22,8,0.736328,5.8906,22.14
23,8,0.778320,6.2266,23.41
24,8,0.821289,6.5703,24.71
25,8,0.864258,6.9141,26.01
26,8,0.895020,7.1602,26.93
27,8,0.925781,7.4062,27.86
)";

constexpr double bs_height_m = 25.0;
constexpr double ue_height_m = 1.5;

} // namespace

mcs_table::mcs_table(std::vector<mcs_entry> entries) : entries_(std::move(entries))
{
  if (entries_.empty()) {
    throw std::invalid_argument("mcs table: no entries");
  }
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    if (entries_[i].efficiency <= entries_[i - 1].efficiency || entries_[i].threshold_db <= entries_[i - 1].threshold_db) {
      throw std::invalid_argument("mcs table: efficiency and threshold must be strictly increasing (row " +
                                  std::to_string(i) + ")");
    }
  }
}

mcs_table mcs_table::builtin()
{
  static const mcs_table t = parse_csv(builtin_mcs_csv);
  return t;
}

mcs_table mcs_table::parse_csv(const std::string& text)
{
  std::istringstream     in(text);
  std::string            line;
  std::vector<mcs_entry> rows;
  bool                   header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    if (!header) {
      if (line.rfind("index,", 0) != 0) {
        throw std::invalid_argument("mcs table: missing header line");
      }
      header = true;
      continue;
    }
    mcs_entry e{};
    char      c1, c2, c3, c4;
    std::istringstream row(line);
    if (!(row >> e.index >> c1 >> e.modulation_order >> c2 >> e.code_rate >> c3 >> e.efficiency >> c4 >>
          e.threshold_db) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',') {
      throw std::invalid_argument("mcs table: malformed row '" + line + "'");
    }
    if (e.index != static_cast<int>(rows.size())) {
      throw std::invalid_argument("mcs table: indices must be consecutive from 0");
    }
    rows.push_back(e);
  }
  return mcs_table(std::move(rows));
}

mcs_table mcs_table::load_csv(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open mcs table '" + path.string() + "'");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

std::string mcs_table::to_csv() const
{
  std::ostringstream out;
  out << "index,modulation,code_rate,efficiency,threshold_db\n";
  char buf[128];
  for (const auto& e : entries_) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%.4f,%.2f\n", e.index, e.modulation_order, e.code_rate, e.efficiency,
                  e.threshold_db);
    out << buf;
  }
  return out.str();
}

double db_to_lin(double db)
{
  return std::pow(10.0, db / 10.0);
}

double lin_to_db(double lin)
{
  return 10.0 * std::log10(lin);
}

double bler(double sinr_db, double threshold_db)
{
  // 1 / (1 + 9 * 10^(x / slope)) gives 0.1 at x = 0
  double odds = (1.0 - bler_anchor) / bler_anchor;
  double x    = (sinr_db - threshold_db) / bler_db_per_decade;
  if (x > 300) {
    return 0.0;
  }
  return 1.0 / (1.0 + odds * std::pow(10.0, x));
}

bool decode_success(double effective_sinr_linear, double threshold_db, std::mt19937_64& rng)
{
  double p = effective_sinr_linear > 0 ? bler(lin_to_db(effective_sinr_linear), threshold_db) : 1.0;
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) >= p;
}

bool decode_success(double effective_sinr_linear, const mcs_entry& mcs, std::mt19937_64& rng)
{
  return decode_success(effective_sinr_linear, mcs.threshold_db, rng);
}

int sinr_to_cqi(double sinr_db, const mcs_table& table, double backoff_db)
{
  double eff = sinr_db - backoff_db;
  int    cqi = 0;
  for (const auto& e : table.entries()) {
    if (e.threshold_db <= eff) {
      cqi = e.index + 1;
    } else {
      break;
    }
  }
  return cqi;
}

cqi_report sinr_to_cqi(std::span<const double> sinr_db, const mcs_table& table, double backoff_db, long tti,
                       int delay_tti)
{
  cqi_report r;
  r.measured_tti = tti;
  r.delay_tti    = delay_tti;
  r.cqi.reserve(sinr_db.size());
  for (double s : sinr_db) {
    r.cqi.push_back(sinr_to_cqi(s, table, backoff_db));
  }
  return r;
}

const mcs_entry& select_mcs(int cqi, const mcs_table& table)
{
  int idx = std::clamp(cqi, 1, table.max_cqi()) - 1;
  return table[idx];
}

bytes_t tb_size(const mcs_entry& mcs, int prb_count, int tti_symbols)
{
  if (prb_count <= 0) {
    throw std::invalid_argument("tb_size: empty grant (prb_count must be >= 1)");
  }
  long   re   = static_cast<long>(prb_count) * (12L * tti_symbols - rs_overhead_re_per_prb);
  auto   bits = static_cast<bytes_t>(std::floor(mcs.efficiency * static_cast<double>(re)));
  return bits / 8;
}

double pathloss_db(double distance_2d_m, double carrier_freq_hz)
{
  double d3 = std::hypot(std::max(distance_2d_m, 1.0), bs_height_m - ue_height_m);
  return 13.54 + 39.08 * std::log10(d3) + 20.0 * std::log10(carrier_freq_hz / 1e9);
}

double sinr_linear(double signal, std::span<const double> interference, double noise, double suppression_db)
{
  double i = 0;
  for (double v : interference) {
    i += v;
  }
  return signal / (i / db_to_lin(suppression_db) + noise);
}

link_model::link_model(const scenario_config& cfg, const cell_layout& layout, std::uint64_t seed) :
  cfg_(cfg), layout_(layout), rng_(seed)
{
  n_cells_    = static_cast<int>(layout.cells().size());
  n_prb_      = cfg.prb_count();
  n_subbands_ = cfg.subband_count();

  double wavelength = 299792458.0 / cfg.carrier_freq_hz;
  double doppler    = cfg.ue_speed_kmh / 3.6 / wavelength;
  double dt         = cfg.fading_update_tti * cfg.tti_seconds();
  rho_              = std::cyl_bessel_j(0.0, 2 * std::numbers::pi * doppler * dt);

  array_gain_db_    = 10 * std::log10(cfg.tx_antennas) + 10 * std::log10(cfg.rx_antennas);
  dl_prb_power_dbm_ = cfg.bs_power_dbm - 10 * std::log10(n_prb_);
  ul_prb_power_dbm_ = cfg.ue_power_dbm - 10 * std::log10(n_prb_);

  // receive combining lifts every incoming signal above the per-antenna noise;
  // transmit beamforming only favours the serving link
  combining_db_     = 10 * std::log10(cfg.rx_antennas);
  dl_prb_mw_[0]     = db_to_lin(dl_prb_power_dbm_ + combining_db_);
  dl_prb_mw_[1]     = db_to_lin(dl_prb_power_dbm_ + array_gain_db_);
  ul_prb_mw_[0]     = db_to_lin(ul_prb_power_dbm_ + combining_db_);
  ul_prb_mw_[1]     = db_to_lin(ul_prb_power_dbm_ + array_gain_db_);
  suppression_lin_  = db_to_lin(cfg.mmse_suppression_db);

  double prb_bw_db = 10 * std::log10(12 * cfg.subcarrier_spacing_hz);
  dl_noise_mw_     = db_to_lin(-174 + prb_bw_db + cfg.ue_noise_figure_db);
  ul_noise_mw_     = db_to_lin(-174 + prb_bw_db + cfg.bs_noise_figure_db);
}

void link_model::set_ues(std::vector<vec2> positions, std::vector<double> extra_loss_db)
{
  n_ues_ = static_cast<int>(positions.size());
  extra_loss_db.resize(n_ues_, 0.0);
  extra_loss_db_ = std::move(extra_loss_db);

  int                              n_sites = static_cast<int>(layout_.sites().size());
  std::normal_distribution<double> shadow(0.0, cfg_.shadowing_std_db);
  shadow_db_.resize(static_cast<std::size_t>(n_ues_) * n_sites);
  // half of the shadowing variance is common to all sites seen by a UE
  for (int u = 0; u < n_ues_; ++u) {
    double common = cfg_.shadowing_std_db > 0 ? shadow(rng_) : 0.0;
    for (int k = 0; k < n_sites; ++k) {
      double own = cfg_.shadowing_std_db > 0 ? shadow(rng_) : 0.0;
      shadow_db_[static_cast<std::size_t>(u) * n_sites + k] = std::sqrt(0.5) * (common + own);
    }
  }

  coupling_db_.resize(static_cast<std::size_t>(n_ues_) * n_cells_);
  coupling_lin_.resize(coupling_db_.size());
  for (int u = 0; u < n_ues_; ++u) {
    for (int c = 0; c < n_cells_; ++c) {
      double g                          = coupling_db(positions[u], u, c);
      coupling_db_[u * n_cells_ + c]  = g;
      coupling_lin_[u * n_cells_ + c] = db_to_lin(g);
    }
  }

  std::normal_distribution<float> n01(0.0f, std::sqrt(0.5f));
  fading_.resize(coupling_db_.size() * n_subbands_);
  for (auto& h : fading_) {
    h = {n01(rng_), n01(rng_)};
  }
}

double link_model::coupling_db(vec2 pos, int ue, int cell) const
{
  const auto& c   = layout_.cells()[cell];
  vec2        img = layout_.nearest_image(pos, c.site_pos);
  double      d   = std::hypot(pos.x - img.x, pos.y - img.y);
  double      ant = cfg_.bs_antenna_gain_dbi;
  if (!c.omni()) {
    double az = std::atan2(pos.y - img.y, pos.x - img.x) * 180.0 / std::numbers::pi;
    ant += sector_gain_db(az - c.boresight_deg);
  }
  int    n_sites = static_cast<int>(layout_.sites().size());
  double shadow  = ue < n_ues_ ? shadow_db_[static_cast<std::size_t>(ue) * n_sites + c.site] : 0.0;
  double extra   = ue < n_ues_ ? extra_loss_db_[ue] : 0.0;
  return ant - pathloss_db(d, cfg_.carrier_freq_hz) - shadow - extra;
}

int link_model::subband_prbs(int sb) const
{
  return std::min(subband_size_prb, n_prb_ - sb * subband_size_prb);
}

void link_model::advance_fading()
{
  float                           a = static_cast<float>(rho_);
  std::normal_distribution<float> n01(0.0f, static_cast<float>(std::sqrt(0.5 * (1 - rho_ * rho_))));
  for (auto& h : fading_) {
    h = a * h + std::complex<float>(n01(rng_), n01(rng_));
  }
}

double link_model::fading_power(int ue, int cell, int sb) const
{
  return std::norm(fading_[(static_cast<std::size_t>(ue) * n_cells_ + cell) * n_subbands_ + sb]);
}

double link_model::dl_rx_power(int ue, int cell, int sb, bool serving) const
{
  return dl_prb_mw_[serving] * coupling_lin_[ue * n_cells_ + cell] * fading_power(ue, cell, sb);
}

double link_model::ul_rx_power(int ue, int cell, int sb, bool serving) const
{
  return ul_prb_mw_[serving] * coupling_lin_[ue * n_cells_ + cell] * fading_power(ue, cell, sb);
}

double link_model::dl_sinr(int ue, int serving, int sb) const
{
  double s = dl_rx_power(ue, serving, sb, true);
  double i = 0;
  for (int c = 0; c < n_cells_; ++c) {
    if (c != serving) {
      i += dl_rx_power(ue, c, sb, false);
    }
  }
  return s / (i / suppression_lin_ + dl_noise_mw_);
}

double link_model::ul_sinr(int ue, int serving, int sb, std::span<const int> interferers) const
{
  double s = ul_rx_power(ue, serving, sb, true);
  double i = 0;
  for (int c = 0; c < static_cast<int>(interferers.size()); ++c) {
    int k = interferers[c];
    if (c != serving && k >= 0 && k != ue) {
      i += ul_rx_power(k, serving, sb, false);
    }
  }
  return s / (i / suppression_lin_ + ul_noise_mw_);
}

double link_model::wideband_dl_sinr_db(int ue, int serving) const
{
  double s = dl_prb_mw_[1] * coupling_lin_[ue * n_cells_ + serving];
  double i = 0;
  for (int c = 0; c < n_cells_; ++c) {
    if (c != serving) {
      i += dl_prb_mw_[0] * coupling_lin_[ue * n_cells_ + c];
    }
  }
  return lin_to_db(s / (i / db_to_lin(cfg_.mmse_suppression_db) + dl_noise_mw_));
}

} // namespace xrsim
