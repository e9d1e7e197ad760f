#pragma once

#include "xrsim/config.hpp"

#include <functional>
#include <random>
#include <vector>

namespace xrsim {

struct cell_info {
  int    id;
  int    site;
  vec2   site_pos;
  double boresight_deg;  // NaN for omni cells
  bool   omni() const;
};

//! Hexagonal site cluster with optional wraparound images.
class cell_layout
{
public:
  explicit cell_layout(const deployment_layout& d);

  const std::vector<cell_info>& cells() const { return cells_; }
  const std::vector<vec2>&      sites() const { return sites_; }
  const std::vector<vec2>&      wrap_shifts() const { return shifts_; }
  double                        isd() const { return isd_; }

  //! Image of `site_pos` closest to `p` (identity without wraparound).
  vec2   nearest_image(vec2 p, vec2 site_pos) const;
  double distance(vec2 p, vec2 site_pos) const;
  double site_distance(int a, int b) const { return distance(sites_[a], sites_[b]); }

  //! Uniform point in the hexagonal footprint of `site`.
  vec2 sample_in_site(int site, std::mt19937_64& rng) const;
  bool inside_site_hexagon(vec2 p, int site) const;

  //! Largest wrapped distance between two points of the footprint.
  double torus_diameter() const;

private:
  std::vector<vec2>      sites_;
  std::vector<vec2>      shifts_;  // includes the zero shift
  std::vector<cell_info> cells_;
  double                 isd_;
};

cell_layout layout_cells(const deployment_layout& d);

//! 3GPP parabolic horizontal pattern, 65 deg HPBW, 30 dB front-to-back.
double sector_gain_db(double angle_off_boresight_deg);

struct ue_drop {
  std::vector<vec2> positions;
  std::vector<int>  serving_cell;
};

//! coupling(ue_position, ue_index, cell) in dB
using coupling_fn = std::function<double(vec2, int, int)>;

std::vector<vec2> drop_ue_positions(const scenario_config& cfg, const cell_layout& layout, std::mt19937_64& rng);

//! Drops UEs (or takes cfg.ue_positions) and attaches each to its maximum-coupling cell.
ue_drop drop_ues(const scenario_config& cfg, const cell_layout& layout, const coupling_fn& coupling,
                 std::mt19937_64& rng);

} // namespace xrsim
