#include "xrsim/geometry.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace xrsim {

namespace {

constexpr double deg = std::numbers::pi / 180.0;

double norm(vec2 v)
{
  return std::hypot(v.x, v.y);
}

vec2 operator-(vec2 a, vec2 b)
{
  return {a.x - b.x, a.y - b.y};
}

vec2 operator+(vec2 a, vec2 b)
{
  return {a.x + b.x, a.y + b.y};
}

} // namespace

bool cell_info::omni() const
{
  return std::isnan(boresight_deg);
}

cell_layout::cell_layout(const deployment_layout& d) : isd_(d.inter_site_distance_m)
{
  sites_.push_back({0, 0});
  for (int k = 1; k < d.site_count; ++k) {
    double a = 60.0 * (k - 1) * deg;
    sites_.push_back({isd_ * std::cos(a), isd_ * std::sin(a)});
  }

  shifts_.push_back({0, 0});
  if (d.wraparound && d.site_count == 7) {
    // the 7-site cluster tiles the plane along 2*a1 + a2 and its 60 deg rotations
    vec2 t{2.5 * isd_, std::sqrt(3.0) / 2 * isd_};
    for (int k = 0; k < 6; ++k) {
      double a = 60.0 * k * deg;
      shifts_.push_back({t.x * std::cos(a) - t.y * std::sin(a), t.x * std::sin(a) + t.y * std::cos(a)});
    }
  }

  int id = 0;
  for (int s = 0; s < static_cast<int>(sites_.size()); ++s) {
    for (int c = 0; c < d.cells_per_site; ++c) {
      double bore = d.cells_per_site == 1 ? std::numeric_limits<double>::quiet_NaN() : 30.0 + 120.0 * c;
      cells_.push_back({id++, s, sites_[s], bore});
    }
  }
}

vec2 cell_layout::nearest_image(vec2 p, vec2 site_pos) const
{
  vec2   best  = site_pos;
  double bestd = std::numeric_limits<double>::infinity();
  for (const auto& sh : shifts_) {
    vec2   img = site_pos + sh;
    double dd  = norm(p - img);
    if (dd < bestd) {
      bestd = dd;
      best  = img;
    }
  }
  return best;
}

double cell_layout::distance(vec2 p, vec2 site_pos) const
{
  return norm(p - nearest_image(p, site_pos));
}

bool cell_layout::inside_site_hexagon(vec2 p, int site) const
{
  // Voronoi cell of the site lattice: |projection on each neighbor direction| <= isd/2
  vec2 r = p - sites_[site];
  for (int k = 0; k < 3; ++k) {
    double a = 60.0 * k * deg;
    if (std::abs(r.x * std::cos(a) + r.y * std::sin(a)) > isd_ / 2) {
      return false;
    }
  }
  return true;
}

vec2 cell_layout::sample_in_site(int site, std::mt19937_64& rng) const
{
  double                                 circum = isd_ / std::sqrt(3.0);
  std::uniform_real_distribution<double> ux(-isd_ / 2, isd_ / 2);
  std::uniform_real_distribution<double> uy(-circum, circum);
  for (;;) {
    vec2 p = sites_[site] + vec2{ux(rng), uy(rng)};
    if (inside_site_hexagon(p, site)) {
      return p;
    }
  }
}

double cell_layout::torus_diameter() const
{
  if (shifts_.size() == 1) {
    // footprint of the cluster without wrap: bound by the farthest hexagon vertices
    double far = 0;
    for (const auto& s : sites_) {
      far = std::max(far, norm(s));
    }
    return 2 * (far + isd_ / std::sqrt(3.0));
  }
  // circumradius of the Voronoi cell of the wrap lattice
  return norm(shifts_[1]) / std::sqrt(3.0);
}

cell_layout layout_cells(const deployment_layout& d)
{
  return cell_layout(d);
}

double sector_gain_db(double angle_off_boresight_deg)
{
  double a = std::remainder(angle_off_boresight_deg, 360.0);
  return -std::min(12.0 * (a / 65.0) * (a / 65.0), 30.0);
}

std::vector<vec2> drop_ue_positions(const scenario_config& cfg, const cell_layout& layout, std::mt19937_64& rng)
{
  if (!cfg.ue_positions.empty()) {
    return cfg.ue_positions;
  }
  const auto& d     = cfg.deployment;
  int         total = static_cast<int>(std::lround(d.ues_per_cell_mean * layout.cells().size()));
  int         nsite = static_cast<int>(layout.sites().size());

  std::uniform_int_distribution<int> pick_site(0, nsite - 1);
  std::vector<vec2>                  out;
  out.reserve(total);
  while (static_cast<int>(out.size()) < total) {
    int  s = pick_site(rng);
    vec2 p = layout.sample_in_site(s, rng);
    bool ok = true;
    for (const auto& site : layout.sites()) {
      if (layout.distance(p, site) < d.min_drop_distance_m) {
        ok = false;
        break;
      }
    }
    if (ok) {
      out.push_back(p);
    }
  }
  return out;
}

ue_drop drop_ues(const scenario_config& cfg, const cell_layout& layout, const coupling_fn& coupling,
                 std::mt19937_64& rng)
{
  ue_drop drop;
  drop.positions = drop_ue_positions(cfg, layout, rng);
  for (int u = 0; u < static_cast<int>(drop.positions.size()); ++u) {
    int    best  = 0;
    double bestg = -std::numeric_limits<double>::infinity();
    for (const auto& c : layout.cells()) {
      double g = coupling(drop.positions[u], u, c.id);
      if (g > bestg) {
        bestg = g;
        best  = c.id;
      }
    }
    drop.serving_cell.push_back(best);
  }
  return drop;
}

} // namespace xrsim
