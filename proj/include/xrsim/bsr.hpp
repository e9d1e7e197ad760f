#pragma once

#include "xrsim/config.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace xrsim {

constexpr double default_bsr_max_bytes = 81.3e6;

struct bsr_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct rapi_assistance {
  double mean_volume_bytes = 0;
  double std_volume_bytes  = 0;
  double alpha_bytes       = 5e6;
  double refinement_factor = 3;
};

struct bsr_range {
  bytes_t lower = 0;
  bytes_t upper = 0;  // exclusive
  bool    contains(double v) const { return lower <= v && v < upper; }
  bytes_t width() const { return upper - lower; }
};

struct bsr_index {
  int       index = 0;
  bsr_range range;
};

//! Quantization table. Index 0 is the empty report, the top index reports
//! overflow (>= b_max); indices 1..N cover [boundaries[i-1], boundaries[i]).
class bsr_table
{
public:
  bsr_table(bsr_scheme_t variant, int index_bits, std::vector<bytes_t> boundaries);

  bsr_scheme_t variant() const { return variant_; }
  int          index_bits() const { return index_bits_; }
  int          index_count() const { return 1 << index_bits_; }
  int          overflow_index() const { return index_count() - 1; }
  int          interval_count() const { return index_count() - 2; }
  bytes_t      b_max() const { return boundaries_.back(); }

  const std::vector<bytes_t>& boundaries() const { return boundaries_; }

  bsr_index encode(double volume_bytes) const;
  bsr_range decode(int index) const;

  //! Width of the interval holding `volume_bytes` (b_max beyond the top).
  bytes_t step_at(double volume_bytes) const;

  std::string      to_csv() const;
  static bsr_table parse_csv(const std::string& text, bsr_scheme_t variant);
  static bsr_table load_csv(const std::filesystem::path& path, bsr_scheme_t variant);

  bool operator==(const bsr_table&) const = default;

private:
  bsr_scheme_t         variant_;
  int                  index_bits_;
  std::vector<bytes_t> boundaries_;  // size interval_count() + 1
};

bsr_table build_legacy8(double b_max = default_bsr_max_bytes);
bsr_table build_uniform10(double b_max = default_bsr_max_bytes);
bsr_table build_adaptive8(const rapi_assistance& a, double b_max = default_bsr_max_bytes);

bsr_table build_table(bsr_scheme_t variant, const std::optional<rapi_assistance>& assistance = std::nullopt,
                      double b_max = default_bsr_max_bytes);

//! Inside step s of the adaptive table: (W_in + W_out / f) / 254.
double adaptive_inside_step(const rapi_assistance& a, double b_max = default_bsr_max_bytes);

//! Table for a scenario; legacy8 may come from the configured CSV file.
bsr_table table_for(const scenario_config& cfg, const std::optional<rapi_assistance>& assistance = std::nullopt);

} // namespace xrsim
