#pragma once

#include "xrsim/config.hpp"
#include "xrsim/engine.hpp"
#include "xrsim/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace xrsim {

enum class compare_axis { bsr_scheme, control_design, aggregation };

compare_axis parse_compare_axis(const std::string& s);
const char*  to_string(compare_axis a);

struct experiment_options {
  std::vector<std::uint64_t>           seeds{1};
  std::optional<std::filesystem::path> out_dir;  // nothing written when empty
  export_level                         level = export_level::summary;
  bool                                 check_invariants = true;
};

struct variant_result {
  std::string              name;
  scenario_config          cfg;     // seed field holds the first seed
  ecdf_series              metric;  // pooled over seeds
  std::vector<double>      satisfaction;  // one per seed
  std::vector<waste_counters> waste;      // one per seed
};

struct compare_result {
  compare_axis                axis;
  std::vector<std::uint64_t>  seeds;
  std::vector<variant_result> variants;  // baseline first
};

//! Runs every variant of `axis` on the same seeds, one cold engine per run.
//! Metric per axis: UL throughput per UE (Mbps), mean scheduled TB size per UE
//! (KB), critical DL latency of grouped secondaries (ms).
compare_result run_compare(const scenario_config& base, compare_axis axis, const experiment_options& opt);

inline constexpr double delta_percentiles[] = {10, 50, 90, 95};

//! variant,value,cdf with rows ascending by value inside each variant.
std::string ecdf_csv(const compare_result& r);
//! percentile,<variant values...>,<gain of each non-baseline variant vs baseline>.
std::string delta_csv(const compare_result& r);
//! Relative gain of variant `v` over the baseline at percentile `p`.
double relative_gain(const compare_result& r, std::size_t v, double p);

bool is_sweepable(const std::string& key);

struct sweep_row {
  std::string value;
  int         runs = 0;
  double      satisfaction = 0;  // mean over seeds
  double      dl_mbps[3] = {0, 0, 0};  // p10, p50, p90 pooled over seeds
  double      ul_mbps[3] = {0, 0, 0};
};

std::vector<sweep_row> run_sweep(const scenario_config& base, const std::string& key,
                                 const std::vector<std::string>& values, const experiment_options& opt);

std::string sweep_csv(const std::string& key, const std::vector<sweep_row>& rows);

//! Creates `dir` and probes it with a temporary file; throws export_error if that fails.
void ensure_writable(const std::filesystem::path& dir);

} // namespace xrsim
