#pragma once

#include "xrsim/aggregation.hpp"
#include "xrsim/bsr.hpp"
#include "xrsim/config.hpp"
#include "xrsim/metrics.hpp"
#include "xrsim/scheduler.hpp"
#include "xrsim/traffic.hpp"

#include <memory>
#include <stdexcept>
#include <vector>

namespace xrsim {

struct engine_options {
  bool collect_tbs      = true;   // keep one tb_record per transport block
  bool check_invariants = true;   // PRB disjointness and byte conservation every TTI
};

//! Raised when a per-TTI invariant check fails.
struct invariant_error : std::logic_error {
  using std::logic_error::logic_error;
};

//! One simulation run. Deterministic for a given (config, rng_seed).
class engine
{
public:
  explicit engine(const scenario_config& cfg, engine_options opt = {});
  ~engine();
  engine(const engine&)            = delete;
  engine& operator=(const engine&) = delete;

  //! Runs the remaining TTIs and returns the report.
  run_report run();

  void       step();
  run_report finish();

  long tti() const;
  long tti_count() const;

  int                      n_ues() const;
  const std::vector<vec2>& positions() const;
  const std::vector<int>&  serving_cells() const;
  const std::vector<int>&  priorities() const;
  const std::vector<double>& wideband_sinr_db() const;
  const std::vector<aggregation_group>& groups() const;
  const std::vector<flow_route>&        routes() const;

  //! Grants issued in the last step, in issue order.
  const std::vector<grant>& last_grants() const;

  bytes_t          ul_estimate(int ue) const;
  bytes_t          unsent(int ue, direction_t d) const;
  const bsr_table& ue_bsr_table(int ue) const;
  const app_stats& ue_app_stats(int ue) const;

private:
  struct impl;
  std::unique_ptr<impl> p_;
};

//! Convenience: builds an engine, runs it, returns the report.
run_report simulate(const scenario_config& cfg, engine_options opt = {});

} // namespace xrsim
