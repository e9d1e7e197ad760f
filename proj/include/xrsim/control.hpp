#pragma once

#include "xrsim/config.hpp"

#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace xrsim {

enum class control_stage { dedicated, stage2 };

//! Aggregation level (CRUs of one conservative message) by target SINR.
int aggregation_level(double sinr_db);

struct control_request {
  int    id       = 0;
  int    ue       = -1;
  int    priority = -1;  // 1 high, 0 low, -1 unassigned
  double sinr_db  = 0;
};

struct control_message {
  control_stage    stage = control_stage::dedicated;
  std::vector<int> targets;  // request ids
  int              cost  = 0;
  int              aggregation = 1;
  double           threshold_db = 0;
};

struct control_params {
  int    pool_cru            = 16;
  double stage1_share        = 0.75;
  int    stage2_grants       = 4;
  int    stage2_cost_cru     = 2;
  double base_threshold_db   = 3;
  double stage2_threshold_db = 7;

  static control_params from(const scenario_config& cfg);
};

struct control_allocation {
  std::vector<control_message> messages;
  std::vector<int>             admitted;  // request ids, in service order
  std::vector<int>             deferred;  // request ids, in arrival order
  int                          used_cru = 0;
};

struct control_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

//! One dedicated conservative message per request, in order, until the first
//! request that no longer fits; the rest is deferred.
control_allocation allocate_legacy(const control_params& p, std::span<const control_request> reqs);

//! High-priority requests get dedicated messages, low-priority ones are packed
//! into shared stage-2 messages. Stage-2 uses at most its share first; stage-1
//! then takes its share plus what stage-2 left; remaining CRUs buy further
//! stage-2 messages.
control_allocation allocate_two_stage(const control_params& p, std::span<const control_request> reqs);

control_allocation allocate(control_design_t design, const control_params& p, std::span<const control_request> reqs);

double control_pass_probability(const control_message& m, double sinr_db);
bool   decode_control(const control_message& m, double sinr_db, std::mt19937_64& rng);

//! Per-UE priority class (1 high, 0 low).
//! traffic mode: high iff the UE carries a critical flow; random mode: fair coin.
//! With edge promotion, UEs below the SINR threshold are always high.
std::vector<int> assign_priorities(const scenario_config& cfg, std::span<const double> wideband_sinr_db,
                                   std::mt19937_64& rng);

} // namespace xrsim
