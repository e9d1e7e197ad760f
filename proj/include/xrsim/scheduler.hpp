#pragma once

#include "xrsim/bsr.hpp"
#include "xrsim/config.hpp"
#include "xrsim/radio.hpp"
#include "xrsim/traffic.hpp"

#include <map>
#include <span>
#include <stdexcept>
#include <vector>

namespace xrsim {

struct grant {
  int              ue       = -1;
  int              cell     = -1;
  direction_t      dir      = direction_t::dl;
  std::vector<int> subbands;  // each subband is a contiguous PRB range
  int              prb_count = 0;
  int              mcs       = 0;
  bytes_t          tb_bytes  = 0;
  long             tti       = 0;
  int              harq_id   = -1;
  bool             new_tx    = true;
};

//! Exponentially averaged served bytes per TTI, per UE and direction.
class pf_state
{
public:
  pf_state(int n_ues = 0, double time_constant_tti = 100);

  double average(int ue, direction_t d) const { return avg_[idx(ue, d)]; }
  //! Advances one TTI; `served` is what the UE got in this TTI (0 if unserved).
  void update(int ue, direction_t d, double served_bytes);
  double time_constant() const { return tau_; }

private:
  std::size_t idx(int ue, direction_t d) const { return static_cast<std::size_t>(ue) * 2 + (d == direction_t::ul); }

  double              tau_;
  std::vector<double> avg_;
};

struct pf_candidate {
  int                     ue     = -1;
  bytes_t                 demand = 0;  // bytes still wanted this TTI
  std::span<const int>    cqi;         // per subband
  double                  average = 0; // pf_state average, bytes/TTI
};

//! Per-subband greedy PF: each free subband goes to argmax rate/average among
//! candidates with remaining demand. Returns the owner candidate index per
//! subband (-1 when left idle or busy).
std::vector<int> pf_assign(std::span<const pf_candidate> cands, const std::vector<bool>& busy,
                           std::span<const int> subband_prbs, const mcs_table& table, int tti_symbols);

//! PF metric used for ranking on the wideband (mean) CQI.
double pf_metric(std::span<const int> cqi, double average, const mcs_table& table);

//! MCS index for a set of subbands: floor of the mean CQI.
int grant_mcs(std::span<const int> cqi, std::span<const int> subbands, const mcs_table& table);

//! Builds the grant for the given subbands.
grant make_grant(int ue, int cell, direction_t d, std::vector<int> subbands, std::span<const int> cqi,
                 std::span<const int> subband_prbs, const mcs_table& table, int tti_symbols, long tti);

//! Demand estimate from a decoded BSR index (upper bound of the range; b_max for overflow).
bytes_t size_ul_grant(int bsr_index, const bsr_table& table);

//! Over-scheduling waste of an estimate against the true buffered volume.
inline bytes_t over_scheduling_waste(bytes_t estimate, bytes_t true_volume)
{
  return estimate > true_volume ? estimate - true_volume : 0;
}

struct harq_process {
  int                  id        = -1;
  grant                g;
  std::vector<segment> payload;
  int                  tx_count  = 0;
  double               acc_sinr  = 0;  // linear, summed over attempts
  long                 ready_tti = 0;  // earliest retransmission TTI
  bool                 waiting   = false;  // feedback outstanding
};

enum class harq_outcome { delivered, retransmit, dropped };

struct harq_feedback_result {
  harq_outcome outcome;
  harq_process process;
};

struct harq_error : std::logic_error {
  using std::logic_error::logic_error;
};

class harq_manager
{
public:
  harq_manager(int max_tx = 4, int retx_delay_tti = 4) : max_tx_(max_tx), retx_delay_(retx_delay_tti) {}

  int                 open(const grant& g, std::vector<segment> payload);
  harq_process&       get(int id);
  const harq_process& get(int id) const;
  bool                contains(int id) const { return procs_.count(id) != 0; }

  //! Adds one attempt's effective SINR (chase combining) and returns the combined value.
  double record_attempt(int id, double effective_sinr_linear);

  harq_feedback_result feedback(int id, bool success, long tti);

  //! Processes waiting for a retransmission slot at `tti` (oldest first).
  std::vector<int> due(long tti, int cell, direction_t d) const;

  std::size_t size() const { return procs_.size(); }
  long        dropped() const { return dropped_; }
  int         max_tx() const { return max_tx_; }

  const std::map<int, harq_process>& processes() const { return procs_; }

private:
  int                         max_tx_;
  int                         retx_delay_;
  int                         next_id_ = 0;
  long                        dropped_ = 0;
  std::map<int, harq_process> procs_;
};

//! Semi-persistent configuration of one UE.
struct sps_config {
  int              period_tti = 8;
  int              offset     = 0;
  std::vector<int> subbands;
  int              mcs        = 0;
  long             valid_until_tti = -1;  // -1: whole run

  bool occasion(long tti) const
  {
    return tti >= offset && (tti - offset) % period_tti == 0 && (valid_until_tti < 0 || tti < valid_until_tti);
  }
};

//! SPS configs for the UEs of one cell: offset = position mod period; UEs sharing an
//! offset split the subbands round-robin (or take `prbs_per_ue` worth when nonzero).
std::vector<sps_config> configure_sps(int n_ues_in_cell, int period_tti, int n_subbands, int prbs_per_ue,
                                      std::span<const int> subband_prbs);

} // namespace xrsim
