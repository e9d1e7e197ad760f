#include "xrsim/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace xrsim {

pf_state::pf_state(int n_ues, double time_constant_tti) :
  tau_(time_constant_tti), avg_(static_cast<std::size_t>(n_ues) * 2, 0.0)
{
  if (!(tau_ >= 1)) {
    throw std::invalid_argument("pf time constant must be >= 1 TTI");
  }
}

void pf_state::update(int ue, direction_t d, double served_bytes)
{
  double& a = avg_[idx(ue, d)];
  a += (served_bytes - a) / tau_;
}

namespace {

constexpr double min_average = 1.0;  // bytes/TTI, keeps new UEs finite

double subband_rate(int cqi, int prbs, const mcs_table& table)
{
  return select_mcs(cqi, table).efficiency * prbs;
}

} // namespace

double pf_metric(std::span<const int> cqi, double average, const mcs_table& table)
{
  if (cqi.empty()) {
    return 0;
  }
  double sum = 0;
  for (int c : cqi) {
    sum += select_mcs(c, table).efficiency;
  }
  return sum / cqi.size() / std::max(average, min_average);
}

std::vector<int> pf_assign(std::span<const pf_candidate> cands, const std::vector<bool>& busy,
                           std::span<const int> subband_prbs, const mcs_table& table, int tti_symbols)
{
  const int            n_sb = static_cast<int>(subband_prbs.size());
  std::vector<int>     owner(n_sb, -1);
  std::vector<bytes_t> left(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    left[i] = cands[i].demand;
  }
  for (int sb = 0; sb < n_sb; ++sb) {
    if (busy[sb]) {
      continue;
    }
    int    best   = -1;
    double best_m = -1;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (left[i] <= 0) {
        continue;
      }
      double m = subband_rate(cands[i].cqi[sb], subband_prbs[sb], table) / std::max(cands[i].average, min_average);
      if (m > best_m) {
        best_m = m;
        best   = static_cast<int>(i);
      }
    }
    if (best < 0) {
      continue;
    }
    owner[sb] = best;
    left[best] -= tb_size(select_mcs(cands[best].cqi[sb], table), subband_prbs[sb], tti_symbols);
  }
  return owner;
}

int grant_mcs(std::span<const int> cqi, std::span<const int> subbands, const mcs_table& table)
{
  if (subbands.empty()) {
    throw std::invalid_argument("grant_mcs: no subbands");
  }
  long sum = 0;
  for (int sb : subbands) {
    sum += cqi[sb];
  }
  int mean = static_cast<int>(sum / static_cast<long>(subbands.size()));
  return select_mcs(mean, table).index;
}

grant make_grant(int ue, int cell, direction_t d, std::vector<int> subbands, std::span<const int> cqi,
                 std::span<const int> subband_prbs, const mcs_table& table, int tti_symbols, long tti)
{
  grant g;
  g.ue   = ue;
  g.cell = cell;
  g.dir  = d;
  g.tti  = tti;
  for (int sb : subbands) {
    g.prb_count += subband_prbs[sb];
  }
  g.mcs      = grant_mcs(cqi, subbands, table);
  g.tb_bytes = tb_size(table[g.mcs], g.prb_count, tti_symbols);
  g.subbands = std::move(subbands);
  return g;
}

bytes_t size_ul_grant(int bsr_index, const bsr_table& table)
{
  if (bsr_index == table.overflow_index()) {
    return table.b_max();
  }
  if (bsr_index == 0) {
    return 0;
  }
  return table.decode(bsr_index).upper - 1;  // largest whole-byte volume the index covers
}

int harq_manager::open(const grant& g, std::vector<segment> payload)
{
  int          id = next_id_++;
  harq_process p;
  p.id        = id;
  p.g         = g;
  p.g.harq_id = id;
  p.payload   = std::move(payload);
  procs_.emplace(id, std::move(p));
  return id;
}

harq_process& harq_manager::get(int id)
{
  auto it = procs_.find(id);
  if (it == procs_.end()) {
    throw harq_error("unknown harq process " + std::to_string(id));
  }
  return it->second;
}

const harq_process& harq_manager::get(int id) const
{
  auto it = procs_.find(id);
  if (it == procs_.end()) {
    throw harq_error("unknown harq process " + std::to_string(id));
  }
  return it->second;
}

double harq_manager::record_attempt(int id, double effective_sinr_linear)
{
  auto& p = get(id);
  if (p.tx_count >= max_tx_) {
    throw harq_error("harq process " + std::to_string(id) + " exceeded its transmissions");
  }
  p.tx_count += 1;
  p.acc_sinr += effective_sinr_linear;
  p.waiting = true;
  return p.acc_sinr;
}

harq_feedback_result harq_manager::feedback(int id, bool success, long tti)
{
  auto& p = get(id);
  if (!p.waiting) {
    throw harq_error("harq process " + std::to_string(id) + " has no outstanding transmission");
  }
  p.waiting = false;
  if (success) {
    harq_feedback_result r{harq_outcome::delivered, std::move(p)};
    procs_.erase(id);
    return r;
  }
  if (p.tx_count >= max_tx_) {
    ++dropped_;
    harq_feedback_result r{harq_outcome::dropped, std::move(p)};
    procs_.erase(id);
    return r;
  }
  p.ready_tti = tti + retx_delay_;
  return {harq_outcome::retransmit, p};
}

std::vector<int> harq_manager::due(long tti, int cell, direction_t d) const
{
  std::vector<int> out;
  for (const auto& [id, p] : procs_) {
    if (!p.waiting && p.ready_tti <= tti && p.g.cell == cell && p.g.dir == d) {
      out.push_back(id);
    }
  }
  // ids grow with time, so map order is already oldest first
  return out;
}

std::vector<sps_config> configure_sps(int n, int period, int n_sb, int prbs_per_ue, std::span<const int> subband_prbs)
{
  if (period < 1) {
    throw std::invalid_argument("sps period must be >= 1");
  }
  std::vector<sps_config> out(n);
  for (int off = 0; off < period; ++off) {
    std::vector<int> members;
    for (int i = off; i < n; i += period) {
      members.push_back(i);
    }
    int k = static_cast<int>(members.size());
    for (int j = 0; j < k; ++j) {
      auto& c      = out[members[j]];
      c.period_tti = period;
      c.offset     = off;
      if (prbs_per_ue > 0) {
        int need = 0, got = 0;
        for (int sb = 0; sb < n_sb && got < prbs_per_ue; ++sb) {
          need = sb;
          got += subband_prbs[sb];
        }
        int span  = std::min(need + 1, std::max(1, n_sb / k));
        int start = j * span;  // UEs that do not fit get no resources
        for (int s = 0; s < span && start + s < n_sb; ++s) {
          c.subbands.push_back(start + s);
        }
      } else {
        for (int sb = j; sb < n_sb; sb += k) {
          c.subbands.push_back(sb);
        }
      }
    }
  }
  return out;
}

} // namespace xrsim
