#include "xrsim/control.hpp"
#include "xrsim/radio.hpp"

#include <algorithm>
#include <cmath>

namespace xrsim {

int aggregation_level(double sinr_db)
{
  if (sinr_db >= 10) {
    return 1;
  }
  if (sinr_db >= 4) {
    return 2;
  }
  if (sinr_db >= 0) {
    return 4;
  }
  return 8;
}

control_params control_params::from(const scenario_config& cfg)
{
  control_params p;
  p.pool_cru            = cfg.control_pool_cru;
  p.stage1_share        = cfg.stage1_share;
  p.stage2_grants       = cfg.stage2_grants_per_msg;
  p.stage2_cost_cru     = cfg.stage2_msg_cost_cru;
  p.base_threshold_db   = cfg.control_base_threshold_db;
  p.stage2_threshold_db = cfg.stage2_threshold_db;
  return p;
}

namespace {

control_message dedicated(const control_request& r, const control_params& p)
{
  control_message m;
  m.stage        = control_stage::dedicated;
  m.targets      = {r.id};
  m.aggregation  = aggregation_level(r.sinr_db);
  m.cost         = m.aggregation;
  m.threshold_db = p.base_threshold_db;
  return m;
}

// Packs requests [next, end) of `low` into stage-2 messages within `budget`.
void pack_stage2(const control_params& p, const std::vector<const control_request*>& low, std::size_t& next,
                 int budget, control_allocation& out)
{
  while (next < low.size()) {
    std::size_t n = std::min<std::size_t>(p.stage2_grants, low.size() - next);
    if (n == 1) {
      auto d = dedicated(*low[next], p);
      if (d.cost < p.stage2_cost_cru && d.cost <= budget) {
        budget -= d.cost;
        out.used_cru += d.cost;
        out.messages.push_back(std::move(d));
        ++next;
        continue;
      }
    }
    if (budget < p.stage2_cost_cru) {
      return;
    }
    control_message m;
    m.stage        = control_stage::stage2;
    m.cost         = p.stage2_cost_cru;
    m.threshold_db = p.stage2_threshold_db;
    for (std::size_t k = 0; k < n; ++k) {
      m.targets.push_back(low[next + k]->id);
    }
    next += n;
    budget -= m.cost;
    out.used_cru += m.cost;
    out.messages.push_back(std::move(m));
  }
}

void finish(std::span<const control_request> reqs, control_allocation& out)
{
  std::vector<char> sent(reqs.size(), 0);
  for (const auto& m : out.messages) {
    for (int id : m.targets) {
      for (std::size_t i = 0; i < reqs.size(); ++i) {
        if (reqs[i].id == id) {
          sent[i] = 1;
        }
      }
    }
  }
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    (sent[i] ? out.admitted : out.deferred).push_back(reqs[i].id);
  }
}

} // namespace

control_allocation allocate_legacy(const control_params& p, std::span<const control_request> reqs)
{
  control_allocation out;
  for (const auto& r : reqs) {
    auto m = dedicated(r, p);
    if (out.used_cru + m.cost > p.pool_cru) {
      break;
    }
    out.used_cru += m.cost;
    out.messages.push_back(std::move(m));
  }
  finish(reqs, out);
  return out;
}

namespace {

// Highs get dedicated messages from the stage-1 share, lows are packed into the
// rest, then both classes spill into whatever is left.
control_allocation partitioned(const control_params& p, const std::vector<const control_request*>& high,
                               const std::vector<const control_request*>& low)
{
  const int stage1_cap = static_cast<int>(std::lround(p.pool_cru * p.stage1_share));

  control_allocation out;
  std::size_t        next_high = 0, next_low = 0;
  auto               highs = [&](int cap) {
    for (; next_high < high.size(); ++next_high) {
      auto m = dedicated(*high[next_high], p);
      if (out.used_cru + m.cost > cap) {
        return;
      }
      out.used_cru += m.cost;
      out.messages.push_back(std::move(m));
    }
  };
  highs(stage1_cap);
  pack_stage2(p, low, next_low, p.pool_cru - out.used_cru, out);
  highs(p.pool_cru);
  pack_stage2(p, low, next_low, p.pool_cru - out.used_cru, out);
  return out;
}

// Service order of the request list, lows packed as they come. A stage-2
// message holding one grant is charged like a dedicated one until a second
// grant joins, so every prefix costs no more than under the legacy design.
control_allocation in_order(const control_params& p, std::span<const control_request> reqs)
{
  control_allocation out;
  int                open = -1;  // stage-2 message accepting more grants
  for (const auto& r : reqs) {
    if (r.priority) {
      auto m = dedicated(r, p);
      if (out.used_cru + m.cost > p.pool_cru) {
        break;
      }
      out.used_cru += m.cost;
      out.messages.push_back(std::move(m));
      continue;
    }
    if (open >= 0 && static_cast<int>(out.messages[open].targets.size()) < p.stage2_grants) {
      auto& m     = out.messages[open];
      int   extra = p.stage2_cost_cru - m.cost;
      if (out.used_cru + extra > p.pool_cru) {
        break;
      }
      out.used_cru += extra;
      m.cost = p.stage2_cost_cru;
      m.targets.push_back(r.id);
      continue;
    }
    auto d    = dedicated(r, p);
    int  cost = std::min(d.cost, p.stage2_cost_cru);
    if (out.used_cru + cost > p.pool_cru) {
      break;
    }
    control_message m;
    m.stage        = control_stage::stage2;
    m.cost         = cost;
    m.threshold_db = p.stage2_threshold_db;
    m.targets      = {r.id};
    out.used_cru += cost;
    out.messages.push_back(std::move(m));
    open = static_cast<int>(out.messages.size()) - 1;
  }
  // lone grants go out as dedicated messages when that is no dearer
  for (auto& m : out.messages) {
    if (m.stage == control_stage::stage2 && m.targets.size() == 1) {
      const auto& r = *std::find_if(reqs.begin(), reqs.end(), [&](const auto& q) { return q.id == m.targets[0]; });
      auto        d = dedicated(r, p);
      if (d.cost <= m.cost) {
        out.used_cru += d.cost - m.cost;
        m = std::move(d);
      }
    }
  }
  return out;
}

std::size_t grants_in(const control_allocation& a)
{
  std::size_t n = 0;
  for (const auto& m : a.messages) {
    n += m.targets.size();
  }
  return n;
}

} // namespace

control_allocation allocate_two_stage(const control_params& p, std::span<const control_request> reqs)
{
  std::vector<const control_request*> high, low;
  for (const auto& r : reqs) {
    if (r.priority < 0) {
      throw control_error("no priority assigned for ue " + std::to_string(r.ue));
    }
    (r.priority ? high : low).push_back(&r);
  }
  auto a = partitioned(p, high, low);
  auto b = in_order(p, reqs);
  auto& best = grants_in(b) > grants_in(a) ? b : a;
  finish(reqs, best);
  return std::move(best);
}

control_allocation allocate(control_design_t design, const control_params& p, std::span<const control_request> reqs)
{
  return design == control_design_t::legacy ? allocate_legacy(p, reqs) : allocate_two_stage(p, reqs);
}

double control_pass_probability(const control_message& m, double sinr_db)
{
  double eff = sinr_db;
  if (m.stage == control_stage::dedicated) {
    eff += 10 * std::log10(static_cast<double>(m.aggregation));
  }
  return 1.0 - bler(eff, m.threshold_db);
}

bool decode_control(const control_message& m, double sinr_db, std::mt19937_64& rng)
{
  std::uniform_real_distribution<double> u(0, 1);
  return u(rng) < control_pass_probability(m, sinr_db);
}

std::vector<int> assign_priorities(const scenario_config& cfg, std::span<const double> sinr_db, std::mt19937_64& rng)
{
  bool critical = std::any_of(cfg.traffic.begin(), cfg.traffic.end(),
                              [](const flow_spec& f) { return f.priority == priority_class_t::critical; });
  std::bernoulli_distribution coin(0.5);
  std::vector<int>            out(sinr_db.size());
  for (std::size_t u = 0; u < sinr_db.size(); ++u) {
    out[u] = cfg.priority_mode == priority_mode_t::random ? coin(rng) : critical;
    if (cfg.edge_promotion && sinr_db[u] < cfg.edge_sinr_threshold_db) {
      out[u] = 1;
    }
  }
  return out;
}

} // namespace xrsim
