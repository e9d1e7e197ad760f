#include "xrsim/engine.hpp"
#include "xrsim/control.hpp"
#include "xrsim/geometry.hpp"
#include "xrsim/radio.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <deque>
#include <limits>
#include <numeric>

namespace xrsim {

namespace {

constexpr int DL = 0;
constexpr int UL = 1;

direction_t dir_of(int d)
{
  return d == DL ? direction_t::dl : direction_t::ul;
}

int dir_index(direction_t d)
{
  return d == direction_t::dl ? DL : UL;
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream)
{
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x5eedu};
  return std::mt19937_64(seq);
}

struct flow_inst {
  int         spec  = 0;
  int         dest  = 0;  // UE that consumes the packets
  int         radio = 0;  // UE whose cellular link carries them
  int         dir   = DL;
  bool        relay = false;
  int         group = -1;
  bool        critical = false;
  flow_buffer buf;
  bytes_t     inflight = 0;
};

struct bsr_pending {
  long    due;
  int     ue;
  bytes_t upper;
  bytes_t granted_at_gen;
};

struct fb_event {
  long tti;
  int  harq_id;
  bool success;
};

struct request {
  int ue;
  int dir;
  int harq_id;  // -1 for new data
  int flow;     // DL new data: flow to serve
};

} // namespace

struct engine::impl {
  scenario_config cfg;
  engine_options  opt;
  cell_layout     layout;
  mcs_table       mcs = mcs_table::builtin();
  link_model      link;

  std::mt19937_64 rng_drop, rng_traffic, rng_decode, rng_control, rng_prio;

  long   t      = 0;
  long   t_end  = 0;
  double tti_s  = 0;
  int    n_ues  = 0;
  int    n_cells = 0;
  int    n_sb   = 0;
  int    n_spec = 0;
  std::vector<int> sb_prbs;

  std::vector<vec2>              positions;
  std::vector<int>               serving;
  std::vector<std::vector<int>>  cell_ues;
  std::vector<int>               prio;
  std::vector<double>            wb_sinr_db;
  std::vector<aggregation_group> groups;
  std::vector<flow_route>        routes;
  std::vector<relay_link>        relays;

  std::vector<flow_inst>                      flows;
  std::vector<int>                            src_flow;  // (ue, spec) -> flow receiving its arrivals
  std::vector<std::array<std::vector<int>, 2>> ue_flows;  // radio ue -> flows by direction

  // uplink reporting
  std::vector<bsr_table>  tables;
  std::deque<bsr_pending> reports;
  std::vector<bytes_t>    est_upper, est_ref, granted_total;
  std::vector<char>       ul_nonempty;
  std::vector<app_stats>  stats;
  std::vector<bytes_t>    stats_last;

  // channel state
  int                 cqi_slots = 1;
  std::vector<double> sinr[2];      // ue x sb, linear, current TTI
  std::vector<int>    cqi_hist[2];  // slot x ue x sb
  std::vector<double> ctrl_sinr_db;
  std::vector<int>    ul_prev, ul_cur;  // cell x sb -> ue

  // mac
  pf_state                           pf;
  harq_manager                       harq;
  std::vector<std::array<int, 2>>    harq_pending;
  std::vector<std::vector<fb_event>> fb_ring;
  std::vector<std::deque<std::pair<int, int>>> deferred;  // cell -> (ue, dir)
  std::vector<sps_config>            sps;
  std::vector<std::array<int, 2>>    sps_mcs;
  control_params                     ctrl;
  std::vector<std::array<double, 2>> served;

  std::vector<grant> last;
  run_report         rep;
  long               next_packet = 0;

  impl(const scenario_config& c, engine_options o);

  std::span<const int> cqi_now(int d, int ue) const
  {
    long slot_t = std::max(0L, t - cfg.cqi_delay_tti);
    int  slot   = static_cast<int>(slot_t % cqi_slots);
    return {cqi_hist[d].data() + (static_cast<std::size_t>(slot) * n_ues + ue) * n_sb, static_cast<std::size_t>(n_sb)};
  }

  bytes_t unsent(int ue, int d) const
  {
    bytes_t s = 0;
    for (int f : ue_flows[ue][d]) {
      s += flows[f].buf.unsent_bytes();
    }
    return s;
  }

  bytes_t estimate(int ue) const
  {
    return std::max<bytes_t>(0, est_upper[ue] - (granted_total[ue] - est_ref[ue]));
  }

  int pick_flow(int ue, int d) const
  {
    int    best      = -1;
    bool   best_crit = false;
    double best_t    = std::numeric_limits<double>::infinity();
    for (int f : ue_flows[ue][d]) {
      const auto& fl = flows[f];
      if (fl.buf.empty()) {
        continue;
      }
      double h = fl.buf.head_arrival();
      if (best < 0 || (fl.critical && !best_crit) || (fl.critical == best_crit && h < best_t)) {
        best      = f;
        best_crit = fl.critical;
        best_t    = h;
      }
    }
    return best;
  }

  void arrivals(double t0, double t1);
  void feedback();
  void complete(flow_inst& f, const packet& p, double now);
  void uplink_reports();
  void channel();
  void schedule_cell(int c);
  void schedule_cell_sps(int c);
  void transmit(grant& g, int flow, bool ctrl_ok, int c);
  void account();
  void check();
  void add_trace(const grant& g);
};

engine::impl::impl(const scenario_config& c, engine_options o) :
  cfg(c),
  opt(o),
  layout(c.deployment),
  link(cfg, layout, c.rng_seed * 7919 + 17),
  rng_drop(make_stream(c.rng_seed, 1)),
  rng_traffic(make_stream(c.rng_seed, 2)),
  rng_decode(make_stream(c.rng_seed, 3)),
  rng_control(make_stream(c.rng_seed, 4)),
  rng_prio(make_stream(c.rng_seed, 5)),
  harq(c.harq_max_tx, c.harq_retx_delay_tti)
{
  validate(cfg);
  if (!cfg.mcs_table_csv.empty()) {
    mcs = mcs_table::load_csv(cfg.mcs_table_csv);
  }
  tti_s   = cfg.tti_seconds();
  t_end   = cfg.tti_count();
  n_cells = static_cast<int>(layout.cells().size());
  n_sb    = cfg.subband_count();
  n_spec  = static_cast<int>(cfg.traffic.size());
  for (int sb = 0; sb < n_sb; ++sb) {
    sb_prbs.push_back(std::min(subband_size_prb, cfg.prb_count() - sb * subband_size_prb));
  }

  positions = drop_ue_positions(cfg, layout, rng_drop);
  n_ues     = static_cast<int>(positions.size());
  link.set_ues(positions, cfg.ue_extra_loss_db);
  serving.resize(n_ues);
  cell_ues.resize(n_cells);
  for (int u = 0; u < n_ues; ++u) {
    int best = 0;
    for (int k = 1; k < n_cells; ++k) {
      if (link.coupling_db(u, k) > link.coupling_db(u, best)) {
        best = k;
      }
    }
    serving[u] = best;
    cell_ues[best].push_back(u);
    wb_sinr_db.push_back(link.wideband_dl_sinr_db(u, best));
  }
  prio = assign_priorities(cfg, wb_sinr_db, rng_prio);

  if (cfg.aggregation_enabled) {
    groups = form_groups(positions, wb_sinr_db, cfg.agg_radius_m, layout, cfg.agg_link_capacity_bps,
                         cfg.agg_hop_latency_ms);
  }
  routes = route_flows(groups, n_ues, cfg.traffic, cfg.aggregation_enabled);
  auto gof = group_of(groups, n_ues);
  for (const auto& g : groups) {
    relays.emplace_back(g.link_capacity_bps, g.hop_latency_ms, cfg.agg_relay_processing_ms);
  }

  ue_flows.resize(n_ues);
  src_flow.resize(static_cast<std::size_t>(n_ues) * n_spec);
  for (const auto& r : routes) {
    flow_inst f;
    const auto& spec = cfg.traffic[r.flow];
    f.spec     = r.flow;
    f.dest     = r.ue;
    f.dir      = dir_index(spec.direction);
    f.critical = spec.priority == priority_class_t::critical;
    f.relay    = r.path == route_path::via_primary;
    f.radio    = f.relay ? r.primary : r.ue;
    f.group    = f.relay ? gof[r.ue] : -1;
    int id     = static_cast<int>(flows.size());
    f.buf      = flow_buffer(id);
    flows.push_back(std::move(f));
    src_flow[static_cast<std::size_t>(r.ue) * n_spec + r.flow] = id;
    ue_flows[flows.back().radio][flows.back().dir].push_back(id);
  }

  rapi_assistance a;
  a.mean_volume_bytes = cfg.rapi_mean_bytes;
  a.alpha_bytes       = cfg.rapi_alpha_bytes;
  a.refinement_factor = cfg.rapi_refinement;
  bsr_table proto     = table_for(cfg, cfg.bsr_scheme == bsr_scheme_t::adaptive8 ? std::optional(a) : std::nullopt);
  tables.assign(n_ues, proto);
  est_upper.assign(n_ues, 0);
  est_ref.assign(n_ues, 0);
  granted_total.assign(n_ues, 0);
  ul_nonempty.assign(n_ues, 0);
  stats.assign(n_ues, app_stats(cfg.app_stats_tau_s));
  stats_last.assign(n_ues, -1);

  cqi_slots = cfg.cqi_delay_tti + 1;
  for (int d = 0; d < 2; ++d) {
    sinr[d].assign(static_cast<std::size_t>(n_ues) * n_sb, 0.0);
    cqi_hist[d].assign(static_cast<std::size_t>(cqi_slots) * n_ues * n_sb, 0);
  }
  ctrl_sinr_db.assign(n_ues, 0.0);
  ul_prev.assign(static_cast<std::size_t>(n_cells) * n_sb, -1);
  ul_cur = ul_prev;

  pf = pf_state(n_ues, cfg.pf_time_constant_tti);
  harq_pending.assign(n_ues, {0, 0});
  fb_ring.resize(cfg.harq_feedback_tti + 1);
  deferred.resize(n_cells);
  ctrl = control_params::from(cfg);
  served.assign(n_ues, {0.0, 0.0});
  sps_mcs.assign(n_ues, {0, 0});
  if (cfg.scheduler_mode == scheduler_mode_t::semi_persistent) {
    sps.resize(n_ues);
    for (int c = 0; c < n_cells; ++c) {
      auto conf = configure_sps(static_cast<int>(cell_ues[c].size()), cfg.sps_period_tti, n_sb, cfg.sps_prb_count,
                                sb_prbs);
      for (std::size_t i = 0; i < conf.size(); ++i) {
        sps[cell_ues[c][i]] = conf[i];
      }
    }
  }

  rep.cfg  = cfg;
  rep.ues.resize(n_ues);
  for (int u = 0; u < n_ues; ++u) {
    rep.ues[u].ue               = u;
    rep.ues[u].cell             = serving[u];
    rep.ues[u].priority         = prio[u];
    rep.ues[u].wideband_sinr_db = wb_sinr_db[u];
  }
  rep.relays.resize(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    rep.relays[g].primary = groups[g].primary;
    rep.ues[groups[g].primary].agg_role = 1;
    for (int s : groups[g].secondaries) {
      rep.ues[s].agg_role = 2;
    }
  }
}

void engine::impl::arrivals(double t0, double t1)
{
  for (int u = 0; u < n_ues; ++u) {
    for (int s = 0; s < n_spec; ++s) {
      const auto& spec = cfg.traffic[s];
      auto        pk   = generate_arrivals(spec, t0, t1, rng_traffic);
      if (pk.empty()) {
        continue;
      }
      auto& f  = flows[src_flow[static_cast<std::size_t>(u) * n_spec + s]];
      auto& ur = rep.ues[u];
      int   d  = dir_index(spec.direction);
      for (auto& p : pk) {
        p.id = next_packet++;
        ur.offered[d] += p.size;
        if (ur.first_arrival[d] < 0) {
          ur.first_arrival[d] = p.arrival_s;
        }
        rep.generated_bytes += p.size;
        f.buf.push(p);
      }
    }
  }
}

void engine::impl::complete(flow_inst& f, const packet& p, double now)
{
  packet_record r;
  r.ue        = f.dest;
  r.flow      = f.spec;
  r.dir       = dir_of(f.dir);
  r.bytes     = p.size;
  r.arrival_s = p.arrival_s;
  r.relayed   = f.relay;
  if (p.delivered_ok()) {
    double when = now;
    if (f.relay) {
      when = relays[f.group].forward(p.size, now);
      rep.relays[f.group].bytes_in += p.size;
    }
    r.delivery_s = when;
    auto& ur     = rep.ues[f.dest];
    ur.delivered[f.dir] += p.size;
    ur.last_delivery[f.dir] = std::max(ur.last_delivery[f.dir], when);
    rep.delivered_bytes += p.size;
  } else {
    r.lost = true;
  }
  rep.packets.push_back(r);
}

void engine::impl::feedback()
{
  auto& slot = fb_ring[t % fb_ring.size()];
  double now = t * tti_s;
  std::vector<fb_event> keep;
  for (const auto& ev : slot) {
    if (ev.tti != t) {
      keep.push_back(ev);
      continue;
    }
    auto res = harq.feedback(ev.harq_id, ev.success, t);
    if (res.outcome == harq_outcome::retransmit) {
      continue;
    }
    const auto& pr = res.process;
    harq_pending[pr.g.ue][dir_index(pr.g.dir)] -= 1;
    if (res.outcome == harq_outcome::dropped) {
      rep.waste.tb_dropped += 1;
    }
    for (const auto& seg : pr.payload) {
      auto& f = flows[seg.flow];
      f.inflight -= seg.bytes;
      auto done = res.outcome == harq_outcome::delivered ? f.buf.credit_delivered(seg, now) : f.buf.credit_lost(seg);
      for (const auto& p : done) {
        complete(f, p, now);
      }
    }
  }
  slot.swap(keep);
}

void engine::impl::uplink_reports()
{
  if (cfg.bsr_scheme == bsr_scheme_t::adaptive8 && cfg.rapi_mode == rapi_mode_t::measured) {
    long period = std::max(1L, std::lround(cfg.rapi_period_ms * 1e-3 / tti_s));
    if (t > 0 && t % period == 0) {
      for (int u = 0; u < n_ues; ++u) {
        rapi_assistance a;
        a.mean_volume_bytes = stats[u].mean();
        a.std_volume_bytes  = stats[u].stddev();
        a.alpha_bytes       = cfg.rapi_alpha_bytes;
        a.refinement_factor = cfg.rapi_refinement;
        tables[u]           = build_adaptive8(a, cfg.bsr_max_bytes);
      }
    }
  }
  bool periodic = t % cfg.bsr_period_tti == 0;
  for (int u = 0; u < n_ues; ++u) {
    bytes_t vol     = unsent(u, UL);
    bool    trigger = periodic || (vol > 0 && !ul_nonempty[u]);
    ul_nonempty[u]  = vol > 0;
    if (!trigger) {
      continue;
    }
    auto    idx   = tables[u].encode(static_cast<double>(vol));
    bytes_t upper = size_ul_grant(idx.index, tables[u]);
    reports.push_back({t + cfg.ul_report_delay_tti, u, upper, granted_total[u]});
    rep.waste.bsr_reports += 1;
    rep.waste.bsr_excess_bytes += over_scheduling_waste(upper, vol);
  }
  while (!reports.empty() && reports.front().due <= t) {
    const auto& r = reports.front();
    est_upper[r.ue] = r.upper;
    est_ref[r.ue]   = r.granted_at_gen;
    reports.pop_front();
  }
}

void engine::impl::channel()
{
  if (t > 0 && t % cfg.fading_update_tti == 0) {
    link.advance_fading();
  }
  std::vector<int> intf(n_cells);
  int              slot = static_cast<int>(t % cqi_slots);
  for (int u = 0; u < n_ues; ++u) {
    int    c   = serving[u];
    double acc = 0;
    for (int sb = 0; sb < n_sb; ++sb) {
      double dl = link.dl_sinr(u, c, sb);
      for (int k = 0; k < n_cells; ++k) {
        intf[k] = ul_prev[static_cast<std::size_t>(k) * n_sb + sb];
      }
      double ul = link.ul_sinr(u, c, sb, intf);
      std::size_t i = static_cast<std::size_t>(u) * n_sb + sb;
      sinr[DL][i]   = dl;
      sinr[UL][i]   = ul;
      double dl_db  = lin_to_db(dl);
      acc += dl_db;
      std::size_t h = (static_cast<std::size_t>(slot) * n_ues + u) * n_sb + sb;
      cqi_hist[DL][h] = sinr_to_cqi(dl_db, mcs, cfg.cqi_backoff_db);
      cqi_hist[UL][h] = sinr_to_cqi(lin_to_db(ul), mcs, cfg.cqi_backoff_db);
    }
    ctrl_sinr_db[u] = acc / n_sb;
  }
  if (t == 0 && cfg.scheduler_mode == scheduler_mode_t::semi_persistent) {
    for (int u = 0; u < n_ues; ++u) {
      for (int d = 0; d < 2; ++d) {
        double acc = 0;
        for (int sb = 0; sb < n_sb; ++sb) {
          acc += lin_to_db(sinr[d][static_cast<std::size_t>(u) * n_sb + sb]);
        }
        sps_mcs[u][d] = select_mcs(sinr_to_cqi(acc / n_sb, mcs, cfg.cqi_backoff_db), mcs).index;
      }
    }
  }
}

void engine::impl::add_trace(const grant& g)
{
  if (!cfg.trace) {
    return;
  }
  rep.sched_trace.push_back(std::to_string(g.tti) + ',' + std::to_string(g.cell) + ',' + std::to_string(g.ue) + ',' +
                            to_string(g.dir) + ',' + std::to_string(g.prb_count) + ',' + std::to_string(g.mcs) + ',' +
                            std::to_string(g.tb_bytes) + ',' + (g.new_tx ? '1' : '0') + ',' +
                            std::to_string(g.harq_id) + '\n');
}

void engine::impl::transmit(grant& g, int flow, bool ctrl_ok, int c)
{
  const int d  = dir_index(g.dir);
  const int ue = g.ue;
  if (!ctrl_ok) {
    rep.waste.control_failed_prbs += g.prb_count;
    return;
  }
  double acc_db = 0;
  for (int sb : g.subbands) {
    acc_db += lin_to_db(sinr[d][static_cast<std::size_t>(ue) * n_sb + sb]);
  }
  double eff = db_to_lin(acc_db / g.subbands.size());

  if (g.new_tx) {
    if (d == UL) {
      granted_total[ue] += g.tb_bytes;
      flow = pick_flow(ue, UL);
    }
    bytes_t              carried = 0;
    std::vector<segment> payload;
    if (flow >= 0) {
      payload = flows[flow].buf.dequeue(g.tb_bytes);
      for (const auto& s : payload) {
        carried += s.bytes;
      }
    }
    bytes_t pad = g.tb_bytes - carried;
    if (cfg.scheduler_mode == scheduler_mode_t::semi_persistent) {
      rep.waste.sps_idle_bytes += pad;
      rep.waste.sps_idle_grants += carried == 0;
    } else {
      (d == UL ? rep.waste.ul_padding_bytes : rep.waste.dl_padding_bytes) += pad;
    }
    if (carried > 0) {
      flows[flow].inflight += carried;
      g.harq_id = harq.open(g, std::move(payload));
      harq_pending[ue][d] += 1;
    }
  }
  if (g.harq_id >= 0) {
    double acc = harq.record_attempt(g.harq_id, eff);
    bool   ok  = decode_success(acc, mcs[g.mcs], rng_decode);
    long   due = t + cfg.harq_feedback_tti;
    fb_ring[due % fb_ring.size()].push_back({due, g.harq_id, ok});
  }

  if (d == UL) {
    for (int sb : g.subbands) {
      ul_cur[static_cast<std::size_t>(c) * n_sb + sb] = ue;
    }
  }
  served[ue][d] += g.tb_bytes;
  rep.ues[ue].scheduled_bytes[d] += g.tb_bytes;
  rep.ues[ue].scheduled_ttis[d] += 1;
  rep.waste.tb_count += 1;
  rep.waste.prb_used += g.prb_count;
  if (opt.collect_tbs) {
    rep.tbs.push_back({static_cast<std::int32_t>(t), static_cast<std::int16_t>(ue), static_cast<std::int16_t>(c),
                       static_cast<std::int32_t>(g.tb_bytes), static_cast<std::int16_t>(g.prb_count),
                       static_cast<std::int8_t>(g.mcs),
                       static_cast<std::int8_t>((g.new_tx ? 1 : 0) | (d == UL ? 2 : 0))});
  }
  add_trace(g);
  last.push_back(g);
}

void engine::impl::schedule_cell(int c)
{
  std::vector<request> reqs;
  std::vector<char>    has_req(static_cast<std::size_t>(n_ues) * 2, 0);
  auto                 key = [&](int ue, int d) { return static_cast<std::size_t>(ue) * 2 + d; };

  for (int d = 0; d < 2; ++d) {
    for (int id : harq.due(t, c, dir_of(d))) {
      int ue = harq.get(id).g.ue;
      if (has_req[key(ue, d)]) {
        continue;  // one grant per UE and direction per TTI
      }
      has_req[key(ue, d)] = 1;
      reqs.push_back({ue, d, id, -1});
    }
  }
  auto demand = [&](int ue, int d) -> bytes_t { return d == DL ? unsent(ue, DL) : estimate(ue); };
  for (auto [ue, d] : deferred[c]) {
    if (!has_req[key(ue, d)] && demand(ue, d) > 0) {
      has_req[key(ue, d)] = 1;
      reqs.push_back({ue, d, -1, -1});
    }
  }
  // new candidates, best PF metric first, DL and UL interleaved
  std::vector<std::pair<double, int>> ranked[2];
  for (int d = 0; d < 2; ++d) {
    for (int ue : cell_ues[c]) {
      if (!has_req[key(ue, d)] && demand(ue, d) > 0) {
        ranked[d].emplace_back(pf_metric(cqi_now(d, ue), pf.average(ue, dir_of(d)), mcs), ue);
      }
    }
    std::stable_sort(ranked[d].begin(), ranked[d].end(), [](auto& a, auto& b) { return a.first > b.first; });
    if (static_cast<int>(ranked[d].size()) > n_sb) {
      ranked[d].resize(n_sb);
    }
  }
  for (std::size_t i = 0; i < std::max(ranked[DL].size(), ranked[UL].size()); ++i) {
    for (int d = 0; d < 2; ++d) {
      if (i < ranked[d].size()) {
        int ue              = ranked[d][i].second;
        has_req[key(ue, d)] = 1;
        reqs.push_back({ue, d, -1, -1});
      }
    }
  }
  for (auto& r : reqs) {
    if (r.harq_id < 0 && r.dir == DL) {
      r.flow = pick_flow(r.ue, DL);
    }
  }

  // control channel
  std::vector<control_request> creqs;
  for (int i = 0; i < static_cast<int>(reqs.size()); ++i) {
    int ue = reqs[i].ue;
    creqs.push_back({i, ue, prio[ue], ctrl_sinr_db[ue]});
    rep.waste.control_cru_requested += aggregation_level(ctrl_sinr_db[ue]);
  }
  auto alloc = allocate(cfg.control_design, ctrl, creqs);
  rep.waste.control_requests += static_cast<long>(reqs.size());
  rep.waste.control_messages += static_cast<long>(alloc.messages.size());
  rep.waste.control_cru_used += alloc.used_cru;
  rep.waste.control_deferrals += static_cast<long>(alloc.deferred.size());

  std::vector<char> admitted(reqs.size(), 0), ctrl_ok(reqs.size(), 0);
  for (const auto& m : alloc.messages) {
    for (int id : m.targets) {
      int  ue  = reqs[id].ue;
      bool ok  = decode_control(m, ctrl_sinr_db[ue], rng_control);
      admitted[id] = 1;
      ctrl_ok[id]  = ok;
      rep.waste.control_failures += !ok;
      if (cfg.trace) {
        rep.control_trace.push_back(std::to_string(t) + ',' + std::to_string(c) + ',' +
                                    (m.stage == control_stage::stage2 ? "stage2" : "dedicated") + ',' +
                                    std::to_string(m.cost) + ',' + std::to_string(ue) + ',' +
                                    to_string(dir_of(reqs[id].dir)) + ',' + (ok ? '1' : '0') + '\n');
      }
    }
  }
  rep.waste.control_grants_sent += static_cast<long>(alloc.admitted.size());

  std::deque<std::pair<int, int>> next_deferred;
  for (int i = 0; i < static_cast<int>(reqs.size()); ++i) {
    if (reqs[i].harq_id < 0 && (!admitted[i] || !ctrl_ok[i])) {
      next_deferred.emplace_back(reqs[i].ue, reqs[i].dir);
    }
  }
  deferred[c].swap(next_deferred);

  // resource allocation, retransmissions first
  for (int d = 0; d < 2; ++d) {
    std::vector<bool>  busy(n_sb, false);
    std::vector<grant> grants;
    std::vector<int>   grant_req;
    for (int i = 0; i < static_cast<int>(reqs.size()); ++i) {
      const auto& r = reqs[i];
      if (r.dir != d || r.harq_id < 0 || !admitted[i]) {
        continue;
      }
      const auto& p    = harq.get(r.harq_id);
      auto        cqi  = cqi_now(d, r.ue);
      std::size_t need = p.g.subbands.size();
      std::vector<int> free;
      for (int sb = 0; sb < n_sb; ++sb) {
        if (!busy[sb]) {
          free.push_back(sb);
        }
      }
      if (free.size() < need) {
        continue;
      }
      std::stable_sort(free.begin(), free.end(), [&](int a, int b) { return cqi[a] > cqi[b]; });
      free.resize(need);
      std::sort(free.begin(), free.end());
      grant g    = p.g;
      g.subbands = free;
      g.tti      = t;
      g.new_tx   = false;
      for (int sb : free) {
        busy[sb] = true;
      }
      grants.push_back(std::move(g));
      grant_req.push_back(i);
    }

    std::vector<pf_candidate> cands;
    std::vector<int>          cand_req;
    for (int i = 0; i < static_cast<int>(reqs.size()); ++i) {
      const auto& r = reqs[i];
      if (r.dir != d || r.harq_id >= 0 || !admitted[i]) {
        continue;
      }
      bytes_t dem = d == DL ? (r.flow >= 0 ? flows[r.flow].buf.unsent_bytes() : 0) : estimate(r.ue);
      if (dem <= 0) {
        continue;
      }
      cands.push_back({r.ue, dem, cqi_now(d, r.ue), pf.average(r.ue, dir_of(d))});
      cand_req.push_back(i);
    }
    auto owner = pf_assign(cands, busy, sb_prbs, mcs, cfg.tti_symbols);
    std::vector<std::vector<int>> sbs(cands.size());
    for (int sb = 0; sb < n_sb; ++sb) {
      if (owner[sb] >= 0) {
        if (opt.check_invariants && busy[sb]) {
          throw invariant_error("subband assigned twice in cell " + std::to_string(c));
        }
        busy[sb] = true;
        sbs[owner[sb]].push_back(sb);
      }
    }
    for (std::size_t k = 0; k < cands.size(); ++k) {
      if (sbs[k].empty()) {
        continue;
      }
      grants.push_back(make_grant(cands[k].ue, c, dir_of(d), std::move(sbs[k]), cands[k].cqi, sb_prbs, mcs,
                                  cfg.tti_symbols, t));
      grant_req.push_back(cand_req[k]);
    }

    if (opt.check_invariants) {
      std::vector<char> used(n_sb, 0);
      for (const auto& g : grants) {
        for (int sb : g.subbands) {
          if (used[sb]++) {
            throw invariant_error("overlapping PRB sets in cell " + std::to_string(c) + " at tti " +
                                  std::to_string(t));
          }
        }
      }
    }
    for (std::size_t k = 0; k < grants.size(); ++k) {
      const auto& r = reqs[grant_req[k]];
      transmit(grants[k], r.flow, ctrl_ok[grant_req[k]], c);
    }
  }
}

void engine::impl::schedule_cell_sps(int c)
{
  for (int d = 0; d < 2; ++d) {
    std::vector<char> used(n_sb, 0);
    for (int ue : cell_ues[c]) {
      const auto& s = sps[ue];
      if (!s.occasion(t) || s.subbands.empty()) {
        continue;
      }
      if (opt.check_invariants) {
        for (int sb : s.subbands) {
          if (used[sb]++) {
            throw invariant_error("overlapping SPS allocations in cell " + std::to_string(c));
          }
        }
      }
      grant g;
      bool  retx = false;
      for (int id : harq.due(t, c, dir_of(d))) {
        if (harq.get(id).g.ue == ue) {
          g        = harq.get(id).g;
          g.tti    = t;
          g.new_tx = false;
          retx     = true;
          break;
        }
      }
      if (!retx) {
        g.ue       = ue;
        g.cell     = c;
        g.dir      = dir_of(d);
        g.tti      = t;
        g.subbands = s.subbands;
        g.prb_count = 0;
        for (int sb : s.subbands) {
          g.prb_count += sb_prbs[sb];
        }
        g.mcs      = sps_mcs[ue][d];
        g.tb_bytes = tb_size(mcs[g.mcs], g.prb_count, cfg.tti_symbols);
      }
      int flow = d == DL ? pick_flow(ue, DL) : -1;
      transmit(g, flow, true, c);
    }
  }
}

void engine::impl::account()
{
  for (int u = 0; u < n_ues; ++u) {
    for (int d = 0; d < 2; ++d) {
      pf.update(u, dir_of(d), served[u][d]);
      served[u][d] = 0;
    }
    bytes_t v = unsent(u, UL);
    if (v != stats_last[u]) {
      stats[u].update(t * tti_s, static_cast<double>(v));
      stats_last[u] = v;
    }
  }
  ul_prev.swap(ul_cur);
  std::fill(ul_cur.begin(), ul_cur.end(), -1);
  for (auto& r : relays) {
    r.advance(t * tti_s);
  }
}

void engine::impl::check()
{
  bytes_t gen = 0, del = 0, lost = 0, uns = 0, fl = 0;
  for (const auto& f : flows) {
    const auto& b = f.buf;
    if (b.in_flight_bytes() != f.inflight || f.inflight < 0) {
      throw invariant_error("byte conservation violated on a flow at tti " + std::to_string(t));
    }
    gen += b.generated_bytes();
    del += b.delivered_bytes();
    lost += b.lost_bytes();
    uns += b.unsent_bytes();
    fl += f.inflight;
  }
  bytes_t harq_bytes = 0;
  for (const auto& [id, p] : harq.processes()) {
    for (const auto& s : p.payload) {
      harq_bytes += s.bytes;
    }
  }
  if (gen != del + lost + uns + fl || fl != harq_bytes || gen != rep.generated_bytes) {
    throw invariant_error("global byte conservation violated at tti " + std::to_string(t));
  }
}

engine::engine(const scenario_config& cfg, engine_options opt) : p_(std::make_unique<impl>(cfg, opt)) {}

engine::~engine() = default;

void engine::step()
{
  auto& s = *p_;
  if (s.t >= s.t_end) {
    return;
  }
  s.last.clear();
  double now = s.t * s.tti_s;
  if (s.t > 0) {
    s.arrivals(now - s.tti_s, now);
  }
  s.feedback();
  s.uplink_reports();
  s.channel();
  for (int u = 0; u < s.n_ues; ++u) {
    for (int d = 0; d < 2; ++d) {
      if (s.unsent(u, d) > 0 || s.harq_pending[u][d] > 0) {
        s.rep.ues[u].demand_ttis[d] += 1;
      }
    }
  }
  for (int c = 0; c < s.n_cells; ++c) {
    if (s.cfg.scheduler_mode == scheduler_mode_t::semi_persistent) {
      s.schedule_cell_sps(c);
    } else {
      s.schedule_cell(c);
    }
  }
  s.account();
  if (s.opt.check_invariants) {
    s.check();
  }
  ++s.t;
}

run_report engine::finish()
{
  auto& s = *p_;
  // packets still queued or in flight are reported undelivered
  for (auto& f : s.flows) {
    for (const auto& p : f.buf.pending()) {
      if (!p.complete() || p.lost > 0 || !p.delivered_ok()) {
        packet_record r;
        r.ue        = f.dest;
        r.flow      = f.spec;
        r.dir       = dir_of(f.dir);
        r.bytes     = p.size;
        r.arrival_s = p.arrival_s;
        r.relayed   = f.relay;
        r.lost      = p.lost > 0;
        s.rep.packets.push_back(r);
      } else {
        s.complete(f, p, p.delivery_s);
      }
    }
  }
  std::stable_sort(s.rep.packets.begin(), s.rep.packets.end(), [](const packet_record& a, const packet_record& b) {
    return a.arrival_s < b.arrival_s || (a.arrival_s == b.arrival_s && a.ue < b.ue);
  });
  for (std::size_t g = 0; g < s.relays.size(); ++g) {
    s.rep.relays[g].delivered = s.relays[g].bytes_delivered();
    s.rep.relays[g].in_flight = s.relays[g].bytes_in_flight();
    s.rep.relays[g].bytes_in  = s.relays[g].bytes_in();
  }
  s.rep.ttis = s.t;
  s.rep.waste.tb_dropped = s.harq.dropped();
  return std::move(s.rep);
}

run_report engine::run()
{
  while (p_->t < p_->t_end) {
    step();
  }
  return finish();
}

long engine::tti() const { return p_->t; }
long engine::tti_count() const { return p_->t_end; }
int  engine::n_ues() const { return p_->n_ues; }
const std::vector<vec2>& engine::positions() const { return p_->positions; }
const std::vector<int>& engine::serving_cells() const { return p_->serving; }
const std::vector<int>& engine::priorities() const { return p_->prio; }
const std::vector<double>& engine::wideband_sinr_db() const { return p_->wb_sinr_db; }
const std::vector<aggregation_group>& engine::groups() const { return p_->groups; }
const std::vector<flow_route>& engine::routes() const { return p_->routes; }
const std::vector<grant>& engine::last_grants() const { return p_->last; }
bytes_t engine::ul_estimate(int ue) const { return p_->estimate(ue); }
bytes_t engine::unsent(int ue, direction_t d) const { return p_->unsent(ue, dir_index(d)); }
const bsr_table& engine::ue_bsr_table(int ue) const { return p_->tables[ue]; }
const app_stats& engine::ue_app_stats(int ue) const { return p_->stats[ue]; }

run_report simulate(const scenario_config& cfg, engine_options opt)
{
  engine e(cfg, opt);
  return e.run();
}

} // namespace xrsim
