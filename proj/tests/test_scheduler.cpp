#include "xrsim/scheduler.hpp"

#include <doctest.h>

#include <random>

using namespace xrsim;

namespace {

const mcs_table& table()
{
  static const mcs_table t = mcs_table::builtin();
  return t;
}

std::vector<int> sb_prbs_106()
{
  std::vector<int> v(13, 8);
  v.push_back(2);
  return v;
}

} // namespace

TEST_CASE("pf: equal averages, higher instantaneous rate wins")
{
  auto             prbs = sb_prbs_106();
  std::vector<int> cqi_a(14, 15), cqi_b(14, 9);
  pf_candidate     a{0, 1'000'000, cqi_a, 100};
  pf_candidate     b{1, 1'000'000, cqi_b, 100};
  std::vector<pf_candidate> c{a, b};
  auto owner = pf_assign(c, std::vector<bool>(14, false), prbs, table(), 7);
  for (int o : owner) {
    CHECK(o == 0);
  }
  CHECK(pf_metric(cqi_a, 100, table()) > pf_metric(cqi_b, 100, table()));
}

TEST_CASE("pf: single full-buffer UE gets every PRB")
{
  auto                      prbs = sb_prbs_106();
  std::vector<int>          cqi(14, 12);
  std::vector<pf_candidate> c{{3, 50'000'000, cqi, 0}};
  auto                      owner = pf_assign(c, std::vector<bool>(14, false), prbs, table(), 7);
  std::vector<std::vector<int>> sbs(1);
  for (int sb = 0; sb < 14; ++sb) {
    REQUIRE(owner[sb] == 0);
    sbs[0].push_back(sb);
  }
  auto g = make_grant(3, 0, direction_t::dl, sbs[0], cqi, prbs, table(), 7, 0);
  CHECK(g.prb_count == 106);
  CHECK(g.tb_bytes == tb_size(table()[g.mcs], 106, 7));
}

TEST_CASE("pf: demand limits the subbands taken, busy subbands are skipped")
{
  auto             prbs = sb_prbs_106();
  std::vector<int> cqi(14, 10);
  bytes_t          one  = tb_size(select_mcs(10, table()), 8, 7);
  std::vector<pf_candidate> c{{0, one + 1, cqi, 1}};
  std::vector<bool>         busy(14, false);
  busy[0] = true;
  auto owner = pf_assign(c, busy, prbs, table(), 7);
  CHECK(owner[0] == -1);
  CHECK(owner[1] == 0);
  CHECK(owner[2] == 0);
  CHECK(owner[3] == -1);
}

TEST_CASE("pf state decays toward zero and rejects bad constants")
{
  pf_state s(2, 10);
  s.update(0, direction_t::ul, 1000);
  double a = s.average(0, direction_t::ul);
  CHECK(a == doctest::Approx(100));
  for (int i = 0; i < 50; ++i) {
    s.update(0, direction_t::ul, 0);
  }
  CHECK(s.average(0, direction_t::ul) < a);
  CHECK(s.average(0, direction_t::ul) >= 0);
  CHECK(s.average(0, direction_t::dl) == 0);
  CHECK_THROWS(pf_state(1, 0.5));
}

TEST_CASE("pf long-run fairness for two symmetric full-buffer UEs")
{
  auto            prbs = sb_prbs_106();
  pf_state        pf(2, 100);
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> cq(4, 20);
  double served[2] = {0, 0};
  for (int t = 0; t < 10000; ++t) {
    std::vector<int> c0(14), c1(14);
    for (int sb = 0; sb < 14; ++sb) {
      c0[sb] = cq(rng);
      c1[sb] = cq(rng);
    }
    std::vector<pf_candidate> c{{0, 1'000'000'000, c0, pf.average(0, direction_t::dl)},
                                {1, 1'000'000'000, c1, pf.average(1, direction_t::dl)}};
    auto   owner = pf_assign(c, std::vector<bool>(14, false), prbs, table(), 7);
    double now[2] = {0, 0};
    for (int sb = 0; sb < 14; ++sb) {
      const auto& cq_ = owner[sb] == 0 ? c0 : c1;
      now[owner[sb]] += static_cast<double>(tb_size(select_mcs(cq_[sb], table()), prbs[sb], 7));
    }
    for (int u = 0; u < 2; ++u) {
      pf.update(u, direction_t::dl, now[u]);
      served[u] += now[u];
    }
  }
  CHECK(served[0] / served[1] == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("ul grant sizing from the decoded upper bound")
{
  auto legacy = build_legacy8();
  auto idx    = legacy.encode(6e6);
  auto range  = legacy.decode(idx.index);
  REQUIRE(range.contains(6e6));
  bytes_t est = size_ul_grant(idx.index, legacy);
  CHECK(est == range.upper - 1);
  CHECK(over_scheduling_waste(est, 6'000'000) == range.upper - 1 - 6'000'000);
  CHECK(over_scheduling_waste(100, 200) == 0);

  CHECK(size_ul_grant(0, legacy) == 0);
  CHECK(size_ul_grant(legacy.overflow_index(), legacy) == legacy.b_max());

  // a volume exactly on a boundary wastes less than the step that holds it
  bytes_t b  = legacy.boundaries()[150];
  auto    ib = legacy.encode(static_cast<double>(b));
  CHECK(over_scheduling_waste(size_ul_grant(ib.index, legacy), b) < legacy.step_at(static_cast<double>(b)));

  rapi_assistance a;
  a.mean_volume_bytes = 10e6;
  auto adaptive       = build_adaptive8(a);
  std::mt19937_64 rng(3);
  double step = adaptive_inside_step(a);
  // intervals straddling the edges of the refined range are wider, stay clear of them
  std::uniform_real_distribution<double> u(5e6 + 3 * step, 15e6 - 3 * step);
  for (int i = 0; i < 1000; ++i) {
    double v = u(rng);
    auto   k = adaptive.encode(v);
    CHECK(size_ul_grant(k.index, adaptive) - v <= step + 1);
    CHECK(size_ul_grant(k.index, adaptive) >= v);
  }
  CHECK(step == doctest::Approx(132.9e3).epsilon(0.01));
}

TEST_CASE("harq chase combining, retransmission timing and drop")
{
  harq_manager h(4, 4);
  grant        g;
  g.ue   = 1;
  g.cell = 2;
  g.dir  = direction_t::ul;
  int id = h.open(g, {segment{0, 0, 100}});
  CHECK(h.get(id).g.harq_id == id);

  double acc = h.record_attempt(id, 2.0);
  CHECK(acc == 2.0);
  h.feedback(id, false, 0);
  CHECK_THROWS_AS(h.feedback(id, false, 1), harq_error);
  CHECK_THROWS_AS(h.get(99), harq_error);

  harq_manager h2(4, 4);
  id = h2.open(g, {});
  double prev = 0;
  for (int k = 0; k < 3; ++k) {
    acc = h2.record_attempt(id, 2.0);
    CHECK(acc > prev);
    prev   = acc;
    auto r = h2.feedback(id, false, 10 * k);
    CHECK(r.outcome == harq_outcome::retransmit);
    CHECK(h2.due(10 * k + 3, 2, direction_t::ul).empty());
    CHECK(h2.due(10 * k + 4, 2, direction_t::ul) == std::vector<int>{id});
    CHECK(h2.due(10 * k + 4, 2, direction_t::dl).empty());
  }
  CHECK(acc == doctest::Approx(6.0));
  h2.record_attempt(id, 2.0);
  CHECK(h2.get(id).acc_sinr == doctest::Approx(8.0));
  auto r = h2.feedback(id, false, 40);
  CHECK(r.outcome == harq_outcome::dropped);
  CHECK(h2.dropped() == 1);
  CHECK(h2.size() == 0);
  CHECK_THROWS_AS(h2.get(id), harq_error);
  CHECK_THROWS_AS(h2.feedback(id, true, 41), harq_error);
}

TEST_CASE("harq: two attempts at equal SINR combine to twice the SINR")
{
  harq_manager h;
  int          id = h.open(grant{}, {});
  h.record_attempt(id, 3.5);
  h.feedback(id, false, 0);
  CHECK(h.record_attempt(id, 3.5) == doctest::Approx(7.0));
  auto r = h.feedback(id, true, 8);
  CHECK(r.outcome == harq_outcome::delivered);
  CHECK(r.process.tx_count == 2);
  CHECK(h.size() == 0);
}

TEST_CASE("harq due list is oldest first")
{
  harq_manager h(4, 1);
  grant        g;
  g.cell = 0;
  std::vector<int> ids;
  for (int i = 0; i < 3; ++i) {
    ids.push_back(h.open(g, {}));
  }
  for (int id : ids) {
    h.record_attempt(id, 1.0);
    h.feedback(id, false, 0);
  }
  CHECK(h.due(1, 0, direction_t::dl) == ids);
}

TEST_CASE("sps recurrences and disjoint allocations")
{
  sps_config c;
  c.period_tti = 8;
  c.offset     = 3;
  std::vector<long> hits;
  for (long t = 0; t < 30; ++t) {
    if (c.occasion(t)) {
      hits.push_back(t);
    }
  }
  CHECK(hits == std::vector<long>{3, 11, 19, 27});
  c.valid_until_tti = 19;
  CHECK(!c.occasion(19));

  auto prbs = sb_prbs_106();
  for (int n : {1, 5, 10, 17, 40}) {
    for (int per_ue : {0, 20, 106}) {
      auto conf = configure_sps(n, 4, 14, per_ue, prbs);
      REQUIRE(conf.size() == static_cast<std::size_t>(n));
      for (int off = 0; off < 4; ++off) {
        std::vector<int> used(14, 0);
        for (const auto& s : conf) {
          if (s.offset != off) {
            continue;
          }
          for (int sb : s.subbands) {
            CHECK(++used[sb] == 1);
          }
        }
      }
    }
  }
  CHECK_THROWS(configure_sps(3, 0, 14, 0, prbs));
}
