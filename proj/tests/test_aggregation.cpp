#include "xrsim/aggregation.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

using namespace xrsim;

namespace {

scenario_config small()
{
  scenario_config c;
  c.deployment.site_count = 1;
  c.deployment.wraparound = false;
  return c;
}

// distance over every wraparound image, computed directly
double torus_distance(vec2 a, vec2 b, const cell_layout& l)
{
  double best = std::hypot(a.x - b.x, a.y - b.y);
  for (const auto& s : l.wrap_shifts()) {
    best = std::min(best, std::hypot(a.x - b.x - s.x, a.y - b.y - s.y));
  }
  return best;
}

// rebuilds the clustering from the pairwise matrix: seeds taken by descending
// SINR, each claiming every unclaimed neighbour
int oracle_group_count(const std::vector<vec2>& pos, const std::vector<double>& sinr, double r, const cell_layout& l)
{
  const std::size_t n = pos.size();
  std::vector<std::vector<char>> near(n, std::vector<char>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      near[i][j] = i != j && torus_distance(pos[i], pos[j], l) <= r;
    }
  }
  std::set<std::size_t> open;
  for (std::size_t i = 0; i < n; ++i) {
    open.insert(i);
  }
  int groups = 0;
  while (!open.empty()) {
    std::size_t seed = *open.begin();
    for (auto i : open) {
      if (sinr[i] > sinr[seed]) {
        seed = i;
      }
    }
    open.erase(seed);
    int members = 0;
    for (auto it = open.begin(); it != open.end();) {
      if (near[seed][*it]) {
        ++members;
        it = open.erase(it);
      } else {
        ++it;
      }
    }
    groups += members > 0;
  }
  return groups;
}

} // namespace

TEST_CASE("two co-located UEs form one group with the stronger UE as primary")
{
  auto        c = small();
  cell_layout l(c.deployment);
  std::vector<vec2>   pos{{100, 100}, {103, 104}};
  std::vector<double> sinr{5, 18};
  auto                g = form_groups(pos, sinr, 10, l);
  REQUIRE(g.size() == 1);
  CHECK(g[0].primary == 1);
  CHECK(g[0].secondaries == std::vector<int>{0});
  CHECK(g[0].link_capacity_bps > 0);
}

TEST_CASE("UEs farther apart than the radius form no groups")
{
  auto        c = small();
  cell_layout l(c.deployment);
  std::vector<vec2>   pos{{0, 50}, {30, 50}, {60, 50}};
  std::vector<double> sinr{1, 2, 3};
  CHECK(form_groups(pos, sinr, 25, l).empty());
  CHECK(form_groups({}, {}, 25, l).empty());
}

TEST_CASE("default 210-UE drop: group count matches a brute-force clustering")
{
  scenario_config c;
  cell_layout     l(c.deployment);
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    std::mt19937_64 rng(seed);
    auto            pos = drop_ue_positions(c, l, rng);
    REQUIRE(pos.size() == 210);
    std::vector<double>              sinr;
    std::normal_distribution<double> nd(10, 6);
    for (std::size_t i = 0; i < pos.size(); ++i) {
      sinr.push_back(nd(rng));
    }
    for (double r : {25.0, 60.0}) {
      auto g = form_groups(pos, sinr, r, l);
      CHECK(static_cast<int>(g.size()) == oracle_group_count(pos, sinr, r, l));
      std::set<int> seen;
      for (const auto& x : g) {
        CHECK(seen.insert(x.primary).second);
        for (int s : x.secondaries) {
          CHECK(s != x.primary);
          CHECK(seen.insert(s).second);
          CHECK(sinr[s] <= sinr[x.primary]);
          CHECK(torus_distance(pos[s], pos[x.primary], l) <= r + 1e-9);
        }
      }
    }
  }
}

TEST_CASE("routing rule")
{
  std::vector<flow_spec> flows(2);
  flows[0].name      = "crit";
  flows[0].priority  = priority_class_t::critical;
  flows[0].direction = direction_t::dl;
  flows[1].name      = "be";
  flows[1].priority  = priority_class_t::best_effort;
  flows[1].direction = direction_t::dl;
  aggregation_group g;
  g.primary     = 0;
  g.secondaries = {1};
  std::vector<aggregation_group> groups{g};

  auto off = route_flows(groups, 3, flows, false);
  for (const auto& r : off) {
    CHECK(r.path == route_path::direct);
  }
  auto on = route_flows(groups, 3, flows, true);
  REQUIRE(on.size() == 6);
  int via = 0;
  for (const auto& r : on) {
    if (r.path == route_path::via_primary) {
      ++via;
      CHECK(r.ue == 1);
      CHECK(r.flow == 0);
      CHECK(r.primary == 0);
    }
  }
  CHECK(via == 1);
  CHECK(route_flows(groups, 3, flows, true).size() == on.size());
  auto again = route_flows(groups, 3, flows, true);
  for (std::size_t i = 0; i < on.size(); ++i) {
    CHECK(again[i].path == on[i].path);
  }

  flows[0].direction = direction_t::ul;
  for (const auto& r : route_flows(groups, 3, flows, true)) {
    CHECK(r.path == route_path::direct);
  }
  CHECK(group_of(groups, 3) == std::vector<int>{0, 0, -1});
}

TEST_CASE("relay link delay arithmetic")
{
  relay_link l(1e9, 1.0, 0.0);
  CHECK(l.added_delay_s(1'000'000) == doctest::Approx(9e-3));
  CHECK(l.added_delay_s(0) == doctest::Approx(1e-3));
  CHECK(l.forward(1'000'000, 2.0) == doctest::Approx(2.009));

  relay_link p(1e9, 1.0, 0.5);
  CHECK(p.added_delay_s(1'000'000) == doctest::Approx(9.5e-3));
}

TEST_CASE("relay link is a FIFO and conserves bytes")
{
  relay_link      l(1e8, 1.0);
  std::mt19937_64 rng(4);
  double          t = 0, last = 0;
  bytes_t         in = 0;
  for (int i = 0; i < 500; ++i) {
    t += std::exponential_distribution<double>(200)(rng);
    bytes_t b = static_cast<bytes_t>(rng() % 200'000);
    double  d = l.forward(b, t);
    CHECK(d >= t + l.added_delay_s(b) - 1e-12);
    CHECK(d >= last);
    last = d;
    in += b;
    l.advance(t);
    CHECK(l.bytes_in() == l.bytes_delivered() + l.bytes_in_flight());
  }
  CHECK(l.bytes_in() == in);
  l.advance(1e9);
  CHECK(l.bytes_in_flight() == 0);
  CHECK(l.bytes_delivered() == in);
}
