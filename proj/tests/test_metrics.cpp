#include "xrsim/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

using namespace xrsim;

namespace {

std::string slurp(const std::filesystem::path& p)
{
  std::ifstream     in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

run_report two_ue_report(double latency_s)
{
  run_report r;
  r.cfg.traffic = {flow_spec{}};
  r.cfg.traffic[0].name            = "video";
  r.cfg.traffic[0].pdb_ms          = 30;
  r.cfg.traffic[0].target_rate_bps = 1e6;
  r.cfg.deployment.site_count      = 1;
  r.cfg.deployment.cells_per_site  = 1;
  r.ttis = 4000;  // one second
  for (int u = 0; u < 2; ++u) {
    ue_record ue;
    ue.ue   = u;
    ue.cell = 0;
    r.ues.push_back(ue);
    for (int k = 0; k < 10; ++k) {
      packet_record p;
      p.ue        = u;
      p.flow      = 0;
      p.bytes     = 100'000;
      p.arrival_s = 0.05 * k;
      if (latency_s >= 0) {
        p.delivery_s = p.arrival_s + latency_s;
        r.ues[u].delivered[0] += p.bytes;
        r.ues[u].last_delivery[0] = p.delivery_s;
      }
      if (r.ues[u].first_arrival[0] < 0) {
        r.ues[u].first_arrival[0] = p.arrival_s;
      }
      r.packets.push_back(p);
    }
  }
  return r;
}

} // namespace

TEST_CASE("percentile convention")
{
  std::vector<double> five{5, 5, 5};
  for (double p : {0.0, 10.0, 50.0, 100.0}) {
    CHECK(percentile(five, p) == 5);
  }
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(percentile(v, 90) == 90);
  CHECK(percentile(v, 0) == 1);
  CHECK(percentile(v, 100) == 100);
  CHECK(percentile(v, 50) == 50);
  CHECK(percentile(v, 0.5) == 1);
  CHECK_THROWS(percentile(std::vector<double>{}, 50));
  CHECK_THROWS(percentile(v, 101));
  CHECK_THROWS(percentile(v, -1));
}

TEST_CASE("ecdf is sorted and its cdf is a step function in [0, 1]")
{
  auto e = make_ecdf("x", "Mbps", {3, 1, 2, 2, 9});
  CHECK(e.values == std::vector<double>{1, 2, 2, 3, 9});
  CHECK(e.cdf(0) == 0);
  CHECK(e.cdf(2) == doctest::Approx(0.6));
  CHECK(e.cdf(100) == 1);
  CHECK(e.quantile(50) == 2);
  double prev = 0;
  for (double x = 0; x < 10; x += 0.25) {
    CHECK(e.cdf(x) >= prev);
    prev = e.cdf(x);
  }
}

TEST_CASE("ue throughput uses the active time")
{
  ue_record u;
  u.delivered[1]     = 1'000'000;
  u.first_arrival[1] = 1.0;
  u.last_delivery[1] = 3.0;
  CHECK(u.throughput_mbps(direction_t::ul) == doctest::Approx(4.0));
  CHECK(u.throughput_mbps(direction_t::dl) == 0);
  u.demand_ttis[0]     = 10;
  u.scheduled_bytes[0] = 5000;
  CHECK(u.tb_bytes_per_demand_tti(direction_t::dl) == 500);
  CHECK(u.tb_bytes_per_demand_tti(direction_t::ul) == 0);
}

TEST_CASE("satisfaction: instant delivery at rate satisfies everyone, nothing delivered satisfies nobody")
{
  auto good = satisfaction_ratio(two_ue_report(0.001), {0.99});
  CHECK(good.aggregate == 1);
  REQUIRE(good.per_cell.size() == 1);
  CHECK(good.per_cell[0] == 1);

  auto none = satisfaction_ratio(two_ue_report(-1), {0.99});
  CHECK(none.aggregate == 0);

  auto late = satisfaction_ratio(two_ue_report(0.031), {0.99});
  CHECK(late.aggregate == 0);

  auto r = two_ue_report(0.001);
  r.cfg.traffic[0].target_rate_bps = 1e12;
  CHECK(satisfaction_ratio(r, {0.99}).aggregate == 0);

  // one of ten packets late: passes at 0.9, fails at 0.99
  r = two_ue_report(0.001);
  r.packets[3].delivery_s = r.packets[3].arrival_s + 0.5;
  auto s = satisfaction_ratio(r, {0.9});
  CHECK(s.aggregate == 1);
  s = satisfaction_ratio(r, {0.99});
  CHECK(s.aggregate == doctest::Approx(0.5));
  CHECK(s.satisfied == std::vector<char>{0, 1});
}

TEST_CASE("satisfaction ignores packets whose budget outlives the run")
{
  auto r = two_ue_report(0.001);
  packet_record p;
  p.ue        = 0;
  p.flow      = 0;
  p.bytes     = 10;
  p.arrival_s = 0.99;  // budget ends after the run
  r.packets.push_back(p);
  CHECK(satisfaction_ratio(r, {0.99}).aggregate == 1);
}

TEST_CASE("export writes the documented files deterministically")
{
  auto r = two_ue_report(0.002);
  r.tbs.push_back({1, 0, 0, 1200, 8, 10, 1});
  r.tbs.push_back({2, 1, 0, 300, 2, 4, 2});
  r.delivered_bytes = 2'000'000;
  auto base = std::filesystem::temp_directory_path() / "xrsim_metrics_test";
  std::filesystem::remove_all(base);
  export_report(r, base / "a");
  export_report(r, base / "b");
  for (const char* f : {"ue_throughput.csv", "pkt_latency.csv", "tb_sizes.csv", "satisfaction.csv", "waste.csv",
                        "manifest.cfg"}) {
    CHECK(std::filesystem::exists(base / "a" / f));
    CHECK(slurp(base / "a" / f) == slurp(base / "b" / f));
  }
  CHECK(slurp(base / "a" / "tb_sizes.csv") ==
        "tti,ue,cell,dir,bytes,prbs,mcs,newtx\n1,0,0,DL,1200,8,10,1\n2,1,0,UL,300,2,4,0\n");
  auto manifest = slurp(base / "a" / "manifest.cfg");
  for (const auto& k : config_keys()) {
    CHECK_MESSAGE(manifest.find(k + " =") != std::string::npos, k);
  }
  auto sat = slurp(base / "a" / "satisfaction.csv");
  CHECK(sat.find("all,1\n") != std::string::npos);

  std::filesystem::remove_all(base);
}

TEST_CASE("export into an unwritable location fails cleanly")
{
  auto r = two_ue_report(0.002);
  CHECK_THROWS_AS(export_report(r, "/proc/xrsim_cannot_write_here"), export_error);
}
