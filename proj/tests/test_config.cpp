#include "xrsim/config.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace xrsim;

TEST_CASE("empty file gives table defaults")
{
  auto c = parse_config("");
  CHECK(c == scenario_config{});
  CHECK(c.carrier_freq_hz == 2.4e9);
  CHECK(c.bandwidth_hz == 40e6);
  CHECK(c.subcarrier_spacing_hz == 30e3);
  CHECK(c.tti_symbols == 7);
  CHECK(c.tx_antennas == 8);
  CHECK(c.rx_antennas == 2);
  CHECK(c.bs_power_dbm == 43);
  CHECK(c.ue_power_dbm == 23);
  CHECK(c.ue_speed_kmh == 3);
  CHECK(c.deployment.site_count == 7);
  CHECK(c.deployment.cells_per_site == 3);
  CHECK(c.deployment.inter_site_distance_m == 500);
  CHECK(c.deployment.ues_per_cell_mean == 10);
  CHECK(c.cell_count() == 21);
  CHECK(c.prb_count() == 106);
  CHECK(c.subband_count() == 14);
  CHECK(c.tti_seconds() == doctest::Approx(0.25e-3));
}

TEST_CASE("bandwidth_hz = 0 is rejected naming the key")
{
  try {
    parse_config("bandwidth_hz = 0\n");
    FAIL("expected config_error");
  } catch (const config_error& e) {
    CHECK(e.key() == "bandwidth_hz");
  }
}

TEST_CASE("single override leaves everything else at defaults")
{
  auto c     = parse_config("# comment\nues_per_cell_mean = 5\n");
  auto ref   = scenario_config{};
  ref.deployment.ues_per_cell_mean = 5;
  CHECK(c == ref);
}

TEST_CASE("constraint violations")
{
  CHECK_THROWS_AS(parse_config("tti_symbols = 9"), config_error);
  CHECK_THROWS_AS(parse_config("bandwidth_hz = 41e6"), config_error);
  CHECK_THROWS_AS(parse_config("carrier_freq_hz = -1"), config_error);
  CHECK_THROWS_AS(parse_config("no_such_key = 1"), config_error);
  CHECK_THROWS_AS(parse_config("bsr_scheme = legacy9"), config_error);
  CHECK_THROWS_AS(parse_config("this line has no equals"), config_error);
  CHECK_NOTHROW(parse_config("tti_symbols = 14"));
}

TEST_CASE("serialize round trip")
{
  scenario_config c;
  c.bsr_scheme          = bsr_scheme_t::adaptive8;
  c.control_design      = control_design_t::two_stage;
  c.scheduler_mode      = scheduler_mode_t::semi_persistent;
  c.aggregation_enabled = true;
  c.sim_duration_s      = 0.123456789;
  c.rng_seed            = 987654321;
  c.ue_positions        = {{1.5, -2.25}, {100, 0.1}};
  c.ue_extra_loss_db    = {0, 13.7};
  c.traffic[1].rate_pps = 33.3;
  auto back             = parse_config(serialize_config(c));
  CHECK(back == c);
  CHECK(serialize_config(back) == serialize_config(c));
}

TEST_CASE("flow keys replace the default traffic")
{
  auto c = parse_config("flow.v.direction = ul\nflow.v.rate_pps = 5\nflow.v.packet_size_bytes = 2000\n");
  REQUIRE(c.traffic.size() == 1);
  CHECK(c.traffic[0].name == "v");
  CHECK(c.traffic[0].direction == direction_t::ul);
  CHECK(c.traffic[0].packet_size_bytes == 2000);
}

TEST_CASE("apply_override and load_config")
{
  scenario_config c;
  apply_override(c, "bsr_scheme", "uniform10");
  CHECK(c.bsr_scheme == bsr_scheme_t::uniform10);
  CHECK_THROWS_AS(apply_override(c, "bogus", "1"), config_error);

  auto p = std::filesystem::temp_directory_path() / "xrsim_cfg_test.cfg";
  {
    std::ofstream f(p);
    f << "sim_duration_s = 2\n";
  }
  CHECK(load_config(p).sim_duration_s == 2);
  std::filesystem::remove(p);
  CHECK_THROWS_AS(load_config(p), config_error);
}

TEST_CASE("nr prb table")
{
  CHECK(nr_prb_count(40e6, 30e3) == 106);
  CHECK(nr_prb_count(20e6, 15e3) == 106);
  CHECK(nr_prb_count(100e6, 30e3) == 273);
  CHECK_FALSE(nr_prb_count(41e6, 30e3).has_value());
}
