#include "xrsim/traffic.hpp"

#include <doctest.h>

#include <cmath>

using namespace xrsim;

TEST_CASE("poisson arrival counts")
{
  flow_spec       f;
  std::mt19937_64 rng(1);
  double          total = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto a = generate_arrivals(f, 0, 10, rng);
    total += a.size();
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].arrival_s >= 0);
      CHECK(a[i].arrival_s < 10);
      if (i) {
        CHECK(a[i].arrival_s >= a[i - 1].arrival_s);
      }
    }
  }
  CHECK(total / 1000 == doctest::Approx(100).epsilon(0.03));
  CHECK(generate_arrivals(f, 3, 3, rng).empty());
}

TEST_CASE("offered load of the default profile")
{
  auto   flows = scenario_config::default_traffic();
  double video = flows[0].rate_pps * flows[0].packet_size_bytes;
  CHECK(video == 10e6);
  double ul = 0, sum = 0;
  for (const auto& f : flows) {
    sum += f.rate_pps * f.packet_size_bytes;
    if (f.direction == direction_t::ul) {
      ul += f.rate_pps * f.packet_size_bytes;
    }
  }
  CHECK(ul == 10e6 + 100 * 100);

  // superposition: empirical total offered load equals the sum of the per-flow loads
  std::mt19937_64 rng(4);
  double          bytes = 0;
  for (const auto& f : flows) {
    for (auto& p : generate_arrivals(f, 0, 200, rng)) {
      bytes += p.size;
    }
  }
  CHECK(bytes / 200 == doctest::Approx(sum).epsilon(0.05));
}

TEST_CASE("seeded arrivals are reproducible")
{
  flow_spec       f;
  std::mt19937_64 a(9), b(9);
  auto            x = generate_arrivals(f, 0, 5, a);
  auto            y = generate_arrivals(f, 0, 5, b);
  REQUIRE(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(x[i].arrival_s == y[i].arrival_s);
  }
}

TEST_CASE("buffered volume arithmetic")
{
  flow_buffer fb(3);
  CHECK(fb.unsent_bytes() == 0);
  packet p;
  p.size = 1'000'000;
  fb.push(p);
  CHECK(fb.unsent_bytes() == 1'000'000);
  auto segs = fb.dequeue(400'000);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].flow == 3);
  CHECK(segs[0].bytes == 400'000);
  CHECK(fb.unsent_bytes() == 600'000);
  CHECK(fb.in_flight_bytes() == 400'000);
  auto done = fb.credit_delivered(segs[0], 0.01);
  CHECK(done.empty());
  CHECK(fb.pending().front().remaining() == 600'000);
}

TEST_CASE("segmentation across packets, out-of-order completion")
{
  flow_buffer fb(0);
  for (int i = 0; i < 3; ++i) {
    packet p;
    p.size      = 100;
    p.arrival_s = i * 0.001;
    fb.push(p);
  }
  auto s1 = fb.dequeue(150);  // 100 of #0, 50 of #1
  auto s2 = fb.dequeue(150);  // 50 of #1, 100 of #2
  REQUIRE(s1.size() == 2);
  REQUIRE(s2.size() == 2);
  CHECK(fb.unsent_bytes() == 0);
  CHECK(std::isinf(fb.head_arrival()));

  // second TB decodes first: #2 done but stays queued behind #0/#1
  CHECK(fb.credit_delivered(s2[1], 0.005).empty());
  CHECK(fb.credit_delivered(s2[0], 0.005).empty());
  auto done = fb.credit_delivered(s1[0], 0.006);
  REQUIRE(done.size() == 1);
  CHECK(done[0].seq == 0);
  done = fb.credit_lost(s1[1]);
  REQUIRE(done.size() == 2);
  CHECK(done[0].seq == 1);
  CHECK_FALSE(done[0].delivered_ok());
  CHECK(done[1].seq == 2);
  CHECK(done[1].delivered_ok());
  CHECK(done[1].delivery_s == 0.005);
  CHECK(fb.generated_bytes() == fb.delivered_bytes() + fb.lost_bytes() + fb.unsent_bytes() + fb.in_flight_bytes());
  CHECK(fb.in_flight_bytes() == 0);
}

TEST_CASE("conservation under random service")
{
  flow_spec       f;
  f.packet_size_bytes = 7000;
  f.rate_pps          = 2000;
  flow_buffer     fb(0);
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> tb(0, 20000);
  std::bernoulli_distribution        ok(0.9);
  std::vector<std::vector<segment>>  inflight;
  for (int t = 0; t < 4000; ++t) {
    for (auto& p : generate_arrivals(f, t * 0.25e-3, (t + 1) * 0.25e-3, rng)) {
      fb.push(p);
    }
    if (inflight.size() > 3) {
      bool pass = ok(rng);
      for (auto& s : inflight.front()) {
        if (pass) {
          fb.credit_delivered(s, t * 0.25e-3);
        } else {
          fb.credit_lost(s);
        }
      }
      inflight.erase(inflight.begin());
    }
    inflight.push_back(fb.dequeue(tb(rng)));
    CHECK(fb.generated_bytes() == fb.delivered_bytes() + fb.lost_bytes() + fb.unsent_bytes() + fb.in_flight_bytes());
    CHECK(fb.in_flight_bytes() >= 0);
    for (const auto& p : fb.pending()) {
      CHECK(p.remaining() >= 0);
      CHECK(p.remaining() <= p.size);
    }
  }
}

TEST_CASE("app stats: constant and alternating levels")
{
  app_stats s(1.0);
  for (int i = 0; i <= 10000; ++i) {
    s.update(i * 1e-3, 5e6);
  }
  CHECK(s.mean() == doctest::Approx(5e6));
  CHECK(s.stddev() == doctest::Approx(0).epsilon(1e-9));

  app_stats alt(1.0);
  for (int i = 0; i <= 20000; ++i) {
    alt.update(i * 1e-3, i % 2 ? 2e6 : 6e6);
  }
  CHECK(alt.mean() == doctest::Approx(4e6).epsilon(0.01));
  CHECK(alt.stddev() == doctest::Approx(2e6).epsilon(0.02));
  CHECK(alt.window_s() == 1.0);
  CHECK(alt.last_report_s() == doctest::Approx(20.0));
}

TEST_CASE("app stats track the mean backlog of a poisson queue")
{
  // 1 MB packets at 10/s drained at 20 MB/s: M/D/1 with rho = 0.5.
  // Pollaczek-Khinchine mean unfinished work = lambda E[S^2] / (2 (1 - rho)) seconds of work.
  const double lambda = 10, rate = 20e6, size = 1e6, tti = 0.25e-3;
  const double es2    = (size / rate) * (size / rate);
  const double oracle = lambda * es2 / (2 * (1 - lambda * size / rate)) * rate;
  CHECK(oracle == doctest::Approx(0.5e6));

  flow_spec f;
  f.rate_pps          = lambda;
  f.packet_size_bytes = static_cast<bytes_t>(size);
  flow_buffer     fb(0);
  app_stats       st(1.0);
  std::mt19937_64 rng(31);
  const long      n = static_cast<long>(400 / tti);
  double          acc = 0;
  for (long t = 0; t < n; ++t) {
    double t0 = t * tti;
    bool   changed = false;
    for (auto& p : generate_arrivals(f, t0, t0 + tti, rng)) {
      fb.push(p);
      changed = true;
    }
    if (!fb.empty()) {
      for (auto& s : fb.dequeue(static_cast<bytes_t>(rate * tti))) {
        fb.credit_delivered(s, t0);
      }
      changed = true;
    }
    if (changed) {
      st.update(t0, static_cast<double>(fb.unsent_bytes()));
    }
    acc += st.mean();
  }
  CHECK(acc / n == doctest::Approx(oracle).epsilon(0.2));
  CHECK(st.mean() >= 0);
  CHECK(st.stddev() >= 0);
}
