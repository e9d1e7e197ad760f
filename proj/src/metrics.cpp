#include "xrsim/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace xrsim {

double percentile(std::span<const double> values, double p)
{
  if (values.empty()) {
    throw std::invalid_argument("percentile of an empty series");
  }
  if (!(p >= 0 && p <= 100)) {
    throw std::invalid_argument("percentile rank must be in [0, 100]");
  }
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * v.size() - 1e-9));
  rank      = std::clamp<std::size_t>(rank, 1, v.size());
  return v[rank - 1];
}

double ecdf_series::cdf(double x) const
{
  if (values.empty()) {
    return 0;
  }
  auto it = std::upper_bound(values.begin(), values.end(), x);
  return static_cast<double>(it - values.begin()) / values.size();
}

ecdf_series make_ecdf(std::string name, std::string unit, std::vector<double> values)
{
  std::sort(values.begin(), values.end());
  return {std::move(name), std::move(unit), std::move(values)};
}

double ue_record::throughput_mbps(direction_t d) const
{
  int i = d == direction_t::ul;
  if (delivered[i] == 0 || first_arrival[i] < 0 || last_delivery[i] <= first_arrival[i]) {
    return 0;
  }
  return delivered[i] * 8.0 / (last_delivery[i] - first_arrival[i]) / 1e6;
}

double ue_record::tb_bytes_per_demand_tti(direction_t d) const
{
  int i = d == direction_t::ul;
  return demand_ttis[i] > 0 ? static_cast<double>(scheduled_bytes[i]) / demand_ttis[i] : 0.0;
}

std::vector<double> run_report::ue_throughput_mbps(direction_t d) const
{
  std::vector<double> out;
  out.reserve(ues.size());
  for (const auto& u : ues) {
    out.push_back(u.throughput_mbps(d));
  }
  return out;
}

std::vector<double> run_report::ue_mean_tb_kbytes() const
{
  std::vector<double> out;
  out.reserve(ues.size());
  for (const auto& u : ues) {
    out.push_back(0.5 * (u.tb_bytes_per_demand_tti(direction_t::dl) + u.tb_bytes_per_demand_tti(direction_t::ul)) /
                  1000.0);
  }
  return out;
}

std::vector<double> run_report::latencies_ms(int flow, bool relayed_only) const
{
  std::vector<double> out;
  for (const auto& p : packets) {
    if (p.flow == flow && p.delivered() && (!relayed_only || p.relayed)) {
      out.push_back(p.latency_ms());
    }
  }
  return out;
}

satisfaction_result satisfaction_ratio(const run_report& r, const satisfaction_spec& spec)
{
  const int    n_ues   = static_cast<int>(r.ues.size());
  const int    n_flows = static_cast<int>(r.cfg.traffic.size());
  const double end_s   = r.ttis * r.cfg.tti_seconds();

  struct acc {
    long    due = 0, in_time = 0;
    bytes_t bytes = 0;
    double  first = std::numeric_limits<double>::infinity(), last = -1;
  };
  std::vector<acc> a(static_cast<std::size_t>(n_ues) * n_flows);
  for (const auto& p : r.packets) {
    auto&  x   = a[static_cast<std::size_t>(p.ue) * n_flows + p.flow];
    double pdb = r.cfg.traffic[p.flow].pdb_ms;
    x.first    = std::min(x.first, p.arrival_s);
    if (p.delivered()) {
      x.bytes += p.bytes;
      x.last = std::max(x.last, p.delivery_s);
    }
    if (p.arrival_s + pdb * 1e-3 <= end_s) {
      ++x.due;
      if (p.delivered() && p.latency_ms() <= pdb + 1e-9) {
        ++x.in_time;
      }
    }
  }

  satisfaction_result out;
  out.satisfied.assign(n_ues, 0);
  int n_cells = r.cfg.cell_count();
  std::vector<int> total(n_cells, 0), happy(n_cells, 0);
  int              all_happy = 0;
  for (int u = 0; u < n_ues; ++u) {
    bool ok = true;
    for (int f = 0; f < n_flows && ok; ++f) {
      const auto& x = a[static_cast<std::size_t>(u) * n_flows + f];
      if (x.due > 0 && static_cast<double>(x.in_time) / x.due < spec.threshold) {
        ok = false;
      }
      double target = r.cfg.traffic[f].target_rate_bps;
      if (target > 0) {
        double rate = x.last > x.first ? x.bytes * 8.0 / (x.last - x.first) : 0.0;
        ok          = ok && rate >= target;
      }
    }
    out.satisfied[u] = ok;
    int c            = r.ues[u].cell;
    ++total[c];
    happy[c] += ok;
    all_happy += ok;
  }
  for (int c = 0; c < n_cells; ++c) {
    out.per_cell.push_back(total[c] ? static_cast<double>(happy[c]) / total[c]
                                    : std::numeric_limits<double>::quiet_NaN());
  }
  out.aggregate = n_ues ? static_cast<double>(all_happy) / n_ues : 0.0;
  return out;
}

std::string format_double(double v)
{
  if (std::isnan(v)) {
    return "nan";
  }
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content)
{
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw export_error("cannot write " + path.string() + " (directory not writable?)");
    }
    out << content;
    if (!out) {
      throw export_error("write failed for " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw export_error("cannot rename into " + path.string() + ": " + ec.message());
  }
}

void export_report(const run_report& r, const std::filesystem::path& dir, export_level level)
{
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw export_error("cannot create output directory " + dir.string());
  }

  {
    std::string s = "ue,cell,dir,mbps\n";
    for (const auto& u : r.ues) {
      for (auto d : {direction_t::dl, direction_t::ul}) {
        s += std::to_string(u.ue) + ',' + std::to_string(u.cell) + ',' + to_string(d) + ',' +
             format_double(u.throughput_mbps(d)) + '\n';
      }
    }
    write_file_atomic(dir / "ue_throughput.csv", s);
  }
  if (level == export_level::full) {
    std::string s = "flow,ue,dir,bytes,arrival_s,latency_ms,within_pdb\n";
    s.reserve(r.packets.size() * 48);
    for (const auto& p : r.packets) {
      double pdb = r.cfg.traffic[p.flow].pdb_ms;
      s += r.cfg.traffic[p.flow].name + ',' + std::to_string(p.ue) + ',' + to_string(p.dir) + ',' +
           std::to_string(p.bytes) + ',' + format_double(p.arrival_s) + ',' +
           (p.delivered() ? format_double(p.latency_ms()) : std::string()) + ',' +
           (p.delivered() && p.latency_ms() <= pdb + 1e-9 ? '1' : '0') + '\n';
    }
    write_file_atomic(dir / "pkt_latency.csv", s);
  }
  if (level == export_level::full) {
    std::string s = "tti,ue,cell,dir,bytes,prbs,mcs,newtx\n";
    s.reserve(r.tbs.size() * 32);
    for (const auto& t : r.tbs) {
      s += std::to_string(t.tti) + ',' + std::to_string(t.ue) + ',' + std::to_string(t.cell) + ',' +
           to_string(t.dir()) + ',' + std::to_string(t.bytes) + ',' + std::to_string(t.prbs) + ',' +
           std::to_string(t.mcs) + ',' + (t.new_tx() ? '1' : '0') + '\n';
    }
    write_file_atomic(dir / "tb_sizes.csv", s);
  }
  {
    auto        sat = satisfaction_ratio(r, {r.cfg.satisfaction_threshold});
    std::string s   = "cell,ratio\n";
    for (std::size_t c = 0; c < sat.per_cell.size(); ++c) {
      s += std::to_string(c) + ',' + format_double(sat.per_cell[c]) + '\n';
    }
    s += "all," + format_double(sat.aggregate) + '\n';
    write_file_atomic(dir / "satisfaction.csv", s);
  }
  {
    const auto& w = r.waste;
    std::string s = "counter,value\n";
    auto        row = [&](const char* k, long long v) { s += std::string(k) + ',' + std::to_string(v) + '\n'; };
    row("ul_padding_bytes", w.ul_padding_bytes);
    row("dl_padding_bytes", w.dl_padding_bytes);
    row("bsr_excess_bytes", w.bsr_excess_bytes);
    row("bsr_reports", w.bsr_reports);
    row("sps_idle_bytes", w.sps_idle_bytes);
    row("sps_idle_grants", w.sps_idle_grants);
    row("control_failed_prbs", w.control_failed_prbs);
    row("control_messages", w.control_messages);
    row("control_failures", w.control_failures);
    row("control_deferrals", w.control_deferrals);
    row("control_requests", w.control_requests);
    row("control_cru_requested", w.control_cru_requested);
    row("control_cru_used", w.control_cru_used);
    row("control_grants_sent", w.control_grants_sent);
    row("tb_dropped", w.tb_dropped);
    row("tb_count", w.tb_count);
    row("prb_used", w.prb_used);
    row("generated_bytes", r.generated_bytes);
    row("delivered_bytes", r.delivered_bytes);
    for (const auto& rl : r.relays) {
      s += "relay_bytes_in_ue" + std::to_string(rl.primary) + ',' + std::to_string(rl.bytes_in) + '\n';
      s += "relay_delivered_ue" + std::to_string(rl.primary) + ',' + std::to_string(rl.delivered) + '\n';
    }
    write_file_atomic(dir / "waste.csv", s);
  }
  if (level == export_level::full && !r.sched_trace.empty()) {
    std::string s = "tti,cell,ue,dir,prbs,mcs,tb_bytes,newtx,harq_id\n";
    for (const auto& row : r.sched_trace) {
      s += row;
    }
    write_file_atomic(dir / "sched_trace.csv", s);
  }
  if (level == export_level::full && !r.control_trace.empty()) {
    std::string s = "tti,cell,stage,cost,ue,dir,decoded\n";
    for (const auto& row : r.control_trace) {
      s += row;
    }
    write_file_atomic(dir / "control_trace.csv", s);
  }
  write_file_atomic(dir / "manifest.cfg", "# run manifest: reload with -c to reproduce\n" + serialize_config(r.cfg));
}

} // namespace xrsim
