#include "xrsim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace xrsim {

compare_axis parse_compare_axis(const std::string& s)
{
  if (s == "bsr_scheme") {
    return compare_axis::bsr_scheme;
  }
  if (s == "control_design") {
    return compare_axis::control_design;
  }
  if (s == "aggregation") {
    return compare_axis::aggregation;
  }
  throw config_error("axis", "axis: expected bsr_scheme, control_design or aggregation, got '" + s + "'");
}

const char* to_string(compare_axis a)
{
  switch (a) {
    case compare_axis::bsr_scheme:
      return "bsr_scheme";
    case compare_axis::control_design:
      return "control_design";
    case compare_axis::aggregation:
      return "aggregation";
  }
  return "?";
}

namespace {

struct variant_def {
  std::string     name;
  scenario_config cfg;
};

std::vector<variant_def> variants_of(const scenario_config& base, compare_axis axis)
{
  std::vector<variant_def> out;
  switch (axis) {
    case compare_axis::bsr_scheme:
      for (auto s : {bsr_scheme_t::legacy8, bsr_scheme_t::adaptive8, bsr_scheme_t::uniform10}) {
        auto c       = base;
        c.bsr_scheme = s;
        out.push_back({to_string(s), c});
      }
      break;
    case compare_axis::control_design:
      for (auto d : {control_design_t::legacy, control_design_t::two_stage}) {
        auto c           = base;
        c.control_design = d;
        out.push_back({to_string(d), c});
      }
      break;
    case compare_axis::aggregation:
      for (bool on : {false, true}) {
        auto c                = base;
        c.aggregation_enabled = on;
        out.push_back({on ? "on" : "off", c});
      }
      break;
  }
  return out;
}

const char* metric_unit(compare_axis axis)
{
  switch (axis) {
    case compare_axis::bsr_scheme:
      return "Mbps";
    case compare_axis::control_design:
      return "KB";
    case compare_axis::aggregation:
      return "ms";
  }
  return "";
}

std::vector<double> critical_dl_latency(const run_report& r, const std::set<int>& ues)
{
  std::vector<double> out;
  for (const auto& p : r.packets) {
    const auto& f = r.cfg.traffic[p.flow];
    if (f.priority == priority_class_t::critical && f.direction == direction_t::dl && ues.count(p.ue) &&
        p.delivered()) {
      out.push_back(p.latency_ms());
    }
  }
  return out;
}

std::filesystem::path seed_dir(const std::filesystem::path& root, std::uint64_t seed)
{
  return root / ("seed_" + std::to_string(seed));
}

} // namespace

void ensure_writable(const std::filesystem::path& dir)
{
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw export_error("cannot create output directory " + dir.string());
  }
  auto probe = dir / ".xrsim_probe";
  {
    std::ofstream out(probe);
    if (!out) {
      throw export_error("output directory not writable: " + dir.string());
    }
  }
  std::filesystem::remove(probe, ec);
}

compare_result run_compare(const scenario_config& base, compare_axis axis, const experiment_options& opt)
{
  if (opt.seeds.empty()) {
    throw config_error("seed", "seed: at least one seed is required");
  }
  auto defs = variants_of(base, axis);
  for (const auto& d : defs) {
    validate(d.cfg);
  }
  if (opt.out_dir) {
    ensure_writable(*opt.out_dir);
  }

  engine_options eo;
  eo.collect_tbs      = opt.level == export_level::full;
  eo.check_invariants = opt.check_invariants;

  std::vector<std::vector<double>> pooled(defs.size());
  compare_result                   res;
  res.axis  = axis;
  res.seeds = opt.seeds;
  res.variants.resize(defs.size());
  for (std::size_t v = 0; v < defs.size(); ++v) {
    res.variants[v].name         = defs[v].name;
    res.variants[v].cfg          = defs[v].cfg;
    res.variants[v].cfg.rng_seed = opt.seeds.front();
  }

  // aggregation runs "on" first: its groups pick the UEs both variants are measured on
  std::vector<std::size_t> order(defs.size());
  for (std::size_t v = 0; v < defs.size(); ++v) {
    order[v] = axis == compare_axis::aggregation ? defs.size() - 1 - v : v;
  }

  for (auto seed : opt.seeds) {
    std::set<int> secondaries;
    for (auto v : order) {
      auto c     = defs[v].cfg;
      c.rng_seed = seed;
      auto r     = simulate(c, eo);

      std::vector<double> m;
      switch (axis) {
        case compare_axis::bsr_scheme:
          m = r.ue_throughput_mbps(direction_t::ul);
          break;
        case compare_axis::control_design:
          m = r.ue_mean_tb_kbytes();
          break;
        case compare_axis::aggregation:
          if (c.aggregation_enabled) {
            for (const auto& u : r.ues) {
              if (u.agg_role == 2) {
                secondaries.insert(u.ue);
              }
            }
          }
          m = critical_dl_latency(r, secondaries);
          break;
      }
      pooled[v].insert(pooled[v].end(), m.begin(), m.end());
      res.variants[v].satisfaction.push_back(satisfaction_ratio(r, {c.satisfaction_threshold}).aggregate);
      res.variants[v].waste.push_back(r.waste);
      if (opt.out_dir) {
        export_report(r, seed_dir(*opt.out_dir / defs[v].name, seed), opt.level);
      }
    }
  }
  for (std::size_t v = 0; v < defs.size(); ++v) {
    res.variants[v].metric = make_ecdf(defs[v].name, metric_unit(axis), std::move(pooled[v]));
  }
  if (opt.out_dir) {
    write_file_atomic(*opt.out_dir / "compare_ecdf.csv", ecdf_csv(res));
    write_file_atomic(*opt.out_dir / "compare_delta.csv", delta_csv(res));
  }
  return res;
}

std::string ecdf_csv(const compare_result& r)
{
  std::string s = "variant,value,cdf\n";
  for (const auto& v : r.variants) {
    const auto& x = v.metric.values;
    const auto  n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      // one row per distinct value, at its final rank
      if (i + 1 < x.size() && x[i + 1] == x[i]) {
        continue;
      }
      s += v.name + ',' + format_double(x[i]) + ',' + format_double((i + 1) / n) + '\n';
    }
  }
  return s;
}

double relative_gain(const compare_result& r, std::size_t v, double p)
{
  const auto& b = r.variants.front().metric;
  const auto& x = r.variants.at(v).metric;
  if (b.values.empty() || x.values.empty()) {
    return std::nan("");
  }
  double qb = b.quantile(p);
  double qx = x.quantile(p);
  if (qb == 0) {
    return qx == 0 ? 0 : std::nan("");
  }
  return (qx - qb) / qb;
}

std::string delta_csv(const compare_result& r)
{
  std::string s = "percentile";
  for (const auto& v : r.variants) {
    s += ',' + v.name;
  }
  for (std::size_t v = 1; v < r.variants.size(); ++v) {
    s += ",gain_" + r.variants[v].name + "_vs_" + r.variants.front().name;
  }
  s += '\n';
  for (double p : delta_percentiles) {
    s += format_double(p);
    for (const auto& v : r.variants) {
      s += ',' + (v.metric.values.empty() ? std::string("nan") : format_double(v.metric.quantile(p)));
    }
    for (std::size_t v = 1; v < r.variants.size(); ++v) {
      s += ',' + format_double(relative_gain(r, v, p));
    }
    s += '\n';
  }
  return s;
}

bool is_sweepable(const std::string& key)
{
  static const std::set<std::string> fixed = {"ue_positions", "ue_extra_loss_db", "mcs_table_csv",
                                              "bsr_legacy_table_csv", "trace"};
  if (fixed.count(key)) {
    return false;
  }
  if (key.rfind("flow.", 0) == 0) {
    return true;
  }
  auto keys = config_keys();
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

std::vector<sweep_row> run_sweep(const scenario_config& base, const std::string& key,
                                 const std::vector<std::string>& values, const experiment_options& opt)
{
  if (!is_sweepable(key)) {
    throw config_error(key, key + ": not a sweepable key");
  }
  if (values.empty()) {
    throw config_error(key, key + ": no sweep values given");
  }
  if (opt.seeds.empty()) {
    throw config_error("seed", "seed: at least one seed is required");
  }
  std::vector<scenario_config> cfgs;
  for (const auto& v : values) {
    auto c = base;
    apply_override(c, key, v);
    validate(c);
    cfgs.push_back(c);
  }
  if (opt.out_dir) {
    ensure_writable(*opt.out_dir);
  }

  engine_options eo;
  eo.collect_tbs      = opt.level == export_level::full;
  eo.check_invariants = opt.check_invariants;

  std::vector<sweep_row> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sweep_row           row;
    std::vector<double> dl, ul;
    row.value = values[i];
    for (auto seed : opt.seeds) {
      auto c     = cfgs[i];
      c.rng_seed = seed;
      auto r     = simulate(c, eo);
      auto d     = r.ue_throughput_mbps(direction_t::dl);
      auto u     = r.ue_throughput_mbps(direction_t::ul);
      dl.insert(dl.end(), d.begin(), d.end());
      ul.insert(ul.end(), u.begin(), u.end());
      row.satisfaction += satisfaction_ratio(r, {c.satisfaction_threshold}).aggregate;
      ++row.runs;
      if (opt.out_dir) {
        export_report(r, seed_dir(*opt.out_dir / (key + "=" + values[i]), seed), opt.level);
      }
    }
    row.satisfaction /= row.runs;
    const double ps[3] = {10, 50, 90};
    for (int k = 0; k < 3; ++k) {
      row.dl_mbps[k] = dl.empty() ? std::nan("") : percentile(dl, ps[k]);
      row.ul_mbps[k] = ul.empty() ? std::nan("") : percentile(ul, ps[k]);
    }
    rows.push_back(row);
  }
  if (opt.out_dir) {
    write_file_atomic(*opt.out_dir / "sweep_summary.csv", sweep_csv(key, rows));
  }
  return rows;
}

std::string sweep_csv(const std::string& key, const std::vector<sweep_row>& rows)
{
  std::string s = key + ",runs,satisfaction,dl_p10_mbps,dl_p50_mbps,dl_p90_mbps,ul_p10_mbps,ul_p50_mbps,ul_p90_mbps\n";
  for (const auto& r : rows) {
    s += r.value + ',' + std::to_string(r.runs) + ',' + format_double(r.satisfaction);
    for (double x : r.dl_mbps) {
      s += ',' + format_double(x);
    }
    for (double x : r.ul_mbps) {
      s += ',' + format_double(x);
    }
    s += '\n';
  }
  return s;
}

} // namespace xrsim
