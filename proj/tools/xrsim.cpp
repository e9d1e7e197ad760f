#include "xrsim/bsr.hpp"
#include "xrsim/control.hpp"
#include "xrsim/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

using namespace xrsim;

namespace {

struct common_args {
  std::string                config_path;
  std::vector<std::string>   overrides;
  std::vector<std::uint64_t> seeds;
  std::string                out;
  bool                       full = false;
};

void add_common(CLI::App* app, common_args& a, bool with_out = true)
{
  app->add_option("-c,--config", a.config_path, "scenario file (key = value lines)");
  app->add_option("--set", a.overrides, "override, key=value (repeatable)");
  app->add_option("--seed", a.seeds, "RNG seed (repeatable)");
  if (with_out) {
    app->add_option("-o,--out", a.out, "output directory (default $XRSIM_OUT or ./xrsim_out)");
  }
}

scenario_config load(const common_args& a)
{
  scenario_config c = a.config_path.empty() ? scenario_config{} : load_config(a.config_path);
  for (const auto& kv : a.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw config_error(kv, "--set: expected key=value, got '" + kv + "'");
    }
    apply_override(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  validate(c);
  return c;
}

std::filesystem::path out_root(const common_args& a)
{
  if (!a.out.empty()) {
    return a.out;
  }
  if (const char* env = std::getenv("XRSIM_OUT"); env && *env) {
    return env;
  }
  return "xrsim_out";
}

experiment_options options(const common_args& a, const scenario_config& c)
{
  experiment_options o;
  o.seeds   = a.seeds.empty() ? std::vector<std::uint64_t>{c.rng_seed} : a.seeds;
  o.out_dir = out_root(a);
  o.level   = a.full ? export_level::full : export_level::summary;
  return o;
}

std::vector<std::string> split_values(const std::string& s)
{
  std::vector<std::string> out;
  std::string              cur;
  for (char ch : s + ",") {
    if (ch == ',') {
      if (!cur.empty()) {
        out.push_back(cur);
      }
      cur.clear();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  return out;
}

int fail(const char* module, const std::string& msg, int code)
{
  std::cerr << "xrsim: " << module << " error: " << msg << '\n';
  return code;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"XR-oriented multi-cell RAN simulator"};
  app.require_subcommand(1);

  common_args run_a, sweep_a, cmp_a, dump_a, val_a;

  auto* run = app.add_subcommand("run", "simulate one scenario per seed and write the CSV set");
  add_common(run, run_a);
  run->add_flag("--summary", "write only the per-UE, satisfaction and waste CSVs");

  std::string sweep_key, sweep_values;
  auto*       sweep = app.add_subcommand("sweep", "run a scenario over several values of one key");
  add_common(sweep, sweep_a);
  sweep->add_option("--key", sweep_key, "key to sweep")->required();
  sweep->add_option("--values", sweep_values, "comma-separated values")->required();
  sweep->add_flag("--full", sweep_a.full, "write every CSV family per run");

  std::string axis;
  auto*       cmp = app.add_subcommand("compare", "compare scheme variants on identical seeds");
  add_common(cmp, cmp_a);
  cmp->add_option("--axis", axis, "bsr_scheme | control_design | aggregation")->required();
  cmp->add_flag("--full", cmp_a.full, "write every CSV family per run");

  std::string scheme;
  auto*       dump = app.add_subcommand("dump-bsr", "print a BSR table as CSV");
  add_common(dump, dump_a);
  dump->add_option("--scheme", scheme, "legacy8 | uniform10 | adaptive8 (default: from config)");

  auto* val = app.add_subcommand("validate", "check a scenario and print it normalised");
  add_common(val, val_a, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) {
      auto c = load(run_a);
      auto o = options(run_a, c);
      ensure_writable(*o.out_dir);
      engine_options eo;
      bool summary   = run->count("--summary") > 0;
      eo.collect_tbs = !summary;
      for (auto seed : o.seeds) {
        c.rng_seed = seed;
        auto dir   = *o.out_dir / ("seed_" + std::to_string(seed));
        export_report(simulate(c, eo), dir, summary ? export_level::summary : export_level::full);
        std::cout << dir.string() << '\n';
      }
    } else if (*sweep) {
      auto c    = load(sweep_a);
      auto o    = options(sweep_a, c);
      auto rows = run_sweep(c, sweep_key, split_values(sweep_values), o);
      std::cout << sweep_csv(sweep_key, rows);
    } else if (*cmp) {
      auto c = load(cmp_a);
      auto o = options(cmp_a, c);
      auto r = run_compare(c, parse_compare_axis(axis), o);
      std::cout << delta_csv(r);
    } else if (*dump) {
      if (!scheme.empty()) {
        dump_a.overrides.push_back("bsr_scheme=" + scheme);
      }
      auto c   = load(dump_a);
      auto csv = table_for(c).to_csv();
      if (dump_a.out.empty()) {
        std::cout << csv;
      } else {
        write_file_atomic(dump_a.out, csv);
      }
    } else if (*val) {
      std::cout << serialize_config(load(val_a));
    }
  } catch (const config_error& e) {
    return fail("config", e.what(), 1);
  } catch (const export_error& e) {
    return fail("metrics", e.what(), 2);
  } catch (const bsr_error& e) {
    return fail("bsr", e.what(), 2);
  } catch (const control_error& e) {
    return fail("control", e.what(), 2);
  } catch (const invariant_error& e) {
    return fail("engine", e.what(), 2);
  } catch (const harq_error& e) {
    return fail("scheduler", e.what(), 2);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), 2);
  }
  return 0;
}
