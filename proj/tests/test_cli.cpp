#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path work = fs::temp_directory_path() / "xrsim_cli_test";

// runs the CLI, stdout and stderr go to files under `work`
int xrsim(const std::string& args, const std::string& env = "")
{
  std::string cmd = env + " " XRSIM_BIN " " + args + " >" + (work / "stdout").string() + " 2>" +
                    (work / "stderr").string();
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p)
{
  std::ifstream     in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string quick = "--set sim_duration_s=0.05 --set cells_per_site=1 --set ues_per_cell_mean=2";

struct fresh_dir {
  fresh_dir()
  {
    fs::remove_all(work);
    fs::create_directories(work);
  }
  ~fresh_dir() { fs::remove_all(work); }
};

} // namespace

TEST_CASE_FIXTURE(fresh_dir, "validate: exit 0 on a good config, 1 naming the key on a bad one")
{
  CHECK(xrsim("validate " + quick) == 0);
  CHECK(slurp(work / "stdout").find("sim_duration_s = 0.05") != std::string::npos);

  CHECK(xrsim("validate --set control_pool_cru=2") == 1);
  auto err = slurp(work / "stderr");
  CHECK(err.find("config") != std::string::npos);
  CHECK(err.find("control_pool_cru") != std::string::npos);

  CHECK(xrsim("validate --set no_such_key=1") == 1);
  CHECK(xrsim("validate -c " + (work / "missing.cfg").string()) == 1);
  CHECK(xrsim("frobnicate") == 1);
}

TEST_CASE_FIXTURE(fresh_dir, "run: deterministic per seed, overrides reach the manifest")
{
  REQUIRE(xrsim("run " + quick + " --seed 4 -o " + (work / "a").string()) == 0);
  REQUIRE(xrsim("run " + quick + " --seed 4 -o " + (work / "b").string()) == 0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(work / "a" / "seed_4")) {
    ++files;
    CHECK(slurp(e.path()) == slurp(work / "b" / "seed_4" / e.path().filename()));
  }
  CHECK(files == 6);

  REQUIRE(xrsim("run " + quick + " --set bsr_scheme=adaptive8 -o " + (work / "c").string()) == 0);
  auto manifest = slurp(work / "c" / "seed_1" / "manifest.cfg");
  CHECK(manifest.find("bsr_scheme = adaptive8") != std::string::npos);
}

TEST_CASE_FIXTURE(fresh_dir, "run: unwritable output directory exits 2")
{
  CHECK(xrsim("run " + quick + " -o /proc/xrsim_out") == 2);
  CHECK(slurp(work / "stderr").find("output directory") != std::string::npos);
}

TEST_CASE_FIXTURE(fresh_dir, "default output root comes from the environment")
{
  auto root = work / "envroot";
  REQUIRE(xrsim("run " + quick, "XRSIM_OUT=" + root.string()) == 0);
  CHECK(fs::exists(root / "seed_1" / "manifest.cfg"));
}

TEST_CASE_FIXTURE(fresh_dir, "sweep: one summary row per value, non-sweepable key exits 1")
{
  REQUIRE(xrsim("sweep " + quick + " --key ues_per_cell_mean --values 1,2,3 -o " + (work / "s").string()) == 0);
  auto summary = slurp(work / "s" / "sweep_summary.csv");
  std::istringstream in(summary);
  std::string        line;
  int                rows = 0;
  std::getline(in, line);
  CHECK(line.rfind("ues_per_cell_mean,runs,satisfaction,", 0) == 0);
  while (std::getline(in, line)) {
    ++rows;
  }
  CHECK(rows == 3);
  CHECK(fs::exists(work / "s" / "ues_per_cell_mean=2" / "seed_1" / "manifest.cfg"));

  CHECK(xrsim("sweep " + quick + " --key ue_positions --values 1:2 -o " + (work / "t").string()) == 1);
  CHECK(xrsim("sweep " + quick + " --key bogus --values 1 -o " + (work / "t").string()) == 1);
}

TEST_CASE_FIXTURE(fresh_dir, "compare: three BSR variants on identical seeds with a delta table")
{
  auto out = work / "cmp";
  REQUIRE(xrsim("compare " + quick + " --axis bsr_scheme --seed 5 --seed 6 -o " + out.string()) == 0);

  std::set<std::string> variants;
  std::istringstream    ecdf(slurp(out / "compare_ecdf.csv"));
  std::string           line;
  std::getline(ecdf, line);
  CHECK(line == "variant,value,cdf");
  std::string prev_variant;
  double      prev_value = -1;
  while (std::getline(ecdf, line)) {
    auto   v     = line.substr(0, line.find(','));
    double value = std::stod(line.substr(v.size() + 1));
    if (v == prev_variant) {
      CHECK(value > prev_value);
    }
    variants.insert(v);
    prev_variant = v;
    prev_value   = value;
  }
  CHECK(variants == std::set<std::string>{"legacy8", "adaptive8", "uniform10"});

  auto delta = slurp(out / "compare_delta.csv");
  CHECK(delta.find("gain_adaptive8_vs_legacy8") != std::string::npos);
  CHECK(delta.find("\n90,") != std::string::npos);

  for (const char* v : {"legacy8", "adaptive8", "uniform10"}) {
    for (int seed : {5, 6}) {
      auto m = slurp(out / v / ("seed_" + std::to_string(seed)) / "manifest.cfg");
      CHECK(m.find("rng_seed = " + std::to_string(seed)) != std::string::npos);
      CHECK(m.find(std::string("bsr_scheme = ") + v) != std::string::npos);
    }
  }
  CHECK(xrsim("compare " + quick + " --axis colour -o " + out.string()) == 1);
}

TEST_CASE_FIXTURE(fresh_dir, "dump-bsr prints the selected table")
{
  REQUIRE(xrsim("dump-bsr --scheme uniform10") == 0);
  auto csv = slurp(work / "stdout");
  CHECK(csv.find("uniform10") != std::string::npos);
  int lines = 0;
  for (char c : csv) {
    lines += c == '\n';
  }
  CHECK(lines == 1024 + 2);
  CHECK(xrsim("dump-bsr --scheme nine-bit") == 1);
}
