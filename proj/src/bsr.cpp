#include "xrsim/bsr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace xrsim {

namespace {

constexpr bytes_t overflow_upper = std::numeric_limits<bytes_t>::max();

void fix_monotone(std::vector<bytes_t>& b)
{
  for (std::size_t k = 1; k < b.size(); ++k) {
    b[k] = std::max(b[k], b[k - 1] + 1);
  }
}

} // namespace

bsr_table::bsr_table(bsr_scheme_t variant, int index_bits, std::vector<bytes_t> boundaries) :
  variant_(variant), index_bits_(index_bits), boundaries_(std::move(boundaries))
{
  if (index_bits_ < 2 || index_bits_ > 16) {
    throw bsr_error("bsr table: bad index width");
  }
  if (static_cast<int>(boundaries_.size()) != interval_count() + 1) {
    throw bsr_error("bsr table: expected " + std::to_string(interval_count() + 1) + " boundaries, got " +
                    std::to_string(boundaries_.size()));
  }
  if (boundaries_.front() != 0) {
    throw bsr_error("bsr table: first boundary must be 0");
  }
  for (std::size_t k = 1; k < boundaries_.size(); ++k) {
    if (boundaries_[k] <= boundaries_[k - 1]) {
      throw bsr_error("bsr table: boundaries not strictly increasing at " + std::to_string(k));
    }
  }
}

bsr_index bsr_table::encode(double v) const
{
  if (v <= 0) {
    return {0, decode(0)};
  }
  if (v >= static_cast<double>(b_max())) {
    return {overflow_index(), decode(overflow_index())};
  }
  // first boundary strictly greater than v is b_i; then b_{i-1} <= v < b_i
  auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), v,
                             [](double x, bytes_t b) { return x < static_cast<double>(b); });
  int  i  = static_cast<int>(it - boundaries_.begin());
  return {i, decode(i)};
}

bsr_range bsr_table::decode(int index) const
{
  if (index < 0 || index >= index_count()) {
    throw bsr_error("bsr index " + std::to_string(index) + " out of range");
  }
  if (index == 0) {
    return {0, 1};
  }
  if (index == overflow_index()) {
    return {b_max(), overflow_upper};
  }
  return {boundaries_[index - 1], boundaries_[index]};
}

bytes_t bsr_table::step_at(double v) const
{
  auto idx = encode(std::max(v, 0.5));
  if (idx.index == overflow_index()) {
    return b_max();
  }
  return idx.range.width();
}

std::string bsr_table::to_csv() const
{
  std::ostringstream os;
  os << "# bsr table " << to_string(variant_) << ", " << index_bits_ << " bit\n";
  os << "index,lower,upper\n";
  for (int i = 0; i < index_count(); ++i) {
    auto r = decode(i);
    os << i << ',' << r.lower << ',';
    if (i == overflow_index()) {
      os << "inf";
    } else {
      os << r.upper;
    }
    os << '\n';
  }
  return os.str();
}

bsr_table bsr_table::parse_csv(const std::string& text, bsr_scheme_t variant)
{
  std::istringstream                     is(text);
  std::string                            line;
  std::vector<std::pair<long, bytes_t>>  uppers;
  std::vector<std::pair<long, bytes_t>>  lowers;
  bool                                   header = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line[0] == '#') {
      continue;
    }
    if (!header) {
      header = true;
      if (line.rfind("index", 0) == 0) {
        continue;
      }
    }
    std::istringstream ls(line);
    std::string        a, b, c;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c, ',')) {
      throw bsr_error("bsr csv: malformed row '" + line + "'");
    }
    try {
      long idx = std::stol(a);
      lowers.emplace_back(idx, std::stoll(b));
      uppers.emplace_back(idx, c == "inf" ? overflow_upper : std::stoll(c));
    } catch (const std::exception&) {
      throw bsr_error("bsr csv: malformed row '" + line + "'");
    }
  }
  long n = static_cast<long>(lowers.size());
  int  bits = 0;
  while ((1L << bits) < n) {
    ++bits;
  }
  if (n < 4 || (1L << bits) != n) {
    throw bsr_error("bsr csv: row count " + std::to_string(n) + " is not a power of two");
  }
  std::vector<bytes_t> bounds{0};
  for (long i = 1; i < n - 1; ++i) {
    if (lowers[i].first != i) {
      throw bsr_error("bsr csv: rows must be ordered by index");
    }
    if (lowers[i].second != bounds.back()) {
      throw bsr_error("bsr csv: gap or overlap at index " + std::to_string(i));
    }
    bounds.push_back(uppers[i].second);
  }
  return bsr_table(variant, bits, std::move(bounds));
}

bsr_table bsr_table::load_csv(const std::filesystem::path& path, bsr_scheme_t variant)
{
  std::ifstream in(path);
  if (!in) {
    throw bsr_error("cannot open bsr table " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), variant);
}

bsr_table build_legacy8(double b_max)
{
  const int            n = 254;
  const double         r = std::pow(b_max / 10.0, 1.0 / (n - 1));
  std::vector<bytes_t> b(n + 1, 0);
  for (int k = 1; k < n; ++k) {
    b[k] = static_cast<bytes_t>(std::floor(10.0 * std::pow(r, k - 1)));
  }
  b[n] = static_cast<bytes_t>(std::floor(b_max));
  fix_monotone(b);
  return bsr_table(bsr_scheme_t::legacy8, 8, std::move(b));
}

bsr_table build_uniform10(double b_max)
{
  const int            n = 1022;
  std::vector<bytes_t> b(n + 1, 0);
  for (int k = 1; k <= n; ++k) {
    b[k] = static_cast<bytes_t>(std::floor(b_max * k / n));
  }
  return bsr_table(bsr_scheme_t::uniform10, 10, std::move(b));
}

namespace {

struct adaptive_geometry {
  double lo, hi, s, f;
};

adaptive_geometry adaptive_params(const rapi_assistance& a, double b_max)
{
  if (!(a.alpha_bytes > 0) || !(a.refinement_factor > 1) || a.mean_volume_bytes < 0) {
    throw bsr_error("adaptive bsr: need mean >= 0, alpha > 0, refinement > 1");
  }
  double lo = std::max(0.0, a.mean_volume_bytes - a.alpha_bytes);
  double hi = std::min(b_max, a.mean_volume_bytes + a.alpha_bytes);
  if (!(hi > lo)) {
    throw bsr_error("adaptive bsr: assistance range lies outside [0, b_max]");
  }
  double f     = a.refinement_factor;
  double w_in  = hi - lo;
  double w_out = b_max - w_in;
  return {lo, hi, (w_in + w_out / f) / 254.0, f};
}

} // namespace

double adaptive_inside_step(const rapi_assistance& a, double b_max)
{
  return adaptive_params(a, b_max).s;
}

bsr_table build_adaptive8(const rapi_assistance& a, double b_max)
{
  auto         g       = adaptive_params(a, b_max);
  const int    n       = 254;
  const double n_below = g.lo / (g.f * g.s);
  const double n_in    = (g.hi - g.lo) / g.s;

  std::vector<bytes_t> b(n + 1, 0);
  for (int k = 1; k < n; ++k) {
    double v;
    if (k <= n_below) {
      v = k * g.f * g.s;
    } else if (k <= n_below + n_in) {
      v = g.lo + (k - n_below) * g.s;
    } else {
      v = g.hi + (k - n_below - n_in) * g.f * g.s;
    }
    b[k] = static_cast<bytes_t>(std::floor(v));
  }
  b[n] = static_cast<bytes_t>(std::floor(b_max));
  fix_monotone(b);
  return bsr_table(bsr_scheme_t::adaptive8, 8, std::move(b));
}

bsr_table build_table(bsr_scheme_t variant, const std::optional<rapi_assistance>& assistance, double b_max)
{
  switch (variant) {
    case bsr_scheme_t::legacy8:
      return build_legacy8(b_max);
    case bsr_scheme_t::uniform10:
      return build_uniform10(b_max);
    case bsr_scheme_t::adaptive8:
      if (!assistance) {
        throw bsr_error("adaptive bsr: assistance information required");
      }
      return build_adaptive8(*assistance, b_max);
  }
  throw bsr_error("unknown bsr scheme");
}

bsr_table table_for(const scenario_config& cfg, const std::optional<rapi_assistance>& assistance)
{
  if (cfg.bsr_scheme == bsr_scheme_t::legacy8 && !cfg.bsr_legacy_table_csv.empty()) {
    return bsr_table::load_csv(cfg.bsr_legacy_table_csv, bsr_scheme_t::legacy8);
  }
  if (cfg.bsr_scheme == bsr_scheme_t::adaptive8 && !assistance) {
    rapi_assistance a;
    a.mean_volume_bytes = cfg.rapi_mean_bytes;
    a.alpha_bytes       = cfg.rapi_alpha_bytes;
    a.refinement_factor = cfg.rapi_refinement;
    return build_adaptive8(a, cfg.bsr_max_bytes);
  }
  return build_table(cfg.bsr_scheme, assistance, cfg.bsr_max_bytes);
}

} // namespace xrsim
