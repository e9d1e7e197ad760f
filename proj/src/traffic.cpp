#include "xrsim/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xrsim {

std::vector<packet> generate_arrivals(const flow_spec& flow, double t0, double t1, std::mt19937_64& rng)
{
  std::vector<packet> out;
  if (t1 <= t0) {
    return out;
  }
  std::poisson_distribution<long>        count(flow.rate_pps * (t1 - t0));
  std::uniform_real_distribution<double> when(t0, t1);
  long                                   n = count(rng);
  out.reserve(n);
  for (long i = 0; i < n; ++i) {
    packet p;
    p.size      = flow.packet_size_bytes;
    p.arrival_s = when(rng);
    out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const packet& a, const packet& b) { return a.arrival_s < b.arrival_s; });
  return out;
}

void flow_buffer::push(packet p)
{
  p.flow = flow_id_;
  p.seq  = next_seq_++;
  generated_ += p.size;
  unsent_ += p.size;
  pending_.push_back(p);
}

std::vector<segment> flow_buffer::dequeue(bytes_t max_bytes)
{
  std::vector<segment> out;
  while (max_bytes > 0 && head_ < pending_.size()) {
    packet& p    = pending_[head_];
    bytes_t left = p.size - head_sent_;
    bytes_t take = std::min(left, max_bytes);
    out.push_back({flow_id_, p.seq, take});
    max_bytes -= take;
    unsent_ -= take;
    head_sent_ += take;
    if (head_sent_ == p.size) {
      ++head_;
      head_sent_ = 0;
    }
  }
  return out;
}

packet& flow_buffer::find(long seq)
{
  if (pending_.empty() || seq < pending_.front().seq || seq > pending_.back().seq) {
    throw std::logic_error("flow_buffer: segment for unknown packet");
  }
  return pending_[static_cast<std::size_t>(seq - pending_.front().seq)];
}

std::vector<packet> flow_buffer::pop_complete()
{
  std::vector<packet> done;
  while (!pending_.empty() && head_ > 0 && pending_.front().complete()) {
    done.push_back(pending_.front());
    pending_.pop_front();
    --head_;
  }
  return done;
}

std::vector<packet> flow_buffer::credit_delivered(const segment& s, double t)
{
  packet& p = find(s.seq);
  p.delivered += s.bytes;
  delivered_ += s.bytes;
  if (p.delivered_ok()) {
    p.delivery_s = t;
  }
  return pop_complete();
}

std::vector<packet> flow_buffer::credit_lost(const segment& s)
{
  packet& p = find(s.seq);
  p.lost += s.bytes;
  lost_ += s.bytes;
  return pop_complete();
}

double flow_buffer::head_arrival() const
{
  if (head_ >= pending_.size()) {
    return std::numeric_limits<double>::infinity();
  }
  return pending_[head_].arrival_s;
}

void app_stats::update(double t, double value)
{
  if (samples_ == 0) {
    mean_ = value;
    var_  = 0;
  } else if (t > last_t_) {
    double w     = 1.0 - std::exp(-(t - last_t_) / tau_);
    double delta = last_v_ - mean_;
    mean_ += w * delta;
    var_ = (1.0 - w) * (var_ + w * delta * delta);
  }
  last_t_ = std::max(last_t_, t);
  last_v_ = value;
  ++samples_;
}

double app_stats::stddev() const
{
  return std::sqrt(std::max(var_, 0.0));
}

} // namespace xrsim
