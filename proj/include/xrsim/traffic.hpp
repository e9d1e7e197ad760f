#pragma once

#include "xrsim/config.hpp"

#include <deque>
#include <limits>
#include <random>
#include <vector>

namespace xrsim {

struct packet {
  long    id           = 0;
  int     flow         = 0;  // flow instance (ue x flow spec)
  long    seq          = 0;  // per-flow sequence number
  bytes_t size         = 0;
  double  arrival_s    = 0;
  double  delivery_s   = std::numeric_limits<double>::quiet_NaN();
  bytes_t delivered    = 0;
  bytes_t lost         = 0;

  bytes_t remaining() const { return size - delivered; }
  bool    complete() const { return delivered + lost == size; }
  bool    delivered_ok() const { return lost == 0 && delivered == size; }
};

//! Poisson arrivals in [t0, t1): count ~ Poisson(rate * (t1 - t0)), instants uniform.
std::vector<packet> generate_arrivals(const flow_spec& flow, double t0, double t1, std::mt19937_64& rng);

//! Bytes of one packet carried by a transport block.
struct segment {
  int     flow;
  long    seq;
  bytes_t bytes;
};

//! Transmit-side queue of one flow instance. Packets stay queued until every
//! byte is either delivered or lost; completion may be out of order under HARQ.
class flow_buffer
{
public:
  explicit flow_buffer(int flow_id = 0) : flow_id_(flow_id) {}

  void push(packet p);

  //! Takes up to `max_bytes` head-of-line unsent bytes.
  std::vector<segment> dequeue(bytes_t max_bytes);

  //! Returns the packets that became complete.
  std::vector<packet> credit_delivered(const segment& s, double t);
  std::vector<packet> credit_lost(const segment& s);

  bytes_t unsent_bytes() const { return unsent_; }
  bytes_t generated_bytes() const { return generated_; }
  bytes_t delivered_bytes() const { return delivered_; }
  bytes_t lost_bytes() const { return lost_; }
  bytes_t in_flight_bytes() const { return generated_ - delivered_ - lost_ - unsent_; }
  bool    empty() const { return unsent_ == 0; }

  //! Arrival time of the oldest packet with unsent bytes.
  double head_arrival() const;

  const std::deque<packet>& pending() const { return pending_; }

private:
  packet&             find(long seq);
  std::vector<packet> pop_complete();

  int                flow_id_;
  long               next_seq_  = 0;
  std::deque<packet> pending_;
  std::size_t        head_      = 0;  // first packet with unsent bytes
  bytes_t            head_sent_ = 0;  // bytes of pending_[head_] already dequeued
  bytes_t            unsent_    = 0;
  bytes_t            generated_ = 0;
  bytes_t            delivered_ = 0;
  bytes_t            lost_      = 0;
};

//! Exponentially weighted, time-weighted mean and standard deviation of a
//! piecewise-constant signal (the buffered volume), sampled at change events.
class app_stats
{
public:
  explicit app_stats(double tau_s = 1.0) : tau_(tau_s) {}

  //! Records that the signal changed to `value` at time `t`.
  void update(double t, double value);

  double mean() const { return mean_; }
  double stddev() const;
  double window_s() const { return tau_; }
  double last_report_s() const { return last_t_; }
  long   samples() const { return samples_; }

private:
  double tau_;
  double mean_    = 0;
  double var_     = 0;
  double last_t_  = 0;
  double last_v_  = 0;
  long   samples_ = 0;
};

} // namespace xrsim
