#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "joinsample/error.hpp"
#include "joinsample/rng.hpp"

namespace joinsample {

// First index whose running cumulative exceeds u*total (inversion sampling
// over a streamed weight sequence). Tolerates 1e-9 relative slack between the
// scanned total and `total`.
inline size_t inversion_pick(const std::vector<double>& weights, double total, double u) {
  const double target = u * total;
  double cum = 0.0;
  size_t last_positive = weights.size();
  for (size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) last_positive = i;
    cum += weights[i];
    if (cum > target) return i;
  }
  if (last_positive != weights.size() &&
      target - cum <= 1e-9 * std::max(1.0, std::fabs(total))) {
    return last_positive;
  }
  raise(ErrorCategory::Data, "TotalMismatch",
        "weight sequence exhausted below the inversion target");
}

enum class ReservoirMode { ExponentialJumps, PerItemKeys };

// Weighted reservoir of the n largest-key items, keys k_i = u_i^{1/w_i}.
// Computed in log space: v_i = -ln(k_i) ~ Exp(w_i), keep the n smallest v.
// Ties (possible in floating point) break on the earlier stream ordinal.
template <typename T>
class WeightedReservoir {
 public:
  struct Entry {
    T item;
    double weight = 0.0;
    double v = 0.0;  // -ln(key)
    uint64_t ordinal = 0;
  };

  WeightedReservoir(size_t capacity, CounterRng rng,
                    ReservoirMode mode = ReservoirMode::ExponentialJumps)
      : capacity_(capacity), rng_(rng), mode_(mode) {
    if (capacity_ == 0) {
      raise(ErrorCategory::Internal, "EmptyReservoir", "capacity must be positive");
    }
  }

  // W_P grows by `weight` whether or not the item is retained; zero-weight
  // items never enter.
  void offer(const T& item, double weight) {
    total_weight_ += weight;
    if (!(weight > 0.0)) return;
    const uint64_t ordinal = next_ordinal_++;
    if (heap_.size() < capacity_) {
      push_entry({item, weight, rng_.next_exp() / weight, ordinal});
      if (heap_.size() == capacity_ && mode_ == ReservoirMode::ExponentialJumps) {
        arm_jump();
      }
      return;
    }
    complete_ = false;
    if (mode_ == ReservoirMode::PerItemKeys) {
      double v = rng_.next_exp() / weight;
      if (weaker(heap_.front(), Entry{item, weight, v, ordinal})) {
        pop_entry();
        push_entry({item, weight, v, ordinal});
      }
      return;
    }
    skip_weight_ -= weight;
    if (skip_weight_ > 0.0) return;
    // This item crosses the jump boundary: its key is conditioned to beat the
    // current threshold.
    const double v_threshold = heap_.front().v;
    const double floor = std::exp(-v_threshold * weight);
    const double r = floor + rng_.next_unit_positive() * (1.0 - floor);
    double v = -std::log(r) / weight;
    if (!(v < v_threshold)) v = std::nextafter(v_threshold, 0.0);
    pop_entry();
    push_entry({item, weight, v, ordinal});
    arm_jump();
  }

  double total_weight() const { return total_weight_; }
  size_t size() const { return heap_.size(); }

  // True when no offered positive-weight item was ever skipped or evicted.
  bool complete_population() const { return complete_; }

  // Entries in descending key order (ascending v). Leaves the reservoir empty.
  std::vector<Entry> take_sorted() {
    std::vector<Entry> out = std::move(heap_);
    heap_.clear();
    std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) {
      if (a.v != b.v) return a.v < b.v;
      return a.ordinal < b.ordinal;
    });
    return out;
  }

 private:
  // a is weaker than b when a's key is smaller (v larger); earlier ordinals
  // win ties.
  static bool weaker(const Entry& a, const Entry& b) {
    if (a.v != b.v) return a.v > b.v;
    return a.ordinal > b.ordinal;
  }
  static bool heap_less(const Entry& a, const Entry& b) { return weaker(b, a); }

  void push_entry(Entry e) {
    heap_.push_back(std::move(e));
    std::push_heap(heap_.begin(), heap_.end(), &WeightedReservoir::heap_less);
  }
  void pop_entry() {
    std::pop_heap(heap_.begin(), heap_.end(), &WeightedReservoir::heap_less);
    heap_.pop_back();
  }
  void arm_jump() { skip_weight_ = rng_.next_exp() / heap_.front().v; }

  size_t capacity_;
  CounterRng rng_;
  ReservoirMode mode_;
  std::vector<Entry> heap_;  // max-heap on (v, ordinal): front = weakest
  double total_weight_ = 0.0;
  double skip_weight_ = 0.0;
  uint64_t next_ordinal_ = 0;
  bool complete_ = true;
};

// Distinct previously-selected items with a growable cumulative for
// weight-proportional redraws.
template <typename T>
class DistinctDraws {
 public:
  void add(T item, double weight) {
    items_.push_back(std::move(item));
    total_ += weight;
    cumulative_.push_back(total_);
  }

  const T& redraw(double unit) const {
    if (items_.empty()) {
      raise(ErrorCategory::Internal, "EmptyDistinctSet", "redraw from empty set");
    }
    const double target = unit * total_;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    if (it == cumulative_.end()) --it;
    return items_[static_cast<size_t>(it - cumulative_.begin())];
  }

  double total() const { return total_; }
  bool empty() const { return items_.empty(); }
  size_t size() const { return items_.size(); }

 private:
  std::vector<T> items_;
  std::vector<double> cumulative_;
  double total_ = 0.0;
};

// Online multinomial sampler: one stream pass, then n independent draws, each
// item selected with probability weight / W_P. A biased coin decides between
// redrawing among the distinct previous selections and consuming the next
// reservoir entry in descending key order.
template <typename T>
class OnlineMultinomial {
 public:
  OnlineMultinomial(size_t n, CounterRng rng,
                    ReservoirMode mode = ReservoirMode::ExponentialJumps)
      : n_(n),
        reservoir_(n, rng.fork(1), mode),
        draw_rng_(rng.fork(2)) {}

  void offer(const T& item, double weight) { reservoir_.offer(item, weight); }

  double total_weight() const { return reservoir_.total_weight(); }

  std::vector<T> draw_all() {
    const double population_weight = reservoir_.total_weight();
    auto entries = reservoir_.take_sorted();
    if (entries.empty() || !(population_weight > 0.0)) {
      raise(ErrorCategory::Statistical, "EmptyPopulation",
            "population has no positive-weight items");
    }
    const bool complete = reservoir_.complete_population();
    DistinctDraws<T> distinct;
    double selected_weight = 0.0;  // W_M
    size_t next = 0;
    std::vector<T> out;
    out.reserve(n_);
    for (size_t j = 0; j < n_; ++j) {
      const double u = draw_rng_.next_unit();
      bool redraw = u < selected_weight / population_weight;
      if (!redraw && next == entries.size()) {
        // Only reachable through rounding when the reservoir held the whole
        // population (then W_M == W_P up to ulps).
        if (!complete) {
          raise(ErrorCategory::Internal, "ReservoirExhausted",
                "reservoir consumed before the sample was complete");
        }
        redraw = true;
      }
      if (redraw) {
        out.push_back(distinct.redraw(draw_rng_.next_unit()));
      } else {
        const auto& e = entries[next++];
        selected_weight += e.weight;
        distinct.add(e.item, e.weight);
        out.push_back(e.item);
      }
    }
    return out;
  }

 private:
  size_t n_;
  WeightedReservoir<T> reservoir_;
  CounterRng draw_rng_;
};

}  // namespace joinsample
