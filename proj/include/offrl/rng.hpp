#pragma once

#include <cstdint>
#include <string_view>

namespace offrl {

// Counter-based generator: draw i of a stream is a pure function of
// (key, i), so values can be produced out of order or in parallel without
// changing the sequence. Streams are derived from a root seed by labelled
// or indexed splits and never shared between consumers.
class RngStream {
 public:
  RngStream() = default;

  static RngStream root(uint64_t seed);

  RngStream child(std::string_view label) const;
  RngStream child(uint64_t index) const;

  uint64_t next_u64();
  double next_double();    // uniform [0, 1)
  double next_gaussian();  // standard normal, Box-Muller
  double uniform(double lo, double hi);
  uint64_t next_below(uint64_t n);  // uniform over {0, ..., n-1}, n > 0

  // Value the stream would produce `offset` draws from now; does not advance.
  uint64_t peek(uint64_t offset) const;
  void skip(uint64_t n) { counter_ += n; }

  uint64_t key() const { return key_; }

 private:
  RngStream(uint64_t key, uint64_t counter) : key_(key), counter_(counter) {}

  uint64_t key_ = 0;
  uint64_t counter_ = 0;
};

}  // namespace offrl
