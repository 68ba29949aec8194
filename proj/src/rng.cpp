#include "offrl/rng.hpp"

#include <cmath>

namespace offrl {
namespace {

constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ull;
constexpr uint64_t kChildSalt = 0xa0761d6478bd642full;

uint64_t mix64(uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

uint64_t hash_label(std::string_view label) {
  uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

RngStream RngStream::root(uint64_t seed) {
  return RngStream(mix64(seed + kGolden), 0);
}

RngStream RngStream::child(std::string_view label) const {
  return RngStream(mix64((key_ ^ hash_label(label)) + kChildSalt), 0);
}

RngStream RngStream::child(uint64_t index) const {
  return RngStream(mix64((key_ ^ mix64(index + 1)) + kChildSalt), 0);
}

uint64_t RngStream::peek(uint64_t offset) const {
  return mix64(key_ + kGolden * (counter_ + offset));
}

uint64_t RngStream::next_u64() {
  uint64_t v = mix64(key_ + kGolden * counter_);
  ++counter_;
  return v;
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
  // Box-Muller, one output per pair of draws so the draw count stays fixed.
  double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
  double u2 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

uint64_t RngStream::next_below(uint64_t n) {
  // Multiply-shift range reduction; bias is ~n/2^64 and irrelevant here.
  return static_cast<uint64_t>(
      (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

}  // namespace offrl
