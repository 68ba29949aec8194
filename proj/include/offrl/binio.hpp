#pragma once

#include <cstdint>
#include <cstring>
#include <string>

#include "offrl/errors.hpp"

namespace offrl::binio {

// little-endian on every platform we build on; serialized via memcpy
template <typename T>
inline void put(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

  template <typename T>
  T get(const std::string& what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_bytes(size_t n, const std::string& what) {
    need(n, what);
    std::string out = buf_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  void get_doubles(double* dst, size_t n, const std::string& what) {
    need(n * sizeof(double), what);
    std::memcpy(dst, buf_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }

  size_t remaining() const { return buf_.size() - pos_; }

 private:
  void need(size_t n, const std::string& what) {
    if (buf_.size() - pos_ < n)
      throw DataError("'" + path_ + "' is truncated while reading " + what + " (offset " +
                      std::to_string(pos_) + ", need " + std::to_string(n) + " bytes, have " +
                      std::to_string(buf_.size() - pos_) + ")");
  }

  const std::string& buf_;
  std::string path_;
  size_t pos_ = 0;
};

}  // namespace offrl::binio
