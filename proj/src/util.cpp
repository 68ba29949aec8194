#include "offrl/util.hpp"

#include <unistd.h>

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "offrl/errors.hpp"

namespace offrl {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw DataError("read failed on '" + path + "'");
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw DataError("write failed on '" + path + "'");
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw DataError("cannot create directory '" + path + "': " + ec.message());
}

bool file_exists(const std::string& path) {
  std::error_code ec;
  return std::filesystem::exists(path, ec);
}

std::string join_path(const std::string& a, const std::string& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.back() == '/') return a + b;
  return a + "/" + b;
}

std::string fmt_double(double v) {
  char buf[40];
  // shortest representation that round-trips exactly
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v || (back != back && v != v)) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool color_enabled() {
  if (std::getenv("NO_COLOR")) return false;
  if (const char* v = std::getenv("OFFRL_COLOR")) {
    return std::strcmp(v, "0") != 0;
  }
  return isatty(fileno(stdout)) != 0;
}

namespace {

inline uint32_t rol(uint32_t x, int n) { return (x << n) | (x >> (32 - n)); }

}  // namespace

std::string sha1_hex(const void* data, size_t n) {
  const uint8_t* msg = static_cast<const uint8_t*>(data);
  uint32_t h[5] = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};
  const uint64_t bitlen = static_cast<uint64_t>(n) * 8;
  // padded message processed in 64-byte chunks without copying the payload
  const size_t total = ((n + 8) / 64 + 1) * 64;
  uint32_t w[80];
  for (size_t chunk = 0; chunk < total; chunk += 64) {
    uint8_t block[64];
    for (size_t i = 0; i < 64; ++i) {
      const size_t pos = chunk + i;
      if (pos < n)
        block[i] = msg[pos];
      else if (pos == n)
        block[i] = 0x80;
      else if (pos >= total - 8)
        block[i] = static_cast<uint8_t>(bitlen >> (8 * (total - 1 - pos)));
      else
        block[i] = 0;
    }
    for (int i = 0; i < 16; ++i)
      w[i] = (static_cast<uint32_t>(block[i * 4]) << 24) |
             (static_cast<uint32_t>(block[i * 4 + 1]) << 16) |
             (static_cast<uint32_t>(block[i * 4 + 2]) << 8) |
             static_cast<uint32_t>(block[i * 4 + 3]);
    for (int i = 16; i < 80; ++i)
      w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
    uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
    for (int i = 0; i < 80; ++i) {
      uint32_t f, kc;
      if (i < 20) {
        f = (b & c) | (~b & d);
        kc = 0x5A827999u;
      } else if (i < 40) {
        f = b ^ c ^ d;
        kc = 0x6ED9EBA1u;
      } else if (i < 60) {
        f = (b & c) | (b & d) | (c & d);
        kc = 0x8F1BBCDCu;
      } else {
        f = b ^ c ^ d;
        kc = 0xCA62C1D6u;
      }
      const uint32_t tmp = rol(a, 5) + f + e + kc + w[i];
      e = d;
      d = c;
      c = rol(b, 30);
      b = a;
      a = tmp;
    }
    h[0] += a;
    h[1] += b;
    h[2] += c;
    h[3] += d;
    h[4] += e;
  }
  char out[41];
  std::snprintf(out, sizeof(out), "%08x%08x%08x%08x%08x", h[0], h[1], h[2], h[3], h[4]);
  return out;
}

std::string git_blob_hash(const std::string& content) {
  std::string buf = "blob " + std::to_string(content.size());
  buf.push_back('\0');
  buf += content;
  return sha1_hex(buf.data(), buf.size());
}

std::string git_blob_hash_file(const std::string& path) {
  return git_blob_hash(read_file(path));
}

}  // namespace offrl
