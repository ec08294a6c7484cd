#include "dyndet/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace dyndet {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_provenance(std::ostream& os, const Provenance& prov, std::string_view comment) {
  os << comment << "tool=" << kToolName << ' ' << kToolVersion << '\n';
  os << comment << "config_hash=" << prov.config_hash << '\n';
  os << comment << "master_seed=" << prov.master_seed << '\n';
}

}  // namespace dyndet
