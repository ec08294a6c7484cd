#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

#include "dyndet/matcore.hpp"

namespace dyndet {

inline constexpr std::string_view kToolName = "dyndet";
inline constexpr std::string_view kToolVersion = DYNDET_VERSION;

// Shortest round-trip-safe decimal form ("%.17g" trimmed), "nan"/"inf" for specials.
std::string format_number(double x);

// 64-bit FNV-1a, rendered as 16 hex digits.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

// Provenance lines written at the top of every emitted file.
struct Provenance {
  std::string config_hash;
  std::uint64_t master_seed = 0;
};

void write_provenance(std::ostream& os, const Provenance& prov, std::string_view comment = "# ");

}  // namespace dyndet
