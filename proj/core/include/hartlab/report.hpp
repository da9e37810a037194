#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hartlab::report {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest round-trippable decimal rendering of a double (%.17g trimmed is
// not used; we keep the full 17 digits so files are byte-stable).
std::string format_double(double v);

std::uint64_t fnv1a64(std::string_view data);
std::string to_hex(std::uint64_t v);

void write_text_file(const std::string& path, std::string_view content);
std::string read_text_file(const std::string& path);

}  // namespace hartlab::report
