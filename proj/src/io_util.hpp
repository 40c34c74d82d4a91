#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "autorad/errors.hpp"

namespace autorad::io {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

inline std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string read_text(const std::filesystem::path& p) {
  auto b = read_bytes(p);
  return {b.begin(), b.end()};
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + p.string());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!out) throw std::runtime_error("write failed: " + p.string());
}

template <typename T>
void write_le(const std::filesystem::path& p, std::span<const T> values) {
  std::string buf(values.size() * sizeof(T), '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    T v = byteswap_if_big(values[i]);
    std::memcpy(buf.data() + i * sizeof(T), &v, sizeof(T));
  }
  write_text(p, buf);
}

template <typename T>
std::vector<T> read_le(const std::filesystem::path& p) {
  auto bytes = read_bytes(p);
  if (bytes.size() % sizeof(T) != 0) {
    throw ValidationError("length mismatch: " + p.string() + " holds " + std::to_string(bytes.size()) +
                          " bytes, not a multiple of " + std::to_string(sizeof(T)));
  }
  std::vector<T> out(bytes.size() / sizeof(T));
  for (std::size_t i = 0; i < out.size(); ++i) {
    T v;
    std::memcpy(&v, bytes.data() + i * sizeof(T), sizeof(T));
    out[i] = byteswap_if_big(v);
  }
  return out;
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
  try {
    return nlohmann::json::parse(read_text(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("malformed JSON in " + p.string() + ": " + e.what());
  }
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) { write_text(p, j.dump(2) + "\n"); }

inline std::filesystem::path resolve(const std::filesystem::path& base_file, const std::filesystem::path& rel) {
  if (rel.is_absolute()) return rel;
  return base_file.parent_path() / rel;
}

/// Shortest round-trip representation of a double ("%.17g").
std::string format_double(double v);

}  // namespace autorad::io
