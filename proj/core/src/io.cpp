#include "fdnet/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fdnet/errors.hpp"

namespace fdnet::io {

namespace {

std::array<unsigned char, 8> to_le_bytes(double value) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  std::array<unsigned char, 8> bytes{};
  for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFFu);
  return bytes;
}

double from_le_bytes(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_f64(const std::filesystem::path& path, std::span<const double> values) {
  std::string buffer;
  buffer.resize(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bytes = to_le_bytes(values[i]);
    std::memcpy(buffer.data() + 8 * i, bytes.data(), 8);
  }
  write_text_atomic(path, buffer);
}

std::vector<double> read_f64(const std::filesystem::path& path) {
  const std::string buffer = read_text(path);
  if (buffer.size() % 8 != 0) {
    throw DataError(path.string() + ": size " + std::to_string(buffer.size()) +
                    " is not a multiple of 8 bytes");
  }
  std::vector<double> values(buffer.size() / 8);
  const auto* bytes = reinterpret_cast<const unsigned char*>(buffer.data());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = from_le_bytes(bytes + 8 * i);
  return values;
}

void write_text_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), end);
}

std::string fingerprint(std::span<const double> values) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (double v : values) {
    for (unsigned char byte : to_le_bytes(v)) {
      hash ^= byte;
      hash *= 0x100000001b3ULL;
    }
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = kHex[hash & 0xFu];
    hash >>= 4;
  }
  return out;
}

std::string_view trim(std::string_view text) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  return text;
}

std::vector<std::string> split_trimmed(std::string_view text, char delimiter) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(delimiter, start);
    parts.emplace_back(trim(text.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace fdnet::io
