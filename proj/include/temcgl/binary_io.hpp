#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

namespace temcgl {

/// Little-endian primitive writer for the checkpoint and export formats.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  }

  void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void u8(std::uint8_t x) { out_.put(static_cast<char>(x)); }
  void u32(std::uint32_t x) { le(x); }
  void u64(std::uint64_t x) { le(x); }
  void f64(double x) { le(std::bit_cast<std::uint64_t>(x)); }

  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("write to '" + path_.string() + "' failed");
  }

 private:
  template <typename T>
  void le(T x) {
    char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((x >> (8 * i)) & 0xFF);
    bytes(buf, sizeof(T));
  }

  std::filesystem::path path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open '" + path.string() + "'");
  }

  void expect_magic(const char (&magic)[4]) {
    char buf[4];
    read(buf, 4);
    if (std::memcmp(buf, magic, 4) != 0) {
      throw std::runtime_error("'" + path_.string() + "': bad magic, expected " + std::string(magic, 4));
    }
  }
  std::uint8_t u8() {
    char c;
    read(&c, 1);
    return static_cast<std::uint8_t>(c);
  }
  std::uint32_t u32() { return le<std::uint32_t>(); }
  std::uint64_t u64() { return le<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }

  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) {
      throw std::runtime_error("'" + path_.string() + "': trailing bytes after payload");
    }
  }

 private:
  void read(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) {
      throw std::runtime_error("'" + path_.string() + "': truncated file");
    }
  }
  template <typename T>
  T le() {
    unsigned char buf[sizeof(T)];
    read(reinterpret_cast<char*>(buf), sizeof(T));
    T x = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) x |= static_cast<T>(buf[i]) << (8 * i);
    return x;
  }

  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace temcgl
