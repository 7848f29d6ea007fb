#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sftl {

// Streaming SHA-256. Used for hash commitments, coin-flip seed expansion
// and dataset digests; nothing here needs to be fast.
class Sha256 {
 public:
  Sha256() { reset(); }
  void reset();
  void update(const void* data, std::size_t len);
  std::array<std::uint8_t, 32> finish();

  static std::array<std::uint8_t, 32> digest(const void* data, std::size_t len) {
    Sha256 h;
    h.update(data, len);
    return h.finish();
  }
  static std::string hex(const std::array<std::uint8_t, 32>& d);

 private:
  void compress(const std::uint8_t* block);
  std::uint32_t state_[8];
  std::uint64_t total_ = 0;
  std::uint8_t buf_[64];
  std::size_t buffed_ = 0;
};

}  // namespace sftl
