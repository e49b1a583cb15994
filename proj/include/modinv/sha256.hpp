#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace modinv {

// Minimal SHA-256, used to fingerprint model files in sweep reports.
class Sha256 {
 public:
  Sha256();
  void update(const void* data, size_t len);
  // Finalizes and returns the lowercase hex digest. update() must not be
  // called afterwards.
  std::string hex_digest();

  static std::string of_bytes(const void* data, size_t len);
  static std::string of_file(const std::string& path);

 private:
  void process_block(const uint8_t* block);

  uint32_t state_[8];
  uint64_t total_len_ = 0;
  uint8_t buffer_[64];
  size_t buffered_ = 0;
};

}  // namespace modinv
