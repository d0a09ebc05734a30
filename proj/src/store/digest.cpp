#include "edgefaas/store/digest.hpp"

#include <openssl/evp.h>

namespace edgefaas::store {

Digest sha256(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  Digest out{};
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) fail(Errc::IoFailure, "EVP_MD_CTX_new failed");
  unsigned int len = 0;
  bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
            (a.empty() || EVP_DigestUpdate(ctx, a.data(), a.size()) == 1) &&
            (b.empty() || EVP_DigestUpdate(ctx, b.data(), b.size()) == 1) &&
            EVP_DigestFinal_ex(ctx, out.data(), &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok || len != out.size()) fail(Errc::IoFailure, "sha256 failed");
  return out;
}

std::string hex(const Digest& d) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (std::uint8_t b : d) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xf]);
  }
  return s;
}

Digest from_hex(const std::string& s) {
  if (s.size() != 64) fail(Errc::ChecksumMismatch, "bad digest length");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    fail(Errc::ChecksumMismatch, "bad digest character");
  };
  Digest d{};
  for (size_t i = 0; i < 32; ++i) {
    d[i] = static_cast<std::uint8_t>((nibble(s[2 * i]) << 4) |
                                     nibble(s[2 * i + 1]));
  }
  return d;
}

}  // namespace edgefaas::store
