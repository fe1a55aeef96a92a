#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <openssl/evp.h>
#include <openssl/sha.h>

#include "ragcheck/error.hpp"
#include "ragcheck/jsonl.hpp"

namespace ragcheck {

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

inline std::string base64_encode(std::string_view data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          reinterpret_cast<const unsigned char*>(data.data()),
                          static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

inline std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ValidationError("invalid base64 length");
  std::string out(3 * text.size() / 4, '\0');
  int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          reinterpret_cast<const unsigned char*>(text.data()),
                          static_cast<int>(text.size()));
  if (n < 0) throw ValidationError("invalid base64 payload");
  // EVP_DecodeBlock keeps the padding bytes as zeros.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

/// An image (or other binary piece) resolved to its bytes.
struct ImageContent {
  std::string ref;    // content_ref as written in the manifest
  std::string bytes;  // raw file content
  std::string hash;   // sha256 of bytes

  static ImageContent load(const std::filesystem::path& root, const std::string& ref) {
    auto path = root / ref;
    if (!std::filesystem::is_regular_file(path))
      throw ValidationError("unresolvable content ref: " + ref);
    ImageContent c{ref, read_text_file(path), {}};
    c.hash = sha256_hex(c.bytes);
    return c;
  }

  static ImageContent from_bytes(std::string ref, std::string bytes) {
    ImageContent c{std::move(ref), std::move(bytes), {}};
    c.hash = sha256_hex(c.bytes);
    return c;
  }
};

}  // namespace ragcheck
