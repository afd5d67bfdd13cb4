#include "imlc/digest.hpp"

#include <openssl/sha.h>

#include <array>
#include <fmt/format.h>

namespace imlc {

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> md{};
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), md.data());
  std::string out;
  out.reserve(md.size() * 2);
  for (unsigned char c : md) out += fmt::format("{:02x}", c);
  return out;
}

}  // namespace imlc
