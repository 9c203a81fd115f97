#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace statefuzz {

/* 256-bit unsigned machine word. The unchecked fixed-width backend wraps
 * modulo 2^256 on overflow, which is exactly the VM's arithmetic model. */
using Word = boost::multiprecision::number<
    boost::multiprecision::cpp_int_backend<256, 256, boost::multiprecision::unsigned_magnitude,
                                           boost::multiprecision::unchecked, void>>;

using Bytes = std::vector<uint8_t>;

constexpr size_t kWordBytes = 32;

/* Big-endian, fixed 32-byte encoding. */
std::array<uint8_t, kWordBytes> wordToBytes(const Word& w);
Word wordFromBytes(const uint8_t* data, size_t len);

/* Least-significant `n` bytes of the big-endian encoding (n <= 32). */
Bytes wordLowBytes(const Word& w, size_t n);

std::string toHex(const Bytes& data);
Bytes fromHex(const std::string& hex);

std::string wordToString(const Word& w);
Word wordFromString(const std::string& s);

/* FNV-1a over a byte string; used for content hashes in serialized artifacts. */
uint64_t fnv1a64(const uint8_t* data, size_t len, uint64_t seed = 0xcbf29ce484222325ULL);
uint64_t fnv1a64(const std::string& s, uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace statefuzz
