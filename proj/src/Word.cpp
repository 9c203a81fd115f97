#include "statefuzz/Word.h"

#include <stdexcept>

using namespace std;

namespace statefuzz {

array<uint8_t, kWordBytes> wordToBytes(const Word& w) {
    array<uint8_t, kWordBytes> out{};
    Word v = w;
    for (int i = int(kWordBytes) - 1; i >= 0; --i) {
        out[size_t(i)] = uint8_t(v & 0xff);
        v >>= 8;
    }
    return out;
}

Word wordFromBytes(const uint8_t* data, size_t len) {
    Word v = 0;
    for (size_t i = 0; i < len && i < kWordBytes; ++i) {
        v <<= 8;
        v |= data[i];
    }
    return v;
}

Bytes wordLowBytes(const Word& w, size_t n) {
    auto full = wordToBytes(w);
    if (n > kWordBytes) n = kWordBytes;
    return Bytes(full.end() - ptrdiff_t(n), full.end());
}

static const char* kHexDigits = "0123456789abcdef";

string toHex(const Bytes& data) {
    string out;
    out.reserve(data.size() * 2);
    for (uint8_t b : data) {
        out.push_back(kHexDigits[b >> 4]);
        out.push_back(kHexDigits[b & 0xf]);
    }
    return out;
}

static int hexVal(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw runtime_error("invalid hex digit");
}

Bytes fromHex(const string& hex) {
    if (hex.size() % 2 != 0) throw runtime_error("odd-length hex string");
    Bytes out;
    out.reserve(hex.size() / 2);
    for (size_t i = 0; i < hex.size(); i += 2)
        out.push_back(uint8_t(hexVal(hex[i]) << 4 | hexVal(hex[i + 1])));
    return out;
}

string wordToString(const Word& w) { return w.str(); }

Word wordFromString(const string& s) { return Word(s); }

uint64_t fnv1a64(const uint8_t* data, size_t len, uint64_t seed) {
    uint64_t h = seed;
    for (size_t i = 0; i < len; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t fnv1a64(const string& s, uint64_t seed) {
    return fnv1a64(reinterpret_cast<const uint8_t*>(s.data()), s.size(), seed);
}

}  // namespace statefuzz
