#ifndef COVERTPHYS_BITS_HPP
#define COVERTPHYS_BITS_HPP

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "covertphys/common.hpp"

namespace covertphys {

/// Bit strings are ASCII "0"/"1" with 'E' marking an erased position.
using BitString = std::string;

inline bool is_bitstring(const BitString& s) {
    return std::all_of(s.begin(), s.end(),
                       [](char c) { return c == '0' || c == '1' || c == 'E'; });
}

inline void require_bits(const BitString& s) {
    if (!is_bitstring(s)) throw ConfigError("bit string may only contain 0/1/E: " + s);
}

inline BitString bits_from_bytes(const std::vector<std::uint8_t>& bytes) {
    BitString out;
    out.reserve(bytes.size() * 8);
    for (std::uint8_t b : bytes)
        for (int i = 7; i >= 0; --i) out.push_back(((b >> i) & 1) ? '1' : '0');
    return out;
}

/// MSB-first pack; erasures are rejected.
inline std::vector<std::uint8_t> bytes_from_bits(const BitString& bits) {
    if (bits.size() % 8 != 0)
        throw IntegrityError("bit count not a multiple of 8: " + std::to_string(bits.size()));
    std::vector<std::uint8_t> out(bits.size() / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        char c = bits[i];
        if (c == 'E') throw IntegrityError("erasure in byte payload");
        out[i / 8] = static_cast<std::uint8_t>((out[i / 8] << 1) | (c == '1' ? 1 : 0));
    }
    return out;
}

/// Position-wise bit accuracy against the transmitted string. Decoded bits
/// beyond the sent length, missing positions, and erasures all count wrong.
inline double bit_accuracy(const BitString& sent, const BitString& decoded) {
    if (sent.empty()) return decoded.empty() ? 1.0 : 0.0;
    std::size_t matches = 0;
    std::size_t n = std::min(sent.size(), decoded.size());
    for (std::size_t i = 0; i < n; ++i)
        if (sent[i] == decoded[i] && sent[i] != 'E') ++matches;
    return static_cast<double>(matches) / static_cast<double>(sent.size());
}

inline BitString random_bits(std::size_t n, Rng& rng) {
    BitString s(n, '0');
    for (auto& c : s) c = rng.bernoulli(0.5) ? '1' : '0';
    return s;
}

}  // namespace covertphys

#endif
