#ifndef COVERTPHYS_PROTOCOL_HPP
#define COVERTPHYS_PROTOCOL_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "covertphys/bits.hpp"
#include "covertphys/common.hpp"

namespace covertphys::protocol {

/// 8-bit sync pattern: alternating run for clock recovery, phase-breaking tail.
inline const BitString kPreamble = "10101011";

/// CRC-8, polynomial 0x07, init 0x00, MSB-first, no reflection.
inline std::uint8_t crc8(const std::vector<std::uint8_t>& data) {
    std::uint8_t crc = 0x00;
    for (std::uint8_t byte : data) {
        crc ^= byte;
        for (int i = 0; i < 8; ++i)
            crc = (crc & 0x80) ? static_cast<std::uint8_t>((crc << 1) ^ 0x07)
                               : static_cast<std::uint8_t>(crc << 1);
    }
    return crc;
}

/// preamble || payload (MSB-first) || CRC-8 over the payload.
inline BitString frame(const std::vector<std::uint8_t>& payload, bool with_crc = true) {
    if (payload.empty() || payload.size() > 8)
        throw ConfigError("frame payload must be 1-8 bytes, got " +
                          std::to_string(payload.size()));
    BitString bits = kPreamble + bits_from_bytes(payload);
    if (with_crc) bits += bits_from_bytes({crc8(payload)});
    return bits;
}

struct DeframeResult {
    bool ok = false;
    std::vector<std::uint8_t> payload;  // best-effort when !ok
    std::string failure;                // empty when ok
    std::size_t preamble_pos = 0;
};

/// Locate the preamble by sliding correlation (tolerating <=1 mismatch;
/// erasures count as mismatches), then check the trailing CRC.
inline DeframeResult deframe(const BitString& bits, bool with_crc = true) {
    require_bits(bits);
    DeframeResult res;
    const std::size_t tail = with_crc ? 8 : 0;
    if (bits.size() < kPreamble.size() + 8 + tail) {
        res.failure = "too few bits for a frame";
        return res;
    }
    std::optional<std::size_t> best;
    std::size_t best_mism = 2;
    for (std::size_t p = 0; p + kPreamble.size() + 8 + tail <= bits.size(); ++p) {
        std::size_t mism = 0;
        for (std::size_t i = 0; i < kPreamble.size(); ++i)
            if (bits[p + i] != kPreamble[i]) ++mism;
        if (mism < best_mism) {
            best_mism = mism;
            best = p;
            if (mism == 0) break;
        }
    }
    if (!best) {
        res.failure = "preamble not found";
        return res;
    }
    res.preamble_pos = *best;
    std::size_t body = bits.size() - *best - kPreamble.size();
    if (body < 8 + tail || (body - tail) % 8 != 0) {
        res.failure = "payload not byte-aligned";
        return res;
    }
    BitString payload_bits = bits.substr(*best + kPreamble.size(), body - tail);
    bool erased = payload_bits.find('E') != BitString::npos;
    BitString cleaned = payload_bits;
    for (auto& c : cleaned)
        if (c == 'E') c = '0';
    res.payload = bytes_from_bits(cleaned);
    if (!with_crc) {
        res.ok = !erased;
        if (erased) res.failure = "erasures in payload";
        return res;
    }
    BitString crc_bits = bits.substr(bits.size() - 8);
    bool crc_erased = crc_bits.find('E') != BitString::npos;
    for (auto& c : crc_bits)
        if (c == 'E') c = '0';
    std::uint8_t got = bytes_from_bits(crc_bits)[0];
    if (erased || crc_erased || got != crc8(res.payload)) {
        res.failure = "crc mismatch";
        return res;
    }
    res.ok = true;
    return res;
}

struct BerResult {
    std::size_t bit_errors = 0;
    std::size_t erasures = 0;
    std::size_t length = 0;
    double ber_rate = 0.0;  // (mismatches + erasures) / length
};

inline BerResult ber(const BitString& sent, const BitString& received) {
    if (sent.size() != received.size())
        throw ConfigError("ber: length mismatch after alignment (" +
                          std::to_string(sent.size()) + " vs " +
                          std::to_string(received.size()) + ")");
    BerResult r;
    r.length = sent.size();
    for (std::size_t i = 0; i < sent.size(); ++i) {
        if (received[i] == 'E' || sent[i] == 'E')
            ++r.erasures;
        else if (sent[i] != received[i])
            ++r.bit_errors;
    }
    if (r.length > 0)
        r.ber_rate = static_cast<double>(r.bit_errors + r.erasures) /
                     static_cast<double>(r.length);
    return r;
}

struct CapacityRow {
    double rate_bps = 0.0;
    double ber = 0.0;
    double erasure_rate = 0.0;
    double frame_failure_rate = 0.0;
    double goodput_bps = 0.0;  // rate * (1 - frame failure rate) * payload fraction
};

/// One end-to-end trial at a given rate: the sent/received framed bit
/// strings, as produced by whatever channel the caller wires in.
struct ChannelTrial {
    BitString sent;
    BitString received;
};
using ChannelFn = std::function<ChannelTrial(double rate_bps, std::uint64_t seed)>;

/// Monte Carlo capacity table over a rate grid. The channel callback owns
/// plant/observer specifics; this layer only does the bookkeeping.
inline std::vector<CapacityRow> capacity_estimate(const std::vector<double>& rate_grid,
                                                  int n_trials, std::uint64_t master_seed,
                                                  std::size_t payload_bytes,
                                                  const ChannelFn& channel) {
    if (rate_grid.empty()) throw ConfigError("capacity_estimate: empty rate grid");
    double payload_fraction =
        static_cast<double>(8 * payload_bytes) /
        static_cast<double>(kPreamble.size() + 8 * payload_bytes + 8);
    std::vector<CapacityRow> table;
    for (std::size_t gi = 0; gi < rate_grid.size(); ++gi) {
        CapacityRow row;
        row.rate_bps = rate_grid[gi];
        std::size_t errs = 0, eras = 0, total = 0, frame_fail = 0;
        for (int t = 0; t < n_trials; ++t) {
            auto trial = channel(row.rate_bps, derive_seed(master_seed, gi * 100000 + t));
            auto b = ber(trial.sent, trial.received);
            errs += b.bit_errors;
            eras += b.erasures;
            total += b.length;
            if (!deframe(trial.received).ok) ++frame_fail;
        }
        row.ber = total ? static_cast<double>(errs + eras) / total : 0.0;
        row.erasure_rate = total ? static_cast<double>(eras) / total : 0.0;
        row.frame_failure_rate =
            n_trials ? static_cast<double>(frame_fail) / n_trials : 0.0;
        row.goodput_bps = row.rate_bps * (1.0 - row.frame_failure_rate) * payload_fraction;
        table.push_back(row);
    }
    return table;
}

}  // namespace covertphys::protocol

#endif
