#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "modrec/errors.hpp"
#include "modrec/rng.hpp"

namespace modrec {

// Eight digital schemes plus the two analog ones. "bfsk" is accepted as an
// alias for gfsk when parsing names.
enum class Scheme : std::uint8_t {
    Bpsk,
    Qpsk,
    Psk8,
    Qam16,
    Qam64,
    Gfsk,
    Cpfsk,
    Pam4,
    Wbfm,
    Amdsb,
};

const std::vector<Scheme>& all_schemes();
std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);
bool is_analog(Scheme s);
std::size_t bits_per_symbol(Scheme s);

// Gray-coded constellation for the linear digital schemes, indexed by the
// symbol's bit pattern (MSB first); unit average energy.
std::vector<std::complex<double>> constellation(Scheme s);

struct AudioConfig {
    double syllabic_rate_min_hz = 2.0;
    double syllabic_rate_max_hz = 6.0;
    double silence_frac_min = 0.25;
    double silence_frac_max = 0.35;
    double cutoff_hz = 3400.0;
};

struct ChannelConfig {
    bool enabled = false;  // AWGN-only when off
    double cfo_max_hz = 500.0;
    double rate_offset_max_ppm = 50.0;
    bool multipath = true;  // 3 taps at delays 0/1/2 samples
};

struct SynthConfig {
    std::size_t samples_per_symbol = 8;
    double rrc_rolloff = 0.35;
    std::size_t rrc_span_symbols = 8;
    double sample_rate_hz = 200e3;
    double fm_deviation_hz = 75e3;
    double am_index = 0.5;
    double gfsk_bt = 0.35;
    double fsk_mod_index = 0.5;
    AudioConfig audio;
    ChannelConfig channel;

    void validate() const {
        if (samples_per_symbol < 2) throw ConfigError("synth: samples per symbol must be >= 2");
        if (!(rrc_rolloff > 0.0 && rrc_rolloff < 1.0)) {
            throw ConfigError("synth: rolloff must be in (0,1)");
        }
        if (rrc_span_symbols < 2) throw ConfigError("synth: rrc span must be >= 2 symbols");
    }
};

struct BasebandSignal {
    std::vector<std::complex<double>> samples;
    double sample_rate_hz = 200e3;
    std::optional<int> snr_db;  // set once noise has been applied
};

// Unit-energy root-raised-cosine taps (span*sps + 1 of them), so the
// tx/matched-filter cascade peaks at exactly 1.
std::vector<double> rrc_taps(std::size_t sps, std::size_t span_symbols, double rolloff);

// Corpus bits XOR-whitened with a 16-bit maximal LFSR (taps 16,14,13,11).
std::vector<std::uint8_t> generate_bits(std::size_t n, std::uint64_t seed);

// Voice-like test signal: low-pass noise under a 2-6 Hz syllabic envelope
// with hard silence gaps; |a| <= 1 and silences are exact zeros.
std::vector<double> synthesize_audio(std::size_t duration_samples, Rng& rng);

BasebandSignal modulate_bits(Scheme s, std::span<const std::uint8_t> bits, const SynthConfig& cfg);
BasebandSignal modulate_audio(Scheme s, std::span<const double> audio, const SynthConfig& cfg);

using Payload = std::variant<std::vector<std::uint8_t>, std::vector<double>>;
BasebandSignal modulate(Scheme s, const Payload& payload, const SynthConfig& cfg);

// Optional impairments (sample-rate offset, CFO, 3-tap multipath), then
// complex AWGN sized against the post-impairment signal power so the label
// is exact by construction.
BasebandSignal apply_channel(const BasebandSignal& sig, const SynthConfig& cfg, int snr_db,
                             Rng& rng);

double measure_power(const BasebandSignal& sig);

}  // namespace modrec
