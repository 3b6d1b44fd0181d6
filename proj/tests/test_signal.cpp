#include <doctest.h>

#include <complex>
#include <map>

#include "modrec/signal.hpp"
#include "oracles.hpp"

using namespace modrec;
using cplx = std::complex<double>;

namespace {

// Matched-filter demodulator oracle (tests only): RRC filter the received
// signal and sample at symbol centers, undoing the unit-power amplitude.
std::vector<cplx> matched_filter_demod(const BasebandSignal& sig, const SynthConfig& cfg,
                                       std::size_t n_symbols) {
    const auto taps = rrc_taps(cfg.samples_per_symbol, cfg.rrc_span_symbols, cfg.rrc_rolloff);
    const std::size_t delay = (taps.size() - 1) / 2;
    const double amp = std::sqrt(static_cast<double>(cfg.samples_per_symbol));
    std::vector<cplx> symbols(n_symbols);
    for (std::size_t k = 0; k < n_symbols; ++k) {
        // filtered value at the symbol center k*sps (tx alignment is 'same')
        cplx acc{};
        const std::ptrdiff_t center = static_cast<std::ptrdiff_t>(k * cfg.samples_per_symbol);
        for (std::size_t t = 0; t < taps.size(); ++t) {
            const std::ptrdiff_t idx = center + static_cast<std::ptrdiff_t>(t) -
                                       static_cast<std::ptrdiff_t>(delay);
            if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(sig.samples.size())) {
                acc += sig.samples[static_cast<std::size_t>(idx)] * taps[t];
            }
        }
        symbols[k] = acc / amp;
    }
    return symbols;
}

}  // namespace

TEST_CASE("every digital constellation has unit average energy") {
    for (Scheme s : {Scheme::Bpsk, Scheme::Qpsk, Scheme::Psk8, Scheme::Qam16, Scheme::Qam64,
                     Scheme::Pam4}) {
        const auto table = constellation(s);
        double energy = 0;
        for (const auto& p : table) energy += std::norm(p);
        energy /= static_cast<double>(table.size());
        CHECK(energy == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("gray labels of nearest neighbors differ in one bit") {
    for (Scheme s : {Scheme::Qam16, Scheme::Qam64, Scheme::Pam4, Scheme::Psk8}) {
        const auto table = constellation(s);
        for (std::size_t a = 0; a < table.size(); ++a) {
            // find nearest neighbor of point a
            std::size_t nearest = a == 0 ? 1 : 0;
            for (std::size_t b = 0; b < table.size(); ++b) {
                if (b != a && std::abs(table[b] - table[a]) <
                                  std::abs(table[nearest] - table[a]) - 1e-12) {
                    nearest = b;
                }
            }
            const std::size_t diff = a ^ nearest;
            CHECK(std::popcount(diff) == 1);
        }
    }
}

TEST_CASE("bpsk maps bit 0 to +1 before pulse shaping") {
    const auto table = constellation(Scheme::Bpsk);
    CHECK(table[0] == cplx(1, 0));
    CHECK(table[1] == cplx(-1, 0));
}

TEST_CASE("generate_bits: determinism, whitening, xor truth") {
    const auto a = generate_bits(4096, 42);
    const auto b = generate_bits(4096, 42);
    CHECK(a == b);
    const auto c = generate_bits(4096, 43);
    CHECK(a != c);

    const auto big = generate_bits(1000000, 7);
    std::size_t ones = 0;
    for (auto bit : big) ones += bit;
    const double frac = static_cast<double>(ones) / 1e6;
    CHECK(frac >= 0.49);
    CHECK(frac <= 0.51);

    CHECK((1 ^ 0) == 1);  // XOR table row the whitener relies on
    CHECK((1 ^ 1) == 0);
}

TEST_CASE("synthesize_audio: silences, peak bound, bandwidth") {
    Rng rng(1001);
    const std::size_t n = 16384;
    const auto a = synthesize_audio(n, rng);
    REQUIRE(a.size() == n);

    double peak = 0;
    for (double v : a) peak = std::max(peak, std::abs(v));
    CHECK(peak <= 1.0);
    CHECK(peak > 0.5);  // normalized

    // at least one silent run of >= 100 samples
    std::size_t run = 0, best_run = 0;
    std::size_t silent = 0;
    for (double v : a) {
        if (std::abs(v) < 0.01) {
            ++run;
            best_run = std::max(best_run, run);
        } else {
            run = 0;
        }
        if (v == 0.0) ++silent;
    }
    CHECK(best_run >= 100);
    const double silent_frac = static_cast<double>(silent) / static_cast<double>(n);
    CHECK(silent_frac >= 0.2);
    CHECK(silent_frac <= 0.4);

    // >= 90% of spectral energy below 4 kHz at the 200 kHz nominal rate
    std::vector<cplx> spectrum(a.begin(), a.end());
    oracle::fft(spectrum);
    const double bin_hz = 200e3 / static_cast<double>(n);
    double total = 0, low = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double freq = static_cast<double>(k < n / 2 ? k : n - k) * bin_hz;
        const double e = std::norm(spectrum[k]);
        total += e;
        if (freq <= 4000.0) low += e;
    }
    CHECK(low / total >= 0.9);
}

TEST_CASE("cpfsk keeps a constant unit envelope") {
    SynthConfig cfg;
    const auto bits = generate_bits(512, 3);
    const auto sig = modulate_bits(Scheme::Cpfsk, bits, cfg);
    for (const auto& v : sig.samples) CHECK(std::abs(std::abs(v) - 1.0) <= 1e-6);
    const auto gfsk = modulate_bits(Scheme::Gfsk, bits, cfg);
    for (const auto& v : gfsk.samples) CHECK(std::abs(std::abs(v) - 1.0) <= 1e-6);
}

TEST_CASE("linear modulations have unit mean power over long runs") {
    SynthConfig cfg;
    for (Scheme s : {Scheme::Bpsk, Scheme::Qpsk, Scheme::Qam16, Scheme::Qam64, Scheme::Pam4,
                     Scheme::Psk8}) {
        const auto bits = generate_bits(60000, 5);
        const auto sig = modulate_bits(s, bits, cfg);
        CHECK(measure_power(sig) == doctest::Approx(1.0).epsilon(0.03));
    }
}

TEST_CASE("qam16 noiseless constellation lands on the +-1,+-3 grid") {
    SynthConfig cfg;
    const std::size_t n_bits = 20000 * 4;
    const auto bits = generate_bits(n_bits, 9);
    const auto sig = modulate_bits(Scheme::Qam16, bits, cfg);
    const std::size_t n_sym = n_bits / 4;
    const auto rx = matched_filter_demod(sig, cfg, n_sym);
    const auto table = constellation(Scheme::Qam16);

    // group by the transmitted symbol (known ground truth)
    std::map<std::size_t, std::pair<cplx, std::size_t>> clusters;
    const std::size_t skip = cfg.rrc_span_symbols;
    for (std::size_t k = skip; k + skip < n_sym; ++k) {
        std::size_t v = 0;
        for (std::size_t b = 0; b < 4; ++b) v = (v << 1) | bits[k * 4 + b];
        auto& [acc, count] = clusters[v];
        acc += rx[k];
        ++count;
        CHECK(std::abs(rx[k] - table[v]) < 0.08);  // individual symbols stay near their point
    }
    REQUIRE(clusters.size() == 16);
    for (const auto& [v, cluster] : clusters) {
        const cplx center = cluster.first / static_cast<double>(cluster.second);
        CHECK(std::abs(center - table[v]) <= 1e-3);
    }
}

TEST_CASE("measure_power fixtures") {
    BasebandSignal s;
    s.samples = {cplx(1, 0)};
    CHECK(measure_power(s) == doctest::Approx(1.0));
    s.samples = {cplx(1, 0), cplx(-1, 0)};
    CHECK(measure_power(s) == doctest::Approx(1.0));
    for (auto& v : s.samples) v *= 2.0;
    CHECK(measure_power(s) == doctest::Approx(4.0));
    s.samples.clear();
    CHECK_THROWS_AS(measure_power(s), ContractError);
}

TEST_CASE("apply_channel: awgn calibration at 0 dB and the vanishing-noise limit") {
    SynthConfig cfg;
    const auto bits = generate_bits(40000, 21);
    const auto clean = modulate_bits(Scheme::Qpsk, bits, cfg);

    Rng rng(55);
    const auto noisy = apply_channel(clean, cfg, 0, rng);
    REQUIRE(noisy.snr_db == 0);
    double noise_power = 0;
    for (std::size_t i = 0; i < clean.samples.size(); ++i) {
        noise_power += std::norm(noisy.samples[i] - clean.samples[i]);
    }
    noise_power /= static_cast<double>(clean.samples.size());
    CHECK(noise_power == doctest::Approx(measure_power(clean)).epsilon(0.03));

    Rng rng2(56);
    const auto nearly_clean = apply_channel(clean, cfg, 60, rng2);
    double err = 0, ref = 0;
    for (std::size_t i = 0; i < clean.samples.size(); ++i) {
        err += std::norm(nearly_clean.samples[i] - clean.samples[i]);
        ref += std::norm(clean.samples[i]);
    }
    CHECK(std::sqrt(err / ref) < 0.002);  // within 0.2% RMS
}

TEST_CASE("apply_channel: empirical snr stays within half a dB of the label") {
    SynthConfig cfg;
    const std::size_t n = 1000 * 128;
    const auto bits = generate_bits(n / 8 + 64, 31);
    auto clean = modulate_bits(Scheme::Psk8, bits, cfg);
    clean.samples.resize(n);
    for (int label : {0, 10, 18}) {
        Rng rng(100 + static_cast<std::uint64_t>(label));
        const auto noisy = apply_channel(clean, cfg, label, rng);
        double sig_p = measure_power(clean), noise_p = 0;
        for (std::size_t i = 0; i < n; ++i) {
            noise_p += std::norm(noisy.samples[i] - clean.samples[i]);
        }
        noise_p /= static_cast<double>(n);
        const double emp_db = 10.0 * std::log10(sig_p / noise_p);
        CHECK(std::abs(emp_db - label) <= 0.5);
    }
}

TEST_CASE("apply_channel is deterministic in the rng seed") {
    SynthConfig cfg;
    cfg.channel.enabled = true;
    const auto bits = generate_bits(2048, 77);
    const auto clean = modulate_bits(Scheme::Qam16, bits, cfg);
    Rng r1(5), r2(5);
    const auto a = apply_channel(clean, cfg, 6, r1);
    const auto b = apply_channel(clean, cfg, 6, r2);
    CHECK(a.samples == b.samples);
}

TEST_CASE("am-dsb of silence is a pure carrier; wbfm has constant envelope") {
    SynthConfig cfg;
    const std::vector<double> silence(4096, 0.0);
    const auto am = modulate_audio(Scheme::Amdsb, silence, cfg);
    for (const auto& v : am.samples) {
        CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(v.imag() == 0.0);
    }

    Rng rng(9);
    const auto audio = synthesize_audio(8192, rng);
    const auto fm = modulate_audio(Scheme::Wbfm, audio, cfg);
    for (const auto& v : fm.samples) CHECK(std::abs(std::abs(v) - 1.0) <= 1e-9);
    CHECK(measure_power(fm) == doctest::Approx(1.0).epsilon(1e-9));

    const auto am2 = modulate_audio(Scheme::Amdsb, audio, cfg);
    CHECK(measure_power(am2) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("payload family mismatches are rejected") {
    SynthConfig cfg;
    const auto bits = generate_bits(64, 1);
    CHECK_THROWS_AS(modulate_bits(Scheme::Wbfm, bits, cfg), ConfigError);
    const std::vector<double> audio(64, 0.1);
    CHECK_THROWS_AS(modulate_audio(Scheme::Qpsk, audio, cfg), ConfigError);

    CHECK_THROWS_AS(modulate(Scheme::Amdsb, Payload(bits), cfg), ConfigError);
    CHECK_THROWS_AS(modulate(Scheme::Bpsk, Payload(audio), cfg), ConfigError);
}

TEST_CASE("scheme names round-trip and bfsk aliases gfsk") {
    for (Scheme s : all_schemes()) CHECK(scheme_from_name(scheme_name(s)) == s);
    CHECK(scheme_from_name("bfsk") == Scheme::Gfsk);
    CHECK_THROWS_AS(scheme_from_name("ofdm"), ConfigError);
}

TEST_CASE("bpsk loopback at +18 dB has a tiny bit error rate") {
    SynthConfig cfg;
    const std::size_t n_bits = 20000;  // the full 1e5-bit run lives in the acceptance suite
    const auto bits = generate_bits(n_bits, 4);
    const auto clean = modulate_bits(Scheme::Bpsk, bits, cfg);
    Rng rng(44);
    const auto noisy = apply_channel(clean, cfg, 18, rng);
    const auto rx = matched_filter_demod(noisy, cfg, n_bits);
    std::size_t errors = 0;
    const std::size_t skip = cfg.rrc_span_symbols;
    std::size_t counted = 0;
    for (std::size_t k = skip; k + skip < n_bits; ++k) {
        const int want = bits[k] ? -1 : 1;
        if ((rx[k].real() > 0 ? 1 : -1) != want) ++errors;
        ++counted;
    }
    CHECK(static_cast<double>(errors) / static_cast<double>(counted) < 1e-3);
}
