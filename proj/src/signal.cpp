#include "modrec/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace modrec {

namespace {

using std::numbers::pi;
using cplx = std::complex<double>;

// Public-domain source text (Shakespeare); the whitening LFSR makes the
// exact content immaterial to the bit statistics.
constexpr const char* kCorpus =
    "Shall I compare thee to a summers day? Thou art more lovely and more temperate. "
    "Rough winds do shake the darling buds of May, and summers lease hath all too short a date. "
    "Sometime too hot the eye of heaven shines, and often is his gold complexion dimmed; "
    "and every fair from fair sometime declines, by chance, or natures changing course, untrimmed; "
    "but thy eternal summer shall not fade, nor lose possession of that fair thou owest, "
    "nor shall death brag thou wanderst in his shade, when in eternal lines to time thou growest. "
    "So long as men can breathe, or eyes can see, so long lives this, and this gives life to thee. "
    "To be, or not to be, that is the question: whether tis nobler in the mind to suffer "
    "the slings and arrows of outrageous fortune, or to take arms against a sea of troubles, "
    "and by opposing end them? To die: to sleep; no more; and by a sleep to say we end "
    "the heart-ache and the thousand natural shocks that flesh is heir to, tis a consummation "
    "devoutly to be wished. To die, to sleep; to sleep: perchance to dream: ay, theres the rub; "
    "for in that sleep of death what dreams may come when we have shuffled off this mortal coil, "
    "must give us pause: theres the respect that makes calamity of so long life; "
    "for who would bear the whips and scorns of time, the oppressors wrong, the proud mans contumely, "
    "the pangs of despised love, the laws delay, the insolence of office and the spurns "
    "that patient merit of the unworthy takes, when he himself might his quietus make "
    "with a bare bodkin? Who would fardels bear, to grunt and sweat under a weary life, "
    "but that the dread of something after death, the undiscovered country from whose bourn "
    "no traveller returns, puzzles the will and makes us rather bear those ills we have "
    "than fly to others that we know not of? Thus conscience does make cowards of us all. "
    "When, in disgrace with fortune and mens eyes, I all alone beweep my outcast state, "
    "and trouble deaf heaven with my bootless cries, and look upon myself, and curse my fate, "
    "wishing me like to one more rich in hope, featured like him, like him with friends possessed, "
    "desiring this mans art and that mans scope, with what I most enjoy contented least; "
    "yet in these thoughts myself almost despising, haply I think on thee, and then my state, "
    "like to the lark at break of day arising from sullen earth, sings hymns at heavens gate; "
    "for thy sweet love remembered such wealth brings that then I scorn to change my state with kings. "
    "That time of year thou mayst in me behold when yellow leaves, or none, or few, do hang "
    "upon those boughs which shake against the cold, bare ruined choirs, where late the sweet birds sang. "
    "In me thou seest the twilight of such day as after sunset fadeth in the west, "
    "which by and by black night doth take away, deaths second self, that seals up all in rest. "
    "In me thou seest the glowing of such fire that on the ashes of his youth doth lie, "
    "as the death-bed whereon it must expire consumed with that which it was nourished by. "
    "This thou perceivest, which makes thy love more strong, to love that well which thou must leave ere long. "
    "Friends, Romans, countrymen, lend me your ears; I come to bury Caesar, not to praise him. "
    "The evil that men do lives after them; the good is oft interred with their bones; "
    "so let it be with Caesar. The noble Brutus hath told you Caesar was ambitious: "
    "if it were so, it was a grievous fault, and grievously hath Caesar answered it. "
    "All the worlds a stage, and all the men and women merely players: they have their exits "
    "and their entrances; and one man in his time plays many parts, his acts being seven ages. "
    "Now is the winter of our discontent made glorious summer by this sun of York; "
    "and all the clouds that loured upon our house in the deep bosom of the ocean buried. ";

// 16-bit maximal-length Fibonacci LFSR, taps (16, 14, 13, 11). Emits the
// feedback bit.
class Lfsr16 {
  public:
    explicit Lfsr16(std::uint64_t seed) {
        state_ = static_cast<std::uint16_t>(seed ^ (seed >> 16) ^ (seed >> 32) ^ (seed >> 48));
        if (state_ == 0) state_ = 0xACE1;
    }

    std::uint8_t next_bit() {
        const std::uint16_t bit =
            (state_ ^ (state_ >> 2) ^ (state_ >> 3) ^ (state_ >> 5)) & 1u;
        state_ = static_cast<std::uint16_t>((state_ >> 1) | (bit << 15));
        return static_cast<std::uint8_t>(bit);
    }

  private:
    std::uint16_t state_;
};

// One PAM axis with Gray labeling: table[gray(p)] = 2p - (m - 1).
std::vector<double> gray_axis(std::size_t m) {
    std::vector<double> axis(m);
    for (std::size_t p = 0; p < m; ++p) {
        axis[p ^ (p >> 1)] = 2.0 * static_cast<double>(p) - static_cast<double>(m - 1);
    }
    return axis;
}

std::vector<cplx> square_qam(std::size_t bits_per_axis) {
    const std::size_t m = std::size_t{1} << bits_per_axis;
    const auto axis = gray_axis(m);
    double energy = 0.0;
    for (double v : axis) energy += v * v;
    const double unit = std::sqrt(2.0 * energy / static_cast<double>(m));
    std::vector<cplx> table(m * m);
    for (std::size_t vi = 0; vi < m; ++vi)
        for (std::size_t vq = 0; vq < m; ++vq)
            table[(vi << bits_per_axis) | vq] = cplx(axis[vi], axis[vq]) / unit;
    return table;
}

std::vector<std::size_t> bits_to_symbols(std::span<const std::uint8_t> bits, std::size_t bps) {
    if (bits.size() < bps) throw ContractError("modulate: payload shorter than one symbol");
    const std::size_t n_sym = bits.size() / bps;
    std::vector<std::size_t> symbols(n_sym);
    for (std::size_t k = 0; k < n_sym; ++k) {
        std::size_t v = 0;
        for (std::size_t b = 0; b < bps; ++b) v = (v << 1) | (bits[k * bps + b] & 1u);
        symbols[k] = v;
    }
    return symbols;
}

// Pulse train through the RRC filter, 'same' alignment, scaled to unit
// mean power in steady state.
BasebandSignal shape_linear(const std::vector<cplx>& symbols, const SynthConfig& cfg) {
    const std::size_t sps = cfg.samples_per_symbol;
    const auto taps = rrc_taps(sps, cfg.rrc_span_symbols, cfg.rrc_rolloff);
    const std::size_t delay = (taps.size() - 1) / 2;
    const double amp = std::sqrt(static_cast<double>(sps));
    BasebandSignal out;
    out.sample_rate_hz = cfg.sample_rate_hz;
    out.samples.assign(symbols.size() * sps, cplx{});
    const auto n = static_cast<std::ptrdiff_t>(out.samples.size());
    for (std::size_t k = 0; k < symbols.size(); ++k) {
        const cplx sym = symbols[k] * amp;
        const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(k * sps) -
                                    static_cast<std::ptrdiff_t>(delay);
        for (std::size_t t = 0; t < taps.size(); ++t) {
            const std::ptrdiff_t idx = base + static_cast<std::ptrdiff_t>(t);
            if (idx >= 0 && idx < n) out.samples[static_cast<std::size_t>(idx)] += sym * taps[t];
        }
    }
    return out;
}

// Continuous-phase FSK: phase advances by pi*h per symbol, spread over the
// frequency pulse. CPFSK uses a rectangular pulse; GFSK a Gaussian-filtered
// one (BT from config). Constant envelope by construction.
BasebandSignal fsk_mod(Scheme s, std::span<const std::uint8_t> bits, const SynthConfig& cfg) {
    if (bits.empty()) throw ContractError("modulate: empty payload");
    const std::size_t sps = cfg.samples_per_symbol;
    std::vector<double> pulse;
    if (s == Scheme::Cpfsk) {
        pulse.assign(sps, 1.0);
    } else {
        // Gaussian with sigma = sqrt(ln 2) / (2*pi*BT) symbol periods.
        const double sigma = std::sqrt(std::numbers::ln2) / (2.0 * pi * cfg.gfsk_bt) *
                             static_cast<double>(sps);
        const auto half = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
        std::vector<double> gauss;
        for (std::ptrdiff_t i = -half; i <= half; ++i) {
            gauss.push_back(std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma)));
        }
        pulse.assign(sps + gauss.size() - 1, 0.0);
        for (std::size_t a = 0; a < sps; ++a)
            for (std::size_t b = 0; b < gauss.size(); ++b) pulse[a + b] += gauss[b];
    }
    double pulse_sum = 0.0;
    for (double v : pulse) pulse_sum += v;
    for (double& v : pulse) v *= static_cast<double>(sps) / pulse_sum;

    const std::size_t n = bits.size() * sps;
    const std::size_t lead = (pulse.size() - sps) / 2;  // center the pulse on its symbol
    std::vector<double> freq(n, 0.0);
    for (std::size_t k = 0; k < bits.size(); ++k) {
        const double alpha = bits[k] ? 1.0 : -1.0;
        const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(k * sps) -
                                    static_cast<std::ptrdiff_t>(lead);
        for (std::size_t t = 0; t < pulse.size(); ++t) {
            const std::ptrdiff_t idx = base + static_cast<std::ptrdiff_t>(t);
            if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(n)) {
                freq[static_cast<std::size_t>(idx)] += alpha * pulse[t];
            }
        }
    }
    BasebandSignal out;
    out.sample_rate_hz = cfg.sample_rate_hz;
    out.samples.resize(n);
    double phase = 0.0;
    const double step = pi * cfg.fsk_mod_index / static_cast<double>(sps);
    for (std::size_t i = 0; i < n; ++i) {
        phase += step * freq[i];
        out.samples[i] = cplx(std::cos(phase), std::sin(phase));
    }
    return out;
}

// Windowed-sinc low-pass, unity DC gain.
std::vector<double> lowpass_fir(double cutoff_hz, double fs, std::size_t taps) {
    std::vector<double> h(taps);
    const double fc = cutoff_hz / fs;
    const auto mid = static_cast<std::ptrdiff_t>(taps / 2);
    double total = 0.0;
    for (std::size_t i = 0; i < taps; ++i) {
        const auto k = static_cast<std::ptrdiff_t>(i) - mid;
        const double x = 2.0 * fc * static_cast<double>(k);
        const double sinc = k == 0 ? 1.0 : std::sin(pi * x) / (pi * x);
        const double window =
            0.54 - 0.46 * std::cos(2.0 * pi * static_cast<double>(i) / static_cast<double>(taps - 1));
        h[i] = 2.0 * fc * sinc * window;
        total += h[i];
    }
    for (double& v : h) v /= total;
    return h;
}

}  // namespace

const std::vector<Scheme>& all_schemes() {
    static const std::vector<Scheme> k = {Scheme::Bpsk, Scheme::Qpsk,  Scheme::Psk8, Scheme::Qam16,
                                          Scheme::Qam64, Scheme::Gfsk, Scheme::Cpfsk, Scheme::Pam4,
                                          Scheme::Wbfm, Scheme::Amdsb};
    return k;
}

std::string scheme_name(Scheme s) {
    switch (s) {
        case Scheme::Bpsk: return "bpsk";
        case Scheme::Qpsk: return "qpsk";
        case Scheme::Psk8: return "8psk";
        case Scheme::Qam16: return "qam16";
        case Scheme::Qam64: return "qam64";
        case Scheme::Gfsk: return "gfsk";
        case Scheme::Cpfsk: return "cpfsk";
        case Scheme::Pam4: return "pam4";
        case Scheme::Wbfm: return "wbfm";
        case Scheme::Amdsb: return "am-dsb";
    }
    throw ConfigError("unknown scheme");
}

Scheme scheme_from_name(const std::string& name) {
    for (Scheme s : all_schemes()) {
        if (scheme_name(s) == name) return s;
    }
    if (name == "bfsk") return Scheme::Gfsk;
    if (name == "amdsb") return Scheme::Amdsb;
    throw ConfigError("unknown modulation scheme '" + name + "'");
}

bool is_analog(Scheme s) { return s == Scheme::Wbfm || s == Scheme::Amdsb; }

std::size_t bits_per_symbol(Scheme s) {
    switch (s) {
        case Scheme::Bpsk:
        case Scheme::Gfsk:
        case Scheme::Cpfsk: return 1;
        case Scheme::Qpsk:
        case Scheme::Pam4: return 2;
        case Scheme::Psk8: return 3;
        case Scheme::Qam16: return 4;
        case Scheme::Qam64: return 6;
        case Scheme::Wbfm:
        case Scheme::Amdsb: throw ConfigError("analog scheme has no symbols");
    }
    throw ConfigError("unknown scheme");
}

std::vector<cplx> constellation(Scheme s) {
    switch (s) {
        case Scheme::Bpsk: return {cplx(1, 0), cplx(-1, 0)};
        case Scheme::Qpsk: {
            const double u = 1.0 / std::sqrt(2.0);
            // Gray per axis: bit 1 selects I sign, bit 0 selects Q sign.
            return {cplx(u, u), cplx(u, -u), cplx(-u, u), cplx(-u, -u)};
        }
        case Scheme::Psk8: {
            std::vector<cplx> table(8);
            for (std::size_t p = 0; p < 8; ++p) {
                const double ang = 2.0 * pi * static_cast<double>(p) / 8.0;
                table[p ^ (p >> 1)] = cplx(std::cos(ang), std::sin(ang));
            }
            return table;
        }
        case Scheme::Qam16: return square_qam(2);
        case Scheme::Qam64: return square_qam(3);
        case Scheme::Pam4: {
            const auto axis = gray_axis(4);
            std::vector<cplx> table(4);
            for (std::size_t i = 0; i < 4; ++i) table[i] = cplx(axis[i] / std::sqrt(5.0), 0.0);
            return table;
        }
        default: throw ConfigError("no constellation for scheme '" + scheme_name(s) + "'");
    }
}

std::vector<double> rrc_taps(std::size_t sps, std::size_t span_symbols, double rolloff) {
    const std::size_t n = span_symbols * sps;
    std::vector<double> h(n + 1);
    const double b = rolloff;
    for (std::size_t i = 0; i <= n; ++i) {
        const double t = (static_cast<double>(i) - static_cast<double>(n) / 2.0) /
                         static_cast<double>(sps);
        double v;
        if (std::abs(t) < 1e-12) {
            v = 1.0 - b + 4.0 * b / pi;
        } else if (std::abs(std::abs(t) - 1.0 / (4.0 * b)) < 1e-9) {
            v = (b / std::sqrt(2.0)) * ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * b)) +
                                        (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * b)));
        } else {
            v = (std::sin(pi * t * (1.0 - b)) + 4.0 * b * t * std::cos(pi * t * (1.0 + b))) /
                (pi * t * (1.0 - 16.0 * b * b * t * t));
        }
        h[i] = v;
    }
    double energy = 0.0;
    for (double v : h) energy += v * v;
    const double norm = 1.0 / std::sqrt(energy);
    for (double& v : h) v *= norm;
    return h;
}

std::vector<std::uint8_t> generate_bits(std::size_t n, std::uint64_t seed) {
    if (n < 1) throw ContractError("generate_bits: need at least one bit");
    Lfsr16 lfsr(seed);
    const std::size_t corpus_len = std::char_traits<char>::length(kCorpus);
    std::vector<std::uint8_t> bits(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto byte = static_cast<std::uint8_t>(kCorpus[(i / 8) % corpus_len]);
        const std::uint8_t corpus_bit = (byte >> (7 - (i % 8))) & 1u;
        bits[i] = corpus_bit ^ lfsr.next_bit();
    }
    return bits;
}

std::vector<double> synthesize_audio(std::size_t duration_samples, Rng& rng) {
    if (duration_samples < 1) throw ContractError("synthesize_audio: empty duration");
    const double fs = 200e3;
    const AudioConfig cfg{};  // constants documented on the struct
    const double silence_frac = rng.uniform(cfg.silence_frac_min, cfg.silence_frac_max);
    const double syllabic_hz = rng.uniform(cfg.syllabic_rate_min_hz, cfg.syllabic_rate_max_hz);
    const double syllabic_phase = rng.uniform(0.0, 2.0 * pi);

    std::vector<double> audio(duration_samples);
    for (std::size_t i = 0; i + 1 < duration_samples; i += 2) {
        auto [a, b] = rng.normal_pair();
        audio[i] = a;
        audio[i + 1] = b;
    }
    if (duration_samples % 2) audio[duration_samples - 1] = rng.normal();

    const auto fir = lowpass_fir(cfg.cutoff_hz, fs, 401);
    std::vector<double> filtered(duration_samples, 0.0);
    const auto mid = static_cast<std::ptrdiff_t>(fir.size() / 2);
    for (std::size_t i = 0; i < duration_samples; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < fir.size(); ++k) {
            const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + mid -
                                     static_cast<std::ptrdiff_t>(k);
            if (j >= 0 && j < static_cast<std::ptrdiff_t>(duration_samples)) {
                acc += fir[k] * audio[static_cast<std::size_t>(j)];
            }
        }
        filtered[i] = acc;
    }

    for (std::size_t i = 0; i < duration_samples; ++i) {
        const double env = 0.575 + 0.425 * std::sin(2.0 * pi * syllabic_hz *
                                                        static_cast<double>(i) / fs +
                                                    syllabic_phase);
        filtered[i] *= env;
    }

    // One silence gap per 8000-sample period, sized to the drawn fraction
    // so the overall silent share lands inside [min, max] by construction.
    const std::size_t period = 8000;
    const std::size_t ramp = 100;
    std::size_t start = 0;
    while (start < duration_samples) {
        const std::size_t len = std::min(period, duration_samples - start);
        const auto gap = static_cast<std::size_t>(std::llround(silence_frac * static_cast<double>(len)));
        if (gap > 0) {
            const std::size_t off = len > gap ? rng.below(len - gap + 1) : 0;
            const std::size_t g0 = start + off, g1 = start + off + gap;
            std::fill(filtered.begin() + static_cast<std::ptrdiff_t>(g0),
                      filtered.begin() + static_cast<std::ptrdiff_t>(g1), 0.0);
            for (std::size_t r = 0; r < ramp; ++r) {
                const double w = 0.5 - 0.5 * std::cos(pi * static_cast<double>(r) /
                                                      static_cast<double>(ramp));
                if (g0 >= r + 1) filtered[g0 - r - 1] *= w;
                if (g1 + r < duration_samples) filtered[g1 + r] *= w;
            }
        }
        start += len;
    }

    double peak = 0.0;
    for (double v : filtered) peak = std::max(peak, std::abs(v));
    if (peak > 0.0) {
        for (double& v : filtered) v /= peak;
    }
    return filtered;
}

BasebandSignal modulate_bits(Scheme s, std::span<const std::uint8_t> bits, const SynthConfig& cfg) {
    cfg.validate();
    if (is_analog(s)) {
        throw ConfigError("modulate: scheme '" + scheme_name(s) + "' takes audio, not bits");
    }
    if (s == Scheme::Gfsk || s == Scheme::Cpfsk) return fsk_mod(s, bits, cfg);
    const auto table = constellation(s);
    const auto symbols = bits_to_symbols(bits, bits_per_symbol(s));
    std::vector<cplx> points(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) points[i] = table[symbols[i]];
    return shape_linear(points, cfg);
}

BasebandSignal modulate_audio(Scheme s, std::span<const double> audio, const SynthConfig& cfg) {
    cfg.validate();
    if (!is_analog(s)) {
        throw ConfigError("modulate: scheme '" + scheme_name(s) + "' takes bits, not audio");
    }
    if (audio.empty()) throw ContractError("modulate: empty audio payload");
    BasebandSignal out;
    out.sample_rate_hz = cfg.sample_rate_hz;
    out.samples.resize(audio.size());
    if (s == Scheme::Wbfm) {
        double phase = 0.0;
        const double step = 2.0 * pi * cfg.fm_deviation_hz / cfg.sample_rate_hz;
        for (std::size_t i = 0; i < audio.size(); ++i) {
            phase += step * audio[i];
            out.samples[i] = cplx(std::cos(phase), std::sin(phase));
        }
    } else {
        double power = 0.0;
        for (std::size_t i = 0; i < audio.size(); ++i) {
            const double v = 1.0 + cfg.am_index * audio[i];
            out.samples[i] = cplx(v, 0.0);
            power += v * v;
        }
        const double norm = 1.0 / std::sqrt(power / static_cast<double>(audio.size()));
        for (auto& v : out.samples) v *= norm;
    }
    return out;
}

BasebandSignal modulate(Scheme s, const Payload& payload, const SynthConfig& cfg) {
    if (std::holds_alternative<std::vector<std::uint8_t>>(payload)) {
        return modulate_bits(s, std::get<std::vector<std::uint8_t>>(payload), cfg);
    }
    return modulate_audio(s, std::get<std::vector<double>>(payload), cfg);
}

BasebandSignal apply_channel(const BasebandSignal& sig, const SynthConfig& cfg, int snr_db,
                             Rng& rng) {
    if (sig.samples.empty()) throw ContractError("apply_channel: empty signal");
    BasebandSignal out = sig;
    if (cfg.channel.enabled) {
        // Sample-rate offset via linear interpolation.
        const double ppm = rng.uniform(-cfg.channel.rate_offset_max_ppm,
                                       cfg.channel.rate_offset_max_ppm);
        const double ratio = 1.0 + ppm * 1e-6;
        const std::size_t n = out.samples.size();
        std::vector<cplx> resampled(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = static_cast<double>(i) * ratio;
            const auto i0 = std::min(static_cast<std::size_t>(x), n - 1);
            const auto i1 = std::min(i0 + 1, n - 1);
            const double frac = x - static_cast<double>(i0);
            resampled[i] = out.samples[i0] * (1.0 - frac) + out.samples[i1] * frac;
        }
        out.samples = std::move(resampled);

        const double cfo = rng.uniform(-cfg.channel.cfo_max_hz, cfg.channel.cfo_max_hz);
        const double w = 2.0 * pi * cfo / out.sample_rate_hz;
        for (std::size_t i = 0; i < out.samples.size(); ++i) {
            out.samples[i] *= cplx(std::cos(w * static_cast<double>(i)),
                                   std::sin(w * static_cast<double>(i)));
        }

        if (cfg.channel.multipath) {
            const double a1 = rng.uniform(0.05, 0.30);
            const double th1 = rng.uniform(0.0, 2.0 * pi);
            const double a2 = rng.uniform(0.02, 0.15);
            const double th2 = rng.uniform(0.0, 2.0 * pi);
            const cplx t1 = a1 * cplx(std::cos(th1), std::sin(th1));
            const cplx t2 = a2 * cplx(std::cos(th2), std::sin(th2));
            std::vector<cplx> faded(out.samples.size());
            for (std::size_t i = 0; i < out.samples.size(); ++i) {
                cplx v = out.samples[i];
                if (i >= 1) v += t1 * out.samples[i - 1];
                if (i >= 2) v += t2 * out.samples[i - 2];
                faded[i] = v;
            }
            out.samples = std::move(faded);
        }
    }

    const double signal_power = measure_power(out);
    const double noise_var = signal_power * std::pow(10.0, -static_cast<double>(snr_db) / 10.0);
    const double component = std::sqrt(noise_var / 2.0);
    for (auto& v : out.samples) {
        auto [z0, z1] = rng.normal_pair();
        v += cplx(component * z0, component * z1);
    }
    out.snr_db = snr_db;
    return out;
}

double measure_power(const BasebandSignal& sig) {
    if (sig.samples.empty()) throw ContractError("measure_power: empty signal");
    double acc = 0.0;
    for (const auto& v : sig.samples) acc += std::norm(v);
    return acc / static_cast<double>(sig.samples.size());
}

}  // namespace modrec
