#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nsforge/common.hpp"

namespace nsforge {

// Mono waveform. Samples are dimensionless amplitudes, nominally in [-1, 1];
// the paper-default pipelines use 16 kHz and 64000-sample (4 s) notes.
struct AudioBuffer {
    std::vector<double> samples;
    int sample_rate = 16000;

    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

// 8-bit mu-law codes, one per source sample.
struct MuLawCode {
    std::vector<uint8_t> codes;
};

constexpr int kQuantizationLevels = 256;
constexpr double kMuLawMu = 255.0;

inline bool is_valid_velocity(int v) {
    return v == 25 || v == 50 || v == 75 || v == 100 || v == 127;
}

struct SynthNoteSpec {
    int pitch = 60;              // MIDI, piano range [21, 108]
    int velocity = 100;          // one of {25, 50, 75, 100, 127}
    int n_harmonics = 8;
    double harmonic_decay = 1.0; // amplitude of harmonic k scales as k^-decay
    uint64_t seed = 0;
};

// Companding map F(x) = sign(x) ln(1 + 255|x|) / ln(256), quantized to 256
// codes with round-half-up so that x = 0 lands on code 128. Out-of-range
// samples are clamped; the clamp count is reported through `clamped` when the
// caller passes a counter.
inline MuLawCode mulaw_encode(const AudioBuffer& x, int64_t* clamped = nullptr) {
    MuLawCode out;
    out.codes.reserve(x.samples.size());
    int64_t n_clamped = 0;
    const double inv_log1p_mu = 1.0 / std::log1p(kMuLawMu);
    for (size_t i = 0; i < x.samples.size(); ++i) {
        double s = x.samples[i];
        if (!std::isfinite(s))
            throw std::invalid_argument("mulaw_encode: non-finite sample at index " +
                                        std::to_string(i));
        if (s > 1.0) { s = 1.0; ++n_clamped; }
        if (s < -1.0) { s = -1.0; ++n_clamped; }
        double f = std::copysign(std::log1p(kMuLawMu * std::abs(s)) * inv_log1p_mu, s);
        double scaled = (f + 1.0) / 2.0 * 255.0;
        int code = static_cast<int>(std::floor(scaled + 0.5));
        if (code < 0) code = 0;
        if (code > 255) code = 255;
        out.codes.push_back(static_cast<uint8_t>(code));
    }
    if (clamped) *clamped = n_clamped;
    return out;
}

inline double mulaw_decode_sample(int code) {
    if (code < 0 || code > 255)
        throw std::invalid_argument("mulaw_decode: code out of range [0,255]: " +
                                    std::to_string(code));
    double u = 2.0 * code / 255.0 - 1.0;
    return std::copysign((std::pow(1.0 + kMuLawMu, std::abs(u)) - 1.0) / kMuLawMu, u);
}

inline AudioBuffer mulaw_decode(const MuLawCode& c, int sample_rate = 16000) {
    AudioBuffer out;
    out.sample_rate = sample_rate;
    out.samples.reserve(c.codes.size());
    for (uint8_t code : c.codes) out.samples.push_back(mulaw_decode_sample(code));
    return out;
}

// Scales so that max |sample| = 1. The scale factor is one positive scalar,
// so relative shape (and the argmax position) is preserved.
inline AudioBuffer peak_normalize(const AudioBuffer& x) {
    double peak = 0.0;
    for (double s : x.samples) peak = std::max(peak, std::abs(s));
    if (peak == 0.0)
        throw std::invalid_argument("peak_normalize: silent buffer");
    AudioBuffer out;
    out.sample_rate = x.sample_rate;
    out.samples.reserve(x.samples.size());
    double g = 1.0 / peak;
    for (double s : x.samples) out.samples.push_back(s * g);
    return out;
}

// Additive harmonic note: fundamental at the MIDI pitch, harmonics rolled off
// as k^-decay, amplitude linear in velocity. Sustains for min(3 s, duration)
// and then releases exponentially. Harmonics at or above Nyquist are skipped.
inline AudioBuffer synth_note(const SynthNoteSpec& spec, double duration_s,
                              int sample_rate) {
    if (duration_s <= 0.0)
        throw std::invalid_argument("synth_note: duration must be > 0");
    if (spec.pitch < 21 || spec.pitch > 108)
        throw std::invalid_argument("synth_note: pitch outside MIDI piano range [21,108]");
    if (!is_valid_velocity(spec.velocity))
        throw std::invalid_argument("synth_note: velocity must be one of {25,50,75,100,127}");
    if (spec.n_harmonics < 1)
        throw std::invalid_argument("synth_note: need at least one harmonic");
    if (spec.harmonic_decay <= 0.0)
        throw std::invalid_argument("synth_note: harmonic_decay must be > 0");

    double f0 = midi_to_hz(spec.pitch);
    double nyquist = sample_rate / 2.0;
    if (f0 >= nyquist)
        throw std::invalid_argument("synth_note: fundamental at or above Nyquist");

    Rng rng(spec.seed);
    std::vector<double> amp(spec.n_harmonics), phase(spec.n_harmonics);
    double amp_total = 0.0;
    for (int k = 0; k < spec.n_harmonics; ++k) {
        amp[k] = std::pow(static_cast<double>(k + 1), -spec.harmonic_decay);
        phase[k] = rng.uniform(0.0, 2.0 * kPi);
        amp_total += amp[k];
    }
    // Normalize so the velocity-127 peak stays within [-1, 1].
    double gain = (spec.velocity / 127.0) / amp_total;

    const double sustain_end = std::min(3.0, duration_s);
    const double release_tau = 0.3;
    int64_t n = static_cast<int64_t>(std::llround(duration_s * sample_rate));

    AudioBuffer out;
    out.sample_rate = sample_rate;
    out.samples.resize(n);
    for (int64_t i = 0; i < n; ++i) {
        double t = static_cast<double>(i) / sample_rate;
        double env = t <= sustain_end ? 1.0 : std::exp(-(t - sustain_end) / release_tau);
        double s = 0.0;
        for (int k = 0; k < spec.n_harmonics; ++k) {
            double fk = f0 * (k + 1);
            if (fk >= nyquist) break;
            s += amp[k] * std::sin(2.0 * kPi * fk * t + phase[k]);
        }
        out.samples[i] = gain * env * s;
    }
    return out;
}

}  // namespace nsforge
