#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "nsforge/common.hpp"
#include "nsforge/stft.hpp"

namespace nsforge {

enum class MagnitudeScale { log_power_peak_normalized, linear };

// F x B real plane. In log-power scale the values live in [0, 1] and carry
// the floor/peak metadata needed to invert back to linear magnitudes.
struct MagnitudePlane {
    std::vector<double> values;
    int num_frames = 0;
    int num_bins = 0;
    MagnitudeScale scale = MagnitudeScale::linear;
    double log_floor = 0.0;  // ln(power) mapped to 0
    double log_peak = 0.0;   // ln(power) mapped to 1
    StftConfig config;
    int64_t num_samples = 0;
    int sample_rate = 16000;

    double& at(int f, int b) { return values[size_t(f) * num_bins + b]; }
    double at(int f, int b) const { return values[size_t(f) * num_bins + b]; }
    double bin_hz(int b) const {
        return static_cast<double>(b) * sample_rate / config.fft_size;
    }
};

// Phase-like plane in units of pi radians, every entry in [-1, 1).
struct PhasePlane {
    std::vector<double> values;
    int num_frames = 0;
    int num_bins = 0;

    double& at(int f, int b) { return values[size_t(f) * num_bins + b]; }
    double at(int f, int b) const { return values[size_t(f) * num_bins + b]; }
};

constexpr double kLogPowerEps = 1e-10;
constexpr double kMagnitudeFloorDb = -100.0;  // relative to peak power

// Wraps to [-1, 1) (units of pi).
inline double wrap_phase_units(double x) {
    return x - 2.0 * std::floor((x + 1.0) / 2.0);
}

inline double wrap_pm_pi(double x) {
    return x - 2.0 * kPi * std::floor((x + kPi) / (2.0 * kPi));
}

// log(|S|^2 + eps) with a -100 dB floor relative to peak, affinely mapped so
// the floor sits at 0 and the peak at exactly 1. Invertible through the
// stored log_floor / log_peak.
inline MagnitudePlane log_power_magnitude(const ComplexSpectrogram& s) {
    double peak_p = 0.0;
    for (const auto& c : s.cells) peak_p = std::max(peak_p, std::norm(c));
    if (peak_p == 0.0)
        throw std::invalid_argument("log_power_magnitude: all-zero spectrogram");
    const double floor_p = peak_p * std::pow(10.0, kMagnitudeFloorDb / 10.0);
    const double log_floor = std::log(floor_p + kLogPowerEps);
    const double log_peak = std::log(peak_p + kLogPowerEps);
    if (log_peak - log_floor < 1e-9)
        throw std::invalid_argument("log_power_magnitude: degenerate dynamic range");

    MagnitudePlane m;
    m.num_frames = s.num_frames;
    m.num_bins = s.num_bins;
    m.scale = MagnitudeScale::log_power_peak_normalized;
    m.log_floor = log_floor;
    m.log_peak = log_peak;
    m.config = s.config;
    m.num_samples = s.num_samples;
    m.sample_rate = s.sample_rate;
    m.values.resize(s.cells.size());
    const double inv_range = 1.0 / (log_peak - log_floor);
    for (size_t i = 0; i < s.cells.size(); ++i) {
        double p = std::max(std::norm(s.cells[i]), floor_p);
        m.values[i] = (std::log(p + kLogPowerEps) - log_floor) * inv_range;
    }
    return m;
}

// Inverse of log_power_magnitude: linear |S| recovered from the stored
// floor/peak metadata (exact above the floor, up to rounding).
inline MagnitudePlane linear_magnitude(const MagnitudePlane& m) {
    if (m.scale == MagnitudeScale::linear) return m;
    MagnitudePlane out = m;
    out.scale = MagnitudeScale::linear;
    const double range = m.log_peak - m.log_floor;
    for (size_t i = 0; i < m.values.size(); ++i) {
        double p = std::exp(m.values[i] * range + m.log_floor) - kLogPowerEps;
        out.values[i] = std::sqrt(std::max(p, 0.0));
    }
    return out;
}

inline MagnitudePlane magnitude_of(const ComplexSpectrogram& s) {
    MagnitudePlane m;
    m.num_frames = s.num_frames;
    m.num_bins = s.num_bins;
    m.scale = MagnitudeScale::linear;
    m.config = s.config;
    m.num_samples = s.num_samples;
    m.sample_rate = s.sample_rate;
    m.values.resize(s.cells.size());
    for (size_t i = 0; i < s.cells.size(); ++i) m.values[i] = std::abs(s.cells[i]);
    return m;
}

// 10 at DC, linearly down to 1 at 4 kHz, 1 above.
inline double perceptual_weight(double freq_hz) {
    if (freq_hz < 0.0)
        throw std::invalid_argument("perceptual_weight: negative frequency");
    return 10.0 - 9.0 * std::min(freq_hz, 4000.0) / 4000.0;
}

// Mean over all cells of w(f_bin) * (pred - target)^2. The differentiable
// version used in training lives in ops.hpp; this is the plane-level value.
inline double weighted_mse(const MagnitudePlane& pred, const MagnitudePlane& target) {
    if (pred.num_frames != target.num_frames || pred.num_bins != target.num_bins)
        throw std::invalid_argument("weighted_mse: shape mismatch");
    double acc = 0.0;
    for (int f = 0; f < pred.num_frames; ++f)
        for (int b = 0; b < pred.num_bins; ++b) {
            double d = pred.at(f, b) - target.at(f, b);
            acc += perceptual_weight(pred.bin_hz(b)) * d * d;
        }
    return acc / (static_cast<double>(pred.num_frames) * pred.num_bins);
}

// Circular-normal negative log likelihood shape: mean(1 - cos(pi * (p - t))),
// period 2 in the difference, zero iff pred == target (mod 2).
inline double circular_phase_loss(const PhasePlane& pred, const PhasePlane& target) {
    if (pred.num_frames != target.num_frames || pred.num_bins != target.num_bins)
        throw std::invalid_argument("circular_phase_loss: shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < pred.values.size(); ++i) {
        double p = pred.values[i], t = target.values[i];
        if (!(p >= -1.0 && p < 1.0) || !(t >= -1.0 && t < 1.0))
            throw std::invalid_argument("circular_phase_loss: phase outside [-1,1)");
        acc += 1.0 - std::cos(kPi * (p - t));
    }
    return acc / static_cast<double>(pred.values.size());
}

// Per-bin finite difference of unwrapped phase along time, measured against
// each bin's own rotation rate (so a tone sitting exactly on a bin center
// reads as zero). First frame carries the raw phase. Units of pi.
inline PhasePlane instantaneous_frequency(const ComplexSpectrogram& s) {
    if (s.num_frames < 2)
        throw std::invalid_argument("instantaneous_frequency: need at least 2 frames");
    PhasePlane out;
    out.num_frames = s.num_frames;
    out.num_bins = s.num_bins;
    out.values.resize(s.cells.size());
    std::vector<double> prev(s.num_bins), cur(s.num_bins);
    for (int b = 0; b < s.num_bins; ++b) {
        prev[b] = std::arg(s.at(0, b));
        out.at(0, b) = wrap_phase_units(prev[b] / kPi);
    }
    for (int f = 1; f < s.num_frames; ++f) {
        for (int b = 0; b < s.num_bins; ++b) {
            cur[b] = std::arg(s.at(f, b));
            double bin_advance =
                2.0 * kPi * b * s.config.hop_size / s.config.fft_size;
            double d = wrap_pm_pi(cur[b] - prev[b] - bin_advance);
            out.at(f, b) = wrap_phase_units(d / kPi);
        }
        std::swap(prev, cur);
    }
    return out;
}

// Assemble audio from a linear magnitude plane and a phase plane (units of
// pi). Used by the rejected phase-regression baseline variants.
inline AudioBuffer audio_from_magnitude_phase(const MagnitudePlane& mag,
                                              const PhasePlane& phase) {
    if (mag.scale != MagnitudeScale::linear)
        throw std::invalid_argument("audio_from_magnitude_phase: need linear magnitudes");
    if (mag.num_frames != phase.num_frames || mag.num_bins != phase.num_bins)
        throw std::invalid_argument("audio_from_magnitude_phase: shape mismatch");
    ComplexSpectrogram s;
    s.num_frames = mag.num_frames;
    s.num_bins = mag.num_bins;
    s.config = mag.config;
    s.num_samples = mag.num_samples;
    s.sample_rate = mag.sample_rate;
    s.cells.resize(mag.values.size());
    for (size_t i = 0; i < mag.values.size(); ++i) {
        double a = kPi * phase.values[i];
        s.cells[i] = std::polar(mag.values[i], a);
    }
    return istft(s);
}

struct GriffinLimResult {
    AudioBuffer audio;
    std::vector<double> consistency_trace;  // e_k = || |stft(x_k)| - M ||_2
};

// Alternating projection between signals consistent with some STFT and
// spectra with the target magnitude. With the least-squares istft this is the
// classic scheme whose consistency error never increases.
inline GriffinLimResult griffin_lim(const MagnitudePlane& target, int iters,
                                    uint64_t seed) {
    if (iters < 1) throw std::invalid_argument("griffin_lim: iters must be >= 1");
    if (target.scale != MagnitudeScale::linear)
        throw std::invalid_argument("griffin_lim: need linear-scale magnitudes");
    for (double v : target.values)
        if (!std::isfinite(v))
            throw std::invalid_argument("griffin_lim: non-finite magnitude");

    ComplexSpectrogram s;
    s.num_frames = target.num_frames;
    s.num_bins = target.num_bins;
    s.config = target.config;
    s.num_samples = target.num_samples;
    s.sample_rate = target.sample_rate;
    s.cells.resize(target.values.size());

    Rng rng(seed);
    for (size_t i = 0; i < target.values.size(); ++i) {
        double a = rng.uniform(-kPi, kPi);
        s.cells[i] = std::polar(target.values[i], a);
    }

    GriffinLimResult res;
    res.consistency_trace.reserve(iters);
    AudioBuffer x = istft(s);
    for (int k = 0; k < iters; ++k) {
        ComplexSpectrogram sx = stft(x, target.config);
        double err = 0.0;
        for (size_t i = 0; i < sx.cells.size(); ++i) {
            double d = std::abs(sx.cells[i]) - target.values[i];
            err += d * d;
        }
        res.consistency_trace.push_back(std::sqrt(err));
        for (size_t i = 0; i < sx.cells.size(); ++i) {
            double a = std::arg(sx.cells[i]);
            sx.cells[i] = std::polar(target.values[i], a);
        }
        x = istft(sx);
    }
    res.audio = std::move(x);
    return res;
}

}  // namespace nsforge
