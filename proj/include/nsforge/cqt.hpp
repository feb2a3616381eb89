#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

#include "nsforge/audio.hpp"
#include "nsforge/common.hpp"
#include "nsforge/parallel.hpp"

namespace nsforge {

struct CqtConfig {
    int min_pitch = 24;        // C2
    int max_pitch = 96;        // C8
    int bins_per_octave = 40;
    int hop_size = 256;
    double filter_scale = 0.8;  // multiplies kernel window length
};

inline void validate(const CqtConfig& cfg) {
    if (cfg.min_pitch >= cfg.max_pitch)
        throw std::invalid_argument("CqtConfig: min_pitch must be < max_pitch");
    if (cfg.bins_per_octave < 1 || cfg.hop_size < 1 || cfg.filter_scale <= 0.0)
        throw std::invalid_argument("CqtConfig: invalid parameters");
}

inline int cqt_num_bins(const CqtConfig& cfg) {
    return (cfg.max_pitch - cfg.min_pitch) * cfg.bins_per_octave / 12;
}

inline double cqt_bin_hz(const CqtConfig& cfg, int b) {
    double pitch = cfg.min_pitch + 12.0 * b / cfg.bins_per_octave;
    return 440.0 * std::pow(2.0, (pitch - 69.0) / 12.0);
}

// F x B complex constant-Q cells; kernels are anchored at each frame center,
// so phase is measured relative to the frame grid.
struct CqtResult {
    std::vector<std::complex<double>> cells;  // frame-major
    int num_frames = 0;
    int num_bins = 0;
    CqtConfig config;
    int sample_rate = 16000;

    std::complex<double>& at(int f, int b) { return cells[size_t(f) * num_bins + b]; }
    const std::complex<double>& at(int f, int b) const {
        return cells[size_t(f) * num_bins + b];
    }
};

// Direct per-frame inner products with windowed complex-exponential kernels.
// Kernel length is filter_scale * Q / f_b seconds with Q = 1/(2^(1/bpo) - 1).
inline CqtResult cqt(const AudioBuffer& x, const CqtConfig& cfg) {
    validate(cfg);
    const int num_bins = cqt_num_bins(cfg);
    const double q = 1.0 / (std::pow(2.0, 1.0 / cfg.bins_per_octave) - 1.0);
    const int64_t n = static_cast<int64_t>(x.samples.size());

    struct Kernel {
        std::vector<std::complex<double>> taps;
        int center;
    };
    std::vector<Kernel> kernels(num_bins);
    for (int b = 0; b < num_bins; ++b) {
        double fb = cqt_bin_hz(cfg, b);
        int len = std::max<int>(
            3, static_cast<int>(std::lround(cfg.filter_scale * q * x.sample_rate / fb)));
        if (len % 2 == 0) ++len;
        if (len > n)
            throw std::invalid_argument(
                "cqt: audio shorter than the lowest-frequency kernel (" +
                std::to_string(len) + " samples)");
        Kernel& k = kernels[b];
        k.center = len / 2;
        k.taps.resize(len);
        double wsum = 0.0;
        for (int i = 0; i < len; ++i)
            wsum += 0.5 - 0.5 * std::cos(2.0 * kPi * i / (len - 1));
        for (int i = 0; i < len; ++i) {
            double w = (0.5 - 0.5 * std::cos(2.0 * kPi * i / (len - 1))) / wsum;
            double ang = -2.0 * kPi * fb * (i - k.center) / x.sample_rate;
            k.taps[i] = std::polar(w, ang);
        }
    }

    CqtResult out;
    out.num_frames = static_cast<int>((n + cfg.hop_size - 1) / cfg.hop_size);
    out.num_bins = num_bins;
    out.config = cfg;
    out.sample_rate = x.sample_rate;
    out.cells.resize(static_cast<size_t>(out.num_frames) * num_bins);

    const double* sig = x.samples.data();
    parallel_for(out.num_frames, [&](int64_t f) {
        const int64_t center = f * cfg.hop_size;
        for (int b = 0; b < num_bins; ++b) {
            const Kernel& k = kernels[b];
            int64_t start = center - k.center;
            int len = static_cast<int>(k.taps.size());
            int lo = static_cast<int>(std::max<int64_t>(0, -start));
            int hi = static_cast<int>(std::min<int64_t>(len, n - start));
            double re = 0.0, im = 0.0;
            for (int i = lo; i < hi; ++i) {
                double s = sig[start + i];
                re += s * k.taps[i].real();
                im += s * k.taps[i].imag();
            }
            out.cells[size_t(f) * num_bins + b] = {re, im};
        }
    });
    return out;
}

}  // namespace nsforge
