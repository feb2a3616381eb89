#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

#include "nsforge/audio.hpp"
#include "nsforge/fft.hpp"

namespace nsforge {

struct StftConfig {
    int fft_size = 1024;
    int hop_size = 256;
    // window: Hann (the only supported analysis window)

    bool operator==(const StftConfig&) const = default;
};

inline void validate(const StftConfig& cfg) {
    if (cfg.fft_size < 2 || (cfg.fft_size & (cfg.fft_size - 1)) != 0)
        throw std::invalid_argument("StftConfig: fft_size must be a power of two");
    if (cfg.hop_size < 1 || cfg.hop_size > cfg.fft_size)
        throw std::invalid_argument("StftConfig: need 1 <= hop_size <= fft_size");
}

// Periodic Hann; satisfies constant overlap-add of the squared window at
// hop = fft_size / 4.
inline std::vector<double> hann_window(int n) {
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
    return w;
}

// F x B complex frames, B = fft_size/2 + 1. Frame f covers samples
// [f*hop, f*hop + fft_size), zero-padded past the end of the buffer.
struct ComplexSpectrogram {
    std::vector<std::complex<double>> cells;  // row-major, frame-major
    int num_frames = 0;
    int num_bins = 0;
    StftConfig config;
    int64_t num_samples = 0;  // source length, needed for exact inversion
    int sample_rate = 16000;

    std::complex<double>& at(int f, int b) { return cells[size_t(f) * num_bins + b]; }
    const std::complex<double>& at(int f, int b) const {
        return cells[size_t(f) * num_bins + b];
    }
    double bin_hz(int b) const {
        return static_cast<double>(b) * sample_rate / config.fft_size;
    }
};

inline ComplexSpectrogram stft(const AudioBuffer& x, const StftConfig& cfg) {
    validate(cfg);
    const int64_t n = static_cast<int64_t>(x.samples.size());
    if (n < cfg.fft_size)
        throw std::invalid_argument("stft: buffer shorter than one frame");
    const int num_frames = static_cast<int>((n + cfg.hop_size - 1) / cfg.hop_size);
    const int num_bins = cfg.fft_size / 2 + 1;

    ComplexSpectrogram s;
    s.num_frames = num_frames;
    s.num_bins = num_bins;
    s.config = cfg;
    s.num_samples = n;
    s.sample_rate = x.sample_rate;
    s.cells.resize(static_cast<size_t>(num_frames) * num_bins);

    const std::vector<double> win = hann_window(cfg.fft_size);
    Fft fft(cfg.fft_size);
    std::vector<std::complex<double>> buf(cfg.fft_size);
    for (int f = 0; f < num_frames; ++f) {
        const int64_t start = static_cast<int64_t>(f) * cfg.hop_size;
        for (int i = 0; i < cfg.fft_size; ++i) {
            int64_t idx = start + i;
            double v = idx < n ? x.samples[idx] : 0.0;
            buf[i] = {v * win[i], 0.0};
        }
        fft.forward(buf.data());
        for (int b = 0; b < num_bins; ++b) s.at(f, b) = buf[b];
    }
    return s;
}

// Least-squares inverse: windowed overlap-add divided by the summed squared
// window envelope. Interior reconstruction of stft(x) is exact to rounding.
inline AudioBuffer istft(const ComplexSpectrogram& s) {
    validate(s.config);
    if (s.num_bins != s.config.fft_size / 2 + 1)
        throw std::invalid_argument("istft: bin count does not match fft_size");
    if (static_cast<int64_t>(s.cells.size()) !=
        static_cast<int64_t>(s.num_frames) * s.num_bins)
        throw std::invalid_argument("istft: cell count does not match frame/bin counts");

    const int n_fft = s.config.fft_size;
    const int hop = s.config.hop_size;
    const int64_t out_len =
        s.num_samples > 0
            ? s.num_samples
            : static_cast<int64_t>(s.num_frames - 1) * hop + n_fft;

    const std::vector<double> win = hann_window(n_fft);
    Fft fft(n_fft);
    std::vector<double> acc(out_len, 0.0), wsq(out_len, 0.0);
    std::vector<std::complex<double>> buf(n_fft);
    for (int f = 0; f < s.num_frames; ++f) {
        for (int b = 0; b < s.num_bins; ++b) buf[b] = s.at(f, b);
        for (int b = s.num_bins; b < n_fft; ++b) buf[b] = std::conj(s.at(f, n_fft - b));
        fft.inverse(buf.data());
        const int64_t start = static_cast<int64_t>(f) * hop;
        for (int i = 0; i < n_fft; ++i) {
            int64_t idx = start + i;
            if (idx >= out_len) break;
            acc[idx] += buf[i].real() * win[i];
            wsq[idx] += win[i] * win[i];
        }
    }
    AudioBuffer out;
    out.sample_rate = s.sample_rate;
    out.samples.resize(out_len);
    for (int64_t i = 0; i < out_len; ++i)
        out.samples[i] = wsq[i] > 1e-12 ? acc[i] / wsq[i] : 0.0;
    return out;
}

}  // namespace nsforge
