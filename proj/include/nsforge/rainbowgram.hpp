#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "nsforge/cqt.hpp"
#include "nsforge/png.hpp"
#include "nsforge/spectral.hpp"

namespace nsforge {

// The paper's signature display: constant-Q log power as intensity, per-bin
// phase derivative (instantaneous frequency) as color.
struct Rainbowgram {
    int num_frames = 0;
    int num_bins = 0;
    std::vector<double> magnitude;  // [0, 1]
    std::vector<double> hue;        // [-1, 1), units of pi

    double mag(int f, int b) const { return magnitude[size_t(f) * num_bins + b]; }
    double hue_at(int f, int b) const { return hue[size_t(f) * num_bins + b]; }
};

// Phase derivative of a CQT against each bin's own rotation: a harmonic at
// exactly the bin frequency reads as 0; an offset harmonic reads as
// (f_harm - f_bin) * hop / sample_rate cycles per hop.
inline PhasePlane cqt_instantaneous_frequency(const CqtResult& c) {
    if (c.num_frames < 2)
        throw std::invalid_argument("cqt_instantaneous_frequency: need >= 2 frames");
    PhasePlane out;
    out.num_frames = c.num_frames;
    out.num_bins = c.num_bins;
    out.values.resize(c.cells.size());
    std::vector<double> prev(c.num_bins), cur(c.num_bins);
    for (int b = 0; b < c.num_bins; ++b) {
        prev[b] = std::arg(c.at(0, b));
        out.at(0, b) = wrap_phase_units(prev[b] / kPi);
    }
    for (int f = 1; f < c.num_frames; ++f) {
        for (int b = 0; b < c.num_bins; ++b) {
            cur[b] = std::arg(c.at(f, b));
            double bin_advance =
                2.0 * kPi * cqt_bin_hz(c.config, b) * c.config.hop_size / c.sample_rate;
            out.at(f, b) = wrap_phase_units(wrap_pm_pi(cur[b] - prev[b] - bin_advance) / kPi);
        }
        std::swap(prev, cur);
    }
    return out;
}

inline Rainbowgram render_rainbowgram(const AudioBuffer& x, const CqtConfig& cfg) {
    CqtResult c = cqt(x, cfg);
    Rainbowgram r;
    r.num_frames = c.num_frames;
    r.num_bins = c.num_bins;
    r.magnitude.assign(c.cells.size(), 0.0);
    r.hue.assign(c.cells.size(), 0.0);

    double peak_p = 0.0;
    for (const auto& cell : c.cells) peak_p = std::max(peak_p, std::norm(cell));
    if (peak_p > 0.0) {
        const double floor_p = peak_p * std::pow(10.0, kMagnitudeFloorDb / 10.0);
        const double log_floor = std::log(floor_p + kLogPowerEps);
        const double log_peak = std::log(peak_p + kLogPowerEps);
        const double inv_range = 1.0 / (log_peak - log_floor);
        for (size_t i = 0; i < c.cells.size(); ++i) {
            double p = std::max(std::norm(c.cells[i]), floor_p);
            r.magnitude[i] = (std::log(p + kLogPowerEps) - log_floor) * inv_range;
        }
        if (c.num_frames >= 2) {
            PhasePlane ifreq = cqt_instantaneous_frequency(c);
            r.hue = std::move(ifreq.values);
        }
    }
    return r;
}

namespace detail {

// Six-anchor cyclic rainbow, linear interpolation, wrapping back to the
// first anchor at u = 1.
inline void cyclic_rainbow(double u, double rgb[3]) {
    static const double anchors[6][3] = {
        {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 1, 1}, {0, 0, 1}, {1, 0, 1}};
    u -= std::floor(u);
    double t = u * 6.0;
    int i = std::min(5, static_cast<int>(t));
    double frac = t - i;
    int j = (i + 1) % 6;
    for (int k = 0; k < 3; ++k)
        rgb[k] = anchors[i][k] * (1.0 - frac) + anchors[j][k] * frac;
}

}  // namespace detail

// One pixel per cell: time left-to-right, frequency bottom-to-top,
// hue -> cyclic color, magnitude -> intensity over black.
inline void rainbowgram_to_image(const Rainbowgram& r, const std::string& path) {
    if (r.num_frames < 1 || r.num_bins < 1)
        throw std::invalid_argument("rainbowgram_to_image: empty rainbowgram");
    const int w = r.num_frames, h = r.num_bins;
    std::vector<uint8_t> rgb(static_cast<size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y) {
        int b = h - 1 - y;  // low frequencies at the bottom
        for (int f = 0; f < w; ++f) {
            double col[3];
            detail::cyclic_rainbow((r.hue_at(f, b) + 1.0) / 2.0, col);
            double m = std::clamp(r.mag(f, b), 0.0, 1.0);
            size_t o = (static_cast<size_t>(y) * w + f) * 3;
            for (int k = 0; k < 3; ++k)
                rgb[o + k] = static_cast<uint8_t>(std::lround(col[k] * m * 255.0));
        }
    }
    write_png_rgb8(path, w, h, rgb);
}

}  // namespace nsforge
