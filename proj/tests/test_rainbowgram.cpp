#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "nsforge/audio.hpp"
#include "nsforge/rainbowgram.hpp"

using namespace nsforge;

namespace {

AudioBuffer tone(double freq_hz, double duration_s) {
    AudioBuffer b;
    b.sample_rate = 16000;
    b.samples.resize(static_cast<int64_t>(duration_s * 16000));
    for (size_t i = 0; i < b.samples.size(); ++i)
        b.samples[i] = std::sin(2.0 * kPi * freq_hz * i / 16000.0);
    return b;
}

// Narrow range keeps the lowest kernel short enough for 1-2 s clips.
CqtConfig short_cfg() {
    CqtConfig cfg;
    cfg.min_pitch = 48;
    cfg.max_pitch = 84;
    return cfg;
}

int peak_bin(const CqtResult& c) {
    int best = 0;
    double best_mag = -1.0;
    for (int b = 0; b < c.num_bins; ++b) {
        double acc = 0.0;
        for (int f = 0; f < c.num_frames; ++f) acc += std::abs(c.at(f, b));
        if (acc > best_mag) {
            best_mag = acc;
            best = b;
        }
    }
    return best;
}

struct DecodedPng {
    uint32_t width = 0, height = 0;
    std::vector<uint8_t> rgb;
};

// Decoder for this project's own stored-deflate PNGs (enough for tests).
DecodedPng read_stored_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::vector<uint8_t> b((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
    auto be32 = [&](size_t o) {
        return (uint32_t(b[o]) << 24) | (uint32_t(b[o + 1]) << 16) |
               (uint32_t(b[o + 2]) << 8) | b[o + 3];
    };
    DecodedPng out;
    out.width = be32(16);
    out.height = be32(20);
    // Collect the zlib stream from IDAT chunks, then walk stored blocks.
    std::vector<uint8_t> z;
    size_t pos = 8;
    while (pos + 8 <= b.size()) {
        uint32_t len = be32(pos);
        std::string type(reinterpret_cast<char*>(&b[pos + 4]), 4);
        if (type == "IDAT")
            z.insert(z.end(), b.begin() + pos + 8, b.begin() + pos + 8 + len);
        pos += 12 + len;
    }
    std::vector<uint8_t> raw;
    size_t zp = 2;  // skip zlib header
    for (;;) {
        uint8_t final = z[zp] & 1;
        REQUIRE((z[zp] >> 1) == 0);  // stored block
        uint32_t len = z[zp + 1] | (z[zp + 2] << 8);
        raw.insert(raw.end(), z.begin() + zp + 5, z.begin() + zp + 5 + len);
        zp += 5 + len;
        if (final) break;
    }
    // Strip filter bytes.
    size_t stride = 1 + size_t(out.width) * 3;
    for (uint32_t y = 0; y < out.height; ++y) {
        REQUIRE(raw[y * stride] == 0);
        out.rgb.insert(out.rgb.end(), raw.begin() + y * stride + 1,
                       raw.begin() + (y + 1) * stride);
    }
    return out;
}

}  // namespace

TEST_CASE("cqt defaults give 240 bins") {
    CHECK(cqt_num_bins(CqtConfig{}) == 240);
}

TEST_CASE("cqt puts a 440 Hz tone at bin 150 under defaults") {
    auto c = cqt(tone(440.0, 4.0), CqtConfig{});
    CHECK(c.num_bins == 240);
    CHECK(peak_bin(c) == 150);
}

TEST_CASE("cqt of silence is all zero") {
    AudioBuffer z;
    z.samples.assign(32000, 0.0);
    auto c = cqt(z, short_cfg());
    for (const auto& cell : c.cells) CHECK(std::abs(cell) == 0.0);
}

TEST_CASE("cqt rejects audio shorter than the lowest kernel") {
    CHECK_THROWS_AS(cqt(tone(440.0, 0.2), short_cfg()), std::invalid_argument);
}

TEST_CASE("cqt pitch-shift covariance") {
    auto cfg = short_cfg();
    int b60 = peak_bin(cqt(tone(midi_to_hz(60), 2.0), cfg));
    for (int k : {3, 6, 12}) {  // k chosen so k * 40 / 12 is exact
        int bk = peak_bin(cqt(tone(midi_to_hz(60 + k), 2.0), cfg));
        CHECK(std::abs((bk - b60) - k * cfg.bins_per_octave / 12) <= 1);
    }
}

TEST_CASE("rainbowgram hue is steady for an on-center tone") {
    auto cfg = short_cfg();
    auto r = render_rainbowgram(tone(midi_to_hz(69), 2.0), cfg);
    int fb = (69 - cfg.min_pitch) * cfg.bins_per_octave / 12;
    double mean = 0.0, var = 0.0;
    int n = 0;
    for (int f = 2; f < r.num_frames - 24; ++f) {  // clear of kernel edges
        mean += r.hue_at(f, fb);
        ++n;
    }
    mean /= n;
    for (int f = 2; f < r.num_frames - 24; ++f) {
        double d = r.hue_at(f, fb) - mean;
        var += d * d;
    }
    CHECK(std::sqrt(var / n) < 0.05);
}

TEST_CASE("rainbowgram ranges: magnitude in [0,1], hue in [-1,1)") {
    SynthNoteSpec spec;
    spec.pitch = 60;
    spec.n_harmonics = 5;
    spec.seed = 2;
    auto r = render_rainbowgram(synth_note(spec, 2.0, 16000), short_cfg());
    for (double m : r.magnitude) {
        CHECK(m >= 0.0);
        CHECK(m <= 1.0);
    }
    for (double h : r.hue) {
        CHECK(h >= -1.0);
        CHECK(h < 1.0);
    }
}

TEST_CASE("rainbowgram hue oscillates at the vibrato rate") {
    // 5 Hz vibrato, +-0.3 semitones around MIDI 69.
    const double mod_hz = 5.0;
    AudioBuffer b;
    b.sample_rate = 16000;
    b.samples.resize(32000);
    double phase = 0.0;
    for (size_t i = 0; i < b.samples.size(); ++i) {
        double t = static_cast<double>(i) / 16000.0;
        double f = midi_to_hz(69) * std::pow(2.0, 0.3 * std::sin(2.0 * kPi * mod_hz * t) / 12.0);
        phase += 2.0 * kPi * f / 16000.0;
        b.samples[i] = std::sin(phase);
    }
    auto cfg = short_cfg();
    auto r = render_rainbowgram(b, cfg);
    int fb = (69 - cfg.min_pitch) * cfg.bins_per_octave / 12;

    // DFT of the hue track at the fundamental bin; skip DC.
    int f0 = 4, f1 = r.num_frames - 24;
    int n = f1 - f0;
    double mean = 0.0;
    for (int f = f0; f < f1; ++f) mean += r.hue_at(f, fb);
    mean /= n;
    int best_k = 1;
    double best_mag = -1.0;
    for (int k = 1; k <= n / 2; ++k) {
        double re = 0.0, im = 0.0;
        for (int f = f0; f < f1; ++f) {
            double v = r.hue_at(f, fb) - mean;
            re += v * std::cos(2.0 * kPi * k * (f - f0) / n);
            im += v * std::sin(2.0 * kPi * k * (f - f0) / n);
        }
        if (re * re + im * im > best_mag) {
            best_mag = re * re + im * im;
            best_k = k;
        }
    }
    double frame_rate = 16000.0 / cfg.hop_size;
    double measured_hz = best_k * frame_rate / n;
    CHECK(measured_hz == Catch::Approx(mod_hz).epsilon(0.10));
}

TEST_CASE("broadband click spikes across bins at its frame") {
    AudioBuffer b;
    b.samples.assign(16000, 0.0);
    for (int i = 0; i < 8; ++i) b.samples[8000 + i] = i % 2 ? -1.0 : 1.0;
    auto cfg = short_cfg();
    auto r = render_rainbowgram(b, cfg);
    const int click_frame = 8000 / cfg.hop_size;
    auto frame_mag = [&](int f) {
        double acc = 0.0;
        for (int bb = 0; bb < r.num_bins; ++bb) acc += r.mag(f, bb);
        return acc;
    };
    int best = 0;
    double best_mag = -1.0;
    for (int f = 0; f < r.num_frames; ++f)
        if (frame_mag(f) > best_mag) {
            best_mag = frame_mag(f);
            best = f;
        }
    CHECK(std::abs(best - click_frame) <= 1);
    CHECK(frame_mag(click_frame) > 3.0 * frame_mag(6));  // 0.4 s earlier
    // The spike spans most of the frequency axis.
    int lit = 0;
    for (int bb = 0; bb < r.num_bins; ++bb)
        if (r.mag(click_frame, bb) > 0.3) ++lit;
    CHECK(lit > r.num_bins / 2);
}

TEST_CASE("rainbowgram image has one pixel per cell and is deterministic") {
    auto tmp = std::filesystem::temp_directory_path();
    auto r = render_rainbowgram(tone(440.0, 4.0), CqtConfig{});
    std::string p1 = (tmp / "nsforge_rb1.png").string();
    std::string p2 = (tmp / "nsforge_rb2.png").string();
    rainbowgram_to_image(r, p1);
    rainbowgram_to_image(r, p2);

    auto img = read_stored_png(p1);
    CHECK(img.width == static_cast<uint32_t>(r.num_frames));
    CHECK(img.height == 240);

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::vector<char> b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::vector<char> b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("silence renders as a black image") {
    auto tmp = std::filesystem::temp_directory_path();
    Rainbowgram r;
    r.num_frames = 10;
    r.num_bins = 240;
    r.magnitude.assign(size_t(10) * 240, 0.0);
    r.hue.assign(size_t(10) * 240, 0.0);
    std::string p = (tmp / "nsforge_black.png").string();
    rainbowgram_to_image(r, p);
    auto img = read_stored_png(p);
    for (uint8_t v : img.rgb) CHECK(v == 0);
    std::filesystem::remove(p);
}
