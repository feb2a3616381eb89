#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nsforge/checkpoint.hpp"
#include "nsforge/ops.hpp"
#include "nsforge/optim.hpp"
#include "nsforge/spectral.hpp"

namespace nsforge {

// Input representation for the spectral autoencoder. log_magnitude is the
// paper's pick; the rest are the rejected study variants, kept behind this
// flag (losses and synthesis only, untuned).
enum class BaselineVariant {
    log_magnitude,    // weighted MSE + Griffin-Lim phase
    log_mag_phase,    // + raw phase plane, circular loss
    log_mag_if,       // + instantaneous-frequency plane, circular loss
    real_imag,        // FFT components, plain MSE
    waveform_frames,  // raw waveform grid, plain MSE
};

struct BaselineConfig {
    int depth = 10;  // fixed by the architecture contract
    int kernel = 4;
    int stride = 2;
    std::vector<int> channel_schedule = {128, 128, 256, 256, 512,
                                         512, 1024, 1024, 1024, 1024};
    int z_dim = 1984;
    double leaky_slope = 0.1;
    bool pitch_conditioning = false;
    int pitch_classes = 88;
    // Spectrogram grid: 4 s at fft 1024 / hop 256 gives 250x513; crop/pad to
    // 256 frames and drop the Nyquist bin so ten 2x2 strides divide evenly.
    int input_frames = 256;
    int input_bins = 512;
    BaselineVariant variant = BaselineVariant::log_magnitude;
    StftConfig stft;
    int sample_rate = 16000;

    int planes() const {
        switch (variant) {
            case BaselineVariant::log_magnitude: return 1;
            case BaselineVariant::waveform_frames: return 1;
            default: return 2;
        }
    }
};

inline void validate(const BaselineConfig& c) {
    if (c.depth != 10)
        throw std::invalid_argument("BaselineConfig: depth is fixed at 10");
    if (static_cast<int>(c.channel_schedule.size()) != c.depth)
        throw std::invalid_argument("BaselineConfig: channel_schedule must have depth entries");
    for (int ch : c.channel_schedule)
        if (ch < 1) throw std::invalid_argument("BaselineConfig: channels must be positive");
    if (c.z_dim < 1 || c.input_frames < 1 || c.input_bins < 1)
        throw std::invalid_argument("BaselineConfig: bad sizes");
    if (c.kernel < 1 || c.stride < 1)
        throw std::invalid_argument("BaselineConfig: bad kernel/stride");
}

struct BottleneckCode {
    std::vector<double> values;
};

// Conv / batch-norm / leaky-ReLU blocks with stride-2 SAME downsampling.
// Shared between the autoencoder encoder and the classifier backbone.
template <typename T>
struct ConvEncoderStack {
    int in_planes;
    std::vector<int> channels;
    int kernel, stride;
    T slope;
    std::vector<std::pair<int64_t, int64_t>> pyramid;  // spatial shapes, size depth+1

    std::vector<Tensor<T>> conv_w, conv_b, bn_gamma, bn_beta;
    std::vector<std::vector<T>> run_mean, run_var;

    ConvEncoderStack(int in_planes_, std::vector<int> channels_, int kernel_,
                     int stride_, int64_t h, int64_t w, double slope_, Rng& rng)
        : in_planes(in_planes_),
          channels(std::move(channels_)),
          kernel(kernel_),
          stride(stride_),
          slope(static_cast<T>(slope_)) {
        pyramid.push_back({h, w});
        int prev = in_planes;
        for (size_t i = 0; i < channels.size(); ++i) {
            conv_w.push_back(rand_uniform_init<T>({channels[i], prev, kernel, kernel},
                                                  int64_t(prev) * kernel * kernel, rng));
            conv_b.push_back(Tensor<T>::zeros({channels[i]}, true));
            bn_gamma.push_back(Tensor<T>::filled({channels[i]}, T(1), true));
            bn_beta.push_back(Tensor<T>::zeros({channels[i]}, true));
            run_mean.push_back(std::vector<T>(channels[i], T(0)));
            run_var.push_back(std::vector<T>(channels[i], T(1)));
            auto [ph, pw] = pyramid.back();
            pyramid.push_back({(ph + stride - 1) / stride, (pw + stride - 1) / stride});
            prev = channels[i];
        }
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        Tensor<T> h = x;
        for (size_t i = 0; i < channels.size(); ++i) {
            h = conv2d(h, conv_w[i], conv_b[i], stride, stride);
            h = batch_norm(h, bn_gamma[i], bn_beta[i], run_mean[i], run_var[i], train);
            h = leaky_relu(h, slope);
        }
        return h;
    }

    int64_t flat_dim() const {
        auto [ph, pw] = pyramid.back();
        return static_cast<int64_t>(channels.back()) * ph * pw;
    }

    void collect_params(const std::string& prefix,
                        std::vector<std::pair<std::string, Tensor<T>*>>& out) {
        for (size_t i = 0; i < channels.size(); ++i) {
            std::string p = prefix + std::to_string(i) + "/";
            out.push_back({p + "conv/w", &conv_w[i]});
            out.push_back({p + "conv/b", &conv_b[i]});
            out.push_back({p + "bn/gamma", &bn_gamma[i]});
            out.push_back({p + "bn/beta", &bn_beta[i]});
        }
    }

    void collect_running_stats(const std::string& prefix,
                               std::vector<std::pair<std::string, std::vector<T>*>>& out) {
        for (size_t i = 0; i < channels.size(); ++i) {
            std::string p = prefix + std::to_string(i) + "/bn/";
            out.push_back({p + "running_mean", &run_mean[i]});
            out.push_back({p + "running_var", &run_var[i]});
        }
    }
};

// Crop or zero-pad a plane's F x B values onto the model grid.
inline std::vector<double> fit_to_grid(const std::vector<double>& values, int f,
                                       int b, int grid_f, int grid_b) {
    std::vector<double> out(static_cast<size_t>(grid_f) * grid_b, 0.0);
    for (int i = 0; i < std::min(f, grid_f); ++i)
        for (int j = 0; j < std::min(b, grid_b); ++j)
            out[size_t(i) * grid_b + j] = values[size_t(i) * b + j];
    return out;
}

// Un-normalize a log-power plane and run Griffin-Lim (paper default 1000
// iterations).
inline AudioBuffer reconstruct_audio(const MagnitudePlane& m, int gl_iters = 1000,
                                     uint64_t seed = 0) {
    if (m.scale != MagnitudeScale::log_power_peak_normalized)
        throw std::invalid_argument("reconstruct_audio: expected log-power plane");
    if (m.log_peak == m.log_floor)
        throw std::invalid_argument("reconstruct_audio: missing normalization metadata");
    return griffin_lim(linear_magnitude(m), gl_iters, seed).audio;
}

template <typename T>
class BaselineAutoencoder {
public:
    explicit BaselineAutoencoder(BaselineConfig cfg, uint64_t seed = 0xba5e11fe)
        : cfg_(std::move(cfg)) {
        validate(cfg_);
        Rng rng(seed);
        encoder_ = std::make_unique<ConvEncoderStack<T>>(
            cfg_.planes(), cfg_.channel_schedule, cfg_.kernel, cfg_.stride,
            cfg_.input_frames, cfg_.input_bins, cfg_.leaky_slope, rng);

        enc_dense_w_ = rand_uniform_init<T>({encoder_->flat_dim(), cfg_.z_dim},
                                            encoder_->flat_dim(), rng);
        enc_dense_b_ = Tensor<T>::zeros({cfg_.z_dim}, true);

        const int64_t dec_in = cfg_.z_dim + (cfg_.pitch_conditioning ? cfg_.pitch_classes : 0);
        dec_dense_w_ = rand_uniform_init<T>({dec_in, encoder_->flat_dim()}, dec_in, rng);
        dec_dense_b_ = Tensor<T>::zeros({encoder_->flat_dim()}, true);

        // Mirror blocks: block j maps channels[9-j] up to the encoder's
        // input shape/channels at that level. Final block is zero-init.
        const auto& ch = cfg_.channel_schedule;
        for (int j = 0; j < cfg_.depth; ++j) {
            int in_ch = ch[cfg_.depth - 1 - j];
            int out_ch = j == cfg_.depth - 1 ? cfg_.planes() : ch[cfg_.depth - 2 - j];
            if (j == cfg_.depth - 1) {
                dec_w_.push_back(Tensor<T>::zeros(
                    {in_ch, out_ch, cfg_.kernel, cfg_.kernel}, true));
            } else {
                dec_w_.push_back(rand_uniform_init<T>(
                    {in_ch, out_ch, cfg_.kernel, cfg_.kernel},
                    int64_t(in_ch) * cfg_.kernel * cfg_.kernel, rng));
            }
            dec_b_.push_back(Tensor<T>::zeros({out_ch}, true));
            if (j < cfg_.depth - 1) {
                dec_bn_gamma_.push_back(Tensor<T>::filled({out_ch}, T(1), true));
                dec_bn_beta_.push_back(Tensor<T>::zeros({out_ch}, true));
                dec_run_mean_.push_back(std::vector<T>(out_ch, T(0)));
                dec_run_var_.push_back(std::vector<T>(out_ch, T(1)));
            }
        }
    }

    const BaselineConfig& config() const { return cfg_; }

    Tensor<T> encode_batch(const Tensor<T>& planes, bool train) {
        const auto& s = planes.shape();
        if (s.size() != 4 || s[1] != cfg_.planes() || s[2] != cfg_.input_frames ||
            s[3] != cfg_.input_bins)
            throw std::invalid_argument("encode_batch: input grid mismatch");
        Tensor<T> h = encoder_->forward(planes, train);
        h = reshape(h, {s[0], encoder_->flat_dim()});
        return dense(h, enc_dense_w_, enc_dense_b_);
    }

    Tensor<T> decode_batch(const Tensor<T>& z, const std::vector<int>* pitches,
                           bool train) {
        Tensor<T> h = z;
        if (cfg_.pitch_conditioning) {
            if (!pitches || static_cast<int64_t>(pitches->size()) != z.shape()[0])
                throw std::invalid_argument("decode_batch: model expects pitches");
            Tensor<T> oh = Tensor<T>::zeros({z.shape()[0], cfg_.pitch_classes});
            for (int64_t b = 0; b < z.shape()[0]; ++b) {
                int idx = (*pitches)[b] - 21;
                if (idx < 0 || idx >= cfg_.pitch_classes)
                    throw std::invalid_argument("decode_batch: pitch outside [21, 108]");
                oh.data()[b * cfg_.pitch_classes + idx] = T(1);
            }
            h = concat_dim1(h, oh);
        } else if (z.shape()[1] != cfg_.z_dim) {
            throw std::invalid_argument("decode_batch: z_dim mismatch");
        }
        h = dense(h, dec_dense_w_, dec_dense_b_);
        auto [ph, pw] = encoder_->pyramid.back();
        h = reshape(h, {z.shape()[0], cfg_.channel_schedule.back(), ph, pw});
        for (int j = 0; j < cfg_.depth; ++j) {
            auto [oh_, ow_] = encoder_->pyramid[cfg_.depth - 1 - j];
            h = conv2d_transpose(h, dec_w_[j], dec_b_[j], cfg_.stride, cfg_.stride,
                                 oh_, ow_);
            if (j < cfg_.depth - 1) {
                h = batch_norm(h, dec_bn_gamma_[j], dec_bn_beta_[j], dec_run_mean_[j],
                               dec_run_var_[j], train);
                h = leaky_relu(h, static_cast<T>(cfg_.leaky_slope));
            }
        }
        // Magnitude plane clamps to [0, 1]; auxiliary planes stay linear.
        if (cfg_.variant == BaselineVariant::log_magnitude) {
            h = clamp01(h);
        } else if (cfg_.planes() == 2 &&
                   (cfg_.variant == BaselineVariant::log_mag_phase ||
                    cfg_.variant == BaselineVariant::log_mag_if)) {
            h = concat_dim1(clamp01(slice_dim1(h, 0, 1)), slice_dim1(h, 1, 2));
        }
        return h;
    }

    BottleneckCode encode(const MagnitudePlane& m) {
        NoGradScope ng;
        Tensor<T> planes = plane_tensor({&m});
        Tensor<T> z = encode_batch(planes, false);
        BottleneckCode out;
        out.values.assign(z.data(), z.data() + z.size());
        return out;
    }

    MagnitudePlane decode(const BottleneckCode& z, std::optional<int> pitch = {},
                          const MagnitudePlane* metadata_like = nullptr) {
        NoGradScope ng;
        if (static_cast<int>(z.values.size()) != cfg_.z_dim)
            throw std::invalid_argument("decode: z_dim mismatch");
        Tensor<T> zt = Tensor<T>::zeros({1, cfg_.z_dim});
        for (int i = 0; i < cfg_.z_dim; ++i)
            zt.data()[i] = static_cast<T>(z.values[i]);
        std::vector<int> pitches;
        if (pitch) pitches.push_back(*pitch);
        Tensor<T> planes =
            decode_batch(zt, pitch ? &pitches : nullptr, false);
        MagnitudePlane out;
        out.num_frames = cfg_.input_frames;
        out.num_bins = cfg_.input_bins;
        out.scale = MagnitudeScale::log_power_peak_normalized;
        out.config = cfg_.stft;
        out.sample_rate = cfg_.sample_rate;
        out.num_samples = static_cast<int64_t>(cfg_.input_frames) * cfg_.stft.hop_size;
        if (metadata_like) {
            out.log_floor = metadata_like->log_floor;
            out.log_peak = metadata_like->log_peak;
            out.num_samples = metadata_like->num_samples;
        }
        out.values.resize(size_t(cfg_.input_frames) * cfg_.input_bins);
        for (size_t i = 0; i < out.values.size(); ++i)
            out.values[i] = static_cast<double>(planes.data()[i]);
        return out;
    }

    // Input planes for the configured variant, on the model grid.
    Tensor<T> build_input(const AudioBuffer& audio) const {
        const int gf = cfg_.input_frames, gb = cfg_.input_bins;
        std::vector<std::vector<double>> planes;
        if (cfg_.variant == BaselineVariant::waveform_frames) {
            std::vector<double> grid(static_cast<size_t>(gf) * gb, 0.0);
            for (size_t i = 0; i < grid.size() && i < audio.samples.size(); ++i)
                grid[i] = audio.samples[i];
            planes.push_back(std::move(grid));
        } else {
            ComplexSpectrogram s = stft(audio, cfg_.stft);
            if (cfg_.variant == BaselineVariant::real_imag) {
                double peak = 0.0;
                for (const auto& c : s.cells)
                    peak = std::max({peak, std::abs(c.real()), std::abs(c.imag())});
                if (peak == 0.0) peak = 1.0;
                std::vector<double> re(s.cells.size()), im(s.cells.size());
                for (size_t i = 0; i < s.cells.size(); ++i) {
                    re[i] = s.cells[i].real() / peak;
                    im[i] = s.cells[i].imag() / peak;
                }
                planes.push_back(fit_to_grid(re, s.num_frames, s.num_bins, gf, gb));
                planes.push_back(fit_to_grid(im, s.num_frames, s.num_bins, gf, gb));
            } else {
                MagnitudePlane m = log_power_magnitude(s);
                planes.push_back(fit_to_grid(m.values, m.num_frames, m.num_bins, gf, gb));
                if (cfg_.variant == BaselineVariant::log_mag_phase) {
                    std::vector<double> ph(s.cells.size());
                    for (size_t i = 0; i < s.cells.size(); ++i)
                        ph[i] = wrap_phase_units(std::arg(s.cells[i]) / kPi);
                    planes.push_back(fit_to_grid(ph, s.num_frames, s.num_bins, gf, gb));
                } else if (cfg_.variant == BaselineVariant::log_mag_if) {
                    PhasePlane ifreq = instantaneous_frequency(s);
                    planes.push_back(
                        fit_to_grid(ifreq.values, s.num_frames, s.num_bins, gf, gb));
                }
            }
        }
        Tensor<T> t = Tensor<T>::zeros(
            {1, static_cast<int64_t>(planes.size()), gf, gb});
        for (size_t p = 0; p < planes.size(); ++p)
            for (size_t i = 0; i < planes[p].size(); ++i)
                t.data()[p * planes[p].size() + i] = static_cast<T>(planes[p][i]);
        return t;
    }

    Tensor<T> plane_tensor(const std::vector<const MagnitudePlane*>& batch) const {
        const int64_t B = static_cast<int64_t>(batch.size());
        Tensor<T> t = Tensor<T>::zeros({B, 1, cfg_.input_frames, cfg_.input_bins});
        for (int64_t b = 0; b < B; ++b) {
            auto grid = fit_to_grid(batch[b]->values, batch[b]->num_frames,
                                    batch[b]->num_bins, cfg_.input_frames,
                                    cfg_.input_bins);
            for (size_t i = 0; i < grid.size(); ++i)
                t.data()[b * grid.size() + i] = static_cast<T>(grid[i]);
        }
        return t;
    }

    // Variant loss between decoded planes and the target planes.
    Tensor<T> loss(const Tensor<T>& pred, const Tensor<T>& target) {
        switch (cfg_.variant) {
            case BaselineVariant::log_magnitude:
                return weighted_sq_loss(pred, target, bin_weights());
            case BaselineVariant::log_mag_phase:
            case BaselineVariant::log_mag_if: {
                Tensor<T> mag = weighted_sq_loss(slice_dim1(pred, 0, 1),
                                                 slice_dim1(target, 0, 1), bin_weights());
                Tensor<T> ph =
                    circular_loss(slice_dim1(pred, 1, 2), slice_dim1(target, 1, 2));
                return add(mag, ph);
            }
            case BaselineVariant::real_imag:
            case BaselineVariant::waveform_frames:
                return mse_loss(pred, target);
        }
        throw std::logic_error("unreachable");
    }

    double train_step(const Tensor<T>& batch_planes, const std::vector<int>* pitches,
                      AdamState<T>& opt, T lr) {
        if (batch_planes.shape()[0] < 2)
            throw std::invalid_argument("train_step: batch norm needs batch >= 2");
        Tensor<T> z = encode_batch(batch_planes, true);
        Tensor<T> rec = decode_batch(z, pitches, true);
        Tensor<T> l = loss(rec, batch_planes);
        const double loss_v = static_cast<double>(l.item());
        if (!std::isfinite(loss_v))
            throw std::runtime_error("train_step: non-finite loss at step " +
                                     std::to_string(opt.t));
        zero_grads();
        backward(l);
        auto params = parameter_ptrs();
        adam_step(params, opt, lr);
        return loss_v;
    }

    double train_step(const std::vector<const MagnitudePlane*>& batch,
                      const std::vector<int>* pitches, AdamState<T>& opt, T lr) {
        return train_step(plane_tensor(batch), pitches, opt, lr);
    }

    // Synthesis back to audio for the configured variant.
    AudioBuffer synthesize(const MagnitudePlane& decoded, int gl_iters = 1000,
                           uint64_t seed = 0) const {
        return reconstruct_audio(decoded, gl_iters, seed);
    }

    std::vector<T> bin_weights() const {
        std::vector<T> w(cfg_.input_bins);
        for (int b = 0; b < cfg_.input_bins; ++b)
            w[b] = static_cast<T>(perceptual_weight(
                static_cast<double>(b) * cfg_.sample_rate / cfg_.stft.fft_size));
        return w;
    }

    std::vector<std::pair<std::string, Tensor<T>*>> named_parameters() {
        std::vector<std::pair<std::string, Tensor<T>*>> out;
        encoder_->collect_params("encoder/block", out);
        out.push_back({"encoder/dense/w", &enc_dense_w_});
        out.push_back({"encoder/dense/b", &enc_dense_b_});
        out.push_back({"decoder/dense/w", &dec_dense_w_});
        out.push_back({"decoder/dense/b", &dec_dense_b_});
        for (int j = 0; j < cfg_.depth; ++j) {
            std::string p = "decoder/block" + std::to_string(j) + "/";
            out.push_back({p + "tconv/w", &dec_w_[j]});
            out.push_back({p + "tconv/b", &dec_b_[j]});
            if (j < cfg_.depth - 1) {
                out.push_back({p + "bn/gamma", &dec_bn_gamma_[j]});
                out.push_back({p + "bn/beta", &dec_bn_beta_[j]});
            }
        }
        return out;
    }

    int64_t parameter_count() {
        int64_t n = 0;
        for (auto& [name, p] : named_parameters()) n += p->size();
        return n;
    }

    void zero_grads() {
        for (auto& [name, p] : named_parameters()) p->zero_grad();
    }

    void save(const std::string& path) {
        std::vector<NamedTensorF32> entries;
        entries.push_back({"meta/arch", {1}, {1.0f}});
        entries.push_back(
            {"meta/config",
             {12},
             {float(cfg_.depth), float(cfg_.kernel), float(cfg_.stride),
              float(cfg_.z_dim), float(cfg_.leaky_slope),
              cfg_.pitch_conditioning ? 1.0f : 0.0f, float(cfg_.pitch_classes),
              float(cfg_.input_frames), float(cfg_.input_bins),
              float(static_cast<int>(cfg_.variant)), float(cfg_.stft.fft_size),
              float(cfg_.stft.hop_size)}});
        NamedTensorF32 sched;
        sched.name = "meta/channel_schedule";
        sched.dims = {static_cast<uint32_t>(cfg_.channel_schedule.size())};
        for (int c : cfg_.channel_schedule) sched.data.push_back(float(c));
        entries.push_back(std::move(sched));
        for (auto& [name, p] : named_parameters()) {
            NamedTensorF32 e;
            e.name = name;
            for (int64_t d : p->shape()) e.dims.push_back(static_cast<uint32_t>(d));
            for (int64_t i = 0; i < p->size(); ++i)
                e.data.push_back(static_cast<float>(p->data()[i]));
            entries.push_back(std::move(e));
        }
        for (auto& [name, v] : running_stats()) {
            NamedTensorF32 e;
            e.name = name;
            e.dims = {static_cast<uint32_t>(v->size())};
            for (T x : *v) e.data.push_back(static_cast<float>(x));
            entries.push_back(std::move(e));
        }
        save_checkpoint(path, entries);
    }

    static BaselineAutoencoder load(const std::string& path) {
        auto entries = load_checkpoint(path);
        auto find = [&](const std::string& name) -> const NamedTensorF32& {
            for (const auto& e : entries)
                if (e.name == name) return e;
            throw DataError("baseline load: missing entry " + name);
        };
        if (find("meta/arch").data.at(0) != 1.0f)
            throw DataError("baseline load: checkpoint is not a baseline model");
        const auto& mc = find("meta/config").data;
        BaselineConfig cfg;
        cfg.depth = static_cast<int>(mc.at(0));
        cfg.kernel = static_cast<int>(mc.at(1));
        cfg.stride = static_cast<int>(mc.at(2));
        cfg.z_dim = static_cast<int>(mc.at(3));
        cfg.leaky_slope = mc.at(4);
        cfg.pitch_conditioning = mc.at(5) != 0.0f;
        cfg.pitch_classes = static_cast<int>(mc.at(6));
        cfg.input_frames = static_cast<int>(mc.at(7));
        cfg.input_bins = static_cast<int>(mc.at(8));
        cfg.variant = static_cast<BaselineVariant>(static_cast<int>(mc.at(9)));
        cfg.stft.fft_size = static_cast<int>(mc.at(10));
        cfg.stft.hop_size = static_cast<int>(mc.at(11));
        cfg.channel_schedule.clear();
        for (float v : find("meta/channel_schedule").data)
            cfg.channel_schedule.push_back(static_cast<int>(v));

        BaselineAutoencoder model(cfg, 0);
        for (auto& [name, p] : model.named_parameters()) {
            const auto& e = find(name);
            if (static_cast<int64_t>(e.data.size()) != p->size())
                throw DataError("baseline load: size mismatch for " + name);
            for (int64_t i = 0; i < p->size(); ++i)
                p->data()[i] = static_cast<T>(e.data[i]);
        }
        for (auto& [name, v] : model.running_stats()) {
            const auto& e = find(name);
            if (e.data.size() != v->size())
                throw DataError("baseline load: size mismatch for " + name);
            for (size_t i = 0; i < v->size(); ++i) (*v)[i] = static_cast<T>(e.data[i]);
        }
        return model;
    }

    std::vector<std::pair<std::string, std::vector<T>*>> running_stats() {
        std::vector<std::pair<std::string, std::vector<T>*>> out;
        encoder_->collect_running_stats("encoder/block", out);
        for (size_t j = 0; j < dec_run_mean_.size(); ++j) {
            std::string p = "decoder/block" + std::to_string(j) + "/bn/";
            out.push_back({p + "running_mean", &dec_run_mean_[j]});
            out.push_back({p + "running_var", &dec_run_var_[j]});
        }
        return out;
    }

    ConvEncoderStack<T>& encoder_stack() { return *encoder_; }

private:
    std::vector<Tensor<T>*> parameter_ptrs() {
        std::vector<Tensor<T>*> out;
        for (auto& [name, p] : named_parameters()) out.push_back(p);
        return out;
    }

    BaselineConfig cfg_;
    std::unique_ptr<ConvEncoderStack<T>> encoder_;
    Tensor<T> enc_dense_w_, enc_dense_b_, dec_dense_w_, dec_dense_b_;
    std::vector<Tensor<T>> dec_w_, dec_b_, dec_bn_gamma_, dec_bn_beta_;
    std::vector<std::vector<T>> dec_run_mean_, dec_run_var_;
};

}  // namespace nsforge
