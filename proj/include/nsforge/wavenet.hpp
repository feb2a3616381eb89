#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nsforge/audio.hpp"
#include "nsforge/checkpoint.hpp"
#include "nsforge/ops.hpp"
#include "nsforge/optim.hpp"

namespace nsforge {

// Temporal autoencoder: a non-causal dilated residual encoder pools raw audio
// into a sequence of hidden codes (one per pool_stride samples), and a gated
// causal WaveNet decoder reproduces the mu-law code stream while every layer
// is biased by a linear projection of the upsampled codes.

inline std::vector<int> stacked_dilations(int layers, int stages) {
    std::vector<int> d(layers);
    for (int i = 0; i < layers; ++i) d[i] = 1 << (i % stages);
    return d;
}

struct WavenetConfig {
    // Encoder: residual stack of non-causal dilated convs + 1x1s.
    int encoder_channels = 128;
    int encoder_kernel = 3;
    std::vector<int> encoder_dilations = stacked_dilations(30, 10);
    int pool_stride = 512;
    int embedding_dim = 16;

    // Decoder: gated causal convs with residual and skip paths.
    int residual_channels = 64;
    int skip_channels = 128;
    int decoder_kernel = 2;
    std::vector<int> decoder_dilations = stacked_dilations(30, 10);

    bool pitch_conditioning = false;
    int pitch_classes = 88;  // one-hot, indexed pitch - 21
    int quantization_levels = 256;

    int cond_channels() const {
        return embedding_dim + (pitch_conditioning ? pitch_classes : 0);
    }
};

inline void validate(const WavenetConfig& c) {
    if (c.encoder_channels < 1 || c.embedding_dim < 1 || c.pool_stride < 1 ||
        c.residual_channels < 1 || c.skip_channels < 1)
        throw std::invalid_argument("WavenetConfig: sizes must be positive");
    if (c.encoder_kernel < 1 || c.decoder_kernel < 2)
        throw std::invalid_argument("WavenetConfig: bad kernel sizes");
    if (c.quantization_levels != 256)
        throw std::invalid_argument("WavenetConfig: quantization_levels must be 256");
    if (c.encoder_dilations.empty() || c.decoder_dilations.empty())
        throw std::invalid_argument("WavenetConfig: need at least one layer per stack");
    for (int d : c.encoder_dilations)
        if (d < 1) throw std::invalid_argument("WavenetConfig: dilations must be >= 1");
    for (int d : c.decoder_dilations)
        if (d < 1) throw std::invalid_argument("WavenetConfig: dilations must be >= 1");
}

// One hidden code vector per pool_stride samples (paper default: 125x16 for
// a 4 s note). Row-major steps x channels.
struct TemporalEmbedding {
    int steps = 0;
    int channels = 0;
    std::vector<double> values;

    double& at(int t, int c) { return values[size_t(t) * channels + c]; }
    double at(int t, int c) const { return values[size_t(t) * channels + c]; }
};

inline TemporalEmbedding interpolate(const TemporalEmbedding& a,
                                     const TemporalEmbedding& b, double alpha) {
    if (a.steps != b.steps || a.channels != b.channels)
        throw std::invalid_argument("interpolate: shape mismatch");
    TemporalEmbedding out = a;
    for (size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = (1.0 - alpha) * a.values[i] + alpha * b.values[i];
    return out;
}

enum class SampleMode { sample, argmax };

template <typename T>
struct WavenetSampleResult {
    AudioBuffer audio;
    std::vector<uint8_t> codes;
    std::vector<std::vector<T>> step_logits;  // filled when requested
};

template <typename T>
class WavenetAutoencoder {
public:
    explicit WavenetAutoencoder(WavenetConfig cfg, uint64_t seed = 0x5eedf00d)
        : cfg_(std::move(cfg)) {
        validate(cfg_);
        Rng rng(seed);
        const int C = cfg_.encoder_channels;
        const int E = cfg_.embedding_dim;
        const int R = cfg_.residual_channels;
        const int S = cfg_.skip_channels;
        const int Q = cfg_.quantization_levels;
        const int CC = cfg_.cond_channels();
        const int ek = cfg_.encoder_kernel;
        const int dk = cfg_.decoder_kernel;

        enc_start_w_ = param({C, 1, ek}, ek, rng);
        enc_start_b_ = param_zero({C});
        for (size_t i = 0; i < cfg_.encoder_dilations.size(); ++i) {
            enc_dconv_w_.push_back(param({C, C, ek}, C * ek, rng));
            enc_dconv_b_.push_back(param_zero({C}));
            enc_res_w_.push_back(param({C, C, 1}, C, rng));
            enc_res_b_.push_back(param_zero({C}));
        }
        enc_bottleneck_w_ = param({E, C, 1}, C, rng);
        enc_bottleneck_b_ = param_zero({E});

        dec_start_w_ = param({R, Q, dk}, Q * dk, rng);
        dec_start_b_ = param_zero({R});
        dec_skip_start_w_ = param({S, R, 1}, R, rng);
        dec_skip_start_b_ = param_zero({S});
        for (size_t i = 0; i < cfg_.decoder_dilations.size(); ++i) {
            dec_dconv_w_.push_back(param({2 * R, R, dk}, R * dk, rng));
            dec_dconv_b_.push_back(param_zero({2 * R}));
            dec_cond_w_.push_back(param({2 * R, CC, 1}, CC, rng));
            dec_cond_b_.push_back(param_zero({2 * R}));
            dec_res_w_.push_back(param({R, R, 1}, R, rng));
            dec_res_b_.push_back(param_zero({R}));
            dec_skip_w_.push_back(param({S, R, 1}, R, rng));
            dec_skip_b_.push_back(param_zero({S}));
        }
        out1_w_ = param({S, S, 1}, S, rng);
        out1_b_ = param_zero({S});
        out1_cond_w_ = param({S, CC, 1}, CC, rng);
        out1_cond_b_ = param_zero({S});
        // Zero-init output head: untrained logits are exactly uniform.
        logits_w_ = param_zero({Q, S, 1});
        logits_b_ = param_zero({Q});
    }

    const WavenetConfig& config() const { return cfg_; }

    int embedding_steps(int64_t n_samples) const {
        if (n_samples <= 0)
            throw std::invalid_argument("encode: empty input");
        return static_cast<int>(
            std::max<int64_t>(1, n_samples / cfg_.pool_stride));
    }

    // Encoder over a batch [B, 1, T]; audio is right-padded with zeros to a
    // whole number of pool windows and a trailing partial step is dropped.
    Tensor<T> encode_batch(const Tensor<T>& audio) {
        const auto& s = audio.shape();
        if (s.size() != 3 || s[1] != 1)
            throw std::invalid_argument("encode_batch: want [B, 1, T]");
        const int64_t n = s[2];
        const int steps = embedding_steps(n);

        Tensor<T> x = audio;
        const int64_t padded = (n + cfg_.pool_stride - 1) / cfg_.pool_stride *
                               cfg_.pool_stride;
        if (padded != n) {
            // Right-pad via extend-with-zero: concat a zero block in time.
            Tensor<T> pad = Tensor<T>::zeros({s[0], 1, padded - n});
            x = concat_time(x, pad);
        }
        Tensor<T> en = conv1d(x, enc_start_w_, enc_start_b_, 1, false);
        for (size_t i = 0; i < cfg_.encoder_dilations.size(); ++i) {
            Tensor<T> d = relu(en);
            d = conv1d(d, enc_dconv_w_[i], enc_dconv_b_[i], cfg_.encoder_dilations[i],
                       false);
            d = relu(d);
            en = add(en, conv1d(d, enc_res_w_[i], enc_res_b_[i], 1, false));
        }
        Tensor<T> z = conv1d(en, enc_bottleneck_w_, enc_bottleneck_b_, 1, false);
        z = avg_pool1d(z, cfg_.pool_stride, cfg_.pool_stride);
        if (z.shape()[2] != steps) z = slice_last(z, 0, steps);
        return z;  // [B, E, steps]
    }

    TemporalEmbedding encode(const AudioBuffer& x) {
        NoGradScope ng;
        Tensor<T> audio = audio_tensor({&x});
        Tensor<T> z = encode_batch(audio);
        TemporalEmbedding e;
        e.steps = static_cast<int>(z.shape()[2]);
        e.channels = cfg_.embedding_dim;
        e.values.resize(size_t(e.steps) * e.channels);
        for (int t = 0; t < e.steps; ++t)
            for (int c = 0; c < e.channels; ++c)
                e.at(t, c) = static_cast<double>(z.data()[c * e.steps + t]);
        return e;
    }

    // Teacher-forced decoder: input is the one-hot mu-law stream shifted
    // right by one (step 0 sees the zero palette); logits [B, 256, T].
    Tensor<T> teacher_forced_logits(const std::vector<std::vector<uint8_t>>& codes,
                                    const Tensor<T>& z,
                                    const std::vector<int>* pitches) {
        const int64_t B = static_cast<int64_t>(codes.size());
        if (B == 0) throw std::invalid_argument("teacher_forced_logits: empty batch");
        const int64_t Tn = static_cast<int64_t>(codes[0].size());
        for (const auto& c : codes)
            if (static_cast<int64_t>(c.size()) != Tn)
                throw std::invalid_argument("teacher_forced_logits: ragged batch");
        if (z.shape()[0] != B)
            throw std::invalid_argument("teacher_forced_logits: z batch mismatch");

        const int Q = cfg_.quantization_levels;
        Tensor<T> onehot = Tensor<T>::zeros({B, Q, Tn});
        T* ov = onehot.data();
        for (int64_t b = 0; b < B; ++b)
            for (int64_t t = 1; t < Tn; ++t)
                ov[(b * Q + codes[b][t - 1]) * Tn + t] = T(1);

        Tensor<T> cond = conditioning(z, pitches, Tn);
        Tensor<T> l = conv1d(onehot, dec_start_w_, dec_start_b_, 1, true);
        Tensor<T> s = conv1d(l, dec_skip_start_w_, dec_skip_start_b_, 1, true);
        const int R = cfg_.residual_channels;
        for (size_t i = 0; i < cfg_.decoder_dilations.size(); ++i) {
            Tensor<T> d = conv1d(l, dec_dconv_w_[i], dec_dconv_b_[i],
                                 cfg_.decoder_dilations[i], true);
            d = add(d, conv1d(cond, dec_cond_w_[i], dec_cond_b_[i], 1, true));
            Tensor<T> gated =
                mul(sigmoid_op(slice_dim1(d, 0, R)), tanh_op(slice_dim1(d, R, 2 * R)));
            l = add(l, conv1d(gated, dec_res_w_[i], dec_res_b_[i], 1, true));
            s = add(s, conv1d(gated, dec_skip_w_[i], dec_skip_b_[i], 1, true));
        }
        s = relu(s);
        s = conv1d(s, out1_w_, out1_b_, 1, true);
        s = add(s, conv1d(cond, out1_cond_w_, out1_cond_b_, 1, true));
        s = relu(s);
        return conv1d(s, logits_w_, logits_b_, 1, true);
    }

    // Mean teacher-forced cross-entropy in nats (no graph recorded).
    double teacher_forced_ce(const std::vector<std::vector<uint8_t>>& codes,
                             const Tensor<T>& z, const std::vector<int>* pitches) {
        NoGradScope ng;
        Tensor<T> logits = teacher_forced_logits(codes, z, pitches);
        return softmax_ce(logits, flat_labels(codes)).item();
    }

    // One Adam update on the mean teacher-forced CE of the batch.
    double train_step(const std::vector<AudioBuffer>& batch,
                      const std::vector<int>* pitches, AdamState<T>& opt, T lr) {
        if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
        std::vector<const AudioBuffer*> ptrs;
        std::vector<std::vector<uint8_t>> codes;
        for (const auto& a : batch) {
            ptrs.push_back(&a);
            codes.push_back(mulaw_encode(a).codes);
        }
        Tensor<T> audio = audio_tensor(ptrs);
        Tensor<T> z = encode_batch(audio);
        Tensor<T> logits = teacher_forced_logits(codes, z, pitches);
        Tensor<T> loss = softmax_ce(logits, flat_labels(codes));
        const double loss_v = static_cast<double>(loss.item());
        if (!std::isfinite(loss_v))
            throw std::runtime_error(
                "train_step: non-finite loss at optimizer step " +
                std::to_string(opt.t) + " (lr " + std::to_string(lr) + ")");
        zero_grads();
        backward(loss);
        auto params = parameter_ptrs();
        adam_step(params, opt, lr);
        return loss_v;
    }

    // Fast autoregressive sampler with per-layer rolling buffers. Matches the
    // teacher-forced path arithmetically (same accumulation order), which the
    // oracle suite checks step by step.
    WavenetSampleResult<T> sample(const TemporalEmbedding& z,
                                  std::optional<int> pitch, int64_t n_samples,
                                  uint64_t seed, SampleMode mode,
                                  bool record_logits = false) {
        NoGradScope ng;
        if (z.channels != cfg_.embedding_dim)
            throw std::invalid_argument("sample: embedding dim mismatch");
        if (n_samples < 1 ||
            n_samples > static_cast<int64_t>(z.steps) * cfg_.pool_stride)
            throw std::invalid_argument(
                "sample: embedding too short for requested length");
        if (cfg_.pitch_conditioning && !pitch)
            throw std::invalid_argument("sample: model expects a pitch");

        const int R = cfg_.residual_channels;
        const int S = cfg_.skip_channels;
        const int Q = cfg_.quantization_levels;
        const int L = static_cast<int>(cfg_.decoder_dilations.size());
        const int dk = cfg_.decoder_kernel;

        // Conditioning contribution per embedding step, per layer.
        std::vector<T> cond_vec(cfg_.cond_channels());
        std::vector<std::vector<std::vector<T>>> cond_bias(
            z.steps, std::vector<std::vector<T>>(L, std::vector<T>(2 * R)));
        std::vector<std::vector<T>> out1_cond_bias(z.steps, std::vector<T>(S));
        for (int ts = 0; ts < z.steps; ++ts) {
            std::fill(cond_vec.begin(), cond_vec.end(), T(0));
            for (int c = 0; c < z.channels; ++c)
                cond_vec[c] = static_cast<T>(z.at(ts, c));
            if (cfg_.pitch_conditioning)
                cond_vec[z.channels + pitch_index(*pitch)] = T(1);
            for (int i = 0; i < L; ++i)
                mat_vec(dec_cond_w_[i], dec_cond_b_[i], cond_vec, cond_bias[ts][i]);
            mat_vec(out1_cond_w_, out1_cond_b_, cond_vec, out1_cond_bias[ts]);
        }

        // Rolling input rings: startconv over one-hot codes, then one ring of
        // layer inputs per dilated conv.
        std::vector<int> code_ring((dk - 1), -1);  // -1 = zero palette
        std::vector<RingBuf> rings;
        for (int i = 0; i < L; ++i)
            rings.emplace_back(R, (dk - 1) * cfg_.decoder_dilations[i]);

        Rng rng(seed);
        WavenetSampleResult<T> out;
        out.codes.reserve(n_samples);
        out.audio.sample_rate = 16000;
        out.audio.samples.reserve(n_samples);

        std::vector<T> l(R), d(2 * R), gated(R), skip(S), head(S), logits(Q);
        int prev_code = -1;
        for (int64_t t = 0; t < n_samples; ++t) {
            const int zstep = std::min<int64_t>(t / cfg_.pool_stride, z.steps - 1);
            // startconv: one-hot taps select weight columns. Terms are added
            // in (ci, k) order to mirror the batch kernel bit for bit.
            std::vector<std::pair<int, int>> taps;  // (code, k)
            for (int k = 0; k < dk; ++k) {
                const int64_t back = static_cast<int64_t>(dk - 1 - k);
                int code;
                if (back == 0) code = prev_code;
                else if (t - back < 0) code = -1;
                else code = code_ring[(t - back) % (dk - 1)];
                if (code >= 0) taps.push_back({code, k});
            }
            std::sort(taps.begin(), taps.end());
            for (int co = 0; co < R; ++co) {
                T acc = dec_start_b_.data()[co];
                for (auto [code, k] : taps)
                    acc += dec_start_w_.data()[(co * Q + code) * dk + k];
                l[co] = acc;
            }
            if (dk > 1) code_ring[t % (dk - 1)] = prev_code;

            mat_vec(dec_skip_start_w_, dec_skip_start_b_, l, skip);
            for (int i = 0; i < L; ++i) {
                const auto& cb = cond_bias[zstep][i];
                conv_step(dec_dconv_w_[i], dec_dconv_b_[i], rings[i], l, t, d);
                for (int c = 0; c < 2 * R; ++c) d[c] += cb[c];
                for (int c = 0; c < R; ++c) {
                    T sig = T(1) / (T(1) + std::exp(-d[c]));
                    gated[c] = sig * std::tanh(d[R + c]);
                }
                rings[i].push(t, l);
                accum_mat_vec(dec_res_w_[i], dec_res_b_[i], gated, l);
                accum_mat_vec(dec_skip_w_[i], dec_skip_b_[i], gated, skip);
            }
            for (int c = 0; c < S; ++c) skip[c] = std::max(T(0), skip[c]);
            mat_vec(out1_w_, out1_b_, skip, head);
            const auto& ocb = out1_cond_bias[zstep];
            for (int c = 0; c < S; ++c) head[c] = std::max(T(0), head[c] + ocb[c]);
            mat_vec(logits_w_, logits_b_, head, logits);

            if (record_logits)
                out.step_logits.emplace_back(logits.begin(), logits.end());

            int code;
            if (mode == SampleMode::argmax) {
                code = 0;
                for (int c = 1; c < Q; ++c)
                    if (logits[c] > logits[code]) code = c;
            } else {
                double m = logits[0];
                for (int c = 1; c < Q; ++c) m = std::max(m, double(logits[c]));
                double denom = 0.0;
                for (int c = 0; c < Q; ++c) denom += std::exp(double(logits[c]) - m);
                double u = rng.uniform() * denom;
                double cdf = 0.0;
                code = Q - 1;
                for (int c = 0; c < Q; ++c) {
                    cdf += std::exp(double(logits[c]) - m);
                    if (u < cdf) {
                        code = c;
                        break;
                    }
                }
            }
            out.codes.push_back(static_cast<uint8_t>(code));
            out.audio.samples.push_back(mulaw_decode_sample(code));
            prev_code = code;
        }
        return out;
    }

    std::vector<std::pair<std::string, Tensor<T>*>> named_parameters() {
        std::vector<std::pair<std::string, Tensor<T>*>> out;
        out.push_back({"encoder/start/w", &enc_start_w_});
        out.push_back({"encoder/start/b", &enc_start_b_});
        for (size_t i = 0; i < enc_dconv_w_.size(); ++i) {
            std::string p = "encoder/layer" + std::to_string(i) + "/";
            out.push_back({p + "dconv/w", &enc_dconv_w_[i]});
            out.push_back({p + "dconv/b", &enc_dconv_b_[i]});
            out.push_back({p + "res/w", &enc_res_w_[i]});
            out.push_back({p + "res/b", &enc_res_b_[i]});
        }
        out.push_back({"encoder/bottleneck/w", &enc_bottleneck_w_});
        out.push_back({"encoder/bottleneck/b", &enc_bottleneck_b_});
        out.push_back({"decoder/start/w", &dec_start_w_});
        out.push_back({"decoder/start/b", &dec_start_b_});
        out.push_back({"decoder/skip_start/w", &dec_skip_start_w_});
        out.push_back({"decoder/skip_start/b", &dec_skip_start_b_});
        for (size_t i = 0; i < dec_dconv_w_.size(); ++i) {
            std::string p = "decoder/layer" + std::to_string(i) + "/";
            out.push_back({p + "dconv/w", &dec_dconv_w_[i]});
            out.push_back({p + "dconv/b", &dec_dconv_b_[i]});
            out.push_back({p + "cond/w", &dec_cond_w_[i]});
            out.push_back({p + "cond/b", &dec_cond_b_[i]});
            out.push_back({p + "res/w", &dec_res_w_[i]});
            out.push_back({p + "res/b", &dec_res_b_[i]});
            out.push_back({p + "skip/w", &dec_skip_w_[i]});
            out.push_back({p + "skip/b", &dec_skip_b_[i]});
        }
        out.push_back({"decoder/out1/w", &out1_w_});
        out.push_back({"decoder/out1/b", &out1_b_});
        out.push_back({"decoder/out1_cond/w", &out1_cond_w_});
        out.push_back({"decoder/out1_cond/b", &out1_cond_b_});
        out.push_back({"decoder/logits/w", &logits_w_});
        out.push_back({"decoder/logits/b", &logits_b_});
        return out;
    }

    int64_t parameter_count() {
        int64_t n = 0;
        for (auto& [name, p] : named_parameters()) n += p->size();
        return n;
    }

    void save(const std::string& path) {
        std::vector<NamedTensorF32> entries;
        entries.push_back({"meta/arch", {1}, {0.0f}});
        entries.push_back({"meta/config",
                           {8},
                           {float(cfg_.encoder_channels), float(cfg_.encoder_kernel),
                            float(cfg_.pool_stride), float(cfg_.embedding_dim),
                            float(cfg_.residual_channels), float(cfg_.skip_channels),
                            float(cfg_.decoder_kernel),
                            cfg_.pitch_conditioning ? 1.0f : 0.0f}});
        auto dil_entry = [](const char* name, const std::vector<int>& d) {
            NamedTensorF32 e;
            e.name = name;
            e.dims = {static_cast<uint32_t>(d.size())};
            for (int v : d) e.data.push_back(static_cast<float>(v));
            return e;
        };
        entries.push_back(dil_entry("meta/encoder_dilations", cfg_.encoder_dilations));
        entries.push_back(dil_entry("meta/decoder_dilations", cfg_.decoder_dilations));
        for (auto& [name, p] : named_parameters()) {
            NamedTensorF32 e;
            e.name = name;
            for (int64_t d : p->shape()) e.dims.push_back(static_cast<uint32_t>(d));
            e.data.reserve(p->size());
            for (int64_t i = 0; i < p->size(); ++i)
                e.data.push_back(static_cast<float>(p->data()[i]));
            entries.push_back(std::move(e));
        }
        save_checkpoint(path, entries);
    }

    static WavenetAutoencoder load(const std::string& path) {
        auto entries = load_checkpoint(path);
        auto find = [&](const std::string& name) -> const NamedTensorF32& {
            for (const auto& e : entries)
                if (e.name == name) return e;
            throw DataError("wavenet load: missing entry " + name);
        };
        if (find("meta/arch").data.at(0) != 0.0f)
            throw DataError("wavenet load: checkpoint is not a wavenet model");
        const auto& mc = find("meta/config").data;
        WavenetConfig cfg;
        cfg.encoder_channels = static_cast<int>(mc.at(0));
        cfg.encoder_kernel = static_cast<int>(mc.at(1));
        cfg.pool_stride = static_cast<int>(mc.at(2));
        cfg.embedding_dim = static_cast<int>(mc.at(3));
        cfg.residual_channels = static_cast<int>(mc.at(4));
        cfg.skip_channels = static_cast<int>(mc.at(5));
        cfg.decoder_kernel = static_cast<int>(mc.at(6));
        cfg.pitch_conditioning = mc.at(7) != 0.0f;
        cfg.encoder_dilations.clear();
        for (float v : find("meta/encoder_dilations").data)
            cfg.encoder_dilations.push_back(static_cast<int>(v));
        cfg.decoder_dilations.clear();
        for (float v : find("meta/decoder_dilations").data)
            cfg.decoder_dilations.push_back(static_cast<int>(v));

        WavenetAutoencoder model(cfg, 0);
        for (auto& [name, p] : model.named_parameters()) {
            const auto& e = find(name);
            if (static_cast<int64_t>(e.data.size()) != p->size())
                throw DataError("wavenet load: size mismatch for " + name);
            for (int64_t i = 0; i < p->size(); ++i)
                p->data()[i] = static_cast<T>(e.data[i]);
        }
        return model;
    }

    // Shared helpers used by train/eval paths and the CLI.

    Tensor<T> audio_tensor(const std::vector<const AudioBuffer*>& batch) const {
        const int64_t B = static_cast<int64_t>(batch.size());
        const int64_t Tn = static_cast<int64_t>(batch[0]->samples.size());
        for (auto* a : batch)
            if (static_cast<int64_t>(a->samples.size()) != Tn)
                throw std::invalid_argument("audio_tensor: ragged batch");
        Tensor<T> x = Tensor<T>::zeros({B, 1, Tn});
        for (int64_t b = 0; b < B; ++b)
            for (int64_t t = 0; t < Tn; ++t)
                x.data()[b * Tn + t] = static_cast<T>(batch[b]->samples[t]);
        return x;
    }

    Tensor<T> embedding_tensor(const std::vector<const TemporalEmbedding*>& zs) const {
        const int64_t B = static_cast<int64_t>(zs.size());
        const int steps = zs[0]->steps;
        for (auto* z : zs)
            if (z->steps != steps || z->channels != cfg_.embedding_dim)
                throw std::invalid_argument("embedding_tensor: shape mismatch");
        Tensor<T> t = Tensor<T>::zeros({B, cfg_.embedding_dim, steps});
        for (int64_t b = 0; b < B; ++b)
            for (int c = 0; c < cfg_.embedding_dim; ++c)
                for (int s = 0; s < steps; ++s)
                    t.data()[(b * cfg_.embedding_dim + c) * steps + s] =
                        static_cast<T>(zs[b]->at(s, c));
        return t;
    }

    static std::vector<int> flat_labels(const std::vector<std::vector<uint8_t>>& codes) {
        std::vector<int> labels;
        labels.reserve(codes.size() * codes[0].size());
        for (const auto& row : codes)
            for (uint8_t c : row) labels.push_back(c);
        return labels;
    }

    int pitch_index(int midi_pitch) const {
        int idx = midi_pitch - 21;
        if (idx < 0 || idx >= cfg_.pitch_classes)
            throw std::invalid_argument("pitch outside conditioning range [21, 108]");
        return idx;
    }

    void zero_grads() {
        for (auto& [name, p] : named_parameters()) p->zero_grad();
    }

private:
    // Upsampled conditioning [B, cond, T]: embeddings (plus the optional
    // pitch one-hot along channels) repeated pool_stride times, extended by
    // the last step when truncation left the code stream short.
    Tensor<T> conditioning(const Tensor<T>& z, const std::vector<int>* pitches,
                           int64_t out_time) {
        Tensor<T> cond = z;
        if (cfg_.pitch_conditioning) {
            if (!pitches || static_cast<int64_t>(pitches->size()) != z.shape()[0])
                throw std::invalid_argument("conditioning: model expects pitches");
            Tensor<T> oh = Tensor<T>::zeros(
                {z.shape()[0], cfg_.pitch_classes, z.shape()[2]});
            const int64_t steps = z.shape()[2];
            for (int64_t b = 0; b < z.shape()[0]; ++b) {
                int idx = pitch_index((*pitches)[b]);
                for (int64_t s = 0; s < steps; ++s)
                    oh.data()[(b * cfg_.pitch_classes + idx) * steps + s] = T(1);
            }
            cond = concat_dim1(cond, oh);
        }
        cond = nn_upsample1d(cond, cfg_.pool_stride);
        if (cond.shape()[2] < out_time) cond = nn_extend_time(cond, out_time);
        if (cond.shape()[2] > out_time) cond = slice_last(cond, 0, out_time);
        return cond;
    }

    Tensor<T> concat_time(const Tensor<T>& a, const Tensor<T>& b) {
        // Concatenation along the last axis, used only for zero right-padding.
        const auto& sa = a.shape();
        const auto& sb = b.shape();
        std::vector<int64_t> shape = sa;
        shape.back() = sa.back() + sb.back();
        Tensor<T> y = Tensor<T>::op_result(std::move(shape), {a, b});
        const int64_t outer = a.size() / sa.back();
        const int64_t la = sa.back(), lb = sb.back();
        for (int64_t o = 0; o < outer; ++o) {
            std::copy(a.data() + o * la, a.data() + (o + 1) * la,
                      y.data() + o * (la + lb));
            std::copy(b.data() + o * lb, b.data() + (o + 1) * lb,
                      y.data() + o * (la + lb) + la);
        }
        if (y.requires_grad()) {
            auto* an = a.node().get();
        auto* bn = b.node().get();
        auto* yn = y.node().get();
            y.set_backward([an, bn, yn, outer, la, lb] {
                if (an->requires_grad) {
                    an->ensure_grad();
                    for (int64_t o = 0; o < outer; ++o)
                        for (int64_t i = 0; i < la; ++i)
                            an->grad[o * la + i] += yn->grad[o * (la + lb) + i];
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    for (int64_t o = 0; o < outer; ++o)
                        for (int64_t i = 0; i < lb; ++i)
                            bn->grad[o * lb + i] += yn->grad[o * (la + lb) + la + i];
                }
            });
        }
        return y;
    }

    struct RingBuf {
        int width;
        int len;
        std::vector<T> data;  // len x width, slot (t % len)
        RingBuf(int w, int l) : width(w), len(std::max(1, l)), data(size_t(width) * len, T(0)) {}
        void push(int64_t t, const std::vector<T>& v) {
            std::copy(v.begin(), v.end(), data.begin() + (t % len) * width);
        }
        // Input vector at absolute time (t - back); zeros before the start.
        const T* at(int64_t t, int64_t back, const std::vector<T>& cur,
                    const std::vector<T>& zeros) const {
            if (back == 0) return cur.data();
            if (t - back < 0) return zeros.data();
            return data.data() + ((t - back) % len) * width;
        }
    };

    // y = W x + b for a [Co, Ci, 1] conv weight.
    void mat_vec(const Tensor<T>& w, const Tensor<T>& b, const std::vector<T>& x,
                 std::vector<T>& y) const {
        const int64_t Co = w.shape()[0], Ci = w.shape()[1];
        const T* wv = w.data();
        const T* bv = b.data();
        y.resize(Co);
        for (int64_t co = 0; co < Co; ++co) {
            T acc = bv[co];
            const T* row = wv + co * Ci;
            for (int64_t ci = 0; ci < Ci; ++ci) acc += row[ci] * x[ci];
            y[co] = acc;
        }
    }

    // y += W x + b (residual/skip accumulation).
    void accum_mat_vec(const Tensor<T>& w, const Tensor<T>& b,
                       const std::vector<T>& x, std::vector<T>& y) const {
        const int64_t Co = w.shape()[0], Ci = w.shape()[1];
        const T* wv = w.data();
        const T* bv = b.data();
        for (int64_t co = 0; co < Co; ++co) {
            T acc = bv[co];
            const T* row = wv + co * Ci;
            for (int64_t ci = 0; ci < Ci; ++ci) acc += row[ci] * x[ci];
            y[co] += acc;
        }
    }

    // One causal dilated-conv step from the ring buffer. The (ci, k)
    // accumulation order matches the batch conv1d kernel exactly, so fast and
    // teacher-forced logits agree to the last bit.
    void conv_step(const Tensor<T>& w, const Tensor<T>& b, const RingBuf& ring,
                   const std::vector<T>& cur, int64_t t, std::vector<T>& y) const {
        const int64_t Co = w.shape()[0], Ci = w.shape()[1], K = w.shape()[2];
        const int64_t dil = ring.len / std::max<int64_t>(1, K - 1);
        static thread_local std::vector<T> zeros;
        if (static_cast<int64_t>(zeros.size()) < Ci) zeros.assign(Ci, T(0));
        static thread_local std::vector<const T*> taps;
        taps.resize(K);
        for (int64_t k = 0; k < K; ++k)
            taps[k] = ring.at(t, (K - 1 - k) * dil, cur, zeros);
        const T* wv = w.data();
        const T* bv = b.data();
        y.resize(Co);
        for (int64_t co = 0; co < Co; ++co) {
            T acc = bv[co];
            const T* row = wv + co * Ci * K;
            for (int64_t ci = 0; ci < Ci; ++ci)
                for (int64_t k = 0; k < K; ++k) acc += row[ci * K + k] * taps[k][ci];
            y[co] = acc;
        }
    }

    Tensor<T> param(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
        return rand_uniform_init<T>(std::move(shape), fan_in, rng);
    }
    Tensor<T> param_zero(std::vector<int64_t> shape) {
        return Tensor<T>::zeros(std::move(shape), true);
    }

    std::vector<Tensor<T>*> parameter_ptrs() {
        std::vector<Tensor<T>*> out;
        for (auto& [name, p] : named_parameters()) out.push_back(p);
        return out;
    }

    WavenetConfig cfg_;
    Tensor<T> enc_start_w_, enc_start_b_;
    std::vector<Tensor<T>> enc_dconv_w_, enc_dconv_b_, enc_res_w_, enc_res_b_;
    Tensor<T> enc_bottleneck_w_, enc_bottleneck_b_;
    Tensor<T> dec_start_w_, dec_start_b_, dec_skip_start_w_, dec_skip_start_b_;
    std::vector<Tensor<T>> dec_dconv_w_, dec_dconv_b_, dec_cond_w_, dec_cond_b_;
    std::vector<Tensor<T>> dec_res_w_, dec_res_b_, dec_skip_w_, dec_skip_b_;
    Tensor<T> out1_w_, out1_b_, out1_cond_w_, out1_cond_b_;
    Tensor<T> logits_w_, logits_b_;
};

}  // namespace nsforge
