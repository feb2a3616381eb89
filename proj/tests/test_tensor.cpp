#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "grad_check.hpp"
#include "nsforge/checkpoint.hpp"
#include "nsforge/ops.hpp"
#include "nsforge/optim.hpp"

using namespace nsforge;
using nsforge::testing::check_gradients;
using nsforge::testing::random_tensor;

TEST_CASE("conv1d identity kernel passes input through") {
    Rng rng(1);
    auto x = random_tensor({2, 3, 16}, rng, -1, 1, false);
    auto w = Tensor<double>::zeros({3, 3, 1});
    for (int c = 0; c < 3; ++c) w.data()[c * 3 + c] = 1.0;
    auto b = Tensor<double>::zeros({3});
    auto y = conv1d(x, w, b, 1, true);
    for (int64_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv1d rejects channel mismatch") {
    auto x = Tensor<double>::zeros({1, 3, 8});
    auto w = Tensor<double>::zeros({4, 2, 2});
    auto b = Tensor<double>::zeros({4});
    CHECK_THROWS_AS(conv1d(x, w, b, 1, true), std::invalid_argument);
}

TEST_CASE("causal conv1d only affects outputs at or after a perturbation") {
    Rng rng(2);
    for (int trial = 0; trial < 8; ++trial) {
        int dilation = 1 << rng.uniform_int(4);
        int k = 2 + static_cast<int>(rng.uniform_int(2));
        auto x = random_tensor({1, 2, 48}, rng, -1, 1, false);
        auto w = random_tensor({2, 2, k}, rng, -1, 1, false);
        auto b = random_tensor({2}, rng, -1, 1, false);
        auto y0 = conv1d(x, w, b, dilation, true);

        int64_t t = 5 + static_cast<int64_t>(rng.uniform_int(30));
        auto x2 = Tensor<double>::from_data(x.shape(),
                                            {x.data(), x.data() + x.size()});
        x2.data()[0 * 48 + t] += 0.5;  // channel 0
        auto y1 = conv1d(x2, w, b, dilation, true);
        for (int c = 0; c < 2; ++c)
            for (int64_t s = 0; s < 48; ++s) {
                double d = std::abs(y1.data()[c * 48 + s] - y0.data()[c * 48 + s]);
                if (s < t) CHECK(d == 0.0);
            }
        CHECK(std::abs(y1.data()[t] - y0.data()[t]) > 0.0);
    }
}

TEST_CASE("conv1d gradients match finite differences") {
    Rng rng(3);
    for (bool causal : {true, false}) {
        for (int dilation : {1, 2, 4}) {
            auto x = random_tensor({2, 3, 12}, rng);
            auto w = random_tensor({4, 3, 3}, rng);
            auto b = random_tensor({4}, rng);
            auto target = random_tensor({2, 4, 12}, rng, -1, 1, false);
            auto res = check_gradients(
                {&x, &w, &b},
                [&] { return mse_loss(conv1d(x, w, b, dilation, causal), target); }, 50,
                rng);
            INFO("causal=" << causal << " dilation=" << dilation << " at " << res.worst);
            CHECK(res.max_rel_err < 1e-4);
        }
    }
}

TEST_CASE("conv2d SAME shape arithmetic: 32x32 stride 2 gives 16x16") {
    auto x = Tensor<double>::zeros({1, 1, 32, 32});
    auto w = Tensor<double>::zeros({2, 1, 4, 4});
    auto b = Tensor<double>::zeros({2});
    auto y = conv2d(x, w, b, 2, 2);
    CHECK(y.shape() == std::vector<int64_t>{1, 2, 16, 16});
}

TEST_CASE("conv2d_transpose inverts conv2d's shape map") {
    Rng rng(4);
    for (auto [h, w] : std::vector<std::pair<int, int>>{
             {32, 32}, {5, 7}, {1, 1}, {9, 4}, {16, 1}}) {
        auto x = random_tensor({1, 2, h, w}, rng, -1, 1, false);
        auto cw = random_tensor({3, 2, 4, 4}, rng, -1, 1, false);
        auto cb = Tensor<double>::zeros({3});
        auto down = conv2d(x, cw, cb, 2, 2);
        auto tw = random_tensor({3, 2, 4, 4}, rng, -1, 1, false);
        auto tb = Tensor<double>::zeros({2});
        auto up = conv2d_transpose(down, tw, tb, 2, 2, h, w);
        CHECK(up.shape() == x.shape());
    }
    // Non-invertible output shape is rejected.
    auto x = Tensor<double>::zeros({1, 1, 4, 4});
    auto tw = Tensor<double>::zeros({1, 1, 4, 4});
    auto tb = Tensor<double>::zeros({1});
    CHECK_THROWS_AS(conv2d_transpose(x, tw, tb, 2, 2, 20, 20), std::invalid_argument);
}

TEST_CASE("conv2d and conv2d_transpose gradients match finite differences") {
    Rng rng(5);
    auto x = random_tensor({2, 2, 6, 5}, rng);
    auto w = random_tensor({3, 2, 4, 4}, rng);
    auto b = random_tensor({3}, rng);
    auto target = random_tensor({2, 3, 3, 3}, rng, -1, 1, false);
    auto res = check_gradients(
        {&x, &w, &b}, [&] { return mse_loss(conv2d(x, w, b, 2, 2), target); }, 50, rng);
    CHECK(res.max_rel_err < 1e-4);

    auto xt = random_tensor({2, 3, 3, 3}, rng);
    auto wt = random_tensor({3, 2, 4, 4}, rng);
    auto bt = random_tensor({2}, rng);
    auto target2 = random_tensor({2, 2, 6, 5}, rng, -1, 1, false);
    auto res2 = check_gradients(
        {&xt, &wt, &bt},
        [&] { return mse_loss(conv2d_transpose(xt, wt, bt, 2, 2, 6, 5), target2); }, 50,
        rng);
    CHECK(res2.max_rel_err < 1e-4);
}

TEST_CASE("activation values") {
    auto x = Tensor<double>::from_data({4}, {-1.0, -0.25, 0.0, 2.0});
    auto lr = leaky_relu(x, 0.1);
    CHECK(lr.data()[0] == -0.1);
    CHECK(lr.data()[1] == -0.025);
    CHECK(lr.data()[3] == 2.0);
    auto r = relu(x);
    CHECK(r.data()[0] == 0.0);
    CHECK(r.data()[2] == 0.0);
    CHECK(r.data()[3] == 2.0);
    CHECK(tanh_op(x).data()[3] == Catch::Approx(std::tanh(2.0)));
    CHECK(sigmoid_op(x).data()[2] == 0.5);
}

TEST_CASE("activation gradients away from kinks") {
    Rng rng(6);
    // Keep probes clear of |x| < 0.05 so the subgradient at 0 never collides
    // with the finite-difference stencil.
    auto make = [&] {
        auto t = Tensor<double>::zeros({64}, true);
        for (int i = 0; i < 64; ++i) {
            double v = rng.uniform(0.1, 1.0);
            t.data()[i] = rng.uniform() < 0.5 ? -v : v;
        }
        return t;
    };
    auto target = random_tensor({64}, rng, -1, 1, false);
    for (int which = 0; which < 4; ++which) {
        auto x = make();
        auto res = check_gradients(
            {&x},
            [&]() -> Tensor<double> {
                switch (which) {
                    case 0: return mse_loss(relu(x), target);
                    case 1: return mse_loss(leaky_relu(x, 0.1), target);
                    case 2: return mse_loss(tanh_op(x), target);
                    default: return mse_loss(sigmoid_op(x), target);
                }
            },
            50, rng);
        INFO("activation " << which);
        CHECK(res.max_rel_err < 1e-4);
    }
}

TEST_CASE("batch_norm normalizes per channel in train mode") {
    Rng rng(7);
    auto x = random_tensor({4, 3, 10}, rng, -2, 3, false);
    auto gamma = Tensor<double>::filled({3}, 1.0);
    auto beta = Tensor<double>::zeros({3});
    std::vector<double> rm(3, 0.0), rv(3, 1.0);
    auto y = batch_norm(x, gamma, beta, rm, rv, true);
    for (int c = 0; c < 3; ++c) {
        double mean = 0.0, var = 0.0;
        for (int b = 0; b < 4; ++b)
            for (int s = 0; s < 10; ++s) mean += y.data()[(b * 3 + c) * 10 + s];
        mean /= 40;
        for (int b = 0; b < 4; ++b)
            for (int s = 0; s < 10; ++s) {
                double d = y.data()[(b * 3 + c) * 10 + s] - mean;
                var += d * d;
            }
        var /= 40;
        CHECK(std::abs(mean) < 1e-5);
        CHECK(std::abs(var - 1.0) < 1e-5);
    }
    CHECK(rm[0] != 0.0);  // running stats updated
}

TEST_CASE("batch_norm eval mode with unit running stats is the identity") {
    Rng rng(8);
    auto x = random_tensor({2, 3, 5}, rng, -1, 1, false);
    auto gamma = Tensor<double>::filled({3}, 1.0);
    auto beta = Tensor<double>::zeros({3});
    std::vector<double> rm(3, 0.0), rv(3, 1.0);
    auto y = batch_norm(x, gamma, beta, rm, rv, false);
    for (int64_t i = 0; i < x.size(); ++i)
        CHECK(y.data()[i] == Catch::Approx(x.data()[i]).margin(1e-7));
}

TEST_CASE("batch_norm rejects a train-mode batch of one") {
    auto x = Tensor<double>::zeros({1, 2, 4});
    auto gamma = Tensor<double>::filled({2}, 1.0);
    auto beta = Tensor<double>::zeros({2});
    std::vector<double> rm(2, 0.0), rv(2, 1.0);
    CHECK_THROWS_AS(batch_norm(x, gamma, beta, rm, rv, true), std::invalid_argument);
}

TEST_CASE("batch_norm gradients match finite differences") {
    Rng rng(9);
    auto x = random_tensor({3, 2, 6}, rng);
    auto gamma = random_tensor({2}, rng, 0.5, 1.5);
    auto beta = random_tensor({2}, rng, -0.5, 0.5);
    auto target = random_tensor({3, 2, 6}, rng, -1, 1, false);
    for (bool train : {true, false}) {
        std::vector<double> rm = {0.1, -0.2}, rv = {0.9, 1.3};
        auto res = check_gradients(
            {&x, &gamma, &beta},
            [&] {
                std::vector<double> rm2 = rm, rv2 = rv;  // keep stats frozen
                return mse_loss(batch_norm(x, gamma, beta, rm2, rv2, train), target);
            },
            50, rng);
        INFO("train=" << train);
        CHECK(res.max_rel_err < 1e-4);
    }
}

TEST_CASE("avg_pool1d and nn_upsample1d basics") {
    auto x = Tensor<double>::from_data({1, 1, 4}, {1, 2, 3, 4});
    auto p = avg_pool1d(x, 2, 2);
    CHECK(p.values() == std::vector<double>{1.5, 3.5});

    auto u = nn_upsample1d(Tensor<double>::from_data({1, 1, 2}, {5, 7}), 2);
    CHECK(u.values() == std::vector<double>{5, 5, 7, 7});

    CHECK_THROWS_AS(nn_upsample1d(x, 0), std::invalid_argument);
}

TEST_CASE("pooling the upsampled signal recovers it exactly") {
    Rng rng(10);
    for (int64_t factor : {2, 4, 8, 64, 512}) {
        auto z = random_tensor({2, 3, 5}, rng, -1, 1, false);
        auto up = nn_upsample1d(z, factor);
        auto back = avg_pool1d(up, factor, factor);
        REQUIRE(back.shape() == z.shape());
        for (int64_t i = 0; i < z.size(); ++i) CHECK(back.data()[i] == z.data()[i]);
    }
}

TEST_CASE("pool/upsample gradients match finite differences") {
    Rng rng(11);
    auto x = random_tensor({2, 2, 12}, rng);
    auto target = random_tensor({2, 2, 24}, rng, -1, 1, false);
    auto res = check_gradients(
        {&x},
        [&] { return mse_loss(nn_upsample1d(avg_pool1d(x, 2, 2), 4), target); }, 40,
        rng);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("dense gradients match finite differences") {
    Rng rng(12);
    auto x = random_tensor({3, 5}, rng);
    auto w = random_tensor({5, 4}, rng);
    auto b = random_tensor({4}, rng);
    auto target = random_tensor({3, 4}, rng, -1, 1, false);
    auto res = check_gradients(
        {&x, &w, &b}, [&] { return mse_loss(dense(x, w, b), target); }, 50, rng);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("softmax_ce on uniform logits over 256 classes is ln(256)") {
    auto logits = Tensor<double>::zeros({3, 256});
    std::vector<int> labels = {0, 100, 255};
    CHECK(softmax_ce(logits, labels).item() == Catch::Approx(std::log(256.0)).epsilon(1e-12));
    CHECK(std::log(256.0) == Catch::Approx(5.5452).margin(1e-4));

    std::vector<int> bad = {0, 256, 1};
    CHECK_THROWS_AS(softmax_ce(logits, bad), std::invalid_argument);
}

TEST_CASE("sigmoid_ce at zero logits against 0.5 targets is ln 2") {
    auto logits = Tensor<double>::zeros({2, 5});
    auto targets = Tensor<double>::filled({2, 5}, 0.5);
    CHECK(sigmoid_ce(logits, targets).item() == Catch::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("loss gradients match finite differences") {
    Rng rng(13);
    auto logits = random_tensor({4, 9}, rng);
    std::vector<int> labels;
    for (int i = 0; i < 4; ++i) labels.push_back(static_cast<int>(rng.uniform_int(9)));
    auto res = check_gradients(
        {&logits}, [&] { return softmax_ce(logits, labels); }, 36, rng);
    CHECK(res.max_rel_err < 1e-4);

    // Sequence layout [B, C, T].
    auto seq_logits = random_tensor({2, 5, 6}, rng);
    std::vector<int> seq_labels;
    for (int i = 0; i < 12; ++i) seq_labels.push_back(static_cast<int>(rng.uniform_int(5)));
    auto res_seq = check_gradients(
        {&seq_logits}, [&] { return softmax_ce(seq_logits, seq_labels); }, 50, rng);
    CHECK(res_seq.max_rel_err < 1e-4);

    auto slogits = random_tensor({3, 7}, rng);
    auto stargets = random_tensor({3, 7}, rng, 0.0, 1.0, false);
    auto res2 = check_gradients(
        {&slogits}, [&] { return sigmoid_ce(slogits, stargets); }, 21, rng);
    CHECK(res2.max_rel_err < 1e-4);
}

TEST_CASE("composite three-op graph gradient matches finite differences") {
    Rng rng(14);
    auto x = random_tensor({4, 6}, rng);
    auto w = random_tensor({6, 3}, rng);
    auto b = random_tensor({3}, rng);
    auto target = random_tensor({4, 3}, rng, -1, 1, false);
    auto res = check_gradients(
        {&x, &w, &b},
        [&] { return mse_loss(tanh_op(dense(x, w, b)), target); }, 50, rng);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("backward rejects a non-scalar loss") {
    auto x = random_tensor({2, 2}, *(new Rng(15)));
    auto y = relu(x);
    CHECK_THROWS_AS(backward(y), std::invalid_argument);
}

TEST_CASE("Adam on w^2 shrinks |w| monotonically") {
    auto w = Tensor<double>::from_data({1}, {1.0}, true);
    AdamState<double> st;
    double prev = 1.0;
    for (int step = 0; step < 100; ++step) {
        w.zero_grad();
        auto loss = mul(w, w);
        backward(loss);
        adam_step<double>({&w}, st, 1e-2);
        double cur = std::abs(w.data()[0]);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("adam_step rejects shape drift") {
    auto w = Tensor<double>::from_data({2}, {1.0, 2.0}, true);
    AdamState<double> st;
    w.zero_grad();
    auto loss = mean_all(mul(w, w));
    backward(loss);
    adam_step<double>({&w}, st, 1e-3);
    auto w2 = Tensor<double>::from_data({3}, {1.0, 2.0, 3.0}, true);
    w2.zero_grad();
    CHECK_THROWS_AS(adam_step<double>({&w2}, st, 1e-3), std::invalid_argument);
}

TEST_CASE("wavenet learning-rate schedule") {
    auto s = wavenet_lr_schedule();
    CHECK(lr_at(s, 0) == 2e-4);
    CHECK(lr_at(s, 119999) == 2e-4);
    CHECK(lr_at(s, 120000) == 6e-5);
    CHECK(lr_at(s, 180000) == 2e-5);
    CHECK(lr_at(s, 240000) == 6e-6);
    CHECK(lr_at(s, 10000000) == 6e-6);

    LrSchedule bad{{{0, 1e-4}, {0, 2e-4}}};
    CHECK_THROWS_AS(lr_at(bad, 1), std::invalid_argument);
    LrSchedule neg{{{0, -1.0}}};
    CHECK_THROWS_AS(lr_at(neg, 1), std::invalid_argument);
}

TEST_CASE("forward and backward are deterministic across repeated runs") {
    // This exercises the parallel conv kernels; disjoint writes with a fixed
    // per-element order make the result independent of scheduling.
    auto run = [] {
        Rng rng(99);
        auto x = random_tensor({4, 8, 256}, rng);
        auto w = random_tensor({8, 8, 3}, rng);
        auto b = random_tensor({8}, rng);
        auto target = random_tensor({4, 8, 256}, rng, -1, 1, false);
        auto loss = mse_loss(conv1d(x, w, b, 2, true), target);
        backward(loss);
        std::vector<double> out = {loss.item()};
        out.insert(out.end(), w.grad_values().begin(), w.grad_values().end());
        out.insert(out.end(), x.grad_values().begin(), x.grad_values().end());
        return out;
    };
    CHECK(run() == run());
}

TEST_CASE("NSFG1 checkpoint round trip") {
    auto tmp = std::filesystem::temp_directory_path();
    std::string path = (tmp / "nsforge_ckpt.nsfg").string();
    std::vector<NamedTensorF32> entries = {
        {"a/w", {2, 3}, {1, 2, 3, 4, 5, 6}},
        {"a/b", {3}, {0.5f, -0.5f, 0.25f}},
        {"scalar", {1}, {42.0f}},
        {"empty", {0}, {}},
    };
    save_checkpoint(path, entries);
    auto back = load_checkpoint(path);
    REQUIRE(back.size() == entries.size());
    for (size_t i = 0; i < entries.size(); ++i) {
        CHECK(back[i].name == entries[i].name);
        CHECK(back[i].dims == entries[i].dims);
        CHECK(back[i].data == entries[i].data);
    }
    std::filesystem::remove(path);

    std::string junk = (tmp / "nsforge_junk.nsfg").string();
    {
        std::ofstream f(junk, std::ios::binary);
        f << "NOPE!";
    }
    CHECK_THROWS_AS(load_checkpoint(junk), DataError);
    std::filesystem::remove(junk);
}
