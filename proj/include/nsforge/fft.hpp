#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

#include "nsforge/common.hpp"

namespace nsforge {

// Iterative radix-2 Cooley-Tukey transform with precomputed twiddles.
// Forward is unscaled; inverse applies the 1/n factor.
class Fft {
public:
    explicit Fft(int n) : n_(n) {
        if (n < 1 || (n & (n - 1)) != 0)
            throw std::invalid_argument("Fft: size must be a power of two");
        rev_.resize(n);
        for (int i = 1, j = 0; i < n; ++i) {
            int bit = n >> 1;
            for (; j & bit; bit >>= 1) j ^= bit;
            j ^= bit;
            rev_[i] = j;
        }
        tw_.resize(n / 2);
        for (int k = 0; k < n / 2; ++k) {
            double ang = -2.0 * kPi * k / n;
            tw_[k] = {std::cos(ang), std::sin(ang)};
        }
    }

    int size() const { return n_; }

    void forward(std::complex<double>* buf) const { run(buf, false); }

    void inverse(std::complex<double>* buf) const {
        run(buf, true);
        double s = 1.0 / n_;
        for (int i = 0; i < n_; ++i) buf[i] *= s;
    }

private:
    void run(std::complex<double>* a, bool inv) const {
        for (int i = 0; i < n_; ++i)
            if (i < rev_[i]) std::swap(a[i], a[rev_[i]]);
        for (int len = 2; len <= n_; len <<= 1) {
            int step = n_ / len;
            for (int i = 0; i < n_; i += len) {
                for (int k = 0; k < len / 2; ++k) {
                    std::complex<double> w = tw_[k * step];
                    if (inv) w = std::conj(w);
                    std::complex<double> u = a[i + k];
                    std::complex<double> v = a[i + k + len / 2] * w;
                    a[i + k] = u + v;
                    a[i + k + len / 2] = u - v;
                }
            }
        }
    }

    int n_;
    std::vector<std::complex<double>> tw_;
    std::vector<int> rev_;
};

}  // namespace nsforge
