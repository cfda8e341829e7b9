// Independent oracles used by the test suites. Everything here is written
// against the defining formulas (direct summation, quadrature, finite
// differences) and never calls the implementation paths it checks.

#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

namespace oracle {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Direct O(N^2) forward DFT: c_k = sum_n s_n e^{-i 2 pi n k / N}.
inline std::vector<std::complex<double>> dft(std::span<const double> s) {
    const std::size_t n = s.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            const double a = -kTwoPi * double(i) * double(k) / double(n);
            acc += s[i] * std::complex<double>(std::cos(a), std::sin(a));
        }
        out[k] = acc;
    }
    return out;
}

// Direct O(N^2) inverse DFT with the 1/N convention (complex output).
inline std::vector<std::complex<double>> idft(std::span<const std::complex<double>> c) {
    const std::size_t n = c.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t k = 0; k < n; ++k) {
            const double a = kTwoPi * double(i) * double(k) / double(n);
            acc += c[k] * std::complex<double>(std::cos(a), std::sin(a));
        }
        out[i] = acc / double(n);
    }
    return out;
}

inline std::vector<int> signed_k(int n) {
    std::vector<int> k(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) k[std::size_t(j)] = j < (n + 1) / 2 ? j : j - n;
    return k;
}

// Central finite-difference gradient of a scalar function of a vector.
inline std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                       std::vector<double> x, double h = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double fp = f(x);
        x[i] = keep - h;
        const double fm = f(x);
        x[i] = keep;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace oracle
