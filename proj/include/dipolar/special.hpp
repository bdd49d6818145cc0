#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <type_traits>
#include <utility>

namespace dipolar::special {

inline constexpr double pi = std::numbers::pi;

// Regularized upper incomplete gamma Q(s, x) for s = 3/2 and s = 5/2.
// The lower part P = 1 - Q uses its series below x = 1 to avoid cancellation.
inline double gamma_p_series(double s, double x) {
    if (x <= 0.0) return 0.0;
    double term = 1.0 / s, sum = term;
    for (int k = 1; k < 200; ++k) {
        term *= x / (s + k);
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return std::exp(s * std::log(x) - x - std::lgamma(s)) * sum;
}

inline double gamma_q_half(int twice_s, double x) {
    const double s = 0.5 * twice_s;
    if (x < 1.0) return 1.0 - gamma_p_series(s, x);
    const double rx = std::sqrt(x);
    double q = std::erfc(rx) + 2.0 * rx / std::sqrt(pi) * std::exp(-x);
    if (twice_s == 5) q += 4.0 * rx * x / (3.0 * std::sqrt(pi)) * std::exp(-x);
    return q;
}

inline double gamma_p_half(int twice_s, double x) {
    if (x < 1.0) return gamma_p_series(0.5 * twice_s, x);
    return 1.0 - gamma_q_half(twice_s, x);
}

// J0, J1, J2 together. Miller backward recurrence normalised by
// J0 + 2 sum J_2k = 1; power series for small arguments.
struct bessel012 {
    double j0, j1, j2;
};

inline bessel012 bessel_j012(double x) {
    const double ax = std::abs(x);
    if (ax < 2.0) {
        const double h = 0.5 * x, h2 = -h * h;
        double t0 = 1.0, t1 = h, t2 = 0.5 * h * h;
        double s0 = t0, s1 = t1, s2 = t2;
        for (int k = 1; k < 30; ++k) {
            t0 *= h2 / (double(k) * k);
            t1 *= h2 / (double(k) * (k + 1));
            t2 *= h2 / (double(k) * (k + 2));
            s0 += t0;
            s1 += t1;
            s2 += t2;
            if (std::abs(t0) < 1e-18 && std::abs(t1) < 1e-18) break;
        }
        return {s0, s1, s2};
    }
    if (ax >= 25.0) {
        // Hankel asymptotic expansion for J0 and J1
        auto pq = [ax](double nu, double& p, double& q) {
            const double mu = 4.0 * nu * nu;
            double term = 1.0;
            p = 1.0;
            q = 0.0;
            for (int k = 1; k < 60; ++k) {
                term *= (mu - (2.0 * k - 1) * (2.0 * k - 1)) / (k * 8.0 * ax);
                if (k % 2 == 1)
                    q += (k % 4 == 1 ? 1.0 : -1.0) * term;
                else
                    p += (k % 4 == 2 ? -1.0 : 1.0) * term;
                if (std::abs(term) < 1e-17) break;
            }
        };
        double p0, q0, p1, q1;
        pq(0.0, p0, q0);
        pq(1.0, p1, q1);
        const double amp = std::sqrt(2.0 / (pi * ax));
        const double c0 = ax - 0.25 * pi, c1 = ax - 0.75 * pi;
        const double j0 = amp * (p0 * std::cos(c0) - q0 * std::sin(c0));
        const double j1 = amp * (p1 * std::cos(c1) - q1 * std::sin(c1));
        return {j0, x < 0 ? -j1 : j1, 2.0 / ax * j1 - j0};
    }
    int top = 2 * static_cast<int>((ax + 20.0 + 4.0 * std::cbrt(ax)) / 2.0);
    double next = 0.0, cur = 1e-300, norm = 0.0;
    double j0 = 0.0, j1 = 0.0, j2 = 0.0;
    const double inv = 2.0 / ax;
    for (int k = top; k >= 1; --k) {
        const double prev = k * inv * cur - next;  // J_{k-1}
        next = cur;
        cur = prev;
        if (k - 1 == 2) j2 = cur;
        if (k - 1 == 1) j1 = cur;
        if ((k - 1) % 2 == 0 && k - 1 > 0) norm += 2.0 * cur;
        if (std::abs(cur) > 1e250) {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
            j2 *= 1e-250;
        }
    }
    j0 = cur;
    norm += j0;
    j0 /= norm;
    j1 /= norm;
    j2 /= norm;
    if (x < 0) j1 = -j1;
    return {j0, j1, j2};
}

// Gauss-Legendre rule with N nodes on [-1, 1].
template <int N>
struct gauss_legendre {
    std::array<double, N> x{}, w{};
    gauss_legendre() {
        for (int i = 0; i < (N + 1) / 2; ++i) {
            double z = std::cos(pi * (i + 0.75) / (N + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = 0.0;
                for (int j = 1; j <= N; ++j) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
                }
                dp = N * (z * p0 - p1) / (z * z - 1.0);
                const double dz = p0 / dp;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            x[i] = -z;
            x[N - 1 - i] = z;
            w[i] = w[N - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
    }
};

inline const gauss_legendre<16>& gl16() {
    static const gauss_legendre<16> rule;
    return rule;
}

template <class T>
T zero_value() {
    if constexpr (std::is_arithmetic_v<T>) {
        return T{};
    } else {
        T z;
        z.setZero();
        return z;
    }
}

// Composite 16-point rule on [a, b] with `panels` equal panels.
template <class F>
auto integrate(F&& f, double a, double b, int panels) {
    using value = std::decay_t<decltype(f(a))>;
    const auto& g = gl16();
    const double h = (b - a) / panels;
    value sum = zero_value<value>();
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * h;
        value part = zero_value<value>();
        for (int i = 0; i < 16; ++i) part += g.w[i] * f(mid + 0.5 * h * g.x[i]);
        sum += part;
    }
    return sum * (0.5 * h);
}

}  // namespace dipolar::special
