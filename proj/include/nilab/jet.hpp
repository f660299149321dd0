#pragma once

#include <array>
#include <cmath>

namespace nilab {

// Truncated Taylor series c[0] + c[1] e + ... + c[K] e^K.
template <int K>
struct Jet {
    std::array<double, K + 1> c{};
    Jet() = default;
    Jet(double v) { c[0] = v; }
    static Jet variable(double v, double speed = 1.0)
    {
        Jet j(v);
        if constexpr (K >= 1) j.c[1] = speed;
        return j;
    }
};

template <int K>
Jet<K> operator+(const Jet<K>& a, const Jet<K>& b)
{
    Jet<K> r;
    for (int i = 0; i <= K; ++i) r.c[i] = a.c[i] + b.c[i];
    return r;
}

template <int K>
Jet<K> operator-(const Jet<K>& a, const Jet<K>& b)
{
    Jet<K> r;
    for (int i = 0; i <= K; ++i) r.c[i] = a.c[i] - b.c[i];
    return r;
}

template <int K>
Jet<K> operator*(const Jet<K>& a, const Jet<K>& b)
{
    Jet<K> r;
    for (int i = 0; i <= K; ++i)
        for (int j = 0; i + j <= K; ++j) r.c[i + j] += a.c[i] * b.c[j];
    return r;
}

template <int K>
Jet<K> operator/(const Jet<K>& a, const Jet<K>& b)
{
    Jet<K> r;
    for (int n = 0; n <= K; ++n) {
        double s = a.c[n];
        for (int k = 1; k <= n; ++k) s -= b.c[k] * r.c[n - k];
        r.c[n] = s / b.c[0];
    }
    return r;
}

template <int K>
Jet<K> exp(const Jet<K>& a)
{
    Jet<K> r;
    r.c[0] = std::exp(a.c[0]);
    for (int n = 1; n <= K; ++n) {
        double s = 0.0;
        for (int k = 1; k <= n; ++k) s += k * a.c[k] * r.c[n - k];
        r.c[n] = s / n;
    }
    return r;
}

inline double value(double v) { return v; }
template <int K>
double value(const Jet<K>& j)
{
    return j.c[0];
}

// Smooth step: 0 for t <= 0, 1 for t >= 1, glued from exp(-1/t); V is double or a Jet.
template <class V>
V smooth_step_t(const V& t)
{
    using std::exp;
    if (value(t) <= 0.0) return V(0.0);
    if (value(t) >= 1.0) return V(1.0);
    const V a = exp(V(0.0) - V(1.0) / t);
    const V b = exp(V(0.0) - V(1.0) / (V(1.0) - t));
    return a / (a + b);
}

} // namespace nilab
