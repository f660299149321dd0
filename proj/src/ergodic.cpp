#include "nilab/ergodic.hpp"

#include "nilab/jet.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace nilab {

namespace {

using Jet4 = Jet<4>;

template <class V>
V eta_k_impl(double T, int k, const V& t)
{
    const double s = std::ldexp(T, -2 * k);   // 4^{-k} T
    return smooth_step_t((V(8.0) * t - V(s)) / V(s));
}

template <class V>
V phi_impl(double T, int n, int k, const V& t)
{
    if (k < 0) return phi_impl(T, n, -k, V(T) - t);
    if (k == 0) return eta_k_impl(T, 0, t) + eta_k_impl(T, 0, V(T) - t) - V(1.0);
    if (k < n) return eta_k_impl(T, k, t) - eta_k_impl(T, k - 1, t);
    return V(1.0) - eta_k_impl(T, n - 1, t);
}

// tolerance per unit of original time, for an integrand renormalized k steps
QuadratureSpec scaled(const QuadratureSpec& q, double lambda, int k)
{
    QuadratureSpec r = q;
    r.tol = q.tol * std::pow(lambda, k);
    r.panel = q.panel * std::pow(lambda, -k);
    return r;
}

Observable remove_mean(const Observable& h)
{
    const cplx m = mean(h);
    if (m == cplx(0.0)) return h;
    return combine(1.0, h, -m, Observable::constant(1.0, h.lattice));
}

constexpr double kPi = 3.14159265358979323846;
// crossings whose Gaussian factor stays below exp(-kCut) everywhere are dropped
constexpr double kCut = 46.0;

constexpr int kMaxPolyDegree = 8;

// Taylor coefficients of P(wc + t u) in t, up to degree deg
void poly_along(const Poly2& P, const double wc[2], const double u[2], int deg, cplx* out)
{
    std::fill(out, out + deg + 1, cplx(0.0));
    if (P.empty()) {
        out[0] = 1.0;
        return;
    }
    auto power = [deg](double a, double b, int n, double* r) {
        std::fill(r, r + deg + 1, 0.0);
        r[0] = 1.0;
        for (int e = 0; e < n; ++e)
            for (int i = deg; i >= 0; --i) r[i] = a * r[i] + (i > 0 ? b * r[i - 1] : 0.0);
    };
    double p0[kMaxPolyDegree + 1], p1[kMaxPolyDegree + 1];
    for (const auto& [e, c] : P) {
        power(wc[0], u[0], e.first, p0);
        power(wc[1], u[1], e.second, p1);
        for (int i = 0; i <= deg; ++i)
            for (int j = 0; i + j <= deg; ++j) out[i + j] += c * (p0[i] * p1[j]);
    }
}

int poly_degree(const Poly2& P)
{
    int d = 0;
    for (const auto& [e, c] : P) d = std::max(d, e.first + e.second);
    return d;
}

} // namespace

Window tabulate_taylor(const Window& w, double spacing)
{
    if (!w.taylor) throw std::invalid_argument("tabulate_taylor: window has no Taylor data");
    if (!(spacing > 0.0)) throw std::invalid_argument("tabulate_taylor: spacing must be positive");
    constexpr int K = kWindowTaylorOrder;
    const auto n = static_cast<std::size_t>(std::ceil((w.b - w.a) / spacing));
    const double hstep = (w.b - w.a) / static_cast<double>(n);
    auto table = std::make_shared<std::vector<std::array<double, K + 1>>>(n + 1);
    for (std::size_t j = 0; j <= n; ++j) w.taylor(w.a + hstep * static_cast<double>(j), (*table)[j].data());
    Window out = w;
    const double a = w.a;
    out.taylor = [table, a, hstep, n](double s, double* c) {
        const double r = std::round((s - a) / hstep);
        const auto j = static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(n)));
        const double d = s - (a + hstep * static_cast<double>(j));
        std::copy((*table)[j].begin(), (*table)[j].end(), c);
        // Taylor shift by d, repeated synthetic division
        for (int i = 0; i < K; ++i)
            for (int m = K - 1; m >= i; --m) c[m] += d * c[m + 1];
    };
    return out;
}

double crossing_sigma(const ThetaAtom& atom, const Automorphism& A)
{
    const IntMat2 Mi = atom.frame.inverse();
    const double u0 = static_cast<double>(Mi.a) * A.alpha + static_cast<double>(Mi.b) * A.beta;
    const double u1 = static_cast<double>(Mi.c) * A.alpha + static_cast<double>(Mi.d) * A.beta;
    const double uQu = atom.q0[0] * u0 * u0 + 2.0 * atom.q0[1] * u0 * u1 + atom.q0[2] * u1 * u1;
    return 1.0 / std::sqrt(2.0 * kPi * uQu);
}

QuadResult atom_crossing_integral(const ThetaAtom& atom, int D, const Automorphism& A, const HeisPoint& y,
                                  const Window& w)
{
    if (!w.taylor) throw std::invalid_argument("atom_crossing_integral: window has no Taylor data");
    const IntMat2& M = atom.frame;
    const IntMat2 Mi = M.inverse();
    const double Q11 = atom.q0[0], Q12 = atom.q0[1], Q22 = atom.q0[2];
    auto Qdot = [&](const double a[2], const double b[2]) {
        return Q11 * a[0] * b[0] + Q12 * (a[0] * b[1] + a[1] * b[0]) + Q22 * a[1] * b[1];
    };
    const double u[2] = {static_cast<double>(Mi.a) * A.alpha + static_cast<double>(Mi.b) * A.beta,
                         static_cast<double>(Mi.c) * A.alpha + static_cast<double>(Mi.d) * A.beta};
    const double b0[2] = {static_cast<double>(Mi.a) * y.x + static_cast<double>(Mi.b) * y.y - atom.c0[0],
                          static_cast<double>(Mi.c) * y.x + static_cast<double>(Mi.d) * y.y - atom.c0[1]};
    const double uQu = Qdot(u, u);
    const double a2 = kPi * uQu;
    const double reach = std::sqrt(kCut / a2);
    const double lo = w.a - reach, hi = w.b + reach;
    // half extents of the ellipse w^T Q w <= kCut / pi
    const double det = Q11 * Q22 - Q12 * Q12;
    const double R0 = std::sqrt(kCut / kPi * Q22 / det), R1 = std::sqrt(kCut / kPi * Q11 / det);

    const int deg = poly_degree(atom.poly);
    if (deg > kMaxPolyDegree) throw std::invalid_argument("atom_crossing_integral: polynomial degree above 8");
    const int order = kWindowTaylorOrder + deg;
    const bool odd_D = (D % 2) != 0;
    const double drift = 0.5 * (y.x * A.beta - y.y * A.alpha);

    QuadResult out;
    cplx sum = 0.0;
    double mag = 0.0;
    double fw[kWindowTaylorOrder + 1];
    cplx mom[kWindowTaylorOrder + kMaxPolyDegree + 1];
    cplx pt[kMaxPolyDegree + 1];
    cplx g[kWindowTaylorOrder + kMaxPolyDegree + 1];

    auto range_of = [](double c, double v, double s0, double s1, double& rlo, double& rhi) {
        const double e0 = c + v * s0, e1 = c + v * s1;
        rlo = std::min(e0, e1);
        rhi = std::max(e0, e1);
    };
    double l0, h0;
    range_of(b0[0], u[0], lo, hi, l0, h0);
    const auto m0lo = static_cast<std::int64_t>(std::ceil(-h0 - R0));
    const auto m0hi = static_cast<std::int64_t>(std::floor(-l0 + R0));
    for (std::int64_t m0 = m0lo; m0 <= m0hi; ++m0) {
        const double c0 = b0[0] + static_cast<double>(m0);
        double s0 = lo, s1 = hi;
        if (std::abs(u[0]) > 0.0) {
            const double ta = (-R0 - c0) / u[0], tb = (R0 - c0) / u[0];
            s0 = std::max(lo, std::min(ta, tb));
            s1 = std::min(hi, std::max(ta, tb));
            if (s0 > s1) continue;
        }
        double l1, h1;
        range_of(b0[1], u[1], s0, s1, l1, h1);
        const auto m1lo = static_cast<std::int64_t>(std::ceil(-h1 - R1));
        const auto m1hi = static_cast<std::int64_t>(std::floor(-l1 + R1));
        for (std::int64_t m1 = m1lo; m1 <= m1hi; ++m1) {
            const double bm[2] = {c0, b0[1] + static_cast<double>(m1)};
            const double sc = -Qdot(u, bm) / uQu;
            const double wc[2] = {bm[0] + sc * u[0], bm[1] + sc * u[1]};
            const double Ec = -kPi * Qdot(wc, wc);
            if (Ec < -kCut) continue;
            const double ext = std::sqrt((kCut + Ec) / a2);
            if (sc < w.a - ext || sc > w.b + ext) continue;
            const std::int64_t p = M.a * m0 + M.b * m1;
            const std::int64_t q = M.c * m0 + M.d * m1;
            const double pd = static_cast<double>(p), qd = static_cast<double>(q);
            const double ph1 = D * (drift + 0.5 * (pd * A.beta - qd * A.alpha));
            // phase at the crossing centre, on the unreduced orbit through y
            double ph = D * (y.z + drift * sc + 0.5 * (pd * (y.y + A.beta * sc) - qd * (y.x + A.alpha * sc)));
            if (odd_D && (p & 1) && (q & 1)) ph += 0.5;
            ph -= std::floor(ph);
            const double damp = Ec - kPi * kPi * ph1 * ph1 / a2;
            if (damp < -kCut) continue;
            // centres outside the support only see the window's flat ends
            if (sc < w.a || sc > w.b) continue;
            ++out.evals;
            w.taylor(sc, fw);
            poly_along(atom.poly, wc, u, deg, pt);
            std::fill(g, g + order + 1, cplx(0.0));
            for (int i = 0; i <= kWindowTaylorOrder; ++i)
                for (int j = 0; j <= deg && i + j <= order; ++j) g[i + j] += fw[i] * pt[j];
            // moments of t^n against exp(-a2 t^2 + 2 pi i ph1 t), divided by the Gaussian mass
            const cplx mu(0.0, kPi * ph1 / a2);
            const double var = 0.5 / a2;
            mom[0] = 1.0;
            if (order >= 1) mom[1] = mu;
            for (int n = 2; n <= order; ++n) mom[n] = mu * mom[n - 1] + static_cast<double>(n - 1) * var * mom[n - 2];
            cplx acc = 0.0;
            for (int n = 0; n <= order; ++n) acc += g[n] * mom[n];
            const double th = 2.0 * kPi * ph;
            const cplx term = std::sqrt(kPi / a2) * std::exp(damp) * cplx(std::cos(th), std::sin(th)) * acc;
            sum += term;
            mag += std::abs(term);
        }
    }
    out.value = atom.coeff * sum;
    out.error = std::abs(atom.coeff) * mag * 1e-14;
    return out;
}

namespace {

// L1 norms of the derivatives of w up to kWindowTaylorOrder, by midpoint sampling of the jets
std::vector<double> derivative_l1(const Window& w)
{
    constexpr int n = 1024;
    std::vector<double> out(kWindowTaylorOrder + 1, 0.0);
    std::vector<double> c(kWindowTaylorOrder + 1);
    const double hstep = (w.b - w.a) / n;
    for (int i = 0; i < n; ++i) {
        w.taylor(w.a + (i + 0.5) * hstep, c.data());
        double fact = 1.0;
        for (int j = 0; j <= kWindowTaylorOrder; ++j) {
            if (j > 0) fact *= j;
            out[j] += std::abs(c[j]) * fact * hstep;
        }
    }
    // sampling misses part of the sharp growth near the ends
    for (double& v : out) v *= 2.0;
    return out;
}

} // namespace

QuadResult window_integral(const Observable& h, const Automorphism& A, const HeisPoint& y, const Window& w,
                           const QuadratureSpec& q)
{
    Observable rest;
    rest.lattice = h.lattice;
    QuadResult out;
    const bool smooth = static_cast<bool>(w.taylor) && q.crossing_width > 0.0;
    std::vector<double> dl1;
    const double allowed = q.tol * (w.b - w.a);
    for (const auto& m : h.modes) {
        ModeObservable keep = m;
        keep.atoms.clear();
        if (m.N == 0 && smooth) {
            // a character e(m x + n y) along the orbit is e(phase0) exp(i omega s); fast ones are
            // dropped when the window's Fourier decay bound is far below the tolerance
            keep.fourier.clear();
            for (const auto& [key, c] : m.fourier) {
                const double omega = 2.0 * kPi * (static_cast<double>(key.first) * A.alpha +
                                                  static_cast<double>(key.second) * A.beta);
                if (std::abs(omega) * (w.b - w.a) > 200.0) {
                    if (dl1.empty()) dl1 = derivative_l1(w);
                    double bound = INFINITY;
                    double wn = 1.0;
                    for (int j = 0; j <= kWindowTaylorOrder; ++j, wn *= std::abs(omega))
                        bound = std::min(bound, dl1[j] / wn);
                    if (std::abs(c) * bound <= 0.01 * allowed) {
                        out.error += std::abs(c) * bound;
                        continue;
                    }
                }
                keep.fourier[key] = c;
            }
        }
        for (const auto& a : m.atoms) {
            if (smooth && crossing_sigma(a, A) < q.crossing_width) {
                const QuadResult r = atom_crossing_integral(a, m.N * h.lattice.E, A, y, w);
                out.value += r.value;
                out.error += r.error;
                out.evals += r.evals;
            } else {
                keep.atoms.push_back(a);
            }
        }
        if (!keep.atoms.empty() || !keep.fourier.empty()) rest.modes.push_back(std::move(keep));
    }
    if (rest.modes.empty()) return out;
    const QuadResult r = integrate(
        [&](double s) { return w.f(s) * eval(rest, flow_reduced(y, s, A, h.lattice).rep); }, w.a, w.b, q);
    out.value += r.value;
    out.error += r.error;
    out.evals += r.evals;
    out.converged = r.converged;
    out.roundoff_limited = r.roundoff_limited;
    return out;
}

double smooth_step(double t) { return smooth_step_t(t); }

QuadResult ergodic_integral_direct(const Observable& h, const Automorphism& A, const HeisPoint& x, double t,
                                   const QuadratureSpec& q)
{
    if (t < 0.0) throw std::invalid_argument("ergodic_integral_direct: t must be nonnegative");
    const HeisPoint x0 = reduce(x, h.lattice).rep;
    return integrate([&](double r) { return eval(h, flow_reduced(x0, r, A, h.lattice).rep); }, 0.0, t, q);
}

QuadResult smoothed_integral(const Observable& h, const Automorphism& A, const HeisPoint& x, const Window& phi,
                             const QuadratureSpec& q)
{
    const HeisPoint x0 = reduce(x, h.lattice).rep;
    return window_integral(h, A, x0, phi, q);
}

QuadResult renormalized_integral(const Observable& h, const Automorphism& A, const HeisPoint& x, double t, int k,
                                 const QuadratureSpec& q)
{
    if (k < 0) throw std::invalid_argument("renormalized_integral: k must be nonnegative");
    if (t < 0.0) throw std::invalid_argument("renormalized_integral: t must be nonnegative");
    const Observable hk = transfer(h, A, k);
    const HeisPoint xk = reduce_aut(A.A.pow(k), x, h.lattice).rep;
    const double s = std::pow(A.lambda, -k);
    return integrate([&](double r) { return eval(hk, flow_reduced(xk, r, A, h.lattice).rep); }, 0.0, s * t,
                     scaled(q, A.lambda, k));
}

QuadResult renormalized_smoothed(const Observable& h, const Automorphism& A, const HeisPoint& x, const Window& phi,
                                 int k, const QuadratureSpec& q)
{
    if (k < 0) throw std::invalid_argument("renormalized_smoothed: k must be nonnegative");
    const Observable hk = transfer(h, A, k);
    const HeisPoint xk = reduce_aut(A.A.pow(k), x, h.lattice).rep;
    const double L = std::pow(A.lambda, k), s = 1.0 / L;
    Window w{[&phi, L](double r) { return phi.f(L * r); }, s * phi.a, s * phi.b, {}};
    if (phi.taylor)
        w.taylor = [&phi, L](double r, double* c) {
            phi.taylor(L * r, c);
            double f = 1.0;
            for (int n = 0; n <= kWindowTaylorOrder; ++n, f *= L) c[n] *= f;
        };
    return window_integral(hk, A, xk, w, scaled(q, A.lambda, k));
}

int renorm_level(double lambda, double t)
{
    int k = 0;
    double s = t;
    while (s >= lambda) {
        s /= lambda;
        ++k;
    }
    return k;
}

ZoomPartition::ZoomPartition(double T, int n) : T_(T), n_(n)
{
    if (!(T > 0.0)) throw std::invalid_argument("ZoomPartition: T must be positive");
    if (n < 1) throw std::invalid_argument("ZoomPartition: n must be at least 1");
}

double ZoomPartition::eta_k(int k, double t) const { return eta_k_impl(T_, k, t); }

double ZoomPartition::phi(int k, double t) const
{
    if (k < -n_ || k > n_) throw std::out_of_range("ZoomPartition::phi: |k| > n");
    return phi_impl(T_, n_, k, t);
}

std::pair<double, double> ZoomPartition::support(int k) const
{
    if (k < -n_ || k > n_) throw std::out_of_range("ZoomPartition::support: |k| > n");
    const int a = std::abs(k);
    std::pair<double, double> s;
    if (a == 0)
        s = {T_ / 8.0, 7.0 * T_ / 8.0};
    else if (a < n_)
        s = {std::ldexp(T_, -2 * a) / 8.0, std::ldexp(T_, -2 * a)};
    else
        s = {0.0, std::ldexp(T_, -2 * (n_ - 1)) / 4.0};
    if (k < 0) s = {T_ - s.second, T_ - s.first};
    return s;
}

Window ZoomPartition::window(int k) const
{
    const auto s = support(k);
    Window w{[this, k](double t) { return phi(k, t); }, s.first, s.second, {}};
    // the end pieces are cut sharply at 0 or T
    if (std::abs(k) < n_)
        w.taylor = [this, k](double t, double* c) {
            const auto j = phi_impl(T_, n_, k, Jet<kWindowTaylorOrder>::variable(t));
            std::copy(j.c.begin(), j.c.end(), c);
        };
    return w;
}

double ZoomPartition::scaled_derivative_sup(int k, int q, int samples) const
{
    if (q < 0 || q > 4) throw std::invalid_argument("scaled_derivative_sup: q must be in [0,4]");
    const double scale = std::ldexp(T_, -2 * std::abs(k));
    const auto s = support(k);
    static const double fact[5] = {1, 1, 2, 6, 24};
    double best = 0.0;
    for (int i = 0; i <= samples; ++i) {
        const Jet4 t = Jet4::variable(s.first + (s.second - s.first) * i / samples, scale);
        const Jet4 v = phi_impl(T_, n_, k, t);
        best = std::max(best, std::abs(v.c[q]) * fact[q]);
    }
    return best;
}

Decomposition smooth_decomposition(const Observable& h, const Automorphism& A, const HeisPoint& x, double T,
                                   const QuadratureSpec& q, double hsup)
{
    if (!(T >= 4.0)) throw std::invalid_argument("smooth_decomposition: T must be at least 4");
    Decomposition out;
    out.N = static_cast<int>(std::floor(std::log(T) / std::log(4.0)));
    const ZoomPartition zp(T, out.N);
    for (int k = -(out.N - 1); k <= out.N - 1; ++k) {
        DecompPiece p;
        p.k = k;
        p.m = static_cast<int>(std::floor((std::log(T) - std::abs(k) * std::log(4.0)) / std::log(A.lambda)));
        const QuadResult r = renormalized_smoothed(h, A, x, zp.window(k), p.m, q);
        p.value = r.value;
        p.evals = r.evals;
        out.value += r.value;
        out.evals += r.evals;
        out.pieces.push_back(p);
    }
    out.boundary_bound = 2.0 * (hsup >= 0.0 ? hsup : sup_norm(h));
    return out;
}

std::vector<double> geometric_grid(double t0, double t1, int n)
{
    if (!(t0 > 0.0) || !(t1 > t0) || n < 2) throw std::invalid_argument("geometric_grid: need 0 < t0 < t1, n >= 2");
    std::vector<double> g(n);
    const double r = std::log(t1 / t0) / (n - 1);
    for (int i = 0; i < n; ++i) g[i] = t0 * std::exp(r * i);
    g.back() = t1;
    return g;
}

DeviationFit deviation_fit(const Observable& h, const Automorphism& A, const HeisPoint& x,
                           const std::vector<double>& t_grid, const QuadratureSpec& q, bool subtract_mean,
                           double fit_from)
{
    if (t_grid.size() < 8) throw std::invalid_argument("deviation_fit: need at least 8 grid points");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1])) throw std::invalid_argument("deviation_fit: t grid must increase");
    const Observable hh = subtract_mean ? remove_mean(h) : h;
    if (!(t_grid.front() > 0.0)) throw std::invalid_argument("deviation_fit: times must be positive");
    DeviationFit out;
    // H(t_i) = H(t_{i-1}) + the integral over [t_{i-1}, t_i] started at the reduced point flow(x, t_{i-1});
    // each increment is renormalized on its own length
    const LatticeSpec L = h.lattice;
    std::complex<double> H = 0.0;
    double prev = 0.0;
    for (double t : t_grid) {
        DeviationSample s;
        s.t = t;
        const double len = t - prev;
        const HeisPoint y = prev == 0.0 ? x : flow_reduced(reduce(x, L).rep, prev, A, L).rep;
        s.k = renorm_level(A.lambda, len);
        const QuadResult r = renormalized_integral(hh, A, y, len, s.k, q);
        H += r.value;
        s.H = H;
        s.evals = r.evals;
        out.samples.push_back(s);
        prev = t;
    }
    const double from = fit_from > 0.0 ? fit_from : 10.0 * t_grid.front();
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    int n = 0;
    out.t_min = INFINITY;
    out.t_max = 0.0;
    for (const auto& s : out.samples) {
        if (s.t < from * (1.0 - 1e-12)) continue;
        if (std::abs(s.H) == 0.0) continue;
        const double lx = std::log(s.t), ly = std::log(std::abs(s.H));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        syy += ly * ly;
        ++n;
        out.t_min = std::min(out.t_min, s.t);
        out.t_max = std::max(out.t_max, s.t);
    }
    if (n < 2) throw std::runtime_error("deviation_fit: integrals vanish, slope undefined");
    const double vx = sxx - sx * sx / n, vy = syy - sy * sy / n, cxy = sxy - sx * sy / n;
    out.slope = cxy / vx;
    out.intercept = (sy - out.slope * sx) / n;
    out.r_squared = vy > 0.0 ? std::clamp(cxy * cxy / (vx * vy), 0.0, 1.0) : 1.0;
    return out;
}

} // namespace nilab
