#include "nilab/heis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nilab {

IntMat2 IntMat2::operator*(const IntMat2& o) const
{
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
}

IntMat2 IntMat2::inverse() const
{
    if (det() != 1) throw std::invalid_argument("IntMat2::inverse: determinant must be 1");
    return {d, -b, -c, a};
}

IntMat2 IntMat2::pow(int k) const
{
    IntMat2 base = k < 0 ? inverse() : *this;
    unsigned n = static_cast<unsigned>(k < 0 ? -k : k);
    IntMat2 out;
    while (n) {
        if (n & 1u) out = out * base;
        base = base * base;
        n >>= 1u;
    }
    return out;
}

HeisPoint mul(const HeisPoint& g, const HeisPoint& h)
{
    return {g.x + h.x, g.y + h.y, g.z + h.z + 0.5 * (g.x * h.y - g.y * h.x)};
}

HeisPoint inverse(const HeisPoint& g) { return {-g.x, -g.y, -g.z}; }

HeisPoint to_polarized(const HeisPoint& g) { return {g.x, g.y, g.z + 0.5 * g.x * g.y}; }

HeisPoint from_polarized(const HeisPoint& g) { return {g.x, g.y, g.z - 0.5 * g.x * g.y}; }

bool is_lattice(const HeisPoint& g, const LatticeSpec& L, double tol)
{
    const double p = std::round(g.x);
    const double q = std::round(g.y);
    if (std::abs(g.x - p) > tol || std::abs(g.y - q) > tol) return false;
    const double w = (g.z + 0.5 * p * q) * L.E;
    return std::abs(w - std::round(w)) <= tol * L.E;
}

HeisPoint lattice_element(std::int64_t p, std::int64_t q, std::int64_t r, const LatticeSpec& L)
{
    const double pd = static_cast<double>(p), qd = static_cast<double>(q);
    return {pd, qd, static_cast<double>(r) / L.E - 0.5 * pd * qd};
}

namespace {

// floor split x = n + f with f in [0,1)
inline void split_unit(double v, std::int64_t& n, double& f)
{
    const double fl = std::floor(v);
    n = static_cast<std::int64_t>(fl);
    f = v - fl;
    if (f >= 1.0) {
        f -= 1.0;
        n += 1;
    }
}

ReducedPoint finish(double fx, double fy, std::int64_t nx, std::int64_t ny, double wp, std::int64_t J,
                    const LatticeSpec& L)
{
    // wp + J is w + p*y before the center correction, J an integer
    const double E = L.E;
    const double fl = std::floor(E * wp);
    std::int64_t r = -static_cast<std::int64_t>(fl) - J * L.E;
    double wr = wp - fl / E;
    if (wr >= 1.0 / E) {
        wr -= 1.0 / E;
        r -= 1;
    }
    if (wr < 0.0) wr = 0.0;
    ReducedPoint out;
    out.rep = {fx, fy, wr - 0.5 * fx * fy};
    out.p = -nx;
    out.q = -ny;
    out.r = r;
    return out;
}

} // namespace

ReducedPoint reduce(const HeisPoint& g, const LatticeSpec& L)
{
    std::int64_t nx, ny;
    double fx, fy;
    split_unit(g.x, nx, fx);
    split_unit(g.y, ny, fy);
    // polarized center after left translation by (p,q,0): w + p*y
    const double w = g.z + 0.5 * g.x * g.y;
    const double wp = w - static_cast<double>(nx) * g.y;
    return finish(fx, fy, nx, ny, wp, 0, L);
}

HeisPoint flow(const HeisPoint& g, double t, double alpha, double beta)
{
    return mul(g, HeisPoint{alpha * t, beta * t, 0.0});
}

HeisPoint flow(const HeisPoint& g, double t, const Automorphism& A) { return flow(g, t, A.alpha, A.beta); }

namespace {

// u + v = N + f with f in [0,1), exact up to one rounding of f
void split_sum(double u, double v, std::int64_t& N, double& f)
{
    const double s = u + v;
    const double bv = s - u;
    const double err = (u - (s - bv)) + (v - bv);
    const double fl = std::floor(s);
    std::int64_t k;
    split_unit((s - fl) + err, k, f);
    N = static_cast<std::int64_t>(fl) + k;
}

} // namespace

ReducedPoint flow_reduced(const HeisPoint& g, double t, const Automorphism& A, const LatticeSpec& L)
{
    const double a = A.alpha * t, b = A.beta * t;
    std::int64_t nX, nY;
    double fX, fY;
    split_sum(g.x, a, nX, fX);
    split_sum(g.y, b, nY, fY);
    const double Z = g.z + 0.5 * (g.x * b - g.y * a);
    const std::int64_t prod = nX * nY;
    const std::int64_t par = ((prod % 2) + 2) % 2;
    const std::int64_t J = (par - prod) / 2;
    const double wp = Z + 0.5 * fX * fY + 0.5 * (fX * static_cast<double>(nY) - static_cast<double>(nX) * fY) -
                      0.5 * static_cast<double>(par);
    return finish(fX, fY, nX, nY, wp, J, L);
}

HeisPoint apply_aut(const IntMat2& M, const HeisPoint& g)
{
    const double a = static_cast<double>(M.a), b = static_cast<double>(M.b);
    const double c = static_cast<double>(M.c), d = static_cast<double>(M.d);
    return {a * g.x + b * g.y, c * g.x + d * g.y, g.z};
}

HeisPoint apply_aut(const Automorphism& A, const HeisPoint& g) { return apply_aut(A.A, g); }

HeisPoint apply_aut_inv(const Automorphism& A, const HeisPoint& g) { return apply_aut(A.A.inverse(), g); }

namespace {

// m*u + n*v = N + f exactly up to one rounding of the fractional part
void split_dot(std::int64_t m, double u, std::int64_t n, double v, std::int64_t& N, double& f)
{
    const double md = static_cast<double>(m), nd = static_cast<double>(n);
    const double P1 = md * u;
    const double e1 = std::fma(md, u, -P1);
    const double P2 = nd * v;
    const double e2 = std::fma(nd, v, -P2);
    const double f1 = std::floor(P1), f2 = std::floor(P2);
    double frac = ((P1 - f1) + (P2 - f2)) + (e1 + e2);
    std::int64_t n0 = static_cast<std::int64_t>(f1) + static_cast<std::int64_t>(f2);
    std::int64_t k;
    double ff;
    split_unit(frac, k, ff);
    N = n0 + k;
    f = ff;
}

} // namespace

ReducedPoint reduce_aut(const IntMat2& M, const HeisPoint& g, const LatticeSpec& L)
{
    std::int64_t nX, nY;
    double fX, fY;
    split_dot(M.a, g.x, M.b, g.y, nX, fX);
    split_dot(M.c, g.x, M.d, g.y, nY, fY);
    // w + p*Y = z + fX fY/2 + (fX nY - nX fY)/2 - nX nY/2
    const std::int64_t prod = nX * nY;
    const std::int64_t par = ((prod % 2) + 2) % 2;
    const std::int64_t J = (par - prod) / 2;
    const double wp = g.z + 0.5 * fX * fY + 0.5 * (fX * static_cast<double>(nY) - static_cast<double>(nX) * fY) -
                      0.5 * static_cast<double>(par);
    return finish(fX, fY, nX, nY, wp, J, L);
}

bool preserves_lattice(const IntMat2& M, const LatticeSpec& L, double tol)
{
    if (M.det() != 1) return false;
    const HeisPoint gens[3] = {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0 / L.E}};
    const IntMat2 Mi = M.inverse();
    for (const auto& g : gens) {
        if (!is_lattice(apply_aut(M, g), L, tol)) return false;
        if (!is_lattice(apply_aut(Mi, g), L, tol)) return false;
    }
    return true;
}

bool preserves_lattice(const Automorphism& A, const LatticeSpec& L, double tol)
{
    return preserves_lattice(A.A, L, tol);
}

Automorphism stable_generator(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d)
{
    const IntMat2 M{a, b, c, d};
    if (M.det() != 1)
        throw std::invalid_argument("stable_generator: det must be 1, got " + std::to_string(M.det()));
    const std::int64_t tr = M.trace();
    if (tr <= 2 && tr >= -2) throw std::invalid_argument("stable_generator: |trace| must exceed 2 (not hyperbolic)");
    if (tr < -2)
        throw std::invalid_argument("stable_generator: negative trace gives a negative stable eigenvalue; "
                                    "the flow cannot be renormalized forward in time");
    const double T = static_cast<double>(tr);
    Automorphism out;
    out.A = M;
    out.lambda = 0.5 * (T + std::sqrt(T * T - 4.0));
    out.h_top = std::log(out.lambda);
    const double mu = 1.0 / out.lambda;
    // two candidate kernel vectors of A - mu I, take the better conditioned one
    const double v1x = static_cast<double>(b), v1y = mu - static_cast<double>(a);
    const double v2x = mu - static_cast<double>(d), v2y = static_cast<double>(c);
    double vx, vy;
    if (std::hypot(v1x, v1y) >= std::hypot(v2x, v2y)) {
        vx = v1x;
        vy = v1y;
    } else {
        vx = v2x;
        vy = v2y;
    }
    const double nrm = std::hypot(vx, vy);
    vx /= nrm;
    vy /= nrm;
    if (vx < 0.0 || (vx == 0.0 && vy < 0.0)) {
        vx = -vx;
        vy = -vy;
    }
    out.alpha = vx;
    out.beta = vy;
    return out;
}

double quotient_distance(const HeisPoint& g, const HeisPoint& h, const LatticeSpec& L)
{
    const HeisPoint a = to_polarized(reduce(g, L).rep);
    const HeisPoint b = to_polarized(reduce(h, L).rep);
    const double invE = 1.0 / L.E;
    double best = INFINITY;
    for (int p = -1; p <= 1; ++p) {
        for (int q = -1; q <= 1; ++q) {
            // (p,q,s) * b in polarized coordinates
            const double dx = b.x + p - a.x;
            const double dy = b.y + q - a.y;
            double dw = b.z + p * b.y - a.z;
            dw -= invE * std::round(dw / invE);
            best = std::min(best, std::max({std::abs(dx), std::abs(dy), std::abs(dw)}));
        }
    }
    return best;
}

double max_abs_diff(const HeisPoint& g, const HeisPoint& h)
{
    return std::max({std::abs(g.x - h.x), std::abs(g.y - h.y), std::abs(g.z - h.z)});
}

} // namespace nilab
