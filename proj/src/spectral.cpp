#include "nilab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/FFT>

namespace nilab {

namespace {

constexpr double kPi = 3.14159265358979323846;
using cplx = std::complex<double>;

cplx cis(double th) { return {std::cos(th), std::sin(th)}; }

std::int64_t mod(std::int64_t a, std::int64_t m) { return ((a % m) + m) % m; }

double wrap_phase(double p)
{
    // into (-pi, pi]
    p = std::remainder(p, 2.0 * kPi);
    if (p <= -kPi) p += 2.0 * kPi;
    return p;
}

// eigenvalues merged within rel_tol, descending modulus
std::vector<Resonance> cluster(std::vector<cplx> vals, double rel_tol)
{
    std::sort(vals.begin(), vals.end(), [](cplx a, cplx b) {
        if (std::abs(a) != std::abs(b)) return std::abs(a) > std::abs(b);
        return std::arg(a) < std::arg(b);
    });
    std::vector<Resonance> out;
    std::vector<bool> used(vals.size(), false);
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (used[i]) continue;
        Resonance r;
        r.value = vals[i];
        r.multiplicity = 1;
        used[i] = true;
        for (std::size_t k = i + 1; k < vals.size(); ++k) {
            if (used[k]) continue;
            if (std::abs(vals[k] - vals[i]) <= rel_tol * std::max(1e-300, std::abs(vals[i]))) {
                used[k] = true;
                ++r.multiplicity;
            }
        }
        r.modulus = std::abs(r.value);
        r.phase = wrap_phase(std::arg(r.value));
        out.push_back(r);
    }
    return out;
}

int assign_band(double lambda, double modulus, double band_tol)
{
    for (int k = 0; k < 200; ++k) {
        const double rk = band_radius(lambda, k);
        if (std::abs(modulus - rk) <= band_tol * rk) return k;
        if (rk * (1.0 + band_tol) < modulus) break;
    }
    return -1;
}

} // namespace

bool parity_condition(const IntMat2& M) { return (M.a * M.b) % 2 == 0 && (M.c * M.d) % 2 == 0; }

CMatrix quantum_propagator(const Automorphism& A, int D)
{
    if (D <= 0) throw std::invalid_argument("quantum_propagator: D must be positive");
    if (!parity_condition(A.A)) throw std::invalid_argument("quantum_propagator: parity condition ab = cd = 0 mod 2 fails");
    const std::int64_t a = A.A.a, b = A.A.b, d = A.A.d;
    if (b == 0) throw std::invalid_argument("quantum_propagator: upper right entry must be nonzero");
    const std::int64_t bb = std::abs(b);
    const double Db = static_cast<double>(D) * static_cast<double>(b);
    const cplx norm = 1.0 / std::sqrt(cplx(0.0, Db));
    CMatrix U(D, D);
    for (int j = 0; j < D; ++j) {
        for (int k = 0; k < D; ++k) {
            cplx s = 0.0;
            for (std::int64_t m = 0; m < bb; ++m) {
                const std::int64_t kk = k + m * D;
                // exponent numerator is an integer; reduce mod 2 D b before scaling
                const std::int64_t num = mod(a * kk * kk - 2 * j * kk + d * j * j, 2 * D * bb);
                s += cis(kPi * static_cast<double>(num) / Db);
            }
            U(j, k) = norm * s;
        }
    }
    return U;
}

std::string to_string(ResonanceSource s) { return s == ResonanceSource::exact ? "exact" : "numeric"; }

int ResonanceSet::count_in_band(int k) const
{
    int n = 0;
    for (const auto& r : items)
        if (r.band == k) n += r.multiplicity;
    return n;
}

int ResonanceSet::total() const
{
    int n = 0;
    for (const auto& r : items) n += r.multiplicity;
    return n;
}

double ResonanceSet::unassigned_fraction() const
{
    const int tot = total();
    return tot == 0 ? 0.0 : static_cast<double>(count_in_band(-1)) / tot;
}

double band_radius(double lambda, int k) { return std::pow(lambda, 0.5 - k); }

ResonanceSet resonances_exact(const Automorphism& A, int N, int E, int kmax)
{
    if (N == 0) throw std::invalid_argument("resonances_exact: N must be nonzero (constants carry the eigenvalue lambda)");
    if (kmax < 0) throw std::invalid_argument("resonances_exact: kmax must be nonnegative");
    const int D = E * std::abs(N);
    const CMatrix U = quantum_propagator(A, D);
    Eigen::ComplexEigenSolver<CMatrix> es(U, false);
    if (es.info() != Eigen::Success) throw std::runtime_error("resonances_exact: eigensolver failed");
    ResonanceSet out;
    out.lambda = A.lambda;
    out.source = ResonanceSource::exact;
    for (int k = 0; k <= kmax; ++k) {
        std::vector<cplx> band;
        const double rk = band_radius(A.lambda, k);
        for (int i = 0; i < D; ++i) {
            cplx u = es.eigenvalues()(i) / std::abs(es.eigenvalues()(i));
            if (N < 0) u = std::conj(u);
            band.push_back(rk * u);
        }
        for (auto r : cluster(band, 1e-9)) {
            r.band = k;
            out.items.push_back(r);
        }
    }
    return out;
}

double hermite_function(int n, double s, double sigma)
{
    const double x = s / sigma;
    double h0 = std::pow(kPi, -0.25) * std::exp(-0.5 * x * x);
    if (n == 0) return h0 / std::sqrt(sigma);
    double h1 = std::sqrt(2.0) * x * h0;
    for (int k = 2; k <= n; ++k) {
        const double h2 = std::sqrt(2.0 / k) * x * h1 - std::sqrt((k - 1.0) / k) * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1 / std::sqrt(sigma);
}

TwistedBasis build_basis(int D, int cutoff)
{
    if (D < 1) throw std::invalid_argument("build_basis: D must be at least 1");
    if (cutoff < 1) throw std::invalid_argument("build_basis: cutoff must be at least 1");
    TwistedBasis b;
    b.D = D;
    b.cutoff = cutoff;
    b.sigma = 1.0 / std::sqrt(2.0 * kPi);
    return b;
}

std::complex<double> TwistedBasis::eval(int idx, double x, double y) const
{
    if (idx < 0 || idx >= size()) throw std::out_of_range("TwistedBasis::eval: index");
    const int j = idx / per_residue();
    const int n = idx % per_residue();
    // terms with |y - l - j/D| beyond 12 sigma * sqrt(order) are below double precision
    const double reach = 1.0 + sigma * (12.0 + 2.0 * std::sqrt(2.0 * n + 1.0));
    const double c = y - static_cast<double>(j) / D;
    const auto llo = static_cast<long long>(std::floor(c - reach));
    const auto lhi = static_cast<long long>(std::ceil(c + reach));
    cplx u = 0.0;
    for (long long l = llo; l <= lhi; ++l) {
        const double w = hermite_function(n, c - static_cast<double>(l), sigma);
        if (w == 0.0) continue;
        double ph = static_cast<double>(j + l * D) * x;
        ph -= std::floor(ph);
        u += w * cis(2.0 * kPi * ph);
    }
    double ph = 0.5 * D * x * y;
    ph -= std::floor(ph);
    return cis(-2.0 * kPi * ph) * u;
}

std::complex<double> TwistedBasis::eval(int idx, const HeisPoint& g) const
{
    double ph = D * g.z;
    ph -= std::floor(ph);
    return cis(2.0 * kPi * ph) * eval(idx, g.x, g.y);
}

std::complex<double> TwistedBasis::eval(const CVector& coeffs, const HeisPoint& g) const
{
    if (coeffs.size() != size()) throw std::invalid_argument("TwistedBasis::eval: coefficient vector size");
    const int n = per_residue();
    std::vector<double> herm(n);
    const double reach = 1.0 + sigma * (12.0 + 2.0 * std::sqrt(2.0 * n + 1.0));
    cplx u = 0.0;
    for (int j = 0; j < D; ++j) {
        const double c = g.y - static_cast<double>(j) / D;
        const auto llo = static_cast<long long>(std::floor(c - reach));
        const auto lhi = static_cast<long long>(std::ceil(c + reach));
        for (long long l = llo; l <= lhi; ++l) {
            // all orders at once by the three-term recurrence
            const double x = (c - static_cast<double>(l)) / sigma;
            const double scale = 1.0 / std::sqrt(sigma);
            herm[0] = std::pow(kPi, -0.25) * std::exp(-0.5 * x * x);
            if (n > 1) herm[1] = std::sqrt(2.0) * x * herm[0];
            for (int k = 2; k < n; ++k) herm[k] = std::sqrt(2.0 / k) * x * herm[k - 1] - std::sqrt((k - 1.0) / k) * herm[k - 2];
            cplx acc = 0.0;
            for (int k = 0; k < n; ++k) acc += coeffs(j * n + k) * (herm[k] * scale);
            if (acc == cplx(0.0)) continue;
            double ph = static_cast<double>(j + l * D) * g.x;
            ph -= std::floor(ph);
            u += acc * cis(2.0 * kPi * ph);
        }
    }
    double ph = D * g.z - 0.5 * D * g.x * g.y;
    ph -= std::floor(ph);
    return cis(2.0 * kPi * ph) * u;
}

double escape_weight(double r, int N, double zeta_p, double zeta_q)
{
    const double n = std::max(std::abs(N), 1);
    const double s = std::sqrt(2.0 * kPi * n);
    const double p = s * zeta_p, q = s * zeta_q;
    return std::pow(1.0 + p * p, -0.5 * r) * std::pow(1.0 + q * q, 0.5 * r);
}

namespace {

constexpr double kTransverseHalfWidth = 16.0;

struct Transverse {
    std::vector<double> s;
    std::vector<double> omega;   // FFT frequencies
    double h = 0.0;
};

Transverse transverse_grid(int G, int D)
{
    Transverse t;
    t.h = 1.0 / (static_cast<double>(G) * D);
    const int n = static_cast<int>(std::lround(2.0 * kTransverseHalfWidth / t.h));
    t.s.resize(n);
    t.omega.resize(n);
    for (int i = 0; i < n; ++i) {
        t.s[i] = -kTransverseHalfWidth + t.h * i;
        const int f = i < (n + 1) / 2 ? i : i - n;
        t.omega[i] = static_cast<double>(f) / (n * t.h);
    }
    return t;
}

using CVec = std::vector<cplx>;

// metaplectic action of a real symplectic 2x2 with nonzero upper right entry:
// chirp, quadratic Fourier multiplier, chirp
CVec metaplectic(const Eigen::Matrix2d& M, const CVec& f, const Transverse& t, Eigen::FFT<double>& fft)
{
    const double p = M(0, 0), q = M(0, 1), v = M(1, 1);
    if (std::abs(q) < 1e-12) throw std::runtime_error("transfer_matrix: degenerate normal form");
    const double c1 = (p - 1.0) / q, c2 = (v - 1.0) / q;
    const std::size_t n = f.size();
    CVec g(n), F;
    for (std::size_t i = 0; i < n; ++i) g[i] = f[i] * cis(kPi * c1 * t.s[i] * t.s[i]);
    fft.fwd(F, g);
    for (std::size_t i = 0; i < n; ++i) F[i] *= cis(-kPi * q * t.omega[i] * t.omega[i]);
    fft.inv(g, F);
    for (std::size_t i = 0; i < n; ++i) g[i] *= cis(kPi * c2 * t.s[i] * t.s[i]);
    return g;
}

} // namespace

int max_represented_frequency(const Automorphism& A, const TwistedBasis& basis)
{
    const int lmax = static_cast<int>(kTransverseHalfWidth) - 1;
    // x frequencies j + l D, and the transverse bandwidth of the top Hermite function
    const double hermite = std::sqrt(2.0 * (2 * basis.cutoff) + 1.0) / (2.0 * kPi * basis.sigma);
    (void)A;
    return static_cast<int>(std::ceil(std::max<double>(lmax * basis.D, hermite)));
}

TransferMatrix transfer_matrix(const Automorphism& A, int N, int E, const TwistedBasis& basis, double r, int grid)
{
    if (!preserves_lattice(A, LatticeSpec{E}))
        throw std::invalid_argument("transfer_matrix: A does not preserve the lattice at E = " + std::to_string(E));
    TransferMatrix out;
    out.A = A;
    out.N = N;
    out.E = E;
    out.r = r;
    out.basis = basis;
    if (N == 0) {
        // the weighted operator fixes constants up to the factor lambda
        out.entries = CMatrix::Constant(1, 1, cplx(A.lambda));
        out.grid = 0;
        return out;
    }
    const int D = E * std::abs(N);
    if (basis.D != D)
        throw std::invalid_argument("transfer_matrix: basis degree " + std::to_string(basis.D) + " != E|N| = " +
                                    std::to_string(D));
    const int G = grid > 0 ? grid : std::max(128, 64 * D);
    const int fmax = max_represented_frequency(A, basis);
    if (G < 4 * fmax)
        throw std::invalid_argument("transfer_matrix: grid " + std::to_string(G) + " below 4x the largest frequency " +
                                    std::to_string(fmax));
    out.grid = G;
    const std::int64_t a = A.A.a, b = A.A.b, c = A.A.c, d = A.A.d;
    const double lam = A.lambda;

    // transverse map and its normal form
    Eigen::Matrix2d Phi;
    Phi << static_cast<double>(d), static_cast<double>(c) / D, static_cast<double>(D * b), static_cast<double>(a);
    Eigen::EigenSolver<Eigen::Matrix2d> es(Phi);
    const auto ev = es.eigenvalues();
    const int ic = std::abs(ev(0)) < std::abs(ev(1)) ? 0 : 1;
    Eigen::Vector2d ec = es.eigenvectors().col(ic).real().normalized();
    Eigen::Vector2d ee = es.eigenvectors().col(1 - ic).real().normalized();
    double det = ec(0) * ee(1) - ec(1) * ee(0);
    if (det < 0.0) {
        ee = -ee;
        det = -det;
    }
    ec /= std::sqrt(det);
    ee /= std::sqrt(det);
    Eigen::Matrix2d Si;
    Si.col(0) = ec;
    Si.col(1) = ee;
    const Eigen::Matrix2d S = Si.inverse();

    const Transverse t = transverse_grid(G, D);
    const std::size_t ns = t.s.size();
    Eigen::FFT<double> fft;
    auto bracket = [r](double v) { return std::pow(1.0 + v * v, 0.5 * r); };
    // dual functions: the adjoint of the weighted normal-form operator applied to the basis
    auto weighted_adjoint = [&](const CVec& f) {
        CVec g(ns), F;
        for (std::size_t i = 0; i < ns; ++i) g[i] = f[i] * bracket(t.s[i]);
        fft.fwd(F, g);
        for (std::size_t i = 0; i < ns; ++i) F[i] *= bracket(t.omega[i] / lam) / bracket(t.omega[i]);
        fft.inv(g, F);
        for (std::size_t i = 0; i < ns; ++i) g[i] /= bracket(lam * t.s[i]);
        return g;
    };

    const int n = basis.per_residue();
    std::vector<CVec> prim(n), dual(n);
    for (int m = 0; m < n; ++m) {
        prim[m].resize(ns);
        for (std::size_t i = 0; i < ns; ++i) prim[m][i] = hermite_function(m, t.s[i], basis.sigma);
        dual[m] = metaplectic(Si, weighted_adjoint(metaplectic(S, prim[m], t, fft)), t, fft);
    }

    // sections sampled on the G x G torus grid, rows y, columns x
    const int lmax = static_cast<int>(kTransverseHalfWidth) - 1;
    const int nl = 2 * lmax + 1;
    auto section = [&](const CVec& wf, int j) {
        Eigen::MatrixXcd Wm(G, nl), Ex(nl, G);
        for (int iy = 0; iy < G; ++iy)
            for (int li = 0; li < nl; ++li) {
                const long long l = li - lmax;
                // s index of y - l - j/D, exact on the grid
                const long long idx =
                    static_cast<long long>(iy) * D - l * static_cast<long long>(G) * D - static_cast<long long>(j) * G +
                    static_cast<long long>(std::lround(kTransverseHalfWidth / t.h));
                Wm(iy, li) = (idx >= 0 && idx < static_cast<long long>(ns)) ? wf[idx] : cplx(0.0);
            }
        for (int li = 0; li < nl; ++li) {
            const long long fq = j + static_cast<long long>(li - lmax) * D;
            for (int ix = 0; ix < G; ++ix) Ex(li, ix) = cis(2.0 * kPi * static_cast<double>(mod(fq * ix, G)) / G);
        }
        Eigen::MatrixXcd u = Wm * Ex;
        for (int iy = 0; iy < G; ++iy)
            for (int ix = 0; ix < G; ++ix)
                u(iy, ix) *= cis(-kPi * static_cast<double>(mod(static_cast<std::int64_t>(D) * iy * ix, 2LL * G * G)) /
                                 (static_cast<double>(G) * G));
        return u;
    };

    // pullback by the inverse map on grid indices, with the quasi-periodicity phase
    const std::int64_t GG = G;
    std::vector<std::int64_t> src(static_cast<std::size_t>(G) * G);
    std::vector<cplx> phase(static_cast<std::size_t>(G) * G);
    for (std::int64_t K = 0; K < GG; ++K)
        for (std::int64_t I = 0; I < GG; ++I) {
            const std::int64_t xi = d * I - b * K, yi = -c * I + a * K;
            const std::int64_t P = (xi - mod(xi, GG)) / GG, Qn = (yi - mod(yi, GG)) / GG;
            const std::int64_t x0 = mod(xi, GG), y0 = mod(yi, GG);
            // D (P Q - P y0/G + Q x0/G) / 2 in units of 2 pi
            const std::int64_t num = mod(D * (P * Qn * GG - P * y0 + Qn * x0), 2 * GG);
            const std::size_t at = static_cast<std::size_t>(K * GG + I);
            src[at] = y0 * GG + x0;
            phase[at] = cis(kPi * static_cast<double>(num) / static_cast<double>(GG));
        }

    const int dim = basis.size();
    Eigen::MatrixXcd Bs(dim, G * G), Ds(dim, G * G);
    for (int j = 0; j < D; ++j)
        for (int m = 0; m < n; ++m) {
            const int row = basis.index(j, m - basis.cutoff);
            const Eigen::MatrixXcd bsec = section(prim[m], j);
            const Eigen::MatrixXcd dsec = section(dual[m], j);
            for (std::int64_t K = 0; K < GG; ++K)
                for (std::int64_t I = 0; I < GG; ++I) {
                    const std::size_t at = static_cast<std::size_t>(K * GG + I);
                    const std::int64_t sy = src[at] / GG, sx = src[at] % GG;
                    Bs(row, static_cast<Eigen::Index>(at)) = lam * phase[at] * bsec(sy, sx);
                    Ds(row, static_cast<Eigen::Index>(at)) = dsec(K, I);
                }
        }
    out.entries = Ds.conjugate() * Bs.transpose() / (static_cast<double>(G) * G);
    if (!out.entries.allFinite()) throw std::runtime_error("transfer_matrix: non-finite entries");
    if (N < 0) out.entries = out.entries.conjugate().eval();
    return out;
}

ResonanceSet resonances_numeric(const TransferMatrix& M, double band_tol)
{
    if (!(band_tol > 0.0 && band_tol < 0.5)) throw std::invalid_argument("resonances_numeric: band_tol must be in (0, 0.5)");
    Eigen::ComplexEigenSolver<CMatrix> es(M.entries, false);
    if (es.info() != Eigen::Success) throw std::runtime_error("resonances_numeric: eigensolver failed");
    std::vector<cplx> vals(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    ResonanceSet out;
    out.lambda = M.A.lambda;
    out.source = ResonanceSource::numeric;
    out.items = cluster(vals, 1e-6);
    for (auto& r : out.items) r.band = M.N == 0 ? -1 : assign_band(M.A.lambda, r.modulus, band_tol);
    return out;
}

BandComparison compare_band(const ResonanceSet& ref, const ResonanceSet& other, int band)
{
    BandComparison out;
    std::vector<const Resonance*> refs;
    for (const auto& r : ref.items)
        if (r.band == band) {
            refs.push_back(&r);
            out.count_ref += r.multiplicity;
        }
    for (const auto& o : other.items) {
        if (o.band != band) continue;
        out.count_other += o.multiplicity;
        const Resonance* best = nullptr;
        for (const auto* r : refs)
            if (!best || std::abs(o.value - r->value) < std::abs(o.value - best->value)) best = r;
        if (!best) {
            out.max_rel_distance = std::numeric_limits<double>::infinity();
            continue;
        }
        double dph = std::abs(std::remainder(o.phase - best->phase, 2.0 * kPi));
        out.max_modulus_rel = std::max(out.max_modulus_rel, std::abs(o.modulus - best->modulus) / best->modulus);
        out.max_phase = std::max(out.max_phase, dph);
        out.max_rel_distance = std::max(out.max_rel_distance, std::abs(o.value - best->value) / best->modulus);
    }
    return out;
}

SpectralDecomposition spectral_decomposition(const TransferMatrix& M, double eta)
{
    if (!(eta > 0.0)) throw std::invalid_argument("spectral_decomposition: eta must be positive");
    const CMatrix& A = M.entries;
    const Eigen::Index n = A.rows();
    Eigen::ComplexEigenSolver<CMatrix> es(A, true);
    if (es.info() != Eigen::Success) throw std::runtime_error("spectral_decomposition: eigensolver failed");
    const CVector ev = es.eigenvalues();
    const CMatrix V = es.eigenvectors();
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(std::abs(ev(i)) - eta) < 1e-6)
            throw std::invalid_argument("spectral_decomposition: eta collides with an eigenvalue modulus");

    SpectralDecomposition dec;
    dec.eta = eta;
    const Eigen::JacobiSVD<CMatrix> svd(V);
    const auto& sv = svd.singularValues();
    dec.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
    if (!(dec.condition <= 1e10))
        throw std::runtime_error("spectral_decomposition: eigenvector matrix condition number " +
                                 std::to_string(dec.condition) + " exceeds 1e10");
    const CMatrix L = V.inverse();   // rows are left eigenvectors

    // clusters above eta, descending modulus
    std::vector<Eigen::Index> order;
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(ev(i)) > eta) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return std::abs(ev(x)) > std::abs(ev(y)); });
    std::vector<bool> used(n, false);
    const double scale = A.norm();
    const CMatrix I = CMatrix::Identity(n, n);
    CMatrix sumP = CMatrix::Zero(n, n);
    for (Eigen::Index i : order) {
        if (used[i]) continue;
        CMatrix P = CMatrix::Zero(n, n);
        cplx xi = 0.0;
        int members = 0;
        for (Eigen::Index k : order) {
            if (used[k] || std::abs(ev(k) - ev(i)) > 1e-6 * std::abs(ev(i))) continue;
            used[k] = true;
            P += V.col(k) * L.row(k);
            xi += ev(k);
            ++members;
        }
        xi /= static_cast<double>(members);
        CMatrix Q = (A - xi * I) * P;
        int dj = 0;
        if (Q.norm() <= 1e-8 * std::max(1.0, scale)) {
            Q.setZero();
        } else {
            CMatrix Qp = Q;
            while (Qp.norm() > 1e-8 * std::max(1.0, scale) && dj < members) {
                ++dj;
                Qp = Qp * Q;
            }
        }
        dec.xi.push_back(xi);
        dec.P.push_back(P);
        dec.Q.push_back(Q);
        dec.d.push_back(dj);
        sumP += P;
    }
    dec.P0 = I - sumP;
    CMatrix Mn = dec.P0;
    double C = 0.0;
    for (int k = 0; k <= 10; ++k) {
        C = std::max(C, Mn.norm() / std::pow(eta, k));
        Mn = A * Mn;
    }
    dec.remainder_constant = C;
    return dec;
}

double decomposition_defect(const SpectralDecomposition& dec)
{
    double worst = 0.0;
    const Eigen::Index n = dec.P0.rows();
    CMatrix sum = dec.P0;
    for (std::size_t j = 0; j < dec.P.size(); ++j) {
        sum += dec.P[j];
        for (std::size_t k = 0; k < dec.P.size(); ++k) {
            const CMatrix target = j == k ? dec.P[j] : CMatrix::Zero(n, n);
            worst = std::max(worst, (dec.P[j] * dec.P[k] - target).cwiseAbs().maxCoeff());
            const CMatrix qt = j == k ? dec.Q[k] : CMatrix::Zero(n, n);
            worst = std::max(worst, (dec.P[j] * dec.Q[k] - qt).cwiseAbs().maxCoeff());
            worst = std::max(worst, (dec.Q[k] * dec.P[j] - qt).cwiseAbs().maxCoeff());
        }
    }
    worst = std::max(worst, (sum - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff());
    return worst;
}

std::complex<double> deviation_functional(const CVector& coeffs, const HeisPoint& x, double t, int j,
                                          const SpectralDecomposition& dec, const TransferMatrix& M,
                                          const QuadratureSpec& q)
{
    if (j < 0 || j >= static_cast<int>(dec.xi.size())) throw std::out_of_range("deviation_functional: j");
    if (coeffs.size() != M.entries.rows()) throw std::invalid_argument("deviation_functional: basis mismatch");
    if (M.N == 0) throw std::invalid_argument("deviation_functional: mode N must be nonzero");
    if (!(t >= 4.0)) throw std::invalid_argument("deviation_functional: t must be at least 4");
    const Automorphism& A = M.A;
    const LatticeSpec L{M.E};
    const double lam = A.lambda;
    const cplx xi = dec.xi[j];
    const CMatrix step = xi * dec.P[j] + dec.Q[j];
    const double alpha = std::log(std::abs(xi)) / A.h_top;

    const int nz = static_cast<int>(std::floor(std::log(t) / std::log(4.0)));
    if (nz < 1) throw std::invalid_argument("deviation_functional: t too small for the zoom partition");
    const ZoomPartition zp(t, nz);
    cplx sum = 0.0;
    for (int k = -(nz - 1); k <= nz - 1; ++k) {
        const int m = static_cast<int>(std::floor((std::log(t) - std::abs(k) * std::log(4.0)) / std::log(lam)));
        CVector c = dec.P[j] * coeffs;
        for (int i = 0; i < m; ++i) c = step * c;
        if (c.cwiseAbs().maxCoeff() == 0.0) continue;
        const Window w = zp.window(k);
        const double Lk = std::pow(lam, m);
        const HeisPoint xk = reduce_aut(A.A.pow(m), x, L).rep;
        QuadratureSpec qs = q;
        qs.tol = q.tol * Lk;
        qs.panel = q.panel / Lk;
        const QuadResult r = integrate(
            [&](double s) {
                const double f = w.f(Lk * s);
                if (f == 0.0) return cplx(0.0);
                return f * M.basis.eval(c, flow_reduced(xk, s, A, L).rep);
            },
            w.a / Lk, w.b / Lk, qs);
        sum += r.value;
    }
    return sum * std::pow(t, -alpha) * std::pow(std::log(t), -static_cast<double>(dec.d[j]));
}

} // namespace nilab
