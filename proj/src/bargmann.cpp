#include "nilab/bargmann.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "nilab/jet.hpp"
#include "nilab/spectral.hpp"

namespace nilab {

namespace {

constexpr double kPi = 3.14159265358979323846;
using cplx = std::complex<double>;

// rows (x, xi), columns y: conj of the 1-d kernel times the sample weight
Eigen::MatrixXcd kernel_1d(const AxisGrid& y, const PhaseGrid& pg, int N)
{
    const double norm = std::pow(2.0 * N, 0.25);
    const double dy = y.step();
    Eigen::MatrixXcd K(pg.per_axis(), y.n);
    for (int ix = 0; ix < pg.x.n; ++ix) {
        const double x = pg.x.at(ix);
        for (int ik = 0; ik < pg.xi.n; ++ik) {
            const double xi = pg.xi.at(ik);
            for (int iy = 0; iy < y.n; ++iy) {
                const double v = y.at(iy);
                const double amp = norm * std::exp(-kPi * N * (v - x) * (v - x)) * dy;
                const double th = -kPi * N * xi * (2.0 * v - x);
                K(ix * pg.xi.n + ik, iy) = amp * cplx(std::cos(th), std::sin(th));
            }
        }
    }
    return K;
}

} // namespace

void check_resolution(const AxisGrid& y, const PhaseGrid& pg, int N)
{
    if (N < 1) throw std::invalid_argument("bargmann: N must be at least 1");
    if (y.n < 2 || pg.x.n < 2 || pg.xi.n < 2) throw std::invalid_argument("bargmann: grids need at least 2 points");
    const double s = 1.0 / std::sqrt(static_cast<double>(N));
    if (y.step() > 0.25 * s)
        throw std::invalid_argument("bargmann: under-resolved sample grid, step " + std::to_string(y.step()) +
                                    " > 0.25/sqrt(N)");
    if (pg.x.step() > 0.5 * s)
        throw std::invalid_argument("bargmann: under-resolved position grid, step " + std::to_string(pg.x.step()) +
                                    " > 0.5/sqrt(N)");
    if (pg.xi.step() > 0.5 * s)
        throw std::invalid_argument("bargmann: under-resolved frequency grid, step " + std::to_string(pg.xi.step()) +
                                    " > 0.5/sqrt(N)");
}

Eigen::MatrixXcd bargmann_transform(const Eigen::MatrixXcd& samples, const AxisGrid& y, const PhaseGrid& pg, int N)
{
    check_resolution(y, pg, N);
    if (samples.rows() != y.n || samples.cols() != y.n)
        throw std::invalid_argument("bargmann_transform: samples must be y.n x y.n");
    const Eigen::MatrixXcd K = kernel_1d(y, pg, N);
    return K * samples * K.transpose();
}

std::complex<double> bargmann_inner(const Eigen::MatrixXcd& u, const Eigen::MatrixXcd& v, const PhaseGrid& pg, int N)
{
    if (u.rows() != v.rows() || u.cols() != v.cols()) throw std::invalid_argument("bargmann_inner: shape mismatch");
    const double cell = pg.x.step() * pg.xi.step() * N;
    return (u.conjugate().cwiseProduct(v)).sum() * cell * cell;
}

NormSettings default_norm_settings(int N, double r)
{
    if (N < 1) throw std::invalid_argument("default_norm_settings: N must be at least 1");
    NormSettings s;
    s.r = r;
    const double rt = std::sqrt(static_cast<double>(N));
    // the dilated chart function lives in |y| <= sqrt 2 * outer radius
    const double yr = std::sqrt(2.0) * s.chart_outer + 0.05;
    const int ny = std::max(121, static_cast<int>(std::ceil(2.0 * yr / (0.2 / rt))) + 1);
    s.y = {-yr, yr, ny};
    const double xr = yr + 4.0 / rt;
    const double step = 0.4 / rt;
    s.pg.x = {-xr, xr, static_cast<int>(std::ceil(2.0 * xr / step)) + 1};
    // chart frequencies stay within about 1 of the origin; add five packet widths
    const double kr = 1.5 + 5.0 / rt;
    s.pg.xi = {-kr, kr, static_cast<int>(std::ceil(2.0 * kr / step)) + 1};
    return s;
}

std::pair<Eigen::Vector2d, Eigen::Vector2d> frequency_axes(const Automorphism& A)
{
    Eigen::Matrix2d At;
    At << static_cast<double>(A.A.a), static_cast<double>(A.A.c), static_cast<double>(A.A.b), static_cast<double>(A.A.d);
    Eigen::EigenSolver<Eigen::Matrix2d> es(At);
    const int is = std::abs(es.eigenvalues()(0)) < std::abs(es.eigenvalues()(1)) ? 0 : 1;
    return {es.eigenvectors().col(is).real().normalized(), es.eigenvectors().col(1 - is).real().normalized()};
}

double anisotropic_norm(const ModeObservable& h, const LatticeSpec& L, const Automorphism& A, const NormSettings& s)
{
    if (h.N == 0) throw std::invalid_argument("anisotropic_norm: mode N must be nonzero");
    const int N = std::abs(h.N);
    check_resolution(s.y, s.pg, N);
    // sigma h(y) = h(y / sqrt 2) / sqrt 2 for the chart function h(c + v, 0) * cutoff(|v|)
    const double r2 = std::sqrt(2.0);
    Eigen::MatrixXcd F(s.y.n, s.y.n);
    for (int i = 0; i < s.y.n; ++i)
        for (int k = 0; k < s.y.n; ++k) {
            const double v1 = s.y.at(i) / r2, v2 = s.y.at(k) / r2;
            const double rad = std::hypot(v1, v2);
            const double cut = 1.0 - smooth_step((rad - s.chart_inner) / (s.chart_outer - s.chart_inner));
            F(i, k) = cut == 0.0 ? cplx(0.0) : cut * eval(h, HeisPoint{s.cx + v1, s.cy + v2, 0.0}, L) / r2;
        }
    const Eigen::MatrixXcd B = bargmann_transform(F, s.y, s.pg, N);
    // the chart transform at (x, xi) is B_N at (sqrt2 x, xi / sqrt2); the weight sees xi = sqrt2 xi'
    const auto [es, eu] = frequency_axes(A);
    const int nk = s.pg.xi.n;
    double acc = 0.0;
    for (int row = 0; row < B.rows(); ++row) {
        const double k1 = r2 * s.pg.xi.at(row % nk);
        for (int col = 0; col < B.cols(); ++col) {
            const double k2 = r2 * s.pg.xi.at(col % nk);
            const double zp = es(0) * k1 + es(1) * k2;
            const double zq = eu(0) * k1 + eu(1) * k2;
            const double w = escape_weight(s.r, N, zp, zq);
            acc += w * w * std::norm(B(row, col));
        }
    }
    const double cell = s.pg.x.step() * s.pg.xi.step() * N;
    return std::sqrt(acc) * cell;
}

double global_norm(const std::vector<std::pair<int, double>>& table, double kappa)
{
    double best = 0.0;
    for (const auto& [N, v] : table) best = std::max(best, std::pow(std::max(std::abs(N), 1), kappa) * v);
    return best;
}

ModeObservable smooth_family_member(int N, double w)
{
    if (N == 0) throw std::invalid_argument("smooth_family_member: N must be nonzero");
    if (!(w > 0.0)) throw std::invalid_argument("smooth_family_member: width must be positive");
    ModeObservable m;
    m.N = N;
    m.atoms.push_back(ThetaAtom::make(0.5, 0.5, 1.0, 0.0, 1.0, w * std::exp(-kPi * w * w * N * N)));
    return m;
}

namespace {

template <class V>
V segment_bump(const V& s)
{
    return smooth_step_t(V(4.0) * s) * smooth_step_t(V(4.0) * (V(1.0) - s));
}

} // namespace

Window unit_segment_window()
{
    Window w{[](double s) { return segment_bump(s); }, 0.0, 1.0, {}};
    w.taylor = [](double s, double* c) {
        const auto j = segment_bump(Jet<kWindowTaylorOrder>::variable(s));
        std::copy(j.c.begin(), j.c.end(), c);
    };
    return w;
}

double window_cnu_norm(const Window& phi, int nu, int samples)
{
    if (!phi.taylor) throw std::invalid_argument("window_cnu_norm: window needs Taylor data");
    if (nu < 0 || nu > kWindowTaylorOrder) throw std::invalid_argument("window_cnu_norm: nu out of range");
    double best = 0.0;
    double c[kWindowTaylorOrder + 1];
    for (int i = 0; i < samples; ++i) {
        const double s = phi.a + (phi.b - phi.a) * i / (samples - 1);
        phi.taylor(s, c);
        double fact = 1.0;
        for (int j = 0; j <= nu; ++j) {
            if (j > 0) fact *= j;
            best = std::max(best, std::abs(c[j]) * fact);
        }
    }
    return best;
}

HeisPoint chart_segment_start(const Automorphism& A, const NormSettings& s)
{
    return HeisPoint{s.cx - 0.5 * A.alpha, s.cy - 0.5 * A.beta, 0.0};
}

PairingReport dual_pairing_bound(const ModeObservable& h, const LatticeSpec& L, const Automorphism& A,
                                 const HeisPoint& x, const Window& phi, const NormSettings& s, int nu)
{
    PairingReport out;
    Observable obs;
    obs.lattice = L;
    obs.modes.push_back(h);
    QuadratureSpec q;
    q.tol = 1e-13;
    out.pairing = smoothed_integral(obs, A, x, phi, q).value;
    out.norm = anisotropic_norm(h, L, A, s);
    out.phi_norm = window_cnu_norm(phi, nu);
    const double den = out.norm * out.phi_norm;
    out.ratio = den > 0.0 ? std::abs(out.pairing) / den : 0.0;
    return out;
}

} // namespace nilab
