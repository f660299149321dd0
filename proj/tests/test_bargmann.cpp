#include "doctest.h"

#include <functional>
#include <initializer_list>
#include <stdexcept>

#include <cmath>
#include <complex>

#include "nilab/bargmann.hpp"

using namespace nilab;
using cplx = std::complex<double>;

namespace {

Eigen::MatrixXcd gaussian(const AxisGrid& y, double a, double c1, double c2, double k1)
{
    Eigen::MatrixXcd F(y.n, y.n);
    for (int i = 0; i < y.n; ++i)
        for (int k = 0; k < y.n; ++k) {
            const double u = y.at(i), v = y.at(k);
            F(i, k) = std::exp(-a * ((u - c1) * (u - c1) + (v - c2) * (v - c2))) * std::polar(1.0, k1 * u);
        }
    return F;
}

} // namespace

TEST_CASE("Bargmann transform preserves inner products")
{
    const int N = 1;
    const AxisGrid y{-3, 3, 61};
    const PhaseGrid pg{{-4, 4, 41}, {-4, 4, 41}};
    const auto f1 = gaussian(y, 2, 0.1, -0.2, 0.5), f2 = gaussian(y, 3, -0.2, 0.1, 1.0);
    const cplx direct = (f1.conjugate().cwiseProduct(f2)).sum() * y.step() * y.step();
    const auto B1 = bargmann_transform(f1, y, pg, N), B2 = bargmann_transform(f2, y, pg, N);
    CHECK(std::abs(bargmann_inner(B1, B2, pg, N) - direct) < 1e-6 * std::abs(direct));
    const double n2 = (f1.cwiseAbs2()).sum() * y.step() * y.step();
    CHECK(std::abs(bargmann_inner(B1, B1, pg, N).real() - n2) < 1e-6 * n2);
}

TEST_CASE("resolution checks")
{
    const PhaseGrid fine{{-4, 4, 81}, {-4, 4, 81}};
    CHECK_NOTHROW(check_resolution({-3, 3, 61}, fine, 1));
    CHECK_THROWS(check_resolution({-3, 3, 11}, fine, 1));
    CHECK_THROWS(check_resolution({-3, 3, 61}, {{-4, 4, 5}, {-4, 4, 5}}, 1));
    CHECK_THROWS(check_resolution({-3, 3, 61}, fine, 9));
}

TEST_CASE("frequency axes are eigenvectors of the transpose")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    const auto [s, u] = frequency_axes(A);
    Eigen::Matrix2d At;
    At << 2, 3, 1, 2;
    CHECK((At * s - s / A.lambda).norm() < 1e-12);
    CHECK((At * u - u * A.lambda).norm() < 1e-12);
    CHECK(s.norm() == doctest::Approx(1.0));
    CHECK(u.norm() == doctest::Approx(1.0));
}

TEST_CASE("norm settings and trivial cases")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    const LatticeSpec L{1};
    for (int N : {1, 4}) CHECK_NOTHROW(check_resolution(default_norm_settings(N).y, default_norm_settings(N).pg, N));
    ModeObservable zero;
    zero.N = 1;
    CHECK(anisotropic_norm(zero, L, A, default_norm_settings(1)) == 0.0);
    ModeObservable n0;
    n0.N = 0;
    CHECK_THROWS(anisotropic_norm(n0, L, A, default_norm_settings(1)));
    CHECK(global_norm({{1, 2.0}, {2, 1.0}}, 1.0) == doctest::Approx(2.0));
    CHECK(global_norm({{1, 2.0}, {4, 1.0}}, 1.0) == doctest::Approx(4.0));
}

TEST_CASE("smooth family and pairing")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    const LatticeSpec L{1};
    const auto m = smooth_family_member(2, 0.25);
    CHECK(m.N == 2);
    REQUIRE(m.atoms.size() == 1);
    CHECK(std::abs(m.atoms[0].coeff - 0.25 * std::exp(-3.14159265358979323846 * 0.0625 * 4)) < 1e-14);
    const Window phi = unit_segment_window();
    CHECK(window_cnu_norm(phi, 0) <= window_cnu_norm(phi, 2));
    CHECK(window_cnu_norm(phi, 2) >= 1.0);
    const auto s = default_norm_settings(1);
    const HeisPoint x = chart_segment_start(A, s);
    CHECK(x.x + 0.5 * A.alpha == doctest::Approx(s.cx));
    CHECK(x.y + 0.5 * A.beta == doctest::Approx(s.cy));
    ModeObservable zero;
    zero.N = 1;
    CHECK(std::abs(dual_pairing_bound(zero, L, A, x, phi, s).pairing) == 0.0);
    CHECK_THROWS(dual_pairing_bound(m, L, A, x, phi, s));   // grid too coarse for N = 2
    const auto rep = dual_pairing_bound(m, L, A, x, phi, default_norm_settings(2));
    CHECK(rep.norm > 0.0);
    CHECK(std::isfinite(rep.ratio));
}
