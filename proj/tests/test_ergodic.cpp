#include "doctest.h"

#include <functional>
#include <initializer_list>
#include <stdexcept>

#include <cmath>
#include <complex>

#include "nilab/ergodic.hpp"
#include "nilab/jet.hpp"
#include "nilab/observables.hpp"

using namespace nilab;
using cplx = std::complex<double>;

namespace {

Observable theta(cplx c = 1.0)
{
    Observable h;
    ModeObservable m;
    m.N = 1;
    m.atoms.push_back(ThetaAtom::make(0.5, 0.5, 1.0, 0.0, 1.0, c));
    h.modes.push_back(m);
    return h;
}

Observable toral()
{
    Observable h;
    ModeObservable m;
    m.N = 0;
    m.fourier[{1, 0}] = 0.5;
    m.fourier[{0, 1}] = {0.0, 0.4};
    h.modes.push_back(m);
    return h;
}

// plain quadrature of the orbit integrand, used as the oracle
cplx orbit_integral(const Observable& h, const Automorphism& A, const HeisPoint& x, double a, double b,
                    const std::function<double(double)>& w)
{
    QuadratureSpec q;
    q.tol = 1e-12;
    q.crossing_width = 0.0;
    return integrate([&](double s) { return w(s) * eval(h, flow(x, s, A)); }, a, b, q, 0.05).value;
}

} // namespace

TEST_CASE("smooth step")
{
    CHECK(smooth_step(-1.0) == 0.0);
    CHECK(smooth_step(0.0) == 0.0);
    CHECK(smooth_step(1.0) == 1.0);
    CHECK(smooth_step(2.0) == 1.0);
    CHECK(smooth_step(0.5) == doctest::Approx(0.5));
    for (double t : {0.1, 0.3, 0.7}) CHECK(smooth_step(t) + smooth_step(1.0 - t) == doctest::Approx(1.0));
}

TEST_CASE("direct ergodic integral of constants and of a toral character")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    QuadratureSpec q;
    const HeisPoint x{0.1, 0.2, 0.3};
    CHECK(std::abs(ergodic_integral_direct(Observable::constant(2.0), A, x, 7.5, q).value - 15.0) < 1e-12);
    // e^{2 pi i (x + alpha t)} integrates in closed form
    Observable h;
    ModeObservable m;
    m.N = 0;
    m.fourier[{1, 0}] = 1.0;
    h.modes.push_back(m);
    const double t = 40.0, w = 2 * 3.14159265358979323846 * A.alpha;
    const cplx want = std::polar(1.0, 2 * 3.14159265358979323846 * x.x) * (std::polar(1.0, w * t) - 1.0) / cplx(0.0, w);
    CHECK(std::abs(ergodic_integral_direct(h, A, x, t, q).value - want) < 1e-9);
}

TEST_CASE("renormalized integral agrees with the direct one")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    QuadratureSpec q;
    const HeisPoint x{0.21, 0.37, 0.11};
    const Observable h = combine(1.0, theta(), 1.0, toral());
    const cplx direct = ergodic_integral_direct(h, A, x, 30.0, q).value;
    for (int k = 0; k <= 4; ++k) CHECK(std::abs(renormalized_integral(h, A, x, 30.0, k, q).value - direct) < 1e-8);
    CHECK(renorm_level(A.lambda, 1.0) == 0);
    CHECK(renorm_level(A.lambda, 100.0) == 3);
}

TEST_CASE("crossing sum matches quadrature for a narrow transferred atom")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    const Observable h = transfer(theta({0.5, 0.2}), A, 5);
    const ThetaAtom& atom = h.modes[0].atoms[0];
    CHECK(crossing_sigma(atom, A) < 5e-3);
    Window w{[](double s) { return smooth_step(4 * s) * smooth_step(4 * (1 - s)); }, 0.0, 1.0, {}};
    w.taylor = [](double s, double* c) {
        using J = Jet<kWindowTaylorOrder>;
        const J v = J::variable(s);
        const J j = smooth_step_t(J(4.0) * v) * smooth_step_t(J(4.0) * (J(1.0) - v));
        for (int i = 0; i <= kWindowTaylorOrder; ++i) c[i] = j.c[i];
    };
    const HeisPoint y{0.3, 0.7, 0.2};
    const cplx cs = atom_crossing_integral(atom, 1, A, y, w).value;
    const cplx oracle = orbit_integral(h, A, y, 0.0, 1.0, w.f);
    CHECK(std::abs(cs - oracle) < 1e-8 * std::max(1.0, std::abs(oracle)));
    // window_integral dispatches to the same sum
    CHECK(std::abs(window_integral(h, A, y, w, QuadratureSpec{}).value - oracle) < 1e-8 * std::max(1.0, std::abs(oracle)));
}

TEST_CASE("tabulated Taylor data reproduces the window and its derivatives")
{
    Window w{[](double s) { return smooth_step(2 * s) * smooth_step(2 * (1 - s)); }, 0.0, 1.0, {}};
    w.taylor = [](double s, double* c) {
        using J = Jet<kWindowTaylorOrder>;
        const J v = J::variable(s);
        const J j = smooth_step_t(J(2.0) * v) * smooth_step_t(J(2.0) * (J(1.0) - v));
        for (int i = 0; i <= kWindowTaylorOrder; ++i) c[i] = j.c[i];
    };
    const Window t = tabulate_taylor(w, 1e-3);
    double a[kWindowTaylorOrder + 1], b[kWindowTaylorOrder + 1];
    for (double s : {0.05, 0.3337, 0.5, 0.91}) {
        w.taylor(s, a);
        t.taylor(s, b);
        for (int i = 0; i <= 3; ++i) CHECK(std::abs(a[i] - b[i]) < 1e-9 * std::max(1.0, std::abs(a[i])));
        CHECK(t.f(s) == doctest::Approx(w.f(s)));
    }
}

TEST_CASE("zooming partition sums to one with shrinking supports")
{
    for (auto [T, n] : {std::pair{64.0, 3}, std::pair{1000.0, 4}}) {
        const ZoomPartition P(T, n);
        for (int i = 0; i <= 2000; ++i) {
            const double t = T * i / 2000.0;
            double s = 0.0;
            for (int k = -n; k <= n; ++k) s += P.phi(k, t);
            CHECK(s == doctest::Approx(1.0).epsilon(1e-13));
        }
        for (int k = -n; k <= n; ++k) {
            const auto [a, b] = P.support(k);
            CHECK(b - a <= std::pow(4.0, -std::abs(k)) * T * (1 + 1e-12));
            // the end pieces are cut at 0 or T, not smoothly
            if (k != n) CHECK(P.phi(k, a - 1e-9 * T) == 0.0);
            if (k != -n) CHECK(P.phi(k, b + 1e-9 * T) == 0.0);
        }
    }
    CHECK_THROWS(ZoomPartition(-1.0, 2));
}

TEST_CASE("smooth decomposition stays within the boundary bound")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    QuadratureSpec q;
    const HeisPoint x{0.21, 0.37, 0.11};
    const Observable h = theta();
    for (double T : {10.0, 100.0}) {
        const auto d = smooth_decomposition(h, A, x, T, q);
        const cplx direct = ergodic_integral_direct(h, A, x, T, q).value;
        CHECK(std::abs(d.value - direct) <= d.boundary_bound + 10 * q.tol * T);
    }
}

TEST_CASE("smoothed and renormalized smoothed integrals agree with plain quadrature")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    const HeisPoint x{0.6, 0.1, 0.4};
    const Observable h = combine(1.0, theta({0.3, -0.2}), 1.0, toral());
    const ZoomPartition P(50.0, 2);
    const Window w = P.window(1);
    const cplx oracle = orbit_integral(h, A, x, w.a, w.b, w.f);
    QuadratureSpec q;
    CHECK(std::abs(smoothed_integral(h, A, x, w, q).value - oracle) < 1e-8);
    for (int k = 1; k <= 3; ++k) CHECK(std::abs(renormalized_smoothed(h, A, x, w, k, q).value - oracle) < 1e-8);
}

TEST_CASE("deviation fit on a constant and input checks")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    QuadratureSpec q;
    const auto grid = geometric_grid(10.0, 1000.0, 9);
    CHECK(grid.front() == doctest::Approx(10.0));
    CHECK(grid.back() == doctest::Approx(1000.0));
    const auto fit = deviation_fit(Observable::constant(1.0), A, {0.1, 0.2, 0.3}, grid, q, false, 10.0);
    CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fit.r_squared == doctest::Approx(1.0));
    for (const auto& s : fit.samples) CHECK(std::abs(s.H - s.t) < 1e-8 * s.t);
    CHECK_THROWS(deviation_fit(Observable::constant(1.0), A, {}, geometric_grid(10, 100, 5), q));
}
