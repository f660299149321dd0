#include "doctest.h"

#include <functional>
#include <initializer_list>
#include <stdexcept>

#include <cmath>
#include <complex>

#include "nilab/quadrature.hpp"

using namespace nilab;

TEST_CASE("Gauss-Legendre rule integrates polynomials exactly")
{
    const GaussRule& g = gauss_rule(16);
    REQUIRE(g.x.size() == 16);
    double wsum = 0.0;
    for (double w : g.w) wsum += w;
    CHECK(wsum == doctest::Approx(2.0).epsilon(1e-15));
    for (int p = 0; p <= 31; ++p) {
        double s = 0.0;
        for (std::size_t i = 0; i < g.x.size(); ++i) s += g.w[i] * std::pow(g.x[i], p);
        const double want = p % 2 ? 0.0 : 2.0 / (p + 1);
        CHECK(s == doctest::Approx(want).epsilon(1e-13));
    }
}

TEST_CASE("adaptive integration of smooth and oscillatory integrands")
{
    QuadratureSpec q;
    auto r = integrate([](double x) { return std::complex<double>(std::exp(x)); }, 0.0, 3.0, q);
    CHECK(std::abs(r.value - (std::exp(3.0) - 1.0)) < 1e-11);
    CHECK(r.converged);
    r = integrate([](double x) { return std::polar(1.0, 7.0 * x); }, 0.0, 100.0, q);
    const std::complex<double> want = (std::polar(1.0, 700.0) - 1.0) / std::complex<double>(0.0, 7.0);
    CHECK(std::abs(r.value - want) < 1e-8);
    CHECK(r.evals > 0);
    r = integrate([](double x) { return std::complex<double>(x * x); }, 2.0, 2.0, q);
    CHECK(std::abs(r.value) == 0.0);
}

TEST_CASE("integration resolves a narrow peak")
{
    // panels must be fine enough to see the peak at all
    QuadratureSpec q;
    q.panel = 2e-3;
    const double w = 1e-3;
    auto r = integrate([w](double x) { return std::complex<double>(std::exp(-(x - 0.3) * (x - 0.3) / (w * w))); }, 0.0,
                       1.0, q);
    CHECK(std::abs(r.value.real() - w * std::sqrt(3.14159265358979323846)) < 1e-10);
}
