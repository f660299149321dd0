#include "doctest.h"

#include <functional>
#include <initializer_list>
#include <stdexcept>

#include <cmath>
#include <complex>

#include "nilab/quadrature.hpp"
#include "nilab/spectral.hpp"

using namespace nilab;
using cplx = std::complex<double>;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("parity condition and propagator unitarity")
{
    CHECK(parity_condition(IntMat2{2, 1, 3, 2}));
    CHECK_FALSE(parity_condition(IntMat2{2, 1, 1, 1}));
    const Automorphism A = stable_generator(2, 1, 3, 2);
    for (int D : {1, 3, 6}) {
        const CMatrix U = quantum_propagator(A, D);
        CHECK((U.adjoint() * U - CMatrix::Identity(D, D)).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK_THROWS_AS(quantum_propagator(stable_generator(2, 1, 1, 1), 2), std::invalid_argument);
    CHECK_THROWS_AS(quantum_propagator(A, 0), std::invalid_argument);
}

TEST_CASE("propagator at D = 1 is a unimodular scalar")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    const CMatrix U = quantum_propagator(A, 1);
    CHECK(std::abs(std::abs(U(0, 0)) - 1.0) < 1e-14);
}

TEST_CASE("exact resonances fill each band with D values")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    for (int D : {1, 2, 5}) {
        const auto rs = resonances_exact(A, D, 1, 2);
        CHECK(rs.source == ResonanceSource::exact);
        for (int k = 0; k <= 2; ++k) CHECK(rs.count_in_band(k) == D);
        CHECK(rs.total() == 3 * D);
        CHECK(rs.unassigned_fraction() == 0.0);
        for (const auto& r : rs.items) CHECK(r.modulus == doctest::Approx(band_radius(A.lambda, r.band)).epsilon(1e-12));
    }
    CHECK(band_radius(A.lambda, 0) == doctest::Approx(std::sqrt(A.lambda)));
    CHECK(to_string(ResonanceSource::numeric) == "numeric");
}

TEST_CASE("Hermite functions are orthonormal")
{
    const double sigma = 1.0 / std::sqrt(2 * kPi);
    QuadratureSpec q;
    q.tol = 1e-13;
    for (int m = 0; m <= 6; ++m)
        for (int n = 0; n <= 6; ++n) {
            const auto r = integrate([&](double s) { return cplx(hermite_function(m, s, sigma) * hermite_function(n, s, sigma)); },
                                     -4.0, 4.0, q);
            CHECK(std::abs(r.value - (m == n ? 1.0 : 0.0)) < 1e-10);
        }
}

TEST_CASE("escape weight shape")
{
    CHECK(escape_weight(8.0, 1, 0.0, 0.0) == 1.0);
    CHECK(escape_weight(8.0, 0, 0.0, 0.0) == 1.0);
    const double s = std::sqrt(2 * kPi * 3);
    CHECK(escape_weight(2.0, 3, 1.0, 0.0) == doctest::Approx(1.0 / (1.0 + s * s)));
    CHECK(escape_weight(2.0, 3, 0.0, 1.0) == doctest::Approx(1.0 + s * s));
    CHECK(escape_weight(8.0, 1, 10.0, 0.0) < escape_weight(8.0, 1, 1.0, 0.0));
    CHECK(escape_weight(8.0, 1, 0.0, 10.0) > escape_weight(8.0, 1, 0.0, 1.0));
}

TEST_CASE("twisted basis sections have the stated quasi-periodicity")
{
    for (int D : {1, 2, 3}) {
        const TwistedBasis B = build_basis(D, 3);
        CHECK(B.size() == D * 7);
        CHECK(B.index(D - 1, 3) == B.size() - 1);
        for (int i : {0, B.size() / 2, B.size() - 1})
            for (auto [x, y] : {std::pair{0.2, 0.35}, std::pair{0.7, 0.9}}) {
                const cplx b = B.eval(i, x, y);
                CHECK(std::abs(B.eval(i, x + 1, y) - std::polar(1.0, -kPi * D * y) * b) < 1e-10);
                CHECK(std::abs(B.eval(i, x, y + 1) - std::polar(1.0, kPi * D * x) * b) < 1e-10);
                const HeisPoint g{x, y, 0.3};
                CHECK(std::abs(B.eval(i, g) - std::polar(1.0, 2 * kPi * D * 0.3) * b) < 1e-10);
            }
    }
}

TEST_CASE("transfer matrix: trivial mode, grid check, agreement with the exact oracle")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    const auto M0 = transfer_matrix(A, 0, 1, build_basis(1, 2), 8.0);
    REQUIRE(M0.entries.rows() == 1);
    CHECK(std::abs(M0.entries(0, 0) - A.lambda) < 1e-15);
    CHECK_THROWS_AS(transfer_matrix(A, 1, 1, build_basis(1, 8), 8.0, 16), std::invalid_argument);
    CHECK_THROWS_AS(transfer_matrix(A, 1, 1, build_basis(2, 8), 8.0), std::invalid_argument);
    CHECK_THROWS_AS(transfer_matrix(stable_generator(2, 1, 1, 1), 1, 1, build_basis(1, 8), 8.0), std::invalid_argument);

    const auto M = transfer_matrix(A, 1, 1, build_basis(1, 12), 8.0);
    CHECK(M.grid >= 4 * max_represented_frequency(A, M.basis));
    const auto num = resonances_numeric(M, 0.15);
    const auto ex = resonances_exact(A, 1, 1, 2);
    const auto cmp = compare_band(ex, num, 0);
    CHECK(cmp.count_other == 1);
    CHECK(cmp.max_modulus_rel < 1e-3);
    CHECK(cmp.max_phase < 1e-3);
    CHECK_THROWS(resonances_numeric(M, 0.7));

    // negative modes conjugate
    const auto Mn = transfer_matrix(A, -1, 1, build_basis(1, 12), 8.0);
    CHECK((Mn.entries - M.entries.conjugate()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("spectral decomposition relations and deviation functional")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    const auto M = transfer_matrix(A, 1, 1, build_basis(1, 6), 8.0);
    const auto dec = spectral_decomposition(M, 0.9);
    CHECK(!dec.xi.empty());
    CHECK(decomposition_defect(dec) < 1e-9);
    for (const auto& x : dec.xi) CHECK(std::abs(x) > 0.9);
    CHECK(dec.remainder_constant >= 0.0);
    CHECK_THROWS(spectral_decomposition(M, -1.0));
    // eta on an eigenvalue modulus
    CHECK_THROWS_AS(spectral_decomposition(M, std::abs(dec.xi[0])), std::invalid_argument);

    CVector c = CVector::Zero(M.basis.size());
    QuadratureSpec q;
    CHECK(std::abs(deviation_functional(c, {0.1, 0.2, 0.3}, 20.0, 0, dec, M, q)) == 0.0);
    CHECK_THROWS_AS(deviation_functional(c, {0.1, 0.2, 0.3}, 20.0, 99, dec, M, q), std::out_of_range);
}
