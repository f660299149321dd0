#include "doctest.h"

#include <functional>
#include <initializer_list>
#include <stdexcept>

#include <cmath>
#include <complex>

#include "nilab/observables.hpp"
#include "nilab/rng.hpp"

using namespace nilab;
using cplx = std::complex<double>;

namespace {

constexpr double kPi = 3.14159265358979323846;

// brute-force lattice sum for an identity-frame atom without polynomial
cplx theta_oracle(double cx, double cy, double q11, double q12, double q22, cplx c, int D, const HeisPoint& g)
{
    cplx s = 0.0;
    for (int p = -12; p <= 12; ++p)
        for (int q = -12; q <= 12; ++q) {
            const double w0 = g.x + p - cx, w1 = g.y + q - cy;
            const double ex = kPi * (q11 * w0 * w0 + 2 * q12 * w0 * w1 + q22 * w1 * w1);
            double ph = D * (g.z + 0.5 * (p * g.y - q * g.x));
            if ((D * p * q) % 2 != 0) ph += 0.5;
            s += std::exp(-ex) * std::polar(1.0, 2 * kPi * ph);
        }
    return c * s;
}

Observable single_atom(int N, cplx c, int E = 1)
{
    Observable h;
    h.lattice = {E};
    ModeObservable m;
    m.N = N;
    m.atoms.push_back(ThetaAtom::make(0.4, 0.6, 1.0, 0.2, 0.8, c));
    h.modes.push_back(m);
    return h;
}

} // namespace

TEST_CASE("theta atom matches a brute-force lattice sum")
{
    CounterRng rng(3);
    for (int N : {1, 2, 3}) {
        const Observable h = single_atom(N, {0.5, 0.2});
        for (int i = 0; i < 50; ++i) {
            const HeisPoint g{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-1, 1)};
            const cplx want = theta_oracle(0.4, 0.6, 1.0, 0.2, 0.8, {0.5, 0.2}, N, g);
            CHECK(std::abs(eval(h, g) - want) < 1e-12);
        }
    }
}

TEST_CASE("mode observables are lattice invariant and z-equivariant")
{
    CounterRng rng(4);
    for (int E : {1, 2}) {
        const Observable h = single_atom(2, 1.0, E);
        const LatticeSpec L{E};
        for (int i = 0; i < 50; ++i) {
            const HeisPoint g{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-1, 1)};
            const HeisPoint gam = lattice_element(static_cast<int>(rng.uniform(-3, 3)), static_cast<int>(rng.uniform(-3, 3)),
                                                  static_cast<int>(rng.uniform(-3, 3)), L);
            CHECK(std::abs(eval(h, mul(gam, g)) - eval(h, g)) < 1e-11);
            const double s = rng.uniform(-1, 1);
            const cplx rot = std::polar(1.0, 2 * kPi * E * 2 * s);
            CHECK(std::abs(eval(h, HeisPoint{g.x, g.y, g.z + s}) - rot * eval(h, g)) < 1e-11);
        }
    }
}

TEST_CASE("toral modes and constants")
{
    Observable h;
    ModeObservable m;
    m.N = 0;
    m.fourier[{1, -2}] = {0.0, 0.5};
    m.fourier[{0, 0}] = 0.25;
    h.modes.push_back(m);
    const HeisPoint g{0.1, 0.3, 0.9};
    const cplx want = 0.25 + cplx(0.0, 0.5) * std::polar(1.0, 2 * kPi * (0.1 - 0.6));
    CHECK(std::abs(eval(h, g) - want) < 1e-14);
    CHECK(std::abs(mean(h) - 0.25) < 1e-15);
    CHECK(std::abs(mean(single_atom(1, 1.0))) == 0.0);
    CHECK(std::abs(eval(Observable::constant(2.0), g) - 2.0) == 0.0);
    CHECK(std::abs(eval(Observable::zero(), g)) == 0.0);
}

TEST_CASE("transfer equals lambda^k h o F^{-k}")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    const Observable h = combine(1.0, single_atom(1, {0.5, 0.2}), 1.0, Observable::constant(0.0));
    CounterRng rng(6);
    for (int k : {1, 2, 3, -1}) {
        const Observable t = transfer(h, A, k);
        for (int i = 0; i < 20; ++i) {
            const HeisPoint g{rng.uniform(), rng.uniform(), rng.uniform()};
            HeisPoint back = g;
            for (int j = 0; j < std::abs(k); ++j) back = k > 0 ? apply_aut_inv(A, back) : apply_aut(A, back);
            const cplx want = std::pow(A.lambda, k) * eval(h, back);
            CHECK(std::abs(eval(t, g) - want) < 1e-9 * std::max(1.0, std::abs(want)));
        }
    }
}

TEST_CASE("apply_W agrees with a finite difference along the flow")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    Observable h = single_atom(1, {0.5, 0.2});
    ModeObservable t;
    t.N = 0;
    t.fourier[{1, 0}] = 0.3;
    h.modes.push_back(t);
    const Observable w = apply_W(h, A);
    const Observable ww = apply_W(w, A);
    CounterRng rng(8);
    for (int i = 0; i < 30; ++i) {
        const HeisPoint g{rng.uniform(), rng.uniform(), rng.uniform()};
        CHECK(std::abs(eval(w, g) - wgrad(h, g, A)) < 1e-8);
        CHECK(std::abs(eval(ww, g) - wgrad(w, g, A)) < 1e-7);
    }
    CHECK(std::abs(mean(w)) < 1e-15);
}

TEST_CASE("mode projection splits the sum")
{
    Observable h = single_atom(1, 1.0);
    h = combine(1.0, h, 1.0, single_atom(2, {0.0, 1.0}));
    h = combine(1.0, h, 1.0, Observable::constant(0.5));
    const HeisPoint g{0.2, 0.4, 0.7};
    cplx sum = 0.0;
    for (int N : {0, 1, 2}) sum += eval(mode_project(h, N), g);
    CHECK(std::abs(sum - eval(h, g)) < 1e-14);
    CHECK(mode_project(h, 5).modes.empty());
}

TEST_CASE("observable JSON round trip")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    Observable h = apply_W(single_atom(1, {0.5, 0.2}), A);
    h = combine(1.0, h, 1.0, transfer(single_atom(2, 1.0), A, 2));
    const Observable back = observable_from_json(observable_to_json(h));
    for (const HeisPoint& g : {HeisPoint{0.1, 0.2, 0.3}, HeisPoint{0.8, 0.45, 0.05}})
        CHECK(std::abs(eval(back, g) - eval(h, g)) < 1e-12 * std::max(1.0, std::abs(eval(h, g))));
}

TEST_CASE("observable JSON validation")
{
    CHECK_THROWS(observable_from_json(R"({"lattice_E": 0, "modes": []})"));
    CHECK_THROWS(observable_from_json(R"({"modes": [{"N": 0, "atoms": [{"center": [0,0], "quad": [[1,0],[0,1]], "coeff": 1}]}]})"));
    CHECK_THROWS(observable_from_json(R"({"modes": [{"N": 1, "fourier": [{"m": 1, "n": 0, "coeff": 1}]}]})"));
    CHECK_THROWS(observable_from_json(R"({"modes": [{"N": 1}, {"N": 1}]})"));
    CHECK_THROWS(observable_from_json(R"({"modes": [{"N": 1, "atoms": [{"center": [0,0], "quad": [[1,2],[2,1]], "coeff": 1}]}]})"));
    CHECK_THROWS(load_observable("/nonexistent/observable.json"));
}

TEST_CASE("sup norm of a single Fourier term")
{
    Observable h;
    ModeObservable m;
    m.N = 0;
    m.fourier[{2, 1}] = 0.7;
    h.modes.push_back(m);
    CHECK(sup_norm(h, 64) == doctest::Approx(0.7));
}
