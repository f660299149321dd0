#include "doctest.h"

#include <functional>
#include <initializer_list>
#include <stdexcept>

#include <cmath>

#include "nilab/heis.hpp"
#include "nilab/rng.hpp"

using namespace nilab;

TEST_CASE("group law matches hand computation")
{
    const HeisPoint g{1.0, 2.0, 3.0}, h{-0.5, 4.0, 1.0};
    const HeisPoint p = mul(g, h);
    CHECK(p.x == doctest::Approx(0.5));
    CHECK(p.y == doctest::Approx(6.0));
    // z = 3 + 1 + (1*4 - 2*(-0.5)) / 2
    CHECK(p.z == doctest::Approx(6.5));
    const HeisPoint e = mul(g, inverse(g));
    CHECK(max_abs_diff(e, HeisPoint{}) == 0.0);
}

TEST_CASE("polarized coordinates round trip")
{
    const HeisPoint g{0.3, -1.7, 0.25};
    const HeisPoint p = to_polarized(g);
    CHECK(p.z == doctest::Approx(0.25 + 0.3 * -1.7 / 2));
    CHECK(max_abs_diff(from_polarized(p), g) < 1e-15);
}

TEST_CASE("reduction lands in the fundamental domain and differs by a lattice element")
{
    CounterRng rng(5);
    for (int E : {1, 2, 3}) {
        const LatticeSpec L{E};
        for (int i = 0; i < 500; ++i) {
            const HeisPoint g{rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50)};
            const ReducedPoint r = reduce(g, L);
            CHECK(r.rep.x >= 0.0);
            CHECK(r.rep.x < 1.0);
            CHECK(r.rep.y >= 0.0);
            CHECK(r.rep.y < 1.0);
            const double zp = r.rep.z + r.rep.x * r.rep.y / 2;
            CHECK(zp >= -1e-12);
            CHECK(zp < 1.0 / E + 1e-12);
            // rep = gamma * g with gamma = lattice_element(p,q,r)
            const HeisPoint back = mul(lattice_element(r.p, r.q, r.r, L), g);
            CHECK(max_abs_diff(back, r.rep) < 1e-9);
            CHECK(quotient_distance(g, r.rep, L) < 1e-9);
        }
    }
}

TEST_CASE("lattice membership")
{
    CHECK(is_lattice(lattice_element(2, -3, 5, LatticeSpec{1}), LatticeSpec{1}));
    CHECK(is_lattice(HeisPoint{1, 1, 0.5}, LatticeSpec{1}));
    CHECK_FALSE(is_lattice(HeisPoint{1, 1, 0.25}, LatticeSpec{1}));
    CHECK_FALSE(is_lattice(HeisPoint{1.5, 1, 0.0}, LatticeSpec{2}));
    // (1,1,0) in symplectic form has z_polar = 1/2: a lattice point only when 1/2 is in Z/E
    CHECK(is_lattice(HeisPoint{1, 1, 0.0}, LatticeSpec{2}));
    CHECK_FALSE(is_lattice(HeisPoint{1, 1, 0.0}, LatticeSpec{1}));
}

TEST_CASE("stable generator data")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    CHECK(A.lambda == doctest::Approx(2.0 + std::sqrt(3.0)).epsilon(1e-14));
    CHECK(A.alpha * A.alpha + A.beta * A.beta == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(2 * A.alpha + 1 * A.beta == doctest::Approx(A.alpha / A.lambda).epsilon(1e-12));
    CHECK(3 * A.alpha + 2 * A.beta == doctest::Approx(A.beta / A.lambda).epsilon(1e-12));
    CHECK(A.h_top == doctest::Approx(std::log(A.lambda)));
    CHECK_THROWS_AS(stable_generator(1, 1, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(stable_generator(2, 1, 1, 2), std::invalid_argument);
}

TEST_CASE("automorphism is a homomorphism and preserves the lattice when expected")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    CounterRng rng(9);
    for (int i = 0; i < 200; ++i) {
        const HeisPoint g{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const HeisPoint h{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        CHECK(max_abs_diff(apply_aut(A, mul(g, h)), mul(apply_aut(A, g), apply_aut(A, h))) < 1e-12);
        CHECK(max_abs_diff(apply_aut_inv(A, apply_aut(A, g)), g) < 1e-12);
    }
    CHECK(preserves_lattice(IntMat2{2, 1, 3, 2}, LatticeSpec{1}));
    CHECK_FALSE(preserves_lattice(IntMat2{2, 1, 1, 1}, LatticeSpec{1}));
    CHECK(preserves_lattice(IntMat2{2, 1, 1, 1}, LatticeSpec{2}));
}

TEST_CASE("integer matrix algebra")
{
    const IntMat2 M{2, 1, 3, 2};
    CHECK(M * M.inverse() == IntMat2{});
    CHECK(M.pow(3) == M * M * M);
    CHECK(M.pow(-2) * M.pow(2) == IntMat2{});
    CHECK(M.pow(0) == IntMat2{});
}

TEST_CASE("flow_reduced agrees with reducing the plain flow")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    const LatticeSpec L{1};
    const HeisPoint g{0.2, 0.7, 0.1};
    for (double t : {0.0, 0.5, -3.0, 17.25, 250.0}) {
        const ReducedPoint a = flow_reduced(g, t, A, L);
        const ReducedPoint b = reduce(flow(g, t, A), L);
        CHECK(quotient_distance(a.rep, b.rep, L) < 1e-10);
    }
}

TEST_CASE("reduce_aut agrees with reduce of apply_aut")
{
    const Automorphism A = stable_generator(2, 1, 3, 2);
    const LatticeSpec L{1};
    const HeisPoint g{0.31, 0.62, 0.4};
    for (int k = 0; k <= 6; ++k) {
        const IntMat2 M = A.A.pow(k);
        const HeisPoint direct = apply_aut(M, g);
        CHECK(quotient_distance(reduce_aut(M, g, L).rep, direct, L) < 1e-9);
    }
}

TEST_CASE("counter rng is reproducible and addressable")
{
    CounterRng a(42), b(42), c(43);
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
    CHECK(CounterRng(42).at(5) == [] {
        CounterRng r(42);
        for (int i = 0; i < 5; ++i) r.next_u64();
        return r.next_u64();
    }());
    CounterRng u(1);
    for (int i = 0; i < 1000; ++i) {
        const double v = u.uniform();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}
