#pragma once

#include <cstdint>

namespace nilab {

// Point of the Heisenberg group in symplectic coordinates:
// (x,y,z)*(a,b,c) = (x+a, y+b, z+c+(xb-ya)/2).
struct HeisPoint {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

struct LatticeSpec {
    int E = 1;
};

struct IntMat2 {
    std::int64_t a = 1, b = 0, c = 0, d = 1;

    std::int64_t det() const { return a * d - b * c; }
    std::int64_t trace() const { return a + d; }
    IntMat2 operator*(const IntMat2& o) const;
    // Inverse of a determinant-one matrix.
    IntMat2 inverse() const;
    IntMat2 transpose() const { return {a, c, b, d}; }
    // k may be negative; requires det = 1 in that case.
    IntMat2 pow(int k) const;
    bool operator==(const IntMat2& o) const = default;
};

struct Automorphism {
    IntMat2 A;
    double lambda = 0.0;
    double alpha = 0.0;   // unit stable eigenvector, A(alpha,beta) = (alpha,beta)/lambda
    double beta = 0.0;
    double h_top = 0.0;
};

// Representative in the fundamental domain x,y in [0,1), z+xy/2 in [0,1/E)
// together with the polarized lattice element (p,q,r/E) that was applied on the left.
struct ReducedPoint {
    HeisPoint rep;
    std::int64_t p = 0, q = 0, r = 0;
};

HeisPoint mul(const HeisPoint& g, const HeisPoint& h);
HeisPoint inverse(const HeisPoint& g);

// z_polar = z + xy/2
HeisPoint to_polarized(const HeisPoint& g);
HeisPoint from_polarized(const HeisPoint& g);

bool is_lattice(const HeisPoint& g, const LatticeSpec& L, double tol = 1e-9);

// Lattice element with polarized coordinates (p, q, r/E), in symplectic form.
HeisPoint lattice_element(std::int64_t p, std::int64_t q, std::int64_t r, const LatticeSpec& L);

ReducedPoint reduce(const HeisPoint& g, const LatticeSpec& L);

// g * exp(tW) with W = alpha X + beta Y.
HeisPoint flow(const HeisPoint& g, double t, double alpha, double beta);
HeisPoint flow(const HeisPoint& g, double t, const Automorphism& A);

// reduce(flow(g, t)) for g in the fundamental domain, with the translation kept
// separate from the base point so that long orbits lose no central accuracy.
ReducedPoint flow_reduced(const HeisPoint& g, double t, const Automorphism& A, const LatticeSpec& L);

HeisPoint apply_aut(const IntMat2& M, const HeisPoint& g);
HeisPoint apply_aut(const Automorphism& A, const HeisPoint& g);
HeisPoint apply_aut_inv(const Automorphism& A, const HeisPoint& g);

// reduce(F_M(g)) with the integer products split exactly, so that the
// central coordinate stays accurate when M has large entries.
ReducedPoint reduce_aut(const IntMat2& M, const HeisPoint& g, const LatticeSpec& L);

bool preserves_lattice(const IntMat2& M, const LatticeSpec& L, double tol = 1e-9);
bool preserves_lattice(const Automorphism& A, const LatticeSpec& L, double tol = 1e-9);

// Throws std::invalid_argument unless det = 1 and trace > 2.
Automorphism stable_generator(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d);

// Distance between the classes of g and h in the quotient by the lattice:
// max-norm of polarized coordinate differences over nearby lattice translates.
double quotient_distance(const HeisPoint& g, const HeisPoint& h, const LatticeSpec& L);

double max_abs_diff(const HeisPoint& g, const HeisPoint& h);

} // namespace nilab
