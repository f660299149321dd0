#pragma once

#include <complex>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nilab/heis.hpp"

namespace nilab {

using cplx = std::complex<double>;

// Bivariate polynomial in (w1, w2), keyed by exponent pair.
using Poly2 = std::map<std::pair<int, int>, cplx>;

// Gaussian seed coeff * P(w) * exp(-pi w^T Q0 w), w = M^{-1} v - c0, on the plane.
// Plain atoms have P = 1 and M = identity. Transferred atoms keep the original
// data and accumulate the integer frame M, so that center = M c0 and
// quad = M^{-T} Q0 M^{-1}; evaluation works in the frame so long thin atoms stay exact.
struct ThetaAtom {
    double c0[2] = {0.0, 0.0};
    double q0[3] = {1.0, 0.0, 1.0};   // Q11, Q12, Q22 in frame coordinates
    cplx coeff = 1.0;
    IntMat2 frame;
    Poly2 poly;   // empty means P = 1

    static ThetaAtom make(double cx, double cy, double q11, double q12, double q22, cplx coeff);
    // Data in plane coordinates.
    std::pair<double, double> center() const;
    void quad(double& q11, double& q12, double& q22) const;
};

struct ModeObservable {
    int N = 0;
    std::vector<ThetaAtom> atoms;                          // N != 0
    std::map<std::pair<long long, long long>, cplx> fourier; // N == 0
    int truncation_radius = 5;

    // Bound on the Gaussian mass outside the truncation box, for one unit-coefficient atom.
    double tail_bound() const;
};

struct Observable {
    LatticeSpec lattice;
    std::vector<ModeObservable> modes;

    static Observable constant(cplx c, LatticeSpec L = {});
    static Observable zero(LatticeSpec L = {});
};

cplx eval(const ModeObservable& m, const HeisPoint& g, const LatticeSpec& L);
cplx eval(const Observable& h, const HeisPoint& g);

// The observable lambda^k h o F^{-k}.
Observable transfer(const Observable& h, const Automorphism& A, int k);

cplx mean(const Observable& h);

// Order-6 central difference of t -> h(flow(g,t)) at t = 0.
cplx wgrad(const Observable& h, const HeisPoint& g, const Automorphism& A, double step = 1e-3);

Observable mode_project(const Observable& h, int N);

// Exact derivative along the flow generator W, for atoms with identity frame.
Observable apply_W(const Observable& h, const Automorphism& A);

// Sampled sup of |h| over an n x n grid of the base torus, with 16 z-levels when several modes mix.
double sup_norm(const Observable& h, int n = 128);

// a*h1 + b*h2, merging modes with equal N
Observable combine(cplx a, const Observable& h1, cplx b, const Observable& h2);

// Observable documents: lattice_E, modes[] {N, atoms[] {center, quad, coeff}, fourier[] {m, n, coeff},
// truncation_radius}; transferred atoms also carry "frame".
std::string observable_to_json(const Observable& h, int indent = 2);
Observable observable_from_json(const std::string& text);
Observable load_observable(const std::string& path);

} // namespace nilab
