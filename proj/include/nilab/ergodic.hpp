#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "nilab/heis.hpp"
#include "nilab/observables.hpp"
#include "nilab/quadrature.hpp"

namespace nilab {

inline constexpr int kWindowTaylorOrder = 10;

// Compactly supported weight on [a,b]. taylor(s, c) fills c[0..kWindowTaylorOrder] with the
// Taylor coefficients at s; set it only for weights that vanish to all orders at a and b.
struct Window {
    std::function<double(double)> f;
    double a = 0.0;
    double b = 0.0;
    std::function<void(double, double*)> taylor;
};

// Same window with Taylor data read from a table on a grid of the given spacing and shifted
// to the query point; the order-10 shift error is about |w^(11)| (spacing/2)^11 / 11!.
Window tabulate_taylor(const Window& w, double spacing);

// int w(s) h(flow(y,s)) ds. Narrow theta atoms use the closed-form crossing sum when
// w.taylor is set, the rest of h goes through quadrature. evals counts both integrand
// evaluations and crossing terms.
QuadResult window_integral(const Observable& h, const Automorphism& A, const HeisPoint& y, const Window& w,
                           const QuadratureSpec& q);

// Crossing sum alone for one atom of mode D.
QuadResult atom_crossing_integral(const ThetaAtom& atom, int D, const Automorphism& A, const HeisPoint& y,
                                  const Window& w);

// Width along the orbit of the Gaussian profile of an atom, 1/sqrt(2 pi u^T Q u).
double crossing_sigma(const ThetaAtom& atom, const Automorphism& A);

// int_0^t h(flow(x,r)) dr
QuadResult ergodic_integral_direct(const Observable& h, const Automorphism& A, const HeisPoint& x, double t,
                                   const QuadratureSpec& q);

// int phi(t) h(flow(x,t)) dt over the support of phi
QuadResult smoothed_integral(const Observable& h, const Automorphism& A, const HeisPoint& x, const Window& phi,
                             const QuadratureSpec& q);

// The same integral over [0, lambda^{-k} t] for lambda^k h o F^{-k}, started at F^k x.
QuadResult renormalized_integral(const Observable& h, const Automorphism& A, const HeisPoint& x, double t, int k,
                                 const QuadratureSpec& q);

// Window rescaled to t -> phi(lambda^k t).
QuadResult renormalized_smoothed(const Observable& h, const Automorphism& A, const HeisPoint& x, const Window& phi,
                                 int k, const QuadratureSpec& q);

// Smallest k >= 0 with lambda^{-k} t < lambda.
int renorm_level(double lambda, double t);

// Smooth step: 0 for t <= 0, 1 for t >= 1, built from exp(-1/t).
double smooth_step(double t);

// Zooming partition of [0,T] into 2n+1 pieces that refine toward both end points.
class ZoomPartition {
public:
    ZoomPartition(double T, int n);

    double T() const { return T_; }
    int n() const { return n_; }

    double eta_k(int k, double t) const;
    double phi(int k, double t) const;
    // Interval outside which phi_k vanishes.
    std::pair<double, double> support(int k) const;
    Window window(int k) const;
    // sup over samples of |d^q/ds^q phi_k(sigma_k(s))|, sigma_k(s) = s 4^{-|k|} T, 0 <= q <= 4
    double scaled_derivative_sup(int k, int q, int samples = 2000) const;

private:
    double T_;
    int n_;
};

struct DecompPiece {
    int k = 0;
    int m = 0;
    std::complex<double> value = 0.0;
    std::int64_t evals = 0;
};

struct Decomposition {
    std::complex<double> value = 0.0;
    double boundary_bound = 0.0;
    int N = 0;
    std::int64_t evals = 0;
    std::vector<DecompPiece> pieces;
};

// Sum of the renormalized smoothed pieces |k| < N = floor(ln T / ln 4); the two end pieces
// are omitted and covered by boundary_bound = 2 sup|h|. hsup < 0 means estimate it by sampling.
Decomposition smooth_decomposition(const Observable& h, const Automorphism& A, const HeisPoint& x, double T,
                                   const QuadratureSpec& q, double hsup = -1.0);

struct DeviationSample {
    double t = 0.0;
    std::complex<double> H = 0.0;
    int k = 0;
    std::int64_t evals = 0;
};

struct DeviationFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double t_min = 0.0;   // fit window
    double t_max = 0.0;
    std::vector<DeviationSample> samples;
};

std::vector<double> geometric_grid(double t0, double t1, int n);

// H(t) on the grid, accumulated over consecutive grid intervals (k and evals refer to the
// increment ending at t). Least squares of ln|H| on ln t over grid points t >= fit_from (default: ten times the
// smallest grid point). The mean of h is removed first when subtract_mean is set.
DeviationFit deviation_fit(const Observable& h, const Automorphism& A, const HeisPoint& x,
                           const std::vector<double>& t_grid, const QuadratureSpec& q, bool subtract_mean = true,
                           double fit_from = -1.0);

} // namespace nilab
