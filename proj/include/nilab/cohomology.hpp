#pragma once

#include <complex>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "nilab/ergodic.hpp"
#include "nilab/heis.hpp"
#include "nilab/observables.hpp"
#include "nilab/quadrature.hpp"

namespace nilab {

// chi = 1 on [0,1/2], 0 on [1,inf), decreasing; phi(t) = chi(t/lambda) - chi(t) lives on (1/2, lambda).
struct BumpPair {
    double lambda = 0.0;

    explicit BumpPair(double lam);
    double chi(double t) const;
    double phi(double t) const;
    // int_0^inf chi, computed by quadrature
    double chi_mass() const;
    // As windows with Taylor data; chi_window(L) is t -> chi(t/L) on [0, L].
    Window chi_window(double L = 1.0) const;
    Window phi_window() const { return phi_tab; }

private:
    Window phi_tab;   // Taylor data tabulated once
};

// (Kh)(x) = int phi(s) h(flow(x,s)) ds
QuadResult K_op(const Observable& h, const Automorphism& A, const HeisPoint& x, const BumpPair& bp,
                const QuadratureSpec& q);

// int chi(s) h(flow(x,s)) ds
QuadResult G_tilde(const Observable& h, const Automorphism& A, const HeisPoint& x, const BumpPair& bp,
                   const QuadratureSpec& q);

// (K F^k h)(F^k x), computed with the transferred observable and the exact automorphism reduction.
QuadResult G_k(const Observable& h, const Automorphism& A, int k, const HeisPoint& x, const BumpPair& bp,
               const QuadratureSpec& q);

struct PartialSumCheck {
    std::complex<double> lhs = 0.0;
    std::complex<double> rhs = 0.0;
    double defect = 0.0;
};

// int chi(lambda^{-n} t) h(flow(x,t)) dt against G~h(x) + sum_{k<n} G_k h(x).
PartialSumCheck partial_sum_identity(const Observable& h, const Automorphism& A, const HeisPoint& x, int n,
                                     const BumpPair& bp, const QuadratureSpec& q);

enum class Verdict { converged, diverged, inconclusive };
std::string to_string(Verdict v);

struct CoboundarySolution {
    std::vector<HeisPoint> sites;
    std::vector<std::complex<double>> g_values;
    std::vector<double> term_history;   // sup over sites of |G_k h|, k = 0, 1, ...
    Verdict verdict = Verdict::inconclusive;
    double ratio = 0.0;                 // fitted geometric ratio of the term tail
    int kmax_used = 0;
};

// g = -G~h - sum_k G_k h at each site. Sums stop once the site-sup of |G_k h| stays below
// tol for 3 consecutive k, or at kmax. Throws if mean(h) != 0. Base points are spread over jobs threads.
CoboundarySolution solve(const Observable& h, const Automorphism& A, const std::vector<HeisPoint>& sites, int kmax,
                         double tol, const BumpPair& bp, const QuadratureSpec& q, int jobs = 1);

// Pointwise solution at one site, same stopping rule.
std::complex<double> solve_point(const Observable& h, const Automorphism& A, const HeisPoint& x, int kmax, double tol,
                                 const BumpPair& bp, const QuadratureSpec& q);

struct FlowSample {
    HeisPoint x;
    double t = 0.0;
};

// max |g(flow(x,t)) - g(x) - int_0^t h(flow(x,r)) dr| over the samples
double verify_coboundary(const std::function<std::complex<double>(const HeisPoint&)>& g, const Observable& h,
                         const Automorphism& A, const std::vector<FlowSample>& samples, const QuadratureSpec& q);

} // namespace nilab
