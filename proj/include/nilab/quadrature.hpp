#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

namespace nilab {

struct QuadratureSpec {
    int order = 16;
    double panel = 0.25;
    double tol = 1e-10;   // absolute error target per unit length
    int max_depth = 12;   // bisection depth per panel
    // Theta atoms narrower than this along the orbit are summed crossing by crossing in
    // closed form when the window carries Taylor data; 0 forces plain quadrature.
    double crossing_width = 5e-3;
};

struct QuadResult {
    std::complex<double> value = 0.0;
    double error = 0.0;
    std::int64_t evals = 0;
    bool converged = true;
    bool roundoff_limited = false;   // refinement stopped because the estimate hit the noise floor
};

// Gauss-Legendre nodes and weights on [-1,1], cached per order.
struct GaussRule {
    std::vector<double> x, w;
    // rows of (2k+1)/2 P_k(x_i) w_i for the two highest k, used by the error estimate
    std::vector<double> top1, top2;
};
const GaussRule& gauss_rule(int order);

using CFunc = std::function<std::complex<double>(double)>;

// Composite rule on [a,b] with panels no longer than panel_length; each panel
// is bisected while its trailing Legendre coefficients exceed the tolerance.
QuadResult integrate(const CFunc& f, double a, double b, const QuadratureSpec& q, double panel_length);
inline QuadResult integrate(const CFunc& f, double a, double b, const QuadratureSpec& q)
{
    return integrate(f, a, b, q, q.panel);
}

} // namespace nilab
