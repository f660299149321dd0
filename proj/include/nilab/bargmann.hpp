#pragma once

#include <complex>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nilab/ergodic.hpp"
#include "nilab/heis.hpp"
#include "nilab/observables.hpp"

namespace nilab {

// n uniform points lo, ..., hi
struct AxisGrid {
    double lo = 0.0;
    double hi = 0.0;
    int n = 0;
    double step() const { return n > 1 ? (hi - lo) / (n - 1) : 0.0; }
    double at(int i) const { return lo + step() * i; }
};

// Phase-space grid, the same in both coordinate directions.
struct PhaseGrid {
    AxisGrid x;
    AxisGrid xi;
    int per_axis() const { return x.n * xi.n; }
};

// Throws when the sample grid (step <= 0.25/sqrt N) or the phase grid (steps <= 0.5/sqrt N)
// does not resolve the Gaussian width.
void check_resolution(const AxisGrid& y, const PhaseGrid& pg, int N);

// B_N h(x, xi) = <phi_{x,xi}, h>, phi_{x,xi}(y) = sqrt(2N) exp(pi i N xi.(2y - x) - pi N |y - x|^2),
// for h sampled on y x y (samples(i1, i2) = h(y_i1, y_i2)). Row index ix1 * xi.n + ixi1, column
// likewise for the second coordinate.
Eigen::MatrixXcd bargmann_transform(const Eigen::MatrixXcd& samples, const AxisGrid& y, const PhaseGrid& pg, int N);

// <u, v> with the measure N^2 dx dxi.
std::complex<double> bargmann_inner(const Eigen::MatrixXcd& u, const Eigen::MatrixXcd& v, const PhaseGrid& pg, int N);

struct NormSettings {
    double r = 8.0;
    double chart_inner = 0.55;  // cutoff is 1 within this radius of the chart centre
    double chart_outer = 0.85;  // and 0 beyond this one
    double cx = 0.5, cy = 0.5;  // chart centre on the base torus
    AxisGrid y;                 // sample grid in chart coordinates
    PhaseGrid pg;
};

// Grids resolving mode N for the default chart.
NormSettings default_norm_settings(int N, double r = 8.0);

// Stable and unstable unit covectors (eigenvectors of A^T for 1/lambda and lambda).
std::pair<Eigen::Vector2d, Eigen::Vector2d> frequency_axes(const Automorphism& A);

// ||escape_weight * B h||_{L2}, with B the chart Bargmann transform (unitary dilation by sqrt 2
// around B_N) of h(x, y, 0) times the chart cutoff.
double anisotropic_norm(const ModeObservable& h, const LatticeSpec& L, const Automorphism& A, const NormSettings& s);

// sup_N max(|N|,1)^kappa ||h_N|| over a computed (N, norm) table.
double global_norm(const std::vector<std::pair<int, double>>& table, double kappa);

// N-th fibre mode of the lattice average of G(x,y) rho(z), G a unit Gaussian at (0.5, 0.5) and
// rho(z) = sum_n exp(-pi (z-n)^2 / w^2): a theta atom with coefficient w exp(-pi w^2 N^2).
ModeObservable smooth_family_member(int N, double w);

struct PairingReport {
    std::complex<double> pairing = 0.0;   // int_0^1 phi(s) h(flow(x,s)) ds
    double norm = 0.0;
    double phi_norm = 0.0;                // C^nu norm of phi
    double ratio = 0.0;
};

// Smooth bump on [0,1] with Taylor data.
Window unit_segment_window();

// max_{j <= nu} sup |phi^(j)|, from the window's Taylor data.
double window_cnu_norm(const Window& phi, int nu, int samples = 4001);

// Start of the unit stable segment centred on the chart centre; it lies inside the flat part of the cutoff.
HeisPoint chart_segment_start(const Automorphism& A, const NormSettings& s);

// Pairing of h against phi along the unit stable segment from x, over ||h|| ||phi||_{C^nu}.
PairingReport dual_pairing_bound(const ModeObservable& h, const LatticeSpec& L, const Automorphism& A,
                                 const HeisPoint& x, const Window& phi, const NormSettings& s, int nu = 2);

} // namespace nilab
