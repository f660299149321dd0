#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nilab/ergodic.hpp"
#include "nilab/heis.hpp"
#include "nilab/observables.hpp"

namespace nilab {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

// ab = cd = 0 mod 2, needed for the quadratic-phase propagator.
bool parity_condition(const IntMat2& M);

// D x D metaplectic propagator of the linear map at inverse Planck parameter D.
CMatrix quantum_propagator(const Automorphism& A, int D);

enum class ResonanceSource { exact, numeric };
std::string to_string(ResonanceSource s);

struct Resonance {
    std::complex<double> value = 0.0;
    double modulus = 0.0;
    double phase = 0.0;
    int band = -1;   // -1: unassigned
    int multiplicity = 1;
};

struct ResonanceSet {
    std::vector<Resonance> items;   // descending modulus
    double lambda = 0.0;
    ResonanceSource source = ResonanceSource::exact;

    // counted with multiplicity
    int count_in_band(int k) const;
    int total() const;
    double unassigned_fraction() const;
};

// Band radius lambda^{1/2-k} of the lambda-weighted operator.
double band_radius(double lambda, int k);

// lambda^{1/2-k} e^{i phi_j} for the eigenphases of the propagator at D = E|N|, k = 0..kmax.
ResonanceSet resonances_exact(const Automorphism& A, int N, int E, int kmax);

// Sections of the degree-D line bundle: b(x+1,y) = e^{-pi i D y} b, b(x,y+1) = e^{pi i D x} b.
// Element (j, m), j mod D and m in [-cutoff, cutoff], is
//   e^{-pi i D x y} sum_l w_m(y - l - j/D) e^{2 pi i (j + l D) x}
// with w_m the Hermite function of order m + cutoff and width sigma = 1/sqrt(2 pi).
struct TwistedBasis {
    int D = 1;
    int cutoff = 1;
    double sigma = 0.0;

    int per_residue() const { return 2 * cutoff + 1; }
    int size() const { return D * per_residue(); }
    int index(int j, int m) const { return j * per_residue() + (m + cutoff); }
    std::complex<double> eval(int index, double x, double y) const;
    // Function on the nilmanifold: e^{2 pi i D z} b(x,y).
    std::complex<double> eval(int index, const HeisPoint& g) const;
    std::complex<double> eval(const CVector& coeffs, const HeisPoint& g) const;
};

TwistedBasis build_basis(int D, int cutoff);

// Hermite function of order n, L2-normalized, width sigma.
double hermite_function(int n, double s, double sigma);

// <sqrt(2 pi N) zeta_p>^{-r} <sqrt(2 pi N) zeta_q>^{r}, <s> = sqrt(1 + s^2); N = 0 is treated as 1.
double escape_weight(double r, int N, double zeta_p, double zeta_q);

struct TransferMatrix {
    CMatrix entries;
    TwistedBasis basis;
    double r = 0.0;
    Automorphism A;
    int N = 0;
    int E = 1;
    int grid = 0;   // torus samples per side
};

// Matrix of the lambda-weighted transfer operator on fibre mode N, taken against a dual basis
// carrying Japanese-bracket weights of order r in the normal coordinates of the transverse map.
// grid = 0 picks max(128, 64 D); a grid below four times the largest represented frequency
// throws. N = 0 gives the 1x1 matrix of the action on constants.
TransferMatrix transfer_matrix(const Automorphism& A, int N, int E, const TwistedBasis& basis, double r,
                               int grid = 0);

// Largest frequency the quadrature grid has to carry for this basis and map.
int max_represented_frequency(const Automorphism& A, const TwistedBasis& basis);

ResonanceSet resonances_numeric(const TransferMatrix& M, double band_tol);

struct BandComparison {
    int count_ref = 0;     // with multiplicity
    int count_other = 0;
    double max_modulus_rel = 0.0;   // |m - m_ref| / m_ref over nearest pairs
    double max_phase = 0.0;         // wrapped to [0, pi]
    double max_rel_distance = 0.0;  // |z - z_ref| / |z_ref|
};

// Each band item of other is paired with the nearest band item of ref.
BandComparison compare_band(const ResonanceSet& ref, const ResonanceSet& other, int band);

struct SpectralDecomposition {
    std::vector<std::complex<double>> xi;
    std::vector<CMatrix> P;
    std::vector<CMatrix> Q;
    std::vector<int> d;   // nilpotent order: Q^{d+1} = 0, Q^d != 0
    CMatrix P0;
    double eta = 0.0;
    double remainder_constant = 0.0;   // max_{n <= 10} |M^n P0| / eta^n
    double condition = 0.0;            // of the eigenvector matrix
};

SpectralDecomposition spectral_decomposition(const TransferMatrix& M, double eta);

// Largest defect among P_j P_k = delta P_j, P_j Q_k = Q_k P_j = delta Q_k, sum P + P0 = I.
double decomposition_defect(const SpectralDecomposition& dec);

// t^{-alpha_j} (ln t)^{-d_j} sum_k H_{x_k, phi_k}((xi_j P_j + Q_j)^{m_k} P_j h) over the zoom pieces
// |k| < n of [0,t], with h given by coefficients in the decomposition's basis (mode N, lattice E).
std::complex<double> deviation_functional(const CVector& coeffs, const HeisPoint& x, double t, int j,
                                          const SpectralDecomposition& dec, const TransferMatrix& M,
                                          const QuadratureSpec& q);

} // namespace nilab
