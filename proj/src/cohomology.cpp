#include "nilab/cohomology.hpp"
#include "nilab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "nilab/ergodic.hpp"
#include "nilab/jet.hpp"

namespace nilab {

namespace {

template <class V>
V chi_t(const V& t)
{
    return V(1.0) - smooth_step_t(V(2.0) * t - V(1.0));
}

using JetW = Jet<kWindowTaylorOrder>;

} // namespace

BumpPair::BumpPair(double lam) : lambda(lam)
{
    if (!(lam > 1.0)) throw std::invalid_argument("BumpPair: lambda must exceed 1");
    Window w{[lam](double t) { return chi_t(t / lam) - chi_t(t); }, 0.5, lam, {}};
    w.taylor = [lam](double t, double* c) {
        const JetW x = JetW::variable(t);
        const JetW v = chi_t(x / JetW(lam)) - chi_t(x);
        std::copy(v.c.begin(), v.c.end(), c);
    };
    phi_tab = tabulate_taylor(w, 2e-3);
}

double BumpPair::chi(double t) const { return 1.0 - smooth_step(2.0 * t - 1.0); }

double BumpPair::phi(double t) const { return chi(t / lambda) - chi(t); }

Window BumpPair::chi_window(double L) const
{
    // chi is 1 at the left end, so there is no Taylor data
    return {[L](double t) { return chi_t(t / L); }, 0.0, L, {}};
}

double BumpPair::chi_mass() const
{
    QuadratureSpec q;
    q.tol = 1e-14;
    return 0.5 + integrate([this](double t) { return std::complex<double>(chi(t)); }, 0.5, 1.0, q).value.real();
}

namespace {

QuadratureSpec scaled(const QuadratureSpec& q, double lambda, int k)
{
    QuadratureSpec r = q;
    r.tol = q.tol * std::pow(lambda, k);
    r.panel = q.panel * std::pow(lambda, -k);
    return r;
}

} // namespace

QuadResult K_op(const Observable& h, const Automorphism& A, const HeisPoint& x, const BumpPair& bp,
                const QuadratureSpec& q)
{
    return smoothed_integral(h, A, x, bp.phi_window(), q);
}

QuadResult G_tilde(const Observable& h, const Automorphism& A, const HeisPoint& x, const BumpPair& bp,
                   const QuadratureSpec& q)
{
    return smoothed_integral(h, A, x, bp.chi_window(), q);
}

QuadResult G_k(const Observable& h, const Automorphism& A, int k, const HeisPoint& x, const BumpPair& bp,
               const QuadratureSpec& q)
{
    if (k < 0) throw std::invalid_argument("G_k: k must be nonnegative");
    if (k == 0) return K_op(h, A, x, bp, q);
    const Observable hk = transfer(h, A, k);
    const HeisPoint xk = reduce_aut(A.A.pow(k), x, h.lattice).rep;
    return window_integral(hk, A, xk, bp.phi_window(), scaled(q, A.lambda, k));
}

PartialSumCheck partial_sum_identity(const Observable& h, const Automorphism& A, const HeisPoint& x, int n,
                                     const BumpPair& bp, const QuadratureSpec& q)
{
    if (n < 0) throw std::invalid_argument("partial_sum_identity: n must be nonnegative");
    PartialSumCheck out;
    const double L = std::pow(bp.lambda, n);
    const Window w = bp.chi_window(L);
    out.lhs = smoothed_integral(h, A, x, w, q).value;
    out.rhs = G_tilde(h, A, x, bp, q).value;
    for (int k = 0; k < n; ++k) out.rhs += G_k(h, A, k, x, bp, q).value;
    out.defect = std::abs(out.lhs - out.rhs);
    return out;
}

std::string to_string(Verdict v)
{
    switch (v) {
    case Verdict::converged: return "converged";
    case Verdict::diverged: return "diverged";
    default: return "inconclusive";
    }
}

namespace {

// Per-mode values at the z = 0 lift of each distinct (x,y); the full value at a site
// follows from the central equivariance of every term.
struct ModeGrid {
    std::vector<std::pair<double, double>> base;
    std::vector<int> site_base;
};

ModeGrid distinct_bases(const std::vector<HeisPoint>& sites)
{
    ModeGrid m;
    std::map<std::pair<double, double>, int> idx;
    for (const auto& s : sites) {
        const auto key = std::make_pair(s.x, s.y);
        auto it = idx.find(key);
        if (it == idx.end()) {
            it = idx.emplace(key, static_cast<int>(m.base.size())).first;
            m.base.push_back(key);
        }
        m.site_base.push_back(it->second);
    }
    return m;
}

double geometric_ratio(const std::vector<double>& terms)
{
    // least squares of ln term on k over the second half of the history, ignoring exact zeros
    const std::size_t from = terms.size() / 2;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t k = from; k < terms.size(); ++k) {
        if (!(terms[k] > 0.0)) continue;
        const double x = static_cast<double>(k), y = std::log(terms[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 2) return 0.0;
    return std::exp((sxy - sx * sy / n) / (sxx - sx * sx / n));
}

} // namespace

CoboundarySolution solve(const Observable& h, const Automorphism& A, const std::vector<HeisPoint>& sites, int kmax,
                         double tol, const BumpPair& bp, const QuadratureSpec& q, int jobs)
{
    if (std::abs(mean(h)) > 1e-12)
        throw std::invalid_argument("solve: mean(h) is nonzero, the constant is an obstruction");
    if (kmax < 0) throw std::invalid_argument("solve: kmax must be nonnegative");
    CoboundarySolution out;
    out.sites = sites;
    const ModeGrid mg = distinct_bases(sites);
    const std::size_t nb = mg.base.size();
    // acc[mode][base]
    std::vector<std::vector<std::complex<double>>> acc(h.modes.size(), std::vector<std::complex<double>>(nb, 0.0));
    std::vector<Observable> single;
    for (const auto& m : h.modes) {
        Observable o;
        o.lattice = h.lattice;
        o.modes.push_back(m);
        single.push_back(std::move(o));
    }
    parallel_for(nb, jobs, [&](std::size_t b) {
        for (std::size_t i = 0; i < single.size(); ++i)
            acc[i][b] = -G_tilde(single[i], A, {mg.base[b].first, mg.base[b].second, 0.0}, bp, q).value;
    });

    auto site_value = [&](const std::vector<std::vector<std::complex<double>>>& per, std::size_t s) {
        std::complex<double> v = 0.0;
        for (std::size_t i = 0; i < single.size(); ++i) {
            double ph = static_cast<double>(h.lattice.E) * h.modes[i].N * sites[s].z;
            ph -= std::floor(ph);
            v += per[i][mg.site_base[s]] * std::polar(1.0, 2.0 * 3.14159265358979323846 * ph);
        }
        return v;
    };

    int below = 0, growing = 0;
    bool tail_met = false, diverged = false;
    int k = 0;
    for (; k <= kmax; ++k) {
        std::vector<std::vector<std::complex<double>>> term(single.size(), std::vector<std::complex<double>>(nb, 0.0));
        // G_k at the z = 0 lift
        parallel_for(nb, jobs, [&](std::size_t b) {
            for (std::size_t i = 0; i < single.size(); ++i) {
                term[i][b] = G_k(single[i], A, k, {mg.base[b].first, mg.base[b].second, 0.0}, bp, q).value;
                acc[i][b] -= term[i][b];
            }
        });
        double sup = 0.0;
        for (std::size_t s = 0; s < sites.size(); ++s) sup = std::max(sup, std::abs(site_value(term, s)));
        if (!out.term_history.empty() && sup > out.term_history.back())
            ++growing;
        else
            growing = 0;
        out.term_history.push_back(sup);
        below = sup < tol ? below + 1 : 0;
        if (below >= 3) {
            tail_met = true;
            break;
        }
        if (k >= 5 && growing >= 5) {
            diverged = true;
            break;
        }
    }
    out.kmax_used = std::min(k, kmax);
    out.ratio = geometric_ratio(out.term_history);
    if (diverged)
        out.verdict = Verdict::diverged;
    else if (tail_met && out.ratio < 0.95)
        out.verdict = Verdict::converged;
    else
        out.verdict = Verdict::inconclusive;
    for (std::size_t s = 0; s < sites.size(); ++s) out.g_values.push_back(site_value(acc, s));
    return out;
}

std::complex<double> solve_point(const Observable& h, const Automorphism& A, const HeisPoint& x, int kmax, double tol,
                                 const BumpPair& bp, const QuadratureSpec& q)
{
    return solve(h, A, {x}, kmax, tol, bp, q).g_values.front();
}

double verify_coboundary(const std::function<std::complex<double>(const HeisPoint&)>& g, const Observable& h,
                         const Automorphism& A, const std::vector<FlowSample>& samples, const QuadratureSpec& q)
{
    double worst = 0.0;
    for (const auto& s : samples) {
        const std::complex<double> H = ergodic_integral_direct(h, A, s.x, s.t, q).value;
        const std::complex<double> d = g(flow(s.x, s.t, A)) - g(s.x) - H;
        worst = std::max(worst, std::abs(d));
    }
    return worst;
}

} // namespace nilab
