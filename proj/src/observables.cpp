#include "nilab/observables.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace nilab {

namespace {

constexpr double kPi = 3.14159265358979323846;
// terms with Gaussian exponent above this are below 1e-20 and skipped
constexpr double kSkipExponent = 46.0;

double min_eig(double q11, double q12, double q22)
{
    const double m = 0.5 * (q11 + q22);
    const double r = std::sqrt(0.25 * (q11 - q22) * (q11 - q22) + q12 * q12);
    return m - r;
}

} // namespace

ThetaAtom ThetaAtom::make(double cx, double cy, double q11, double q12, double q22, cplx coeff)
{
    if (!(q11 > 0.0) || !(q11 * q22 - q12 * q12 > 0.0))
        throw std::invalid_argument("ThetaAtom: quad must be positive definite");
    ThetaAtom a;
    a.c0[0] = cx;
    a.c0[1] = cy;
    a.q0[0] = q11;
    a.q0[1] = q12;
    a.q0[2] = q22;
    a.coeff = coeff;
    return a;
}

std::pair<double, double> ThetaAtom::center() const
{
    const double x = static_cast<double>(frame.a) * c0[0] + static_cast<double>(frame.b) * c0[1];
    const double y = static_cast<double>(frame.c) * c0[0] + static_cast<double>(frame.d) * c0[1];
    return {x, y};
}

void ThetaAtom::quad(double& q11, double& q12, double& q22) const
{
    // M^{-T} Q0 M^{-1} with M^{-1} = [[d,-b],[-c,a]]
    const IntMat2 Mi = frame.inverse();
    const double a = static_cast<double>(Mi.a), b = static_cast<double>(Mi.b);
    const double c = static_cast<double>(Mi.c), d = static_cast<double>(Mi.d);
    // columns of M^{-1}: (a,c), (b,d)
    auto form = [&](double u1, double u2, double v1, double v2) {
        return u1 * (q0[0] * v1 + q0[1] * v2) + u2 * (q0[1] * v1 + q0[2] * v2);
    };
    q11 = form(a, c, a, c);
    q12 = form(a, c, b, d);
    q22 = form(b, d, b, d);
}

double ModeObservable::tail_bound() const
{
    double worst = 0.0;
    for (const auto& a : atoms) {
        const double mu = min_eig(a.q0[0], a.q0[1], a.q0[2]);
        double s = 0.0;
        for (int n = truncation_radius + 1; n <= truncation_radius + 60; ++n) {
            const double rad = n - 0.5;
            s += 8.0 * n * std::exp(-kPi * mu * rad * rad);
        }
        worst = std::max(worst, s * std::abs(a.coeff));
    }
    return worst;
}

Observable Observable::constant(cplx c, LatticeSpec L)
{
    Observable h;
    h.lattice = L;
    ModeObservable m;
    m.N = 0;
    m.fourier[{0, 0}] = c;
    h.modes.push_back(m);
    return h;
}

Observable Observable::zero(LatticeSpec L)
{
    Observable h;
    h.lattice = L;
    return h;
}

namespace {

cplx poly_eval(const Poly2& P, double w0, double w1)
{
    cplx out = 0.0;
    for (const auto& [e, c] : P) {
        double m = 1.0;
        for (int i = 0; i < e.first; ++i) m *= w0;
        for (int j = 0; j < e.second; ++j) m *= w1;
        out += c * m;
    }
    return out;
}

cplx eval_atom(const ThetaAtom& a, const HeisPoint& g, int D, int R)
{
    const IntMat2 Mi = a.frame.inverse();
    // u = M^{-1} (x,y)
    const double u0 = static_cast<double>(Mi.a) * g.x + static_cast<double>(Mi.b) * g.y;
    const double u1 = static_cast<double>(Mi.c) * g.x + static_cast<double>(Mi.d) * g.y;
    const double s0 = a.c0[0] - u0, s1 = a.c0[1] - u1;
    const long long m0c = std::llround(s0), m1c = std::llround(s1);
    const double Q11 = a.q0[0], Q12 = a.q0[1], Q22 = a.q0[2];
    const bool odd_D = (D % 2) != 0;
    const bool has_poly = !a.poly.empty();
    cplx sum = 0.0;
    for (long long i = -R; i <= R; ++i) {
        const long long m0 = m0c + i;
        const double w0 = static_cast<double>(m0) - s0;
        // restrict j to the window where the exponent can stay below the skip level
        const double lin = Q12 * w0, quad0 = Q11 * w0 * w0;
        const double disc = lin * lin - Q22 * (quad0 - kSkipExponent / kPi);
        if (disc < 0.0) continue;
        const double sq = std::sqrt(disc);
        const double w1lo = (-lin - sq) / Q22, w1hi = (-lin + sq) / Q22;
        const long long jlo = std::max<long long>(-R, static_cast<long long>(std::ceil(w1lo + s1)) - m1c);
        const long long jhi = std::min<long long>(R, static_cast<long long>(std::floor(w1hi + s1)) - m1c);
        for (long long j = jlo; j <= jhi; ++j) {
            const long long m1 = m1c + j;
            const double w1 = static_cast<double>(m1) - s1;
            const double ex = kPi * (quad0 + 2.0 * lin * w1 + Q22 * w1 * w1);
            if (ex > kSkipExponent) continue;
            const std::int64_t p = a.frame.a * m0 + a.frame.b * m1;
            const std::int64_t q = a.frame.c * m0 + a.frame.d * m1;
            double ph = D * (g.z + 0.5 * (static_cast<double>(p) * g.y - static_cast<double>(q) * g.x));
            // exp(-i pi D p q) = (-1)^{D p q}
            if (odd_D && (p & 1) && (q & 1)) ph += 0.5;
            ph -= std::floor(ph);
            const double th = 2.0 * kPi * ph;
            cplx term = std::exp(-ex) * cplx(std::cos(th), std::sin(th));
            if (has_poly) term *= poly_eval(a.poly, w0, w1);
            sum += term;
        }
    }
    return a.coeff * sum;
}

} // namespace

cplx eval(const ModeObservable& m, const HeisPoint& g, const LatticeSpec& L)
{
    cplx out = 0.0;
    if (m.N == 0) {
        for (const auto& [k, c] : m.fourier) {
            double ph = static_cast<double>(k.first) * g.x + static_cast<double>(k.second) * g.y;
            ph -= std::floor(ph);
            const double th = 2.0 * kPi * ph;
            out += c * cplx(std::cos(th), std::sin(th));
        }
        return out;
    }
    const int D = L.E * m.N;
    for (const auto& a : m.atoms) out += eval_atom(a, g, D, m.truncation_radius);
    return out;
}

cplx eval(const Observable& h, const HeisPoint& g)
{
    cplx out = 0.0;
    for (const auto& m : h.modes) out += eval(m, g, h.lattice);
    return out;
}

Observable transfer(const Observable& h, const Automorphism& A, int k)
{
    if (!preserves_lattice(A, h.lattice))
        throw std::invalid_argument("transfer: automorphism does not preserve the lattice");
    if (k == 0) return h;
    const IntMat2 Ak = A.A.pow(k);
    const IntMat2 AkinvT = A.A.pow(-k).transpose();
    const double scale = std::pow(A.lambda, k);
    Observable out;
    out.lattice = h.lattice;
    for (const auto& m : h.modes) {
        ModeObservable nm;
        nm.N = m.N;
        nm.truncation_radius = m.truncation_radius;
        for (const auto& a : m.atoms) {
            ThetaAtom b = a;
            b.frame = Ak * a.frame;
            b.coeff = a.coeff * scale;
            if (std::abs(b.coeff) < 1e-14) continue;
            nm.atoms.push_back(b);
        }
        for (const auto& [key, c] : m.fourier) {
            const long long mm = AkinvT.a * key.first + AkinvT.b * key.second;
            const long long nn = AkinvT.c * key.first + AkinvT.d * key.second;
            nm.fourier[{mm, nn}] += c * scale;
        }
        out.modes.push_back(std::move(nm));
    }
    return out;
}

cplx mean(const Observable& h)
{
    for (const auto& m : h.modes) {
        if (m.N != 0) continue;
        auto it = m.fourier.find({0, 0});
        if (it != m.fourier.end()) return it->second;
    }
    return 0.0;
}

cplx wgrad(const Observable& h, const HeisPoint& g, const Automorphism& A, double step)
{
    static const double w[3] = {45.0, -9.0, 1.0};
    cplx acc = 0.0;
    for (int i = 1; i <= 3; ++i) {
        const double t = i * step;
        acc += w[i - 1] * (eval(h, flow(g, t, A)) - eval(h, flow(g, -t, A)));
    }
    return acc / (60.0 * step);
}

Observable mode_project(const Observable& h, int N)
{
    Observable out;
    out.lattice = h.lattice;
    for (const auto& m : h.modes)
        if (m.N == N) out.modes.push_back(m);
    return out;
}

namespace {

void poly_add(Poly2& P, int i, int j, cplx c)
{
    if (c == cplx(0.0)) return;
    P[{i, j}] += c;
}

} // namespace

Observable apply_W(const Observable& h, const Automorphism& A)
{
    const double al = A.alpha, be = A.beta;
    Observable out;
    out.lattice = h.lattice;
    for (const auto& m : h.modes) {
        ModeObservable nm;
        nm.N = m.N;
        nm.truncation_radius = m.truncation_radius;
        const int D = h.lattice.E * m.N;
        for (const auto& a : m.atoms) {
            if (!(a.frame == IntMat2{})) throw std::invalid_argument("apply_W: atom frame must be the identity");
            Poly2 P = a.poly;
            if (P.empty()) P[{0, 0}] = 1.0;
            // W(P E) = [d_W P - 2 pi (omega^T Q w) P + pi i D (beta x - alpha y) P] E, (x,y) = w + c0
            const double l0 = -2.0 * kPi * (al * a.q0[0] + be * a.q0[1]);
            const double l1 = -2.0 * kPi * (al * a.q0[1] + be * a.q0[2]);
            const cplx iD(0.0, kPi * D);
            const cplx k0 = iD * (be * a.c0[0] - al * a.c0[1]);
            Poly2 R;
            for (const auto& [e, c] : P) {
                const int i = e.first, j = e.second;
                if (i > 0) poly_add(R, i - 1, j, c * (al * i));
                if (j > 0) poly_add(R, i, j - 1, c * (be * j));
                poly_add(R, i + 1, j, c * (l0 + iD * be));
                poly_add(R, i, j + 1, c * (l1 - iD * al));
                poly_add(R, i, j, c * k0);
            }
            ThetaAtom b = a;
            b.poly = R;
            nm.atoms.push_back(b);
        }
        for (const auto& [key, c] : m.fourier) {
            const cplx f = cplx(0.0, 2.0 * kPi) * (static_cast<double>(key.first) * al + static_cast<double>(key.second) * be);
            if (f * c != cplx(0.0)) nm.fourier[key] = f * c;
        }
        out.modes.push_back(std::move(nm));
    }
    return out;
}

double sup_norm(const Observable& h, int n)
{
    const int nz = h.modes.size() > 1 ? 16 : 1;
    double best = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < nz; ++k) {
                const HeisPoint g{(i + 0.5) / n, (j + 0.5) / n, static_cast<double>(k) / (nz * h.lattice.E)};
                best = std::max(best, std::abs(eval(h, g)));
            }
    return best;
}

Observable combine(cplx a, const Observable& h1, cplx b, const Observable& h2)
{
    if (h1.lattice.E != h2.lattice.E && !h1.modes.empty() && !h2.modes.empty())
        throw std::invalid_argument("combine: lattice mismatch");
    Observable out;
    out.lattice = h1.modes.empty() ? h2.lattice : h1.lattice;
    auto add = [&](cplx s, const Observable& h) {
        for (const auto& m : h.modes) {
            auto it = std::find_if(out.modes.begin(), out.modes.end(), [&](const ModeObservable& o) { return o.N == m.N; });
            if (it == out.modes.end()) {
                ModeObservable nm;
                nm.N = m.N;
                nm.truncation_radius = m.truncation_radius;
                out.modes.push_back(nm);
                it = out.modes.end() - 1;
            }
            it->truncation_radius = std::max(it->truncation_radius, m.truncation_radius);
            for (auto at : m.atoms) {
                at.coeff *= s;
                it->atoms.push_back(at);
            }
            for (const auto& [key, c] : m.fourier) it->fourier[key] += s * c;
        }
    };
    add(a, h1);
    add(b, h2);
    return out;
}

// ---- JSON ----

namespace {

using nlohmann::json;

json cplx_json(cplx c) { return json::array({c.real(), c.imag()}); }

cplx json_cplx(const json& j)
{
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2) return {j[0].get<double>(), j[1].get<double>()};
    if (j.is_object()) return {j.value("re", 0.0), j.value("im", 0.0)};
    throw std::invalid_argument("observable: coeff must be a number, [re,im] or {re,im}");
}

} // namespace

std::string observable_to_json(const Observable& h, int indent)
{
    json doc;
    doc["lattice_E"] = h.lattice.E;
    doc["modes"] = json::array();
    for (const auto& m : h.modes) {
        json jm;
        jm["N"] = m.N;
        jm["truncation_radius"] = m.truncation_radius;
        jm["atoms"] = json::array();
        for (const auto& a : m.atoms) {
            auto [cx, cy] = a.center();
            double q11, q12, q22;
            a.quad(q11, q12, q22);
            json ja;
            ja["center"] = {cx, cy};
            ja["quad"] = {{q11, q12}, {q12, q22}};
            ja["coeff"] = cplx_json(a.coeff);
            if (!a.poly.empty()) {
                ja["poly"] = json::array();
                for (const auto& [e, c] : a.poly) ja["poly"].push_back({{"i", e.first}, {"j", e.second}, {"coeff", cplx_json(c)}});
            }
            if (!(a.frame == IntMat2{})) {
                ja["frame"] = {{a.frame.a, a.frame.b}, {a.frame.c, a.frame.d}};
                ja["frame_center"] = {a.c0[0], a.c0[1]};
                ja["frame_quad"] = {{a.q0[0], a.q0[1]}, {a.q0[1], a.q0[2]}};
            }
            jm["atoms"].push_back(ja);
        }
        jm["fourier"] = json::array();
        for (const auto& [k, c] : m.fourier) jm["fourier"].push_back({{"m", k.first}, {"n", k.second}, {"coeff", cplx_json(c)}});
        doc["modes"].push_back(jm);
    }
    return doc.dump(indent);
}

Observable observable_from_json(const std::string& text)
{
    const json doc = json::parse(text);
    Observable h;
    h.lattice.E = doc.value("lattice_E", 1);
    if (h.lattice.E < 1) throw std::invalid_argument("observable: lattice_E must be >= 1");
    const int default_R = doc.value("truncation_radius", 5);
    for (const auto& jm : doc.at("modes")) {
        ModeObservable m;
        m.N = jm.at("N").get<int>();
        m.truncation_radius = jm.value("truncation_radius", default_R);
        if (m.truncation_radius < 0) throw std::invalid_argument("observable: truncation_radius must be >= 0");
        if (jm.contains("atoms")) {
            for (const auto& ja : jm["atoms"]) {
                if (m.N == 0) throw std::invalid_argument("observable: atoms are only allowed for N != 0");
                ThetaAtom a;
                if (ja.contains("frame")) {
                    const auto& F = ja["frame"];
                    a.frame = {F[0][0].get<long long>(), F[0][1].get<long long>(), F[1][0].get<long long>(),
                               F[1][1].get<long long>()};
                    if (a.frame.det() != 1) throw std::invalid_argument("observable: atom frame must have det 1");
                    const auto& c = ja.at("frame_center");
                    const auto& q = ja.at("frame_quad");
                    a = ThetaAtom::make(c[0].get<double>(), c[1].get<double>(), q[0][0].get<double>(),
                                        q[0][1].get<double>(), q[1][1].get<double>(), json_cplx(ja.at("coeff")));
                    a.frame = {F[0][0].get<long long>(), F[0][1].get<long long>(), F[1][0].get<long long>(),
                               F[1][1].get<long long>()};
                } else {
                    const auto& c = ja.at("center");
                    const auto& q = ja.at("quad");
                    a = ThetaAtom::make(c[0].get<double>(), c[1].get<double>(), q[0][0].get<double>(),
                                        q[0][1].get<double>(), q[1][1].get<double>(), json_cplx(ja.at("coeff")));
                }
                if (ja.contains("poly"))
                    for (const auto& jp : ja["poly"])
                        a.poly[{jp.at("i").get<int>(), jp.at("j").get<int>()}] += json_cplx(jp.at("coeff"));
                m.atoms.push_back(a);
            }
        }
        if (jm.contains("fourier")) {
            for (const auto& jf : jm["fourier"]) {
                if (m.N != 0) throw std::invalid_argument("observable: fourier terms are only allowed for N = 0");
                m.fourier[{jf.at("m").get<long long>(), jf.at("n").get<long long>()}] += json_cplx(jf.at("coeff"));
            }
        }
        for (const auto& o : h.modes)
            if (o.N == m.N) throw std::invalid_argument("observable: duplicate mode N");
        h.modes.push_back(std::move(m));
    }
    return h;
}

Observable load_observable(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open observable file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return observable_from_json(ss.str());
}

} // namespace nilab
