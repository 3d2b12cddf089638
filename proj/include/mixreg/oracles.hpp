#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "mixreg/errors.hpp"
#include "mixreg/estimator.hpp"
#include "mixreg/linalg.hpp"
#include "mixreg/model.hpp"
#include "mixreg/rng.hpp"
#include "mixreg/vec.hpp"

namespace mixreg::oracles {

inline constexpr double kPi = 3.14159265358979323846;

// alpha_(u,v) = arccos((v-u).(v+u) / (||u+v|| ||u-v||)), in [0, pi].
inline double cone_angle(std::span<const double> u, std::span<const double> v) {
    const double num = norm_sq(v) - norm_sq(u);
    const double den = norm(add(u, v)) * norm(sub(v, u));
    if (den < 1e-300)
        throw DegenerateEventError("cone_angle: u = +/-v, the conditioning event is degenerate");
    return std::acos(std::clamp(num / den, -1.0, 1.0));
}

// Closed-form extreme eigenvalues 1 +/- sin(alpha)/alpha of the conditional
// second-moment matrix.
inline std::pair<double, double> cone_sigma_bounds(double alpha) {
    const double ratio = alpha > 0.0 ? std::sin(alpha) / alpha : 1.0;
    return {1.0 + ratio, 1.0 - ratio};
}

// Closed-form event probability alpha / pi.
inline double cone_probability(double alpha) { return alpha / kPi; }

struct ConeSpectrumReport {
    double alpha;
    double sigma_max_mc, sigma_min_mc;
    double prob_mc;
    std::size_t n_mc;
    std::size_t n_accepted;
};

// Monte-Carlo estimate of the second moment of a standard normal vector
// conditioned on (x.u)^2 > (x.v)^2, together with the event probability.
inline ConeSpectrumReport cone_spectrum_mc(std::span<const double> u, std::span<const double> v,
                                           std::size_t n_mc, std::uint64_t seed) {
    if (u.size() != v.size() || u.empty())
        throw InputError("cone_spectrum_mc: vectors must share a positive dimension");
    if (norm(u) == 0.0 || norm(v) == 0.0)
        throw InputError("cone_spectrum_mc: vectors must be nonzero");
    if (n_mc < 10000) throw InputError("cone_spectrum_mc: need at least 10^4 draws");

    const double alpha = cone_angle(u, v);
    const std::size_t k = u.size();

    Rng rng(seed);
    SymmetricMatrix accum(k);
    Vec x(k);
    std::size_t accepted = 0;
    for (std::size_t it = 0; it < n_mc; ++it) {
        for (double& c : x) c = rng.normal();
        const double su = dot(x, u);
        const double sv = dot(x, v);
        if (su * su > sv * sv) {
            ++accepted;
            accum.add_outer(x, 1.0);
        }
    }
    if (accepted == 0)
        throw DegenerateEventError("cone_spectrum_mc: conditioning event never occurred");
    accum.scale(1.0 / static_cast<double>(accepted));

    const double smax = spectral_norm(accum);  // conditional moments are PSD
    SymmetricMatrix shifted = accum;
    shifted.scale(-1.0);
    shifted.add_scaled_identity(smax);
    const double smin = smax - spectral_norm(shifted);

    return ConeSpectrumReport{alpha, smax, smin,
                              static_cast<double>(accepted) / static_cast<double>(n_mc), n_mc,
                              accepted};
}

struct PerturbationReport {
    double eps;                        // ||M - Sigma||
    double lambda1, lambda2, lambda3;  // of Sigma
    bool precondition_met;             // eps < (lambda2 - lambda3) / 2
    bool top_pair_distinct;            // lambda1 > lambda2 beyond numerical noise
    double space_lhs1 = 0.0, space_lhs2 = 0.0, space_rhs = 0.0;
    double u1_lhs = 0.0, u1_rhs = 0.0;
    double u2_lhs = 0.0, u2_rhs = 0.0;
    bool space_holds = false, u1_holds = false, u2_holds = false;

    // Every applicable bound holds (vector bounds only apply when the top
    // pair of Sigma is distinct).
    bool all_hold() const {
        if (!precondition_met) return false;
        if (!space_holds) return false;
        return !top_pair_distinct || (u1_holds && u2_holds);
    }
};

namespace detail {

// Third-largest eigenvalue via deflation: push the known top pair far below
// the rest of the spectrum and take the new maximum.
inline double third_eigenvalue(const SymmetricMatrix& m, const EigenPair& e1,
                               const EigenPair& e2) {
    SymmetricMatrix deflated = m;
    const double push = 2.0 * (m.inf_norm() + 1.0);
    deflated.add_outer(e1.vector, -push);
    deflated.add_outer(e2.vector, -push);
    return top2_eig(deflated).first.value;
}

inline double aligned_sq_dist(const Vec& a, const Vec& b) {
    const double s = dot(a, b) >= 0.0 ? 1.0 : -1.0;
    double out = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - s * b[i];
        out += d * d;
    }
    return out;
}

}  // namespace detail

// Numerical check of the eigenspace perturbation bounds: with
// eps = ||M - Sigma|| < (lambda2 - lambda3)/2,
//   ||u~_i - P_{T(u1,u2)} u~_i||^2 <= 4 eps / (lambda2 - lambda3)
// and, when lambda1 != lambda2, the two eigenvector distance bounds. Signs of
// the u~_i are chosen to maximize alignment.
inline PerturbationReport perturbation_check(const SymmetricMatrix& sigma,
                                             const SymmetricMatrix& m) {
    if (sigma.dim() != m.dim()) throw InputError("perturbation_check: dimension mismatch");
    if (sigma.dim() < 3) throw InputError("perturbation_check: need dimension >= 3");

    const Top2Result ts = top2_eig(sigma);
    const Top2Result tm = top2_eig(m);
    PerturbationReport rep;
    rep.lambda1 = ts.first.value;
    rep.lambda2 = ts.second.value;
    rep.lambda3 = detail::third_eigenvalue(sigma, ts.first, ts.second);
    rep.eps = spectral_norm(SymmetricMatrix::difference(m, sigma));
    const double lower_gap = rep.lambda2 - rep.lambda3;
    rep.precondition_met = lower_gap > 0.0 && rep.eps < 0.5 * lower_gap;
    rep.top_pair_distinct = !ts.degenerate;
    if (!rep.precondition_met) return rep;

    rep.space_rhs = 4.0 * rep.eps / lower_gap;
    const Vec p1 = project_onto_span(tm.first.vector, ts.first.vector, ts.second.vector);
    const Vec p2 = project_onto_span(tm.second.vector, ts.first.vector, ts.second.vector);
    rep.space_lhs1 = norm_sq(sub(tm.first.vector, p1));
    rep.space_lhs2 = norm_sq(sub(tm.second.vector, p2));
    rep.space_holds = rep.space_lhs1 <= rep.space_rhs && rep.space_lhs2 <= rep.space_rhs;

    if (rep.top_pair_distinct) {
        const double top_gap = rep.lambda1 - rep.lambda2;
        rep.u1_rhs = 4.0 * rep.eps / top_gap;
        rep.u2_rhs = 4.0 * rep.eps / top_gap + 8.0 * rep.eps / lower_gap;
        rep.u1_lhs = detail::aligned_sq_dist(ts.first.vector, tm.first.vector);
        rep.u2_lhs = detail::aligned_sq_dist(ts.second.vector, tm.second.vector);
        rep.u1_holds = rep.u1_lhs <= rep.u1_rhs;
        rep.u2_holds = rep.u2_lhs <= rep.u2_rhs;
    }
    return rep;
}

struct SandwichReport {
    double err;
    double rms;  // sqrt(loss / |S|)
    double upper, lower;
    bool upper_holds, lower_holds;

    bool holds() const { return upper_holds && lower_holds; }
};

// Checks that sqrt(L(est)/|S|) lies in the bracket
//   [ (1/5) sqrt(pmin) min(err, ||b1*-b2*||/2),  1.1 err ].
// err is the permutation-minimized metric; the bracket is stated for the
// better pairing.
inline SandwichReport loss_sandwich_check(const EstimatePair& est, const MixtureModel& truth,
                                          SampleView s, double min_sample_mult = 2.0) {
    const double pmin = std::min(truth.p1, truth.p2);
    if (static_cast<double>(s.size()) < min_sample_mult * static_cast<double>(truth.k()) / pmin)
        throw InputError("loss_sandwich_check: too few testing samples");

    SandwichReport rep;
    rep.err = error_metric(est, truth);
    rep.rms = std::sqrt(loss(est, s) / static_cast<double>(s.size()));
    rep.upper = 1.1 * rep.err;
    const double half_gap = 0.5 * dist(truth.beta1, truth.beta2);
    rep.lower = 0.2 * std::sqrt(pmin) * std::min(rep.err, half_gap);
    const double slack = 1e-12 * (1.0 + rep.err);
    rep.upper_holds = rep.rms <= rep.upper + slack;
    rep.lower_holds = rep.rms >= rep.lower - slack;
    return rep;
}

struct SubsetSumInstance {
    Vec values;
};

struct LinearSystem {
    Vec rows;  // row-major, n_rows x n_cols
    Vec rhs;
    std::size_t n_rows = 0, n_cols = 0;
};

// The (2k+1) x k reduction gadget: X = [I_k; I_k; 1...1] and
// y = (a; 0_k; sum a_i / 2). The mixed system has an exact solution iff the
// values admit an equal-sum partition.
inline LinearSystem hardness_gadget(const SubsetSumInstance& instance) {
    const std::size_t k = instance.values.size();
    if (k == 0) throw InputError("hardness_gadget: empty instance");
    LinearSystem sys;
    sys.n_rows = 2 * k + 1;
    sys.n_cols = k;
    sys.rows.assign(sys.n_rows * k, 0.0);
    sys.rhs.assign(sys.n_rows, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        sys.rows[i * k + i] = 1.0;
        sys.rows[(k + i) * k + i] = 1.0;
        sys.rhs[i] = instance.values[i];
        total += instance.values[i];
    }
    for (std::size_t j = 0; j < k; ++j) sys.rows[2 * k * k + j] = 1.0;
    sys.rhs[2 * k] = 0.5 * total;
    return sys;
}

struct MixedSolveResult {
    EstimatePair estimate;
    std::vector<std::uint8_t> assignment;  // 1 = row assigned to the first block
};

namespace detail {

// Sequential-Givens least squares state: R upper triangular, c = Q^T y, and
// rho2 the accumulated squared residual. Appending rows never decreases rho2,
// which is what makes subtree pruning sound.
struct GivensLs {
    std::size_t k = 0;
    Vec r;  // k x k
    Vec c;  // k
    double rho2 = 0.0;

    explicit GivensLs(std::size_t k_in) : k(k_in), r(k_in * k_in, 0.0), c(k_in, 0.0) {}

    void append(std::span<const double> row, double y, Vec& scratch) {
        scratch.assign(row.begin(), row.end());
        for (std::size_t j = 0; j < k; ++j) {
            const double b = scratch[j];
            if (b == 0.0) continue;
            const double a = r[j * k + j];
            const double radius = std::sqrt(a * a + b * b);
            const double cs = a / radius;
            const double sn = b / radius;
            for (std::size_t t = j; t < k; ++t) {
                const double rt = r[j * k + t];
                const double xt = scratch[t];
                r[j * k + t] = cs * rt + sn * xt;
                scratch[t] = -sn * rt + cs * xt;
            }
            const double cj = c[j];
            c[j] = cs * cj + sn * y;
            y = -sn * cj + cs * y;
        }
        rho2 += y * y;
    }
};

}  // namespace detail

// Exhaustive reference solver: decides whether some assignment of rows to two
// blocks admits least-squares fits with total residual <= tol, and returns
// the first such assignment in depth-first order (rows in input order, second
// block tried first). tol < 0 selects the default 1e-9 * (1 + ||y||).
inline std::optional<MixedSolveResult> brute_force_mixed_solve(const LinearSystem& sys,
                                                               double tol = -1.0) {
    const std::size_t n = sys.n_rows;
    const std::size_t k = sys.n_cols;
    if (n == 0 || k == 0 || sys.rows.size() != n * k || sys.rhs.size() != n)
        throw InputError("brute_force_mixed_solve: malformed system");
    if (n > 24) throw InputError("brute_force_mixed_solve: too many rows (limit 24)");
    if (tol < 0.0) tol = 1e-9 * (1.0 + norm(sys.rhs));
    const double tol_sq = tol * tol;

    std::vector<std::uint8_t> assignment(n, 0);
    std::optional<MixedSolveResult> found;
    Vec scratch(k);

    auto row = [&](std::size_t i) {
        return std::span<const double>(sys.rows.data() + i * k, k);
    };

    auto solve_block = [&](std::uint8_t which) {
        Vec rows_flat, rhs;
        for (std::size_t i = 0; i < n; ++i) {
            if (assignment[i] != which) continue;
            const auto r = row(i);
            rows_flat.insert(rows_flat.end(), r.begin(), r.end());
            rhs.push_back(sys.rhs[i]);
        }
        if (rhs.empty()) return Vec(k, 0.0);
        return least_squares(rows_flat, rhs.size(), k, rhs);
    };

    auto dfs = [&](auto&& self, std::size_t depth, const detail::GivensLs& b1,
                   const detail::GivensLs& b2) -> void {
        if (found) return;
        if (b1.rho2 + b2.rho2 > tol_sq) return;
        if (depth == n) {
            found = MixedSolveResult{EstimatePair{solve_block(1), solve_block(0)}, assignment};
            return;
        }
        const auto r = row(depth);
        const double y = sys.rhs[depth];
        {
            assignment[depth] = 0;
            detail::GivensLs next = b2;
            next.append(r, y, scratch);
            self(self, depth + 1, b1, next);
        }
        if (found) return;
        {
            assignment[depth] = 1;
            detail::GivensLs next = b1;
            next.append(r, y, scratch);
            self(self, depth + 1, next, b2);
        }
    };

    detail::GivensLs empty1(k), empty2(k);
    dfs(dfs, 0, empty1, empty2);
    return found;
}

}  // namespace mixreg::oracles
