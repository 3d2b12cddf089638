#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "mixreg/errors.hpp"
#include "mixreg/rng.hpp"
#include "mixreg/vec.hpp"

namespace mixreg {

// Dense symmetric matrix. Both triangles are stored and kept bit-identical:
// every mutation writes (i, j) and (j, i) from the same value.
class SymmetricMatrix {
public:
    explicit SymmetricMatrix(std::size_t dim) : dim_(dim), a_(dim * dim, 0.0) {}

    // Builds from row-major square data, symmetrizing as (A + A^T) / 2.
    static SymmetricMatrix from_rows(std::size_t dim, std::span<const double> data) {
        if (data.size() != dim * dim) throw InputError("SymmetricMatrix: data size mismatch");
        SymmetricMatrix m(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            for (std::size_t j = i; j < dim; ++j) {
                const double v = 0.5 * (data[i * dim + j] + data[j * dim + i]);
                m.a_[i * dim + j] = v;
                m.a_[j * dim + i] = v;
            }
        }
        return m;
    }

    std::size_t dim() const { return dim_; }

    double operator()(std::size_t i, std::size_t j) const { return a_[i * dim_ + j]; }

    void set(std::size_t i, std::size_t j, double v) {
        a_[i * dim_ + j] = v;
        a_[j * dim_ + i] = v;
    }

    // this += w * x x^T
    void add_outer(std::span<const double> x, double w) {
        for (std::size_t i = 0; i < dim_; ++i) {
            const double wxi = w * x[i];
            for (std::size_t j = i; j < dim_; ++j) {
                const double v = a_[i * dim_ + j] + wxi * x[j];
                a_[i * dim_ + j] = v;
                a_[j * dim_ + i] = v;
            }
        }
    }

    void add_scaled_identity(double s) {
        for (std::size_t i = 0; i < dim_; ++i) a_[i * dim_ + i] += s;
    }

    void scale(double s) {
        for (double& v : a_) v *= s;
    }

    void apply_into(std::span<const double> x, Vec& out) const {
        out.assign(dim_, 0.0);
        for (std::size_t i = 0; i < dim_; ++i) {
            const double* row = a_.data() + i * dim_;
            double s = 0.0;
            for (std::size_t j = 0; j < dim_; ++j) s += row[j] * x[j];
            out[i] = s;
        }
    }

    Vec apply(std::span<const double> x) const {
        Vec out;
        apply_into(x, out);
        return out;
    }

    // Maximum absolute row sum; an upper bound for the spectral norm.
    double inf_norm() const {
        double best = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < dim_; ++j) s += std::abs(a_[i * dim_ + j]);
            best = std::max(best, s);
        }
        return best;
    }

    static SymmetricMatrix difference(const SymmetricMatrix& a, const SymmetricMatrix& b) {
        if (a.dim() != b.dim()) throw InputError("SymmetricMatrix: dimension mismatch");
        SymmetricMatrix d(a.dim());
        for (std::size_t i = 0; i < d.a_.size(); ++i) d.a_[i] = a.a_[i] - b.a_[i];
        return d;
    }

    const Vec& data() const { return a_; }

private:
    std::size_t dim_;
    Vec a_;
};

struct EigenPair {
    double value = 0.0;
    Vec vector;
};

struct Top2Result {
    EigenPair first;   // larger eigenvalue
    EigenPair second;  // values in nonincreasing order
    // Top gap below 1e-8 * scale: the vectors are only an orthonormal basis of
    // the invariant subspace, individual directions are not resolved.
    bool degenerate = false;
    std::size_t iterations = 0;
};

namespace detail {

// Deterministic sign fix: first coordinate with |v_i| > 1e-12 is made positive.
inline void canonical_sign(Vec& v) {
    for (double x : v) {
        if (std::abs(x) > 1e-12) {
            if (x < 0.0) scale_in_place(v, -1.0);
            return;
        }
    }
}

// Eigen-decomposition of [[a, c], [c, b]]: values (nonincreasing) plus the
// rotation (cs, sn) so that y1 = cs*q1 + sn*q2, y2 = -sn*q1 + cs*q2.
struct TwoByTwoEig {
    double theta1, theta2, cs, sn;
};

inline TwoByTwoEig eig_2x2(double a, double b, double c) {
    const double half_trace = 0.5 * (a + b);
    const double disc = std::sqrt(0.25 * (a - b) * (a - b) + c * c);
    TwoByTwoEig r{half_trace + disc, half_trace - disc, 1.0, 0.0};
    if (std::abs(c) < 1e-300) {
        if (a < b) {  // swap axes so theta1 belongs to y1
            r.cs = 0.0;
            r.sn = 1.0;
        }
        return r;
    }
    // Eigenvector of theta1: (c, theta1 - a), normalized.
    const double vx = c;
    const double vy = r.theta1 - a;
    const double n = std::sqrt(vx * vx + vy * vy);
    r.cs = vx / n;
    r.sn = vy / n;
    return r;
}

// Solves A x = b by Gaussian elimination with partial pivoting, A row-major
// square. Returns false only when a pivot vanishes exactly.
inline bool lu_solve(Vec a, std::size_t n, Vec b, Vec& x) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        if (a[pivot * n + col] == 0.0) return false;
        if (pivot != col) {
            for (std::size_t c = col; c < n; ++c) std::swap(a[pivot * n + c], a[col * n + c]);
            std::swap(b[pivot], b[col]);
        }
        const double inv = 1.0 / a[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] * inv;
            if (f == 0.0) continue;
            for (std::size_t c = col + 1; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    x.assign(n, 0.0);
    for (std::size_t r = n; r-- > 0;) {
        double s = b[r];
        for (std::size_t c = r + 1; c < n; ++c) s -= a[r * n + c] * x[c];
        x[r] = s / a[r * n + r];
    }
    return true;
}

inline double residual_norm(const SymmetricMatrix& m, const Vec& v, double theta, Vec& scratch) {
    m.apply_into(v, scratch);
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = scratch[i] - theta * v[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// Rayleigh quotient iteration: cubic local convergence toward the eigenpair
// nearest theta. Near-singular solves are benign here (the blow-up direction
// is the wanted eigenvector). keep_orth, when given, pins the iterate to the
// orthogonal complement of that direction.
inline void rqi_polish(const SymmetricMatrix& m, double& theta, Vec& v, double tol_abs,
                       std::size_t max_steps, const Vec* keep_orth = nullptr) {
    const std::size_t k = m.dim();
    Vec x, scratch;
    for (std::size_t step = 0; step < max_steps; ++step) {
        if (residual_norm(m, v, theta, scratch) <= tol_abs) return;
        Vec shifted(m.data());
        for (std::size_t i = 0; i < k; ++i) shifted[i * k + i] -= theta;
        if (!lu_solve(std::move(shifted), k, v, x)) {
            theta += 1e-14 * (std::abs(theta) + 1.0);  // exact singularity: nudge off
            continue;
        }
        if (keep_orth) axpy(-dot(x, *keep_orth), *keep_orth, x);
        if (normalize(x) == 0.0) return;
        v = x;
        m.apply_into(v, scratch);
        theta = dot(v, scratch);
    }
}

// Definiteness probe: Cholesky succeeds iff the row-major matrix is positive
// definite (used as an eigenvalue-location test, not for solving).
inline bool cholesky_pd(Vec a, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t t = 0; t < j; ++t) d -= a[j * n + t] * a[j * n + t];
        if (!(d > 0.0)) return false;
        const double root = std::sqrt(d);
        a[j * n + j] = root;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::size_t t = 0; t < j; ++t) s -= a[i * n + t] * a[j * n + t];
            a[i * n + j] = s / root;
        }
    }
    return true;
}

// Largest eigenvalue of a dense symmetric matrix by bisection on the
// positive-definiteness of cI - A. Globally correct regardless of gaps.
inline double bisect_lambda_max(const Vec& a, std::size_t n, double abs_bound) {
    double lo = -abs_bound - 1.0;  // cI - A indefinite here
    double hi = abs_bound + 1.0;   // cI - A definite here
    Vec probe(n * n);
    for (int it = 0; it < 90 && hi - lo > 1e-16 * (std::abs(hi) + 1.0); ++it) {
        const double mid = 0.5 * (lo + hi);
        for (std::size_t i = 0; i < n * n; ++i) probe[i] = -a[i];
        for (std::size_t i = 0; i < n; ++i) probe[i * n + i] += mid;
        if (cholesky_pd(probe, n))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

}  // namespace detail

// Top-2 eigenpairs of a symmetric matrix by orthogonal (block power)
// iteration with a positive spectral shift, so that the largest *signed*
// eigenvalues are tracked. Rayleigh-Ritz inside the 2-dimensional block gives
// the candidate values and vectors; convergence is declared when the residual
// ||M v - lambda v|| falls below tol times a lower bound of ||M||. A small
// lambda2-lambda3 gap makes the plain iteration tail arbitrarily slow, so
// after a fixed number of sweeps the solver switches to an exact path:
// bisection on definiteness locates lambda1 and (after deflation) lambda2,
// and Rayleigh-quotient iteration recovers the vectors.
inline Top2Result top2_eig(const SymmetricMatrix& m, double tol = 1e-10,
                           std::size_t max_iter = 10000) {
    const std::size_t k = m.dim();
    if (k < 2) throw InputError("top2_eig: dimension must be at least 2");

    const double inf_norm = m.inf_norm();
    const double shift = inf_norm + 1.0;  // makes the shifted matrix positive definite
    const double norm_floor = inf_norm / std::sqrt(static_cast<double>(k));

    Rng rng(0x746f703265696721ULL ^ static_cast<std::uint64_t>(k));
    Vec q1(k), q2(k);
    auto randomize = [&](Vec& v) {
        for (double& x : v) x = rng.normal();
        normalize(v);
    };
    randomize(q1);
    randomize(q2);
    axpy(-dot(q2, q1), q1, q2);
    normalize(q2);

    Vec w1, w2, y1(k), y2(k), r1(k), r2(k), scratch;
    double last_residual = std::numeric_limits<double>::infinity();

    auto finish = [&](double lam1, double lam2, Vec v1, Vec v2, double scale,
                      std::size_t it) {
        Top2Result out;
        out.iterations = it;
        if (lam1 < lam2) {
            std::swap(lam1, lam2);
            std::swap(v1, v2);
        }
        out.first.value = lam1;
        out.second.value = lam2;
        out.first.vector = std::move(v1);
        out.second.vector = std::move(v2);
        normalize(out.first.vector);
        normalize(out.second.vector);
        detail::canonical_sign(out.first.vector);
        detail::canonical_sign(out.second.vector);
        out.degenerate = (lam1 - lam2) < 1e-8 * scale;
        return out;
    };

    // Exact path for slow tails: locate the two largest eigenvalues globally,
    // then refine vectors locally.
    auto exact_phase = [&](std::size_t it) -> std::optional<Top2Result> {
        const double lam1 = detail::bisect_lambda_max(m.data(), k, inf_norm);
        double t1 = lam1;
        Vec v1 = q1;
        double guard = std::max({std::abs(lam1), norm_floor, 1e-300});
        detail::rqi_polish(m, t1, v1, tol * guard, 12);

        const double push = 2.0 * (inf_norm + 1.0);
        Vec deflated(m.data());
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) deflated[i * k + j] -= push * v1[i] * v1[j];
        const double lam2 = detail::bisect_lambda_max(deflated, k, inf_norm + push);
        double t2 = lam2;
        Vec v2 = q2;
        axpy(-dot(v2, v1), v1, v2);
        if (normalize(v2) < 1e-14) randomize(v2);
        detail::rqi_polish(m, t2, v2, tol * guard, 12, &v1);

        axpy(-dot(v2, v1), v1, v2);
        if (normalize(v2) < 1e-8) return std::nullopt;
        m.apply_into(v1, scratch);
        t1 = dot(v1, scratch);
        m.apply_into(v2, scratch);
        t2 = dot(v2, scratch);
        const double scale = std::max({std::abs(t1), std::abs(t2), norm_floor, 1e-300});
        if (detail::residual_norm(m, v1, t1, scratch) > tol * scale) return std::nullopt;
        if (detail::residual_norm(m, v2, t2, scratch) > tol * scale) return std::nullopt;
        return finish(t1, t2, std::move(v1), std::move(v2), scale, it);
    };

    const std::size_t exact_at = std::min<std::size_t>(512, std::max<std::size_t>(max_iter / 2, 8));
    for (std::size_t it = 1; it <= max_iter; ++it) {
        m.apply_into(q1, w1);
        m.apply_into(q2, w2);
        axpy(shift, q1, w1);
        axpy(shift, q2, w2);

        // Rayleigh-Ritz in span{q1, q2}.
        const double b11 = dot(q1, w1);
        const double b22 = dot(q2, w2);
        const double b12 = 0.5 * (dot(q1, w2) + dot(q2, w1));
        const auto ritz = detail::eig_2x2(b11, b22, b12);

        for (std::size_t i = 0; i < k; ++i) {
            y1[i] = ritz.cs * q1[i] + ritz.sn * q2[i];
            y2[i] = -ritz.sn * q1[i] + ritz.cs * q2[i];
            r1[i] = ritz.cs * w1[i] + ritz.sn * w2[i] - ritz.theta1 * y1[i];
            r2[i] = -ritz.sn * w1[i] + ritz.cs * w2[i] - ritz.theta2 * y2[i];
        }
        const double lam1 = ritz.theta1 - shift;
        const double lam2 = ritz.theta2 - shift;
        const double scale = std::max({std::abs(lam1), std::abs(lam2), norm_floor, 1e-300});
        last_residual = std::max(norm(r1), norm(r2));

        if (last_residual <= tol * scale)
            return finish(lam1, lam2, y1, y2, scale, it);

        if (it >= exact_at && (it == exact_at || it % 2048 == 0 || it == max_iter)) {
            q1 = y1;  // hand the best current directions to the exact path
            q2 = y2;
            if (auto exact = exact_phase(it)) return *exact;
        }

        // Orthogonal iteration step: Q <- qr(A Q).
        q1 = w1;
        if (normalize(q1) == 0.0) randomize(q1);
        q2 = w2;
        axpy(-dot(q2, q1), q1, q2);
        if (normalize(q2) < 1e-14) {  // block collapsed, reseed second direction
            randomize(q2);
            axpy(-dot(q2, q1), q1, q2);
            normalize(q2);
        }
    }
    throw ConvergenceError("top2_eig: no convergence within max_iter", last_residual);
}

namespace detail {

// Minimum-norm solution of min ||c - R b|| via one-sided Jacobi SVD of the
// (rows x cols) matrix R. Columns of B = R V are orthogonalized by plane
// rotations; singular values are the column norms.
inline Vec jacobi_svd_min_norm(Vec r, std::size_t rows, std::size_t cols, Vec c) {
    Vec v(cols * cols, 0.0);
    for (std::size_t i = 0; i < cols; ++i) v[i * cols + i] = 1.0;

    auto col_dot = [&](const Vec& a, std::size_t n, std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t t = 0; t < n; ++t) s += a[t * cols + i] * a[t * cols + j];
        return s;
    };
    auto rotate_cols = [&](Vec& a, std::size_t n, std::size_t i, std::size_t j, double cs,
                           double sn) {
        for (std::size_t t = 0; t < n; ++t) {
            const double ai = a[t * cols + i];
            const double aj = a[t * cols + j];
            a[t * cols + i] = cs * ai - sn * aj;
            a[t * cols + j] = sn * ai + cs * aj;
        }
    };

    constexpr std::size_t kMaxSweeps = 60;
    constexpr double kOffTol = 1e-15;
    for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t i = 0; i + 1 < cols; ++i) {
            for (std::size_t j = i + 1; j < cols; ++j) {
                const double aii = col_dot(r, rows, i, i);
                const double ajj = col_dot(r, rows, j, j);
                const double aij = col_dot(r, rows, i, j);
                if (std::abs(aij) <= kOffTol * std::sqrt(aii * ajj)) continue;
                rotated = true;
                const double zeta = (ajj - aii) / (2.0 * aij);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;
                rotate_cols(r, rows, i, j, cs, sn);
                rotate_cols(v, cols, i, j, cs, sn);
            }
        }
        if (!rotated) break;
    }

    Vec sigma(cols, 0.0);
    double sigma_max = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < rows; ++t) s += r[t * cols + j] * r[t * cols + j];
        sigma[j] = std::sqrt(s);
        sigma_max = std::max(sigma_max, sigma[j]);
    }
    const double rank_tol = sigma_max * static_cast<double>(std::max(rows, cols)) *
                            std::numeric_limits<double>::epsilon();

    Vec beta(cols, 0.0);
    for (std::size_t j = 0; j < cols; ++j) {
        if (sigma[j] <= rank_tol || sigma[j] == 0.0) continue;
        double uc = 0.0;  // (j-th left singular vector) . c
        for (std::size_t t = 0; t < rows; ++t) uc += (r[t * cols + j] / sigma[j]) * c[t];
        const double coef = uc / sigma[j];
        for (std::size_t t = 0; t < cols; ++t) beta[t] += coef * v[t * cols + j];
    }
    return beta;
}

}  // namespace detail

// argmin_b ||y - X b||_2 for a row-major X (rows x cols). Overdetermined
// systems are first reduced by Householder QR; the triangular (or short) core
// is then solved through an SVD, which yields the minimum-norm solution when
// X is rank deficient.
inline Vec least_squares(std::span<const double> xs, std::size_t rows, std::size_t cols,
                         std::span<const double> y) {
    if (rows == 0 || cols == 0) throw InputError("least_squares: empty system");
    if (xs.size() != rows * cols || y.size() != rows)
        throw InputError("least_squares: shape mismatch");

    if (rows <= cols) {
        return detail::jacobi_svd_min_norm(Vec(xs.begin(), xs.end()), rows, cols,
                                           Vec(y.begin(), y.end()));
    }

    Vec a(xs.begin(), xs.end());
    Vec c(y.begin(), y.end());
    Vec hv(rows);
    for (std::size_t j = 0; j < cols; ++j) {
        double sigma = 0.0;
        for (std::size_t i = j; i < rows; ++i) sigma += a[i * cols + j] * a[i * cols + j];
        sigma = std::sqrt(sigma);
        if (sigma == 0.0) continue;
        const double ajj = a[j * cols + j];
        const double alpha = ajj > 0.0 ? -sigma : sigma;
        // Householder vector for column j, stored in hv[j..rows).
        hv[j] = ajj - alpha;
        for (std::size_t i = j + 1; i < rows; ++i) hv[i] = a[i * cols + j];
        const double hnorm_sq = hv[j] * hv[j] + (sigma * sigma - ajj * ajj);
        if (hnorm_sq <= 0.0) continue;
        const double two_over = 2.0 / hnorm_sq;

        a[j * cols + j] = alpha;
        for (std::size_t i = j + 1; i < rows; ++i) a[i * cols + j] = 0.0;
        for (std::size_t col = j + 1; col < cols; ++col) {
            double proj = hv[j] * a[j * cols + col];
            for (std::size_t i = j + 1; i < rows; ++i) proj += hv[i] * a[i * cols + col];
            proj *= two_over;
            a[j * cols + col] -= proj * hv[j];
            for (std::size_t i = j + 1; i < rows; ++i) a[i * cols + col] -= proj * hv[i];
        }
        double proj = hv[j] * c[j];
        for (std::size_t i = j + 1; i < rows; ++i) proj += hv[i] * c[i];
        proj *= two_over;
        c[j] -= proj * hv[j];
        for (std::size_t i = j + 1; i < rows; ++i) c[i] -= proj * hv[i];
    }

    Vec r(cols * cols, 0.0);
    for (std::size_t i = 0; i < cols; ++i)
        for (std::size_t j = i; j < cols; ++j) r[i * cols + j] = a[i * cols + j];
    c.resize(cols);
    return detail::jacobi_svd_min_norm(std::move(r), cols, cols, std::move(c));
}

// P_T v for T = span{b1, b2} with an orthonormal basis.
inline Vec project_onto_span(std::span<const double> v, std::span<const double> b1,
                             std::span<const double> b2) {
    constexpr double kOrthoTol = 1e-8;
    if (v.size() != b1.size() || v.size() != b2.size())
        throw InputError("project_onto_span: dimension mismatch");
    if (std::abs(norm(b1) - 1.0) > kOrthoTol || std::abs(norm(b2) - 1.0) > kOrthoTol ||
        std::abs(dot(b1, b2)) > kOrthoTol)
        throw InputError("project_onto_span: basis is not orthonormal");
    Vec out = scaled(b1, dot(v, b1));
    axpy(dot(v, b2), b2, out);
    return out;
}

// max_i |lambda_i(M)|, via power iteration on M^2 (sign-free and convergent
// for any symmetric M). The value estimate ||M v|| is accurate even when the
// two largest singular values nearly tie, so a stagnation test is a safe
// secondary stop.
inline double spectral_norm(const SymmetricMatrix& m) {
    const std::size_t k = m.dim();
    if (k == 0) return 0.0;
    if (k == 1) return std::abs(m(0, 0));
    if (m.inf_norm() == 0.0) return 0.0;

    Rng rng(0x7370656374726d21ULL ^ static_cast<std::uint64_t>(k));
    Vec v(k);
    for (double& x : v) x = rng.normal();
    normalize(v);

    Vec w, u;
    double rho = 0.0;
    double rho_prev = -1.0;
    int stall = 0;
    constexpr std::size_t kMaxIter = 200000;
    for (std::size_t it = 0; it < kMaxIter; ++it) {
        m.apply_into(v, w);
        rho = norm(w);
        if (rho == 0.0) {  // v happened to lie in the kernel
            for (double& x : v) x = rng.normal();
            normalize(v);
            continue;
        }
        m.apply_into(w, u);  // u = M^2 v
        double res_sq = 0.0;
        const double rho_sq = rho * rho;
        for (std::size_t i = 0; i < k; ++i) {
            const double d = u[i] - rho_sq * v[i];
            res_sq += d * d;
        }
        if (std::sqrt(res_sq) <= 1e-9 * rho_sq) return rho;
        if (std::abs(rho - rho_prev) <= 1e-13 * std::max(rho, 1.0)) {
            if (++stall >= 4) return rho;
        } else {
            stall = 0;
        }
        rho_prev = rho;
        v = u;
        normalize(v);
    }
    return rho;
}

}  // namespace mixreg
