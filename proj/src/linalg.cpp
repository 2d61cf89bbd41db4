#include "svit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "svit/errors.hpp"
#include "svit/rng.hpp"

namespace svit {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void fix_sign_column(Mat& mat, std::size_t col) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < mat.rows; ++i) {
        const double m = std::abs(mat.at(i, col));
        if (m > best) {
            best = m;
            arg = i;
        }
    }
    if (mat.at(arg, col) < 0.0)
        for (std::size_t i = 0; i < mat.rows; ++i) mat.at(i, col) = -mat.at(i, col);
}

namespace {

void fix_sign_row(std::vector<double>& v, std::size_t off, std::size_t n) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double m = std::abs(v[off + i]);
        if (m > best) {
            best = m;
            arg = i;
        }
    }
    if (v[off + arg] < 0.0)
        for (std::size_t i = 0; i < n; ++i) v[off + i] = -v[off + i];
}

double off_diag_norm(const Mat& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = i + 1; j < a.cols; ++j) s += 2.0 * a.at(i, j) * a.at(i, j);
    return std::sqrt(s);
}

}  // namespace

EighResult eigh_symmetric(const Mat& input) {
    if (input.rows != input.cols)
        throw ValidationError("eigh_symmetric: matrix is " + std::to_string(input.rows) + "x" +
                              std::to_string(input.cols) + ", not square");
    const std::size_t m = input.rows;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            if (std::abs(input.at(i, j) - input.at(j, i)) > 1e-10)
                throw ValidationError("eigh_symmetric: asymmetric at (" + std::to_string(i) + "," +
                                      std::to_string(j) + "): " + std::to_string(input.at(i, j)) +
                                      " vs " + std::to_string(input.at(j, i)));

    Mat a = input;
    // Vt holds candidate eigenvectors as rows so every rotation touches two
    // contiguous rows; transpose once at the end.
    Mat vt = Mat::identity(m);
    double frob = 0.0;
    for (double x : a.v) frob += x * x;
    frob = std::sqrt(frob);
    const double target = frob > 0.0 ? 1e-12 * frob : 0.0;

    constexpr int kMaxSweeps = 100;
    int sweep = 0;
    std::vector<double> rp(m), rq(m);
    bool converged = off_diag_norm(a) <= target;
    for (; sweep < kMaxSweeps && !converged; ++sweep) {
        for (std::size_t p = 0; p < m; ++p) {
            for (std::size_t q = p + 1; q < m; ++q) {
                const double apq = a.at(p, q);
                if (apq == 0.0) continue;
                const double app = a.at(p, p);
                const double aqq = a.at(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                double* ap = a.row(p);
                double* aq = a.row(q);
                for (std::size_t j = 0; j < m; ++j) {
                    rp[j] = c * ap[j] - s * aq[j];
                    rq[j] = s * ap[j] + c * aq[j];
                }
                rp[p] = app - t * apq;
                rq[q] = aqq + t * apq;
                rp[q] = 0.0;
                rq[p] = 0.0;
                std::copy(rp.begin(), rp.end(), ap);
                std::copy(rq.begin(), rq.end(), aq);
                for (std::size_t j = 0; j < m; ++j) {
                    a.at(j, p) = rp[j];
                    a.at(j, q) = rq[j];
                }

                double* vp = vt.row(p);
                double* vq = vt.row(q);
                for (std::size_t j = 0; j < m; ++j) {
                    const double xp = vp[j];
                    const double xq = vq[j];
                    vp[j] = c * xp - s * xq;
                    vq[j] = s * xp + c * xq;
                }
            }
        }
        converged = off_diag_norm(a) <= target;
    }
    if (!converged)
        throw NumericError("eigh_symmetric: no convergence after " + std::to_string(sweep) +
                           " sweeps (off-diagonal norm " + std::to_string(off_diag_norm(a)) + ")");

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a.at(x, x) < a.at(y, y); });

    EighResult res;
    res.eigenvalues.resize(m);
    res.eigenvectors = Mat(m, m);
    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t src = order[j];
        res.eigenvalues[j] = a.at(src, src);
        fix_sign_row(vt.v, src * m, m);
        for (std::size_t i = 0; i < m; ++i) res.eigenvectors.at(i, j) = vt.at(src, i);
    }
    return res;
}

namespace {

// Eigen decomposition of a symmetric tridiagonal matrix, via the dense Jacobi
// above (Krylov sizes here stay small enough that this is cheap).
EighResult tridiag_eigh(const std::vector<double>& alpha, const std::vector<double>& beta) {
    const std::size_t k = alpha.size();
    Mat t(k, k);
    for (std::size_t i = 0; i < k; ++i) {
        t.at(i, i) = alpha[i];
        if (i + 1 < k) {
            t.at(i, i + 1) = beta[i];
            t.at(i + 1, i) = beta[i];
        }
    }
    return eigh_symmetric(t);
}

using MatvecFn = std::function<void(const double*, double*)>;

struct LanczosRun {
    std::vector<double> ritz;  // Rayleigh quotients under the evaluation operator, descending
    Mat vectors;               // m x k, orthonormal columns
    double max_residual = 0.0;
    double lambda_scale = 1.0;
    // Extreme Ritz values of the operator that drove the recurrence (used to
    // bracket its spectrum when this run acts as a probe).
    double krylov_bottom = 0.0;
    double krylov_top = 0.0;
};

// One Lanczos pass. The Krylov recurrence runs on `matvec_krylov`; Ritz
// vectors are then re-evaluated against `matvec_eval` (Rayleigh quotients and
// residuals), which lets a spectrally-filtered recurrence stand in for the
// original operator while all reported quantities stay tied to the original.
LanczosRun lanczos_run(const MatvecFn& matvec_krylov, const MatvecFn& matvec_eval, std::size_t m,
                       std::size_t k, std::size_t iters, std::uint64_t seed) {
    Rng rng(derive_seed(seed, stream::kLanczos));
    std::vector<std::vector<double>> q;  // orthonormal Krylov basis, rows of length m
    std::vector<double> alpha, beta;
    std::vector<double> v(m), w(m);
    for (double& x : v) x = rng.normal();
    double nv = std::sqrt(dot(v, v));
    for (double& x : v) x /= nv;
    q.push_back(v);

    std::size_t steps = std::min(iters, m);
    for (std::size_t j = 0; j < steps; ++j) {
        matvec_krylov(q[j].data(), w.data());
        const double a = dot(w, q[j]);
        alpha.push_back(a);
        // Full reorthogonalization, twice for safety.
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& qi : q) {
                const double c = dot(w, qi);
                for (std::size_t i = 0; i < m; ++i) w[i] -= c * qi[i];
            }
        const double b = std::sqrt(dot(w, w));
        if (j + 1 == steps || b < 1e-14) {
            break;
        }
        beta.push_back(b);
        for (std::size_t i = 0; i < m; ++i) w[i] /= b;
        q.push_back(w);
    }

    EighResult tri = tridiag_eigh(alpha, beta);
    const std::size_t kk = alpha.size();
    const std::size_t keep = std::min(k, kk);

    LanczosRun out;
    out.krylov_bottom = tri.eigenvalues.front();
    out.krylov_top = tri.eigenvalues.back();
    out.vectors = Mat(m, keep);
    std::vector<double> rv(m);
    for (std::size_t j = 0; j < keep; ++j) {
        const std::size_t src = kk - 1 - j;  // ascending -> take from the top
        std::fill(rv.begin(), rv.end(), 0.0);
        for (std::size_t i = 0; i < kk; ++i) {
            const double y = tri.eigenvectors.at(i, src);
            const double* qi = q[i].data();
            for (std::size_t t = 0; t < m; ++t) rv[t] += y * qi[t];
        }
        double nrm = std::sqrt(dot(rv, rv));
        for (double& x : rv) x /= nrm;
        for (std::size_t t = 0; t < m; ++t) out.vectors.at(t, j) = rv[t];
    }

    // Rayleigh quotients under the evaluation operator, then re-sort the
    // columns descending by them (a filtered recurrence orders by filtered
    // value; ties inside clusters may permute).
    std::vector<double> quotients(keep);
    std::vector<double> av(m);
    Mat av_all(m, keep);
    for (std::size_t j = 0; j < keep; ++j) {
        for (std::size_t t = 0; t < m; ++t) rv[t] = out.vectors.at(t, j);
        matvec_eval(rv.data(), av.data());
        for (std::size_t t = 0; t < m; ++t) av_all.at(t, j) = av[t];
        quotients[j] = dot(rv, av);
    }
    std::vector<std::size_t> order(keep);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return quotients[x] > quotients[y]; });
    Mat sorted_v(m, keep), sorted_av(m, keep);
    out.ritz.resize(keep);
    for (std::size_t j = 0; j < keep; ++j) {
        const std::size_t src = order[j];
        out.ritz[j] = quotients[src];
        for (std::size_t t = 0; t < m; ++t) {
            sorted_v.at(t, j) = out.vectors.at(t, src);
            sorted_av.at(t, j) = av_all.at(t, src);
        }
    }
    out.vectors = std::move(sorted_v);
    av_all = std::move(sorted_av);
    double lmax = 0.0;
    for (double ev : out.ritz) lmax = std::max(lmax, std::abs(ev));
    out.lambda_scale = lmax > 0.0 ? lmax : 1.0;

    // Convergence is judged on the retained subspace, not per vector:
    // clustered eigenvalues mix their Ritz vectors arbitrarily long before
    // the individual pairs settle, while the span they carry converges at the
    // cluster-level gap. residual_j = || (I - V V^T) A v_j ||.
    for (std::size_t j = 0; j < keep; ++j) {
        for (std::size_t t = 0; t < m; ++t) rv[t] = av_all.at(t, j);  // (I - V V^T) A v_j
        for (std::size_t c = 0; c < keep; ++c) {
            double proj = 0.0;
            for (std::size_t t = 0; t < m; ++t) proj += out.vectors.at(t, c) * rv[t];
            for (std::size_t t = 0; t < m; ++t) rv[t] -= proj * out.vectors.at(t, c);
        }
        out.max_residual = std::max(out.max_residual, std::sqrt(dot(rv, rv)));
    }
    return out;
}

}  // namespace

PartialEigh lanczos_largest(const std::function<void(const double*, double*)>& matvec,
                            std::size_t m, std::size_t k, std::uint64_t seed, double tol) {
    if (k == 0 || k > m)
        throw ValidationError("lanczos_largest: k = " + std::to_string(k) + " out of range for m = " +
                              std::to_string(m));
    const std::size_t iters = std::min(m, std::max<std::size_t>(3 * k + 60, 100));
    LanczosRun run = lanczos_run(matvec, matvec, m, k, iters, seed);

    if (run.max_residual > tol * run.lambda_scale && iters < m) {
        // Plain Lanczos stalls when many wanted eigenvalues sit in a tight
        // cluster at the top of the spectrum (grid Laplacians are the typical
        // case). Switch to a Chebyshev-filtered recurrence: T_d blows up the
        // wanted band relative to the rest, so the same Krylov dimension
        // resolves it. Estimates come from the plain run (its Ritz values
        // bound the true eigenvalues from inside the spectrum, so the cut
        // lands below the true k-th eigenvalue and never filters out a
        // wanted mode); quotients and residuals are evaluated against the
        // original operator.
        const double hi0 = run.krylov_top;
        const double lo0 = run.krylov_bottom;
        double lo = lo0 - 0.05 * (hi0 - lo0);
        double hi = std::max(run.ritz.front(), hi0);
        double kth = run.ritz.back();
        const std::size_t fsteps = std::min(m, std::max<std::size_t>(2 * k + 60, 100));
        for (std::size_t degree : {24u, 48u, 96u}) {
            const double band = std::max(hi - kth, 1e-6 * run.lambda_scale);
            const double cut = kth - 0.15 * band;
            if (cut - lo < 1e-9 * run.lambda_scale) break;  // nothing left to suppress
            const double mid = 0.5 * (cut + lo);
            const double half = 0.5 * (cut - lo);
            std::vector<double> t0(m), t1(m), t2(m), bz(m);
            auto filtered = [&](const double* x, double* y) {
                // y = T_degree(L(B)) x with L affine mapping [lo, cut] -> [-1, 1].
                std::copy(x, x + m, t0.begin());
                matvec(t0.data(), bz.data());
                for (std::size_t i = 0; i < m; ++i) t1[i] = (bz[i] - mid * t0[i]) / half;
                for (std::size_t d = 1; d < degree; ++d) {
                    matvec(t1.data(), bz.data());
                    for (std::size_t i = 0; i < m; ++i)
                        t2[i] = 2.0 * (bz[i] - mid * t1[i]) / half - t0[i];
                    t0.swap(t1);
                    t1.swap(t2);
                }
                std::copy(t1.begin(), t1.end(), y);
            };
            run = lanczos_run(filtered, matvec, m, k, fsteps, seed);
            if (run.max_residual <= tol * run.lambda_scale) break;
            hi = std::max(hi, run.ritz.front());
            kth = std::max(kth, run.ritz.back());
        }
    }
    if (run.max_residual > tol * run.lambda_scale)
        throw NumericError("lanczos_largest: residual " + std::to_string(run.max_residual) +
                           " above tolerance after spectral filtering");
    PartialEigh out;
    out.eigenvalues = std::move(run.ritz);
    out.vectors = std::move(run.vectors);
    for (std::size_t j = 0; j < out.eigenvalues.size(); ++j) fix_sign_column(out.vectors, j);
    return out;
}

}  // namespace svit
