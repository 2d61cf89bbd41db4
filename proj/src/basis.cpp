#include "svit/basis.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "svit/errors.hpp"
#include "svit/linalg.hpp"
#include "svit/rng.hpp"

namespace svit {

namespace {

constexpr std::size_t kDenseEigLimit = 600;
constexpr double kPi = 3.14159265358979323846264338327950288;

}  // namespace

std::string basis_kind_name(BasisKind k) {
    switch (k) {
        case BasisKind::kPca: return "pca";
        case BasisKind::kFourier: return "fourier";
        case BasisKind::kLaplacian: return "laplacian";
    }
    return "?";
}

BasisKind basis_kind_from_name(const std::string& name) {
    if (name == "pca") return BasisKind::kPca;
    if (name == "fourier") return BasisKind::kFourier;
    if (name == "laplacian") return BasisKind::kLaplacian;
    throw ValidationError("unknown basis kind '" + name + "' (pca|fourier|laplacian)");
}

// ---- PCA -------------------------------------------------------------------

SpectralBasis fit_pca(const Mat& images, std::size_t n, std::size_t height, std::size_t width) {
    const std::size_t N = images.rows;
    const std::size_t m = images.cols;
    if (N < 2) throw ValidationError("fit_pca: need at least 2 images, got " + std::to_string(N));
    if (n == 0 || n > std::min(N - 1, m))
        throw ValidationError("fit_pca: n = " + std::to_string(n) + " outside [1, min(N-1, m)] = [1, " +
                              std::to_string(std::min(N - 1, m)) + "]");
    if (height * width != 0 && height * width != m)
        throw DimensionError("fit_pca: grid " + std::to_string(height) + "x" +
                             std::to_string(width) + " does not match m = " + std::to_string(m));

    std::vector<double> mean(m, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        const double* r = images.row(i);
        for (std::size_t j = 0; j < m; ++j) mean[j] += r[j];
    }
    for (double& x : mean) x /= static_cast<double>(N);

    Mat xc(N, m);
    double trace = 0.0;  // trace of the population covariance
    for (std::size_t i = 0; i < N; ++i) {
        const double* r = images.row(i);
        double* c = xc.row(i);
        for (std::size_t j = 0; j < m; ++j) {
            c[j] = r[j] - mean[j];
            trace += c[j] * c[j];
        }
    }
    trace /= static_cast<double>(N);
    if (trace <= 0.0) throw ValidationError("fit_pca: zero-variance data");

    SpectralBasis basis;
    basis.kind = BasisKind::kPca;
    basis.n = n;
    basis.m = m;
    basis.height = height;
    basis.width = width;
    basis.mean = std::move(mean);
    basis.vectors = Mat(n, m);

    // Decompose on the cheaper side; switch to a partial Lanczos solve when
    // even the small side would make dense Jacobi slow.
    const std::size_t small_side = std::min(m, N);
    if (small_side > kDenseEigLimit) {
        // Partial solve of the covariance operator, C x = Xc^T (Xc x) / N,
        // without forming C. Keep a few extra Ritz values so that
        // energy-compaction queries just past n stay answerable.
        const std::size_t k = std::min(m, std::min(N - 1, n + 8));
        std::vector<double> tmp(N);
        auto matvec = [&](const double* x, double* y) {
            for (std::size_t i = 0; i < N; ++i) tmp[i] = dot({xc.row(i), m}, {x, m});
            std::fill(y, y + m, 0.0);
            for (std::size_t i = 0; i < N; ++i) {
                const double f = tmp[i];
                const double* r = xc.row(i);
                for (std::size_t j = 0; j < m; ++j) y[j] += f * r[j];
            }
            const double inv = 1.0 / static_cast<double>(N);
            for (std::size_t j = 0; j < m; ++j) y[j] *= inv;
        };
        PartialEigh pe = lanczos_largest(matvec, m, k, /*seed=*/0x5eedbeef);
        double kept = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double ev = std::max(0.0, pe.eigenvalues[j]);
            basis.eigenvalues.push_back(ev);
            kept += ev;
        }
        basis.eigenvalue_tail = std::max(0.0, trace - kept);
        for (std::size_t c = 0; c < n; ++c)
            for (std::size_t j = 0; j < m; ++j) basis.vectors.at(c, j) = pe.vectors.at(j, c);
    } else if (m <= N) {
        Mat cov(m, m);
        for (std::size_t i = 0; i < N; ++i) {
            const double* r = xc.row(i);
            for (std::size_t a = 0; a < m; ++a) {
                const double f = r[a];
                if (f == 0.0) continue;
                double* out = cov.row(a);
                for (std::size_t b = a; b < m; ++b) out[b] += f * r[b];
            }
        }
        const double inv = 1.0 / static_cast<double>(N);
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = a; b < m; ++b) {
                cov.at(a, b) *= inv;
                cov.at(b, a) = cov.at(a, b);
            }
        EighResult eig = eigh_symmetric(cov);
        basis.eigenvalues.resize(m);
        for (std::size_t j = 0; j < m; ++j)
            basis.eigenvalues[j] = std::max(0.0, eig.eigenvalues[m - 1 - j]);
        for (std::size_t c = 0; c < n; ++c)
            for (std::size_t j = 0; j < m; ++j)
                basis.vectors.at(c, j) = eig.eigenvectors.at(j, m - 1 - c);
    } else {
        // Gram trick: eigenvectors of (Xc Xc^T)/N map through Xc^T.
        Mat gram(N, N);
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = i; j < N; ++j) {
                const double gij = dot({xc.row(i), m}, {xc.row(j), m}) / static_cast<double>(N);
                gram.at(i, j) = gij;
                gram.at(j, i) = gij;
            }
        EighResult eig = eigh_symmetric(gram);
        basis.eigenvalues.assign(m, 0.0);
        for (std::size_t j = 0; j < N; ++j)
            basis.eigenvalues[j] = std::max(0.0, eig.eigenvalues[N - 1 - j]);
        for (std::size_t c = 0; c < n; ++c) {
            const std::size_t src = N - 1 - c;
            double* out = basis.vectors.row(c);
            std::fill(out, out + m, 0.0);
            for (std::size_t i = 0; i < N; ++i) {
                const double y = eig.eigenvectors.at(i, src);
                const double* r = xc.row(i);
                for (std::size_t j = 0; j < m; ++j) out[j] += y * r[j];
            }
            const double nrm = std::sqrt(dot({out, m}, {out, m}));
            if (nrm < 1e-12)
                throw NumericError("fit_pca: data rank below requested n = " + std::to_string(n));
            for (std::size_t j = 0; j < m; ++j) out[j] /= nrm;
        }
    }

    // Shared sign convention across all routes.
    for (std::size_t c = 0; c < n; ++c) {
        double* r = basis.vectors.row(c);
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t j = 0; j < m; ++j)
            if (std::abs(r[j]) > best) {
                best = std::abs(r[j]);
                arg = j;
            }
        if (r[arg] < 0.0)
            for (std::size_t j = 0; j < m; ++j) r[j] = -r[j];
    }

    basis.ordering_keys.resize(n);
    basis.hierarchy_weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        basis.ordering_keys[i] = static_cast<double>(i + 1);
        basis.hierarchy_weights[i] = 1.0 / static_cast<double>(i + 1);
    }
    return basis;
}

// ---- Fourier ---------------------------------------------------------------

namespace {

struct FourierMode {
    std::size_t kr, kc;  // canonical representative in [0,H) x [0,W)
    int sr, sc;          // signed frequency
    double rho, theta;
    double conj_weight;  // 1 self-conjugate, 2 paired
};

std::vector<FourierMode> canonical_modes(std::size_t H, std::size_t W) {
    std::vector<FourierMode> modes;
    for (std::size_t kr = 0; kr < H; ++kr) {
        for (std::size_t kc = 0; kc < W; ++kc) {
            const std::size_t cr = (H - kr) % H;
            const std::size_t cc = (W - kc) % W;
            // Keep one representative per conjugate pair {k, -k mod (H,W)}.
            if (std::make_pair(kr, kc) > std::make_pair(cr, cc)) continue;
            FourierMode md;
            md.kr = kr;
            md.kc = kc;
            md.sr = kr <= H / 2 ? static_cast<int>(kr) : static_cast<int>(kr) - static_cast<int>(H);
            md.sc = kc <= W / 2 ? static_cast<int>(kc) : static_cast<int>(kc) - static_cast<int>(W);
            md.rho = std::hypot(static_cast<double>(md.sr), static_cast<double>(md.sc));
            md.theta = std::atan2(static_cast<double>(md.sc), static_cast<double>(md.sr));
            md.conj_weight = (kr == cr && kc == cc) ? 1.0 : 2.0;
            modes.push_back(md);
        }
    }
    std::sort(modes.begin(), modes.end(), [](const FourierMode& a, const FourierMode& b) {
        if (a.rho != b.rho) return a.rho < b.rho;
        if (a.theta != b.theta) return a.theta < b.theta;
        if (a.sr != b.sr) return a.sr < b.sr;
        return a.sc < b.sc;
    });
    return modes;
}

}  // namespace

SpectralBasis build_fourier(std::size_t height, std::size_t width, std::size_t n) {
    if (height == 0 || width == 0) throw ValidationError("build_fourier: empty grid");
    const std::size_t m = height * width;
    std::vector<FourierMode> modes = canonical_modes(height, width);
    if (n == 0 || n > modes.size())
        throw ValidationError("build_fourier: n = " + std::to_string(n) + " outside [1, " +
                              std::to_string(modes.size()) + "] canonical modes for " +
                              std::to_string(height) + "x" + std::to_string(width));

    SpectralBasis basis;
    basis.kind = BasisKind::kFourier;
    basis.n = n;
    basis.m = m;
    basis.height = height;
    basis.width = width;
    basis.mean.assign(m, 0.0);
    basis.vectors = Mat(n, 2 * m);
    basis.ordering_keys.resize(n);
    basis.hierarchy_weights.resize(n);
    basis.freq_row.resize(n);
    basis.freq_col.resize(n);
    basis.conj_weight.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const FourierMode& md = modes[i];
        double* re = basis.vectors.row(i);
        double* im = re + m;
        for (std::size_t r = 0; r < height; ++r)
            for (std::size_t c = 0; c < width; ++c) {
                const double phase = 2.0 * kPi * (static_cast<double>(md.kr) * r / height +
                                                  static_cast<double>(md.kc) * c / width);
                re[r * width + c] = std::cos(phase);
                im[r * width + c] = -std::sin(phase);
            }
        basis.ordering_keys[i] = md.rho;
        basis.hierarchy_weights[i] = 1.0 / (1.0 + md.rho);
        basis.freq_row[i] = md.sr;
        basis.freq_col[i] = md.sc;
        basis.conj_weight[i] = md.conj_weight;
    }
    return basis;
}

// ---- Graph Laplacian -------------------------------------------------------

namespace {

SpectralBasis laplacian_from_modes(std::size_t height, std::size_t width, std::size_t m,
                                   double tau, std::size_t n, std::vector<double> evals,
                                   Mat vectors_rows) {
    SpectralBasis basis;
    basis.kind = BasisKind::kLaplacian;
    basis.n = n;
    basis.m = m;
    basis.height = height;
    basis.width = width;
    basis.tau = tau;
    basis.mean.assign(m, 0.0);
    basis.vectors = std::move(vectors_rows);
    basis.ordering_keys = std::move(evals);
    for (double& ev : basis.ordering_keys)
        if (std::abs(ev) < 1e-10) ev = 0.0;
    basis.hierarchy_weights.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        basis.hierarchy_weights[i] = std::exp(-basis.ordering_keys[i] * tau);
    return basis;
}

void validate_tau(double tau) {
    if (!(tau > 0.0)) throw ValidationError("laplacian: tau must be > 0, got " + std::to_string(tau));
}

}  // namespace

SpectralBasis build_laplacian(const Mat& adjacency, double tau, std::size_t n) {
    validate_tau(tau);
    if (adjacency.rows != adjacency.cols)
        throw ValidationError("build_laplacian: adjacency must be square");
    const std::size_t m = adjacency.rows;
    if (n == 0 || n > m)
        throw ValidationError("build_laplacian: n = " + std::to_string(n) + " outside [1, " +
                              std::to_string(m) + "]");
    std::vector<double> deg(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            if (std::abs(adjacency.at(i, j) - adjacency.at(j, i)) > 1e-10)
                throw ValidationError("build_laplacian: adjacency not symmetric at (" +
                                      std::to_string(i) + "," + std::to_string(j) + ")");
            if (adjacency.at(i, j) < 0.0)
                throw ValidationError("build_laplacian: negative weight at (" + std::to_string(i) +
                                      "," + std::to_string(j) + ")");
            deg[i] += adjacency.at(i, j);
        }
    for (std::size_t i = 0; i < m; ++i)
        if (deg[i] <= 0.0)
            throw ValidationError("build_laplacian: isolated vertex " + std::to_string(i));

    Mat lap(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j)
            lap.at(i, j) = -adjacency.at(i, j) / std::sqrt(deg[i] * deg[j]);
        lap.at(i, i) += 1.0;
    }
    EighResult eig = eigh_symmetric(lap);
    Mat rows(n, m);
    std::vector<double> evals(n);
    for (std::size_t c = 0; c < n; ++c) {
        evals[c] = eig.eigenvalues[c];
        for (std::size_t j = 0; j < m; ++j) rows.at(c, j) = eig.eigenvectors.at(j, c);
    }
    return laplacian_from_modes(0, 0, m, tau, n, std::move(evals), std::move(rows));
}

SpectralBasis build_laplacian_grid(std::size_t height, std::size_t width, double tau,
                                   std::size_t n) {
    validate_tau(tau);
    const std::size_t m = height * width;
    if (m < 2) throw ValidationError("build_laplacian_grid: grid needs at least 2 vertices");
    if (n == 0 || n > m)
        throw ValidationError("build_laplacian_grid: n = " + std::to_string(n) + " outside [1, " +
                              std::to_string(m) + "]");

    if (m <= kDenseEigLimit) {
        Mat adj(m, m);
        for (std::size_t r = 0; r < height; ++r)
            for (std::size_t c = 0; c < width; ++c) {
                const std::size_t i = r * width + c;
                if (r + 1 < height) adj.at(i, i + width) = adj.at(i + width, i) = 1.0;
                if (c + 1 < width) adj.at(i, i + 1) = adj.at(i + 1, i) = 1.0;
            }
        SpectralBasis basis = build_laplacian(adj, tau, n);
        basis.height = height;
        basis.width = width;
        return basis;
    }

    // Large grids: the n smoothest modes are the n largest of 2I - L, which a
    // partial Lanczos solve reaches without a dense m x m decomposition.
    std::vector<double> inv_sqrt_deg(m);
    for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c) {
            const double d = (r > 0) + (r + 1 < height) + (c > 0) + (c + 1 < width);
            inv_sqrt_deg[r * width + c] = 1.0 / std::sqrt(d);
        }
    auto matvec = [&](const double* x, double* y) {
        for (std::size_t r = 0; r < height; ++r)
            for (std::size_t c = 0; c < width; ++c) {
                const std::size_t i = r * width + c;
                double acc = 0.0;
                if (r > 0) acc += inv_sqrt_deg[i - width] * x[i - width];
                if (r + 1 < height) acc += inv_sqrt_deg[i + width] * x[i + width];
                if (c > 0) acc += inv_sqrt_deg[i - 1] * x[i - 1];
                if (c + 1 < width) acc += inv_sqrt_deg[i + 1] * x[i + 1];
                y[i] = x[i] + inv_sqrt_deg[i] * acc;
            }
    };
    PartialEigh pe = lanczos_largest(matvec, m, n, /*seed=*/0x9a91acedull);
    Mat rows(n, m);
    std::vector<double> evals(n);
    for (std::size_t c = 0; c < n; ++c) {
        evals[c] = 2.0 - pe.eigenvalues[c];
        for (std::size_t j = 0; j < m; ++j) rows.at(c, j) = pe.vectors.at(j, c);
    }
    return laplacian_from_modes(height, width, m, tau, n, std::move(evals), std::move(rows));
}

// ---- Tokenization ----------------------------------------------------------

namespace {

void require_image(const SpectralBasis& basis, std::span<const double> image) {
    if (image.size() != basis.m)
        throw DimensionError("tokenize: image has " + std::to_string(image.size()) +
                             " pixels, basis expects " + std::to_string(basis.m));
}

void require_match(const SpectralBasis& basis, const TokenSequence& tokens) {
    if (tokens.basis_kind != basis.kind)
        throw ValidationError("reconstruct: tokens from a " + basis_kind_name(tokens.basis_kind) +
                              " basis fed to a " + basis_kind_name(basis.kind) + " basis");
    if (tokens.coefficients.size() != basis.n)
        throw DimensionError("reconstruct: " + std::to_string(tokens.coefficients.size()) +
                             " coefficients for a basis with n = " + std::to_string(basis.n));
    if (tokens.ordering_keys != basis.ordering_keys)
        throw ValidationError("reconstruct: token ordering keys do not match the basis");
}

}  // namespace

SpectralProjection project(const SpectralBasis& basis, std::span<const double> image) {
    require_image(basis, image);
    SpectralProjection out;
    out.tokens.basis_kind = basis.kind;
    out.tokens.ordering_keys = basis.ordering_keys;
    out.tokens.coefficients.resize(basis.n);
    if (basis.kind == BasisKind::kFourier) {
        out.phases.resize(basis.n);
        for (std::size_t i = 0; i < basis.n; ++i) {
            const double* re = basis.vectors.row(i);
            const double* im = re + basis.m;
            const double a = dot({re, basis.m}, image);
            const double b = dot({im, basis.m}, image);
            out.tokens.coefficients[i] = std::hypot(a, b);
            out.phases[i] = std::atan2(b, a);
        }
    } else {
        std::vector<double> centered(image.begin(), image.end());
        for (std::size_t j = 0; j < basis.m; ++j) centered[j] -= basis.mean[j];
        for (std::size_t i = 0; i < basis.n; ++i)
            out.tokens.coefficients[i] = dot({basis.vectors.row(i), basis.m}, centered);
    }
    return out;
}

TokenSequence tokenize(const SpectralBasis& basis, std::span<const double> image) {
    return project(basis, image).tokens;
}

std::vector<double> reconstruct(const SpectralBasis& basis, const SpectralProjection& proj) {
    require_match(basis, proj.tokens);
    std::vector<double> img(basis.m, 0.0);
    if (basis.kind == BasisKind::kFourier) {
        if (proj.phases.size() != basis.n)
            throw ValidationError("reconstruct: Fourier projection is missing phases");
        for (std::size_t i = 0; i < basis.n; ++i) {
            const double a = proj.tokens.coefficients[i] * std::cos(proj.phases[i]);
            const double b = proj.tokens.coefficients[i] * std::sin(proj.phases[i]);
            const double* re = basis.vectors.row(i);
            const double* im = re + basis.m;
            const double w = basis.conj_weight[i];
            for (std::size_t j = 0; j < basis.m; ++j) img[j] += w * (a * re[j] + b * im[j]);
        }
        const double inv = 1.0 / static_cast<double>(basis.m);
        for (double& x : img) x *= inv;
    } else {
        img = basis.mean;
        for (std::size_t i = 0; i < basis.n; ++i) {
            const double s = proj.tokens.coefficients[i];
            const double* v = basis.vectors.row(i);
            for (std::size_t j = 0; j < basis.m; ++j) img[j] += s * v[j];
        }
    }
    return img;
}

std::vector<double> reconstruct(const SpectralBasis& basis, const TokenSequence& tokens) {
    if (basis.kind == BasisKind::kFourier)
        throw ValidationError(
            "reconstruct: Fourier magnitudes alone cannot be inverted; use project() to keep "
            "phases");
    SpectralProjection proj;
    proj.tokens = tokens;
    return reconstruct(basis, proj);
}

// ---- Quality measures ------------------------------------------------------

double psnr(std::span<const double> reference, std::span<const double> estimate) {
    if (reference.size() != estimate.size())
        throw DimensionError("psnr: size mismatch " + std::to_string(reference.size()) + " vs " +
                             std::to_string(estimate.size()));
    if (reference.empty()) throw ValidationError("psnr: empty input");
    double peak = 0.0, mse = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        peak = std::max(peak, std::abs(reference[i]));
        const double d = reference[i] - estimate[i];
        mse += d * d;
    }
    mse /= static_cast<double>(reference.size());
    if (mse == 0.0) return 200.0;
    if (peak == 0.0) return -200.0;
    return std::min(200.0, std::max(-200.0, 10.0 * std::log10(peak * peak / mse)));
}

double energy_compaction_snr(std::span<const double> eigenvalues, std::size_t n) {
    if (n > eigenvalues.size())
        throw ValidationError("energy_compaction_snr: n = " + std::to_string(n) +
                              " exceeds spectrum length " + std::to_string(eigenvalues.size()));
    for (std::size_t i = 1; i < eigenvalues.size(); ++i)
        if (eigenvalues[i] > eigenvalues[i - 1] + 1e-12)
            throw ValidationError("energy_compaction_snr: spectrum not in descending order at " +
                                  std::to_string(i));
    double retained = 0.0, residual = 0.0;
    for (std::size_t i = 0; i < eigenvalues.size(); ++i)
        (i < n ? retained : residual) += eigenvalues[i];
    if (residual <= 0.0) return std::numeric_limits<double>::infinity();
    return retained / residual;
}

double energy_compaction_snr(const SpectralBasis& basis, std::size_t n) {
    if (basis.kind != BasisKind::kPca)
        throw ValidationError("energy_compaction_snr: basis has no covariance spectrum");
    if (n > basis.eigenvalues.size())
        throw ValidationError("energy_compaction_snr: n exceeds the stored spectrum");
    double retained = 0.0, residual = basis.eigenvalue_tail;
    for (std::size_t i = 0; i < basis.eigenvalues.size(); ++i)
        (i < n ? retained : residual) += basis.eigenvalues[i];
    if (residual <= 0.0) return std::numeric_limits<double>::infinity();
    return retained / residual;
}

// ---- Head phantom ----------------------------------------------------------

namespace {

struct Ellipse {
    double a, b, x0, y0, phi_deg, intensity;
};

// Standard ten-ellipse head phantom with the low-contrast intensity variant.
constexpr Ellipse kPhantom[10] = {
    {0.6900, 0.9200, 0.00, 0.0000, 0.0, 1.00},
    {0.6624, 0.8740, 0.00, -0.0184, 0.0, -0.80},
    {0.1100, 0.3100, 0.22, 0.0000, -18.0, -0.20},
    {0.1600, 0.4100, -0.22, 0.0000, 18.0, -0.20},
    {0.2100, 0.2500, 0.00, 0.3500, 0.0, 0.10},
    {0.0460, 0.0460, 0.00, 0.1000, 0.0, 0.10},
    {0.0460, 0.0460, 0.00, -0.1000, 0.0, 0.10},
    {0.0460, 0.0230, -0.08, -0.6050, 0.0, 0.10},
    {0.0230, 0.0230, 0.00, -0.6060, 0.0, 0.10},
    {0.0230, 0.0460, 0.06, -0.6050, 0.0, 0.10},
};

}  // namespace

std::vector<double> shepp_logan(std::size_t size, std::span<const double> intensity_scale) {
    if (size < 16)
        throw ValidationError("shepp_logan: size must be >= 16, got " + std::to_string(size));
    if (intensity_scale.size() != 10)
        throw ValidationError("shepp_logan: need exactly 10 intensity scales");
    std::vector<double> img(size * size, 0.0);
    for (std::size_t e = 0; e < 10; ++e) {
        const Ellipse& el = kPhantom[e];
        const double amp = el.intensity * intensity_scale[e];
        const double phi = el.phi_deg * kPi / 180.0;
        const double cp = std::cos(phi), sp = std::sin(phi);
        for (std::size_t r = 0; r < size; ++r) {
            const double y = 1.0 - (2.0 * r + 1.0) / static_cast<double>(size);
            for (std::size_t c = 0; c < size; ++c) {
                const double x = -1.0 + (2.0 * c + 1.0) / static_cast<double>(size);
                const double dx = x - el.x0;
                const double dy = y - el.y0;
                const double u = (dx * cp + dy * sp) / el.a;
                const double v = (-dx * sp + dy * cp) / el.b;
                if (u * u + v * v <= 1.0) img[r * size + c] += amp;
            }
        }
    }
    for (double& x : img) x = std::min(1.0, std::max(0.0, x));
    return img;
}

std::vector<double> shepp_logan(std::size_t size) {
    const std::vector<double> unit(10, 1.0);
    return shepp_logan(size, unit);
}

// ---- Serialization ---------------------------------------------------------

namespace {

void write_doubles(std::ofstream& out, std::span<const double> v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::ifstream& in, std::vector<double>& v, std::size_t count,
                  const std::string& what) {
    v.resize(count);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw ValidationError("load_basis: truncated " + what + " block");
}

}  // namespace

void save_basis(const SpectralBasis& basis, const std::string& path) {
    nlohmann::json header;
    header["kind"] = basis_kind_name(basis.kind);
    header["n"] = basis.n;
    header["m"] = basis.m;
    header["tau"] = basis.tau;
    header["height"] = basis.height;
    header["width"] = basis.width;
    header["eigenvalues"] = basis.eigenvalues;
    header["eigenvalue_tail"] = basis.eigenvalue_tail;
    header["freq_row"] = basis.freq_row;
    header["freq_col"] = basis.freq_col;
    header["conj_weight"] = basis.conj_weight;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("save_basis: cannot open " + path);
    out << header.dump() << "\n";
    write_doubles(out, basis.mean);
    write_doubles(out, basis.vectors.v);
    write_doubles(out, basis.ordering_keys);
    write_doubles(out, basis.hierarchy_weights);
    if (!out) throw ValidationError("save_basis: write failed for " + path);
}

SpectralBasis load_basis(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("load_basis: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("load_basis: missing header in " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("load_basis: bad header in " + path + ": " + e.what());
    }
    SpectralBasis basis;
    basis.kind = basis_kind_from_name(header.at("kind").get<std::string>());
    basis.n = header.at("n").get<std::size_t>();
    basis.m = header.at("m").get<std::size_t>();
    basis.tau = header.at("tau").get<double>();
    basis.height = header.value("height", std::size_t{0});
    basis.width = header.value("width", std::size_t{0});
    basis.eigenvalues = header.value("eigenvalues", std::vector<double>{});
    basis.eigenvalue_tail = header.value("eigenvalue_tail", 0.0);
    basis.freq_row = header.value("freq_row", std::vector<int>{});
    basis.freq_col = header.value("freq_col", std::vector<int>{});
    basis.conj_weight = header.value("conj_weight", std::vector<double>{});

    const std::size_t row_len = basis.kind == BasisKind::kFourier ? 2 * basis.m : basis.m;
    read_doubles(in, basis.mean, basis.m, "mean");
    basis.vectors = Mat(basis.n, row_len);
    read_doubles(in, basis.vectors.v, basis.n * row_len, "vectors");
    read_doubles(in, basis.ordering_keys, basis.n, "ordering keys");
    read_doubles(in, basis.hierarchy_weights, basis.n, "hierarchy weights");
    return basis;
}

}  // namespace svit
