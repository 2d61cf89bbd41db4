#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#define DOCTEST_CONFIG_SUPER_FAST_ASSERTS
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "svit/basis.hpp"
#include "svit/runner.hpp"
#include "test_util.hpp"

using namespace svit;

namespace {

double recon_mse(const SpectralBasis& basis, const Mat& images) {
    double acc = 0.0;
    for (std::size_t i = 0; i < images.rows; ++i) {
        std::span<const double> x(images.row(i), images.cols);
        const std::vector<double> recon = reconstruct(basis, project(basis, x));
        for (std::size_t j = 0; j < images.cols; ++j) {
            const double d = x[j] - recon[j];
            acc += d * d;
        }
    }
    return acc / static_cast<double>(images.rows);
}

std::vector<double> circular_shift(std::span<const double> img, std::size_t h, std::size_t w,
                                   std::size_t dr, std::size_t dc) {
    std::vector<double> out(h * w);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
            out[((r + dr) % h) * w + ((c + dc) % w)] = img[r * w + c];
    return out;
}

void check_planted_recovery(std::size_t N, std::size_t m, std::size_t r, std::size_t n,
                            std::uint64_t seed, double tol) {
    std::vector<double> lambda(r);
    for (std::size_t j = 0; j < r; ++j) lambda[j] = 10.0 * std::pow(0.8, static_cast<double>(j));
    const tu::Planted planted = tu::make_planted(N, m, r, lambda, seed);
    SpectralBasis basis = fit_pca(planted.images, n);
    REQUIRE(basis.n == n);
    REQUIRE(basis.m == m);

    for (std::size_t j = 0; j < n; ++j) {
        CHECK(basis.eigenvalues[j] == doctest::Approx(lambda[j]).epsilon(tol));
        for (std::size_t p = 0; p < m; ++p)
            CHECK(std::abs(basis.vectors.at(j, p) - planted.directions.at(j, p)) < 10 * tol);
    }
    for (std::size_t j = 0; j < m; ++j)
        CHECK(basis.mean[j] == doctest::Approx(planted.mean[j]).epsilon(1e-9));

    // The stored spectrum plus the exact tail always accounts for the trace.
    double total = basis.eigenvalue_tail;
    for (double ev : basis.eigenvalues) total += ev;
    double want_total = 0.0;
    for (double lv : lambda) want_total += lv;
    CHECK(total == doctest::Approx(want_total).epsilon(1e-8));
}

}  // namespace

// ---- PCA --------------------------------------------------------------------

TEST_CASE("pca: antipodal pair has one component carrying all the energy") {
    const std::size_t m = 9;
    std::vector<double> u = tu::randn(m, 5);
    Mat images(2, m);
    for (std::size_t j = 0; j < m; ++j) {
        images.at(0, j) = u[j];
        images.at(1, j) = -u[j];
    }
    SpectralBasis basis = fit_pca(images, 1);
    double norm2 = 0.0;
    for (double x : u) norm2 += x * x;
    CHECK(basis.eigenvalues[0] == doctest::Approx(norm2).epsilon(1e-10));
    tu::fix_sign_row(u.data(), m);
    for (std::size_t j = 0; j < m; ++j)
        CHECK(basis.vectors.at(0, j) == doctest::Approx(u[j] / std::sqrt(norm2)).epsilon(1e-9));
}

TEST_CASE("pca: planted spectrum recovered exactly (covariance-side route)") {
    check_planted_recovery(/*N=*/40, /*m=*/18, /*r=*/6, /*n=*/6, 2024, 1e-8);
}

TEST_CASE("pca: planted spectrum recovered exactly (Gram-side route)") {
    check_planted_recovery(/*N=*/12, /*m=*/30, /*r=*/6, /*n=*/6, 2025, 1e-8);
}

TEST_CASE("pca: planted spectrum recovered by the partial iterative route") {
    // Both sides above the dense threshold; truncated spectrum plus exact tail.
    check_planted_recovery(/*N=*/620, /*m=*/640, /*r=*/20, /*n=*/5, 2026, 1e-6);
}

TEST_CASE("pca: mean reconstruction error equals the residual spectrum") {
    const std::size_t N = 50, m = 30, n = 7;
    Mat images(N, m);
    images.v = tu::randn(N * m, 77);
    SpectralBasis basis = fit_pca(images, n);
    double tail = 0.0;
    for (std::size_t j = n; j < basis.eigenvalues.size(); ++j) tail += basis.eigenvalues[j];
    const double mse = recon_mse(basis, images);  // summed over pixels, averaged over images
    CHECK(mse == doctest::Approx(tail).epsilon(1e-8));
}

TEST_CASE("pca: projection is idempotent and zero tokens restore the mean") {
    Mat images(20, 25);
    images.v = tu::randn(20 * 25, 88);
    SpectralBasis basis = fit_pca(images, 5);
    const std::vector<double> x = tu::randn(25, 89);
    const TokenSequence t1 = tokenize(basis, x);
    const std::vector<double> recon = reconstruct(basis, t1);
    const TokenSequence t2 = tokenize(basis, recon);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(t2.coefficients[i] == doctest::Approx(t1.coefficients[i]).epsilon(1e-8));
    const std::vector<double> recon2 = reconstruct(basis, t2);
    for (std::size_t j = 0; j < 25; ++j)
        CHECK(recon2[j] == doctest::Approx(recon[j]).epsilon(1e-10));

    TokenSequence zeros;
    zeros.basis_kind = BasisKind::kPca;
    zeros.coefficients.assign(5, 0.0);
    zeros.ordering_keys = basis.ordering_keys;
    const std::vector<double> mean_back = reconstruct(basis, zeros);
    for (std::size_t j = 0; j < 25; ++j) CHECK(mean_back[j] == doctest::Approx(basis.mean[j]));
}

TEST_CASE("pca: the component ordering is a hierarchy with halving weights") {
    Mat images(10, 8);
    images.v = tu::randn(80, 91);
    SpectralBasis basis = fit_pca(images, 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(basis.ordering_keys[i] == doctest::Approx(static_cast<double>(i + 1)));
        CHECK(basis.hierarchy_weights[i] == doctest::Approx(1.0 / static_cast<double>(i + 1)));
    }
    CHECK(basis.hierarchy_weights[1] == doctest::Approx(0.5 * basis.hierarchy_weights[0]));
}

TEST_CASE("pca: retained subspace beats random subspaces of the same size") {
    std::vector<double> lambda(16);
    for (std::size_t j = 0; j < 16; ++j) lambda[j] = 8.0 * std::pow(0.85, static_cast<double>(j));
    const tu::Planted planted = tu::make_planted(40, 16, 16, lambda, 4242);
    SpectralBasis pca = fit_pca(planted.images, 4);
    const double mse_pca = recon_mse(pca, planted.images);
    for (std::uint64_t trial = 0; trial < 5; ++trial) {
        SpectralBasis rnd = pca;  // same mean and metadata, random directions
        rnd.vectors = tu::orthonormal_rows(4, 16, 9000 + trial);
        const double mse_rnd = recon_mse(rnd, planted.images);
        CHECK(mse_rnd >= mse_pca * (1.0 - 1e-12));
    }
}

TEST_CASE("pca: input validation") {
    Mat one(1, 4);
    one.v = {1, 2, 3, 4};
    CHECK_THROWS_AS(fit_pca(one, 1), ValidationError);

    Mat images(5, 4);
    images.v = tu::randn(20, 17);
    CHECK_THROWS_AS(fit_pca(images, 0), ValidationError);
    CHECK_THROWS_AS(fit_pca(images, 5), ValidationError);    // n > min(N-1, m)
    CHECK_THROWS_AS(fit_pca(images, 2, 3, 3), DimensionError);  // 3x3 != 4 pixels

    Mat flat(3, 4, 1.0);  // constant -> zero variance
    CHECK_THROWS_AS(fit_pca(flat, 1), ValidationError);
}

// ---- Fourier ------------------------------------------------------------------

TEST_CASE("fourier: canonical mode count on a 4x4 grid is 10") {
    SpectralBasis b = build_fourier(4, 4, 10);
    CHECK(b.n == 10);
    CHECK_THROWS_AS(build_fourier(4, 4, 11), ValidationError);
    // DC first: zero frequency, self-conjugate, weight 1/(1+0).
    CHECK(b.ordering_keys[0] == doctest::Approx(0.0));
    CHECK(b.freq_row[0] == 0);
    CHECK(b.freq_col[0] == 0);
    CHECK(b.conj_weight[0] == doctest::Approx(1.0));
    CHECK(b.hierarchy_weights[0] == doctest::Approx(1.0));
    // Radial ordering is nondecreasing and weights follow 1/(1+rho).
    for (std::size_t i = 1; i < 10; ++i) {
        CHECK(b.ordering_keys[i] >= b.ordering_keys[i - 1]);
        CHECK(b.hierarchy_weights[i] == doctest::Approx(1.0 / (1.0 + b.ordering_keys[i])));
    }
    // The (H/2, W/2) Nyquist mode is self-conjugate on an even grid.
    bool found = false;
    for (std::size_t i = 0; i < 10; ++i)
        if (b.freq_row[i] == 2 && b.freq_col[i] == 2) {
            found = true;
            CHECK(b.conj_weight[i] == doctest::Approx(1.0));
        }
    CHECK(found);
}

TEST_CASE("fourier: full canonical set reconstructs any image exactly") {
    SpectralBasis b = build_fourier(4, 4, 10);
    const std::vector<double> img = tu::randn(16, 253);
    const SpectralProjection proj = project(b, img);
    const std::vector<double> recon = reconstruct(b, proj);
    for (std::size_t j = 0; j < 16; ++j) CHECK(recon[j] == doctest::Approx(img[j]).epsilon(1e-10));
}

TEST_CASE("fourier: token magnitudes ignore circular shifts") {
    SpectralBasis b = build_fourier(8, 8, 20);
    const std::vector<double> img = tu::randn(64, 321);
    const TokenSequence base = tokenize(b, img);
    for (std::size_t dr = 0; dr < 8; dr += 3)
        for (std::size_t dc = 0; dc < 8; ++dc) {
            const std::vector<double> shifted = circular_shift(img, 8, 8, dr, dc);
            const TokenSequence t = tokenize(b, shifted);
            for (std::size_t i = 0; i < 20; ++i)
                CHECK(std::abs(t.coefficients[i] - base.coefficients[i]) < 1e-9);
        }
}

TEST_CASE("fourier: DC token is the absolute pixel sum") {
    SpectralBasis b = build_fourier(4, 4, 1);
    std::vector<double> img = tu::randn(16, 52);
    double sum = 0.0;
    for (double x : img) sum += x;
    CHECK(tokenize(b, img).coefficients[0] == doctest::Approx(std::abs(sum)).epsilon(1e-12));
}

TEST_CASE("fourier: magnitudes alone cannot be inverted") {
    SpectralBasis b = build_fourier(4, 4, 6);
    const TokenSequence t = tokenize(b, tu::randn(16, 53));
    CHECK_THROWS_AS(reconstruct(b, t), ValidationError);
}

// ---- Laplacian ------------------------------------------------------------------

TEST_CASE("laplacian: two-node path oracle") {
    Mat adj(2, 2);
    adj.at(0, 1) = adj.at(1, 0) = 1.0;
    const double tau = 0.7;
    SpectralBasis b = build_laplacian(adj, tau, 2);
    CHECK(b.ordering_keys[0] == doctest::Approx(0.0));
    CHECK(b.ordering_keys[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(b.hierarchy_weights[0] == doctest::Approx(1.0));
    CHECK(b.hierarchy_weights[1] == doctest::Approx(std::exp(-2.0 * tau)).epsilon(1e-12));
    const double s = 1.0 / std::sqrt(2.0);
    CHECK(b.vectors.at(0, 0) == doctest::Approx(s).epsilon(1e-12));
    CHECK(b.vectors.at(0, 1) == doctest::Approx(s).epsilon(1e-12));
    CHECK(b.vectors.at(1, 0) == doctest::Approx(s).epsilon(1e-12));
    CHECK(b.vectors.at(1, 1) == doctest::Approx(-s).epsilon(1e-12));
}

TEST_CASE("laplacian: grid eigenvalues live in [0, 2], smoothest first") {
    SpectralBasis b = build_laplacian_grid(5, 4, 1.0, 20);
    CHECK(std::abs(b.ordering_keys[0]) < 1e-12);
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(b.ordering_keys[i] >= 0.0);
        CHECK(b.ordering_keys[i] <= 2.0 + 1e-9);
        if (i) CHECK(b.ordering_keys[i] >= b.ordering_keys[i - 1] - 1e-12);
        CHECK(b.hierarchy_weights[i] ==
              doctest::Approx(std::exp(-b.ordering_keys[i])).epsilon(1e-12));
    }
}

TEST_CASE("laplacian: constant signal on a regular graph excites only the null mode") {
    // 8-cycle: every degree is 2, so the lambda=0 eigenvector is the constant
    // vector and all other modes are orthogonal to a constant image.
    const std::size_t m = 8;
    Mat adj(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        adj.at(i, (i + 1) % m) = 1.0;
        adj.at((i + 1) % m, i) = 1.0;
    }
    SpectralBasis b = build_laplacian(adj, 1.0, m);
    const std::vector<double> ones(m, 1.0);
    const TokenSequence t = tokenize(b, ones);
    CHECK(t.coefficients[0] == doctest::Approx(std::sqrt(static_cast<double>(m))).epsilon(1e-10));
    for (std::size_t i = 1; i < m; ++i) CHECK(std::abs(t.coefficients[i]) < 1e-10);
}

TEST_CASE("laplacian: rejects bad graphs and bad tau") {
    Mat adj(3, 3);
    adj.at(0, 1) = adj.at(1, 0) = 1.0;  // vertex 2 isolated
    CHECK_THROWS_AS(build_laplacian(adj, 1.0, 2), ValidationError);
    Mat asym(2, 2);
    asym.at(0, 1) = 1.0;
    CHECK_THROWS_AS(build_laplacian(asym, 1.0, 1), ValidationError);
    Mat neg(2, 2);
    neg.at(0, 1) = neg.at(1, 0) = -1.0;
    CHECK_THROWS_AS(build_laplacian(neg, 1.0, 1), ValidationError);
    Mat ok(2, 2);
    ok.at(0, 1) = ok.at(1, 0) = 1.0;
    CHECK_THROWS_AS(build_laplacian(ok, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(build_laplacian_grid(4, 4, -1.0, 4), ValidationError);
}

TEST_CASE("laplacian: construction is deterministic") {
    SpectralBasis a = build_laplacian_grid(6, 6, 1.5, 12);
    SpectralBasis b = build_laplacian_grid(6, 6, 1.5, 12);
    CHECK(a.vectors.v == b.vectors.v);
    CHECK(a.ordering_keys == b.ordering_keys);
}

// ---- Quality measures ------------------------------------------------------------

TEST_CASE("psnr: 20 dB oracle and the exact-match cap") {
    std::vector<double> ref(100, 0.0);
    ref[0] = 1.0;  // peak 1
    std::vector<double> est(ref);
    for (double& x : est) x += 0.1;  // MSE 0.01
    CHECK(psnr(ref, est) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(psnr(ref, ref) == doctest::Approx(200.0));
    std::vector<double> near(ref);
    near[5] += 1e-13;  // formula would exceed the cap
    CHECK(psnr(ref, near) == doctest::Approx(200.0));
    const std::vector<double> zeros(100, 0.0);
    CHECK(psnr(zeros, est) == doctest::Approx(-200.0));  // no peak to measure against
    CHECK_THROWS_AS(psnr(ref, std::vector<double>(99, 0.0)), DimensionError);
}

TEST_CASE("energy compaction: ratio oracle, infinite residual, validation") {
    const std::vector<double> spectrum = {4.0, 2.0, 1.0, 1.0};
    CHECK(energy_compaction_snr(spectrum, 2) == doctest::Approx(3.0));
    CHECK(energy_compaction_snr(spectrum, 3) == doctest::Approx(7.0));
    const std::vector<double> rank3 = {4.0, 2.0, 1.0, 0.0};
    CHECK(std::isinf(energy_compaction_snr(rank3, 3)));
    CHECK_THROWS_AS(energy_compaction_snr(spectrum, 5), ValidationError);
    const std::vector<double> ascending = {1.0, 2.0};
    CHECK_THROWS_AS(energy_compaction_snr(ascending, 1), ValidationError);

    Mat images(12, 10);
    images.v = tu::randn(120, 61);
    SpectralBasis pca = fit_pca(images, 3);
    double retained = 0.0, residual = 0.0;
    for (std::size_t j = 0; j < pca.eigenvalues.size(); ++j)
        (j < 3 ? retained : residual) += pca.eigenvalues[j];
    CHECK(energy_compaction_snr(pca, 3) == doctest::Approx(retained / residual).epsilon(1e-12));
    CHECK_THROWS_AS(energy_compaction_snr(build_fourier(4, 4, 4), 2), ValidationError);
}

// ---- Head phantom -----------------------------------------------------------------

TEST_CASE("phantom: range, landmark values and top-region symmetry") {
    const std::size_t size = 64;
    const std::vector<double> img = shepp_logan(size);
    for (double x : img) {
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
    }
    // Near the origin the two big ellipses overlap: 1.0 - 0.8.
    CHECK(img[31 * size + 31] == doctest::Approx(0.2).epsilon(1e-12));
    // Corners are outside the skull.
    CHECK(img[0] == doctest::Approx(0.0));
    CHECK(img[size * size - 1] == doctest::Approx(0.0));
    // Rows with y >= 0.45 only see ellipses centered on the vertical axis, so
    // they are perfectly mirror-symmetric (lower rows are not: three small
    // bottom ellipses and the two tilted ones sit off-axis asymmetrically).
    for (std::size_t r = 0; r < size; ++r) {
        const double y = 1.0 - (2.0 * r + 1.0) / static_cast<double>(size);
        if (y < 0.45) continue;
        for (std::size_t c = 0; c < size; ++c)
            CHECK(img[r * size + c] == doctest::Approx(img[r * size + (size - 1 - c)]));
    }
}

TEST_CASE("phantom: intensity scaling and validation") {
    std::vector<double> scale(10, 1.0);
    scale[4] = 1.5;  // brighten one interior ellipse only
    const std::vector<double> base = shepp_logan(32);
    const std::vector<double> bright = shepp_logan(32, scale);
    double diff = 0.0;
    for (std::size_t j = 0; j < base.size(); ++j) diff += std::abs(bright[j] - base[j]);
    CHECK(diff > 0.0);
    CHECK_THROWS_AS(shepp_logan(15), ValidationError);
    CHECK_THROWS_AS(shepp_logan(32, std::vector<double>(9, 1.0)), ValidationError);
}

// ---- Prefixes and serialization ---------------------------------------------------

TEST_CASE("basis_prefix: a prefix is the coarser basis with identical tokens") {
    SpectralBasis full = build_fourier(6, 6, 12);
    SpectralBasis head = basis_prefix(full, 5);
    CHECK(head.n == 5);
    CHECK(head.freq_row.size() == 5);
    const std::vector<double> img = tu::randn(36, 71);
    const TokenSequence tf = tokenize(full, img);
    const TokenSequence th = tokenize(head, img);
    for (std::size_t i = 0; i < 5; ++i) CHECK(th.coefficients[i] == tf.coefficients[i]);
    CHECK_THROWS_AS(basis_prefix(full, 0), ValidationError);
    CHECK_THROWS_AS(basis_prefix(full, 13), ValidationError);
}

TEST_CASE("serialization: PCA, Fourier and Laplacian bases round-trip exactly") {
    const std::string dir = tu::fresh_dir("basis_roundtrip");

    Mat images(14, 12);
    images.v = tu::randn(14 * 12, 81);
    SpectralBasis pca = fit_pca(images, 4, 4, 3);
    save_basis(pca, dir + "/pca.basis");
    SpectralBasis pca2 = load_basis(dir + "/pca.basis");
    CHECK(pca2.kind == BasisKind::kPca);
    CHECK(pca2.n == pca.n);
    CHECK(pca2.height == 4);
    CHECK(pca2.width == 3);
    CHECK(pca2.vectors.v == pca.vectors.v);
    CHECK(pca2.mean == pca.mean);
    CHECK(pca2.eigenvalues == pca.eigenvalues);
    CHECK(pca2.eigenvalue_tail == pca.eigenvalue_tail);
    CHECK(pca2.ordering_keys == pca.ordering_keys);
    CHECK(pca2.hierarchy_weights == pca.hierarchy_weights);

    SpectralBasis fou = build_fourier(6, 4, 8);
    save_basis(fou, dir + "/fourier.basis");
    SpectralBasis fou2 = load_basis(dir + "/fourier.basis");
    CHECK(fou2.kind == BasisKind::kFourier);
    CHECK(fou2.vectors.cols == 2 * fou.m);
    CHECK(fou2.vectors.v == fou.vectors.v);
    CHECK(fou2.freq_row == fou.freq_row);
    CHECK(fou2.freq_col == fou.freq_col);
    CHECK(fou2.conj_weight == fou.conj_weight);
    const std::vector<double> img = tu::randn(24, 82);
    CHECK(tokenize(fou2, img).coefficients == tokenize(fou, img).coefficients);

    SpectralBasis lap = build_laplacian_grid(4, 5, 2.5, 6);
    save_basis(lap, dir + "/laplacian.basis");
    SpectralBasis lap2 = load_basis(dir + "/laplacian.basis");
    CHECK(lap2.kind == BasisKind::kLaplacian);
    CHECK(lap2.tau == 2.5);
    CHECK(lap2.vectors.v == lap.vectors.v);
    CHECK(lap2.ordering_keys == lap.ordering_keys);

    CHECK_THROWS_AS(load_basis(dir + "/missing.basis"), ValidationError);
}

TEST_CASE("reconstruct: token/basis mismatches are rejected") {
    Mat images(10, 16);
    images.v = tu::randn(160, 91);
    SpectralBasis pca = fit_pca(images, 3, 4, 4);
    SpectralBasis lap = build_laplacian_grid(4, 4, 1.0, 3);
    const std::vector<double> img = tu::randn(16, 92);
    TokenSequence t = tokenize(pca, img);
    CHECK_THROWS_AS(reconstruct(lap, t), ValidationError);  // wrong kind
    TokenSequence wrong = tokenize(pca, img);
    wrong.coefficients.pop_back();
    CHECK_THROWS_AS(reconstruct(pca, wrong), DimensionError);
    TokenSequence keys = tokenize(pca, img);
    keys.ordering_keys[0] += 1.0;
    CHECK_THROWS_AS(reconstruct(pca, keys), ValidationError);
    CHECK_THROWS_AS(tokenize(pca, tu::randn(15, 93)), DimensionError);
}
