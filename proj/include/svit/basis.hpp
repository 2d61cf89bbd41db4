#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "svit/mat.hpp"

namespace svit {

enum class BasisKind { kPca, kFourier, kLaplacian };

std::string basis_kind_name(BasisKind k);
BasisKind basis_kind_from_name(const std::string& name);

// An ordered spectral basis over flattened images of m pixels. `vectors`
// holds one mode per row: length m for PCA/Laplacian; for Fourier, length 2m
// as a real plane followed by an imaginary plane. `ordering_keys` make the
// hierarchy explicit (component index, radial frequency, or eigenvalue) and
// must be nondecreasing in coarseness. `hierarchy_weights` are the fixed
// per-mode scales applied by the embedder: 1/i for PCA, 1/(1+rho) for
// Fourier, exp(-lambda*tau) for the Laplacian.
struct SpectralBasis {
    BasisKind kind = BasisKind::kPca;
    std::size_t n = 0;       // retained modes
    std::size_t m = 0;       // pixels per image
    std::size_t height = 0;  // 0 when unknown (PCA fitted on flat vectors)
    std::size_t width = 0;
    Mat vectors;
    std::vector<double> ordering_keys;
    std::vector<double> mean;  // training mean for PCA; zeros otherwise
    std::vector<double> hierarchy_weights;
    double tau = 1.0;  // Laplacian diffusion scale

    // PCA extras: covariance spectrum in descending order. May be truncated
    // when the decomposition was itself partial; `eigenvalue_tail` then holds
    // the exact sum of the remaining eigenvalues (from the covariance trace).
    std::vector<double> eigenvalues;
    double eigenvalue_tail = 0.0;

    // Fourier extras: signed frequency vector and conjugate multiplicity
    // (1 self-conjugate, 2 paired) per retained mode.
    std::vector<int> freq_row, freq_col;
    std::vector<double> conj_weight;
};

// Ordered coefficients for one image under a basis. Fourier coefficients are
// magnitudes (translation invariant); PCA/Laplacian are signed projections.
struct TokenSequence {
    BasisKind basis_kind = BasisKind::kPca;
    std::vector<double> coefficients;
    std::vector<double> ordering_keys;
};

// Tokens plus the transient phase information needed to invert a Fourier
// tokenization. For PCA/Laplacian the phases stay empty.
struct SpectralProjection {
    TokenSequence tokens;
    std::vector<double> phases;
};

// Fits a PCA basis on N >= 2 flattened images (rows of `images`). Requires
// n <= min(N-1, m) and nonzero total variance. The decomposition runs on
// whichever of the m x m covariance / N x N Gram matrix is smaller, and
// switches to a partial Lanczos solve past a dense-size threshold; all routes
// agree under the shared sign convention.
SpectralBasis fit_pca(const Mat& images, std::size_t n, std::size_t height = 0,
                      std::size_t width = 0);

// 2-D Fourier modes on a height x width grid, one row per canonical
// conjugate class, ordered by (radial frequency, angle). n may not exceed
// the number of canonical classes.
SpectralBasis build_fourier(std::size_t height, std::size_t width, std::size_t n);

// Symmetric normalized Laplacian L = I - D^{-1/2} W D^{-1/2} of the
// 4-neighbor grid graph; modes are the n smoothest eigenvectors.
SpectralBasis build_laplacian_grid(std::size_t height, std::size_t width, double tau,
                                   std::size_t n);

// Same, for an arbitrary nonnegative symmetric adjacency. Isolated vertices
// are a ValidationError.
SpectralBasis build_laplacian(const Mat& adjacency, double tau, std::size_t n);

TokenSequence tokenize(const SpectralBasis& basis, std::span<const double> image);

// Tokenize while keeping Fourier phases so the projection can be inverted.
SpectralProjection project(const SpectralBasis& basis, std::span<const double> image);

std::vector<double> reconstruct(const SpectralBasis& basis, const SpectralProjection& proj);
// Convenience overload for phase-free bases; Fourier tokens alone cannot be
// inverted and raise ValidationError.
std::vector<double> reconstruct(const SpectralBasis& basis, const TokenSequence& tokens);

// Peak signal-to-noise ratio in dB against the reference's peak, capped at
// 200 dB for exact matches.
double psnr(std::span<const double> reference, std::span<const double> estimate);

// Retained-to-residual variance ratio sum(lambda[i<n]) / sum(lambda[i>=n])
// for a descending spectrum; +inf when the residual is zero.
double energy_compaction_snr(std::span<const double> eigenvalues, std::size_t n);
// Same from a fitted PCA basis, using its stored spectrum and exact tail.
double energy_compaction_snr(const SpectralBasis& basis, std::size_t n);

// Standard head phantom on a size x size grid, values in [0,1]; size >= 16.
std::vector<double> shepp_logan(std::size_t size);
// Variant with the ten ellipse intensities scaled individually (used to build
// PCA training sets of related phantoms).
std::vector<double> shepp_logan(std::size_t size, std::span<const double> intensity_scale);

// One-line JSON header (kind, n, m, tau, geometry, PCA spectrum) followed by
// row-major 64-bit little-endian blobs: mean, vectors, ordering keys, weights.
void save_basis(const SpectralBasis& basis, const std::string& path);
SpectralBasis load_basis(const std::string& path);

}  // namespace svit
