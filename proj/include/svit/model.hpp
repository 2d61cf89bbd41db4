#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "svit/basis.hpp"
#include "svit/embed.hpp"
#include "svit/tensor.hpp"

namespace svit {

enum class Variant { kSpectral, kSpatial };
enum class Pooling { kMean, kClassToken };

std::string variant_name(Variant v);

// Architecture description shared by the spectral model and its
// parameter-matched spatial twin. `n_tokens` is the number of retained
// spectral modes for the spectral variant; for the spatial variant the token
// count is derived from the image and patch sizes at construction.
struct ModelSpec {
    Variant variant = Variant::kSpectral;
    BasisKind basis_kind = BasisKind::kPca;
    std::size_t n_tokens = 16;
    std::size_t patch_size = 7;  // spatial only
    std::size_t d_e = 16;
    std::size_t d_ff = 32;
    std::size_t heads = 2;
    std::size_t layers = 2;
    Pooling pooling = Pooling::kMean;
    bool shared_embed = false;
    bool embed_bias = false;
};

// Non-overlapping p x p patches in row-major patch order; rows are flattened
// patches of length p*p. Image sides must be divisible by p.
Mat patchify(std::span<const double> image, std::size_t height, std::size_t width, std::size_t p);

// ---- Stand-alone attention pieces (used directly in tests/audits) ----------

// softmax(q k^T / sqrt(d_k)) v with q,k: n.d_k and v: n.d_v.
struct AttentionResult {
    Tensor output;   // n.d_v
    Tensor weights;  // n.n, rows sum to 1
};
AttentionResult attention(Graph& g, const Tensor& q, const Tensor& k, const Tensor& v);

// alpha = softmax(h w_q (h w_k)^T / sqrt(d_k)) for embeddings h: n.d_e.
Tensor attention_weights(Graph& g, const Tensor& h, const Tensor& w_q, const Tensor& w_k);
// alpha (h w_v): re-mixes value projections with the given weights.
Tensor contextualize(Graph& g, const Tensor& h, const Tensor& alpha, const Tensor& w_v);

// ---- Cost accounting --------------------------------------------------------

// Closed-form multiply counts for one forward pass:
//   spec      n*m        (projection of one image onto n modes)
//   embed     n*d_e
//   per layer 3*n*d_e^2 + 2*n^2*d_e   (Q,K,V projections; per-head q k^T and
//                                      alpha v, summed over heads)
//   total     spec + embed + layers*per_layer
struct CostBreakdown {
    std::uint64_t cost_spec = 0;
    std::uint64_t cost_embed = 0;
    std::uint64_t cost_trans_per_layer = 0;
    std::uint64_t cost_total = 0;
};
CostBreakdown count_cost(std::size_t n_tokens, std::size_t m, std::size_t d_e,
                         std::size_t layers);

// Runs the real projection/attention kernels (Q,K,V projections, per-head
// q k^T and alpha v; no output projection) under the multiply counter and
// returns the measured count. Must equal cost_trans_per_layer exactly.
std::uint64_t measured_attention_multiplies(std::size_t n_tokens, std::size_t d_e,
                                            std::size_t heads, std::uint64_t seed);

// ---- The classifier ---------------------------------------------------------

// Pre-norm transformer encoder over either spectral tokens or spatial
// patches, pooled to a single logit. Attention projections carry no bias;
// the feed-forward and the patch embedding do. Init: normal(0, 0.02),
// zero biases, unit layer-norm gains.
class ViTClassifier {
public:
    // Spectral variant; takes ownership of the fitted basis.
    ViTClassifier(const ModelSpec& spec, SpectralBasis basis, std::uint64_t seed);
    // Spatial variant for height x width images.
    ViTClassifier(const ModelSpec& spec, std::size_t height, std::size_t width,
                  std::uint64_t seed);

    // Token extraction / patching, done once per image outside the training loop.
    std::vector<double> prepare(std::span<const double> image) const;

    // Forward pass to the logit. `attn` (optional) receives the post-softmax
    // attention maps, layers * heads matrices of n x n.
    Tensor forward_prepared(Graph& g, std::span<const double> prepared,
                            std::vector<Mat>* attn = nullptr) const;
    Tensor forward(Graph& g, std::span<const double> image,
                   std::vector<Mat>* attn = nullptr) const;

    std::vector<Param*> params();
    std::size_t param_count() const;
    const ModelSpec& spec() const { return spec_; }
    const SpectralBasis* basis() const { return basis_ ? &*basis_ : nullptr; }
    std::size_t token_count() const { return tokens_; }
    std::size_t prepared_size() const;

    // Single-file checkpoint: one-line JSON manifest (architecture, seed,
    // epoch, metrics, parameter order) + parameter values as a flat 64-bit
    // little-endian blob. A spectral checkpoint references its basis file by
    // name; save the basis separately with save_basis().
    void save_checkpoint(const std::string& path, std::uint64_t seed, std::size_t epoch,
                         const std::vector<std::pair<std::string, double>>& metrics,
                         const std::string& basis_file = "") const;
    static ViTClassifier load_checkpoint(const std::string& path,
                                         std::optional<SpectralBasis> basis = std::nullopt);

private:
    struct Block {
        std::unique_ptr<Param> ln1_g, ln1_b;
        std::unique_ptr<Param> w_q, w_k, w_v, w_o;
        std::unique_ptr<Param> ln2_g, ln2_b;
        std::unique_ptr<Param> w1, b1, w2, b2;
    };

    void build(std::uint64_t seed);
    Tensor encode(Graph& g, Tensor h, std::vector<Mat>* attn) const;

    ModelSpec spec_;
    std::optional<SpectralBasis> basis_;
    std::unique_ptr<SpectralEmbedder> embedder_;          // spectral
    std::unique_ptr<Param> patch_w_, patch_b_, patch_pos_;  // spatial
    std::unique_ptr<Param> cls_;                          // class-token pooling only
    std::vector<Block> blocks_;
    std::unique_ptr<Param> lnf_g_, lnf_b_, head_w_, head_b_;
    std::size_t height_ = 0, width_ = 0;
    std::size_t tokens_ = 0;
    std::uint64_t init_seed_ = 0;
};

}  // namespace svit
