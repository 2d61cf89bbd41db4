#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "svit/basis.hpp"
#include "svit/tensor.hpp"

namespace svit {

// Maps an ordered token sequence s (length n) to embeddings
//   h_i = (s_i * omega_i) W_phi_i + b_phi_i + e_pos_i,
// where omega is the basis's fixed hierarchy weight. In the default
// component-wise form each position owns a row of W_phi (n x d_e); in the
// shared form a single 1 x d_e map is applied to every weighted coefficient.
// The bias is off by default.
struct EmbedderConfig {
    std::size_t n = 0;
    std::size_t d_e = 0;
    bool shared = false;
    bool bias = false;
};

class SpectralEmbedder {
public:
    SpectralEmbedder(const EmbedderConfig& cfg, std::vector<double> hierarchy_weights,
                     std::uint64_t seed);

    Tensor embed(Graph& g, const TokenSequence& tokens) const;
    // Same map for pre-extracted coefficients (hot path; skips the copy).
    Tensor embed(Graph& g, std::span<const double> coefficients) const;

    std::vector<Param*> params();
    std::size_t param_count() const;
    const EmbedderConfig& config() const { return cfg_; }

private:
    EmbedderConfig cfg_;
    std::vector<double> omega_;
    std::unique_ptr<Param> w_phi_;
    std::unique_ptr<Param> b_phi_;  // null when bias is off
    std::unique_ptr<Param> e_pos_;
};

}  // namespace svit
