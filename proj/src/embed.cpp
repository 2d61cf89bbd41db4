#include "svit/embed.hpp"

#include "svit/errors.hpp"
#include "svit/rng.hpp"

namespace svit {

namespace {

constexpr double kInitStd = 0.02;
// Positional embeddings start at a larger scale so attention can tell tokens
// apart from the first step; weight-scale init would leave every position
// looking identical until deep into training.
constexpr double kPosInitStd = 0.5;

std::vector<double> normal_init(std::size_t count, Rng& rng, double std = kInitStd) {
    std::vector<double> v(count);
    for (double& x : v) x = rng.normal(0.0, std);
    return v;
}

}  // namespace

SpectralEmbedder::SpectralEmbedder(const EmbedderConfig& cfg,
                                   std::vector<double> hierarchy_weights, std::uint64_t seed)
    : cfg_(cfg), omega_(std::move(hierarchy_weights)) {
    if (cfg_.n == 0 || cfg_.d_e == 0)
        throw ValidationError("embedder: n and d_e must be positive");
    if (omega_.size() != cfg_.n)
        throw DimensionError("embedder: " + std::to_string(omega_.size()) +
                             " hierarchy weights for n = " + std::to_string(cfg_.n));
    Rng rng(derive_seed(seed, stream::kInit));
    const std::size_t w_rows = cfg_.shared ? 1 : cfg_.n;
    w_phi_ = std::make_unique<Param>("embed.w_phi", w_rows, cfg_.d_e,
                                     normal_init(w_rows * cfg_.d_e, rng));
    if (cfg_.bias)
        b_phi_ = std::make_unique<Param>("embed.b_phi", w_rows, cfg_.d_e,
                                         std::vector<double>(w_rows * cfg_.d_e, 0.0));
    e_pos_ = std::make_unique<Param>("embed.e_pos", cfg_.n, cfg_.d_e,
                                     normal_init(cfg_.n * cfg_.d_e, rng, kPosInitStd));
}

Tensor SpectralEmbedder::embed(Graph& g, std::span<const double> coefficients) const {
    if (coefficients.size() != cfg_.n)
        throw DimensionError("embed: " + std::to_string(coefficients.size()) +
                             " coefficients, embedder expects n = " + std::to_string(cfg_.n));
    std::vector<double> weighted(cfg_.n);
    for (std::size_t i = 0; i < cfg_.n; ++i) weighted[i] = coefficients[i] * omega_[i];

    Tensor h;
    if (cfg_.shared) {
        // (n.1 column of weighted coefficients) . (1.d_e shared map)
        Tensor u = g.input(cfg_.n, 1, weighted);
        h = matmul(g, u, w_phi_->tensor());
        if (b_phi_) h = add_rowvec(g, h, b_phi_->tensor());
    } else {
        h = scale_rows(g, w_phi_->tensor(), weighted);
        if (b_phi_) h = add(g, h, b_phi_->tensor());
    }
    return add(g, h, e_pos_->tensor());
}

Tensor SpectralEmbedder::embed(Graph& g, const TokenSequence& tokens) const {
    return embed(g, std::span<const double>(tokens.coefficients));
}

std::vector<Param*> SpectralEmbedder::params() {
    std::vector<Param*> ps;
    ps.push_back(w_phi_.get());
    if (b_phi_) ps.push_back(b_phi_.get());
    ps.push_back(e_pos_.get());
    return ps;
}

std::size_t SpectralEmbedder::param_count() const {
    std::size_t c = w_phi_->size() + e_pos_->size();
    if (b_phi_) c += b_phi_->size();
    return c;
}

}  // namespace svit
