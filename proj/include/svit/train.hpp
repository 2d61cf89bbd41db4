#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "svit/datagen.hpp"
#include "svit/model.hpp"
#include "svit/tensor.hpp"

namespace svit {

enum class LossKind { kBce, kFocal };

// Numerically stable losses on a single logit. bce uses
// max(z,0) - z*y + log(1 + exp(-|z|)); focal with gamma=0, alpha=0.5 equals
// bce/2 (sanity anchor for both implementations).
Tensor bce_loss(Graph& g, const Tensor& logit, int label);
Tensor focal_loss(Graph& g, const Tensor& logit, int label, double gamma = 2.0,
                  double alpha = 0.25);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction over a fixed parameter group. step() consumes the
// gradients accumulated on the parameters; a non-finite gradient aborts with
// a NumericError naming the parameter.
class Adam {
public:
    Adam(std::vector<Param*> params, const AdamConfig& cfg);
    void step();
    void zero_grad();
    std::size_t t() const { return t_; }

private:
    std::vector<Param*> params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t t_ = 0;
};

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    LossKind loss = LossKind::kBce;
    double focal_gamma = 2.0;
    double focal_alpha = 0.25;
    std::uint64_t seed = 0;
    bool shuffle = true;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    double train_seconds = 0.0;  // measured only when the caller asks for timing
};

// Builds the model for `spec` over the training rows of `data` (fitting the
// PCA basis, when applicable, on exactly those rows) with the given init/
// shuffle seed.
ViTClassifier build_model(const ModelSpec& spec, const LabeledImageSet& data,
                          std::span<const std::size_t> train_idx, std::uint64_t seed,
                          double tau = 1.0);

// Mini-batch training with deterministic per-epoch shuffling derived from
// (seed, epoch). Inputs are tokenized/patched once up front. Loss divergence
// (NaN) aborts with the epoch index.
TrainResult train(ViTClassifier& model, const LabeledImageSet& data,
                  std::span<const std::size_t> train_idx, const TrainConfig& cfg,
                  bool measure_time = false);

// Sigmoid probabilities of label 1 for the given rows.
std::vector<double> predict_proba(ViTClassifier& model, const LabeledImageSet& data,
                                  std::span<const std::size_t> idx);

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history,
                       const std::string& config_line);

}  // namespace svit
