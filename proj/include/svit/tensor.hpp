#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "svit/errors.hpp"

namespace svit {

// Reverse-mode automatic differentiation over rank-<=2 dense tensors of
// 64-bit floats (vectors are 1.n or n.1). Nodes live on a per-Graph tape in
// construction order, which is already a topological order, so the backward
// pass is a single reverse sweep that visits each node exactly once. The
// arena is reused across Graph::reset() calls, so a training loop settles
// into zero allocations per sample.

enum class Op : std::uint8_t {
    kLeaf,
    kMatmul,
    kTranspose,
    kAdd,
    kAddRowVec,
    kMul,
    kScale,
    kScaleRows,
    kSoftmaxRows,
    kLayerNorm,
    kGelu,
    kMeanRows,
    kSliceCols,
    kConcatCols,
    kSumAll,
    kBceWithLogits,
    kFocalWithLogits,
};

struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    std::vector<double> grad;           // sized only for trainable leaves and,
                                        // during backward, for intermediates
    std::vector<double> saved;          // op-specific stash (norm stats, row scales, ...)
    std::vector<Node*> parents;
    double aux0 = 0.0;
    std::size_t iaux0 = 0;
    Op op = Op::kLeaf;
    bool requires_grad = false;

    std::size_t size() const { return rows * cols; }
};

class Graph;

// Cheap handle into a Graph (or into a Param's persistent node).
class Tensor {
public:
    Tensor() = default;

    bool defined() const { return n_ != nullptr; }
    std::size_t rows() const { return n_->rows; }
    std::size_t cols() const { return n_->cols; }
    std::size_t size() const { return n_->size(); }
    const std::vector<double>& values() const { return n_->values; }
    const std::vector<double>& grad() const { return n_->grad; }
    double value() const;  // requires a 1x1 tensor
    Node* node() const { return n_; }

    explicit Tensor(Node* n) : n_(n) {}

private:
    Node* n_ = nullptr;
};

// Persistent trainable leaf. Lives outside any Graph so its values and
// accumulated gradient survive graph resets; the optimizer owns the update.
class Param {
public:
    Param(std::string name, std::size_t rows, std::size_t cols, std::vector<double> init);

    Tensor tensor() { return Tensor(&node_); }
    const std::string& name() const { return name_; }
    std::size_t rows() const { return node_.rows; }
    std::size_t cols() const { return node_.cols; }
    std::size_t size() const { return node_.size(); }
    std::vector<double>& values() { return node_.values; }
    const std::vector<double>& values() const { return node_.values; }
    std::vector<double>& grad() { return node_.grad; }
    void zero_grad();

private:
    Node node_;
    std::string name_;
};

class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // Non-trainable input (copied).
    Tensor input(std::size_t rows, std::size_t cols, std::span<const double> data);
    // Trainable in-graph leaf; used by gradient checks.
    Tensor leaf(std::size_t rows, std::size_t cols, std::span<const double> data);

    // Reverse sweep from a scalar loss. Parameter gradients accumulate across
    // calls (mini-batch accumulation); tape gradients are rebuilt per call.
    void backward(const Tensor& loss);

    // Reuses the arena for the next forward pass. Handles from before the
    // reset must not be used afterwards.
    void reset();

    std::size_t node_count() const { return used_; }

    Node* alloc(std::size_t rows, std::size_t cols, Op op);

private:
    std::deque<Node> arena_;
    std::vector<Node*> tape_;
    std::size_t used_ = 0;
};

// ---- Differentiable operations -------------------------------------------
// All ops validate operand shapes and raise DimensionError naming both
// shapes. Results live on `g`.

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b);
Tensor transpose(Graph& g, const Tensor& a);
Tensor add(Graph& g, const Tensor& a, const Tensor& b);           // same shape
Tensor add_rowvec(Graph& g, const Tensor& a, const Tensor& row);  // row is 1.q
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);           // elementwise
Tensor scale(Graph& g, const Tensor& a, double c);
// Multiplies row i of `a` by the fixed (non-differentiated) factor u[i].
Tensor scale_rows(Graph& g, const Tensor& a, std::span<const double> u);
// Row-wise softmax, max-subtracted for stability. NaN input is a NumericError.
Tensor softmax_rows(Graph& g, const Tensor& a);
// Layer normalization over the last axis with learned gamma/beta (1.q), eps 1e-5.
Tensor layer_norm(Graph& g, const Tensor& a, const Tensor& gamma, const Tensor& beta);
// GELU, tanh approximation.
Tensor gelu(Graph& g, const Tensor& a);
// Column means: p.q -> 1.q.
Tensor mean_rows(Graph& g, const Tensor& a);
Tensor slice_cols(Graph& g, const Tensor& a, std::size_t start, std::size_t width);
Tensor concat_cols(Graph& g, std::span<const Tensor> parts);
Tensor sum_all(Graph& g, const Tensor& a);
// Numerically stable binary cross-entropy on a single logit (1x1), label in {0,1}.
Tensor bce_with_logits(Graph& g, const Tensor& logit, int label);
// Focal loss on a single logit; gamma=0, alpha=0.5 halves the BCE value.
Tensor focal_with_logits(Graph& g, const Tensor& logit, int label, double gamma, double alpha);

// ---- Multiply accounting ---------------------------------------------------
// Counts scalar multiplications performed by the forward matmul kernel on the
// calling thread while enabled. Used to validate closed-form cost formulas.

void multiply_count_enable(bool on);
std::uint64_t multiply_count();
void multiply_count_reset();

// ---- Gradient checking -----------------------------------------------------
// Max over entries of |analytic - central difference| /
// max(|analytic|, |numeric|, 1e-12). `build` must construct a scalar loss
// from the given leaf on the supplied graph.

double grad_check(const std::function<Tensor(Graph&, const Tensor&)>& build,
                  std::size_t rows, std::size_t cols, std::span<const double> x0,
                  double step = 1e-5);

// Same metric, but perturbs the given persistent parameters instead of a leaf.
double grad_check_params(const std::function<Tensor(Graph&)>& build_loss,
                         std::span<Param* const> params, double step = 1e-5);

}  // namespace svit
