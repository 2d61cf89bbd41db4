#include "svit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace svit {

namespace {

thread_local bool g_count_mults = false;
thread_local std::uint64_t g_mult_count = 0;

std::string shape_str(std::size_t r, std::size_t c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

std::string shape_str(const Tensor& t) { return shape_str(t.rows(), t.cols()); }

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                             shape_str(b));
}

// y (p.r) = a (p.q) . b (q.r); dense row-major, inner loop contiguous.
void matmul_kernel(const double* a, const double* b, double* y, std::size_t p, std::size_t q,
                   std::size_t r) {
    for (std::size_t i = 0; i < p; ++i) {
        double* yi = y + i * r;
        std::fill(yi, yi + r, 0.0);
        const double* ai = a + i * q;
        for (std::size_t k = 0; k < q; ++k) {
            const double aik = ai[k];
            const double* bk = b + k * r;
            for (std::size_t j = 0; j < r; ++j) yi[j] += aik * bk[j];
        }
    }
    if (g_count_mults) g_mult_count += static_cast<std::uint64_t>(p) * q * r;
}

// da (p.q) += g (p.r) . b(q.r)^T : row-row dot products.
void matmul_acc_nt(const double* g, const double* b, double* da, std::size_t p, std::size_t q,
                   std::size_t r) {
    for (std::size_t i = 0; i < p; ++i) {
        const double* gi = g + i * r;
        double* dai = da + i * q;
        for (std::size_t k = 0; k < q; ++k) {
            const double* bk = b + k * r;
            double acc = 0.0;
            for (std::size_t j = 0; j < r; ++j) acc += gi[j] * bk[j];
            dai[k] += acc;
        }
    }
}

// db (q.r) += a(p.q)^T . g (p.r) : scaled row accumulation.
void matmul_acc_tn(const double* a, const double* g, double* db, std::size_t p, std::size_t q,
                   std::size_t r) {
    for (std::size_t i = 0; i < p; ++i) {
        const double* ai = a + i * q;
        const double* gi = g + i * r;
        for (std::size_t k = 0; k < q; ++k) {
            const double f = ai[k];
            if (f == 0.0) continue;
            double* dbk = db + k * r;
            for (std::size_t j = 0; j < r; ++j) dbk[j] += f * gi[j];
        }
    }
}

constexpr double kGeluC = 0.7978845608028653558798921198687;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

double Tensor::value() const {
    if (!n_ || n_->size() != 1)
        throw DimensionError("value(): tensor is not 1x1 (" +
                             (n_ ? shape_str(n_->rows, n_->cols) : std::string("undefined")) + ")");
    return n_->values[0];
}

Param::Param(std::string name, std::size_t rows, std::size_t cols, std::vector<double> init)
    : name_(std::move(name)) {
    if (init.size() != rows * cols)
        throw DimensionError("param " + name_ + ": init size " + std::to_string(init.size()) +
                             " does not match " + shape_str(rows, cols));
    node_.rows = rows;
    node_.cols = cols;
    node_.values = std::move(init);
    node_.grad.assign(rows * cols, 0.0);
    node_.op = Op::kLeaf;
    node_.requires_grad = true;
}

void Param::zero_grad() { std::fill(node_.grad.begin(), node_.grad.end(), 0.0); }

Node* Graph::alloc(std::size_t rows, std::size_t cols, Op op) {
    Node* n;
    if (used_ < arena_.size()) {
        n = &arena_[used_];
        n->parents.clear();
        n->saved.clear();
        n->grad.clear();
        n->aux0 = 0.0;
        n->iaux0 = 0;
    } else {
        arena_.emplace_back();
        n = &arena_.back();
    }
    ++used_;
    n->rows = rows;
    n->cols = cols;
    n->values.resize(rows * cols);
    n->op = op;
    n->requires_grad = false;
    tape_.push_back(n);
    return n;
}

Tensor Graph::input(std::size_t rows, std::size_t cols, std::span<const double> data) {
    if (data.size() != rows * cols)
        throw DimensionError("input: data size " + std::to_string(data.size()) +
                             " does not match " + shape_str(rows, cols));
    Node* n = alloc(rows, cols, Op::kLeaf);
    std::copy(data.begin(), data.end(), n->values.begin());
    return Tensor(n);
}

Tensor Graph::leaf(std::size_t rows, std::size_t cols, std::span<const double> data) {
    Tensor t = input(rows, cols, data);
    t.node()->requires_grad = true;
    return t;
}

void Graph::reset() {
    used_ = 0;
    tape_.clear();
}

namespace {

inline void ensure_grad(Node* n) {
    if (n->grad.size() != n->size()) n->grad.assign(n->size(), 0.0);
}

void backward_node(Node* n) {
    const double* g = n->grad.data();
    switch (n->op) {
        case Op::kLeaf:
            break;
        case Op::kMatmul: {
            Node* a = n->parents[0];
            Node* b = n->parents[1];
            const std::size_t p = a->rows, q = a->cols, r = b->cols;
            if (a->requires_grad) matmul_acc_nt(g, b->values.data(), a->grad.data(), p, q, r);
            if (b->requires_grad) matmul_acc_tn(a->values.data(), g, b->grad.data(), p, q, r);
            break;
        }
        case Op::kTranspose: {
            Node* a = n->parents[0];
            if (!a->requires_grad) break;
            for (std::size_t i = 0; i < n->rows; ++i)
                for (std::size_t j = 0; j < n->cols; ++j)
                    a->grad[j * a->cols + i] += g[i * n->cols + j];
            break;
        }
        case Op::kAdd: {
            for (Node* p : n->parents) {
                if (!p->requires_grad) continue;
                double* d = p->grad.data();
                for (std::size_t i = 0; i < n->size(); ++i) d[i] += g[i];
            }
            break;
        }
        case Op::kAddRowVec: {
            Node* a = n->parents[0];
            Node* row = n->parents[1];
            if (a->requires_grad) {
                double* d = a->grad.data();
                for (std::size_t i = 0; i < n->size(); ++i) d[i] += g[i];
            }
            if (row->requires_grad) {
                double* d = row->grad.data();
                for (std::size_t i = 0; i < n->rows; ++i) {
                    const double* gi = g + i * n->cols;
                    for (std::size_t j = 0; j < n->cols; ++j) d[j] += gi[j];
                }
            }
            break;
        }
        case Op::kMul: {
            Node* a = n->parents[0];
            Node* b = n->parents[1];
            if (a->requires_grad) {
                const double* bv = b->values.data();
                double* d = a->grad.data();
                for (std::size_t i = 0; i < n->size(); ++i) d[i] += g[i] * bv[i];
            }
            if (b->requires_grad) {
                const double* av = a->values.data();
                double* d = b->grad.data();
                for (std::size_t i = 0; i < n->size(); ++i) d[i] += g[i] * av[i];
            }
            break;
        }
        case Op::kScale: {
            Node* a = n->parents[0];
            if (!a->requires_grad) break;
            const double c = n->aux0;
            double* d = a->grad.data();
            for (std::size_t i = 0; i < n->size(); ++i) d[i] += c * g[i];
            break;
        }
        case Op::kScaleRows: {
            Node* a = n->parents[0];
            if (!a->requires_grad) break;
            for (std::size_t i = 0; i < n->rows; ++i) {
                const double u = n->saved[i];
                const double* gi = g + i * n->cols;
                double* di = a->grad.data() + i * n->cols;
                for (std::size_t j = 0; j < n->cols; ++j) di[j] += u * gi[j];
            }
            break;
        }
        case Op::kSoftmaxRows: {
            Node* a = n->parents[0];
            if (!a->requires_grad) break;
            const double* y = n->values.data();
            for (std::size_t i = 0; i < n->rows; ++i) {
                const double* yi = y + i * n->cols;
                const double* gi = g + i * n->cols;
                double dot = 0.0;
                for (std::size_t j = 0; j < n->cols; ++j) dot += gi[j] * yi[j];
                double* di = a->grad.data() + i * n->cols;
                for (std::size_t j = 0; j < n->cols; ++j) di[j] += yi[j] * (gi[j] - dot);
            }
            break;
        }
        case Op::kLayerNorm: {
            Node* a = n->parents[0];
            Node* gamma = n->parents[1];
            Node* beta = n->parents[2];
            const std::size_t q = n->cols;
            // saved layout: xhat (p.q) then inv_std (p)
            const double* xhat = n->saved.data();
            const double* inv_std = n->saved.data() + n->size();
            const double* gv = gamma->values.data();
            for (std::size_t i = 0; i < n->rows; ++i) {
                const double* gi = g + i * q;
                const double* xh = xhat + i * q;
                if (beta->requires_grad)
                    for (std::size_t j = 0; j < q; ++j) beta->grad[j] += gi[j];
                if (gamma->requires_grad)
                    for (std::size_t j = 0; j < q; ++j) gamma->grad[j] += gi[j] * xh[j];
                if (!a->requires_grad) continue;
                double m1 = 0.0, m2 = 0.0;
                for (std::size_t j = 0; j < q; ++j) {
                    const double h = gi[j] * gv[j];
                    m1 += h;
                    m2 += h * xh[j];
                }
                m1 /= static_cast<double>(q);
                m2 /= static_cast<double>(q);
                double* di = a->grad.data() + i * q;
                for (std::size_t j = 0; j < q; ++j)
                    di[j] += (gi[j] * gv[j] - m1 - xh[j] * m2) * inv_std[i];
            }
            break;
        }
        case Op::kGelu: {
            Node* a = n->parents[0];
            if (!a->requires_grad) break;
            const double* x = a->values.data();
            double* d = a->grad.data();
            for (std::size_t i = 0; i < n->size(); ++i) {
                const double xi = x[i];
                const double t = std::tanh(kGeluC * (xi + kGeluA * xi * xi * xi));
                const double dy =
                    0.5 * (1.0 + t) +
                    0.5 * xi * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * xi * xi);
                d[i] += dy * g[i];
            }
            break;
        }
        case Op::kMeanRows: {
            Node* a = n->parents[0];
            if (!a->requires_grad) break;
            const double inv = 1.0 / static_cast<double>(a->rows);
            for (std::size_t i = 0; i < a->rows; ++i) {
                double* di = a->grad.data() + i * a->cols;
                for (std::size_t j = 0; j < a->cols; ++j) di[j] += g[j] * inv;
            }
            break;
        }
        case Op::kSliceCols: {
            Node* a = n->parents[0];
            if (!a->requires_grad) break;
            const std::size_t start = n->iaux0;
            for (std::size_t i = 0; i < n->rows; ++i) {
                const double* gi = g + i * n->cols;
                double* di = a->grad.data() + i * a->cols + start;
                for (std::size_t j = 0; j < n->cols; ++j) di[j] += gi[j];
            }
            break;
        }
        case Op::kConcatCols: {
            std::size_t off = 0;
            for (Node* p : n->parents) {
                if (p->requires_grad) {
                    for (std::size_t i = 0; i < n->rows; ++i) {
                        const double* gi = g + i * n->cols + off;
                        double* di = p->grad.data() + i * p->cols;
                        for (std::size_t j = 0; j < p->cols; ++j) di[j] += gi[j];
                    }
                }
                off += p->cols;
            }
            break;
        }
        case Op::kSumAll: {
            Node* a = n->parents[0];
            if (!a->requires_grad) break;
            const double g0 = g[0];
            double* d = a->grad.data();
            for (std::size_t i = 0; i < a->size(); ++i) d[i] += g0;
            break;
        }
        case Op::kBceWithLogits:
        case Op::kFocalWithLogits: {
            // d(loss)/d(logit) was stashed at forward time in saved[0].
            Node* a = n->parents[0];
            if (a->requires_grad) a->grad[0] += g[0] * n->saved[0];
            break;
        }
    }
}

}  // namespace

void Graph::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw DimensionError("backward: loss must be a defined 1x1 tensor");
    for (Node* n : tape_)
        if (n->requires_grad) n->grad.assign(n->size(), 0.0);
    Node* ln = loss.node();
    ensure_grad(ln);
    ln->grad[0] = 1.0;
    for (std::size_t i = tape_.size(); i-- > 0;) {
        Node* n = tape_[i];
        if (n->requires_grad && n->op != Op::kLeaf) backward_node(n);
    }
}

namespace {

Node* make_op(Graph& g, Op op, std::size_t rows, std::size_t cols,
              std::initializer_list<Node*> parents) {
    Node* n = g.alloc(rows, cols, op);
    bool req = false;
    for (Node* p : parents) {
        n->parents.push_back(p);
        req = req || p->requires_grad;
    }
    n->requires_grad = req;
    return n;
}

}  // namespace

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: inner extents disagree, lhs " + shape_str(a) + " vs rhs " +
                             shape_str(b));
    Node* n = make_op(g, Op::kMatmul, a.rows(), b.cols(), {a.node(), b.node()});
    matmul_kernel(a.values().data(), b.values().data(), n->values.data(), a.rows(), a.cols(),
                  b.cols());
    return Tensor(n);
}

Tensor transpose(Graph& g, const Tensor& a) {
    Node* n = make_op(g, Op::kTranspose, a.cols(), a.rows(), {a.node()});
    const double* x = a.values().data();
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) n->values[j * a.rows() + i] = x[i * a.cols() + j];
    return Tensor(n);
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    Node* n = make_op(g, Op::kAdd, a.rows(), a.cols(), {a.node(), b.node()});
    const double* x = a.values().data();
    const double* y = b.values().data();
    for (std::size_t i = 0; i < n->size(); ++i) n->values[i] = x[i] + y[i];
    return Tensor(n);
}

Tensor add_rowvec(Graph& g, const Tensor& a, const Tensor& row) {
    if (row.rows() != 1 || row.cols() != a.cols())
        throw DimensionError("add_rowvec: " + shape_str(a) + " + " + shape_str(row));
    Node* n = make_op(g, Op::kAddRowVec, a.rows(), a.cols(), {a.node(), row.node()});
    const double* x = a.values().data();
    const double* r = row.values().data();
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            n->values[i * a.cols() + j] = x[i * a.cols() + j] + r[j];
    return Tensor(n);
}

Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    Node* n = make_op(g, Op::kMul, a.rows(), a.cols(), {a.node(), b.node()});
    const double* x = a.values().data();
    const double* y = b.values().data();
    for (std::size_t i = 0; i < n->size(); ++i) n->values[i] = x[i] * y[i];
    return Tensor(n);
}

Tensor scale(Graph& g, const Tensor& a, double c) {
    Node* n = make_op(g, Op::kScale, a.rows(), a.cols(), {a.node()});
    n->aux0 = c;
    const double* x = a.values().data();
    for (std::size_t i = 0; i < n->size(); ++i) n->values[i] = c * x[i];
    return Tensor(n);
}

Tensor scale_rows(Graph& g, const Tensor& a, std::span<const double> u) {
    if (u.size() != a.rows())
        throw DimensionError("scale_rows: " + std::to_string(u.size()) + " factors for " +
                             shape_str(a));
    Node* n = make_op(g, Op::kScaleRows, a.rows(), a.cols(), {a.node()});
    n->saved.assign(u.begin(), u.end());
    const double* x = a.values().data();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double f = u[i];
        for (std::size_t j = 0; j < a.cols(); ++j)
            n->values[i * a.cols() + j] = f * x[i * a.cols() + j];
    }
    return Tensor(n);
}

Tensor softmax_rows(Graph& g, const Tensor& a) {
    Node* n = make_op(g, Op::kSoftmaxRows, a.rows(), a.cols(), {a.node()});
    const double* x = a.values().data();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* xi = x + i * a.cols();
        double mx = xi[0];
        for (std::size_t j = 0; j < a.cols(); ++j) {
            if (std::isnan(xi[j])) throw NumericError("softmax_rows: NaN in input row " +
                                                      std::to_string(i));
            mx = std::max(mx, xi[j]);
        }
        double* yi = n->values.data() + i * a.cols();
        double sum = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) {
            yi[j] = std::exp(xi[j] - mx);
            sum += yi[j];
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < a.cols(); ++j) yi[j] *= inv;
    }
    return Tensor(n);
}

Tensor layer_norm(Graph& g, const Tensor& a, const Tensor& gamma, const Tensor& beta) {
    if (gamma.rows() != 1 || gamma.cols() != a.cols() || beta.rows() != 1 ||
        beta.cols() != a.cols())
        throw DimensionError("layer_norm: input " + shape_str(a) + ", gamma " + shape_str(gamma) +
                             ", beta " + shape_str(beta));
    constexpr double kEps = 1e-5;
    Node* n = make_op(g, Op::kLayerNorm, a.rows(), a.cols(), {a.node(), gamma.node(), beta.node()});
    n->saved.resize(n->size() + n->rows);
    double* xhat = n->saved.data();
    double* inv_std = n->saved.data() + n->size();
    const double* x = a.values().data();
    const double* gv = gamma.values().data();
    const double* bv = beta.values().data();
    const std::size_t q = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* xi = x + i * q;
        double mean = 0.0;
        for (std::size_t j = 0; j < q; ++j) mean += xi[j];
        mean /= static_cast<double>(q);
        double var = 0.0;
        for (std::size_t j = 0; j < q; ++j) {
            const double d = xi[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(q);
        const double is = 1.0 / std::sqrt(var + kEps);
        inv_std[i] = is;
        double* xh = xhat + i * q;
        double* yi = n->values.data() + i * q;
        for (std::size_t j = 0; j < q; ++j) {
            xh[j] = (xi[j] - mean) * is;
            yi[j] = xh[j] * gv[j] + bv[j];
        }
    }
    return Tensor(n);
}

Tensor gelu(Graph& g, const Tensor& a) {
    Node* n = make_op(g, Op::kGelu, a.rows(), a.cols(), {a.node()});
    const double* x = a.values().data();
    for (std::size_t i = 0; i < n->size(); ++i) {
        const double xi = x[i];
        n->values[i] = 0.5 * xi * (1.0 + std::tanh(kGeluC * (xi + kGeluA * xi * xi * xi)));
    }
    return Tensor(n);
}

Tensor mean_rows(Graph& g, const Tensor& a) {
    Node* n = make_op(g, Op::kMeanRows, 1, a.cols(), {a.node()});
    const double* x = a.values().data();
    std::fill(n->values.begin(), n->values.end(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) n->values[j] += x[i * a.cols() + j];
    const double inv = 1.0 / static_cast<double>(a.rows());
    for (std::size_t j = 0; j < a.cols(); ++j) n->values[j] *= inv;
    return Tensor(n);
}

Tensor slice_cols(Graph& g, const Tensor& a, std::size_t start, std::size_t width) {
    if (start + width > a.cols())
        throw DimensionError("slice_cols: [" + std::to_string(start) + ", " +
                             std::to_string(start + width) + ") out of " + shape_str(a));
    Node* n = make_op(g, Op::kSliceCols, a.rows(), width, {a.node()});
    n->iaux0 = start;
    const double* x = a.values().data();
    for (std::size_t i = 0; i < a.rows(); ++i)
        std::copy(x + i * a.cols() + start, x + i * a.cols() + start + width,
                  n->values.begin() + i * width);
    return Tensor(n);
}

Tensor concat_cols(Graph& g, std::span<const Tensor> parts) {
    if (parts.empty()) throw ValidationError("concat_cols: no inputs");
    const std::size_t rows = parts[0].rows();
    std::size_t cols = 0;
    for (const Tensor& t : parts) {
        if (t.rows() != rows)
            throw DimensionError("concat_cols: row mismatch " + shape_str(parts[0]) + " vs " +
                                 shape_str(t));
        cols += t.cols();
    }
    Node* n = g.alloc(rows, cols, Op::kConcatCols);
    bool req = false;
    for (const Tensor& t : parts) {
        n->parents.push_back(t.node());
        req = req || t.node()->requires_grad;
    }
    n->requires_grad = req;
    std::size_t off = 0;
    for (const Tensor& t : parts) {
        const double* x = t.values().data();
        for (std::size_t i = 0; i < rows; ++i)
            std::copy(x + i * t.cols(), x + (i + 1) * t.cols(), n->values.begin() + i * cols + off);
        off += t.cols();
    }
    return Tensor(n);
}

Tensor sum_all(Graph& g, const Tensor& a) {
    Node* n = make_op(g, Op::kSumAll, 1, 1, {a.node()});
    double s = 0.0;
    for (double v : a.values()) s += v;
    n->values[0] = s;
    return Tensor(n);
}

namespace {

Tensor loss_with_logits(Graph& g, const Tensor& logit, int label, Op op, double gamma,
                        double alpha) {
    if (logit.size() != 1)
        throw DimensionError("loss: logit must be 1x1, got " + shape_str(logit));
    if (label != 0 && label != 1)
        throw ValidationError("loss: label must be 0 or 1, got " + std::to_string(label));
    Node* n = make_op(g, op, 1, 1, {logit.node()});
    const double z = logit.values()[0];
    double value, dz;
    if (op == Op::kBceWithLogits) {
        // max(z,0) - z y + log(1 + exp(-|z|)) and d/dz = sigmoid(z) - y
        const double y = static_cast<double>(label);
        value = std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        dz = 1.0 / (1.0 + std::exp(-z)) - y;
    } else {
        // Focal: with z_t the logit of the true class, u = sigmoid(-z_t),
        // loss = alpha_t u^gamma softplus(-z_t).
        const double zt = label == 1 ? z : -z;
        const double at = label == 1 ? alpha : 1.0 - alpha;
        const double u = 1.0 / (1.0 + std::exp(zt));
        const double sp = zt > 0 ? std::log1p(std::exp(-zt)) : -zt + std::log1p(std::exp(zt));
        const double ug = std::pow(u, gamma);
        value = at * ug * sp;
        const double dzt = -at * ug * (gamma * (1.0 - u) * sp + u);
        dz = label == 1 ? dzt : -dzt;
    }
    n->values[0] = value;
    n->saved.assign(1, dz);
    return Tensor(n);
}

}  // namespace

Tensor bce_with_logits(Graph& g, const Tensor& logit, int label) {
    return loss_with_logits(g, logit, label, Op::kBceWithLogits, 0.0, 0.0);
}

Tensor focal_with_logits(Graph& g, const Tensor& logit, int label, double gamma, double alpha) {
    if (gamma < 0.0) throw ValidationError("focal loss: gamma must be >= 0");
    if (alpha <= 0.0 || alpha >= 1.0)
        throw ValidationError("focal loss: alpha must lie in (0, 1)");
    return loss_with_logits(g, logit, label, Op::kFocalWithLogits, gamma, alpha);
}

void multiply_count_enable(bool on) { g_count_mults = on; }
std::uint64_t multiply_count() { return g_mult_count; }
void multiply_count_reset() { g_mult_count = 0; }

namespace {

double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
    return std::abs(analytic - numeric) / denom;
}

}  // namespace

double grad_check(const std::function<Tensor(Graph&, const Tensor&)>& build, std::size_t rows,
                  std::size_t cols, std::span<const double> x0, double step) {
    if (x0.size() != rows * cols)
        throw DimensionError("grad_check: x0 size " + std::to_string(x0.size()) +
                             " does not match " + shape_str(rows, cols));
    Graph g;
    Tensor x = g.leaf(rows, cols, x0);
    Tensor loss = build(g, x);
    if (loss.size() != 1) throw DimensionError("grad_check: build must return a scalar");
    g.backward(loss);
    std::vector<double> analytic = x.grad();

    std::vector<double> xv(x0.begin(), x0.end());
    double worst = 0.0;
    Graph ge;
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double keep = xv[i];
        xv[i] = keep + step;
        ge.reset();
        const double fp = build(ge, ge.input(rows, cols, xv)).value();
        xv[i] = keep - step;
        ge.reset();
        const double fm = build(ge, ge.input(rows, cols, xv)).value();
        xv[i] = keep;
        const double numeric = (fp - fm) / (2.0 * step);
        worst = std::max(worst, rel_err(analytic[i], numeric));
    }
    return worst;
}

double grad_check_params(const std::function<Tensor(Graph&)>& build_loss,
                         std::span<Param* const> params, double step) {
    Graph g;
    for (Param* p : params) p->zero_grad();
    Tensor loss = build_loss(g);
    if (loss.size() != 1) throw DimensionError("grad_check_params: loss must be a scalar");
    g.backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (Param* p : params) analytic.push_back(p->grad());

    double worst = 0.0;
    Graph ge;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        std::vector<double>& v = params[pi]->values();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double keep = v[i];
            v[i] = keep + step;
            ge.reset();
            const double fp = build_loss(ge).value();
            v[i] = keep - step;
            ge.reset();
            const double fm = build_loss(ge).value();
            v[i] = keep;
            const double numeric = (fp - fm) / (2.0 * step);
            worst = std::max(worst, rel_err(analytic[pi][i], numeric));
        }
    }
    for (Param* p : params) p->zero_grad();
    return worst;
}

}  // namespace svit
