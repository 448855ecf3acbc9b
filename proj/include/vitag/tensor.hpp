#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "vitag/error.hpp"
#include "vitag/kernels.hpp"
#include "vitag/rng.hpp"

namespace vitag {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_string(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << "]";
    return os.str();
}

// Global autograd switch. Forward passes run under NoGradGuard build no
// graph; eval-mode inference relies on this.
struct GradMode {
    static bool& enabled() {
        thread_local bool on = true;
        return on;
    }
};

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(GradMode::enabled()) { GradMode::enabled() = false; }
    ~NoGradGuard() { GradMode::enabled() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <class T>
struct TensorImpl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // allocated lazily; same length as data when present
    bool requires_grad = false;

    // Reverse-mode graph: edges point from result to operands.
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::function<void(TensorImpl&)> backward_fn;

    int64_t numel() const { return static_cast<int64_t>(data.size()); }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }
};

// Value-semantics handle to a shared tensor node. Copies alias the same
// storage; this is what makes tied embeddings a single source of truth.
template <class T>
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorImpl<T>> impl)
        : impl_(std::move(impl)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        auto impl = std::make_shared<TensorImpl<T>>();
        impl->data.assign(static_cast<size_t>(shape_numel(shape)), T(0));
        impl->shape = std::move(shape);
        impl->requires_grad = requires_grad;
        return Tensor(std::move(impl));
    }

    static Tensor full(Shape shape, T value) {
        Tensor t = zeros(std::move(shape));
        std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
        return t;
    }

    static Tensor from_data(Shape shape, std::vector<T> data,
                            bool requires_grad = false) {
        if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
            throw ShapeError("from_data: shape " + shape_string(shape) +
                             " does not match data length " +
                             std::to_string(data.size()));
        }
        auto impl = std::make_shared<TensorImpl<T>>();
        impl->shape = std::move(shape);
        impl->data = std::move(data);
        impl->requires_grad = requires_grad;
        return Tensor(std::move(impl));
    }

    // BERT-style init: normal(0, stddev) truncated at two standard deviations.
    static Tensor truncated_normal(Shape shape, T stddev, Rng& rng,
                                   bool requires_grad = true) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (T& v : t.impl_->data) {
            v = static_cast<T>(rng.truncated_normal(stddev));
        }
        return t;
    }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int64_t numel() const { return impl_->numel(); }
    int64_t dim(size_t i) const { return impl_->shape[i]; }
    size_t rank() const { return impl_->shape.size(); }

    std::span<T> data() { return impl_->data; }
    std::span<const T> data() const { return impl_->data; }
    std::span<T> grad() {
        impl_->ensure_grad();
        return impl_->grad;
    }
    std::span<const T> grad() const {
        impl_->ensure_grad();
        return impl_->grad;
    }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool v) { impl_->requires_grad = v; }

    void zero_grad() { impl_->grad.assign(impl_->data.size(), T(0)); }

    T item() const {
        if (numel() != 1) {
            throw ContractError("item(): tensor has " +
                                std::to_string(numel()) + " elements");
        }
        return impl_->data[0];
    }

    T at(std::initializer_list<int64_t> idx) const {
        int64_t flat = 0;
        size_t i = 0;
        for (int64_t v : idx) {
            flat = flat * impl_->shape[i] + v;
            ++i;
        }
        return impl_->data[static_cast<size_t>(flat)];
    }

    // Deep copy of values only (no graph, no grad).
    Tensor clone_detached() const {
        Tensor t = from_data(impl_->shape, impl_->data, impl_->requires_grad);
        return t;
    }

    void backward() const;

    std::shared_ptr<TensorImpl<T>> impl() const { return impl_; }

  private:
    std::shared_ptr<TensorImpl<T>> impl_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <class T>
bool all_finite(std::span<const T> v) {
    for (T x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

namespace detail {

template <class T>
Tensor<T> make_result(Shape shape, std::vector<T> data,
                      std::vector<Tensor<T>> inputs,
                      std::function<void(TensorImpl<T>&)> fn) {
    Tensor<T> out = Tensor<T>::from_data(std::move(shape), std::move(data));
    bool needs_graph = false;
    if (GradMode::enabled()) {
        for (const auto& in : inputs) {
            if (in.requires_grad()) {
                needs_graph = true;
                break;
            }
        }
    }
    if (needs_graph) {
        auto impl = out.impl();
        impl->requires_grad = true;
        impl->parents.reserve(inputs.size());
        for (const auto& in : inputs) impl->parents.push_back(in.impl());
        impl->backward_fn = std::move(fn);
    }
    return out;
}

}  // namespace detail

// Reverse-mode sweep from a scalar loss. Non-leaf gradients are reset per
// call; leaf (parameter) gradients accumulate across calls until zero_grad.
template <class T>
void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1) {
        throw ContractError("backward: loss must be a scalar, got shape " +
                            shape_string(loss.shape()));
    }
    using Impl = TensorImpl<T>;
    std::vector<Impl*> topo;
    std::unordered_set<Impl*> visited;
    // Iterative post-order DFS; RNN graphs can be deep.
    std::vector<std::pair<Impl*, size_t>> stack;
    stack.emplace_back(loss.impl().get(), 0);
    visited.insert(loss.impl().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Impl* p = node->parents[next++].get();
            if (!visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }
    for (Impl* node : topo) {
        if (node->backward_fn) {
            node->grad.assign(node->data.size(), T(0));
        } else if (node->requires_grad) {
            node->ensure_grad();
        }
    }
    loss.impl()->ensure_grad();
    loss.impl()->grad[0] += T(1);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
}

template <class T>
void Tensor<T>::backward() const {
    vitag::backward(*this);
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: incompatible shapes " +
                         shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
    }
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<T> out(static_cast<size_t>(m * n));
    kernels::matmul_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
    return detail::make_result<T>(
        {m, n}, std::move(out), {a, b}, [m, k, n](TensorImpl<T>& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();
                kernels::matmul_nt(self.grad.data(), pb.data.data(),
                                   pa.grad.data(), m, n, k, true);
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                kernels::matmul_tn(pa.data.data(), self.grad.data(),
                                   pb.grad.data(), k, m, n, true);
            }
        });
}

// a[m,k] * b[n,k]^T -> [m,n]; the tied-embedding output projection.
template <class T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
        throw ShapeError("matmul_nt: incompatible shapes " +
                         shape_string(a.shape()) + " x " +
                         shape_string(b.shape()) + "^T");
    }
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    std::vector<T> out(static_cast<size_t>(m * n));
    kernels::matmul_nt(a.data().data(), b.data().data(), out.data(), m, k, n);
    return detail::make_result<T>(
        {m, n}, std::move(out), {a, b}, [m, k, n](TensorImpl<T>& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();
                kernels::matmul_nn(self.grad.data(), pb.data.data(),
                                   pa.grad.data(), m, n, k, true);
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                kernels::matmul_tn(self.grad.data(), pa.data.data(),
                                   pb.grad.data(), n, m, k, true);
            }
        });
}

// Batched a[B,m,k] * b[B,k,n].
template <class T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) ||
        a.dim(2) != b.dim(1)) {
        throw ShapeError("bmm: incompatible shapes " + shape_string(a.shape()) +
                         " x " + shape_string(b.shape()));
    }
    const int64_t bt = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
    std::vector<T> out(static_cast<size_t>(bt * m * n));
    for (int64_t i = 0; i < bt; ++i) {
        kernels::matmul_nn(a.data().data() + i * m * k,
                           b.data().data() + i * k * n, out.data() + i * m * n,
                           m, k, n);
    }
    return detail::make_result<T>(
        {bt, m, n}, std::move(out), {a, b},
        [bt, m, k, n](TensorImpl<T>& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            for (int64_t i = 0; i < bt; ++i) {
                const T* dc = self.grad.data() + i * m * n;
                if (pa.requires_grad) {
                    pa.ensure_grad();
                    kernels::matmul_nt(dc, pb.data.data() + i * k * n,
                                       pa.grad.data() + i * m * k, m, n, k,
                                       true);
                }
                if (pb.requires_grad) {
                    pb.ensure_grad();
                    kernels::matmul_tn(pa.data.data() + i * m * k, dc,
                                       pb.grad.data() + i * k * n, k, m, n,
                                       true);
                }
            }
        });
}

// Batched a[B,m,k] * b[B,n,k]^T; attention scores.
template <class T>
Tensor<T> bmm_nt(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) ||
        a.dim(2) != b.dim(2)) {
        throw ShapeError("bmm_nt: incompatible shapes " +
                         shape_string(a.shape()) + " x " +
                         shape_string(b.shape()) + "^T");
    }
    const int64_t bt = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(1);
    std::vector<T> out(static_cast<size_t>(bt * m * n));
    for (int64_t i = 0; i < bt; ++i) {
        kernels::matmul_nt(a.data().data() + i * m * k,
                           b.data().data() + i * n * k, out.data() + i * m * n,
                           m, k, n);
    }
    return detail::make_result<T>(
        {bt, m, n}, std::move(out), {a, b},
        [bt, m, k, n](TensorImpl<T>& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            for (int64_t i = 0; i < bt; ++i) {
                const T* dc = self.grad.data() + i * m * n;
                if (pa.requires_grad) {
                    pa.ensure_grad();
                    kernels::matmul_nn(dc, pb.data.data() + i * n * k,
                                       pa.grad.data() + i * m * k, m, n, k,
                                       true);
                }
                if (pb.requires_grad) {
                    pb.ensure_grad();
                    kernels::matmul_tn(dc, pa.data.data() + i * m * k,
                                       pb.grad.data() + i * n * k, n, m, k,
                                       true);
                }
            }
        });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("add: shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
    }
    std::vector<T> out(a.data().begin(), a.data().end());
    const auto bd = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
    return detail::make_result<T>(
        a.shape(), std::move(out), {a, b}, [](TensorImpl<T>& self) {
            for (auto& p : self.parents) {
                if (!p->requires_grad) continue;
                p->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) {
                    p->grad[i] += self.grad[i];
                }
            }
        });
}

// x[..., n] + bias[n], broadcast over leading dims.
template <class T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
    if (bias.rank() != 1 || x.dim(x.rank() - 1) != bias.dim(0)) {
        throw ShapeError("add_bias: bias " + shape_string(bias.shape()) +
                         " does not match " + shape_string(x.shape()));
    }
    const int64_t n = bias.dim(0);
    const int64_t rows = x.numel() / n;
    std::vector<T> out(x.data().begin(), x.data().end());
    const auto bd = bias.data();
    for (int64_t r = 0; r < rows; ++r) {
        T* row = out.data() + r * n;
        for (int64_t j = 0; j < n; ++j) row[j] += bd[j];
    }
    return detail::make_result<T>(
        x.shape(), std::move(out), {x, bias}, [rows, n](TensorImpl<T>& self) {
            auto& px = *self.parents[0];
            auto& pb = *self.parents[1];
            if (px.requires_grad) {
                px.ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) {
                    px.grad[i] += self.grad[i];
                }
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (int64_t r = 0; r < rows; ++r) {
                    const T* row = self.grad.data() + r * n;
                    for (int64_t j = 0; j < n; ++j) pb.grad[j] += row[j];
                }
            }
        });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("mul: shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
    }
    std::vector<T> out(a.data().begin(), a.data().end());
    const auto bd = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
    return detail::make_result<T>(
        a.shape(), std::move(out), {a, b}, [](TensorImpl<T>& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) {
                    pa.grad[i] += self.grad[i] * pb.data[i];
                }
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) {
                    pb.grad[i] += self.grad[i] * pa.data[i];
                }
            }
        });
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T c) {
    std::vector<T> out(x.data().begin(), x.data().end());
    for (T& v : out) v *= c;
    return detail::make_result<T>(
        x.shape(), std::move(out), {x}, [c](TensorImpl<T>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) {
                p.grad[i] += c * self.grad[i];
            }
        });
}

template <class T>
Tensor<T> tanh(const Tensor<T>& x) {
    std::vector<T> out(x.data().begin(), x.data().end());
    for (T& v : out) v = std::tanh(v);
    return detail::make_result<T>(
        x.shape(), std::move(out), {x}, [](TensorImpl<T>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) {
                const T y = self.data[i];
                p.grad[i] += self.grad[i] * (T(1) - y * y);
            }
        });
}

template <class T>
inline T sigmoid_scalar(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    std::vector<T> out(x.data().begin(), x.data().end());
    for (T& v : out) v = sigmoid_scalar(v);
    return detail::make_result<T>(
        x.shape(), std::move(out), {x}, [](TensorImpl<T>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) {
                const T y = self.data[i];
                p.grad[i] += self.grad[i] * y * (T(1) - y);
            }
        });
}

// Exact (erf-based) GELU.
template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
    constexpr double kInvSqrt2 = 0.70710678118654752440;
    std::vector<T> out(x.data().begin(), x.data().end());
    for (T& v : out) {
        v = static_cast<T>(0.5 * static_cast<double>(v) *
                           (1.0 + std::erf(static_cast<double>(v) * kInvSqrt2)));
    }
    return detail::make_result<T>(
        x.shape(), std::move(out), {x}, [](TensorImpl<T>& self) {
            constexpr double kInvSqrt2pi = 0.39894228040143267794;
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) {
                const double xv = static_cast<double>(p.data[i]);
                const double cdf =
                    0.5 * (1.0 + std::erf(xv * 0.70710678118654752440));
                const double pdf = kInvSqrt2pi * std::exp(-0.5 * xv * xv);
                p.grad[i] +=
                    self.grad[i] * static_cast<T>(cdf + xv * pdf);
            }
        });
}

namespace detail {

template <class T>
Tensor<T> softmax_impl(const Tensor<T>& x, std::vector<unsigned char> mask) {
    if (x.numel() == 0 || x.dim(x.rank() - 1) == 0) {
        throw DomainError("softmax: empty input");
    }
    const int64_t cols = x.dim(x.rank() - 1);
    const int64_t rows = x.numel() / cols;
    std::vector<T> out(static_cast<size_t>(x.numel()));
    const unsigned char* mp = mask.empty() ? nullptr : mask.data();
    int64_t bad = kernels::softmax_rows(x.data().data(), out.data(), rows,
                                        cols, mp);
    if (bad > 0) {
        throw ContractError("softmax: " + std::to_string(bad) +
                            " fully masked row(s)");
    }
    return make_result<T>(
        x.shape(), std::move(out), {x}, [rows, cols](TensorImpl<T>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (int64_t r = 0; r < rows; ++r) {
                const T* y = self.data.data() + r * cols;
                const T* dy = self.grad.data() + r * cols;
                T dot = T(0);
                for (int64_t j = 0; j < cols; ++j) dot += dy[j] * y[j];
                T* dx = p.grad.data() + r * cols;
                for (int64_t j = 0; j < cols; ++j) {
                    dx[j] += y[j] * (dy[j] - dot);
                }
            }
        });
}

}  // namespace detail

// Shift-stable softmax over the last axis.
template <class T>
Tensor<T> softmax(const Tensor<T>& x) {
    return detail::softmax_impl(x, {});
}

// Softmax over the last axis restricted to mask!=0 entries; masked entries
// are exactly zero in the output. mask has the same element count as x.
template <class T>
Tensor<T> masked_softmax(const Tensor<T>& x, std::vector<unsigned char> mask) {
    if (static_cast<int64_t>(mask.size()) != x.numel()) {
        throw ShapeError("masked_softmax: mask length " +
                         std::to_string(mask.size()) + " != numel " +
                         std::to_string(x.numel()));
    }
    return detail::softmax_impl(x, std::move(mask));
}

template <class T>
Tensor<T> log_softmax(const Tensor<T>& x) {
    if (x.numel() == 0 || x.dim(x.rank() - 1) == 0) {
        throw DomainError("log_softmax: empty input");
    }
    const int64_t cols = x.dim(x.rank() - 1);
    const int64_t rows = x.numel() / cols;
    std::vector<T> out(static_cast<size_t>(x.numel()));
    for (int64_t r = 0; r < rows; ++r) {
        const T* row = x.data().data() + r * cols;
        T mx = row[0];
        for (int64_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
        T sum = T(0);
        for (int64_t j = 0; j < cols; ++j) sum += std::exp(row[j] - mx);
        const T lse = mx + std::log(sum);
        for (int64_t j = 0; j < cols; ++j) out[r * cols + j] = row[j] - lse;
    }
    return detail::make_result<T>(
        x.shape(), std::move(out), {x}, [rows, cols](TensorImpl<T>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (int64_t r = 0; r < rows; ++r) {
                const T* y = self.data.data() + r * cols;
                const T* dy = self.grad.data() + r * cols;
                T sum_dy = T(0);
                for (int64_t j = 0; j < cols; ++j) sum_dy += dy[j];
                T* dx = p.grad.data() + r * cols;
                for (int64_t j = 0; j < cols; ++j) {
                    dx[j] += dy[j] - std::exp(y[j]) * sum_dy;
                }
            }
        });
}

// Layer normalization over the last axis with learned affine parameters.
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, T eps = T(1e-12)) {
    const int64_t cols = x.dim(x.rank() - 1);
    if (gain.numel() != cols || bias.numel() != cols) {
        throw ShapeError("layer_norm: affine params " +
                         shape_string(gain.shape()) + "/" +
                         shape_string(bias.shape()) + " do not match " +
                         shape_string(x.shape()));
    }
    const int64_t rows = x.numel() / cols;
    std::vector<T> out(static_cast<size_t>(x.numel()));
    auto mean = std::make_shared<std::vector<T>>(rows);
    auto inv_std = std::make_shared<std::vector<T>>(rows);
    kernels::layer_norm_rows(x.data().data(), gain.data().data(),
                             bias.data().data(), out.data(), rows, cols, eps,
                             mean->data(), inv_std->data());
    return detail::make_result<T>(
        x.shape(), std::move(out), {x, gain, bias},
        [rows, cols, mean, inv_std](TensorImpl<T>& self) {
            auto& px = *self.parents[0];
            auto& pg = *self.parents[1];
            auto& pb = *self.parents[2];
            const T* g = pg.data.data();
            std::vector<T> xhat(static_cast<size_t>(cols));
            for (int64_t r = 0; r < rows; ++r) {
                const T* xr = px.data.data() + r * cols;
                const T* dy = self.grad.data() + r * cols;
                const T mu = (*mean)[r];
                const T istd = (*inv_std)[r];
                for (int64_t j = 0; j < cols; ++j) {
                    xhat[j] = (xr[j] - mu) * istd;
                }
                if (pg.requires_grad) {
                    pg.ensure_grad();
                    for (int64_t j = 0; j < cols; ++j) {
                        pg.grad[j] += dy[j] * xhat[j];
                    }
                }
                if (pb.requires_grad) {
                    pb.ensure_grad();
                    for (int64_t j = 0; j < cols; ++j) pb.grad[j] += dy[j];
                }
                if (px.requires_grad) {
                    px.ensure_grad();
                    T mean_dxhat = T(0), mean_dxhat_xhat = T(0);
                    for (int64_t j = 0; j < cols; ++j) {
                        const T dxhat = dy[j] * g[j];
                        mean_dxhat += dxhat;
                        mean_dxhat_xhat += dxhat * xhat[j];
                    }
                    mean_dxhat /= T(cols);
                    mean_dxhat_xhat /= T(cols);
                    T* dx = px.grad.data() + r * cols;
                    for (int64_t j = 0; j < cols; ++j) {
                        const T dxhat = dy[j] * g[j];
                        dx[j] += istd * (dxhat - mean_dxhat -
                                         xhat[j] * mean_dxhat_xhat);
                    }
                }
            }
        });
}

// table[V,H] gathered by ids -> [N,H].
template <class T>
Tensor<T> embedding(const Tensor<T>& table, std::vector<int> ids) {
    if (table.rank() != 2) {
        throw ShapeError("embedding: table must be 2-D, got " +
                         shape_string(table.shape()));
    }
    const int64_t v = table.dim(0), h = table.dim(1);
    const int64_t n = static_cast<int64_t>(ids.size());
    std::vector<T> out(static_cast<size_t>(n * h));
    for (int64_t i = 0; i < n; ++i) {
        const int id = ids[static_cast<size_t>(i)];
        if (id < 0 || id >= v) {
            throw LookupError("embedding: id " + std::to_string(id) +
                              " at position " + std::to_string(i) +
                              " out of range [0," + std::to_string(v) + ")");
        }
        std::copy_n(table.data().data() + static_cast<int64_t>(id) * h, h,
                    out.data() + i * h);
    }
    return detail::make_result<T>(
        {n, h}, std::move(out), {table},
        [ids = std::move(ids), h](TensorImpl<T>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (size_t i = 0; i < ids.size(); ++i) {
                const T* src = self.grad.data() + static_cast<int64_t>(i) * h;
                T* dst = p.grad.data() + static_cast<int64_t>(ids[i]) * h;
                for (int64_t j = 0; j < h; ++j) dst[j] += src[j];
            }
        });
}

// Inverted dropout: scales survivors by 1/(1-p) at train time, identity at
// eval time.
template <class T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool train, Rng& rng) {
    if (p < 0.0 || p >= 1.0) {
        throw ContractError("dropout: rate must be in [0,1), got " +
                            std::to_string(p));
    }
    if (!train || p == 0.0) return x;
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    auto mask = std::make_shared<std::vector<T>>(x.data().size());
    std::vector<T> out(x.data().begin(), x.data().end());
    for (size_t i = 0; i < out.size(); ++i) {
        const T m = rng.uniform() < p ? T(0) : keep_scale;
        (*mask)[i] = m;
        out[i] *= m;
    }
    return detail::make_result<T>(
        x.shape(), std::move(out), {x}, [mask](TensorImpl<T>& self) {
            auto& p0 = *self.parents[0];
            if (!p0.requires_grad) return;
            p0.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) {
                p0.grad[i] += self.grad[i] * (*mask)[i];
            }
        });
}

// Concatenation along `axis`.
template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, size_t axis) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    const size_t rank = parts[0].rank();
    if (axis >= rank) throw ShapeError("concat: axis out of range");
    Shape out_shape = parts[0].shape();
    int64_t axis_total = 0;
    for (const auto& t : parts) {
        if (t.rank() != rank) throw ShapeError("concat: rank mismatch");
        for (size_t d = 0; d < rank; ++d) {
            if (d != axis && t.shape()[d] != out_shape[d]) {
                throw ShapeError("concat: shape mismatch " +
                                 shape_string(t.shape()) + " vs " +
                                 shape_string(out_shape));
            }
        }
        axis_total += t.shape()[axis];
    }
    out_shape[axis] = axis_total;
    int64_t outer = 1, inner = 1;
    for (size_t d = 0; d < axis; ++d) outer *= out_shape[d];
    for (size_t d = axis + 1; d < rank; ++d) inner *= out_shape[d];

    std::vector<T> out(static_cast<size_t>(shape_numel(out_shape)));
    std::vector<int64_t> blocks(parts.size());
    const int64_t out_row = axis_total * inner;
    int64_t off = 0;
    for (size_t i = 0; i < parts.size(); ++i) {
        blocks[i] = parts[i].shape()[axis] * inner;
        const T* src = parts[i].data().data();
        for (int64_t r = 0; r < outer; ++r) {
            std::copy_n(src + r * blocks[i], blocks[i],
                        out.data() + r * out_row + off);
        }
        off += blocks[i];
    }
    return detail::make_result<T>(
        out_shape, std::move(out), parts,
        [outer, out_row, blocks](TensorImpl<T>& self) {
            int64_t off2 = 0;
            for (size_t i = 0; i < self.parents.size(); ++i) {
                auto& p = *self.parents[i];
                if (p.requires_grad) {
                    p.ensure_grad();
                    for (int64_t r = 0; r < outer; ++r) {
                        const T* src = self.grad.data() + r * out_row + off2;
                        T* dst = p.grad.data() + r * blocks[i];
                        for (int64_t j = 0; j < blocks[i]; ++j) dst[j] += src[j];
                    }
                }
                off2 += blocks[i];
            }
        });
}

// Contiguous slice [start, end) along `axis`.
template <class T>
Tensor<T> slice(const Tensor<T>& x, size_t axis, int64_t start, int64_t end) {
    if (axis >= x.rank()) throw ShapeError("slice: axis out of range");
    const int64_t extent = x.shape()[axis];
    if (start < 0 || end > extent || start >= end) {
        throw ShapeError("slice: range [" + std::to_string(start) + "," +
                         std::to_string(end) + ") invalid for axis extent " +
                         std::to_string(extent));
    }
    Shape out_shape = x.shape();
    out_shape[axis] = end - start;
    int64_t outer = 1, inner = 1;
    for (size_t d = 0; d < axis; ++d) outer *= x.shape()[d];
    for (size_t d = axis + 1; d < x.rank(); ++d) inner *= x.shape()[d];
    const int64_t in_row = extent * inner;
    const int64_t out_block = (end - start) * inner;

    std::vector<T> out(static_cast<size_t>(outer * out_block));
    for (int64_t r = 0; r < outer; ++r) {
        std::copy_n(x.data().data() + r * in_row + start * inner, out_block,
                    out.data() + r * out_block);
    }
    return detail::make_result<T>(
        out_shape, std::move(out), {x},
        [outer, in_row, out_block, start, inner](TensorImpl<T>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (int64_t r = 0; r < outer; ++r) {
                const T* src = self.grad.data() + r * out_block;
                T* dst = p.grad.data() + r * in_row + start * inner;
                for (int64_t j = 0; j < out_block; ++j) dst[j] += src[j];
            }
        });
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel()) {
        throw ShapeError("reshape: cannot view " + shape_string(x.shape()) +
                         " as " + shape_string(new_shape));
    }
    std::vector<T> out(x.data().begin(), x.data().end());
    return detail::make_result<T>(
        std::move(new_shape), std::move(out), {x}, [](TensorImpl<T>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) {
                p.grad[i] += self.grad[i];
            }
        });
}

namespace detail {

// Raw strided permutation copy: dst[perm(idx)] = src[idx].
template <class T>
void permute_copy(const T* src, T* dst, const Shape& in_shape,
                  const std::vector<size_t>& perm, bool accumulate) {
    const size_t rank = in_shape.size();
    Shape out_shape(rank);
    for (size_t d = 0; d < rank; ++d) out_shape[d] = in_shape[perm[d]];
    std::vector<int64_t> in_strides(rank, 1), out_strides(rank, 1);
    for (size_t d = rank - 1; d > 0; --d) {
        in_strides[d - 1] = in_strides[d] * in_shape[d];
        out_strides[d - 1] = out_strides[d] * out_shape[d];
    }
    const int64_t n = shape_numel(in_shape);
    std::vector<int64_t> idx(rank, 0);
    for (int64_t flat = 0; flat < n; ++flat) {
        int64_t out_flat = 0;
        for (size_t d = 0; d < rank; ++d) out_flat += idx[perm[d]] * out_strides[d];
        if (accumulate) {
            dst[out_flat] += src[flat];
        } else {
            dst[out_flat] = src[flat];
        }
        for (size_t d = rank; d-- > 0;) {
            if (++idx[d] < in_shape[d]) break;
            idx[d] = 0;
        }
    }
}

}  // namespace detail

// Axis permutation, e.g. perm={0,2,1,3} swaps the middle axes of a 4-D
// tensor.
template <class T>
Tensor<T> permute(const Tensor<T>& x, std::vector<size_t> perm) {
    if (perm.size() != x.rank()) {
        throw ShapeError("permute: perm rank mismatch");
    }
    Shape out_shape(x.rank());
    for (size_t d = 0; d < perm.size(); ++d) out_shape[d] = x.shape()[perm[d]];
    std::vector<T> out(static_cast<size_t>(x.numel()));
    detail::permute_copy(x.data().data(), out.data(), x.shape(), perm, false);
    auto in_shape = x.shape();
    return detail::make_result<T>(
        std::move(out_shape), std::move(out), {x},
        [perm = std::move(perm), in_shape](TensorImpl<T>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            // dst(src_idx) accumulation: invert by permuting the gradient
            // back with the inverse permutation.
            std::vector<size_t> inv(perm.size());
            for (size_t d = 0; d < perm.size(); ++d) inv[perm[d]] = d;
            Shape out_shape2(perm.size());
            for (size_t d = 0; d < perm.size(); ++d) {
                out_shape2[d] = in_shape[perm[d]];
            }
            detail::permute_copy(self.grad.data(), p.grad.data(), out_shape2,
                                 inv, true);
        });
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
    T total = T(0);
    for (T v : x.data()) total += v;
    return detail::make_result<T>(
        {1}, {total}, {x}, [](TensorImpl<T>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (auto& g : p.grad) g += self.grad[0];
        });
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
    if (x.numel() == 0) throw ContractError("mean: empty tensor");
    T total = T(0);
    for (T v : x.data()) total += v;
    const T inv = T(1) / static_cast<T>(x.numel());
    return detail::make_result<T>(
        {1}, {total * inv}, {x}, [inv](TensorImpl<T>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (auto& g : p.grad) g += self.grad[0] * inv;
        });
}

// Mean cross-entropy over rows whose target is not ignore(-1).
// Fused log-softmax keeps the gradient exactly zero at ignored rows.
template <class T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::vector<int> targets) {
    if (logits.rank() != 2) {
        throw ShapeError("cross_entropy: logits must be 2-D, got " +
                         shape_string(logits.shape()));
    }
    const int64_t n = logits.dim(0), c = logits.dim(1);
    if (static_cast<int64_t>(targets.size()) != n) {
        throw ShapeError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(n) + " rows");
    }
    int64_t active = 0;
    T loss = T(0);
    for (int64_t r = 0; r < n; ++r) {
        const int t = targets[static_cast<size_t>(r)];
        if (t == -1) continue;
        if (t < 0 || t >= c) {
            throw ContractError("cross_entropy: target " + std::to_string(t) +
                                " out of range at row " + std::to_string(r));
        }
        const T* row = logits.data().data() + r * c;
        T mx = row[0];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        T sum_exp = T(0);
        for (int64_t j = 0; j < c; ++j) sum_exp += std::exp(row[j] - mx);
        loss += mx + std::log(sum_exp) - row[t];
        ++active;
    }
    if (active == 0) {
        throw ContractError("cross_entropy: all positions ignored");
    }
    loss /= static_cast<T>(active);
    return detail::make_result<T>(
        {1}, {loss}, {logits},
        [targets = std::move(targets), n, c, active](TensorImpl<T>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            const T gscale = self.grad[0] / static_cast<T>(active);
            for (int64_t r = 0; r < n; ++r) {
                const int t = targets[static_cast<size_t>(r)];
                if (t == -1) continue;
                const T* row = p.data.data() + r * c;
                T mx = row[0];
                for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
                T sum_exp = T(0);
                for (int64_t j = 0; j < c; ++j) sum_exp += std::exp(row[j] - mx);
                T* dx = p.grad.data() + r * c;
                const T inv = T(1) / sum_exp;
                for (int64_t j = 0; j < c; ++j) {
                    const T soft = std::exp(row[j] - mx) * inv;
                    dx[j] += gscale * (soft - (j == t ? T(1) : T(0)));
                }
            }
        });
}

// Mean binary cross-entropy with fused sigmoid over entries whose label is
// 0 or 1; label -1 means ignore.
template <class T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, std::vector<int> labels) {
    const int64_t n = logits.numel();
    if (static_cast<int64_t>(labels.size()) != n) {
        throw ShapeError("bce_with_logits: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " logits");
    }
    int64_t active = 0;
    T loss = T(0);
    for (int64_t i = 0; i < n; ++i) {
        const int y = labels[static_cast<size_t>(i)];
        if (y == -1) continue;
        if (y != 0 && y != 1) {
            throw ContractError("bce_with_logits: label must be 0/1/-1, got " +
                                std::to_string(y));
        }
        const T x = logits.data()[static_cast<size_t>(i)];
        // softplus(x) - y*x, computed shift-stably
        const T sp = std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
        loss += sp - static_cast<T>(y) * x;
        ++active;
    }
    if (active == 0) {
        throw ContractError("bce_with_logits: all positions ignored");
    }
    loss /= static_cast<T>(active);
    return detail::make_result<T>(
        {1}, {loss}, {logits},
        [labels = std::move(labels), n, active](TensorImpl<T>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            const T gscale = self.grad[0] / static_cast<T>(active);
            for (int64_t i = 0; i < n; ++i) {
                const int y = labels[static_cast<size_t>(i)];
                if (y == -1) continue;
                const T s = sigmoid_scalar(p.data[static_cast<size_t>(i)]);
                p.grad[static_cast<size_t>(i)] +=
                    gscale * (s - static_cast<T>(y));
            }
        });
}

}  // namespace vitag
