// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dense tensors with reverse-mode autodiff on an explicit tape.
//
// Design notes:
//  - A TensorT<T> is an immutable value: shape plus a shared flat buffer.
//    The exceptions are parameter tensors, which the optimizer updates in
//    place between tape lifetimes.
//  - Gradients are not stored on tensors. A Tape<T> records every op whose
//    inputs are tracked; Tape::backward replays the records in reverse and
//    accumulates gradients per node. One tape per training step.
//  - The active tape is thread local, so concurrent workers (if any) never
//    share recording state.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cinemagen/blas.hpp"
#include "cinemagen/errors.hpp"

namespace cinemagen {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

namespace detail {
inline uint64_t next_tensor_id() {
  static std::atomic<uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

template <typename T>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(Shape shape)
      : payload_(std::make_shared<Payload>()), shape_(std::move(shape)) {
    payload_->v.assign(shape_numel(shape_), T(0));
    payload_->id = detail::next_tensor_id();
  }

  TensorT(Shape shape, std::vector<T> values)
      : payload_(std::make_shared<Payload>()), shape_(std::move(shape)) {
    if (static_cast<int64_t>(values.size()) != shape_numel(shape_)) {
      throw DimensionError("tensor init: " + std::to_string(values.size()) +
                           " values for shape " + shape_str(shape_));
    }
    payload_->v = std::move(values);
    payload_->id = detail::next_tensor_id();
  }

  static TensorT zeros(Shape shape) { return TensorT(std::move(shape)); }

  static TensorT full(Shape shape, T value) {
    TensorT t(std::move(shape));
    std::fill(t.values().begin(), t.values().end(), value);
    return t;
  }

  static TensorT scalar(T value) { return TensorT({1}, {value}); }

  bool defined() const { return payload_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int64_t dim(size_t axis) const { return shape_.at(axis); }
  int64_t size() const { return payload_ ? static_cast<int64_t>(payload_->v.size()) : 0; }

  std::vector<T>& values() { return payload_->v; }
  const std::vector<T>& values() const { return payload_->v; }
  T* data() { return payload_->v.data(); }
  const T* data() const { return payload_->v.data(); }

  T item() const {
    if (size() != 1) {
      throw DimensionError("item() requires a single element tensor, got " +
                           shape_str(shape_));
    }
    return payload_->v[0];
  }

  // Identity and the requires-grad flag are shared between copies.
  uint64_t id() const { return payload_ ? payload_->id : 0; }
  bool requires_grad() const { return payload_ && payload_->requires_grad; }
  TensorT& set_requires_grad(bool flag) {
    payload_->requires_grad = flag;
    return *this;
  }

  // Value copy with a fresh identity; never participates in gradients.
  TensorT detach() const {
    TensorT out(shape_, std::vector<T>(payload_->v));
    return out;
  }

 private:
  struct Payload {
    std::vector<T> v;
    bool requires_grad = false;
    uint64_t id = 0;
  };
  std::shared_ptr<Payload> payload_;
  Shape shape_;
};

using Tensor = TensorT<float>;

template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const T>, Tape<T>&)>;

  Tape() { stack().push_back(this); }
  ~Tape() { stack().pop_back(); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() {
    auto& s = stack();
    return s.empty() ? nullptr : s.back();
  }

  // Node id of `t` on this tape. Registers a leaf when `t` asks for
  // gradients and has not been seen; returns -1 for untracked constants.
  int track(const TensorT<T>& t) {
    auto it = index_.find(t.id());
    if (it != index_.end()) return it->second;
    if (!t.requires_grad()) return -1;
    nodes_.push_back(Node{{}, nullptr, t.size()});
    grads_.emplace_back();
    const int id = static_cast<int>(nodes_.size()) - 1;
    index_.emplace(t.id(), id);
    return id;
  }

  // Records `out = op(parents...)`. `backward` receives the output gradient
  // and accumulates into the parents' buffers.
  void record(const TensorT<T>& out, std::vector<int> parents,
              BackwardFn backward) {
    nodes_.push_back(Node{std::move(parents), std::move(backward), out.size()});
    grads_.emplace_back();
    index_.emplace(out.id(), static_cast<int>(nodes_.size()) - 1);
  }

  bool tracked(const TensorT<T>& t) const {
    return index_.contains(t.id());
  }

  void backward(const TensorT<T>& loss) {
    if (consumed_) {
      throw TapeError("backward invoked twice on the same tape");
    }
    if (loss.size() != 1) {
      throw TapeError("backward requires a scalar loss, got shape " +
                      shape_str(loss.shape()));
    }
    auto it = index_.find(loss.id());
    if (it == index_.end()) {
      throw TapeError("loss tensor is not recorded on the active tape");
    }
    consumed_ = true;
    const int root = it->second;
    grad_buffer(root)[0] = T(1);
    for (int i = root; i >= 0; --i) {
      if (grads_[i].empty() || !nodes_[i].backward) continue;
      nodes_[i].backward(std::span<const T>(grads_[i]), *this);
    }
  }

  // Gradient buffer for a node, allocated on first touch.
  std::vector<T>& grad_buffer(int node) {
    auto& g = grads_[node];
    if (g.empty()) g.assign(nodes_[node].size, T(0));
    return g;
  }

  bool has_grad(const TensorT<T>& t) const {
    auto it = index_.find(t.id());
    return it != index_.end() && !grads_[it->second].empty();
  }

  std::span<const T> grad(const TensorT<T>& t) const {
    auto it = index_.find(t.id());
    if (it == index_.end() || grads_[it->second].empty()) {
      throw TapeError("no gradient recorded for the requested tensor");
    }
    return std::span<const T>(grads_[it->second]);
  }

 private:
  struct Node {
    std::vector<int> parents;
    BackwardFn backward;
    int64_t size;
  };

  static std::vector<Tape*>& stack() {
    static thread_local std::vector<Tape*> s;
    return s;
  }

  std::vector<Node> nodes_;
  std::vector<std::vector<T>> grads_;
  std::unordered_map<uint64_t, int> index_;
  bool consumed_ = false;
};

namespace detail {

template <typename T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b,
                      const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes differ, " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "add");
  TensorT<T> out(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (Tape<T>* tp = Tape<T>::active()) {
    const int pa = tp->track(a), pb = tp->track(b);
    if (pa >= 0 || pb >= 0) {
      tp->record(out, {pa, pb}, [pa, pb, n](std::span<const T> g, Tape<T>& t) {
        if (pa >= 0) {
          auto& ga = t.grad_buffer(pa);
          for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
        }
        if (pb >= 0) {
          auto& gb = t.grad_buffer(pb);
          for (int64_t i = 0; i < n; ++i) gb[i] += g[i];
        }
      });
    }
  }
  return out;
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "sub");
  TensorT<T> out(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  if (Tape<T>* tp = Tape<T>::active()) {
    const int pa = tp->track(a), pb = tp->track(b);
    if (pa >= 0 || pb >= 0) {
      tp->record(out, {pa, pb}, [pa, pb, n](std::span<const T> g, Tape<T>& t) {
        if (pa >= 0) {
          auto& ga = t.grad_buffer(pa);
          for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
        }
        if (pb >= 0) {
          auto& gb = t.grad_buffer(pb);
          for (int64_t i = 0; i < n; ++i) gb[i] -= g[i];
        }
      });
    }
  }
  return out;
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "mul");
  TensorT<T> out(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (Tape<T>* tp = Tape<T>::active()) {
    const int pa = tp->track(a), pb = tp->track(b);
    if (pa >= 0 || pb >= 0) {
      tp->record(out, {pa, pb},
                 [pa, pb, a, b, n](std::span<const T> g, Tape<T>& t) {
                   if (pa >= 0) {
                     auto& ga = t.grad_buffer(pa);
                     for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * b.data()[i];
                   }
                   if (pb >= 0) {
                     auto& gb = t.grad_buffer(pb);
                     for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * a.data()[i];
                   }
                 });
    }
  }
  return out;
}

// out = scale * a + shift
template <typename T>
TensorT<T> affine(const TensorT<T>& a, T scale, T shift) {
  TensorT<T> out(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = scale * a.data()[i] + shift;
  if (Tape<T>* tp = Tape<T>::active()) {
    const int pa = tp->track(a);
    if (pa >= 0) {
      tp->record(out, {pa}, [pa, scale, n](std::span<const T> g, Tape<T>& t) {
        auto& ga = t.grad_buffer(pa);
        for (int64_t i = 0; i < n; ++i) ga[i] += scale * g[i];
      });
    }
  }
  return out;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& a) {
  TensorT<T> out(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i)
    out.data()[i] = a.data()[i] > T(0) ? a.data()[i] : T(0);
  if (Tape<T>* tp = Tape<T>::active()) {
    const int pa = tp->track(a);
    if (pa >= 0) {
      // Subgradient at 0 is taken as 0.
      tp->record(out, {pa}, [pa, a, n](std::span<const T> g, Tape<T>& t) {
        auto& ga = t.grad_buffer(pa);
        for (int64_t i = 0; i < n; ++i)
          if (a.data()[i] > T(0)) ga[i] += g[i];
      });
    }
  }
  return out;
}

template <typename T>
TensorT<T> tanh_act(const TensorT<T>& a) {
  TensorT<T> out(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = std::tanh(a.data()[i]);
  if (Tape<T>* tp = Tape<T>::active()) {
    const int pa = tp->track(a);
    if (pa >= 0) {
      tp->record(out, {pa}, [pa, out, n](std::span<const T> g, Tape<T>& t) {
        auto& ga = t.grad_buffer(pa);
        for (int64_t i = 0; i < n; ++i) {
          const T y = out.data()[i];
          ga[i] += g[i] * (T(1) - y * y);
        }
      });
    }
  }
  return out;
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& a) {
  TensorT<T> out(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) {
    const T x = a.data()[i];
    // Overflow-safe in both tails.
    if (x >= T(0)) {
      const T e = std::exp(-x);
      out.data()[i] = T(1) / (T(1) + e);
    } else {
      const T e = std::exp(x);
      out.data()[i] = e / (T(1) + e);
    }
  }
  if (Tape<T>* tp = Tape<T>::active()) {
    const int pa = tp->track(a);
    if (pa >= 0) {
      tp->record(out, {pa}, [pa, out, n](std::span<const T> g, Tape<T>& t) {
        auto& ga = t.grad_buffer(pa);
        for (int64_t i = 0; i < n; ++i) {
          const T y = out.data()[i];
          ga[i] += g[i] * y * (T(1) - y);
        }
      });
    }
  }
  return out;
}

// Natural log. Callers are expected to clamp away from 0 first.
template <typename T>
TensorT<T> log_op(const TensorT<T>& a) {
  TensorT<T> out(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = std::log(a.data()[i]);
  if (Tape<T>* tp = Tape<T>::active()) {
    const int pa = tp->track(a);
    if (pa >= 0) {
      tp->record(out, {pa}, [pa, a, n](std::span<const T> g, Tape<T>& t) {
        auto& ga = t.grad_buffer(pa);
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i] / a.data()[i];
      });
    }
  }
  return out;
}

// Gradient is passed through strictly inside (lo, hi) and zero at the rails.
template <typename T>
TensorT<T> clamp(const TensorT<T>& a, T lo, T hi) {
  TensorT<T> out(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i)
    out.data()[i] = std::min(hi, std::max(lo, a.data()[i]));
  if (Tape<T>* tp = Tape<T>::active()) {
    const int pa = tp->track(a);
    if (pa >= 0) {
      tp->record(out, {pa}, [pa, a, lo, hi, n](std::span<const T> g, Tape<T>& t) {
        auto& ga = t.grad_buffer(pa);
        for (int64_t i = 0; i < n; ++i) {
          const T x = a.data()[i];
          if (x > lo && x < hi) ga[i] += g[i];
        }
      });
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions and shape ops

template <typename T>
TensorT<T> sum(const TensorT<T>& a) {
  T acc = T(0);
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) acc += a.data()[i];
  TensorT<T> out = TensorT<T>::scalar(acc);
  if (Tape<T>* tp = Tape<T>::active()) {
    const int pa = tp->track(a);
    if (pa >= 0) {
      tp->record(out, {pa}, [pa, n](std::span<const T> g, Tape<T>& t) {
        auto& ga = t.grad_buffer(pa);
        for (int64_t i = 0; i < n; ++i) ga[i] += g[0];
      });
    }
  }
  return out;
}

template <typename T>
TensorT<T> mean(const TensorT<T>& a) {
  return affine(sum(a), T(1) / static_cast<T>(a.size()), T(0));
}

template <typename T>
TensorT<T> reshape(const TensorT<T>& a, Shape shape) {
  if (shape_numel(shape) != a.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) +
                         " as " + shape_str(shape));
  }
  TensorT<T> out(std::move(shape), std::vector<T>(a.values()));
  if (Tape<T>* tp = Tape<T>::active()) {
    const int pa = tp->track(a);
    if (pa >= 0) {
      const int64_t n = a.size();
      tp->record(out, {pa}, [pa, n](std::span<const T> g, Tape<T>& t) {
        auto& ga = t.grad_buffer(pa);
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
      });
    }
  }
  return out;
}

template <typename T>
TensorT<T> slice_cols(const TensorT<T>& a, int64_t c0, int64_t c1) {
  if (a.shape().size() != 2) {
    throw DimensionError("slice_cols: expected a 2-d tensor, got " +
                         shape_str(a.shape()));
  }
  const int64_t rows = a.dim(0), cols = a.dim(1);
  if (c0 < 0 || c1 > cols || c0 >= c1) {
    throw DimensionError("slice_cols: range [" + std::to_string(c0) + "," +
                         std::to_string(c1) + ") out of " +
                         std::to_string(cols) + " columns");
  }
  const int64_t w = c1 - c0;
  TensorT<T> out({rows, w});
  for (int64_t r = 0; r < rows; ++r)
    std::copy_n(a.data() + r * cols + c0, w, out.data() + r * w);
  if (Tape<T>* tp = Tape<T>::active()) {
    const int pa = tp->track(a);
    if (pa >= 0) {
      tp->record(out, {pa},
                 [pa, rows, cols, c0, w](std::span<const T> g, Tape<T>& t) {
                   auto& ga = t.grad_buffer(pa);
                   for (int64_t r = 0; r < rows; ++r)
                     for (int64_t j = 0; j < w; ++j)
                       ga[r * cols + c0 + j] += g[r * w + j];
                 });
    }
  }
  return out;
}

template <typename T>
TensorT<T> concat_cols(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(0) != b.dim(0)) {
    throw DimensionError("concat_cols: need 2-d tensors with equal rows, got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const int64_t rows = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  TensorT<T> out({rows, ca + cb});
  for (int64_t r = 0; r < rows; ++r) {
    std::copy_n(a.data() + r * ca, ca, out.data() + r * (ca + cb));
    std::copy_n(b.data() + r * cb, cb, out.data() + r * (ca + cb) + ca);
  }
  if (Tape<T>* tp = Tape<T>::active()) {
    const int pa = tp->track(a), pb = tp->track(b);
    if (pa >= 0 || pb >= 0) {
      tp->record(out, {pa, pb},
                 [pa, pb, rows, ca, cb](std::span<const T> g, Tape<T>& t) {
                   if (pa >= 0) {
                     auto& ga = t.grad_buffer(pa);
                     for (int64_t r = 0; r < rows; ++r)
                       for (int64_t j = 0; j < ca; ++j)
                         ga[r * ca + j] += g[r * (ca + cb) + j];
                   }
                   if (pb >= 0) {
                     auto& gb = t.grad_buffer(pb);
                     for (int64_t r = 0; r < rows; ++r)
                       for (int64_t j = 0; j < cb; ++j)
                         gb[r * cb + j] += g[r * (ca + cb) + ca + j];
                   }
                 });
    }
  }
  return out;
}

// Row-wise one-hot of the argmax (first index wins ties). The backward pass
// is the straight-through estimator: gradients copy through unchanged.
template <typename T>
TensorT<T> argmax_onehot(const TensorT<T>& q) {
  if (q.shape().empty() || q.shape().size() > 2) {
    throw DimensionError("argmax_onehot: expected 1-d or 2-d input, got " +
                         shape_str(q.shape()));
  }
  const int64_t rows = q.shape().size() == 2 ? q.dim(0) : 1;
  const int64_t cols = q.shape().size() == 2 ? q.dim(1) : q.dim(0);
  TensorT<T> out(q.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const T* row = q.data() + r * cols;
    int64_t best = 0;
    for (int64_t j = 1; j < cols; ++j)
      if (row[j] > row[best]) best = j;
    out.data()[r * cols + best] = T(1);
  }
  if (Tape<T>* tp = Tape<T>::active()) {
    const int pq = tp->track(q);
    if (pq >= 0) {
      const int64_t n = q.size();
      tp->record(out, {pq}, [pq, n](std::span<const T> g, Tape<T>& t) {
        auto& gq = t.grad_buffer(pq);
        for (int64_t i = 0; i < n; ++i) gq[i] += g[i];
      });
    }
  }
  return out;
}

// Argmax indices per row, for action logging.
template <typename T>
std::vector<int64_t> argmax_rows(const TensorT<T>& q) {
  const int64_t rows = q.shape().size() == 2 ? q.dim(0) : 1;
  const int64_t cols = q.shape().size() == 2 ? q.dim(1) : q.dim(0);
  std::vector<int64_t> idx(rows, 0);
  for (int64_t r = 0; r < rows; ++r) {
    const T* row = q.data() + r * cols;
    for (int64_t j = 1; j < cols; ++j)
      if (row[j] > row[idx[r]]) idx[r] = j;
  }
  return idx;
}

// ---------------------------------------------------------------------------
// Linear layers

// y = x W^T + b with x [B,I] (or [I]), W [O,I], b [O].
template <typename T>
TensorT<T> fully_connected(const TensorT<T>& x, const TensorT<T>& w,
                           const TensorT<T>& b) {
  const bool vec = x.shape().size() == 1;
  if (!vec && x.shape().size() != 2) {
    throw DimensionError("fully_connected: input must be 1-d or 2-d, got " +
                         shape_str(x.shape()));
  }
  if (w.shape().size() != 2) {
    throw DimensionError("fully_connected: weight must be 2-d, got " +
                         shape_str(w.shape()));
  }
  const int64_t batch = vec ? 1 : x.dim(0);
  const int64_t in = vec ? x.dim(0) : x.dim(1);
  const int64_t out_dim = w.dim(0);
  if (w.dim(1) != in) {
    throw DimensionError("fully_connected: input features (axis " +
                         std::string(vec ? "0" : "1") + ") = " +
                         std::to_string(in) + " do not match weight columns " +
                         std::to_string(w.dim(1)));
  }
  const bool has_bias = b.defined();
  if (has_bias && (b.shape().size() != 1 || b.dim(0) != out_dim)) {
    throw DimensionError("fully_connected: bias shape " + shape_str(b.shape()) +
                         " does not match " + std::to_string(out_dim) +
                         " outputs");
  }

  TensorT<T> out(vec ? Shape{out_dim} : Shape{batch, out_dim});
  detail::gemm(false, true, batch, out_dim, in, T(1), x.data(), in, w.data(),
               in, T(0), out.data(), out_dim);
  if (has_bias) {
    for (int64_t r = 0; r < batch; ++r)
      for (int64_t o = 0; o < out_dim; ++o) out.data()[r * out_dim + o] += b.data()[o];
  }

  if (Tape<T>* tp = Tape<T>::active()) {
    const int px = tp->track(x);
    const int pw = tp->track(w);
    const int pb = has_bias ? tp->track(b) : -1;
    if (px >= 0 || pw >= 0 || pb >= 0) {
      tp->record(out, {px, pw, pb},
                 [px, pw, pb, x, w, batch, in, out_dim](std::span<const T> g,
                                                        Tape<T>& t) {
                   if (px >= 0) {
                     auto& gx = t.grad_buffer(px);
                     detail::gemm(false, false, batch, in, out_dim, T(1),
                                  g.data(), out_dim, w.data(), in, T(1),
                                  gx.data(), in);
                   }
                   if (pw >= 0) {
                     auto& gw = t.grad_buffer(pw);
                     detail::gemm(true, false, out_dim, in, batch, T(1),
                                  g.data(), out_dim, x.data(), in, T(1),
                                  gw.data(), in);
                   }
                   if (pb >= 0) {
                     auto& gb = t.grad_buffer(pb);
                     for (int64_t r = 0; r < batch; ++r)
                       for (int64_t o = 0; o < out_dim; ++o)
                         gb[o] += g[r * out_dim + o];
                   }
                 });
    }
  }
  return out;
}

template <typename T>
TensorT<T> fully_connected(const TensorT<T>& x, const TensorT<T>& w) {
  return fully_connected(x, w, TensorT<T>());
}

// ---------------------------------------------------------------------------
// Convolutions (NCHW, square kernels)

namespace detail {

// Unpacks one sample into columns: row (c*K+ky)*K+kx, column y*Wo+x.
// `col` points at this sample's first column inside a [C*K*K, col_stride]
// matrix laid out row major.
template <typename T>
void im2col(const T* x, int64_t c_in, int64_t h, int64_t w, int64_t k,
            int64_t stride, int64_t pad, int64_t ho, int64_t wo, T* col,
            int64_t col_stride) {
  for (int64_t c = 0; c < c_in; ++c) {
    for (int64_t ky = 0; ky < k; ++ky) {
      for (int64_t kx = 0; kx < k; ++kx) {
        T* dst = col + ((c * k + ky) * k + kx) * col_stride;
        for (int64_t y = 0; y < ho; ++y) {
          const int64_t iy = y * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            std::fill_n(dst + y * wo, wo, T(0));
            continue;
          }
          for (int64_t xo = 0; xo < wo; ++xo) {
            const int64_t ix = xo * stride - pad + kx;
            dst[y * wo + xo] =
                (ix >= 0 && ix < w) ? x[(c * h + iy) * w + ix] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds columns back into the image.
template <typename T>
void col2im_add(const T* col, int64_t c_in, int64_t h, int64_t w, int64_t k,
                int64_t stride, int64_t pad, int64_t ho, int64_t wo, T* x,
                int64_t col_stride) {
  for (int64_t c = 0; c < c_in; ++c) {
    for (int64_t ky = 0; ky < k; ++ky) {
      for (int64_t kx = 0; kx < k; ++kx) {
        const T* src = col + ((c * k + ky) * k + kx) * col_stride;
        for (int64_t y = 0; y < ho; ++y) {
          const int64_t iy = y * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int64_t xo = 0; xo < wo; ++xo) {
            const int64_t ix = xo * stride - pad + kx;
            if (ix >= 0 && ix < w) x[(c * h + iy) * w + ix] += src[y * wo + xo];
          }
        }
      }
    }
  }
}

}  // namespace detail

// out[n,o,y,x] = b[o] + sum_{i,ky,kx} w[o,i,ky,kx] * x[n,i,y*s-p+ky,x*s-p+kx]
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                  int64_t stride, int64_t pad) {
  if (x.shape().size() != 4) {
    throw DimensionError("conv2d: input must be [N,C,H,W], got " +
                         shape_str(x.shape()));
  }
  if (w.shape().size() != 4 || w.dim(2) != w.dim(3)) {
    throw DimensionError("conv2d: kernel must be [O,I,K,K], got " +
                         shape_str(w.shape()));
  }
  const int64_t n = x.dim(0), c_in = x.dim(1), h = x.dim(2), ww = x.dim(3);
  const int64_t c_out = w.dim(0), k = w.dim(2);
  if (w.dim(1) != c_in) {
    throw DimensionError("conv2d: input channels (axis 1) = " +
                         std::to_string(c_in) +
                         " do not match kernel input channels = " +
                         std::to_string(w.dim(1)));
  }
  if (b.defined() && (b.shape().size() != 1 || b.dim(0) != c_out)) {
    throw DimensionError("conv2d: bias shape " + shape_str(b.shape()) +
                         " does not match " + std::to_string(c_out) +
                         " output channels");
  }
  const int64_t ho = (h + 2 * pad - k) / stride + 1;
  const int64_t wo = (ww + 2 * pad - k) / stride + 1;
  if (h + 2 * pad < k || ww + 2 * pad < k) {
    throw DimensionError("conv2d: kernel " + std::to_string(k) +
                         " larger than padded input " + shape_str(x.shape()));
  }

  const int64_t ckk = c_in * k * k;
  const int64_t cols = n * ho * wo;
  auto col = std::make_shared<std::vector<T>>(ckk * cols);
  for (int64_t s = 0; s < n; ++s) {
    detail::im2col(x.data() + s * c_in * h * ww, c_in, h, ww, k, stride, pad,
                   ho, wo, col->data() + s * ho * wo, cols);
  }

  // out_mat [c_out, cols] with columns ordered (sample, y, x).
  std::vector<T> out_mat(c_out * cols);
  detail::gemm(false, false, c_out, cols, ckk, T(1), w.data(), ckk, col->data(),
               cols, T(0), out_mat.data(), cols);

  TensorT<T> out({n, c_out, ho, wo});
  const int64_t hw = ho * wo;
  for (int64_t s = 0; s < n; ++s) {
    for (int64_t o = 0; o < c_out; ++o) {
      T* dst = out.data() + (s * c_out + o) * hw;
      const T* src = out_mat.data() + o * cols + s * hw;
      if (b.defined()) {
        const T bias = b.data()[o];
        for (int64_t i = 0; i < hw; ++i) dst[i] = src[i] + bias;
      } else {
        std::copy_n(src, hw, dst);
      }
    }
  }

  if (Tape<T>* tp = Tape<T>::active()) {
    const int px = tp->track(x);
    const int pw = tp->track(w);
    const int pb = b.defined() ? tp->track(b) : -1;
    if (px >= 0 || pw >= 0 || pb >= 0) {
      tp->record(out, {px, pw, pb},
                 [px, pw, pb, x, w, col, n, c_in, h, ww, c_out, k, stride, pad,
                  ho, wo, ckk, cols, hw](std::span<const T> g, Tape<T>& t) {
                   std::vector<T> g_mat(c_out * cols);
                   for (int64_t s = 0; s < n; ++s)
                     for (int64_t o = 0; o < c_out; ++o)
                       std::copy_n(g.data() + (s * c_out + o) * hw, hw,
                                   g_mat.data() + o * cols + s * hw);
                   if (pw >= 0) {
                     auto& gw = t.grad_buffer(pw);
                     detail::gemm(false, true, c_out, ckk, cols, T(1),
                                  g_mat.data(), cols, col->data(), cols, T(1),
                                  gw.data(), ckk);
                   }
                   if (pb >= 0) {
                     auto& gb = t.grad_buffer(pb);
                     for (int64_t o = 0; o < c_out; ++o) {
                       T acc = T(0);
                       for (int64_t s = 0; s < n; ++s)
                         for (int64_t i = 0; i < hw; ++i)
                           acc += g[(s * c_out + o) * hw + i];
                       gb[o] += acc;
                     }
                   }
                   if (px >= 0) {
                     std::vector<T> g_col(ckk * cols);
                     detail::gemm(true, false, ckk, cols, c_out, T(1), w.data(),
                                  ckk, g_mat.data(), cols, T(0), g_col.data(),
                                  cols);
                     auto& gx = t.grad_buffer(px);
                     for (int64_t s = 0; s < n; ++s)
                       detail::col2im_add(g_col.data() + s * hw, c_in, h, ww, k,
                                          stride, pad, ho, wo,
                                          gx.data() + s * c_in * h * ww, cols);
                   }
                 });
    }
  }
  return out;
}

// Exact adjoint of conv2d in its input: maps [N,O,h,w] up to [N,I,H,W] where
// conv2d of the output shape with the same kernel/stride/pad yields [h,w].
template <typename T>
TensorT<T> conv2d_transpose(const TensorT<T>& x, const TensorT<T>& w,
                            const TensorT<T>& b, int64_t stride, int64_t pad,
                            int64_t out_h, int64_t out_w) {
  if (x.shape().size() != 4) {
    throw DimensionError("conv2d_transpose: input must be [N,O,h,w], got " +
                         shape_str(x.shape()));
  }
  if (w.shape().size() != 4 || w.dim(2) != w.dim(3)) {
    throw DimensionError("conv2d_transpose: kernel must be [O,I,K,K], got " +
                         shape_str(w.shape()));
  }
  const int64_t n = x.dim(0), c_out = x.dim(1), h = x.dim(2), ww = x.dim(3);
  const int64_t c_in = w.dim(1), k = w.dim(2);
  if (w.dim(0) != c_out) {
    throw DimensionError("conv2d_transpose: input channels (axis 1) = " +
                         std::to_string(c_out) +
                         " do not match kernel output channels = " +
                         std::to_string(w.dim(0)));
  }
  if (b.defined() && (b.shape().size() != 1 || b.dim(0) != c_in)) {
    throw DimensionError("conv2d_transpose: bias shape " + shape_str(b.shape()) +
                         " does not match " + std::to_string(c_in) +
                         " output channels");
  }
  if ((out_h + 2 * pad - k) / stride + 1 != h ||
      (out_w + 2 * pad - k) / stride + 1 != ww) {
    throw DimensionError(
        "conv2d_transpose: declared output " + std::to_string(out_h) + "x" +
        std::to_string(out_w) + " is inconsistent with input " +
        shape_str(x.shape()) + " under kernel " + std::to_string(k) +
        ", stride " + std::to_string(stride) + ", pad " + std::to_string(pad));
  }

  const int64_t ckk = c_in * k * k;
  const int64_t cols = n * h * ww;
  const int64_t hw = h * ww;

  // u_mat [c_out, cols]: the NCHW input regathered with (sample, y, x) columns.
  std::vector<T> u_mat(c_out * cols);
  for (int64_t s = 0; s < n; ++s)
    for (int64_t o = 0; o < c_out; ++o)
      std::copy_n(x.data() + (s * c_out + o) * hw, hw,
                  u_mat.data() + o * cols + s * hw);

  std::vector<T> col(ckk * cols);
  detail::gemm(true, false, ckk, cols, c_out, T(1), w.data(), ckk, u_mat.data(),
               cols, T(0), col.data(), cols);

  TensorT<T> out({n, c_in, out_h, out_w});
  for (int64_t s = 0; s < n; ++s)
    detail::col2im_add(col.data() + s * hw, c_in, out_h, out_w, k, stride, pad,
                       h, ww, out.data() + s * c_in * out_h * out_w, cols);
  if (b.defined()) {
    const int64_t ohw = out_h * out_w;
    for (int64_t s = 0; s < n; ++s)
      for (int64_t c = 0; c < c_in; ++c) {
        T* dst = out.data() + (s * c_in + c) * ohw;
        const T bias = b.data()[c];
        for (int64_t i = 0; i < ohw; ++i) dst[i] += bias;
      }
  }

  if (Tape<T>* tp = Tape<T>::active()) {
    const int px = tp->track(x);
    const int pw = tp->track(w);
    const int pb = b.defined() ? tp->track(b) : -1;
    if (px >= 0 || pw >= 0 || pb >= 0) {
      tp->record(
          out, {px, pw, pb},
          [px, pw, pb, x, w, n, c_in, c_out, k, stride, pad, out_h, out_w, h,
           ww, ckk, cols, hw](std::span<const T> g, Tape<T>& t) {
            // im2col of the upstream gradient serves both dX and dW.
            std::vector<T> g_col(ckk * cols);
            for (int64_t s = 0; s < n; ++s)
              detail::im2col(g.data() + s * c_in * out_h * out_w, c_in, out_h,
                             out_w, k, stride, pad, h, ww,
                             g_col.data() + s * hw, cols);
            if (px >= 0) {
              std::vector<T> gx_mat(c_out * cols);
              detail::gemm(false, false, c_out, cols, ckk, T(1), w.data(), ckk,
                           g_col.data(), cols, T(0), gx_mat.data(), cols);
              auto& gx = t.grad_buffer(px);
              for (int64_t s = 0; s < n; ++s)
                for (int64_t o = 0; o < c_out; ++o) {
                  T* dst = gx.data() + (s * c_out + o) * hw;
                  const T* src = gx_mat.data() + o * cols + s * hw;
                  for (int64_t i = 0; i < hw; ++i) dst[i] += src[i];
                }
            }
            if (pw >= 0) {
              std::vector<T> u_mat(c_out * cols);
              for (int64_t s = 0; s < n; ++s)
                for (int64_t o = 0; o < c_out; ++o)
                  std::copy_n(x.data() + (s * c_out + o) * hw, hw,
                              u_mat.data() + o * cols + s * hw);
              auto& gw = t.grad_buffer(pw);
              detail::gemm(false, true, c_out, ckk, cols, T(1), u_mat.data(),
                           cols, g_col.data(), cols, T(1), gw.data(), ckk);
            }
            if (pb >= 0) {
              auto& gb = t.grad_buffer(pb);
              const int64_t ohw = out_h * out_w;
              for (int64_t c = 0; c < c_in; ++c) {
                T acc = T(0);
                for (int64_t s = 0; s < n; ++s)
                  for (int64_t i = 0; i < ohw; ++i)
                    acc += g[(s * c_in + c) * ohw + i];
                gb[c] += acc;
              }
            }
          });
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// LSTM step (composite; gate order i, f, g, o)

template <typename T>
struct LstmParamsT {
  TensorT<T> wx;  // [4Z, I]
  TensorT<T> wh;  // [4Z, Z]
  TensorT<T> b;   // [4Z]
};

template <typename T>
struct LstmStateT {
  TensorT<T> h;
  TensorT<T> c;

  static LstmStateT zeros(int64_t batch, int64_t z) {
    return {TensorT<T>({batch, z}), TensorT<T>({batch, z})};
  }
};

template <typename T>
LstmStateT<T> lstm_step(const TensorT<T>& x, const LstmStateT<T>& state,
                        const LstmParamsT<T>& p) {
  const int64_t z4 = p.wx.dim(0);
  if (z4 % 4 != 0) {
    throw DimensionError("lstm_step: gate weight rows " + std::to_string(z4) +
                         " are not a multiple of 4");
  }
  const int64_t z = z4 / 4;
  if (state.h.dim(1) != z || state.c.dim(1) != z) {
    throw DimensionError("lstm_step: state width " + shape_str(state.h.shape()) +
                         " does not match hidden size " + std::to_string(z));
  }
  TensorT<T> gates =
      add(fully_connected(x, p.wx, p.b), fully_connected(state.h, p.wh));
  TensorT<T> gi = sigmoid(slice_cols(gates, 0, z));
  TensorT<T> gf = sigmoid(slice_cols(gates, z, 2 * z));
  TensorT<T> gg = tanh_act(slice_cols(gates, 2 * z, 3 * z));
  TensorT<T> go = sigmoid(slice_cols(gates, 3 * z, 4 * z));
  TensorT<T> c_next = add(mul(gf, state.c), mul(gi, gg));
  TensorT<T> h_next = mul(go, tanh_act(c_next));
  return {h_next, c_next};
}

// ---------------------------------------------------------------------------
// Parameters and Adam

template <typename T>
struct ParamT {
  std::string name;
  TensorT<T> tensor;
};

// Ordered, name-addressed collection of trainable tensors. Entries share
// storage with the owning model structs, so in-place updates are visible to
// both sides.
template <typename T>
class ParamSetT {
 public:
  void add(const std::string& name, TensorT<T> tensor) {
    tensor.set_requires_grad(true);
    items_.push_back({name, std::move(tensor)});
  }

  void extend(const ParamSetT& other) {
    for (const auto& p : other.items_) items_.push_back(p);
  }

  std::vector<ParamT<T>>& items() { return items_; }
  const std::vector<ParamT<T>>& items() const { return items_; }
  size_t size() const { return items_.size(); }

  int64_t total_elements() const {
    int64_t n = 0;
    for (const auto& p : items_) n += p.tensor.size();
    return n;
  }

  void set_trainable(bool flag) {
    for (auto& p : items_) p.tensor.set_requires_grad(flag);
  }

  const TensorT<T>* find(const std::string& name) const {
    for (const auto& p : items_)
      if (p.name == name) return &p.tensor;
    return nullptr;
  }

 private:
  std::vector<ParamT<T>> items_;
};

template <typename T>
struct AdamConfigT {
  T lr;
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

// Adam with bias correction. Moment buffers are keyed by parameter name and
// created lazily on the first step.
template <typename T>
class AdamStateT {
 public:
  AdamStateT() = default;
  explicit AdamStateT(AdamConfigT<T> cfg) : cfg_(cfg) {}

  const AdamConfigT<T>& config() const { return cfg_; }
  int64_t step_count() const { return step_; }
  void set_step_count(int64_t s) { step_ = s; }

  std::vector<T>& moment_m(const std::string& name, int64_t size) {
    auto& m = m_[name];
    if (m.empty()) m.assign(size, T(0));
    return m;
  }
  std::vector<T>& moment_v(const std::string& name, int64_t size) {
    auto& v = v_[name];
    if (v.empty()) v.assign(size, T(0));
    return v;
  }

 private:
  AdamConfigT<T> cfg_;
  int64_t step_ = 0;
  std::unordered_map<std::string, std::vector<T>> m_;
  std::unordered_map<std::string, std::vector<T>> v_;

  template <typename U>
  friend void adam_step(ParamSetT<U>&,
                        const std::unordered_map<std::string, std::vector<U>>&,
                        AdamStateT<U>&);
};

// One Adam update over every parameter in `params`. The gradient map must
// contain an entry per parameter; anything missing is an error rather than a
// silent skip.
template <typename T>
void adam_step(ParamSetT<T>& params,
               const std::unordered_map<std::string, std::vector<T>>& grads,
               AdamStateT<T>& state) {
  state.step_ += 1;
  const auto& cfg = state.cfg_;
  const T bc1 = T(1) - std::pow(cfg.beta1, static_cast<T>(state.step_));
  const T bc2 = T(1) - std::pow(cfg.beta2, static_cast<T>(state.step_));
  for (auto& p : params.items()) {
    auto it = grads.find(p.name);
    if (it == grads.end()) {
      throw TapeError("adam_step: no gradient supplied for parameter '" +
                      p.name + "'");
    }
    const auto& g = it->second;
    if (static_cast<int64_t>(g.size()) != p.tensor.size()) {
      throw DimensionError("adam_step: gradient size " +
                           std::to_string(g.size()) + " for parameter '" +
                           p.name + "' of size " +
                           std::to_string(p.tensor.size()));
    }
    auto& m = state.m_[p.name];
    auto& v = state.v_[p.name];
    if (m.empty()) m.assign(g.size(), T(0));
    if (v.empty()) v.assign(g.size(), T(0));
    T* w = p.tensor.data();
    for (size_t i = 0; i < g.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (T(1) - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (T(1) - cfg.beta2) * g[i] * g[i];
      const T m_hat = m[i] / bc1;
      const T v_hat = v[i] / bc2;
      w[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

using ParamSet = ParamSetT<float>;
using AdamState = AdamStateT<float>;
using AdamConfig = AdamConfigT<float>;

}  // namespace cinemagen
