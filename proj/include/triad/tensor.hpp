#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "triad/error.hpp"
#include "triad/rng.hpp"

namespace triad {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d <= 0) throw ShapeError("non-positive extent in shape " + shape_str(s));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

template <typename T>
struct TensorDataT {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated on first gradient touch
  bool requires_grad = false;
  std::uint64_t tape_serial = 0;  // 0 = leaf or constant
  int node = -1;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
  }
};

template <typename T>
class TapeT;

/// Dense row-major tensor of reals. Copies share storage (shallow handle);
/// use clone() for an independent buffer.
template <typename T>
class TensorT {
 public:
  using Data = TensorDataT<T>;

  TensorT() = default;
  explicit TensorT(std::shared_ptr<Data> d) : impl_(std::move(d)) {}

  static TensorT zeros(Shape s) {
    auto d = std::make_shared<Data>();
    std::size_t n = shape_numel(s);
    d->shape = std::move(s);
    d->value.assign(n, T(0));
    return TensorT(std::move(d));
  }

  static TensorT full(Shape s, T v) {
    TensorT t = zeros(std::move(s));
    std::fill(t.impl_->value.begin(), t.impl_->value.end(), v);
    return t;
  }

  static TensorT from_vector(Shape s, std::vector<T> v) {
    if (shape_numel(s) != v.size())
      throw ShapeError("value count " + std::to_string(v.size()) +
                       " does not fill shape " + shape_str(s));
    auto d = std::make_shared<Data>();
    d->shape = std::move(s);
    d->value = std::move(v);
    return TensorT(std::move(d));
  }

  static TensorT scalar(T v) { return from_vector({1}, {v}); }

  static TensorT randn(Shape s, Rng& rng, double sigma) {
    TensorT t = zeros(std::move(s));
    for (auto& x : t.impl_->value) x = static_cast<T>(rng.next_gaussian() * sigma);
    return t;
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return impl_->value.size(); }

  const std::vector<T>& vec() const { return impl_->value; }
  std::vector<T>& vec() { return impl_->value; }
  const T* data() const { return impl_->value.data(); }
  T* data() { return impl_->value.data(); }

  T item() const {
    if (size() != 1) throw ContractError("item() on non-scalar tensor " + shape_str(shape()));
    return impl_->value[0];
  }

  T& at(int i) { return impl_->value[static_cast<std::size_t>(i)]; }
  T at(int i) const { return impl_->value[static_cast<std::size_t>(i)]; }
  T& at(int i, int j) { return impl_->value[static_cast<std::size_t>(i) * dim(1) + j]; }
  T at(int i, int j) const { return impl_->value[static_cast<std::size_t>(i) * dim(1) + j]; }

  TensorT& set_requires_grad(bool b = true) {
    impl_->requires_grad = b;
    return *this;
  }
  bool requires_grad() const { return impl_->requires_grad; }

  std::vector<T>& grad() {
    impl_->ensure_grad();
    return impl_->grad;
  }
  bool has_grad() const { return !impl_->grad.empty(); }
  void zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
  }

  /// Deep copy with no tape history and no gradient.
  TensorT clone() const {
    auto d = std::make_shared<Data>();
    d->shape = impl_->shape;
    d->value = impl_->value;
    return TensorT(std::move(d));
  }

  std::shared_ptr<Data>& impl() { return impl_; }
  const std::shared_ptr<Data>& impl() const { return impl_; }

 private:
  std::shared_ptr<Data> impl_;
};

/// Reverse-mode tape. Constructing one makes it the active tape for the
/// current thread (RAII); destruction restores the previous one. Nodes are
/// recorded in execution order, which is a topological order, so backward()
/// visits each node exactly once in reverse.
template <typename T>
class TapeT {
 public:
  TapeT() : serial_(next_serial()++) {
    prev_ = active();
    active() = this;
  }
  ~TapeT() {
    if (active() == this) active() = prev_;
  }
  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;

  static TapeT* current() { return active(); }

  std::uint64_t serial() const { return serial_; }
  std::size_t node_count() const { return nodes_.size(); }

  int push(std::function<void()> backward) {
    nodes_.push_back(std::move(backward));
    return static_cast<int>(nodes_.size()) - 1;
  }

  /// Seeds d(loss)/d(loss)=1 and propagates to every contributing node.
  /// Leaf gradients accumulate into their grad buffers. A tape may run
  /// backward once; accumulation across steps is done with fresh tapes
  /// over the same leaves.
  void backward(const TensorT<T>& loss) {
    if (loss.size() != 1)
      throw ContractError("backward() requires a scalar loss, got " + shape_str(loss.shape()));
    if (loss.impl()->tape_serial != serial_)
      throw ContractError("backward() loss is not recorded on this tape");
    if (ran_backward_)
      throw ContractError("backward() already ran on this tape; record a fresh tape instead");
    ran_backward_ = true;
    loss.impl()->ensure_grad();
    loss.impl()->grad[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

 private:
  static TapeT*& active() {
    thread_local TapeT* tape = nullptr;
    return tape;
  }
  static std::atomic<std::uint64_t>& next_serial() {
    static std::atomic<std::uint64_t> s{1};
    return s;
  }

  std::vector<std::function<void()>> nodes_;
  std::uint64_t serial_;
  bool ran_backward_ = false;
  TapeT* prev_ = nullptr;
};

namespace detail {

/// True if gradients should flow into this operand on the active tape.
template <typename T>
bool contributes(const TapeT<T>* tape, const TensorT<T>& t) {
  if (t.impl()->tape_serial != 0) {
    if (t.impl()->tape_serial != tape->serial())
      throw ContractError("tensor already participates in a different tape");
    return true;
  }
  return t.requires_grad();
}

template <typename T>
void mark_output(TapeT<T>* tape, TensorT<T>& out, int node) {
  out.impl()->tape_serial = tape->serial();
  out.impl()->node = node;
}

template <typename T>
bool grad_empty(const std::shared_ptr<TensorDataT<T>>& d) {
  return d->grad.empty();
}

// C[r x t] += A[r x s] * B[s x t]
template <typename T>
void gemm_acc(const T* A, const T* B, T* C, int r, int s, int t) {
  for (int i = 0; i < r; ++i) {
    const T* a = A + static_cast<std::size_t>(i) * s;
    T* c = C + static_cast<std::size_t>(i) * t;
    for (int k = 0; k < s; ++k) {
      T aik = a[k];
      if (aik == T(0)) continue;
      const T* b = B + static_cast<std::size_t>(k) * t;
      for (int j = 0; j < t; ++j) c[j] += aik * b[j];
    }
  }
}

// C[r x t] += A[r x s] * B[t x s]^T
template <typename T>
void gemm_nt_acc(const T* A, const T* B, T* C, int r, int s, int t) {
  for (int i = 0; i < r; ++i) {
    const T* a = A + static_cast<std::size_t>(i) * s;
    T* c = C + static_cast<std::size_t>(i) * t;
    for (int j = 0; j < t; ++j) {
      const T* b = B + static_cast<std::size_t>(j) * s;
      T acc = T(0);
      for (int k = 0; k < s; ++k) acc += a[k] * b[k];
      c[j] += acc;
    }
  }
}

// C[s x t] += A[r x s]^T * B[r x t]
template <typename T>
void gemm_tn_acc(const T* A, const T* B, T* C, int r, int s, int t) {
  for (int i = 0; i < r; ++i) {
    const T* a = A + static_cast<std::size_t>(i) * s;
    const T* b = B + static_cast<std::size_t>(i) * t;
    for (int k = 0; k < s; ++k) {
      T aik = a[k];
      if (aik == T(0)) continue;
      T* c = C + static_cast<std::size_t>(k) * t;
      for (int j = 0; j < t; ++j) c[j] += aik * b[j];
    }
  }
}

template <typename T>
void check_2d(const TensorT<T>& t, const char* op) {
  if (t.ndim() != 2)
    throw ShapeError(std::string(op) + " requires a 2-d tensor, got " + shape_str(t.shape()));
}

template <typename T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + " shape mismatch: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitive operations. Each computes its value eagerly and, when a tape is
// active and an operand contributes, records a backward closure.
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "add");
  TensorT<T> out = TensorT<T>::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (auto* tape = TapeT<T>::current()) {
    bool ga = detail::contributes(tape, a), gb = detail::contributes(tape, b);
    if (ga || gb) {
      int node = tape->push([ai = a.impl(), bi = b.impl(), oi = out.impl(), ga, gb] {
        if (detail::grad_empty(oi)) return;
        if (ga) {
          ai->ensure_grad();
          for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i];
        }
        if (gb) {
          bi->ensure_grad();
          for (std::size_t i = 0; i < oi->grad.size(); ++i) bi->grad[i] += oi->grad[i];
        }
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "sub");
  TensorT<T> out = TensorT<T>::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
  if (auto* tape = TapeT<T>::current()) {
    bool ga = detail::contributes(tape, a), gb = detail::contributes(tape, b);
    if (ga || gb) {
      int node = tape->push([ai = a.impl(), bi = b.impl(), oi = out.impl(), ga, gb] {
        if (detail::grad_empty(oi)) return;
        if (ga) {
          ai->ensure_grad();
          for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i];
        }
        if (gb) {
          bi->ensure_grad();
          for (std::size_t i = 0; i < oi->grad.size(); ++i) bi->grad[i] -= oi->grad[i];
        }
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "mul");
  TensorT<T> out = TensorT<T>::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (auto* tape = TapeT<T>::current()) {
    bool ga = detail::contributes(tape, a), gb = detail::contributes(tape, b);
    if (ga || gb) {
      int node = tape->push([ai = a.impl(), bi = b.impl(), oi = out.impl(), ga, gb] {
        if (detail::grad_empty(oi)) return;
        if (ga) {
          ai->ensure_grad();
          for (std::size_t i = 0; i < oi->grad.size(); ++i)
            ai->grad[i] += oi->grad[i] * bi->value[i];
        }
        if (gb) {
          bi->ensure_grad();
          for (std::size_t i = 0; i < oi->grad.size(); ++i)
            bi->grad[i] += oi->grad[i] * ai->value[i];
        }
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T c) {
  TensorT<T> out = TensorT<T>::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * c;
  if (auto* tape = TapeT<T>::current()) {
    if (detail::contributes(tape, a)) {
      int node = tape->push([ai = a.impl(), oi = out.impl(), c] {
        if (detail::grad_empty(oi)) return;
        ai->ensure_grad();
        for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i] * c;
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

/// Broadcast-add a length-c vector to every row of a [r x c] matrix.
template <typename T>
TensorT<T> add_rowvec(const TensorT<T>& a, const TensorT<T>& v) {
  detail::check_2d(a, "add_rowvec");
  if (v.ndim() != 1 || v.dim(0) != a.dim(1))
    throw ShapeError("add_rowvec: matrix " + shape_str(a.shape()) + " vs vector " +
                     shape_str(v.shape()));
  int r = a.dim(0), c = a.dim(1);
  TensorT<T> out = TensorT<T>::zeros(a.shape());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.at(i, j) = a.at(i, j) + v.at(j);
  if (auto* tape = TapeT<T>::current()) {
    bool ga = detail::contributes(tape, a), gv = detail::contributes(tape, v);
    if (ga || gv) {
      int node = tape->push([ai = a.impl(), vi = v.impl(), oi = out.impl(), ga, gv, r, c] {
        if (detail::grad_empty(oi)) return;
        if (ga) {
          ai->ensure_grad();
          for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i];
        }
        if (gv) {
          vi->ensure_grad();
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
              vi->grad[static_cast<std::size_t>(j)] +=
                  oi->grad[static_cast<std::size_t>(i) * c + j];
        }
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& a) {
  TensorT<T> out = TensorT<T>::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] > T(0) ? a.data()[i] : T(0);
  if (auto* tape = TapeT<T>::current()) {
    if (detail::contributes(tape, a)) {
      int node = tape->push([ai = a.impl(), oi = out.impl()] {
        if (detail::grad_empty(oi)) return;
        ai->ensure_grad();
        for (std::size_t i = 0; i < oi->grad.size(); ++i)
          if (ai->value[i] > T(0)) ai->grad[i] += oi->grad[i];
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

template <typename T>
TensorT<T> reshape(const TensorT<T>& a, Shape s) {
  if (shape_numel(s) != a.size())
    throw ShapeError("reshape " + shape_str(a.shape()) + " -> " + shape_str(s) +
                     " changes element count");
  TensorT<T> out = TensorT<T>::from_vector(std::move(s), a.vec());
  if (auto* tape = TapeT<T>::current()) {
    if (detail::contributes(tape, a)) {
      int node = tape->push([ai = a.impl(), oi = out.impl()] {
        if (detail::grad_empty(oi)) return;
        ai->ensure_grad();
        for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i];
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

template <typename T>
TensorT<T> transpose2d(const TensorT<T>& a) {
  detail::check_2d(a, "transpose2d");
  int r = a.dim(0), c = a.dim(1);
  TensorT<T> out = TensorT<T>::zeros({c, r});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.at(j, i) = a.at(i, j);
  if (auto* tape = TapeT<T>::current()) {
    if (detail::contributes(tape, a)) {
      int node = tape->push([ai = a.impl(), oi = out.impl(), r, c] {
        if (detail::grad_empty(oi)) return;
        ai->ensure_grad();
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j)
            ai->grad[static_cast<std::size_t>(i) * c + j] +=
                oi->grad[static_cast<std::size_t>(j) * r + i];
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

/// C = A * B. Backward: dA += dC * B^T, dB += A^T * dC.
template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_2d(a, "matmul");
  detail::check_2d(b, "matmul");
  if (a.dim(1) != b.dim(0))
    throw ShapeError("matmul inner extents differ: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  int r = a.dim(0), s = a.dim(1), t = b.dim(1);
  TensorT<T> out = TensorT<T>::zeros({r, t});
  detail::gemm_acc(a.data(), b.data(), out.data(), r, s, t);
  if (auto* tape = TapeT<T>::current()) {
    bool ga = detail::contributes(tape, a), gb = detail::contributes(tape, b);
    if (ga || gb) {
      int node = tape->push([ai = a.impl(), bi = b.impl(), oi = out.impl(), ga, gb, r, s, t] {
        if (detail::grad_empty(oi)) return;
        if (ga) {
          ai->ensure_grad();
          detail::gemm_nt_acc(oi->grad.data(), bi->value.data(), ai->grad.data(), r, t, s);
        }
        if (gb) {
          bi->ensure_grad();
          detail::gemm_tn_acc(ai->value.data(), oi->grad.data(), bi->grad.data(), r, s, t);
        }
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

/// C = A * B^T for B stored row-major [t x s]. Backward: dA += dC * B,
/// dB += dC^T * A.
template <typename T>
TensorT<T> matmul_nt(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_2d(a, "matmul_nt");
  detail::check_2d(b, "matmul_nt");
  if (a.dim(1) != b.dim(1))
    throw ShapeError("matmul_nt inner extents differ: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  int r = a.dim(0), s = a.dim(1), t = b.dim(0);
  TensorT<T> out = TensorT<T>::zeros({r, t});
  detail::gemm_nt_acc(a.data(), b.data(), out.data(), r, s, t);
  if (auto* tape = TapeT<T>::current()) {
    bool ga = detail::contributes(tape, a), gb = detail::contributes(tape, b);
    if (ga || gb) {
      int node = tape->push([ai = a.impl(), bi = b.impl(), oi = out.impl(), ga, gb, r, s, t] {
        if (detail::grad_empty(oi)) return;
        if (ga) {
          ai->ensure_grad();
          detail::gemm_acc(oi->grad.data(), bi->value.data(), ai->grad.data(), r, t, s);
        }
        if (gb) {
          bi->ensure_grad();
          detail::gemm_tn_acc(oi->grad.data(), ai->value.data(), bi->grad.data(), r, t, s);
        }
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

namespace detail {

template <typename T>
void softmax_backward_rows(const std::shared_ptr<TensorDataT<T>>& xi,
                           const std::shared_ptr<TensorDataT<T>>& oi, int r, int c) {
  xi->ensure_grad();
  for (int i = 0; i < r; ++i) {
    const T* y = oi->value.data() + static_cast<std::size_t>(i) * c;
    const T* dy = oi->grad.data() + static_cast<std::size_t>(i) * c;
    T* dx = xi->grad.data() + static_cast<std::size_t>(i) * c;
    T dot = T(0);
    for (int j = 0; j < c; ++j) dot += dy[j] * y[j];
    for (int j = 0; j < c; ++j) dx[j] += y[j] * (dy[j] - dot);
  }
}

}  // namespace detail

/// Row-wise softmax with per-row max subtraction.
template <typename T>
TensorT<T> softmax_rows(const TensorT<T>& x) {
  detail::check_2d(x, "softmax_rows");
  int r = x.dim(0), c = x.dim(1);
  TensorT<T> out = TensorT<T>::zeros(x.shape());
  for (int i = 0; i < r; ++i) {
    const T* row = x.data() + static_cast<std::size_t>(i) * c;
    T* o = out.data() + static_cast<std::size_t>(i) * c;
    T mx = row[0];
    for (int j = 0; j < c; ++j) {
      if (!std::isfinite(static_cast<double>(row[j])))
        throw NumericError("softmax_rows: non-finite input in row " + std::to_string(i));
      mx = std::max(mx, row[j]);
    }
    T sum = T(0);
    for (int j = 0; j < c; ++j) {
      o[j] = std::exp(row[j] - mx);
      sum += o[j];
    }
    for (int j = 0; j < c; ++j) o[j] /= sum;
  }
  if (auto* tape = TapeT<T>::current()) {
    if (detail::contributes(tape, x)) {
      int node = tape->push([xi = x.impl(), oi = out.impl(), r, c] {
        if (detail::grad_empty(oi)) return;
        detail::softmax_backward_rows(xi, oi, r, c);
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

/// Boolean attention mask: allow[i*cols + j] nonzero means row i may use
/// column j.
struct AttnMask {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> allow;

  static AttnMask all(int r, int c) {
    AttnMask m{r, c, std::vector<std::uint8_t>(static_cast<std::size_t>(r) * c, 1)};
    return m;
  }
  static AttnMask causal(int n) {
    AttnMask m{n, n, std::vector<std::uint8_t>(static_cast<std::size_t>(n) * n, 0)};
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) m.allow[static_cast<std::size_t>(i) * n + j] = 1;
    return m;
  }
  static AttnMask identity(int n) {
    AttnMask m{n, n, std::vector<std::uint8_t>(static_cast<std::size_t>(n) * n, 0)};
    for (int i = 0; i < n; ++i) m.allow[static_cast<std::size_t>(i) * n + i] = 1;
    return m;
  }
  /// Mask for a sequence of n set slots followed by l word slots: every
  /// position sees all set slots; word slots are causal among themselves;
  /// set slots do not attend to words.
  static AttnMask set_prefix_causal(int n, int l) {
    int total = n + l;
    AttnMask m{total, total, std::vector<std::uint8_t>(static_cast<std::size_t>(total) * total, 0)};
    for (int i = 0; i < total; ++i) {
      for (int j = 0; j < n; ++j) m.allow[static_cast<std::size_t>(i) * total + j] = 1;
      if (i >= n)
        for (int j = n; j <= i; ++j) m.allow[static_cast<std::size_t>(i) * total + j] = 1;
    }
    return m;
  }

  bool at(int i, int j) const { return allow[static_cast<std::size_t>(i) * cols + j] != 0; }
};

/// Row-wise softmax over the unmasked entries only; masked entries are
/// exactly zero in the output. Every row must keep at least one entry.
template <typename T>
TensorT<T> masked_softmax_rows(const TensorT<T>& x, const AttnMask& mask) {
  detail::check_2d(x, "masked_softmax_rows");
  int r = x.dim(0), c = x.dim(1);
  if (mask.rows != r || mask.cols != c)
    throw ShapeError("masked_softmax_rows: mask " + std::to_string(mask.rows) + "x" +
                     std::to_string(mask.cols) + " vs tensor " + shape_str(x.shape()));
  TensorT<T> out = TensorT<T>::zeros(x.shape());
  for (int i = 0; i < r; ++i) {
    const T* row = x.data() + static_cast<std::size_t>(i) * c;
    T* o = out.data() + static_cast<std::size_t>(i) * c;
    T mx = T(0);
    bool any = false;
    for (int j = 0; j < c; ++j) {
      if (!mask.at(i, j)) continue;
      if (!std::isfinite(static_cast<double>(row[j])))
        throw NumericError("masked_softmax_rows: non-finite input in row " + std::to_string(i));
      mx = any ? std::max(mx, row[j]) : row[j];
      any = true;
    }
    if (!any)
      throw ContractError("masked_softmax_rows: row " + std::to_string(i) +
                          " is fully masked (no visible keys)");
    T sum = T(0);
    for (int j = 0; j < c; ++j) {
      if (!mask.at(i, j)) continue;
      o[j] = std::exp(row[j] - mx);
      sum += o[j];
    }
    for (int j = 0; j < c; ++j)
      if (mask.at(i, j)) o[j] /= sum;
  }
  if (auto* tape = TapeT<T>::current()) {
    if (detail::contributes(tape, x)) {
      int node = tape->push([xi = x.impl(), oi = out.impl(), r, c] {
        if (detail::grad_empty(oi)) return;
        // Masked outputs are exactly zero, so the plain softmax backward
        // leaves their inputs untouched.
        detail::softmax_backward_rows(xi, oi, r, c);
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

/// Row standardization (zero mean, unit variance, eps-stabilized) followed
/// by the elementwise affine gain * x + bias.
template <typename T>
TensorT<T> layer_norm_rows(const TensorT<T>& x, const TensorT<T>& gain, const TensorT<T>& bias,
                           T eps) {
  detail::check_2d(x, "layer_norm_rows");
  int r = x.dim(0), c = x.dim(1);
  if (c < 2) throw ShapeError("layer_norm_rows requires row width >= 2, got " + shape_str(x.shape()));
  if (gain.ndim() != 1 || gain.dim(0) != c || bias.ndim() != 1 || bias.dim(0) != c)
    throw ShapeError("layer_norm_rows: gain/bias must be length " + std::to_string(c));
  TensorT<T> out = TensorT<T>::zeros(x.shape());
  std::vector<T> inv_sd(static_cast<std::size_t>(r));
  std::vector<T> means(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    const T* row = x.data() + static_cast<std::size_t>(i) * c;
    T* o = out.data() + static_cast<std::size_t>(i) * c;
    T mean = T(0);
    for (int j = 0; j < c; ++j) mean += row[j];
    mean /= static_cast<T>(c);
    T var = T(0);
    for (int j = 0; j < c; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<T>(c);
    T is = T(1) / std::sqrt(var + eps);
    means[static_cast<std::size_t>(i)] = mean;
    inv_sd[static_cast<std::size_t>(i)] = is;
    for (int j = 0; j < c; ++j) o[j] = gain.at(j) * ((row[j] - mean) * is) + bias.at(j);
  }
  if (auto* tape = TapeT<T>::current()) {
    bool gx = detail::contributes(tape, x);
    bool gg = detail::contributes(tape, gain);
    bool gb = detail::contributes(tape, bias);
    if (gx || gg || gb) {
      int node = tape->push([xi = x.impl(), gi = gain.impl(), bi = bias.impl(), oi = out.impl(),
                             means, inv_sd, gx, gg, gb, r, c] {
        if (detail::grad_empty(oi)) return;
        if (gx) xi->ensure_grad();
        if (gg) gi->ensure_grad();
        if (gb) bi->ensure_grad();
        for (int i = 0; i < r; ++i) {
          const T* row = xi->value.data() + static_cast<std::size_t>(i) * c;
          const T* dy = oi->grad.data() + static_cast<std::size_t>(i) * c;
          T mean = means[static_cast<std::size_t>(i)];
          T is = inv_sd[static_cast<std::size_t>(i)];
          if (gg || gb) {
            for (int j = 0; j < c; ++j) {
              if (gg) gi->grad[static_cast<std::size_t>(j)] += dy[j] * ((row[j] - mean) * is);
              if (gb) bi->grad[static_cast<std::size_t>(j)] += dy[j];
            }
          }
          if (gx) {
            // dxhat_j = dy_j * gain_j; dx via the standard layer-norm identity.
            T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
            for (int j = 0; j < c; ++j) {
              T xhat = (row[j] - mean) * is;
              T dxh = dy[j] * gi->value[static_cast<std::size_t>(j)];
              sum_dxhat += dxh;
              sum_dxhat_xhat += dxh * xhat;
            }
            T* dx = xi->grad.data() + static_cast<std::size_t>(i) * c;
            for (int j = 0; j < c; ++j) {
              T xhat = (row[j] - mean) * is;
              T dxh = dy[j] * gi->value[static_cast<std::size_t>(j)];
              dx[j] += is * (dxh - (sum_dxhat + xhat * sum_dxhat_xhat) / static_cast<T>(c));
            }
          }
        }
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

/// Elementwise maximum over a nonempty set of same-shape tensors. The
/// gradient of each coordinate routes to the first input attaining the max.
template <typename T>
TensorT<T> maxpool_set(const std::vector<TensorT<T>>& xs) {
  if (xs.empty()) throw ContractError("maxpool_set: empty input list");
  for (const auto& x : xs) detail::check_same_shape(xs[0], x, "maxpool_set");
  std::size_t n = xs[0].size();
  TensorT<T> out = TensorT<T>::zeros(xs[0].shape());
  std::vector<int> argmax(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    T best = xs[0].data()[i];
    int bi = 0;
    for (std::size_t m = 1; m < xs.size(); ++m) {
      T v = xs[m].data()[i];
      if (v > best) {
        best = v;
        bi = static_cast<int>(m);
      }
    }
    out.data()[i] = best;
    argmax[i] = bi;
  }
  if (auto* tape = TapeT<T>::current()) {
    bool any = false;
    std::vector<std::uint8_t> contrib(xs.size(), 0);
    for (std::size_t m = 0; m < xs.size(); ++m) {
      contrib[m] = detail::contributes(tape, xs[m]) ? 1 : 0;
      any = any || contrib[m];
    }
    if (any) {
      std::vector<std::shared_ptr<TensorDataT<T>>> parents;
      parents.reserve(xs.size());
      for (const auto& x : xs) parents.push_back(x.impl());
      int node = tape->push([parents, oi = out.impl(), argmax = std::move(argmax),
                             contrib = std::move(contrib)] {
        if (detail::grad_empty(oi)) return;
        for (std::size_t i = 0; i < oi->grad.size(); ++i) {
          int m = argmax[i];
          if (!contrib[static_cast<std::size_t>(m)]) continue;
          auto& p = parents[static_cast<std::size_t>(m)];
          p->ensure_grad();
          p->grad[i] += oi->grad[i];
        }
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

/// Stack 2-d blocks vertically.
template <typename T>
TensorT<T> concat_rows(const std::vector<TensorT<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: empty input list");
  int c = parts[0].dim(1), rows = 0;
  for (const auto& p : parts) {
    detail::check_2d(p, "concat_rows");
    if (p.dim(1) != c)
      throw ShapeError("concat_rows: column mismatch " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    rows += p.dim(0);
  }
  TensorT<T> out = TensorT<T>::zeros({rows, c});
  int off = 0;
  for (const auto& p : parts) {
    std::copy(p.data(), p.data() + p.size(), out.data() + static_cast<std::size_t>(off) * c);
    off += p.dim(0);
  }
  if (auto* tape = TapeT<T>::current()) {
    bool any = false;
    std::vector<std::uint8_t> contrib(parts.size(), 0);
    for (std::size_t m = 0; m < parts.size(); ++m) {
      contrib[m] = detail::contributes(tape, parts[m]) ? 1 : 0;
      any = any || contrib[m];
    }
    if (any) {
      std::vector<std::shared_ptr<TensorDataT<T>>> parents;
      std::vector<int> offsets;
      int o = 0;
      for (const auto& p : parts) {
        parents.push_back(p.impl());
        offsets.push_back(o);
        o += p.dim(0);
      }
      int node = tape->push([parents, offsets, contrib, oi = out.impl(), c] {
        if (detail::grad_empty(oi)) return;
        for (std::size_t m = 0; m < parents.size(); ++m) {
          if (!contrib[m]) continue;
          auto& p = parents[m];
          p->ensure_grad();
          std::size_t base = static_cast<std::size_t>(offsets[m]) * c;
          for (std::size_t i = 0; i < p->value.size(); ++i) p->grad[i] += oi->grad[base + i];
        }
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

template <typename T>
TensorT<T> slice_rows(const TensorT<T>& x, int r0, int r1) {
  detail::check_2d(x, "slice_rows");
  if (r0 < 0 || r1 > x.dim(0) || r0 >= r1)
    throw ShapeError("slice_rows [" + std::to_string(r0) + "," + std::to_string(r1) +
                     ") out of range for " + shape_str(x.shape()));
  int c = x.dim(1);
  TensorT<T> out = TensorT<T>::zeros({r1 - r0, c});
  std::copy(x.data() + static_cast<std::size_t>(r0) * c, x.data() + static_cast<std::size_t>(r1) * c,
            out.data());
  if (auto* tape = TapeT<T>::current()) {
    if (detail::contributes(tape, x)) {
      int node = tape->push([xi = x.impl(), oi = out.impl(), r0, c] {
        if (detail::grad_empty(oi)) return;
        xi->ensure_grad();
        std::size_t base = static_cast<std::size_t>(r0) * c;
        for (std::size_t i = 0; i < oi->grad.size(); ++i) xi->grad[base + i] += oi->grad[i];
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

template <typename T>
TensorT<T> slice_cols(const TensorT<T>& x, int c0, int c1) {
  detail::check_2d(x, "slice_cols");
  if (c0 < 0 || c1 > x.dim(1) || c0 >= c1)
    throw ShapeError("slice_cols [" + std::to_string(c0) + "," + std::to_string(c1) +
                     ") out of range for " + shape_str(x.shape()));
  int r = x.dim(0), c = x.dim(1), w = c1 - c0;
  TensorT<T> out = TensorT<T>::zeros({r, w});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < w; ++j) out.at(i, j) = x.at(i, c0 + j);
  if (auto* tape = TapeT<T>::current()) {
    if (detail::contributes(tape, x)) {
      int node = tape->push([xi = x.impl(), oi = out.impl(), r, c, c0, w] {
        if (detail::grad_empty(oi)) return;
        xi->ensure_grad();
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < w; ++j)
            xi->grad[static_cast<std::size_t>(i) * c + c0 + j] +=
                oi->grad[static_cast<std::size_t>(i) * w + j];
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

/// Stack 2-d blocks horizontally.
template <typename T>
TensorT<T> concat_cols(const std::vector<TensorT<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: empty input list");
  int r = parts[0].dim(0), cols = 0;
  for (const auto& p : parts) {
    detail::check_2d(p, "concat_cols");
    if (p.dim(0) != r)
      throw ShapeError("concat_cols: row mismatch " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    cols += p.dim(1);
  }
  TensorT<T> out = TensorT<T>::zeros({r, cols});
  int off = 0;
  for (const auto& p : parts) {
    int w = p.dim(1);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < w; ++j) out.at(i, off + j) = p.at(i, j);
    off += w;
  }
  if (auto* tape = TapeT<T>::current()) {
    bool any = false;
    std::vector<std::uint8_t> contrib(parts.size(), 0);
    for (std::size_t m = 0; m < parts.size(); ++m) {
      contrib[m] = detail::contributes(tape, parts[m]) ? 1 : 0;
      any = any || contrib[m];
    }
    if (any) {
      std::vector<std::shared_ptr<TensorDataT<T>>> parents;
      std::vector<int> offsets, widths;
      int o = 0;
      for (const auto& p : parts) {
        parents.push_back(p.impl());
        offsets.push_back(o);
        widths.push_back(p.dim(1));
        o += p.dim(1);
      }
      int node = tape->push([parents, offsets, widths, contrib, oi = out.impl(), r, cols] {
        if (detail::grad_empty(oi)) return;
        for (std::size_t m = 0; m < parents.size(); ++m) {
          if (!contrib[m]) continue;
          auto& p = parents[m];
          p->ensure_grad();
          int w = widths[m], c0 = offsets[m];
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < w; ++j)
              p->grad[static_cast<std::size_t>(i) * w + j] +=
                  oi->grad[static_cast<std::size_t>(i) * cols + c0 + j];
        }
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

/// Embedding lookup: out row i = table row ids[i].
template <typename T>
TensorT<T> gather_rows(const TensorT<T>& table, const std::vector<int>& ids) {
  detail::check_2d(table, "gather_rows");
  if (ids.empty()) throw ContractError("gather_rows: empty id list");
  int v = table.dim(0), e = table.dim(1);
  for (int id : ids)
    if (id < 0 || id >= v)
      throw VocabError("gather_rows: id " + std::to_string(id) + " outside table of " +
                       std::to_string(v) + " rows");
  TensorT<T> out = TensorT<T>::zeros({static_cast<int>(ids.size()), e});
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy(table.data() + static_cast<std::size_t>(ids[i]) * e,
              table.data() + static_cast<std::size_t>(ids[i] + 1) * e, out.data() + i * e);
  if (auto* tape = TapeT<T>::current()) {
    if (detail::contributes(tape, table)) {
      int node = tape->push([ti = table.impl(), oi = out.impl(), ids, e] {
        if (detail::grad_empty(oi)) return;
        ti->ensure_grad();
        for (std::size_t i = 0; i < ids.size(); ++i) {
          std::size_t base = static_cast<std::size_t>(ids[i]) * e;
          for (int j = 0; j < e; ++j) ti->grad[base + j] += oi->grad[i * e + j];
        }
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

/// General gather: out element i = x[index[i]] (index -1 reads zero).
/// Backward scatter-adds. Used for im2col-style patch extraction.
template <typename T>
TensorT<T> gather(const TensorT<T>& x, const std::vector<long>& index, Shape out_shape) {
  std::size_t n = shape_numel(out_shape);
  if (index.size() != n)
    throw ShapeError("gather: index count " + std::to_string(index.size()) +
                     " does not fill shape " + shape_str(out_shape));
  long limit = static_cast<long>(x.size());
  TensorT<T> out = TensorT<T>::zeros(std::move(out_shape));
  for (std::size_t i = 0; i < n; ++i) {
    long src = index[i];
    if (src >= limit) throw ShapeError("gather: index beyond source tensor");
    out.data()[i] = src < 0 ? T(0) : x.data()[static_cast<std::size_t>(src)];
  }
  if (auto* tape = TapeT<T>::current()) {
    if (detail::contributes(tape, x)) {
      int node = tape->push([xi = x.impl(), oi = out.impl(), index] {
        if (detail::grad_empty(oi)) return;
        xi->ensure_grad();
        for (std::size_t i = 0; i < index.size(); ++i)
          if (index[i] >= 0) xi->grad[static_cast<std::size_t>(index[i])] += oi->grad[i];
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

template <typename T>
TensorT<T> sum_all(const TensorT<T>& x) {
  T s = T(0);
  for (std::size_t i = 0; i < x.size(); ++i) s += x.data()[i];
  TensorT<T> out = TensorT<T>::scalar(s);
  if (auto* tape = TapeT<T>::current()) {
    if (detail::contributes(tape, x)) {
      int node = tape->push([xi = x.impl(), oi = out.impl()] {
        if (detail::grad_empty(oi)) return;
        xi->ensure_grad();
        for (std::size_t i = 0; i < xi->grad.size(); ++i) xi->grad[i] += oi->grad[0];
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

inline constexpr double kProbFloor = 1e-12;

/// Row-averaged cross entropy -(1/sum(w)) * sum_i w_i * sum_j y_ij ln p_ij,
/// with p clamped below at 1e-12. y is treated as a constant; rows of y
/// selected by a nonzero weight must be exact one-hots.
template <typename T>
TensorT<T> cross_entropy_rows(const TensorT<T>& p, const TensorT<T>& y,
                              const std::vector<T>& row_weights = {}) {
  detail::check_2d(p, "cross_entropy_rows");
  detail::check_same_shape(p, y, "cross_entropy_rows");
  int r = p.dim(0), c = p.dim(1);
  std::vector<T> w = row_weights.empty() ? std::vector<T>(static_cast<std::size_t>(r), T(1))
                                         : row_weights;
  if (static_cast<int>(w.size()) != r)
    throw ShapeError("cross_entropy_rows: weight count " + std::to_string(w.size()) +
                     " vs rows " + std::to_string(r));
  T norm = T(0);
  for (T x : w) norm += x;
  if (norm <= T(0))
    throw ContractError("cross_entropy_rows: no active rows (all weights zero)");
  for (int i = 0; i < r; ++i) {
    if (w[static_cast<std::size_t>(i)] == T(0)) continue;
    T sum = T(0);
    for (int j = 0; j < c; ++j) {
      T v = y.at(i, j);
      if (v != T(0) && v != T(1))
        throw ContractError("cross_entropy_rows: target row " + std::to_string(i) +
                            " is not one-hot");
      sum += v;
    }
    if (sum != T(1))
      throw ContractError("cross_entropy_rows: target row " + std::to_string(i) +
                          " is not one-hot");
  }
  T floor = static_cast<T>(kProbFloor);
  T loss = T(0);
  for (int i = 0; i < r; ++i) {
    if (w[static_cast<std::size_t>(i)] == T(0)) continue;
    for (int j = 0; j < c; ++j)
      if (y.at(i, j) == T(1))
        loss -= w[static_cast<std::size_t>(i)] * std::log(std::max(p.at(i, j), floor));
  }
  TensorT<T> out = TensorT<T>::scalar(loss / norm);
  if (auto* tape = TapeT<T>::current()) {
    if (detail::contributes(tape, p)) {
      int node = tape->push([pi = p.impl(), yi = y.impl(), oi = out.impl(), w, norm, floor, r, c] {
        if (detail::grad_empty(oi)) return;
        pi->ensure_grad();
        T g = oi->grad[0];
        for (int i = 0; i < r; ++i) {
          T wi = w[static_cast<std::size_t>(i)];
          if (wi == T(0)) continue;
          for (int j = 0; j < c; ++j) {
            std::size_t idx = static_cast<std::size_t>(i) * c + j;
            if (yi->value[idx] == T(1) && pi->value[idx] > floor)
              pi->grad[idx] -= g * wi / (norm * pi->value[idx]);
          }
        }
      });
      detail::mark_output(tape, out, node);
    }
  }
  return out;
}

/// Scaled dot-product attention with separate key/value streams, split into
/// heads along the embedding axis. Logit scale is 1/sqrt(e/heads).
template <typename T>
TensorT<T> multi_head_attention(const TensorT<T>& q, const TensorT<T>& k, const TensorT<T>& v,
                                const AttnMask& mask, int heads) {
  detail::check_2d(q, "multi_head_attention");
  detail::check_2d(k, "multi_head_attention");
  detail::check_same_shape(k, v, "multi_head_attention");
  int e = q.dim(1);
  if (k.dim(1) != e)
    throw ShapeError("multi_head_attention: query width " + std::to_string(e) +
                     " vs key width " + std::to_string(k.dim(1)));
  if (heads <= 0 || e % heads != 0)
    throw ShapeError("multi_head_attention: width " + std::to_string(e) +
                     " not divisible by heads " + std::to_string(heads));
  if (mask.rows != q.dim(0) || mask.cols != k.dim(0))
    throw ShapeError("multi_head_attention: mask " + std::to_string(mask.rows) + "x" +
                     std::to_string(mask.cols) + " vs q rows " + std::to_string(q.dim(0)) +
                     ", k rows " + std::to_string(k.dim(0)));
  for (int i = 0; i < mask.rows; ++i) {
    bool any = false;
    for (int j = 0; j < mask.cols && !any; ++j) any = mask.at(i, j);
    if (!any)
      throw ContractError("multi_head_attention: query row " + std::to_string(i) +
                          " is fully masked");
  }
  int dh = e / heads;
  T inv_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  std::vector<TensorT<T>> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    TensorT<T> qh = slice_cols(q, h * dh, (h + 1) * dh);
    TensorT<T> kh = slice_cols(k, h * dh, (h + 1) * dh);
    TensorT<T> vh = slice_cols(v, h * dh, (h + 1) * dh);
    TensorT<T> logits = scale(matmul_nt(qh, kh), inv_scale);
    TensorT<T> attn = masked_softmax_rows(logits, mask);
    outs.push_back(matmul(attn, vh));
  }
  return heads == 1 ? outs[0] : concat_cols(outs);
}

/// Self-attention where one tensor serves as both keys and values.
template <typename T>
TensorT<T> masked_attention(const TensorT<T>& q, const TensorT<T>& kv, const AttnMask& mask,
                            int heads) {
  return multi_head_attention(q, kv, kv, mask, heads);
}

/// Value copy detached from any tape; gradients stop here.
template <typename T>
TensorT<T> detach(const TensorT<T>& x) {
  return x.clone();
}

using Tensor = TensorT<float>;
using Tape = TapeT<float>;

}  // namespace triad
