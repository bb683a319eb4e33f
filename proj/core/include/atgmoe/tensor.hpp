#pragma once

// Dense row-major tensors with reverse-mode automatic differentiation.
//
// A Tensor<S> is a cheap handle onto a graph node. Forward ops allocate new
// nodes; values are immutable once produced (parameters are the exception:
// the optimizer rewrites leaf storage between forward passes). backward()
// walks the graph in reverse topological order and accumulates gradients
// into every reachable leaf with requires_grad set. Gradients accumulate
// across repeated backward() calls until zero_grad() is invoked.
//
// All loops are sequential and allocation-order independent, so a graph
// evaluated twice from the same inputs produces bit-identical values and
// gradients.
//
// Broadcasting rule (add/sub/mul): numpy-style. Shapes are right-aligned;
// each dimension pair must be equal or one of them 1. The backward pass
// sum-reduces gradients over broadcast dimensions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace atgmoe::nc {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string r = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) r += ", ";
    r += std::to_string(s[i]);
  }
  return r + "]";
}

[[noreturn]] inline void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw std::invalid_argument("tensor: " + op + ": incompatible shapes " + shape_str(a) +
                              " and " + shape_str(b));
}

// Graph construction toggle: while a NoGradGuard is alive, op outputs do not
// record parents or backward closures (forward values are unaffected).
inline bool& grad_mode_enabled() {
  thread_local bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_mode_enabled()) { grad_mode_enabled() = false; }
  ~NoGradGuard() { grad_mode_enabled() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <class S>
class Tensor {
  static_assert(std::is_floating_point_v<S>);

  struct Node {
    Shape shape;
    std::vector<S> value;
    std::vector<S> grad;  // allocated iff requires_grad
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;  // pulls node.grad into parents
    int64_t numel() const { return static_cast<int64_t>(value.size()); }
  };

  std::shared_ptr<Node> n_;

  explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

 public:
  Tensor() = default;

  static Tensor from_data(Shape shape, std::vector<S> data, bool requires_grad = false) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
      throw std::invalid_argument("tensor: data length " + std::to_string(data.size()) +
                                  " does not match shape " + shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    if (requires_grad) n->grad.assign(n->value.size(), S(0));
    return Tensor(std::move(n));
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<S> d(static_cast<size_t>(shape_numel(shape)), S(0));
    return from_data(std::move(shape), std::move(d), requires_grad);
  }

  static Tensor full(Shape shape, S v, bool requires_grad = false) {
    std::vector<S> d(static_cast<size_t>(shape_numel(shape)), v);
    return from_data(std::move(shape), std::move(d), requires_grad);
  }

  static Tensor scalar(S v, bool requires_grad = false) {
    return from_data({1}, {v}, requires_grad);
  }

  // Fresh output node; used by every op below.
  static Tensor make_op(Shape shape, std::vector<S> value,
                        std::vector<Tensor> parents,
                        std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    bool rg = false;
    if (grad_mode_enabled())
      for (const auto& p : parents) rg = rg || p.requires_grad_through();
    n->requires_grad = rg;
    if (rg) {
      n->grad.assign(n->value.size(), S(0));
      for (auto& p : parents) n->parents.push_back(p.n_);
      n->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(n));
  }

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int64_t numel() const { return n_->numel(); }
  int64_t size(size_t axis) const { return n_->shape.at(axis); }
  size_t ndim() const { return n_->shape.size(); }
  bool requires_grad() const { return n_ && n_->requires_grad; }
  // True if gradients can flow through this node (leaf flag or any parent).
  bool requires_grad_through() const { return requires_grad(); }

  const std::vector<S>& values() const { return n_->value; }
  const std::vector<S>& grads() const {
    if (!n_->requires_grad) throw std::logic_error("tensor: grad of non-grad tensor");
    return n_->grad;
  }

  S item() const {
    if (numel() != 1) throw std::invalid_argument("tensor: item() on non-scalar " + shape_str(shape()));
    return n_->value[0];
  }

  // Mutable access to leaf storage (parameters, input buffers). Must not be
  // used on op outputs that are still part of a live graph.
  std::vector<S>& mutable_values() {
    if (n_->backward_fn) throw std::logic_error("tensor: mutating a non-leaf node");
    return n_->value;
  }

  void zero_grad() {
    if (n_->requires_grad) std::fill(n_->grad.begin(), n_->grad.end(), S(0));
  }

  // Value copy detached from the graph.
  Tensor detach() const { return from_data(n_->shape, n_->value, false); }

  void accumulate_grad(const std::vector<S>& g) {
    if (!n_->requires_grad) return;
    for (size_t i = 0; i < g.size(); ++i) n_->grad[i] += g[i];
  }

  // Reverse-mode sweep from a scalar loss. Gradients accumulate into every
  // requires_grad node reachable from `loss`; call zero_grad() on leaves
  // between independent backward passes.
  static void run_backward(const Tensor& loss) {
    if (loss.numel() != 1)
      throw std::invalid_argument("tensor: backward requires a scalar loss, got " +
                                  shape_str(loss.shape()));
    if (!loss.n_->requires_grad) return;
    // Iterative post-order topological sort over grad-requiring nodes.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(loss.n_.get(), 0);
    visited.insert(loss.n_.get());
    while (!stack.empty()) {
      auto& [node, idx] = stack.back();
      if (idx < node->parents.size()) {
        Node* p = node->parents[idx++].get();
        if (p->requires_grad && !visited.count(p)) {
          visited.insert(p);
          stack.emplace_back(p, 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    loss.n_->grad[0] += S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* node = *it;
      if (node->backward_fn) node->backward_fn(*node);
    }
  }

  using NodeT = Node;
};

template <class S>
void backward(const Tensor<S>& loss) {
  Tensor<S>::run_backward(loss);
}

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// ---------------------------------------------------------------------------
// Broadcasting helpers

inline bool broadcast_shapes(const Shape& a, const Shape& b, Shape& out) {
  size_t nd = std::max(a.size(), b.size());
  out.assign(nd, 1);
  for (size_t i = 0; i < nd; ++i) {
    int64_t da = i < nd - a.size() ? 1 : a[i - (nd - a.size())];
    int64_t db = i < nd - b.size() ? 1 : b[i - (nd - b.size())];
    if (da != db && da != 1 && db != 1) return false;
    out[i] = std::max(da, db);
  }
  return true;
}

// Row-major strides with 0 on broadcast dimensions, right-aligned to nd dims.
inline std::vector<int64_t> broadcast_strides(const Shape& s, size_t nd) {
  std::vector<int64_t> st(nd, 0);
  int64_t acc = 1;
  for (size_t i = 0; i < s.size(); ++i) {
    size_t ax = s.size() - 1 - i;
    st[nd - 1 - i] = (s[ax] == 1) ? 0 : acc;
    acc *= s[ax];
  }
  return st;
}

namespace detail {

template <class S, class FwdFn, class BwdA, class BwdB>
Tensor<S> binary_broadcast_op(const char* name, const Tensor<S>& a, const Tensor<S>& b,
                              FwdFn fwd, BwdA dfda, BwdB dfdb) {
  Shape os;
  if (!broadcast_shapes(a.shape(), b.shape(), os)) shape_error(name, a.shape(), b.shape());
  size_t nd = os.size();
  auto sa = broadcast_strides(a.shape(), nd);
  auto sb = broadcast_strides(b.shape(), nd);
  int64_t n = shape_numel(os);
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<S> out(static_cast<size_t>(n));
  std::vector<int64_t> idx(nd, 0);
  int64_t ia = 0, ib = 0;
  for (int64_t lin = 0; lin < n; ++lin) {
    out[static_cast<size_t>(lin)] = fwd(av[static_cast<size_t>(ia)], bv[static_cast<size_t>(ib)]);
    // advance mixed-radix counter
    for (size_t d = nd; d-- > 0;) {
      idx[d]++;
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < os[d]) break;
      ia -= sa[d] * os[d];
      ib -= sb[d] * os[d];
      idx[d] = 0;
    }
  }
  Tensor<S> ta = a, tb = b;
  return Tensor<S>::make_op(
      os, std::move(out), {a, b},
      [ta, tb, os, sa, sb, nd, dfda, dfdb](typename Tensor<S>::NodeT& node) mutable {
        const auto& av = ta.values();
        const auto& bv = tb.values();
        int64_t n = shape_numel(os);
        std::vector<S> ga(ta.requires_grad() ? av.size() : 0, S(0));
        std::vector<S> gb(tb.requires_grad() ? bv.size() : 0, S(0));
        std::vector<int64_t> idx(nd, 0);
        int64_t ia = 0, ib = 0;
        for (int64_t lin = 0; lin < n; ++lin) {
          S g = node.grad[static_cast<size_t>(lin)];
          S va = av[static_cast<size_t>(ia)], vb = bv[static_cast<size_t>(ib)];
          if (!ga.empty()) ga[static_cast<size_t>(ia)] += g * dfda(va, vb);
          if (!gb.empty()) gb[static_cast<size_t>(ib)] += g * dfdb(va, vb);
          for (size_t d = nd; d-- > 0;) {
            idx[d]++;
            ia += sa[d];
            ib += sb[d];
            if (idx[d] < os[d]) break;
            ia -= sa[d] * os[d];
            ib -= sb[d] * os[d];
            idx[d] = 0;
          }
        }
        if (!ga.empty()) ta.accumulate_grad(ga);
        if (!gb.empty()) tb.accumulate_grad(gb);
      });
}

template <class S, class F, class DF>
Tensor<S> unary_op(const Tensor<S>& x, F f, DF df) {
  const auto& xv = x.values();
  std::vector<S> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  Tensor<S> tx = x;
  return Tensor<S>::make_op(x.shape(), std::move(out), {x},
                            [tx, df](typename Tensor<S>::NodeT& node) mutable {
                              const auto& xv = tx.values();
                              std::vector<S> g(xv.size());
                              for (size_t i = 0; i < xv.size(); ++i)
                                g[i] = node.grad[i] * df(xv[i], node.value[i]);
                              tx.accumulate_grad(g);
                            });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  return detail::binary_broadcast_op<S>(
      "add", a, b, [](S x, S y) { return x + y; }, [](S, S) { return S(1); },
      [](S, S) { return S(1); });
}

template <class S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  return detail::binary_broadcast_op<S>(
      "sub", a, b, [](S x, S y) { return x - y; }, [](S, S) { return S(1); },
      [](S, S) { return S(-1); });
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  return detail::binary_broadcast_op<S>(
      "mul", a, b, [](S x, S y) { return x * y; }, [](S, S y) { return y; },
      [](S x, S) { return x; });
}

template <class S>
Tensor<S> scale(const Tensor<S>& x, double c) {
  S cc = static_cast<S>(c);
  return detail::unary_op(x, [cc](S v) { return v * cc; }, [cc](S, S) { return cc; });
}

template <class S>
Tensor<S> neg(const Tensor<S>& x) { return scale(x, -1.0); }

template <class S>
Tensor<S> exp(const Tensor<S>& x) {
  return detail::unary_op(x, [](S v) { return std::exp(v); }, [](S, S y) { return y; });
}

template <class S>
Tensor<S> log(const Tensor<S>& x) {
  return detail::unary_op(x, [](S v) { return std::log(v); }, [](S v, S) { return S(1) / v; });
}

template <class S>
Tensor<S> sqrt(const Tensor<S>& x) {
  return detail::unary_op(x, [](S v) { return std::sqrt(v); },
                          [](S, S y) { return S(0.5) / y; });
}

template <class S>
Tensor<S> sigmoid(const Tensor<S>& x) {
  return detail::unary_op(x, [](S v) { return S(1) / (S(1) + std::exp(-v)); },
                          [](S, S y) { return y * (S(1) - y); });
}

template <class S>
Tensor<S> relu(const Tensor<S>& x) {
  return detail::unary_op(x, [](S v) { return v > S(0) ? v : S(0); },
                          [](S v, S) { return v > S(0) ? S(1) : S(0); });
}

// Exact GELU: x * Phi(x) with the Gaussian CDF.
template <class S>
Tensor<S> gelu(const Tensor<S>& x) {
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  return detail::unary_op(
      x,
      [](S v) {
        return static_cast<S>(0.5 * static_cast<double>(v) *
                              (1.0 + std::erf(static_cast<double>(v) * kInvSqrt2)));
      },
      [](S v, S) {
        double vd = static_cast<double>(v);
        double phi = 0.5 * (1.0 + std::erf(vd * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * vd * vd);
        return static_cast<S>(phi + vd * pdf);
      });
}

// ---------------------------------------------------------------------------
// Shape ops

template <class S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape) {
  // one -1 wildcard allowed
  int64_t known = 1, wild = -1;
  for (size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == -1) {
      if (wild >= 0) throw std::invalid_argument("tensor: reshape with multiple -1");
      wild = static_cast<int64_t>(i);
    } else {
      known *= shape[i];
    }
  }
  if (wild >= 0) shape[static_cast<size_t>(wild)] = x.numel() / known;
  if (shape_numel(shape) != x.numel()) shape_error("reshape", x.shape(), shape);
  Tensor<S> tx = x;
  return Tensor<S>::make_op(shape, x.values(), {x},
                            [tx](typename Tensor<S>::NodeT& node) mutable {
                              tx.accumulate_grad(node.grad);
                            });
}

template <class S>
Tensor<S> transpose(const Tensor<S>& x) {
  if (x.ndim() != 2) throw std::invalid_argument("tensor: transpose expects 2-d, got " + shape_str(x.shape()));
  int64_t r = x.size(0), c = x.size(1);
  const auto& xv = x.values();
  std::vector<S> out(static_cast<size_t>(r * c));
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j)
      out[static_cast<size_t>(j * r + i)] = xv[static_cast<size_t>(i * c + j)];
  Tensor<S> tx = x;
  return Tensor<S>::make_op({c, r}, std::move(out), {x},
                            [tx, r, c](typename Tensor<S>::NodeT& node) mutable {
                              std::vector<S> g(static_cast<size_t>(r * c));
                              for (int64_t j = 0; j < c; ++j)
                                for (int64_t i = 0; i < r; ++i)
                                  g[static_cast<size_t>(i * c + j)] +=
                                      node.grad[static_cast<size_t>(j * r + i)];
                              tx.accumulate_grad(g);
                            });
}

template <class S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts, size_t axis) {
  if (parts.empty()) throw std::invalid_argument("tensor: concat of zero tensors");
  Shape os = parts[0].shape();
  if (axis >= os.size()) throw std::invalid_argument("tensor: concat axis out of range");
  int64_t total = 0;
  for (const auto& p : parts) {
    if (p.ndim() != os.size()) shape_error("concat", os, p.shape());
    for (size_t d = 0; d < os.size(); ++d)
      if (d != axis && p.shape()[d] != os[d]) shape_error("concat", os, p.shape());
    total += p.size(axis);
  }
  os[axis] = total;
  int64_t outer = 1, inner = 1;
  for (size_t d = 0; d < axis; ++d) outer *= os[d];
  for (size_t d = axis + 1; d < os.size(); ++d) inner *= os[d];
  std::vector<S> out(static_cast<size_t>(shape_numel(os)));
  std::vector<int64_t> block;  // per-part contiguous block length within one outer slab
  block.reserve(parts.size());
  int64_t off = 0;
  for (const auto& p : parts) {
    int64_t len = p.size(axis) * inner;
    block.push_back(len);
    const auto& pv = p.values();
    for (int64_t o = 0; o < outer; ++o)
      std::copy(pv.begin() + o * len, pv.begin() + (o + 1) * len,
                out.begin() + o * total * inner + off);
    off += len;
  }
  auto held = parts;
  return Tensor<S>::make_op(os, std::move(out), parts,
                            [held, block, outer, inner, total](typename Tensor<S>::NodeT& node) mutable {
                              int64_t off = 0;
                              for (size_t pi = 0; pi < held.size(); ++pi) {
                                int64_t len = block[pi];
                                std::vector<S> g(static_cast<size_t>(held[pi].numel()));
                                for (int64_t o = 0; o < outer; ++o)
                                  for (int64_t k = 0; k < len; ++k)
                                    g[static_cast<size_t>(o * len + k)] =
                                        node.grad[static_cast<size_t>(o * total * inner + off + k)];
                                held[pi].accumulate_grad(g);
                                off += len;
                              }
                            });
}

template <class S>
Tensor<S> concat(std::initializer_list<Tensor<S>> parts, size_t axis) {
  return concat(std::vector<Tensor<S>>(parts), axis);
}

template <class S>
Tensor<S> slice(const Tensor<S>& x, size_t axis, int64_t start, int64_t len) {
  if (axis >= x.ndim()) throw std::invalid_argument("tensor: slice axis out of range");
  if (start < 0 || len < 0 || start + len > x.size(axis))
    throw std::invalid_argument("tensor: slice [" + std::to_string(start) + ", " +
                                std::to_string(start + len) + ") out of bounds for axis size " +
                                std::to_string(x.size(axis)));
  Shape os = x.shape();
  os[axis] = len;
  int64_t outer = 1, inner = 1;
  for (size_t d = 0; d < axis; ++d) outer *= x.shape()[d];
  for (size_t d = axis + 1; d < x.ndim(); ++d) inner *= x.shape()[d];
  int64_t ax = x.size(axis);
  const auto& xv = x.values();
  std::vector<S> out(static_cast<size_t>(outer * len * inner));
  for (int64_t o = 0; o < outer; ++o)
    std::copy(xv.begin() + (o * ax + start) * inner, xv.begin() + (o * ax + start + len) * inner,
              out.begin() + o * len * inner);
  Tensor<S> tx = x;
  return Tensor<S>::make_op(os, std::move(out), {x},
                            [tx, outer, inner, ax, start, len](typename Tensor<S>::NodeT& node) mutable {
                              std::vector<S> g(static_cast<size_t>(tx.numel()), S(0));
                              for (int64_t o = 0; o < outer; ++o)
                                for (int64_t k = 0; k < len * inner; ++k)
                                  g[static_cast<size_t>((o * ax + start) * inner + k)] =
                                      node.grad[static_cast<size_t>(o * len * inner + k)];
                              tx.accumulate_grad(g);
                            });
}

// ---------------------------------------------------------------------------
// Matmul

template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.size(1) != b.size(0))
    shape_error("matmul", a.shape(), b.shape());
  int64_t m = a.size(0), k = a.size(1), n = b.size(1);
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<S> out(static_cast<size_t>(m * n), S(0));
  for (int64_t i = 0; i < m; ++i) {
    const S* arow = av.data() + i * k;
    S* crow = out.data() + i * n;
    for (int64_t p = 0; p < k; ++p) {
      S aik = arow[p];
      const S* brow = bv.data() + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  Tensor<S> ta = a, tb = b;
  return Tensor<S>::make_op(
      {m, n}, std::move(out), {a, b}, [ta, tb, m, k, n](typename Tensor<S>::NodeT& node) mutable {
        const auto& av = ta.values();
        const auto& bv = tb.values();
        const auto& g = node.grad;
        if (ta.requires_grad()) {  // dA = dC * B^T
          std::vector<S> ga(static_cast<size_t>(m * k), S(0));
          for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j) {
              S gij = g[static_cast<size_t>(i * n + j)];
              const S* brow = bv.data() + j;
              S* garow = ga.data() + i * k;
              for (int64_t p = 0; p < k; ++p) garow[p] += gij * brow[p * n];
            }
          ta.accumulate_grad(ga);
        }
        if (tb.requires_grad()) {  // dB = A^T * dC
          std::vector<S> gb(static_cast<size_t>(k * n), S(0));
          for (int64_t i = 0; i < m; ++i) {
            const S* arow = av.data() + i * k;
            const S* grow = g.data() + i * n;
            for (int64_t p = 0; p < k; ++p) {
              S aip = arow[p];
              S* gbrow = gb.data() + p * n;
              for (int64_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
            }
          }
          tb.accumulate_grad(gb);
        }
      });
}

// ---------------------------------------------------------------------------
// Reductions

namespace detail {
// Maps each linear index of x to the linear index of the reduced output.
inline std::vector<int64_t> reduce_index_map(const Shape& xs, const std::vector<bool>& reduce_axis,
                                             Shape& out_shape) {
  out_shape.clear();
  for (size_t d = 0; d < xs.size(); ++d)
    if (!reduce_axis[d]) out_shape.push_back(xs[d]);
  if (out_shape.empty()) out_shape.push_back(1);
  std::vector<int64_t> keep_stride(xs.size(), 0);
  int64_t acc = 1;
  for (size_t d = xs.size(); d-- > 0;) {
    if (!reduce_axis[d]) {
      keep_stride[d] = acc;
      acc *= xs[d];
    }
  }
  int64_t n = shape_numel(xs);
  std::vector<int64_t> map(static_cast<size_t>(n));
  std::vector<int64_t> idx(xs.size(), 0);
  int64_t cur = 0;
  for (int64_t lin = 0; lin < n; ++lin) {
    map[static_cast<size_t>(lin)] = cur;
    for (size_t d = xs.size(); d-- > 0;) {
      idx[d]++;
      cur += keep_stride[d];
      if (idx[d] < xs[d]) break;
      cur -= keep_stride[d] * xs[d];
      idx[d] = 0;
    }
  }
  return map;
}
}  // namespace detail

template <class S>
Tensor<S> sum(const Tensor<S>& x, const std::vector<size_t>& axes) {
  std::vector<bool> red(x.ndim(), axes.empty());
  for (size_t a : axes) {
    if (a >= x.ndim()) throw std::invalid_argument("tensor: sum axis out of range");
    red[a] = true;
  }
  Shape os;
  auto map = detail::reduce_index_map(x.shape(), red, os);
  const auto& xv = x.values();
  std::vector<S> out(static_cast<size_t>(shape_numel(os)), S(0));
  for (size_t i = 0; i < xv.size(); ++i) out[static_cast<size_t>(map[i])] += xv[i];
  Tensor<S> tx = x;
  return Tensor<S>::make_op(os, std::move(out), {x},
                            [tx, map](typename Tensor<S>::NodeT& node) mutable {
                              std::vector<S> g(static_cast<size_t>(tx.numel()));
                              for (size_t i = 0; i < g.size(); ++i)
                                g[i] = node.grad[static_cast<size_t>(map[i])];
                              tx.accumulate_grad(g);
                            });
}

template <class S>
Tensor<S> sum(const Tensor<S>& x) { return sum(x, {}); }

template <class S>
Tensor<S> mean(const Tensor<S>& x, const std::vector<size_t>& axes = {}) {
  std::vector<bool> red(x.ndim(), axes.empty());
  for (size_t a : axes) red.at(a) = true;
  int64_t cnt = 1;
  for (size_t d = 0; d < x.ndim(); ++d)
    if (red[d]) cnt *= x.shape()[d];
  if (cnt == 0) throw std::invalid_argument("tensor: mean over empty axis");
  return scale(sum(x, axes), 1.0 / static_cast<double>(cnt));
}

// Max over spatial axes of a [C, H, W] map -> [C]; gradient routes to the
// first (row-major) maximal element per channel.
template <class S>
Tensor<S> spatial_max(const Tensor<S>& x) {
  if (x.ndim() != 3) throw std::invalid_argument("tensor: spatial_max expects [C,H,W], got " + shape_str(x.shape()));
  int64_t c = x.size(0), hw = x.size(1) * x.size(2);
  if (hw == 0) throw std::invalid_argument("tensor: spatial_max over empty map");
  const auto& xv = x.values();
  std::vector<S> out(static_cast<size_t>(c));
  std::vector<int64_t> arg(static_cast<size_t>(c));
  for (int64_t ch = 0; ch < c; ++ch) {
    int64_t best = 0;
    S bv = xv[static_cast<size_t>(ch * hw)];
    for (int64_t i = 1; i < hw; ++i) {
      S v = xv[static_cast<size_t>(ch * hw + i)];
      if (v > bv) { bv = v; best = i; }
    }
    out[static_cast<size_t>(ch)] = bv;
    arg[static_cast<size_t>(ch)] = ch * hw + best;
  }
  Tensor<S> tx = x;
  return Tensor<S>::make_op({c}, std::move(out), {x},
                            [tx, arg](typename Tensor<S>::NodeT& node) mutable {
                              std::vector<S> g(static_cast<size_t>(tx.numel()), S(0));
                              for (size_t ch = 0; ch < arg.size(); ++ch)
                                g[static_cast<size_t>(arg[ch])] += node.grad[ch];
                              tx.accumulate_grad(g);
                            });
}

template <class S>
Tensor<S> spatial_mean(const Tensor<S>& x) {
  if (x.ndim() != 3) throw std::invalid_argument("tensor: spatial_mean expects [C,H,W], got " + shape_str(x.shape()));
  return mean(x, {1, 2});
}

// ---------------------------------------------------------------------------
// Softmax family

template <class S>
Tensor<S> softmax(const Tensor<S>& x, size_t axis) {
  if (axis >= x.ndim()) throw std::invalid_argument("tensor: softmax axis out of range");
  int64_t ax = x.size(axis);
  if (ax == 0) throw std::invalid_argument("tensor: softmax over empty axis");
  int64_t outer = 1, inner = 1;
  for (size_t d = 0; d < axis; ++d) outer *= x.shape()[d];
  for (size_t d = axis + 1; d < x.ndim(); ++d) inner *= x.shape()[d];
  const auto& xv = x.values();
  std::vector<S> out(xv.size());
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t in = 0; in < inner; ++in) {
      int64_t base = o * ax * inner + in;
      S mx = xv[static_cast<size_t>(base)];
      for (int64_t i = 1; i < ax; ++i) mx = std::max(mx, xv[static_cast<size_t>(base + i * inner)]);
      S denom = S(0);
      for (int64_t i = 0; i < ax; ++i) {
        S e = std::exp(xv[static_cast<size_t>(base + i * inner)] - mx);
        out[static_cast<size_t>(base + i * inner)] = e;
        denom += e;
      }
      for (int64_t i = 0; i < ax; ++i) out[static_cast<size_t>(base + i * inner)] /= denom;
    }
  Tensor<S> tx = x;
  return Tensor<S>::make_op(x.shape(), std::move(out), {x},
                            [tx, outer, inner, ax](typename Tensor<S>::NodeT& node) mutable {
                              std::vector<S> g(node.value.size());
                              for (int64_t o = 0; o < outer; ++o)
                                for (int64_t in = 0; in < inner; ++in) {
                                  int64_t base = o * ax * inner + in;
                                  S dot = S(0);
                                  for (int64_t i = 0; i < ax; ++i) {
                                    size_t k = static_cast<size_t>(base + i * inner);
                                    dot += node.grad[k] * node.value[k];
                                  }
                                  for (int64_t i = 0; i < ax; ++i) {
                                    size_t k = static_cast<size_t>(base + i * inner);
                                    g[k] = node.value[k] * (node.grad[k] - dot);
                                  }
                                }
                              tx.accumulate_grad(g);
                            });
}

template <class S>
Tensor<S> log_softmax(const Tensor<S>& x, size_t axis) {
  if (axis >= x.ndim()) throw std::invalid_argument("tensor: log_softmax axis out of range");
  int64_t ax = x.size(axis);
  if (ax == 0) throw std::invalid_argument("tensor: log_softmax over empty axis");
  int64_t outer = 1, inner = 1;
  for (size_t d = 0; d < axis; ++d) outer *= x.shape()[d];
  for (size_t d = axis + 1; d < x.ndim(); ++d) inner *= x.shape()[d];
  const auto& xv = x.values();
  std::vector<S> out(xv.size());
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t in = 0; in < inner; ++in) {
      int64_t base = o * ax * inner + in;
      S mx = xv[static_cast<size_t>(base)];
      for (int64_t i = 1; i < ax; ++i) mx = std::max(mx, xv[static_cast<size_t>(base + i * inner)]);
      S denom = S(0);
      for (int64_t i = 0; i < ax; ++i) denom += std::exp(xv[static_cast<size_t>(base + i * inner)] - mx);
      S lse = mx + std::log(denom);
      for (int64_t i = 0; i < ax; ++i) {
        size_t k = static_cast<size_t>(base + i * inner);
        out[k] = xv[k] - lse;
      }
    }
  Tensor<S> tx = x;
  return Tensor<S>::make_op(x.shape(), std::move(out), {x},
                            [tx, outer, inner, ax](typename Tensor<S>::NodeT& node) mutable {
                              std::vector<S> g(node.value.size());
                              for (int64_t o = 0; o < outer; ++o)
                                for (int64_t in = 0; in < inner; ++in) {
                                  int64_t base = o * ax * inner + in;
                                  S gsum = S(0);
                                  for (int64_t i = 0; i < ax; ++i)
                                    gsum += node.grad[static_cast<size_t>(base + i * inner)];
                                  for (int64_t i = 0; i < ax; ++i) {
                                    size_t k = static_cast<size_t>(base + i * inner);
                                    g[k] = node.grad[k] - std::exp(node.value[k]) * gsum;
                                  }
                                }
                              tx.accumulate_grad(g);
                            });
}

// Per-row picks: out[i] = x[i, idx[i]]. Used to assemble cross-entropy.
template <class S>
Tensor<S> pick(const Tensor<S>& x, const std::vector<int64_t>& idx) {
  if (x.ndim() != 2) throw std::invalid_argument("tensor: pick expects 2-d, got " + shape_str(x.shape()));
  int64_t r = x.size(0), c = x.size(1);
  if (static_cast<int64_t>(idx.size()) != r)
    throw std::invalid_argument("tensor: pick index count " + std::to_string(idx.size()) +
                                " != rows " + std::to_string(r));
  const auto& xv = x.values();
  std::vector<S> out(static_cast<size_t>(r));
  for (int64_t i = 0; i < r; ++i) {
    if (idx[static_cast<size_t>(i)] < 0 || idx[static_cast<size_t>(i)] >= c)
      throw std::invalid_argument("tensor: pick index out of range");
    out[static_cast<size_t>(i)] = xv[static_cast<size_t>(i * c + idx[static_cast<size_t>(i)])];
  }
  Tensor<S> tx = x;
  return Tensor<S>::make_op({r}, std::move(out), {x},
                            [tx, idx, c](typename Tensor<S>::NodeT& node) mutable {
                              std::vector<S> g(static_cast<size_t>(tx.numel()), S(0));
                              for (size_t i = 0; i < idx.size(); ++i)
                                g[i * static_cast<size_t>(c) + static_cast<size_t>(idx[i])] +=
                                    node.grad[i];
                              tx.accumulate_grad(g);
                            });
}

// Summed cross-entropy of logits [N, C] against integer targets [N].
template <class S>
Tensor<S> cross_entropy_sum(const Tensor<S>& logits, const std::vector<int64_t>& targets) {
  return neg(sum(pick(log_softmax(logits, 1), targets)));
}

// Mean squared error over all elements.
template <class S>
Tensor<S> mse(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) shape_error("mse", a.shape(), b.shape());
  auto d = sub(a, b);
  return mean(mul(d, d));
}

// ---------------------------------------------------------------------------
// Embedding lookup (gather rows)

template <class S>
Tensor<S> embedding(const Tensor<S>& table, const std::vector<int64_t>& ids) {
  if (table.ndim() != 2) throw std::invalid_argument("tensor: embedding table must be 2-d");
  int64_t v = table.size(0), c = table.size(1);
  const auto& tv = table.values();
  std::vector<S> out(ids.size() * static_cast<size_t>(c));
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= v)
      throw std::invalid_argument("tensor: embedding id " + std::to_string(ids[i]) +
                                  " out of range [0, " + std::to_string(v) + ")");
    std::copy(tv.begin() + ids[i] * c, tv.begin() + (ids[i] + 1) * c, out.begin() + i * c);
  }
  Tensor<S> tt = table;
  return Tensor<S>::make_op({static_cast<int64_t>(ids.size()), c}, std::move(out), {table},
                            [tt, ids, c](typename Tensor<S>::NodeT& node) mutable {
                              std::vector<S> g(static_cast<size_t>(tt.numel()), S(0));
                              for (size_t i = 0; i < ids.size(); ++i)
                                for (int64_t j = 0; j < c; ++j)
                                  g[static_cast<size_t>(ids[i] * c + j)] +=
                                      node.grad[i * static_cast<size_t>(c) + static_cast<size_t>(j)];
                              tt.accumulate_grad(g);
                            });
}

// ---------------------------------------------------------------------------
// Convolutions (NCHW without the batch axis: [C, H, W])

template <class S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias,
                 int64_t stride, int64_t pad) {
  if (x.ndim() != 3 || w.ndim() != 4 || x.size(0) != w.size(1))
    shape_error("conv2d", x.shape(), w.shape());
  int64_t ci = x.size(0), h = x.size(1), wd = x.size(2);
  int64_t co = w.size(0), kh = w.size(2), kw = w.size(3);
  int64_t ho = (h + 2 * pad - kh) / stride + 1;
  int64_t wo = (wd + 2 * pad - kw) / stride + 1;
  if (ho <= 0 || wo <= 0) shape_error("conv2d", x.shape(), w.shape());
  if (bias.defined() && bias.numel() != co) shape_error("conv2d bias", bias.shape(), {co});
  const auto& xv = x.values();
  const auto& wv = w.values();
  std::vector<S> out(static_cast<size_t>(co * ho * wo), S(0));
  for (int64_t oc = 0; oc < co; ++oc) {
    S b = bias.defined() ? bias.values()[static_cast<size_t>(oc)] : S(0);
    for (int64_t oy = 0; oy < ho; ++oy)
      for (int64_t ox = 0; ox < wo; ++ox) {
        S acc = b;
        for (int64_t ic = 0; ic < ci; ++ic)
          for (int64_t ky = 0; ky < kh; ++ky) {
            int64_t iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            const S* xr = xv.data() + (ic * h + iy) * wd;
            const S* wr = wv.data() + ((oc * ci + ic) * kh + ky) * kw;
            for (int64_t kx = 0; kx < kw; ++kx) {
              int64_t ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= wd) continue;
              acc += xr[ix] * wr[kx];
            }
          }
        out[static_cast<size_t>((oc * ho + oy) * wo + ox)] = acc;
      }
  }
  Tensor<S> tx = x, tw = w, tb = bias;
  std::vector<Tensor<S>> parents = {x, w};
  if (bias.defined()) parents.push_back(bias);
  return Tensor<S>::make_op(
      {co, ho, wo}, std::move(out), parents,
      [tx, tw, tb, ci, h, wd, co, kh, kw, ho, wo, stride, pad](typename Tensor<S>::NodeT& node) mutable {
        const auto& xv = tx.values();
        const auto& wv = tw.values();
        const auto& g = node.grad;
        std::vector<S> gx(tx.requires_grad() ? xv.size() : 0, S(0));
        std::vector<S> gw(tw.requires_grad() ? wv.size() : 0, S(0));
        std::vector<S> gb(tb.defined() && tb.requires_grad() ? static_cast<size_t>(co) : 0, S(0));
        for (int64_t oc = 0; oc < co; ++oc)
          for (int64_t oy = 0; oy < ho; ++oy)
            for (int64_t ox = 0; ox < wo; ++ox) {
              S go = g[static_cast<size_t>((oc * ho + oy) * wo + ox)];
              if (go == S(0)) continue;
              if (!gb.empty()) gb[static_cast<size_t>(oc)] += go;
              for (int64_t ic = 0; ic < ci; ++ic)
                for (int64_t ky = 0; ky < kh; ++ky) {
                  int64_t iy = oy * stride - pad + ky;
                  if (iy < 0 || iy >= h) continue;
                  for (int64_t kx = 0; kx < kw; ++kx) {
                    int64_t ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= wd) continue;
                    size_t xi = static_cast<size_t>((ic * h + iy) * wd + ix);
                    size_t wi = static_cast<size_t>(((oc * ci + ic) * kh + ky) * kw + kx);
                    if (!gx.empty()) gx[xi] += go * wv[wi];
                    if (!gw.empty()) gw[wi] += go * xv[xi];
                  }
                }
            }
        if (!gx.empty()) tx.accumulate_grad(gx);
        if (!gw.empty()) tw.accumulate_grad(gw);
        if (!gb.empty()) tb.accumulate_grad(gb);
      });
}

// Transposed convolution; weight layout [C_in, C_out, kh, kw].
// Output size: (H - 1) * stride - 2 * pad + kh.
template <class S>
Tensor<S> conv_transpose2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias,
                           int64_t stride, int64_t pad) {
  if (x.ndim() != 3 || w.ndim() != 4 || x.size(0) != w.size(0))
    shape_error("conv_transpose2d", x.shape(), w.shape());
  int64_t ci = x.size(0), h = x.size(1), wd = x.size(2);
  int64_t co = w.size(1), kh = w.size(2), kw = w.size(3);
  int64_t ho = (h - 1) * stride - 2 * pad + kh;
  int64_t wo = (wd - 1) * stride - 2 * pad + kw;
  if (ho <= 0 || wo <= 0) shape_error("conv_transpose2d", x.shape(), w.shape());
  if (bias.defined() && bias.numel() != co) shape_error("conv_transpose2d bias", bias.shape(), {co});
  const auto& xv = x.values();
  const auto& wv = w.values();
  std::vector<S> out(static_cast<size_t>(co * ho * wo), S(0));
  if (bias.defined())
    for (int64_t oc = 0; oc < co; ++oc)
      std::fill(out.begin() + oc * ho * wo, out.begin() + (oc + 1) * ho * wo,
                bias.values()[static_cast<size_t>(oc)]);
  for (int64_t ic = 0; ic < ci; ++ic)
    for (int64_t iy = 0; iy < h; ++iy)
      for (int64_t ix = 0; ix < wd; ++ix) {
        S xval = xv[static_cast<size_t>((ic * h + iy) * wd + ix)];
        if (xval == S(0)) continue;
        for (int64_t oc = 0; oc < co; ++oc) {
          const S* wbase = wv.data() + ((ic * co + oc) * kh) * kw;
          for (int64_t ky = 0; ky < kh; ++ky) {
            int64_t oy = iy * stride - pad + ky;
            if (oy < 0 || oy >= ho) continue;
            S* orow = out.data() + (oc * ho + oy) * wo;
            const S* wrow = wbase + ky * kw;
            for (int64_t kx = 0; kx < kw; ++kx) {
              int64_t ox = ix * stride - pad + kx;
              if (ox < 0 || ox >= wo) continue;
              orow[ox] += xval * wrow[kx];
            }
          }
        }
      }
  Tensor<S> tx = x, tw = w, tb = bias;
  std::vector<Tensor<S>> parents = {x, w};
  if (bias.defined()) parents.push_back(bias);
  return Tensor<S>::make_op(
      {co, ho, wo}, std::move(out), parents,
      [tx, tw, tb, ci, h, wd, co, kh, kw, ho, wo, stride, pad](typename Tensor<S>::NodeT& node) mutable {
        const auto& xv = tx.values();
        const auto& wv = tw.values();
        const auto& g = node.grad;
        std::vector<S> gx(tx.requires_grad() ? xv.size() : 0, S(0));
        std::vector<S> gw(tw.requires_grad() ? wv.size() : 0, S(0));
        std::vector<S> gb(tb.defined() && tb.requires_grad() ? static_cast<size_t>(co) : 0, S(0));
        if (!gb.empty())
          for (int64_t oc = 0; oc < co; ++oc)
            for (int64_t i = 0; i < ho * wo; ++i)
              gb[static_cast<size_t>(oc)] += g[static_cast<size_t>(oc * ho * wo + i)];
        for (int64_t ic = 0; ic < ci; ++ic)
          for (int64_t iy = 0; iy < h; ++iy)
            for (int64_t ix = 0; ix < wd; ++ix) {
              size_t xi = static_cast<size_t>((ic * h + iy) * wd + ix);
              S xval = xv[xi];
              S gacc = S(0);
              for (int64_t oc = 0; oc < co; ++oc)
                for (int64_t ky = 0; ky < kh; ++ky) {
                  int64_t oy = iy * stride - pad + ky;
                  if (oy < 0 || oy >= ho) continue;
                  const S* grow = g.data() + (oc * ho + oy) * wo;
                  const S* wrow = wv.data() + ((ic * co + oc) * kh + ky) * kw;
                  S* gwrow = gw.empty() ? nullptr : gw.data() + ((ic * co + oc) * kh + ky) * kw;
                  for (int64_t kx = 0; kx < kw; ++kx) {
                    int64_t ox = ix * stride - pad + kx;
                    if (ox < 0 || ox >= wo) continue;
                    gacc += grow[ox] * wrow[kx];
                    if (gwrow) gwrow[kx] += grow[ox] * xval;
                  }
                }
              if (!gx.empty()) gx[xi] += gacc;
            }
        if (!gx.empty()) tx.accumulate_grad(gx);
        if (!gw.empty()) tw.accumulate_grad(gw);
        if (!gb.empty()) tb.accumulate_grad(gb);
      });
}

// ---------------------------------------------------------------------------
// Bilinear grid sample at one continuous (u, v) pixel coordinate.
//
// Coordinates are clamped to the valid range (clamp-to-edge) and treated as
// constants; gradients flow into the feature map only.
template <class S>
Tensor<S> grid_sample(const Tensor<S>& x, double u, double v) {
  if (x.ndim() != 3) throw std::invalid_argument("tensor: grid_sample expects [C,h,w], got " + shape_str(x.shape()));
  int64_t c = x.size(0), h = x.size(1), w = x.size(2);
  if (h == 0 || w == 0) throw std::invalid_argument("tensor: grid_sample on empty feature map");
  u = std::clamp(u, 0.0, static_cast<double>(w - 1));
  v = std::clamp(v, 0.0, static_cast<double>(h - 1));
  int64_t x0 = static_cast<int64_t>(std::floor(u));
  int64_t y0 = static_cast<int64_t>(std::floor(v));
  int64_t x1 = std::min(x0 + 1, w - 1);
  int64_t y1 = std::min(y0 + 1, h - 1);
  double fu = u - static_cast<double>(x0);
  double fv = v - static_cast<double>(y0);
  double w00 = (1 - fu) * (1 - fv), w01 = fu * (1 - fv), w10 = (1 - fu) * fv, w11 = fu * fv;
  const auto& xv = x.values();
  std::vector<S> out(static_cast<size_t>(c));
  for (int64_t ch = 0; ch < c; ++ch) {
    const S* m = xv.data() + ch * h * w;
    out[static_cast<size_t>(ch)] =
        static_cast<S>(w00 * m[y0 * w + x0] + w01 * m[y0 * w + x1] +
                       w10 * m[y1 * w + x0] + w11 * m[y1 * w + x1]);
  }
  Tensor<S> tx = x;
  return Tensor<S>::make_op({c}, std::move(out), {x},
                            [tx, c, h, w, x0, y0, x1, y1, w00, w01, w10, w11](
                                typename Tensor<S>::NodeT& node) mutable {
                              std::vector<S> g(static_cast<size_t>(tx.numel()), S(0));
                              for (int64_t ch = 0; ch < c; ++ch) {
                                S go = node.grad[static_cast<size_t>(ch)];
                                S* m = g.data() + ch * h * w;
                                m[y0 * w + x0] += static_cast<S>(w00) * go;
                                m[y0 * w + x1] += static_cast<S>(w01) * go;
                                m[y1 * w + x0] += static_cast<S>(w10) * go;
                                m[y1 * w + x1] += static_cast<S>(w11) * go;
                              }
                              tx.accumulate_grad(g);
                            });
}

// ---------------------------------------------------------------------------
// Layer normalization over the last axis, with learnable gain and bias.

template <class S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias,
                     double eps = 1e-5) {
  int64_t d = x.shape().back();
  if (gain.numel() != d || bias.numel() != d) shape_error("layer_norm", x.shape(), gain.shape());
  int64_t rows = x.numel() / d;
  const auto& xv = x.values();
  const auto& gv = gain.values();
  const auto& bv = bias.values();
  std::vector<S> out(xv.size());
  std::vector<S> inv_std(static_cast<size_t>(rows));
  std::vector<S> xhat(xv.size());
  for (int64_t r = 0; r < rows; ++r) {
    const S* xr = xv.data() + r * d;
    S mu = S(0);
    for (int64_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<S>(d);
    S var = S(0);
    for (int64_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<S>(d);
    S is = S(1) / std::sqrt(var + static_cast<S>(eps));
    inv_std[static_cast<size_t>(r)] = is;
    for (int64_t j = 0; j < d; ++j) {
      S xh = (xr[j] - mu) * is;
      xhat[static_cast<size_t>(r * d + j)] = xh;
      out[static_cast<size_t>(r * d + j)] = xh * gv[static_cast<size_t>(j)] + bv[static_cast<size_t>(j)];
    }
  }
  Tensor<S> tx = x, tg = gain, tb = bias;
  return Tensor<S>::make_op(
      x.shape(), std::move(out), {x, gain, bias},
      [tx, tg, tb, rows, d, inv_std, xhat](typename Tensor<S>::NodeT& node) mutable {
        const auto& gv = tg.values();
        std::vector<S> gx(tx.requires_grad() ? static_cast<size_t>(rows * d) : 0, S(0));
        std::vector<S> gg(tg.requires_grad() ? static_cast<size_t>(d) : 0, S(0));
        std::vector<S> gb(tb.requires_grad() ? static_cast<size_t>(d) : 0, S(0));
        for (int64_t r = 0; r < rows; ++r) {
          const S* gr = node.grad.data() + r * d;
          const S* xh = xhat.data() + r * d;
          S sum_dy = S(0), sum_dy_xh = S(0);
          for (int64_t j = 0; j < d; ++j) {
            S dy = gr[j] * gv[static_cast<size_t>(j)];
            sum_dy += dy;
            sum_dy_xh += dy * xh[j];
            if (!gg.empty()) gg[static_cast<size_t>(j)] += gr[j] * xh[j];
            if (!gb.empty()) gb[static_cast<size_t>(j)] += gr[j];
          }
          if (!gx.empty()) {
            S is = inv_std[static_cast<size_t>(r)];
            for (int64_t j = 0; j < d; ++j) {
              S dy = gr[j] * gv[static_cast<size_t>(j)];
              gx[static_cast<size_t>(r * d + j)] =
                  is * (dy - sum_dy / static_cast<S>(d) - xh[j] * sum_dy_xh / static_cast<S>(d));
            }
          }
        }
        if (!gx.empty()) tx.accumulate_grad(gx);
        if (!gg.empty()) tg.accumulate_grad(gg);
        if (!gb.empty()) tb.accumulate_grad(gb);
      });
}

// Convenience: y = x @ w (+ bias broadcast over rows). w is [in, out].
template <class S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias = {}) {
  auto y = matmul(x, w);
  if (bias.defined()) y = add(y, reshape(bias, {1, bias.numel()}));
  return y;
}

}  // namespace atgmoe::nc
