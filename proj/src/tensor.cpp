#include "emorec/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace emorec {

namespace {

std::string shape_str(const std::vector<std::size_t>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
  os << "]";
  return os.str();
}

std::size_t product(const std::vector<std::size_t>& s) {
  std::size_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

[[noreturn]] void dim_error(const char* op, const Tensor& a, const Tensor& b) {
  throw DimError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                 " and " + shape_str(b.shape()));
}

void require_rank2(const char* op, const Tensor& x) {
  if (x.rank() != 2)
    throw DimError(std::string(op) + ": expected a rank-2 tensor, got " +
                   shape_str(x.shape()));
}

// Broadcast classification for binary elementwise ops: equal shapes, or
// b = [n] against a = [m, n].
enum class Bcast { same, row_vector };

Bcast classify(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Bcast::same;
  if (a.rank() == 2 && b.rank() == 1 && b.extent(0) == a.extent(1))
    return Bcast::row_vector;
  dim_error(op, a, b);
}

}  // namespace

Tensor make_op(std::vector<std::size_t> shape, std::vector<Tensor> parents,
               std::function<void(TensorNode&)> backward) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data.assign(product(node->shape), 0.0);
  for (const auto& p : parents) node->requires_grad |= p.requires_grad();
  node->parents = std::move(parents);
  if (node->requires_grad) node->backward = std::move(backward);
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
  for (auto e : shape)
    if (e == 0) throw DimError("tensor: zero extent in shape " + shape_str(shape));
  auto node = std::make_shared<TensorNode>();
  node->data.assign(product(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(std::vector<double> values, std::vector<std::size_t> shape,
                    bool requires_grad) {
  if (values.size() != product(shape))
    throw DimError("tensor: " + std::to_string(values.size()) +
                   " values do not fill shape " + shape_str(shape));
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({value}, {1}, requires_grad);
}

double Tensor::value() const {
  if (numel() != 1)
    throw ContractError("value(): tensor of shape " + shape_str(shape()) +
                        " is not a scalar");
  return node_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return node_->data[row * node_->shape[1] + col];
}

// ---- matmul ----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  if (a.extent(1) != b.extent(0)) dim_error("matmul", a, b);
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  Tensor out = make_op({m, n}, {a, b}, [m, k, n](TensorNode& o) {
    const Tensor& pa = o.parents[0];
    const Tensor& pb = o.parents[1];
    if (pa.requires_grad()) {
      pa.node()->ensure_grad();
      double* ga = pa.grad().data();
      const double* g = o.grad.data();
      const double* bd = pb.data().data();
      // dA = G * B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = g[i * n + j];
          if (gij == 0.0) continue;
          const double* brow = bd + j;  // column j of B, strided
          for (std::size_t l = 0; l < k; ++l) ga[i * k + l] += gij * brow[l * n];
        }
    }
    if (pb.requires_grad()) {
      pb.node()->ensure_grad();
      double* gb = pb.grad().data();
      const double* g = o.grad.data();
      const double* ad = pa.data().data();
      // dB = A^T * G
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l) {
          const double ail = ad[i * k + l];
          if (ail == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[l * n + j] += ail * g[i * n + j];
        }
    }
  });
  double* od = out.data().data();
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t l = 0; l < k; ++l) {
      const double ail = ad[i * k + l];
      if (ail == 0.0) continue;
      const double* brow = bd + l * n;
      double* orow = od + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += ail * brow[j];
    }
  return out;
}

// ---- binary elementwise ops ------------------------------------------------

namespace {

// fwd(a, b) and the partials dfa(a, b, g), dfb(a, b, g) as scalars.
template <class F, class Da, class Db>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, F fwd, Da dfa,
                 Db dfb) {
  const Bcast mode = classify(name, a, b);
  const std::size_t n_elems = a.numel();
  const std::size_t cols = mode == Bcast::row_vector ? a.extent(1) : 0;
  Tensor out = make_op(a.shape(), {a, b},
                       [mode, cols, dfa, dfb](TensorNode& o) {
                         const Tensor& pa = o.parents[0];
                         const Tensor& pb = o.parents[1];
                         const std::size_t n = o.numel();
                         const double* ad = pa.data().data();
                         const double* bd = pb.data().data();
                         if (pa.requires_grad()) {
                           pa.node()->ensure_grad();
                           double* ga = pa.grad().data();
                           for (std::size_t i = 0; i < n; ++i) {
                             const double bv =
                                 mode == Bcast::same ? bd[i] : bd[i % cols];
                             ga[i] += dfa(ad[i], bv, o.grad[i]);
                           }
                         }
                         if (pb.requires_grad()) {
                           pb.node()->ensure_grad();
                           double* gb = pb.grad().data();
                           for (std::size_t i = 0; i < n; ++i) {
                             const double bv =
                                 mode == Bcast::same ? bd[i] : bd[i % cols];
                             const std::size_t bi = mode == Bcast::same ? i : i % cols;
                             gb[bi] += dfb(ad[i], bv, o.grad[i]);
                           }
                         }
                       });
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* od = out.data().data();
  for (std::size_t i = 0; i < n_elems; ++i) {
    const double bv = mode == Bcast::same ? bd[i] : bd[i % cols];
    od[i] = fwd(ad[i], bv);
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double g) { return g; },
      [](double, double, double g) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double g) { return g; },
      [](double, double, double g) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double g) { return g * y; },
      [](double x, double, double g) { return g * x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double v : b.data())
    if (v == 0.0) throw DomainError("div: zero divisor");
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double g) { return g / y; },
      [](double x, double y, double g) { return -g * x / (y * y); });
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
  require_rank2("scale_rows", x);
  if (s.rank() != 1 || s.extent(0) != x.extent(0)) dim_error("scale_rows", x, s);
  const std::size_t m = x.extent(0), n = x.extent(1);
  Tensor out = make_op(x.shape(), {x, s}, [m, n](TensorNode& o) {
    const Tensor& px = o.parents[0];
    const Tensor& ps = o.parents[1];
    if (px.requires_grad()) {
      px.node()->ensure_grad();
      double* gx = px.grad().data();
      const double* sd = ps.data().data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += o.grad[i * n + j] * sd[i];
    }
    if (ps.requires_grad()) {
      ps.node()->ensure_grad();
      double* gs = ps.grad().data();
      const double* xd = px.data().data();
      for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += o.grad[i * n + j] * xd[i * n + j];
        gs[i] += acc;
      }
    }
  });
  const double* xd = x.data().data();
  const double* sd = s.data().data();
  double* od = out.data().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) od[i * n + j] = xd[i * n + j] * sd[i];
  return out;
}

// ---- unary ops ---------------------------------------------------------------

namespace {

// fwd(x) with derivative expressed from input x and output y: dfdx(x, y).
template <class F, class D>
Tensor unary_op(const Tensor& x, F fwd, D dfdx) {
  Tensor out = make_op(x.shape(), {x}, [dfdx](TensorNode& o) {
    const Tensor& px = o.parents[0];
    if (!px.requires_grad()) return;
    px.node()->ensure_grad();
    double* gx = px.grad().data();
    const double* xd = px.data().data();
    const double* yd = o.data.data();
    for (std::size_t i = 0; i < o.numel(); ++i)
      gx[i] += o.grad[i] * dfdx(xd[i], yd[i]);
  });
  const double* xd = x.data().data();
  double* od = out.data().data();
  for (std::size_t i = 0; i < x.numel(); ++i) od[i] = fwd(xd[i]);
  return out;
}

}  // namespace

Tensor neg(const Tensor& x) {
  return unary_op(x, [](double v) { return -v; },
                  [](double, double) { return -1.0; });
}

Tensor add_scalar(const Tensor& x, double c) {
  return unary_op(x, [c](double v) { return v + c; },
                  [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, double c) {
  return unary_op(x, [c](double v) { return v * c; },
                  [c](double, double) { return c; });
}

Tensor tanh(const Tensor& x) {
  return unary_op(x, [](double v) { return std::tanh(v); },
                  [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary_op(x, [](double v) { return std::exp(v); },
                  [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.data())
    if (v <= 0.0)
      throw DomainError("log: non-positive argument " + std::to_string(v));
  return unary_op(x, [](double v) { return std::log(v); },
                  [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x) {
  for (double v : x.data())
    if (v < 0.0) throw DomainError("sqrt: negative argument " + std::to_string(v));
  return unary_op(x, [](double v) { return std::sqrt(v); },
                  [](double, double y) { return 0.5 / y; });
}

Tensor relu(const Tensor& x) {
  return unary_op(x, [](double v) { return v > 0.0 ? v : 0.0; },
                  [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor clamp_min(const Tensor& x, double lo) {
  return unary_op(x, [lo](double v) { return v < lo ? lo : v; },
                  [lo](double v, double) { return v < lo ? 0.0 : 1.0; });
}

// ---- reductions --------------------------------------------------------------

Tensor sum(const Tensor& x) {
  Tensor out = make_op({1}, {x}, [](TensorNode& o) {
    const Tensor& px = o.parents[0];
    if (!px.requires_grad()) return;
    px.node()->ensure_grad();
    for (double& g : px.grad()) g += o.grad[0];
  });
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  out.data()[0] = acc;
  return out;
}

Tensor mean(const Tensor& x) {
  const double inv = 1.0 / static_cast<double>(x.numel());
  return mul_scalar(sum(x), inv);
}

Tensor colsum(const Tensor& x) {
  require_rank2("colsum", x);
  const std::size_t m = x.extent(0), n = x.extent(1);
  Tensor out = make_op({n}, {x}, [m, n](TensorNode& o) {
    const Tensor& px = o.parents[0];
    if (!px.requires_grad()) return;
    px.node()->ensure_grad();
    double* gx = px.grad().data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += o.grad[j];
  });
  const double* xd = x.data().data();
  double* od = out.data().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) od[j] += xd[i * n + j];
  return out;
}

Tensor colmean(const Tensor& x) {
  require_rank2("colmean", x);
  return mul_scalar(colsum(x), 1.0 / static_cast<double>(x.extent(0)));
}

Tensor rowsum(const Tensor& x) {
  require_rank2("rowsum", x);
  const std::size_t m = x.extent(0), n = x.extent(1);
  Tensor out = make_op({m}, {x}, [m, n](TensorNode& o) {
    const Tensor& px = o.parents[0];
    if (!px.requires_grad()) return;
    px.node()->ensure_grad();
    double* gx = px.grad().data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += o.grad[i];
  });
  const double* xd = x.data().data();
  double* od = out.data().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) od[i] += xd[i * n + j];
  return out;
}

Tensor rowmean(const Tensor& x) {
  require_rank2("rowmean", x);
  return mul_scalar(rowsum(x), 1.0 / static_cast<double>(x.extent(1)));
}

// ---- shape ops ---------------------------------------------------------------

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape) {
  if (product(shape) != x.numel())
    throw DimError("reshape: " + shape_str(x.shape()) + " does not reshape to " +
                   shape_str(shape));
  Tensor out = make_op(std::move(shape), {x}, [](TensorNode& o) {
    const Tensor& px = o.parents[0];
    if (!px.requires_grad()) return;
    px.node()->ensure_grad();
    for (std::size_t i = 0; i < o.numel(); ++i) px.grad()[i] += o.grad[i];
  });
  out.data() = x.data();
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank2("concat_cols", a);
  require_rank2("concat_cols", b);
  if (a.extent(0) != b.extent(0)) dim_error("concat_cols", a, b);
  const std::size_t m = a.extent(0), p = a.extent(1), q = b.extent(1);
  Tensor out = make_op({m, p + q}, {a, b}, [m, p, q](TensorNode& o) {
    const Tensor& pa = o.parents[0];
    const Tensor& pb = o.parents[1];
    if (pa.requires_grad()) {
      pa.node()->ensure_grad();
      double* ga = pa.grad().data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < p; ++j) ga[i * p + j] += o.grad[i * (p + q) + j];
    }
    if (pb.requires_grad()) {
      pb.node()->ensure_grad();
      double* gb = pb.grad().data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < q; ++j)
          gb[i * q + j] += o.grad[i * (p + q) + p + j];
    }
  });
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* od = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    std::copy(ad + i * p, ad + (i + 1) * p, od + i * (p + q));
    std::copy(bd + i * q, bd + (i + 1) * q, od + i * (p + q) + p);
  }
  return out;
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  require_rank2("slice_cols", x);
  const std::size_t m = x.extent(0), n = x.extent(1);
  if (begin + count > n || count == 0)
    throw DimError("slice_cols: range [" + std::to_string(begin) + ", " +
                   std::to_string(begin + count) + ") out of " + std::to_string(n) +
                   " columns");
  Tensor out = make_op({m, count}, {x}, [m, n, begin, count](TensorNode& o) {
    const Tensor& px = o.parents[0];
    if (!px.requires_grad()) return;
    px.node()->ensure_grad();
    double* gx = px.grad().data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j)
        gx[i * n + begin + j] += o.grad[i * count + j];
  });
  const double* xd = x.data().data();
  double* od = out.data().data();
  for (std::size_t i = 0; i < m; ++i)
    std::copy(xd + i * n + begin, xd + i * n + begin + count, od + i * count);
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  const std::size_t n = parts[0].rank() == 2 ? parts[0].extent(1) : 0;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_rank2("concat_rows", p);
    if (p.extent(1) != n) dim_error("concat_rows", parts[0], p);
    rows += p.extent(0);
  }
  Tensor out = make_op({rows, n}, parts, [n](TensorNode& o) {
    std::size_t row = 0;
    for (auto& p : o.parents) {
      const std::size_t m = p.extent(0);
      if (p.requires_grad()) {
        p.node()->ensure_grad();
        double* gp = p.grad().data();
        for (std::size_t i = 0; i < m * n; ++i) gp[i] += o.grad[row * n + i];
      }
      row += m;
    }
  });
  double* od = out.data().data();
  std::size_t row = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), od + row * n);
    row += p.extent(0);
  }
  return out;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  require_rank2("slice_rows", x);
  const std::size_t m = x.extent(0), n = x.extent(1);
  if (begin + count > m || count == 0)
    throw DimError("slice_rows: range [" + std::to_string(begin) + ", " +
                   std::to_string(begin + count) + ") out of " + std::to_string(m) +
                   " rows");
  Tensor out = make_op({count, n}, {x}, [n, begin, count](TensorNode& o) {
    const Tensor& px = o.parents[0];
    if (!px.requires_grad()) return;
    px.node()->ensure_grad();
    double* gx = px.grad().data();
    for (std::size_t i = 0; i < count * n; ++i) gx[begin * n + i] += o.grad[i];
  });
  std::copy(x.data().begin() + begin * n, x.data().begin() + (begin + count) * n,
            out.data().begin());
  return out;
}

// ---- masked softmax ----------------------------------------------------------

Tensor softmax_masked(const Tensor& scores, const Tensor& mask) {
  require_rank2("softmax", scores);
  if (scores.shape() != mask.shape()) dim_error("softmax", scores, mask);
  const std::size_t m = scores.extent(0), n = scores.extent(1);
  Tensor out = make_op({m, n}, {scores, mask}, [m, n](TensorNode& o) {
    const Tensor& px = o.parents[0];
    if (!px.requires_grad()) return;
    px.node()->ensure_grad();
    double* gx = px.grad().data();
    const double* y = o.data.data();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += o.grad[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        gx[i * n + j] += y[i * n + j] * (o.grad[i * n + j] - dot);
    }
  });
  const double* xd = scores.data().data();
  const double* md = mask.data().data();
  double* od = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double hi = -HUGE_VAL;
    for (std::size_t j = 0; j < n; ++j)
      if (md[i * n + j] != 0.0) hi = std::max(hi, xd[i * n + j]);
    if (hi == -HUGE_VAL)
      throw ContractError("softmax: row " + std::to_string(i) + " is fully masked");
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (md[i * n + j] != 0.0) {
        od[i * n + j] = std::exp(xd[i * n + j] - hi);
        z += od[i * n + j];
      }
    }
    for (std::size_t j = 0; j < n; ++j)
      if (md[i * n + j] != 0.0) od[i * n + j] /= z;
  }
  return out;
}

// ---- attend_steps --------------------------------------------------------------

Tensor attend_steps(const std::vector<Tensor>& steps, const Tensor& weights) {
  if (steps.empty()) throw ContractError("attend_steps: no steps");
  require_rank2("attend_steps", weights);
  const std::size_t m = steps[0].extent(0);
  const std::size_t f = steps[0].extent(1);
  const std::size_t t_count = steps.size();
  for (const auto& s : steps) {
    require_rank2("attend_steps", s);
    if (s.extent(0) != m || s.extent(1) != f) dim_error("attend_steps", steps[0], s);
  }
  if (weights.extent(0) != m || weights.extent(1) != t_count)
    dim_error("attend_steps", steps[0], weights);

  std::vector<Tensor> parents = steps;
  parents.push_back(weights);
  Tensor out = make_op({m, f}, std::move(parents), [m, f, t_count](TensorNode& o) {
    const Tensor& pw = o.parents[t_count];
    const double* wd = pw.data().data();
    for (std::size_t t = 0; t < t_count; ++t) {
      const Tensor& ps = o.parents[t];
      if (!ps.requires_grad()) continue;
      ps.node()->ensure_grad();
      double* gs = ps.grad().data();
      for (std::size_t i = 0; i < m; ++i) {
        const double w = wd[i * t_count + t];
        if (w == 0.0) continue;
        for (std::size_t j = 0; j < f; ++j) gs[i * f + j] += o.grad[i * f + j] * w;
      }
    }
    if (pw.requires_grad()) {
      pw.node()->ensure_grad();
      double* gw = pw.grad().data();
      for (std::size_t t = 0; t < t_count; ++t) {
        const double* sd = o.parents[t].data().data();
        for (std::size_t i = 0; i < m; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < f; ++j) acc += o.grad[i * f + j] * sd[i * f + j];
          gw[i * t_count + t] += acc;
        }
      }
    }
  });
  double* od = out.data().data();
  const double* wd = weights.data().data();
  for (std::size_t t = 0; t < t_count; ++t) {
    const double* sd = steps[t].data().data();
    for (std::size_t i = 0; i < m; ++i) {
      const double w = wd[i * t_count + t];
      if (w == 0.0) continue;
      for (std::size_t j = 0; j < f; ++j) od[i * f + j] += w * sd[i * f + j];
    }
  }
  return out;
}

// ---- backward ------------------------------------------------------------------

void backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw ContractError("backward: loss must be a scalar, got shape " +
                        shape_str(loss.shape()));
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS; `order` ends up topologically sorted
  // (parents before children), so the reverse visit is the backward order.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  struct Frame {
    TensorNode* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack{{loss.node(), 0}};
  seen.insert(loss.node());
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next_parent < top.node->parents.size()) {
      TensorNode* p = top.node->parents[top.next_parent++].node();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(top.node);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backward) {
      n->ensure_grad();
      n->backward(*n);
    }
  }
}

// ---- grad_check -------------------------------------------------------------------

double grad_check(const std::function<Tensor(Tensor&)>& f, Tensor& x, double eps) {
  if (eps < 1e-7 || eps > 1e-4)
    throw ContractError("grad_check: eps " + std::to_string(eps) +
                        " outside [1e-7, 1e-4]");
  const bool restore_rg = x.requires_grad();
  x.set_requires_grad(true);
  x.zero_grad();
  Tensor y = f(x);
  if (y.numel() != 1) throw ContractError("grad_check: f must return a scalar");
  backward(y);
  std::vector<double> analytic = x.grad();
  if (analytic.empty()) analytic.assign(x.numel(), 0.0);

  double max_rel = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + eps;
    const double up = f(x).value();
    x.data()[i] = saved - eps;
    const double down = f(x).value();
    x.data()[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    if (!std::isfinite(numeric) || !std::isfinite(analytic[i]))
      throw NumericError("grad_check: non-finite gradient at coordinate " +
                         std::to_string(i));
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::abs(analytic[i] - numeric) / denom);
  }
  x.set_requires_grad(restore_rg);
  return max_rel;
}

}  // namespace emorec
