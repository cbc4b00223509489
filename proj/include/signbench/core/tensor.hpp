#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "signbench/core/error.hpp"

namespace signbench {

using Shape = std::vector<int64_t>;

inline int64_t numel_of(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

struct TensorData {
  Shape shape;
  std::vector<double> v;  // values, row-major
  std::vector<double> g;  // gradient; empty until a backward pass touches it
  bool requires_grad = false;
};

// Value-semantic handle onto a shared buffer. Ops live on Tape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorData> d) : d_(std::move(d)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto d = std::make_shared<TensorData>();
    d->shape = std::move(shape);
    d->v.assign(static_cast<size_t>(numel_of(d->shape)), 0.0);
    d->requires_grad = requires_grad;
    return Tensor(d);
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& x : t.values()) x = value;
    return t;
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return full({1}, value, requires_grad);
  }

  static Tensor from(std::vector<double> values, Shape shape,
                     bool requires_grad = false) {
    if (numel_of(shape) != static_cast<int64_t>(values.size()))
      throw ShapeError("tensor literal: " + shape_str(shape) + " needs " +
                       std::to_string(numel_of(shape)) + " values, got " +
                       std::to_string(values.size()));
    auto d = std::make_shared<TensorData>();
    d->shape = std::move(shape);
    d->v = std::move(values);
    d->requires_grad = requires_grad;
    return Tensor(d);
  }

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const { return d_->shape; }
  int64_t dim(size_t i) const { return d_->shape[i]; }
  size_t rank() const { return d_->shape.size(); }
  int64_t numel() const { return static_cast<int64_t>(d_->v.size()); }
  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool rg) { d_->requires_grad = rg; }

  std::vector<double>& values() { return d_->v; }
  const std::vector<double>& values() const { return d_->v; }
  double item() const {
    if (numel() != 1) throw ShapeError("item(): tensor " + shape_str(shape()) + " is not scalar");
    return d_->v[0];
  }

  bool has_grad() const { return !d_->g.empty(); }
  std::vector<double>& grad() {
    if (d_->g.size() != d_->v.size()) d_->g.assign(d_->v.size(), 0.0);
    return d_->g;
  }
  const std::vector<double>& grad() const { return d_->g; }
  void zero_grad() { if (!d_->g.empty()) std::fill(d_->g.begin(), d_->g.end(), 0.0); }
  void drop_grad() { d_->g.clear(); }

  std::shared_ptr<TensorData> data() const { return d_; }

 private:
  std::shared_ptr<TensorData> d_;
};

namespace detail {

// Padded strides for numpy-style broadcasting; stride 0 on broadcast dims.
struct BcastPlan {
  Shape out_shape;
  std::vector<int64_t> sa, sb;  // strides into a and b per out dim
  int64_t out_numel = 0;
};

inline BcastPlan broadcast_plan(const Shape& a, const Shape& b) {
  size_t ra = a.size(), rb = b.size(), r = std::max(ra, rb);
  BcastPlan p;
  p.out_shape.resize(r);
  p.sa.resize(r);
  p.sb.resize(r);
  std::vector<int64_t> stra(r, 0), strb(r, 0);
  // natural strides, right-aligned
  int64_t acc = 1;
  for (size_t i = 0; i < ra; ++i) {
    stra[r - 1 - i] = acc;
    acc *= a[ra - 1 - i];
  }
  acc = 1;
  for (size_t i = 0; i < rb; ++i) {
    strb[r - 1 - i] = acc;
    acc *= b[rb - 1 - i];
  }
  for (size_t i = 0; i < r; ++i) {
    int64_t da = (i + ra >= r) ? a[i + ra - r] : 1;
    int64_t db = (i + rb >= r) ? b[i + rb - r] : 1;
    if (da != db && da != 1 && db != 1)
      throw ShapeError("broadcast mismatch: " + shape_str(a) + " vs " + shape_str(b));
    p.out_shape[i] = std::max(da, db);
    p.sa[i] = (da == 1 && p.out_shape[i] != 1) ? 0 : stra[i];
    p.sb[i] = (db == 1 && p.out_shape[i] != 1) ? 0 : strb[i];
  }
  p.out_numel = numel_of(p.out_shape);
  return p;
}

// Walk all out indices, invoking fn(out_linear, a_offset, b_offset).
template <typename F>
inline void bcast_walk(const BcastPlan& p, F&& fn) {
  size_t r = p.out_shape.size();
  std::vector<int64_t> idx(r, 0);
  int64_t oa = 0, ob = 0;
  for (int64_t o = 0; o < p.out_numel; ++o) {
    fn(o, oa, ob);
    for (size_t i = r; i-- > 0;) {
      idx[i]++;
      oa += p.sa[i];
      ob += p.sb[i];
      if (idx[i] < p.out_shape[i]) break;
      oa -= p.sa[i] * p.out_shape[i];
      ob -= p.sb[i] * p.out_shape[i];
      idx[i] = 0;
    }
  }
}

}  // namespace detail

enum class Pad { kSame, kValid };

// Records executed ops so adjoints can be replayed in reverse. One tape per
// training step; tapes on disjoint data may run concurrently.
class Tape {
 public:
  Tensor add(const Tensor& a, const Tensor& b) {
    return binary(a, b, [](double x, double y) { return x + y; },
                  [](double, double, double gz, double& ga, double& gb) {
                    ga += gz;
                    gb += gz;
                  });
  }

  Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(a, b, [](double x, double y) { return x - y; },
                  [](double, double, double gz, double& ga, double& gb) {
                    ga += gz;
                    gb -= gz;
                  });
  }

  Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(a, b, [](double x, double y) { return x * y; },
                  [](double x, double y, double gz, double& ga, double& gb) {
                    ga += gz * y;
                    gb += gz * x;
                  });
  }

  Tensor div(const Tensor& a, const Tensor& b) {
    return binary(a, b, [](double x, double y) { return x / y; },
                  [](double x, double y, double gz, double& ga, double& gb) {
                    ga += gz / y;
                    gb -= gz * x / (y * y);
                  });
  }

  Tensor neg(const Tensor& a) { return scale(a, -1.0); }

  Tensor scale(const Tensor& a, double c) {
    return unary(a, [c](double x) { return c * x; },
                 [c](double, double, double gz) { return c * gz; });
  }

  Tensor add_const(const Tensor& a, double c) {
    return unary(a, [c](double x) { return x + c; },
                 [](double, double, double gz) { return gz; });
  }

  Tensor exp(const Tensor& a) {
    return unary(a, [](double x) { return std::exp(x); },
                 [](double, double y, double gz) { return gz * y; });
  }

  Tensor log(const Tensor& a) {
    return unary(a, [](double x) { return std::log(x); },
                 [](double x, double, double gz) { return gz / x; });
  }

  Tensor sqrt(const Tensor& a) {
    return unary(a, [](double x) { return std::sqrt(x); },
                 [](double, double y, double gz) { return gz * 0.5 / y; });
  }

  Tensor abs(const Tensor& a) {
    return unary(a, [](double x) { return std::fabs(x); },
                 [](double x, double, double gz) {
                   return x > 0 ? gz : (x < 0 ? -gz : 0.0);
                 });
  }

  Tensor sigmoid(const Tensor& a) {
    return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                 [](double, double y, double gz) { return gz * y * (1.0 - y); });
  }

  Tensor tanh(const Tensor& a) {
    return unary(a, [](double x) { return std::tanh(x); },
                 [](double, double y, double gz) { return gz * (1.0 - y * y); });
  }

  Tensor relu(const Tensor& a) {
    return unary(a, [](double x) { return x > 0 ? x : 0.0; },
                 [](double x, double, double gz) { return x > 0 ? gz : 0.0; });
  }

  Tensor silu(const Tensor& a) {
    return unary(a, [](double x) { return x / (1.0 + std::exp(-x)); },
                 [](double x, double, double gz) {
                   double s = 1.0 / (1.0 + std::exp(-x));
                   return gz * s * (1.0 + x * (1.0 - s));
                 });
  }

  Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
      throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor z = Tensor::zeros({m, n});
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    double* pz = z.values().data();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t l = 0; l < k; ++l) {
        double av = pa[i * k + l];
        if (av == 0.0) continue;
        const double* brow = pb + l * n;
        double* zrow = pz + i * n;
        for (int64_t j = 0; j < n; ++j) zrow[j] += av * brow[j];
      }
    record(z, {a, b}, [a, b, z, m, k, n]() {
      const auto& gz = z.data()->g;
      if (a.requires_grad()) {
        auto& ga = grad_buf(a);
        const double* pb2 = b.values().data();
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < n; ++j) {
            double gv = gz[i * n + j];
            if (gv == 0.0) continue;
            const double* brow = pb2 + 0;
            for (int64_t l = 0; l < k; ++l) ga[i * k + l] += gv * brow[l * n + j];
          }
      }
      if (b.requires_grad()) {
        auto& gb = grad_buf(b);
        const double* pa2 = a.values().data();
        for (int64_t l = 0; l < k; ++l)
          for (int64_t i = 0; i < m; ++i) {
            double av = pa2[i * k + l];
            if (av == 0.0) continue;
            for (int64_t j = 0; j < n; ++j) gb[l * n + j] += av * gz[i * n + j];
          }
      }
    });
    return z;
  }

  Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose: rank-2 required, got " + shape_str(a.shape()));
    int64_t m = a.dim(0), n = a.dim(1);
    Tensor z = Tensor::zeros({n, m});
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) z.values()[j * m + i] = a.values()[i * n + j];
    record(z, {a}, [a, z, m, n]() {
      if (!a.requires_grad()) return;
      auto& ga = grad_buf(a);
      const auto& gz = z.data()->g;
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) ga[i * n + j] += gz[j * m + i];
    });
    return z;
  }

  // Swaps the first two axes of a rank >= 2 tensor.
  Tensor swap01(const Tensor& a) {
    if (a.rank() < 2) throw ShapeError("swap01: rank >= 2 required, got " + shape_str(a.shape()));
    int64_t d0 = a.dim(0), d1 = a.dim(1);
    int64_t inner = a.numel() / (d0 * d1);
    Shape out = a.shape();
    std::swap(out[0], out[1]);
    Tensor z = Tensor::zeros(out);
    for (int64_t i = 0; i < d0; ++i)
      for (int64_t j = 0; j < d1; ++j)
        std::copy_n(a.values().data() + (i * d1 + j) * inner, inner,
                    z.values().data() + (j * d0 + i) * inner);
    record(z, {a}, [a, z, d0, d1, inner]() {
      if (!a.requires_grad()) return;
      auto& ga = grad_buf(a);
      const auto& gz = z.data()->g;
      for (int64_t i = 0; i < d0; ++i)
        for (int64_t j = 0; j < d1; ++j)
          for (int64_t q = 0; q < inner; ++q)
            ga[(i * d1 + j) * inner + q] += gz[(j * d0 + i) * inner + q];
    });
    return z;
  }

  Tensor reshape(const Tensor& a, Shape shape) {
    if (numel_of(shape) != a.numel())
      throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
    Tensor z = Tensor::from(a.values(), std::move(shape));
    record(z, {a}, [a, z]() {
      if (!a.requires_grad()) return;
      auto& ga = grad_buf(a);
      const auto& gz = z.data()->g;
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += gz[i];
    });
    return z;
  }

  Tensor slice(const Tensor& a, size_t axis, int64_t start, int64_t len) {
    if (axis >= a.rank()) throw ShapeError("slice: axis out of range for " + shape_str(a.shape()));
    if (start < 0 || len < 0 || start + len > a.dim(axis))
      throw ShapeError("slice: [" + std::to_string(start) + "," + std::to_string(start + len) +
                       ") out of bounds for axis " + std::to_string(axis) + " of " +
                       shape_str(a.shape()));
    Shape out = a.shape();
    out[axis] = len;
    int64_t outer = 1, inner = 1;
    for (size_t i = 0; i < axis; ++i) outer *= a.dim(i);
    for (size_t i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);
    int64_t in_axis = a.dim(axis);
    Tensor z = Tensor::zeros(out);
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t i = 0; i < len; ++i)
        for (int64_t q = 0; q < inner; ++q)
          z.values()[(o * len + i) * inner + q] = a.values()[(o * in_axis + start + i) * inner + q];
    record(z, {a}, [a, z, outer, inner, in_axis, start, len]() {
      if (!a.requires_grad()) return;
      auto& ga = grad_buf(a);
      const auto& gz = z.data()->g;
      for (int64_t o = 0; o < outer; ++o)
        for (int64_t i = 0; i < len; ++i)
          for (int64_t q = 0; q < inner; ++q)
            ga[(o * in_axis + start + i) * inner + q] += gz[(o * len + i) * inner + q];
    });
    return z;
  }

  Tensor concat(const std::vector<Tensor>& parts, size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& ref = parts[0].shape();
    if (axis >= ref.size()) throw ShapeError("concat: axis out of range");
    Shape out = ref;
    int64_t total = 0;
    for (const Tensor& p : parts) {
      if (p.rank() != ref.size()) throw ShapeError("concat: rank mismatch");
      for (size_t i = 0; i < ref.size(); ++i)
        if (i != axis && p.dim(i) != ref[i])
          throw ShapeError("concat: " + shape_str(p.shape()) + " vs " + shape_str(ref));
      total += p.dim(axis);
    }
    out[axis] = total;
    int64_t outer = 1, inner = 1;
    for (size_t i = 0; i < axis; ++i) outer *= ref[i];
    for (size_t i = axis + 1; i < ref.size(); ++i) inner *= ref[i];
    Tensor z = Tensor::zeros(out);
    int64_t off = 0;
    for (const Tensor& p : parts) {
      int64_t la = p.dim(axis);
      for (int64_t o = 0; o < outer; ++o)
        for (int64_t i = 0; i < la; ++i)
          for (int64_t q = 0; q < inner; ++q)
            z.values()[(o * total + off + i) * inner + q] = p.values()[(o * la + i) * inner + q];
      off += la;
    }
    std::vector<Tensor> inputs = parts;
    record(z, parts, [inputs, z, outer, inner, total]() {
      const auto& gz = z.data()->g;
      int64_t off2 = 0;
      for (const Tensor& p : inputs) {
        int64_t la2 = p.numel() / (outer * inner);
        if (p.requires_grad()) {
          auto& gp = grad_buf(p);
          for (int64_t o = 0; o < outer; ++o)
            for (int64_t i = 0; i < la2; ++i)
              for (int64_t q = 0; q < inner; ++q)
                gp[(o * la2 + i) * inner + q] += gz[(o * total + off2 + i) * inner + q];
        }
        off2 += la2;
      }
    });
    return z;
  }

  Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double x : a.values()) s += x;
    Tensor z = Tensor::scalar(s);
    record(z, {a}, [a, z]() {
      if (!a.requires_grad()) return;
      auto& ga = grad_buf(a);
      double gz = z.data()->g[0];
      for (double& g : ga) g += gz;
    });
    return z;
  }

  Tensor mean_all(const Tensor& a) {
    return scale(sum_all(a), 1.0 / static_cast<double>(a.numel()));
  }

  // Reduces over `axis`, removing it from the shape.
  Tensor sum_axis(const Tensor& a, size_t axis) {
    if (axis >= a.rank()) throw ShapeError("sum_axis: axis out of range for " + shape_str(a.shape()));
    Shape out;
    for (size_t i = 0; i < a.rank(); ++i)
      if (i != axis) out.push_back(a.dim(i));
    if (out.empty()) out.push_back(1);
    int64_t outer = 1, inner = 1, n = a.dim(axis);
    for (size_t i = 0; i < axis; ++i) outer *= a.dim(i);
    for (size_t i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);
    Tensor z = Tensor::zeros(out);
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t i = 0; i < n; ++i)
        for (int64_t q = 0; q < inner; ++q)
          z.values()[o * inner + q] += a.values()[(o * n + i) * inner + q];
    record(z, {a}, [a, z, outer, inner, n]() {
      if (!a.requires_grad()) return;
      auto& ga = grad_buf(a);
      const auto& gz = z.data()->g;
      for (int64_t o = 0; o < outer; ++o)
        for (int64_t i = 0; i < n; ++i)
          for (int64_t q = 0; q < inner; ++q)
            ga[(o * n + i) * inner + q] += gz[o * inner + q];
    });
    return z;
  }

  Tensor mean_axis(const Tensor& a, size_t axis) {
    return scale(sum_axis(a, axis), 1.0 / static_cast<double>(a.dim(axis)));
  }

  // Numerically stabilized softmax over the last axis.
  Tensor softmax(const Tensor& a) {
    int64_t n = last_dim(a, "softmax");
    int64_t rows = a.numel() / n;
    Tensor z = Tensor::zeros(a.shape());
    for (int64_t r = 0; r < rows; ++r) {
      const double* x = a.values().data() + r * n;
      double* y = z.values().data() + r * n;
      double mx = x[0];
      for (int64_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
      double s = 0.0;
      for (int64_t i = 0; i < n; ++i) s += (y[i] = std::exp(x[i] - mx));
      for (int64_t i = 0; i < n; ++i) y[i] /= s;
    }
    record(z, {a}, [a, z, rows, n]() {
      if (!a.requires_grad()) return;
      auto& ga = grad_buf(a);
      const auto& gz = z.data()->g;
      const auto& y = z.values();
      for (int64_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (int64_t i = 0; i < n; ++i) dot += gz[r * n + i] * y[r * n + i];
        for (int64_t i = 0; i < n; ++i)
          ga[r * n + i] += y[r * n + i] * (gz[r * n + i] - dot);
      }
    });
    return z;
  }

  Tensor log_softmax(const Tensor& a) {
    int64_t n = last_dim(a, "log_softmax");
    int64_t rows = a.numel() / n;
    Tensor z = Tensor::zeros(a.shape());
    for (int64_t r = 0; r < rows; ++r) {
      const double* x = a.values().data() + r * n;
      double* y = z.values().data() + r * n;
      double mx = x[0];
      for (int64_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
      double s = 0.0;
      for (int64_t i = 0; i < n; ++i) s += std::exp(x[i] - mx);
      double lse = mx + std::log(s);
      for (int64_t i = 0; i < n; ++i) y[i] = x[i] - lse;
    }
    record(z, {a}, [a, z, rows, n]() {
      if (!a.requires_grad()) return;
      auto& ga = grad_buf(a);
      const auto& gz = z.data()->g;
      const auto& y = z.values();
      for (int64_t r = 0; r < rows; ++r) {
        double gsum = 0.0;
        for (int64_t i = 0; i < n; ++i) gsum += gz[r * n + i];
        for (int64_t i = 0; i < n; ++i)
          ga[r * n + i] += gz[r * n + i] - std::exp(y[r * n + i]) * gsum;
      }
    });
    return z;
  }

  // Normalizes the last axis; no affine parameters (compose mul/add for those).
  // A constant vector maps to zeros: the centered numerator vanishes and the
  // epsilon keeps the denominator finite.
  Tensor layer_norm(const Tensor& a, double eps = 1e-5) {
    int64_t n = last_dim(a, "layer_norm");
    int64_t rows = a.numel() / n;
    Tensor z = Tensor::zeros(a.shape());
    std::vector<double> inv_sd(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
      const double* x = a.values().data() + r * n;
      double* y = z.values().data() + r * n;
      double mu = 0.0;
      for (int64_t i = 0; i < n; ++i) mu += x[i];
      mu /= static_cast<double>(n);
      double var = 0.0;
      for (int64_t i = 0; i < n; ++i) var += (x[i] - mu) * (x[i] - mu);
      var /= static_cast<double>(n);
      double is = 1.0 / std::sqrt(var + eps);
      inv_sd[static_cast<size_t>(r)] = is;
      for (int64_t i = 0; i < n; ++i) y[i] = (x[i] - mu) * is;
    }
    record(z, {a}, [a, z, rows, n, inv_sd]() {
      if (!a.requires_grad()) return;
      auto& ga = grad_buf(a);
      const auto& gz = z.data()->g;
      const auto& y = z.values();
      for (int64_t r = 0; r < rows; ++r) {
        double gmean = 0.0, gydot = 0.0;
        for (int64_t i = 0; i < n; ++i) {
          gmean += gz[r * n + i];
          gydot += gz[r * n + i] * y[r * n + i];
        }
        gmean /= static_cast<double>(n);
        gydot /= static_cast<double>(n);
        double is = inv_sd[static_cast<size_t>(r)];
        for (int64_t i = 0; i < n; ++i)
          ga[r * n + i] += is * (gz[r * n + i] - gmean - y[r * n + i] * gydot);
      }
    });
    return z;
  }

  // Depthwise temporal convolution on a T x C sequence. kSame keeps length T
  // (odd kernel required); kValid yields T - K + 1.
  Tensor conv1d_depthwise(const Tensor& x, const Tensor& kernel, Pad pad = Pad::kSame) {
    if (x.rank() != 2 || kernel.rank() != 2 || kernel.dim(1) != x.dim(1))
      throw ShapeError("conv1d_depthwise: x " + shape_str(x.shape()) + " kernel " +
                       shape_str(kernel.shape()));
    int64_t T = x.dim(0), C = x.dim(1), K = kernel.dim(0);
    if (pad == Pad::kSame && K % 2 == 0)
      throw ConfigError("conv1d_depthwise: same-padding requires odd kernel, got " + std::to_string(K));
    if (pad == Pad::kValid && K > T)
      throw ConfigError("conv1d_depthwise: valid padding needs K <= T (" + std::to_string(K) +
                        " > " + std::to_string(T) + ")");
    int64_t off = (pad == Pad::kSame) ? K / 2 : 0;
    int64_t To = (pad == Pad::kSame) ? T : T - K + 1;
    Tensor z = Tensor::zeros({To, C});
    for (int64_t t = 0; t < To; ++t)
      for (int64_t k = 0; k < K; ++k) {
        int64_t src = t + k - off;
        if (src < 0 || src >= T) continue;
        const double* xr = x.values().data() + src * C;
        const double* kr = kernel.values().data() + k * C;
        double* zr = z.values().data() + t * C;
        for (int64_t c = 0; c < C; ++c) zr[c] += xr[c] * kr[c];
      }
    record(z, {x, kernel}, [x, kernel, z, T, C, K, off, To]() {
      const auto& gz = z.data()->g;
      if (x.requires_grad()) {
        auto& gx = grad_buf(x);
        for (int64_t t = 0; t < To; ++t)
          for (int64_t k = 0; k < K; ++k) {
            int64_t src = t + k - off;
            if (src < 0 || src >= T) continue;
            const double* kr = kernel.values().data() + k * C;
            for (int64_t c = 0; c < C; ++c) gx[src * C + c] += gz[t * C + c] * kr[c];
          }
      }
      if (kernel.requires_grad()) {
        auto& gk = grad_buf(kernel);
        for (int64_t t = 0; t < To; ++t)
          for (int64_t k = 0; k < K; ++k) {
            int64_t src = t + k - off;
            if (src < 0 || src >= T) continue;
            const double* xr = x.values().data() + src * C;
            for (int64_t c = 0; c < C; ++c) gk[k * C + c] += gz[t * C + c] * xr[c];
          }
      }
    });
    return z;
  }

  // Pointwise (1x1) convolution over channels is a matrix product.
  Tensor conv1d_pointwise(const Tensor& x, const Tensor& w) { return matmul(x, w); }

  // Mean cross-entropy over rows of logits against integer labels.
  Tensor cross_entropy_mean(const Tensor& logits, const std::vector<int64_t>& labels) {
    if (logits.rank() != 2 || static_cast<int64_t>(labels.size()) != logits.dim(0))
      throw ShapeError("cross_entropy: logits " + shape_str(logits.shape()) + " labels " +
                       std::to_string(labels.size()));
    int64_t B = logits.dim(0), V = logits.dim(1);
    for (int64_t b = 0; b < B; ++b)
      if (labels[static_cast<size_t>(b)] < 0 || labels[static_cast<size_t>(b)] >= V)
        throw LabelError("cross_entropy: label " + std::to_string(labels[static_cast<size_t>(b)]) +
                         " outside vocabulary of " + std::to_string(V));
    double total = 0.0;
    std::vector<double> probs(static_cast<size_t>(B * V));
    for (int64_t b = 0; b < B; ++b) {
      const double* x = logits.values().data() + b * V;
      double mx = x[0];
      for (int64_t i = 1; i < V; ++i) mx = std::max(mx, x[i]);
      double s = 0.0;
      for (int64_t i = 0; i < V; ++i) s += (probs[b * V + i] = std::exp(x[i] - mx));
      for (int64_t i = 0; i < V; ++i) probs[b * V + i] /= s;
      total += mx + std::log(s) - x[labels[static_cast<size_t>(b)]];
    }
    Tensor z = Tensor::scalar(total / static_cast<double>(B));
    record(z, {logits}, [logits, z, labels, probs, B, V]() {
      if (!logits.requires_grad()) return;
      auto& gl = grad_buf(logits);
      double gz = z.data()->g[0] / static_cast<double>(B);
      for (int64_t b = 0; b < B; ++b) {
        for (int64_t i = 0; i < V; ++i) gl[b * V + i] += gz * probs[b * V + i];
        gl[b * V + labels[static_cast<size_t>(b)]] -= gz;
      }
    });
    return z;
  }

  // Row lookup with scatter-add backward into the table.
  Tensor embedding(const Tensor& table, const std::vector<int64_t>& ids) {
    if (table.rank() != 2) throw ShapeError("embedding: table " + shape_str(table.shape()));
    int64_t V = table.dim(0), D = table.dim(1);
    for (int64_t id : ids)
      if (id < 0 || id >= V)
        throw LabelError("embedding: id " + std::to_string(id) + " outside table of " + std::to_string(V));
    Tensor z = Tensor::zeros({static_cast<int64_t>(ids.size()), D});
    for (size_t i = 0; i < ids.size(); ++i)
      std::copy_n(table.values().data() + ids[i] * D, D, z.values().data() + static_cast<int64_t>(i) * D);
    record(z, {table}, [table, z, ids, D]() {
      if (!table.requires_grad()) return;
      auto& gt = grad_buf(table);
      const auto& gz = z.data()->g;
      for (size_t i = 0; i < ids.size(); ++i)
        for (int64_t d = 0; d < D; ++d) gt[ids[i] * D + d] += gz[static_cast<int64_t>(i) * D + d];
    });
    return z;
  }

  // Reverse-mode pass. Populates grad for every reachable requires_grad tensor.
  void backward(const Tensor& loss) {
    if (loss.numel() != 1)
      throw ContractError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    loss.data()->g.assign(1, 1.0);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

  size_t size() const { return ops_.size(); }
  void clear() { ops_.clear(); }

 private:
  static std::vector<double>& grad_buf(const Tensor& t) {
    auto& d = *t.data();
    if (d.g.size() != d.v.size()) d.g.assign(d.v.size(), 0.0);
    return d.g;
  }

  static int64_t last_dim(const Tensor& a, const char* op) {
    if (a.rank() == 0 || a.dim(a.rank() - 1) < 1)
      throw ShapeError(std::string(op) + ": empty last axis in " + shape_str(a.shape()));
    return a.dim(a.rank() - 1);
  }

  void record(Tensor& result, const std::vector<Tensor>& inputs, std::function<void()> back) {
    bool needs = false;
    for (const Tensor& t : inputs) needs = needs || t.requires_grad();
    if (!needs) return;
    result.set_requires_grad(true);
    ops_.push_back(std::move(back));
  }

  template <typename FwdFn, typename BackFn>
  Tensor binary(const Tensor& a, const Tensor& b, FwdFn fwd, BackFn back) {
    if (a.shape() == b.shape()) {
      Tensor z = Tensor::zeros(a.shape());
      for (int64_t i = 0; i < a.numel(); ++i) z.values()[i] = fwd(a.values()[i], b.values()[i]);
      record(z, {a, b}, [a, b, z, back]() {
        const auto& gz = z.data()->g;
        bool ga_on = a.requires_grad(), gb_on = b.requires_grad();
        double sink = 0.0;
        auto* ga = ga_on ? &grad_buf(a) : nullptr;
        auto* gb = gb_on ? &grad_buf(b) : nullptr;
        for (int64_t i = 0; i < z.numel(); ++i) {
          double da = 0.0, db = 0.0;
          back(a.values()[i], b.values()[i], gz[i], da, db);
          if (ga_on) (*ga)[i] += da; else sink += da;
          if (gb_on) (*gb)[i] += db; else sink += db;
        }
        (void)sink;
      });
      return z;
    }
    detail::BcastPlan plan = detail::broadcast_plan(a.shape(), b.shape());
    Tensor z = Tensor::zeros(plan.out_shape);
    detail::bcast_walk(plan, [&](int64_t o, int64_t oa, int64_t ob) {
      z.values()[o] = fwd(a.values()[oa], b.values()[ob]);
    });
    record(z, {a, b}, [a, b, z, plan, back]() {
      const auto& gz = z.data()->g;
      bool ga_on = a.requires_grad(), gb_on = b.requires_grad();
      auto* ga = ga_on ? &grad_buf(a) : nullptr;
      auto* gb = gb_on ? &grad_buf(b) : nullptr;
      detail::bcast_walk(plan, [&](int64_t o, int64_t oa, int64_t ob) {
        double da = 0.0, db = 0.0;
        back(a.values()[oa], b.values()[ob], gz[o], da, db);
        if (ga_on) (*ga)[oa] += da;
        if (gb_on) (*gb)[ob] += db;
      });
    });
    return z;
  }

  template <typename FwdFn, typename BackFn>
  Tensor unary(const Tensor& a, FwdFn fwd, BackFn back) {
    Tensor z = Tensor::zeros(a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) z.values()[i] = fwd(a.values()[i]);
    record(z, {a}, [a, z, back]() {
      if (!a.requires_grad()) return;
      auto& ga = grad_buf(a);
      const auto& gz = z.data()->g;
      for (int64_t i = 0; i < z.numel(); ++i) ga[i] += back(a.values()[i], z.values()[i], gz[i]);
    });
    return z;
  }

  std::vector<std::function<void()>> ops_;
};

}  // namespace signbench
