#include "rarenet/autodiff.hpp"

#include "rarenet/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rarenet {

std::string shape_string(Index rows, Index cols) {
  return "[" + std::to_string(rows) + " x " + std::to_string(cols) + "]";
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("expected a scalar, got " +
                     shape_string(v.rows(), v.cols()));
  }
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  records_.push_back({std::move(value), Matrix(), false, nullptr});
  return Var(this, records_.size() - 1);
}

Var Tape::variable(Matrix value) {
  records_.push_back({std::move(value), Matrix(), true, nullptr});
  return Var(this, records_.size() - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs,
                 BackwardFn backward) {
  return record(std::move(value),
                std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Matrix value, std::span<const Var> inputs,
                 BackwardFn backward) {
  bool needs = false;
  for (Var in : inputs) {
    if (in.tape() != this) {
      throw std::invalid_argument("op mixes records from different tapes");
    }
    needs = needs || requires_grad(in);
  }
  records_.push_back(
      {std::move(value), Matrix(), needs, needs ? std::move(backward) : nullptr});
  return Var(this, records_.size() - 1);
}

void Tape::accumulate(Var v, const Matrix& g) {
  Record& r = records_[v.id()];
  if (!r.requires_grad) return;
  if (g.rows() != r.value.rows() || g.cols() != r.value.cols()) {
    throw ShapeError("gradient " + shape_string(g.rows(), g.cols()) +
                     " does not match value " +
                     shape_string(r.value.rows(), r.value.cols()));
  }
  if (r.grad.size() == 0) {
    r.grad = g;
  } else {
    r.grad += g;
  }
}

void Tape::accumulate(Var v, Matrix&& g) {
  Record& r = records_[v.id()];
  if (!r.requires_grad) return;
  if (r.grad.size() == 0 && g.rows() == r.value.rows() && g.cols() == r.value.cols()) {
    r.grad = std::move(g);
    return;
  }
  accumulate(v, static_cast<const Matrix&>(g));
}

void Tape::backward(Var root) {
  const Matrix& rv = value(root);
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw ShapeError("backward root must be scalar, got " +
                     shape_string(rv.rows(), rv.cols()));
  }
  for (Record& r : records_) r.grad.resize(0, 0);
  if (!requires_grad(root)) return;
  records_[root.id()].grad = Matrix::Ones(1, 1);
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Record& r = records_[i];
    if (r.backward && r.grad.size() != 0) r.backward(*this, r.value, r.grad);
  }
}

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw std::invalid_argument("uninitialised Var");
  return *a.tape();
}

Index broadcast_dim(Index a, Index b, const Matrix& x, const Matrix& y,
                    const char* op) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  throw ShapeError(std::string(op) + ": cannot broadcast " +
                   shape_string(x.rows(), x.cols()) + " with " +
                   shape_string(y.rows(), y.cols()));
}

Matrix expand(const Matrix& m, Index rows, Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  if (m.rows() == 1 && m.cols() == 1) return Matrix::Constant(rows, cols, m(0, 0));
  if (m.rows() == 1) return m.replicate(rows, 1);
  return m.replicate(1, cols);
}

Matrix reduce_to(const Matrix& g, Index rows, Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  if (rows == 1 && cols == 1) return Matrix::Constant(1, 1, g.sum());
  if (rows == 1) return g.colwise().sum();
  return g.rowwise().sum();
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_string(a.rows(), a.cols()) + " vs " +
                     shape_string(b.rows(), b.cols()));
  }
}

void check_segments(std::span<const Index> segments, Index rows, Index count,
                    const char* op) {
  if (static_cast<Index>(segments.size()) != rows) {
    throw ShapeError(std::string(op) + ": " + std::to_string(segments.size()) +
                     " segment ids for " + std::to_string(rows) + " rows");
  }
  for (Index s : segments) {
    if (s < 0 || s >= count) {
      throw std::out_of_range(std::string(op) + ": segment id " +
                              std::to_string(s) + " outside [0, " +
                              std::to_string(count) + ")");
    }
  }
}

template <typename F, typename D>
Var pointwise(Var a, F f, D df) {
  Tape& t = tape_of(a);
  Matrix out = a.value().unaryExpr(f);
  return t.record(std::move(out), {a},
                  [a, df](Tape& t, const Matrix& out, const Matrix& g) {
                    Matrix d(g.rows(), g.cols());
                    const Matrix& x = t.value(a);
                    for (Index i = 0; i < g.size(); ++i) {
                      d.data()[i] = g.data()[i] * df(x.data()[i], out.data()[i]);
                    }
                    t.accumulate(a, d);
                  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

constexpr double kDenominatorFloor = 1e-12;

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  if (x.cols() != y.rows()) {
    throw ShapeError("matmul: shape mismatch " +
                     shape_string(x.rows(), x.cols()) + " * " +
                     shape_string(y.rows(), y.cols()));
  }
  Matrix out = x * y;
  return t.record(std::move(out), {a, b},
                  [a, b](Tape& t, const Matrix&, const Matrix& g) {
                    if (t.requires_grad(a)) {
                      t.accumulate(a, g * t.value(b).transpose());
                    }
                    if (t.requires_grad(b)) {
                      t.accumulate(b, t.value(a).transpose() * g);
                    }
                  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().transpose();
  return t.record(std::move(out), {a},
                  [a](Tape& t, const Matrix&, const Matrix& g) {
                    t.accumulate(a, g.transpose());
                  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  const Index r = broadcast_dim(x.rows(), y.rows(), x, y, "add");
  const Index c = broadcast_dim(x.cols(), y.cols(), x, y, "add");
  Matrix out = expand(x, r, c) + expand(y, r, c);
  return t.record(std::move(out), {a, b},
                  [a, b](Tape& t, const Matrix&, const Matrix& g) {
                    t.accumulate(a, reduce_to(g, a.rows(), a.cols()));
                    t.accumulate(b, reduce_to(g, b.rows(), b.cols()));
                  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  const Index r = broadcast_dim(x.rows(), y.rows(), x, y, "sub");
  const Index c = broadcast_dim(x.cols(), y.cols(), x, y, "sub");
  Matrix out = expand(x, r, c) - expand(y, r, c);
  return t.record(std::move(out), {a, b},
                  [a, b](Tape& t, const Matrix&, const Matrix& g) {
                    t.accumulate(a, reduce_to(g, a.rows(), a.cols()));
                    if (t.requires_grad(b)) {
                      t.accumulate(b, -reduce_to(g, b.rows(), b.cols()));
                    }
                  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  const Index r = broadcast_dim(x.rows(), y.rows(), x, y, "mul");
  const Index c = broadcast_dim(x.cols(), y.cols(), x, y, "mul");
  Matrix out = expand(x, r, c).cwiseProduct(expand(y, r, c));
  return t.record(
      std::move(out), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
        const Index r = g.rows(), c = g.cols();
        if (t.requires_grad(a)) {
          t.accumulate(a, reduce_to(g.cwiseProduct(expand(t.value(b), r, c)),
                                    a.rows(), a.cols()));
        }
        if (t.requires_grad(b)) {
          t.accumulate(b, reduce_to(g.cwiseProduct(expand(t.value(a), r, c)),
                                    b.rows(), b.cols()));
        }
      });
}

Var div(Var a, Var b) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  const Index r = broadcast_dim(x.rows(), y.rows(), x, y, "div");
  const Index c = broadcast_dim(x.cols(), y.cols(), x, y, "div");
  Matrix den = expand(y, r, c).unaryExpr([](double v) {
    if (std::abs(v) >= kDenominatorFloor) return v;
    return v < 0.0 ? -kDenominatorFloor : kDenominatorFloor;
  });
  Matrix out = expand(x, r, c).cwiseQuotient(den);
  return t.record(
      std::move(out), {a, b},
      [a, b, den](Tape& t, const Matrix& out, const Matrix& g) {
        if (t.requires_grad(a)) {
          t.accumulate(a, reduce_to(g.cwiseQuotient(den), a.rows(), a.cols()));
        }
        if (t.requires_grad(b)) {
          Matrix d = -g.cwiseProduct(out).cwiseQuotient(den);
          const Matrix yb = expand(t.value(b), g.rows(), g.cols());
          for (Index i = 0; i < d.size(); ++i) {
            if (std::abs(yb.data()[i]) < kDenominatorFloor) d.data()[i] = 0.0;
          }
          t.accumulate(b, reduce_to(d, b.rows(), b.cols()));
        }
      });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  Matrix out = a.value() * s;
  return t.record(std::move(out), {a},
                  [a, s](Tape& t, const Matrix&, const Matrix& g) {
                    t.accumulate(a, g * s);
                  });
}

Var add_scalar(Var a, double s) {
  Tape& t = tape_of(a);
  Matrix out = a.value().array() + s;
  return t.record(std::move(out), {a},
                  [a](Tape& t, const Matrix&, const Matrix& g) {
                    t.accumulate(a, g);
                  });
}

Var operator+(Var a, Var b) { return add(a, b); }
Var operator-(Var a, Var b) { return sub(a, b); }
Var operator-(Var a) { return scale(a, -1.0); }
Var operator*(Var a, double s) { return scale(a, s); }
Var operator*(double s, Var a) { return scale(a, s); }

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Tape& t = tape_of(parts.front());
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (Var p : parts) {
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " +
                       shape_string(rows, parts.front().cols()) + " vs " +
                       shape_string(p.rows(), p.cols()));
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index offset = 0;
  for (Var p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record(std::move(out), parts,
                  [inputs](Tape& t, const Matrix&, const Matrix& g) {
                    Index offset = 0;
                    for (Var p : inputs) {
                      if (t.requires_grad(p)) {
                        t.accumulate(p, g.middleCols(offset, p.cols()));
                      }
                      offset += p.cols();
                    }
                  });
}

Var slice_cols(Var a, Index begin, Index count) {
  Tape& t = tape_of(a);
  if (begin < 0 || count < 0 || begin + count > a.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " +
                     shape_string(a.rows(), a.cols()));
  }
  Matrix out = a.value().middleCols(begin, count);
  return t.record(std::move(out), {a},
                  [a, begin, count](Tape& t, const Matrix&, const Matrix& g) {
                    Matrix d = Matrix::Zero(a.rows(), a.cols());
                    d.middleCols(begin, count) = g;
                    t.accumulate(a, d);
                  });
}

std::vector<Var> split_cols(Var a, Index parts) {
  if (parts <= 0 || a.cols() % parts != 0) {
    throw ShapeError("split_cols: " + std::to_string(a.cols()) +
                     " columns not divisible into " + std::to_string(parts));
  }
  const Index width = a.cols() / parts;
  std::vector<Var> out;
  out.reserve(static_cast<std::size_t>(parts));
  for (Index p = 0; p < parts; ++p) out.push_back(slice_cols(a, p * width, width));
  return out;
}

Var gather_rows(Var a, std::span<const Index> rows) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.rows()) {
      throw std::out_of_range("gather_rows: row " + std::to_string(rows[i]) +
                              " outside " + shape_string(x.rows(), x.cols()));
    }
    out.row(static_cast<Index>(i)) = x.row(rows[i]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  return t.record(std::move(out), {a},
                  [a, idx = std::move(idx)](Tape& t, const Matrix&,
                                            const Matrix& g) {
                    Matrix d = Matrix::Zero(a.rows(), a.cols());
                    for (std::size_t i = 0; i < idx.size(); ++i) {
                      d.row(idx[i]) += g.row(static_cast<Index>(i));
                    }
                    t.accumulate(a, d);
                  });
}

Var abs(Var a) {
  return pointwise(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var abs_diff(Var a, Var b) {
  Tape& t = tape_of(a);
  require_same_shape(a.value(), b.value(), "abs_diff");
  Matrix diff = a.value() - b.value();
  Matrix out = diff.cwiseAbs();
  Matrix sign = diff.unaryExpr(
      [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
  return t.record(std::move(out), {a, b},
                  [a, b, sign = std::move(sign)](Tape& t, const Matrix&,
                                                 const Matrix& g) {
                    Matrix d = g.cwiseProduct(sign);
                    if (t.requires_grad(b)) t.accumulate(b, -d);
                    t.accumulate(a, d);
                  });
}

Var leaky_relu(Var a, double negative_slope) {
  return pointwise(
      a, [s = negative_slope](double x) { return x > 0.0 ? x : s * x; },
      [s = negative_slope](double x, double) { return x > 0.0 ? 1.0 : s; });
}

Var elu(Var a, double alpha) {
  return pointwise(
      a,
      [alpha](double x) { return x > 0.0 ? x : alpha * std::expm1(x); },
      [alpha](double x, double y) { return x > 0.0 ? 1.0 : y + alpha; });
}

Var sigmoid(Var a) {
  return pointwise(
      a, [](double x) { return stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return pointwise(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var softplus(Var a) {
  return pointwise(
      a,
      [](double x) {
        return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
      },
      [](double x, double) { return stable_sigmoid(x); });
}

Var clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
  return pointwise(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var segment_softmax(Var a, std::span<const Index> segments, Index count) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  check_segments(segments, x.rows(), count, "segment_softmax");
  std::vector<Index> seg(segments.begin(), segments.end());
  std::vector<Index> sizes(static_cast<std::size_t>(count), 0);
  for (Index s : seg) ++sizes[static_cast<std::size_t>(s)];
  for (Index s = 0; s < count; ++s) {
    if (sizes[static_cast<std::size_t>(s)] == 0) {
      throw std::invalid_argument("segment_softmax: segment " +
                                  std::to_string(s) + " is empty");
    }
  }
  const Index cols = x.cols();
  Matrix mx = Matrix::Constant(count, cols,
                               -std::numeric_limits<double>::infinity());
  for (Index r = 0; r < x.rows(); ++r) {
    mx.row(seg[r]) = mx.row(seg[r]).cwiseMax(x.row(r));
  }
  Matrix out(x.rows(), cols);
  Matrix denom = Matrix::Zero(count, cols);
  for (Index r = 0; r < x.rows(); ++r) {
    out.row(r) = (x.row(r) - mx.row(seg[r])).array().exp();
    denom.row(seg[r]) += out.row(r);
  }
  for (Index r = 0; r < x.rows(); ++r) {
    out.row(r) = out.row(r).cwiseQuotient(denom.row(seg[r]));
  }
  return t.record(std::move(out), {a},
                  [a, seg = std::move(seg), count](Tape& t, const Matrix& y,
                                                   const Matrix& g) {
                    Matrix dot = Matrix::Zero(count, y.cols());
                    for (Index r = 0; r < y.rows(); ++r) {
                      dot.row(seg[r]) += g.row(r).cwiseProduct(y.row(r));
                    }
                    Matrix d(y.rows(), y.cols());
                    for (Index r = 0; r < y.rows(); ++r) {
                      d.row(r) = y.row(r).cwiseProduct(g.row(r) - dot.row(seg[r]));
                    }
                    t.accumulate(a, d);
                  });
}

Var segment_sum(Var a, std::span<const Index> segments, Index count) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  check_segments(segments, x.rows(), count, "segment_sum");
  Matrix out = Matrix::Zero(count, x.cols());
  for (Index r = 0; r < x.rows(); ++r) out.row(segments[r]) += x.row(r);
  std::vector<Index> seg(segments.begin(), segments.end());
  return t.record(std::move(out), {a},
                  [a, seg = std::move(seg)](Tape& t, const Matrix&,
                                            const Matrix& g) {
                    Matrix d(a.rows(), a.cols());
                    for (Index r = 0; r < d.rows(); ++r) d.row(r) = g.row(seg[r]);
                    t.accumulate(a, d);
                  });
}

Var segment_mean(Var a, std::span<const Index> segments, Index count) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  check_segments(segments, x.rows(), count, "segment_mean");
  std::vector<double> sizes(static_cast<std::size_t>(count), 0.0);
  for (Index s : segments) sizes[static_cast<std::size_t>(s)] += 1.0;
  Matrix out = Matrix::Zero(count, x.cols());
  for (Index r = 0; r < x.rows(); ++r) out.row(segments[r]) += x.row(r);
  for (Index s = 0; s < count; ++s) {
    if (sizes[s] > 0.0) out.row(s) /= sizes[s];
  }
  std::vector<Index> seg(segments.begin(), segments.end());
  return t.record(std::move(out), {a},
                  [a, seg = std::move(seg), sizes = std::move(sizes)](
                      Tape& t, const Matrix&, const Matrix& g) {
                    Matrix d(a.rows(), a.cols());
                    for (Index r = 0; r < d.rows(); ++r) {
                      d.row(r) = g.row(seg[r]) / sizes[seg[r]];
                    }
                    t.accumulate(a, d);
                  });
}

Var segment_max(Var a, std::span<const Index> segments, Index count) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  check_segments(segments, x.rows(), count, "segment_max");
  const Index cols = x.cols();
  // argmax row per (segment, column); -1 marks an empty segment.
  std::vector<Index> arg(static_cast<std::size_t>(count * cols), -1);
  Matrix out = Matrix::Zero(count, cols);
  for (Index r = 0; r < x.rows(); ++r) {
    const Index s = segments[r];
    for (Index c = 0; c < cols; ++c) {
      Index& best = arg[static_cast<std::size_t>(s * cols + c)];
      if (best < 0 || x(r, c) > x(best, c)) {
        best = r;
        out(s, c) = x(r, c);
      }
    }
  }
  return t.record(std::move(out), {a},
                  [a, arg = std::move(arg), cols](Tape& t, const Matrix&,
                                                  const Matrix& g) {
                    Matrix d = Matrix::Zero(a.rows(), a.cols());
                    for (Index s = 0; s < g.rows(); ++s) {
                      for (Index c = 0; c < cols; ++c) {
                        const Index r = arg[static_cast<std::size_t>(s * cols + c)];
                        if (r >= 0) d(r, c) += g(s, c);
                      }
                    }
                    t.accumulate(a, d);
                  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  Matrix out = Matrix::Constant(1, 1, a.value().sum());
  return t.record(std::move(out), {a},
                  [a](Tape& t, const Matrix&, const Matrix& g) {
                    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
                  });
}

Var mean(Var a) {
  const Index n = a.value().size();
  if (n == 0) throw ShapeError("mean: empty input");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var dot(Var a, Var b) {
  Tape& t = tape_of(a);
  require_same_shape(a.value(), b.value(), "dot");
  Matrix out = Matrix::Constant(1, 1, a.value().cwiseProduct(b.value()).sum());
  return t.record(std::move(out), {a, b},
                  [a, b](Tape& t, const Matrix&, const Matrix& g) {
                    if (t.requires_grad(a)) t.accumulate(a, t.value(b) * g(0, 0));
                    if (t.requires_grad(b)) t.accumulate(b, t.value(a) * g(0, 0));
                  });
}

Var l2_norm(Var a) {
  Tape& t = tape_of(a);
  Matrix out = Matrix::Constant(1, 1, a.value().norm());
  return t.record(std::move(out), {a},
                  [a](Tape& t, const Matrix& n, const Matrix& g) {
                    if (n(0, 0) <= 0.0) return;
                    t.accumulate(a, t.value(a) * (g(0, 0) / n(0, 0)));
                  });
}

Var l2_norm_rows(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().rowwise().norm();
  return t.record(std::move(out), {a},
                  [a](Tape& t, const Matrix& n, const Matrix& g) {
                    const Matrix& x = t.value(a);
                    Matrix d = Matrix::Zero(x.rows(), x.cols());
                    for (Index r = 0; r < x.rows(); ++r) {
                      if (n(r, 0) > 0.0) d.row(r) = x.row(r) * (g(r, 0) / n(r, 0));
                    }
                    t.accumulate(a, d);
                  });
}

Var logsumexp(Var a) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  if (x.size() == 0) throw ShapeError("logsumexp: empty input");
  const double m = x.maxCoeff();
  const double s = (x.array() - m).exp().sum();
  Matrix out = Matrix::Constant(1, 1, m + std::log(s));
  return t.record(std::move(out), {a},
                  [a](Tape& t, const Matrix& y, const Matrix& g) {
                    Matrix w = (t.value(a).array() - y(0, 0)).exp();
                    t.accumulate(a, w * g(0, 0));
                  });
}

GradCheckReport grad_check(const ScalarFunction& f,
                           std::span<const Matrix> params, double h,
                           Index samples_per_param, std::uint64_t seed,
                           bool skip_kinks, double kink_tolerance) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: h must be positive");

  std::vector<Matrix> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Matrix& p : params) vars.push_back(tape.variable(p));
    Var y = f(tape, vars);
    if (!std::isfinite(y.scalar())) {
      throw std::domain_error("grad_check: non-finite function value");
    }
    tape.backward(y);
    for (std::size_t i = 0; i < vars.size(); ++i) {
      const Matrix& g = tape.grad(vars[i]);
      analytic.push_back(g.size() == 0
                             ? Matrix::Zero(params[i].rows(), params[i].cols())
                             : g);
    }
  }

  std::vector<Matrix> work(params.begin(), params.end());
  auto evaluate = [&]() {
    Tape tape;
    std::vector<Var> vars;
    for (const Matrix& p : work) vars.push_back(tape.constant(p));
    const double y = f(tape, vars).scalar();
    if (!std::isfinite(y)) {
      throw std::domain_error("grad_check: non-finite function value");
    }
    return y;
  };

  Rng rng(seed);
  GradCheckReport report;
  for (std::size_t i = 0; i < work.size(); ++i) {
    const auto size = static_cast<std::size_t>(work[i].size());
    std::vector<std::size_t> coords;
    if (static_cast<Index>(size) <= samples_per_param) {
      for (std::size_t c = 0; c < size; ++c) coords.push_back(c);
    } else {
      coords = sample_without_replacement(
          rng, size, static_cast<std::size_t>(samples_per_param));
    }
    for (std::size_t c : coords) {
      double& x = work[i].data()[c];
      const double saved = x;
      auto central = [&](double step) {
        x = saved + step;
        const double up = evaluate();
        x = saved - step;
        const double down = evaluate();
        x = saved;
        return (up - down) / (2.0 * step);
      };
      const double numeric = central(h);
      if (skip_kinks) {
        // Smooth f: the two differences agree to O(h^2 f''').
        const double half = central(0.5 * h);
        if (std::abs(numeric - half) / std::max(1.0, std::abs(numeric)) > kink_tolerance) {
          ++report.nonsmooth_skipped;
          continue;
        }
      }
      const double err = std::abs(analytic[i].data()[c] - numeric) /
                         std::max(1.0, std::abs(numeric));
      ++report.coordinates_checked;
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_param = i;
        report.worst_coordinate = static_cast<Index>(c);
      }
    }
  }
  return report;
}

}  // namespace rarenet
