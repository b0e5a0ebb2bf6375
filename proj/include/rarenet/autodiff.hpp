#pragma once

// Dense reverse-mode differentiation over row-major Eigen matrices.
//
// Every value on a Tape is a 2-D matrix; vectors are n x 1 columns or 1 x n
// rows and scalars are 1 x 1. Ops are free functions that append a record to
// the tape of their operands. Tape::backward() walks the records once in
// reverse insertion order, which is a valid topological order because a
// record can only reference records created before it.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rarenet {

template <typename Scalar>
using MatrixX =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Matrix = MatrixX<double>;
using Index = Eigen::Index;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_string(Index rows, Index cols);

class Tape;

/// Handle to one record on a Tape.
class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  /// Value of a 1 x 1 record.
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Called with the record's own value and its accumulated gradient.
  using BackwardFn =
      std::function<void(Tape&, const Matrix& out, const Matrix& grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Trainable leaf.
  Var variable(Matrix value);

  /// Appends an op result. The backward function is kept only when at least
  /// one input requires a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs,
             BackwardFn backward);
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn backward);

  const Matrix& value(Var v) const { return records_[v.id()].value; }
  /// Empty (0 x 0) until something has been accumulated.
  const Matrix& grad(Var v) const { return records_[v.id()].grad; }
  bool requires_grad(Var v) const { return records_[v.id()].requires_grad; }

  void accumulate(Var v, const Matrix& g);
  void accumulate(Var v, Matrix&& g);
  /// Seeds d(root)/d(root) = 1 and propagates to every record.
  void backward(Var root);

  std::size_t size() const { return records_.size(); }

 private:
  struct Record {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::vector<Record> records_;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

// Linear algebra.
Var matmul(Var a, Var b);
Var transpose(Var a);

// Elementwise with broadcasting: each dimension must match or be 1.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// Denominators are floored to +-1e-12 in magnitude.
Var div(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator-(Var a);
Var operator*(Var a, double s);
Var operator*(double s, Var a);

// Structure.
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
Var slice_cols(Var a, Index begin, Index count);
std::vector<Var> split_cols(Var a, Index parts);
Var gather_rows(Var a, std::span<const Index> rows);

// Pointwise nonlinearities.
Var abs(Var a);
Var abs_diff(Var a, Var b);
Var leaky_relu(Var a, double negative_slope);
Var elu(Var a, double alpha = 1.0);
Var sigmoid(Var a);
Var relu(Var a);
/// log(1 + exp(a)), evaluated without overflow.
Var softplus(Var a);
Var clamp(Var a, double lo, double hi);

// Segment ops: row r of `a` belongs to segment segments[r] in [0, count).
// Columns are treated independently.
Var segment_softmax(Var a, std::span<const Index> segments, Index count);
Var segment_sum(Var a, std::span<const Index> segments, Index count);
Var segment_mean(Var a, std::span<const Index> segments, Index count);
Var segment_max(Var a, std::span<const Index> segments, Index count);

// Reductions.
Var sum(Var a);
Var mean(Var a);
Var dot(Var a, Var b);
/// Euclidean norm of the whole matrix (1 x 1).
Var l2_norm(Var a);
/// Per-row Euclidean norm (rows x 1).
Var l2_norm_rows(Var a);
/// log(sum(exp(a))) over all entries, max-shifted.
Var logsumexp(Var a);

struct GradCheckReport {
  double max_relative_error = 0.0;
  Index coordinates_checked = 0;
  std::size_t worst_param = 0;
  Index worst_coordinate = 0;
  /// Coordinates left out because a kink lies within the difference window.
  Index nonsmooth_skipped = 0;
};

using ScalarFunction = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares the tape gradient of `f` against central differences at up to
/// `samples_per_param` random coordinates of each parameter (all coordinates
/// when the parameter is smaller). Error per coordinate is
/// |analytic - numeric| / max(1, |numeric|). Throws on non-finite values.
/// With `skip_kinks`, a coordinate whose central differences at h and h/2
/// disagree by more than `kink_tolerance` (relative, same scale as above) is
/// counted in nonsmooth_skipped instead of compared. The test uses f alone.
GradCheckReport grad_check(const ScalarFunction& f,
                           std::span<const Matrix> params, double h,
                           Index samples_per_param, std::uint64_t seed,
                           bool skip_kinks = false, double kink_tolerance = 1e-6);

}  // namespace rarenet
