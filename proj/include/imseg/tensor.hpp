#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace imseg {

using Index = std::int64_t;
using Shape = std::vector<Index>;
using Array = Eigen::ArrayXd;

// Single guard constant used inside every log/div in this library.
inline constexpr double kEps = 1e-8;

class TensorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Index element_count(const Shape& shape);
std::string shape_str(const Shape& shape);

// Plain value holder: row-major 64-bit floats. Lives outside any tape;
// used for parameters, datasets and checkpoints.
struct TensorData {
  Shape shape;
  Array v;

  TensorData() = default;
  TensorData(Shape s, Array values);
  static TensorData zeros(const Shape& s);
  static TensorData full(const Shape& s, double value);
  static TensorData scalar(double value);
  static TensorData from(const Shape& s, std::initializer_list<double> values);

  Index size() const { return v.size(); }
};

class Tape;

// Handle to a node on a tape. Cheap to copy; values are immutable after
// the forward op that created them, gradients appear after backward().
class Tensor {
 public:
  Tensor() = default;
  Tensor(Tape* tape, Index id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  Index id() const { return id_; }

  const Shape& shape() const;
  Index size() const;
  Index rank() const;
  const Array& val() const;
  const Array& grad() const;
  double scalar() const;

 private:
  Tape* tape_ = nullptr;
  Index id_ = -1;
};

// Records the forward pass as a flат, topologically ordered list of nodes.
// backward() sweeps the records once, in reverse. One tape per batch;
// independent tapes are independent objects and may live on separate threads.
class Tape {
 public:
  Tensor leaf(TensorData data);                 // differentiable input
  Tensor constant(TensorData data);             // no gradient tracked
  Tensor constant_scalar(double value);

  void backward(const Tensor& root);

  Index node_count() const { return static_cast<Index>(nodes_.size()); }
  Index backward_visits() const { return visits_; }

  struct Node {
    Shape shape;
    Array v;
    Array g;  // empty until backward touches this node
    std::vector<Index> inputs;
    std::function<void(Tape&, Index)> backprop;  // null for leaves/constants
    bool requires_grad = false;
  };

  Node& node(Index id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(Index id) const { return nodes_[static_cast<std::size_t>(id)]; }

  // Internal: append a node computed from `inputs`. Throws if any value is
  // non-finite (every forward op must produce finite values).
  Tensor emit(Shape shape, Array values, std::vector<Index> inputs,
              std::function<void(Tape&, Index)> backprop);

  Array& grad_buffer(Index id);  // allocates zeros on first use

 private:
  std::deque<Node> nodes_;
  Index visits_ = 0;
};

// ---- elementwise ops (broadcast: equal shapes, scalar, trailing axes) ----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, double c);
Tensor sub(double c, const Tensor& a);
Tensor mul(const Tensor& a, double c);

Tensor log(const Tensor& x);  // domain error on values <= 0
Tensor exp(const Tensor& x);
Tensor pow(const Tensor& x, double exponent);
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor leaky_relu(const Tensor& x, double slope = 0.01);
Tensor neg(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return mul(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return mul(a, c); }
inline Tensor operator+(const Tensor& a, double c) { return add(a, c); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// ---- linear algebra ----

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n] -> [m,n]

// ---- convolution and spatial ops (NCHW) ----

enum class ConvBackend { kIm2col, kNaive };
void set_conv_backend(ConvBackend backend);
ConvBackend conv_backend();

// Odd kernel extents; padding >= 0 means zero padding. `bias` may be an
// invalid Tensor for no bias; otherwise shape [O].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
              Index stride, Index padding);
Tensor maxpool2x2(const Tensor& x);
Tensor global_avg_pool(const Tensor& x);  // [B,C,H,W] -> [B,C]
Tensor upsample_nearest2x(const Tensor& x);

// ---- normalization and reductions ----

Tensor softmax(const Tensor& logits, Index axis);
Tensor l2_normalize(const Tensor& v, Index axis, double eps = kEps);

Tensor reduce_sum(const Tensor& x);                              // -> scalar
Tensor reduce_mean(const Tensor& x);                             // -> scalar
Tensor reduce_sum(const Tensor& x, Index axis, bool keepdim);
Tensor reduce_mean(const Tensor& x, Index axis, bool keepdim);

// ---- structural ops ----

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<Index>& axes);
Tensor concat(const Tensor& a, const Tensor& b, Index axis);
Tensor slice_spatial(const Tensor& x, Index y0, Index y1, Index x0, Index x1);

// Spatial index permutation on [B,C,H,W]: out pixel d takes x pixel
// src_of_dest[d], or 0 when src_of_dest[d] < 0. Backward scatter-adds
// through the same map (the inverse permutation on covered pixels).
Tensor spatial_gather(const Tensor& x, const std::vector<Index>& src_of_dest,
                      Index out_h, Index out_w);

}  // namespace imseg
