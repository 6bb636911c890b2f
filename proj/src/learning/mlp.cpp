#include "foldcore/learning/mlp.hpp"

#include "foldcore/rng.hpp"

#include <cmath>

namespace foldcore {

namespace {

Vector activate(const Vector& z, Activation a) {
  switch (a) {
    case Activation::Relu: return z.cwiseMax(0.0);
    case Activation::Tanh: return z.array().tanh().matrix();
    case Activation::Identity: return z;
  }
  return z;
}

// g ⊙ σ'(z)
Vector activate_vjp(const Vector& z, Activation a, const Vector& g) {
  switch (a) {
    case Activation::Relu: return (z.array() > 0.0).select(g.array(), 0.0).matrix();
    case Activation::Tanh: return (g.array() * (1.0 - z.array().tanh().square())).matrix();
    case Activation::Identity: return g;
  }
  return g;
}

}  // namespace

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw Error(ErrorCode::InvalidArgument, "mlp needs at least one layer");
  for (size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.b.size() != l.W.rows()) throw Error(ErrorCode::ShapeMismatch, "mlp layer bias does not match weight rows");
    if (i > 0 && l.W.cols() != layers_[i - 1].W.rows())
      throw Error(ErrorCode::ShapeMismatch, "mlp layer shapes do not chain");
    require_finite(l.W, "mlp weights");
    require_finite(l.b, "mlp biases");
  }
}

Mlp Mlp::init(const std::vector<Eigen::Index>& sizes, Activation hidden, Activation output, uint64_t seed) {
  if (sizes.size() < 2) throw Error(ErrorCode::InvalidArgument, "mlp init needs input and output sizes");
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  for (size_t i = 0; i + 1 < sizes.size(); ++i) {
    DenseLayer l;
    const double scale = std::sqrt(2.0 / static_cast<double>(sizes[i]));
    l.W = scale * rng.normal_matrix(sizes[i + 1], sizes[i]);
    l.b = Vector::Zero(sizes[i + 1]);
    l.act = i + 2 == sizes.size() ? output : hidden;
    layers.push_back(std::move(l));
  }
  return Mlp(std::move(layers));
}

Eigen::Index Mlp::input_dim() const { return layers_.front().W.cols(); }
Eigen::Index Mlp::output_dim() const { return layers_.back().W.rows(); }

Eigen::Index Mlp::param_count() const {
  Eigen::Index n = 0;
  for (const auto& l : layers_) n += l.W.size() + l.b.size();
  return n;
}

Vector Mlp::forward(const Vector& x) const {
  Tape tape;
  return forward(x, tape);
}

Vector Mlp::forward(const Vector& x, Tape& tape) const {
  require_size(x.size(), input_dim(), "mlp input");
  tape.inputs.clear();
  tape.pre.clear();
  Vector h = x;
  for (const auto& l : layers_) {
    tape.inputs.push_back(h);
    Vector z = l.W * h + l.b;
    h = activate(z, l.act);
    tape.pre.push_back(std::move(z));
  }
  return h;
}

Vector Mlp::backward(const Tape& tape, const Vector& g_out, Vector& grad) const {
  require_size(g_out.size(), output_dim(), "mlp output gradient");
  require_size(grad.size(), param_count(), "mlp gradient buffer");
  if (tape.inputs.size() != layers_.size()) throw Error(ErrorCode::InvalidArgument, "mlp tape does not match network");
  // Offsets of each layer's block in the flat vector.
  std::vector<Eigen::Index> off(layers_.size());
  Eigen::Index o = 0;
  for (size_t i = 0; i < layers_.size(); ++i) {
    off[i] = o;
    o += layers_[i].W.size() + layers_[i].b.size();
  }
  Vector g = g_out;
  for (size_t ii = layers_.size(); ii-- > 0;) {
    const auto& l = layers_[ii];
    const Vector gz = activate_vjp(tape.pre[ii], l.act, g);
    const Eigen::Index rows = l.W.rows(), cols = l.W.cols();
    Eigen::Map<Matrix> gW(grad.data() + off[ii], rows, cols);
    gW += gz * tape.inputs[ii].transpose();
    grad.segment(off[ii] + rows * cols, rows) += gz;
    g = l.W.transpose() * gz;
  }
  return g;
}

Vector Mlp::params() const {
  Vector p(param_count());
  Eigen::Index o = 0;
  for (const auto& l : layers_) {
    p.segment(o, l.W.size()) = Eigen::Map<const Vector>(l.W.data(), l.W.size());
    o += l.W.size();
    p.segment(o, l.b.size()) = l.b;
    o += l.b.size();
  }
  return p;
}

void Mlp::set_params(const Vector& p) {
  require_size(p.size(), param_count(), "mlp parameters");
  require_finite(p, "mlp parameters");
  Eigen::Index o = 0;
  for (auto& l : layers_) {
    l.W = Eigen::Map<const Matrix>(p.data() + o, l.W.rows(), l.W.cols());
    o += l.W.size();
    l.b = p.segment(o, l.b.size());
    o += l.b.size();
  }
}

}  // namespace foldcore
