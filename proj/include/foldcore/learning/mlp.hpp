#pragma once

#include "foldcore/types.hpp"

#include <cstdint>
#include <vector>

namespace foldcore {

enum class Activation { Relu, Tanh, Identity };

struct DenseLayer {
  Matrix W;  // out × in
  Vector b;
  Activation act = Activation::Identity;
};

// Dense feed-forward network. Parameters are exposed as one flat vector
// (layer by layer: W row-major, then b) so optimizers and finite-difference
// checks can treat them uniformly.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);
  // sizes = {in, h1, ..., out}; hidden layers use `hidden`, the last `output`.
  // He-style normal initialization, biases zero.
  static Mlp init(const std::vector<Eigen::Index>& sizes, Activation hidden, Activation output, uint64_t seed);

  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
  Eigen::Index param_count() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Vector forward(const Vector& x) const;

  // Activations saved by a forward pass for the matching backward pass.
  struct Tape {
    std::vector<Vector> inputs;  // input to each layer
    std::vector<Vector> pre;     // pre-activation of each layer
  };
  Vector forward(const Vector& x, Tape& tape) const;
  // Adds the parameter gradient of gᵀ·out into grad (length param_count) and
  // returns the gradient with respect to the input.
  Vector backward(const Tape& tape, const Vector& g_out, Vector& grad) const;

  Vector params() const;
  void set_params(const Vector& p);

 private:
  std::vector<DenseLayer> layers_;
};

}  // namespace foldcore
