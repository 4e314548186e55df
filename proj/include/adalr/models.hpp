#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adalr/rng.hpp"
#include "adalr/vec.hpp"

namespace adalr {

// Classification dataset; features live in one flat row-major block.
struct Dataset {
  int64_t n = 0;
  int dim = 0;
  int n_classes = 0;
  std::vector<float> features;  // n * dim
  std::vector<int32_t> labels;  // n entries in [0, n_classes)

  std::span<const float> example(int64_t i) const {
    return {features.data() + i * dim, static_cast<size_t>(dim)};
  }
  int32_t label(int64_t i) const { return labels[static_cast<size_t>(i)]; }
};

// Minibatch = indices into a Dataset.
using Batch = std::span<const int32_t>;

// Feedforward softmax classifier. hidden == {} is multinomial logistic
// regression; otherwise each hidden layer is a ReLU layer. Parameters sit in
// one flat vector, layer after layer, weights first (row-major, out x in),
// then the bias when present. Other modules treat that vector opaquely.
struct ModelSpec {
  int input_dim = 0;
  std::vector<int> hidden;
  int n_classes = 0;
  bool with_bias = true;

  struct Layer {
    int in = 0;
    int out = 0;
    size_t w_off = 0;
    size_t b_off = 0;  // meaningful only when with_bias
  };

  size_t param_count() const;
  std::vector<Layer> layout() const;
  std::string describe() const;  // "784-256-10" style
  bool is_logreg() const { return hidden.empty(); }

  static ModelSpec logreg(int input_dim, int n_classes);
  static ModelSpec mlp(int input_dim, std::vector<int> hidden, int n_classes,
                       bool with_bias = true);
  // The feedforward MNIST network from the experiments this library
  // reproduces: 784 inputs, 256-wide ReLU stack, 10-way softmax, no bias
  // terms, 334336 parameters in total.
  static ModelSpec mnist_mlp();
};

// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), biases zero.
ParamVector init_params(const ModelSpec& spec, RngStream& rng);

// Mean cross-entropy over the batch.
double loss(const ModelSpec& spec, const ParamVector& theta, const Dataset& ds,
            Batch batch);

// Softmax outputs for one example.
std::vector<double> predict_probs(const ModelSpec& spec, const ParamVector& theta,
                                  const Dataset& ds, int64_t i);
int32_t predict(const ModelSpec& spec, const ParamVector& theta, const Dataset& ds,
                int64_t i);
double accuracy(const ModelSpec& spec, const ParamVector& theta, const Dataset& ds);

// Adds the gradient of example i's loss into grad and returns that loss.
// Core primitive behind the two wrappers below.
double example_loss_grad(const ModelSpec& spec, const ParamVector& theta,
                         const Dataset& ds, int64_t i, ParamVector& grad);

// Backpropagation gradient of the single-example loss.
ParamVector per_example_gradient(const ModelSpec& spec, const ParamVector& theta,
                                 const Dataset& ds, int64_t i);

// SUM of per-example gradients over the batch. Callers that want the mean
// scale by 1/|B|; the private mechanism needs the raw sum. `mean_loss_out`,
// when given, receives the mean per-example loss of the batch.
ParamVector batch_gradient(const ModelSpec& spec, const ParamVector& theta,
                           const Dataset& ds, Batch batch,
                           double* mean_loss_out = nullptr);

// Gaussian class clusters with unit within-class covariance. When
// n_classes <= dim the class means sit on distinct coordinate axes at
// distance `separation` from the origin; otherwise on random unit
// directions. Labels are dealt round-robin, so classes are balanced.
Dataset synthetic_classification(int64_t n, int dim, int n_classes,
                                 double separation, RngStream& rng);

}  // namespace adalr
