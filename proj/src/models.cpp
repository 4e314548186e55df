#include "adalr/models.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <stdexcept>

namespace adalr {

namespace {

// Fixed fan-out for batch-level parallelism. A constant (rather than the
// machine's core count) keeps the chunk boundaries, and therefore the
// floating-point merge order, identical on every host.
constexpr int kBatchChunks = 4;
constexpr size_t kParallelThreshold = 16;  // batch size below which we stay serial

std::vector<int> widths_of(const ModelSpec& spec) {
  std::vector<int> w;
  w.push_back(spec.input_dim);
  w.insert(w.end(), spec.hidden.begin(), spec.hidden.end());
  w.push_back(spec.n_classes);
  return w;
}

void check_theta(const ModelSpec& spec, const ParamVector& theta) {
  if (theta.size() != spec.param_count())
    throw std::invalid_argument("model: parameter vector has wrong dimension");
}

// Forward pass keeping every post-activation (needed for backprop).
// acts[0] is the input promoted to double, acts.back() the raw logits.
void forward_cached(const ModelSpec& spec, const std::vector<ModelSpec::Layer>& layers,
                    const ParamVector& theta, std::span<const float> x,
                    std::vector<ParamVector>& acts) {
  acts.resize(layers.size() + 1);
  acts[0].assign(x.begin(), x.end());
  for (size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    const double* w = theta.data() + L.w_off;
    const double* b = spec.with_bias ? theta.data() + L.b_off : nullptr;
    const ParamVector& in = acts[l];
    ParamVector& out = acts[l + 1];
    out.assign(static_cast<size_t>(L.out), 0.0);
    for (int o = 0; o < L.out; ++o) {
      const double* row = w + static_cast<size_t>(o) * L.in;
      double s = b ? b[o] : 0.0;
      for (int i = 0; i < L.in; ++i) s += row[i] * in[static_cast<size_t>(i)];
      out[static_cast<size_t>(o)] = s;
    }
    if (l + 1 < layers.size()) {
      for (double& v : out) v = v > 0 ? v : 0.0;  // ReLU; slope 0 at exactly 0
    }
  }
}

// Logits without keeping intermediates; ping-pongs two buffers.
void forward_logits(const ModelSpec& spec, const std::vector<ModelSpec::Layer>& layers,
                    const ParamVector& theta, std::span<const float> x,
                    ParamVector& buf_a, ParamVector& buf_b, ParamVector& logits) {
  buf_a.assign(x.begin(), x.end());
  const ParamVector* in = &buf_a;
  ParamVector* out = &buf_b;
  for (size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    const double* w = theta.data() + L.w_off;
    const double* b = spec.with_bias ? theta.data() + L.b_off : nullptr;
    out->assign(static_cast<size_t>(L.out), 0.0);
    for (int o = 0; o < L.out; ++o) {
      const double* row = w + static_cast<size_t>(o) * L.in;
      double s = b ? b[o] : 0.0;
      for (int i = 0; i < L.in; ++i) s += row[i] * (*in)[static_cast<size_t>(i)];
      (*out)[static_cast<size_t>(o)] = s;
    }
    if (l + 1 < layers.size()) {
      for (double& v : *out) v = v > 0 ? v : 0.0;
    }
    std::swap(in, out);
  }
  logits = *in;
}

double log_sum_exp(const ParamVector& z) {
  double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

// Serial clump of the batch sum; indices [lo, hi) of `batch`.
double batch_grad_range(const ModelSpec& spec, const ParamVector& theta,
                        const Dataset& ds, Batch batch, size_t lo, size_t hi,
                        ParamVector& grad) {
  double loss_sum = 0.0;
  for (size_t k = lo; k < hi; ++k)
    loss_sum += example_loss_grad(spec, theta, ds, batch[k], grad);
  return loss_sum;
}

}  // namespace

size_t ModelSpec::param_count() const {
  size_t total = 0;
  auto w = widths_of(*this);
  for (size_t l = 0; l + 1 < w.size(); ++l) {
    total += static_cast<size_t>(w[l]) * w[l + 1];
    if (with_bias) total += static_cast<size_t>(w[l + 1]);
  }
  return total;
}

std::vector<ModelSpec::Layer> ModelSpec::layout() const {
  std::vector<Layer> layers;
  auto w = widths_of(*this);
  size_t off = 0;
  for (size_t l = 0; l + 1 < w.size(); ++l) {
    Layer L;
    L.in = w[l];
    L.out = w[l + 1];
    L.w_off = off;
    off += static_cast<size_t>(L.in) * L.out;
    if (with_bias) {
      L.b_off = off;
      off += static_cast<size_t>(L.out);
    }
    layers.push_back(L);
  }
  return layers;
}

std::string ModelSpec::describe() const {
  std::string s = std::to_string(input_dim);
  for (int h : hidden) s += "-" + std::to_string(h);
  s += "-" + std::to_string(n_classes);
  return s;
}

ModelSpec ModelSpec::logreg(int input_dim, int n_classes) {
  ModelSpec m;
  m.input_dim = input_dim;
  m.n_classes = n_classes;
  m.with_bias = true;
  return m;
}

ModelSpec ModelSpec::mlp(int input_dim, std::vector<int> hidden, int n_classes,
                         bool with_bias) {
  ModelSpec m;
  m.input_dim = input_dim;
  m.hidden = std::move(hidden);
  m.n_classes = n_classes;
  m.with_bias = with_bias;
  for (int h : m.hidden)
    if (h <= 0) throw std::invalid_argument("mlp: hidden widths must be positive");
  return m;
}

ModelSpec ModelSpec::mnist_mlp() { return mlp(784, {256, 256, 256}, 10, false); }

ParamVector init_params(const ModelSpec& spec, RngStream& rng) {
  ParamVector theta(spec.param_count(), 0.0);
  for (const auto& L : spec.layout()) {
    double limit = std::sqrt(6.0 / (L.in + L.out));
    double* w = theta.data() + L.w_off;
    size_t n = static_cast<size_t>(L.in) * L.out;
    for (size_t k = 0; k < n; ++k) w[k] = (2.0 * rng.next_uniform() - 1.0) * limit;
    // biases stay zero
  }
  return theta;
}

double loss(const ModelSpec& spec, const ParamVector& theta, const Dataset& ds,
            Batch batch) {
  check_theta(spec, theta);
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  auto layers = spec.layout();

  auto range_loss = [&](size_t lo, size_t hi) {
    ParamVector a, b, logits;
    double s = 0.0;
    for (size_t k = lo; k < hi; ++k) {
      int64_t i = batch[k];
      forward_logits(spec, layers, theta, ds.example(i), a, b, logits);
      s += log_sum_exp(logits) - logits[static_cast<size_t>(ds.label(i))];
    }
    return s;
  };

  double total = 0.0;
  if (batch.size() < kParallelThreshold) {
    total = range_loss(0, batch.size());
  } else {
    std::vector<std::future<double>> parts;
    for (int c = 0; c < kBatchChunks; ++c) {
      size_t lo = batch.size() * c / kBatchChunks;
      size_t hi = batch.size() * (c + 1) / kBatchChunks;
      parts.push_back(std::async(std::launch::async, range_loss, lo, hi));
    }
    for (auto& p : parts) total += p.get();
  }
  return total / static_cast<double>(batch.size());
}

std::vector<double> predict_probs(const ModelSpec& spec, const ParamVector& theta,
                                  const Dataset& ds, int64_t i) {
  check_theta(spec, theta);
  auto layers = spec.layout();
  ParamVector a, b, logits;
  forward_logits(spec, layers, theta, ds.example(i), a, b, logits);
  double lse = log_sum_exp(logits);
  std::vector<double> probs(logits.size());
  for (size_t k = 0; k < logits.size(); ++k) probs[k] = std::exp(logits[k] - lse);
  return probs;
}

int32_t predict(const ModelSpec& spec, const ParamVector& theta, const Dataset& ds,
                int64_t i) {
  auto layers = spec.layout();
  ParamVector a, b, logits;
  forward_logits(spec, layers, theta, ds.example(i), a, b, logits);
  return static_cast<int32_t>(
      std::max_element(logits.begin(), logits.end()) - logits.begin());
}

double accuracy(const ModelSpec& spec, const ParamVector& theta, const Dataset& ds) {
  check_theta(spec, theta);
  if (ds.n == 0) throw std::invalid_argument("accuracy: empty dataset");
  auto layers = spec.layout();

  auto range_hits = [&](int64_t lo, int64_t hi) {
    ParamVector a, b, logits;
    int64_t hits = 0;
    for (int64_t i = lo; i < hi; ++i) {
      forward_logits(spec, layers, theta, ds.example(i), a, b, logits);
      auto pred = std::max_element(logits.begin(), logits.end()) - logits.begin();
      if (static_cast<int32_t>(pred) == ds.label(i)) ++hits;
    }
    return hits;
  };

  int64_t hits = 0;
  if (ds.n < static_cast<int64_t>(kParallelThreshold)) {
    hits = range_hits(0, ds.n);
  } else {
    std::vector<std::future<int64_t>> parts;
    for (int c = 0; c < kBatchChunks; ++c) {
      int64_t lo = ds.n * c / kBatchChunks;
      int64_t hi = ds.n * (c + 1) / kBatchChunks;
      parts.push_back(std::async(std::launch::async, range_hits, lo, hi));
    }
    for (auto& p : parts) hits += p.get();
  }
  return static_cast<double>(hits) / static_cast<double>(ds.n);
}

double example_loss_grad(const ModelSpec& spec, const ParamVector& theta,
                         const Dataset& ds, int64_t i, ParamVector& grad) {
  check_theta(spec, theta);
  if (grad.size() != theta.size())
    throw std::invalid_argument("example_loss_grad: gradient buffer has wrong dimension");
  auto layers = spec.layout();

  thread_local std::vector<ParamVector> acts;
  forward_cached(spec, layers, theta, ds.example(i), acts);

  const ParamVector& logits = acts.back();
  double lse = log_sum_exp(logits);
  int32_t y = ds.label(i);
  if (y < 0 || y >= spec.n_classes)
    throw std::invalid_argument("example_loss_grad: label out of range");
  double ex_loss = lse - logits[static_cast<size_t>(y)];

  // delta at the output: softmax - one_hot(y)
  ParamVector delta(logits.size());
  for (size_t k = 0; k < logits.size(); ++k) delta[k] = std::exp(logits[k] - lse);
  delta[static_cast<size_t>(y)] -= 1.0;

  ParamVector delta_prev;
  for (size_t l = layers.size(); l-- > 0;) {
    const auto& L = layers[l];
    const ParamVector& a_prev = acts[l];
    const double* w = theta.data() + L.w_off;
    double* gw = grad.data() + L.w_off;
    double* gb = spec.with_bias ? grad.data() + L.b_off : nullptr;

    bool need_prev = l > 0;
    if (need_prev) delta_prev.assign(a_prev.size(), 0.0);

    // One pass over the weight block: accumulate the weight gradient and the
    // back-propagated delta together.
    for (int o = 0; o < L.out; ++o) {
      double d = delta[static_cast<size_t>(o)];
      const double* row = w + static_cast<size_t>(o) * L.in;
      double* grow = gw + static_cast<size_t>(o) * L.in;
      if (need_prev) {
        for (int k = 0; k < L.in; ++k) {
          grow[k] += d * a_prev[static_cast<size_t>(k)];
          delta_prev[static_cast<size_t>(k)] += row[k] * d;
        }
      } else {
        for (int k = 0; k < L.in; ++k) grow[k] += d * a_prev[static_cast<size_t>(k)];
      }
      if (gb) gb[o] += d;
    }

    if (need_prev) {
      // ReLU: the stored activation is max(0, z), so a == 0 kills the slope.
      for (size_t k = 0; k < delta_prev.size(); ++k)
        if (a_prev[k] <= 0.0) delta_prev[k] = 0.0;
      delta = delta_prev;
    }
  }
  return ex_loss;
}

ParamVector per_example_gradient(const ModelSpec& spec, const ParamVector& theta,
                                 const Dataset& ds, int64_t i) {
  ParamVector grad(spec.param_count(), 0.0);
  example_loss_grad(spec, theta, ds, i, grad);
  return grad;
}

ParamVector batch_gradient(const ModelSpec& spec, const ParamVector& theta,
                           const Dataset& ds, Batch batch, double* mean_loss_out) {
  check_theta(spec, theta);
  ParamVector grad(spec.param_count(), 0.0);
  double loss_sum = 0.0;

  if (batch.size() < kParallelThreshold) {
    loss_sum = batch_grad_range(spec, theta, ds, batch, 0, batch.size(), grad);
  } else {
    struct Part {
      ParamVector grad;
      double loss_sum = 0.0;
    };
    std::vector<std::future<Part>> parts;
    for (int c = 0; c < kBatchChunks; ++c) {
      size_t lo = batch.size() * c / kBatchChunks;
      size_t hi = batch.size() * (c + 1) / kBatchChunks;
      parts.push_back(std::async(std::launch::async, [&, lo, hi]() {
        Part p;
        p.grad.assign(spec.param_count(), 0.0);
        p.loss_sum = batch_grad_range(spec, theta, ds, batch, lo, hi, p.grad);
        return p;
      }));
    }
    // Merge in chunk order so the result never depends on thread timing.
    for (auto& f : parts) {
      Part p = f.get();
      axpy(1.0, p.grad, grad);
      loss_sum += p.loss_sum;
    }
  }

  if (mean_loss_out) {
    *mean_loss_out =
        batch.empty() ? 0.0 : loss_sum / static_cast<double>(batch.size());
  }
  return grad;
}

Dataset synthetic_classification(int64_t n, int dim, int n_classes,
                                 double separation, RngStream& rng) {
  if (n < 0 || dim <= 0 || n_classes <= 0)
    throw std::invalid_argument("synthetic_classification: bad sizes");

  // Class means: coordinate axes when they fit, random directions otherwise.
  std::vector<ParamVector> means(static_cast<size_t>(n_classes),
                                 ParamVector(static_cast<size_t>(dim), 0.0));
  if (n_classes <= dim) {
    for (int c = 0; c < n_classes; ++c) means[static_cast<size_t>(c)][static_cast<size_t>(c)] = separation;
  } else {
    for (int c = 0; c < n_classes; ++c) {
      ParamVector dir = gaussian_vector(static_cast<size_t>(dim), 1.0, rng);
      double norm = l2_norm(dir);
      if (norm == 0) norm = 1;
      for (int k = 0; k < dim; ++k)
        means[static_cast<size_t>(c)][static_cast<size_t>(k)] = separation * dir[static_cast<size_t>(k)] / norm;
    }
  }

  Dataset ds;
  ds.n = n;
  ds.dim = dim;
  ds.n_classes = n_classes;
  ds.features.resize(static_cast<size_t>(n) * dim);
  ds.labels.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    int32_t y = static_cast<int32_t>(i % n_classes);
    ds.labels[static_cast<size_t>(i)] = y;
    float* row = ds.features.data() + i * dim;
    for (int k = 0; k < dim; ++k) {
      double v = means[static_cast<size_t>(y)][static_cast<size_t>(k)] + rng.next_gaussian();
      row[k] = static_cast<float>(v);
    }
  }
  return ds;
}

}  // namespace adalr
