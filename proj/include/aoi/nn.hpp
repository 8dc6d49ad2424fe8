#ifndef AOI_NN_HPP_
#define AOI_NN_HPP_

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "aoi/network.hpp"

namespace aoi::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MlpCache {
  // activations[0] is the input; activations[i] the output of layer i-1
  // after its nonlinearity. Columns are samples.
  std::vector<Matrix> activations;
};

// Fully connected network, ReLU on hidden layers and identity on the output.
// All parameters live in one flat vector laid out layer by layer as
// (weight column-major [out x in], bias [out]).
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> layer_sizes);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  Eigen::Index num_params() const { return params_.size(); }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  Eigen::Map<Matrix> weight(int layer);
  Eigen::Map<const Matrix> weight(int layer) const;
  Eigen::Map<Vector> bias(int layer);
  Eigen::Map<const Vector> bias(int layer) const;

  // Orthogonal init scaled by `hidden_gain` on hidden layers and
  // `output_gain` on the last layer; zero biases.
  void init_orthogonal(Rng& rng, double hidden_gain, double output_gain);
  void init_layer_orthogonal(int layer, Rng& rng, double gain);

  // input: [input_size x batch]
  Matrix forward(const Matrix& input) const;
  Matrix forward(const Matrix& input, MlpCache& cache) const;
  Vector forward(const Vector& input) const;

  // Gradient of sum_b <upstream[:, b], output[:, b]> w.r.t. the flat
  // parameter vector.
  Vector backward(const MlpCache& cache, const Matrix& upstream) const;

  bool all_finite() const { return params_.allFinite(); }

  bool operator==(const Mlp& other) const {
    return sizes_ == other.sizes_ && params_ == other.params_;
  }

 private:
  Eigen::Index weight_offset(int layer) const { return offsets_[layer]; }
  Eigen::Index bias_offset(int layer) const {
    return offsets_[layer] + Eigen::Index(sizes_[layer + 1]) * sizes_[layer];
  }

  std::vector<int> sizes_;
  std::vector<Eigen::Index> offsets_;
  Vector params_;
};

// -- Adam -- //

struct AdamConfig {
  double learning_rate = 2.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index size, AdamConfig config = {});

  // Throws NonFiniteError if any gradient entry is NaN or infinite.
  void step(Eigen::Ref<Vector> params, const Vector& grads);

  long steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  const Vector& first_moment() const { return m_; }
  const Vector& second_moment() const { return v_; }

 private:
  AdamConfig config_;
  Vector m_;
  Vector v_;
  long steps_ = 0;
};

// -- diagonal Gaussian -- //

// log N(x; mean, exp(log_std)) summed over components.
double gaussian_log_prob(std::span<const double> mean,
                         std::span<const double> log_std,
                         std::span<const double> x);

// Sum over components of 1/2 log(2 pi sigma^2) + 1/2.
double gaussian_entropy(std::span<const double> log_std);

std::vector<double> gaussian_sample(std::span<const double> mean,
                                    std::span<const double> log_std, Rng& rng);

// Gaussian with state-independent spread. Sigma is stored through its log.
struct GaussianHead {
  Vector mean;
  Vector log_std;

  static GaussianHead from_sigma(Vector mean, const Vector& sigma);

  Vector sigma() const { return log_std.array().exp(); }
  double log_prob(std::span<const double> x) const;
  double entropy() const;
  std::vector<double> sample(Rng& rng) const;
};

// -- checkpoints -- //

// Plain-text dump: a header line with the architecture, then one parameter
// per line with 17 significant digits (exact round trip for doubles).
void write_mlp(std::ostream& os, const Mlp& net);
Mlp read_mlp(std::istream& is);

void write_vector(std::ostream& os, const char* tag, const Vector& v);
Vector read_vector(std::istream& is, const char* tag);

}  // namespace aoi::nn

#endif  // AOI_NN_HPP_
