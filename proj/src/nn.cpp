#include "aoi/nn.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace aoi::nn {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

void check_dims(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": dimension mismatch (" << a << " vs " << b << ")";
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp needs >= 2 sizes");
  Eigen::Index total = 0;
  for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
    if (sizes_[i] < 1 || sizes_[i + 1] < 1)
      throw std::invalid_argument("Mlp layer sizes must be positive");
    offsets_.push_back(total);
    total += Eigen::Index(sizes_[i + 1]) * (sizes_[i] + 1);
  }
  params_ = Vector::Zero(total);
}

Eigen::Map<Matrix> Mlp::weight(int layer) {
  return {params_.data() + weight_offset(layer), sizes_[layer + 1],
          sizes_[layer]};
}

Eigen::Map<const Matrix> Mlp::weight(int layer) const {
  return {params_.data() + weight_offset(layer), sizes_[layer + 1],
          sizes_[layer]};
}

Eigen::Map<Vector> Mlp::bias(int layer) {
  return {params_.data() + bias_offset(layer), sizes_[layer + 1]};
}

Eigen::Map<const Vector> Mlp::bias(int layer) const {
  return {params_.data() + bias_offset(layer), sizes_[layer + 1]};
}

void Mlp::init_layer_orthogonal(int layer, Rng& rng, double gain) {
  const int rows = sizes_[layer + 1];
  const int cols = sizes_[layer];
  std::normal_distribution<double> normal(0.0, 1.0);
  // orthonormal rows or columns, whichever is fewer
  const int tall = std::max(rows, cols);
  const int narrow = std::min(rows, cols);
  Matrix g(tall, narrow);
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(tall, narrow);
  // sign fix makes the draw uniform over the orthogonal group
  const Vector diag = Matrix(qr.matrixQR()).diagonal();
  for (Eigen::Index j = 0; j < narrow; ++j)
    if (diag(j) < 0) q.col(j) *= -1.0;
  auto w = weight(layer);
  if (rows >= cols) {
    w = gain * q;
  } else {
    w = gain * q.transpose();
  }
  bias(layer).setZero();
}

void Mlp::init_orthogonal(Rng& rng, double hidden_gain, double output_gain) {
  for (int layer = 0; layer < num_layers(); ++layer) {
    const bool last = layer + 1 == num_layers();
    init_layer_orthogonal(layer, rng, last ? output_gain : hidden_gain);
  }
}

Matrix Mlp::forward(const Matrix& input) const {
  check_dims(input.rows(), input_size(), "Mlp::forward");
  Matrix a = input;
  for (int layer = 0; layer < num_layers(); ++layer) {
    Matrix z = weight(layer) * a;
    z.colwise() += bias(layer);
    if (layer + 1 < num_layers()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

Matrix Mlp::forward(const Matrix& input, MlpCache& cache) const {
  check_dims(input.rows(), input_size(), "Mlp::forward");
  cache.activations.clear();
  cache.activations.reserve(num_layers() + 1);
  cache.activations.push_back(input);
  for (int layer = 0; layer < num_layers(); ++layer) {
    Matrix z = weight(layer) * cache.activations.back();
    z.colwise() += bias(layer);
    if (layer + 1 < num_layers()) z = z.cwiseMax(0.0);
    cache.activations.push_back(std::move(z));
  }
  return cache.activations.back();
}

Vector Mlp::forward(const Vector& input) const {
  return forward(Matrix(input)).col(0);
}

Vector Mlp::backward(const MlpCache& cache, const Matrix& upstream) const {
  if (static_cast<int>(cache.activations.size()) != num_layers() + 1)
    throw std::logic_error("Mlp::backward without a matching forward pass");
  check_dims(upstream.rows(), output_size(), "Mlp::backward");
  check_dims(upstream.cols(), cache.activations.front().cols(),
             "Mlp::backward batch");
  Vector grad = Vector::Zero(num_params());
  Matrix delta = upstream;
  for (int layer = num_layers() - 1; layer >= 0; --layer) {
    const Matrix& in = cache.activations[layer];
    Eigen::Map<Matrix> gw(grad.data() + weight_offset(layer), sizes_[layer + 1],
                          sizes_[layer]);
    gw.noalias() = delta * in.transpose();
    Eigen::Map<Vector>(grad.data() + bias_offset(layer), sizes_[layer + 1]) =
        delta.rowwise().sum();
    if (layer > 0) {
      Matrix back = weight(layer).transpose() * delta;
      // ReLU derivative; activations hold max(z, 0)
      delta = (in.array() > 0.0).select(back, 0.0);
    }
  }
  return grad;
}

Adam::Adam(Eigen::Index size, AdamConfig config)
    : config_(config), m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

void Adam::step(Eigen::Ref<Vector> params, const Vector& grads) {
  check_dims(params.size(), m_.size(), "Adam::step params");
  check_dims(grads.size(), m_.size(), "Adam::step grads");
  if (!grads.allFinite())
    throw NonFiniteError("Adam::step received a non-finite gradient");
  ++steps_;
  const auto& c = config_;
  m_ = c.beta1 * m_ + (1.0 - c.beta1) * grads;
  v_ = c.beta2 * v_ + (1.0 - c.beta2) * grads.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(steps_));
  params.array() -= c.learning_rate * (m_.array() / bc1) /
                    ((v_.array() / bc2).sqrt() + c.epsilon);
}

double gaussian_log_prob(std::span<const double> mean,
                         std::span<const double> log_std,
                         std::span<const double> x) {
  check_dims(mean.size(), log_std.size(), "gaussian_log_prob");
  check_dims(mean.size(), x.size(), "gaussian_log_prob");
  double total = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double z = (x[i] - mean[i]) * std::exp(-log_std[i]);
    total += -0.5 * z * z - log_std[i] - kHalfLog2Pi;
  }
  return total;
}

double gaussian_entropy(std::span<const double> log_std) {
  double total = 0.0;
  for (double s : log_std) total += s + kHalfLog2Pi + 0.5;
  return total;
}

std::vector<double> gaussian_sample(std::span<const double> mean,
                                    std::span<const double> log_std, Rng& rng) {
  check_dims(mean.size(), log_std.size(), "gaussian_sample");
  std::vector<double> out(mean.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < mean.size(); ++i)
    out[i] = mean[i] + std::exp(log_std[i]) * normal(rng);
  return out;
}

GaussianHead GaussianHead::from_sigma(Vector mean, const Vector& sigma) {
  check_dims(mean.size(), sigma.size(), "GaussianHead::from_sigma");
  if (!(sigma.array() > 0.0).all() || !sigma.allFinite())
    throw std::invalid_argument("GaussianHead: sigma must be positive");
  return {std::move(mean), sigma.array().log()};
}

double GaussianHead::log_prob(std::span<const double> x) const {
  return gaussian_log_prob({mean.data(), std::size_t(mean.size())},
                           {log_std.data(), std::size_t(log_std.size())}, x);
}

double GaussianHead::entropy() const {
  return gaussian_entropy({log_std.data(), std::size_t(log_std.size())});
}

std::vector<double> GaussianHead::sample(Rng& rng) const {
  return gaussian_sample({mean.data(), std::size_t(mean.size())},
                         {log_std.data(), std::size_t(log_std.size())}, rng);
}

void write_vector(std::ostream& os, const char* tag, const Vector& v) {
  os << tag << ' ' << v.size() << '\n';
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) os << v(i) << '\n';
}

Vector read_vector(std::istream& is, const char* tag) {
  std::string word;
  Eigen::Index n = 0;
  if (!(is >> word >> n) || word != tag || n < 0)
    throw std::runtime_error(std::string("checkpoint: expected '") + tag + "'");
  Vector v(n);
  std::string token;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(is >> token)) throw std::runtime_error("checkpoint: truncated vector");
    // strtod parses inf/nan spellings that operator>> rejects
    v(i) = std::strtod(token.c_str(), nullptr);
  }
  return v;
}

void write_mlp(std::ostream& os, const Mlp& net) {
  os << "mlp " << net.layer_sizes().size();
  for (int s : net.layer_sizes()) os << ' ' << s;
  os << '\n';
  write_vector(os, "params", net.params());
}

Mlp read_mlp(std::istream& is) {
  std::string word;
  std::size_t count = 0;
  if (!(is >> word >> count) || word != "mlp" || count < 2)
    throw std::runtime_error("checkpoint: expected 'mlp' header");
  std::vector<int> sizes(count);
  for (auto& s : sizes)
    if (!(is >> s)) throw std::runtime_error("checkpoint: bad layer sizes");
  Mlp net(sizes);
  Vector params = read_vector(is, "params");
  if (params.size() != net.num_params())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  net.params() = std::move(params);
  return net;
}

}  // namespace aoi::nn
