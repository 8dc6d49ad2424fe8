#include "aoi/vppo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "aoi/baselines.hpp"

namespace aoi::vppo {

namespace {

constexpr std::uint64_t kInitStream = 101;
constexpr std::uint64_t kHeadStream = 102;
constexpr std::uint64_t kTrainerStream = 103;

const double kSqrt2 = std::sqrt(2.0);

nn::Matrix stack_columns(std::span<const Experience* const> batch,
                         bool next) {
  const auto dim = static_cast<Eigen::Index>(
      next ? batch.front()->next_observation.size()
           : batch.front()->observation.size());
  nn::Matrix x(dim, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& obs = next ? batch[b]->next_observation : batch[b]->observation;
    x.col(static_cast<Eigen::Index>(b)) =
        Eigen::Map<const nn::Vector>(obs.data(), dim);
  }
  return x;
}

std::span<const double> as_span(const nn::Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

Action decode_votes(std::span<const double> votes, const Topology& topo) {
  const int M = topo.num_devices;
  if (static_cast<int>(votes.size()) != 2 * M) {
    std::ostringstream os;
    os << "decode_votes: expected " << 2 * M << " votes, got " << votes.size();
    throw std::invalid_argument(os.str());
  }
  const auto sample_votes = votes.first(M);
  const auto update_votes = votes.subspan(M);
  Action action;
  action.sample_sets.reserve(topo.num_relays);
  for (const auto& group : topo.groups)
    action.sample_sets.push_back(top_k(group, sample_votes, topo.relay_channels));
  std::vector<int> devices(M);
  std::iota(devices.begin(), devices.end(), 0);
  action.update_set = top_k(devices, update_votes, topo.tbs_channels);
  return action;
}

PolicyParams init_policy(const NetworkShape& shape, std::uint64_t seed,
                         double log_std_init) {
  if (shape.observation_size < 1 || shape.num_votes < 1)
    throw std::invalid_argument("init_policy: empty network shape");
  std::vector<int> actor_sizes{shape.observation_size};
  actor_sizes.insert(actor_sizes.end(), shape.hidden.begin(), shape.hidden.end());
  std::vector<int> critic_sizes = actor_sizes;
  actor_sizes.push_back(shape.num_votes);
  critic_sizes.push_back(1);

  auto rng = make_rng(seed, kInitStream);
  PolicyParams p{nn::Mlp(actor_sizes),
                 nn::Vector::Constant(shape.num_votes, log_std_init),
                 nn::Mlp(critic_sizes)};
  p.actor.init_orthogonal(rng, kSqrt2, 0.01);
  p.critic.init_orthogonal(rng, kSqrt2, 1.0);
  return p;
}

void write_policy(std::ostream& os, const PolicyParams& policy) {
  os << "aoi-policy 1\nactor\n";
  nn::write_mlp(os, policy.actor);
  nn::write_vector(os, "log_std", policy.log_std);
  os << "critic\n";
  nn::write_mlp(os, policy.critic);
}

PolicyParams read_policy(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "aoi-policy" || version != 1)
    throw std::runtime_error("checkpoint: not an aoi-policy v1 file");
  std::string section;
  if (!(is >> section) || section != "actor")
    throw std::runtime_error("checkpoint: missing actor section");
  PolicyParams p;
  p.actor = nn::read_mlp(is);
  p.log_std = nn::read_vector(is, "log_std");
  if (!(is >> section) || section != "critic")
    throw std::runtime_error("checkpoint: missing critic section");
  p.critic = nn::read_mlp(is);
  if (p.log_std.size() != p.actor.output_size() ||
      p.critic.input_size() != p.actor.input_size() ||
      p.critic.output_size() != 1)
    throw std::runtime_error("checkpoint: inconsistent architecture");
  return p;
}

void save_policy(const std::filesystem::path& path, const PolicyParams& policy) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  write_policy(out, policy);
}

PolicyParams load_policy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_policy(in);
}

TransferMode parse_transfer_mode(std::string_view name) {
  if (name == "uninitialized") return TransferMode::uninitialized;
  if (name == "explore") return TransferMode::explore;
  if (name == "adapt") return TransferMode::adapt;
  throw std::invalid_argument("unknown transfer mode '" + std::string(name) +
                              "'");
}

std::string_view transfer_mode_name(TransferMode mode) {
  switch (mode) {
    case TransferMode::uninitialized:
      return "uninitialized";
    case TransferMode::explore:
      return "explore";
    case TransferMode::adapt:
      return "adapt";
  }
  return "?";
}

PolicyParams transfer_init(const PolicyParams& pretrained, TransferMode mode,
                           std::uint64_t seed, double log_std_init) {
  const auto& sizes = pretrained.actor.layer_sizes();
  NetworkShape shape{sizes.front(), sizes.back(),
                     std::vector<int>(sizes.begin() + 1, sizes.end() - 1)};
  switch (mode) {
    case TransferMode::uninitialized:
      return init_policy(shape, seed, log_std_init);
    case TransferMode::adapt:
      return pretrained;
    case TransferMode::explore: {
      PolicyParams p = pretrained;
      auto rng = make_rng(seed, kHeadStream);
      p.actor.init_layer_orthogonal(p.actor.num_layers() - 1, rng, 0.01);
      return p;
    }
  }
  throw std::logic_error("unreachable transfer mode");
}

ActResult act(const PolicyParams& policy, const Observation& observation,
              const Topology& topo, Rng& rng, bool deterministic) {
  const nn::Vector x =
      Eigen::Map<const nn::Vector>(observation.data(), observation.size());
  const nn::Vector mean = policy.actor.forward(x);
  ActResult out;
  if (deterministic) {
    out.votes.assign(mean.data(), mean.data() + mean.size());
  } else {
    out.votes = nn::gaussian_sample(as_span(mean), as_span(policy.log_std), rng);
  }
  out.log_prob =
      nn::gaussian_log_prob(as_span(mean), as_span(policy.log_std), out.votes);
  out.action = decode_votes(out.votes, topo);
  return out;
}

Advantages compute_advantages(std::span<const double> rewards,
                              std::span<const double> values,
                              std::span<const double> next_values,
                              std::span<const std::uint8_t> dones,
                              double gamma) {
  const std::size_t n = rewards.size();
  if (values.size() != n || next_values.size() != n || dones.size() != n)
    throw std::invalid_argument("compute_advantages: length mismatch");
  Advantages out;
  out.advantages.resize(n);
  out.returns.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double bootstrap = dones[t] ? 0.0 : next_values[t];
    out.advantages[t] = rewards[t] + gamma * bootstrap - values[t];
  }
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    if (dones[i]) running = 0.0;
    running = rewards[i] + gamma * running;
    out.returns[i] = running;
  }
  return out;
}

void compute_advantages(std::vector<Experience>& buffer, const nn::Mlp& critic,
                        double gamma) {
  if (buffer.empty()) return;
  std::vector<const Experience*> ptrs;
  ptrs.reserve(buffer.size());
  for (const auto& e : buffer) ptrs.push_back(&e);
  const nn::Matrix v = critic.forward(stack_columns(ptrs, false));
  const nn::Matrix v_next = critic.forward(stack_columns(ptrs, true));

  std::vector<double> rewards, values, next_values;
  std::vector<std::uint8_t> dones;
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    rewards.push_back(buffer[i].reward);
    values.push_back(v(0, col));
    next_values.push_back(buffer[i].done ? 0.0 : v_next(0, col));
    dones.push_back(buffer[i].done ? 1 : 0);
  }
  const auto adv = compute_advantages(rewards, values, next_values, dones, gamma);
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    buffer[i].value = values[i];
    buffer[i].next_value = next_values[i];
    buffer[i].advantage = adv.advantages[i];
    buffer[i].ret = adv.returns[i];
  }
}

double clipped_surrogate(double ratio, double advantage, double clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  return std::min(ratio * advantage, clipped * advantage);
}

LossResult ppo_loss(std::span<const Experience* const> batch,
                    const PolicyParams& policy, const TrainConfig& config) {
  if (batch.empty()) throw std::invalid_argument("ppo_loss: empty batch");
  const auto B = static_cast<Eigen::Index>(batch.size());
  const double inv_b = 1.0 / static_cast<double>(B);
  const nn::Matrix x = stack_columns(batch, false);
  const Eigen::Index dim = policy.num_votes();

  nn::MlpCache actor_cache;
  nn::MlpCache critic_cache;
  const nn::Matrix mean = policy.actor.forward(x, actor_cache);
  const nn::Matrix value = policy.critic.forward(x, critic_cache);

  const nn::Vector inv_var = (-2.0 * policy.log_std.array()).exp();
  nn::Matrix actor_upstream(dim, B);
  nn::Matrix critic_upstream(1, B);
  nn::Vector grad_log_std = nn::Vector::Zero(dim);

  LossResult out;
  double surrogate_sum = 0.0;
  double sq_err_sum = 0.0;
  long clipped = 0;
  for (Eigen::Index b = 0; b < B; ++b) {
    const Experience& e = *batch[static_cast<std::size_t>(b)];
    if (static_cast<Eigen::Index>(e.votes.size()) != dim)
      throw std::invalid_argument("ppo_loss: vote dimension mismatch");
    const Eigen::Map<const nn::Vector> votes(e.votes.data(), dim);
    const nn::Vector diff = votes - mean.col(b);
    const double log_prob =
        nn::gaussian_log_prob({mean.col(b).data(), std::size_t(dim)},
                              as_span(policy.log_std), e.votes);
    const double ratio = std::exp(log_prob - e.old_log_prob);
    const double a = e.advantage;
    const double unclipped = ratio * a;
    const double clipped_value =
        std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip) * a;
    surrogate_sum += std::min(unclipped, clipped_value);

    // the clipped branch has zero gradient w.r.t. the ratio
    const bool active = unclipped <= clipped_value;
    if (!active) ++clipped;
    const double coef = active ? -inv_b * a * ratio : 0.0;  // dL/dlogp
    actor_upstream.col(b) = coef * diff.cwiseProduct(inv_var);
    grad_log_std.array() +=
        coef * (diff.array().square() * inv_var.array() - 1.0);

    const double err = e.ret - value(0, b);
    sq_err_sum += err * err;
    critic_upstream(0, b) = -2.0 * config.value_coef * inv_b * err;
  }

  out.actor_loss = -surrogate_sum * inv_b;
  out.critic_loss = sq_err_sum * inv_b;
  out.entropy = nn::gaussian_entropy(as_span(policy.log_std));
  out.total = out.actor_loss + config.value_coef * out.critic_loss -
              config.entropy_coef * out.entropy;
  out.clip_fraction = static_cast<double>(clipped) * inv_b;
  if (!std::isfinite(out.total))
    throw nn::NonFiniteError("ppo_loss: non-finite loss");

  grad_log_std.array() -= config.entropy_coef;  // dH/dlog_std = 1
  out.grad_actor = policy.actor.backward(actor_cache, actor_upstream);
  out.grad_log_std = std::move(grad_log_std);
  out.grad_critic = policy.critic.backward(critic_cache, critic_upstream);
  return out;
}

int TrainConfig::episodes_per_iter(int horizon) const {
  if (episodes_per_iteration > 0) return episodes_per_iteration;
  return std::max(1, buffer_size / horizon);
}

long TrainConfig::iterations(int horizon) const {
  const long e = episodes_per_iter(horizon);
  return (total_episodes + e - 1) / e;
}

void TrainConfig::validate(int horizon) const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
  require(clip > 0.0 && clip < 1.0, "clip range must lie in (0, 1)");
  require(learning_rate >= 0.0, "learning rate must be nonnegative");
  require(epochs >= 1, "epochs must be >= 1");
  require(minibatch_size >= 1, "minibatch size must be >= 1");
  require(total_episodes >= 1, "total episodes must be >= 1");
  require(!hidden.empty(), "at least one hidden layer is required");
  require(static_cast<long>(minibatch_size) <=
              static_cast<long>(episodes_per_iter(horizon)) * horizon,
          "minibatch size must not exceed the buffer length E*T");
}

void write_train_log(std::ostream& os, std::span<const TrainLogRow> rows) {
  os << kTrainLogHeader << '\n';
  os << std::setprecision(10);
  for (const auto& r : rows) {
    os << r.iteration << ',' << r.episodes_seen << ',' << r.mean_reward << ','
       << r.mean_aoi_tbs << ',' << r.mean_aoi_relay << ',' << r.actor_loss
       << ',' << r.critic_loss << ',' << r.entropy << '\n';
  }
}

DivergenceError::DivergenceError(long iteration, const std::string& what)
    : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what),
      iteration_(iteration) {}

Trainer::Trainer(Env env, TrainConfig config, PolicyParams initial)
    : env_(std::move(env)),
      config_(std::move(config)),
      policy_(std::move(initial)),
      rng_(make_rng(config_.seed, kTrainerStream)) {
  config_.validate(env_.config().horizon);
  const int M = env_.topology().num_devices;
  if (policy_.num_votes() != 2 * M ||
      static_cast<std::size_t>(policy_.observation_size()) !=
          env_.observation().size())
    throw std::invalid_argument("Trainer: policy does not match environment");
  const nn::AdamConfig adam{config_.learning_rate};
  actor_opt_ = nn::Adam(policy_.actor.num_params(), adam);
  log_std_opt_ = nn::Adam(policy_.log_std.size(), adam);
  critic_opt_ = nn::Adam(policy_.critic.num_params(), adam);
}

void Trainer::collect() {
  buffer_.clear();
  const int episodes = config_.episodes_per_iter(env_.config().horizon);
  buffer_.reserve(static_cast<std::size_t>(episodes) * env_.config().horizon);
  collected_return_ = collected_tbs_ = collected_relay_ = 0.0;
  collected_episodes_ = episodes;
  for (int ep = 0; ep < episodes; ++ep) {
    Observation obs = env_.reset();
    double episode_return = 0.0;
    while (!env_.done()) {
      auto decision = act(policy_, obs, env_.topology(), rng_, false);
      auto step = env_.step(decision.action);
      episode_return += step.reward;
      Experience e;
      e.observation = std::move(obs);
      e.votes = std::move(decision.votes);
      e.action = std::move(decision.action);
      e.reward = step.reward;
      e.next_observation = step.observation;
      e.done = step.done;
      e.old_log_prob = decision.log_prob;
      buffer_.push_back(std::move(e));
      obs = std::move(step.observation);
    }
    const auto avg = env_.episode_average();
    collected_return_ += episode_return;
    collected_tbs_ += avg.tbs;
    collected_relay_ += avg.relay;
  }
  episodes_seen_ += episodes;
  compute_advantages(buffer_, policy_.critic, config_.gamma);
}

void Trainer::optimize(TrainLogRow& row) {
  if (config_.normalize_advantages && buffer_.size() > 1) {
    double mean = 0.0;
    for (const auto& e : buffer_) mean += e.advantage;
    mean /= static_cast<double>(buffer_.size());
    double var = 0.0;
    for (const auto& e : buffer_) var += (e.advantage - mean) * (e.advantage - mean);
    var /= static_cast<double>(buffer_.size());
    const double scale = 1.0 / (std::sqrt(var) + 1e-8);
    for (auto& e : buffer_) e.advantage = (e.advantage - mean) * scale;
  }

  std::vector<const Experience*> order;
  order.reserve(buffer_.size());
  for (const auto& e : buffer_) order.push_back(&e);

  double actor_sum = 0.0, critic_sum = 0.0;
  long updates = 0;
  const auto mb = static_cast<std::size_t>(config_.minibatch_size);
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng_);
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const auto len = std::min(mb, order.size() - start);
      const std::span<const Experience* const> batch(order.data() + start, len);
      LossResult loss;
      try {
        loss = ppo_loss(batch, policy_, config_);
        actor_opt_.step(policy_.actor.params(), loss.grad_actor);
        log_std_opt_.step(policy_.log_std, loss.grad_log_std);
        critic_opt_.step(policy_.critic.params(), loss.grad_critic);
      } catch (const nn::NonFiniteError& err) {
        throw DivergenceError(iteration_, err.what());
      }
      actor_sum += loss.actor_loss;
      critic_sum += loss.critic_loss;
      ++updates;
    }
  }
  if (!policy_.actor.all_finite() || !policy_.critic.all_finite() ||
      !policy_.log_std.allFinite())
    throw DivergenceError(iteration_, "non-finite parameters");
  row.actor_loss = actor_sum / std::max(1L, updates);
  row.critic_loss = critic_sum / std::max(1L, updates);
}

TrainLogRow Trainer::run_iteration() {
  ++iteration_;
  collect();
  TrainLogRow row;
  row.iteration = iteration_;
  row.episodes_seen = episodes_seen_;
  row.mean_reward = collected_return_ / collected_episodes_;
  row.mean_aoi_tbs = collected_tbs_ / collected_episodes_;
  row.mean_aoi_relay = collected_relay_ / collected_episodes_;
  optimize(row);
  row.entropy = nn::gaussian_entropy(as_span(policy_.log_std));
  return row;
}

TrainResult train(Env env, const TrainConfig& config, PolicyParams initial,
                  const CheckpointSink& checkpoint,
                  const IterationObserver& observer) {
  const int horizon = env.config().horizon;
  Trainer trainer(std::move(env), config, std::move(initial));
  TrainResult result;
  const long iterations = config.iterations(horizon);
  for (long i = 0; i < iterations; ++i) {
    auto row = trainer.run_iteration();
    result.curve.push_back(row);
    if (observer) observer(row, trainer.policy());
    if (checkpoint && config.checkpoint_every > 0 &&
        (trainer.iteration() % config.checkpoint_every == 0 ||
         i + 1 == iterations))
      checkpoint(trainer.iteration(), trainer.policy());
  }
  result.policy = trainer.policy();
  return result;
}

TrainResult train(Env env, const TrainConfig& config,
                  const CheckpointSink& checkpoint,
                  const IterationObserver& observer) {
  const NetworkShape shape{static_cast<int>(env.observation().size()),
                           2 * env.topology().num_devices, config.hidden};
  auto initial = init_policy(shape, config.seed, config.log_std_init);
  return train(std::move(env), config, std::move(initial), checkpoint,
               observer);
}

}  // namespace aoi::vppo
