// SPDX-License-Identifier: Apache-2.0
#include "msdda/diffusion.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "msdda/csv.hpp"
#include "msdda/errors.hpp"
#include "msdda/parallel.hpp"
#include "msdda/rng.hpp"
#include "msdda/tape.hpp"

namespace msdda {

EpsilonModel::EpsilonModel(MlpParams params, const NoiseSchedule& schedule, double eta)
    : params_(std::move(params)),
      schedule_(schedule),
      eta_(eta),
      calls_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
  params_.arch.validate();
  if (params_.flat.size() != params_.arch.param_count())
    throw ParameterError("model: params length does not match architecture");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ParameterError("model.eta: must lie in [0, 1]");
  embeddings_.reserve(schedule_.T());
  for (int t = 1; t <= schedule_.T(); ++t)
    embeddings_.push_back(time_embedding(t, schedule_.T(), params_.arch.t_embed_dim));
}

Eigen::VectorXd EpsilonModel::predict(const Eigen::Ref<const Eigen::VectorXd>& x, int t) const {
  if (t < 1 || t > schedule_.T())
    throw ParameterError("predict: step t=" + std::to_string(t) + " out of range");
  calls_->fetch_add(1, std::memory_order_relaxed);
  return forward_embedded(params_, x, embeddings_[t - 1]);
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kRing8: return "ring8";
    case DatasetKind::kGauss1: return "gauss1";
    case DatasetKind::kCustomFile: return "custom-file";
  }
  return "?";
}

DatasetKind parse_dataset_kind(const std::string& name) {
  if (name == "ring8") return DatasetKind::kRing8;
  if (name == "gauss1") return DatasetKind::kGauss1;
  if (name == "custom-file") return DatasetKind::kCustomFile;
  throw ParameterError("dataset.kind: unknown dataset '" + name + "'");
}

Eigen::MatrixXd ring8_centers(double scale) {
  Eigen::MatrixXd c(2, 8);
  for (int k = 0; k < 8; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / 8.0;
    c(0, k) = 2.0 * scale * std::cos(angle);
    c(1, k) = 2.0 * scale * std::sin(angle);
  }
  return c;
}

Dataset2D make_dataset(const DatasetSpec& spec) {
  if (spec.kind == DatasetKind::kCustomFile) {
    Dataset2D d = load_dataset_csv(spec.path);
    d.spec = spec;
    d.spec.n = static_cast<int>(d.points.cols());
    return d;
  }
  if (spec.n < 1) throw ParameterError("dataset.n: must be >= 1");
  if (!(spec.scale > 0.0)) throw ParameterError("dataset.scale: must be > 0");
  Rng rng = make_stream(spec.seed, StreamTag::kDataset, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset2D d{spec, Eigen::MatrixXd(2, spec.n)};
  if (spec.kind == DatasetKind::kRing8) {
    const Eigen::MatrixXd centers = ring8_centers(spec.scale);
    std::uniform_int_distribution<int> pick(0, 7);
    for (int i = 0; i < spec.n; ++i) {
      const int k = pick(rng);
      const double a = normal(rng);
      const double b = normal(rng);
      d.points(0, i) = centers(0, k) + 0.1 * spec.scale * a;
      d.points(1, i) = centers(1, k) + 0.1 * spec.scale * b;
    }
  } else {
    for (int i = 0; i < spec.n; ++i) {
      const double a = normal(rng);
      const double b = normal(rng);
      d.points(0, i) = spec.scale * a;
      d.points(1, i) = spec.scale * b;
    }
  }
  return d;
}

Dataset2D load_dataset_csv(const std::filesystem::path& path) {
  const auto rows = read_numeric_csv(path);
  if (rows.empty()) throw ParameterError("dataset: " + path.string() + " has no points");
  const std::size_t d = rows.front().size();
  Dataset2D out;
  out.spec.kind = DatasetKind::kCustomFile;
  out.spec.path = path;
  out.points.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d)
      throw ParameterError("dataset: line " + std::to_string(i + 1) + " has " +
                           std::to_string(rows[i].size()) + " values, expected " +
                           std::to_string(d));
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::isfinite(rows[i][j]))
        throw ParameterError("dataset: non-finite value on line " + std::to_string(i + 1));
      out.points(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = rows[i][j];
    }
  }
  out.spec.n = static_cast<int>(rows.size());
  return out;
}

Eigen::VectorXd forward_sample(const NoiseSchedule& schedule,
                               const Eigen::Ref<const Eigen::VectorXd>& x0, int t,
                               const Eigen::Ref<const Eigen::VectorXd>& noise) {
  if (x0.size() != noise.size()) throw ParameterError("forward_sample: dimension mismatch");
  if (t < 1) throw ParameterError("forward_sample: t must be >= 1");
  const double ab = schedule.alpha_bar(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * noise;
}

StepCoefficients step_coefficients(const NoiseSchedule& schedule, int t, int t_prev) {
  if (t < 1 || t > schedule.T())
    throw ParameterError("reverse step: t=" + std::to_string(t) + " out of range");
  if (t_prev < 0 || t_prev >= t)
    throw ParameterError("reverse step: t_prev=" + std::to_string(t_prev) + " must lie in [0, t)");
  if (t_prev == t - 1)
    return {schedule.alpha(t), schedule.beta(t), schedule.alpha_bar(t), schedule.beta_tilde(t)};
  const double ab = schedule.alpha_bar(t);
  const double ab_prev = schedule.alpha_bar(t_prev);
  const double alpha = ab / ab_prev;
  const double beta = 1.0 - alpha;
  return {alpha, beta, ab, (1.0 - ab_prev) / (1.0 - ab) * beta};
}

Eigen::VectorXd reverse_mean(const EpsilonModel& model, const Eigen::Ref<const Eigen::VectorXd>& x_t,
                             int t, int t_prev) {
  if (x_t.size() != model.data_dim()) throw ParameterError("reverse_mean: dimension mismatch");
  const StepCoefficients c = step_coefficients(model.schedule(), t, t_prev);
  const Eigen::VectorXd eps = model.predict(x_t, t);
  return (x_t - (c.beta / std::sqrt(1.0 - c.alpha_bar)) * eps) / std::sqrt(c.alpha);
}

double reverse_variance(const NoiseSchedule& schedule, double eta, int t, int t_prev) {
  if (t_prev == 0) {
    step_coefficients(schedule, t, t_prev);
    return kFinalStepVariance;
  }
  return eta * eta * step_coefficients(schedule, t, t_prev).beta_tilde;
}

GaussianPosterior reverse_posterior(const EpsilonModel& model,
                                    const Eigen::Ref<const Eigen::VectorXd>& x_t, int t,
                                    int t_prev) {
  const double var = reverse_variance(model.schedule(), model.eta(), t, t_prev);
  return GaussianPosterior{reverse_mean(model, x_t, t, t_prev), var};
}

std::vector<int> timestep_grid(int T, int stride) {
  if (T < 1) throw ParameterError("grid: T must be >= 1");
  if (stride < 1) throw ParameterError("grid: stride must be >= 1");
  std::vector<int> grid;
  for (int t = T; t > 1; t -= stride) grid.push_back(t);
  grid.push_back(1);
  return grid;
}

EpsilonModel pretrain(const Dataset2D& data, const MlpArchitecture& arch,
                      const NoiseSchedule& schedule, const TrainOptions& options) {
  if (options.steps < 1) throw ParameterError("pretrain.steps: must be >= 1");
  if (options.batch < 1) throw ParameterError("pretrain.batch: must be >= 1");
  if (!(options.lr > 0.0)) throw ParameterError("pretrain.lr: must be > 0");
  if (data.points.rows() != arch.data_dim)
    throw ParameterError("pretrain: dataset dimension does not match arch.data_dim");

  MlpParams params = init_params(arch, options.seed);
  Adam adam;
  adam.lr = options.lr;
  Rng rng = make_stream(options.seed, StreamTag::kPretrain, 1);
  std::uniform_int_distribution<Eigen::Index> pick(0, data.points.cols() - 1);
  std::uniform_int_distribution<int> step_dist(1, schedule.T());
  std::normal_distribution<double> normal(0.0, 1.0);

  const int B = options.batch;
  const int d = arch.data_dim;
  Eigen::MatrixXd x_t(d, B), eps(d, B);
  std::vector<int> ts(B);
  double running = 0.0;
  int running_n = 0;
  for (int step = 1; step <= options.steps; ++step) {
    for (int j = 0; j < B; ++j) {
      const Eigen::Index idx = pick(rng);
      ts[j] = step_dist(rng);
      for (int k = 0; k < d; ++k) eps(k, j) = normal(rng);
      const double ab = schedule.alpha_bar(ts[j]);
      x_t.col(j) = std::sqrt(ab) * data.points.col(idx) + std::sqrt(1.0 - ab) * eps.col(j);
    }
    Tape tape;
    const MlpTapeParams leaves = record_params(tape, params, true);
    const Var in = tape.constant(network_inputs(x_t, ts, schedule.T(), arch.t_embed_dim));
    const Var out = mlp_forward(tape, leaves, in);
    const Var loss = mean(colwise_squared_norm(out - tape.constant(eps)));
    const double value = tape.value(loss)(0, 0);
    if (!std::isfinite(value))
      throw NumericError("pretrain: non-finite loss at step " + std::to_string(step));
    tape.backward(loss);
    adam.step(params.flat, flat_grad(tape, leaves));

    running += value;
    ++running_n;
    if (options.on_log && (step % options.log_every == 0 || step == options.steps)) {
      options.on_log(step, running / running_n);
      running = 0.0;
      running_n = 0;
    }
  }
  return EpsilonModel(std::move(params), schedule, 1.0);
}

double epsilon_loss(const MlpParams& params, const NoiseSchedule& schedule,
                    const Eigen::MatrixXd& x0, std::uint64_t seed) {
  Rng rng = make_stream(seed, StreamTag::kPretrain, 2);
  std::uniform_int_distribution<int> step_dist(1, schedule.T());
  double total = 0.0;
  for (Eigen::Index j = 0; j < x0.cols(); ++j) {
    const int t = step_dist(rng);
    const Eigen::VectorXd eps = standard_normal(rng, x0.rows());
    const Eigen::VectorXd xt = forward_sample(schedule, x0.col(j), t, eps);
    total += (eps - forward(params, xt, t, schedule.T())).squaredNorm();
  }
  return total / static_cast<double>(x0.cols());
}

namespace {

Eigen::VectorXd run_chain(int dim, std::uint64_t seed, std::uint64_t index,
                          const std::vector<int>& grid, const StepFn& step) {
  Rng rng = make_stream(seed, StreamTag::kSample, index);
  Eigen::VectorXd x = standard_normal(rng, dim);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const int t = grid[k];
    const int t_prev = k + 1 < grid.size() ? grid[k + 1] : 0;
    if (t_prev == 0) {
      x = step(x, t, t_prev).mean;
    } else {
      const Eigen::VectorXd z = standard_normal(rng, dim);
      GaussianPosterior p = step(x, t, t_prev);
      x = p.mean + std::sqrt(p.variance) * z;
    }
  }
  return x;
}

}  // namespace

Eigen::MatrixXd ancestral_sample(int dim, int n, std::uint64_t seed, const std::vector<int>& grid,
                                 const StepFn& step, int threads) {
  if (n < 1) throw ParameterError("sample: n must be >= 1");
  if (grid.empty() || grid.back() != 1) throw ParameterError("sample: grid must end at t = 1");
  Eigen::MatrixXd out(dim, n);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    out.col(static_cast<Eigen::Index>(i)) = run_chain(dim, seed, i, grid, step);
  });
  return out;
}

namespace {

StepFn model_step(const EpsilonModel& model) {
  return [&model](const Eigen::VectorXd& x, int t, int t_prev) {
    return reverse_posterior(model, x, t, t_prev);
  };
}

}  // namespace

Eigen::MatrixXd sample(const EpsilonModel& model, int n, std::uint64_t seed, int threads,
                       int stride) {
  return ancestral_sample(model.data_dim(), n, seed, timestep_grid(model.schedule().T(), stride),
                          model_step(model), threads);
}

Eigen::VectorXd sample_one(const EpsilonModel& model, std::uint64_t seed, std::uint64_t index,
                           int stride) {
  return run_chain(model.data_dim(), seed, index, timestep_grid(model.schedule().T(), stride),
                   model_step(model));
}

}  // namespace msdda
