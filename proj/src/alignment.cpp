// SPDX-License-Identifier: Apache-2.0
#include "msdda/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "msdda/csv.hpp"
#include "msdda/errors.hpp"
#include "msdda/rng.hpp"

namespace msdda {

std::vector<PreferencePair> make_pairs(const EpsilonModel& model, const RewardFn& reward,
                                       int n_pairs, std::uint64_t seed, int threads) {
  if (n_pairs < 1) throw ParameterError("pairs.n_pairs: must be >= 1");
  const Eigen::MatrixXd x = sample(model, 2 * n_pairs, seed, threads);
  std::vector<PreferencePair> pairs;
  pairs.reserve(n_pairs);
  for (int k = 0; k < n_pairs; ++k) {
    const Eigen::VectorXd a = x.col(2 * k);
    const Eigen::VectorXd b = x.col(2 * k + 1);
    const double ra = reward(a);
    const double rb = reward(b);
    if (ra >= rb)
      pairs.push_back({a, b, ra - rb});
    else
      pairs.push_back({b, a, rb - ra});
  }
  return pairs;
}

void write_pairs_csv(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs) {
  std::ostringstream out;
  for (const auto& p : pairs) {
    for (Eigen::Index i = 0; i < p.x0_win.size(); ++i) out << format_double(p.x0_win[i]) << ',';
    for (Eigen::Index i = 0; i < p.x0_lose.size(); ++i) out << format_double(p.x0_lose[i]) << ',';
    out << format_double(p.margin) << '\n';
  }
  write_text_file(path, out.str());
}

std::vector<PreferencePair> read_pairs_csv(const std::filesystem::path& path, int dim) {
  std::vector<PreferencePair> pairs;
  std::size_t line = 0;
  for (const auto& row : read_numeric_csv(path)) {
    ++line;
    if (row.size() != static_cast<std::size_t>(2 * dim + 1))
      throw ParameterError("pairs: line " + std::to_string(line) + " has " +
                           std::to_string(row.size()) + " fields, expected " +
                           std::to_string(2 * dim + 1));
    PreferencePair p;
    p.x0_win = Eigen::Map<const Eigen::VectorXd>(row.data(), dim);
    p.x0_lose = Eigen::Map<const Eigen::VectorXd>(row.data() + dim, dim);
    p.margin = row.back();
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<DpoDraw> draw_dpo_noise(std::size_t n, int dim, int T, std::uint64_t seed) {
  std::vector<DpoDraw> draws(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_stream(seed, StreamTag::kDpo, i);
    std::uniform_int_distribution<int> step(1, T);
    draws[i].t = step(rng);
    draws[i].eps_win = standard_normal(rng, dim);
    draws[i].eps_lose = standard_normal(rng, dim);
  }
  return draws;
}

Var record_step_dpo_loss(Tape& tape, const MlpTapeParams& theta, const MlpParams& pre,
                         const std::vector<PreferencePair>& batch,
                         const std::vector<DpoDraw>& draws, const NoiseSchedule& schedule,
                         const DpoHyper& hyper, Eigen::RowVectorXd* z_out) {
  if (batch.empty()) throw ParameterError("step_dpo_loss: empty batch");
  if (draws.size() != batch.size()) throw ParameterError("step_dpo_loss: one draw per pair required");
  if (!(theta.arch == pre.arch)) throw ParameterError("step_dpo_loss: architecture mismatch");
  if (!(hyper.lambda > 0.0)) throw ParameterError("dpo.lambda: must be > 0");
  if (!(hyper.omega > 0.0)) throw ParameterError("dpo.omega: must be > 0");

  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  const int d = theta.arch.data_dim;
  const int T = schedule.T();
  // Columns [0, B) hold the winners, [B, 2B) the losers.
  Eigen::MatrixXd x_t(d, 2 * B), eps(d, 2 * B);
  std::vector<int> ts(2 * B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const auto& p = batch[i];
    const auto& dr = draws[i];
    if (p.x0_win.size() != d || p.x0_lose.size() != d)
      throw ParameterError("step_dpo_loss: pair dimension mismatch");
    ts[i] = ts[i + B] = dr.t;
    eps.col(i) = dr.eps_win;
    eps.col(i + B) = dr.eps_lose;
    x_t.col(i) = forward_sample(schedule, p.x0_win, dr.t, dr.eps_win);
    x_t.col(i + B) = forward_sample(schedule, p.x0_lose, dr.t, dr.eps_lose);
  }

  const Var inputs = tape.constant(network_inputs(x_t, ts, T, theta.arch.t_embed_dim));
  const Var eps_theta = mlp_forward(tape, theta, inputs);
  const Var eps_pre = mlp_forward(tape, record_params(tape, pre, false), inputs);
  const Var noise = tape.constant(eps);

  const Var err_theta = colwise_squared_norm(noise - eps_theta);
  const Var err_pre = colwise_squared_norm(noise - eps_pre);
  const Var drift = colwise_squared_norm(eps_theta - eps_pre);
  // (D_theta - drift) per column; winners minus losers via a pairing matrix.
  const Var per_column = (err_theta - err_pre) - drift;
  Eigen::MatrixXd pairing = Eigen::MatrixXd::Zero(2 * B, B);
  for (Eigen::Index i = 0; i < B; ++i) {
    pairing(i, i) = 1.0;
    pairing(i + B, i) = -1.0;
  }
  const Var inner = matmul(per_column, tape.constant(std::move(pairing)));
  const int T_train = hyper.T_train > 0 ? hyper.T_train : T;
  const Var z = (-hyper.lambda * T_train * hyper.omega) * inner;
  if (z_out) *z_out = tape.value(z).row(0);
  return -1.0 * mean(log_sigmoid(z));
}

DpoLoss step_dpo_loss(const MlpParams& theta, const MlpParams& pre,
                      const std::vector<PreferencePair>& batch, const NoiseSchedule& schedule,
                      const DpoHyper& hyper, std::uint64_t seed) {
  if (!(theta.arch == pre.arch)) throw ParameterError("step_dpo_loss: architecture mismatch");
  Tape tape;
  const MlpTapeParams leaves = record_params(tape, theta, true);
  const auto draws = draw_dpo_noise(batch.size(), theta.arch.data_dim, schedule.T(), seed);
  DpoLoss out;
  const Var loss = record_step_dpo_loss(tape, leaves, pre, batch, draws, schedule, hyper, &out.z);
  out.loss = tape.value(loss)(0, 0);
  tape.backward(loss);
  out.grad = flat_grad(tape, leaves);
  return out;
}

GradcheckReport gradcheck_dpo(const MlpParams& theta, const MlpParams& pre,
                              const std::vector<PreferencePair>& batch,
                              const NoiseSchedule& schedule, const DpoHyper& hyper,
                              std::uint64_t seed, int coords, double h) {
  if (coords < 1) throw ParameterError("gradcheck: coords must be >= 1");
  const DpoLoss base = step_dpo_loss(theta, pre, batch, schedule, hyper, seed);
  GradcheckReport rep;
  rep.loss = base.loss;
  rep.coords = coords;
  Rng rng = make_stream(seed, StreamTag::kDpo, 0x6C4EC);
  std::uniform_int_distribution<Eigen::Index> pick(0, theta.flat.size() - 1);
  MlpParams probe = theta;
  for (int k = 0; k < coords; ++k) {
    const Eigen::Index i = pick(rng);
    const double keep = probe.flat[i];
    probe.flat[i] = keep + h;
    const double up = step_dpo_loss(probe, pre, batch, schedule, hyper, seed).loss;
    probe.flat[i] = keep - h;
    const double down = step_dpo_loss(probe, pre, batch, schedule, hyper, seed).loss;
    probe.flat[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    const double g = base.grad[i];
    const double rel = std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1e-6});
    if (rel > rep.max_rel_error) {
      rep.max_rel_error = rel;
      rep.worst_index = static_cast<std::size_t>(i);
    }
  }
  return rep;
}

EpsilonModel finetune_dpo(const EpsilonModel& pre, const std::vector<PreferencePair>& pairs,
                          const DpoHyper& hyper, double eta,
                          const std::function<void(int step, double loss)>& on_log, int log_every) {
  if (pairs.empty()) throw ParameterError("finetune_dpo: no preference pairs");
  if (hyper.steps < 0) throw ParameterError("dpo.steps: must be >= 0");
  if (hyper.batch < 1) throw ParameterError("dpo.batch: must be >= 1");
  if (!(hyper.lr > 0.0)) throw ParameterError("dpo.lr: must be > 0");

  MlpParams theta = pre.params();
  Adam adam;
  adam.lr = hyper.lr;
  Rng order = make_stream(hyper.seed, StreamTag::kDpo, 0xBA7C4);
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
  std::vector<PreferencePair> batch(hyper.batch);
  double running = 0.0;
  int running_n = 0;
  for (int step = 1; step <= hyper.steps; ++step) {
    for (auto& p : batch) p = pairs[pick(order)];
    const std::uint64_t step_seed = hyper.seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(step));
    const DpoLoss l = step_dpo_loss(theta, pre.params(), batch, pre.schedule(), hyper, step_seed);
    if (!std::isfinite(l.loss))
      throw NumericError("finetune_dpo: non-finite loss at step " + std::to_string(step));
    adam.step(theta.flat, l.grad);
    running += l.loss;
    ++running_n;
    if (on_log && (step % log_every == 0 || step == hyper.steps)) {
      on_log(step, running / running_n);
      running = 0.0;
      running_n = 0;
    }
  }
  return EpsilonModel(std::move(theta), pre.schedule(), eta);
}

EpsilonModel reward_soup(const EpsilonModel& model_a, const EpsilonModel& model_b, double w) {
  if (!(model_a.schedule().spec() == model_b.schedule().spec()))
    throw ParameterError("reward_soup: models use different schedules");
  if (!(model_a.params().arch == model_b.params().arch))
    throw ParameterError("reward_soup: architecture mismatch");
  const double eta = w * model_a.eta() + (1.0 - w) * model_b.eta();
  return EpsilonModel(interpolate_params(model_a.params(), model_b.params(), w), model_a.schedule(),
                      eta);
}

}  // namespace msdda
