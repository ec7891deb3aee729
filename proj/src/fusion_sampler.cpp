// SPDX-License-Identifier: Apache-2.0
#include "msdda/fusion_sampler.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "msdda/alignment.hpp"
#include "msdda/csv.hpp"
#include "msdda/errors.hpp"

namespace msdda {

FusionEnsemble::FusionEnsemble(std::vector<EpsilonModel> models, PreferenceWeights w)
    : models_(std::move(models)), w_(std::move(w)) {
  if (models_.empty()) throw ParameterError("ensemble: at least one model required");
  if (w_.size() != models_.size())
    throw ParameterError("ensemble: " + std::to_string(w_.size()) + " weights for " +
                         std::to_string(models_.size()) + " models");
  const auto& first = models_.front();
  for (std::size_t i = 1; i < models_.size(); ++i) {
    if (!(models_[i].schedule().spec() == first.schedule().spec()))
      throw ParameterError("ensemble: model " + std::to_string(i) +
                           " uses a different noise schedule");
    if (models_[i].data_dim() != first.data_dim())
      throw ParameterError("ensemble: model " + std::to_string(i) + " has a different data dimension");
  }
}

GaussianPosterior fused_posterior(const FusionEnsemble& ensemble,
                                  const Eigen::Ref<const Eigen::VectorXd>& x_t, int t, int t_prev) {
  const auto& w = ensemble.weights();
  const int d = ensemble.data_dim();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<GaussianPosterior> parts(ensemble.size());
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    if (w[i] > 0.0)
      parts[i] = reverse_posterior(ensemble.model(i), x_t, t, t_prev);
    else
      parts[i] = GaussianPosterior{Eigen::VectorXd::Constant(d, nan), nan};
  }
  return fuse(parts, w);
}

Eigen::VectorXd msdda_step(const FusionEnsemble& ensemble,
                           const Eigen::Ref<const Eigen::VectorXd>& x_t, int t, int t_prev,
                           const Eigen::Ref<const Eigen::VectorXd>& z) {
  if (t_prev < 1 || t_prev >= t || t > ensemble.schedule().T())
    throw ParameterError("msdda_step: need 1 <= t_prev < t <= T, got t=" + std::to_string(t) +
                         " t_prev=" + std::to_string(t_prev));
  if (z.size() != ensemble.data_dim()) throw ParameterError("msdda_step: noise dimension mismatch");
  const GaussianPosterior p = fused_posterior(ensemble, x_t, t, t_prev);
  return p.mean + std::sqrt(p.variance) * z;
}

Eigen::VectorXd msdda_step(const FusionEnsemble& ensemble,
                           const Eigen::Ref<const Eigen::VectorXd>& x_t, int t,
                           const Eigen::Ref<const Eigen::VectorXd>& z) {
  return msdda_step(ensemble, x_t, t, t - 1, z);
}

Eigen::MatrixXd msdda_sample(const FusionEnsemble& ensemble, int n, std::uint64_t seed,
                             int threads, int stride) {
  const StepFn step = [&ensemble](const Eigen::VectorXd& x, int t, int t_prev) {
    return fused_posterior(ensemble, x, t, t_prev);
  };
  return ancestral_sample(ensemble.data_dim(), n, seed,
                          timestep_grid(ensemble.schedule().T(), stride), step, threads);
}

std::vector<SweepPoint> sweep_samples(const EpsilonModel& pretrained, const EpsilonModel& model_a,
                                      const EpsilonModel& model_b, const SweepOptions& options) {
  for (double w : options.weights)
    if (!(w >= 0.0 && w <= 1.0)) throw ParameterError("sweep.weights: values must lie in [0, 1]");
  const auto& o = options;
  std::vector<SweepPoint> points;
  points.push_back({"pretrained", std::nullopt, sample(pretrained, o.n, o.seed, o.threads, o.stride)});
  points.push_back({"model_a", 1.0, sample(model_a, o.n, o.seed, o.threads, o.stride)});
  points.push_back({"model_b", 0.0, sample(model_b, o.n, o.seed, o.threads, o.stride)});
  for (double w : o.weights) {
    const FusionEnsemble ensemble({model_a, model_b}, PreferenceWeights::pair(w));
    points.push_back({"msdda", w, msdda_sample(ensemble, o.n, o.seed, o.threads, o.stride)});
    const EpsilonModel soup = reward_soup(model_a, model_b, w);
    points.push_back({"soup", w, sample(soup, o.n, o.seed, o.threads, o.stride)});
  }
  return points;
}

std::vector<SweepRow> summarize_sweep(const std::vector<SweepPoint>& points, const RewardFn& r1,
                                      const RewardFn& r2) {
  std::vector<SweepRow> rows;
  rows.reserve(points.size());
  for (const auto& p : points) {
    const MeanSe a = mean_se(r1.evaluate(p.samples));
    const MeanSe b = mean_se(r2.evaluate(p.samples));
    rows.push_back({p.method, p.w, a.mean, a.se, b.mean, b.se, a.n});
  }
  return rows;
}

std::vector<SweepRow> pareto_sweep(const EpsilonModel& pretrained, const EpsilonModel& model_a,
                                   const EpsilonModel& model_b, const RewardFn& r1,
                                   const RewardFn& r2, const SweepOptions& options) {
  return summarize_sweep(sweep_samples(pretrained, model_a, model_b, options), r1, r2);
}

std::string format_sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << kSweepCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.method << ',' << (r.w ? format_double(*r.w) : std::string()) << ','
        << format_double(r.mean_r1) << ',' << format_double(r.se_r1) << ','
        << format_double(r.mean_r2) << ',' << format_double(r.se_r2) << ',' << r.n << '\n';
  }
  return out.str();
}

std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kSweepCsvHeader)
    throw ParameterError("sweep csv: missing or unexpected header");
  std::vector<SweepRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7)
      throw ParameterError("sweep csv: line " + std::to_string(lineno) + " has " +
                           std::to_string(f.size()) + " fields, expected 7");
    SweepRow r;
    r.method = f[0];
    if (!f[1].empty()) r.w = parse_double(f[1]);
    r.mean_r1 = parse_double(f[2]);
    r.se_r1 = parse_double(f[3]);
    r.mean_r2 = parse_double(f[4]);
    r.se_r2 = parse_double(f[5]);
    r.n = static_cast<std::size_t>(std::stoull(f[6]));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace msdda
