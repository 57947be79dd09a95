#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "tgom/data_io.hpp"
#include "tgom/model.hpp"
#include "tgom/sampler.hpp"

namespace tgom::testing {

// Panel with T waves five years apart; each wave observed with probability p_obs
// (at least one per individual). Ages are centered.
inline PanelDataset random_panel(std::mt19937_64& rng, std::size_t n, std::size_t J, std::size_t T,
                                 double p_obs = 0.8) {
  PanelDataset d = make_empty_panel(n, J, T);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> start(-15.0, 5.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double a0 = start(rng);
    d.dob[i] = static_cast<std::int32_t>(-20000 - 1000 * static_cast<int>(i % 7));
    bool any = false;
    for (std::size_t t = 0; t < T; ++t) {
      const bool obs = unit(rng) < p_obs || (!any && t + 1 == T);
      if (!obs) continue;
      any = true;
      d.observed[i * T + t] = 1;
      d.ages[i * T + t] = a0 + 5.0 * static_cast<double>(t);
      d.interview_day[i * T + t] = static_cast<std::int32_t>(4000 + 1826 * t);
      for (std::size_t j = 0; j < J; ++j) d.outcomes[(i * T + t) * J + j] = unit(rng) < 0.4 ? 1 : 0;
    }
  }
  return d;
}

inline TrajectoryParams random_params(std::mt19937_64& rng, std::size_t K, std::size_t J) {
  std::normal_distribution<double> b0(0.0, 1.5), b1(0.1, 0.1);
  TrajectoryParams p(K, J);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < J; ++j) {
      p.beta0(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = b0(rng);
      p.beta1(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = b1(rng);
    }
  }
  return p;
}

inline MembershipVector random_membership(std::mt19937_64& rng, std::size_t K) {
  std::gamma_distribution<double> g(0.7, 1.0);
  std::vector<double> w(K);
  double total = 0.0;
  for (double& v : w) total += (v = g(rng) + 1e-6);
  for (double& v : w) v /= total;
  return MembershipVector(std::move(w));
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Chain state fitted to a dataset with caller-chosen parameters.
inline ChainState make_state(const KernelContext& ctx, TrajectoryParams params, const CohortDirichletParams& dir,
                             std::mt19937_64& rng) {
  ChainState s;
  s.params = std::move(params);
  const std::size_t K = s.params.n_profiles();
  s.memberships.resize(ctx.data->n_individuals);
  s.log_memberships.resize(ctx.data->n_individuals);
  for (std::size_t i = 0; i < ctx.data->n_individuals; ++i) s.set_membership(i, random_membership(rng, K));
  s.dirichlet = dir;
  s.z = LatentAssignments::for_dataset(*ctx.data);
  s.iteration = 0;
  sample_z(s, ctx);
  return s;
}

}  // namespace tgom::testing
