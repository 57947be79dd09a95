#include "tgom/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace tgom {

namespace {

std::vector<double> draw_xi(const DirichletParams& d) { return d.xi(); }

// Per-draw xi averaged over cohorts.
std::vector<double> pooled_xi(const Draw& draw) {
  const std::size_t K = draw.dirichlet.per_cohort.front().size();
  std::vector<double> acc(K, 0.0);
  for (const auto& c : draw.dirichlet.per_cohort) {
    const auto xi = draw_xi(c);
    for (std::size_t k = 0; k < K; ++k) acc[k] += xi[k];
  }
  const double C = static_cast<double>(draw.dirichlet.per_cohort.size());
  for (double& v : acc) v /= C;
  return acc;
}

std::string fmt(std::optional<double> v) {
  if (!v) return "NA";
  std::ostringstream os;
  os.precision(10);
  os << *v;
  return os.str();
}

}  // namespace

std::optional<double> age_quantile(double beta0, double beta1, double q, double offset) {
  if (!(q > 0.0 && q < 1.0)) throw std::domain_error("age_quantile: q must lie in (0, 1)");
  if (!(beta1 > 0.0)) return std::nullopt;
  return -(beta0 + std::log((1.0 - q) / q)) / beta1 + offset;
}

double nearest_rank_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

Interval summarize_draws(std::span<const double> values) {
  Interval s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::vector<double> copy(values.begin(), values.end());
  s.lower = nearest_rank_quantile(copy, 0.025);
  s.upper = nearest_rank_quantile(std::move(copy), 0.975);
  return s;
}

std::vector<double> posterior_mean_xi(const PosteriorChain& chain) {
  if (chain.draws.empty()) throw std::invalid_argument("chain has no draws");
  const std::size_t K = chain.meta.n_profiles();
  std::vector<double> mean(K, 0.0);
  for (const auto& d : chain.draws) {
    const auto xi = pooled_xi(d);
    for (std::size_t k = 0; k < K; ++k) mean[k] += xi[k];
  }
  for (double& v : mean) v /= static_cast<double>(chain.draws.size());
  return mean;
}

PosteriorChain permute_profiles(const PosteriorChain& chain, std::span<const std::size_t> perm) {
  const std::size_t K = chain.meta.n_profiles();
  if (perm.size() != K) throw std::invalid_argument("permutation size differs from K");
  PosteriorChain out = chain;
  for (auto& d : out.draws) {
    const Draw& src = chain.draws[static_cast<std::size_t>(&d - out.draws.data())];
    for (std::size_t k = 0; k < K; ++k) {
      d.params.beta0.row(static_cast<Eigen::Index>(k)) = src.params.beta0.row(static_cast<Eigen::Index>(perm[k]));
      d.params.beta1.row(static_cast<Eigen::Index>(k)) = src.params.beta1.row(static_cast<Eigen::Index>(perm[k]));
    }
    for (std::size_t c = 0; c < d.dirichlet.per_cohort.size(); ++c) {
      const auto& a = src.dirichlet.per_cohort[c].alpha();
      std::vector<double> permuted(K);
      for (std::size_t k = 0; k < K; ++k) permuted[k] = a[perm[k]];
      d.dirichlet.per_cohort[c] = DirichletParams(std::move(permuted));
    }
    const std::size_t n = K == 0 ? 0 : src.memberships.size() / K;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < K; ++k) d.memberships[i * K + k] = src.memberships[i * K + perm[k]];
    }
  }
  // Compose with any earlier relabelling so the record maps to the sampler's labels.
  std::vector<std::size_t> composed(perm.begin(), perm.end());
  if (!chain.meta.relabel_permutation.empty()) {
    for (std::size_t k = 0; k < K; ++k) composed[k] = chain.meta.relabel_permutation[perm[k]];
  }
  out.meta.relabel_permutation = composed;
  const auto& sc = chain.meta.final_scales;
  if (sc.beta0_sd.size() == K * chain.meta.n_items()) {
    for (std::size_t j = 0; j < chain.meta.n_items(); ++j) {
      for (std::size_t k = 0; k < K; ++k) {
        out.meta.final_scales.beta0_sd[j * K + k] = sc.beta0_sd[j * K + perm[k]];
        out.meta.final_scales.beta1_sd[j * K + k] = sc.beta1_sd[j * K + perm[k]];
        out.meta.beta_acceptance[j * K + k] = chain.meta.beta_acceptance[j * K + perm[k]];
      }
    }
  }
  return out;
}

Relabeling relabel_profiles(const PosteriorChain& chain) {
  const auto mean = posterior_mean_xi(chain);
  std::vector<std::size_t> perm(mean.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::size_t a, std::size_t b) { return mean[a] > mean[b]; });
  return {permute_profiles(chain, perm), perm};
}

LabelSwitchingReport detect_label_switching(const PosteriorChain& chain, std::size_t windows,
                                            double margin) {
  if (windows < 2 || chain.draws.size() < windows) {
    throw std::invalid_argument("label switching check needs at least one draw per window and >= 2 windows");
  }
  const std::size_t K = chain.meta.n_profiles();
  LabelSwitchingReport r;
  r.windows = windows;
  r.margin = margin;
  const auto overall = posterior_mean_xi(chain);
  const std::size_t n = chain.draws.size();
  for (std::size_t w = 0; w < windows; ++w) {
    const std::size_t lo = w * n / windows;
    const std::size_t hi = (w + 1) * n / windows;
    std::vector<double> mean(K, 0.0);
    for (std::size_t d = lo; d < hi; ++d) {
      const auto xi = pooled_xi(chain.draws[d]);
      for (std::size_t k = 0; k < K; ++k) mean[k] += xi[k];
    }
    for (double& v : mean) v /= static_cast<double>(hi - lo);
    for (std::size_t a = 0; a < K; ++a) {
      for (std::size_t b = 0; b < K; ++b) {
        if (a == b || !(overall[a] > overall[b] || (overall[a] == overall[b] && a < b))) continue;
        const double inversion = mean[b] - mean[a];
        if (inversion > margin) r.flags.push_back({w, a, b, inversion});
      }
    }
    r.window_xi.push_back(std::move(mean));
  }
  return r;
}

ProfileSummary summarize_profiles(const PosteriorChain& chain) {
  if (chain.draws.empty()) throw std::invalid_argument("chain has no draws");
  const std::size_t K = chain.meta.n_profiles();
  const std::size_t J = chain.meta.n_items();
  const double offset = chain.meta.age_offset;
  ProfileSummary s;
  s.n_profiles = K;
  s.n_items = J;
  s.item_labels = chain.meta.item_labels;
  const std::size_t D = chain.draws.size();
  std::vector<double> b0(D), b1(D);
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t d = 0; d < D; ++d) {
        b0[d] = chain.draws[d].params.beta0(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
        b1[d] = chain.draws[d].params.beta1(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
      }
      s.beta0.push_back(summarize_draws(b0));
      s.beta1.push_back(summarize_draws(b1));
      std::array<OnsetAge, 3> onset{};
      for (std::size_t l = 0; l < kOnsetLevels.size(); ++l) {
        const double q = kOnsetLevels[l];
        onset[l].point = age_quantile(s.beta0.back().mean, s.beta1.back().mean, q, offset);
        std::vector<double> ages;
        for (std::size_t d = 0; d < D; ++d) {
          if (auto a = age_quantile(b0[d], b1[d], q, offset)) ages.push_back(*a);
        }
        onset[l].defined_fraction = static_cast<double>(ages.size()) / static_cast<double>(D);
        if (ages.size() == D) {
          onset[l].lower = nearest_rank_quantile(ages, 0.025);
          onset[l].upper = nearest_rank_quantile(ages, 0.975);
        }
      }
      s.onset.push_back(onset);
    }
  }
  std::vector<std::vector<double>> xi(K, std::vector<double>(D));
  const std::size_t C = chain.draws.front().dirichlet.per_cohort.size();
  std::vector<std::vector<double>> a0(C, std::vector<double>(D));
  for (std::size_t d = 0; d < D; ++d) {
    const auto pooled = pooled_xi(chain.draws[d]);
    for (std::size_t k = 0; k < K; ++k) xi[k][d] = pooled[k];
    for (std::size_t c = 0; c < C; ++c) a0[c][d] = chain.draws[d].dirichlet.per_cohort[c].alpha0();
  }
  for (const auto& v : xi) s.xi.push_back(summarize_draws(v));
  for (const auto& v : a0) s.alpha0.push_back(summarize_draws(v));
  return s;
}

void write_profile_table(const ProfileSummary& s, std::ostream& out) {
  out.precision(10);
  out << "item,profile,beta0_mean,beta0_sd,beta0_lower,beta0_upper,beta1_mean,beta1_sd,beta1_lower,"
         "beta1_upper\n";
  for (std::size_t j = 0; j < s.n_items; ++j) {
    for (std::size_t k = 0; k < s.n_profiles; ++k) {
      const auto& b0 = s.beta0[j * s.n_profiles + k];
      const auto& b1 = s.beta1[j * s.n_profiles + k];
      out << s.item_labels[j] << ',' << (k + 1) << ',' << b0.mean << ',' << b0.sd << ',' << b0.lower
          << ',' << b0.upper << ',' << b1.mean << ',' << b1.sd << ',' << b1.lower << ',' << b1.upper
          << '\n';
    }
  }
}

void write_onset_table(const ProfileSummary& s, std::ostream& out) {
  out << "profile,rank,item,age_q10,age_q50,age_q90,age_q50_lower,age_q50_upper,defined_fraction\n";
  const std::size_t K = s.n_profiles;
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<std::size_t> order(s.n_items);
    std::iota(order.begin(), order.end(), 0);
    // Items without an onset age go last.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto& pa = s.onset[a * K + k][1].point;
      const auto& pb = s.onset[b * K + k][1].point;
      if (pa && pb) return *pa < *pb;
      return pa.has_value() && !pb.has_value();
    });
    for (std::size_t r = 0; r < order.size(); ++r) {
      const std::size_t j = order[r];
      const auto& o = s.onset[j * K + k];
      out << (k + 1) << ',' << (r + 1) << ',' << s.item_labels[j] << ',' << fmt(o[0].point) << ','
          << fmt(o[1].point) << ',' << fmt(o[2].point) << ',' << fmt(o[1].lower) << ','
          << fmt(o[1].upper) << ',' << o[1].defined_fraction << '\n';
    }
  }
}

void write_xi_table(const ProfileSummary& s, std::ostream& out) {
  out.precision(10);
  out << "profile,xi_mean,xi_sd,xi_lower,xi_upper\n";
  for (std::size_t k = 0; k < s.xi.size(); ++k) {
    out << (k + 1) << ',' << s.xi[k].mean << ',' << s.xi[k].sd << ',' << s.xi[k].lower << ','
        << s.xi[k].upper << '\n';
  }
  out << "cohort,alpha0_mean,alpha0_sd,alpha0_lower,alpha0_upper\n";
  for (std::size_t c = 0; c < s.alpha0.size(); ++c) {
    out << (c + 1) << ',' << s.alpha0[c].mean << ',' << s.alpha0[c].sd << ',' << s.alpha0[c].lower
        << ',' << s.alpha0[c].upper << '\n';
  }
}

std::vector<CurveRow> trajectory_curve_table(const PosteriorChain& chain, std::span<const double> age_grid,
                                             CurveMode mode, std::size_t n_individuals,
                                             std::span<const std::string> ids) {
  if (chain.draws.empty()) throw std::invalid_argument("chain has no draws");
  const std::size_t K = chain.meta.n_profiles();
  const std::size_t J = chain.meta.n_items();
  const double offset = chain.meta.age_offset;
  const double D = static_cast<double>(chain.draws.size());
  Eigen::MatrixXd mean0 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(J));
  Eigen::MatrixXd mean1 = mean0;
  for (const auto& d : chain.draws) {
    mean0 += d.params.beta0;
    mean1 += d.params.beta1;
  }
  mean0 /= D;
  mean1 /= D;
  TrajectoryParams plug;
  plug.beta0 = mean0;
  plug.beta1 = mean1;

  std::vector<CurveRow> rows;
  if (mode == CurveMode::kExtreme) {
    for (std::size_t j = 0; j < J; ++j) {
      for (std::size_t k = 0; k < K; ++k) {
        for (double age : age_grid) {
          double mean_p = 0.0;
          for (const auto& d : chain.draws) mean_p += extreme_trajectory_prob(d.params, k, j, age - offset);
          rows.push_back({j, "profile_" + std::to_string(k + 1), age,
                          extreme_trajectory_prob(plug, k, j, age - offset), mean_p / D});
        }
      }
    }
    return rows;
  }

  const std::size_t stored = chain.meta.membership_ids.size();
  if (stored == 0) throw std::invalid_argument("individual curves need stored membership draws");
  const std::size_t n = std::min(n_individuals, stored);
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<double> gbar(K, 0.0);
    for (const auto& d : chain.draws) {
      for (std::size_t k = 0; k < K; ++k) gbar[k] += d.memberships[s * K + k];
    }
    for (double& v : gbar) v /= D;
    const std::size_t id = chain.meta.membership_ids[s];
    const std::string label = id < ids.size() ? ids[id] : "individual_" + std::to_string(id + 1);
    for (std::size_t j = 0; j < J; ++j) {
      for (double age : age_grid) {
        std::vector<double> terms(K);
        for (std::size_t k = 0; k < K; ++k) terms[k] = gbar[k] * extreme_trajectory_prob(plug, k, j, age - offset);
        const double p = ordered_sum(terms);
        rows.push_back({j, label, age, p, p});
      }
    }
  }
  return rows;
}

void write_curve_table(const std::vector<CurveRow>& rows, const PosteriorChain& chain, std::ostream& out) {
  out.precision(12);
  out << "item,curve,age,probability,posterior_mean_probability\n";
  for (const auto& r : rows) {
    out << chain.meta.item_labels[r.item] << ',' << r.curve << ',' << r.age << ',' << r.probability
        << ',' << r.posterior_mean_probability << '\n';
  }
}

std::vector<CohortXiRow> cohort_xi_table(const PosteriorChain& chain) {
  if (chain.meta.model.kind != ModelKind::kCohort) {
    throw std::invalid_argument("cohort xi table requires a cohort-model chain");
  }
  if (chain.draws.empty()) throw std::invalid_argument("chain has no draws");
  const std::size_t K = chain.meta.n_profiles();
  const std::size_t C = chain.draws.front().dirichlet.per_cohort.size();
  std::vector<CohortXiRow> rows;
  std::vector<double> v(chain.draws.size());
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t d = 0; d < chain.draws.size(); ++d) {
        v[d] = chain.draws[d].dirichlet.per_cohort[c].xi()[k];
      }
      const Interval s = summarize_draws(v);
      rows.push_back({c, k, s.mean, s.lower, s.upper});
    }
  }
  return rows;
}

void write_cohort_xi_table(const std::vector<CohortXiRow>& rows, std::ostream& out) {
  out.precision(10);
  out << "cohort,profile,xi_mean,xi_lower,xi_upper\n";
  for (const auto& r : rows) {
    out << (r.cohort + 1) << ',' << (r.profile + 1) << ',' << r.mean << ',' << r.lower << ','
        << r.upper << '\n';
  }
}

}  // namespace tgom
