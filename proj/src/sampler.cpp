#include "tgom/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "tgom/errors.hpp"
#include "tgom/rng.hpp"

namespace tgom {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogMembershipFloor = std::log(1e-12);

double floored_log(double log_g) { return std::isfinite(log_g) ? log_g : kLogMembershipFloor; }

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

bool same_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::equal(a.data(), a.data() + a.size(), b.data());
}

}  // namespace

const char* to_string(ModelKind kind) { return kind == ModelKind::kCohort ? "cohort" : "basic"; }

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "basic") return ModelKind::kBasic;
  if (name == "cohort") return ModelKind::kCohort;
  throw std::invalid_argument("unknown model '" + name + "' (expected basic or cohort)");
}

// --------------------------------------------------------------- SamplerConfig

std::vector<std::string> SamplerConfig::problems(const Priors& priors) const {
  std::vector<std::string> out = priors.problems();
  if (n_iterations == 0) out.push_back("sampler.n_iterations must be > 0");
  if (burn_in >= n_iterations) out.push_back("sampler.burn_in must be < sampler.n_iterations");
  if (!(thin_keep_fraction > 0.0 && thin_keep_fraction <= 1.0)) {
    out.push_back("sampler.thin_keep_fraction must lie in (0, 1]");
  }
  if (!(proposal_sd_beta0 > 0.0)) out.push_back("sampler.proposal_sd_beta0 must be > 0");
  if (!(proposal_sd_beta1 > 0.0)) out.push_back("sampler.proposal_sd_beta1 must be > 0");
  if (!(proposal_sd_log_alpha > 0.0)) out.push_back("sampler.proposal_sd_log_alpha must be > 0");
  if (adapt && adapt_window == 0) out.push_back("sampler.adapt_window must be > 0 when adapting");
  if (!(target_accept_low > 0.0 && target_accept_low < target_accept_high &&
        target_accept_high < 1.0)) {
    out.push_back("sampler.target_accept_range must satisfy 0 < low < high < 1");
  }
  if (store_memberships < -1) out.push_back("sampler.store_memberships must be >= -1");
  if (priors.mu0 != 0.0 || priors.mu1 != 0.0) {
    out.push_back("priors.mu0 and priors.mu1 must be 0 (the beta update assumes zero prior means)");
  }
  return out;
}

void SamplerConfig::validate(const Priors& priors) const {
  auto p = problems(priors);
  if (!p.empty()) throw ConfigError(std::move(p));
}

// A small offset keeps fractions like 0.2 from losing a draw to rounding.
std::uint64_t SamplerConfig::expected_draws() const {
  const double post = static_cast<double>(n_iterations - burn_in);
  return static_cast<std::uint64_t>(std::floor(post * thin_keep_fraction + 1e-9));
}

bool SamplerConfig::keeps(std::uint64_t s) const {
  const double f = thin_keep_fraction;
  return std::floor(static_cast<double>(s) * f + 1e-9) >
         std::floor(static_cast<double>(s - 1) * f + 1e-9);
}

// ------------------------------------------------------------------ ChainState

void ChainState::set_membership(std::size_t i, MembershipVector g) {
  std::vector<double> lg(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) lg[k] = g[k] > 0.0 ? std::log(g[k]) : kNegInf;
  memberships[i] = std::move(g);
  log_memberships[i] = std::move(lg);
}

KernelContext KernelContext::make(const PanelDataset& data, const Priors& priors,
                                  const ModelSpec& model, std::uint64_t seed) {
  KernelContext ctx;
  ctx.data = &data;
  ctx.priors = priors;
  ctx.model = model;
  ctx.seed = seed;
  const std::size_t C = model.n_cohorts();
  ctx.cohort_index.assign(data.n_individuals, 0);
  ctx.cohort_members.assign(C, {});
  for (std::size_t i = 0; i < data.n_individuals; ++i) {
    const std::size_t c =
        model.kind == ModelKind::kCohort ? model.partition.cohort_of(data.dob[i]) : 0;
    ctx.cohort_index[i] = c;
    ctx.cohort_members[c].push_back(i);
  }
  ctx.profile_stream.resize(model.n_profiles);
  std::iota(ctx.profile_stream.begin(), ctx.profile_stream.end(), 0);
  return ctx;
}

CellBuckets bucket_cells(const ChainState& state, const PanelDataset& data) {
  const std::size_t K = state.params.n_profiles();
  const std::size_t J = data.n_items;
  CellBuckets b;
  b.ages.assign(J * K, {});
  b.y.assign(J * K, {});
  for (std::size_t i = 0; i < data.n_individuals; ++i) {
    for (std::size_t t = 0; t < data.n_waves; ++t) {
      if (!data.is_observed(i, t)) continue;
      const double a = data.age(i, t);
      for (std::size_t j = 0; j < J; ++j) {
        const std::size_t idx = j * K + static_cast<std::size_t>(state.z(i, j, t));
        b.ages[idx].push_back(a);
        b.y[idx].push_back(static_cast<std::uint8_t>(data.y(i, j, t)));
      }
    }
  }
  return b;
}

// ------------------------------------------------------------- kernel algebra

std::vector<double> latent_probabilities(std::span<const double> log_g, const TrajectoryParams& params,
                                         std::size_t j, double age, int y) {
  const std::size_t K = params.n_profiles();
  std::vector<double> w(K);
  double hi = kNegInf;
  for (std::size_t k = 0; k < K; ++k) {
    w[k] = log_g[k] + log_bernoulli_logit(y, params.linear_predictor(k, j, age));
    hi = std::max(hi, w[k]);
  }
  if (!std::isfinite(hi)) throw NumericalError("latent_probabilities: all weights are zero");
  for (double& v : w) v = std::exp(v - hi);
  const double total = ordered_sum(w);
  for (double& v : w) v /= total;
  return w;
}

double beta_log_acceptance(std::span<const double> ages, std::span<const std::uint8_t> y,
                           double beta0, double beta1, double proposal0, double proposal1,
                           const Priors& priors) {
  double sum_y = 0.0;
  double sum_age_y = 0.0;
  double log_ratio_terms = 0.0;
  for (std::size_t c = 0; c < ages.size(); ++c) {
    const double a = ages[c];
    if (y[c]) {
      sum_y += 1.0;
      sum_age_y += a;
    }
    log_ratio_terms += softplus(beta0 + beta1 * a) - softplus(proposal0 + proposal1 * a);
  }
  return log_ratio_terms +
         (-(proposal0 * proposal0 - beta0 * beta0) / (2.0 * priors.sigma0_sq) +
          (proposal0 - beta0) * sum_y) +
         (-(proposal1 * proposal1 - beta1 * beta1) / (2.0 * priors.sigma1_sq) +
          (proposal1 - beta1) * sum_age_y);
}

double beta_log_full_conditional(std::span<const double> ages, std::span<const std::uint8_t> y,
                                 double beta0, double beta1, const Priors& priors) {
  double total = log_normal_density(beta0, priors.mu0, priors.sigma0_sq) +
                 log_normal_density(beta1, priors.mu1, priors.sigma1_sq);
  for (std::size_t c = 0; c < ages.size(); ++c) {
    total += log_bernoulli_logit(y[c], beta0 + beta1 * ages[c]);
  }
  return total;
}

double alpha_log_acceptance(std::span<const double> alpha, std::span<const double> proposal,
                            const AlphaStats& stats, double shape, double rate) {
  const std::size_t K = alpha.size();
  const double alpha0 = ordered_sum(alpha);
  const double proposal0 = ordered_sum(proposal);
  const double n = static_cast<double>(stats.n_members);
  std::vector<double> per_profile(K);
  for (std::size_t k = 0; k < K; ++k) {
    per_profile[k] = std::log(proposal[k] / alpha[k]) +
                     n * (std::lgamma(alpha[k]) - std::lgamma(proposal[k])) +
                     (proposal[k] - alpha[k]) * stats.sum_log_g[k];
  }
  return -rate * (proposal0 - alpha0) +
         (shape - static_cast<double>(K)) * std::log(proposal0 / alpha0) +
         n * (std::lgamma(proposal0) - std::lgamma(alpha0)) + ordered_sum(per_profile);
}

double alpha_log_full_conditional(std::span<const double> alpha, const AlphaStats& stats,
                                  double shape, double rate) {
  const std::size_t K = alpha.size();
  const double alpha0 = ordered_sum(alpha);
  const double n = static_cast<double>(stats.n_members);
  double total = (shape - static_cast<double>(K)) * std::log(alpha0) - rate * alpha0 +
                 n * std::lgamma(alpha0);
  for (std::size_t k = 0; k < K; ++k) {
    total += -n * std::lgamma(alpha[k]) + alpha[k] * stats.sum_log_g[k];
  }
  return total;
}

AlphaStats alpha_stats(const ChainState& state, std::span<const std::size_t> members) {
  const std::size_t K = state.params.n_profiles();
  AlphaStats s;
  s.n_members = members.size();
  s.sum_log_g.assign(K, 0.0);
  for (std::size_t i : members) {
    for (std::size_t k = 0; k < K; ++k) s.sum_log_g[k] += floored_log(state.log_memberships[i][k]);
  }
  return s;
}

// ---------------------------------------------------------------- Gibbs blocks

void sample_z(ChainState& state, const KernelContext& ctx) {
  const PanelDataset& data = *ctx.data;
  const std::size_t K = state.params.n_profiles();
  const std::size_t N = data.n_individuals;
  const std::uint64_t it = state.iteration;
  std::atomic<bool> empty_support{false};

#pragma omp parallel for num_threads(ctx.threads) schedule(static)
  for (std::size_t i = 0; i < N; ++i) {
    std::vector<CounterRng> streams;
    streams.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
      streams.push_back(CounterRng::stream(ctx.seed, Block::kLatent, {it, i, ctx.profile_stream[k]}));
    }
    const auto& lg = state.log_memberships[i];
    std::uint64_t cell = 0;
    for (std::size_t t = 0; t < data.n_waves; ++t) {
      if (!data.is_observed(i, t)) continue;
      const double a = data.age(i, t);
      for (std::size_t j = 0; j < data.n_items; ++j, ++cell) {
        if (K == 1) {
          state.z.at(i, j, t) = 0;
          continue;
        }
        const int y = data.y(i, j, t);
        // Gumbel-max: argmax_k of log p_k + Gumbel noise from profile k's own stream.
        double best = kNegInf;
        int chosen = -1;
        for (std::size_t k = 0; k < K; ++k) {
          if (lg[k] == kNegInf) continue;
          const double w = lg[k] + log_bernoulli_logit(y, state.params.linear_predictor(k, j, a));
          const double score = w - std::log(-std::log(streams[k].uniform_at(cell)));
          if (score > best) {
            best = score;
            chosen = static_cast<int>(k);
          }
        }
        if (chosen < 0) {
          empty_support = true;
          chosen = 0;
        }
        state.z.at(i, j, t) = static_cast<std::int16_t>(chosen);
      }
    }
  }
  if (empty_support) throw NumericalError("sample_z: all latent weights are zero");
}

bool sample_beta(ChainState& state, const KernelContext& ctx, const CellBuckets& buckets,
                 std::size_t j, std::size_t k, double sd0, double sd1) {
  const std::size_t K = state.params.n_profiles();
  const auto kk = static_cast<Eigen::Index>(k);
  const auto jj = static_cast<Eigen::Index>(j);
  CounterRng rng = CounterRng::stream(ctx.seed, Block::kBeta, {state.iteration, j, ctx.profile_stream[k]});
  const double b0 = state.params.beta0(kk, jj);
  const double b1 = state.params.beta1(kk, jj);
  const double p0 = b0 + sd0 * rng.normal();
  const double p1 = b1 + sd1 * rng.normal();
  const std::size_t idx = j * K + k;
  const double log_r = beta_log_acceptance(buckets.ages[idx], buckets.y[idx], b0, b1, p0, p1, ctx.priors);
  if (std::log(rng.uniform()) < log_r) {
    state.params.beta0(kk, jj) = p0;
    state.params.beta1(kk, jj) = p1;
    return true;
  }
  return false;
}

void sample_g(ChainState& state, const KernelContext& ctx) {
  const PanelDataset& data = *ctx.data;
  const std::size_t K = state.params.n_profiles();
  const std::size_t N = data.n_individuals;
  const std::uint64_t it = state.iteration;

#pragma omp parallel for num_threads(ctx.threads) schedule(static)
  for (std::size_t i = 0; i < N; ++i) {
    std::vector<double> counts(K, 0.0);
    for (std::size_t t = 0; t < data.n_waves; ++t) {
      if (!data.is_observed(i, t)) continue;
      for (std::size_t j = 0; j < data.n_items; ++j) counts[static_cast<std::size_t>(state.z(i, j, t))] += 1.0;
    }
    const auto& alpha = state.dirichlet.per_cohort[ctx.cohort_index[i]].alpha();
    std::vector<double> lg(K);
    double hi = kNegInf;
    for (std::size_t k = 0; k < K; ++k) {
      CounterRng rng = CounterRng::stream(ctx.seed, Block::kMembership, {it, i, ctx.profile_stream[k]});
      lg[k] = rng.log_gamma_variate(alpha[k] + counts[k]);
      hi = std::max(hi, lg[k]);
    }
    std::vector<double> scaled(K);
    for (std::size_t k = 0; k < K; ++k) scaled[k] = std::exp(lg[k] - hi);
    const double log_total = hi + std::log(ordered_sum(scaled));
    std::vector<double> g(K);
    for (std::size_t k = 0; k < K; ++k) {
      lg[k] -= log_total;
      g[k] = std::exp(lg[k]);
    }
    state.memberships[i].g = std::move(g);
    state.log_memberships[i] = std::move(lg);
  }
}

namespace {

bool update_dirichlet(ChainState& state, const KernelContext& ctx, std::size_t cohort, double shape,
                      double rate, double log_sd) {
  const std::size_t K = state.params.n_profiles();
  const auto& alpha = state.dirichlet.per_cohort[cohort].alpha();
  std::vector<double> proposal(K);
  for (std::size_t k = 0; k < K; ++k) {
    CounterRng rng =
        CounterRng::stream(ctx.seed, Block::kAlpha, {state.iteration, cohort, ctx.profile_stream[k]});
    proposal[k] = alpha[k] * std::exp(log_sd * rng.normal());
  }
  for (double a : proposal) {
    if (!(a > 0.0) || !std::isfinite(a)) return false;
  }
  const AlphaStats stats = alpha_stats(state, ctx.cohort_members[cohort]);
  const double log_r = alpha_log_acceptance(alpha, proposal, stats, shape, rate);
  CounterRng accept = CounterRng::stream(ctx.seed, Block::kAlphaAccept, {state.iteration, cohort});
  if (std::log(accept.uniform()) < log_r) {
    state.dirichlet.per_cohort[cohort] = DirichletParams(std::move(proposal));
    return true;
  }
  return false;
}

}  // namespace

bool sample_alpha(ChainState& state, const KernelContext& ctx, double log_sd) {
  return update_dirichlet(state, ctx, 0, ctx.priors.a_alpha, ctx.priors.b_alpha, log_sd);
}

std::vector<bool> sample_alpha_cohort(ChainState& state, const KernelContext& ctx,
                                      std::span<const double> log_sd) {
  std::vector<bool> accepted(state.dirichlet.per_cohort.size());
  for (std::size_t c = 0; c < accepted.size(); ++c) {
    accepted[c] = update_dirichlet(state, ctx, c, ctx.priors.cohort_tau, ctx.priors.cohort_eta, log_sd[c]);
  }
  return accepted;
}

// --------------------------------------------------------------- adaptation

double adapt_proposal_scale(double sd, double acceptance_rate, const SamplerConfig& config,
                            std::size_t round) {
  const double gain = 1.0 / std::sqrt(1.0 + static_cast<double>(round));
  if (acceptance_rate > config.target_accept_high) return sd * std::exp(gain);
  if (acceptance_rate < config.target_accept_low) return sd * std::exp(-gain);
  return sd;
}

ProposalScales adapt_proposals(const ProposalScales& scales, std::span<const double> beta_rates,
                               std::span<const double> alpha_rates, const SamplerConfig& config,
                               std::size_t round) {
  ProposalScales out = scales;
  for (std::size_t b = 0; b < beta_rates.size(); ++b) {
    out.beta0_sd[b] = adapt_proposal_scale(scales.beta0_sd[b], beta_rates[b], config, round);
    out.beta1_sd[b] = adapt_proposal_scale(scales.beta1_sd[b], beta_rates[b], config, round);
  }
  for (std::size_t c = 0; c < alpha_rates.size(); ++c) {
    out.log_alpha_sd[c] = adapt_proposal_scale(scales.log_alpha_sd[c], alpha_rates[c], config, round);
  }
  return out;
}

// ------------------------------------------------------------ initialization

ChainState initial_state(const KernelContext& ctx) {
  const PanelDataset& data = *ctx.data;
  const std::size_t K = ctx.model.n_profiles;
  const std::size_t J = data.n_items;
  ChainState s;
  s.iteration = 0;
  s.params = TrajectoryParams(K, J);
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t k = 0; k < K; ++k) {
      CounterRng rng = CounterRng::stream(ctx.seed, Block::kInit, {0, j, ctx.profile_stream[k]});
      s.params.beta0(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = ctx.priors.mu0 + rng.normal();
      s.params.beta1(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = ctx.priors.mu1 + rng.normal();
    }
  }
  s.memberships.resize(data.n_individuals);
  s.log_memberships.resize(data.n_individuals);
  for (std::size_t i = 0; i < data.n_individuals; ++i) {
    std::vector<double> lg(K);
    double hi = kNegInf;
    for (std::size_t k = 0; k < K; ++k) {
      CounterRng rng = CounterRng::stream(ctx.seed, Block::kInit, {1, i, ctx.profile_stream[k]});
      lg[k] = rng.log_gamma_variate(1.0);
      hi = std::max(hi, lg[k]);
    }
    std::vector<double> scaled(K);
    for (std::size_t k = 0; k < K; ++k) scaled[k] = std::exp(lg[k] - hi);
    const double log_total = hi + std::log(ordered_sum(scaled));
    std::vector<double> g(K);
    for (std::size_t k = 0; k < K; ++k) {
      lg[k] -= log_total;
      g[k] = std::exp(lg[k]);
    }
    s.memberships[i] = MembershipVector(std::move(g));
    s.log_memberships[i] = std::move(lg);
  }
  const std::vector<double> uniform(K, 1.0 / static_cast<double>(K));
  s.dirichlet.per_cohort.assign(ctx.model.n_cohorts(), DirichletParams::from_concentration(1.0, uniform));
  s.z = LatentAssignments::for_dataset(data);
  sample_z(s, ctx);
  return s;
}

double log_posterior(const ChainState& state, const KernelContext& ctx) {
  const PanelDataset& data = *ctx.data;
  const std::size_t K = state.params.n_profiles();
  const bool cohort = ctx.model.kind == ModelKind::kCohort;
  const double shape = cohort ? ctx.priors.cohort_tau : ctx.priors.a_alpha;
  const double rate = cohort ? ctx.priors.cohort_eta : ctx.priors.b_alpha;

  // Per-profile terms are combined with ordered_sum so relabelled chains agree bit for bit.
  std::vector<double> beta_terms(K, 0.0);
  for (Eigen::Index k = 0; k < state.params.beta0.rows(); ++k) {
    for (Eigen::Index j = 0; j < state.params.beta0.cols(); ++j) {
      beta_terms[static_cast<std::size_t>(k)] +=
          log_normal_density(state.params.beta0(k, j), ctx.priors.mu0, ctx.priors.sigma0_sq) +
          log_normal_density(state.params.beta1(k, j), ctx.priors.mu1, ctx.priors.sigma1_sq);
    }
  }
  double total = ordered_sum(beta_terms);
  for (const auto& d : state.dirichlet.per_cohort) {
    const double a0 = d.alpha0();
    total += log_gamma_density(a0, shape, rate) + std::lgamma(static_cast<double>(K)) -
             static_cast<double>(K - 1) * std::log(a0);
  }

  std::vector<double> per_individual(data.n_individuals, 0.0);
#pragma omp parallel for num_threads(ctx.threads) schedule(static)
  for (std::size_t i = 0; i < data.n_individuals; ++i) {
    const auto& d = state.dirichlet.per_cohort[ctx.cohort_index[i]];
    const auto& lg = state.log_memberships[i];
    std::vector<double> prior_terms(K);
    for (std::size_t k = 0; k < K; ++k) {
      prior_terms[k] = (d.alpha()[k] - 1.0) * floored_log(lg[k]) - std::lgamma(d.alpha()[k]);
    }
    double v = std::lgamma(d.alpha0()) + ordered_sum(prior_terms);
    for (std::size_t t = 0; t < data.n_waves; ++t) {
      if (!data.is_observed(i, t)) continue;
      const double a = data.age(i, t);
      for (std::size_t j = 0; j < data.n_items; ++j) {
        const auto k = static_cast<std::size_t>(state.z(i, j, t));
        v += lg[k] + log_bernoulli_logit(data.y(i, j, t), state.params.linear_predictor(k, j, a));
      }
    }
    per_individual[i] = v;
  }
  for (double v : per_individual) total += v;
  return total;
}

// ---------------------------------------------------------------------- chain

bool operator==(const Draw& a, const Draw& b) {
  return a.iteration == b.iteration && same_matrix(a.params.beta0, b.params.beta0) &&
         same_matrix(a.params.beta1, b.params.beta1) && a.dirichlet == b.dirichlet &&
         a.log_posterior == b.log_posterior && a.memberships == b.memberships;
}

bool operator==(const ChainMeta& a, const ChainMeta& b) {
  return a.model == b.model && a.priors.a_alpha == b.priors.a_alpha &&
         a.priors.b_alpha == b.priors.b_alpha && a.priors.mu0 == b.priors.mu0 &&
         a.priors.sigma0_sq == b.priors.sigma0_sq && a.priors.mu1 == b.priors.mu1 &&
         a.priors.sigma1_sq == b.priors.sigma1_sq && a.priors.cohort_tau == b.priors.cohort_tau &&
         a.priors.cohort_eta == b.priors.cohort_eta && a.config == b.config &&
         a.dataset_fingerprint == b.dataset_fingerprint && a.n_individuals == b.n_individuals &&
         a.item_labels == b.item_labels && a.age_offset == b.age_offset &&
         a.membership_ids == b.membership_ids && a.cohort_sizes == b.cohort_sizes &&
         a.beta_acceptance == b.beta_acceptance && a.alpha_acceptance == b.alpha_acceptance &&
         a.final_scales.beta0_sd == b.final_scales.beta0_sd &&
         a.final_scales.beta1_sd == b.final_scales.beta1_sd &&
         a.final_scales.log_alpha_sd == b.final_scales.log_alpha_sd &&
         a.relabel_permutation == b.relabel_permutation;
}

namespace {

std::vector<std::size_t> choose_membership_ids(const SamplerConfig& config, std::size_t n) {
  std::vector<std::size_t> ids;
  if (config.store_memberships == 0 || n == 0) return ids;
  ids.resize(n);
  std::iota(ids.begin(), ids.end(), 0);
  if (config.store_memberships < 0 || static_cast<std::size_t>(config.store_memberships) >= n) return ids;
  CounterRng rng = CounterRng::stream(config.seed, Block::kMembershipSubset, {n});
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(static_cast<std::size_t>(config.store_memberships));
  std::sort(ids.begin(), ids.end());
  return ids;
}

void check_state(const ChainState& s, const KernelContext& ctx) {
  const PanelDataset& data = *ctx.data;
  const std::size_t K = ctx.model.n_profiles;
  if (s.params.n_profiles() != K || s.params.n_items() != data.n_items ||
      s.memberships.size() != data.n_individuals || s.log_memberships.size() != data.n_individuals ||
      s.dirichlet.per_cohort.size() != ctx.model.n_cohorts() ||
      s.z.z.size() != data.outcomes.size()) {
    throw std::invalid_argument("initial state does not match the data and model");
  }
  s.params.validate();
}

}  // namespace

PosteriorChain run_chain(const PanelDataset& data, const Priors& priors,
                         const SamplerConfig& config, const ModelSpec& model,
                         const RunOptions& options) {
  config.validate(priors);
  if (model.n_profiles == 0) throw ConfigError({"K must be >= 1"});
  if (model.kind == ModelKind::kCohort) model.partition.validate();
  data.validate();

  KernelContext ctx = KernelContext::make(data, priors, model, config.seed);
  ctx.threads = resolve_threads(config.threads);
  if (!options.profile_stream.empty()) {
    if (options.profile_stream.size() != model.n_profiles) {
      throw std::invalid_argument("profile_stream must have one entry per profile");
    }
    ctx.profile_stream = options.profile_stream;
  }

  ChainState state = options.initial ? *options.initial : initial_state(ctx);
  check_state(state, ctx);

  const std::size_t K = model.n_profiles;
  const std::size_t J = data.n_items;
  const std::size_t C = model.n_cohorts();

  ProposalScales scales;
  scales.beta0_sd.assign(J * K, config.proposal_sd_beta0);
  scales.beta1_sd.assign(J * K, config.proposal_sd_beta1);
  scales.log_alpha_sd.assign(C, config.proposal_sd_log_alpha);

  PosteriorChain chain;
  chain.meta.model = model;
  chain.meta.priors = priors;
  chain.meta.config = config;
  chain.meta.config.threads = 0;  // never affects the draws, so not part of the record
  chain.meta.dataset_fingerprint = dataset_fingerprint(data);
  chain.meta.n_individuals = data.n_individuals;
  chain.meta.item_labels = data.item_labels;
  chain.meta.age_offset = data.age_offset;
  chain.meta.membership_ids = choose_membership_ids(config, data.n_individuals);
  for (const auto& members : ctx.cohort_members) chain.meta.cohort_sizes.push_back(members.size());
  chain.draws.reserve(config.expected_draws());

  std::vector<std::uint64_t> beta_window(J * K, 0), alpha_window(C, 0);
  std::vector<std::uint64_t> beta_total(J * K, 0), alpha_total(C, 0);
  std::vector<std::uint64_t> beta_post(J * K, 0), alpha_post(C, 0);
  std::uint64_t window_length = 0;
  std::size_t adapt_round = 0;

  for (std::uint64_t it = 1; it <= config.n_iterations; ++it) {
    state.iteration = it;
    sample_z(state, ctx);

    const CellBuckets buckets = bucket_cells(state, data);
    std::vector<std::uint8_t> beta_accepted(J * K, 0);
    const auto n_pairs = static_cast<std::ptrdiff_t>(J * K);
#pragma omp parallel for num_threads(ctx.threads) schedule(static)
    for (std::ptrdiff_t b = 0; b < n_pairs; ++b) {
      const auto ub = static_cast<std::size_t>(b);
      beta_accepted[ub] = sample_beta(state, ctx, buckets, ub / K, ub % K, scales.beta0_sd[ub],
                                      scales.beta1_sd[ub]);
    }

    sample_g(state, ctx);

    std::vector<bool> alpha_accepted;
    if (model.kind == ModelKind::kBasic) {
      alpha_accepted.push_back(sample_alpha(state, ctx, scales.log_alpha_sd[0]));
    } else {
      alpha_accepted = sample_alpha_cohort(state, ctx, scales.log_alpha_sd);
    }

    const double lp = log_posterior(state, ctx);
    if (!std::isfinite(lp)) {
      std::ostringstream dump;
      dump << "non-finite log posterior at iteration " << it << "; beta0=\n"
           << state.params.beta0 << "\nbeta1=\n" << state.params.beta1 << "\nalpha:";
      for (const auto& d : state.dirichlet.per_cohort) {
        for (double a : d.alpha()) dump << ' ' << a;
        dump << ';';
      }
      throw NumericalError(dump.str());
    }

    const bool post = it > config.burn_in;
    for (std::size_t b = 0; b < J * K; ++b) {
      beta_window[b] += beta_accepted[b];
      beta_total[b] += beta_accepted[b];
      if (post) beta_post[b] += beta_accepted[b];
    }
    for (std::size_t c = 0; c < C; ++c) {
      alpha_window[c] += alpha_accepted[c] ? 1 : 0;
      alpha_total[c] += alpha_accepted[c] ? 1 : 0;
      if (post) alpha_post[c] += alpha_accepted[c] ? 1 : 0;
    }
    ++window_length;

    if (config.adapt && !post && window_length == config.adapt_window) {
      const double w = static_cast<double>(window_length);
      std::vector<double> beta_rates(J * K), alpha_rates(C);
      for (std::size_t b = 0; b < J * K; ++b) beta_rates[b] = static_cast<double>(beta_window[b]) / w;
      for (std::size_t c = 0; c < C; ++c) alpha_rates[c] = static_cast<double>(alpha_window[c]) / w;
      scales = adapt_proposals(scales, beta_rates, alpha_rates, config, adapt_round++);
    }
    if (window_length == config.adapt_window || it == config.burn_in) {
      std::fill(beta_window.begin(), beta_window.end(), 0);
      std::fill(alpha_window.begin(), alpha_window.end(), 0);
      window_length = 0;
    }

    if (post && config.keeps(it - config.burn_in)) {
      Draw d;
      d.iteration = it;
      d.params = state.params;
      d.dirichlet = state.dirichlet;
      d.log_posterior = lp;
      d.memberships.reserve(chain.meta.membership_ids.size() * K);
      for (std::size_t i : chain.meta.membership_ids) {
        for (std::size_t k = 0; k < K; ++k) d.memberships.push_back(state.memberships[i][k]);
      }
      chain.draws.push_back(std::move(d));
    }

    if (options.progress && config.progress_every > 0 &&
        (it % config.progress_every == 0 || it == config.n_iterations)) {
      ProgressRecord rec;
      rec.iteration = it;
      rec.log_posterior = lp;
      rec.burn_in = !post;
      const double n = static_cast<double>(it);
      double acc = 0.0;
      for (auto v : beta_total) acc += static_cast<double>(v);
      rec.beta_acceptance = acc / (n * static_cast<double>(J * K));
      for (auto v : alpha_total) rec.alpha_acceptance.push_back(static_cast<double>(v) / n);
      options.progress(rec);
    }
  }

  const double n_post = static_cast<double>(config.n_iterations - config.burn_in);
  for (auto v : beta_post) chain.meta.beta_acceptance.push_back(static_cast<double>(v) / n_post);
  for (auto v : alpha_post) chain.meta.alpha_acceptance.push_back(static_cast<double>(v) / n_post);
  chain.meta.final_scales = scales;
  return chain;
}

std::string progress_json(const ProgressRecord& record) {
  nlohmann::json j;
  j["iteration"] = record.iteration;
  j["phase"] = record.burn_in ? "burn_in" : "sampling";
  j["log_posterior"] = record.log_posterior;
  j["beta_acceptance"] = record.beta_acceptance;
  j["alpha_acceptance"] = record.alpha_acceptance;
  return j.dump();
}

}  // namespace tgom
