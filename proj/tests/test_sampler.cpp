#include <cmath>
#include <random>
#include <sstream>

#include <doctest.h>

#include "test_support.hpp"
#include "tgom/analysis.hpp"
#include "tgom/data_io.hpp"
#include "tgom/errors.hpp"
#include "tgom/sampler.hpp"
#include "tgom/util.hpp"

using namespace tgom;
using namespace tgom::testing;

namespace {

// Standard error of a correlated series' mean by non-overlapping batch means.
double batch_se(const std::vector<double>& x, std::size_t batches = 50) {
  const std::size_t b = x.size() / batches;
  std::vector<double> means;
  for (std::size_t s = 0; s < batches; ++s) {
    double m = 0.0;
    for (std::size_t r = 0; r < b; ++r) m += x[s * b + r];
    means.push_back(m / static_cast<double>(b));
  }
  return std::sqrt(variance(means) / static_cast<double>(batches));
}

GeneratorSpec small_spec(std::size_t n, double alpha0 = 0.5) {
  GeneratorSpec s;
  s.n_individuals = n;
  s.params = TrajectoryParams(2, 3);
  s.params.beta0 << -2.5, -3.0, -2.0, 1.5, 1.0, 2.0;
  s.params.beta1.setConstant(0.15);
  const double xi[] = {0.7, 0.3};
  s.dirichlet.per_cohort.push_back(DirichletParams::from_concentration(alpha0, xi));
  for (const char* d : {"1982-06-15", "1984-06-15", "1989-06-15", "1994-06-15"}) s.wave_dates.push_back(parse_iso_date(d));
  s.dob_min = parse_iso_date("1900-01-01");
  s.dob_max = parse_iso_date("1925-12-31");
  return s;
}

SamplerConfig quick_config(std::uint64_t iters, std::uint64_t burn, std::uint64_t seed = 11) {
  SamplerConfig c;
  c.n_iterations = iters;
  c.burn_in = burn;
  c.seed = seed;
  c.store_memberships = -1;
  return c;
}

}  // namespace

TEST_CASE("latent probabilities") {
  TrajectoryParams p(2, 1);
  p.beta0(0, 0) = logit(0.9);
  p.beta0(1, 0) = logit(0.1);
  const double half[] = {std::log(0.5), std::log(0.5)};
  const auto w = latent_probabilities(half, p, 0, 0.0, 1);
  CHECK(w[0] == doctest::Approx(0.9).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(0.1).epsilon(1e-14));
  const double vertex[] = {0.0, -std::numeric_limits<double>::infinity()};
  const auto v = latent_probabilities(vertex, p, 0, 0.0, 0);
  CHECK(v[1] == 0.0);
  CHECK(v[0] == 1.0);
}

TEST_CASE("sample_z edge cases and frequencies") {
  std::mt19937_64 rng(1);
  const auto d = random_panel(rng, 20, 2, 2, 1.0);
  Priors pr;
  {
    const auto ctx = KernelContext::make(d, pr, ModelSpec{ModelKind::kBasic, 1, {}}, 4);
    CohortDirichletParams dir;
    dir.per_cohort.emplace_back(std::vector<double>{1.0});
    auto s = make_state(ctx, random_params(rng, 1, 2), dir, rng);
    for (auto z : s.z.z) CHECK(z == 0);
  }
  const auto ctx = KernelContext::make(d, pr, ModelSpec{ModelKind::kBasic, 2, {}}, 4);
  CohortDirichletParams dir;
  dir.per_cohort.emplace_back(std::vector<double>{1.0, 1.0});
  auto s = make_state(ctx, random_params(rng, 2, 2), dir, rng);
  s.set_membership(0, MembershipVector({1.0, 0.0}));
  const std::size_t reps = 20000;
  double hits = 0.0;
  const auto target = latent_probabilities(s.log_memberships[1], s.params, 1, d.age(1, 1), d.y(1, 1, 1));
  for (std::size_t r = 1; r <= reps; ++r) {
    s.iteration = r;
    sample_z(s, ctx);
    for (std::size_t t = 0; t < 2; ++t) {
      for (std::size_t j = 0; j < 2; ++j) CHECK(s.z(0, j, t) == 0);
    }
    hits += s.z(1, 1, 1) == 1 ? 1.0 : 0.0;
  }
  const double phat = hits / reps;
  CHECK(std::abs(phat - target[1]) < 4.0 * std::sqrt(target[1] * target[0] / reps));
}

TEST_CASE("beta acceptance identities") {
  Priors pr;
  const double none_a[] = {1.0};
  const std::uint8_t none_y[] = {1};
  CHECK(beta_log_acceptance(none_a, none_y, 0.3, 0.1, 0.3, 0.1, pr) == 0.0);
  // No assigned cells: prior ratio only.
  const double lr = beta_log_acceptance({}, {}, 0.3, 0.1, -0.2, 0.4, pr);
  const double prior = log_normal_density(-0.2, 0, 100) + log_normal_density(0.4, 0, 100) -
                       log_normal_density(0.3, 0, 100) - log_normal_density(0.1, 0, 100);
  CHECK(lr == doctest::Approx(prior).epsilon(1e-14));

  std::mt19937_64 rng(77);
  std::normal_distribution<double> nd(0, 1);
  std::uniform_int_distribution<int> count(0, 40);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> ages(static_cast<std::size_t>(count(rng)));
    std::vector<std::uint8_t> y(ages.size());
    for (std::size_t c = 0; c < ages.size(); ++c) {
      ages[c] = 10.0 * nd(rng);
      y[c] = nd(rng) > 0 ? 1 : 0;
    }
    const double b0 = nd(rng), b1 = 0.1 * nd(rng);
    const double p0 = b0 + 0.3 * nd(rng), p1 = b1 + 0.05 * nd(rng);
    const double formula = beta_log_acceptance(ages, y, b0, b1, p0, p1, pr);
    const double direct = beta_log_full_conditional(ages, y, p0, p1, pr) - beta_log_full_conditional(ages, y, b0, b1, pr);
    CHECK(std::abs(formula - direct) < 1e-10);
  }
}

TEST_CASE("alpha acceptance identities") {
  std::mt19937_64 rng(78);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  std::normal_distribution<double> nd(0, 1);
  AlphaStats st;
  st.n_members = 5;
  st.sum_log_g = {-3.0, -7.5};
  const double a[] = {0.4, 0.9};
  CHECK(alpha_log_acceptance(a, a, st, 1.0, 5.0) == 0.0);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t K = 2 + static_cast<std::size_t>(rep % 3);
    AlphaStats s;
    s.n_members = static_cast<std::size_t>(rep % 50);
    std::vector<double> alpha(K), prop(K);
    for (std::size_t k = 0; k < K; ++k) {
      alpha[k] = u(rng);
      prop[k] = alpha[k] * std::exp(0.3 * nd(rng));
      s.sum_log_g.push_back(-static_cast<double>(s.n_members) * u(rng));
    }
    const double shape = u(rng), rate = u(rng);
    const double formula = alpha_log_acceptance(alpha, prop, s, shape, rate);
    double hastings = 0.0;
    for (std::size_t k = 0; k < K; ++k) hastings += std::log(prop[k] / alpha[k]);
    const double direct = alpha_log_full_conditional(prop, s, shape, rate) -
                          alpha_log_full_conditional(alpha, s, shape, rate) + hastings;
    CHECK(std::abs(formula - direct) < 1e-10);
  }
}

TEST_CASE("alpha full conditional matches the model density") {
  // p(alpha | g) over (alpha0, xi) priors: Gamma(alpha0) Dir(xi|1) |d(alpha0,xi)/d alpha| prod Dir(g_i | alpha).
  std::mt19937_64 rng(5);
  const std::size_t K = 3, n = 4;
  std::vector<MembershipVector> gs;
  AlphaStats st;
  st.n_members = n;
  st.sum_log_g.assign(K, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    gs.push_back(random_membership(rng, K));
    for (std::size_t k = 0; k < K; ++k) st.sum_log_g[k] += std::log(gs.back()[k]);
  }
  auto full = [&](const std::vector<double>& alpha) {
    double a0 = 0.0;
    for (double a : alpha) a0 += a;
    double v = log_gamma_density(a0, 2.0, 3.0) - static_cast<double>(K - 1) * std::log(a0);
    for (const auto& g : gs) v += log_dirichlet_density(g.g, alpha);
    return v;
  };
  const std::vector<double> a1 = {0.3, 0.8, 1.1}, a2 = {0.5, 0.2, 2.0};
  CHECK(alpha_log_full_conditional(a2, st, 2.0, 3.0) - alpha_log_full_conditional(a1, st, 2.0, 3.0) ==
        doctest::Approx(full(a2) - full(a1)).epsilon(1e-12));
}

TEST_CASE("sample_g matches the Dirichlet full conditional") {
  // One individual, four cells, three assigned to profile 1.
  PanelDataset d = make_empty_panel(1, 2, 2);
  for (std::size_t t = 0; t < 2; ++t) {
    d.observed[t] = 1;
    d.ages[t] = static_cast<double>(t);
  }
  Priors pr;
  const auto ctx = KernelContext::make(d, pr, ModelSpec{ModelKind::kBasic, 2, {}}, 99);
  ChainState s;
  s.params = TrajectoryParams(2, 2);
  s.memberships.assign(1, MembershipVector({0.5, 0.5}));
  s.log_memberships.assign(1, {std::log(0.5), std::log(0.5)});
  s.dirichlet.per_cohort.emplace_back(std::vector<double>{1.0, 1.0});
  s.z = LatentAssignments::for_dataset(d);
  s.z.at(0, 1, 1) = 1;
  const std::size_t reps = 200000;
  std::vector<double> g1(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    s.iteration = r + 1;
    sample_g(s, ctx);
    g1[r] = s.memberships[0][0];
    CHECK(std::abs(s.memberships[0][0] + s.memberships[0][1] - 1.0) < 1e-12);
  }
  // Beta(4, 2): mean 2/3, variance 8 / (36 * 7).
  const double m = mean(g1), se = std::sqrt(8.0 / 252.0 / reps);
  CHECK(std::abs(m - 4.0 / 6.0) < 3.0 * se);
  CHECK(std::abs(variance(g1) - 8.0 / 252.0) < 0.02 * 8.0 / 252.0);
}

TEST_CASE("sample_g with no data is uniform on the simplex") {
  PanelDataset d = make_empty_panel(1, 1, 1);
  Priors pr;
  const auto ctx = KernelContext::make(d, pr, ModelSpec{ModelKind::kBasic, 3, {}}, 5);
  ChainState s;
  s.params = TrajectoryParams(3, 1);
  s.memberships.assign(1, MembershipVector({0.2, 0.3, 0.5}));
  s.log_memberships.assign(1, {0, 0, 0});
  s.dirichlet.per_cohort.emplace_back(std::vector<double>{1.0, 1.0, 1.0});
  s.z = LatentAssignments::for_dataset(d);
  const std::size_t reps = 100000;
  std::vector<double> g3(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    s.iteration = r + 1;
    sample_g(s, ctx);
    g3[r] = s.memberships[0][2];
  }
  CHECK(std::abs(mean(g3) - 1.0 / 3.0) < 3.0 * std::sqrt(1.0 / 18.0 / reps));
}

TEST_CASE("sample_g keeps tiny components exact in log space") {
  PanelDataset d = make_empty_panel(1, 1, 1);
  Priors pr;
  const auto ctx = KernelContext::make(d, pr, ModelSpec{ModelKind::kBasic, 2, {}}, 5);
  ChainState s;
  s.params = TrajectoryParams(2, 1);
  s.memberships.assign(1, MembershipVector({0.5, 0.5}));
  s.log_memberships.assign(1, {0, 0});
  s.dirichlet.per_cohort.emplace_back(std::vector<double>{0.002, 0.002});
  s.z = LatentAssignments::for_dataset(d);
  for (std::size_t r = 1; r < 200; ++r) {
    s.iteration = r;
    sample_g(s, ctx);
    for (double lg : s.log_memberships[0]) CHECK(std::isfinite(lg));
  }
}

TEST_CASE("sample_alpha on empty data recovers the Gamma prior") {
  PanelDataset d = make_empty_panel(0, 1, 1);
  Priors pr;  // Gamma(1, 5)
  const auto ctx = KernelContext::make(d, pr, ModelSpec{ModelKind::kBasic, 2, {}}, 2024);
  ChainState s;
  s.params = TrajectoryParams(2, 1);
  s.dirichlet.per_cohort.emplace_back(std::vector<double>{0.1, 0.1});
  s.z = LatentAssignments::for_dataset(d);
  const std::size_t reps = 400000;
  std::vector<double> a0(reps), xi1(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    s.iteration = r + 1;
    sample_alpha(s, ctx, 1.0);
    a0[r] = s.dirichlet.per_cohort[0].alpha0();
    xi1[r] = s.dirichlet.per_cohort[0].xi()[0];
  }
  CHECK(std::abs(mean(a0) - 0.2) < 3.0 * batch_se(a0));
  std::vector<double> sq(reps);
  for (std::size_t r = 0; r < reps; ++r) sq[r] = a0[r] * a0[r];
  CHECK(std::abs(mean(sq) - 0.08) < 3.0 * batch_se(sq));  // E[a0^2] = 2 / 25
  CHECK(std::abs(mean(xi1) - 0.5) < 3.0 * batch_se(xi1));
}

TEST_CASE("cohort alpha update") {
  std::mt19937_64 rng(3);
  auto d = random_panel(rng, 12, 2, 2);
  for (std::size_t i = 0; i < 12; ++i) d.dob[i] = i < 6 ? -100 : 100;
  Priors pr;
  pr.cohort_tau = pr.a_alpha;
  pr.cohort_eta = pr.b_alpha;

  SUBCASE("a single cohort follows the basic update draw for draw") {
    ModelSpec basic{ModelKind::kBasic, 2, {}};
    ModelSpec one{ModelKind::kCohort, 2, {}};
    const auto cb = KernelContext::make(d, pr, basic, 8);
    const auto cc = KernelContext::make(d, pr, one, 8);
    CohortDirichletParams dir;
    dir.per_cohort.emplace_back(std::vector<double>{0.4, 0.6});
    std::mt19937_64 r1(1), r2(1);
    auto sb = make_state(cb, random_params(r1, 2, 2), dir, r1);
    auto sc = make_state(cc, random_params(r2, 2, 2), dir, r2);
    for (std::size_t it = 1; it <= 500; ++it) {
      sb.iteration = sc.iteration = it;
      const double sd[] = {0.3};
      CHECK(sample_alpha(sb, cb, 0.3) == sample_alpha_cohort(sc, cc, sd)[0]);
      CHECK(sb.dirichlet == sc.dirichlet);
    }
  }

  SUBCASE("an empty cohort samples its prior") {
    pr.cohort_tau = 2.0;
    pr.cohort_eta = 4.0;
    ModelSpec m{ModelKind::kCohort, 2, CohortPartition{{0, 1000}}};  // third cohort is empty
    const auto ctx = KernelContext::make(d, pr, m, 31);
    CHECK(ctx.cohort_members[2].empty());
    CohortDirichletParams dir;
    for (int c = 0; c < 3; ++c) dir.per_cohort.emplace_back(std::vector<double>{0.5, 0.5});
    auto s = make_state(ctx, random_params(rng, 2, 2), dir, rng);
    const std::size_t reps = 200000;
    std::vector<double> a0(reps);
    const double sd[] = {0.5, 0.5, 0.8};
    for (std::size_t r = 0; r < reps; ++r) {
      s.iteration = r + 1;
      sample_alpha_cohort(s, ctx, sd);
      a0[r] = s.dirichlet.per_cohort[2].alpha0();
    }
    CHECK(std::abs(mean(a0) - 0.5) < 3.0 * batch_se(a0));
  }
}

TEST_CASE("adaptation direction") {
  SamplerConfig c;
  CHECK(adapt_proposal_scale(0.1, 1.0, c, 0) > 0.1);
  CHECK(adapt_proposal_scale(0.1, 0.0, c, 0) < 0.1);
  CHECK(adapt_proposal_scale(0.1, 0.35, c, 0) == 0.1);
  // Gains shrink with the round.
  CHECK(adapt_proposal_scale(0.1, 1.0, c, 10) < adapt_proposal_scale(0.1, 1.0, c, 0));
  ProposalScales s{{0.1, 0.1}, {0.2, 0.2}, {0.3}};
  const double br[] = {1.0, 0.3};
  const double ar[] = {0.0};
  const auto out = adapt_proposals(s, br, ar, c, 0);
  CHECK(out.beta0_sd[0] > 0.1);
  CHECK(out.beta1_sd[1] == 0.2);
  CHECK(out.log_alpha_sd[0] < 0.3);
}

TEST_CASE("thinning convention") {
  SamplerConfig c;
  c.n_iterations = 101;
  c.burn_in = 100;
  c.thin_keep_fraction = 1.0;
  CHECK(c.expected_draws() == 1);
  c.thin_keep_fraction = 0.2;
  CHECK(c.expected_draws() == 0);
  c.n_iterations = 120000;
  c.burn_in = 20000;
  CHECK(c.expected_draws() == 20000);
  std::uint64_t kept = 0;
  for (std::uint64_t s = 1; s <= 100000; ++s) {
    if (c.keeps(s)) {
      ++kept;
      CHECK(s % 5 == 0);
    }
  }
  CHECK(kept == 20000);

  const auto [data, truth] = generate_dataset(small_spec(15), 3);
  Priors pr;
  for (double f : {1.0, 0.2, 0.3, 0.5}) {
    auto cfg = quick_config(57, 20);
    cfg.thin_keep_fraction = f;
    const auto chain = run_chain(data, pr, cfg, ModelSpec{});
    CHECK(chain.draws.size() == cfg.expected_draws());
  }
  auto edge = quick_config(21, 20);
  edge.thin_keep_fraction = 1.0;
  CHECK(run_chain(data, pr, edge, ModelSpec{}).draws.size() == 1);
}

TEST_CASE("config validation enumerates every problem") {
  SamplerConfig c;
  c.burn_in = c.n_iterations;
  c.proposal_sd_beta0 = 0.0;
  c.thin_keep_fraction = 1.5;
  Priors pr;
  pr.mu0 = 1.0;
  pr.b_alpha = -1.0;
  try {
    c.validate(pr);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.problems().size() >= 5);
  }
}

TEST_CASE("chain states stay valid and the chain is reproducible") {
  const auto [data, truth] = generate_dataset(small_spec(40), 17);
  Priors pr;
  auto cfg = quick_config(300, 100);
  cfg.thin_keep_fraction = 0.5;
  cfg.threads = 1;
  const auto a = run_chain(data, pr, cfg, ModelSpec{});
  for (const auto& d : a.draws) {
    for (std::size_t s = 0; s < a.meta.membership_ids.size(); ++s) {
      double total = 0.0;
      for (std::size_t k = 0; k < 2; ++k) {
        CHECK(d.memberships[s * 2 + k] >= 0.0);
        total += d.memberships[s * 2 + k];
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
    CHECK(d.dirichlet.per_cohort[0].alpha0() > 0.0);
    CHECK(std::isfinite(d.log_posterior));
  }
  for (unsigned threads : {2u, 3u, 8u}) {
    cfg.threads = threads;
    const auto b = run_chain(data, pr, cfg, ModelSpec{});
    CHECK(b == a);
    std::ostringstream sa, sb;
    write_chain(a, sa);
    write_chain(b, sb);
    CHECK(sa.str() == sb.str());
  }
  cfg.seed = 12;
  cfg.threads = 1;
  CHECK_FALSE(run_chain(data, pr, cfg, ModelSpec{}).draws == a.draws);
}

TEST_CASE("label permutation equivariance") {
  auto spec = small_spec(30);
  spec.params = TrajectoryParams(3, 3);
  spec.params.beta0 << -2.5, -3.0, -2.0, 1.5, 1.0, 2.0, 0.0, -0.5, 0.5;
  spec.params.beta1.setConstant(0.15);
  const double xi[] = {0.5, 0.3, 0.2};
  spec.dirichlet.per_cohort[0] = DirichletParams::from_concentration(0.6, xi);
  const auto [data, truth] = generate_dataset(spec, 5);
  Priors pr;
  auto cfg = quick_config(240, 80);
  const ModelSpec model{ModelKind::kBasic, 3, {}};
  const auto base = run_chain(data, pr, cfg, model);

  const std::vector<std::size_t> perm = {2, 0, 1};  // new label k is old label perm[k]
  RunOptions opts;
  for (std::size_t k : perm) opts.profile_stream.push_back(k);
  const auto permuted_run = run_chain(data, pr, cfg, model, opts);
  const auto expected = permute_profiles(base, perm);
  CHECK(permuted_run.draws == expected.draws);
  CHECK(permuted_run.meta.beta_acceptance == expected.meta.beta_acceptance);
  CHECK(permuted_run.meta.final_scales.beta0_sd == expected.meta.final_scales.beta0_sd);
}

TEST_CASE("zero-data chain leaves the prior invariant") {
  PanelDataset empty = make_empty_panel(0, 1, 1);
  Priors pr;
  pr.sigma0_sq = 4.0;
  pr.sigma1_sq = 1.0;
  auto cfg = quick_config(60000, 5000, 3);
  cfg.thin_keep_fraction = 1.0;
  cfg.store_memberships = 0;
  const auto chain = run_chain(empty, pr, cfg, ModelSpec{ModelKind::kBasic, 2, {}});
  std::vector<double> a0, xi1, b0, b1sq;
  for (const auto& d : chain.draws) {
    a0.push_back(d.dirichlet.per_cohort[0].alpha0());
    xi1.push_back(d.dirichlet.per_cohort[0].xi()[0]);
    b0.push_back(d.params.beta0(1, 0));
    b1sq.push_back(d.params.beta1(0, 0) * d.params.beta1(0, 0));
  }
  CHECK(std::abs(mean(a0) - 0.2) < 3.0 * batch_se(a0));
  CHECK(std::abs(mean(xi1) - 0.5) < 3.0 * batch_se(xi1));
  CHECK(std::abs(mean(b0)) < 3.0 * batch_se(b0));
  CHECK(std::abs(mean(b1sq) - 1.0) < 3.0 * batch_se(b1sq));
}

TEST_CASE("cohorts with identical data give matching summaries") {
  auto spec = small_spec(200);
  const auto [half, truth] = generate_dataset(spec, 8);
  PanelDataset d = make_empty_panel(400, half.n_items, half.n_waves);
  std::vector<std::size_t> idx;
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t i = 0; i < 200; ++i) idx.push_back(i);
  }
  d = subset_individuals(half, idx);
  for (std::size_t i = 0; i < 400; ++i) {
    d.individual_ids[i] = std::to_string(i);
    d.dob[i] = i < 200 ? -40000 : 40000;  // placement only; ages are untouched
  }
  Priors pr;
  auto cfg = quick_config(4000, 1000, 21);
  cfg.store_memberships = 0;
  const auto chain = run_chain(d, pr, cfg, ModelSpec{ModelKind::kCohort, 2, CohortPartition{{0}}});
  std::vector<double> x0, x1;
  for (const auto& dr : chain.draws) {
    x0.push_back(dr.dirichlet.per_cohort[0].xi()[0]);
    x1.push_back(dr.dirichlet.per_cohort[1].xi()[0]);
  }
  const double se = std::hypot(batch_se(x0, 20), batch_se(x1, 20));
  CHECK(std::abs(mean(x0) - mean(x1)) < 4.0 * se);
}

TEST_CASE("run_chain rejects bad inputs") {
  const auto [data, truth] = generate_dataset(small_spec(5), 1);
  Priors pr;
  auto cfg = quick_config(10, 20);
  CHECK_THROWS_AS(run_chain(data, pr, cfg, ModelSpec{}), ConfigError);
  cfg = quick_config(10, 2);
  CHECK_THROWS_AS(run_chain(data, pr, cfg, ModelSpec{ModelKind::kBasic, 0, {}}), ConfigError);
  RunOptions bad;
  bad.profile_stream = {0};
  CHECK_THROWS_AS(run_chain(data, pr, cfg, ModelSpec{}, bad), std::invalid_argument);
}

TEST_CASE("progress records") {
  const auto [data, truth] = generate_dataset(small_spec(5), 1);
  auto cfg = quick_config(40, 20);
  cfg.progress_every = 10;
  std::vector<std::string> lines;
  RunOptions opts;
  opts.progress = [&](const ProgressRecord& r) { lines.push_back(progress_json(r)); };
  run_chain(data, Priors{}, cfg, ModelSpec{}, opts);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0].find("\"phase\":\"burn_in\"") != std::string::npos);
  CHECK(lines[3].find("\"iteration\":40") != std::string::npos);
}
