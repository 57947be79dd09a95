#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "test_support.hpp"
#include "tgom/analysis.hpp"
#include "tgom/data_io.hpp"

using namespace tgom;

namespace {

// Chain with the given per-draw xi (alpha0 = 1) and random coefficients.
PosteriorChain chain_from_xi(const std::vector<std::vector<double>>& xi, std::size_t J = 2,
                             std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> b0(-1.0, 0.3), b1(0.1, 0.01);
  const std::size_t K = xi.front().size();
  PosteriorChain c;
  c.meta.model.n_profiles = K;
  c.meta.n_individuals = 3;
  c.meta.membership_ids = {0, 1, 2};
  c.meta.cohort_sizes = {3};
  for (std::size_t j = 0; j < J; ++j) c.meta.item_labels.push_back("item" + std::to_string(j + 1));
  for (std::size_t s = 0; s < xi.size(); ++s) {
    Draw d;
    d.iteration = s + 1;
    d.params = TrajectoryParams(K, J);
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(K); ++k) {
      for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(J); ++j) {
        d.params.beta0(k, j) = b0(rng) + 2.0 * static_cast<double>(k);
        d.params.beta1(k, j) = b1(rng);
      }
    }
    d.dirichlet.per_cohort = {DirichletParams::from_concentration(1.0, xi[s])};
    for (std::size_t i = 0; i < 3; ++i) {
      const MembershipVector g = testing::random_membership(rng, K);
      d.memberships.insert(d.memberships.end(), g.g.begin(), g.g.end());
    }
    c.draws.push_back(std::move(d));
  }
  return c;
}

std::string xi_text(const PosteriorChain& c) {
  std::ostringstream out;
  const ProfileSummary s = summarize_profiles(c);
  write_xi_table(s, out);
  write_profile_table(s, out);
  write_onset_table(s, out);
  return out.str();
}

PosteriorChain sampler_chain(std::size_t K, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const PanelDataset d = testing::random_panel(rng, 30, 3, 3);
  SamplerConfig cfg;
  cfg.n_iterations = 300;
  cfg.burn_in = 100;
  cfg.seed = seed;
  cfg.store_memberships = -1;
  ModelSpec m;
  m.n_profiles = K;
  return run_chain(d, Priors{}, cfg, m);
}

}  // namespace

TEST_SUITE("onset ages") {
  TEST_CASE("median onset is where the linear predictor is zero") {
    const auto a = age_quantile(-1.5, 0.1, 0.5);
    REQUIRE(a);
    CHECK(*a == doctest::Approx(95.0).epsilon(1e-14));
    const auto centered = age_quantile(0.0, 0.3, 0.5);
    REQUIRE(centered);
    CHECK(*centered == 80.0);
  }

  TEST_CASE("ninetieth percentile") {
    const auto a = age_quantile(0.0, 0.1, 0.9);
    REQUIRE(a);
    CHECK(*a == doctest::Approx(std::log(9.0) / 0.1 + 80.0).epsilon(1e-14));
    CHECK(*a == doctest::Approx(101.97).epsilon(1e-4));
  }

  TEST_CASE("non-increasing curves have no onset") {
    CHECK_FALSE(age_quantile(0.0, -0.1, 0.5).has_value());
    CHECK_FALSE(age_quantile(1.0, 0.0, 0.5).has_value());
  }

  TEST_CASE("q outside (0, 1) is a domain error") {
    CHECK_THROWS_AS(age_quantile(0.0, 0.1, 0.0), std::domain_error);
    CHECK_THROWS_AS(age_quantile(0.0, 0.1, 1.0), std::domain_error);
    CHECK_THROWS_AS(age_quantile(0.0, 0.1, -0.2), std::domain_error);
  }

  TEST_CASE("inverts the curve") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> b0(0.0, 2.0);
    std::uniform_real_distribution<double> b1(0.02, 0.4), q(0.01, 0.99);
    for (int n = 0; n < 500; ++n) {
      const double beta0 = b0(rng), beta1 = b1(rng), level = q(rng);
      const auto a = age_quantile(beta0, beta1, level, 80.0);
      REQUIRE(a);
      CHECK(std::abs(logistic(beta0 + beta1 * (*a - 80.0)) - level) < 1e-9);
    }
  }
}

TEST_SUITE("draw summaries") {
  TEST_CASE("nearest rank") {
    std::vector<double> v(40);
    std::iota(v.begin(), v.end(), 1.0);
    std::shuffle(v.begin(), v.end(), std::mt19937_64(2));
    CHECK(nearest_rank_quantile(v, 0.025) == 1.0);
    CHECK(nearest_rank_quantile(v, 0.975) == 39.0);
    CHECK(nearest_rank_quantile(v, 0.5) == 20.0);
    CHECK(nearest_rank_quantile(v, 1.0) == 40.0);
    CHECK(nearest_rank_quantile({7.0}, 0.025) == 7.0);
  }

  TEST_CASE("interval") {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    const Interval s = summarize_draws(v);
    CHECK(s.mean == 2.5);
    CHECK(s.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK(s.lower == 1.0);
    CHECK(s.upper == 4.0);
  }
}

TEST_SUITE("relabelling") {
  TEST_CASE("already ordered chain is unchanged") {
    const PosteriorChain c = chain_from_xi({{0.8, 0.2}, {0.7, 0.3}});
    const Relabeling r = relabel_profiles(c);
    CHECK(r.permutation == std::vector<std::size_t>{0, 1});
    CHECK(r.chain.draws == c.draws);
    CHECK(r.chain.meta.relabel_permutation == std::vector<std::size_t>{0, 1});
  }

  TEST_CASE("swapped labels are put in decreasing xi order") {
    const PosteriorChain c = chain_from_xi({{0.176, 0.824}, {0.176, 0.824}});
    const Relabeling r = relabel_profiles(c);
    CHECK(r.permutation == std::vector<std::size_t>{1, 0});
    const auto xi = posterior_mean_xi(r.chain);
    CHECK(xi[0] == doctest::Approx(0.824));
    CHECK(xi[1] == doctest::Approx(0.176));
    CHECK(r.chain.draws[0].params.beta0(0, 1) == c.draws[0].params.beta0(1, 1));
    CHECK(r.chain.draws[1].memberships[2 * 2 + 0] == c.draws[1].memberships[2 * 2 + 1]);
  }

  TEST_CASE("ties keep the original order") {
    const PosteriorChain c = chain_from_xi({{0.25, 0.5, 0.25}});
    const Relabeling r = relabel_profiles(c);
    CHECK(r.permutation == std::vector<std::size_t>{1, 0, 2});
  }

  TEST_CASE("summaries do not depend on the incoming labels") {
    const PosteriorChain c = sampler_chain(3, 8);
    const std::string reference = xi_text(relabel_profiles(c).chain);
    for (const std::vector<std::size_t>& perm :
         {std::vector<std::size_t>{1, 0, 2}, {2, 1, 0}, {1, 2, 0}, {2, 0, 1}}) {
      const PosteriorChain p = permute_profiles(c, perm);
      CHECK(xi_text(relabel_profiles(p).chain) == reference);
    }
  }

  TEST_CASE("permutation composes") {
    const PosteriorChain c = sampler_chain(3, 9);
    const std::vector<std::size_t> p{2, 0, 1}, inv{1, 2, 0};
    const PosteriorChain back = permute_profiles(permute_profiles(c, p), inv);
    CHECK(back.draws == c.draws);
    CHECK(back.meta.final_scales.beta0_sd == c.meta.final_scales.beta0_sd);
    CHECK(back.meta.relabel_permutation == std::vector<std::size_t>{0, 1, 2});
  }
}

TEST_SUITE("label switching") {
  TEST_CASE("constant chain has no flags") {
    const PosteriorChain c = chain_from_xi(std::vector<std::vector<double>>(50, {0.8, 0.2}));
    const auto r = detect_label_switching(c);
    CHECK(r.windows == 10);
    CHECK(r.window_xi.size() == 10);
    CHECK(r.flags.empty());
  }

  TEST_CASE("a swap in the second half is flagged") {
    std::vector<std::vector<double>> xi(60, {0.8, 0.2});
    for (std::size_t s = 40; s < 60; ++s) xi[s] = {0.2, 0.8};
    const auto r = detect_label_switching(chain_from_xi(xi));
    REQUIRE_FALSE(r.flags.empty());
    for (const auto& f : r.flags) {
      CHECK(f.window >= 6);
      CHECK(f.profile_a == 0);
      CHECK(f.profile_b == 1);
      CHECK(f.inversion == doctest::Approx(0.6));
    }
  }

  TEST_CASE("inversions inside the margin are not flagged") {
    std::vector<std::vector<double>> xi(50, {0.52, 0.48});
    for (std::size_t s = 0; s < 5; ++s) xi[s] = {0.49, 0.51};
    CHECK(detect_label_switching(chain_from_xi(xi)).flags.empty());
    CHECK_FALSE(detect_label_switching(chain_from_xi(xi), 10, 0.01).flags.empty());
  }

  TEST_CASE("too few draws") {
    CHECK_THROWS_AS(detect_label_switching(chain_from_xi({{0.5, 0.5}})), std::invalid_argument);
  }
}

TEST_SUITE("tables") {
  TEST_CASE("onset table orders items by median onset within each profile") {
    const PosteriorChain c = chain_from_xi(std::vector<std::vector<double>>(20, {0.6, 0.4}), 5);
    const ProfileSummary s = summarize_profiles(c);
    std::ostringstream out;
    write_onset_table(s, out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("profile,rank,item,age_q10,age_q50,age_q90", 0) == 0);
    std::size_t last_profile = 0;
    double last = -1e300;
    int lines = 0;
    while (std::getline(in, line)) {
      std::vector<std::string> f;
      std::stringstream ls(line);
      for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
      const std::size_t profile = std::stoul(f[0]);
      const double q50 = std::stod(f[4]);
      if (profile != last_profile) last = -1e300;
      CHECK(q50 >= last);
      last = q50;
      last_profile = profile;
      ++lines;
    }
    CHECK(lines == 10);
  }

  TEST_CASE("onset intervals need every draw increasing") {
    PosteriorChain c = chain_from_xi(std::vector<std::vector<double>>(10, {0.6, 0.4}), 1);
    c.draws[3].params.beta1(0, 0) = -0.05;
    const ProfileSummary s = summarize_profiles(c);
    const OnsetAge& o = s.onset[0][1];
    CHECK(o.defined_fraction == doctest::Approx(0.9));
    CHECK(o.point.has_value());
    CHECK_FALSE(o.lower.has_value());
    CHECK(s.onset[1][1].lower.has_value());
  }

  TEST_CASE("cohort xi") {
    PosteriorChain basic = chain_from_xi({{0.6, 0.4}});
    CHECK_THROWS_AS(cohort_xi_table(basic), std::invalid_argument);

    PosteriorChain c = chain_from_xi({{0.6, 0.4}, {0.7, 0.3}});
    c.meta.model.kind = ModelKind::kCohort;
    const auto rows = cohort_xi_table(c);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].mean == doctest::Approx(0.65));
    CHECK(rows[0].lower == doctest::Approx(0.6));
    CHECK(rows[0].upper == doctest::Approx(0.7));
    CHECK(rows[0].mean == doctest::Approx(posterior_mean_xi(c)[0]));
  }
}

TEST_SUITE("curves") {
  const std::vector<double> grid{65, 70, 75, 80, 85, 90, 95, 100, 105};

  TEST_CASE("K=1 curve is the logistic at the mean coefficients") {
    const PosteriorChain c = chain_from_xi(std::vector<std::vector<double>>(5, {1.0}), 2);
    const auto rows = trajectory_curve_table(c, grid, CurveMode::kExtreme);
    CHECK(rows.size() == 2 * grid.size());
    double b0 = 0, b1 = 0;
    for (const auto& d : c.draws) {
      b0 += d.params.beta0(0, 0) / 5.0;
      b1 += d.params.beta1(0, 0) / 5.0;
    }
    for (std::size_t n = 0; n < grid.size(); ++n) {
      CHECK(rows[n].probability == doctest::Approx(logistic(b0 + b1 * (grid[n] - 80.0))).epsilon(1e-12));
    }
    const auto ind = trajectory_curve_table(c, grid, CurveMode::kIndividual, 2);
    for (std::size_t n = 0; n < grid.size(); ++n) {
      CHECK(std::abs(ind[n].probability - rows[n].probability) < 1e-12);
    }
  }

  TEST_CASE("an individual at a vertex follows that profile") {
    PosteriorChain c = chain_from_xi(std::vector<std::vector<double>>(8, {0.5, 0.5}), 2);
    for (auto& d : c.draws) {
      d.memberships[0] = 0.0;
      d.memberships[1] = 1.0;
    }
    const auto ext = trajectory_curve_table(c, grid, CurveMode::kExtreme);
    const auto ind = trajectory_curve_table(c, grid, CurveMode::kIndividual, 1);
    // ext rows: item-major, then profile, then age.
    for (std::size_t j = 0; j < 2; ++j) {
      for (std::size_t n = 0; n < grid.size(); ++n) {
        const auto& e = ext[(j * 2 + 1) * grid.size() + n];
        const auto& r = ind[j * grid.size() + n];
        CHECK(e.curve == "profile_2");
        CHECK(std::abs(e.probability - r.probability) < 1e-12);
      }
    }
  }

  TEST_CASE("individual curves lie inside the profile envelope") {
    const PosteriorChain c = sampler_chain(3, 12);
    const auto ext = trajectory_curve_table(c, grid, CurveMode::kExtreme);
    const auto ind = trajectory_curve_table(c, grid, CurveMode::kIndividual, 100);
    CHECK(ind.size() == 30 * 3 * grid.size());
    for (const auto& r : ind) {
      double lo = 1, hi = 0;
      for (const auto& e : ext) {
        if (e.item == r.item && e.age == r.age) {
          lo = std::min(lo, e.probability);
          hi = std::max(hi, e.probability);
        }
      }
      CHECK(r.probability >= lo - 1e-12);
      CHECK(r.probability <= hi + 1e-12);
    }
  }

  TEST_CASE("individual labels come from the dataset ids") {
    const PosteriorChain c = chain_from_xi({{0.5, 0.5}});
    const std::vector<std::string> ids{"p1", "p2", "p3"};
    const auto rows = trajectory_curve_table(c, grid, CurveMode::kIndividual, 2, ids);
    CHECK(rows.front().curve == "p1");
    CHECK(rows.back().curve == "p2");
    PosteriorChain none = c;
    none.meta.membership_ids.clear();
    for (auto& d : none.draws) d.memberships.clear();
    CHECK_THROWS_AS(trajectory_curve_table(none, grid, CurveMode::kIndividual), std::invalid_argument);
  }
}
