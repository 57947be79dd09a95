#include "tgom/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <Eigen/Dense>

#include "tgom/errors.hpp"
#include "tgom/rng.hpp"
#include "tgom/util.hpp"

namespace tgom {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

std::vector<std::size_t> select_draws(std::size_t available, std::size_t max_draws) {
  std::vector<std::size_t> idx;
  if (max_draws == 0 || max_draws >= available) {
    idx.resize(available);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }
  for (std::size_t m = 0; m < max_draws; ++m) idx.push_back(m * available / max_draws);
  return idx;
}

PhiIndividual empty_phi(const PanelDataset& d, std::size_t i) {
  PhiIndividual p;
  p.cell.assign(d.n_waves * d.n_items, kNaN);
  p.item.assign(d.n_items, 0.0);
  p.wave.assign(d.n_waves, kNaN);
  for (std::size_t t = 0; t < d.n_waves; ++t) {
    if (!d.is_observed(i, t)) continue;
    p.wave[t] = 0.0;
    for (std::size_t j = 0; j < d.n_items; ++j) p.cell[t * d.n_items + j] = 0.0;
  }
  return p;
}

// Accumulates the match probabilities of one (draw, omega) pair.
void accumulate(PhiIndividual& acc, const PanelDataset& d, std::size_t i, const std::vector<double>& match) {
  const std::size_t J = d.n_items;
  std::vector<double> item_prod(J, 1.0);
  double all = 1.0;
  for (std::size_t t = 0; t < d.n_waves; ++t) {
    if (!d.is_observed(i, t)) continue;
    double wave_prod = 1.0;
    for (std::size_t j = 0; j < J; ++j) {
      const double m = match[t * J + j];
      acc.cell[t * J + j] += m;
      item_prod[j] *= m;
      wave_prod *= m;
      all *= m;
    }
    acc.wave[t] += wave_prod;
  }
  for (std::size_t j = 0; j < J; ++j) acc.item[j] += item_prod[j];
  acc.all += all;
}

void scale(PhiIndividual& p, double factor) {
  for (double& v : p.cell) v *= factor;
  for (double& v : p.item) v *= factor;
  for (double& v : p.wave) v *= factor;
  p.all *= factor;
}

PhiIndividual products_from_cells(const PanelDataset& d, std::size_t i, const std::vector<double>& match) {
  PhiIndividual p = empty_phi(d, i);
  accumulate(p, d, i, match);
  return p;
}

}  // namespace

std::vector<PhiIndividual> phi_quantities(const PanelDataset& heldout, const PosteriorChain& chain,
                                          const PhiSettings& settings) {
  if (settings.membership_draws == 0) throw std::invalid_argument("membership_draws must be >= 1");
  if (chain.draws.empty()) throw std::invalid_argument("chain has no draws");
  const std::size_t K = chain.meta.n_profiles();
  const std::size_t J = heldout.n_items;
  const std::size_t T = heldout.n_waves;
  if (J != chain.meta.n_items()) throw std::invalid_argument("held-out items differ from the fitted model");
  const bool cohort = chain.meta.model.kind == ModelKind::kCohort;
  const auto draws = select_draws(chain.draws.size(), settings.max_posterior_draws);
  const std::size_t M = settings.membership_draws;

  std::vector<PhiIndividual> out(heldout.n_individuals);
  const unsigned threads = resolve_threads(settings.threads);
#pragma omp parallel for num_threads(threads) schedule(dynamic)
  for (std::size_t i = 0; i < heldout.n_individuals; ++i) {
    const std::size_t c = cohort ? chain.meta.model.partition.cohort_of(heldout.dob[i]) : 0;
    PhiIndividual acc = empty_phi(heldout, i);
    std::vector<double> lambda(T * J * K, 0.0);
    std::vector<double> match(T * J, 0.0);
    std::vector<double> omega(K);
    for (std::size_t di : draws) {
      const Draw& draw = chain.draws[di];
      for (std::size_t t = 0; t < T; ++t) {
        if (!heldout.is_observed(i, t)) continue;
        for (std::size_t j = 0; j < J; ++j) {
          for (std::size_t k = 0; k < K; ++k) {
            lambda[(t * J + j) * K + k] = logistic(draw.params.linear_predictor(k, j, heldout.age(i, t)));
          }
        }
      }
      const auto& alpha = draw.dirichlet.per_cohort[c].alpha();
      for (std::size_t m = 0; m < M; ++m) {
        CounterRng rng = CounterRng::stream(settings.seed, Block::kPredict, {di, i, m});
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K; ++k) {
          omega[k] = rng.log_gamma_variate(alpha[k]);
          hi = std::max(hi, omega[k]);
        }
        double total = 0.0;
        for (std::size_t k = 0; k < K; ++k) total += (omega[k] = std::exp(omega[k] - hi));
        for (double& w : omega) w /= total;
        for (std::size_t t = 0; t < T; ++t) {
          if (!heldout.is_observed(i, t)) continue;
          for (std::size_t j = 0; j < J; ++j) {
            double p = 0.0;
            for (std::size_t k = 0; k < K; ++k) p += omega[k] * lambda[(t * J + j) * K + k];
            match[t * J + j] = heldout.y(i, j, t) ? p : 1.0 - p;
          }
        }
        accumulate(acc, heldout, i, match);
      }
    }
    scale(acc, 1.0 / static_cast<double>(draws.size() * M));
    out[i] = std::move(acc);
  }
  return out;
}

PhiMeans average_phi(const std::vector<PhiIndividual>& phi) {
  PhiMeans m;
  double cells = 0.0, items = 0.0, waves = 0.0;
  for (const auto& p : phi) {
    for (double v : p.cell) {
      if (std::isnan(v)) continue;
      m.cell += v;
      cells += 1.0;
    }
    for (double v : p.item) {
      m.item += v;
      items += 1.0;
    }
    for (double v : p.wave) {
      if (std::isnan(v)) continue;
      m.wave += v;
      waves += 1.0;
    }
    m.all += p.all;
  }
  m.individuals = phi.size();
  if (cells > 0) m.cell /= cells;
  if (items > 0) m.item /= items;
  if (waves > 0) m.wave /= waves;
  if (!phi.empty()) m.all /= static_cast<double>(phi.size());
  return m;
}

std::vector<std::size_t> kfold_split(std::size_t n_individuals, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError({"number of folds must be >= 2"});
  if (n_individuals < k) {
    throw ConfigError({"number of folds (" + std::to_string(k) + ") exceeds the number of individuals (" +
                       std::to_string(n_individuals) + ")"});
  }
  std::vector<std::size_t> order(n_individuals);
  std::iota(order.begin(), order.end(), 0);
  CounterRng rng = CounterRng::stream(seed, Block::kFolds, {n_individuals, k});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> fold(n_individuals);
  for (std::size_t r = 0; r < n_individuals; ++r) fold[order[r]] = r % k;
  return fold;
}

// ------------------------------------------------------------------ baseline

namespace {

constexpr double kRidgePenalty = 1e-6;
constexpr double kIrlsTolerance = 1e-8;
constexpr int kIrlsMaxIterations = 200;

Eigen::Vector4d cubic_basis(double age) {
  const double a = age / 10.0;
  return {1.0, a, a * a, a * a * a};
}

LogisticFit irls(const std::vector<double>& ages, const std::vector<std::uint8_t>& y, double penalty) {
  const std::size_t n = ages.size();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), 4);
  for (std::size_t r = 0; r < n; ++r) X.row(static_cast<Eigen::Index>(r)) = cubic_basis(ages[r]).transpose();
  Eigen::Vector4d beta = Eigen::Vector4d::Zero();
  LogisticFit fit;
  double last_deviance = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= kIrlsMaxIterations; ++it) {
    Eigen::Matrix4d H = penalty * Eigen::Matrix4d::Identity();
    Eigen::Vector4d grad = -penalty * beta;
    double deviance = penalty * beta.squaredNorm();
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = X.row(static_cast<Eigen::Index>(r));
      const double eta = row.dot(beta);
      const double p = 1.0 / (1.0 + std::exp(-eta));
      const double w = std::max(p * (1.0 - p), 1e-300);
      H.noalias() += w * row.transpose() * row;
      grad.noalias() += (static_cast<double>(y[r]) - p) * row.transpose();
      deviance -= 2.0 * log_bernoulli_logit(y[r], eta);
    }
    const Eigen::Vector4d step = H.ldlt().solve(grad);
    if (!step.allFinite()) break;
    beta += step;
    fit.iterations = it;
    if (std::abs(last_deviance - deviance) < kIrlsTolerance * (std::abs(deviance) + kIrlsTolerance) &&
        step.norm() < 1e-6 * (1.0 + beta.norm())) {
      fit.converged = true;
      break;
    }
    last_deviance = deviance;
  }
  fit.coefficients.assign(beta.data(), beta.data() + 4);
  return fit;
}

bool separated(const LogisticFit& fit, const std::vector<double>& ages) {
  if (!fit.converged) return true;
  for (double c : fit.coefficients) {
    if (!std::isfinite(c) || std::abs(c) > 50.0) return true;
  }
  for (double a : ages) {
    const double p = predict_cubic_logistic(fit, a);
    if (p < 1e-10 || p > 1.0 - 1e-10) return true;
  }
  return false;
}

}  // namespace

LogisticFit fit_cubic_logistic(const std::vector<double>& ages, const std::vector<std::uint8_t>& y) {
  if (ages.empty() || ages.size() != y.size()) throw std::invalid_argument("logistic fit needs matching, nonempty data");
  LogisticFit fit = irls(ages, y, 0.0);
  if (separated(fit, ages)) {
    fit = irls(ages, y, kRidgePenalty);
    fit.ridge = true;
  }
  return fit;
}

double predict_cubic_logistic(const LogisticFit& fit, double age) {
  const Eigen::Vector4d x = cubic_basis(age);
  double eta = 0.0;
  for (int c = 0; c < 4; ++c) eta += fit.coefficients[static_cast<std::size_t>(c)] * x[c];
  return logistic(eta);
}

BaselineResult baseline_independent_logistic(const PanelDataset& train, const PanelDataset& heldout) {
  const std::size_t J = train.n_items;
  if (heldout.n_items != J) throw std::invalid_argument("held-out items differ from training items");
  BaselineResult r;
  for (std::size_t j = 0; j < J; ++j) {
    std::vector<double> ages;
    std::vector<std::uint8_t> y;
    for (std::size_t i = 0; i < train.n_individuals; ++i) {
      for (std::size_t t = 0; t < train.n_waves; ++t) {
        if (!train.is_observed(i, t)) continue;
        ages.push_back(train.age(i, t));
        y.push_back(static_cast<std::uint8_t>(train.y(i, j, t)));
      }
    }
    if (ages.empty()) throw std::invalid_argument("baseline: no training data for item " + train.item_labels[j]);
    r.fits.push_back(fit_cubic_logistic(ages, y));
  }
  for (std::size_t i = 0; i < heldout.n_individuals; ++i) {
    std::vector<double> match(heldout.n_waves * J, 0.0);
    for (std::size_t t = 0; t < heldout.n_waves; ++t) {
      if (!heldout.is_observed(i, t)) continue;
      for (std::size_t j = 0; j < J; ++j) {
        const double p = predict_cubic_logistic(r.fits[j], heldout.age(i, t));
        match[t * J + j] = heldout.y(i, j, t) ? p : 1.0 - p;
      }
    }
    r.phi.push_back(products_from_cells(heldout, i, match));
  }
  return r;
}

// ------------------------------------------------------------ cross-validation

PredictionReport cross_validate(const PanelDataset& data, const CvSettings& settings) {
  const auto fold = kfold_split(data.n_individuals, settings.folds, settings.seed);
  PredictionReport report;
  report.folds = settings.folds;
  report.seed = settings.seed;
  report.membership_draws = settings.phi.membership_draws;
  report.max_posterior_draws = settings.phi.max_posterior_draws;
  Fnv1a fp;
  for (std::size_t f : fold) fp.update_value(static_cast<std::uint64_t>(f));
  report.fold_fingerprint = fp.hex();

  std::vector<std::vector<PhiIndividual>> per_model(settings.models.size());
  std::vector<PhiIndividual> baseline;
  bool any_ridge = false;
  for (std::size_t f = 0; f < settings.folds; ++f) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < data.n_individuals; ++i) (fold[i] == f ? test_idx : train_idx).push_back(i);
    const PanelDataset train = subset_individuals(data, train_idx);
    const PanelDataset test = subset_individuals(data, test_idx);
    for (std::size_t m = 0; m < settings.models.size(); ++m) {
      const CvModel& model = settings.models[m];
      SamplerConfig sampler = model.fit.sampler;
      sampler.seed = mix64(model.fit.sampler.seed ^ mix64(f + 1));
      sampler.store_memberships = 0;
      if (settings.log) settings.log("fold " + std::to_string(f + 1) + ": fitting " + model.name);
      PosteriorChain chain;
      try {
        chain = run_chain(train, model.fit.priors, sampler, model.fit.model);
      } catch (const Error& e) {
        throw NumericalError("fold " + std::to_string(f + 1) + ", model " + model.name + ": " + e.what());
      }
      PhiSettings phi = settings.phi;
      phi.seed = mix64(settings.phi.seed ^ mix64((f + 1) * 1000 + m));
      auto values = phi_quantities(test, chain, phi);
      per_model[m].insert(per_model[m].end(), std::make_move_iterator(values.begin()),
                          std::make_move_iterator(values.end()));
    }
    if (settings.baseline) {
      auto b = baseline_independent_logistic(train, test);
      for (const auto& fit : b.fits) any_ridge = any_ridge || fit.ridge;
      baseline.insert(baseline.end(), std::make_move_iterator(b.phi.begin()),
                      std::make_move_iterator(b.phi.end()));
    }
  }
  for (std::size_t m = 0; m < settings.models.size(); ++m) {
    report.rows.push_back({settings.models[m].name, average_phi(per_model[m])});
  }
  if (settings.baseline) report.rows.push_back({kBaselineLabel, average_phi(baseline)});
  if (any_ridge) report.notes.push_back("baseline: separation detected; ridge penalty 1e-6 used for some items");
  if (settings.phi.max_posterior_draws > 0) {
    report.notes.push_back("phi computed on at most " + std::to_string(settings.phi.max_posterior_draws) +
                           " evenly spaced posterior draws per fit");
  }
  return report;
}

nlohmann::json to_json(const PredictionReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    const auto& m = r.means;
    rows.push_back({{"model", r.model},
                    {"phi_ijt", m.cell},
                    {"phi_ij", m.item},
                    {"phi_it", m.wave},
                    {"phi_i", m.all},
                    {"ratio_ij_pct", 100.0 * m.item / m.cell},
                    {"ratio_it_pct", 100.0 * m.wave / m.cell},
                    {"ratio_i_pct", 100.0 * m.all / m.cell},
                    {"individuals", m.individuals}});
  }
  return {{"rows", rows},
          {"folds", report.folds},
          {"seed", report.seed},
          {"fold_fingerprint", report.fold_fingerprint},
          {"membership_draws", report.membership_draws},
          {"max_posterior_draws", report.max_posterior_draws},
          {"notes", report.notes}};
}

void write_report_csv(const PredictionReport& report, std::ostream& out) {
  out << "model,phi_ijt,phi_ij,phi_it,phi_i,ratio_ij_pct,ratio_it_pct,ratio_i_pct\n";
  out << std::fixed;
  for (const auto& r : report.rows) {
    const auto& m = r.means;
    out << '"' << r.model << '"' << std::setprecision(4) << ',' << m.cell << ',' << m.item << ','
        << m.wave << ',' << m.all << std::setprecision(1) << ',' << 100.0 * m.item / m.cell << ','
        << 100.0 * m.wave / m.cell << ',' << 100.0 * m.all / m.cell << '\n';
  }
}

}  // namespace tgom
