#include "pathchaos/girsanov.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>

namespace pathchaos {

namespace {

const double kSqrt2E = std::numbers::sqrt2 * std::numbers::e;

struct RealizationTerms {
  std::vector<double> lambda_weighted;  // per step
  std::vector<double> sharp;
  double log_rn = 0.0;
};

RealizationTerms integrand_terms(const DriftMismatch& mm, const PathBundle& bundle,
                                 double lambda, bool reversed) {
  const std::size_t steps = mm.grid.n_steps();
  RealizationTerms t;
  t.lambda_weighted.resize(steps);
  t.sharp.resize(steps);
  const double dt = mm.grid.dt();
  double log_rn = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    double raw2 = 0.0, w2 = 0.0, dot = 0.0;
    for (std::size_t i = 0; i < mm.n_particles; ++i) {
      for (double v : mm.raw_at(s, i)) raw2 += v * v;
      auto w = mm.weighted_at(s, i);
      auto dw = bundle.dw(s, i);
      for (std::size_t k = 0; k < mm.d_prime; ++k) {
        w2 += w[k] * w[k];
        dot += w[k] * dw[k];
      }
    }
    t.lambda_weighted[s] = raw2 / (2.0 * lambda);
    t.sharp[s] = 0.5 * w2;
    // Forward: log dQ2/dQ1 along theta1 uses +B; reversed: log dQ1/dQ2 along theta2 uses -B.
    log_rn += (reversed ? -dot : dot) - 0.5 * w2 * dt;
  }
  t.log_rn = log_rn;
  return t;
}

FunctionalEstimate aggregate(const std::vector<std::vector<double>>& per_real, const TimeGrid& grid,
                             const std::string& hash) {
  const std::size_t r_count = per_real.size();
  const std::size_t steps = grid.n_steps();
  const double dt = grid.dt();
  FunctionalEstimate e;
  e.n_realizations = r_count;
  e.config_hash = hash;
  e.per_time.resize(steps);
  e.per_time_se.resize(steps);
  e.cumulative.assign(steps + 1, 0.0);
  e.cumulative_se.assign(steps + 1, 0.0);

  std::vector<double> col(r_count);
  std::vector<double> running(r_count, 0.0);
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t r = 0; r < r_count; ++r) col[r] = per_real[r][s];
    const SampleStats st = sample_stats(col);
    e.per_time[s] = st.mean;
    e.per_time_se[s] = st.std_error;
    for (std::size_t r = 0; r < r_count; ++r) running[r] += dt * per_real[r][s];
    e.cumulative_se[s + 1] = sample_stats(running).std_error;
  }
  for (std::size_t s = 0; s < steps; ++s)
    e.cumulative[s + 1] = dt * pairwise_sum(std::span<const double>(e.per_time).first(s + 1));
  e.value = e.cumulative[steps];
  e.std_error = e.cumulative_se[steps];
  return e;
}

void check_scenario(const KlScenario& sc, const MeanFieldField& field) {
  if (sc.n_particles < 2) throw TooFewParticles("KL functionals need N >= 2");
  sc.model.params.require_nondegenerate();
  if (!sc.model.kernel.bounded()) {
    if (!sc.oracle_only)
      throw UnboundedKernel("the " + sc.model.kernel.name() +
                            " kernel is unbounded; set oracle_only to evaluate the functional");
    std::cerr << "warning: evaluating the path functional for the unbounded "
              << sc.model.kernel.name() << " kernel (oracle-only, no theory bound applies)\n";
  }
  if (!(field.cloud().grid() == sc.grid))
    throw GridMismatch("reference cloud grid differs from the scenario grid");
}

PathFunctionalResult run_functional(const KlScenario& sc, const MeanFieldField& field,
                                    std::size_t realizations, bool reversed) {
  check_scenario(sc, field);
  if (realizations == 0) throw InvalidParameter("need at least one realization");
  std::vector<RealizationTerms> terms(realizations);
  parallel_for(realizations, sc.threads, [&](std::size_t r) {
    try {
      const PathBundle bundle =
          reversed ? simulate_meanfield_driven(sc.model, field, sc.init, sc.grid, sc.n_particles,
                                               sc.rng, r)
                   : simulate_interacting(sc.model, sc.init, sc.grid, sc.n_particles, sc.rng, r);
      const DriftMismatch mm = drift_mismatch(bundle, field, sc.model.params);
      terms[r] = integrand_terms(mm, bundle, sc.model.params.lambda_min(), reversed);
    } catch (const NumericalBlowup& e) {
      throw NumericalBlowup(e.step(), "realization " + std::to_string(r));
    }
  });

  std::vector<std::vector<double>> lw(realizations), sh(realizations);
  std::vector<double> log_rn(realizations), rn(realizations);
  for (std::size_t r = 0; r < realizations; ++r) {
    lw[r] = std::move(terms[r].lambda_weighted);
    sh[r] = std::move(terms[r].sharp);
    log_rn[r] = terms[r].log_rn;
    rn[r] = std::exp(log_rn[r]);
  }
  PathFunctionalResult out;
  out.lambda_weighted = aggregate(lw, sc.grid, sc.config_hash);
  out.sharp = aggregate(sh, sc.grid, sc.config_hash);
  out.log_rn = sample_stats(log_rn);
  out.rn_exp = sample_stats(rn);
  return out;
}

}  // namespace

DriftMismatch drift_mismatch(const PathBundle& bundle, const MeanFieldField& field,
                             const SystemParams& params) {
  if (bundle.n_particles < 2) throw TooFewParticles("drift mismatch needs N >= 2");
  if (!(field.cloud().grid() == bundle.grid))
    throw GridMismatch("reference cloud grid differs from the bundle grid");
  if (field.cloud().d() != bundle.d || params.d() != bundle.d)
    throw DimensionMismatch("dimension mismatch between bundle, cloud and parameters");
  params.require_nondegenerate();

  const std::size_t n = bundle.n_particles;
  const std::size_t d = bundle.d;
  const std::size_t dp = params.d_prime();
  DriftMismatch mm;
  mm.n_particles = n;
  mm.d = d;
  mm.d_prime = dp;
  mm.grid = bundle.grid;
  mm.raw.resize(bundle.grid.n_steps() * n * d);
  mm.weighted.resize(bundle.grid.n_steps() * n * dp);

  const Eigen::MatrixXd& w = params.mismatch_weight();
  std::vector<double> pw(n * d), mf(n * d);
  for (std::size_t s = 0; s < bundle.grid.n_steps(); ++s) {
    auto xs = bundle.positions_at(s);
    pairwise_drift(field.kernel(), xs, n, d, pw);
    field.evaluate_all(s, xs, mf);
    for (std::size_t i = 0; i < n; ++i) {
      double* raw = mm.raw.data() + (s * n + i) * d;
      for (std::size_t k = 0; k < d; ++k) raw[k] = pw[i * d + k] - mf[i * d + k];
      double* wt = mm.weighted.data() + (s * n + i) * dp;
      for (std::size_t l = 0; l < dp; ++l) {
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k)
          acc -= w(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) * raw[k];
        wt[l] = acc;
      }
    }
  }
  return mm;
}

DriftMismatch drift_mismatch(const PathBundle& bundle, const ReferenceCloud& cloud,
                             const KernelSpec& kernel, const SystemParams& params) {
  const MeanFieldField field(cloud, kernel);
  return drift_mismatch(bundle, field, params);
}

double log_rn_derivative(const DriftMismatch& mismatch, const PathBundle& bundle) {
  if (bundle.increments.empty()) throw InvalidParameter("bundle carries no Brownian increments");
  if (!(mismatch.grid == bundle.grid) || mismatch.n_particles != bundle.n_particles ||
      mismatch.d_prime != bundle.d_prime)
    throw DimensionMismatch("mismatch was not computed from this bundle");
  const double dt = mismatch.grid.dt();
  double total = 0.0;
  for (std::size_t s = 0; s < mismatch.grid.n_steps(); ++s) {
    for (std::size_t i = 0; i < mismatch.n_particles; ++i) {
      auto w = mismatch.weighted_at(s, i);
      auto dw = bundle.dw(s, i);
      double dot = 0.0, w2 = 0.0;
      for (std::size_t k = 0; k < mismatch.d_prime; ++k) {
        dot += w[k] * dw[k];
        w2 += w[k] * w[k];
      }
      total += dot - 0.5 * w2 * dt;
    }
  }
  return total;
}

PathFunctionalResult forward_kl_bound(const KlScenario& scenario, const MeanFieldField& field,
                                      std::size_t realizations) {
  return run_functional(scenario, field, realizations, false);
}

PathFunctionalResult reversed_kl_functional(const KlScenario& scenario,
                                            const MeanFieldField& field,
                                            std::size_t realizations) {
  return run_functional(scenario, field, realizations, true);
}

TheoryConstants theory_constants(double k_sup, double lambda, std::optional<double> eta) {
  if (!(k_sup >= 0.0) || !std::isfinite(k_sup))
    throw InvalidParameter("sup-norm must be finite and nonnegative");
  if (!(lambda > kDegenerateLambda) || !std::isfinite(lambda))
    throw DegenerateDiffusion("theory constants need lambda > 1e-10");
  TheoryConstants c;
  c.k_sup = k_sup;
  c.lambda = lambda;
  const double k2 = k_sup * k_sup;
  if (k2 == 0.0) {
    c.eta_max = std::numeric_limits<double>::infinity();
    c.eta = eta.value_or(1.0);
    if (!(c.eta > 0.0) || !std::isfinite(c.eta)) throw InvalidParameter("eta must be positive");
    return c;
  }
  c.eta_max = 1.0 / (4.0 * kSqrt2E * k2);
  c.eta = eta.value_or(1.0 / (8.0 * kSqrt2E * k2));
  if (!(c.eta > 0.0) || !(c.eta < c.eta_max))
    throw InvalidParameter("eta must lie in (0, 1/(4 sqrt(2) e |K|^2))");
  c.c_eta = 8.0 * k2 - 2.0 * std::log1p(-4.0 * kSqrt2E * k2 * c.eta);
  c.c1 = (4.0 * k2 + std::numbers::ln2) / (4.0 * kSqrt2E * k2);
  c.c2 = 16.0 * kSqrt2E * k2 / lambda;
  c.c = std::max(c.c1, c.c2);
  return c;
}

std::vector<double> theory_bound_curve(const TheoryConstants& consts, double lambda,
                                       std::span<const double> t_values) {
  if (!(lambda > kDegenerateLambda)) throw DegenerateDiffusion("lambda must be positive");
  std::vector<double> out;
  out.reserve(t_values.size());
  for (double t : t_values) {
    if (!(t >= 0.0)) throw InvalidParameter("bound curve times must be nonnegative");
    const double expo = t / (2.0 * lambda * consts.eta);
    if (expo > 700.0)
      out.push_back(std::numeric_limits<double>::infinity());
    else
      out.push_back(consts.c_eta * consts.eta * std::expm1(expo));
  }
  return out;
}

double reversed_functional_cap(double k_sup, double horizon, std::size_t n, double lambda) {
  if (n < 2) throw TooFewParticles("cap needs N >= 2");
  return 4.0 * k_sup * k_sup * horizon * static_cast<double>(n) /
         (static_cast<double>(n - 1) * lambda);
}

double concentration_bound(double k_sup, double eta) {
  const double q = 4.0 * kSqrt2E * k_sup * k_sup * eta;
  if (!(eta > 0.0) || !(q < 1.0)) throw InvalidParameter("eta outside (0, 1/(4 sqrt(2) e |K|^2))");
  return 1.0 / (1.0 - q);
}

}  // namespace pathchaos
