#include "pathchaos/info_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace pathchaos {

namespace {

constexpr double kNormTol = 1e-12;
constexpr double kSlack = 1e-10;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

void require_same_size(const DiscreteMeasure& p, const DiscreteMeasure& q) {
  if (p.size() != q.size()) throw DimensionMismatch("measures live on different label sets");
}

double logdet_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

DiscreteMeasure DiscreteMeasure::make(std::vector<double> probs, std::vector<std::string> labels) {
  if (probs.empty()) throw InvalidParameter("discrete measure needs at least one atom");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidParameter("probabilities must be finite and nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > kNormTol) throw InvalidParameter("probabilities must sum to 1");
  if (labels.empty()) {
    labels.reserve(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) labels.push_back(std::to_string(i));
  }
  if (labels.size() != probs.size()) throw DimensionMismatch("one label per atom required");
  if (std::set<std::string>(labels.begin(), labels.end()).size() != labels.size())
    throw InvalidParameter("atom labels must be unique");
  DiscreteMeasure m;
  m.probs_ = std::move(probs);
  m.labels_ = std::move(labels);
  return m;
}

Channel Channel::make(Eigen::MatrixXd p) {
  if (p.rows() == 0 || p.cols() == 0) throw InvalidParameter("channel matrix is empty");
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    if (!p.row(r).allFinite() || p.row(r).minCoeff() < 0.0)
      throw InvalidParameter("channel entries must be finite and nonnegative");
    if (std::abs(p.row(r).sum() - 1.0) > kNormTol)
      throw InvalidParameter("channel row " + std::to_string(r) + " does not sum to 1");
  }
  Channel ch;
  ch.p_ = std::move(p);
  return ch;
}

Channel Channel::identity(std::size_t n) {
  return make(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
}

DiscreteMeasure Channel::push(const DiscreteMeasure& m) const {
  if (m.size() != inputs()) throw DimensionMismatch("measure size does not match channel inputs");
  std::vector<double> out(outputs(), 0.0);
  for (std::size_t x = 0; x < inputs(); ++x)
    for (std::size_t y = 0; y < outputs(); ++y)
      out[y] += m[x] * p_(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
  double total = 0.0;
  for (double v : out) total += v;
  for (double& v : out) v /= total;
  return DiscreteMeasure::make(std::move(out));
}

std::string to_string(FDivergence f) {
  switch (f) {
    case FDivergence::kl: return "kl";
    case FDivergence::tv: return "tv";
    case FDivergence::chi2: return "chi2";
  }
  return "?";
}

double f_divergence(const DiscreteMeasure& p, const DiscreteMeasure& q, FDivergence f) {
  require_same_size(p, q);
  double total = 0.0;
  for (std::size_t y = 0; y < p.size(); ++y) {
    const double py = p[y], qy = q[y];
    switch (f) {
      case FDivergence::tv:
        total += 0.5 * std::abs(py - qy);
        break;
      case FDivergence::kl:
        if (py == 0.0) break;
        if (qy == 0.0) return kInfiniteDivergence;
        total += py * std::log(py / qy);
        break;
      case FDivergence::chi2:
        if (qy == 0.0) {
          if (py == 0.0) break;
          return kInfiniteDivergence;
        }
        total += (py - qy) * (py - qy) / qy;
        break;
    }
  }
  return std::max(total, 0.0);
}

InequalityCheck dpi_check(const DiscreteMeasure& p, const DiscreteMeasure& q, const Channel& ch,
                          FDivergence f) {
  require_same_size(p, q);
  InequalityCheck c;
  c.rhs = f_divergence(p, q, f);
  c.lhs = f_divergence(ch.push(p), ch.push(q), f);
  c.holds = std::isinf(c.rhs) || c.lhs <= c.rhs + kSlack;
  return c;
}

GaussianMeasure GaussianMeasure::make(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  if (mean.size() == 0) throw DimensionMismatch("gaussian mean is empty");
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    throw DimensionMismatch("gaussian covariance shape does not match the mean");
  if (!mean.allFinite() || !cov.allFinite()) throw InvalidParameter("gaussian must be finite");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff()))
    throw InvalidParameter("gaussian covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 1e-12))
    throw InvalidParameter("gaussian covariance must be positive definite");
  GaussianMeasure g;
  g.mean_ = std::move(mean);
  g.cov_ = std::move(cov);
  return g;
}

GaussianMeasure GaussianMeasure::scalar(double mean, double variance) {
  return make(Eigen::VectorXd::Constant(1, mean), Eigen::MatrixXd::Constant(1, 1, variance));
}

double gaussian_kl(const GaussianMeasure& p, const GaussianMeasure& q) {
  if (p.dim() != q.dim()) throw DimensionMismatch("gaussians have different dimensions");
  Eigen::LLT<Eigen::MatrixXd> lq(q.cov()), lp(p.cov());
  if (lq.info() != Eigen::Success || lp.info() != Eigen::Success)
    throw InvalidParameter("gaussian covariance must be positive definite");
  const Eigen::VectorXd delta = q.mean() - p.mean();
  const double trace = lq.solve(p.cov()).trace();
  const double quad = delta.dot(lq.solve(delta));
  const double kl = 0.5 * (trace - static_cast<double>(p.dim()) + quad + logdet_llt(lq) - logdet_llt(lp));
  return std::max(kl, 0.0);
}

GaussianMeasure add_gaussian_noise(const GaussianMeasure& p, const Eigen::MatrixXd& noise_cov) {
  if (noise_cov.rows() != p.cov().rows() || noise_cov.cols() != p.cov().cols())
    throw DimensionMismatch("noise covariance shape does not match");
  return GaussianMeasure::make(p.mean(), p.cov() + noise_cov);
}

double gaussian_tv_1d(double mean_p, double var_p, double mean_q, double var_q) {
  if (!(var_p > 0.0) || !(var_q > 0.0)) throw InvalidParameter("variances must be positive");
  const double sp = std::sqrt(var_p), sq = std::sqrt(var_q);
  if (var_p == var_q) return std::erf(std::abs(mean_p - mean_q) / (2.0 * std::numbers::sqrt2 * sp));
  // log p - log q = a x^2 + b x + c
  const double a = 0.5 / var_q - 0.5 / var_p;
  const double b = mean_p / var_p - mean_q / var_q;
  const double c = 0.5 * mean_q * mean_q / var_q - 0.5 * mean_p * mean_p / var_p +
                   0.5 * std::log(var_q / var_p);
  const double disc = std::sqrt(b * b - 4.0 * a * c);
  double r1 = (-b - disc) / (2.0 * a), r2 = (-b + disc) / (2.0 * a);
  if (r1 > r2) std::swap(r1, r2);
  auto mass = [](double m, double s, double lo, double hi) {
    return normal_cdf((hi - m) / s) - normal_cdf((lo - m) / s);
  };
  // a > 0: p dominates outside [r1, r2]; a < 0: inside.
  const double inside = mass(mean_p, sp, r1, r2) - mass(mean_q, sq, r1, r2);
  return std::abs(inside);
}

InequalityCheck fenchel_young_check(const DiscreteMeasure& rho, const DiscreteMeasure& rho_tilde,
                                    std::span<const double> f_values, double eta) {
  require_same_size(rho, rho_tilde);
  if (f_values.size() != rho.size()) throw DimensionMismatch("one F value per atom required");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidParameter("eta must be positive");
  for (std::size_t y = 0; y < rho.size(); ++y)
    if (rho[y] > 0.0 && rho_tilde[y] == 0.0)
      throw InvalidParameter("rho is not absolutely continuous with respect to rho~");
  InequalityCheck c;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t y = 0; y < rho.size(); ++y) {
    c.lhs += rho[y] * f_values[y];
    if (rho_tilde[y] > 0.0) top = std::max(top, eta * f_values[y]);
  }
  double acc = 0.0;
  for (std::size_t y = 0; y < rho.size(); ++y)
    if (rho_tilde[y] > 0.0) acc += rho_tilde[y] * std::exp(eta * f_values[y] - top);
  const double log_mgf = top + std::log(acc);
  c.rhs = (f_divergence(rho, rho_tilde, FDivergence::kl) + log_mgf) / eta;
  c.holds = c.lhs <= c.rhs + kSlack;
  return c;
}

ScalingCheck linear_scaling_check(const ExchangeableGaussian& joint, const MeanFieldGaussian& ref,
                                  std::size_t k) {
  if (k < 1 || k > joint.n) throw InvalidParameter("k must lie in [1, n]");
  ScalingCheck c;
  c.per_k = exact_marginal_kl(joint, k, ref) / static_cast<double>(k);
  c.per_n = exact_joint_kl(joint, ref) / static_cast<double>(joint.n);
  c.holds = c.per_k <= c.per_n + kSlack;
  return c;
}

ScalingCheck linear_scaling_check(const GaussianMeasure& joint, std::size_t n,
                                  const GaussianMeasure& ref, std::size_t k) {
  if (n == 0 || joint.dim() != n * ref.dim())
    throw DimensionMismatch("joint dimension must be n times the reference dimension");
  if (k < 1 || k > n) throw InvalidParameter("k must lie in [1, n]");
  const auto b = static_cast<Eigen::Index>(ref.dim());
  const auto nn = static_cast<Eigen::Index>(n);
  const Eigen::MatrixXd& cov = joint.cov();
  const Eigen::MatrixXd s = cov.block(0, 0, b, b);
  const Eigen::MatrixXd c = n > 1 ? Eigen::MatrixXd(cov.block(0, b, b, b)) : Eigen::MatrixXd::Zero(b, b);
  const Eigen::VectorXd mu = joint.mean().head(b);
  constexpr double tol = 1e-10;
  for (Eigen::Index i = 0; i < nn; ++i) {
    if ((joint.mean().segment(i * b, b) - mu).cwiseAbs().maxCoeff() > tol)
      throw InvalidParameter("joint law is not exchangeable (means differ)");
    for (Eigen::Index j = 0; j < nn; ++j)
      if ((cov.block(i * b, j * b, b, b) - (i == j ? s : c)).cwiseAbs().maxCoeff() > tol)
        throw InvalidParameter("joint law is not exchangeable (covariance blocks differ)");
  }
  auto product_ref = [&](std::size_t count) {
    const auto m = static_cast<Eigen::Index>(count);
    Eigen::MatrixXd rc = Eigen::MatrixXd::Zero(m * b, m * b);
    for (Eigen::Index i = 0; i < m; ++i) rc.block(i * b, i * b, b, b) = ref.cov();
    return GaussianMeasure::make(ref.mean().replicate(m, 1), rc);
  };
  const auto kk = static_cast<Eigen::Index>(k);
  const GaussianMeasure marg =
      GaussianMeasure::make(joint.mean().head(kk * b), cov.topLeftCorner(kk * b, kk * b));
  ScalingCheck out;
  out.per_k = gaussian_kl(marg, product_ref(k)) / static_cast<double>(k);
  out.per_n = gaussian_kl(joint, product_ref(n)) / static_cast<double>(n);
  out.holds = out.per_k <= out.per_n + kSlack;
  return out;
}

double pinsker_tv(double kl) {
  if (!(kl >= 0.0)) throw InvalidParameter("KL must be nonnegative");
  return std::sqrt(kl / 2.0);
}

DiscreteMeasure random_measure(const KeyedStream& stream, std::size_t states,
                               std::uint64_t counter0) {
  std::vector<double> w(states);
  double total = 0.0;
  for (std::size_t i = 0; i < states; ++i) {
    w[i] = -std::log(stream.uniform(counter0 + i)) + 1e-3;
    total += w[i];
  }
  for (double& v : w) v /= total;
  return DiscreteMeasure::make(std::move(w));
}

FuzzSummary dpi_fuzz(std::size_t cases, std::size_t states, FDivergence f, std::uint64_t seed) {
  const RngPolicy rng{seed};
  FuzzSummary s;
  s.cases = cases;
  for (std::size_t i = 0; i < cases; ++i) {
    const KeyedStream st = rng.stream(StreamTag::fuzz, i, static_cast<std::uint64_t>(f), 0);
    const DiscreteMeasure p = random_measure(st, states, 0);
    const DiscreteMeasure q = random_measure(st, states, states);
    Eigen::MatrixXd m(states, states);
    for (std::size_t r = 0; r < states; ++r) {
      const DiscreteMeasure row = random_measure(st, states, (2 + r) * states);
      for (std::size_t c = 0; c < states; ++c)
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
    const InequalityCheck chk = dpi_check(p, q, Channel::make(m), f);
    s.max_excess = std::max(s.max_excess, chk.lhs - chk.rhs);
    if (!chk.holds) ++s.violations;
  }
  return s;
}

FuzzSummary fenchel_young_fuzz(std::size_t cases, std::size_t states, std::uint64_t seed) {
  const RngPolicy rng{seed};
  FuzzSummary s;
  s.cases = cases;
  std::vector<double> f(states);
  for (std::size_t i = 0; i < cases; ++i) {
    const KeyedStream st = rng.stream(StreamTag::fuzz, i, 100, 0);
    const DiscreteMeasure rho = random_measure(st, states, 0);
    const DiscreteMeasure rho_t = random_measure(st, states, states);
    for (std::size_t y = 0; y < states; ++y) f[y] = 6.0 * st.uniform(2 * states + y) - 3.0;
    const double eta = 0.1 + 2.9 * st.uniform(3 * states);
    const InequalityCheck chk = fenchel_young_check(rho, rho_t, f, eta);
    s.max_excess = std::max(s.max_excess, chk.lhs - chk.rhs);
    if (!chk.holds) ++s.violations;
  }
  return s;
}

ConcentrationReport concentration_suite(const ReferenceCloud& cloud, const KernelSpec& kernel,
                                        double t, std::size_t n, double eta,
                                        std::size_t resamples, const RngPolicy& rng,
                                        std::size_t threads) {
  if (n < 2) throw TooFewParticles("concentration statistic needs N >= 2");
  if (resamples < 2) throw InvalidParameter("need at least two resamples");
  const std::size_t d = cloud.d();
  const double k_sup = kernel_sup_norm(kernel, d);
  if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidParameter("eta must be positive");
  ConcentrationReport rep;
  rep.eta = eta;
  rep.n_particles = n;
  rep.resamples = resamples;
  rep.bound = k_sup == 0.0 ? 1.0 : concentration_bound(k_sup, eta);
  const std::size_t step = cloud.grid().step_at(t);
  rep.time = cloud.grid().time(step);

  const MeanFieldField field(cloud, kernel);
  const auto snap = cloud.positions_at(step);
  const double scale = eta / static_cast<double>(n - 1);
  std::vector<double> values(resamples);
  parallel_for(resamples, threads, [&](std::size_t r) {
    const KeyedStream st = rng.stream(StreamTag::resample, r, 0, step);
    std::vector<double> xi(d), conv(d), diff(d), kval(d), sum(d, 0.0);
    const std::size_t i_idx = st.index(0, cloud.size());
    std::copy_n(snap.begin() + static_cast<std::ptrdiff_t>(i_idx * d), d, xi.begin());
    field.evaluate(step, xi, conv);
    double sq = 0.0;
    for (std::size_t j = 1; j < n; ++j) {
      const std::size_t idx = st.index(j, cloud.size());
      for (std::size_t k = 0; k < d; ++k) diff[k] = xi[k] - snap[idx * d + k];
      kernel_eval(kernel, diff, kval);
      for (std::size_t k = 0; k < d; ++k) {
        const double a = kval[k] - conv[k];
        sum[k] += a;
        sq += a * a;
      }
    }
    double total = 0.0;
    for (double v : sum) total += v * v;
    values[r] = std::exp(scale * (total - sq));
  });
  const SampleStats st = sample_stats(values);
  rep.moment = st.mean;
  rep.moment_se = st.std_error;
  rep.holds = rep.moment <= rep.bound + 3.0 * rep.moment_se;
  return rep;
}

std::vector<double> mz_increments(const ReferenceCloud& cloud, const KernelSpec& kernel, double t,
                                  std::size_t terms, std::size_t samples, const RngPolicy& rng) {
  if (terms == 0 || samples == 0) throw InvalidParameter("need at least one term and one sample");
  kernel_sup_norm(kernel, cloud.d());
  const std::size_t d = cloud.d();
  const std::size_t step = cloud.grid().step_at(t);
  const MeanFieldField field(cloud, kernel);
  const auto snap = cloud.positions_at(step);
  std::vector<double> out(samples * terms);
  std::vector<double> xi(d), conv(d), diff(d), kval(d), a(d), partial(d);
  for (std::size_t s = 0; s < samples; ++s) {
    const KeyedStream st = rng.stream(StreamTag::resample, s, 1, step);
    const std::size_t i_idx = st.index(0, cloud.size());
    std::copy_n(snap.begin() + static_cast<std::ptrdiff_t>(i_idx * d), d, xi.begin());
    field.evaluate(step, xi, conv);
    std::fill(partial.begin(), partial.end(), 0.0);
    for (std::size_t j = 0; j <= terms; ++j) {
      const std::size_t idx = st.index(j + 1, cloud.size());
      for (std::size_t k = 0; k < d; ++k) diff[k] = xi[k] - snap[idx * d + k];
      kernel_eval(kernel, diff, kval);
      for (std::size_t k = 0; k < d; ++k) a[k] = kval[k] - conv[k];
      if (j > 0) {
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += a[k] * partial[k];
        out[s * terms + (j - 1)] = dot;
      }
      for (std::size_t k = 0; k < d; ++k) partial[k] += a[k];
    }
  }
  return out;
}

MzCheck mz_inequality_check(std::span<const double> increments, std::size_t terms, std::size_t p) {
  if (p < 2 || p % 2 != 0) throw InvalidParameter("p must be an even integer >= 2");
  if (terms == 0 || increments.size() % terms != 0 || increments.size() / terms < 2)
    throw DimensionMismatch("increments must be (sample, term) with at least two samples");
  const std::size_t samples = increments.size() / terms;
  const double pp = static_cast<double>(p);
  auto norm_sq = [&](std::span<const double> v, double& se) {
    std::vector<double> pw(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) pw[i] = std::pow(std::abs(v[i]), pp);
    const SampleStats st = sample_stats(pw);
    se = st.mean > 0.0 ? (2.0 / pp) * std::pow(st.mean, 2.0 / pp - 1.0) * st.std_error : 0.0;
    return std::pow(st.mean, 2.0 / pp);
  };
  std::vector<double> total(samples, 0.0), col(samples);
  MzCheck c;
  c.p = p;
  double rhs_var = 0.0;
  for (std::size_t k = 0; k < terms; ++k) {
    for (std::size_t s = 0; s < samples; ++s) {
      col[s] = increments[s * terms + k];
      total[s] += col[s];
    }
    double se = 0.0;
    c.rhs += norm_sq(col, se);
    rhs_var += se * se;
  }
  c.rhs *= pp - 1.0;
  double lhs_se = 0.0;
  c.lhs = norm_sq(total, lhs_se);
  c.se = std::sqrt(lhs_se * lhs_se + (pp - 1.0) * (pp - 1.0) * rhs_var);
  c.holds = c.lhs <= c.rhs + 3.0 * c.se;
  return c;
}

}  // namespace pathchaos
