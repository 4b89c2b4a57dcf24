#include "noisyei/acq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "noisyei/errors.hpp"
#include "noisyei/normal.hpp"
#include "noisyei/optimize.hpp"

namespace nei {
namespace {

struct EIxPartials {
  double mu_f = 0.0;
  double sigma_f = 0.0;
  std::vector<double> mu_c;
  std::vector<double> sigma_c;
  std::vector<double> prefix;
  std::vector<double> suffix;
  std::vector<double> probs;
  std::vector<double> dens;
};

// EIx and, when `partials` is given, its partial derivatives with respect to
// every marginal moment.
double eix_core(double mu_f, double sigma_f, const double* mu_c, const double* sd_c, std::size_t num_c,
                const std::optional<double>& incumbent, double penalty_m, EIxPartials* partials) {
  double base = 0.0;
  double d_mu = 0.0;
  double d_sigma = 0.0;
  if (incumbent) {
    const double gap = *incumbent - mu_f;
    if (sigma_f > 0.0) {
      const double z = gap / sigma_f;
      const double cdf = normal_cdf(z);
      const double pdf = normal_pdf(z);
      base = std::max(0.0, gap * cdf + sigma_f * pdf);
      d_mu = -cdf;
      d_sigma = pdf;
    } else {
      base = std::max(0.0, gap);
      d_mu = gap > 0.0 ? -1.0 : 0.0;
    }
  } else {
    base = penalty_m - mu_f;
    d_mu = -1.0;
  }

  double product = 1.0;
  if (!partials) {
    for (std::size_t j = 0; j < num_c; ++j) {
      product *= normal_cdf(-mu_c[j] / std::max(sd_c[j], kMinConstraintSd));
    }
    return base * product;
  }

  auto& p = *partials;
  p.probs.resize(num_c);
  p.dens.resize(num_c);
  p.prefix.resize(num_c + 1);
  p.suffix.resize(num_c + 1);
  p.mu_c.assign(num_c, 0.0);
  p.sigma_c.assign(num_c, 0.0);
  for (std::size_t j = 0; j < num_c; ++j) {
    const double sd = std::max(sd_c[j], kMinConstraintSd);
    const double u = -mu_c[j] / sd;
    p.probs[j] = normal_cdf(u);
    p.dens[j] = normal_pdf(u);
  }
  p.prefix[0] = 1.0;
  for (std::size_t j = 0; j < num_c; ++j) p.prefix[j + 1] = p.prefix[j] * p.probs[j];
  p.suffix[num_c] = 1.0;
  for (std::size_t j = num_c; j-- > 0;) p.suffix[j] = p.suffix[j + 1] * p.probs[j];
  product = p.prefix[num_c];

  p.mu_f = d_mu * product;
  p.sigma_f = d_sigma * product;
  for (std::size_t j = 0; j < num_c; ++j) {
    const double others = p.prefix[j] * p.suffix[j + 1];
    const bool clamped = !(sd_c[j] > kMinConstraintSd);
    const double sd = clamped ? kMinConstraintSd : sd_c[j];
    p.mu_c[j] = base * others * (-p.dens[j] / sd);
    p.sigma_c[j] = clamped ? 0.0 : base * others * p.dens[j] * mu_c[j] / (sd * sd);
  }
  return base * product;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be finite");
}

Matrix vstack(const Matrix& a, const Matrix& b) {
  if (a.rows() == 0) return b;
  if (b.rows() == 0) return a;
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

Matrix map_to_bounds(Matrix unit, const Bounds& bounds) {
  const Vector range = bounds.upper - bounds.lower;
  for (Eigen::Index i = 0; i < unit.rows(); ++i) {
    unit.row(i) = bounds.lower.transpose() + unit.row(i).cwiseProduct(range.transpose());
  }
  return unit;
}

}  // namespace

double ei_analytic(double mu, double sigma, double best) {
  require_finite(mu, "ei_analytic: mu");
  require_finite(sigma, "ei_analytic: sigma");
  require_finite(best, "ei_analytic: best");
  if (sigma < 0.0) throw InvalidArgument("ei_analytic: sigma must be non-negative");
  return eix_core(mu, sigma, nullptr, nullptr, 0, best, 0.0, nullptr);
}

double prob_feasible(double mu_c, double sigma_c) {
  require_finite(mu_c, "prob_feasible: mu_c");
  if (!(sigma_c > 0.0) || !std::isfinite(sigma_c)) {
    throw InvalidArgument("prob_feasible: sigma_c must be positive");
  }
  return normal_cdf(-mu_c / sigma_c);
}

void EIxInputs::validate() const {
  require_finite(mu_f, "EIx mu_f");
  require_finite(sigma_f, "EIx sigma_f");
  require_finite(penalty_m, "EIx penalty M");
  if (sigma_f < 0.0) throw InvalidArgument("EIx sigma_f must be non-negative");
  if (incumbent) require_finite(*incumbent, "EIx incumbent");
  for (const auto& c : constraints) {
    require_finite(c.mean, "EIx constraint mean");
    require_finite(c.sd, "EIx constraint sd");
    if (c.sd < 0.0) throw InvalidArgument("EIx constraint sd must be non-negative");
  }
}

double eix(const EIxInputs& in) {
  in.validate();
  std::vector<double> mu(in.constraints.size()), sd(in.constraints.size());
  for (std::size_t j = 0; j < mu.size(); ++j) {
    mu[j] = in.constraints[j].mean;
    sd[j] = in.constraints[j].sd;
  }
  return eix_core(in.mu_f, in.sigma_f, mu.data(), sd.data(), mu.size(), in.incumbent, in.penalty_m,
                  nullptr);
}

Vector eix_gradient(const EIxInputs& in, const MomentGradients& grads) {
  in.validate();
  const std::size_t num_c = in.constraints.size();
  if (grads.mu_c.size() != num_c || grads.sigma_c.size() != num_c) {
    throw InvalidArgument("eix_gradient: one moment gradient per constraint is required");
  }
  std::vector<double> mu(num_c), sd(num_c);
  for (std::size_t j = 0; j < num_c; ++j) {
    mu[j] = in.constraints[j].mean;
    sd[j] = in.constraints[j].sd;
  }
  EIxPartials p;
  eix_core(in.mu_f, in.sigma_f, mu.data(), sd.data(), num_c, in.incumbent, in.penalty_m, &p);
  Vector out = p.mu_f * grads.mu_f + p.sigma_f * grads.sigma_f;
  for (std::size_t j = 0; j < num_c; ++j) {
    out += p.mu_c[j] * grads.mu_c[j] + p.sigma_c[j] * grads.sigma_c[j];
  }
  return out;
}

void MetricModels::validate() const {
  const auto& x = objective.data().points;
  for (const auto& c : constraints) {
    if (c.data().points.rows() != x.rows() || c.data().points.cols() != x.cols() ||
        c.data().points != x) {
      throw InvalidArgument("objective and constraint models must share their training points");
    }
  }
}

GPModel FantasySet::model(std::size_t metric, std::size_t k) const {
  if (metric >= metrics.size() || k >= sample_count()) {
    throw InvalidArgument("FantasySet::model: index out of range");
  }
  const auto& m = metrics[metric];
  return GPModel(m.base.params(),
                 NoisyDataset{points, m.values.col(static_cast<Eigen::Index>(k)), m.base.data().noise_sds});
}

std::size_t fantasy_dimension(const MetricModels& models, Eigen::Index num_pending) {
  return static_cast<std::size_t>(models.objective.data().size() + num_pending) *
         (models.num_constraints() + 1);
}

FantasySet prepare_fantasies(const MetricModels& models, const Matrix& pending, std::size_t count,
                             PointSource& source, double penalty_m, FantasyMode mode) {
  models.validate();
  require_finite(penalty_m, "penalty M");
  if (count == 0) throw InvalidArgument("prepare_fantasies: sample count must be at least 1");
  const Eigen::Index n = models.objective.data().size();
  const Eigen::Index d = models.objective.dim();
  const Eigen::Index m = pending.rows();
  if (m > 0 && pending.cols() != d) throw InvalidArgument("pending points have the wrong dimension");
  const Eigen::Index block = n + m;
  const std::size_t num_metrics = models.num_constraints() + 1;
  if (source.dimension() != fantasy_dimension(models, m)) {
    std::ostringstream msg;
    msg << "prepare_fantasies: point source has dimension " << source.dimension() << ", expected "
        << fantasy_dimension(models, m);
    throw InvalidArgument(msg.str());
  }

  FantasySet out;
  out.mode = mode;
  out.points = vstack(models.objective.data().points, pending);
  out.num_observed = n;
  out.penalty_m = penalty_m;

  const Matrix uniforms = source.draw(count);
  const Eigen::Index num_draws = uniforms.rows();
  Matrix normals(num_draws, uniforms.cols());
  for (Eigen::Index i = 0; i < num_draws; ++i) {
    for (Eigen::Index j = 0; j < uniforms.cols(); ++j) normals(i, j) = inv_normal_cdf(uniforms(i, j));
  }

  for (std::size_t metric = 0; metric < num_metrics; ++metric) {
    const GPModel& model = metric == 0 ? models.objective : models.constraints[metric - 1];
    MVNPosterior post = model.posterior_with_training(pending);
    Vector noise = Vector::Zero(block);
    if (mode == FantasyMode::plug_in) {
      const Vector& tau = model.data().noise_sds;
      const double pending_sd = std::sqrt(tau.array().square().mean());
      noise.head(n) = tau;
      noise.tail(m).setConstant(pending_sd);
      // The noisy model is conditioned on the observations themselves.
      post.mean.head(n) = model.data().means;
      post.cov.topRows(n).setZero();
      post.cov.leftCols(n).setZero();
      post.cov.bottomRightCorner(m, m).diagonal().array() += pending_sd * pending_sd;
    }
    const Matrix factor = psd_factor(post.cov, 1e-12 * model.params().signal_variance);
    const Eigen::Index offset = static_cast<Eigen::Index>(metric) * block;
    // values = A z + mu, one fantasy per column
    Matrix values = factor * normals.middleCols(offset, block).transpose();
    values.colwise() += post.mean;

    GPModel base(model.params(), NoisyDataset{out.points, values.col(0), noise});
    Matrix centered = values.array() - model.params().mean_constant;
    Matrix weights = base.solve(centered);
    Matrix fitted = kernel_matrix(out.points, out.points, model.params()) * weights;
    fitted.array() += model.params().mean_constant;
    out.metrics.push_back(FantasyMetric{std::move(base), std::move(values), std::move(weights),
                                        std::move(fitted)});
  }

  out.incumbents.resize(static_cast<std::size_t>(num_draws));
  for (Eigen::Index k = 0; k < num_draws; ++k) {
    std::optional<double> best;
    for (Eigen::Index i = 0; i < block; ++i) {
      bool feasible = true;
      for (std::size_t metric = 1; metric < num_metrics && feasible; ++metric) {
        feasible = out.metrics[metric].fitted(i, k) <= 0.0;
      }
      if (!feasible) continue;
      const double f = out.metrics[0].fitted(i, k);
      if (!best || f < *best) best = f;
    }
    out.incumbents[static_cast<std::size_t>(k)] = best;
  }
  return out;
}

double penalty_from_scan(const GPModel& objective, const Bounds& bounds, std::size_t scan_points,
                         double sigma_multiplier, std::uint64_t seed) {
  bounds.validate();
  if (bounds.dim() != objective.dim()) throw InvalidArgument("penalty scan: bounds dimension mismatch");
  if (scan_points == 0) throw InvalidArgument("penalty scan: at least one scan point is required");
  SobolGenerator gen(static_cast<std::size_t>(objective.dim()), seed);
  const Matrix scan = map_to_bounds(gen.draw(scan_points), bounds);
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < scan.rows(); ++i) {
    const auto p = objective.predict(scan.row(i).transpose());
    best = std::max(best, p.mean + sigma_multiplier * std::sqrt(p.variance));
  }
  return best;
}

namespace {

double nei_impl(const Eigen::Ref<const Vector>& x, const FantasySet& fs, Vector* gradient) {
  if (x.size() != fs.dim()) throw InvalidArgument("nei: query dimension mismatch");
  const std::size_t num_metrics = fs.metrics.size();
  const std::size_t num_c = num_metrics - 1;
  const Eigen::Index count = static_cast<Eigen::Index>(fs.sample_count());

  std::vector<Vector> cross(num_metrics), w(num_metrics), means(num_metrics);
  std::vector<double> sd(num_metrics);
  for (std::size_t m = 0; m < num_metrics; ++m) {
    const auto& fm = fs.metrics[m];
    cross[m] = fm.base.cross_kernel(x);
    const double var = fm.base.variance_from_cross(cross[m], gradient ? &w[m] : nullptr);
    sd[m] = std::sqrt(var);
    means[m] = (fm.weights.transpose() * cross[m]).array() + fm.base.params().mean_constant;
  }

  std::vector<double> mu_c(num_c), sd_c(num_c);
  for (std::size_t j = 0; j < num_c; ++j) sd_c[j] = sd[j + 1];
  EIxPartials partials;
  std::vector<Vector> coef_mu;
  std::vector<double> coef_sd(num_metrics, 0.0);
  if (gradient) coef_mu.assign(num_metrics, Vector::Zero(count));

  double total = 0.0;
  for (Eigen::Index k = 0; k < count; ++k) {
    for (std::size_t j = 0; j < num_c; ++j) mu_c[j] = means[j + 1](k);
    total += eix_core(means[0](k), sd[0], mu_c.data(), sd_c.data(), num_c,
                      fs.incumbents[static_cast<std::size_t>(k)], fs.penalty_m,
                      gradient ? &partials : nullptr);
    if (gradient) {
      coef_mu[0](k) = partials.mu_f;
      coef_sd[0] += partials.sigma_f;
      for (std::size_t j = 0; j < num_c; ++j) {
        coef_mu[j + 1](k) = partials.mu_c[j];
        coef_sd[j + 1] += partials.sigma_c[j];
      }
    }
  }
  const double inv_n = 1.0 / static_cast<double>(count);
  if (gradient) {
    gradient->setZero(fs.dim());
    for (std::size_t m = 0; m < num_metrics; ++m) {
      const auto& fm = fs.metrics[m];
      const Matrix jac = fm.base.cross_kernel_jacobian(x);
      Vector combined = fm.weights * coef_mu[m];
      // d sd / dx = -J^T w / sd
      if (sd[m] > 0.0 && coef_sd[m] != 0.0) combined -= (coef_sd[m] / sd[m]) * w[m];
      *gradient += jac.transpose() * combined;
    }
    *gradient *= inv_n;
  }
  return total * inv_n;
}

}  // namespace

double nei(const Eigen::Ref<const Vector>& x, const FantasySet& fantasies) {
  return nei_impl(x, fantasies, nullptr);
}

double nei_with_gradient(const Eigen::Ref<const Vector>& x, const FantasySet& fantasies,
                         Vector& gradient) {
  return nei_impl(x, fantasies, &gradient);
}

Vector nei_gradient(const Eigen::Ref<const Vector>& x, const FantasySet& fantasies) {
  Vector g;
  nei_impl(x, fantasies, &g);
  return g;
}

AcquisitionOptimum optimize_acquisition(const AcquisitionFn& acquisition,
                                        const AcqOptimizerOptions& options) {
  options.bounds.validate();
  const Eigen::Index d = options.bounds.dim();
  if (options.restarts < 1) throw InvalidArgument("optimize_acquisition: restarts must be >= 1");
  if (options.scan_points < 1) throw InvalidArgument("optimize_acquisition: scan needs >= 1 point");
  if (options.avoid.rows() > 0 && options.avoid.cols() != d) {
    throw InvalidArgument("optimize_acquisition: avoid set has the wrong dimension");
  }

  SobolGenerator scan_gen(static_cast<std::size_t>(d), mix_seed(options.seed, 1));
  const Matrix scan = map_to_bounds(scan_gen.draw(options.scan_points), options.bounds);
  std::vector<double> scan_values(static_cast<std::size_t>(scan.rows()));
  Eigen::Index scan_best = -1;
  for (Eigen::Index i = 0; i < scan.rows(); ++i) {
    const double v = acquisition(scan.row(i).transpose(), nullptr);
    scan_values[static_cast<std::size_t>(i)] = v;
    if (std::isfinite(v) && (scan_best < 0 || v > scan_values[static_cast<std::size_t>(scan_best)])) {
      scan_best = i;
    }
  }

  SobolGenerator start_gen(static_cast<std::size_t>(d), mix_seed(options.seed, 2));
  Matrix starts = map_to_bounds(start_gen.draw(options.restarts), options.bounds);
  if (scan_best >= 0) starts = vstack(scan.row(scan_best), starts);

  const ObjectiveWithGradient negated = [&](const Vector& x, Vector& grad) {
    const double v = acquisition(x, &grad);
    grad = -grad;
    return -v;
  };
  BoxMinimizeOptions local;
  local.max_iterations = options.max_iterations;
  local.gradient_tolerance = options.gradient_tolerance;
  local.initial_step = 0.05 * (options.bounds.upper - options.bounds.lower).maxCoeff();

  std::vector<AcquisitionOptimum> found;
  if (scan_best >= 0) {
    found.push_back({scan.row(scan_best).transpose(), scan_values[static_cast<std::size_t>(scan_best)]});
  }
  for (Eigen::Index s = 0; s < starts.rows(); ++s) {
    const auto res = minimize_box(negated, starts.row(s).transpose(), options.bounds.lower,
                                  options.bounds.upper, local);
    if (std::isfinite(res.value)) found.push_back({res.x, -res.value});
  }
  if (found.empty()) {
    throw OptimizationFailure("optimize_acquisition: no restart produced a finite value");
  }

  auto finalize = [&](AcquisitionOptimum c) {
    if (options.project) {
      options.project(c.x);
      c.value = acquisition(c.x, nullptr);
    }
    return c;
  };
  auto is_duplicate = [&](const Vector& x) {
    for (Eigen::Index i = 0; i < options.avoid.rows(); ++i) {
      if ((options.avoid.row(i).transpose() - x).norm() < options.min_distance) return true;
    }
    return false;
  };

  for (auto& c : found) c = finalize(std::move(c));
  std::stable_sort(found.begin(), found.end(),
                   [](const AcquisitionOptimum& a, const AcquisitionOptimum& b) {
                     return a.value > b.value;
                   });
  for (const auto& c : found) {
    if (std::isfinite(c.value) && !is_duplicate(c.x)) return c;
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(scan.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return scan_values[static_cast<std::size_t>(a)] > scan_values[static_cast<std::size_t>(b)];
  });
  for (Eigen::Index i : order) {
    auto c = finalize({scan.row(i).transpose(), scan_values[static_cast<std::size_t>(i)]});
    if (std::isfinite(c.value) && !is_duplicate(c.x)) return c;
  }
  throw OptimizationFailure("optimize_acquisition: every candidate duplicates an existing point");
}

AcquisitionOptimum optimize_acquisition(const FantasySet& fantasies,
                                        const AcqOptimizerOptions& options) {
  if (options.bounds.dim() != fantasies.dim()) {
    throw InvalidArgument("optimize_acquisition: bounds do not match the fantasies");
  }
  return optimize_acquisition(
      [&fantasies](const Vector& x, Vector* grad) {
        return grad ? nei_with_gradient(x, fantasies, *grad) : nei(x, fantasies);
      },
      options);
}

std::uint64_t batch_fantasy_seed(std::uint64_t seed, std::size_t position) {
  return mix_seed(seed, 0x100000u + position);
}

std::uint64_t batch_optimizer_seed(std::uint64_t seed, std::size_t position) {
  return mix_seed(seed, 0x200000u + position);
}

std::uint64_t batch_penalty_seed(std::uint64_t seed) { return mix_seed(seed, 0x300000u); }

Matrix generate_batch(const MetricModels& models, const Matrix& pending, const BatchOptions& options) {
  models.validate();
  options.bounds.validate();
  const Eigen::Index d = models.objective.dim();
  if (options.bounds.dim() != d) throw InvalidArgument("generate_batch: bounds dimension mismatch");
  if (options.q < 1) throw InvalidArgument("generate_batch: q must be at least 1");
  if (pending.rows() > 0 && pending.cols() != d) {
    throw InvalidArgument("generate_batch: pending points have the wrong dimension");
  }

  const double penalty = penalty_from_scan(models.objective, options.bounds, options.scan_points,
                                           options.penalty_sigma, batch_penalty_seed(options.seed));
  Matrix selected(0, d);
  for (std::size_t i = 0; i < options.q; ++i) {
    const Matrix outstanding = vstack(pending, selected);
    const std::size_t dim = fantasy_dimension(models, outstanding.rows());
    const std::uint64_t fantasy_seed = batch_fantasy_seed(options.seed, i);
    FantasySet fs = [&] {
      if (options.sampling == SamplingMethod::qmc) {
        SobolGenerator source(dim, fantasy_seed);
        return prepare_fantasies(models, outstanding, options.samples, source, penalty, options.mode);
      }
      UniformRandomSource source(dim, fantasy_seed);
      return prepare_fantasies(models, outstanding, options.samples, source, penalty, options.mode);
    }();

    AcqOptimizerOptions opt;
    opt.bounds = options.bounds;
    opt.restarts = options.restarts;
    opt.scan_points = options.scan_points;
    opt.seed = batch_optimizer_seed(options.seed, i);
    opt.max_iterations = options.max_iterations;
    opt.min_distance = options.min_distance;
    opt.avoid = fs.points;
    opt.project = options.project;
    const auto best = optimize_acquisition(fs, opt);
    selected.conservativeResize(selected.rows() + 1, Eigen::NoChange);
    selected.row(selected.rows() - 1) = best.x.transpose();
  }
  return selected;
}

Matrix heuristic_ei_batch(const MetricModels& models, const Matrix& pending, BatchOptions options) {
  options.mode = FantasyMode::plug_in;
  return generate_batch(models, pending, options);
}

}  // namespace nei
