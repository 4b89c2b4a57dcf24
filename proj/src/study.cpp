#include "noisyei/study.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "noisyei/errors.hpp"
#include "noisyei/normal.hpp"

namespace nei {
namespace {

constexpr double kMatchTolerance = 1e-9;  // fraction of each dimension's range

bool same_point(const SearchSpace& space, const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < space.dim(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double range = space.dims[i].upper - space.dims[i].lower;
    if (std::abs(a(k) - b(k)) > kMatchTolerance * range) return false;
  }
  return true;
}

void check_measurement(const Measurement& m, const std::string& what) {
  if (!std::isfinite(m.mean)) throw InvalidArgument(what + " mean must be finite");
  if (!std::isfinite(m.sd) || m.sd < 0.0) {
    throw InvalidArgument(what + " sd must be finite and non-negative");
  }
}

void check_trial(const StudyState& state, const TrialRecord& t) {
  if (static_cast<std::size_t>(t.x.size()) != state.space.dim()) {
    std::ostringstream msg;
    msg << "trial has " << t.x.size() << " coordinates, the space has " << state.space.dim();
    throw InvalidArgument(msg.str());
  }
  if (!state.space.contains(t.x)) throw InvalidArgument("trial point lies outside the search space");
  if (t.objective) check_measurement(*t.objective, "objective");
  if (t.status == TrialStatus::completed) {
    if (!t.objective) throw InvalidArgument("completed trial lacks an objective measurement");
    if (t.constraints.size() != state.num_constraints) {
      std::ostringstream msg;
      msg << "completed trial has " << t.constraints.size() << " constraint measurements, expected "
          << state.num_constraints;
      throw InvalidArgument(msg.str());
    }
  }
  for (std::size_t j = 0; j < t.constraints.size(); ++j) {
    check_measurement(t.constraints[j], "constraint " + std::to_string(j + 1));
  }
}

bool tags_compatible(const std::string& a, const std::string& b) {
  return a.empty() || b.empty() || a == b;
}

std::vector<std::size_t> completed_indices(const StudyState& state) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < state.trials.size(); ++i) {
    if (state.trials[i].status == TrialStatus::completed) out.push_back(i);
  }
  return out;
}

double objective_sign(const StudyState& state) { return state.config.maximize ? -1.0 : 1.0; }

}  // namespace

void SearchSpace::validate() const {
  if (dims.empty()) throw InvalidArgument("search space needs at least one dimension");
  std::set<std::string> names;
  for (const auto& d : dims) {
    if (d.name.empty()) throw InvalidArgument("dimension names must be non-empty");
    if (!names.insert(d.name).second) throw InvalidArgument("duplicate dimension name '" + d.name + "'");
    if (!std::isfinite(d.lower) || !std::isfinite(d.upper) || !(d.lower < d.upper)) {
      throw InvalidArgument("dimension '" + d.name + "' needs finite bounds with lower < upper");
    }
    if (d.integer && std::ceil(d.lower) > std::floor(d.upper)) {
      throw InvalidArgument("integer dimension '" + d.name + "' contains no integer");
    }
  }
}

Bounds SearchSpace::bounds() const {
  Bounds b{Vector(dims.size()), Vector(dims.size())};
  for (std::size_t i = 0; i < dims.size(); ++i) {
    b.lower(static_cast<Eigen::Index>(i)) = dims[i].lower;
    b.upper(static_cast<Eigen::Index>(i)) = dims[i].upper;
  }
  return b;
}

Vector SearchSpace::to_unit(const Eigen::Ref<const Vector>& x) const {
  Vector u(x.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    u(k) = (x(k) - dims[i].lower) / (dims[i].upper - dims[i].lower);
  }
  return u;
}

Vector SearchSpace::from_unit(const Eigen::Ref<const Vector>& u) const {
  Vector x(u.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    x(k) = dims[i].lower + u(k) * (dims[i].upper - dims[i].lower);
  }
  return x;
}

void SearchSpace::round(Eigen::Ref<Vector> x) const {
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const auto& d = dims[i];
    double v = std::clamp(x(k), d.lower, d.upper);
    if (d.integer) v = std::clamp(std::round(v), std::ceil(d.lower), std::floor(d.upper));
    x(k) = v;
  }
}

bool SearchSpace::contains(const Eigen::Ref<const Vector>& x) const {
  if (static_cast<std::size_t>(x.size()) != dims.size()) return false;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const double v = x(static_cast<Eigen::Index>(i));
    if (!std::isfinite(v) || v < dims[i].lower || v > dims[i].upper) return false;
  }
  return true;
}

bool SearchSpace::has_integer_dims() const {
  return std::any_of(dims.begin(), dims.end(), [](const Dimension& d) { return d.integer; });
}

std::size_t StudyState::count(TrialStatus status) const {
  return static_cast<std::size_t>(std::count_if(
      trials.begin(), trials.end(), [status](const TrialRecord& t) { return t.status == status; }));
}

std::size_t StudyState::initialization_size() const {
  if (config.init_size > 0) return config.init_size;
  return std::min<std::size_t>(2 * space.dim() + 2, 30);
}

bool operator==(const Dimension& a, const Dimension& b) {
  return a.name == b.name && a.lower == b.lower && a.upper == b.upper && a.integer == b.integer;
}

bool operator==(const Measurement& a, const Measurement& b) { return a.mean == b.mean && a.sd == b.sd; }

bool operator==(const TrialRecord& a, const TrialRecord& b) {
  return a.x.size() == b.x.size() && a.x == b.x && a.objective == b.objective &&
         a.constraints == b.constraints && a.status == b.status && a.tag == b.tag;
}

bool operator==(const StudyConfig& a, const StudyConfig& b) {
  return a.qmc_samples == b.qmc_samples && a.restarts == b.restarts && a.seed == b.seed &&
         a.scan_points == b.scan_points && a.penalty_sigma == b.penalty_sigma &&
         a.init_size == b.init_size && a.maximize == b.maximize;
}

bool operator==(const StudyState& a, const StudyState& b) {
  return a.space.dims == b.space.dims && a.num_constraints == b.num_constraints &&
         a.trials == b.trials && a.config == b.config && a.schema_version == b.schema_version;
}

StudyState create_study(SearchSpace space, std::size_t num_constraints, StudyConfig config) {
  space.validate();
  if (config.qmc_samples < 1) throw InvalidArgument("qmc_samples must be at least 1");
  if (config.restarts < 1) throw InvalidArgument("restarts must be at least 1");
  if (config.scan_points < 1) throw InvalidArgument("scan_points must be at least 1");
  if (!std::isfinite(config.penalty_sigma)) throw InvalidArgument("penalty_sigma must be finite");
  StudyState state;
  state.space = std::move(space);
  state.num_constraints = num_constraints;
  state.config = config;
  return state;
}

StudyState tell(StudyState state, const std::vector<TrialRecord>& trials) {
  for (const auto& t : trials) check_trial(state, t);
  for (const auto& incoming : trials) {
    bool handled = false;
    for (auto& existing : state.trials) {
      if (!same_point(state.space, existing.x, incoming.x)) continue;
      const bool repeat = tags_compatible(existing.tag, incoming.tag) &&
                          ((existing.status == incoming.status && existing.objective == incoming.objective &&
                            existing.constraints == incoming.constraints) ||
                           (existing.status == TrialStatus::completed &&
                            incoming.status == TrialStatus::pending));
      if (repeat) {
        handled = true;  // repeat of something already recorded
        break;
      }
      if (existing.status == TrialStatus::pending && tags_compatible(existing.tag, incoming.tag)) {
        const std::string tag = incoming.tag.empty() ? existing.tag : incoming.tag;
        if (incoming.status == TrialStatus::completed) {
          existing = incoming;
          existing.tag = tag;
        }
        handled = true;
        break;
      }
    }
    if (!handled) state.trials.push_back(incoming);
  }
  return state;
}

MetricModels fit_models(const StudyState& state) {
  const auto done = completed_indices(state);
  const auto n = static_cast<Eigen::Index>(done.size());
  const auto d = static_cast<Eigen::Index>(state.space.dim());
  if (n < 2) throw InsufficientData("at least two completed trials are needed to fit a model");

  Matrix points(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    points.row(i) = state.space.to_unit(state.trials[done[static_cast<std::size_t>(i)]].x).transpose();
  }
  const Bounds unit = Bounds::unit_cube(d);
  const std::uint64_t base_seed = mix_seed(state.config.seed, 0x5eed0000u + state.trials.size());

  auto fit_metric = [&](std::size_t metric) {
    NoisyDataset data{points, Vector(n), Vector(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& t = state.trials[done[static_cast<std::size_t>(i)]];
      const Measurement& m = metric == 0 ? *t.objective : t.constraints[metric - 1];
      data.means(i) = metric == 0 ? objective_sign(state) * m.mean : m.mean;
      data.noise_sds(i) = m.sd;
    }
    FitOptions fit;
    fit.seed = mix_seed(base_seed, metric);
    KernelParams params = fit_map(data, unit, fit);
    return GPModel(std::move(params), std::move(data));
  };

  MetricModels models{fit_metric(0), {}};
  for (std::size_t j = 0; j < state.num_constraints; ++j) models.constraints.push_back(fit_metric(j + 1));
  return models;
}

Suggestion suggest(StudyState state, std::size_t q) {
  if (q < 1) throw InvalidArgument("suggest: q must be at least 1");
  const std::size_t d = state.space.dim();
  const std::size_t completed = state.count(TrialStatus::completed);
  std::vector<Vector> candidates;

  if (completed < std::max<std::size_t>(state.initialization_size(), 2)) {
    SobolGenerator sobol(d, mix_seed(state.config.seed, 0x50b0u), state.trials.size());
    const Matrix u = sobol.draw(q);
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      Vector x = state.space.from_unit(u.row(i).transpose());
      state.space.round(x);
      candidates.push_back(std::move(x));
    }
  } else {
    const MetricModels models = fit_models(state);
    std::vector<Vector> pending_rows;
    for (const auto& t : state.trials) {
      if (t.status == TrialStatus::pending) pending_rows.push_back(state.space.to_unit(t.x));
    }
    Matrix pending(static_cast<Eigen::Index>(pending_rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < pending_rows.size(); ++i) {
      pending.row(static_cast<Eigen::Index>(i)) = pending_rows[i].transpose();
    }

    BatchOptions opts;
    opts.bounds = Bounds::unit_cube(static_cast<Eigen::Index>(d));
    opts.q = q;
    opts.restarts = state.config.restarts;
    opts.samples = state.config.qmc_samples;
    opts.scan_points = state.config.scan_points;
    opts.penalty_sigma = state.config.penalty_sigma;
    opts.seed = mix_seed(state.config.seed, 0xba7c0000u + state.trials.size());
    if (state.space.has_integer_dims()) {
      const SearchSpace& space = state.space;
      opts.project = [&space](Eigen::Ref<Vector> u) {
        Vector x = space.from_unit(u);
        space.round(x);
        u = space.to_unit(x);
      };
    }
    const Matrix batch = generate_batch(models, pending, opts);
    for (Eigen::Index i = 0; i < batch.rows(); ++i) {
      Vector x = state.space.from_unit(batch.row(i).transpose());
      state.space.round(x);
      candidates.push_back(std::move(x));
    }
  }

  for (const auto& x : candidates) {
    TrialRecord t;
    t.x = x;
    t.status = TrialStatus::pending;
    state.trials.push_back(std::move(t));
  }
  return Suggestion{std::move(state), std::move(candidates)};
}

double feasibility_product(const std::vector<ConstraintMoment>& constraints) {
  double p = 1.0;
  for (const auto& c : constraints) p *= normal_cdf(-c.mean / std::max(c.sd, kMinConstraintSd));
  return p;
}

IdentifiedTrial identify_expected_reduction(const std::vector<TrialSummary>& summaries, double baseline) {
  if (summaries.empty()) throw InsufficientData("identification needs at least one completed trial");
  if (!std::isfinite(baseline)) throw InvalidArgument("identification baseline must be finite");
  std::optional<IdentifiedTrial> best;
  for (const auto& s : summaries) {
    IdentifiedTrial cand;
    cand.trial = s.trial;
    cand.feasibility = feasibility_product(s.constraints);
    cand.score = (baseline - s.mu_f) * cand.feasibility;
    cand.mu_f = s.mu_f;
    if (!best || cand.score > best->score ||
        (cand.score == best->score && cand.feasibility > best->feasibility)) {
      best = cand;
    }
  }
  return *best;
}

double default_baseline(const std::vector<TrialSummary>& summaries) {
  if (summaries.empty()) throw InsufficientData("identification needs at least one completed trial");
  double b = summaries.front().mu_f;
  for (const auto& s : summaries) b = std::max(b, s.mu_f);
  return b;
}

std::optional<IdentifiedTrial> identify_confident_feasible(const std::vector<TrialSummary>& summaries,
                                                           double delta) {
  if (summaries.empty()) throw InsufficientData("identification needs at least one completed trial");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  std::optional<IdentifiedTrial> best;
  for (const auto& s : summaries) {
    bool confident = true;
    for (const auto& c : s.constraints) {
      confident = confident && normal_cdf(-c.mean / std::max(c.sd, kMinConstraintSd)) >= 1.0 - delta;
    }
    if (!confident) continue;
    if (!best || s.mu_f < best->mu_f) {
      best = IdentifiedTrial{s.trial, s.mu_f, feasibility_product(s.constraints), s.mu_f};
    }
  }
  return best;
}

std::vector<TrialSummary> summarize_completed(const StudyState& state) {
  const auto done = completed_indices(state);
  std::vector<TrialSummary> out;
  if (done.size() < 2) {
    for (std::size_t i : done) {
      const auto& t = state.trials[i];
      TrialSummary s{i, objective_sign(state) * t.objective->mean, t.objective->sd, {}};
      for (const auto& c : t.constraints) s.constraints.push_back({c.mean, c.sd});
      out.push_back(std::move(s));
    }
    return out;
  }
  return summarize_completed(state, fit_models(state));
}

std::vector<TrialSummary> summarize_completed(const StudyState& state, const MetricModels& models) {
  std::vector<TrialSummary> out;
  for (std::size_t i : completed_indices(state)) {
    const Vector u = state.space.to_unit(state.trials[i].x);
    const auto pf = models.objective.predict(u);
    TrialSummary s{i, pf.mean, std::sqrt(pf.variance), {}};
    for (const auto& m : models.constraints) {
      const auto pc = m.predict(u);
      s.constraints.push_back({pc.mean, std::sqrt(pc.variance)});
    }
    out.push_back(std::move(s));
  }
  return out;
}

IdentifiedTrial identify_best_expected_reduction(const StudyState& state, std::optional<double> baseline) {
  const auto summaries = summarize_completed(state);
  if (summaries.empty()) throw InsufficientData("identification needs at least one completed trial");
  return identify_expected_reduction(summaries, baseline.value_or(default_baseline(summaries)));
}

std::optional<IdentifiedTrial> identify_best_confident_feasible(const StudyState& state, double delta) {
  return identify_confident_feasible(summarize_completed(state), delta);
}

}  // namespace nei
