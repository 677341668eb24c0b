#include "qsr/greedy.hpp"

#include "qsr/error.hpp"
#include "qsr/numeric.hpp"
#include "qsr/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

namespace qsr {

namespace {

constexpr double kCollapseMass = 1e-12;
constexpr double kParentCovScale = 0.5;
constexpr double kInitialWeightNumerator = 0.5;

struct Seed
{
  Vec2 mean;
  Sym2 cov;
};

double
log_sum_exp2(double a, double b)
{
  const double hi = std::max(a, b);
  if (hi == kNegInf)
    return kNegInf;
  return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

// Partial EM over (w*, mean*, cov*) with the current mixture p^M held fixed.
// base_log_density[j] = ln p^M(x_j).
std::optional<Candidate>
refine_candidate(const Seed& seed,
                 double initial_weight,
                 std::span<const Vec2> data,
                 std::span<const double> base_log_density,
                 const GreedyConfig& cfg)
{
  const std::size_t n = data.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> resp(n);

  GaussianComponent cand{ initial_weight, seed.mean, seed.cov };
  Cholesky2 factor;
  double log_norm = 0.0;
  auto refactor = [&] {
    if (!Cholesky2::factor(cand.cov, factor))
      fail(ErrorKind::singular_covariance, "candidate covariance is not positive definite");
    log_norm = std::log(cand.weight) - kLogTwoPi - 0.5 * factor.log_det();
  };
  auto blended_terms = [&](std::size_t j, double& ours, double& theirs) {
    ours = log_norm - 0.5 * factor.mahalanobis_sq(data[j] - cand.mean);
    theirs = std::log1p(-cand.weight) + base_log_density[j];
  };

  refactor();
  for (int it = 0; it < cfg.partial_em_iterations; ++it) {
    double mass = 0.0;
    Vec2 weighted{};
    for (std::size_t j = 0; j < n; ++j) {
      double ours, theirs;
      blended_terms(j, ours, theirs);
      const double total = log_sum_exp2(ours, theirs);
      resp[j] = total == kNegInf ? 0.0 : std::exp(ours - total);
      mass += resp[j];
      weighted = weighted + resp[j] * data[j];
    }
    if (mass < kCollapseMass)
      return std::nullopt;
    const Vec2 mean = (1.0 / mass) * weighted;
    Sym2 scatter{};
    for (std::size_t j = 0; j < n; ++j)
      scatter = scatter + resp[j] * Sym2::outer(data[j] - mean);
    cand.weight = mass * inv_n;
    cand.mean = mean;
    cand.cov =
      regularize_covariance((1.0 / mass) * scatter, cfg.covariance_mode, cfg.em.variance_floor);
    // the candidate would absorb the whole mixture
    if (cand.weight >= 1.0 - 1e-9)
      return std::nullopt;
    refactor();
  }

  double ll = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double ours, theirs;
    blended_terms(j, ours, theirs);
    ll += log_sum_exp2(ours, theirs);
  }
  return Candidate{ cand, cand.weight, ll };
}

} // namespace

void
GreedyConfig::validate() const
{
  require(max_components >= 1, "max_components must be >= 1");
  require(candidates_per_component >= 1, "candidates_per_component must be >= 1");
  require(partial_em_iterations >= 1, "partial_em_iterations must be >= 1");
  em.validate();
}

GmmModel
fit_one_component(std::span<const Vec2> data,
                  CovarianceMode mode,
                  double variance_floor,
                  std::string relation_label)
{
  if (data.size() < 2)
    fail(ErrorKind::insufficient_data,
         "a one-component fit needs at least 2 points, got " + std::to_string(data.size()));
  require(variance_floor > 0.0, "variance floor must be > 0");
  const double inv_n = 1.0 / static_cast<double>(data.size());
  Vec2 sum{};
  for (const auto& x : data)
    sum = sum + x;
  const Vec2 mean = inv_n * sum;
  Sym2 scatter{};
  for (const auto& x : data)
    scatter = scatter + Sym2::outer(x - mean);
  GaussianComponent c{ 1.0, mean, regularize_covariance(inv_n * scatter, mode, variance_floor) };
  return GmmModel({ c }, mode, std::move(relation_label));
}

std::vector<Candidate>
propose_candidates(const GmmModel& model, std::span<const Vec2> data, const GreedyConfig& cfg)
{
  cfg.validate();
  require(!data.empty(), "candidate search on an empty data set");
  const std::size_t m = model.size();
  const std::size_t n = data.size();
  const auto per_parent = static_cast<std::size_t>(cfg.candidates_per_component);

  // ln p^M(x_j) and the soft assignment of every point to every component
  std::vector<double> base(n);
  std::vector<double> resp(n * m);
  for (std::size_t j = 0; j < n; ++j) {
    double* row = resp.data() + j * m;
    for (std::size_t i = 0; i < m; ++i)
      row[i] = model.component_log_density(i, data[j]);
    base[j] = log_sum_exp({ row, m });
    for (std::size_t i = 0; i < m; ++i)
      row[i] = base[j] == kNegInf ? 0.0 : std::exp(row[i] - base[j]);
  }

  // Draw all seeds serially so refinement order cannot affect them.
  std::vector<std::optional<Seed>> seeds(m * per_parent);
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < m; ++i) {
    double mass = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      weights[j] = resp[j * m + i];
      mass += weights[j];
    }
    if (mass < kCollapseMass)
      continue;
    std::mt19937_64 rng(derive_seed(derive_seed(cfg.seed, m), i));
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    const Sym2 parent_cov = model.components()[i].cov;
    for (std::size_t k = 0; k < per_parent; ++k) {
      const std::size_t a = pick(rng);
      const std::size_t b = pick(rng);
      const std::size_t at = base[b] < base[a] ? b : a;
      seeds[i * per_parent + k] =
        Seed{ data[at],
              regularize_covariance(
                kParentCovScale * parent_cov, cfg.covariance_mode, cfg.em.variance_floor) };
    }
  }

  const double initial_weight = kInitialWeightNumerator / static_cast<double>(m + 1);
  std::vector<std::optional<Candidate>> refined(seeds.size());
  parallel_for(
    seeds.size(),
    [&](std::size_t c) {
      if (seeds[c])
        refined[c] = refine_candidate(*seeds[c], initial_weight, data, base, cfg);
    },
    1);

  std::vector<Candidate> out;
  out.reserve(refined.size());
  for (auto& c : refined)
    if (c)
      out.push_back(*c);
  return out;
}

GmmModel
insert_component(const GmmModel& model, const Candidate& candidate)
{
  const double w = candidate.mixing_weight;
  require(w > 0.0 && w < 1.0, "mixing weight must lie in (0, 1)");
  std::vector<GaussianComponent> next = model.components();
  for (auto& c : next)
    c.weight *= 1.0 - w;
  GaussianComponent added = candidate.component;
  added.weight = w;
  next.push_back(added);
  return GmmModel(std::move(next), model.mode(), model.relation_label());
}

GreedyResult
fit_greedy(std::span<const Vec2> data, const GreedyConfig& cfg, std::string relation_label)
{
  cfg.validate();
  GmmModel model =
    fit_one_component(data, cfg.covariance_mode, cfg.em.variance_floor, std::move(relation_label));
  double ll = log_likelihood(model, data);
  GreedyTrace trace;
  trace.steps.push_back({ 1, ll, true });

  while (model.size() < static_cast<std::size_t>(cfg.max_components) && data.size() > model.size()) {
    const auto candidates = propose_candidates(model, data, cfg);
    if (candidates.empty())
      break;
    std::size_t best = 0;
    for (std::size_t c = 1; c < candidates.size(); ++c)
      if (candidates[c].blended_log_likelihood > candidates[best].blended_log_likelihood)
        best = c;

    EmResult fitted = em_fit(insert_component(model, candidates[best]), data, cfg.em);
    const double next_ll = fitted.ll_trace.back();
    // gains below the EM convergence threshold are rounding noise
    if (!(next_ll - ll > cfg.em.ll_tolerance * std::max(std::abs(ll), 1.0))) {
      trace.steps.push_back({ fitted.model.size(), next_ll, false });
      break;
    }
    model = std::move(fitted.model);
    ll = next_ll;
    trace.steps.push_back({ model.size(), ll, true });
  }
  return { std::move(model), std::move(trace) };
}

} // namespace qsr
