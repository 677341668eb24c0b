#include "qsr/gmm.hpp"

#include "qsr/error.hpp"
#include "qsr/numeric.hpp"
#include "qsr/parallel.hpp"

#include <cmath>
#include <sstream>

namespace qsr {

namespace {

constexpr double kWeightSumTolerance = 1e-9;
constexpr double kCollapseMass = 1e-12;

Cholesky2
factor_or_throw(const Sym2& cov, const char* context)
{
  Cholesky2 l;
  if (!Cholesky2::factor(cov, l)) {
    std::ostringstream os;
    os << context << ": covariance [[" << cov.xx << ", " << cov.xy << "], [" << cov.xy << ", "
       << cov.yy << "]] is not positive definite";
    fail(ErrorKind::singular_covariance, os.str());
  }
  return l;
}

bool
finite(Vec2 v)
{
  return std::isfinite(v.x) && std::isfinite(v.y);
}

} // namespace

double
gaussian_log_pdf(Vec2 x, Vec2 mean, const Sym2& cov)
{
  const Cholesky2 l = factor_or_throw(cov, "gaussian_pdf");
  return -kLogTwoPi - 0.5 * l.log_det() - 0.5 * l.mahalanobis_sq(x - mean);
}

double
gaussian_pdf(Vec2 x, Vec2 mean, const Sym2& cov)
{
  return std::exp(gaussian_log_pdf(x, mean, cov));
}

Sym2
regularize_covariance(const Sym2& cov, CovarianceMode mode, double variance_floor)
{
  if (mode == CovarianceMode::diagonal)
    return Sym2::diagonal(std::max(cov.xx, variance_floor), std::max(cov.yy, variance_floor));
  return clip_eigenvalues(cov, variance_floor);
}

GmmModel::GmmModel(std::vector<GaussianComponent> components,
                   CovarianceMode mode,
                   std::string relation_label)
  : components_(std::move(components))
  , mode_(mode)
  , label_(std::move(relation_label))
{
  if (components_.empty())
    fail(ErrorKind::invalid_model, "mixture has no components");
  double total = 0.0;
  factors_.reserve(components_.size());
  log_norms_.reserve(components_.size());
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const auto& c = components_[i];
    const std::string where = "component " + std::to_string(i);
    if (!std::isfinite(c.weight) || c.weight < 0.0)
      fail(ErrorKind::invalid_model, where + ": weight must be finite and >= 0");
    if (!finite(c.mean))
      fail(ErrorKind::invalid_model, where + ": mean is not finite");
    if (mode_ == CovarianceMode::diagonal && c.cov.xy != 0.0)
      fail(ErrorKind::invalid_model, where + ": off-diagonal covariance in diagonal mode");
    Cholesky2 l;
    if (!Cholesky2::factor(c.cov, l))
      fail(ErrorKind::invalid_model, where + ": covariance is not positive definite");
    factors_.push_back(l);
    log_norms_.push_back(std::log(c.weight) - kLogTwoPi - 0.5 * l.log_det());
    total += c.weight;
  }
  if (std::abs(total - 1.0) > kWeightSumTolerance)
    fail(ErrorKind::invalid_model, "mixture weights sum to " + std::to_string(total));
}

GmmModel
GmmModel::with_label(std::string label) const
{
  GmmModel copy = *this;
  copy.label_ = std::move(label);
  return copy;
}

double
GmmModel::component_log_density(std::size_t i, Vec2 x) const
{
  return log_norms_[i] - 0.5 * factors_[i].mahalanobis_sq(x - components_[i].mean);
}

double
GmmModel::log_pdf(Vec2 x) const
{
  double hi = kNegInf;
  // small fixed-size buffer avoids allocation for typical mixtures
  double stack[32];
  std::vector<double> heap;
  double* terms = stack;
  if (components_.size() > 32) {
    heap.resize(components_.size());
    terms = heap.data();
  }
  for (std::size_t i = 0; i < components_.size(); ++i) {
    terms[i] = component_log_density(i, x);
    hi = std::max(hi, terms[i]);
  }
  if (hi == kNegInf)
    return kNegInf;
  double sum = 0.0;
  for (std::size_t i = 0; i < components_.size(); ++i)
    sum += std::exp(terms[i] - hi);
  return hi + std::log(sum);
}

double
GmmModel::pdf(Vec2 x) const
{
  return std::exp(log_pdf(x));
}

Vec2
GmmModel::transform_standard_normal(std::size_t i, Vec2 z) const
{
  return components_[i].mean + factors_[i].apply(z);
}

double
gmm_pdf(const GmmModel& model, Vec2 x)
{
  return model.pdf(x);
}

double
log_likelihood(const GmmModel& model, std::span<const Vec2> data)
{
  require(!data.empty(), "log-likelihood of an empty data set");
  double total = 0.0;
  for (std::size_t j = 0; j < data.size(); ++j) {
    const double lp = model.log_pdf(data[j]);
    if (lp == kNegInf)
      fail(ErrorKind::infinite_log_likelihood,
           "density is zero at data point " + std::to_string(j));
    total += lp;
  }
  return total;
}

void
EmConfig::validate() const
{
  require(max_iterations >= 1, "EM max_iterations must be >= 1");
  require(ll_tolerance > 0.0, "EM ll_tolerance must be > 0");
  require(variance_floor > 0.0, "EM variance_floor must be > 0");
}

namespace {

// Responsibilities for all points (row-major n x M) and the total
// log-likelihood of `model`.
double
expectation(const GmmModel& model, std::span<const Vec2> data, std::vector<double>& resp)
{
  const std::size_t m = model.size();
  const std::size_t n = data.size();
  resp.resize(n * m);
  std::vector<double> point_ll(n);
  parallel_for(n, [&](std::size_t j) {
    double* row = resp.data() + j * m;
    double hi = kNegInf;
    for (std::size_t i = 0; i < m; ++i) {
      row[i] = model.component_log_density(i, data[j]);
      hi = std::max(hi, row[i]);
    }
    if (hi == kNegInf) {
      point_ll[j] = kNegInf;
      return;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      row[i] = std::exp(row[i] - hi);
      sum += row[i];
    }
    for (std::size_t i = 0; i < m; ++i)
      row[i] /= sum;
    point_ll[j] = hi + std::log(sum);
  });

  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (point_ll[j] == kNegInf)
      fail(ErrorKind::infinite_log_likelihood,
           "density is zero at data point " + std::to_string(j));
    total += point_ll[j];
  }
  return total;
}

GmmModel
maximization(const GmmModel& model,
             std::span<const Vec2> data,
             const std::vector<double>& resp,
             const EmConfig& cfg)
{
  const std::size_t m = model.size();
  const std::size_t n = data.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<GaussianComponent> next(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mass = 0.0;
    Vec2 weighted{};
    for (std::size_t j = 0; j < n; ++j) {
      const double r = resp[j * m + i];
      mass += r;
      weighted = weighted + r * data[j];
    }
    if (mass < kCollapseMass)
      fail(ErrorKind::collapsed_component,
           "component " + std::to_string(i) + " lost all responsibility mass");

    const Vec2 mean = (1.0 / mass) * weighted;
    Sym2 scatter{};
    for (std::size_t j = 0; j < n; ++j)
      scatter = scatter + resp[j * m + i] * Sym2::outer(data[j] - mean);

    next[i].weight = mass * inv_n;
    next[i].mean = mean;
    next[i].cov = regularize_covariance((1.0 / mass) * scatter, model.mode(), cfg.variance_floor);
  }
  return GmmModel(std::move(next), model.mode(), model.relation_label());
}

} // namespace

EmResult
em_fit(const GmmModel& model, std::span<const Vec2> data, const EmConfig& cfg)
{
  cfg.validate();
  require(!data.empty(), "EM on an empty data set");
  if (data.size() < model.size())
    fail(ErrorKind::insufficient_data,
         "EM needs at least as many points (" + std::to_string(data.size()) +
           ") as components (" + std::to_string(model.size()) + ")");

  std::vector<double> resp;
  double ll = expectation(model, data, resp);
  EmResult result{ model, { ll } };
  for (int it = 0; it < cfg.max_iterations; ++it) {
    result.model = maximization(result.model, data, resp, cfg);
    const double next = expectation(result.model, data, resp);
    result.ll_trace.push_back(next);
    const bool converged = next - ll <= cfg.ll_tolerance * std::max(std::abs(ll), 1.0);
    ll = next;
    if (converged)
      break;
  }
  return result;
}

std::vector<Vec2>
to_points(std::span<const SpatialFeature> features)
{
  std::vector<Vec2> out;
  out.reserve(features.size());
  for (const auto& f : features)
    out.push_back(f.as_vec());
  return out;
}

} // namespace qsr
