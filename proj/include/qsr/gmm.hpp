#pragma once

#include "qsr/geo.hpp"
#include "qsr/linalg.hpp"

#include <span>
#include <string>
#include <vector>

namespace qsr {

enum class CovarianceMode
{
  diagonal, ///< distance and orientation uncorrelated
  full      ///< correlated
};

struct GaussianComponent
{
  double weight = 1.0;
  Vec2 mean;
  Sym2 cov = Sym2::identity();

  friend bool operator==(const GaussianComponent&, const GaussianComponent&) = default;
};

//! Natural-log density of N(mean, cov) at x. Throws singular_covariance when
//! cov is not positive definite.
double gaussian_log_pdf(Vec2 x, Vec2 mean, const Sym2& cov);
double gaussian_pdf(Vec2 x, Vec2 mean, const Sym2& cov);

//! Applies the covariance-mode constraint and the variance floor: diagonal
//! mode zeroes the off-diagonal and floors the diagonal; full mode clips the
//! eigenvalues at the floor.
Sym2 regularize_covariance(const Sym2& cov, CovarianceMode mode, double variance_floor);

//! A bivariate Gaussian mixture: the quantified form of one spatial relation.
//!
//! Construction validates the invariants (non-empty, weights >= 0 summing
//! to 1 within 1e-9, positive definite covariances, zero off-diagonals in
//! diagonal mode) and throws invalid_model otherwise. Instances are
//! immutable.
class GmmModel
{
public:
  GmmModel(std::vector<GaussianComponent> components,
           CovarianceMode mode,
           std::string relation_label = {});

  const std::vector<GaussianComponent>& components() const { return components_; }
  std::size_t size() const { return components_.size(); }
  CovarianceMode mode() const { return mode_; }
  const std::string& relation_label() const { return label_; }

  GmmModel with_label(std::string label) const;

  //! ln(w_i) + ln g(x; mu_i, Sigma_i); -inf for a zero-weight component.
  double component_log_density(std::size_t i, Vec2 x) const;
  double log_pdf(Vec2 x) const;
  double pdf(Vec2 x) const;

  //! Draws from component i: mean + L z with L the Cholesky factor.
  Vec2 transform_standard_normal(std::size_t i, Vec2 z) const;

  friend bool operator==(const GmmModel& a, const GmmModel& b)
  {
    return a.mode_ == b.mode_ && a.label_ == b.label_ && a.components_ == b.components_;
  }

private:
  std::vector<GaussianComponent> components_;
  CovarianceMode mode_;
  std::string label_;
  std::vector<Cholesky2> factors_;
  std::vector<double> log_norms_; // ln w_i - ln(2 pi) - ln det(Sigma_i) / 2
};

double gmm_pdf(const GmmModel& model, Vec2 x);
inline double
gmm_pdf(const GmmModel& model, const SpatialFeature& x)
{
  return gmm_pdf(model, x.as_vec());
}

//! sum_j ln p(X_j | model). Throws infinite_log_likelihood naming the first
//! point whose density is exactly zero.
double log_likelihood(const GmmModel& model, std::span<const Vec2> data);

struct EmConfig
{
  int max_iterations = 500;
  //! Stop once ln-likelihood improvement <= ll_tolerance * max(|L|, 1).
  double ll_tolerance = 1e-6;
  double variance_floor = 1e-6;

  void validate() const;
};

struct EmResult
{
  GmmModel model;
  //! ll_trace[0] is the input model's log-likelihood, then one entry per
  //! EM iteration. The last entry belongs to `model`.
  std::vector<double> ll_trace;
};

//! Standard EM over all weights, means and covariances. Throws
//! collapsed_component when a component's responsibility mass drops below
//! 1e-12.
EmResult em_fit(const GmmModel& model, std::span<const Vec2> data, const EmConfig& cfg);

std::vector<Vec2> to_points(std::span<const SpatialFeature> features);

} // namespace qsr
