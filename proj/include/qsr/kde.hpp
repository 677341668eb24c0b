#pragma once

#include "qsr/geo.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace qsr {

//! Per-dimension kernel standard deviations; the kernel covariance is
//! diag(distance^2, orientation^2).
struct Bandwidth
{
  double distance = 1.0;    ///< km
  double orientation = 1.0; ///< degrees
};

//! Diagonal rule-of-thumb bandwidth for d = 2:
//! h_b = sigma_b * (4 / ((d + 2) n))^(1 / (d + 4)), sigma_b the sample
//! standard deviation with n - 1 denominator.
//!
//! A dimension with variance below `variance_floor` uses the floor instead;
//! with the default floor of zero, a constant dimension throws
//! degenerate_data.
Bandwidth rule_of_thumb_bandwidth(std::span<const SpatialFeature> samples,
                                  double variance_floor = 0.0);

enum class SampleHygiene
{
  apply, ///< clamp distance at 0 and wrap orientation into [0, 360)
  none   ///< raw mixture draws, may leave the feature domain
};

//! Gaussian kernel density estimate over spatial features. Immutable once
//! built.
class KdeModel
{
public:
  KdeModel(std::vector<SpatialFeature> samples, Bandwidth bandwidth);

  //! Builds the model with rule_of_thumb_bandwidth.
  static KdeModel fit(std::vector<SpatialFeature> samples, double variance_floor = 0.0);

  const std::vector<SpatialFeature>& samples() const { return samples_; }
  const Bandwidth& bandwidth() const { return bandwidth_; }

  //! (1/n) sum_i N(x; X_i, diag(h1^2, h2^2)).
  double density(Vec2 x) const;
  double density(const SpatialFeature& x) const { return density(x.as_vec()); }

  //! Draws `count` features: a uniformly chosen sample plus kernel noise.
  //! Deterministic for a fixed seed.
  std::vector<SpatialFeature> sample(std::size_t count,
                                     std::uint64_t seed,
                                     SampleHygiene hygiene = SampleHygiene::apply) const;

private:
  std::vector<SpatialFeature> samples_;
  Bandwidth bandwidth_;
};

} // namespace qsr
