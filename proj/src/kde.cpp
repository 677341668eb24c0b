#include "qsr/kde.hpp"

#include "qsr/error.hpp"
#include "qsr/numeric.hpp"

#include <cmath>
#include <random>

namespace qsr {

namespace {

constexpr int kDim = 2;

double
sample_variance(std::span<const SpatialFeature> xs, double SpatialFeature::*field)
{
  double mean = 0.0;
  for (const auto& x : xs)
    mean += x.*field;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (const auto& x : xs) {
    const double d = x.*field - mean;
    ss += d * d;
  }
  return ss / static_cast<double>(xs.size() - 1);
}

} // namespace

Bandwidth
rule_of_thumb_bandwidth(std::span<const SpatialFeature> samples, double variance_floor)
{
  if (samples.size() < 2)
    fail(ErrorKind::insufficient_data, "bandwidth selection needs at least 2 samples");
  const double n = static_cast<double>(samples.size());
  const double scale = std::pow(4.0 / ((kDim + 2) * n), 1.0 / (kDim + 4));

  auto sigma = [&](double SpatialFeature::*field, const char* name) {
    double var = sample_variance(samples, field);
    if (var < variance_floor)
      var = variance_floor;
    if (!(var > 0.0))
      fail(ErrorKind::degenerate_data,
           std::string("zero sample variance in ") + name +
             "; set a positive variance floor to smooth constant data");
    return std::sqrt(var);
  };
  return { sigma(&SpatialFeature::distance, "distance") * scale,
           sigma(&SpatialFeature::orientation, "orientation") * scale };
}

KdeModel::KdeModel(std::vector<SpatialFeature> samples, Bandwidth bandwidth)
  : samples_(std::move(samples))
  , bandwidth_(bandwidth)
{
  require(!samples_.empty(), "KDE needs at least one sample");
  require(bandwidth_.distance > 0.0 && bandwidth_.orientation > 0.0 &&
            std::isfinite(bandwidth_.distance) && std::isfinite(bandwidth_.orientation),
          "KDE bandwidths must be positive and finite");
}

KdeModel
KdeModel::fit(std::vector<SpatialFeature> samples, double variance_floor)
{
  const Bandwidth h = rule_of_thumb_bandwidth(samples, variance_floor);
  return KdeModel(std::move(samples), h);
}

double
KdeModel::density(Vec2 x) const
{
  const double h1 = bandwidth_.distance;
  const double h2 = bandwidth_.orientation;
  double sum = 0.0;
  for (const auto& s : samples_) {
    const double u = (x.x - s.distance) / h1;
    const double v = (x.y - s.orientation) / h2;
    sum += std::exp(-0.5 * (u * u + v * v));
  }
  return sum / (2.0 * std::numbers::pi * h1 * h2 * static_cast<double>(samples_.size()));
}

std::vector<SpatialFeature>
KdeModel::sample(std::size_t count, std::uint64_t seed, SampleHygiene hygiene) const
{
  require(count >= 1, "sample count must be at least 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, samples_.size() - 1);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<SpatialFeature> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto& centre = samples_[pick(rng)];
    SpatialFeature f{ centre.distance + bandwidth_.distance * noise(rng),
                      centre.orientation + bandwidth_.orientation * noise(rng) };
    if (hygiene == SampleHygiene::apply) {
      f.distance = std::max(0.0, f.distance);
      f.orientation = wrap_degrees(f.orientation);
    }
    out.push_back(f);
  }
  return out;
}

} // namespace qsr
