#include "qsr/divergence.hpp"

#include "qsr/error.hpp"
#include "qsr/numeric.hpp"
#include "qsr/parallel.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <random>

namespace qsr {

namespace {

constexpr std::size_t kBlock = 4096;

struct Moments
{
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;
  bool infinite = false;

  void add(double v)
  {
    ++count;
    const double delta = v - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (v - mean);
  }

  // pairwise combination of two running moment sets
  void merge(const Moments& o)
  {
    infinite = infinite || o.infinite;
    if (o.count == 0)
      return;
    if (count == 0) {
      const bool inf = infinite;
      *this = o;
      infinite = inf;
      return;
    }
    const double total = static_cast<double>(count + o.count);
    const double delta = o.mean - mean;
    mean += delta * static_cast<double>(o.count) / total;
    m2 += o.m2 + delta * delta * static_cast<double>(count) * static_cast<double>(o.count) / total;
    count += o.count;
  }
};

class MixtureSampler
{
public:
  explicit MixtureSampler(const GmmModel& model)
    : model_(model)
  {
    std::vector<double> w;
    for (const auto& c : model.components())
      w.push_back(c.weight);
    pick_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }

  Vec2 operator()(std::mt19937_64& rng)
  {
    const std::size_t i = pick_(rng);
    const double z1 = normal_(rng);
    const double z2 = normal_(rng);
    return model_.transform_standard_normal(i, { z1, z2 });
  }

private:
  const GmmModel& model_;
  std::discrete_distribution<std::size_t> pick_;
  std::normal_distribution<double> normal_{ 0.0, 1.0 };
};

void
fnv_mix(std::uint64_t& h, std::uint64_t v)
{
  for (int b = 0; b < 8; ++b) {
    h ^= (v >> (8 * b)) & 0xffu;
    h *= 0x100000001b3ULL;
  }
}

} // namespace

std::vector<Vec2>
sample_mixture(const GmmModel& model, std::size_t count, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  MixtureSampler draw(model);
  std::vector<Vec2> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k)
    out.push_back(draw(rng));
  return out;
}

KlEstimate
kl_divergence(const GmmModel& f1, const GmmModel& f2, std::size_t samples, std::uint64_t seed)
{
  require(samples >= 1, "KL estimation needs at least one sample");
  const std::size_t blocks = (samples + kBlock - 1) / kBlock;
  std::vector<Moments> parts(blocks);
  parallel_for(
    blocks,
    [&](std::size_t b) {
      std::mt19937_64 rng(derive_seed(seed, b));
      MixtureSampler draw(f1);
      const std::size_t count = std::min(kBlock, samples - b * kBlock);
      Moments& m = parts[b];
      for (std::size_t k = 0; k < count; ++k) {
        const Vec2 x = draw(rng);
        const double diff = f1.log_pdf(x) - f2.log_pdf(x);
        if (std::isinf(diff) && diff > 0.0) {
          m.infinite = true;
          continue;
        }
        m.add(diff);
      }
    },
    1);

  Moments total;
  for (const auto& p : parts)
    total.merge(p);

  KlEstimate est;
  est.sample_count = samples;
  est.raw = total.mean;
  est.std_error =
    total.count > 1
      ? std::sqrt(total.m2 / static_cast<double>(total.count - 1) / static_cast<double>(total.count))
      : 0.0;
  est.infinite = total.infinite;
  est.value = est.infinite ? std::numeric_limits<double>::infinity() : std::max(0.0, est.raw);
  return est;
}

KlEstimate
kl_symmetric(const GmmModel& f1, const GmmModel& f2, std::size_t samples, std::uint64_t seed)
{
  const KlEstimate forward =
    kl_divergence(f1, f2, samples, derive_seed(seed, model_fingerprint(f1)));
  const KlEstimate backward =
    kl_divergence(f2, f1, samples, derive_seed(seed, model_fingerprint(f2)));

  KlEstimate est;
  est.sample_count = samples;
  est.raw = 0.5 * (forward.raw + backward.raw);
  est.std_error = 0.5 * std::sqrt(forward.std_error * forward.std_error +
                                  backward.std_error * backward.std_error);
  est.infinite = forward.infinite || backward.infinite;
  est.value = est.infinite ? std::numeric_limits<double>::infinity() : std::max(0.0, est.raw);
  return est;
}

std::uint64_t
model_fingerprint(const GmmModel& model)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  fnv_mix(h, model.mode() == CovarianceMode::full ? 1u : 0u);
  for (const auto& c : model.components()) {
    for (double v : { c.weight, c.mean.x, c.mean.y, c.cov.xx, c.cov.xy, c.cov.yy })
      fnv_mix(h, std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

} // namespace qsr
