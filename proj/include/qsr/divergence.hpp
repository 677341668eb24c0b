#pragma once

#include "qsr/gmm.hpp"

#include <cstdint>
#include <vector>

namespace qsr {

//! Monte Carlo Kullback-Leibler estimate in nats.
struct KlEstimate
{
  double value = 0.0;     ///< max(0, raw); +inf when `infinite`
  double raw = 0.0;       ///< unclamped sample mean of ln f1 - ln f2
  double std_error = 0.0; ///< standard error of `raw`
  std::size_t sample_count = 0;
  bool infinite = false; ///< f2 had zero density at some draw from f1
};

//! Ancestral sampling: pick a component by weight, then a Gaussian draw.
std::vector<Vec2> sample_mixture(const GmmModel& model, std::size_t count, std::uint64_t seed);

//! D(f1 || f2) from `samples` draws of f1. Draws are generated in fixed-size
//! blocks with per-block seeds, so the result is independent of the thread
//! count.
KlEstimate kl_divergence(const GmmModel& f1,
                         const GmmModel& f2,
                         std::size_t samples,
                         std::uint64_t seed);

//! (D(f1 || f2) + D(f2 || f1)) / 2. Each direction draws from its own
//! stream, seeded from `seed` and the sampled model's parameters, so
//! swapping the arguments yields bit-identical results.
KlEstimate kl_symmetric(const GmmModel& f1,
                        const GmmModel& f2,
                        std::size_t samples,
                        std::uint64_t seed);

//! Hash of the numeric parameters and covariance mode (label excluded).
std::uint64_t model_fingerprint(const GmmModel& model);

} // namespace qsr
