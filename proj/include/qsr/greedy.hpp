#pragma once

#include "qsr/gmm.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace qsr {

struct GreedyConfig
{
  int max_components = 10;
  int candidates_per_component = 2;
  int partial_em_iterations = 20;
  CovarianceMode covariance_mode = CovarianceMode::diagonal;
  EmConfig em;
  std::uint64_t seed = 42;

  void validate() const;
};

struct GreedyStep
{
  std::size_t component_count = 0;
  double log_likelihood = 0.0; ///< after full EM at this component count
  bool accepted = false;
};

//! One entry per attempted model size; only the last entry may be rejected.
struct GreedyTrace
{
  std::vector<GreedyStep> steps;
};

//! A component proposed for insertion together with its mixing weight w*
//! and the log-likelihood of (1 - w*) p^M + w* g after partial EM.
struct Candidate
{
  GaussianComponent component;
  double mixing_weight = 0.0;
  double blended_log_likelihood = 0.0;
};

struct GreedyResult
{
  GmmModel model;
  GreedyTrace trace;
};

//! Maximum-likelihood single Gaussian: sample mean and the 1/n sample
//! covariance, mode-constrained and floored. Throws insufficient_data for
//! fewer than 2 points.
GmmModel fit_one_component(std::span<const Vec2> data,
                           CovarianceMode mode = CovarianceMode::diagonal,
                           double variance_floor = 1e-6,
                           std::string relation_label = {});

//! candidates_per_component candidates per existing component, in
//! (component, draw) order. Each is seeded at the less well explained point
//! of a responsibility-weighted random pair from its parent, with half the
//! parent covariance and w* = 0.5 / (M + 1), then refined by partial EM that
//! moves only the candidate and w* while the current mixture stays fixed.
//! Candidates whose responsibility mass vanishes are dropped.
std::vector<Candidate> propose_candidates(const GmmModel& model,
                                          std::span<const Vec2> data,
                                          const GreedyConfig& cfg);

//! (1 - w*) p^M + w* g: scales the existing weights and appends g.
GmmModel insert_component(const GmmModel& model, const Candidate& candidate);

//! Greedy mixture learning: one-component fit, then repeated best-candidate
//! insertion and full EM. Stops when the converged log-likelihood fails to
//! exceed the previous model's by more than the EM relative tolerance, when
//! no candidate survives, or at max_components. Deterministic for a fixed seed.
GreedyResult fit_greedy(std::span<const Vec2> data,
                        const GreedyConfig& cfg,
                        std::string relation_label = {});

} // namespace qsr
