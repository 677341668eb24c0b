#pragma once

#include "qsr/geo.hpp"
#include "qsr/gmm.hpp"
#include "qsr/greedy.hpp"

#include <optional>
#include <span>
#include <vector>

namespace qsr {

struct BoundingBox
{
  double lon_min = -1.0;
  double lon_max = 1.0;
  double lat_min = 51.0;
  double lat_max = 52.0;

  GeoPoint center() const { return { 0.5 * (lon_min + lon_max), 0.5 * (lat_min + lat_max) }; }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct CellIndex
{
  std::size_t row = 0; ///< 0 is the northernmost row
  std::size_t col = 0; ///< 0 is the westernmost column

  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

//! Rectangular lon/lat raster. The default covers lon [-1, 1], lat [51, 52]
//! with 50 x 50 cells.
struct GridSpec
{
  BoundingBox bbox;
  std::size_t nx = 50;
  std::size_t ny = 50;
  ProjectionConfig projection{ 51.5, ProjectionMode::equirectangular_corrected };

  void validate() const;
  std::size_t cell_count() const { return nx * ny; }
  double cell_width_deg() const { return (bbox.lon_max - bbox.lon_min) / static_cast<double>(nx); }
  double cell_height_deg() const { return (bbox.lat_max - bbox.lat_min) / static_cast<double>(ny); }
  double cell_area_km2() const;
  GeoPoint cell_center(CellIndex cell) const;
  //! Cell containing p, or nullopt outside the bounding box.
  std::optional<CellIndex> locate(const GeoPoint& p) const;
};

struct RankedCell
{
  CellIndex cell;
  GeoPoint center;
  double probability = 0.0;
};

//! Normalized per-cell probabilities, row-major with row 0 northernmost.
class ProbabilityGrid
{
public:
  ProbabilityGrid(GridSpec spec, std::vector<double> values);

  const GridSpec& spec() const { return spec_; }
  const std::vector<double>& values() const { return values_; }
  double at(CellIndex cell) const { return values_[cell.row * spec_.nx + cell.col]; }
  double sum() const;
  CellIndex argmax() const;
  //! The k most probable cells, ties broken by row-major index.
  std::vector<RankedCell> top_cells(std::size_t k) const;

private:
  GridSpec spec_;
  std::vector<double> values_;
};

struct Observation
{
  GeoPoint known;
  GmmModel relation_model;
};

//! ln(density x cell area) of the unknown POI for every cell, before
//! normalization. A cell whose center coincides with `known` takes the mean
//! mass of its evaluable 8-neighbours.
std::vector<double> log_cell_masses(const GmmModel& model,
                                    const GridSpec& spec,
                                    const GeoPoint& known);

ProbabilityGrid relation_heatmap(const GmmModel& model, const GridSpec& spec, const GeoPoint& known);

//! Fuses observations under conditional independence: per-cell log masses
//! are summed, exponentiated with a max shift, and normalized. Throws
//! infeasible_fusion if some observation has zero mass everywhere.
ProbabilityGrid infer_location(std::span<const Observation> observations, const GridSpec& spec);

struct SweepRow
{
  int max_components = 0;
  double mean_log_likelihood = 0.0;
  double sd_log_likelihood = 0.0;
  double mean_kl_to_baseline = 0.0;
  double sd_kl_to_baseline = 0.0;
  double mean_components = 0.0;
};

//! For each cap, runs fit_greedy `repetitions` times with seeds derived
//! from cfg.seed and the repetition index (the same seeds for every cap),
//! recording the final log-likelihood and the symmetric KL divergence to
//! the one-component baseline.
std::vector<SweepRow> sweep_components(std::span<const Vec2> data,
                                       std::span<const int> caps,
                                       int repetitions,
                                       const GreedyConfig& cfg,
                                       std::size_t kl_samples = 10000);

} // namespace qsr
