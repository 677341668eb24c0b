#pragma once

#include "qsr/geo.hpp"
#include "qsr/gmm.hpp"
#include "qsr/greedy.hpp"
#include "qsr/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qsr {

// ---------------------------------------------------------------------------
// Observation tuples: "known POI, relation, unknown POI" records.
//
//   known_id,known_lon,known_lat,relation,unknown_id,unknown_lon,unknown_lat
//
// The header is mandatory (columns may appear in any order), lines starting
// with '#' and blank lines are ignored, fields may be double-quoted. The
// unknown coordinates are both present (training) or both empty (inference).
// ---------------------------------------------------------------------------

struct ObservationRecord
{
  std::string known_id;
  GeoPoint known;
  std::string relation; ///< lower-cased
  std::string unknown_id;
  std::optional<GeoPoint> unknown;
};

//! Throws ParseError with the 1-based line number on any malformed input.
std::vector<ObservationRecord> read_observations(std::istream& in);
std::vector<ObservationRecord> read_observations(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Feature files: distance_km,orientation_deg[,source]
// ---------------------------------------------------------------------------

enum class FeatureSource
{
  observed,
  synthetic
};

struct FeatureRow
{
  SpatialFeature feature;
  FeatureSource source = FeatureSource::observed;
};

std::vector<FeatureRow> read_features(std::istream& in);
std::vector<FeatureRow> read_features(const std::filesystem::path& path);
void write_features(std::ostream& out, std::span<const FeatureRow> rows, bool with_source);
void write_features(const std::filesystem::path& path,
                    std::span<const FeatureRow> rows,
                    bool with_source);

// ---------------------------------------------------------------------------
// Model files: one JSON document per relation model.
// ---------------------------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;

struct TrainingInfo
{
  std::size_t sample_count = 0;
  GreedyConfig config;
  GreedyTrace trace;
};

struct ModelFile
{
  GmmModel model;
  std::optional<TrainingInfo> training;
};

void write_model(std::ostream& out, const GmmModel& model, const std::optional<TrainingInfo>& info);
void write_model(const std::filesystem::path& path,
                 const GmmModel& model,
                 const std::optional<TrainingInfo>& info = std::nullopt);

//! Throws unsupported_version for an unknown format_version and parse for
//! anything structurally wrong; never returns a partial model.
ModelFile read_model_file(std::istream& in);
ModelFile read_model_file(const std::filesystem::path& path);
GmmModel read_model(const std::filesystem::path& path);

//! components,log_likelihood,accepted
void write_trace(const std::filesystem::path& path, const GreedyTrace& trace);

// ---------------------------------------------------------------------------
// Probability grids
// ---------------------------------------------------------------------------

enum class GridFormat
{
  csv, ///< header comment with bbox and dims, then ny rows north to south
  pgm  ///< plain (P2) 16-bit greymap, max cell = 65535
};

void export_grid(std::ostream& out, const ProbabilityGrid& grid, GridFormat format);
void export_grid(const ProbabilityGrid& grid, const std::filesystem::path& path, GridFormat format);
ProbabilityGrid read_grid_csv(std::istream& in);
ProbabilityGrid read_grid_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Shared text helpers (locale independent)
// ---------------------------------------------------------------------------

//! Shortest decimal form that parses back to exactly `v`.
std::string format_double(double v);
std::optional<double> parse_double(std::string_view text);
std::vector<std::string> split_csv_line(std::string_view line);

std::string_view to_string(CovarianceMode mode);
CovarianceMode parse_covariance_mode(std::string_view text);
std::string_view to_string(ProjectionMode mode);
ProjectionMode parse_projection_mode(std::string_view text);

} // namespace qsr
