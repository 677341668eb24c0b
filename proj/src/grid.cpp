#include "qsr/grid.hpp"

#include "qsr/divergence.hpp"
#include "qsr/error.hpp"
#include "qsr/numeric.hpp"
#include "qsr/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qsr {

void
GridSpec::validate() const
{
  const auto& b = bbox;
  if (!(std::isfinite(b.lon_min) && std::isfinite(b.lon_max) && std::isfinite(b.lat_min) &&
        std::isfinite(b.lat_max)))
    fail(ErrorKind::invalid_coordinate, "grid bounding box is not finite");
  require(b.lon_min < b.lon_max && b.lat_min < b.lat_max,
          "grid bounding box needs lon_min < lon_max and lat_min < lat_max");
  qsr::validate(GeoPoint{ b.lon_min, b.lat_min });
  qsr::validate(GeoPoint{ b.lon_max, b.lat_max });
  require(nx >= 1 && ny >= 1, "grid needs at least one row and one column");
  projection.validate();
}

double
GridSpec::cell_area_km2() const
{
  return cell_width_deg() * projection.km_per_degree_lon() * cell_height_deg() * kKmPerDegree;
}

GeoPoint
GridSpec::cell_center(CellIndex cell) const
{
  return { bbox.lon_min + (static_cast<double>(cell.col) + 0.5) * cell_width_deg(),
           bbox.lat_max - (static_cast<double>(cell.row) + 0.5) * cell_height_deg() };
}

std::optional<CellIndex>
GridSpec::locate(const GeoPoint& p) const
{
  if (p.lon < bbox.lon_min || p.lon > bbox.lon_max || p.lat < bbox.lat_min || p.lat > bbox.lat_max)
    return std::nullopt;
  auto col = static_cast<std::size_t>((p.lon - bbox.lon_min) / cell_width_deg());
  auto row = static_cast<std::size_t>((bbox.lat_max - p.lat) / cell_height_deg());
  return CellIndex{ std::min(row, ny - 1), std::min(col, nx - 1) };
}

ProbabilityGrid::ProbabilityGrid(GridSpec spec, std::vector<double> values)
  : spec_(std::move(spec))
  , values_(std::move(values))
{
  spec_.validate();
  require(values_.size() == spec_.cell_count(), "grid value count does not match nx * ny");
  for (double v : values_)
    require(std::isfinite(v) && v >= 0.0, "grid probabilities must be finite and >= 0");
}

double
ProbabilityGrid::sum() const
{
  return std::accumulate(values_.begin(), values_.end(), 0.0);
}

CellIndex
ProbabilityGrid::argmax() const
{
  const auto it = std::max_element(values_.begin(), values_.end());
  const auto idx = static_cast<std::size_t>(it - values_.begin());
  return { idx / spec_.nx, idx % spec_.nx };
}

std::vector<RankedCell>
ProbabilityGrid::top_cells(std::size_t k) const
{
  std::vector<std::size_t> order(values_.size());
  std::iota(order.begin(), order.end(), 0);
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return values_[a] > values_[b] || (values_[a] == values_[b] && a < b);
                    });
  std::vector<RankedCell> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const CellIndex cell{ order[i] / spec_.nx, order[i] % spec_.nx };
    out.push_back({ cell, spec_.cell_center(cell), values_[order[i]] });
  }
  return out;
}

std::vector<double>
log_cell_masses(const GmmModel& model, const GridSpec& spec, const GeoPoint& known)
{
  spec.validate();
  validate(known);
  const double log_area = std::log(spec.cell_area_km2());
  const std::size_t nx = spec.nx;
  const std::size_t ny = spec.ny;
  std::vector<double> out(spec.cell_count());
  std::vector<char> coincident(out.size(), 0);
  const CartesianPoint origin{ 0.0, 0.0 };

  parallel_for(out.size(), [&](std::size_t idx) {
    const CellIndex cell{ idx / nx, idx % nx };
    const CartesianPoint c = project(spec.cell_center(cell), known, spec.projection);
    try {
      const SpatialFeature f = extract_feature(origin, c);
      out[idx] = model.log_pdf(f.as_vec()) + log_area;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::degenerate_pair)
        throw;
      coincident[idx] = 1;
    }
  });

  for (std::size_t idx = 0; idx < out.size(); ++idx) {
    if (!coincident[idx])
      continue;
    const auto row = static_cast<std::ptrdiff_t>(idx / nx);
    const auto col = static_cast<std::ptrdiff_t>(idx % nx);
    std::vector<double> neighbours;
    for (std::ptrdiff_t dr = -1; dr <= 1; ++dr)
      for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
        const std::ptrdiff_t r = row + dr;
        const std::ptrdiff_t c = col + dc;
        if ((dr == 0 && dc == 0) || r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(ny) ||
            c >= static_cast<std::ptrdiff_t>(nx))
          continue;
        const auto n = static_cast<std::size_t>(r) * nx + static_cast<std::size_t>(c);
        if (!coincident[n])
          neighbours.push_back(out[n]);
      }
    out[idx] = neighbours.empty()
                 ? log_area
                 : log_sum_exp(neighbours) - std::log(static_cast<double>(neighbours.size()));
  }
  return out;
}

namespace {

ProbabilityGrid
normalize(const GridSpec& spec, std::vector<double> log_mass)
{
  const double hi = *std::max_element(log_mass.begin(), log_mass.end());
  double total = 0.0;
  for (double& v : log_mass) {
    v = v == kNegInf ? 0.0 : std::exp(v - hi);
    total += v;
  }
  for (double& v : log_mass)
    v /= total;
  return ProbabilityGrid(spec, std::move(log_mass));
}

} // namespace

ProbabilityGrid
relation_heatmap(const GmmModel& model, const GridSpec& spec, const GeoPoint& known)
{
  return normalize(spec, log_cell_masses(model, spec, known));
}

ProbabilityGrid
infer_location(std::span<const Observation> observations, const GridSpec& spec)
{
  require(!observations.empty(), "location inference needs at least one observation");
  std::vector<double> fused(spec.cell_count(), 0.0);
  for (std::size_t k = 0; k < observations.size(); ++k) {
    const auto masses = log_cell_masses(observations[k].relation_model, spec, observations[k].known);
    if (std::all_of(masses.begin(), masses.end(), [](double v) { return v == kNegInf; }))
      fail(ErrorKind::infeasible_fusion,
           "observation " + std::to_string(k) + " assigns zero mass to every cell");
    for (std::size_t i = 0; i < fused.size(); ++i)
      fused[i] += masses[i];
  }
  if (std::all_of(fused.begin(), fused.end(), [](double v) { return v == kNegInf; }))
    fail(ErrorKind::infeasible_fusion, "observations have no cell in common");
  return normalize(spec, std::move(fused));
}

namespace {

void
mean_sd(const std::vector<double>& xs, double& mean, double& sd)
{
  mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs)
    ss += (x - mean) * (x - mean);
  sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
}

} // namespace

std::vector<SweepRow>
sweep_components(std::span<const Vec2> data,
                 std::span<const int> caps,
                 int repetitions,
                 const GreedyConfig& cfg,
                 std::size_t kl_samples)
{
  require(!data.empty(), "component sweep on an empty data set");
  require(repetitions >= 1, "component sweep needs at least one repetition");
  cfg.validate();
  const GmmModel baseline =
    fit_one_component(data, cfg.covariance_mode, cfg.em.variance_floor);
  const auto reps = static_cast<std::size_t>(repetitions);

  std::vector<SweepRow> rows;
  for (int cap : caps) {
    require(cap >= 1, "component caps must be >= 1");
    std::vector<double> lls(reps), kls(reps), sizes(reps);
    parallel_for(
      reps,
      [&](std::size_t r) {
        GreedyConfig run = cfg;
        run.max_components = cap;
        run.seed = derive_seed(cfg.seed, r);
        const GreedyResult fitted = fit_greedy(data, run);
        double ll = 0.0;
        for (const auto& step : fitted.trace.steps)
          if (step.accepted)
            ll = step.log_likelihood;
        lls[r] = ll;
        sizes[r] = static_cast<double>(fitted.model.size());
        kls[r] = kl_symmetric(baseline, fitted.model, kl_samples, derive_seed(run.seed, 0x6b6c))
                   .value;
      },
      1);
    SweepRow row;
    row.max_components = cap;
    double unused;
    mean_sd(lls, row.mean_log_likelihood, row.sd_log_likelihood);
    mean_sd(kls, row.mean_kl_to_baseline, row.sd_kl_to_baseline);
    mean_sd(sizes, row.mean_components, unused);
    rows.push_back(row);
  }
  return rows;
}

} // namespace qsr
