#include "qsr/cli.hpp"

#include "qsr/data_io.hpp"
#include "qsr/divergence.hpp"
#include "qsr/error.hpp"
#include "qsr/grid.hpp"
#include "qsr/kde.hpp"
#include "qsr/parallel.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace fs = std::filesystem;

namespace qsr {

namespace {

constexpr std::uint64_t kDefaultSeed = 20130101;

class UsageError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct GreedyFlags
{
  int max_components = 10;
  int candidates = 2;
  int partial_em_iterations = 20;
  int max_iterations = 500;
  double tolerance = 1e-6;
  double variance_floor = 1e-6;
  std::string covariance = "diagonal";
  std::uint64_t seed = kDefaultSeed;

  void add_to(CLI::App& app)
  {
    app.add_option("--max-components", max_components, "Upper bound on mixture components");
    app.add_option("--candidates", candidates, "Candidate components drawn per existing component");
    app.add_option("--partial-em-iterations", partial_em_iterations,
                   "Partial EM iterations used to refine each candidate");
    app.add_option("--max-iterations", max_iterations, "EM iteration cap");
    app.add_option("--tolerance", tolerance, "Relative log-likelihood improvement that stops EM");
    app.add_option("--variance-floor", variance_floor, "Minimum covariance eigenvalue");
    app.add_option("--covariance", covariance, "Covariance structure")
      ->check(CLI::IsMember({ "diagonal", "full" }));
    app.add_option("--seed", seed, "Random seed");
  }

  GreedyConfig config() const
  {
    GreedyConfig cfg;
    cfg.max_components = max_components;
    cfg.candidates_per_component = candidates;
    cfg.partial_em_iterations = partial_em_iterations;
    cfg.covariance_mode = parse_covariance_mode(covariance);
    cfg.em.max_iterations = max_iterations;
    cfg.em.ll_tolerance = tolerance;
    cfg.em.variance_floor = variance_floor;
    cfg.seed = seed;
    return cfg;
  }
};

struct GridFlags
{
  std::string bbox = "-1,1,51,52";
  std::size_t nx = 50;
  std::size_t ny = 50;
  std::string projection = "corrected";
  std::optional<double> ref_lat;

  void add_to(CLI::App& app)
  {
    app.add_option("--bbox", bbox, "Grid extent lon_min,lon_max,lat_min,lat_max");
    app.add_option("--nx", nx, "Grid columns")->check(CLI::PositiveNumber);
    app.add_option("--ny", ny, "Grid rows")->check(CLI::PositiveNumber);
    app.add_option("--projection", projection, "Degree to km conversion")
      ->check(CLI::IsMember({ "corrected", "raw" }));
    app.add_option("--ref-lat", ref_lat,
                   "Reference latitude for the corrected projection [default: bbox centre]");
  }

  GridSpec spec() const
  {
    const auto parts = split_csv_line(bbox);
    std::vector<double> v;
    for (const auto& p : parts) {
      const auto d = parse_double(p);
      if (!d)
        throw UsageError("--bbox expects four numbers, got '" + bbox + "'");
      v.push_back(*d);
    }
    if (v.size() != 4)
      throw UsageError("--bbox expects four numbers, got '" + bbox + "'");
    GridSpec s;
    s.bbox = { v[0], v[1], v[2], v[3] };
    s.nx = nx;
    s.ny = ny;
    s.projection.mode = parse_projection_mode(projection);
    s.projection.ref_lat = ref_lat.value_or(s.bbox.center().lat);
    s.validate();
    return s;
  }
};

GeoPoint
parse_point(const std::string& text, const char* flag)
{
  const auto parts = split_csv_line(text);
  if (parts.size() == 2) {
    const auto lon = parse_double(parts[0]);
    const auto lat = parse_double(parts[1]);
    if (lon && lat)
      return { *lon, *lat };
  }
  throw UsageError(std::string(flag) + " expects lon,lat, got '" + text + "'");
}

std::vector<int>
parse_caps(const std::string& text)
{
  std::vector<int> caps;
  for (const auto& part : split_csv_line(text)) {
    const auto dash = part.find('-', 1);
    try {
      if (dash == std::string::npos) {
        caps.push_back(std::stoi(part));
      } else {
        const int lo = std::stoi(part.substr(0, dash));
        const int hi = std::stoi(part.substr(dash + 1));
        if (lo > hi)
          throw UsageError("empty component range '" + part + "'");
        for (int c = lo; c <= hi; ++c)
          caps.push_back(c);
      }
    } catch (const std::logic_error&) {
      throw UsageError("--caps expects a list like 1-10 or 1,2,5, got '" + text + "'");
    }
  }
  if (caps.empty())
    throw UsageError("--caps is empty");
  return caps;
}

GridFormat
parse_format(const std::string& text)
{
  return text == "pgm" ? GridFormat::pgm : GridFormat::csv;
}

std::string
file_safe(const std::string& label)
{
  std::string out;
  for (unsigned char c : label)
    out.push_back(std::isalnum(c) || c == '-' || c == '_' ? static_cast<char>(c) : '_');
  return out;
}

std::vector<SpatialFeature>
features_only(const std::vector<FeatureRow>& rows)
{
  std::vector<SpatialFeature> out;
  out.reserve(rows.size());
  for (const auto& r : rows)
    out.push_back(r.feature);
  return out;
}

// ---------------------------------------------------------------------------

struct FeaturesCmd
{
  std::string input;
  std::string out_dir = ".";
  std::optional<std::string> relation;
  std::string projection = "corrected";
  std::optional<double> ref_lat;

  void run(std::ostream& out, std::ostream& err) const
  {
    const auto records = read_observations(fs::path(input));
    ProjectionConfig proj;
    proj.mode = parse_projection_mode(projection);
    std::optional<std::string> wanted;
    if (relation) {
      std::string l = *relation;
      std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
      wanted = l;
    }

    std::map<std::string, std::vector<FeatureRow>> groups;
    std::size_t skipped = 0;
    std::size_t index = 0;
    for (const auto& rec : records) {
      ++index;
      if (wanted && rec.relation != *wanted)
        continue;
      auto& group = groups[rec.relation];
      if (!rec.unknown) {
        err << "warning: record " << index << " (" << rec.known_id << " -> " << rec.unknown_id
            << ") has no unknown coordinates, skipped\n";
        ++skipped;
        continue;
      }
      proj.ref_lat = ref_lat.value_or(rec.known.lat);
      const CartesianPoint target = project(*rec.unknown, rec.known, proj);
      try {
        group.push_back({ extract_feature({ 0.0, 0.0 }, target), FeatureSource::observed });
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::degenerate_pair)
          throw;
        err << "warning: record " << index << " (" << rec.known_id << " -> " << rec.unknown_id
            << ") has coincident points, skipped\n";
        ++skipped;
      }
    }
    if (wanted && (groups.empty() || groups.begin()->second.empty()))
      fail(ErrorKind::insufficient_data, "no usable records for relation '" + *wanted + "'");

    fs::create_directories(out_dir);
    for (const auto& [label, rows] : groups) {
      if (rows.empty())
        continue;
      const fs::path path = fs::path(out_dir) / (file_safe(label) + ".features.csv");
      write_features(path, rows, false);
      out << "relation=" << label << " features=" << rows.size() << " file=" << path.string()
          << '\n';
    }
    out << "skipped=" << skipped << '\n';
  }
};

struct AugmentCmd
{
  std::string input;
  std::string output;
  std::size_t count = 1000;
  std::uint64_t seed = kDefaultSeed;
  double variance_floor = 0.0;
  bool keep_observed = false;

  void run(std::ostream& out) const
  {
    if (count < 1)
      throw UsageError("--count must be at least 1");
    const auto rows = read_features(fs::path(input));
    std::optional<KdeModel> kde;
    try {
      kde = KdeModel::fit(features_only(rows), variance_floor);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::degenerate_data)
        throw;
      fail(ErrorKind::degenerate_data,
           std::string(e.what()) + " (hint: pass --variance-floor with a positive value)");
    }
    std::vector<FeatureRow> result;
    if (keep_observed)
      result = rows;
    for (const auto& f : kde->sample(count, seed))
      result.push_back({ f, FeatureSource::synthetic });
    write_features(fs::path(output), result, true);
    out << "bandwidth_distance=" << format_double(kde->bandwidth().distance)
        << " bandwidth_orientation=" << format_double(kde->bandwidth().orientation)
        << " synthetic=" << count << " file=" << output << '\n';
  }
};

struct TrainCmd
{
  std::string input;
  std::string output;
  std::optional<std::string> relation;
  std::optional<std::string> trace_path;
  GreedyFlags greedy;

  void run(std::ostream& out) const
  {
    const auto rows = read_features(fs::path(input));
    const auto data = to_points(features_only(rows));
    std::string label = relation.value_or(fs::path(input).filename().string());
    if (!relation)
      label = label.substr(0, label.find('.'));

    const GreedyConfig cfg = greedy.config();
    const GreedyResult fitted = fit_greedy(data, cfg, label);
    const TrainingInfo info{ data.size(), cfg, fitted.trace };
    write_model(fs::path(output), fitted.model, info);
    const fs::path trace_file = trace_path.value_or(output + ".trace.csv");
    write_trace(trace_file, fitted.trace);

    double final_ll = fitted.trace.steps.front().log_likelihood;
    for (const auto& s : fitted.trace.steps)
      if (s.accepted)
        final_ll = s.log_likelihood;
    out << "relation=" << label << " components=" << fitted.model.size()
        << " log_likelihood=" << format_double(final_ll)
        << " one_component_log_likelihood=" << format_double(fitted.trace.steps.front().log_likelihood)
        << " file=" << output << '\n';
  }
};

struct CompareCmd
{
  std::string model_a;
  std::string model_b;
  std::size_t samples = 100000;
  std::uint64_t seed = kDefaultSeed;

  void run(std::ostream& out) const
  {
    if (samples < 1)
      throw UsageError("--samples must be at least 1");
    const GmmModel a = read_model(model_a);
    const GmmModel b = read_model(model_b);
    const KlEstimate kl = kl_symmetric(a, b, samples, seed);
    out << "symmetric_kl=" << format_double(kl.value) << " std_error=" << format_double(kl.std_error)
        << " raw=" << format_double(kl.raw) << " samples=" << kl.sample_count << '\n';
  }
};

struct SweepCmd
{
  std::string input;
  std::optional<std::string> output;
  std::string caps = "1-10";
  int repetitions = 100;
  std::size_t kl_samples = 10000;
  GreedyFlags greedy;

  void run(std::ostream& out) const
  {
    if (repetitions < 1)
      throw UsageError("--repetitions must be at least 1");
    const auto rows = read_features(fs::path(input));
    const auto data = to_points(features_only(rows));
    const auto cap_list = parse_caps(caps);
    const auto report = sweep_components(data, cap_list, repetitions, greedy.config(), kl_samples);

    std::ostringstream csv;
    csv << "max_components,mean_log_likelihood,sd_log_likelihood,mean_kl_to_baseline,"
           "sd_kl_to_baseline,mean_components\n";
    for (const auto& r : report)
      csv << r.max_components << ',' << format_double(r.mean_log_likelihood) << ','
          << format_double(r.sd_log_likelihood) << ',' << format_double(r.mean_kl_to_baseline)
          << ',' << format_double(r.sd_kl_to_baseline) << ',' << format_double(r.mean_components)
          << '\n';
    if (output) {
      std::ofstream f(*output, std::ios::binary | std::ios::trunc);
      if (!(f << csv.str()))
        fail(ErrorKind::io, "cannot write '" + *output + "'");
    } else {
      out << csv.str();
    }
  }
};

struct HeatmapCmd
{
  std::string model;
  std::optional<std::string> known;
  std::string output;
  std::string format = "csv";
  GridFlags grid;

  void run(std::ostream& out) const
  {
    const GmmModel m = read_model(model);
    const GridSpec spec = grid.spec();
    const GeoPoint at = known ? parse_point(*known, "--known") : spec.bbox.center();
    const ProbabilityGrid g = relation_heatmap(m, spec, at);
    export_grid(g, fs::path(output), parse_format(format));
    const auto best = g.top_cells(1).front();
    out << "argmax_lon=" << format_double(best.center.lon)
        << " argmax_lat=" << format_double(best.center.lat)
        << " max_probability=" << format_double(best.probability) << " file=" << output << '\n';
  }
};

struct InferCmd
{
  std::string manifest;
  std::string output;
  std::string format = "csv";
  std::size_t top = 5;
  GridFlags grid;

  void run(std::ostream& out) const
  {
    std::ifstream in(manifest, std::ios::binary);
    if (!in)
      fail(ErrorKind::io, "cannot open '" + manifest + "' for reading");
    const fs::path base = fs::path(manifest).parent_path();

    std::vector<Observation> observations;
    std::string line;
    std::size_t number = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
      ++number;
      if (!line.empty() && line.back() == '\r')
        line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos || line.front() == '#')
        continue;
      const auto fields = split_csv_line(line);
      if (!have_header) {
        if (fields != std::vector<std::string>{ "known_id", "known_lon", "known_lat", "model" })
          throw ParseError(number, "expected header 'known_id,known_lon,known_lat,model'");
        have_header = true;
        continue;
      }
      if (fields.size() != 4)
        throw ParseError(number, "expected 4 fields, found " + std::to_string(fields.size()));
      const auto lon = parse_double(fields[1]);
      const auto lat = parse_double(fields[2]);
      if (!lon || !lat)
        throw ParseError(number, "invalid known coordinates");
      const GeoPoint known{ *lon, *lat };
      validate(known);
      fs::path model_path(fields[3]);
      if (model_path.is_relative())
        model_path = base / model_path;
      observations.push_back({ known, read_model(model_path) });
    }
    if (observations.empty())
      throw UsageError("manifest '" + manifest + "' lists no observations");

    const ProbabilityGrid g = infer_location(observations, grid.spec());
    export_grid(g, fs::path(output), parse_format(format));
    out << "rank,lon,lat,probability\n";
    std::size_t rank = 1;
    for (const auto& c : g.top_cells(top))
      out << rank++ << ',' << format_double(c.center.lon) << ',' << format_double(c.center.lat)
          << ',' << format_double(c.probability) << '\n';
  }
};

} // namespace

int
run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
  CLI::App app{ "Quantify qualitative spatial relations as Gaussian mixtures over distance and "
                "orientation, and locate unknown POIs from them.",
                "qsr" };
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough(); // global options may follow the subcommand
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = available parallelism)");

  FeaturesCmd features;
  auto* sub_features =
    app.add_subcommand("features", "Extract distance/orientation features per relation");
  sub_features->add_option("-i,--input", features.input, "Observation CSV")->required();
  sub_features->add_option("-o,--out-dir", features.out_dir, "Directory for <relation>.features.csv");
  sub_features->add_option("--relation", features.relation, "Only this relation label");
  sub_features->add_option("--projection", features.projection, "Degree to km conversion")
    ->check(CLI::IsMember({ "corrected", "raw" }));
  sub_features->add_option("--ref-lat", features.ref_lat,
                           "Reference latitude [default: each record's known POI latitude]");

  AugmentCmd augment;
  auto* sub_augment = app.add_subcommand("augment", "Generate semi-synthetic features with a KDE");
  sub_augment->add_option("-i,--input", augment.input, "Feature CSV")->required();
  sub_augment->add_option("-o,--output", augment.output, "Augmented feature CSV")->required();
  sub_augment->add_option("--count", augment.count, "Number of synthetic features");
  sub_augment->add_option("--seed", augment.seed, "Random seed");
  sub_augment->add_option("--variance-floor", augment.variance_floor,
                          "Minimum per-dimension variance used for the bandwidth");
  sub_augment->add_flag("--keep-observed", augment.keep_observed,
                        "Also copy the observed rows into the output");

  TrainCmd train;
  auto* sub_train = app.add_subcommand("train", "Fit a relation model with greedy EM");
  sub_train->add_option("-i,--input", train.input, "Feature CSV")->required();
  sub_train->add_option("-o,--output", train.output, "Model file (JSON)")->required();
  sub_train->add_option("--relation", train.relation, "Relation label [default: input file stem]");
  sub_train->add_option("--trace", train.trace_path, "Trace CSV [default: <output>.trace.csv]");
  train.greedy.add_to(*sub_train);

  CompareCmd compare;
  auto* sub_compare = app.add_subcommand("compare", "Symmetric KL divergence between two models");
  sub_compare->add_option("model_a", compare.model_a, "First model file")->required();
  sub_compare->add_option("model_b", compare.model_b, "Second model file")->required();
  sub_compare->add_option("--samples", compare.samples, "Monte Carlo samples per direction");
  sub_compare->add_option("--seed", compare.seed, "Random seed");

  SweepCmd sweep;
  auto* sub_sweep =
    app.add_subcommand("sweep", "Log-likelihood and KL-to-baseline versus component cap");
  sub_sweep->add_option("-i,--input", sweep.input, "Feature CSV")->required();
  sub_sweep->add_option("-o,--output", sweep.output, "Report CSV [default: stdout]");
  sub_sweep->add_option("--caps", sweep.caps, "Component caps, e.g. 1-10 or 1,2,5");
  sub_sweep->add_option("--repetitions", sweep.repetitions, "Greedy runs per cap");
  sub_sweep->add_option("--kl-samples", sweep.kl_samples, "Monte Carlo samples per KL direction");
  sweep.greedy.add_to(*sub_sweep);

  HeatmapCmd heatmap;
  auto* sub_heatmap =
    app.add_subcommand("heatmap", "Positional probability grid around a known POI");
  sub_heatmap->add_option("-m,--model", heatmap.model, "Model file")->required();
  sub_heatmap->add_option("--known", heatmap.known, "Known POI lon,lat [default: bbox centre]");
  sub_heatmap->add_option("-o,--output", heatmap.output, "Grid file")->required();
  sub_heatmap->add_option("--format", heatmap.format, "Grid file format")
    ->check(CLI::IsMember({ "csv", "pgm" }));
  heatmap.grid.add_to(*sub_heatmap);

  InferCmd infer;
  auto* sub_infer = app.add_subcommand("infer", "Fuse observations into a location estimate");
  sub_infer->add_option("--manifest", infer.manifest, "CSV: known_id,known_lon,known_lat,model")
    ->required();
  sub_infer->add_option("-o,--output", infer.output, "Fused grid file")->required();
  sub_infer->add_option("--format", infer.format, "Grid file format")
    ->check(CLI::IsMember({ "csv", "pgm" }));
  sub_infer->add_option("--top", infer.top, "Number of most probable cells to print");
  infer.grid.add_to(*sub_infer);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help for the app or a subcommand
    if (e.get_exit_code() == 0)
      return app.exit(e, out, err);
    err << "error[usage]: " << e.what() << '\n';
    return 2;
  }

  set_max_threads(threads);
  try {
    if (*sub_features)
      features.run(out, err);
    else if (*sub_augment)
      augment.run(out);
    else if (*sub_train)
      train.run(out);
    else if (*sub_compare)
      compare.run(out);
    else if (*sub_sweep)
      sweep.run(out);
    else if (*sub_heatmap)
      heatmap.run(out);
    else if (*sub_infer)
      infer.run(out);
  } catch (const UsageError& e) {
    err << "error[usage]: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error[" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error[io]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

} // namespace qsr
