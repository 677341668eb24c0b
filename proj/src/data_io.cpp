#include "qsr/data_io.hpp"

#include "qsr/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace qsr {

using json = nlohmann::json;

namespace {

std::string_view
trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::string
lower(std::string_view s)
{
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
  });
  return out;
}

bool
skippable(std::string_view line)
{
  const auto t = trim(line);
  return t.empty() || t.front() == '#';
}

std::ifstream
open_in(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    fail(ErrorKind::io, "cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream
open_out(const std::filesystem::path& path)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    fail(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  return out;
}

void
finish(std::ofstream& out, const std::filesystem::path& path)
{
  out.flush();
  if (!out)
    fail(ErrorKind::io, "write to '" + path.string() + "' failed");
}

// Reads lines, stripping a UTF-8 BOM from the first one.
class LineReader
{
public:
  explicit LineReader(std::istream& in)
    : in_(in)
  {}

  bool next(std::string& line)
  {
    if (!std::getline(in_, line))
      return false;
    ++number_;
    if (number_ == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0)
      line.erase(0, 3);
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    return true;
  }

  std::size_t number() const { return number_; }

private:
  std::istream& in_;
  std::size_t number_ = 0;
};

} // namespace

// ---------------------------------------------------------------------------

std::string
format_double(double v)
{
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::optional<double>
parse_double(std::string_view text)
{
  text = trim(text);
  if (!text.empty() && text.front() == '+')
    text.remove_prefix(1);
  if (text.empty())
    return std::nullopt;
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

std::vector<std::string>
split_csv_line(std::string_view line)
{
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && trim(cur).empty()) {
      cur.clear();
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? cur : std::string(trim(cur)));
      cur.clear();
      was_quoted = false;
    } else if (!(was_quoted && (c == ' ' || c == '\t'))) {
      cur.push_back(c);
    }
  }
  if (quoted)
    throw std::invalid_argument("unterminated quoted field");
  fields.push_back(was_quoted ? cur : std::string(trim(cur)));
  return fields;
}

std::string_view
to_string(CovarianceMode mode)
{
  return mode == CovarianceMode::full ? "full" : "diagonal";
}

CovarianceMode
parse_covariance_mode(std::string_view text)
{
  if (text == "diagonal")
    return CovarianceMode::diagonal;
  if (text == "full")
    return CovarianceMode::full;
  fail(ErrorKind::parse, "unknown covariance mode '" + std::string(text) + "'");
}

std::string_view
to_string(ProjectionMode mode)
{
  return mode == ProjectionMode::raw_degrees ? "raw" : "corrected";
}

ProjectionMode
parse_projection_mode(std::string_view text)
{
  if (text == "corrected")
    return ProjectionMode::equirectangular_corrected;
  if (text == "raw")
    return ProjectionMode::raw_degrees;
  fail(ErrorKind::parse, "unknown projection mode '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Observations

namespace {

constexpr std::array<std::string_view, 7> kObservationColumns = {
  "known_id", "known_lon", "known_lat", "relation", "unknown_id", "unknown_lon", "unknown_lat"
};

enum Column
{
  kKnownId,
  kKnownLon,
  kKnownLat,
  kRelation,
  kUnknownId,
  kUnknownLon,
  kUnknownLat
};

std::vector<std::string>
split_or_throw(std::string_view line, std::size_t number)
{
  try {
    return split_csv_line(line);
  } catch (const std::invalid_argument& e) {
    throw ParseError(number, e.what());
  }
}

} // namespace

std::vector<ObservationRecord>
read_observations(std::istream& in)
{
  LineReader reader(in);
  std::string line;
  std::array<std::size_t, 7> position{};
  std::size_t width = 0;
  bool have_header = false;
  std::vector<ObservationRecord> records;

  while (reader.next(line)) {
    if (skippable(line))
      continue;
    const std::size_t number = reader.number();
    auto fields = split_or_throw(line, number);

    if (!have_header) {
      std::array<bool, 7> seen{};
      for (std::size_t k = 0; k < fields.size(); ++k) {
        const auto it = std::find(kObservationColumns.begin(), kObservationColumns.end(), fields[k]);
        if (it == kObservationColumns.end())
          throw ParseError(number, "unknown header field '" + fields[k] + "'");
        const auto col = static_cast<std::size_t>(it - kObservationColumns.begin());
        if (seen[col])
          throw ParseError(number, "duplicate header field '" + fields[k] + "'");
        seen[col] = true;
        position[col] = k;
      }
      for (std::size_t col = 0; col < seen.size(); ++col)
        if (!seen[col])
          throw ParseError(number,
                           "missing header field '" + std::string(kObservationColumns[col]) + "'");
      width = fields.size();
      have_header = true;
      continue;
    }

    if (fields.size() != width)
      throw ParseError(number,
                       "expected " + std::to_string(width) + " fields, found " +
                         std::to_string(fields.size()));

    auto field = [&](Column c) -> const std::string& { return fields[position[c]]; };
    auto number_at = [&](Column c) {
      const auto v = parse_double(field(c));
      if (!v)
        throw ParseError(number,
                         "column '" + std::string(kObservationColumns[c]) + "': invalid number '" +
                           field(c) + "'");
      return *v;
    };
    auto point_at = [&](Column lon, Column lat) {
      GeoPoint p{ number_at(lon), number_at(lat) };
      try {
        validate(p);
      } catch (const Error& e) {
        throw ParseError(number, "columns '" + std::string(kObservationColumns[lon]) + "', '" +
                                   std::string(kObservationColumns[lat]) + "': " + e.what());
      }
      return p;
    };

    ObservationRecord rec;
    rec.known_id = field(kKnownId);
    rec.relation = lower(field(kRelation));
    rec.unknown_id = field(kUnknownId);
    if (rec.relation.empty())
      throw ParseError(number, "column 'relation': empty relation label");
    rec.known = point_at(kKnownLon, kKnownLat);

    const bool has_lon = !field(kUnknownLon).empty();
    const bool has_lat = !field(kUnknownLat).empty();
    if (has_lon != has_lat)
      throw ParseError(number,
                       "columns 'unknown_lon', 'unknown_lat': give both coordinates or neither");
    if (has_lon)
      rec.unknown = point_at(kUnknownLon, kUnknownLat);
    records.push_back(std::move(rec));
  }
  if (!have_header)
    throw ParseError(reader.number() + 1, "missing header line");
  return records;
}

std::vector<ObservationRecord>
read_observations(const std::filesystem::path& path)
{
  auto in = open_in(path);
  return read_observations(in);
}

// ---------------------------------------------------------------------------
// Features

std::vector<FeatureRow>
read_features(std::istream& in)
{
  LineReader reader(in);
  std::string line;
  bool have_header = false;
  bool with_source = false;
  std::vector<FeatureRow> rows;
  while (reader.next(line)) {
    if (skippable(line))
      continue;
    const std::size_t number = reader.number();
    const auto fields = split_or_throw(line, number);
    if (!have_header) {
      const bool base = fields.size() >= 2 && fields[0] == "distance_km" &&
                        fields[1] == "orientation_deg";
      with_source = fields.size() == 3 && fields[2] == "source";
      if (!base || (fields.size() == 3 && !with_source) || fields.size() > 3)
        throw ParseError(number, "expected header 'distance_km,orientation_deg[,source]'");
      have_header = true;
      continue;
    }
    const std::size_t width = with_source ? 3 : 2;
    if (fields.size() != width)
      throw ParseError(number,
                       "expected " + std::to_string(width) + " fields, found " +
                         std::to_string(fields.size()));
    const auto d = parse_double(fields[0]);
    const auto o = parse_double(fields[1]);
    if (!d || !o)
      throw ParseError(number, "invalid number in '" + line + "'");
    FeatureRow row{ { *d, *o }, FeatureSource::observed };
    if (!row.feature.valid())
      throw ParseError(number, "feature outside distance >= 0, orientation in [0, 360)");
    if (with_source) {
      if (fields[2] == "synthetic")
        row.source = FeatureSource::synthetic;
      else if (fields[2] != "observed")
        throw ParseError(number, "column 'source': expected observed or synthetic");
    }
    rows.push_back(row);
  }
  if (!have_header)
    throw ParseError(reader.number() + 1, "missing header line");
  return rows;
}

std::vector<FeatureRow>
read_features(const std::filesystem::path& path)
{
  auto in = open_in(path);
  return read_features(in);
}

void
write_features(std::ostream& out, std::span<const FeatureRow> rows, bool with_source)
{
  out << "distance_km,orientation_deg" << (with_source ? ",source" : "") << '\n';
  for (const auto& r : rows) {
    out << format_double(r.feature.distance) << ',' << format_double(r.feature.orientation);
    if (with_source)
      out << ',' << (r.source == FeatureSource::synthetic ? "synthetic" : "observed");
    out << '\n';
  }
}

void
write_features(const std::filesystem::path& path, std::span<const FeatureRow> rows, bool with_source)
{
  auto out = open_out(path);
  write_features(out, rows, with_source);
  finish(out, path);
}

// ---------------------------------------------------------------------------
// Models

namespace {

json
to_json(const GreedyConfig& cfg)
{
  return {
    { "max_components", cfg.max_components },
    { "candidates_per_component", cfg.candidates_per_component },
    { "partial_em_iterations", cfg.partial_em_iterations },
    { "covariance_mode", to_string(cfg.covariance_mode) },
    { "seed", cfg.seed },
    { "em",
      { { "max_iterations", cfg.em.max_iterations },
        { "ll_tolerance", cfg.em.ll_tolerance },
        { "variance_floor", cfg.em.variance_floor } } },
  };
}

GreedyConfig
greedy_config_from_json(const json& j)
{
  GreedyConfig cfg;
  cfg.max_components = j.at("max_components").get<int>();
  cfg.candidates_per_component = j.at("candidates_per_component").get<int>();
  cfg.partial_em_iterations = j.at("partial_em_iterations").get<int>();
  cfg.covariance_mode = parse_covariance_mode(j.at("covariance_mode").get<std::string>());
  cfg.seed = j.at("seed").get<std::uint64_t>();
  const auto& em = j.at("em");
  cfg.em.max_iterations = em.at("max_iterations").get<int>();
  cfg.em.ll_tolerance = em.at("ll_tolerance").get<double>();
  cfg.em.variance_floor = em.at("variance_floor").get<double>();
  return cfg;
}

} // namespace

void
write_model(std::ostream& out, const GmmModel& model, const std::optional<TrainingInfo>& info)
{
  json components = json::array();
  for (const auto& c : model.components()) {
    components.push_back({
      { "weight", c.weight },
      { "mean", { c.mean.x, c.mean.y } },
      { "covariance", { { c.cov.xx, c.cov.xy }, { c.cov.xy, c.cov.yy } } },
    });
  }
  json doc = {
    { "format_version", kModelFormatVersion },
    { "relation", model.relation_label() },
    { "covariance_mode", to_string(model.mode()) },
    { "components", components },
  };
  if (info) {
    json trace = json::array();
    for (const auto& s : info->trace.steps)
      trace.push_back(
        { { "components", s.component_count }, { "log_likelihood", s.log_likelihood }, { "accepted", s.accepted } });
    doc["training"] = {
      { "sample_count", info->sample_count },
      { "config", to_json(info->config) },
      { "trace", trace },
    };
  }
  out << doc.dump(2) << '\n';
}

void
write_model(const std::filesystem::path& path,
            const GmmModel& model,
            const std::optional<TrainingInfo>& info)
{
  auto out = open_out(path);
  write_model(out, model, info);
  finish(out, path);
}

ModelFile
read_model_file(std::istream& in)
{
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion)
      fail(ErrorKind::unsupported_version,
           "model format_version " + std::to_string(version) + " is not supported (expected " +
             std::to_string(kModelFormatVersion) + ")");
    const CovarianceMode mode = parse_covariance_mode(doc.at("covariance_mode").get<std::string>());
    std::vector<GaussianComponent> components;
    for (const auto& c : doc.at("components")) {
      const auto& mean = c.at("mean");
      const auto& cov = c.at("covariance");
      if (mean.size() != 2 || cov.size() != 2 || cov[0].size() != 2 || cov[1].size() != 2)
        fail(ErrorKind::parse, "component mean must have 2 entries and covariance 2x2");
      const double off = cov[0][1].get<double>();
      if (cov[1][0].get<double>() != off)
        fail(ErrorKind::parse, "covariance matrix is not symmetric");
      components.push_back({ c.at("weight").get<double>(),
                             { mean[0].get<double>(), mean[1].get<double>() },
                             { cov[0][0].get<double>(), off, cov[1][1].get<double>() } });
    }
    ModelFile file{ GmmModel(std::move(components), mode, doc.at("relation").get<std::string>()),
                    std::nullopt };
    if (doc.contains("training")) {
      const auto& t = doc.at("training");
      TrainingInfo info;
      info.sample_count = t.at("sample_count").get<std::size_t>();
      info.config = greedy_config_from_json(t.at("config"));
      for (const auto& s : t.at("trace"))
        info.trace.steps.push_back({ s.at("components").get<std::size_t>(),
                                     s.at("log_likelihood").get<double>(),
                                     s.at("accepted").get<bool>() });
      file.training = std::move(info);
    }
    return file;
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, std::string("malformed model file: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::invalid_model)
      fail(ErrorKind::parse, std::string("model file holds an invalid model: ") + e.what());
    throw;
  }
}

ModelFile
read_model_file(const std::filesystem::path& path)
{
  auto in = open_in(path);
  try {
    return read_model_file(in);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::io)
      throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

GmmModel
read_model(const std::filesystem::path& path)
{
  return read_model_file(path).model;
}

void
write_trace(const std::filesystem::path& path, const GreedyTrace& trace)
{
  auto out = open_out(path);
  out << "components,log_likelihood,accepted\n";
  for (const auto& s : trace.steps)
    out << s.component_count << ',' << format_double(s.log_likelihood) << ','
        << (s.accepted ? "true" : "false") << '\n';
  finish(out, path);
}

// ---------------------------------------------------------------------------
// Grids

namespace {

constexpr std::string_view kGridTag = "# qsr-grid";
constexpr unsigned kPgmMax = 65535;

void
write_csv(std::ostream& out, const ProbabilityGrid& grid)
{
  const auto& s = grid.spec();
  out << kGridTag << " lon_min=" << format_double(s.bbox.lon_min)
      << " lon_max=" << format_double(s.bbox.lon_max)
      << " lat_min=" << format_double(s.bbox.lat_min)
      << " lat_max=" << format_double(s.bbox.lat_max) << " nx=" << s.nx << " ny=" << s.ny
      << " projection=" << to_string(s.projection.mode)
      << " ref_lat=" << format_double(s.projection.ref_lat) << '\n';
  const auto& v = grid.values();
  for (std::size_t r = 0; r < s.ny; ++r) {
    for (std::size_t c = 0; c < s.nx; ++c) {
      if (c)
        out << ',';
      out << format_double(v[r * s.nx + c]);
    }
    out << '\n';
  }
}

void
write_pgm(std::ostream& out, const ProbabilityGrid& grid)
{
  const auto& s = grid.spec();
  const auto& v = grid.values();
  const double hi = *std::max_element(v.begin(), v.end());
  out << "P2\n" << s.nx << ' ' << s.ny << '\n' << kPgmMax << '\n';
  std::size_t line_len = 0;
  for (double p : v) {
    const auto level =
      hi > 0.0 ? static_cast<unsigned>(std::lround(p / hi * kPgmMax)) : 0u;
    const std::string tok = std::to_string(level);
    // netpbm asks for lines of at most 70 characters
    if (line_len > 0 && line_len + 1 + tok.size() > 70) {
      out << '\n';
      line_len = 0;
    }
    if (line_len > 0) {
      out << ' ';
      ++line_len;
    }
    out << tok;
    line_len += tok.size();
  }
  out << '\n';
}

} // namespace

void
export_grid(std::ostream& out, const ProbabilityGrid& grid, GridFormat format)
{
  if (format == GridFormat::csv)
    write_csv(out, grid);
  else
    write_pgm(out, grid);
}

void
export_grid(const ProbabilityGrid& grid, const std::filesystem::path& path, GridFormat format)
{
  auto out = open_out(path);
  export_grid(out, grid, format);
  finish(out, path);
}

ProbabilityGrid
read_grid_csv(std::istream& in)
{
  LineReader reader(in);
  std::string line;
  if (!reader.next(line) || line.rfind(kGridTag, 0) != 0)
    throw ParseError(1, "expected '" + std::string(kGridTag) + "' header");

  std::map<std::string, std::string, std::less<>> keys;
  std::istringstream tokens(line.substr(kGridTag.size()));
  std::string tok;
  while (tokens >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos)
      throw ParseError(1, "malformed header token '" + tok + "'");
    keys[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  auto number = [&](const char* key) {
    const auto it = keys.find(key);
    if (it == keys.end())
      throw ParseError(1, std::string("header lacks '") + key + "'");
    const auto v = parse_double(it->second);
    if (!v)
      throw ParseError(1, std::string("header '") + key + "' is not a number");
    return *v;
  };
  auto count = [&](const char* key) {
    const double v = number(key);
    if (v < 1 || v != std::floor(v))
      throw ParseError(1, std::string("header '") + key + "' must be a positive integer");
    return static_cast<std::size_t>(v);
  };

  GridSpec spec;
  spec.bbox = { number("lon_min"), number("lon_max"), number("lat_min"), number("lat_max") };
  spec.nx = count("nx");
  spec.ny = count("ny");
  if (keys.contains("projection")) {
    try {
      spec.projection.mode = parse_projection_mode(keys["projection"]);
    } catch (const Error& e) {
      throw ParseError(1, e.what());
    }
  }
  if (keys.contains("ref_lat"))
    spec.projection.ref_lat = number("ref_lat");

  std::vector<double> values;
  values.reserve(spec.cell_count());
  std::size_t rows = 0;
  while (reader.next(line)) {
    if (trim(line).empty())
      continue;
    const auto fields = split_or_throw(line, reader.number());
    if (fields.size() != spec.nx)
      throw ParseError(reader.number(),
                       "expected " + std::to_string(spec.nx) + " values, found " +
                         std::to_string(fields.size()));
    for (const auto& f : fields) {
      const auto v = parse_double(f);
      if (!v || *v < 0.0)
        throw ParseError(reader.number(), "invalid probability '" + f + "'");
      values.push_back(*v);
    }
    ++rows;
  }
  if (rows != spec.ny)
    throw ParseError(reader.number(),
                     "expected " + std::to_string(spec.ny) + " rows, found " + std::to_string(rows));
  return ProbabilityGrid(spec, std::move(values));
}

ProbabilityGrid
read_grid_csv(const std::filesystem::path& path)
{
  auto in = open_in(path);
  return read_grid_csv(in);
}

} // namespace qsr
