#include "betalink/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace betalink {
namespace {

using Json = nlohmann::json;

std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  std::string out(s.substr(a, b - a));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Header, data rows (with their 1-based file line numbers) and comments.
struct RawTable {
  std::vector<std::pair<std::string, std::string>> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;
};

RawTable parse_raw(const std::string& text, const std::string& source) {
  RawTable raw;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line[0] == '#') {
      if (!raw.header.empty()) continue;
      const std::string body = trim(std::string_view(line).substr(1));
      const std::size_t colon = body.find(':');
      if (colon == std::string::npos) {
        raw.comments.emplace_back(body, "");
      } else {
        raw.comments.emplace_back(trim(std::string_view(body).substr(0, colon)),
                                  trim(std::string_view(body).substr(colon + 1)));
      }
      continue;
    }
    auto fields = split_fields(line);
    if (raw.header.empty()) {
      raw.header = std::move(fields);
      std::set<std::string> seen;
      for (const auto& h : raw.header) {
        if (h.empty()) throw InputError(source + ": empty column name in header");
        if (!seen.insert(h).second) throw InputError(source + ": duplicate column '" + h + "'");
      }
      continue;
    }
    if (fields.size() != raw.header.size()) {
      throw InputError(source + ": line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                       " fields, header has " + std::to_string(raw.header.size()));
    }
    raw.rows.push_back(std::move(fields));
    raw.lines.push_back(lineno);
  }
  if (raw.header.empty()) throw InputError(source + ": no header row");
  return raw;
}

// --- JSON helpers -----------------------------------------------------------

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw InputError(std::string("field '") + key + "': " + e.what());
  }
}

template <class T>
T require(const Json& j, const char* key) {
  if (!j.contains(key)) throw InputError(std::string("missing required field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw InputError(std::string("field '") + key + "': " + e.what());
  }
}

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(std::string("invalid JSON: ") + e.what());
  }
}

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())); }

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(to_std(m.row(i).transpose()));
  return rows;
}

LambdaMode lambda_mode(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return LambdaMode::estimated();
  const Json& v = j.at(key);
  if (v.is_string()) {
    if (v.get<std::string>() == "free") return LambdaMode::estimated();
    throw InputError(std::string("field '") + key + "' must be \"free\" or a number");
  }
  if (v.is_number()) return LambdaMode::fixed(v.get<double>());
  throw InputError(std::string("field '") + key + "' must be \"free\" or a number");
}

LambdaStart lambda_start(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return LambdaStart::by_default();
  const Json& v = j.at(key);
  if (v.is_number()) return LambdaStart::explicit_value(v.get<double>());
  if (v.is_string() && v.get<std::string>() == "grid") return LambdaStart::grid();
  if (v.is_string() && v.get<std::string>() == "default") return LambdaStart::by_default();
  throw InputError(std::string("field '") + key + "' must be \"default\", \"grid\" or a number");
}

LinkFamily link_of(const Json& j, const char* key, LinkFamily fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return LinkFamily::from_name(require<std::string>(j, key));
  } catch (const DomainError& e) {
    throw InputError(e.what());
  }
}

SubmodelFormula formula_of(const Json& j, const char* key) {
  SubmodelFormula f;
  if (!j.contains(key)) return f;
  const Json& s = j.at(key);
  if (!s.is_object()) throw InputError(std::string("field '") + key + "' must be an object");
  f.intercept = get_or<bool>(s, "intercept", true);
  f.columns = get_or<std::vector<std::string>>(s, "columns", {});
  f.squares = get_or<std::vector<std::string>>(s, "squares", {});
  for (const auto& pair : get_or<std::vector<std::vector<std::string>>>(s, "interactions", {})) {
    if (pair.size() != 2) throw InputError(std::string(key) + ": each interaction names exactly two columns");
    f.interactions.emplace_back(pair[0], pair[1]);
  }
  if (!f.intercept && f.columns.empty() && f.squares.empty() && f.interactions.empty())
    throw InputError(std::string(key) + ": submodel has no columns");
  return f;
}

std::string submodel_prefix(bool mean) { return mean ? "mean:" : "dispersion:"; }

}  // namespace

// --- CSV ------------------------------------------------------------------

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string write_csv(const CsvTable& table) {
  if (table.values.cols() != static_cast<Index>(table.header.size()))
    throw InputError("write_csv: header and value widths differ");
  const bool labelled = !table.label_header.empty();
  if (labelled && static_cast<Index>(table.row_labels.size()) != table.values.rows())
    throw InputError("write_csv: one row label per row is required");
  std::string out;
  for (const auto& [key, value] : table.comments) out += "# " + key + (value.empty() ? "" : ": " + value) + "\n";
  std::vector<std::string> header = table.header;
  if (labelled) header.insert(header.begin(), table.label_header);
  for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
  out += "\n";
  for (Index r = 0; r < table.values.rows(); ++r) {
    if (labelled) out += table.row_labels[r] + (table.values.cols() ? "," : "");
    for (Index c = 0; c < table.values.cols(); ++c) out += (c ? "," : "") + format_number(table.values(r, c));
    out += "\n";
  }
  return out;
}

void write_csv_file(const std::string& path, const CsvTable& table) { write_text_file(path, write_csv(table)); }

CsvTable parse_csv(const std::string& text, const std::string& source) {
  const RawTable raw = parse_raw(text, source);
  CsvTable t;
  t.comments = raw.comments;
  const bool labelled = std::any_of(raw.rows.begin(), raw.rows.end(),
                                    [](const auto& row) { return !parse_double(row[0]).has_value(); });
  const std::size_t first = labelled ? 1 : 0;
  if (labelled) t.label_header = raw.header[0];
  t.header.assign(raw.header.begin() + static_cast<std::ptrdiff_t>(first), raw.header.end());
  t.values.resize(static_cast<Index>(raw.rows.size()), static_cast<Index>(t.header.size()));
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    if (labelled) t.row_labels.push_back(raw.rows[r][0]);
    for (std::size_t c = first; c < raw.header.size(); ++c) {
      const auto v = parse_double(raw.rows[r][c]);
      if (!v) {
        throw InputError(source + ": line " + std::to_string(raw.lines[r]) + ", column '" + raw.header[c] +
                         "': '" + raw.rows[r][c] + "' is not a number");
      }
      t.values(static_cast<Index>(r), static_cast<Index>(c - first)) = *v;
    }
  }
  return t;
}

CsvTable read_csv_file(const std::string& path) { return parse_csv(read_text_file(path), path); }

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
  if (!out) throw InputError("error writing '" + path + "'");
}

// --- configuration ----------------------------------------------------------

ModelConfig parse_model_config(const std::string& json_text) {
  const Json j = parse_json(json_text);
  if (!j.is_object()) throw InputError("model config must be a JSON object");
  ModelConfig c;
  c.response = require<std::string>(j, "response");
  if (j.contains("range") && !j.at("range").is_null()) {
    const auto r = require<std::vector<double>>(j, "range");
    if (r.size() != 2 || !(r[0] < r[1])) throw InputError("'range' must be [a, b] with a < b");
    c.range = std::make_pair(r[0], r[1]);
  }
  c.mean = formula_of(j, "mean");
  c.dispersion = formula_of(j, "dispersion");
  c.mean_link = link_of(j, "mean_link", c.mean_link);
  c.disp_link = link_of(j, "dispersion_link", c.disp_link);
  c.lambda1 = lambda_mode(j, "lambda1");
  c.lambda2 = lambda_mode(j, "lambda2");
  if (!c.lambda1.free && !c.mean_link.admissible_shape(c.lambda1.value))
    throw InputError("fixed lambda1 is inadmissible for the mean link");
  if (!c.lambda2.free && !c.disp_link.admissible_shape(c.lambda2.value))
    throw InputError("fixed lambda2 is inadmissible for the dispersion link");
  if (j.contains("fit")) {
    const Json& f = j.at("fit");
    c.fit.max_iterations = get_or<int>(f, "max_iterations", c.fit.max_iterations);
    c.fit.gradient_tolerance = get_or<double>(f, "gradient_tolerance", c.fit.gradient_tolerance);
    c.fit.multistart = get_or<bool>(f, "multistart", c.fit.multistart);
    c.fit.polish_steps = get_or<int>(f, "polish_steps", c.fit.polish_steps);
    c.fit.lambda1_start = lambda_start(f, "lambda1_start");
    c.fit.lambda2_start = lambda_start(f, "lambda2_start");
    if (c.fit.max_iterations <= 0 || !(c.fit.gradient_tolerance > 0.0))
      throw InputError("fit: max_iterations and gradient_tolerance must be positive");
  }
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  return c;
}

ModelConfig load_model_config(const std::string& path) {
  try {
    return parse_model_config(read_text_file(path));
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

// --- data -------------------------------------------------------------------

Index Dataset::column_index(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InputError("no column named '" + name + "'");
  return static_cast<Index>(it - names.begin());
}

namespace {

std::set<std::string> used_columns(const ModelConfig& config) {
  std::set<std::string> used{config.response};
  for (const auto* f : {&config.mean, &config.dispersion}) {
    used.insert(f->columns.begin(), f->columns.end());
    used.insert(f->squares.begin(), f->squares.end());
    for (const auto& [a, b] : f->interactions) {
      used.insert(a);
      used.insert(b);
    }
  }
  return used;
}

Dataset dataset_from_raw(const RawTable& raw, const ModelConfig& config, const std::string& source) {
  Dataset d;
  d.names = raw.header;
  const std::set<std::string> used = used_columns(config);
  for (const auto& name : used) {
    if (std::find(d.names.begin(), d.names.end(), name) == d.names.end())
      throw InputError(source + ": no column named '" + name + "'");
  }
  const auto n = static_cast<Index>(raw.rows.size());
  if (n == 0) throw InputError(source + ": no data rows");
  d.columns.resize(n, static_cast<Index>(d.names.size()));
  for (std::size_t c = 0; c < d.names.size(); ++c) {
    const bool needed = used.count(d.names[c]) > 0;
    for (Index r = 0; r < n; ++r) {
      const std::string& cell = raw.rows[r][c];
      const auto v = parse_double(cell);
      if (!v && needed) {
        throw InputError(source + ": row " + std::to_string(r + 1) + " (line " + std::to_string(raw.lines[r]) +
                         "), column '" + d.names[c] + "': " +
                         (cell.empty() ? std::string("missing value") : "'" + cell + "' is not a number"));
      }
      d.columns(r, static_cast<Index>(c)) = v ? *v : std::numeric_limits<double>::quiet_NaN();
    }
  }
  d.response = d.column_index(config.response);
  if (config.range) {
    const auto [a, b] = *config.range;
    d.columns.col(d.response) = (d.columns.col(d.response).array() - a) / (b - a);
  }
  std::vector<Index> bad;
  for (Index r = 0; r < n; ++r) {
    const double y = d.columns(r, d.response);
    if (!(y > 0.0 && y < 1.0)) bad.push_back(r);
  }
  if (!bad.empty()) {
    std::string rows;
    for (std::size_t k = 0; k < bad.size() && k < 20; ++k) {
      rows += (k ? ", " : "") + std::to_string(bad[k] + 1) + " (line " + std::to_string(raw.lines[bad[k]]) + ")";
    }
    if (bad.size() > 20) rows += ", ...";
    throw InputError(source + ": response '" + config.response + "' must lie strictly inside (0, 1)" +
                     (config.range ? " after the range transform" : "") + "; offending rows: " + rows);
  }
  return d;
}

}  // namespace

Dataset make_dataset(const CsvTable& table, const ModelConfig& config, const std::string& source) {
  RawTable raw;
  raw.header = table.header;
  if (!table.label_header.empty()) raw.header.insert(raw.header.begin(), table.label_header);
  for (Index r = 0; r < table.values.rows(); ++r) {
    std::vector<std::string> row;
    if (!table.label_header.empty()) row.push_back(table.row_labels[r]);
    for (Index c = 0; c < table.values.cols(); ++c) row.push_back(format_number(table.values(r, c)));
    raw.rows.push_back(std::move(row));
    raw.lines.push_back(static_cast<int>(r) + 2);
  }
  return dataset_from_raw(raw, config, source);
}

Dataset load_csv(const std::string& path, const ModelConfig& config) {
  return dataset_from_raw(parse_raw(read_text_file(path), path), config, path);
}

Design build_design(const SubmodelFormula& formula, const Dataset& data) {
  Design d;
  std::vector<Vector> cols;
  if (formula.intercept) {
    cols.push_back(Vector::Ones(data.n()));
    d.labels.push_back("(intercept)");
  }
  for (const auto& c : formula.columns) {
    cols.push_back(data.column(c));
    d.labels.push_back(c);
  }
  for (const auto& c : formula.squares) {
    cols.push_back(data.column(c).array().square());
    d.labels.push_back(c + "^2");
  }
  for (const auto& [a, b] : formula.interactions) {
    cols.push_back(data.column(a).cwiseProduct(data.column(b)));
    d.labels.push_back(a + ":" + b);
  }
  d.matrix.resize(data.n(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) d.matrix.col(static_cast<Index>(k)) = cols[k];
  return d;
}

ModelSpec build_spec(const ModelConfig& config, const Dataset& data) {
  return ModelSpec(build_design(config.mean, data).matrix, build_design(config.dispersion, data).matrix,
                   config.mean_link, config.disp_link, config.lambda1, config.lambda2);
}

ResponseVector response_of(const Dataset& data) { return ResponseVector(data.columns.col(data.response)); }

std::vector<std::string> parameter_labels(const ModelConfig& config, const Dataset& data) {
  std::vector<std::string> labels;
  for (const auto& l : build_design(config.mean, data).labels) labels.push_back(submodel_prefix(true) + l);
  for (const auto& l : build_design(config.dispersion, data).labels) labels.push_back(submodel_prefix(false) + l);
  if (config.mean_link.has_shape_parameter() && config.lambda1.free) labels.push_back("lambda1");
  if (config.disp_link.has_shape_parameter() && config.lambda2.free) labels.push_back("lambda2");
  return labels;
}

// --- model archive ----------------------------------------------------------

std::string model_to_json(const FittedModel& fit, const std::vector<std::string>& labels) {
  const Vector theta = fit.theta_hat.pack(fit.spec);
  if (static_cast<Index>(labels.size()) != theta.size()) throw InputError("model_to_json: label count differs from q");
  const Vector se = fit.std_errors();
  Json params = Json::array();
  for (Index i = 0; i < theta.size(); ++i) {
    params.push_back({{"name", labels[i]}, {"estimate", theta[i]}, {"std_error", se[i]}});
  }
  Json j = {
      {"format", "betalink-model"},
      {"version", 1},
      {"mean_link", std::string(fit.spec.mean_link().name())},
      {"dispersion_link", std::string(fit.spec.disp_link().name())},
      {"lambda1", fit.theta_hat.lambda1},
      {"lambda2", fit.theta_hat.lambda2},
      {"lambda1_free", fit.spec.lambda1_free()},
      {"lambda2_free", fit.spec.lambda2_free()},
      {"n", fit.n()},
      {"q", fit.num_params()},
      {"parameters", params},
      {"loglik", fit.loglik},
      {"converged", fit.converged},
      {"iterations", fit.iterations},
      {"singular_fisher", fit.singular_fisher},
      {"start", {{"lambda1", fit.start_used.lambda1}, {"lambda2", fit.start_used.lambda2}, {"attempt", fit.start_used.attempt}}},
      {"score", to_std(fit.score)},
      {"fisher", matrix_json(fit.fisher)},
      {"cov", matrix_json(fit.cov)},
      {"trace", fit.trace},
  };
  return j.dump(2) + "\n";
}

void save_model(const std::string& path, const FittedModel& fit, const std::vector<std::string>& labels) {
  write_text_file(path, model_to_json(fit, labels));
}

FittedModel model_from_json(const std::string& json_text, const ModelConfig& config, const Dataset& data) {
  const Json j = parse_json(json_text);
  if (get_or<std::string>(j, "format", "") != "betalink-model") throw InputError("not a betalink model archive");
  const ModelSpec spec = build_spec(config, data);
  if (LinkFamily::from_name(require<std::string>(j, "mean_link")) != spec.mean_link() ||
      LinkFamily::from_name(require<std::string>(j, "dispersion_link")) != spec.disp_link()) {
    throw InputError("model archive links differ from the configuration");
  }
  const auto labels = parameter_labels(config, data);
  const Json& params = j.at("parameters");
  if (params.size() != labels.size()) throw InputError("model archive has a different number of parameters");
  Vector flat(static_cast<Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto name = require<std::string>(params[i], "name");
    if (name != labels[i]) throw InputError("model archive parameter '" + name + "' where '" + labels[i] + "' expected");
    flat[static_cast<Index>(i)] = require<double>(params[i], "estimate");
  }
  ParamVector theta = ParamVector::unpack(spec, flat);
  if (!spec.lambda1_free()) theta.lambda1 = require<double>(j, "lambda1");
  if (!spec.lambda2_free()) theta.lambda2 = require<double>(j, "lambda2");
  const ResponseVector y = response_of(data);
  FittedModel fit = evaluate_model(spec, y, theta, get_or<bool>(j, "converged", true));
  fit.iterations = get_or<int>(j, "iterations", 0);
  if (j.contains("trace")) fit.trace = require<std::vector<double>>(j, "trace");
  return fit;
}

FittedModel load_model(const std::string& path, const ModelConfig& config, const Dataset& data) {
  return model_from_json(read_text_file(path), config, data);
}

// --- scenarios ----------------------------------------------------------------

std::vector<McScenario> parse_scenarios(const std::string& json_text) {
  const Json root = parse_json(json_text);
  std::vector<Json> items;
  if (root.is_object() && root.contains("scenarios")) {
    for (const auto& s : root.at("scenarios")) items.push_back(s);
  } else if (root.is_object()) {
    items.push_back(root);
  } else {
    throw InputError("scenario file must be an object or {\"scenarios\": [...]}");
  }
  std::vector<McScenario> out;
  for (std::size_t k = 0; k < items.size(); ++k) {
    const Json& s = items[k];
    const auto name = get_or<std::string>(s, "name", "scenario" + std::to_string(k + 1));
    const auto n = get_or<Index>(s, "n", 100);
    const auto reps = get_or<int>(s, "replications", 1000);
    if (n < 2 || reps < 1) throw InputError(name + ": n must be at least 2 and replications at least 1");
    McScenario sc = McScenario::build(
        name, link_of(s, "mean_link", LinkFamily(LinkKind::AoAsymmetric)),
        link_of(s, "dispersion_link", LinkFamily(LinkKind::AoAsymmetric)),
        to_vector(require<std::vector<double>>(s, "beta")), to_vector(require<std::vector<double>>(s, "gamma")),
        get_or<double>(s, "lambda1", 1.0), get_or<double>(s, "lambda2", 1.0), n, reps,
        get_or<std::uint64_t>(s, "seed", 1));
    sc.estimate_lambda1 = get_or<bool>(s, "estimate_lambda1", true);
    sc.estimate_lambda2 = get_or<bool>(s, "estimate_lambda2", true);
    out.push_back(std::move(sc));
  }
  return out;
}

std::vector<McScenario> load_scenarios(const std::string& path) {
  try {
    return parse_scenarios(read_text_file(path));
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

}  // namespace betalink
