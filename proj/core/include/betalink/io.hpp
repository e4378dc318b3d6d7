#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "betalink/estimator.hpp"
#include "betalink/simulate.hpp"

namespace betalink {

/// Headered numeric table with optional "# key: value" comment lines above
/// the header and an optional leading column of text labels.
struct CsvTable {
  std::vector<std::pair<std::string, std::string>> comments;
  std::string label_header;             ///< empty: no label column
  std::vector<std::string> row_labels;  ///< one per row when label_header is set
  std::vector<std::string> header;      ///< numeric columns
  Matrix values;                        ///< rows × header.size()
};

/// Every number is written with 10 significant digits, so reading an emitted
/// file and writing it again reproduces it byte for byte.
std::string format_number(double v);
std::string write_csv(const CsvTable& table);
void write_csv_file(const std::string& path, const CsvTable& table);
/// A first column holding any non-numeric cell is read as the label column.
CsvTable parse_csv(const std::string& text, const std::string& source = "<memory>");
CsvTable read_csv_file(const std::string& path);

/// Column list of one submodel; derived columns are built from base columns.
struct SubmodelFormula {
  bool intercept = true;
  std::vector<std::string> columns;
  std::vector<std::string> squares;                             ///< x → x²
  std::vector<std::pair<std::string, std::string>> interactions;  ///< (x, z) → x·z; x, z need not be columns themselves
};

struct ModelConfig {
  std::string response;
  std::optional<std::pair<double, double>> range;  ///< model (y − a)/(b − a)
  SubmodelFormula mean;
  SubmodelFormula dispersion;
  LinkFamily mean_link{LinkKind::AoAsymmetric};
  LinkFamily disp_link{LinkKind::AoAsymmetric};
  LambdaMode lambda1 = LambdaMode::estimated();
  LambdaMode lambda2 = LambdaMode::estimated();
  FitOptions fit;
  std::uint64_t seed = 1;
};

ModelConfig parse_model_config(const std::string& json_text);
ModelConfig load_model_config(const std::string& path);

struct Dataset {
  std::vector<std::string> names;
  Matrix columns;       ///< n × names.size()
  Index response = 0;   ///< column of the (transformed) response

  [[nodiscard]] Index n() const { return columns.rows(); }
  [[nodiscard]] Index column_index(const std::string& name) const;  ///< throws InputError if absent
  [[nodiscard]] Vector column(const std::string& name) const { return columns.col(column_index(name)); }
};

/// Reads the CSV, checks every column the config uses, applies the range
/// transform and rejects responses outside (0, 1), naming the rows.
Dataset load_csv(const std::string& path, const ModelConfig& config);
Dataset make_dataset(const CsvTable& table, const ModelConfig& config, const std::string& source = "<memory>");

/// Design matrix of one submodel with its column labels ("x", "x^2", "x:z").
struct Design {
  Matrix matrix;
  std::vector<std::string> labels;
};
Design build_design(const SubmodelFormula& formula, const Dataset& data);

ModelSpec build_spec(const ModelConfig& config, const Dataset& data);
ResponseVector response_of(const Dataset& data);

/// Parameter names in the flat θ layout: "mean:<label>", "dispersion:<label>",
/// "lambda1", "lambda2".
std::vector<std::string> parameter_labels(const ModelConfig& config, const Dataset& data);

/// JSON archive of a fitted model: the estimates with their labels, the
/// likelihood, score, information, covariance and convergence record.
std::string model_to_json(const FittedModel& fit, const std::vector<std::string>& labels);
void save_model(const std::string& path, const FittedModel& fit, const std::vector<std::string>& labels);

/// Rebuilds the fit from an archive; the design comes from config + data and
/// must match the archive's labels.
FittedModel model_from_json(const std::string& json_text, const ModelConfig& config, const Dataset& data);
FittedModel load_model(const std::string& path, const ModelConfig& config, const Dataset& data);

/// A scenario file holds one scenario object or {"scenarios": [...]}.
std::vector<McScenario> parse_scenarios(const std::string& json_text);
std::vector<McScenario> load_scenarios(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace betalink
