#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "distreg/core.hpp"

namespace distreg {

enum class ColumnType {
  kNumber,
  // true/false, t/f, yes/no, 1/0 (case-insensitive) -> 1/0
  kBool,
  // Date "MM/DD/YYYY[ time]" or "YYYY-MM-DD[...]" -> weekday, Sunday = 1 ... Saturday = 7
  kWeekday,
  // Arbitrary label -> integer code in order of first appearance (0, 1, ...)
  kCategory,
};

struct ColumnSpec {
  std::string name;
  ColumnType type = ColumnType::kNumber;
  // Rows whose required field fails to parse are dropped. Optional fields
  // become NaN instead.
  bool required = true;
};

struct CsvSchema {
  std::vector<ColumnSpec> columns;
};

// Typed columns of a parsed CSV. Only the schema's columns are kept.
struct Table {
  std::map<std::string, std::vector<double>> columns;
  std::size_t rows = 0;
  std::size_t dropped = 0;
  std::vector<std::string> warnings;

  const std::vector<double>& column(const std::string& name) const;
  bool has(const std::string& name) const { return columns.count(name) != 0; }
};

// RFC-4180 with a header row. Throws DataError on an empty input, a schema
// column missing from the header or an unterminated quote.
Table parse_csv(std::istream& in, const CsvSchema& schema);
Table load_csv(const std::string& path, const CsvSchema& schema);

// Raw records (header first) without typing; used by the CLI readers.
std::vector<std::vector<std::string>> read_csv_records(std::istream& in);

enum class Aggregate { kCount, kMean };
enum class Transform { kNone, kLog, kLog1p };

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;
};

// Bins (row_col, col_col) into a rows x cols grid. Bins are half-open
// [edge_k, edge_{k+1}) with the upper bound put in the last bin; bounds
// default to the data range and rows outside explicit bounds are skipped.
struct GridAggSpec {
  std::string row_col;
  std::string col_col;
  std::size_t rows = 100;
  std::size_t cols = 100;
  Aggregate aggregate = Aggregate::kCount;
  std::string value_col;  // kMean only
  Transform transform = Transform::kLog;
  bool drop_empty = true;
  std::optional<Bounds> row_bounds;
  std::optional<Bounds> col_bounds;
  // Averaged per cell and appended to the covariates after the two bin
  // indices. Empty means no covariates.
  std::vector<std::string> covariates;

  void validate() const;
};

struct GridCell {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t count = 0;
};

struct AggregatedSample {
  Sample sample;               // units in lexicographic (row, col) order
  std::vector<GridCell> cells;  // one per unit
  std::size_t skipped = 0;     // rows outside the bounds
};

AggregatedSample grid_aggregate(const Table& table, const GridAggSpec& spec);

// One unit per distinct (row_col, col_col) pair with the mean of value_col,
// ordered lexicographically by the coordinates. Covariates are
// [row coordinate, col coordinate, per-site means...].
struct SiteAggSpec {
  std::string row_col;
  std::string col_col;
  std::string value_col;
  std::optional<Bounds> row_bounds;
  std::optional<Bounds> col_bounds;
  std::vector<std::string> covariates;
};

AggregatedSample site_aggregate(const Table& table, const SiteAggSpec& spec);

double apply_transform(double v, Transform t);

// Breaks exact ties by deterministic offsets of at most scale (default
// 1e-9 * range), kept below half the smallest gap between distinct values
// so their order is preserved. Tie-free input is returned unchanged.
// Throws DataError for a constant vector.
std::vector<double> jitter_ties(const std::vector<double>& y, std::uint64_t seed,
                                std::optional<double> scale = std::nullopt);

struct DatasetRecipe {
  std::string name;
  CsvSchema schema;
  std::optional<GridAggSpec> grid;
  std::optional<SiteAggSpec> sites;
  // Evaluation points for the resplit study.
  ThresholdGrid eval_grid;
  std::vector<std::size_t> hidden;
};

// "chicago-crime", "california-housing", "ozone". Throws ConfigError.
DatasetRecipe dataset_recipe(std::string_view name);
std::vector<std::string> dataset_names();

// Loads the file and applies the recipe's aggregation. Warnings are
// appended to *warnings when given.
AggregatedSample load_dataset(const DatasetRecipe& recipe, const std::string& path,
                              std::vector<std::string>* warnings = nullptr);

}  // namespace distreg
