#include "distreg/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace distreg {

const std::vector<double>& Table::column(const std::string& name) const {
  auto it = columns.find(name);
  if (it == columns.end()) throw DataError("table has no column '" + name + "'");
  return it->second;
}

std::vector<std::vector<std::string>> read_csv_records(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  bool quoted_field = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
    quoted_field = false;
  };
  auto end_record = [&] {
    end_field();
    // skip blank lines
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };

  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started) {
          in_quotes = true;
          quoted_field = true;
          field_started = true;
        } else {
          field.push_back(c);
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (in.peek() == '\n') in.get(c);
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw DataError("csv: unterminated quoted field");
  if (field_started || quoted_field || !record.empty()) end_record();
  return records;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<double> parse_bool(std::string_view s) {
  const std::string v = lower(trim(s));
  if (v == "true" || v == "t" || v == "yes" || v == "1") return 1.0;
  if (v == "false" || v == "f" || v == "no" || v == "0") return 0.0;
  return std::nullopt;
}

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> parse_weekday(std::string_view s) {
  s = trim(s);
  const std::string_view date = s.substr(0, s.find_first_of(" T"));
  std::optional<int> y, m, d;
  if (date.size() == 10 && date[4] == '-' && date[7] == '-') {
    y = parse_int(date.substr(0, 4));
    m = parse_int(date.substr(5, 2));
    d = parse_int(date.substr(8, 2));
  } else if (date.size() == 10 && date[2] == '/' && date[5] == '/') {
    m = parse_int(date.substr(0, 2));
    d = parse_int(date.substr(3, 2));
    y = parse_int(date.substr(6, 4));
  }
  if (!y || !m || !d) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{*y},
                                        std::chrono::month{static_cast<unsigned>(*m)},
                                        std::chrono::day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;
  const std::chrono::weekday wd{std::chrono::sys_days{ymd}};
  return static_cast<double>(wd.c_encoding() + 1);
}

}  // namespace

Table parse_csv(std::istream& in, const CsvSchema& schema) {
  const auto records = read_csv_records(in);
  if (records.empty()) throw DataError("csv: empty file");
  const auto& header = records.front();

  std::vector<std::size_t> pos;
  for (const auto& col : schema.columns) {
    std::size_t j = 0;
    while (j < header.size() && std::string(trim(header[j])) != col.name) ++j;
    if (j == header.size()) throw DataError("csv: missing column '" + col.name + "'");
    pos.push_back(j);
  }

  Table table;
  for (const auto& col : schema.columns) table.columns[col.name];
  std::vector<std::map<std::string, double>> codes(schema.columns.size());
  std::vector<double> values(schema.columns.size());

  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    bool ok = true;
    for (std::size_t c = 0; c < schema.columns.size() && ok; ++c) {
      const auto& spec = schema.columns[c];
      std::optional<double> v;
      if (pos[c] < rec.size()) {
        const std::string_view field = rec[pos[c]];
        switch (spec.type) {
          case ColumnType::kNumber:
            v = parse_number(field);
            break;
          case ColumnType::kBool:
            v = parse_bool(field);
            break;
          case ColumnType::kWeekday:
            v = parse_weekday(field);
            break;
          case ColumnType::kCategory: {
            const std::string label(trim(field));
            if (label.empty()) break;
            auto [it, inserted] =
                codes[c].emplace(label, static_cast<double>(codes[c].size()));
            v = it->second;
            break;
          }
        }
      }
      if (v) {
        values[c] = *v;
      } else if (spec.required) {
        ok = false;
      } else {
        values[c] = std::numeric_limits<double>::quiet_NaN();
      }
    }
    if (!ok) {
      ++table.dropped;
      continue;
    }
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      table.columns[schema.columns[c].name].push_back(values[c]);
    }
    ++table.rows;
  }
  if (records.size() == 1) table.warnings.push_back("csv: header only, no data rows");
  if (table.dropped > 0) {
    table.warnings.push_back("csv: dropped " + std::to_string(table.dropped) +
                             " row(s) with unparseable required fields");
  }
  return table;
}

Table load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_csv(in, schema);
}

double apply_transform(double v, Transform t) {
  switch (t) {
    case Transform::kLog:
      return std::log(v);
    case Transform::kLog1p:
      return std::log1p(v);
    case Transform::kNone:
      break;
  }
  return v;
}

void GridAggSpec::validate() const {
  if (rows < 1 || cols < 1) throw ConfigError("grid dimensions must be >= 1");
  if (row_col.empty() || col_col.empty()) throw ConfigError("grid coordinate columns not set");
  if (aggregate == Aggregate::kMean && value_col.empty()) {
    throw ConfigError("mean aggregation needs a value column");
  }
  if (!drop_empty && aggregate == Aggregate::kMean) {
    throw ConfigError("empty cells have no mean; enable drop_empty");
  }
  if (!drop_empty && transform == Transform::kLog) {
    throw ConfigError("log of an empty cell count is undefined; use log1p or drop_empty");
  }
  for (const auto& b : {row_bounds, col_bounds}) {
    if (b && !(b->lo < b->hi)) throw ConfigError("grid bounds need lo < hi");
  }
}

namespace {

Bounds data_bounds(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {*lo, *hi};
}

bool inside(double v, const std::optional<Bounds>& b) {
  return !b || (v >= b->lo && v <= b->hi);
}

std::size_t bin_of(double v, const Bounds& b, std::size_t bins) {
  if (!(b.hi > b.lo)) return 0;
  if (v >= b.hi) return bins - 1;
  const auto k = static_cast<std::size_t>(std::floor((v - b.lo) / (b.hi - b.lo) *
                                                     static_cast<double>(bins)));
  return std::min(k, bins - 1);
}

// Order-independent mean: values are summed in sorted order. NaNs are
// ignored; all-NaN gives NaN.
double stable_mean(std::vector<double> v) {
  std::erase_if(v, [](double x) { return std::isnan(x); });
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

struct CellAccum {
  std::size_t count = 0;
  std::vector<double> values;
  std::vector<std::vector<double>> covs;
};

}  // namespace

AggregatedSample grid_aggregate(const Table& table, const GridAggSpec& spec) {
  spec.validate();
  const auto& rc = table.column(spec.row_col);
  const auto& cc = table.column(spec.col_col);
  const std::vector<double>* val = spec.aggregate == Aggregate::kMean ? &table.column(spec.value_col)
                                                                      : nullptr;
  std::vector<const std::vector<double>*> covs;
  for (const auto& name : spec.covariates) covs.push_back(&table.column(name));

  AggregatedSample out;
  std::vector<std::size_t> keep;
  std::vector<double> rk, ck;
  for (std::size_t i = 0; i < table.rows; ++i) {
    if (std::isnan(rc[i]) || std::isnan(cc[i]) || !inside(rc[i], spec.row_bounds) ||
        !inside(cc[i], spec.col_bounds)) {
      ++out.skipped;
      continue;
    }
    keep.push_back(i);
    rk.push_back(rc[i]);
    ck.push_back(cc[i]);
  }
  const Bounds rb = spec.row_bounds.value_or(data_bounds(rk));
  const Bounds cb = spec.col_bounds.value_or(data_bounds(ck));

  std::map<std::pair<std::size_t, std::size_t>, CellAccum> cells;
  for (std::size_t i : keep) {
    auto& cell = cells[{bin_of(rc[i], rb, spec.rows), bin_of(cc[i], cb, spec.cols)}];
    ++cell.count;
    if (val) cell.values.push_back((*val)[i]);
    cell.covs.resize(covs.size());
    for (std::size_t j = 0; j < covs.size(); ++j) cell.covs[j].push_back((*covs[j])[i]);
  }
  if (!spec.drop_empty) {
    for (std::size_t r = 0; r < spec.rows; ++r) {
      for (std::size_t c = 0; c < spec.cols; ++c) cells[{r, c}];
    }
  }

  std::vector<std::vector<double>> xrows;
  for (auto& [key, cell] : cells) {
    double y = 0.0;
    if (spec.aggregate == Aggregate::kCount) {
      y = static_cast<double>(cell.count);
    } else {
      y = stable_mean(cell.values);
      if (std::isnan(y)) continue;
    }
    y = apply_transform(y, spec.transform);
    if (!std::isfinite(y)) continue;
    out.sample.y.push_back(y);
    out.cells.push_back({key.first, key.second, cell.count});
    if (!covs.empty()) {
      std::vector<double> x{static_cast<double>(key.first), static_cast<double>(key.second)};
      for (std::size_t j = 0; j < covs.size(); ++j) {
        x.push_back(cell.covs.empty() ? 0.0 : stable_mean(cell.covs[j]));
      }
      xrows.push_back(std::move(x));
    }
  }
  if (out.sample.y.empty()) throw DataError("grid aggregation produced no cells");
  if (!covs.empty()) {
    Matrix x(xrows.size(), xrows.front().size());
    for (std::size_t i = 0; i < xrows.size(); ++i) {
      std::copy(xrows[i].begin(), xrows[i].end(), x.row(i).begin());
    }
    out.sample.x = std::move(x);
  }
  return out;
}

AggregatedSample site_aggregate(const Table& table, const SiteAggSpec& spec) {
  const auto& rc = table.column(spec.row_col);
  const auto& cc = table.column(spec.col_col);
  const auto& val = table.column(spec.value_col);
  std::vector<const std::vector<double>*> covs;
  for (const auto& name : spec.covariates) covs.push_back(&table.column(name));

  AggregatedSample out;
  std::map<std::pair<double, double>, CellAccum> sites;
  for (std::size_t i = 0; i < table.rows; ++i) {
    if (std::isnan(rc[i]) || std::isnan(cc[i]) || !inside(rc[i], spec.row_bounds) ||
        !inside(cc[i], spec.col_bounds)) {
      ++out.skipped;
      continue;
    }
    auto& site = sites[{rc[i], cc[i]}];
    ++site.count;
    site.values.push_back(val[i]);
    site.covs.resize(covs.size());
    for (std::size_t j = 0; j < covs.size(); ++j) site.covs[j].push_back((*covs[j])[i]);
  }

  std::vector<std::vector<double>> xrows;
  std::size_t index = 0;
  for (auto& [key, site] : sites) {
    const double y = stable_mean(site.values);
    if (std::isnan(y)) continue;
    out.sample.y.push_back(y);
    out.cells.push_back({index++, 0, site.count});
    std::vector<double> x{key.first, key.second};
    for (auto& c : site.covs) x.push_back(stable_mean(c));
    xrows.push_back(std::move(x));
  }
  if (out.sample.y.empty()) throw DataError("site aggregation produced no sites");
  Matrix x(xrows.size(), xrows.front().size());
  for (std::size_t i = 0; i < xrows.size(); ++i) {
    std::copy(xrows[i].begin(), xrows[i].end(), x.row(i).begin());
  }
  out.sample.x = std::move(x);
  return out;
}

std::vector<double> jitter_ties(const std::vector<double>& y, std::uint64_t seed,
                                std::optional<double> scale) {
  if (y.empty()) return y;
  const auto [lo_it, hi_it] = std::minmax_element(y.begin(), y.end());
  const double range = *hi_it - *lo_it;
  if (!(range > 0.0)) throw DataError("jitter_ties: constant vector has no range");
  double s = scale.value_or(1e-9 * range);
  if (!(s > 0.0)) throw ConfigError("jitter_ties: scale must be positive");

  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });

  double min_gap = range;
  bool ties = false;
  for (std::size_t k = 1; k < order.size(); ++k) {
    const double gap = y[order[k]] - y[order[k - 1]];
    if (gap == 0.0) {
      ties = true;
    } else {
      min_gap = std::min(min_gap, gap);
    }
  }
  if (!ties) return y;
  s = std::min(s, 0.49 * min_gap);

  std::vector<double> out = y;
  std::mt19937_64 rng(seed);
  for (std::size_t a = 0; a < order.size();) {
    std::size_t b = a + 1;
    while (b < order.size() && y[order[b]] == y[order[a]]) ++b;
    const std::size_t g = b - a;
    if (g > 1) {
      std::vector<std::size_t> rank(g);
      std::iota(rank.begin(), rank.end(), 0);
      std::shuffle(rank.begin(), rank.end(), rng);
      for (std::size_t j = 0; j < g; ++j) {
        const double u = 2.0 * static_cast<double>(rank[j]) / static_cast<double>(g - 1) - 1.0;
        out[order[a + j]] = y[order[a + j]] + s * u;
      }
    }
    a = b;
  }
  std::vector<double> check = out;
  std::sort(check.begin(), check.end());
  if (std::adjacent_find(check.begin(), check.end()) != check.end()) {
    throw NumericalError("jitter_ties: offsets below floating-point resolution");
  }
  return out;
}

std::vector<std::string> dataset_names() {
  return {"chicago-crime", "california-housing", "ozone"};
}

DatasetRecipe dataset_recipe(std::string_view name) {
  DatasetRecipe r;
  r.name = std::string(name);
  if (name == "chicago-crime") {
    r.schema.columns = {{"Latitude"},
                        {"Longitude"},
                        {"Date", ColumnType::kWeekday},
                        {"Beat", ColumnType::kCategory},
                        {"Arrest", ColumnType::kBool}};
    GridAggSpec g;
    g.row_col = "Latitude";
    g.col_col = "Longitude";
    g.rows = g.cols = 100;
    g.aggregate = Aggregate::kCount;
    g.transform = Transform::kLog;
    g.drop_empty = true;
    g.covariates = {"Date", "Beat", "Arrest"};
    r.grid = g;
    r.eval_grid = make_grid(-1.0, 6.0, 100);
    r.hidden = {64, 64, 64, 64, 64};
  } else if (name == "california-housing") {
    r.schema.columns = {{"latitude"},   {"longitude"},  {"median_house_value"},
                        {"median_income"}, {"population"}, {"households"}};
    GridAggSpec g;
    g.row_col = "latitude";
    g.col_col = "longitude";
    g.rows = g.cols = 200;
    g.aggregate = Aggregate::kMean;
    g.value_col = "median_house_value";
    g.transform = Transform::kLog;
    g.drop_empty = true;
    g.covariates = {"median_income", "average_occupancy"};
    r.grid = g;
    r.eval_grid = make_grid(5.0, 15.0, 100);
    r.hidden = {30, 30, 30};
  } else if (name == "ozone") {
    r.schema.columns = {{"Latitude"},
                        {"Longitude"},
                        {"Arithmetic Mean"},
                        {"AQI", ColumnType::kNumber, false},
                        {"Observation Percent", ColumnType::kNumber, false},
                        {"1st Max Value", ColumnType::kNumber, false},
                        {"1st Max Hour", ColumnType::kNumber, false},
                        {"Observation Count", ColumnType::kNumber, false}};
    SiteAggSpec s;
    s.row_col = "Latitude";
    s.col_col = "Longitude";
    s.value_col = "Arithmetic Mean";
    s.row_bounds = Bounds{30.0, 50.0};
    s.col_bounds = Bounds{-153.0, -70.0};
    s.covariates = {"AQI", "Observation Percent", "1st Max Value", "1st Max Hour",
                    "Observation Count"};
    r.sites = s;
    r.eval_grid = make_grid(0.0, 1.0, 100);
    r.hidden = {100, 100};
  } else {
    throw ConfigError("unknown dataset '" + std::string(name) + "'");
  }
  return r;
}

AggregatedSample load_dataset(const DatasetRecipe& recipe, const std::string& path,
                              std::vector<std::string>* warnings) {
  Table table = load_csv(path, recipe.schema);
  if (warnings) warnings->insert(warnings->end(), table.warnings.begin(), table.warnings.end());
  if (recipe.name == "california-housing") {
    const auto& pop = table.column("population");
    const auto& hh = table.column("households");
    std::vector<double> occ(table.rows);
    for (std::size_t i = 0; i < table.rows; ++i) {
      occ[i] = hh[i] > 0.0 ? pop[i] / hh[i] : std::numeric_limits<double>::quiet_NaN();
    }
    table.columns["average_occupancy"] = std::move(occ);
  }
  if (table.rows == 0) throw DataError("dataset '" + path + "' has no usable rows");
  AggregatedSample out =
      recipe.grid ? grid_aggregate(table, *recipe.grid) : site_aggregate(table, *recipe.sites);
  if (out.sample.x) {
    // A cell whose covariate was missing on every row gets the column mean.
    Matrix& x = *out.sample.x;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      std::vector<double> col = x.column(j);
      const double fill = stable_mean(col);
      for (double& v : col) {
        if (std::isnan(v)) v = std::isnan(fill) ? 0.0 : fill;
      }
      x.set_column(j, col);
    }
  }
  if (warnings && out.skipped > 0) {
    warnings->push_back(std::to_string(out.skipped) + " row(s) outside the recipe bounds");
  }
  return out;
}

}  // namespace distreg
