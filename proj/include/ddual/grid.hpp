#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ddual/errors.hpp"

namespace ddual {

inline constexpr int kMaxDim = 4;

using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using MultiIndex = Eigen::Matrix<int, Eigen::Dynamic, 1, 0, kMaxDim, 1>;

// Worker count used by grid sweeps. 0 means hardware concurrency.
inline std::atomic<int>& thread_budget() {
  static std::atomic<int> n{1};
  return n;
}

// Runs body(i) for i in [0, n). Each i must write only its own slot.
template <class F>
void parallel_for(std::size_t n, F&& body) {
  int want = thread_budget().load();
  if (want <= 0) want = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(want), n / 2048 + 1);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk, e = std::min(n, b + chunk);
    pool.emplace_back([&body, b, e] {
      for (std::size_t i = b; i < e; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

// Cell-vertex rectangular grid. Points per dimension = cells + 1, row-major
// storage with the last dimension varying fastest.
class GridSpec {
 public:
  GridSpec() = default;
  GridSpec(std::vector<double> lower, std::vector<double> upper, std::vector<int> cells)
      : lower_(std::move(lower)), upper_(std::move(upper)), cells_(std::move(cells)) {
    const std::size_t n = lower_.size();
    if (n == 0 || n > static_cast<std::size_t>(kMaxDim) || upper_.size() != n || cells_.size() != n)
      throw ConfigError("grid: lower/upper/cells must have equal length in 1.." + std::to_string(kMaxDim));
    spacing_.resize(n);
    stride_.assign(n, 1);
    for (std::size_t k = 0; k < n; ++k) {
      if (!(upper_[k] > lower_[k])) throw ConfigError("grid: upper must exceed lower in every dimension");
      if (cells_[k] < 2) throw ConfigError("grid: at least 2 cells per dimension");
      spacing_[k] = (upper_[k] - lower_[k]) / cells_[k];
    }
    for (int k = static_cast<int>(n) - 2; k >= 0; --k) stride_[k] = stride_[k + 1] * (cells_[k + 1] + 1);
    size_ = stride_[0] * (cells_[0] + 1);
  }

  int dim() const { return static_cast<int>(lower_.size()); }
  double lower(int k) const { return lower_[k]; }
  double upper(int k) const { return upper_[k]; }
  int cells(int k) const { return cells_[k]; }
  int points(int k) const { return cells_[k] + 1; }
  double spacing(int k) const { return spacing_[k]; }
  std::size_t stride(int k) const { return stride_[k]; }
  std::size_t size() const { return size_; }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  const std::vector<int>& cells() const { return cells_; }

  double cell_volume() const {
    double v = 1.0;
    for (double h : spacing_) v *= h;
    return v;
  }

  std::size_t flat(const MultiIndex& idx) const {
    std::size_t f = 0;
    for (int k = 0; k < dim(); ++k) f += stride_[k] * static_cast<std::size_t>(idx[k]);
    return f;
  }

  MultiIndex multi(std::size_t f) const {
    MultiIndex idx(dim());
    for (int k = 0; k < dim(); ++k) {
      idx[k] = static_cast<int>(f / stride_[k]);
      f %= stride_[k];
    }
    return idx;
  }

  bool contains(const MultiIndex& idx) const {
    for (int k = 0; k < dim(); ++k)
      if (idx[k] < 0 || idx[k] > cells_[k]) return false;
    return true;
  }

  double coord(int k, int i) const {
    return i == cells_[k] ? upper_[k] : lower_[k] + i * spacing_[k];
  }

  Point point(const MultiIndex& idx) const {
    Point x(dim());
    for (int k = 0; k < dim(); ++k) x[k] = coord(k, idx[k]);
    return x;
  }
  Point point(std::size_t f) const { return point(multi(f)); }

  Point clamp(const Point& x) const {
    Point y = x;
    for (int k = 0; k < dim(); ++k) y[k] = std::clamp(x[k], lower_[k], upper_[k]);
    return y;
  }

  // Nearest grid index, clamped to the grid.
  MultiIndex index_of(const Point& x) const {
    MultiIndex idx(dim());
    for (int k = 0; k < dim(); ++k) {
      const double s = (x[k] - lower_[k]) / spacing_[k];
      idx[k] = std::clamp(static_cast<int>(std::lround(s)), 0, cells_[k]);
    }
    return idx;
  }

  bool operator==(const GridSpec& o) const {
    return lower_ == o.lower_ && upper_ == o.upper_ && cells_ == o.cells_;
  }

 private:
  std::vector<double> lower_, upper_;
  std::vector<int> cells_;
  std::vector<double> spacing_;
  std::vector<std::size_t> stride_;
  std::size_t size_ = 0;
};

struct ScalarField {
  GridSpec grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(GridSpec g, double fill = 0.0) : grid(std::move(g)), values(grid.size(), fill) {}

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  double at(const MultiIndex& idx) const { return values[grid.flat(idx)]; }
  std::size_t size() const { return values.size(); }

  template <class F>
  static ScalarField sample(const GridSpec& g, F&& f) {
    ScalarField s(g);
    for (std::size_t i = 0; i < g.size(); ++i) s.values[i] = f(g.point(i));
    return s;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
  double max() const { return *std::max_element(values.begin(), values.end()); }
  double min() const { return *std::min_element(values.begin(), values.end()); }
  double sum() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  // Midpoint quadrature with cell volume weights.
  double integral() const { return sum() * grid.cell_volume(); }
  bool all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
  }
};

// m-tuple per grid point. Policy fields use m = input dimension.
struct VectorField {
  GridSpec grid;
  int components = 0;
  std::vector<double> values;

  VectorField() = default;
  VectorField(GridSpec g, int m, double fill = 0.0)
      : grid(std::move(g)), components(m), values(grid.size() * static_cast<std::size_t>(m), fill) {}
  explicit VectorField(GridSpec g) : VectorField(g, g.dim()) {}

  Point get(std::size_t i) const {
    Point p(components);
    for (int c = 0; c < components; ++c) p[c] = values[i * components + c];
    return p;
  }
  void set(std::size_t i, const Point& p) {
    for (int c = 0; c < components; ++c) values[i * components + c] = p[c];
  }
  std::size_t size() const { return grid.size(); }
};

struct UpwindDifferences {
  Point backward;
  Point forward;
};

inline UpwindDifferences upwind_differences(const ScalarField& field, const MultiIndex& idx) {
  const GridSpec& g = field.grid;
  const int n = g.dim();
  const std::size_t f = g.flat(idx);
  const double v = field.values[f];
  UpwindDifferences d{Point::Zero(n), Point::Zero(n)};
  for (int k = 0; k < n; ++k) {
    const double h = g.spacing(k);
    if (idx[k] > 0) d.backward[k] = (v - field.values[f - g.stride(k)]) / h;
    if (idx[k] < g.cells(k)) d.forward[k] = (field.values[f + g.stride(k)] - v) / h;
  }
  return d;
}

// transport: max(0,f)*backward + min(0,f)*forward, the rule for advected
// quantities. value: max(0,f)*forward + min(0,f)*backward, the rule for a
// cost-to-go whose characteristics run along +f.
enum class UpwindSense { transport, value };

inline double upwind_directional(const ScalarField& field, const Point& velocity, const MultiIndex& idx,
                                 UpwindSense sense = UpwindSense::transport) {
  const UpwindDifferences d = upwind_differences(field, idx);
  double s = 0.0;
  for (int k = 0; k < field.grid.dim(); ++k) {
    const double f = velocity[k];
    if (sense == UpwindSense::transport)
      s += std::max(0.0, f) * d.backward[k] + std::min(0.0, f) * d.forward[k];
    else
      s += std::max(0.0, f) * d.forward[k] + std::min(0.0, f) * d.backward[k];
  }
  return s;
}

// Jump-process view of the value-sense stencil: from node `from`, velocity
// component v_k moves to the neighbor in direction sign(v_k) at rate
// |v_k|/Δx_k. Missing neighbors contribute nothing.
struct Jump {
  std::size_t to;
  double rate;
};

inline int upwind_jumps(const GridSpec& g, std::size_t from, const MultiIndex& idx, const Point& v,
                        Jump out[kMaxDim]) {
  int count = 0;
  for (int k = 0; k < g.dim(); ++k) {
    const double f = v[k];
    if (f > 0 && idx[k] < g.cells(k)) out[count++] = {from + g.stride(k), f / g.spacing(k)};
    else if (f < 0 && idx[k] > 0) out[count++] = {from - g.stride(k), -f / g.spacing(k)};
  }
  return count;
}

namespace detail {

// Lower corner and fractional offsets for multilinear interpolation.
inline void locate(const GridSpec& g, const Point& x, MultiIndex& lo, Point& t) {
  const int n = g.dim();
  lo.resize(n);
  t.resize(n);
  for (int k = 0; k < n; ++k) {
    const double s = std::clamp((x[k] - g.lower(k)) / g.spacing(k), 0.0, static_cast<double>(g.cells(k)));
    int i = static_cast<int>(std::floor(s));
    if (i >= g.cells(k)) i = g.cells(k) - 1;
    lo[k] = i;
    t[k] = s - i;
  }
}

}  // namespace detail

// Multilinear interpolation; points outside the grid are clamped to it.
inline double interpolate(const ScalarField& field, const Point& x) {
  const GridSpec& g = field.grid;
  const int n = g.dim();
  MultiIndex lo;
  Point t;
  detail::locate(g, x, lo, t);
  const std::size_t base = g.flat(lo);
  double acc = 0.0;
  for (int corner = 0; corner < (1 << n); ++corner) {
    double w = 1.0;
    std::size_t f = base;
    for (int k = 0; k < n; ++k) {
      if (corner & (1 << k)) {
        w *= t[k];
        f += g.stride(k);
      } else {
        w *= 1.0 - t[k];
      }
    }
    if (w != 0.0) acc += w * field.values[f];
  }
  return acc;
}

inline Point interpolate(const VectorField& field, const Point& x) {
  const GridSpec& g = field.grid;
  const int n = g.dim();
  MultiIndex lo;
  Point t;
  detail::locate(g, x, lo, t);
  const std::size_t base = g.flat(lo);
  Point acc = Point::Zero(field.components);
  for (int corner = 0; corner < (1 << n); ++corner) {
    double w = 1.0;
    std::size_t f = base;
    for (int k = 0; k < n; ++k) {
      if (corner & (1 << k)) {
        w *= t[k];
        f += g.stride(k);
      } else {
        w *= 1.0 - t[k];
      }
    }
    if (w != 0.0) acc += w * field.get(f);
  }
  return acc;
}

// ---- CSV dumps -------------------------------------------------------------

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(std::ostream& os, const GridSpec& g, const std::vector<std::string>& value_names,
                      const std::vector<double>& values) {
  const int n = g.dim();
  const std::size_t m = value_names.size();
  for (int k = 0; k < n; ++k) os << 'i' << k << ',';
  for (int k = 0; k < n; ++k) os << 'x' << k << ',';
  for (std::size_t c = 0; c < m; ++c) os << value_names[c] << (c + 1 < m ? "," : "\n");
  for (std::size_t f = 0; f < g.size(); ++f) {
    const MultiIndex idx = g.multi(f);
    for (int k = 0; k < n; ++k) os << idx[k] << ',';
    for (int k = 0; k < n; ++k) os << format_real(g.coord(k, idx[k])) << ',';
    for (std::size_t c = 0; c < m; ++c) os << format_real(values[f * m + c]) << (c + 1 < m ? "," : "\n");
  }
}

inline void write_csv(std::ostream& os, const ScalarField& s) { write_csv(os, s.grid, {"value"}, s.values); }

inline void write_csv(std::ostream& os, const VectorField& v, const std::string& prefix = "u") {
  std::vector<std::string> names;
  for (int c = 0; c < v.components; ++c) names.push_back(prefix + std::to_string(c));
  write_csv(os, v.grid, names, v.values);
}

template <class Field>
void write_csv_file(const std::string& path, const Field& f) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  write_csv(os, f);
}

namespace detail {

struct CsvTable {
  GridSpec grid;
  int value_columns = 0;
  std::vector<double> values;
};

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

// Rebuilds the grid from the index and coordinate columns.
inline CsvTable read_grid_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("csv: empty input");
  const auto header = split(line);
  int n = 0;
  while (n < static_cast<int>(header.size()) && header[n] == "i" + std::to_string(n)) ++n;
  if (n == 0 || static_cast<int>(header.size()) <= 2 * n) throw ConfigError("csv: header lacks i*/x* columns");
  const int m = static_cast<int>(header.size()) - 2 * n;
  std::vector<std::vector<int>> idx;
  std::vector<std::vector<double>> xs;
  std::vector<double> vals;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (static_cast<int>(cells.size()) != 2 * n + m) throw ConfigError("csv: ragged row");
    std::vector<int> i(n);
    std::vector<double> x(n);
    for (int k = 0; k < n; ++k) {
      i[k] = std::stoi(cells[k]);
      x[k] = std::stod(cells[n + k]);
    }
    for (int c = 0; c < m; ++c) vals.push_back(std::stod(cells[2 * n + c]));
    idx.push_back(i);
    xs.push_back(x);
  }
  if (idx.empty()) throw ConfigError("csv: no rows");
  std::vector<double> lo(n), hi(n);
  std::vector<int> cells(n);
  for (int k = 0; k < n; ++k) {
    lo[k] = xs.front()[k];
    hi[k] = xs.back()[k];
    cells[k] = idx.back()[k];
  }
  CsvTable t{GridSpec(lo, hi, cells), m, std::move(vals)};
  if (t.values.size() != t.grid.size() * static_cast<std::size_t>(m)) throw ConfigError("csv: row count mismatch");
  return t;
}

}  // namespace detail

inline ScalarField read_scalar_csv(std::istream& is) {
  auto t = detail::read_grid_csv(is);
  if (t.value_columns != 1) throw ConfigError("csv: expected one value column");
  ScalarField s(t.grid);
  s.values = std::move(t.values);
  return s;
}

inline VectorField read_vector_csv(std::istream& is) {
  auto t = detail::read_grid_csv(is);
  VectorField v(t.grid, t.value_columns);
  v.values = std::move(t.values);
  return v;
}

}  // namespace ddual
