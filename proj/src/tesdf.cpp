#include "safeteleop/tesdf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "safeteleop/detail/format.hpp"

namespace safeteleop {

namespace {

// out[q] = min(out[q], min_p f[p] + (q - p - shift)^2), by the lower envelope
// of parabolas (Felzenszwalb and Huttenlocher).
void envelope_pass(const double* f, int n, double shift, double* out, std::vector<int>& site,
                   std::vector<double>& edge) {
  auto key = [&](int p) { return f[p] + (p + shift) * (p + shift); };
  int m = 0;
  site[0] = 0;
  edge[0] = -std::numeric_limits<double>::infinity();
  edge[1] = std::numeric_limits<double>::infinity();
  for (int p = 1; p < n; ++p) {
    double s = (key(p) - key(site[m])) / (2.0 * (p - site[m]));
    while (s <= edge[m]) {
      --m;
      s = (key(p) - key(site[m])) / (2.0 * (p - site[m]));
    }
    ++m;
    site[m] = p;
    edge[m] = s;
    edge[m + 1] = std::numeric_limits<double>::infinity();
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (edge[j + 1] < q) ++j;
    const double d = q - site[j] - shift;
    out[q] = std::min(out[q], f[site[j]] + d * d);
  }
}

// Squared distance, in voxel units, from every voxel center to the nearest
// target voxel cube, saturated at `cap`. Distance to a cube splits into
// per-axis terms max(0, |d| - 1/2)^2, so three 1-D sweeps give the exact value.
// Along a line the term is f[q] itself or a parabola centred half a voxel
// toward the source; the two shifted envelopes only overestimate the pairs
// they get wrong, so their minimum with f is exact.
std::vector<double> cube_distance_sq(const GridGeometry& g, const std::vector<bool>& target, double cap) {
  const Eigen::Vector3i dims = g.dims();
  std::vector<double> grid(g.num_voxels());
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = target[i] ? 0.0 : cap;

  const int longest = dims.maxCoeff();
  std::vector<double> line(longest), out(longest), edge(longest + 1);
  std::vector<int> site(longest);
  const std::size_t stride[3] = {1, static_cast<std::size_t>(dims.x()),
                                 static_cast<std::size_t>(dims.x()) * dims.y()};
  for (int axis = 0; axis < 3; ++axis) {
    const int n = dims[axis];
    const int a1 = (axis + 1) % 3;
    const int a2 = (axis + 2) % 3;
    for (int i2 = 0; i2 < dims[a2]; ++i2) {
      for (int i1 = 0; i1 < dims[a1]; ++i1) {
        const std::size_t base = i1 * stride[a1] + i2 * stride[a2];
        double lo = cap, hi = 0.0;
        for (int q = 0; q < n; ++q) {
          line[q] = grid[base + q * stride[axis]];
          lo = std::min(lo, line[q]);
          hi = std::max(hi, line[q]);
        }
        if (lo == hi) continue;
        std::copy(line.begin(), line.begin() + n, out.begin());
        envelope_pass(line.data(), n, 0.5, out.data(), site, edge);
        envelope_pass(line.data(), n, -0.5, out.data(), site, edge);
        for (int q = 0; q < n; ++q) grid[base + q * stride[axis]] = std::min(out[q], cap);
      }
    }
  }
  return grid;
}

struct Face {
  int axis;
  Eigen::Vector3d center;
};

double point_face_distance(const Eigen::Vector3d& p, const Face& f, double half) {
  double sq = 0.0;
  for (int a = 0; a < 3; ++a) {
    double e = std::abs(p[a] - f.center[a]);
    if (a != f.axis) e = std::max(0.0, e - half);
    sq += e * e;
  }
  return std::sqrt(sq);
}

}  // namespace

TesdfField::TesdfField(GridGeometry geometry, double truncation, std::vector<double> values)
    : geometry_(std::move(geometry)), truncation_(truncation), values_(std::move(values)) {
  if (!(truncation_ > 0.0)) throw std::invalid_argument("truncation bound must be positive");
  if (values_.size() != geometry_.num_voxels()) throw std::invalid_argument("field size does not match geometry");
}

TesdfField build_tesdf(const GridSnapshot& snapshot, double truncation) {
  if (!(truncation > 0.0)) throw std::invalid_argument("truncation bound must be positive");
  const GridGeometry& g = snapshot.geometry();
  const double res = g.resolution();
  const auto cells = snapshot.cells();
  const std::size_t n = g.num_voxels();

  std::vector<bool> free(n), non_free(n);
  for (std::size_t i = 0; i < n; ++i) {
    free[i] = classify_log_odds(cells[i]) == VoxelClass::Free;
    non_free[i] = !free[i];
  }
  const double band = truncation / res;
  const double cap = (band + 1.0) * (band + 1.0);
  const std::vector<double> to_non_free = cube_distance_sq(g, non_free, cap);
  const std::vector<double> to_free = cube_distance_sq(g, free, cap);

  const Eigen::Vector3i dims = g.dims();
  std::vector<double> values(n);
  for (int k = 0; k < dims.z(); ++k) {
    for (int j = 0; j < dims.y(); ++j) {
      for (int i = 0; i < dims.x(); ++i) {
        const std::size_t idx = g.index(i, j, k);
        if (free[idx]) {
          const int wall = std::min({i, dims.x() - 1 - i, j, dims.y() - 1 - j, k, dims.z() - 1 - k});
          const double d = std::min(std::sqrt(to_non_free[idx]), wall + 0.5) * res;
          values[idx] = std::min(d, truncation);
        } else {
          values[idx] = -std::min(std::sqrt(to_free[idx]) * res, truncation);
        }
      }
    }
  }
  return TesdfField(g, truncation, std::move(values));
}

TesdfField brute_force_esdf(const GridSnapshot& snapshot, double truncation) {
  if (!(truncation > 0.0)) throw std::invalid_argument("truncation bound must be positive");
  const GridGeometry& g = snapshot.geometry();
  if (g.num_voxels() > 64u * 64u * 64u) throw std::length_error("brute-force ESDF limited to 64^3 voxels");
  const double res = g.resolution();
  const Eigen::Vector3i dims = g.dims();

  std::vector<Face> faces;
  for (int k = 0; k < dims.z(); ++k) {
    for (int j = 0; j < dims.y(); ++j) {
      for (int i = 0; i < dims.x(); ++i) {
        const Eigen::Vector3i v(i, j, k);
        if (snapshot.classify(v) != VoxelClass::Free) continue;
        for (int axis = 0; axis < 3; ++axis) {
          for (int dir : {-1, 1}) {
            Eigen::Vector3i nb = v;
            nb[axis] += dir;
            if (g.in_bounds(nb) && snapshot.classify(nb) == VoxelClass::Free) continue;
            Face f{axis, g.center(v)};
            f.center[axis] += 0.5 * dir * res;
            faces.push_back(f);
          }
        }
      }
    }
  }

  std::vector<double> values(g.num_voxels());
  const double half = 0.5 * res;
  for (int k = 0; k < dims.z(); ++k) {
    for (int j = 0; j < dims.y(); ++j) {
      for (int i = 0; i < dims.x(); ++i) {
        const Eigen::Vector3i v(i, j, k);
        const Eigen::Vector3d p = g.center(v);
        double best = std::numeric_limits<double>::infinity();
        for (const Face& f : faces) best = std::min(best, point_face_distance(p, f, half));
        const double d = std::min(best, truncation);
        values[g.index(v)] = snapshot.classify(v) == VoxelClass::Free ? d : -d;
      }
    }
  }
  return TesdfField(g, truncation, std::move(values));
}

namespace {

struct Cell {
  Eigen::Vector3i base;
  Eigen::Vector3d frac;
  bool degraded = false;
};

Cell locate(const GridGeometry& g, const Eigen::Vector3d& x, double margin) {
  Cell c;
  const Eigen::Vector3i& dims = g.dims();
  for (int a = 0; a < 3; ++a) {
    const double raw = (x[a] - g.origin()[a]) / g.resolution() - 0.5;
    const double hi = dims[a] - 1.0;
    if (!(raw >= margin && raw <= hi - margin)) c.degraded = true;
    const double q = std::clamp(raw, 0.0, hi);
    int i0 = static_cast<int>(std::floor(q));
    i0 = std::clamp(i0, 0, std::max(0, dims[a] - 2));
    c.base[a] = i0;
    c.frac[a] = dims[a] > 1 ? q - i0 : 0.0;
  }
  return c;
}

double trilinear(const TesdfField& field, const Cell& c) {
  const Eigen::Vector3i& dims = field.geometry().dims();
  double acc = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    Eigen::Vector3i v = c.base;
    double w = 1.0;
    for (int a = 0; a < 3; ++a) {
      const bool upper = (corner >> a) & 1;
      if (upper) {
        w *= c.frac[a];
        v[a] = std::min(v[a] + 1, dims[a] - 1);
      } else {
        w *= 1.0 - c.frac[a];
      }
    }
    if (w != 0.0) acc += w * field.at(v);
  }
  return acc;
}

}  // namespace

double interpolate(const TesdfField& field, const Eigen::Vector3d& x) {
  return trilinear(field, locate(field.geometry(), x, 0.0));
}

Eigen::Vector3d central_gradient(const TesdfField& field, const Eigen::Vector3d& x, double step) {
  Eigen::Vector3d grad;
  for (int a = 0; a < 3; ++a) {
    const Eigen::Vector3d e = Eigen::Vector3d::Unit(a) * step;
    grad[a] = (interpolate(field, x + e) - interpolate(field, x - e)) / (2.0 * step);
  }
  return grad;
}

OneSidedGradients one_sided_gradients(const TesdfField& field, const Eigen::Vector3d& x, double step) {
  OneSidedGradients out;
  const double h = interpolate(field, x);
  for (int a = 0; a < 3; ++a) {
    const Eigen::Vector3d e = Eigen::Vector3d::Unit(a) * step;
    out.forward[a] = (interpolate(field, x + e) - h) / step;
    out.backward[a] = (h - interpolate(field, x - e)) / step;
  }
  return out;
}

TesdfQuery query(const TesdfField& field, const Eigen::Vector3d& x) {
  const double step = 0.5 * field.geometry().resolution();
  // Stencil reaches step / resolution = half a voxel past x.
  const Cell c = locate(field.geometry(), x, 0.5);
  TesdfQuery q;
  q.degraded = c.degraded;
  q.value = trilinear(field, c);
  if (std::abs(q.value) < field.truncation()) q.gradient = central_gradient(field, x, step);
  return q;
}

Eigen::MatrixXd slice(const TesdfField& field, Axis axis, double coord) {
  const GridGeometry& g = field.geometry();
  const int a = static_cast<int>(axis);
  const double lo = g.origin()[a];
  const double hi = g.max_corner()[a];
  if (!(coord >= lo && coord <= hi)) throw std::out_of_range("slice coordinate outside volume");
  const int layer = std::clamp(static_cast<int>(std::floor((coord - lo) / g.resolution())), 0, g.dims()[a] - 1);
  const int col_axis = axis == Axis::X ? 1 : 0;
  const int row_axis = axis == Axis::Z ? 1 : 2;
  Eigen::MatrixXd out(g.dims()[row_axis], g.dims()[col_axis]);
  for (int r = 0; r < out.rows(); ++r) {
    for (int c = 0; c < out.cols(); ++c) {
      Eigen::Vector3i v;
      v[a] = layer;
      v[row_axis] = r;
      v[col_axis] = c;
      out(r, c) = field.at(v);
    }
  }
  return out;
}

void write_slice_csv(std::ostream& os, const Eigen::MatrixXd& values) {
  std::string line;
  for (int r = 0; r < values.rows(); ++r) {
    line.clear();
    for (int c = 0; c < values.cols(); ++c) {
      if (c) line.push_back(',');
      detail::append_number(line, values(r, c));
    }
    line.push_back('\n');
    os << line;
  }
  if (!os) throw std::runtime_error("failed to write slice");
}

}  // namespace safeteleop
