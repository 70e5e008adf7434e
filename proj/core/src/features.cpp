#include "wafer/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "wafer/error.hpp"

namespace wafer {

namespace {

constexpr std::uint8_t kDefect = static_cast<std::uint8_t>(Die::defect);

void require_grid(const WaferMap& map, const char* what) {
  if (map.height() != kGrid || map.width() != kGrid) {
    throw ShapeError(std::string(what) + " requires a 26 x 26 map, got " +
                     std::to_string(map.height()) + " x " + std::to_string(map.width()));
  }
}

struct Point {
  double x, y;
};

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Monotone-chain hull area via the shoelace formula.
double hull_area(std::vector<Point> pts) {
  std::ranges::sort(pts, [](const Point& a, const Point& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Point& a, const Point& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  if (pts.size() < 3) return 0.0;
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  double a = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& p = hull[i];
    const auto& q = hull[(i + 1) % hull.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return std::abs(a) / 2.0;
}

}  // namespace

std::array<std::size_t, 6> density_bounds() {
  std::array<std::size_t, 6> b{};
  for (std::size_t k = 0; k <= 5; ++k) {
    b[k] = static_cast<std::size_t>(std::lround(static_cast<double>(k * kGrid) / 5.0));
  }
  return b;
}

std::array<double, kDensityFeatures> density_features(const WaferMap& map) {
  require_grid(map, "density_features");
  const auto b = density_bounds();
  auto zone = [&](std::size_t zr, std::size_t zc) {
    std::size_t defects = 0;
    for (std::size_t r = b[zr]; r < b[zr + 1]; ++r) {
      for (std::size_t c = b[zc]; c < b[zc + 1]; ++c) defects += map.at(r, c) == kDefect;
    }
    const auto cells = (b[zr + 1] - b[zr]) * (b[zc + 1] - b[zc]);
    return static_cast<double>(defects) / static_cast<double>(cells);
  };
  std::array<double, kDensityFeatures> f{};
  std::size_t k = 0;
  for (std::size_t zr = 1; zr <= 3; ++zr) {
    for (std::size_t zc = 1; zc <= 3; ++zc) f[k++] = zone(zr, zc);
  }
  f[k++] = zone(0, 2);  // top
  f[k++] = zone(2, 4);  // right
  f[k++] = zone(4, 2);  // bottom
  f[k++] = zone(2, 0);  // left
  return f;
}

std::vector<double> Sinogram::column(std::size_t angle) const {
  std::vector<double> out(positions);
  for (std::size_t p = 0; p < positions; ++p) out[p] = at(p, angle);
  return out;
}

std::size_t radon_canvas(std::size_t h, std::size_t w) {
  const double diag = std::hypot(static_cast<double>(h), static_cast<double>(w));
  auto d = static_cast<std::size_t>(std::ceil(diag)) + 2;
  if ((d - w) % 2 != 0) ++d;  // integer offset, so theta = 0 lands on whole columns
  return d;
}

Sinogram radon_sinogram(const WaferMap& map, std::size_t n_angles) {
  const std::size_t d = radon_canvas(map.height(), map.width());
  Sinogram s{d, n_angles, std::vector<double>(d * n_angles, 0.0)};
  const double cx = static_cast<double>(map.width()) / 2.0;
  const double cy = static_cast<double>(map.height()) / 2.0;
  const double half = static_cast<double>(d) / 2.0;

  std::vector<Point> cells;
  for (std::size_t r = 0; r < map.height(); ++r) {
    for (std::size_t c = 0; c < map.width(); ++c) {
      if (map.at(r, c) == kDefect) {
        cells.push_back({static_cast<double>(c) + 0.5 - cx, static_cast<double>(r) + 0.5 - cy});
      }
    }
  }
  for (std::size_t a = 0; a < n_angles; ++a) {
    const double theta = static_cast<double>(a) * std::numbers::pi / 180.0;
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    for (const auto& p : cells) {
      // Canvas column coordinate of the rotated cell centre, relative to
      // the first column centre.
      const double u = ct * p.x + st * p.y + half - 0.5;
      const double i0 = std::floor(u);
      const double t = u - i0;
      const auto i = static_cast<std::size_t>(i0);
      s.values[i * n_angles + a] += 1.0 - t;
      if (t > 0.0) s.values[(i + 1) * n_angles + a] += t;
    }
  }
  return s;
}

std::vector<double> cubic_resample(std::span<const double> y, std::size_t n) {
  const std::size_t m = y.size();
  if (m < 4) {
    throw InvalidArgument("cubic_resample needs at least 4 points, got " + std::to_string(m));
  }
  // Second derivatives with natural end conditions; unit knot spacing.
  std::vector<double> sec(m, 0.0);
  std::vector<double> diag(m, 4.0);
  std::vector<double> rhs(m, 0.0);
  for (std::size_t i = 1; i + 1 < m; ++i) rhs[i] = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]);
  for (std::size_t i = 2; i + 1 < m; ++i) {
    const double w = 1.0 / diag[i - 1];
    diag[i] -= w;
    rhs[i] -= w * rhs[i - 1];
  }
  for (std::size_t i = m - 2; i >= 1; --i) {
    sec[i] = (rhs[i] - (i + 2 < m ? sec[i + 1] : 0.0)) / diag[i];
  }

  std::vector<double> out(n);
  const double last = static_cast<double>(m - 1);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = n == 1 ? 0.0 : last * static_cast<double>(k) / static_cast<double>(n - 1);
    const std::size_t i = std::min(static_cast<std::size_t>(t), m - 2);
    const double s = t - static_cast<double>(i);
    const double r = 1.0 - s;
    out[k] = r * y[i] + s * y[i + 1] + ((r * r * r - r) * sec[i] + (s * s * s - s) * sec[i + 1]) / 6.0;
  }
  return out;
}

std::array<double, kRadonFeatures> radon_features(const WaferMap& map) {
  const Sinogram s = radon_sinogram(map);
  std::vector<double> mean(s.angles);
  std::vector<double> sd(s.angles);
  const double n = static_cast<double>(s.positions);
  for (std::size_t a = 0; a < s.angles; ++a) {
    double sum = 0.0;
    for (std::size_t p = 0; p < s.positions; ++p) sum += s.at(p, a);
    const double mu = sum / n;
    double ss = 0.0;
    for (std::size_t p = 0; p < s.positions; ++p) ss += (s.at(p, a) - mu) * (s.at(p, a) - mu);
    mean[a] = mu;
    sd[a] = std::sqrt(ss / n);
  }
  std::array<double, kRadonFeatures> f{};
  const auto rm = cubic_resample(mean);
  const auto rs = cubic_resample(sd);
  std::ranges::copy(rm, f.begin());
  std::ranges::copy(rs, f.begin() + kRadonPoints);
  return f;
}

std::vector<std::pair<std::size_t, std::size_t>> largest_defect_region(const WaferMap& map) {
  const std::size_t h = map.height();
  const std::size_t w = map.width();
  std::vector<char> seen(h * w, 0);
  std::vector<std::pair<std::size_t, std::size_t>> best;
  std::vector<std::pair<std::size_t, std::size_t>> comp;
  for (std::size_t r0 = 0; r0 < h; ++r0) {
    for (std::size_t c0 = 0; c0 < w; ++c0) {
      if (seen[r0 * w + c0] || map.at(r0, c0) != kDefect) continue;
      comp.clear();
      comp.emplace_back(r0, c0);
      seen[r0 * w + c0] = 1;
      for (std::size_t head = 0; head < comp.size(); ++head) {
        const auto [r, c] = comp[head];
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const auto nr = static_cast<std::ptrdiff_t>(r) + dr;
            const auto nc = static_cast<std::ptrdiff_t>(c) + dc;
            if (nr < 0 || nc < 0 || nr >= static_cast<std::ptrdiff_t>(h) ||
                nc >= static_cast<std::ptrdiff_t>(w)) {
              continue;
            }
            const auto idx = static_cast<std::size_t>(nr) * w + static_cast<std::size_t>(nc);
            if (seen[idx] || map.cells()[idx] != kDefect) continue;
            seen[idx] = 1;
            comp.emplace_back(static_cast<std::size_t>(nr), static_cast<std::size_t>(nc));
          }
        }
      }
      if (comp.size() > best.size()) best = comp;
    }
  }
  std::ranges::sort(best);
  return best;
}

Geometry geometry_features(const WaferMap& map) {
  const auto region = largest_defect_region(map);
  Geometry g;
  if (region.empty()) return g;
  const std::size_t h = map.height();
  const std::size_t w = map.width();
  std::vector<char> in(h * w, 0);
  for (const auto& [r, c] : region) in[r * w + c] = 1;

  const double n = static_cast<double>(region.size());
  g.area = n;
  double mr = 0.0;
  double mc = 0.0;
  for (const auto& [r, c] : region) {
    const std::array<std::pair<std::ptrdiff_t, std::ptrdiff_t>, 4> nb = {
        {{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
    for (const auto& [dr, dc] : nb) {
      const auto nr = static_cast<std::ptrdiff_t>(r) + dr;
      const auto nc = static_cast<std::ptrdiff_t>(c) + dc;
      const bool inside = nr >= 0 && nc >= 0 && nr < static_cast<std::ptrdiff_t>(h) &&
                          nc < static_cast<std::ptrdiff_t>(w) &&
                          in[static_cast<std::size_t>(nr) * w + static_cast<std::size_t>(nc)];
      g.perimeter += inside ? 0.0 : 1.0;
    }
    mr += static_cast<double>(r) + 0.5;
    mc += static_cast<double>(c) + 0.5;
  }
  mr /= n;
  mc /= n;
  double srr = 0.0;
  double scc = 0.0;
  double src = 0.0;
  for (const auto& [r, c] : region) {
    const double dr = static_cast<double>(r) + 0.5 - mr;
    const double dc = static_cast<double>(c) + 0.5 - mc;
    srr += dr * dr;
    scc += dc * dc;
    src += dr * dc;
  }
  srr = srr / n + 1.0 / 12.0;
  scc = scc / n + 1.0 / 12.0;
  src /= n;
  const double mid = (srr + scc) / 2.0;
  const double rad = std::hypot((srr - scc) / 2.0, src);
  const double l1 = mid + rad;
  const double l2 = std::max(mid - rad, 0.0);
  g.major_axis = 4.0 * std::sqrt(l1);
  g.minor_axis = 4.0 * std::sqrt(l2);
  g.eccentricity = l1 > 0.0 ? std::sqrt(std::max(0.0, 1.0 - l2 / l1)) : 0.0;

  std::vector<Point> corners;
  corners.reserve(4 * region.size());
  for (const auto& [r, c] : region) {
    const auto x = static_cast<double>(c);
    const auto y = static_cast<double>(r);
    corners.push_back({x, y});
    corners.push_back({x + 1, y});
    corners.push_back({x, y + 1});
    corners.push_back({x + 1, y + 1});
  }
  const double hull = hull_area(std::move(corners));
  g.solidity = hull < 1.0 ? 1.0 : std::min(1.0, n / hull);
  return g;
}

FeatureVector extract_59(const WaferMap& map) {
  require_grid(map, "extract_59");
  FeatureVector f{};
  const auto d = density_features(map);
  const auto r = radon_features(map);
  const auto g = geometry_features(map);
  auto it = std::ranges::copy(d, f.begin()).out;
  it = std::ranges::copy(r, it).out;
  for (double v : {g.area, g.perimeter, g.major_axis, g.minor_axis, g.eccentricity, g.solidity}) {
    *it++ = v;
  }
  return f;
}

WaferMap feature_map(const Sample& s) {
  if (const auto* m = std::get_if<WaferMap>(&s.data)) {
    if (m->height() == kGrid && m->width() == kGrid) return *m;
    return resize_nearest(*m, kGrid, kGrid);
  }
  return decode_one_hot(std::get<EncodedTensor>(s.data));
}

FeatureMatrix extract_features(const LabeledDataset& ds) {
  FeatureMatrix m;
  m.rows = ds.size();
  m.x.reserve(ds.size() * kFeatureCount);
  for (const auto& s : ds.items()) {
    const auto f = extract_59(feature_map(s));
    m.x.insert(m.x.end(), f.begin(), f.end());
    m.y.push_back(label_of(s.label));
    m.ids.push_back(s.id);
  }
  return m;
}

const std::array<std::string, kFeatureCount>& feature_names() {
  static const auto names = [] {
    std::array<std::string, kFeatureCount> n;
    std::size_t k = 0;
    for (std::size_t r = 1; r <= 3; ++r) {
      for (std::size_t c = 1; c <= 3; ++c) {
        n[k++] = "density_r" + std::to_string(r) + "c" + std::to_string(c);
      }
    }
    for (const char* e : {"density_top", "density_right", "density_bottom", "density_left"}) {
      n[k++] = e;
    }
    for (std::size_t i = 0; i < kRadonPoints; ++i) n[k++] = "radon_mean_" + std::to_string(i);
    for (std::size_t i = 0; i < kRadonPoints; ++i) n[k++] = "radon_std_" + std::to_string(i);
    for (const char* g :
         {"area", "perimeter", "major_axis", "minor_axis", "eccentricity", "solidity"}) {
      n[k++] = g;
    }
    return n;
  }();
  return names;
}

void write_feature_csv(const FeatureMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id,label";
  for (const auto& n : feature_names()) out << ',' << n;
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < m.rows; ++i) {
    out << m.ids[i] << ',' << m.y[i];
    for (double v : m.row(i)) out << ',' << v;
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace wafer
