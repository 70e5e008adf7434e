#include "wafer/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "wafer/error.hpp"
#include "wafer/random.hpp"

namespace wafer {

namespace {

void check_range(const Range& r, const char* name, double lo, double hi) {
  if (!(r.first <= r.second) || r.first < lo || r.second > hi) {
    throw ConfigError(std::string("synth parameter ") + name + " must satisfy " +
                      std::to_string(lo) + " <= min <= max <= " + std::to_string(hi));
  }
}

class Canvas {
 public:
  explicit Canvas(const SynthParams& p) : p_(p), map_(p.grid, p.grid, std::uint8_t{0}) {
    for (std::size_t r = 0; r < p.grid; ++r) {
      for (std::size_t col = 0; col < p.grid; ++col) {
        if (radius(r, col) <= p.wafer_radius) map_.set(r, col, 1);
      }
    }
  }

  double center() const { return p_.grid / 2.0; }
  double radius(std::size_t r, std::size_t c) const {
    return std::hypot(r + 0.5 - center(), c + 0.5 - center());
  }
  // Angle of the cell centre around the wafer centre in degrees, [0, 360).
  double angle(std::size_t r, std::size_t c) const {
    double a = std::atan2(r + 0.5 - center(), c + 0.5 - center()) * 180.0 / std::numbers::pi;
    return a < 0 ? a + 360.0 : a;
  }
  bool on_wafer(std::size_t r, std::size_t c) const { return map_.at(r, c) != 0; }

  template <typename Pred>
  void mark(Pred&& pred) {
    for (std::size_t r = 0; r < p_.grid; ++r) {
      for (std::size_t c = 0; c < p_.grid; ++c) {
        if (on_wafer(r, c) && pred(r, c)) map_.set(r, c, 2);
      }
    }
  }

  WaferMap& map() { return map_; }

 private:
  const SynthParams& p_;
  WaferMap map_;
};

double uniform(Rng& rng, const Range& r) {
  return std::uniform_real_distribution<double>(r.first, r.second)(rng);
}

double segment_distance(double py, double px, double ay, double ax, double by, double bx) {
  const double dy = by - ay;
  const double dx = bx - ax;
  const double len2 = dy * dy + dx * dx;
  double t = len2 > 0 ? ((py - ay) * dy + (px - ax) * dx) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(py - (ay + t * dy), px - (ax + t * dx));
}

}  // namespace

void SynthParams::validate() const {
  if (grid < 4) throw ConfigError("synth grid must be at least 4");
  if (!(wafer_radius > 0.0) || wafer_radius > grid / 2.0) {
    throw ConfigError("synth wafer_radius must lie in (0, grid/2]");
  }
  if (!(salt_noise_prob >= 0.0 && salt_noise_prob <= 1.0)) {
    throw ConfigError("synth salt_noise_prob must lie in [0,1]");
  }
  check_range(center_radius, "center_radius", 0.0, 0.5);
  check_range(donut_inner, "donut_inner", 0.0, 0.5);
  check_range(donut_thickness, "donut_thickness", 0.0, 0.5);
  check_range(edge_loc_span_deg, "edge_loc_span_deg", 0.0, 360.0);
  check_range(edge_loc_depth, "edge_loc_depth", 0.0, grid / 2.0);
  check_range(edge_ring_width, "edge_ring_width", 0.0, grid / 2.0);
  check_range(loc_radius, "loc_radius", 0.0, 0.5);
  check_range(loc_offset, "loc_offset", 0.0, 1.0);
  check_range(random_rate, "random_rate", 0.0, 1.0);
  check_range(near_full_rate, "near_full_rate", 0.0, 1.0);
  if (!(scratch_min_length >= 0.0 && scratch_min_length <= 2.0)) {
    throw ConfigError("synth scratch_min_length must lie in [0,2]");
  }
}

std::array<std::size_t, kNumClasses> table_proportioned_counts() {
  return {429, 55, 518, 968, 359, 86, 119, 14};
}

WaferMap generate(DefectClass cls, const SynthParams& params, std::uint64_t seed) {
  params.validate();
  Rng rng(seed);
  Canvas cv(params);
  const double g = static_cast<double>(params.grid);
  const double R = params.wafer_radius;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  switch (cls) {
    case DefectClass::center: {
      const double rad = uniform(rng, params.center_radius) * g;
      cv.mark([&](auto r, auto c) { return cv.radius(r, c) <= rad; });
      break;
    }
    case DefectClass::donut: {
      const double inner = uniform(rng, params.donut_inner) * g;
      const double outer = inner + uniform(rng, params.donut_thickness) * g;
      cv.mark([&](auto r, auto c) {
        const double d = cv.radius(r, c);
        return d >= inner && d <= outer;
      });
      break;
    }
    case DefectClass::edge_loc: {
      const double mid = unit(rng) * 360.0;
      const double half = uniform(rng, params.edge_loc_span_deg) / 2.0;
      const double depth = uniform(rng, params.edge_loc_depth);
      cv.mark([&](auto r, auto c) {
        double diff = std::fabs(cv.angle(r, c) - mid);
        if (diff > 180.0) diff = 360.0 - diff;
        return cv.radius(r, c) >= R - depth && diff <= half;
      });
      break;
    }
    case DefectClass::edge_ring: {
      const double width = uniform(rng, params.edge_ring_width);
      cv.mark([&](auto r, auto c) { return cv.radius(r, c) >= R - width; });
      break;
    }
    case DefectClass::loc: {
      const double rad = uniform(rng, params.loc_radius) * g;
      const double off = uniform(rng, params.loc_offset) * R;
      const double phi = unit(rng) * 2.0 * std::numbers::pi;
      const double cy = cv.center() + off * std::sin(phi);
      const double cx = cv.center() + off * std::cos(phi);
      cv.mark([&](auto r, auto c) { return std::hypot(r + 0.5 - cy, c + 0.5 - cx) <= rad; });
      break;
    }
    case DefectClass::near_full:
    case DefectClass::random: {
      const double p = uniform(rng, cls == DefectClass::random ? params.random_rate
                                                               : params.near_full_rate);
      std::bernoulli_distribution hit(p);
      cv.mark([&](auto, auto) { return hit(rng); });
      break;
    }
    case DefectClass::scratch: {
      // Endpoints are drawn inside the wafer; short segments are redrawn.
      auto point = [&] {
        const double rr = R * std::sqrt(unit(rng)) * 0.95;
        const double phi = unit(rng) * 2.0 * std::numbers::pi;
        return std::pair{cv.center() + rr * std::sin(phi), cv.center() + rr * std::cos(phi)};
      };
      auto a = point();
      auto b = point();
      for (int attempt = 0; attempt < 64; ++attempt) {
        if (std::hypot(a.first - b.first, a.second - b.second) >= params.scratch_min_length * R) {
          break;
        }
        a = point();
        b = point();
      }
      const double half_width = (unit(rng) < 0.5 ? 1.0 : 2.0) / 2.0;
      cv.mark([&](auto r, auto c) {
        return segment_distance(r + 0.5, c + 0.5, a.first, a.second, b.first, b.second) <=
               half_width;
      });
      break;
    }
  }

  if (params.salt_noise_prob > 0.0) {
    std::bernoulli_distribution flip(params.salt_noise_prob);
    WaferMap& m = cv.map();
    for (std::size_t r = 0; r < params.grid; ++r) {
      for (std::size_t c = 0; c < params.grid; ++c) {
        const std::uint8_t v = m.at(r, c);
        if (v != 0 && flip(rng)) m.set(r, c, v == 1 ? 2 : 1);
      }
    }
  }
  return std::move(cv.map());
}

LabeledDataset generate_dataset(const std::array<std::size_t, kNumClasses>& counts,
                                const SynthParams& params, std::uint64_t seed) {
  params.validate();
  std::vector<Sample> items;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto cls = static_cast<DefectClass>(c);
    for (std::size_t i = 0; i < counts[c]; ++i) {
      items.push_back(Sample{
          .id = "syn-" + std::to_string(c) + "-" + std::to_string(i),
          .label = cls,
          .provenance = Provenance::synthetic,
          .data = generate(cls, params, derive_seed(seed, {c, i})),
      });
    }
  }
  return LabeledDataset(std::move(items));
}

}  // namespace wafer
