#include "boxref/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace boxref {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// sigma <= 0 draws nothing from the stream, keeping zero-noise specs exact.
double gauss(std::mt19937& rng, double sigma) {
  if (sigma <= 0) return 0.0;
  std::normal_distribution<double> d(0.0, sigma);
  return d(rng);
}

double uni(std::mt19937& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(rng);
}

struct Rgb {
  double r, g, b;
};

struct ObjectShape {
  ObjectKind kind;
  // polygon boundary in unit coordinates (radius per sorted angle)
  std::vector<double> poly_angles, poly_radii;
};

bool inside_shape(const ObjectShape& s, double u, double v) {
  // (u,v) in unit half-extent coordinates: the shape fits in [-1,1]^2
  switch (s.kind) {
    case ObjectKind::kEllipse:
      return u * u + v * v <= 1.0;
    case ObjectKind::kRectangle:
      return std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
    case ObjectKind::kPolygon: {
      // star-shaped about the origin: compare radius against the boundary
      const double r = std::hypot(u, v);
      if (r < 1e-9) return true;
      double phi = std::atan2(v, u);
      const int n = static_cast<int>(s.poly_angles.size());
      int k = 0;
      while (k < n && s.poly_angles[k] <= phi) ++k;
      const int i0 = (k + n - 1) % n, i1 = k % n;
      double a0 = s.poly_angles[i0], a1 = s.poly_angles[i1];
      if (i1 <= i0) {  // wrap-around sector
        if (phi < a0) a0 -= 2 * M_PI;
        else a1 += 2 * M_PI;
      }
      const double t = (a1 - a0) > 1e-12 ? (phi - a0) / (a1 - a0) : 0.0;
      const double rb = s.poly_radii[i0] + t * (s.poly_radii[i1] - s.poly_radii[i0]);
      return r <= rb;
    }
  }
  return false;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (num_sequences < 1 || frames_per_sequence < 1) throw std::invalid_argument("counts must be >= 1");
  if (image_size < 16) throw std::invalid_argument("image_size too small");
  if (kinds.empty()) throw std::invalid_argument("kinds must be non-empty");
  if (!(min_object_frac > 0 && max_object_frac >= min_object_frac && max_object_frac < 0.9))
    throw std::invalid_argument("object fraction range invalid");
  if (motion_frac < 0 || scale_wobble < 0 || deform_wobble < 0 || background_noise < 0)
    throw std::invalid_argument("noise amplitudes must be nonnegative");
}

Sequence generate_sequence(const SyntheticSpec& spec, int index) {
  spec.validate();
  std::mt19937 rng(static_cast<std::uint32_t>(
      splitmix64(spec.seed ^ (0xA5A5A5A5ULL + 0x1000003ULL * static_cast<std::uint64_t>(index)))));
  const int sz = spec.image_size;

  ObjectShape shape;
  shape.kind = spec.kinds[static_cast<std::size_t>(index) % spec.kinds.size()];
  if (shape.kind == ObjectKind::kPolygon) {
    const int nv = 7;
    for (int i = 0; i < nv; ++i)
      shape.poly_angles.push_back(-M_PI + (i + uni(rng, 0.15, 0.85)) * 2 * M_PI / nv);
    std::sort(shape.poly_angles.begin(), shape.poly_angles.end());
    for (int i = 0; i < nv; ++i) shape.poly_radii.push_back(uni(rng, 0.6, 1.0));
  }

  // appearance
  const Rgb bg0{uni(rng, 0.1, 0.9), uni(rng, 0.1, 0.9), uni(rng, 0.1, 0.9)};
  const Rgb bg1{uni(rng, 0.1, 0.9), uni(rng, 0.1, 0.9), uni(rng, 0.1, 0.9)};
  const double gdirx = uni(rng, -1, 1), gdiry = uni(rng, -1, 1);
  Rgb fg{uni(rng, 0.0, 1.0), uni(rng, 0.0, 1.0), uni(rng, 0.0, 1.0)};
  {
    const Rgb bgm{(bg0.r + bg1.r) / 2, (bg0.g + bg1.g) / 2, (bg0.b + bg1.b) / 2};
    const double d =
        std::abs(fg.r - bgm.r) + std::abs(fg.g - bgm.g) + std::abs(fg.b - bgm.b);
    if (d < 0.6) {  // push the object color away from the background mean
      fg.r = bgm.r > 0.5 ? std::max(0.0, bgm.r - 0.45) : std::min(1.0, bgm.r + 0.45);
      fg.g = bgm.g > 0.5 ? std::max(0.0, bgm.g - 0.45) : std::min(1.0, bgm.g + 0.45);
      fg.b = 1.0 - bgm.b;
    }
  }
  const double tex_fx = uni(rng, 0.05, 0.2), tex_fy = uni(rng, 0.05, 0.2);
  const double tex_phase = uni(rng, 0, 2 * M_PI);

  // motion state
  const double min_px = spec.min_object_frac * sz, max_px = spec.max_object_frac * sz;
  double w = uni(rng, min_px, max_px);
  double h = uni(rng, min_px, max_px);
  double place_lo = max_px / 2 + 2, place_hi = sz - max_px / 2 - 2;
  if (place_hi < place_lo) place_lo = place_hi = sz / 2.0;
  double cx = uni(rng, place_lo, place_hi);
  double cy = uni(rng, place_lo, place_hi);
  double vx = gauss(rng, spec.motion_frac * sz);
  double vy = gauss(rng, spec.motion_frac * sz);
  const double vmax = 2.5 * spec.motion_frac * sz;

  Sequence seq;
  char idbuf[32];
  std::snprintf(idbuf, sizeof(idbuf), "seq_%04d", index);
  seq.id = idbuf;

  std::normal_distribution<float> pix_noise(0.0f, 1.0f);
  for (int t = 0; t < spec.frames_per_sequence; ++t) {
    if (t > 0) {
      vx = std::clamp(vx + gauss(rng, spec.motion_frac * sz * 0.5), -vmax, vmax);
      vy = std::clamp(vy + gauss(rng, spec.motion_frac * sz * 0.5), -vmax, vmax);
      cx += vx;
      cy += vy;
      w = std::clamp(w * std::exp(gauss(rng, spec.scale_wobble)), min_px, max_px);
      h = std::clamp(h * std::exp(gauss(rng, spec.scale_wobble)), min_px, max_px);
      const double deform = gauss(rng, spec.deform_wobble);
      w = std::clamp(w * std::exp(deform), min_px, max_px);
      h = std::clamp(h * std::exp(-deform), min_px, max_px);
      // bounce off borders, keeping the object fully inside
      const double mx = w / 2 + 1, my = h / 2 + 1;
      if (cx < mx) { cx = mx; vx = std::abs(vx); }
      if (cx > sz - mx) { cx = sz - mx; vx = -std::abs(vx); }
      if (cy < my) { cy = my; vy = std::abs(vy); }
      if (cy > sz - my) { cy = sz - my; vy = -std::abs(vy); }
    }

    Image frame({3, sz, sz});
    Mask mask({sz, sz});
    const double illum = 1.0 + 0.04 * std::sin(0.31 * t + tex_phase);
    const double norm = std::max(1e-9, std::abs(gdirx) + std::abs(gdiry));
    for (int y = 0; y < sz; ++y)
      for (int x = 0; x < sz; ++x) {
        const double a =
            0.5 + 0.5 * (gdirx * (x / double(sz) - 0.5) + gdiry * (y / double(sz) - 0.5)) / norm;
        double r = bg0.r + (bg1.r - bg0.r) * a;
        double g = bg0.g + (bg1.g - bg0.g) * a;
        double b = bg0.b + (bg1.b - bg0.b) * a;
        if (spec.background_noise > 0) {
          r += spec.background_noise * pix_noise(rng);
          g += spec.background_noise * pix_noise(rng);
          b += spec.background_noise * pix_noise(rng);
        }
        frame(0, y, x) = static_cast<float>(std::clamp(r * illum, 0.0, 1.0));
        frame(1, y, x) = static_cast<float>(std::clamp(g * illum, 0.0, 1.0));
        frame(2, y, x) = static_cast<float>(std::clamp(b * illum, 0.0, 1.0));
      }

    const int x0 = std::max(0, static_cast<int>(std::floor(cx - w / 2 - 1)));
    const int x1 = std::min(sz - 1, static_cast<int>(std::ceil(cx + w / 2 + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - h / 2 - 1)));
    const int y1 = std::min(sz - 1, static_cast<int>(std::ceil(cy + h / 2 + 1)));
    int minx = sz, maxx = -1, miny = sz, maxy = -1;
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double u = (x + 0.5 - cx) / (w / 2);
        const double v = (y + 0.5 - cy) / (h / 2);
        if (!inside_shape(shape, u, v)) continue;
        mask(y, x) = 1.0f;
        minx = std::min(minx, x);
        maxx = std::max(maxx, x);
        miny = std::min(miny, y);
        maxy = std::max(maxy, y);
        const double shade = 0.8 + 0.2 * (1.0 - std::min(1.0, u * u + v * v));
        const double tex = 1.0 + 0.08 * std::sin(tex_fx * x + tex_fy * y + tex_phase);
        frame(0, y, x) = static_cast<float>(std::clamp(fg.r * shade * tex * illum, 0.0, 1.0));
        frame(1, y, x) = static_cast<float>(std::clamp(fg.g * shade * tex * illum, 0.0, 1.0));
        frame(2, y, x) = static_cast<float>(std::clamp(fg.b * shade * tex * illum, 0.0, 1.0));
      }
    if (maxx < 0) throw std::logic_error("generator produced an empty mask");

    seq.frames.push_back(std::move(frame));
    seq.masks.push_back(std::move(mask));
    seq.gt.emplace_back(Box{static_cast<double>(minx), static_cast<double>(miny),
                            static_cast<double>(maxx - minx + 1),
                            static_cast<double>(maxy - miny + 1)});
  }
  return seq;
}

std::vector<Sequence> generate_synthetic_dataset(const SyntheticSpec& spec) {
  std::vector<Sequence> out;
  out.reserve(static_cast<std::size_t>(spec.num_sequences));
  for (int i = 0; i < spec.num_sequences; ++i) out.push_back(generate_sequence(spec, i));
  return out;
}

}  // namespace boxref
