#include "mango/synthgen.hpp"

#include "mango/png_io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace mango {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

double fract(double x) { return x - std::floor(x); }

// Golden-ratio hue walk keeps arbitrary class counts visually distinct.
void hsv_to_rgb(double h, double s, double v, float rgb[3]) {
  const double i = std::floor(h * 6.0);
  const double f = h * 6.0 - i;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - f * s);
  const double t = v * (1.0 - (1.0 - f) * s);
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(i) % 6) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
  rgb[0] = static_cast<float>(2.0 * r - 1.0);
  rgb[1] = static_cast<float>(2.0 * g - 1.0);
  rgb[2] = static_cast<float>(2.0 * b - 1.0);
}

// Object-space membership test; local coords already unrotated and unscaled.
bool inside_shape(ShapeKind kind, double lx, double ly, double aspect) {
  const double ay = ly / aspect;
  switch (kind) {
    case ShapeKind::Rectangle: return std::abs(lx) <= 1.0 && std::abs(ay) <= 1.0;
    case ShapeKind::Circle: return lx * lx + ay * ay <= 1.0;
    case ShapeKind::Triangle: return ay >= -1.0 && ay <= 1.0 - 2.0 * std::abs(lx);
  }
  return false;
}

// Class-keyed procedural texture in world coordinates, range [-1, 1].
double texture_value(int class_id, double u, double v) {
  const double f1 = 3.0 + (class_id % 4);
  const double f2 = 2.0 + ((class_id * 7) % 5);
  const double ph = 2.0 * kPi * fract(0.37 * class_id + 0.11);
  return std::sin(2.0 * kPi * f1 * u + ph) * std::sin(2.0 * kPi * f2 * v + 0.5 * ph);
}

}  // namespace

void sim_class_color(int class_id, float rgb[3]) {
  if (class_id == 0) {
    rgb[0] = rgb[1] = rgb[2] = 0.75f;  // bright flat background
    return;
  }
  hsv_to_rgb(fract(0.61803398875 * class_id), 0.9, 0.95, rgb);
}

void real_class_color(int class_id, float rgb[3]) {
  if (class_id == 0) {
    rgb[0] = -0.40f;
    rgb[1] = -0.45f;
    rgb[2] = -0.50f;  // dark tabletop
    return;
  }
  hsv_to_rgb(fract(0.61803398875 * class_id + 0.45), 0.55, 0.45, rgb);
}

std::pair<ImageF, SegMap> render_scene(const SceneSpec& spec, int size) {
  require(size >= 16, "render_scene: size must be >= 16");
  require(spec.num_classes >= 1, "render_scene: num_classes must be >= 1");
  for (const auto& o : spec.objects)
    require(o.class_id >= 1 && o.class_id < spec.num_classes,
            "render_scene: object class id outside [1, num_classes)");

  const double az = spec.view.azimuth_deg * kPi / 180.0;
  const double el = spec.view.elevation_deg * kPi / 180.0;
  const double sy = std::max(0.05, std::sin(el));  // foreshortening along y
  const double dist = std::max(0.05, spec.view.distance);
  const double ca = std::cos(az), sa = std::sin(az);

  // Precompute object-local rotations.
  std::vector<double> oc(spec.objects.size()), os(spec.objects.size());
  for (std::size_t k = 0; k < spec.objects.size(); ++k) {
    const double th = spec.objects[k].rot_deg * kPi / 180.0;
    oc[k] = std::cos(th);
    os[k] = std::sin(th);
  }

  ImageF img(3, size, size);
  SegMap seg = SegMap::Zero(size, size);
  const bool textured = spec.style == SceneStyle::REAL_TEXTURED;
  const StyleParams& sp = spec.style_params;

  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      // pixel -> NDC -> world (inverse of ndc = (1/dist)*diag(1,sy)*R(az)*world)
      const double nx = 2.0 * c / (size - 1) - 1.0;
      const double ny = 2.0 * r / (size - 1) - 1.0;
      const double vx = nx * dist;
      const double vy = ny * dist / sy;
      const double wx = ca * vx + sa * vy;
      const double wy = -sa * vx + ca * vy;

      int label = 0;
      int top = -1;
      for (int k = static_cast<int>(spec.objects.size()) - 1; k >= 0; --k) {
        const SceneObject& o = spec.objects[static_cast<std::size_t>(k)];
        const double dx = wx - o.cx, dy = wy - o.cy;
        const double lx = (oc[static_cast<std::size_t>(k)] * dx +
                           os[static_cast<std::size_t>(k)] * dy) / o.size;
        const double ly = (-os[static_cast<std::size_t>(k)] * dx +
                           oc[static_cast<std::size_t>(k)] * dy) / o.size;
        if (inside_shape(o.kind, lx, ly, o.aspect)) {
          label = o.class_id;
          top = k;
          break;
        }
      }
      seg(r, c) = label;

      float rgb[3];
      if (!textured) {
        sim_class_color(label, rgb);
      } else {
        real_class_color(label, rgb);
        const double amp = top >= 0 ? 0.12 : 0.08;
        const double tex = amp * texture_value(label, wx, wy);
        const double gx = static_cast<double>(c) / (size - 1) - 0.5;
        const double gy = static_cast<double>(r) / (size - 1) - 0.5;
        const double illum = 1.0 - sp.illum_strength * (0.5 + sp.illum_dx * gx + sp.illum_dy * gy);
        for (int ch = 0; ch < 3; ++ch) {
          // illumination scales reflectance ((v+1)/2), texture adds on top
          const double refl = (rgb[ch] + 1.0) * 0.5 * illum + 0.5 * tex;
          rgb[ch] = static_cast<float>(2.0 * refl - 1.0);
        }
      }
      const int p = r * size + c;
      img.m(0, p) = rgb[0];
      img.m(1, p) = rgb[1];
      img.m(2, p) = rgb[2];
    }
  }

  if (textured && sp.noise_sigma > 0.0) {
    Rng noise(sp.noise_seed);
    for (int p = 0; p < img.pixels(); ++p)
      for (int ch = 0; ch < 3; ++ch)
        img.m(ch, p) += static_cast<float>(sp.noise_sigma * noise.normal());
  }
  img.m = img.m.cwiseMax(-1.0f).cwiseMin(1.0f);
  return {std::move(img), std::move(seg)};
}

ViewRange ViewRange::parse(const std::string& text) {
  ViewRange v;
  double vals[6];
  const int got = std::sscanf(text.c_str(), "%lf:%lf,%lf:%lf,%lf:%lf", &vals[0], &vals[1],
                              &vals[2], &vals[3], &vals[4], &vals[5]);
  if (got != 6)
    throw std::runtime_error("malformed view-range (expected az0:az1,el0:el1,d0:d1): " + text);
  v.az0 = vals[0]; v.az1 = vals[1];
  v.el0 = vals[2]; v.el1 = vals[3];
  v.d0 = vals[4]; v.d1 = vals[5];
  if (v.az1 < v.az0 || v.el1 < v.el0 || v.d1 < v.d0 || v.d0 <= 0.0)
    throw std::runtime_error("malformed view-range (empty interval or non-positive distance): " +
                             text);
  return v;
}

std::string ViewRange::str() const {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%g:%g,%g:%g,%g:%g", az0, az1, el0, el1, d0, d1);
  return buf;
}

SceneSpec sample_scene(Rng& rng, int num_classes, SceneStyle style, const ViewRange& range) {
  require(num_classes >= 2, "sample_scene: need num_classes >= 2 to place objects");
  SceneSpec spec;
  spec.style = style;
  spec.num_classes = num_classes;
  spec.view.azimuth_deg = rng.uniform(range.az0, range.az1);
  spec.view.elevation_deg = rng.uniform(range.el0, range.el1);
  spec.view.distance = rng.uniform(range.d0, range.d1);
  const int n_obj = static_cast<int>(rng.uniform_int(3, 6));
  for (int k = 0; k < n_obj; ++k) {
    SceneObject o;
    o.kind = static_cast<ShapeKind>(rng.uniform_int(0, 2));
    o.cx = rng.uniform(-0.6, 0.6);
    o.cy = rng.uniform(-0.6, 0.6);
    o.rot_deg = rng.uniform(0.0, 360.0);
    o.size = rng.uniform(0.15, 0.4);
    o.aspect = rng.uniform(0.5, 1.0);
    // cycle through foreground classes so every dataset covers all of them
    o.class_id = 1 + static_cast<int>((rng.below(1u << 16) + static_cast<std::uint64_t>(k)) %
                                      static_cast<std::uint64_t>(num_classes - 1));
    spec.objects.push_back(o);
  }
  return spec;
}

GenerateResult generate_domain(const std::string& out_dir, int n_images, SceneStyle style,
                               const ViewRange& range, long long seed, int num_classes,
                               int image_size) {
  require(n_images > 0, "generate_domain: n_images must be positive");
  const fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root / "images", ec);
  if (ec) throw std::runtime_error("cannot create output directory: " + (root / "images").string());
  const bool with_segs = style == SceneStyle::SIM_FLAT;
  if (with_segs) {
    fs::create_directories(root / "segs", ec);
    if (ec) throw std::runtime_error("cannot create output directory: " + (root / "segs").string());
  }

  // Illumination direction/strength is a dataset-level property.
  Rng ds_rng = Rng::stream(static_cast<std::uint64_t>(seed), rng_stream::kSceneGen);
  StyleParams sp;
  if (style == SceneStyle::REAL_TEXTURED) {
    const double ang = ds_rng.uniform(0.0, 2.0 * kPi);
    sp.illum_dx = std::cos(ang);
    sp.illum_dy = std::sin(ang);
    sp.illum_strength = 0.35;
  }

  json manifest;
  manifest["style"] = style == SceneStyle::SIM_FLAT ? "sim" : "real";
  manifest["seed"] = seed;
  manifest["count"] = n_images;
  manifest["num_classes"] = num_classes;
  manifest["image_size"] = image_size;
  manifest["view_range"] = range.str();
  manifest["images"] = json::array();

  for (int i = 0; i < n_images; ++i) {
    // one independent stream per image index
    Rng rng = Rng::stream(static_cast<std::uint64_t>(seed),
                          0x100000ULL + static_cast<std::uint64_t>(i));
    SceneSpec spec = sample_scene(rng, num_classes, style, range);
    spec.style_params = sp;
    spec.style_params.noise_seed = mix64(static_cast<std::uint64_t>(seed)) ^
                                   mix64(0x200000ULL + static_cast<std::uint64_t>(i));
    auto [img, seg] = render_scene(spec, image_size);

    char name[32];
    std::snprintf(name, sizeof name, "img_%05d.png", i);
    write_image_rgb((root / "images" / name).string(), img);
    if (with_segs) write_segmentation((root / "segs" / name).string(), seg);

    json entry;
    entry["file"] = name;
    entry["azimuth"] = spec.view.azimuth_deg;
    entry["elevation"] = spec.view.elevation_deg;
    entry["distance"] = spec.view.distance;
    manifest["images"].push_back(entry);
  }

  const std::string manifest_path = (root / "manifest.json").string();
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("cannot write manifest: " + manifest_path);
  out << manifest.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing manifest: " + manifest_path);
  return GenerateResult{manifest_path, n_images};
}

}  // namespace mango
