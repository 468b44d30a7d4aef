#pragma once

// Procedural two-domain toy benchmark: flat-shaded geometric scenes with
// exact segmentation masks (domain A) and the same scene family rendered
// with per-class textures, an illumination gradient, and pixel noise
// (domain B). Viewpoint is a genuine variable: scenes are defined in a 2D
// world frame and projected through an affine view transform built from
// (azimuth, elevation, distance).

#include "mango/rng.hpp"
#include "mango/tensor.hpp"

#include <string>
#include <utility>
#include <vector>

namespace mango {

enum class SceneStyle { SIM_FLAT, REAL_TEXTURED };

enum class ShapeKind { Rectangle, Circle, Triangle };

struct SceneObject {
  ShapeKind kind = ShapeKind::Rectangle;
  double cx = 0.0, cy = 0.0;   // world-frame center
  double rot_deg = 0.0;        // in-plane orientation
  double size = 0.3;           // half-extent in world units
  double aspect = 1.0;         // y half-extent / x half-extent
  int class_id = 1;            // in [1, num_classes)
};

struct Viewpoint {
  double azimuth_deg = 0.0;
  double elevation_deg = 60.0;
  double distance = 1.0;
};

// Style inputs that must be pinned inside the spec so rendering stays a pure
// function of (spec, size): illumination is fixed per dataset, noise per image.
struct StyleParams {
  double illum_dx = 0.0;
  double illum_dy = 0.0;
  double illum_strength = 0.0;
  std::uint64_t noise_seed = 0;
  double noise_sigma = 0.02;
};

struct SceneSpec {
  std::vector<SceneObject> objects;  // painter's order: later entries on top
  Viewpoint view;
  SceneStyle style = SceneStyle::SIM_FLAT;
  int num_classes = 2;
  StyleParams style_params;
};

// Uniform viewpoint box, parsed from "az0:az1,el0:el1,d0:d1".
struct ViewRange {
  double az0 = -45.0, az1 = 45.0;
  double el0 = 30.0, el1 = 75.0;
  double d0 = 0.8, d1 = 1.3;

  static ViewRange parse(const std::string& text);
  std::string str() const;
};

// Flat class colors (SIM) and textured base colors (REAL), deterministic in
// the class id. Exposed for tests. RGB in [-1, 1].
void sim_class_color(int class_id, float rgb[3]);
void real_class_color(int class_id, float rgb[3]);

// Deterministic given spec. Image in [-1,1]; labels in [0, num_classes).
// The segmentation depends only on geometry, never on style.
std::pair<ImageF, SegMap> render_scene(const SceneSpec& spec, int size);

// Random scene of 3..6 objects; viewpoint drawn uniformly from the range.
SceneSpec sample_scene(Rng& rng, int num_classes, SceneStyle style, const ViewRange& range);

struct GenerateResult {
  std::string manifest_path;
  int count = 0;
};

// Writes images/ (and segs/ iff SIM_FLAT) plus manifest.json under out_dir.
GenerateResult generate_domain(const std::string& out_dir, int n_images, SceneStyle style,
                               const ViewRange& range, long long seed, int num_classes,
                               int image_size);

}  // namespace mango
