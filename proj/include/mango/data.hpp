#pragma once

// Dataset ingestion and the samplers that feed training: unpaired batch
// draws, feature-index sampling (shared between input and translated
// features), and the discriminator's random-patch/rotation extraction.

#include "mango/config.hpp"
#include "mango/image.hpp"
#include "mango/rng.hpp"
#include "mango/tensor.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mango {

enum class Domain { A, B };

struct DatasetItem {
  ImageF image;  // [-1,1], image_size x image_size
  SegMap seg;    // empty for domain B
  bool has_seg = false;
  std::string name;  // basename, e.g. "img_00000.png"
};

// Layout: root/images/*.png (8-bit RGB); domain A adds root/segs/*.png
// (8-bit grayscale labels, same basename). Images are center-cropped square
// then scaled to image_size on access; decodes are cached.
class DomainDataset {
 public:
  static DomainDataset load(const std::string& root, Domain domain, const ExperimentConfig& cfg);

  int size() const { return static_cast<int>(records_.size()); }
  Domain domain() const { return domain_; }
  const std::string& root() const { return root_; }

  // Lazily decodes, validates, and caches record i.
  const DatasetItem& item(int i) const;

 private:
  struct Record {
    std::string image_path;
    std::string seg_path;  // empty for B
    std::string name;
  };

  std::string root_;
  Domain domain_ = Domain::A;
  int image_size_ = 0;
  int num_classes_ = 0;
  std::vector<Record> records_;
  mutable std::vector<std::unique_ptr<DatasetItem>> cache_;
};

struct UnpairedBatch {
  std::vector<const DatasetItem*> a;
  std::vector<const DatasetItem*> b;
  std::vector<int> indices_a;
  std::vector<int> indices_b;
};

// Independent uniform draws from each domain; per slot the A index is drawn
// before the B index (pinned for reproducibility).
UnpairedBatch sample_unpaired_batch(const DomainDataset& ds_a, const DomainDataset& ds_b,
                                    int batch_size, Rng& rng);

// n unique uniform flat indices into an h*w feature map.
std::vector<int> sample_feature_indices(int h, int w, int n, Rng& rng);

struct Patch {
  ImageF data;          // patch_size x patch_size crop, rotation applied
  int image_index = 0;  // position within the source batch
  int top = 0, left = 0;
  double rotation_deg = 0.0;
};

struct PatchBatch {
  std::vector<Patch> patches;
  int patch_size = 0;
  bool right_angle = true;
};

// patches_per_image crops per image; locations uniform over valid top-lefts,
// rotations uniform over rotation_set. Right-angle rotations are exact index
// permutations; anything else uses bilinear resampling with reflection
// padding. Per-patch draw order: top, left, rotation.
PatchBatch extract_patches(const std::vector<const ImageF*>& images, const ExperimentConfig& cfg,
                           Rng& rng);

// Adjoint of (crop then rotate): un-rotates the patch gradient and adds it
// into the source image gradient at the recorded location.
void scatter_patch_gradient(const ImageF& gpatch, const Patch& rec, bool right_angle,
                            ImageF& gimage);

}  // namespace mango
