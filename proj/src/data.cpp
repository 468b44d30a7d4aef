#include "mango/data.hpp"

#include "mango/png_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <stdexcept>

namespace mango {

namespace fs = std::filesystem;

namespace {

// Center crop to square, then scale to side pixels (bilinear for images).
ImageF prepare_image(const ImageF& raw, int side) {
  const int sq = std::min(raw.height, raw.width);
  const int top = (raw.height - sq) / 2;
  const int left = (raw.width - sq) / 2;
  ImageF cropped = (sq == raw.height && sq == raw.width) ? raw : crop(raw, top, left, sq, sq);
  if (sq == side) return cropped;
  return resize(cropped, side, side, Filter::Bilinear);
}

// Same geometry for labels, nearest sampling in both directions.
SegMap prepare_seg(const SegMap& raw, int side) {
  const int sq = static_cast<int>(std::min(raw.rows(), raw.cols()));
  const int top = (static_cast<int>(raw.rows()) - sq) / 2;
  const int left = (static_cast<int>(raw.cols()) - sq) / 2;
  SegMap cropped = raw.block(top, left, sq, sq);
  if (sq == side) return cropped;
  SegMap out(side, side);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c)
      out(r, c) = cropped(detail::nearest_src_index(r, sq, side),
                          detail::nearest_src_index(c, sq, side));
  return out;
}

}  // namespace

DomainDataset DomainDataset::load(const std::string& root, Domain domain,
                                  const ExperimentConfig& cfg) {
  DomainDataset ds;
  ds.root_ = root;
  ds.domain_ = domain;
  ds.image_size_ = cfg.image_size;
  ds.num_classes_ = cfg.num_classes;

  const fs::path images_dir = fs::path(root) / "images";
  if (!fs::is_directory(images_dir))
    throw std::runtime_error("dataset has no images/ directory: " + root);

  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(images_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png")
      names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  if (names.empty()) throw std::runtime_error("dataset has no PNG images: " + root);

  const fs::path segs_dir = fs::path(root) / "segs";
  if (domain == Domain::B && fs::is_directory(segs_dir))
    std::cerr << "warning: domain-B dataset has a segs/ directory; segmentations are ignored: "
              << root << "\n";

  for (const auto& name : names) {
    Record rec;
    rec.name = name;
    rec.image_path = (images_dir / name).string();
    if (domain == Domain::A) {
      const fs::path seg = segs_dir / name;
      if (!fs::is_regular_file(seg))
        throw std::runtime_error("missing segmentation for domain-A image: " + seg.string());
      rec.seg_path = seg.string();
    }
    ds.records_.push_back(std::move(rec));
  }
  ds.cache_.resize(ds.records_.size());
  return ds;
}

const DatasetItem& DomainDataset::item(int i) const {
  require(i >= 0 && i < size(), "dataset index out of range");
  auto& slot = cache_[static_cast<std::size_t>(i)];
  if (slot) return *slot;

  const Record& rec = records_[static_cast<std::size_t>(i)];
  auto item = std::make_unique<DatasetItem>();
  item->name = rec.name;
  ImageF raw = read_image_rgb(rec.image_path);
  if (!rec.seg_path.empty()) {
    SegMap seg = read_segmentation(rec.seg_path);
    if (seg.rows() != raw.height || seg.cols() != raw.width)
      throw std::runtime_error("image/segmentation size mismatch (" +
                               std::to_string(raw.height) + "x" + std::to_string(raw.width) +
                               " vs " + std::to_string(seg.rows()) + "x" +
                               std::to_string(seg.cols()) + "): " + rec.seg_path);
    const int max_label = seg.maxCoeff();
    if (max_label >= num_classes_)
      throw std::runtime_error("segmentation label " + std::to_string(max_label) +
                               " >= num_classes " + std::to_string(num_classes_) + ": " +
                               rec.seg_path);
    item->seg = prepare_seg(seg, image_size_);
    item->has_seg = true;
  }
  item->image = prepare_image(raw, image_size_);
  slot = std::move(item);
  return *slot;
}

UnpairedBatch sample_unpaired_batch(const DomainDataset& ds_a, const DomainDataset& ds_b,
                                    int batch_size, Rng& rng) {
  require(ds_a.size() > 0 && ds_b.size() > 0, "sample_unpaired_batch: empty dataset");
  require(batch_size > 0, "sample_unpaired_batch: batch_size must be positive");
  UnpairedBatch batch;
  for (int k = 0; k < batch_size; ++k) {
    const int ia = static_cast<int>(rng.below(static_cast<std::uint64_t>(ds_a.size())));
    const int ib = static_cast<int>(rng.below(static_cast<std::uint64_t>(ds_b.size())));
    batch.indices_a.push_back(ia);
    batch.indices_b.push_back(ib);
    batch.a.push_back(&ds_a.item(ia));
    batch.b.push_back(&ds_b.item(ib));
  }
  return batch;
}

std::vector<int> sample_feature_indices(int h, int w, int n, Rng& rng) {
  require(h > 0 && w > 0, "sample_feature_indices: non-positive feature map");
  require(n >= 1, "sample_feature_indices: n must be positive");
  require(n <= h * w, "sample_feature_indices: n exceeds h*w");
  return rng.sample_without_replacement(h * w, n);
}

PatchBatch extract_patches(const std::vector<const ImageF*>& images, const ExperimentConfig& cfg,
                           Rng& rng) {
  PatchBatch batch;
  batch.patch_size = cfg.patch_size;
  batch.right_angle = cfg.right_angle_rotations();
  const int ps = cfg.patch_size;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const ImageF& img = *images[i];
    require(ps <= img.height && ps <= img.width, "extract_patches: patch_size exceeds image");
    for (int k = 0; k < cfg.patches_per_image; ++k) {
      Patch p;
      p.image_index = static_cast<int>(i);
      p.top = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height - ps + 1)));
      p.left = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.width - ps + 1)));
      p.rotation_deg =
          cfg.rotation_set[rng.below(static_cast<std::uint64_t>(cfg.rotation_set.size()))];
      ImageF cropped = crop(img, p.top, p.left, ps, ps);
      if (batch.right_angle) {
        const int quarter = static_cast<int>(std::llround(p.rotation_deg / 90.0)) % 4;
        p.data = rot90(cropped, quarter);
      } else {
        p.data = rotate_bilinear(cropped, p.rotation_deg);
      }
      batch.patches.push_back(std::move(p));
    }
  }
  return batch;
}

void scatter_patch_gradient(const ImageF& gpatch, const Patch& rec, bool right_angle,
                            ImageF& gimage) {
  ImageF unrot;
  if (right_angle) {
    const int quarter = static_cast<int>(std::llround(rec.rotation_deg / 90.0)) % 4;
    unrot = rot90(gpatch, (4 - quarter) % 4);
  } else {
    unrot = rotate_bilinear_adjoint(gpatch, rec.rotation_deg);
  }
  add_crop_grad(gimage, unrot, rec.top, rec.left);
}

}  // namespace mango
