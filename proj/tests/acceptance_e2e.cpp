// Acceptance criteria 9-10: end-to-end toy sim2real benchmark. Trains six
// models (full, no-SegNCE, basic-discriminator; 2 seeds each) at 64x64 and
// checks the FID reduction and the ablation ordering. Prints one PASS/FAIL
// line per criterion; the exit code is the number of failed criteria.
//
// Runtime is dominated by training: roughly 5-10 minutes per run on one CPU
// core. Artifacts are left on disk (path printed below) for inspection.

#include "mango/config.hpp"
#include "mango/data.hpp"
#include "mango/eval.hpp"
#include "mango/synthgen.hpp"
#include "mango/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>
#include <unistd.h>
#include <vector>

using namespace mango;
namespace fs = std::filesystem;

namespace {

// Pinned benchmark definition (criterion 9).
constexpr int kImageSize = 64;
constexpr int kNumClasses = 6;
constexpr int kCountA = 500;        // varied viewpoint, flat sim style
constexpr int kCountB = 200;        // single fixed viewpoint, textured style
constexpr long long kSeedA = 11, kSeedB = 12;
constexpr const char* kFixedView = "15:15,50:50,1.0:1.0";
constexpr const char* kEmbedder = "down8";
constexpr double kReductionFactor = 0.7;  // pinned: >= 30% FID reduction
const long long kSeeds[2] = {0, 1};       // pinned training seeds (criterion 10 averages)

ExperimentConfig benchmark_config() {
  // Shared by every arm; ablations change only their own deltas.
  ExperimentConfig cfg = parse_config(R"({
    "num_classes": 6, "image_size": 64,
    "g_base_width": 16, "g_res_blocks": 4, "d_base_width": 32,
    "head_hidden": 64, "embed_dim": 64,
    "num_features_per_layer": 128, "segnce_features_per_layer": 128,
    "patch_size": 16, "patches_per_image": 8, "d_steps_per_g": 2,
    "total_steps": 2000, "checkpoint_every": 1000
  })");
  return cfg;
}

double fid_between(const std::string& dir_x, const std::string& dir_y) {
  const std::unique_ptr<Embedder> emb = make_embedder(kEmbedder);
  const Eigen::MatrixXd fx = embed_files(list_image_files(dir_x), *emb);
  const Eigen::MatrixXd fy = embed_files(list_image_files(dir_y), *emb);
  return compute_fid(fx, fy);
}

struct ArmResult {
  double fid[2] = {0.0, 0.0};
  double mean() const { return 0.5 * (fid[0] + fid[1]); }
};

// Trains one arm at one seed, translates domain A, returns FID(translated, B).
double run_arm(const ExperimentConfig& base, long long seed, const std::string& name,
               const fs::path& work) {
  ExperimentConfig cfg = base;
  cfg.seed = seed;
  const std::string run_dir = (work / (name + "_s" + std::to_string(seed))).string();
  const std::string tr_dir = run_dir + "_trA";

  const auto t0 = std::chrono::steady_clock::now();
  const DomainDataset ds_a = DomainDataset::load((work / "A").string(), Domain::A, cfg);
  const DomainDataset ds_b = DomainDataset::load((work / "B").string(), Domain::B, cfg);
  Trainer trainer(cfg);
  const TrainResult res = trainer.train(ds_a, ds_b, run_dir);
  translate_dataset(res.final_checkpoint, (work / "A").string(), tr_dir);
  const double fid = fid_between(tr_dir, (work / "B").string());
  const double mins = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  std::printf("info: %s seed %lld: FID(translated-A, B) = %.3f  (%.1f min)\n", name.c_str(), seed,
              fid, mins);
  std::fflush(stdout);
  return fid;
}

}  // namespace

int main() {
  fs::path work;
  if (const char* env = std::getenv("MANGO_E2E_DIR"))
    work = env;
  else
    work = fs::temp_directory_path() / ("mango_accept_e2e_" + std::to_string(::getpid()));
  fs::create_directories(work);
  std::printf("info: benchmark artifacts in %s\n", work.c_str());

  // --- datasets -------------------------------------------------------------
  generate_domain((work / "A").string(), kCountA, SceneStyle::SIM_FLAT, ViewRange{}, kSeedA,
                  kNumClasses, kImageSize);
  generate_domain((work / "B").string(), kCountB, SceneStyle::REAL_TEXTURED,
                  ViewRange::parse(kFixedView), kSeedB, kNumClasses, kImageSize);

  const double fid_base = fid_between((work / "A").string(), (work / "B").string());
  std::printf("info: untranslated FID(A, B) = %.3f; criterion 9 target <= %.3f\n", fid_base,
              kReductionFactor * fid_base);
  std::fflush(stdout);

  // --- arms -------------------------------------------------------------------
  const ExperimentConfig base = benchmark_config();

  ExperimentConfig noseg = base;
  noseg.w_segnce = 0.0;

  ExperimentConfig basicd = base;  // full-image discriminator, no rotation
  basicd.patch_size = kImageSize;
  basicd.patches_per_image = 1;
  basicd.rotation_set = {0.0};

  ArmResult full_r, noseg_r, basicd_r;
  for (int s = 0; s < 2; ++s) full_r.fid[s] = run_arm(base, kSeeds[s], "full", work);
  for (int s = 0; s < 2; ++s) noseg_r.fid[s] = run_arm(noseg, kSeeds[s], "noseg", work);
  for (int s = 0; s < 2; ++s) basicd_r.fid[s] = run_arm(basicd, kSeeds[s], "basicd", work);

  int failures = 0;

  // Criterion 9 is defined over one prescribed training run; seed 0 is it.
  {
    const bool ok = full_r.fid[0] <= kReductionFactor * fid_base;
    std::printf("%s criterion 9: FID %.3f vs target %.3f (untranslated %.3f, >=30%% reduction)\n",
                ok ? "PASS" : "FAIL", full_r.fid[0], kReductionFactor * fid_base, fid_base);
    if (!ok) ++failures;
  }

  // Criterion 10: ordering of 2-seed means, no absolute tolerance.
  {
    const bool ok = full_r.mean() <= noseg_r.mean() && full_r.mean() <= basicd_r.mean();
    std::printf(
        "%s criterion 10: full %.3f <= no-SegNCE %.3f and <= basic-D %.3f (2-seed means)\n",
        ok ? "PASS" : "FAIL", full_r.mean(), noseg_r.mean(), basicd_r.mean());
    if (!ok) ++failures;
  }

  return failures;
}
