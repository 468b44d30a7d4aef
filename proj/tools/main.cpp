// Command-line entry point for the full pipeline: synthetic data generation,
// training, translation, and evaluation. Exit codes: 0 success, 1 usage or
// validation error (nothing meaningful started), 2 runtime error. The final
// stdout line of every command is machine-parsable key=value pairs.

#include "mango/config.hpp"
#include "mango/data.hpp"
#include "mango/diagnostics.hpp"
#include "mango/eval.hpp"
#include "mango/png_io.hpp"
#include "mango/synthgen.hpp"
#include "mango/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

// Validation failures before any real work; mapped to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

long long resolve_seed(const CLI::Option* seed_opt, long long flag_value) {
  if (seed_opt->count() > 0) return flag_value;
  if (const char* env = std::getenv("MANGO_SEED")) {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(env, &pos);
      if (pos != std::string(env).size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw UsageError(std::string("MANGO_SEED is not an integer: ") + env);
    }
  }
  return flag_value;
}

struct GenDataArgs {
  std::string out, style, view_range = "-45:45,30:75,0.8:1.3";
  int n = 0, num_classes = 6, image_size = 64;
  long long seed = 0;
  CLI::Option* seed_opt = nullptr;
};

int run_gen_data(const GenDataArgs& a) {
  if (a.n < 1) throw UsageError("gen-data: --n must be >= 1");
  mango::ViewRange range;
  try {
    range = mango::ViewRange::parse(a.view_range);
  } catch (const std::exception& e) {
    throw UsageError(std::string("gen-data: ") + e.what());
  }
  const long long seed = resolve_seed(a.seed_opt, a.seed);
  const mango::SceneStyle style =
      a.style == "sim" ? mango::SceneStyle::SIM_FLAT : mango::SceneStyle::REAL_TEXTURED;

  const mango::GenerateResult res =
      mango::generate_domain(a.out, a.n, style, range, seed, a.num_classes, a.image_size);
  std::cout << "status=ok out=" << a.out << " count=" << res.count << " style=" << a.style
            << " seed=" << seed << " manifest=" << res.manifest_path << "\n";
  return 0;
}

struct TrainArgs {
  std::string config, domain_a, domain_b, out, resume;
  std::vector<std::string> overrides;
  long long log_every = 50;
};

int run_train(const TrainArgs& a) {
  if (a.resume.empty() && a.config.empty())
    throw UsageError("train: --config is required (or pass --resume)");
  std::optional<mango::Trainer> trainer_slot;
  if (a.resume.empty()) {
    mango::ExperimentConfig cfg;
    try {
      cfg = mango::load_config(a.config, a.overrides);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
    trainer_slot.emplace(cfg);
  } else {
    trainer_slot.emplace(mango::Trainer::resume(a.resume));
  }
  mango::Trainer& trainer = *trainer_slot;

  mango::DomainDataset ds_a, ds_b;
  try {
    ds_a = mango::DomainDataset::load(a.domain_a, mango::Domain::A, trainer.config());
    ds_b = mango::DomainDataset::load(a.domain_b, mango::Domain::B, trainer.config());
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  const auto progress = [&a](const mango::StepMetrics& m) {
    if (a.log_every > 0 && (m.step % a.log_every == 0 || m.step == 1))
      std::cerr << "step " << m.step << " total_G=" << m.report.total_G
                << " total_D=" << m.report.total_D << " d_real=" << m.d_real
                << " d_fake=" << m.d_fake << " (" << m.wall_ms << " ms)\n";
  };
  const mango::TrainResult res = trainer.train(ds_a, ds_b, a.out, progress);
  std::cout << "status=ok checkpoint=" << res.final_checkpoint << " metrics=" << res.metrics_path
            << " steps=" << res.steps_run << " out=" << a.out << "\n";
  return 0;
}

struct TranslateArgs {
  std::string checkpoint, in, out;
};

int run_translate(const TranslateArgs& a) {
  const mango::TranslateResult res = mango::translate_dataset(a.checkpoint, a.in, a.out);
  std::cout << "status=ok out=" << a.out << " count=" << res.count
            << " manifest=" << res.manifest_path << "\n";
  return 0;
}

struct FidArgs {
  std::string x, y, embedder = "down8", features_x, features_y, report = "eval_fid.json";
};

int run_eval_fid(const FidArgs& a) {
  const bool dirs = !a.x.empty() || !a.y.empty();
  const bool files = !a.features_x.empty() || !a.features_y.empty();
  if (dirs == files)
    throw UsageError("eval fid: pass either --x/--y directories or --features-x/--features-y files");
  if (dirs && (a.x.empty() || a.y.empty())) throw UsageError("eval fid: both --x and --y required");
  if (files && (a.features_x.empty() || a.features_y.empty()))
    throw UsageError("eval fid: both --features-x and --features-y required");

  mango::EvalReport report;
  report.metric = "fid";
  Eigen::MatrixXd fx, fy;
  if (dirs) {
    std::unique_ptr<mango::Embedder> embedder;
    try {
      embedder = mango::make_embedder(a.embedder);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
    std::vector<std::string> files_x, files_y;
    try {
      files_x = mango::list_image_files(a.x);
      files_y = mango::list_image_files(a.y);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
    if (files_x.size() < 2 || files_y.size() < 2)
      throw UsageError("eval fid: need at least 2 images per side, got " +
                       std::to_string(files_x.size()) + " and " + std::to_string(files_y.size()));
    fx = mango::embed_files(files_x, *embedder);
    fy = mango::embed_files(files_y, *embedder);
    report.embedder = embedder->name();
    report.dataset_x = a.x;
    report.dataset_y = a.y;
  } else {
    fx = mango::read_features(a.features_x);
    fy = mango::read_features(a.features_y);
    if (fx.rows() < 2 || fy.rows() < 2)
      throw UsageError("eval fid: need at least 2 feature rows per side, got " +
                       std::to_string(fx.rows()) + " and " + std::to_string(fy.rows()));
    report.embedder = "external";
    report.dataset_x = a.features_x;
    report.dataset_y = a.features_y;
  }
  report.count_x = fx.rows();
  report.count_y = fy.rows();
  report.value = mango::compute_fid(fx, fy);
  mango::write_eval_report(a.report, report);
  std::cout << "status=ok metric=fid value=" << fmt(report.value) << " embedder=" << report.embedder
            << " count_x=" << report.count_x << " count_y=" << report.count_y
            << " report=" << a.report << "\n";
  return 0;
}

struct DiversityArgs {
  std::string in, oracle = "l2", report = "eval_diversity.json";
  long long max_pairs = 0;
};

int run_eval_diversity(const DiversityArgs& a) {
  mango::DistanceOracle oracle;
  try {
    oracle = mango::make_distance_oracle(a.oracle);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  std::vector<std::string> files;
  try {
    files = mango::list_image_files(a.in);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (files.size() < 2)
    throw UsageError("eval diversity: need at least 2 images, got " + std::to_string(files.size()));

  std::vector<mango::ImageF> images;
  images.reserve(files.size());
  for (const auto& f : files) images.push_back(mango::read_image_rgb(f));
  const double value = mango::average_pairwise_distance(images, oracle, a.max_pairs);

  const long long n = static_cast<long long>(images.size());
  const long long all_pairs = n * (n - 1) / 2;
  const long long used = (a.max_pairs > 0 && a.max_pairs < all_pairs) ? a.max_pairs : all_pairs;

  mango::EvalReport report;
  report.metric = "diversity";
  report.embedder = oracle.name;
  report.dataset_x = a.in;
  report.count_x = n;
  report.count_y = used;
  report.value = value;
  mango::write_eval_report(a.report, report);
  std::cout << "status=ok metric=diversity value=" << fmt(value) << " oracle=" << oracle.name
            << " count=" << n << " pairs=" << used << " report=" << a.report << "\n";
  return 0;
}

struct LossReportArgs {
  std::string dump;
};

int run_loss_report(const LossReportArgs& a) {
  const mango::FeatureDump dump = mango::read_feature_dump(a.dump);
  const mango::LossReport r = mango::loss_report_from_dump(dump);
  std::cout << "status=ok patchnce_A=" << fmt(r.patchnce_A) << " patchnce_idB=" << fmt(r.patchnce_idB)
            << " segnce=" << fmt(r.segnce) << " gan_G=" << fmt(r.gan_G) << " gan_D=" << fmt(r.gan_D)
            << " total_G=" << fmt(r.total_G) << " total_D=" << fmt(r.total_D) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mango: unpaired sim2real image translation pipeline"};
  app.require_subcommand(1);

  GenDataArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic toy dataset");
  gen->add_option("--out", gen_args.out, "Output dataset directory")->required();
  gen->add_option("--n", gen_args.n, "Number of images")->required();
  gen->add_option("--style", gen_args.style, "Rendering style")
      ->required()
      ->check(CLI::IsMember({"sim", "real"}));
  gen->add_option("--view-range", gen_args.view_range,
                  "Viewpoint box az0:az1,el0:el1,d0:d1 (degrees, degrees, distance)");
  gen_args.seed_opt = gen->add_option("--seed", gen_args.seed, "RNG seed (MANGO_SEED fallback)");
  gen->add_option("--num-classes", gen_args.num_classes, "Segmentation classes incl. background");
  gen->add_option("--image-size", gen_args.image_size, "Square image side in pixels");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a translation model");
  CLI::Option* cfg_opt = train->add_option("--config", train_args.config, "Experiment config JSON");
  train->add_option("--domain-a", train_args.domain_a, "Domain A dataset (with segs/)")->required();
  train->add_option("--domain-b", train_args.domain_b, "Domain B dataset")->required();
  train->add_option("--out", train_args.out, "Run output directory")->required();
  CLI::Option* set_opt =
      train->add_option("--set", train_args.overrides, "Config override key=value (repeatable)");
  train->add_option("--log-every", train_args.log_every, "Progress line period (0 = quiet)");
  train->add_option("--resume", train_args.resume, "Resume from a checkpoint (config comes from it)")
      ->excludes(cfg_opt)
      ->excludes(set_opt);

  TranslateArgs tr_args;
  CLI::App* translate = app.add_subcommand("translate", "Translate a dataset with a checkpoint");
  translate->add_option("--checkpoint", tr_args.checkpoint, "Checkpoint file")->required();
  translate->add_option("--in", tr_args.in, "Input dataset directory")->required();
  translate->add_option("--out", tr_args.out, "Output directory")->required();

  CLI::App* eval = app.add_subcommand("eval", "Evaluation metrics");
  eval->require_subcommand(1);

  FidArgs fid_args;
  CLI::App* fid = eval->add_subcommand("fid", "Frechet distance between two image sets");
  fid->add_option("--x", fid_args.x, "First image directory");
  fid->add_option("--y", fid_args.y, "Second image directory");
  fid->add_option("--embedder", fid_args.embedder, "Embedder name (down<N> or proj<D>)");
  fid->add_option("--features-x", fid_args.features_x, "Precomputed feature file (first set)");
  fid->add_option("--features-y", fid_args.features_y, "Precomputed feature file (second set)");
  fid->add_option("--report", fid_args.report, "Report JSON path");

  DiversityArgs div_args;
  CLI::App* diversity = eval->add_subcommand("diversity", "Average pairwise distance in a set");
  diversity->add_option("--in", div_args.in, "Image directory")->required();
  diversity->add_option("--oracle", div_args.oracle, "Distance oracle (l2 or const:<v>)");
  diversity->add_option("--max-pairs", div_args.max_pairs, "Subsample this many pairs (0 = all)");
  diversity->add_option("--report", div_args.report, "Report JSON path");

  LossReportArgs lr_args;
  CLI::App* loss_report = app.add_subcommand("loss-report", "Replay losses over a feature dump");
  loss_report->add_option("--dump", lr_args.dump, "Feature dump file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) return run_gen_data(gen_args);
    if (train->parsed()) return run_train(train_args);
    if (translate->parsed()) return run_translate(tr_args);
    if (fid->parsed()) return run_eval_fid(fid_args);
    if (diversity->parsed()) return run_eval_diversity(div_args);
    if (loss_report->parsed()) return run_loss_report(lr_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cout << "status=error code=1\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cout << "status=error code=2\n";
    return 2;
  }
  return 0;
}
