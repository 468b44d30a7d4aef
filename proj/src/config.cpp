#include "mango/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mango {

using nlohmann::json;

namespace {

json to_json(const ExperimentConfig& c) {
  json j;
  j["image_size"] = c.image_size;
  j["tau"] = c.tau;
  j["alpha"] = c.alpha;
  j["theta"] = c.theta;
  j["num_features_per_layer"] = c.num_features_per_layer;
  j["segnce_features_per_layer"] = c.segnce_features_per_layer;
  j["tap_layers"] = c.tap_layers;
  j["num_classes"] = c.num_classes;
  j["patch_size"] = c.patch_size;
  j["patches_per_image"] = c.patches_per_image;
  j["rotation_set"] = c.rotation_set;
  j["w_patchnce_A"] = c.w_patchnce_A;
  j["w_patchnce_idB"] = c.w_patchnce_idB;
  j["w_segnce"] = c.w_segnce;
  j["w_gan"] = c.w_gan;
  j["learning_rate"] = c.learning_rate;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["batch_size"] = c.batch_size;
  j["total_steps"] = c.total_steps;
  j["lr_decay"] = c.lr_decay;
  j["d_steps_per_g"] = c.d_steps_per_g;
  j["include_self_in_segnce_denominator"] = c.include_self_in_segnce_denominator;
  j["seed"] = c.seed;
  j["g_base_width"] = c.g_base_width;
  j["g_res_blocks"] = c.g_res_blocks;
  j["d_base_width"] = c.d_base_width;
  j["head_hidden"] = c.head_hidden;
  j["embed_dim"] = c.embed_dim;
  j["checkpoint_every"] = c.checkpoint_every;
  return j;
}

template <typename T>
void pick(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception&) {
      throw std::runtime_error(std::string("config key has wrong type: ") + key);
    }
  }
}

ExperimentConfig from_json(const json& j) {
  if (!j.is_object()) throw std::runtime_error("config must be a JSON object");
  const json defaults = to_json(ExperimentConfig{});
  for (const auto& item : j.items())
    if (!defaults.contains(item.key()))
      throw std::runtime_error("unknown config key: " + item.key());
  if (!j.contains("num_classes")) throw std::runtime_error("num_classes required");

  ExperimentConfig c;
  pick(j, "image_size", c.image_size);
  pick(j, "tau", c.tau);
  pick(j, "alpha", c.alpha);
  pick(j, "theta", c.theta);
  pick(j, "num_features_per_layer", c.num_features_per_layer);
  pick(j, "segnce_features_per_layer", c.segnce_features_per_layer);
  pick(j, "tap_layers", c.tap_layers);
  pick(j, "num_classes", c.num_classes);
  pick(j, "patch_size", c.patch_size);
  pick(j, "patches_per_image", c.patches_per_image);
  pick(j, "rotation_set", c.rotation_set);
  pick(j, "w_patchnce_A", c.w_patchnce_A);
  pick(j, "w_patchnce_idB", c.w_patchnce_idB);
  pick(j, "w_segnce", c.w_segnce);
  pick(j, "w_gan", c.w_gan);
  pick(j, "learning_rate", c.learning_rate);
  pick(j, "beta1", c.beta1);
  pick(j, "beta2", c.beta2);
  pick(j, "batch_size", c.batch_size);
  pick(j, "total_steps", c.total_steps);
  pick(j, "lr_decay", c.lr_decay);
  pick(j, "d_steps_per_g", c.d_steps_per_g);
  pick(j, "include_self_in_segnce_denominator", c.include_self_in_segnce_denominator);
  pick(j, "seed", c.seed);
  pick(j, "g_base_width", c.g_base_width);
  pick(j, "g_res_blocks", c.g_res_blocks);
  pick(j, "d_base_width", c.d_base_width);
  pick(j, "head_hidden", c.head_hidden);
  pick(j, "embed_dim", c.embed_dim);
  pick(j, "checkpoint_every", c.checkpoint_every);
  c.validate();
  return c;
}

const std::set<std::string>& known_tap_ids() {
  static const std::set<std::string> ids = {"input", "stem", "down1", "down2", "mid"};
  return ids;
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::runtime_error(msg); };
  if (num_classes <= 0) fail("num_classes must be positive");
  if (image_size <= 0) fail("image_size must be positive");
  if (!(tau > 0.0)) fail("tau must be > 0");
  if (!(alpha >= 0.0 && alpha < 1.0)) fail("alpha must be in [0,1)");
  if (!(theta > -1.0 && theta <= 1.0)) fail("theta must be in (-1,1]");
  if (num_features_per_layer < 2) fail("num_features_per_layer must be >= 2");
  if (segnce_features_per_layer <= 0) fail("segnce_features_per_layer must be positive");
  if (tap_layers.empty()) fail("tap_layers must be non-empty");
  for (const auto& id : tap_layers)
    if (!known_tap_ids().count(id))
      fail("tap layer must resolve to an encoder stage (input, stem, down1, down2, mid): " + id);
  if (patch_size <= 0) fail("patch_size must be positive");
  if (patch_size > image_size) fail("patch_size must be <= image_size");
  if (patches_per_image <= 0) fail("patches_per_image must be positive");
  if (rotation_set.empty()) fail("rotation_set must be non-empty");
  for (double r : rotation_set)
    if (!std::isfinite(r)) fail("rotation_set entries must be finite");
  if (w_patchnce_A < 0 || w_patchnce_idB < 0 || w_segnce < 0 || w_gan < 0)
    fail("loss_weights must be nonnegative");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1 must be in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2 must be in [0,1)");
  if (batch_size <= 0) fail("batch_size must be positive");
  if (total_steps < 0) fail("total_steps must be nonnegative");
  if (d_steps_per_g <= 0) fail("d_steps_per_g must be positive");
  if (g_base_width <= 0) fail("g_base_width must be positive");
  if (g_res_blocks <= 0) fail("g_res_blocks must be positive");
  if (d_base_width <= 0) fail("d_base_width must be positive");
  if (head_hidden <= 0) fail("head_hidden must be positive");
  if (embed_dim <= 0) fail("embed_dim must be positive");
  if (checkpoint_every <= 0) fail("checkpoint_every must be positive");
}

bool ExperimentConfig::right_angle_rotations() const {
  for (double r : rotation_set) {
    const double q = r / 90.0;
    if (q != std::floor(q)) return false;
  }
  return true;
}

std::string ExperimentConfig::to_json_string() const { return to_json(*this).dump(2); }

ExperimentConfig parse_config(const std::string& json_text) {
  return parse_config(json_text, {});
}

ExperimentConfig parse_config(const std::string& json_text,
                              const std::vector<std::string>& overrides) {
  json j;
  try {
    j = json_text.empty() ? json::object() : json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("config parse error: ") + e.what());
  }
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::runtime_error("malformed --set override (expected key=value): " + kv);
    const std::string key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);
    json parsed;
    try {
      parsed = json::parse(val);
    } catch (const json::exception&) {
      parsed = val;  // bare strings are allowed unquoted
    }
    j[key] = parsed;
  }
  return from_json(j);
}

ExperimentConfig load_config(const std::string& path) { return load_config(path, {}); }

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

void save_config(const std::string& path, const ExperimentConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << cfg.to_json_string() << '\n';
  if (!out) throw std::runtime_error("failed writing config file: " + path);
}

}  // namespace mango
