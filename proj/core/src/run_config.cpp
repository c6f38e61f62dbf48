#include <sstream>

#include "panelvit/commands.hpp"
#include "panelvit/error.hpp"
#include "panelvit/keyvalue.hpp"

namespace panelvit::cli {

namespace {

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  if (data_root.empty()) throw ConfigError("data_root is required");
  ModelConfig m = model;
  // The class count comes from the dataset; validate the rest now.
  if (m.num_classes < 2) m.num_classes = 2;
  m.validate();
  if (model.channels != 3) throw ConfigError("channels must be 3: images are decoded as RGB");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  optimizer.validate();
  augment.validate();
}

const std::vector<SettingInfo>& setting_keys() {
  static const std::vector<SettingInfo> keys{
      {"data_root", "dataset root with one subdirectory per class"},
      {"output_dir", "directory for checkpoint, manifest and curves"},
      {"image_size", "square input side after resizing"},
      {"channels", "input channels"},
      {"patch_size", "patch side"},
      {"model_dim", "token width"},
      {"num_heads", "attention heads"},
      {"num_layers", "encoder layers"},
      {"ffn_dim", "feed-forward hidden width"},
      {"dropout", "dropout rate"},
      {"head_hidden", "comma-separated hidden widths of the classification head"},
      {"ln_eps", "layer-norm epsilon"},
      {"head_init", "final classifier layer init: glorot or zero"},
      {"batch_size", "minibatch size"},
      {"epochs", "training epochs"},
      {"lr", "AdamW learning rate"},
      {"beta1", "AdamW first-moment decay"},
      {"beta2", "AdamW second-moment decay"},
      {"eps", "AdamW epsilon"},
      {"weight_decay", "AdamW decoupled weight decay"},
      {"augment.flip", "random horizontal flips"},
      {"augment.rotation", "rotation range as a fraction of a full turn"},
      {"augment.zoom_height", "vertical zoom range"},
      {"augment.zoom_width", "horizontal zoom range"},
      {"augment.seed", "augmentation seed (defaults to seed)"},
      {"train_fraction", "per-class share of images used for training"},
      {"seed", "seed for initialization, shuffling and dropout"},
      {"split_seed", "seed for the train/validation split (defaults to seed)"},
      {"resume", "checkpoint to continue training from"},
  };
  return keys;
}

void apply_preset(RunConfig& c, const std::string& name) {
  if (name == "solar") {
    c.model.image_size = 72;
    c.model.patch_size = 8;
  } else if (name == "wind") {
    c.model.image_size = 256;
    c.model.patch_size = 16;
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected solar or wind)");
  }
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& v) {
  auto& m = c.model;
  if (key == "preset") apply_preset(c, v);
  else if (key == "data_root") c.data_root = v;
  else if (key == "output_dir") c.output_dir = v;
  else if (key == "image_size") m.image_size = parse_size(v, key);
  else if (key == "channels") m.channels = parse_size(v, key);
  else if (key == "patch_size") m.patch_size = parse_size(v, key);
  else if (key == "model_dim") m.model_dim = parse_size(v, key);
  else if (key == "num_heads") m.num_heads = parse_size(v, key);
  else if (key == "num_layers") m.num_layers = parse_size(v, key);
  else if (key == "ffn_dim") m.ffn_dim = parse_size(v, key);
  else if (key == "dropout") m.dropout_rate = parse_double(v, key);
  else if (key == "head_hidden") {
    m.head_hidden.clear();
    for (const auto& f : split_list(v)) m.head_hidden.push_back(parse_size(f, key));
  } else if (key == "ln_eps") m.ln_eps = parse_double(v, key);
  else if (key == "head_init") {
    if (v == "glorot") c.head_init = HeadInit::glorot;
    else if (v == "zero") c.head_init = HeadInit::zero;
    else throw ConfigError("'head_init': expected glorot or zero, got '" + v + "'");
  } else if (key == "batch_size") c.batch_size = parse_size(v, key);
  else if (key == "epochs") c.epochs = parse_size(v, key);
  else if (key == "lr") c.optimizer.lr = parse_double(v, key);
  else if (key == "beta1") c.optimizer.beta1 = parse_double(v, key);
  else if (key == "beta2") c.optimizer.beta2 = parse_double(v, key);
  else if (key == "eps") c.optimizer.eps = parse_double(v, key);
  else if (key == "weight_decay") c.optimizer.weight_decay = parse_double(v, key);
  else if (key == "augment.flip") c.augment.flip_horizontal = parse_bool(v, key);
  else if (key == "augment.rotation") c.augment.rotation_factor = parse_double(v, key);
  else if (key == "augment.zoom_height") c.augment.zoom_height = parse_double(v, key);
  else if (key == "augment.zoom_width") c.augment.zoom_width = parse_double(v, key);
  else if (key == "augment.seed") c.augment_seed = parse_u64(v, key);
  else if (key == "train_fraction") c.train_fraction = parse_double(v, key);
  else if (key == "seed") c.seed = parse_u64(v, key);
  else if (key == "split_seed") c.split_seed = parse_u64(v, key);
  else if (key == "resume") {
    if (v.empty()) c.resume_from.reset();
    else c.resume_from = v;
  } else throw ConfigError("unknown setting '" + key + "'");
}

void apply_config_text(RunConfig& c, const std::string& text, const std::string& source) {
  const auto pairs = parse_key_values(text, source);
  for (const auto& [key, value] : pairs) {
    if (key == "preset") apply_preset(c, value);
  }
  for (const auto& [key, value] : pairs) {
    if (key == "preset" || key.rfind("manifest.", 0) == 0) continue;
    try {
      apply_setting(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ": " + e.what());
    }
  }
}

std::string format_run_settings(const RunConfig& c) {
  const auto& m = c.model;
  std::ostringstream out;
  out << "data_root=" << c.data_root.string() << '\n'
      << "image_size=" << m.image_size << '\n'
      << "channels=" << m.channels << '\n'
      << "patch_size=" << m.patch_size << '\n'
      << "model_dim=" << m.model_dim << '\n'
      << "num_heads=" << m.num_heads << '\n'
      << "num_layers=" << m.num_layers << '\n'
      << "ffn_dim=" << m.ffn_dim << '\n'
      << "dropout=" << format_double(m.dropout_rate) << '\n'
      << "head_hidden=" << join(m.head_hidden) << '\n'
      << "ln_eps=" << format_double(m.ln_eps) << '\n'
      << "head_init=" << (c.head_init == HeadInit::zero ? "zero" : "glorot") << '\n'
      << "batch_size=" << c.batch_size << '\n'
      << "epochs=" << c.epochs << '\n'
      << "lr=" << format_double(c.optimizer.lr) << '\n'
      << "beta1=" << format_double(c.optimizer.beta1) << '\n'
      << "beta2=" << format_double(c.optimizer.beta2) << '\n'
      << "eps=" << format_double(c.optimizer.eps) << '\n'
      << "weight_decay=" << format_double(c.optimizer.weight_decay) << '\n'
      << "augment.flip=" << (c.augment.flip_horizontal ? "true" : "false") << '\n'
      << "augment.rotation=" << format_double(c.augment.rotation_factor) << '\n'
      << "augment.zoom_height=" << format_double(c.augment.zoom_height) << '\n'
      << "augment.zoom_width=" << format_double(c.augment.zoom_width) << '\n'
      << "augment.seed=" << c.resolved_augment_seed() << '\n'
      << "train_fraction=" << format_double(c.train_fraction) << '\n'
      << "seed=" << c.seed << '\n'
      << "split_seed=" << c.resolved_split_seed() << '\n';
  return out.str();
}

}  // namespace panelvit::cli
