// panelvit: train, evaluate, predict and inspect ViT surface-defect classifiers.
//
// Exit status: 0 success, 1 usage or configuration, 2 data, 3 I/O.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "panelvit/commands.hpp"
#include "panelvit/error.hpp"
#include "panelvit/metrics.hpp"

namespace {

std::string flag_for(const std::string& key) {
  std::string f = "--";
  for (const char ch : key) f += (ch == '_' || ch == '.') ? '-' : ch;
  return f;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace panelvit;

  CLI::App app{"Vision-Transformer surface-defect classifier"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "train a model and write checkpoint, manifest and curves");
  std::string config_file;
  std::string preset;
  std::map<std::string, std::string> overrides;
  train->add_option("--config", config_file, "key=value config file (a run manifest also works)");
  train->add_option("--preset", preset, "solar (72px, 8px patches) or wind (256px, 16px patches)");
  for (const auto& s : cli::setting_keys()) {
    train->add_option_function<std::string>(
        flag_for(s.key), [&overrides, key = s.key](const std::string& v) { overrides[key] = v; }, s.help);
  }

  auto* eval = app.add_subcommand("eval", "score a checkpoint on a dataset");
  cli::EvalConfig eval_config;
  std::string eval_checkpoint, eval_data, eval_output = "eval";
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
  eval->add_option("--data-root", eval_data, "dataset root")->required();
  eval->add_option("--subset", eval_config.subset, "all, or val to rebuild the training run's validation split")
      ->check(CLI::IsMember({"all", "val"}));
  eval->add_option("--output-dir", eval_output, "directory for scores.txt, per_class.csv, confusion.csv");
  eval->add_option("--batch-size", eval_config.batch_size, "evaluation batch size");

  auto* predict = app.add_subcommand("predict", "classify individual images");
  std::string predict_checkpoint;
  std::vector<std::string> predict_images;
  predict->add_option("--checkpoint", predict_checkpoint, "checkpoint file")->required();
  predict->add_option("images", predict_images, "image files")->required();

  auto* inspect = app.add_subcommand("inspect", "summarize a checkpoint or a dataset directory");
  std::string inspect_target;
  cli::InspectOptions inspect_options;
  inspect->add_option("target", inspect_target, "checkpoint file or dataset root")->required();
  inspect->add_option("--train-fraction", inspect_options.train_fraction, "fraction used for the split preview");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) {
      cli::RunConfig config;
      if (!preset.empty()) cli::apply_preset(config, preset);
      if (!config_file.empty()) cli::apply_config_text(config, read_text_file(config_file), config_file);
      // Flags are applied in table order, so the result does not depend on argv order.
      for (const auto& s : cli::setting_keys()) {
        if (auto it = overrides.find(s.key); it != overrides.end()) cli::apply_setting(config, s.key, it->second);
      }
      const auto result = cli::cmd_train(config, std::cout);
      std::cout << "wrote " << result.checkpoint_path.string() << '\n';
    } else if (*eval) {
      eval_config.checkpoint = eval_checkpoint;
      eval_config.data_root = eval_data;
      eval_config.output_dir = eval_output;
      const auto outcome = cli::cmd_eval(eval_config, std::cout);
      std::cout << "wrote " << outcome.paths.scores.string() << '\n';
    } else if (*predict) {
      std::vector<std::filesystem::path> paths(predict_images.begin(), predict_images.end());
      const auto results = cli::cmd_predict(predict_checkpoint, paths, std::cout, std::cerr);
      for (const auto& r : results) {
        if (!r.ok) return 2;
      }
    } else if (*inspect) {
      cli::cmd_inspect(inspect_target, inspect_options, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
