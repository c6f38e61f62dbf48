#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "panelvit/commands.hpp"
#include "panelvit/error.hpp"
#include "panelvit/keyvalue.hpp"
#include "support/fixtures.hpp"

using namespace panelvit;
using support::TempDir;
namespace fs = std::filesystem;

namespace {

cli::RunConfig tiny_run(const fs::path& data, const fs::path& out) {
  cli::RunConfig c;
  c.data_root = data;
  c.output_dir = out;
  const char* settings =
      "image_size=8\npatch_size=4\nmodel_dim=16\nnum_heads=2\nnum_layers=1\nffn_dim=16\n"
      "head_hidden=8\nepochs=2\nbatch_size=4\nseed=3\n";
  cli::apply_config_text(c, settings, "tiny");
  return c;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(PANELVIT_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("defaults and presets") {
  cli::RunConfig c;
  CHECK(c.batch_size == 32);
  CHECK(c.epochs == 100);
  CHECK(c.optimizer.lr == 0.001);
  CHECK(c.optimizer.weight_decay == 0.0001);
  CHECK(c.model.dropout_rate == 0.5);
  CHECK(c.model.num_layers == 8);
  CHECK(c.model.num_heads == 8);
  CHECK(c.model.num_patches() == 81);

  cli::apply_preset(c, "wind");
  CHECK(c.model.image_size == 256);
  CHECK(c.model.patch_size == 16);
  CHECK(c.model.num_patches() == 256);
  cli::apply_preset(c, "solar");
  CHECK(c.model.num_patches() == 81);
  CHECK_THROWS_AS(cli::apply_preset(c, "lunar"), ConfigError);
}

TEST_CASE("config text layering") {
  cli::RunConfig c;
  cli::apply_config_text(c, "# comment\nepochs = 7\npreset=wind\nlr=0.01\nmanifest.anything=1\n", "cfg");
  CHECK(c.epochs == 7);
  CHECK(c.model.image_size == 256);  // preset first, whatever its position
  CHECK(c.optimizer.lr == 0.01);
  cli::apply_setting(c, "epochs", "9");  // a flag on top
  CHECK(c.epochs == 9);
  CHECK_THROWS_AS(cli::apply_config_text(c, "epoch=3\n", "cfg"), ConfigError);
  CHECK_THROWS_AS(cli::apply_config_text(c, "epochs=three\n", "cfg"), ConfigError);
  CHECK_THROWS_AS(cli::apply_config_text(c, "epochs=3\nepochs=4\n", "cfg"), ConfigError);
  CHECK_THROWS_AS(cli::apply_config_text(c, "just words\n", "cfg"), ConfigError);

  cli::apply_setting(c, "data_root", "/tmp/x");
  CHECK(c.resolved_split_seed() == c.seed);
  cli::RunConfig d;
  cli::apply_config_text(d, cli::format_run_settings(c), "settings");
  CHECK(cli::format_run_settings(d) == cli::format_run_settings(c));
  CHECK(d.split_seed.has_value());

  for (const auto& s : cli::setting_keys()) {
    CAPTURE(s.key);
    CHECK_FALSE(s.help.empty());
  }
}

TEST_CASE("validation") {
  cli::RunConfig c;
  CHECK_THROWS_AS(c.validate(), ConfigError);  // no data root
  c.data_root = "/somewhere";
  CHECK_NOTHROW(c.validate());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.batch_size = 4;
  c.model.patch_size = 7;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.model.patch_size = 8;
  c.train_fraction = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("train, eval, predict and inspect") {
  TempDir dir("cli");
  const auto data = dir / "data";
  support::write_dataset(data, support::two_colors(6), 8);
  std::ostringstream log;

  const auto run = cli::cmd_train(tiny_run(data, dir / "run"), log);
  CHECK(run.curves.size() == 2);
  CHECK(run.train_size == 8);
  CHECK(run.val_size == 4);
  for (const char* f : {"checkpoint.bin", "manifest.txt", "curves.csv", "train_log.txt"}) CHECK(fs::exists(dir / "run" / f));
  const auto manifest = read_text_file(run.manifest_path);
  CHECK(manifest.find("manifest.class_names=dark,light") != std::string::npos);
  CHECK(manifest.find("split_seed=3") != std::string::npos);

  // rerun from the manifest alone
  cli::RunConfig again;
  cli::apply_config_text(again, manifest, "manifest");
  again.output_dir = dir / "rerun";
  cli::cmd_train(again, log);
  CHECK(read_text_file(dir / "rerun/curves.csv") == read_text_file(run.curves_path));
  CHECK(read_text_file(dir / "rerun/checkpoint.bin") == read_text_file(run.checkpoint_path));

  // resume one more epoch from the checkpoint vs. a straight 3-epoch run
  auto longer = tiny_run(data, dir / "long");
  longer.epochs = 3;
  cli::cmd_train(longer, log);
  auto resumed = tiny_run(data, dir / "resumed");
  resumed.epochs = 3;
  resumed.resume_from = run.checkpoint_path;
  cli::cmd_train(resumed, log);
  CHECK(read_text_file(dir / "resumed/checkpoint.bin") == read_text_file(dir / "long/checkpoint.bin"));
  CHECK(read_text_file(dir / "resumed/curves.csv") == read_text_file(dir / "long/curves.csv"));

  cli::EvalConfig ev;
  ev.checkpoint = run.checkpoint_path;
  ev.data_root = data;
  ev.output_dir = dir / "eval";
  const auto outcome = cli::cmd_eval(ev, log);
  CHECK(outcome.result.predictions.size() == 12);
  CHECK(fs::exists(dir / "eval/scores.txt"));
  CHECK(fs::exists(dir / "eval/predictions.csv"));
  CHECK(parse_confusion_csv(read_text_file(dir / "eval/confusion.csv")).total() == 12);
  ev.subset = "val";
  CHECK(cli::cmd_eval(ev, log).result.predictions.size() == 4);

  // predict agrees with eval and yields distributions
  std::vector<fs::path> images;
  for (const auto& s : outcome.sources) images.push_back(s);
  std::ofstream(dir / "bad.png") << "nope";
  images.insert(images.begin() + 1, dir / "bad.png");
  std::ostringstream out, err;
  const auto preds = cli::cmd_predict(run.checkpoint_path, images, out, err);
  REQUIRE(preds.size() == 13);
  CHECK_FALSE(preds[1].ok);
  CHECK(err.str().find("bad.png") != std::string::npos);
  for (std::size_t i = 0, k = 0; i < preds.size(); ++i) {
    if (i == 1) continue;
    REQUIRE(preds[i].ok);
    double s = 0;
    for (const double p : preds[i].probabilities) s += p;
    CHECK(std::abs(s - 1.0) < 1e-6);
    CHECK(preds[i].label == outcome.result.predictions[k++]);
  }
  std::ostringstream out2, err2;
  cli::cmd_predict(run.checkpoint_path, images, out2, err2);
  CHECK(out2.str() == out.str());
  CHECK(out.str().find("top3=") != std::string::npos);

  std::ostringstream info;
  cli::cmd_inspect(data, {}, info);
  CHECK(info.str().find("dark,6,4,2") != std::string::npos);
  CHECK(info.str().find("total,12,8,4") != std::string::npos);
  std::ostringstream ckinfo;
  cli::cmd_inspect(run.checkpoint_path, {}, ckinfo);
  CHECK(ckinfo.str().find("parameter_count: " + std::to_string(run.parameter_count)) != std::string::npos);
  CHECK_THROWS_AS(cli::cmd_inspect(dir / "missing", {}, info), IoError);
}

TEST_CASE("errors leave no partial output") {
  TempDir dir("clierr");
  std::ostringstream log;
  auto bad = tiny_run(dir / "nodata", dir / "out");
  CHECK_THROWS_AS(cli::cmd_train(bad, log), DataError);
  CHECK_FALSE(fs::exists(dir / "out"));
  bad.model.patch_size = 3;
  CHECK_THROWS_AS(cli::cmd_train(bad, log), ConfigError);
  CHECK_FALSE(fs::exists(dir / "out"));

  const auto data = dir / "data";
  support::write_dataset(data, support::two_colors(3), 8);
  const auto run = cli::cmd_train(tiny_run(data, dir / "run"), log);
  const auto other = dir / "three";
  support::write_dataset(other, {{"a", 2, {0, 0, 0}}, {"b", 2, {1, 1, 1}}, {"c", 2, {0, 1, 0}}}, 8);
  cli::EvalConfig ev;
  ev.checkpoint = run.checkpoint_path;
  ev.data_root = other;
  ev.output_dir = dir / "ev";
  CHECK_THROWS_AS(cli::cmd_eval(ev, log), ConfigError);
  fs::create_directories(dir / "emptydir");
  ev.data_root = dir / "emptydir";
  CHECK_THROWS_AS(cli::cmd_eval(ev, log), DataError);
  CHECK_FALSE(fs::exists(dir / "ev"));
}

TEST_CASE("exit codes") {
  TempDir dir("exit");
  const auto log = dir / "log.txt";
  const auto data = dir / "data";
  support::write_dataset(data, support::two_colors(3), 8);
  const std::string tiny = " --image-size 8 --patch-size 4 --model-dim 16 --num-heads 2 --num-layers 1"
                           " --ffn-dim 16 --head-hidden 8 --epochs 1 --batch-size 4";

  CHECK(run_cli("", log) == 1);
  CHECK(run_cli("frobnicate", log) == 1);
  CHECK(run_cli("train --data-root " + data.string() + " --epochs zero", log) == 1);
  CHECK(run_cli("train --data-root " + (dir / "none").string() + tiny, log) == 2);
  CHECK(run_cli("train --data-root " + data.string() + " --output-dir " + (dir / "run").string() + tiny, log) == 0);
  const auto ck = (dir / "run/checkpoint.bin").string();
  CHECK(run_cli("eval --checkpoint " + ck + " --data-root " + data.string() + " --output-dir " +
                    (dir / "ev").string(), log) == 0);
  CHECK(run_cli("eval --checkpoint " + (dir / "none.bin").string() + " --data-root " + data.string(), log) == 3);
  CHECK(run_cli("predict --checkpoint " + ck + " " + (data / "dark/img_000.png").string(), log) == 0);
  std::ofstream(dir / "bad.png") << "nope";
  CHECK(run_cli("predict --checkpoint " + ck + " " + (dir / "bad.png").string(), log) == 2);
  CHECK(run_cli("inspect " + data.string(), log) == 0);
  CHECK(run_cli("inspect " + (dir / "nothing").string(), log) == 3);
  CHECK(run_cli("train --config " + (dir / "run/manifest.txt").string() + " --output-dir " +
                    (dir / "again").string(), log) == 0);
  CHECK(read_text_file(dir / "again/checkpoint.bin") == read_text_file(ck));
}

TEST_CASE("inspect a blade-style dataset") {
  TempDir dir("inspect");
  support::write_dataset(dir.path(),
                         {{"Damaged", 30, {0.5, 0.5, 0.5}},
                          {"Edge-Damaged", 58, {0.5, 0.5, 0.5}},
                          {"Erosion", 65, {0.5, 0.5, 0.5}},
                          {"Reference", 16, {0.5, 0.5, 0.5}},
                          {"Rough", 130, {0.5, 0.5, 0.5}}},
                         2, 0.0);
  std::ostringstream out;
  cli::cmd_inspect(dir.path(), {}, out);
  const auto s = out.str();
  CHECK(s.find("classes: 5") != std::string::npos);
  CHECK(s.find("Reference,16,12,4") != std::string::npos);
  CHECK(s.find("Rough,130,97,33") != std::string::npos);
  CHECK(s.find("total,299,222,77") != std::string::npos);
}
