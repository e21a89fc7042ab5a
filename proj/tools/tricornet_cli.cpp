/*
 * Copyright 2026 The TricorNet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


// tricornet: command-line front end. Exit codes: 0 ok, 1 verification failure,
// 2 usage or configuration error, 3 training diverged.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tricornet/cli.hpp"

namespace {

namespace cli = tricornet::cli;

template <typename T>
std::optional<T> opt_if(const CLI::Option* o, const T& v) {
  return o->count() ? std::optional<T>(v) : std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TricorNet action segmentation: data synthesis, training, evaluation and checks"};
  app.require_subcommand(1);

  cli::SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dependency dataset");
  synth_cmd->add_option("--config", synth.config, "Synth config file")->required();
  synth_cmd->add_option("--out", synth.out, "Dataset directory")->required();

  cli::TrainArgs train;
  std::string train_out;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a run config");
  train_cmd->add_option("--config", train.config, "Run config file")->required();
  auto* train_out_opt = train_cmd->add_option("--out", train_out, "Output directory (overrides output.dir)");
  train_cmd->add_option("--set", train.overrides, "Override a config key: section.key=value");
  train_cmd->add_flag("--quiet", train.quiet, "No per-epoch progress");

  cli::EvalArgs eval;
  std::string eval_ckpt, eval_split, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  eval_cmd->add_option("--config", eval.config, "Run config file")->required();
  auto* eval_ckpt_opt = eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint (default: <output.dir>/checkpoint.bin)");
  auto* eval_split_opt = eval_cmd->add_option("--split", eval_split, "Split name (default: data.val_split)");
  auto* eval_out_opt = eval_cmd->add_option("--out", eval_out, "Output directory (default: <output.dir>/eval-<split>)");
  eval_cmd->add_option("--set", eval.overrides, "Override a config key: section.key=value");

  cli::PredictArgs predict;
  std::string predict_labels, predict_manifest;
  auto* predict_cmd = app.add_subcommand("predict", "Label one feature file and render a timeline");
  predict_cmd->add_option("--checkpoint", predict.checkpoint, "Checkpoint")->required();
  predict_cmd->add_option("--features", predict.features, "Feature file")->required();
  predict_cmd->add_option("--out", predict.out, "Output directory")->required();
  auto* predict_labels_opt = predict_cmd->add_option("--labels", predict_labels, "Reference labels for the timeline");
  auto* predict_manifest_opt = predict_cmd->add_option("--manifest", predict_manifest, "Manifest providing class names");

  cli::GradcheckArgs grad;
  std::string grad_variant = "all", grad_out;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every parameter block on a toy model");
  grad_cmd->add_option("--variant", grad_variant, "full, high, low, conv_only or all")->capture_default_str();
  grad_cmd->add_option("--frames", grad.dims.T, "Toy sequence length")->capture_default_str();
  grad_cmd->add_option("--input-dim", grad.dims.d, "Toy feature width")->capture_default_str();
  grad_cmd->add_option("--classes", grad.dims.c, "Toy class count")->capture_default_str();
  grad_cmd->add_option("--depth", grad.dims.K, "Encoder/decoder depth")->capture_default_str();
  grad_cmd->add_option("--conv-len", grad.dims.L, "Kernel length")->capture_default_str();
  grad_cmd->add_option("--hidden", grad.dims.H, "LSTM hidden size")->capture_default_str();
  grad_cmd->add_option("--seed", grad.dims.seed, "Seed for weights and toy data")->capture_default_str();
  auto* grad_out_opt = grad_cmd->add_option("--out", grad_out, "Also write report.txt / report.kv here");

  cli::InspectArgs inspect;
  std::string inspect_ckpt, inspect_config, inspect_manifest;
  auto* inspect_cmd = app.add_subcommand("inspect", "Describe a checkpoint, a run config or a dataset");
  auto* inspect_ckpt_opt = inspect_cmd->add_option("--checkpoint", inspect_ckpt, "Checkpoint");
  auto* inspect_config_opt = inspect_cmd->add_option("--config", inspect_config, "Run config file");
  auto* inspect_manifest_opt = inspect_cmd->add_option("--manifest", inspect_manifest, "Dataset manifest");
  inspect_cmd->add_option("--set", inspect.overrides, "Override a config key: section.key=value");
  inspect_cmd->add_option("--frames", inspect.frames, "Sequence length for the shape table")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitUsage;
  }

  if (synth_cmd->parsed()) return cli::synth(synth);
  if (train_cmd->parsed()) {
    if (train_out_opt->count()) train.out = train_out;
    return cli::train(train);
  }
  if (eval_cmd->parsed()) {
    eval.checkpoint = opt_if<std::filesystem::path>(eval_ckpt_opt, eval_ckpt);
    eval.split = opt_if(eval_split_opt, eval_split);
    eval.out = opt_if<std::filesystem::path>(eval_out_opt, eval_out);
    return cli::eval(eval);
  }
  if (predict_cmd->parsed()) {
    predict.labels = opt_if<std::filesystem::path>(predict_labels_opt, predict_labels);
    predict.manifest = opt_if<std::filesystem::path>(predict_manifest_opt, predict_manifest);
    return cli::predict(predict);
  }
  if (grad_cmd->parsed()) {
    if (grad_variant != "all") {
      try {
        grad.variants = {tricornet::parse_variant(grad_variant)};
      } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return cli::kExitUsage;
      }
    }
    grad.out = opt_if<std::filesystem::path>(grad_out_opt, grad_out);
    return cli::gradcheck(grad);
  }
  if (inspect_cmd->parsed()) {
    inspect.checkpoint = opt_if<std::filesystem::path>(inspect_ckpt_opt, inspect_ckpt);
    inspect.config = opt_if<std::filesystem::path>(inspect_config_opt, inspect_config);
    inspect.manifest = opt_if<std::filesystem::path>(inspect_manifest_opt, inspect_manifest);
    return cli::inspect(inspect);
  }
  return cli::kExitUsage;
}
