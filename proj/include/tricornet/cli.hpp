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

// Command implementations behind tools/tricornet_cli.cpp. Each command takes
// already-parsed options, writes its files, and returns a process exit code.

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tricornet/checkpoint.hpp"
#include "tricornet/config.hpp"
#include "tricornet/data.hpp"
#include "tricornet/errors.hpp"
#include "tricornet/gradcheck.hpp"
#include "tricornet/metrics.hpp"
#include "tricornet/model.hpp"
#include "tricornet/synth.hpp"
#include "tricornet/timeline.hpp"
#include "tricornet/train.hpp"

namespace tricornet::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerification = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDiverged = 3;

inline constexpr const char* kReportText = "report.txt";
inline constexpr const char* kReportKv = "report.kv";
inline constexpr const char* kCheckpoint = "checkpoint.bin";
inline constexpr const char* kResolvedConfig = "resolved.cfg";
inline constexpr const char* kPredictionLabels = "prediction.lab";
inline constexpr const char* kTimeline = "timeline.txt";

struct Streams {
  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
};

/// Runs a command body, mapping exceptions to exit codes: divergence -> 3,
/// anything caused by inputs (config, files, shapes, contracts) -> 2.
inline int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
  } catch (const LoadError& e) {
    err << "load error: " << e.what() << "\n";
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kExitUsage;
}

namespace detail {

inline void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw LoadError(path.string() + ": cannot write");
}

inline void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw LoadError(dir.string() + ": cannot create directory: " + ec.message());
}

/// "section.key=value" -> config entry; the override wins over the file.
inline ConfigEntry parse_override(const std::string& text) {
  const auto eq = text.find('=');
  const auto dot = text.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("override '" + text + "' is not of the form section.key=value");
  }
  return {tricornet::detail::trim(text.substr(0, dot)), tricornet::detail::trim(text.substr(dot + 1, eq - dot - 1)),
          tricornet::detail::trim(text.substr(eq + 1)), 0};
}

inline RunConfig load_run_config(const fs::path& path, const std::vector<std::string>& overrides) {
  auto entries = read_config_file(path);
  for (const auto& o : overrides) entries.push_back(parse_override(o));
  return parse_run_config(entries, path.parent_path());
}

inline EvalOptions eval_options(const RunConfig& rc, const DatasetManifest& m) {
  EvalOptions e;
  e.thresholds = rc.thresholds;
  e.background = m.background;
  e.background_in_accuracy = rc.background_in_accuracy;
  e.background_in_segments = rc.background_in_segments;
  return e;
}

inline void check_model_matches(const ModelConfig& mc, const DatasetManifest& m) {
  if (mc.input_dim != m.feature_dim) {
    throw ShapeError("model expects feature width " + std::to_string(mc.input_dim) + ", dataset has " +
                     std::to_string(m.feature_dim));
  }
  if (mc.num_classes != m.num_classes()) {
    throw ShapeError("model predicts " + std::to_string(mc.num_classes) + " classes, dataset has " +
                     std::to_string(m.num_classes()));
  }
}

inline std::string per_sequence_table(const MetricsReport& r, const std::vector<const SequenceSample*>& samples) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-24s%8s%8s", "sequence", "acc", "edit");
  os << buf;
  for (double k : r.thresholds) {
    std::snprintf(buf, sizeof buf, "%9s", threshold_key(k).c_str());
    os << buf;
  }
  os << "\n";
  for (std::size_t i = 0; i < r.per_sequence.size() && i < samples.size(); ++i) {
    const auto& s = r.per_sequence[i];
    std::snprintf(buf, sizeof buf, "%-24s%8.2f%8.2f", samples[i]->id.c_str(), s.accuracy, s.edit);
    os << buf;
    for (double f : s.f1) {
      std::snprintf(buf, sizeof buf, "%9.2f", f);
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace detail

// ---- synth ------------------------------------------------------------------------

struct SynthArgs {
  fs::path config;
  fs::path out;
};

inline int synth(const SynthArgs& a, Streams io = {}) {
  return guarded(
      [&] {
        const SynthFileConfig sc = parse_synth_config(read_config_file(a.config));
        const SynthDataset sd = synth_generate(sc.synth);
        detail::make_dir(a.out);
        const fs::path manifest = save_dataset(a.out, sd.dataset, sc.format);
        detail::write_file(a.out / kResolvedConfig, format_synth_config(sc));

        std::ostringstream kv, txt;
        kv << "seed=" << sc.synth.seed << "\n";
        txt << "dataset: " << manifest.string() << "\n";
        for (const auto& sp : sd.dataset.manifest.splits) {
          const auto samples = sd.dataset.split(sp.name);
          std::size_t frames = 0;
          for (const auto* s : samples) frames += s->labels.size();
          char buf[160];
          kv << sp.name << ".sequences=" << samples.size() << "\n" << sp.name << ".frames=" << frames << "\n";
          if (!sc.synth.ambiguous_pairs.empty()) {
            const double p = ambiguous_fraction(samples, sc.synth);
            std::snprintf(buf, sizeof buf, "%.6f", p);
            kv << sp.name << ".ambiguous_fraction=" << buf << "\n";
            std::snprintf(buf, sizeof buf, "%.6f", frame_local_ceiling(p));
            kv << sp.name << ".frame_local_ceiling=" << buf << "\n";
            std::snprintf(buf, sizeof buf, "%-8s %4zu sequences %7zu frames  ambiguous %.1f%%  frame-local ceiling %.2f\n",
                          sp.name.c_str(), samples.size(), frames, 100.0 * p, frame_local_ceiling(p));
          } else {
            std::snprintf(buf, sizeof buf, "%-8s %4zu sequences %7zu frames\n", sp.name.c_str(), samples.size(), frames);
          }
          txt << buf;
        }
        detail::write_file(a.out / kReportKv, kv.str());
        detail::write_file(a.out / kReportText, txt.str());
        io.out << txt.str();
        return kExitOk;
      },
      io.err);
}

// ---- train ------------------------------------------------------------------------

struct TrainArgs {
  fs::path config;
  std::optional<fs::path> out;
  std::vector<std::string> overrides;
  bool quiet = false;
};

inline int train(const TrainArgs& a, Streams io = {}) {
  return guarded(
      [&] {
        RunConfig rc = detail::load_run_config(a.config, a.overrides);
        if (a.out) rc.out_dir = *a.out;
        const Dataset ds = load_dataset(rc.manifest);
        rc.model.num_classes = ds.manifest.num_classes();
        rc.model.input_dim = ds.manifest.feature_dim;
        rc.model.validate();
        const auto train_set = ds.split(rc.train_split);
        std::vector<const SequenceSample*> val_set;
        if (!rc.val_split.empty()) val_set = ds.split(rc.val_split);

        detail::make_dir(rc.out_dir);
        detail::write_file(rc.out_dir / kResolvedConfig, format_run_config(rc));

        Model model = Model::build(rc.model);
        TrainOptions opts;
        opts.epochs = rc.epochs;
        opts.adam = {rc.lr, rc.beta1, rc.beta2, rc.adam_eps};
        opts.seed = rc.seed;
        opts.eval = detail::eval_options(rc, ds.manifest);
        opts.stop_at_train_accuracy = rc.stop_at_train_accuracy;
        if (!a.quiet) {
          opts.on_epoch = [&](const EpochRecord& e) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "epoch %4zu  loss %.6f  train_acc %6.2f", e.epoch, e.loss,
                          e.train_accuracy);
            io.out << buf;
            if (e.validation) {
              std::snprintf(buf, sizeof buf, "  val_acc %6.2f  edit %6.2f", e.validation->accuracy,
                            e.validation->edit);
              io.out << buf;
            }
            io.out << "\n" << std::flush;
          };
        }
        const TrainReport report = tricornet::train(model, train_set, val_set, opts);
        save_checkpoint(rc.out_dir / kCheckpoint, model);

        const MetricsReport final_train = evaluate_model(model, train_set, opts.eval);
        std::ostringstream kv;
        kv << "variant=" << to_string(rc.model.variant) << "\n"
           << "parameters=" << model.parameter_count() << "\n"
           << format_kv(report) << format_kv(final_train, "final.train.");
        detail::write_file(rc.out_dir / kReportKv, kv.str());

        std::ostringstream txt;
        txt << "variant " << to_string(rc.model.variant) << ", " << model.parameter_count() << " parameters, seed "
            << rc.seed << "\n\n"
            << format_table(report) << "\n"
            << format_table(final_train, "final (train split '" + rc.train_split + "')");
        if (!report.epochs.empty() && report.epochs.back().validation) {
          txt << "\n" << format_table(*report.epochs.back().validation, "final (split '" + rc.val_split + "')");
        }
        detail::write_file(rc.out_dir / kReportText, txt.str());
        if (!a.quiet) io.out << "wrote " << (rc.out_dir / kCheckpoint).string() << "\n";
        return kExitOk;
      },
      io.err);
}

// ---- eval -------------------------------------------------------------------------

struct EvalArgs {
  fs::path config;
  std::optional<fs::path> checkpoint;  // default: <output dir>/checkpoint.bin
  std::optional<std::string> split;    // default: the config's val_split
  std::optional<fs::path> out;         // default: <output dir>/eval-<split>
  std::vector<std::string> overrides;
};

inline int eval(const EvalArgs& a, Streams io = {}) {
  return guarded(
      [&] {
        RunConfig rc = detail::load_run_config(a.config, a.overrides);
        const std::string split = a.split.value_or(rc.val_split);
        if (split.empty()) throw ConfigError("no split to evaluate: pass --split or set data.val_split");
        const fs::path ckpt = a.checkpoint.value_or(rc.out_dir / kCheckpoint);
        const fs::path out = a.out.value_or(rc.out_dir / ("eval-" + split));
        const Dataset ds = load_dataset(rc.manifest);
        const auto samples = ds.split(split);
        const Model model = load_checkpoint(ckpt);
        detail::check_model_matches(model.config(), ds.manifest);
        rc.model = model.config();

        const MetricsReport r = evaluate_model(model, samples, detail::eval_options(rc, ds.manifest));
        detail::make_dir(out);
        detail::write_file(out / kResolvedConfig, format_run_config(rc));
        std::ostringstream kv;
        kv << "split=" << split << "\n" << "sequences=" << samples.size() << "\n" << format_kv(r);
        detail::write_file(out / kReportKv, kv.str());
        const std::string table = format_table(r, "split '" + split + "' (" + std::to_string(samples.size()) + " sequences)");
        detail::write_file(out / kReportText, table + "\n" + detail::per_sequence_table(r, samples));
        io.out << table;
        return kExitOk;
      },
      io.err);
}

// ---- predict ----------------------------------------------------------------------

struct PredictArgs {
  fs::path checkpoint;
  fs::path features;
  fs::path out;
  std::optional<fs::path> labels;    // reference labels for the timeline
  std::optional<fs::path> manifest;  // class names for the timeline
};

inline int predict(const PredictArgs& a, Streams io = {}) {
  return guarded(
      [&] {
        const Model model = load_checkpoint(a.checkpoint);
        const Tensor x = read_features(a.features);
        if (x.cols() != model.config().input_dim) {
          throw ShapeError(a.features.string() + ": feature width " + std::to_string(x.cols()) +
                           " does not match the model's " + std::to_string(model.config().input_dim));
        }
        std::vector<std::string> names;
        if (a.manifest) {
          std::ifstream is(*a.manifest);
          if (!is) throw LoadError(a.manifest->string() + ": cannot open");
          names = parse_manifest(is, *a.manifest).class_names;
        }
        const Labels pred = tricornet::predict(model, x);
        detail::make_dir(a.out);
        write_labels(a.out / kPredictionLabels, pred);
        std::string timeline;
        if (a.labels) {
          const Labels gt = read_labels(*a.labels, model.config().num_classes);
          if (gt.size() != pred.size()) {
            throw ShapeError(a.labels->string() + ": " + std::to_string(gt.size()) + " labels for " +
                             std::to_string(pred.size()) + " frames");
          }
          timeline = export_timeline(pred, gt, names);
        } else {
          timeline = export_timeline(pred, names);
        }
        detail::write_file(a.out / kTimeline, timeline);
        io.out << timeline;
        return kExitOk;
      },
      io.err);
}

// ---- gradcheck --------------------------------------------------------------------

struct GradcheckArgs {
  std::vector<Variant> variants{Variant::kFull, Variant::kHigh, Variant::kLow, Variant::kConvOnly};
  ToyDims dims;
  std::optional<fs::path> out;
};

inline int gradcheck(const GradcheckArgs& a, Streams io = {}) {
  return guarded(
      [&] {
        bool all = true;
        std::ostringstream txt, kv;
        for (Variant v : a.variants) {
          const GradcheckResult r = gradcheck_variant(v, a.dims);
          all = all && r.passed;
          const std::string section = "variant " + to_string(v) + "\n" + format_gradcheck(r) + "\n";
          txt << section;
          io.out << section << std::flush;
          for (const auto& b : r.blocks) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.3e", b.max_rel_error);
            kv << to_string(v) << "." << b.name << "=" << buf << "\n";
          }
          kv << to_string(v) << ".passed=" << (r.passed ? 1 : 0) << "\n";
        }
        if (a.out) {
          detail::make_dir(*a.out);
          detail::write_file(*a.out / kReportText, txt.str());
          detail::write_file(*a.out / kReportKv, kv.str());
        }
        return all ? kExitOk : kExitVerification;
      },
      io.err);
}

// ---- inspect ----------------------------------------------------------------------

struct InspectArgs {
  std::optional<fs::path> checkpoint;
  std::optional<fs::path> config;
  std::optional<fs::path> manifest;
  std::vector<std::string> overrides;
  std::size_t frames = 100;
};

inline std::string describe_dataset(const Dataset& ds) {
  std::ostringstream os;
  const auto& m = ds.manifest;
  os << "classes (" << m.num_classes() << "):";
  for (std::size_t c = 0; c < m.num_classes(); ++c) os << " " << class_glyph(static_cast<Label>(c)) << "=" << m.class_names[c];
  os << "\nfeature_dim: " << m.feature_dim << "\n";
  if (m.background) os << "background: " << *m.background << "\n";
  os << "samples: " << ds.samples.size() << "\n";
  for (const auto& sp : m.splits) {
    const auto samples = ds.split(sp.name);
    std::size_t frames = 0, shortest = 0, longest = 0;
    for (const auto* s : samples) {
      const std::size_t T = s->labels.size();
      frames += T;
      shortest = shortest == 0 ? T : std::min(shortest, T);
      longest = std::max(longest, T);
    }
    os << "split " << sp.name << ": " << samples.size() << " sequences, " << frames << " frames (T " << shortest
       << ".." << longest << ")\n";
  }
  return os.str();
}

inline int inspect(const InspectArgs& a, Streams io = {}) {
  return guarded(
      [&] {
        if (!a.checkpoint && !a.config && !a.manifest) {
          throw ConfigError("inspect needs --checkpoint, --config or --manifest");
        }
        if (a.checkpoint) io.out << format_description(load_checkpoint(*a.checkpoint), a.frames);
        if (a.config) {
          RunConfig rc = detail::load_run_config(*a.config, a.overrides);
          const Dataset ds = load_dataset(rc.manifest);
          rc.model.num_classes = ds.manifest.num_classes();
          rc.model.input_dim = ds.manifest.feature_dim;
          rc.model.validate();
          io.out << format_run_config(rc) << "\n" << format_description(Model::build(rc.model), a.frames) << "\n"
                 << describe_dataset(ds);
        }
        if (a.manifest) io.out << describe_dataset(load_dataset(*a.manifest));
        return kExitOk;
      },
      io.err);
}

}  // namespace tricornet::cli
