// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rff/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>

#include <CLI11.hpp>

#include "rff/bench.hpp"
#include "rff/dataset.hpp"
#include "rff/errors.hpp"
#include "rff/metrics.hpp"
#include "rff/model.hpp"
#include "rff/model_io.hpp"
#include "rff/quantize.hpp"
#include "rff/report.hpp"
#include "rff/trainer.hpp"

namespace rff::cli {
namespace {

namespace fs = std::filesystem;

struct SharedFlags {
  std::uint64_t seed = 42;
  std::string out;
  std::string format = "json";
};

struct GenerateFlags {
  std::size_t devices = 10;
  std::size_t signals = 400;
  ProfileRanges ranges;
  double cfo_max = 0.0005;
};

struct TrainFlags {
  std::string data;
  std::string arch = "cnn";
  std::string history;
  TrainConfig config;
};

struct EvalFlags {
  std::string model;
  std::string data;
  bool randomize = false;
  bool shared_permutation = false;
  bool holdout = false;
  double val_frac = 0.2;
};

struct BenchFlags {
  std::string model;
  std::string data;
  std::size_t runs = kDefaultBenchRuns;
  std::size_t warmup = kDefaultWarmupRuns;
};

struct FingerprintFlags {
  std::string model;
  std::string capture;
  std::string data;
  std::size_t index = 0;
  double threshold = 0.9;
};

void add_shared(CLI::App* cmd, SharedFlags& f, bool with_format, const std::string& out_help) {
  cmd->add_option("--seed", f.seed, "Random seed")->capture_default_str();
  if (!out_help.empty()) cmd->add_option("--out", f.out, out_help)->required();
  if (with_format) {
    cmd->add_option("--format", f.format, "Output format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoError("cannot open '" + path.string() + "' for writing");
  file << text;
  if (!file) throw IoError("write failed for '" + path.string() + "'");
}

int cmd_generate(const SharedFlags& s, GenerateFlags g, std::ostream& out) {
  g.ranges.cfo = {-g.cfo_max, g.cfo_max};
  const Dataset ds = synthesize_dataset(g.devices, g.signals, s.seed, g.ranges);
  save_dataset(ds, s.out);
  out << "wrote " << ds.size() << " records (" << ds.num_classes() << " devices) to " << s.out << '\n';
  return kOk;
}

std::string history_json(const TrainHistory& h) {
  std::string text = "[\n";
  char line[256];
  for (std::size_t i = 0; i < h.epochs.size(); ++i) {
    const EpochRecord& r = h.epochs[i];
    std::snprintf(line, sizeof(line),
                  "  {\"epoch\": %zu, \"train_loss\": %.9g, \"train_acc\": %.9g, \"val_loss\": %.9g, "
                  "\"val_acc\": %.9g, \"seconds\": %.3f}%s\n",
                  r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy, r.seconds,
                  i + 1 < h.epochs.size() ? "," : "");
    text += line;
  }
  return text + "]\n";
}

int cmd_train(const SharedFlags& s, TrainFlags t, std::ostream& out) {
  const Dataset ds = load_dataset(t.data).normalized();
  t.config.seed = s.seed;
  const ModelGraph initial = build_model(parse_architecture(t.arch), ds.num_classes(), s.seed);
  const TrainResult result = train(initial, ds, t.config, [&out](const EpochRecord& r) {
    char line[160];
    std::snprintf(line, sizeof(line), "epoch %zu  loss %.4f  acc %.4f  val_loss %.4f  val_acc %.4f  (%.1fs)\n",
                  r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy, r.seconds);
    out << line << std::flush;
  });
  save_model(result.model, s.out);
  const bool json = s.format == "json";
  const std::string history = t.history.empty() ? s.out + (json ? ".history.json" : ".history.csv") : t.history;
  write_text(history, json ? history_json(result.history) : history_csv(result.history));
  out << "wrote model to " << s.out << " and history to " << history << '\n';
  return kOk;
}

int cmd_quantize(const SharedFlags& s, const std::string& model_path, std::ostream& out) {
  const ModelGraph model = load_float_model(model_path);
  const QuantizedModel q = quantize_model(model);
  save_model(q, s.out);
  out << "wrote quantized " << architecture_name(q.architecture()) << " to " << s.out << " ("
      << fs::file_size(s.out) << " bytes)\n";
  return kOk;
}

int cmd_eval(const SharedFlags& s, const EvalFlags& e, std::ostream& out) {
  const AnyModel model = load_model(e.model);
  Dataset ds = load_dataset(e.data).normalized();
  if (e.holdout) {
    if (!(e.val_frac > 0.0 && e.val_frac < 1.0)) throw ConfigError("--val-frac must lie in (0, 1)");
    ds = split(ds, 1.0 - e.val_frac, s.seed).second;
  }
  if (e.randomize) ds = permute_timesteps(ds, s.seed, e.shared_permutation);
  const MetricsReport report = evaluate(model, ds);
  export_report(report, s.out, parse_report_format(s.format));
  char line[128];
  std::snprintf(line, sizeof(line), "accuracy %.4f  macro AUC %.4f  (%zu records)\n", report.accuracy,
                report.auc_macro, ds.size());
  out << line << "wrote report to " << s.out << '\n';
  return kOk;
}

int cmd_bench(const SharedFlags& s, const BenchFlags& b, std::ostream& out) {
  const AnyModel model = load_model(b.model);
  SignalRecord sample;
  if (!b.data.empty()) {
    const Dataset ds = load_dataset(b.data);
    if (ds.empty()) throw ConfigError("benchmark dataset has no records");
    sample = normalize_power(ds[0]);
  } else {
    Rng rng(s.seed);
    sample = synthesize_signal(ImpairmentProfile{}, 20.0, Waveform::kQpsk, rng);
  }
  const Dataset one({"input"}, {sample});
  const LatencyStats stats = benchmark_latency(make_predictor(model), one.to_tensor(), b.runs, b.warmup);

  const double mean = round_to(stats.mean_ms, 4);
  const double std_dev = round_to(stats.std_ms, 4);
  const double ci = round_to(stats.ci95_ms, 4);
  char text[512];
  if (s.format == "json") {
    std::snprintf(text, sizeof(text),
                  "{\n  \"architecture\": \"%s\",\n  \"quantized\": %s,\n  \"latency\": {\"mean_ms\": %.4f, "
                  "\"std_ms\": %.4f, \"ci95_ms\": %.4f, \"runs\": %zu}\n}\n",
                  architecture_name(architecture_of(model)).c_str(), is_quantized(model) ? "true" : "false",
                  mean, std_dev, ci, stats.runs);
  } else {
    std::snprintf(text, sizeof(text),
                  "architecture,quantized,mean_ms,std_ms,ci95_ms,runs\n%s,%d,%.4f,%.4f,%.4f,%zu\n",
                  architecture_name(architecture_of(model)).c_str(), is_quantized(model) ? 1 : 0, mean,
                  std_dev, ci, stats.runs);
  }
  write_text(s.out, text);
  char line[160];
  std::snprintf(line, sizeof(line), "mean %.4f ms  std %.4f ms  95%% CI +/- %.4f ms  (%zu runs)\n", mean,
                std_dev, ci, stats.runs);
  out << line;
  return kOk;
}

// A capture is either a raw file of 256 little-endian (I, Q) float pairs or
// a dataset file holding exactly one record.
SignalRecord load_capture(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() >= 4 && std::equal(bytes.begin(), bytes.begin() + 4, "RFIQ")) {
    const Dataset ds = load_dataset(path);
    if (ds.size() != 1) throw FormatError("capture dataset must hold exactly one record", 0);
    return ds[0];
  }
  constexpr std::size_t kCaptureBytes = kRecordSamples * sizeof(IqSample);
  if (bytes.size() != kCaptureBytes) {
    throw FormatError("raw capture must be " + std::to_string(kCaptureBytes) + " bytes, got " +
                          std::to_string(bytes.size()),
                      std::min(bytes.size(), kCaptureBytes));
  }
  SignalRecord rec;
  std::memcpy(rec.iq.data(), bytes.data(), kCaptureBytes);
  return rec;
}

int cmd_fingerprint(const FingerprintFlags& f, std::ostream& out) {
  if (!(f.threshold > 0.0 && f.threshold <= 1.0)) throw ConfigError("--threshold must lie in (0, 1]");
  if (f.capture.empty() == f.data.empty()) throw ConfigError("give exactly one of --capture or --data");
  const AnyModel model = load_model(f.model);
  SignalRecord rec;
  if (!f.capture.empty()) {
    rec = load_capture(f.capture);
  } else {
    const Dataset ds = load_dataset(f.data);
    if (f.index >= ds.size()) throw ConfigError("--index out of range");
    rec = ds[f.index];
  }
  rec.label = 0;
  const Dataset one({"capture"}, {normalize_power(rec)});
  const Tensor probs = predict(model, one.to_tensor());
  const std::size_t cls = argmax_rows(probs).front();
  const float confidence = probs[cls];
  const bool accept = static_cast<double>(confidence) >= f.threshold;
  char line[160];
  std::snprintf(line, sizeof(line), "class %zu  confidence %.6f  %s\n", cls, confidence,
                accept ? "ACCEPT" : "REJECT");
  out << line;
  return accept ? kOk : kReject;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case Error::Kind::kFormat:
    case Error::Kind::kDimension:
    case Error::Kind::kInput:
    case Error::Kind::kDegenerateInput:
      return kFormat;
    case Error::Kind::kConfig:
    case Error::Kind::kParameter:
      return kConfig;
    case Error::Kind::kIo:
      return kIo;
    case Error::Kind::kState:
      break;
  }
  return kInternal;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Radio-frequency fingerprinting toolkit: synthesize, train, quantize, evaluate, benchmark."};
  app.name("rff");
  app.require_subcommand(1);
  app.set_config("--config", "", "Optional INI/TOML file with flag values; command-line flags take precedence");

  SharedFlags shared;

  GenerateFlags gen;
  CLI::App* generate = app.add_subcommand("generate", "Synthesize an impaired-transmitter dataset");
  add_shared(generate, shared, false, "Dataset file to write");
  generate->add_option("--devices", gen.devices, "Number of transmitters")->capture_default_str();
  generate->add_option("--signals", gen.signals, "Captures per transmitter")->capture_default_str();
  generate->add_option("--cfo-max", gen.cfo_max, "Largest |CFO|, cycles/sample")->capture_default_str();
  generate->add_option("--dc-max", gen.ranges.dc_max, "Largest DC offset magnitude")->capture_default_str();
  generate->add_option("--phase-noise-max", gen.ranges.phase_noise_max, "Largest phase-noise std, rad/sample")
      ->capture_default_str();
  generate->add_option("--cubic-max", gen.ranges.cubic_max, "Largest cubic compression coefficient")
      ->capture_default_str();
  generate->add_option("--snr-db", gen.ranges.snr_db, "AWGN signal-to-noise ratio")->capture_default_str();

  TrainFlags tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a classifier on a dataset file");
  add_shared(train_cmd, shared, true, "Model file to write");
  train_cmd->add_option("--data", tr.data, "Dataset file")->required();
  train_cmd->add_option("--arch", tr.arch, "Architecture")
      ->check(CLI::IsMember({"cnn", "transformer"}))
      ->capture_default_str();
  train_cmd->add_option("--epochs", tr.config.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--batch-size", tr.config.batch_size, "Mini-batch size")->capture_default_str();
  train_cmd->add_option("--lr", tr.config.learning_rate, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--val-frac", tr.config.validation_fraction, "Validation fraction")->capture_default_str();
  train_cmd->add_option("--history", tr.history, "History file (default: <out>.history.<format>)");

  std::string quantize_in;
  CLI::App* quantize_cmd = app.add_subcommand("quantize", "Convert a float model to dynamic-range int8");
  add_shared(quantize_cmd, shared, false, "Quantized model file to write");
  quantize_cmd->add_option("--model", quantize_in, "Float model file")->required();

  EvalFlags ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Accuracy, confusion matrix and ROC-AUC report");
  add_shared(eval_cmd, shared, true, "Report file to write");
  eval_cmd->add_option("--model", ev.model, "Model file (float or quantized)")->required();
  eval_cmd->add_option("--data", ev.data, "Dataset file")->required();
  eval_cmd->add_flag("--randomize", ev.randomize, "Permute the time steps of every record first");
  eval_cmd->add_flag("--shared-permutation", ev.shared_permutation, "With --randomize, one permutation for all records");
  eval_cmd->add_flag("--holdout", ev.holdout, "Evaluate only the validation split that train holds out");
  eval_cmd->add_option("--val-frac", ev.val_frac, "Validation fraction for --holdout")->capture_default_str();

  BenchFlags be;
  CLI::App* bench_cmd = app.add_subcommand("bench", "Single-sample inference latency");
  add_shared(bench_cmd, shared, true, "Latency report to write");
  bench_cmd->add_option("--model", be.model, "Model file (float or quantized)")->required();
  bench_cmd->add_option("--data", be.data, "Dataset whose first record is the input (default: synthetic)");
  bench_cmd->add_option("--runs", be.runs, "Timed runs")->check(CLI::Range(std::size_t{2}, std::numeric_limits<std::size_t>::max()))->capture_default_str();
  bench_cmd->add_option("--warmup", be.warmup, "Untimed warm-up runs")->check(CLI::Range(std::size_t{10}, std::numeric_limits<std::size_t>::max()))->capture_default_str();

  FingerprintFlags fp;
  CLI::App* fp_cmd = app.add_subcommand(
      "fingerprint",
      "Classify one capture and accept it if the top softmax confidence reaches the threshold. "
      "This is a closed-set heuristic, not open-set recognition. Exit 0 on ACCEPT, 1 on REJECT.");
  add_shared(fp_cmd, shared, false, "");
  fp_cmd->add_option("--model", fp.model, "Model file (float or quantized)")->required();
  fp_cmd->add_option("--capture", fp.capture, "Raw 2048-byte IQ capture or a one-record dataset file");
  fp_cmd->add_option("--data", fp.data, "Dataset file; use with --index");
  fp_cmd->add_option("--index", fp.index, "Record index within --data")->capture_default_str();
  fp_cmd->add_option("--threshold", fp.threshold, "Confidence threshold in (0, 1]")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    // Help requested on a subcommand surfaces as CallForHelp too; anything
    // else is a usage error.
    err << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kUsage;
  }

  try {
    if (generate->parsed()) return cmd_generate(shared, gen, out);
    if (train_cmd->parsed()) return cmd_train(shared, tr, out);
    if (quantize_cmd->parsed()) return cmd_quantize(shared, quantize_in, out);
    if (eval_cmd->parsed()) return cmd_eval(shared, ev, out);
    if (bench_cmd->parsed()) return cmd_bench(shared, be, out);
    if (fp_cmd->parsed()) return cmd_fingerprint(fp, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}

}  // namespace rff::cli
