// mveb: train, sweep, verify and probe the two-view entropy-bottleneck encoder.
//
// Exit codes: 0 success, 1 property or run failure, 2 configuration error.

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "config_io.hpp"
#include "mveb/mveb.hpp"

namespace {

using mveb::ConfigError;
using mveb::TrainConfig;
using mveb::cli::Json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

/// Config flags attached to one subcommand; values are kept as text until
/// the effective config is assembled.
class ConfigOptions {
 public:
  void attach(CLI::App& app) {
    app.add_option("--config", config_path_, "JSON config file; explicit flags override its values");
    for (const auto& spec : mveb::cli::config_flags()) {
      auto& slot = values_[spec.flag];
      options_.push_back({app.add_option(spec.flag, slot, spec.description), spec});
    }
  }

  TrainConfig resolve() const {
    Json merged = mveb::cli::to_json(TrainConfig{});
    if (!config_path_.empty()) merged.merge_patch(validated(mveb::cli::read_json_file(config_path_)));
    for (const auto& [opt, spec] : options_)
      if (opt->count() > 0) merged[spec.where] = mveb::cli::parse_flag_value(spec, values_.at(spec.flag));
    TrainConfig cfg = mveb::cli::from_json(merged);
    cfg.validate();
    return cfg;
  }

 private:
  static Json validated(Json file) {
    (void)mveb::cli::from_json(file);
    return file;
  }

  std::string config_path_;
  std::map<std::string, std::string> values_;
  std::vector<std::pair<CLI::Option*, mveb::cli::FlagSpec>> options_;
};

/// --out handling: a file when given, stdout otherwise.
class OutputTarget {
 public:
  void attach(CLI::App& app) { app.add_option("--out", path_, "write metrics here instead of stdout"); }

  std::ostream& open() {
    if (path_.empty()) return std::cout;
    file_ = std::make_unique<std::ofstream>(path_);
    if (!*file_) throw ConfigError("cannot open output file '" + path_ + "'");
    return *file_;
  }

 private:
  std::string path_;
  std::unique_ptr<std::ofstream> file_;
};

int run_train(const ConfigOptions& opts, OutputTarget& target, const std::string& checkpoint) {
  const TrainConfig cfg = opts.resolve();
  std::ostream& out = target.open();
  const mveb::TrainResult result =
      mveb::train(cfg, [&out](const mveb::MetricsRecord& r) { out << mveb::format_record(r) << '\n' << std::flush; });
  out << '\n';
  mveb::write_summary(out, {mveb::SweepRow{cfg.beta, result.records.back()}});
  if (!checkpoint.empty()) mveb::save_checkpoint(checkpoint, result.model);
  return kExitOk;
}

int run_sweep(const ConfigOptions& opts, OutputTarget& target, const std::vector<double>& betas,
              const std::string& summary_path) {
  const TrainConfig cfg = opts.resolve();
  for (double b : betas) mveb::detail::require_config(b >= 0.0, "betas must be >= 0");
  std::ostream& out = target.open();
  const auto rows = mveb::beta_sweep(
      cfg, betas, [&out](const mveb::SweepRow& row) { out << mveb::format_record(row.final) << '\n' << std::flush; });
  out << '\n';
  mveb::write_summary(out, rows);
  if (!summary_path.empty()) {
    std::ofstream s(summary_path);
    if (!s) throw ConfigError("cannot open summary file '" + summary_path + "'");
    mveb::write_summary(s, rows);
  }
  return kExitOk;
}

int run_verify(const mveb::VerifyOptions& vopts, OutputTarget& target) {
  std::ostream& out = target.open();
  const mveb::VerifyReport report = mveb::verify_suite(vopts);
  mveb::write_report(out, report);
  return report.exit_code();
}

int run_probe(const ConfigOptions& opts, OutputTarget& target, const std::string& checkpoint, bool raw) {
  const TrainConfig cfg = opts.resolve();
  double acc = 0.0;
  std::string source;
  if (raw) {
    mveb::ViewGenerator tr_gen(cfg.data, mveb::kProbeTrainStream);
    mveb::ViewGenerator te_gen(cfg.data, mveb::kProbeTestStream);
    const auto tr = tr_gen.next(cfg.probe_train_size);
    const auto te = te_gen.next(cfg.probe_test_size);
    acc = mveb::linear_probe(tr.v1, tr.labels, te.v1, te.labels, cfg.probe);
    source = "raw_inputs";
  } else if (!checkpoint.empty()) {
    const mveb::EncoderModel model = mveb::load_checkpoint(checkpoint);
    if (model.input_dim() != cfg.data.input_dim)
      throw ConfigError("checkpoint input dimension " + std::to_string(model.input_dim()) +
                        " does not match data.input_dim " + std::to_string(cfg.data.input_dim));
    acc = mveb::probe_accuracy(model, cfg);
    source = "checkpoint";
  } else {
    acc = mveb::probe_accuracy(mveb::make_encoder(cfg), cfg);
    source = "initial_encoder";
  }
  std::ostream& out = target.open();
  out << std::setprecision(std::numeric_limits<double>::max_digits10) << "probe_accuracy=" << acc
      << " chance=" << 1.0 / cfg.data.num_classes << " source=" << source << '\n';
  return kExitOk;
}

int run_dump(const ConfigOptions& opts, OutputTarget& target, const std::string& dataset, int size,
             std::uint64_t stream) {
  const TrainConfig cfg = opts.resolve();
  std::ostream& out = target.open();
  mveb::cli::write_config(out, cfg);
  if (!dataset.empty()) {
    mveb::detail::require_config(size >= 1, "--dataset-size must be >= 1");
    std::ofstream f(dataset);
    if (!f) throw ConfigError("cannot open dataset file '" + dataset + "'");
    mveb::ViewGenerator gen(cfg.data, stream);
    mveb::write_dataset(f, gen.next(size), cfg.data, stream);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-view entropy-bottleneck representation learning at desk scale"};
  app.require_subcommand(1);

  ConfigOptions train_cfg, sweep_cfg, probe_cfg, dump_cfg;
  OutputTarget train_out, sweep_out, verify_out, probe_out, dump_out;

  std::string checkpoint_out;
  auto* train_cmd = app.add_subcommand("train", "train one encoder and stream metrics");
  train_cfg.attach(*train_cmd);
  train_out.attach(*train_cmd);
  train_cmd->add_option("--save-checkpoint", checkpoint_out, "write final encoder parameters here");

  std::vector<double> betas{0.0, 0.001, 0.01, 0.1};
  std::string summary_path;
  auto* sweep_cmd = app.add_subcommand("sweep-beta", "train once per beta and tabulate final metrics");
  sweep_cfg.attach(*sweep_cmd);
  sweep_out.attach(*sweep_cmd);
  sweep_cmd->add_option("--betas", betas, "comma-separated beta values")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--summary", summary_path, "also write the summary table to this file");

  mveb::VerifyOptions vopts;
  auto* verify_cmd = app.add_subcommand("verify", "run the property suite");
  verify_out.attach(*verify_cmd);
  verify_cmd->add_option("--ridge-eta", vopts.ridge_eta, "ridge for Stein-based properties")->capture_default_str();
  verify_cmd->add_flag("--flip-score-sign", vopts.flip_score_sign, "negate scores in entropy-gradient checks");
  verify_cmd->add_flag("--include-training", vopts.include_training, "also run full-length wiring comparison");

  std::string checkpoint_in;
  bool raw = false;
  auto* probe_cmd = app.add_subcommand("probe", "linear-probe accuracy on the fixed probe sets");
  probe_cfg.attach(*probe_cmd);
  probe_out.attach(*probe_cmd);
  probe_cmd->add_option("--checkpoint", checkpoint_in, "encoder to probe (default: untrained encoder for --seed)");
  probe_cmd->add_flag("--raw", raw, "probe raw view-1 inputs instead of embeddings")->excludes("--checkpoint");

  std::string dataset_path;
  int dataset_size = 1024;
  std::uint64_t dataset_stream = 0;
  auto* dump_cmd = app.add_subcommand("dump-config", "print the effective config as JSON");
  dump_cfg.attach(*dump_cmd);
  dump_out.attach(*dump_cmd);
  dump_cmd->add_option("--dataset", dataset_path, "also write a generated dataset to this file");
  dump_cmd->add_option("--dataset-size", dataset_size, "rows in the dumped dataset")->capture_default_str();
  dump_cmd->add_option("--dataset-stream", dataset_stream, "generator stream id")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*train_cmd) return run_train(train_cfg, train_out, checkpoint_out);
    if (*sweep_cmd) return run_sweep(sweep_cfg, sweep_out, betas, summary_path);
    if (*verify_cmd) return run_verify(vopts, verify_out);
    if (*probe_cmd) return run_probe(probe_cfg, probe_out, checkpoint_in, raw);
    if (*dump_cmd) return run_dump(dump_cfg, dump_out, dataset_path, dataset_size, dataset_stream);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
