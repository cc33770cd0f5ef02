// Command line entry point: index building, expansion, training, evaluation,
// comparison, gradient checks and synthetic data.

#include <fmt/core.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "prfrl/config.h"
#include "prfrl/error.h"
#include "prfrl/gradsuite.h"
#include "prfrl/kernels.h"
#include "prfrl/log.h"
#include "prfrl/pipeline.h"
#include "prfrl/synth.h"

namespace fs = std::filesystem;
using namespace prfrl;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "key = value configuration file");
  cmd->add_option("--set", opts.overrides, "override a configuration key (key=value)");
  cmd->add_option("--seed", opts.seed, "root random seed");
  cmd->add_flag("-v,--verbose", opts.verbose, "progress output on stderr");
  cmd->add_flag("-q,--quiet", opts.quiet, "suppress warnings");
}

RunConfig resolve_config(const CommonOptions& opts) {
  if (opts.quiet) log::set_level(log::Level::kQuiet);
  if (opts.verbose) log::set_level(log::Level::kInfo);
  RunConfig config = opts.config_path.empty() ? RunConfig{} : RunConfig::load(opts.config_path);
  for (const std::string& o : opts.overrides) {
    const auto [key, value] = split_assignment(o);
    config.set(key, value);
  }
  if (opts.seed) config.set("seed", std::to_string(*opts.seed));
  config.validate();
  return config;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

Dataset load_expanded(const std::string& data, const std::string& index_path,
                      const RunConfig& config) {
  Dataset dataset = load_dataset(data, make_ranker_tokenizer(config));
  if (index_path.empty()) return dataset;
  const InvertedIndex index = InvertedIndex::load(index_path);
  ExpansionStats stats;
  dataset = expand_all_responses(dataset, index, config.prf, make_retrieval_tokenizer(config),
                                 &stats);
  log::info("expanded {} examples ({} distinct responses, {} without evidence)",
            stats.examples, stats.distinct_responses, stats.empty_sets);
  return dataset;
}

int run(int argc, char** argv) {
  CLI::App app{"Reinforced pseudo-relevance feedback response ranking"};
  app.require_subcommand(1);
  CommonOptions common;

  // build-index
  std::string corpus, out;
  auto* build = app.add_subcommand("build-index", "build a BM25 index over a post corpus");
  build->add_option("--corpus", corpus, "corpus JSON-lines file")->required();
  build->add_option("--out", out, "index output file")->required();
  add_common(build, common);

  // expand
  std::string data, index;
  auto* expand = app.add_subcommand("expand", "attach PRF candidate terms to every response");
  expand->add_option("--data", data, "dataset JSON-lines file")->required();
  expand->add_option("--index", index, "index built by build-index")->required();
  expand->add_option("--out", out, "expanded dataset output")->required();
  add_common(expand, common);

  // train
  std::string log_path, mode_name;
  auto* train = app.add_subcommand("train", "train the ranker and selector");
  train->add_option("--data", data, "expanded dataset")->required();
  train->add_option("--out", out, "checkpoint output")->required();
  train->add_option("--index", index, "expand on the fly with this index");
  train->add_option("--log", log_path, "per-batch JSON-lines training log");
  train->add_option("--mode", mode_name, "selection mode (overrides selector.mode)");
  add_common(train, common);

  // evaluate
  std::string ckpt, split_arg = "test", export_path, json_path;
  auto* evaluate = app.add_subcommand("evaluate", "score a split and report ranking metrics");
  evaluate->add_option("--data", data, "expanded dataset")->required();
  evaluate->add_option("--ckpt", ckpt, "checkpoint from train")->required();
  evaluate->add_option("--mode", mode_name, "selection mode (default: the trained one)");
  evaluate->add_option("--split", split_arg, "train, valid or test");
  evaluate->add_option("--index", index, "expand on the fly with this index");
  evaluate->add_option("--export-selections", export_path, "selection decisions (JSON-lines)");
  evaluate->add_option("--json", json_path, "write the metrics report as JSON");
  evaluate->add_flag("-v,--verbose", common.verbose, "progress output on stderr");
  evaluate->add_flag("-q,--quiet", common.quiet, "suppress warnings");

  // compare
  auto* compare = app.add_subcommand("compare", "train and evaluate every selection mode");
  compare->add_option("--data", data, "expanded dataset")->required();
  compare->add_option("--index", index, "expand on the fly with this index");
  compare->add_option("--split", split_arg, "evaluation split");
  compare->add_option("--json", json_path, "write all reports as JSON lines");
  add_common(compare, common);

  // gradcheck
  std::size_t sample = 100;
  double tolerance = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of all gradients");
  gradcheck->add_option("--sample", sample, "coordinates per check");
  gradcheck->add_option("--tolerance", tolerance, "maximum relative error");
  add_common(gradcheck, common);

  // synth
  std::string corpus_out;
  SynthConfig synth_config;
  auto* synth = app.add_subcommand("synth", "generate the synthetic oracle task");
  synth->add_option("--out", out, "dataset output")->required();
  synth->add_option("--corpus", corpus_out, "corpus output (default: <out>.corpus.jsonl)");
  synth->add_option("--contexts", synth_config.contexts, "number of contexts");
  synth->add_option("--candidates", synth_config.candidates, "candidates per context");
  synth->add_option("--noise-ratio", synth_config.noise_ratio, "share of noise terms");
  synth->add_option("--terms", synth_config.terms, "PRF terms per response");
  synth->add_option("--topics", synth_config.topics, "topic vocabulary size");
  synth->add_option("--noise-bias", synth_config.noise_bias,
                    "training-split label association of noise terms");
  synth->add_option("--seed", synth_config.seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*build) {
    const RunConfig config = resolve_config(common);
    const InvertedIndex idx = build_index_from_corpus(corpus, config);
    idx.save(out);
    fmt::print("indexed {} posts, {} terms\n", idx.doc_count(), idx.term_count());
  } else if (*expand) {
    const RunConfig config = resolve_config(common);
    const Dataset expanded = load_expanded(data, index, config);
    save_dataset(expanded, out);
    fmt::print("wrote {} examples to {}\n", expanded.size(), out);
  } else if (*train) {
    RunConfig config = resolve_config(common);
    if (!mode_name.empty()) config.set("selector.mode", mode_name);
    const Dataset dataset = load_expanded(data, index, config);
    std::ofstream log_file;
    TrainOptions options;
    if (!log_path.empty()) {
      log_file = open_output(log_path);
      options.on_batch = [&log_file](const BatchLog& entry) { write_batch_log(entry, log_file); };
    }
    const TrainedModel model = train_pipeline(dataset, config, options);
    save_model(model, out);
    fmt::print("saved {} checkpoint to {}\n", selection_mode_name(config.selector.mode), out);
  } else if (*evaluate) {
    if (common.quiet) log::set_level(log::Level::kQuiet);
    if (common.verbose) log::set_level(log::Level::kInfo);
    const TrainedModel model = load_model(ckpt);
    std::optional<SelectionMode> mode;
    if (!mode_name.empty()) mode = parse_selection_mode(mode_name);
    const Dataset dataset = load_expanded(data, index, model.config);
    const Evaluation result = evaluate_model(model, dataset, parse_split(split_arg), mode);
    const std::string label(selection_mode_name(mode.value_or(model.config.selector.mode)));
    fmt::print("{}", format_table({{label, result.report}}));
    fmt::print("{}\n", result.report.to_json());
    if (!json_path.empty()) open_output(json_path) << result.report.to_json() << '\n';
    if (!export_path.empty()) {
      std::ofstream f = open_output(export_path);
      write_selection_jsonl(result.selections, f);
    }
  } else if (*compare) {
    const RunConfig config = resolve_config(common);
    const Dataset dataset = load_expanded(data, index, config);
    std::vector<std::pair<std::string, MetricsReport>> rows;
    for (SelectionMode mode : comparison_modes()) {
      RunConfig run = config;
      run.selector.mode = mode;
      const TrainedModel model = train_pipeline(dataset, run);
      const Evaluation result = evaluate_model(model, dataset, parse_split(split_arg));
      rows.emplace_back(std::string(selection_mode_name(mode)), result.report);
      log::info("{}: recall@1 {:.4f}", selection_mode_name(mode), result.report.recall_1);
    }
    fmt::print("{}", format_table(rows));
    if (!json_path.empty()) {
      std::ofstream f = open_output(json_path);
      for (const auto& [name, report] : rows) {
        f << fmt::format("{{\"mode\":\"{}\",\"report\":{}}}\n", name, report.to_json());
      }
    }
  } else if (*gradcheck) {
    const RunConfig config = resolve_config(common);
    bool ok = true;
    for (const GradSuiteCase& c : run_gradient_suite(config, sample, config.seed)) {
      const bool pass = c.max_rel_error < tolerance;
      ok = ok && pass;
      fmt::print("{:<28} coords {:>4}  max rel error {:.3e}  {}\n", c.name, c.coordinates,
                 c.max_rel_error, pass ? "ok" : "FAIL");
    }
    fmt::print("kernel backend: {}\n", kernels::backend_name(kernels::active_backend()));
    if (!ok) return kExitNumerical;
  } else if (*synth) {
    const SynthTask task = generate_synth(synth_config);
    if (corpus_out.empty()) corpus_out = out + ".corpus.jsonl";
    {
      std::ofstream f = open_output(out);
      write_synth_dataset(task, f);
    }
    {
      std::ofstream f = open_output(corpus_out);
      write_synth_corpus(task, f);
    }
    fmt::print("wrote {} examples to {} and {} posts to {}\n", task.records.size(), out,
               task.corpus.size(), corpus_out);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage;
  }
}
