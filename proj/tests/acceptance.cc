// Acceptance checks. Prints one PASS/FAIL line per criterion; exits non-zero
// when any criterion fails. Criterion numbers given on the command line
// restrict the run to those criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "prfrl/config.h"
#include "prfrl/gradsuite.h"
#include "prfrl/log.h"
#include "prfrl/metrics.h"
#include "prfrl/pipeline.h"
#include "prfrl/retrieval.h"
#include "prfrl/synth.h"
#include "prfrl/trainer.h"

namespace fs = std::filesystem;
using namespace prfrl;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---- 1: BM25 against brute force -------------------------------------------

Outcome bm25_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::size_t queries = 0, mismatches = 0;
  for (int corpus = 0; corpus < 20; ++corpus) {
    const std::size_t docs = 50 + rng() % 451;
    const std::size_t vocab = 20 + rng() % 181;
    std::vector<ExternalPost> posts(docs);
    std::set<std::int64_t> used;
    for (auto& p : posts) {
      do {
        p.doc_id = static_cast<std::int64_t>(rng() % 100000);
      } while (!used.insert(p.doc_id).second);
      const std::size_t len = 1 + rng() % 20;
      for (std::size_t i = 0; i < len; ++i) p.tokens.push_back("t" + std::to_string(rng() % vocab));
    }
    const InvertedIndex index = InvertedIndex::build(posts);

    double avgdl = 0.0;
    std::map<std::string, double> df;
    for (const auto& p : posts) {
      avgdl += static_cast<double>(p.tokens.size());
      for (const auto& t : std::set<std::string>(p.tokens.begin(), p.tokens.end())) df[t] += 1.0;
    }
    avgdl /= static_cast<double>(docs);
    const double n = static_cast<double>(docs);

    for (int q = 0; q < 10; ++q, ++queries) {
      TokenList query;
      const std::size_t qlen = 1 + rng() % 6;
      for (std::size_t i = 0; i < qlen; ++i) query.push_back("t" + std::to_string(rng() % (vocab + 10)));
      std::vector<std::string> distinct;
      for (const auto& t : query) {
        if (std::find(distinct.begin(), distinct.end(), t) == distinct.end()) distinct.push_back(t);
      }
      std::vector<std::pair<std::int64_t, double>> expect;
      for (const auto& p : posts) {
        double s = 0.0;
        for (const auto& t : distinct) {
          const double tf = static_cast<double>(std::count(p.tokens.begin(), p.tokens.end(), t));
          if (tf == 0.0) continue;
          const double idf = std::log(1.0 + (n - df[t] + 0.5) / (df[t] + 0.5));
          const double dl = static_cast<double>(p.tokens.size());
          s += idf * tf * (1.2 + 1.0) / (tf + 1.2 * (1.0 - 0.75 + 0.75 * dl / avgdl));
        }
        if (s > 0.0) expect.emplace_back(p.doc_id, s);
      }
      std::sort(expect.begin(), expect.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
      });
      const std::size_t k = 1 + rng() % docs;
      if (expect.size() > k) expect.resize(k);
      const auto got = retrieve_top_k(index, query, k);
      bool same = got.size() == expect.size();
      for (std::size_t i = 0; same && i < got.size(); ++i) {
        same = got[i].first == expect[i].first &&
               std::abs(got[i].second - expect[i].second) <= 1e-12 * std::max(1.0, expect[i].second);
      }
      mismatches += same ? 0 : 1;
    }
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < 10.0,
          fmt::format("{} queries over 20 corpora, {} mismatches, {:.1f} s", queries, mismatches, secs)};
}

// ---- 2: metrics against brute force ----------------------------------------

Outcome metric_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(77);
  std::vector<RankedGroup> groups;
  double sums[5] = {0, 0, 0, 0, 0};
  std::size_t counted = 0;
  for (int g = 0; g < 1000; ++g) {
    const std::size_t n = 1 + rng() % 15;
    std::vector<ScoredCandidate> cands;
    for (std::size_t i = 0; i < n; ++i) {
      cands.push_back({fmt::format("r{:02}", (i * 7 + static_cast<std::size_t>(g)) % 97),
                       static_cast<double>(rng() % 5) * 0.25, rng() % 4 == 0 ? 1 : 0});
    }
    groups.push_back(RankedGroup::from_scores(fmt::format("g{}", g), cands));

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (cands[a].score != cands[b].score) return cands[a].score > cands[b].score;
      return cands[a].candidate_id < cands[b].candidate_id;
    });
    double positives = 0.0;
    for (const auto& c : cands) positives += c.label;
    if (positives == 0.0) continue;
    ++counted;
    const std::size_t cutoffs[3] = {1, 2, 5};
    for (int m = 0; m < 3; ++m) {
      double hits = 0.0;
      for (std::size_t i = 0; i < std::min(cutoffs[m], n); ++i) hits += cands[order[i]].label;
      sums[m] += hits / positives;
    }
    double hits = 0.0, precision_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (cands[order[i]].label == 1) {
        hits += 1.0;
        precision_sum += hits / static_cast<double>(i + 1);
      }
    }
    sums[3] += precision_sum / positives;
    sums[4] += cands[order[0]].label;
  }
  const MetricsReport got = compute_metrics(groups);
  std::size_t mismatches = got.groups == counted ? 0 : 1;
  for (std::size_t m = 0; m < 5; ++m) {
    if (metric_value(got, m) != sums[m] / static_cast<double>(counted)) ++mismatches;
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < 5.0,
          fmt::format("1000 groups ({} with positives), {} metric mismatches, {:.2f} s", counted,
                      mismatches, secs)};
}

// ---- 3: gradient suite ------------------------------------------------------

Outcome gradient_suite() {
  const auto start = std::chrono::steady_clock::now();
  RunConfig config;
  config.encoder = {2, 2, 64, 128, 32, 0.0};
  config.limits = {12, 8, 32};
  bool ok = true;
  std::string detail;
  for (const GradSuiteCase& c : run_gradient_suite(config, 120, 11)) {
    ok = ok && c.coordinates >= 100 && c.max_rel_error < 1e-4;
    detail += fmt::format("{} {} coords {:.1e}; ", c.name, c.coordinates, c.max_rel_error);
  }
  const double secs = seconds_since(start);
  return {ok && secs < 120.0, detail + fmt::format("{:.1f} s", secs)};
}

// ---- 4: REINFORCE on a two-term bandit ---------------------------------------

// Every response carries term A and term B. Selecting A during a ranker step
// lowers the reward-set loss; selecting B raises it.
class BanditEnv : public Environment {
 public:
  BanditEnv(std::size_t d, std::mt19937_64& rng) : a_(d), b_(d) {
    std::normal_distribution<double> n;
    for (double& v : a_) v = n(rng);
    for (double& v : b_) v = n(rng);
    for (std::size_t i = 0; i < kTrain; ++i) {
      Vector ja(d), jb(d);
      for (std::size_t k = 0; k < d; ++k) {
        ja[k] = a_[k] + 0.1 * n(rng);
        jb[k] = b_[k] + 0.1 * n(rng);
      }
      states_.push_back({ja, jb});
    }
  }

  std::size_t train_size() const override { return kTrain; }
  std::size_t valid_size() const override { return 20; }
  std::vector<std::vector<Vector>> term_states(std::span<const std::size_t> batch) override {
    std::vector<std::vector<Vector>> out;
    for (std::size_t i : batch) out.push_back(states_[i]);
    return out;
  }
  double train_batch(std::span<const std::size_t> batch,
                     std::span<const ActionVector> actions) override {
    for (const ActionVector& a : actions) {
      quality_ += 0.01 * (a[0] - a[1]) / static_cast<double>(batch.size());
    }
    return 1.0 - quality_;
  }
  double reward_loss(std::span<const std::size_t>, const ParameterStore&, PolicyOverride) override {
    return 1.0 - quality_;
  }

  const std::vector<std::vector<Vector>>& states() const { return states_; }

 private:
  static constexpr std::size_t kTrain = 32;
  Vector a_, b_;
  std::vector<std::vector<Vector>> states_;
  double quality_ = 0.0;
};

Outcome bandit() {
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    EpisodeConfig config;
    config.batch_size = 8;
    config.policy_lr = 0.01;
    config.reward_sample_rate = 0.25;
    config.seed = seed;
    RngStreams rng = RngStreams::from_seed(seed);
    BanditEnv env(16, rng.init);
    ParameterStore policy;
    init_policy(policy, 16);
    Reinforce rl(env, policy, config, rng);
    double pa = 0.0, pb = 0.0;
    std::size_t episodes = 0;
    while (episodes < 200) {
      rl.run_episode(episodes++);
      pa = pb = 0.0;
      for (const auto& s : env.states()) {
        pa += policy_probs(policy, s[0])[0];
        pb += policy_probs(policy, s[1])[0];
      }
      pa /= static_cast<double>(env.states().size());
      pb /= static_cast<double>(env.states().size());
      if (pa > 0.9 && pb < 0.1) break;
    }
    ok = ok && pa > 0.9 && pb < 0.1;
    detail += fmt::format("seed {}: pi(A) {:.3f} pi(B) {:.3f} after {} episodes; ", seed, pa, pb,
                          episodes);
  }
  const double secs = seconds_since(start);
  return {ok && secs < 180.0, detail + fmt::format("{:.1f} s", secs)};
}

// ---- shared synthetic data ----------------------------------------------------

Dataset synth_dataset(const SynthConfig& sc, const RunConfig& config) {
  std::stringstream buf;
  write_synth_dataset(generate_synth(sc), buf);
  return parse_dataset(buf, make_ranker_tokenizer(config));
}

// ---- 5: end-to-end trend on the synthetic task ---------------------------------

RunConfig trend_config(std::uint64_t seed) {
  RunConfig c;
  c.seed = seed;
  c.encoder = {2, 2, 32, 64, 80, 0.1};
  c.limits = {40, 8, 80};
  c.vocab_min_freq = 2;
  c.prf.k2 = 8;
  c.train.episodes = 20;
  c.train.pretrain_steps = 0;
  c.train.batch_size = 12;
  c.train.reward_sample_rate = 0.02;
  c.train.policy_lr = 0.03;
  c.train.gamma = 0.0;
  c.train.sampled_reward_selection = true;
  return c;
}

Outcome synth_trend() {
  const auto start = std::chrono::steady_clock::now();
  std::map<std::string, double> recall;
  const std::vector<SelectionMode> modes = {SelectionMode::kNone, SelectionMode::kRule,
                                            SelectionMode::kRlSample};
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    SynthConfig sc;
    sc.contexts = 500;
    sc.candidates = 10;
    sc.noise_ratio = 0.5;
    sc.terms = 8;
    sc.noise_bias = 0.0;
    sc.seed = seed;
    const Dataset dataset = synth_dataset(sc, trend_config(seed));
    detail += fmt::format("seed {}:", seed);
    for (SelectionMode mode : modes) {
      RunConfig config = trend_config(seed);
      config.selector.mode = mode;
      const TrainedModel model = train_pipeline(dataset, config);
      const double r1 = evaluate_model(model, dataset, Split::kTest).report.recall_1;
      recall[std::string(selection_mode_name(mode))] += r1 / 3.0;
      detail += fmt::format(" {} {:.3f}", selection_mode_name(mode), r1);
    }
    detail += "; ";
  }
  const double none = recall["none"], rule = recall["rule"], rl = recall["rl_sample"];
  const double secs = seconds_since(start);
  return {rl >= none + 0.05 && rl >= rule && secs < 1200.0,
          detail + fmt::format("mean recall@1 none {:.3f} rule {:.3f} rl {:.3f}; {:.0f} s", none,
                               rule, rl, secs)};
}

// ---- 6: training loop contract ----------------------------------------------

RunConfig small_config(std::uint64_t seed) {
  RunConfig c;
  c.seed = seed;
  c.encoder = {1, 2, 16, 32, 64, 0.1};
  c.limits = {32, 8, 64};
  c.prf.k2 = 4;
  c.train.episodes = 3;
  c.train.pretrain_steps = 5;
  c.train.batch_size = 8;
  c.train.reward_sample_rate = 0.2;
  c.train.policy_lr = 0.01;
  return c;
}

SynthConfig small_synth(std::uint64_t seed) {
  SynthConfig sc;
  sc.contexts = 40;
  sc.candidates = 5;
  sc.seed = seed;
  return sc;
}

Outcome loop_contract() {
  const auto start = std::chrono::steady_clock::now();
  RunConfig config = small_config(4);
  const Dataset dataset = synth_dataset(small_synth(4), config);
  const std::size_t valid = dataset.valid.size();
  const std::size_t expect_size =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config.train.reward_sample_rate *
                                                                      static_cast<double>(valid))));
  bool history_ok = true, size_ok = true;
  std::set<std::vector<std::size_t>> reward_sets;
  std::size_t episodes = 0;
  TrainOptions options;
  options.on_episode = [&](const EpisodeSummary& s, const EpisodeHistory& h) {
    ++episodes;
    history_ok = history_ok && h.empty() && s.history_before_update == s.batches.size();
    size_ok = size_ok && s.reward_set.size() == expect_size;
    reward_sets.insert(s.reward_set);
  };
  train_pipeline(dataset, config, options);

  TrainOptions drop;
  drop.policy_override = PolicyOverride::kAlwaysDrop;
  const TrainedModel frozen = train_pipeline(dataset, config, drop);
  RunConfig plain_config = config;
  plain_config.selector.mode = SelectionMode::kNone;
  const TrainedModel plain = train_pipeline(dataset, plain_config);
  std::size_t compared = 0, differing = 0;
  for (const auto& [name, m] : plain.model.params.tensors) {
    ++compared;
    if (!(m == frozen.model.params.get(name))) ++differing;
  }
  const bool resampled = reward_sets.size() > 1;
  const bool ok = history_ok && size_ok && resampled && differing == 0 && episodes == 3;
  return {ok, fmt::format("history emptied {}, reward set size {} ({}), resampled {}, "
                          "always-drop vs plain: {}/{} ranker tensors differ, {:.1f} s",
                          history_ok ? "yes" : "no", expect_size, size_ok ? "ok" : "wrong",
                          resampled ? "yes" : "no", differing, compared, seconds_since(start))};
}

// ---- 7 and 8: command line runs ---------------------------------------------

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / fmt::format("prfrl_acceptance_{}", std::random_device{}());
    fs::create_directories(dir);
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

bool run(const std::string& args) {
  const std::string cmd = fmt::format("\"{}\" {} >/dev/null 2>&1", PRFRL_CLI_PATH, args);
  return std::system(cmd.c_str()) == 0;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_config(const Workspace& ws, const RunConfig& config) {
  std::ofstream(ws.path("run.conf")) << config.to_text();
}

Outcome determinism() {
  const auto start = std::chrono::steady_clock::now();
  Workspace ws;
  write_config(ws, small_config(7));
  bool ok = run(fmt::format("synth --contexts 40 --candidates 5 --seed 7 --out {}", ws.path("d.jsonl")));
  for (int i : {0, 1}) {
    ok = ok && run(fmt::format("train --data {} --config {} --mode rl --seed 7 -q --out {}",
                               ws.path("d.jsonl"), ws.path("run.conf"), ws.path(fmt::format("m{}.ckpt", i))));
    ok = ok && run(fmt::format("evaluate --data {} --ckpt {} --json {}", ws.path("d.jsonl"),
                               ws.path(fmt::format("m{}.ckpt", i)), ws.path(fmt::format("r{}.json", i))));
  }
  const std::string a = slurp(ws.path("r0.json")), b = slurp(ws.path("r1.json"));
  const bool same_report = ok && !a.empty() && a == b;
  const bool same_ckpt = ok && slurp(ws.path("m0.ckpt")) == slurp(ws.path("m1.ckpt"));
  return {same_report && same_ckpt,
          fmt::format("commands {}, reports identical {}, checkpoints identical {}, {:.1f} s",
                      ok ? "ok" : "failed", same_report ? "yes" : "no", same_ckpt ? "yes" : "no",
                      seconds_since(start))};
}

Outcome offline_online() {
  const auto start = std::chrono::steady_clock::now();
  Workspace ws;
  const RunConfig config = small_config(8);
  write_config(ws, config);
  bool ok = run(fmt::format("synth --contexts 40 --candidates 5 --seed 8 --out {} --corpus {}",
                            ws.path("full.jsonl"), ws.path("corpus.jsonl")));
  if (ok) {
    Dataset stripped = load_dataset(ws.path("full.jsonl"), make_ranker_tokenizer(config));
    for (Split s : {Split::kTrain, Split::kValid, Split::kTest}) {
      for (auto& ex : stripped.split(s)) ex.prf_candidates.reset();
    }
    save_dataset(stripped, ws.path("raw.jsonl"));
  }
  const std::string common = fmt::format("--config {} --seed 8 -q", ws.path("run.conf"));
  ok = ok && run(fmt::format("build-index --corpus {} --out {} {}", ws.path("corpus.jsonl"),
                             ws.path("idx.bin"), common));
  ok = ok && run(fmt::format("expand --data {} --index {} --out {} {}", ws.path("raw.jsonl"),
                             ws.path("idx.bin"), ws.path("x.jsonl"), common));
  ok = ok && run(fmt::format("train --data {} --mode rl --out {} {}", ws.path("x.jsonl"),
                             ws.path("offline.ckpt"), common));
  ok = ok && run(fmt::format("evaluate --data {} --ckpt {} --json {}", ws.path("x.jsonl"),
                             ws.path("offline.ckpt"), ws.path("offline.json")));
  ok = ok && run(fmt::format("train --data {} --index {} --mode rl --out {} {}", ws.path("raw.jsonl"),
                             ws.path("idx.bin"), ws.path("online.ckpt"), common));
  ok = ok && run(fmt::format("evaluate --data {} --index {} --ckpt {} --json {}", ws.path("raw.jsonl"),
                             ws.path("idx.bin"), ws.path("online.ckpt"), ws.path("online.json")));
  const std::string a = slurp(ws.path("offline.json")), b = slurp(ws.path("online.json"));
  const bool same = ok && !a.empty() && a == b;
  std::string report = a;
  if (!report.empty() && report.back() == '\n') report.pop_back();
  return {same, fmt::format("commands {}, metrics identical {} {}, {:.1f} s", ok ? "ok" : "failed",
                            same ? "yes" : "no", report, seconds_since(start))};
}

}  // namespace

int main(int argc, char** argv) {
  log::set_level(log::Level::kQuiet);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"BM25 oracle", bm25_oracle},
      {"metric oracle", metric_oracle},
      {"gradient suite", gradient_suite},
      {"REINFORCE bandit", bandit},
      {"synthetic trend", synth_trend},
      {"training loop contract", loop_contract},
      {"determinism", determinism},
      {"offline/online expansion", offline_online},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(number)) continue;
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failures += out.pass ? 0 : 1;
    std::printf("criterion %d %s: %s (%s)\n", number, criteria[i].first.c_str(),
                out.pass ? "PASS" : "FAIL", out.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
