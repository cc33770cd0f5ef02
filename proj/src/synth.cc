#include "prfrl/synth.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"
#include "prfrl/error.h"

namespace prfrl {
namespace {

std::string topic_word(std::size_t i) { return fmt::format("topic{:02}", i); }
std::string generic_word(std::size_t i) { return fmt::format("gen{:02}", i); }
std::string filler_word(std::size_t i) { return fmt::format("w{:03}", i); }

std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

template <typename T>
std::vector<T> pick(const std::vector<T>& pool, std::size_t n, std::mt19937_64& rng) {
  std::vector<T> out;
  std::sample(pool.begin(), pool.end(), std::back_inserter(out), n, rng);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const std::string& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::size_t helpful_count(const SynthConfig& c) {
  const auto noise = static_cast<std::size_t>(std::llround(c.noise_ratio * static_cast<double>(c.terms)));
  return c.terms - std::min(noise, c.terms);
}

}  // namespace

void SynthConfig::validate() const {
  if (contexts < 3) throw InvalidArgument("synth needs at least 3 contexts");
  if (candidates < 2) throw InvalidArgument("synth needs at least 2 candidates per context");
  if (noise_ratio < 0.0 || noise_ratio > 1.0) throw InvalidArgument("noise ratio must be in [0, 1]");
  if (noise_bias < 0.0 || noise_bias > 1.0) throw InvalidArgument("noise bias must be in [0, 1]");
  if (terms < 1) throw InvalidArgument("synth needs at least one term per response");
  const std::size_t per_context = std::max(topics_per_context, helpful_count(*this));
  if (topics < 2 * per_context) throw InvalidArgument("too few topic words for the term count");
  if (generic_words < std::max(terms + 6, 2 * terms)) throw InvalidArgument("too few generic words");
  if (filler_words < 8) throw InvalidArgument("too few filler words");
  if (train_fraction <= 0.0 || valid_fraction <= 0.0 || train_fraction + valid_fraction >= 1.0) {
    throw InvalidArgument("split fractions must leave room for a test split");
  }
}

bool is_noise_term(const std::string& term) { return term.rfind("gen", 0) == 0; }

SynthTask generate_synth(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const std::size_t n_help = helpful_count(config);
  const std::size_t n_noise = config.terms - n_help;
  const std::size_t per_context = std::max(config.topics_per_context, n_help);

  std::vector<std::string> topics, generics, fillers;
  for (std::size_t i = 0; i < config.topics; ++i) topics.push_back(topic_word(i));
  for (std::size_t i = 0; i < config.generic_words; ++i) generics.push_back(generic_word(i));
  for (std::size_t i = 0; i < config.filler_words; ++i) fillers.push_back(filler_word(i));

  std::vector<std::size_t> order(config.contexts);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::string> split_of(config.contexts);
  const auto n_train = static_cast<std::size_t>(std::llround(config.train_fraction * static_cast<double>(config.contexts)));
  const auto n_valid = static_cast<std::size_t>(std::llround(config.valid_fraction * static_cast<double>(config.contexts)));
  for (std::size_t i = 0; i < config.contexts; ++i) {
    split_of[order[i]] = i < n_train ? "train" : (i < n_train + n_valid ? "valid" : "test");
  }

  SynthTask task;
  std::int64_t next_doc = 1;
  for (std::size_t c = 0; c < config.contexts; ++c) {
    const std::vector<std::string> own_topics = pick(topics, per_context, rng);
    std::vector<std::string> other_topics;
    for (const std::string& t : topics) {
      if (std::find(own_topics.begin(), own_topics.end(), t) == own_topics.end()) {
        other_topics.push_back(t);
      }
    }

    std::vector<std::vector<std::string>> turns(uniform(rng, 2, 4));
    for (auto& turn : turns) {
      const std::size_t len = uniform(rng, 3, 6);
      for (std::size_t i = 0; i < len; ++i) {
        turn.push_back(generics[uniform(rng, 0, generics.size() - 1)]);
      }
    }
    for (const std::string& t : own_topics) {
      auto& turn = turns[uniform(rng, 0, turns.size() - 1)];
      turn.insert(turn.begin() + static_cast<std::ptrdiff_t>(uniform(rng, 0, turn.size())), t);
    }
    std::vector<std::string> context;
    for (const auto& turn : turns) context.push_back(join(turn));

    const std::size_t positive = uniform(rng, 0, config.candidates - 1);
    for (std::size_t k = 0; k < config.candidates; ++k) {
      SynthRecord rec;
      rec.context_id = fmt::format("c{:04}", c);
      rec.candidate_id = fmt::format("c{:04}-r{:02}", c, k);
      rec.context = context;
      rec.label = k == positive ? 1 : 0;
      rec.split = split_of[c];
      const std::string anchor = fmt::format("anchor{:04}x{:02}", c, k);
      std::vector<std::string> response = {anchor};
      const std::size_t len = uniform(rng, 4, 7);
      for (std::size_t i = 0; i < len; ++i) {
        response.push_back(fillers[uniform(rng, 0, fillers.size() - 1)]);
      }
      rec.response = join(response);

      std::vector<std::string> helpful =
          rec.label == 1 ? pick(own_topics, n_help, rng) : pick(other_topics, n_help, rng);
      // Noise words lean towards one half of the generic vocabulary per label,
      // but only on the training split.
      const std::size_t half = generics.size() / 2;
      std::bernoulli_distribution biased(rec.split == "train" ? config.noise_bias : 0.0);
      std::vector<std::string> noise;
      while (noise.size() < n_noise) {
        std::size_t lo = 0, hi = generics.size() - 1;
        if (biased(rng)) {
          lo = rec.label == 1 ? 0 : half;
          hi = rec.label == 1 ? half - 1 : generics.size() - 1;
        }
        const std::string& w = generics[uniform(rng, lo, hi)];
        if (std::find(noise.begin(), noise.end(), w) == noise.end()) noise.push_back(w);
      }

      // Distinct counts fix the extraction order; the anchor occurs once.
      std::vector<std::pair<std::string, bool>> terms;
      for (const auto& h : helpful) terms.emplace_back(h, true);
      for (const auto& n : noise) terms.emplace_back(n, false);
      std::shuffle(terms.begin(), terms.end(), rng);
      std::vector<std::string> post = {anchor};
      for (std::size_t i = 0; i < terms.size(); ++i) {
        const std::size_t count = 1 + terms.size() - i;
        for (std::size_t r = 0; r < count; ++r) post.push_back(terms[i].first);
        rec.prf_terms.push_back(terms[i].first);
        rec.helpful.push_back(terms[i].second);
      }
      std::shuffle(post.begin() + 1, post.end(), rng);
      task.corpus.push_back({next_doc++, join(post)});
      task.records.push_back(std::move(rec));
    }
  }

  // Background posts: topic and generic words only, so they never match a
  // response query but shape document statistics.
  for (std::size_t i = 0; i < config.contexts / 2; ++i) {
    std::vector<std::string> words;
    for (std::size_t j = 0; j < 8; ++j) {
      words.push_back(j % 2 == 0 ? topics[uniform(rng, 0, topics.size() - 1)]
                                 : generics[uniform(rng, 0, generics.size() - 1)]);
    }
    task.corpus.push_back({next_doc++, join(words)});
  }
  return task;
}

void write_synth_dataset(const SynthTask& task, std::ostream& out) {
  for (const SynthRecord& r : task.records) {
    nlohmann::ordered_json j;
    j["context_id"] = r.context_id;
    j["candidate_id"] = r.candidate_id;
    j["context"] = r.context;
    j["response"] = r.response;
    j["label"] = r.label;
    j["split"] = r.split;
    j["prf_terms"] = r.prf_terms;
    out << j.dump() << '\n';
  }
}

void write_synth_corpus(const SynthTask& task, std::ostream& out) {
  for (const SynthPost& p : task.corpus) {
    nlohmann::ordered_json j;
    j["doc_id"] = p.doc_id;
    j["text"] = p.text;
    out << j.dump() << '\n';
  }
}

}  // namespace prfrl
