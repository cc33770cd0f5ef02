#include "prfrl/config.h"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "prfrl/error.h"

namespace prfrl {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw InvalidArgument(fmt::format("{}: expected a non-negative integer, got '{}'", key, v));
  }
  return out;
}

long parse_long(std::string_view key, std::string_view v) {
  long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw InvalidArgument(fmt::format("{}: expected an integer, got '{}'", key, v));
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) {
    throw InvalidArgument(fmt::format("{}: expected a number, got '{}'", key, v));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidArgument(fmt::format("{}: expected true or false, got '{}'", key, v));
}

std::string show(double v) { return fmt::format("{}", v); }
std::string show(bool v) { return v ? "true" : "false"; }
template <typename T>
std::string show_int(T v) {
  return fmt::format("{}", v);
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define PRFRL_SIZE(name, member)                                                     \
  Field {                                                                            \
    name, [](RunConfig& c, std::string_view k, std::string_view v) {                 \
      c.member = static_cast<std::size_t>(parse_uint(k, v));                         \
    },                                                                               \
        [](const RunConfig& c) { return show_int(c.member); }                        \
  }
#define PRFRL_DOUBLE(name, member)                                                   \
  Field {                                                                            \
    name, [](RunConfig& c, std::string_view k, std::string_view v) {                 \
      c.member = parse_double(k, v);                                                 \
    },                                                                               \
        [](const RunConfig& c) { return show(c.member); }                            \
  }
#define PRFRL_BOOL(name, member)                                                     \
  Field {                                                                            \
    name, [](RunConfig& c, std::string_view k, std::string_view v) {                 \
      c.member = parse_bool(k, v);                                                   \
    },                                                                               \
        [](const RunConfig& c) { return show(c.member); }                            \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      Field{"seed",
            [](RunConfig& c, std::string_view k, std::string_view v) {
              c.seed = parse_uint(k, v);
              c.train.seed = c.seed;
            },
            [](const RunConfig& c) { return show_int(c.seed); }},
      PRFRL_BOOL("tokenizer.lowercase", tokenizer.lowercase),
      PRFRL_BOOL("tokenizer.strip_punctuation", tokenizer.strip_punctuation),
      Field{"tokenizer.mode",
            [](RunConfig& c, std::string_view k, std::string_view v) {
              if (v == "word") {
                c.tokenizer.mode = TokenizerMode::kWord;
              } else if (v == "character") {
                c.tokenizer.mode = TokenizerMode::kCharacter;
              } else {
                throw InvalidArgument(fmt::format("{}: expected word or character", k));
              }
            },
            [](const RunConfig& c) {
              return std::string(c.tokenizer.mode == TokenizerMode::kWord ? "word" : "character");
            }},
      Field{"tokenizer.stopwords",
            [](RunConfig& c, std::string_view, std::string_view v) {
              if (v.empty()) {
                c.tokenizer.stopword_path.reset();
              } else {
                c.tokenizer.stopword_path = std::filesystem::path(std::string(v));
              }
            },
            [](const RunConfig& c) {
              return c.tokenizer.stopword_path ? c.tokenizer.stopword_path->string() : std::string();
            }},
      Field{"retrieval.stopwords",
            [](RunConfig& c, std::string_view, std::string_view v) {
              c.retrieval_stopwords = std::string(v);
            },
            [](const RunConfig& c) { return c.retrieval_stopwords; }},
      PRFRL_DOUBLE("bm25.k1", bm25.k1),
      PRFRL_DOUBLE("bm25.b", bm25.b),
      PRFRL_SIZE("prf.k1", prf.k1),
      PRFRL_SIZE("prf.k2", prf.k2),
      Field{"prf.mode",
            [](RunConfig& c, std::string_view k, std::string_view v) {
              if (v == "frequency") {
                c.prf.mode = ExtractionMode::kFrequency;
              } else if (v == "idf") {
                c.prf.mode = ExtractionMode::kIdf;
              } else {
                throw InvalidArgument(fmt::format("{}: expected frequency or idf", k));
              }
            },
            [](const RunConfig& c) {
              return std::string(c.prf.mode == ExtractionMode::kFrequency ? "frequency" : "idf");
            }},
      PRFRL_SIZE("prf.query_max_tokens", prf.query_max_tokens),
      PRFRL_SIZE("encoder.layers", encoder.layers),
      PRFRL_SIZE("encoder.heads", encoder.heads),
      PRFRL_SIZE("encoder.d", encoder.d),
      PRFRL_SIZE("encoder.ff_dim", encoder.ff_dim),
      PRFRL_SIZE("encoder.max_len", encoder.max_len),
      PRFRL_DOUBLE("encoder.dropout", encoder.dropout),
      PRFRL_SIZE("input.context_budget", limits.context_budget),
      PRFRL_SIZE("input.response_budget", limits.response_budget),
      PRFRL_SIZE("input.max_len", limits.max_len),
      PRFRL_SIZE("vocab.min_freq", vocab_min_freq),
      PRFRL_SIZE("vocab.max_size", vocab_max_size),
      PRFRL_SIZE("train.episodes", train.episodes),
      PRFRL_DOUBLE("train.gamma", train.gamma),
      PRFRL_DOUBLE("train.reward_sample_rate", train.reward_sample_rate),
      PRFRL_DOUBLE("train.policy_lr", train.policy_lr),
      PRFRL_DOUBLE("train.ranker_lr", train.ranker_lr),
      PRFRL_SIZE("train.pretrain_steps", train.pretrain_steps),
      PRFRL_SIZE("train.batch_size", train.batch_size),
      PRFRL_BOOL("train.linear_decay", train.ranker_linear_decay),
      Field{"train.policy_optimizer",
            [](RunConfig& c, std::string_view k, std::string_view v) {
              if (v == "adam") {
                c.train.policy_optimizer = OptimizerAlgorithm::kAdam;
              } else if (v == "sgd") {
                c.train.policy_optimizer = OptimizerAlgorithm::kSgd;
              } else {
                throw InvalidArgument(fmt::format("{}: expected adam or sgd", k));
              }
            },
            [](const RunConfig& c) {
              return std::string(c.train.policy_optimizer == OptimizerAlgorithm::kAdam ? "adam"
                                                                                       : "sgd");
            }},
      PRFRL_BOOL("train.future_reward", train.future_reward),
      PRFRL_BOOL("train.reward_baseline", train.reward_baseline),
      PRFRL_BOOL("train.sampled_reward_selection", train.sampled_reward_selection),
      Field{"selector.mode",
            [](RunConfig& c, std::string_view, std::string_view v) {
              c.selector.mode = parse_selection_mode(v);
            },
            [](const RunConfig& c) { return std::string(selection_mode_name(c.selector.mode)); }},
      PRFRL_DOUBLE("selector.temperature", selector.temperature),
      Field{"selector.rule_top_m",
            [](RunConfig& c, std::string_view k, std::string_view v) {
              c.selector.rule_top_m = parse_long(k, v);
            },
            [](const RunConfig& c) { return show_int(c.selector.rule_top_m); }},
      PRFRL_BOOL("selector.elementwise_gate", selector.elementwise_gate),
  };
  return all;
}

#undef PRFRL_SIZE
#undef PRFRL_DOUBLE
#undef PRFRL_BOOL

const Field& find_field(std::string_view key) {
  for (const Field& f : fields()) {
    if (f.key == key) return f;
  }
  throw InvalidArgument(fmt::format("unknown config key '{}'", key));
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  find_field(key).set(*this, key, trim(value));
}

std::string RunConfig::get(std::string_view key) const { return find_field(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> all = [] {
    std::vector<std::string> k;
    for (const Field& f : fields()) k.push_back(f.key);
    return k;
  }();
  return all;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const Field& f : fields()) out += fmt::format("{} = {}\n", f.key, f.get(*this));
  return out;
}

RunConfig RunConfig::parse(std::string_view text, std::string_view source) {
  RunConfig config;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = trim(text.substr(pos, end - pos));
    ++line_no;
    pos = end + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidArgument(fmt::format("{}:{}: expected 'key = value'", source, line_no));
    }
    try {
      config.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(fmt::format("{}:{}: {}", source, line_no, e.what()));
    }
  }
  return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

void RunConfig::validate() const {
  encoder.validate();
  limits.validate();
  train.validate();
  selector.validate();
  if (limits.max_len > encoder.max_len) {
    throw InvalidArgument("input.max_len exceeds encoder.max_len");
  }
  if (prf.k1 < 1 || prf.k2 < 1) throw InvalidArgument("prf.k1 and prf.k2 must be positive");
  if (vocab_min_freq < 1) throw InvalidArgument("vocab.min_freq must be at least 1");
}

ModelConfig RunConfig::model_config(std::size_t vocab_size) const {
  ModelConfig m;
  m.encoder = encoder;
  m.limits = limits;
  m.selector = selector;
  m.vocab_size = vocab_size;
  return m;
}

std::pair<std::string, std::string> split_assignment(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) {
    throw InvalidArgument(fmt::format("expected key=value, got '{}'", text));
  }
  return {std::string(trim(text.substr(0, eq))), std::string(trim(text.substr(eq + 1)))};
}

}  // namespace prfrl
