#include "prfrl/nn.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "prfrl/error.h"
#include "prfrl/kernels.h"

namespace prfrl::nn {
namespace {

constexpr double kLayerNormEps = 1e-6;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

std::string layer_name(std::size_t layer, const char* tensor) {
  return "enc.l" + std::to_string(layer) + "." + tensor;
}

void init_normal(Matrix& m, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : m.values()) v = dist(rng);
}

void init_linear(ParameterStore& params, const std::string& w_name,
                 const std::string& b_name, std::size_t in, std::size_t out,
                 std::mt19937_64& rng) {
  init_normal(params.add(w_name, in, out),
              std::sqrt(2.0 / static_cast<double>(in + out)), rng);
  params.add(b_name, 1, out);
}

void init_layer_norm(ParameterStore& params, const std::string& prefix,
                     std::size_t d) {
  params.add(prefix + ".gamma", 1, d).fill(1.0);
  params.add(prefix + ".beta", 1, d);
}

// Y[rows x out] = X[rows x in] W[in x out] + b
void linear(const double* x, std::size_t rows, std::size_t in, const Matrix& w,
            const Matrix& b, Matrix& y) {
  const std::size_t out = w.cols();
  y.resize(rows, out);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(b.data(), b.data() + out, y.data() + r * out);
  }
  kernels::gemm_nn(rows, out, in, x, in, w.data(), out, y.data(), out);
}

// Accumulates dW += X^T dY, db += colsum(dY) and, if dx is non-null,
// dX += dY W^T.
void linear_backward(const double* x, std::size_t rows, std::size_t in,
                     const Matrix& w, const Matrix& dy, Matrix& dw, Matrix& db,
                     double* dx) {
  const std::size_t out = w.cols();
  kernels::gemm_tn(in, out, rows, x, in, dy.data(), out, dw.data(), out);
  for (std::size_t r = 0; r < rows; ++r) {
    kernels::axpy(out, 1.0, dy.data() + r * out, db.data());
  }
  if (dx != nullptr) {
    kernels::gemm_nt(rows, in, out, dy.data(), out, w.data(), out, dx, in);
  }
}

void layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta,
                Matrix& xhat, Vector& inv_std, Matrix& y) {
  const std::size_t rows = x.rows();
  const std::size_t d = x.cols();
  xhat.resize(rows, d);
  y.resize(rows, d);
  inv_std.assign(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = x.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std[r] = is;
    auto xh = xhat.row(r);
    auto out = y.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      xh[c] = (in[c] - mean) * is;
      out[c] = gamma.data()[c] * xh[c] + beta.data()[c];
    }
  }
}

// dx = inv_std / d * (d * g - sum(g) - xhat * sum(g * xhat)), g = dy * gamma
void layer_norm_backward(const Matrix& dy, const Matrix& gamma,
                         const Matrix& xhat, const Vector& inv_std,
                         Matrix& dgamma, Matrix& dbeta, Matrix& dx) {
  const std::size_t rows = dy.rows();
  const std::size_t d = dy.cols();
  dx.resize(rows, d);
  Vector g(d);
  for (std::size_t r = 0; r < rows; ++r) {
    auto dyr = dy.row(r);
    auto xh = xhat.row(r);
    double sum_g = 0.0;
    double sum_gx = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      dgamma.data()[c] += dyr[c] * xh[c];
      dbeta.data()[c] += dyr[c];
      g[c] = dyr[c] * gamma.data()[c];
      sum_g += g[c];
      sum_gx += g[c] * xh[c];
    }
    const double dd = static_cast<double>(d);
    auto out = dx.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      out[c] = inv_std[r] / dd * (dd * g[c] - sum_g - xh[c] * sum_gx);
    }
  }
}

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) +
         0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

void dropout_mask(Matrix& mask, std::size_t rows, std::size_t cols,
                  const DropoutContext& dropout) {
  if (!dropout.active()) {
    mask = Matrix();
    return;
  }
  mask.resize(rows, cols);
  std::bernoulli_distribution keep(1.0 - dropout.rate);
  const double scale = 1.0 / (1.0 - dropout.rate);
  for (double& v : mask.values()) v = keep(*dropout.rng) ? scale : 0.0;
}

void apply_mask(Matrix& x, const Matrix& mask) {
  if (mask.empty()) return;
  auto xv = x.values();
  auto mv = mask.values();
  for (std::size_t i = 0; i < xv.size(); ++i) xv[i] *= mv[i];
}

void row_softmax(double* row, std::size_t n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, row[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    row[i] = std::exp(row[i] - mx);
    sum += row[i];
  }
  for (std::size_t i = 0; i < n; ++i) row[i] /= sum;
}

// One post-LN transformer layer. Keys/values use all `rows` input positions;
// queries and everything downstream use the first `tape.q_rows` positions.
Matrix layer_forward(const ParameterStore& params, const EncoderConfig& config,
                     std::size_t layer, const DropoutContext& dropout,
                     LayerTape& tape) {
  const std::size_t rows = tape.input.rows();
  const std::size_t q_rows = tape.q_rows;
  const std::size_t d = config.d;
  const std::size_t heads = config.heads;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  auto p = [&](const char* name) -> const Matrix& {
    return params.get(layer_name(layer, name));
  };

  linear(tape.input.data(), q_rows, d, p("wq"), p("bq"), tape.q);
  linear(tape.input.data(), rows, d, p("wk"), p("bk"), tape.k);
  linear(tape.input.data(), rows, d, p("wv"), p("bv"), tape.v);

  tape.probs.assign(heads, Matrix());
  tape.context.resize(q_rows, d);
  for (std::size_t h = 0; h < heads; ++h) {
    Matrix& probs = tape.probs[h];
    probs.resize(q_rows, rows);
    kernels::gemm_nt(q_rows, rows, dh, tape.q.data() + h * dh, d,
                     tape.k.data() + h * dh, d, probs.data(), rows);
    for (std::size_t r = 0; r < q_rows; ++r) {
      double* row = probs.data() + r * rows;
      for (std::size_t c = 0; c < rows; ++c) row[c] *= scale;
      row_softmax(row, rows);
    }
    kernels::gemm_nn(q_rows, dh, rows, probs.data(), rows,
                     tape.v.data() + h * dh, d, tape.context.data() + h * dh, d);
  }

  Matrix attn;
  linear(tape.context.data(), q_rows, d, p("wo"), p("bo"), attn);
  dropout_mask(tape.drop1, q_rows, d, dropout);
  apply_mask(attn, tape.drop1);
  for (std::size_t r = 0; r < q_rows; ++r) {
    kernels::axpy(d, 1.0, tape.input.data() + r * d, attn.data() + r * d);
  }
  layer_norm(attn, p("ln1.gamma"), p("ln1.beta"), tape.xhat1, tape.inv_std1,
             tape.out1);

  linear(tape.out1.data(), q_rows, d, p("w1"), p("b1"), tape.hidden_pre);
  tape.hidden.resize(q_rows, config.ff_dim);
  {
    auto pre = tape.hidden_pre.values();
    auto act = tape.hidden.values();
    for (std::size_t i = 0; i < pre.size(); ++i) act[i] = gelu(pre[i]);
  }
  Matrix ff;
  linear(tape.hidden.data(), q_rows, config.ff_dim, p("w2"), p("b2"), ff);
  dropout_mask(tape.drop2, q_rows, d, dropout);
  apply_mask(ff, tape.drop2);
  kernels::axpy(q_rows * d, 1.0, tape.out1.data(), ff.data());
  Matrix out;
  layer_norm(ff, p("ln2.gamma"), p("ln2.beta"), tape.xhat2, tape.inv_std2, out);
  return out;
}

// Returns d(input) (rows x d) given d(output) (q_rows x d).
Matrix layer_backward(const ParameterStore& params, const EncoderConfig& config,
                      std::size_t layer, const LayerTape& tape,
                      const Matrix& d_out, GradStore& grads) {
  const std::size_t rows = tape.input.rows();
  const std::size_t q_rows = tape.q_rows;
  const std::size_t d = config.d;
  const std::size_t ff_dim = config.ff_dim;
  const std::size_t heads = config.heads;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  auto p = [&](const char* name) -> const Matrix& {
    return params.get(layer_name(layer, name));
  };
  auto g = [&](const char* name) -> Matrix& {
    const Matrix& ref = params.get(layer_name(layer, name));
    return grads.at(layer_name(layer, name), ref.rows(), ref.cols());
  };

  // Second sublayer.
  Matrix d_res2;
  layer_norm_backward(d_out, p("ln2.gamma"), tape.xhat2, tape.inv_std2,
                      g("ln2.gamma"), g("ln2.beta"), d_res2);
  Matrix d_x1 = d_res2;
  Matrix d_ff = d_res2;
  apply_mask(d_ff, tape.drop2);
  Matrix d_hidden(q_rows, ff_dim);
  linear_backward(tape.hidden.data(), q_rows, ff_dim, p("w2"), d_ff, g("w2"),
                  g("b2"), d_hidden.data());
  {
    auto dh_v = d_hidden.values();
    auto pre = tape.hidden_pre.values();
    for (std::size_t i = 0; i < dh_v.size(); ++i) dh_v[i] *= gelu_grad(pre[i]);
  }
  linear_backward(tape.out1.data(), q_rows, d, p("w1"), d_hidden, g("w1"),
                  g("b1"), d_x1.data());

  // First sublayer.
  Matrix d_res1;
  layer_norm_backward(d_x1, p("ln1.gamma"), tape.xhat1, tape.inv_std1,
                      g("ln1.gamma"), g("ln1.beta"), d_res1);
  Matrix d_input(rows, d);
  kernels::axpy(q_rows * d, 1.0, d_res1.data(), d_input.data());
  Matrix d_attn = d_res1;
  apply_mask(d_attn, tape.drop1);
  Matrix d_context(q_rows, d);
  linear_backward(tape.context.data(), q_rows, d, p("wo"), d_attn, g("wo"),
                  g("bo"), d_context.data());

  Matrix d_q(q_rows, d), d_k(rows, d), d_v(rows, d);
  Matrix d_probs(q_rows, rows);
  for (std::size_t h = 0; h < heads; ++h) {
    const Matrix& probs = tape.probs[h];
    d_probs.fill(0.0);
    kernels::gemm_nt(q_rows, rows, dh, d_context.data() + h * dh, d,
                     tape.v.data() + h * dh, d, d_probs.data(), rows);
    kernels::gemm_tn(rows, dh, q_rows, probs.data(), rows,
                     d_context.data() + h * dh, d, d_v.data() + h * dh, d);
    for (std::size_t r = 0; r < q_rows; ++r) {
      double* dp = d_probs.data() + r * rows;
      const double* pr = probs.data() + r * rows;
      const double dot = kernels::dot(rows, dp, pr);
      for (std::size_t c = 0; c < rows; ++c) dp[c] = pr[c] * (dp[c] - dot) * scale;
    }
    kernels::gemm_nn(q_rows, dh, rows, d_probs.data(), rows,
                     tape.k.data() + h * dh, d, d_q.data() + h * dh, d);
    kernels::gemm_tn(rows, dh, q_rows, d_probs.data(), rows,
                     tape.q.data() + h * dh, d, d_k.data() + h * dh, d);
  }
  linear_backward(tape.input.data(), q_rows, d, p("wq"), d_q, g("wq"), g("bq"),
                  d_input.data());
  linear_backward(tape.input.data(), rows, d, p("wk"), d_k, g("wk"), g("bk"),
                  d_input.data());
  linear_backward(tape.input.data(), rows, d, p("wv"), d_v, g("wv"), g("bv"),
                  d_input.data());
  return d_input;
}

}  // namespace

void EncoderConfig::validate() const {
  if (layers < 1) throw InvalidArgument("encoder needs at least one layer");
  if (heads < 1 || d % heads != 0) {
    throw InvalidArgument("encoder dimension must be divisible by heads");
  }
  if (ff_dim < 1 || max_len < 1) throw InvalidArgument("invalid encoder shape");
  if (dropout < 0.0 || dropout >= 1.0) throw InvalidArgument("dropout must be in [0, 1)");
}

void init_embedding(ParameterStore& params, std::size_t vocab_size,
                    std::size_t d, std::mt19937_64& rng) {
  Matrix& table = params.add(kTokenEmbedding, vocab_size, d);
  init_normal(table, 0.1, rng);
  for (double& v : table.row(static_cast<std::size_t>(Vocabulary::kPad))) v = 0.0;
}

void init_encoder(ParameterStore& params, const EncoderConfig& config,
                  std::mt19937_64& rng) {
  config.validate();
  const std::size_t d = config.d;
  init_normal(params.add("enc.pos", config.max_len, d), 0.1, rng);
  init_normal(params.add("enc.seg", 2, d), 0.1, rng);
  init_layer_norm(params, "enc.emb_ln", d);
  for (std::size_t l = 0; l < config.layers; ++l) {
    for (const char* name : {"q", "k", "v", "o"}) {
      init_linear(params, layer_name(l, (std::string("w") + name).c_str()),
                  layer_name(l, (std::string("b") + name).c_str()), d, d, rng);
    }
    init_layer_norm(params, layer_name(l, "ln1"), d);
    init_linear(params, layer_name(l, "w1"), layer_name(l, "b1"), d,
                config.ff_dim, rng);
    init_linear(params, layer_name(l, "w2"), layer_name(l, "b2"),
                config.ff_dim, d, rng);
    init_layer_norm(params, layer_name(l, "ln2"), d);
  }
}

std::vector<std::string> encoder_parameter_names(const EncoderConfig& config) {
  std::vector<std::string> names = {"enc.pos", "enc.seg", "enc.emb_ln.gamma",
                                    "enc.emb_ln.beta"};
  for (std::size_t l = 0; l < config.layers; ++l) {
    for (const char* t : {"wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo",
                          "ln1.gamma", "ln1.beta", "w1", "b1", "w2", "b2",
                          "ln2.gamma", "ln2.beta"}) {
      names.push_back(layer_name(l, t));
    }
  }
  return names;
}

std::vector<Vector> embed(std::span<const TokenId> ids, const Matrix& table) {
  std::vector<Vector> out;
  out.reserve(ids.size());
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= table.rows()) {
      throw InvalidArgument("token id out of range: " + std::to_string(id));
    }
    auto row = table.row(static_cast<std::size_t>(id));
    out.emplace_back(row.begin(), row.end());
  }
  return out;
}

Vector max_pool(std::span<const Vector> vectors,
                std::vector<std::size_t>* argmax) {
  if (vectors.empty()) throw InvalidArgument("max_pool of an empty list");
  Vector out = vectors.front();
  if (argmax != nullptr) argmax->assign(out.size(), 0);
  for (std::size_t i = 1; i < vectors.size(); ++i) {
    if (vectors[i].size() != out.size()) {
      throw InvalidArgument("max_pool dimension mismatch");
    }
    for (std::size_t c = 0; c < out.size(); ++c) {
      if (vectors[i][c] > out[c]) {
        out[c] = vectors[i][c];
        if (argmax != nullptr) (*argmax)[c] = i;
      }
    }
  }
  return out;
}

Vector softmax(std::span<const double> logits) {
  Vector out(logits.begin(), logits.end());
  if (!out.empty()) row_softmax(out.data(), out.size());
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

AttentionPool attention_pool(std::span<const double> query,
                             std::span<const Vector> keys) {
  if (keys.empty()) throw InvalidArgument("attention_pool needs at least one key");
  AttentionPool out;
  out.weights.resize(keys.size());
  for (std::size_t j = 0; j < keys.size(); ++j) {
    if (keys[j].size() != query.size()) {
      throw InvalidArgument("attention_pool dimension mismatch");
    }
    out.weights[j] = kernels::dot(query.size(), query.data(), keys[j].data());
  }
  row_softmax(out.weights.data(), out.weights.size());
  out.output.assign(query.size(), 0.0);
  for (std::size_t j = 0; j < keys.size(); ++j) {
    kernels::axpy(query.size(), out.weights[j], keys[j].data(), out.output.data());
  }
  return out;
}

void attention_pool_backward(std::span<const double> query,
                             std::span<const Vector> keys,
                             const AttentionPool& forward,
                             std::span<const double> d_output,
                             std::span<double> d_query,
                             std::vector<Vector>& d_keys) {
  const std::size_t n = keys.size();
  const std::size_t d = query.size();
  d_keys.resize(n, Vector(d, 0.0));
  // d weight_j = d_out . key_j ; d logit_j = w_j (d weight_j - sum_k w_k d weight_k)
  Vector d_weight(n);
  double mean = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    d_weight[j] = kernels::dot(d, d_output.data(), keys[j].data());
    mean += forward.weights[j] * d_weight[j];
  }
  for (std::size_t j = 0; j < n; ++j) {
    const double w = forward.weights[j];
    const double d_logit = w * (d_weight[j] - mean);
    if (d_keys[j].size() != d) d_keys[j].assign(d, 0.0);
    // output term and logit term (logit_j = query . key_j)
    kernels::axpy(d, w, d_output.data(), d_keys[j].data());
    kernels::axpy(d, d_logit, query.data(), d_keys[j].data());
    kernels::axpy(d, d_logit, keys[j].data(), d_query.data());
  }
}

Vector encoder_forward(const ParameterStore& params, const EncoderConfig& config,
                       const EncoderInput& input, DropoutContext dropout,
                       EncoderTape* tape) {
  const std::size_t rows = input.ids.size();
  const std::size_t d = config.d;
  if (rows == 0) throw InvalidArgument("encoder input is empty");
  if (rows > config.max_len) {
    throw InvalidArgument("input length " + std::to_string(rows) +
                          " exceeds encoder max_len " +
                          std::to_string(config.max_len));
  }
  if (input.segments.size() != rows) {
    throw InvalidArgument("segment tags must match the input length");
  }
  const Matrix* gates = input.token_gates;
  if (gates != nullptr && !gates->empty() &&
      (gates->rows() != rows || (gates->cols() != 1 && gates->cols() != d))) {
    throw InvalidArgument("token gate shape mismatch");
  }
  if (gates != nullptr && gates->empty()) gates = nullptr;

  const Matrix& table = params.get(kTokenEmbedding);
  const Matrix& pos = params.get("enc.pos");
  const Matrix& seg = params.get("enc.seg");

  Matrix summed(rows, d);
  for (std::size_t t = 0; t < rows; ++t) {
    const TokenId id = input.ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= table.rows()) {
      throw InvalidArgument("token id out of range: " + std::to_string(id));
    }
    const int s = input.segments[t];
    if (s < 0 || s > 1) throw InvalidArgument("segment tag must be 0 or 1");
    auto out = summed.row(t);
    auto e = table.row(static_cast<std::size_t>(id));
    auto pe = pos.row(t);
    auto se = seg.row(static_cast<std::size_t>(s));
    for (std::size_t c = 0; c < d; ++c) {
      double scale = 1.0;
      if (gates != nullptr) {
        scale = gates->cols() == 1 ? (*gates)(t, 0) : (*gates)(t, c);
      }
      out[c] = scale * e[c] + pe[c] + se[c];
    }
  }

  EncoderTape local;
  EncoderTape& tp = tape != nullptr ? *tape : local;
  tp.layers.assign(config.layers, LayerTape());
  Matrix x;
  layer_norm(summed, params.get("enc.emb_ln.gamma"), params.get("enc.emb_ln.beta"),
             tp.xhat0, tp.inv_std0, x);
  dropout_mask(tp.drop0, rows, d, dropout);
  apply_mask(x, tp.drop0);

  for (std::size_t l = 0; l < config.layers; ++l) {
    LayerTape& lt = tp.layers[l];
    lt.input = std::move(x);
    lt.q_rows = (l + 1 == config.layers) ? 1 : rows;
    x = layer_forward(params, config, l, dropout, lt);
  }
  auto cls = x.row(0);
  return Vector(cls.begin(), cls.end());
}

void encoder_backward(const ParameterStore& params, const EncoderConfig& config,
                      const EncoderInput& input, const EncoderTape& tape,
                      std::span<const double> d_cls, GradStore& grads,
                      Matrix* d_gates) {
  const std::size_t rows = input.ids.size();
  const std::size_t d = config.d;
  Matrix d_x(1, d);
  std::copy(d_cls.begin(), d_cls.end(), d_x.data());
  for (std::size_t l = config.layers; l-- > 0;) {
    d_x = layer_backward(params, config, l, tape.layers[l], d_x, grads);
  }
  apply_mask(d_x, tape.drop0);

  const Matrix& gamma0 = params.get("enc.emb_ln.gamma");
  Matrix d_summed;
  layer_norm_backward(d_x, gamma0, tape.xhat0, tape.inv_std0,
                      grads.at("enc.emb_ln.gamma", 1, d),
                      grads.at("enc.emb_ln.beta", 1, d), d_summed);

  const Matrix& table = params.get(kTokenEmbedding);
  const Matrix& pos = params.get("enc.pos");
  Matrix& g_table = grads.at(kTokenEmbedding, table.rows(), table.cols());
  Matrix& g_pos = grads.at("enc.pos", pos.rows(), pos.cols());
  Matrix& g_seg = grads.at("enc.seg", 2, d);
  const Matrix* gates = input.token_gates;
  if (gates != nullptr && gates->empty()) gates = nullptr;
  if (d_gates != nullptr) {
    if (gates != nullptr) {
      d_gates->resize(gates->rows(), gates->cols());
    } else {
      *d_gates = Matrix();
    }
  }
  for (std::size_t t = 0; t < rows; ++t) {
    auto ds = d_summed.row(t);
    const auto id = static_cast<std::size_t>(input.ids[t]);
    kernels::axpy(d, 1.0, ds.data(), g_pos.row(t).data());
    kernels::axpy(d, 1.0, ds.data(),
                  g_seg.row(static_cast<std::size_t>(input.segments[t])).data());
    if (gates == nullptr) {
      if (id != static_cast<std::size_t>(Vocabulary::kPad)) {
        kernels::axpy(d, 1.0, ds.data(), g_table.row(id).data());
      }
      continue;
    }
    auto e = table.row(id);
    auto ge = g_table.row(id);
    for (std::size_t c = 0; c < d; ++c) {
      const bool scalar = gates->cols() == 1;
      const double scale = scalar ? (*gates)(t, 0) : (*gates)(t, c);
      if (id != static_cast<std::size_t>(Vocabulary::kPad)) ge[c] += scale * ds[c];
      if (d_gates != nullptr) {
        if (scalar) {
          (*d_gates)(t, 0) += ds[c] * e[c];
        } else {
          (*d_gates)(t, c) += ds[c] * e[c];
        }
      }
    }
  }
}

}  // namespace prfrl::nn
