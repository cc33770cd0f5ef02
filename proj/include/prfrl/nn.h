#pragma once

// Trainable numerical primitives: embedding lookup, pooling, attention
// pooling, and a small post-LayerNorm transformer encoder with hand-written
// backward passes. Everything runs in double precision.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "prfrl/tensor.h"
#include "prfrl/text.h"

namespace prfrl::nn {

inline constexpr const char* kTokenEmbedding = "embed.token";

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t d = 64;
  std::size_t ff_dim = 128;
  std::size_t max_len = 256;
  double dropout = 0.1;

  void validate() const;
};

// Adds the token embedding table and all encoder tensors to `params`.
void init_embedding(ParameterStore& params, std::size_t vocab_size,
                    std::size_t d, std::mt19937_64& rng);
void init_encoder(ParameterStore& params, const EncoderConfig& config,
                  std::mt19937_64& rng);

// ---- small building blocks -------------------------------------------------

std::vector<Vector> embed(std::span<const TokenId> ids, const Matrix& table);

// Coordinate-wise maximum. `argmax`, when given, receives the winning row
// per coordinate (first one on ties).
Vector max_pool(std::span<const Vector> vectors,
                std::vector<std::size_t>* argmax = nullptr);

// Numerically stable softmax.
Vector softmax(std::span<const double> logits);

struct AttentionPool {
  Vector output;
  Vector weights;  // softmax over keys
};

// output = sum_j softmax_j(query . key_j) key_j
AttentionPool attention_pool(std::span<const double> query,
                             std::span<const Vector> keys);

// Given d(output), accumulates d(query) and d(key_j).
void attention_pool_backward(std::span<const double> query,
                             std::span<const Vector> keys,
                             const AttentionPool& forward,
                             std::span<const double> d_output,
                             std::span<double> d_query,
                             std::vector<Vector>& d_keys);

double sigmoid(double x);

// ---- encoder ---------------------------------------------------------------

struct EncoderInput {
  std::span<const TokenId> ids;
  std::span<const int> segments;
  // Optional per-position multiplier of the token embedding: empty, or a
  // (length x 1) / (length x d) matrix. Position and segment embeddings are
  // never scaled.
  const Matrix* token_gates = nullptr;
};

// Dropout source; a null rng disables dropout.
struct DropoutContext {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;

  bool active() const { return rng != nullptr && rate > 0.0; }
};

struct LayerTape {
  std::size_t q_rows = 0;
  Matrix input;      // rows x d
  Matrix q, k, v;    // q: q_rows x d, k/v: rows x d
  std::vector<Matrix> probs;  // per head, q_rows x rows
  Matrix context;    // q_rows x d
  Matrix drop1;      // dropout scale per element, empty when inactive
  Matrix xhat1;
  Vector inv_std1;
  Matrix out1;       // q_rows x d
  Matrix hidden_pre; // q_rows x ff
  Matrix hidden;     // gelu(hidden_pre)
  Matrix drop2;
  Matrix xhat2;
  Vector inv_std2;
};

struct EncoderTape {
  Matrix xhat0;
  Vector inv_std0;
  Matrix drop0;
  std::vector<LayerTape> layers;
};

// Returns the contextual vector at position 0 ([CLS]). Throws when the input
// exceeds max_len. Only the first position is propagated through the last
// layer's query/feed-forward path.
Vector encoder_forward(const ParameterStore& params, const EncoderConfig& config,
                       const EncoderInput& input, DropoutContext dropout,
                       EncoderTape* tape);

// Backpropagates d(T_[CLS]) into `grads`. When the input carries token gates,
// `d_gates` receives their gradient with the same shape.
void encoder_backward(const ParameterStore& params, const EncoderConfig& config,
                      const EncoderInput& input, const EncoderTape& tape,
                      std::span<const double> d_cls, GradStore& grads,
                      Matrix* d_gates);

// Names of all encoder tensors (excluding the shared token embedding).
std::vector<std::string> encoder_parameter_names(const EncoderConfig& config);

}  // namespace prfrl::nn
