#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rpo/vocab.hpp"

namespace rpo {

struct ArchConfig {
    int context_window = 0; // W: tokens visible to one prediction
    int embedding_dim = 0;  // E
    int hidden_dim = 0;     // H
};

// Flat gradient aligned with Policy::params.
struct GradientRecord {
    std::vector<double> d_params;
};

// Fixed-window autoregressive token model: the last W context tokens (left
// padded with [PAD]) are embedded, concatenated, sent through one tanh layer
// and projected to vocabulary logits, then log-softmax'd. The same struct
// plays every policy role in the lab: trainable, frozen reference, fine-tuned.
//
// Parameter layout (row-major, doubles):
//   embeddings  V x E
//   w1          H x (W*E)
//   b1          H
//   w2          V x H
//   b2          V
struct Policy {
    ArchConfig arch;
    Vocab vocab;
    std::vector<double> params;

    int vocab_size() const { return vocab.size(); }

    size_t off_embed() const { return 0; }
    size_t off_w1() const;
    size_t off_b1() const;
    size_t off_w2() const;
    size_t off_b2() const;
};

size_t param_count(const ArchConfig& arch, int vocab_size);

// Uniform init in [-0.08, 0.08] from a splitmix64 stream; same seed gives
// bit-identical parameters.
Policy init_policy(const ArchConfig& arch, const Vocab& vocab, uint64_t seed);

// Next-token log-distribution given the context. exp-sum is 1 within 1e-12.
std::vector<double> token_logprobs(const Policy& policy,
                                   std::span<const TokenId> context);

struct SequenceScore {
    double total = 0.0;
    std::vector<double> per_token;
};

// log pi(continuation | context), factored per token. Continuation must be
// non-empty; total is the sum of per_token and is always <= 0.
SequenceScore sequence_logprob(const Policy& policy,
                               std::span<const TokenId> context,
                               std::span<const TokenId> continuation);

// Greedy decoding; stops after emitting [END] or max_len tokens. Exact logit
// ties break toward the lowest token index.
TokenSeq greedy_decode(const Policy& policy, std::span<const TokenId> context,
                       int max_len);

// Analytic d(sequence_logprob.total)/d(params).
GradientRecord logprob_gradient(const Policy& policy,
                                std::span<const TokenId> context,
                                std::span<const TokenId> continuation);

// Adds weight * d(sequence_logprob.total)/d(params) into grad (grad must
// already have param_count entries). Shared by every loss gradient.
void accumulate_logprob_gradient(const Policy& policy,
                                 std::span<const TokenId> context,
                                 std::span<const TokenId> continuation,
                                 double weight, std::vector<double>& grad);

// Central-difference oracle for logprob_gradient; step must be > 0.
GradientRecord finite_difference_gradient(const Policy& policy,
                                          std::span<const TokenId> context,
                                          std::span<const TokenId> continuation,
                                          double step);

// Deep copy; later updates to the original never touch the clone.
Policy clone_freeze(const Policy& policy);

// FNV-1a over the raw parameter bytes; identifies which policy produced a
// dataset or checkpoint.
uint64_t param_hash(const Policy& policy);
std::string param_hash_hex(const Policy& policy);

} // namespace rpo
