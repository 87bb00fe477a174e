#pragma once

#include <functional>
#include <vector>

#include "rpo/conflict.hpp"
#include "rpo/policy.hpp"

namespace rpo {

// Pairwise preference probability sigma(r_w - r_l).
double bt_probability(double reward_w, double reward_l);

using PairRewardFn =
    std::function<double(const PreferencePair& pair, const TokenSeq& answer)>;

// Mean negative log-likelihood of the preferred answers under the
// Bradley-Terry model; ln 2 at zero margins, >= 0 always.
double rm_nll(const std::vector<PreferencePair>& pairs,
              const PairRewardFn& reward_fn);

// log pi_theta(continuation|context) - log pi_ref(continuation|context).
// Policies must share vocabulary and architecture.
double log_ratio(const Policy& theta, const Policy& ref,
                 std::span<const TokenId> context,
                 std::span<const TokenId> continuation);

// Signed, length-normalized retrieval reward:
//   sign * (beta / |D|) * [log pi_theta(D|x) - log pi_ref(D|x)]
// where log pi(D|x) scores the documents in retrieval order as one
// continuation of the query prefix (template markers included in the scored
// sequence, excluded from |D|).
double retrieval_reward_term(const Policy& theta, const Policy& ref,
                             const TokenSeq& x,
                             const std::vector<TokenSeq>& retrieved_docs,
                             int sign, double beta);

// The three labeled terms of the training margin plus its normalizer inputs.
struct RewardBreakdown {
    double term_a = 0.0; // beta-scaled preferred generation reward
    double term_b = 0.0; // beta-scaled dispreferred generation reward
    double term_c = 0.0; // signed, length-normalized retrieval reward
    double beta = 0.0;
    size_t doc_len = 0; // |D|: content tokens of the concatenated documents

    double margin() const { return term_a - term_b + term_c; }
};

RewardBreakdown rpo_breakdown(const Policy& theta, const Policy& ref,
                              const PreferencePair& pair, double beta);

struct LossValue {
    double loss = 0.0;
    GradientRecord gradient; // w.r.t. theta's parameters only
};

struct RpoLossOptions {
    bool with_retrieval_term = true; // false = the "no retrieval awareness" arm
    // Experimental: divide the generation rewards by their answer lengths the
    // way term (c) is divided by |D|. Off by default.
    bool normalize_generation_terms = false;
};

// -log sigma( a - b + c ) with a,b the generation rewards conditioned on
// (x, D) and c the signed retrieval reward.
LossValue rpo_loss(const Policy& theta, const Policy& ref,
                   const PreferencePair& pair, double beta,
                   const RpoLossOptions& options = {});

// Plain preference loss on one shared context, no retrieval term.
LossValue dpo_loss(const Policy& theta, const Policy& ref,
                   const TokenSeq& shared_context, const TokenSeq& y_w,
                   const TokenSeq& y_l, double beta);

// Joint-reward decomposition of one (x, D, y) triple. The retrieval event is
// scored as the full prompt completion ([DOC] d... [ANS]) so that
//   log pi(y, D | x) == log pi(D|x) + log pi(y | x, D)
// holds exactly by the chain rule; the residuals report the float error.
struct BayesDecomposition {
    double generation_ratio = 0.0; // beta * log-ratio of y given the full prompt
    double retrieval_ratio = 0.0;  // beta * log-ratio of the prompt completion
    double joint_ratio = 0.0;      // beta * log-ratio of completion ++ y
    double residual_theta = 0.0;
    double residual_ref = 0.0;
    double beta = 0.0;
};

BayesDecomposition reward_decompose(const Policy& theta, const Policy& ref,
                                    const TokenSeq& x,
                                    const std::vector<TokenSeq>& retrieved_docs,
                                    const TokenSeq& y, double beta);

using ContextRewardFn =
    std::function<double(const TokenSeq& context, const TokenSeq& answer)>;

struct RlhfDiagnostic {
    double objective = 0.0;       // E[r] - beta * KL
    double expected_reward = 0.0; // under theta restricted to the answer space
    double kl = 0.0;              // KL(theta || ref), >= 0
};

// Exact enumeration of E[r] - beta*KL over a fixed answer space (retrieval
// held fixed inside each context). Distributions are renormalized over the
// enumerated space, so the KL term is a true divergence. Averaged over the
// given contexts; the space may hold at most 100000 sequences.
RlhfDiagnostic rlhf_objective_diagnostic(const Policy& theta, const Policy& ref,
                                         const std::vector<TokenSeq>& contexts,
                                         const ContextRewardFn& reward_fn,
                                         double beta,
                                         const std::vector<TokenSeq>& answer_space);

inline constexpr size_t kMaxAnswerSpace = 100000;

} // namespace rpo
