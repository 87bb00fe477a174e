#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rpo/conflict.hpp"
#include "rpo/policy.hpp"
#include "rpo/train_config.hpp"
#include "rpo/world.hpp"

namespace rpo {

struct TrainReport {
    std::vector<double> loss_trace; // one mean batch loss per step
    std::vector<std::pair<int, double>> eval_trace;
    double final_eval = 0.0;
    std::string eval_metric; // "closed_book_accuracy" | "rag_accuracy" | "pair_ranking"
    std::string config_echo;
    std::string checkpoint_path;
};

// params -= lr * grad, or with momentum mu > 0:
//   v = mu*v + grad;  params -= lr*v
void sgd_update(std::vector<double>& params, const std::vector<double>& grad,
                double lr, double momentum, std::vector<double>& velocity);

// One plain gradient-descent step; throws NumericalError on a non-finite
// gradient before touching any parameter.
Policy optimizer_step(const Policy& policy, const GradientRecord& gradient,
                      const TrainConfig& config);

// Cross-entropy training that instills the base behavior: closed-book recall
// of every fact (stale facts teach their stale value) plus, for a configurable
// share of examples, answers copied from retrieved documents so the base
// policy over-relies on retrieval the way a pretrained LM does.
Policy pretrain(const Policy& policy, const World& world,
                const TrainConfig& config, TrainReport* report = nullptr);

// Cross-entropy toward the correct answer of each conflict record, input
// rendered with the record's documents. With config.sft_filter every record
// must satisfy the conflict condition; the unfiltered mode exists for the
// filtering ablation and falls back to the gold answer when neither stored
// answer is correct.
Policy sft(const Policy& policy, const std::vector<ConflictRecord>& records,
           const TrainConfig& config, TrainReport* report = nullptr);

struct PairSet {
    std::vector<PreferencePair> pairs;
    // hex param hash of the policy that generated the pairs; when non-empty,
    // rpo_train refuses a mismatched starting policy
    std::string collector_hash;
};

// Preference optimization against a frozen clone of the given policy. The
// loss variant selects the full loss, the variant without the retrieval
// term, or the plain preference baseline.
Policy rpo_train(const Policy& pi_sft, const PairSet& pair_set,
                 const TrainConfig& config, TrainReport* report = nullptr);

// Share of pairs whose preferred answer outranks the dispreferred one by
// full-sequence log-probability under the policy.
double pair_ranking_accuracy(const Policy& policy,
                             const std::vector<PreferencePair>& pairs);

} // namespace rpo
