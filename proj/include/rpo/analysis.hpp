#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "rpo/conflict.hpp"
#include "rpo/policy.hpp"
#include "rpo/train_config.hpp"
#include "rpo/world.hpp"

namespace rpo {

// All sequences over the alphabet with length in [min_len, max_len], in
// lexicographic order by position; throws if the space exceeds max_total.
std::vector<TokenSeq> enumerate_sequences(const std::vector<TokenId>& alphabet,
                                          int min_len, int max_len,
                                          size_t max_total);

using SeqRewardFn = std::function<double(const TokenSeq&)>;

// Deterministic pseudo-random reward in [0, scale), a pure function of
// (seed, sequence); the stand-in for a latent reward model.
SeqRewardFn hashed_reward(uint64_t seed, double scale = 1.0);

// log Z = log sum_y pi_ref(y|context) * exp(r(y)/beta), exact over the space.
double partition_function(const Policy& ref, std::span<const TokenId> context,
                          const SeqRewardFn& reward, double beta,
                          const std::vector<TokenSeq>& answer_space);

// Z(x) vs Z(x, D): the same latent reward, two conditioning modes.
struct PartitionReport {
    double log_z_query = 0.0;     // context without documents
    double log_z_with_docs = 0.0; // context with documents
    double gap = 0.0;             // |difference|
    size_t enumeration_size = 0;
    double beta = 0.0;
};

struct PartitionDemoConfig {
    int n_samples = 50;
    double beta = 0.1;
    int max_answer_len = 2;
    double retrieval_noise = 0.3;
    uint64_t seed = 0;
    ArchConfig arch{6, 6, 12}; // fresh random policy per sample
    // Initialization is near-uniform; scaling the weights gives each sampled
    // policy sharply context-dependent conditionals, which is the regime the
    // non-cancellation argument is about.
    double param_scale = 15.0;
};

std::vector<PartitionReport> partition_gap_demo(const World& world,
                                                const PartitionDemoConfig& config);

// A constructed reference policy and pair on which plain preference training
// provably stalls: the dispreferred answer is entrenched under the
// doc-conditioned prompt by more than eps_d nats. The doc itself states the
// entrenched answer, the way a misleading retrieval does.
struct PathologyInstance {
    explicit PathologyInstance(Policy ref_in) : ref(std::move(ref_in)) {}

    Policy ref;
    TokenSeq x;
    std::vector<TokenSeq> docs;
    TokenSeq y_p; // preferred (parametric) answer, low probability
    TokenSeq y_n; // dispreferred (doc-stated) answer, high probability
    double eps = 0.0;
    double eps_d = 0.0;
    double logp_n = 0.0; // measured at construction
    double logp_p = 0.0;
};

// Throws ValidationError when the request is infeasible (eps >= 0, or no
// probability mass left for the rest of the vocabulary).
PathologyInstance construct_pathology(double eps, double eps_d,
                                      const Vocab& vocab, uint64_t seed);

struct PathologyRunReport {
    double eps_ad = 0.0;        // max answer log-prob drift from the reference
    bool ranking_flipped = false;
    double initial_margin = 0.0; // logp(y_p) - logp(y_n), negative at start
    double final_margin = 0.0;
    std::string loss_kind;
};

// Trains on the single pair y_p > y_n (sign -1) with the chosen loss and
// measures whether the preferred answer overtakes by full-sequence log-prob.
PathologyRunReport pathology_run(const PathologyInstance& instance,
                                 LossVariant loss_kind, const TrainConfig& config);

struct BayesSample {
    TokenSeq x;
    std::vector<TokenSeq> docs;
    TokenSeq y;
};

std::vector<BayesSample> random_bayes_samples(const Vocab& vocab, int n,
                                              uint64_t seed);

// max over samples of |log pi(y,D|x) - log pi(D|x) - log pi(y|x,D)|.
double bayes_residual_sweep(const Policy& policy,
                            const std::vector<BayesSample>& samples);

// Clusters fixed by the records' stored accuracy flags (the policy that
// collected them); per-cluster accuracy measured by decoding the GIVEN
// policy fresh on each record's documents. Passing the collecting policy
// itself reproduces the definitional 1/0/1/0 pattern.
struct ClusterReport {
    // A: both correct, B: only parametric, C: only retrieval-conditioned,
    // D: both wrong
    std::array<size_t, 4> counts{};
    std::array<double, 4> proportions{};
    std::array<double, 4> rag_accuracy{}; // 0 for empty clusters
    size_t total = 0;
};

ClusterReport cluster_report(const Policy& policy,
                             const std::vector<ConflictRecord>& eval_records,
                             int max_answer_len = 4);

} // namespace rpo
