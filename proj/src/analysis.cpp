#include "rpo/analysis.hpp"

#include <cmath>

#include "rpo/errors.hpp"
#include "rpo/losses.hpp"
#include "rpo/numeric.hpp"
#include "rpo/prompt.hpp"
#include "rpo/rng.hpp"
#include "rpo/trainer.hpp"

namespace rpo {

std::vector<TokenSeq> enumerate_sequences(const std::vector<TokenId>& alphabet,
                                          int min_len, int max_len,
                                          size_t max_total) {
    if (alphabet.empty() || min_len < 1 || max_len < min_len) {
        throw ValidationError("bad enumeration bounds");
    }
    // count first so an oversized request fails before allocating
    size_t total = 0;
    size_t layer = 1;
    for (int len = 1; len <= max_len; ++len) {
        if (layer > max_total / alphabet.size() + 1) {
            throw ValidationError("answer space too large to enumerate");
        }
        layer *= alphabet.size();
        if (len >= min_len) {
            total += layer;
            if (total > max_total) {
                throw ValidationError("answer space too large to enumerate");
            }
        }
    }

    std::vector<TokenSeq> out;
    out.reserve(total);
    TokenSeq current;
    const std::function<void(int)> grow = [&](int remaining) {
        if (static_cast<int>(current.size()) >= min_len) {
            out.push_back(current);
        }
        if (remaining == 0) {
            return;
        }
        for (TokenId t : alphabet) {
            current.push_back(t);
            grow(remaining - 1);
            current.pop_back();
        }
    };
    for (TokenId t : alphabet) {
        current.push_back(t);
        grow(max_len - 1);
        current.pop_back();
    }
    return out;
}

SeqRewardFn hashed_reward(uint64_t seed, double scale) {
    return [seed, scale](const TokenSeq& y) {
        uint64_t h = 0xCBF29CE484222325ull ^ seed;
        for (TokenId t : y) {
            h ^= static_cast<uint64_t>(static_cast<uint32_t>(t));
            h *= 0x100000001B3ull;
        }
        SplitMix64 rng(h);
        return scale * rng.next_unit();
    };
}

double partition_function(const Policy& ref, std::span<const TokenId> context,
                          const SeqRewardFn& reward, double beta,
                          const std::vector<TokenSeq>& answer_space) {
    if (!(beta > 0.0)) {
        throw ValidationError("beta must be > 0");
    }
    if (answer_space.empty() || answer_space.size() > kMaxAnswerSpace) {
        throw ValidationError("answer space must hold between 1 and " +
                              std::to_string(kMaxAnswerSpace) + " sequences");
    }
    std::vector<double> terms(answer_space.size());
    for (size_t i = 0; i < answer_space.size(); ++i) {
        terms[i] = sequence_logprob(ref, context, answer_space[i]).total +
                   reward(answer_space[i]) / beta;
    }
    return log_sum_exp(terms);
}

std::vector<PartitionReport> partition_gap_demo(const World& world,
                                                const PartitionDemoConfig& config) {
    if (config.n_samples < 1) {
        throw ValidationError("need at least one sample");
    }
    std::vector<TokenId> alphabet;
    for (int v = 0; v < world.spec.n_values; ++v) {
        alphabet.push_back(world.value_token(v));
    }
    const auto space = enumerate_sequences(alphabet, 1, config.max_answer_len,
                                           kMaxAnswerSpace);

    SplitMix64 rng(config.seed);
    std::vector<PartitionReport> reports;
    reports.reserve(static_cast<size_t>(config.n_samples));
    for (int i = 0; i < config.n_samples; ++i) {
        Policy policy = init_policy(config.arch, world.vocab, rng.next_u64());
        for (double& p : policy.params) {
            p *= config.param_scale;
        }
        const Question& q =
            world.questions[static_cast<size_t>(rng.next_below(world.questions.size()))];
        const auto docs = retrieve(world, q.x, world.spec.k_default,
                                   config.retrieval_noise, rng.next_u64());
        std::vector<TokenSeq> doc_tokens;
        for (const Document& doc : docs) {
            doc_tokens.push_back(doc.tokens);
        }
        const SeqRewardFn reward = hashed_reward(rng.next_u64());

        PartitionReport report;
        report.beta = config.beta;
        report.enumeration_size = space.size();
        const TokenSeq ctx_query = render_prompt(world.vocab, q.x, {});
        const TokenSeq ctx_docs = render_prompt(world.vocab, q.x, doc_tokens);
        report.log_z_query =
            partition_function(policy, ctx_query, reward, config.beta, space);
        report.log_z_with_docs =
            partition_function(policy, ctx_docs, reward, config.beta, space);
        report.gap = std::fabs(report.log_z_query - report.log_z_with_docs);
        reports.push_back(report);
    }
    return reports;
}

PathologyInstance construct_pathology(double eps, double eps_d,
                                      const Vocab& vocab, uint64_t seed) {
    if (eps >= 0.0) {
        throw ValidationError(
            "infeasible: log-probabilities are <= 0, eps must be negative");
    }
    if (!(eps_d > 0.0)) {
        throw ValidationError("eps_d must be > 0");
    }

    // plain (non-marker) tokens supply the cast of the instance
    std::vector<TokenId> plain;
    for (TokenId t = 0; t < vocab.size(); ++t) {
        if (t != vocab.pad() && t != vocab.query_begin() && t != vocab.doc_begin() &&
            t != vocab.answer_begin() && t != vocab.end()) {
            plain.push_back(t);
        }
    }
    if (plain.size() < 4) {
        throw ValidationError("vocab too small for a pathology instance");
    }

    const double delta = std::min(0.05, -eps / 2.0);
    const double margin = eps_d + 0.5;
    const double target_n = eps + delta;  // > eps, still < 0
    const double target_p = target_n - margin;
    const double p_n = std::exp(target_n);
    const double p_p = std::exp(target_p);
    const double rest = 1.0 - p_n - p_p;
    if (rest <= 1e-9) {
        throw ValidationError("infeasible: eps leaves no mass for the rest of "
                              "the vocabulary");
    }

    ArchConfig arch{6, 6, 16};
    PathologyInstance instance(init_policy(arch, vocab, seed));
    instance.eps = eps;
    instance.eps_d = eps_d;
    instance.y_n = {plain[0]};
    instance.y_p = {plain[1]};
    instance.x = {plain[2]};
    // the document asserts the entrenched answer, like a misleading retrieval
    instance.docs = {{plain[3], plain[0]}};

    Policy& policy = instance.ref;

    // Realize the target conditional exactly at the answering context by
    // solving for the output bias: logits := desired log-probs (they already
    // sum to one in probability space), so b2 = desired - W2 * hidden.
    const TokenSeq prompt = render_prompt(vocab, instance.x, instance.docs);
    std::vector<double> desired(static_cast<size_t>(vocab.size()),
                                std::log(rest / (vocab.size() - 2)));
    desired[static_cast<size_t>(instance.y_n[0])] = target_n;
    desired[static_cast<size_t>(instance.y_p[0])] = target_p;

    Policy probe = policy;
    for (int t = 0; t < vocab.size(); ++t) {
        probe.params[probe.off_b2() + static_cast<size_t>(t)] = 0.0;
    }
    const std::vector<double> raw = [&] {
        // logits with zero bias: recompute via log-probs is unusable (softmax
        // already applied), so rebuild the linear output directly
        std::vector<double> logits(static_cast<size_t>(vocab.size()), 0.0);
        const auto lp = token_logprobs(probe, prompt);
        // lp = logits0 - lse(logits0); shifting by any constant is absorbed
        // by the bias solve below, so lp itself serves as logits0
        for (size_t i = 0; i < logits.size(); ++i) {
            logits[i] = lp[i];
        }
        return logits;
    }();
    for (int t = 0; t < vocab.size(); ++t) {
        policy.params[policy.off_b2() + static_cast<size_t>(t)] =
            desired[static_cast<size_t>(t)] - raw[static_cast<size_t>(t)];
    }

    // verify by direct evaluation
    instance.logp_n =
        sequence_logprob(instance.ref, prompt, instance.y_n).total;
    instance.logp_p =
        sequence_logprob(instance.ref, prompt, instance.y_p).total;
    if (!(instance.logp_n > eps) || !(instance.logp_p < eps) ||
        !(instance.logp_n - instance.logp_p > eps_d)) {
        throw NumericalError("pathology construction failed verification");
    }
    return instance;
}

PathologyRunReport pathology_run(const PathologyInstance& instance,
                                 LossVariant loss_kind,
                                 const TrainConfig& config) {
    PreferencePair pair;
    pair.x = instance.x;
    pair.retrieved_docs = instance.docs;
    pair.y_w = instance.y_p; // the parametric answer is preferred
    pair.y_l = instance.y_n;
    pair.sign = -1;

    PairSet pair_set;
    pair_set.pairs = {pair};

    TrainConfig run_cfg = config;
    run_cfg.loss_variant = loss_kind;
    run_cfg.batch_size = 1;
    const Policy trained = rpo_train(instance.ref, pair_set, run_cfg);

    const TokenSeq prompt =
        render_prompt(instance.ref.vocab, instance.x, instance.docs);
    const double lp_n = sequence_logprob(trained, prompt, instance.y_n).total;
    const double lp_p = sequence_logprob(trained, prompt, instance.y_p).total;

    PathologyRunReport report;
    report.loss_kind = loss_variant_name(loss_kind);
    report.initial_margin = instance.logp_p - instance.logp_n;
    report.final_margin = lp_p - lp_n;
    report.eps_ad = std::max(std::fabs(lp_n - instance.logp_n),
                             std::fabs(lp_p - instance.logp_p));
    report.ranking_flipped = lp_p > lp_n;
    return report;
}

std::vector<BayesSample> random_bayes_samples(const Vocab& vocab, int n,
                                              uint64_t seed) {
    std::vector<TokenId> plain;
    for (TokenId t = 0; t < vocab.size(); ++t) {
        if (t != vocab.pad() && t != vocab.query_begin() && t != vocab.doc_begin() &&
            t != vocab.answer_begin() && t != vocab.end()) {
            plain.push_back(t);
        }
    }
    SplitMix64 rng(seed);
    auto pick = [&] { return plain[static_cast<size_t>(rng.next_below(plain.size()))]; };

    std::vector<BayesSample> samples;
    samples.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        BayesSample s;
        const int xlen = 1 + static_cast<int>(rng.next_below(2));
        for (int j = 0; j < xlen; ++j) {
            s.x.push_back(pick());
        }
        const int ndocs = 1 + static_cast<int>(rng.next_below(2));
        for (int d = 0; d < ndocs; ++d) {
            TokenSeq doc;
            const int dlen = 1 + static_cast<int>(rng.next_below(3));
            for (int j = 0; j < dlen; ++j) {
                doc.push_back(pick());
            }
            s.docs.push_back(std::move(doc));
        }
        const int ylen = 1 + static_cast<int>(rng.next_below(2));
        for (int j = 0; j < ylen; ++j) {
            s.y.push_back(pick());
        }
        s.y.push_back(vocab.end());
        samples.push_back(std::move(s));
    }
    return samples;
}

double bayes_residual_sweep(const Policy& policy,
                            const std::vector<BayesSample>& samples) {
    if (samples.empty()) {
        throw ValidationError("no samples to sweep");
    }
    double worst = 0.0;
    for (const BayesSample& s : samples) {
        const TokenSeq prefix = query_prefix(policy.vocab, s.x);
        const TokenSeq completion = retrieval_completion(policy.vocab, s.docs);
        const TokenSeq full = render_prompt(policy.vocab, s.x, s.docs);
        TokenSeq joint = completion;
        joint.insert(joint.end(), s.y.begin(), s.y.end());

        const double lp_joint = sequence_logprob(policy, prefix, joint).total;
        const double lp_docs = sequence_logprob(policy, prefix, completion).total;
        const double lp_answer = sequence_logprob(policy, full, s.y).total;
        worst = std::max(worst, std::fabs(lp_joint - lp_docs - lp_answer));
    }
    return worst;
}

ClusterReport cluster_report(const Policy& policy,
                             const std::vector<ConflictRecord>& eval_records,
                             int max_answer_len) {
    if (eval_records.empty()) {
        throw ValidationError("evaluation set is empty");
    }
    ClusterReport report;
    report.total = eval_records.size();
    std::array<size_t, 4> correct{};
    for (const ConflictRecord& record : eval_records) {
        size_t cluster = 0;
        if (record.acc_p == 1 && record.acc_np == 1) {
            cluster = 0;
        } else if (record.acc_p == 1) {
            cluster = 1;
        } else if (record.acc_np == 1) {
            cluster = 2;
        } else {
            cluster = 3;
        }
        ++report.counts[cluster];

        std::vector<TokenSeq> doc_tokens;
        for (const Document& doc : record.docs) {
            doc_tokens.push_back(doc.tokens);
        }
        const TokenSeq prompt = render_prompt(policy.vocab, record.x, doc_tokens);
        const TokenSeq answer = greedy_decode(policy, prompt, max_answer_len);
        correct[cluster] += static_cast<size_t>(
            accuracy(answer, record.gold, AccuracyMode::subsequence,
                     policy.vocab.end()));
    }
    for (size_t c = 0; c < 4; ++c) {
        report.proportions[c] = static_cast<double>(report.counts[c]) /
                                static_cast<double>(report.total);
        report.rag_accuracy[c] =
            report.counts[c] == 0
                ? 0.0
                : static_cast<double>(correct[c]) /
                      static_cast<double>(report.counts[c]);
    }
    return report;
}

} // namespace rpo
