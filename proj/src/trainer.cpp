#include "rpo/trainer.hpp"

#include <cmath>
#include <numeric>

#include "rpo/errors.hpp"
#include "rpo/losses.hpp"
#include "rpo/numeric.hpp"
#include "rpo/prompt.hpp"
#include "rpo/rng.hpp"

namespace rpo {

namespace {

// One supervised example: maximize log pi(target | context).
struct CeExample {
    TokenSeq context;
    TokenSeq target;
};

// Shuffled epoch order with sequential wraparound, fixed at epoch start.
class BatchOrder {
  public:
    BatchOrder(size_t n, uint64_t seed) : rng_(seed), order_(n) {
        std::iota(order_.begin(), order_.end(), size_t{0});
        reshuffle();
    }

    size_t next() {
        if (cursor_ == order_.size()) {
            reshuffle();
        }
        return order_[cursor_++];
    }

  private:
    void reshuffle() {
        rng_.shuffle(order_);
        cursor_ = 0;
    }

    SplitMix64 rng_;
    std::vector<size_t> order_;
    size_t cursor_ = 0;
};

void check_gradient_finite(const std::vector<double>& grad) {
    if (!all_finite(grad)) {
        throw NumericalError("gradient contains NaN or Inf; aborting before the update");
    }
}

// Generic training loop: per step, assemble a batch, get (mean loss, mean
// gradient) from the callback, record, update. Gradients are accumulated in
// batch index order for determinism.
template <class LossFn, class EvalFn>
Policy run_steps(Policy policy, size_t n_examples, const TrainConfig& config,
                 TrainReport* report, LossFn&& loss_fn, EvalFn&& eval_fn,
                 const char* metric_name) {
    BatchOrder order(n_examples, config.seed);
    std::vector<double> grad(policy.params.size());
    std::vector<double> velocity;
    if (config.momentum > 0.0) {
        velocity.assign(policy.params.size(), 0.0);
    }
    if (report) {
        report->loss_trace.clear();
        report->eval_trace.clear();
        report->eval_metric = metric_name;
        report->config_echo = config.to_string();
    }
    for (int step = 0; step < config.steps; ++step) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        for (int b = 0; b < config.batch_size; ++b) {
            loss += loss_fn(policy, order.next(), grad);
        }
        loss /= config.batch_size;
        const double inv = 1.0 / config.batch_size;
        for (double& g : grad) {
            g *= inv;
        }
        check_gradient_finite(grad);
        sgd_update(policy.params, grad, config.lr, config.momentum, velocity);
        if (report) {
            report->loss_trace.push_back(loss);
            if (config.eval_every > 0 && (step + 1) % config.eval_every == 0) {
                report->eval_trace.emplace_back(step + 1, eval_fn(policy));
            }
        }
    }
    if (report) {
        report->final_eval = eval_fn(policy);
    }
    return policy;
}

} // namespace

void sgd_update(std::vector<double>& params, const std::vector<double>& grad,
                double lr, double momentum, std::vector<double>& velocity) {
    if (params.size() != grad.size()) {
        throw ValidationError("parameter/gradient size mismatch");
    }
    if (momentum > 0.0) {
        if (velocity.size() != params.size()) {
            throw ValidationError("velocity buffer size mismatch");
        }
        for (size_t i = 0; i < params.size(); ++i) {
            velocity[i] = momentum * velocity[i] + grad[i];
            params[i] -= lr * velocity[i];
        }
    } else {
        for (size_t i = 0; i < params.size(); ++i) {
            params[i] -= lr * grad[i];
        }
    }
}

Policy optimizer_step(const Policy& policy, const GradientRecord& gradient,
                      const TrainConfig& config) {
    if (gradient.d_params.size() != policy.params.size()) {
        throw ValidationError("gradient length does not match parameter count");
    }
    check_gradient_finite(gradient.d_params);
    Policy next = policy;
    std::vector<double> velocity; // public single-step form is plain SGD
    sgd_update(next.params, gradient.d_params, config.lr, 0.0, velocity);
    return next;
}

Policy pretrain(const Policy& policy, const World& world,
                const TrainConfig& config, TrainReport* report) {
    config.validate();
    if (world.questions.empty()) {
        throw ValidationError("cannot pretrain on an empty world");
    }

    const Vocab& vocab = policy.vocab;
    if (!(vocab == world.vocab)) {
        throw ValidationError("world and policy vocabularies differ");
    }

    // Closed-book statements for every fact; stale facts teach their stale
    // value. Doc-conditioned copy examples are appended per the configured
    // fraction, each answered with the last retrieved document's stated value.
    std::vector<CeExample> examples;
    for (size_t i = 0; i < world.questions.size(); ++i) {
        const Question& q = world.questions[i];
        const Fact& fact = world.facts[static_cast<size_t>(q.fact_id)];
        CeExample ex;
        ex.context = render_prompt(vocab, q.x, {});
        const int value = fact.stale_value >= 0 ? fact.stale_value : fact.value;
        ex.target = {world.value_token(value), vocab.end()};
        examples.push_back(std::move(ex));
    }
    const size_t n_doc_examples =
        static_cast<size_t>(std::lround(config.doc_fraction *
                                        static_cast<double>(world.questions.size())));
    for (size_t i = 0; i < n_doc_examples; ++i) {
        const Question& q = world.questions[i % world.questions.size()];
        const auto docs = retrieve(world, q.x, world.spec.k_default, config.doc_noise,
                                   derive_seed(config.seed ^ 0x5B5Bull, i));
        std::vector<TokenSeq> doc_tokens;
        for (const Document& doc : docs) {
            doc_tokens.push_back(doc.tokens);
        }
        CeExample ex;
        ex.context = render_prompt(vocab, q.x, doc_tokens);
        ex.target = {docs.back().tokens.back(), vocab.end()};
        examples.push_back(std::move(ex));
    }

    auto loss_fn = [&](const Policy& p, size_t index, std::vector<double>& grad) {
        const CeExample& ex = examples[index];
        const double lp = sequence_logprob(p, ex.context, ex.target).total;
        accumulate_logprob_gradient(p, ex.context, ex.target, -1.0, grad);
        return -lp;
    };
    auto eval_fn = [&](const Policy& p) {
        size_t correct = 0;
        for (const Question& q : world.questions) {
            const TokenSeq prompt = render_prompt(vocab, q.x, {});
            const TokenSeq answer = greedy_decode(p, prompt, config.max_answer_len);
            correct += static_cast<size_t>(
                accuracy(answer, q.gold, AccuracyMode::subsequence, vocab.end()));
        }
        return static_cast<double>(correct) /
               static_cast<double>(world.questions.size());
    };
    return run_steps(policy, examples.size(), config, report, loss_fn, eval_fn,
                     "closed_book_accuracy");
}

Policy sft(const Policy& policy, const std::vector<ConflictRecord>& records,
           const TrainConfig& config, TrainReport* report) {
    config.validate();
    if (records.empty()) {
        throw ValidationError("SFT training set is empty");
    }

    const Vocab& vocab = policy.vocab;
    std::vector<CeExample> examples;
    examples.reserve(records.size());
    for (const ConflictRecord& record : records) {
        if (config.sft_filter && !detect_conflict(record)) {
            throw ValidationError(
                "SFT record fails the conflict condition; rerun collection with "
                "filtering or set sft_filter=false");
        }
        std::vector<TokenSeq> doc_tokens;
        for (const Document& doc : record.docs) {
            doc_tokens.push_back(doc.tokens);
        }
        CeExample ex;
        ex.context = render_prompt(vocab, record.x, doc_tokens);
        if (record.acc_np == 1) {
            ex.target = record.y_np;
        } else if (record.acc_p == 1) {
            ex.target = record.y_p;
        } else {
            // unfiltered mode only: neither answer is right, teach gold
            ex.target = record.gold;
            ex.target.push_back(vocab.end());
        }
        if (ex.target.empty()) {
            throw ValidationError("SFT target is empty");
        }
        examples.push_back(std::move(ex));
    }

    auto loss_fn = [&](const Policy& p, size_t index, std::vector<double>& grad) {
        const CeExample& ex = examples[index];
        const double lp = sequence_logprob(p, ex.context, ex.target).total;
        accumulate_logprob_gradient(p, ex.context, ex.target, -1.0, grad);
        return -lp;
    };
    auto eval_fn = [&](const Policy& p) {
        return qa_accuracy(p, records, /*rag=*/true, config.max_answer_len);
    };
    return run_steps(policy, examples.size(), config, report, loss_fn, eval_fn,
                     "rag_accuracy");
}

Policy rpo_train(const Policy& pi_sft, const PairSet& pair_set,
                 const TrainConfig& config, TrainReport* report) {
    config.validate();
    if (pair_set.pairs.empty()) {
        throw ValidationError("preference pair set is empty");
    }
    if (!(config.beta > 0.0)) {
        throw ValidationError("beta must be > 0");
    }
    if (!pair_set.collector_hash.empty() &&
        pair_set.collector_hash != param_hash_hex(pi_sft)) {
        throw ValidationError(
            "pair set was collected with a different policy than the starting "
            "policy; re-run collection (collector hash " + pair_set.collector_hash +
            ", starting policy " + param_hash_hex(pi_sft) + ")");
    }
    for (const PreferencePair& pair : pair_set.pairs) {
        validate_pair(pair);
    }

    const Policy ref = clone_freeze(pi_sft);
    const uint64_t ref_hash_before = param_hash(ref);

    RpoLossOptions options;
    options.normalize_generation_terms = config.normalize_generation_terms;
    options.with_retrieval_term = config.loss_variant == LossVariant::rpo;

    auto loss_fn = [&](const Policy& theta, size_t index, std::vector<double>& grad) {
        const PreferencePair& pair = pair_set.pairs[index];
        LossValue value;
        if (config.loss_variant == LossVariant::dpo) {
            const TokenSeq context =
                render_prompt(theta.vocab, pair.x, pair.retrieved_docs);
            value = dpo_loss(theta, ref, context, pair.y_w, pair.y_l, config.beta);
        } else {
            value = rpo_loss(theta, ref, pair, config.beta, options);
        }
        for (size_t i = 0; i < grad.size(); ++i) {
            grad[i] += value.gradient.d_params[i];
        }
        return value.loss;
    };
    auto eval_fn = [&](const Policy& theta) {
        return pair_ranking_accuracy(theta, pair_set.pairs);
    };
    Policy trained = run_steps(clone_freeze(pi_sft), pair_set.pairs.size(), config,
                               report, loss_fn, eval_fn, "pair_ranking");
    if (param_hash(ref) != ref_hash_before) {
        throw NumericalError("reference policy mutated during training");
    }
    return trained;
}

double pair_ranking_accuracy(const Policy& policy,
                             const std::vector<PreferencePair>& pairs) {
    if (pairs.empty()) {
        throw ValidationError("no pairs to rank");
    }
    size_t won = 0;
    for (const PreferencePair& pair : pairs) {
        const TokenSeq context = render_prompt(policy.vocab, pair.x, pair.retrieved_docs);
        const double w = sequence_logprob(policy, context, pair.y_w).total;
        const double l = sequence_logprob(policy, context, pair.y_l).total;
        won += static_cast<size_t>(w > l);
    }
    return static_cast<double>(won) / static_cast<double>(pairs.size());
}

} // namespace rpo
