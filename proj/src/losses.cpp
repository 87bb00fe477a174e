#include "rpo/losses.hpp"

#include <cmath>

#include "rpo/errors.hpp"
#include "rpo/numeric.hpp"
#include "rpo/prompt.hpp"

namespace rpo {

namespace {

void check_same_family(const Policy& theta, const Policy& ref) {
    if (!(theta.vocab == ref.vocab)) {
        throw ValidationError("policies use different vocabularies");
    }
    if (theta.arch.context_window != ref.arch.context_window ||
        theta.arch.embedding_dim != ref.arch.embedding_dim ||
        theta.arch.hidden_dim != ref.arch.hidden_dim) {
        throw ValidationError("policies use different architectures");
    }
}

void check_beta(double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta)) {
        throw ValidationError("beta must be a positive finite number");
    }
}

void check_loss_finite(double loss) {
    if (!std::isfinite(loss)) {
        throw NumericalError("loss is not finite");
    }
}

} // namespace

double bt_probability(double reward_w, double reward_l) {
    if (!std::isfinite(reward_w) || !std::isfinite(reward_l)) {
        throw ValidationError("rewards must be finite");
    }
    const double d = reward_w - reward_l;
    if (d >= 0.0) {
        return sigmoid(d);
    }
    // mirror so that p(w>l) + p(l>w) == 1 exactly: sigmoid(-d) >= 0.5 makes
    // the subtraction below exact
    return 1.0 - sigmoid(-d);
}

double rm_nll(const std::vector<PreferencePair>& pairs,
              const PairRewardFn& reward_fn) {
    if (pairs.empty()) {
        throw ValidationError("rm_nll needs a non-empty batch");
    }
    double total = 0.0;
    for (const PreferencePair& pair : pairs) {
        const double margin = reward_fn(pair, pair.y_w) - reward_fn(pair, pair.y_l);
        total += softplus(-margin); // == -log sigmoid(margin)
    }
    const double loss = total / static_cast<double>(pairs.size());
    check_loss_finite(loss);
    return loss;
}

double log_ratio(const Policy& theta, const Policy& ref,
                 std::span<const TokenId> context,
                 std::span<const TokenId> continuation) {
    check_same_family(theta, ref);
    return sequence_logprob(theta, context, continuation).total -
           sequence_logprob(ref, context, continuation).total;
}

double retrieval_reward_term(const Policy& theta, const Policy& ref,
                             const TokenSeq& x,
                             const std::vector<TokenSeq>& retrieved_docs,
                             int sign, double beta) {
    check_beta(beta);
    if (sign != 1 && sign != -1) {
        throw ValidationError("sign must be +1 or -1");
    }
    if (retrieved_docs.empty()) {
        throw ValidationError("retrieval reward needs at least one document");
    }
    const size_t doc_len = doc_content_length(retrieved_docs);
    if (doc_len == 0) {
        throw ValidationError("retrieved documents are all empty");
    }
    const TokenSeq prefix = query_prefix(theta.vocab, x);
    const TokenSeq completion = retrieval_completion(theta.vocab, retrieved_docs);
    const double ratio = log_ratio(theta, ref, prefix, completion);
    return sign * (beta / static_cast<double>(doc_len)) * ratio;
}

RewardBreakdown rpo_breakdown(const Policy& theta, const Policy& ref,
                              const PreferencePair& pair, double beta) {
    validate_pair(pair);
    check_beta(beta);
    const TokenSeq full = render_prompt(theta.vocab, pair.x, pair.retrieved_docs);
    RewardBreakdown breakdown;
    breakdown.beta = beta;
    breakdown.doc_len = doc_content_length(pair.retrieved_docs);
    breakdown.term_a = beta * log_ratio(theta, ref, full, pair.y_w);
    breakdown.term_b = beta * log_ratio(theta, ref, full, pair.y_l);
    breakdown.term_c =
        retrieval_reward_term(theta, ref, pair.x, pair.retrieved_docs, pair.sign, beta);
    return breakdown;
}

LossValue rpo_loss(const Policy& theta, const Policy& ref,
                   const PreferencePair& pair, double beta,
                   const RpoLossOptions& options) {
    validate_pair(pair);
    check_beta(beta);
    check_same_family(theta, ref);

    const TokenSeq full = render_prompt(theta.vocab, pair.x, pair.retrieved_docs);
    const double scale_w =
        options.normalize_generation_terms ? 1.0 / static_cast<double>(pair.y_w.size()) : 1.0;
    const double scale_l =
        options.normalize_generation_terms ? 1.0 / static_cast<double>(pair.y_l.size()) : 1.0;
    const double term_a = beta * scale_w * log_ratio(theta, ref, full, pair.y_w);
    const double term_b = beta * scale_l * log_ratio(theta, ref, full, pair.y_l);
    double term_c = 0.0;
    if (options.with_retrieval_term) {
        term_c = retrieval_reward_term(theta, ref, pair.x, pair.retrieved_docs,
                                       pair.sign, beta);
    }
    const double margin = term_a - term_b + term_c;

    LossValue out;
    out.loss = softplus(-margin);
    check_loss_finite(out.loss);

    // d(-log sigmoid(m))/dm = sigmoid(m) - 1, then chain through the three
    // theta-dependent sequence scores
    const double dm = sigmoid(margin) - 1.0;
    out.gradient.d_params.assign(theta.params.size(), 0.0);
    accumulate_logprob_gradient(theta, full, pair.y_w, dm * beta * scale_w,
                                out.gradient.d_params);
    accumulate_logprob_gradient(theta, full, pair.y_l, -dm * beta * scale_l,
                                out.gradient.d_params);
    if (options.with_retrieval_term) {
        const size_t doc_len = doc_content_length(pair.retrieved_docs);
        const TokenSeq prefix = query_prefix(theta.vocab, pair.x);
        const TokenSeq completion =
            retrieval_completion(theta.vocab, pair.retrieved_docs);
        accumulate_logprob_gradient(
            theta, prefix, completion,
            dm * pair.sign * beta / static_cast<double>(doc_len),
            out.gradient.d_params);
    }
    return out;
}

LossValue dpo_loss(const Policy& theta, const Policy& ref,
                   const TokenSeq& shared_context, const TokenSeq& y_w,
                   const TokenSeq& y_l, double beta) {
    check_beta(beta);
    check_same_family(theta, ref);
    if (y_w.empty() || y_l.empty() || y_w == y_l) {
        throw ValidationError("preference answers must be non-empty and differ");
    }
    const double margin = beta * (log_ratio(theta, ref, shared_context, y_w) -
                                  log_ratio(theta, ref, shared_context, y_l));
    LossValue out;
    out.loss = softplus(-margin);
    check_loss_finite(out.loss);

    const double dm = sigmoid(margin) - 1.0;
    out.gradient.d_params.assign(theta.params.size(), 0.0);
    accumulate_logprob_gradient(theta, shared_context, y_w, dm * beta,
                                out.gradient.d_params);
    accumulate_logprob_gradient(theta, shared_context, y_l, -dm * beta,
                                out.gradient.d_params);
    return out;
}

BayesDecomposition reward_decompose(const Policy& theta, const Policy& ref,
                                    const TokenSeq& x,
                                    const std::vector<TokenSeq>& retrieved_docs,
                                    const TokenSeq& y, double beta) {
    check_beta(beta);
    check_same_family(theta, ref);
    if (y.empty()) {
        throw ValidationError("answer must be non-empty");
    }

    const TokenSeq prefix = query_prefix(theta.vocab, x);
    const TokenSeq completion = retrieval_completion(theta.vocab, retrieved_docs);
    const TokenSeq full = render_prompt(theta.vocab, x, retrieved_docs);
    TokenSeq joint = completion;
    joint.insert(joint.end(), y.begin(), y.end());

    const double theta_retrieval = sequence_logprob(theta, prefix, completion).total;
    const double theta_generation = sequence_logprob(theta, full, y).total;
    const double theta_joint = sequence_logprob(theta, prefix, joint).total;
    const double ref_retrieval = sequence_logprob(ref, prefix, completion).total;
    const double ref_generation = sequence_logprob(ref, full, y).total;
    const double ref_joint = sequence_logprob(ref, prefix, joint).total;

    BayesDecomposition out;
    out.beta = beta;
    out.generation_ratio = beta * (theta_generation - ref_generation);
    out.retrieval_ratio = beta * (theta_retrieval - ref_retrieval);
    out.joint_ratio = beta * (theta_joint - ref_joint);
    out.residual_theta = theta_joint - (theta_retrieval + theta_generation);
    out.residual_ref = ref_joint - (ref_retrieval + ref_generation);
    return out;
}

RlhfDiagnostic rlhf_objective_diagnostic(const Policy& theta, const Policy& ref,
                                         const std::vector<TokenSeq>& contexts,
                                         const ContextRewardFn& reward_fn,
                                         double beta,
                                         const std::vector<TokenSeq>& answer_space) {
    check_beta(beta);
    check_same_family(theta, ref);
    if (contexts.empty()) {
        throw ValidationError("diagnostic needs at least one context");
    }
    if (answer_space.empty() || answer_space.size() > kMaxAnswerSpace) {
        throw ValidationError("answer space must hold between 1 and " +
                              std::to_string(kMaxAnswerSpace) + " sequences");
    }

    RlhfDiagnostic total;
    std::vector<double> lp_theta(answer_space.size());
    std::vector<double> lp_ref(answer_space.size());
    for (const TokenSeq& context : contexts) {
        for (size_t i = 0; i < answer_space.size(); ++i) {
            lp_theta[i] = sequence_logprob(theta, context, answer_space[i]).total;
            lp_ref[i] = sequence_logprob(ref, context, answer_space[i]).total;
        }
        const double lse_theta = log_sum_exp(lp_theta);
        const double lse_ref = log_sum_exp(lp_ref);

        double expected_reward = 0.0;
        double kl = 0.0;
        for (size_t i = 0; i < answer_space.size(); ++i) {
            const double w = std::exp(lp_theta[i] - lse_theta);
            expected_reward += w * reward_fn(context, answer_space[i]);
            kl += w * ((lp_theta[i] - lse_theta) - (lp_ref[i] - lse_ref));
        }
        total.expected_reward += expected_reward;
        total.kl += kl;
    }
    const double n = static_cast<double>(contexts.size());
    total.expected_reward /= n;
    total.kl /= n;
    total.objective = total.expected_reward - beta * total.kl;
    check_loss_finite(total.objective);
    return total;
}

} // namespace rpo
