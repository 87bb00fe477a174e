#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "rpo/errors.hpp"
#include "rpo/losses.hpp"
#include "rpo/numeric.hpp"
#include "rpo/prompt.hpp"
#include "rpo/rng.hpp"
#include "test_util.hpp"

using namespace rpo;

namespace {

// x=[t0], two docs, answers t4/t5 with end markers; V = 11.
PreferencePair sample_pair(const Vocab& vocab, int sign = 1) {
    PreferencePair pair;
    pair.x = {vocab.id("t0")};
    pair.retrieved_docs = {{vocab.id("t1"), vocab.id("t2")}, {vocab.id("t3")}};
    pair.y_w = {vocab.id("t4"), vocab.end()};
    pair.y_l = {vocab.id("t5"), vocab.end()};
    pair.sign = sign;
    return pair;
}

// finite-difference gradient of an arbitrary scalar loss over theta's params
std::vector<double> fd_loss_gradient(const Policy& theta,
                                     const std::function<double(const Policy&)>& loss,
                                     double h = 1e-5) {
    Policy probe = theta;
    std::vector<double> grad(theta.params.size());
    for (size_t i = 0; i < probe.params.size(); ++i) {
        const double saved = probe.params[i];
        probe.params[i] = saved + h;
        const double plus = loss(probe);
        probe.params[i] = saved - h;
        const double minus = loss(probe);
        probe.params[i] = saved;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    return grad;
}

// independent per-token recomputation of the normalized retrieval reward
double retrieval_term_oracle(const Policy& theta, const Policy& ref,
                             const TokenSeq& x, const std::vector<TokenSeq>& docs,
                             int sign, double beta) {
    const TokenSeq prefix = query_prefix(theta.vocab, x);
    const TokenSeq completion = retrieval_completion(theta.vocab, docs);
    long double ratio_sum = 0.0L;
    TokenSeq ctx = prefix;
    for (TokenId t : completion) {
        const auto lp_t = token_logprobs(theta, ctx);
        const auto lp_r = token_logprobs(ref, ctx);
        ratio_sum += static_cast<long double>(lp_t[static_cast<size_t>(t)]) -
                     static_cast<long double>(lp_r[static_cast<size_t>(t)]);
        ctx.push_back(t);
    }
    size_t doc_len = 0;
    for (const TokenSeq& d : docs) {
        doc_len += d.size();
    }
    return sign * (beta / static_cast<double>(doc_len)) *
           static_cast<double>(ratio_sum);
}

} // namespace

TEST_CASE("sigmoid anchors and symmetry") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(std::log(3.0)) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(sigmoid(700.0) == doctest::Approx(1.0));
    CHECK(sigmoid(-700.0) > 0.0);
    SplitMix64 rng(11);
    for (int i = 0; i < 200; ++i) {
        const double z = rng.next_uniform(-50.0, 50.0);
        CHECK(sigmoid(z) + sigmoid(-z) == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("bt_probability anchors and exact complement") {
    CHECK(bt_probability(1.0, 1.0) == 0.5);
    CHECK(bt_probability(std::log(3.0), 0.0) == doctest::Approx(0.75).epsilon(1e-12));
    SplitMix64 rng(12);
    for (int i = 0; i < 200; ++i) {
        const double a = rng.next_uniform(-30.0, 30.0);
        const double b = rng.next_uniform(-30.0, 30.0);
        CHECK(bt_probability(a, b) + bt_probability(b, a) == 1.0); // exact
    }
    CHECK_THROWS_AS(bt_probability(std::nan(""), 0.0), ValidationError);
}

TEST_CASE("rm_nll anchors and monotonicity") {
    Vocab vocab = test::tiny_vocab();
    std::vector<PreferencePair> pairs{sample_pair(vocab, 1), sample_pair(vocab, -1)};

    auto flat = [](const PreferencePair&, const TokenSeq&) { return 1.0; };
    CHECK(rm_nll(pairs, flat) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // single pair with margin ln 3 -> -ln 0.75
    std::vector<PreferencePair> one{sample_pair(vocab, 1)};
    auto ln3_margin = [&](const PreferencePair& p, const TokenSeq& y) {
        return y == p.y_w ? std::log(3.0) : 0.0;
    };
    CHECK(rm_nll(one, ln3_margin) == doctest::Approx(0.287682).epsilon(1e-5));

    // raising any one margin strictly lowers the batch loss
    std::vector<double> margins{0.3, -0.2};
    auto table = [&](const PreferencePair& p, const TokenSeq& y) {
        const size_t idx = (p.sign == 1) ? 0 : 1;
        return y == p.y_w ? margins[idx] : 0.0;
    };
    const double before = rm_nll(pairs, table);
    margins[1] += 0.5;
    const double after = rm_nll(pairs, table);
    CHECK(after < before);

    CHECK_THROWS_AS(rm_nll({}, flat), ValidationError);
}

TEST_CASE("log_ratio identity, ascent and antisymmetry") {
    Policy ref = test::tiny_policy(31);
    Policy theta = clone_freeze(ref);
    TokenSeq ctx{ref.vocab.query_begin(), ref.vocab.id("t0")};
    TokenSeq cont{ref.vocab.id("t1"), ref.vocab.end()};

    CHECK(log_ratio(theta, ref, ctx, cont) == 0.0);

    // one gradient-ascent step on the continuation raises the ratio
    GradientRecord g = logprob_gradient(theta, ctx, cont);
    for (size_t i = 0; i < theta.params.size(); ++i) {
        theta.params[i] += 0.1 * g.d_params[i];
    }
    const double up = log_ratio(theta, ref, ctx, cont);
    CHECK(up > 0.0);
    CHECK(log_ratio(ref, theta, ctx, cont) == doctest::Approx(-up).epsilon(1e-12));

    Policy other = init_policy({2, 2, 2}, ref.vocab, 1);
    CHECK_THROWS_AS(log_ratio(theta, other, ctx, cont), ValidationError);
}

TEST_CASE("retrieval_reward_term identities and oracle") {
    Policy ref = test::tiny_policy(41);
    Policy theta = test::tiny_policy(42);
    const Vocab& vocab = ref.vocab;
    PreferencePair pair = sample_pair(vocab);

    CHECK(retrieval_reward_term(ref, ref, pair.x, pair.retrieved_docs, 1, 0.5) == 0.0);
    CHECK(retrieval_reward_term(ref, ref, pair.x, pair.retrieved_docs, -1, 0.5) == 0.0);

    const double plus =
        retrieval_reward_term(theta, ref, pair.x, pair.retrieved_docs, 1, 0.5);
    const double minus =
        retrieval_reward_term(theta, ref, pair.x, pair.retrieved_docs, -1, 0.5);
    CHECK(plus == doctest::Approx(-minus).epsilon(1e-15));
    CHECK(plus != 0.0);

    // explicit per-token oracle, original and with every doc token doubled
    CHECK(plus == doctest::Approx(retrieval_term_oracle(theta, ref, pair.x,
                                                        pair.retrieved_docs, 1, 0.5))
                      .epsilon(1e-10));
    std::vector<TokenSeq> doubled;
    for (const TokenSeq& doc : pair.retrieved_docs) {
        TokenSeq d2;
        for (TokenId t : doc) {
            d2.push_back(t);
            d2.push_back(t);
        }
        doubled.push_back(d2);
    }
    const double doubled_term =
        retrieval_reward_term(theta, ref, pair.x, doubled, 1, 0.5);
    CHECK(doubled_term ==
          doctest::Approx(retrieval_term_oracle(theta, ref, pair.x, doubled, 1, 0.5))
              .epsilon(1e-10));

    CHECK_THROWS_AS(retrieval_reward_term(theta, ref, pair.x, {}, 1, 0.5),
                    ValidationError);
    CHECK_THROWS_AS(retrieval_reward_term(theta, ref, pair.x, pair.retrieved_docs,
                                          0, 0.5),
                    ValidationError);
    CHECK_THROWS_AS(retrieval_reward_term(theta, ref, pair.x, pair.retrieved_docs,
                                          1, -1.0),
                    ValidationError);
}

TEST_CASE("rpo_loss is ln 2 at theta == ref") {
    Policy ref = test::tiny_policy(51);
    Policy theta = clone_freeze(ref);
    PreferencePair pair = sample_pair(ref.vocab);
    for (int sign : {1, -1}) {
        pair.sign = sign;
        LossValue v = rpo_loss(theta, ref, pair, 0.1);
        CHECK(std::fabs(v.loss - std::log(2.0)) < 1e-9);
    }
}

TEST_CASE("rpo_loss reduces to dpo_loss when the docs ratio is exactly zero") {
    SplitMix64 rng(61);
    for (int trial = 0; trial < 10; ++trial) {
        Policy ref = test::tiny_policy(600 + trial);
        Policy theta = clone_freeze(ref);
        PreferencePair pair = sample_pair(ref.vocab, trial % 2 == 0 ? 1 : -1);

        // Perturb only the embedding of a token that never occurs in any
        // window of the doc-completion scoring: t4/t5 live inside the answers
        // alone, so every doc-scoring forward pass is bitwise unchanged.
        for (const char* tok : {"t4", "t5"}) {
            const size_t base = theta.off_embed() +
                                static_cast<size_t>(theta.vocab.id(tok)) *
                                    theta.arch.embedding_dim;
            for (int e = 0; e < theta.arch.embedding_dim; ++e) {
                theta.params[base + static_cast<size_t>(e)] +=
                    rng.next_uniform(-0.3, 0.3);
            }
        }

        const TokenSeq context =
            render_prompt(theta.vocab, pair.x, pair.retrieved_docs);
        const double docs_ratio = log_ratio(theta, ref, query_prefix(theta.vocab, pair.x),
                                            retrieval_completion(theta.vocab, pair.retrieved_docs));
        REQUIRE(docs_ratio == 0.0); // bitwise: the perturbed rows are unread

        LossValue a = rpo_loss(theta, ref, pair, 0.1);
        LossValue b = dpo_loss(theta, ref, context, pair.y_w, pair.y_l, 0.1);
        CHECK(std::fabs(a.loss - b.loss) < 1e-12);
    }
}

TEST_CASE("rpo_loss and dpo_loss gradients match finite differences") {
    for (int trial = 0; trial < 10; ++trial) {
        Policy ref = test::tiny_policy(700 + trial);
        Policy theta = test::tiny_policy(900 + trial);
        PreferencePair pair = sample_pair(ref.vocab, trial % 2 == 0 ? 1 : -1);
        const double beta = 0.3;

        LossValue v = rpo_loss(theta, ref, pair, beta);
        auto loss_fn = [&](const Policy& p) {
            return rpo_loss(p, ref, pair, beta).loss;
        };
        std::vector<double> fd = fd_loss_gradient(theta, loss_fn);
        for (size_t i = 0; i < fd.size(); ++i) {
            CHECK(test::gradient_matches(v.gradient.d_params[i], fd[i]));
        }

        const TokenSeq context = render_prompt(theta.vocab, pair.x, pair.retrieved_docs);
        LossValue d = dpo_loss(theta, ref, context, pair.y_w, pair.y_l, beta);
        auto dpo_fn = [&](const Policy& p) {
            return dpo_loss(p, ref, context, pair.y_w, pair.y_l, beta).loss;
        };
        fd = fd_loss_gradient(theta, dpo_fn);
        for (size_t i = 0; i < fd.size(); ++i) {
            CHECK(test::gradient_matches(d.gradient.d_params[i], fd[i]));
        }
    }
}

TEST_CASE("dpo_loss anchors") {
    Policy ref = test::tiny_policy(71);
    Policy theta = clone_freeze(ref);
    PreferencePair pair = sample_pair(ref.vocab);
    const TokenSeq context = render_prompt(ref.vocab, pair.x, pair.retrieved_docs);

    CHECK(dpo_loss(theta, ref, context, pair.y_w, pair.y_l, 0.1).loss ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // margin 30 via an exact logit shift: raising b2[y_w0] by c and lowering
    // b2[y_l0] by c moves the pairwise margin by exactly beta * 2c per token
    const double beta = 0.5;
    const double shift = 30.0 / (2.0 * beta);
    theta.params[theta.off_b2() + static_cast<size_t>(pair.y_w[0])] += shift;
    theta.params[theta.off_b2() + static_cast<size_t>(pair.y_l[0])] -= shift;
    const double margin =
        beta * (log_ratio(theta, ref, context, pair.y_w) -
                log_ratio(theta, ref, context, pair.y_l));
    CHECK(margin > 29.0); // end-marker steps contribute a bit as well
    CHECK(dpo_loss(theta, ref, context, pair.y_w, pair.y_l, beta).loss < 1e-12);
    CHECK(softplus(-30.0) < 1e-12); // the closed-form asymptote itself

    // definitional identity with rm_nll on a single pair
    Policy theta2 = test::tiny_policy(72);
    auto implicit_reward = [&](const PreferencePair& p, const TokenSeq& y) {
        const TokenSeq c = render_prompt(theta2.vocab, p.x, p.retrieved_docs);
        return beta * log_ratio(theta2, ref, c, y);
    };
    const double nll = rm_nll({pair}, implicit_reward);
    const double direct =
        dpo_loss(theta2, ref, context, pair.y_w, pair.y_l, beta).loss;
    CHECK(nll == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("sign contract: positive docs ratio favors sign +1") {
    Policy ref = test::tiny_policy(81);
    Policy theta = clone_freeze(ref);
    PreferencePair pair = sample_pair(ref.vocab);

    // ascend the doc completion likelihood so the docs log-ratio is positive
    const TokenSeq prefix = query_prefix(theta.vocab, pair.x);
    const TokenSeq completion = retrieval_completion(theta.vocab, pair.retrieved_docs);
    for (int step = 0; step < 5; ++step) {
        GradientRecord g = logprob_gradient(theta, prefix, completion);
        for (size_t i = 0; i < theta.params.size(); ++i) {
            theta.params[i] += 0.05 * g.d_params[i];
        }
    }
    REQUIRE(log_ratio(theta, ref, prefix, completion) > 0.0);

    pair.sign = 1;
    const double loss_plus = rpo_loss(theta, ref, pair, 0.1).loss;
    pair.sign = -1;
    const double loss_minus = rpo_loss(theta, ref, pair, 0.1).loss;
    CHECK(loss_plus < loss_minus);

    pair.sign = 2;
    CHECK_THROWS_AS(rpo_loss(theta, ref, pair, 0.1), ValidationError);
}

TEST_CASE("reward_decompose satisfies the chain rule") {
    SplitMix64 rng(91);
    for (int trial = 0; trial < 10; ++trial) {
        Policy ref = test::tiny_policy(910 + trial);
        Policy theta = test::tiny_policy(990 + trial);
        PreferencePair pair = sample_pair(ref.vocab);
        const double beta = 0.2;

        BayesDecomposition d = reward_decompose(theta, ref, pair.x,
                                                pair.retrieved_docs, pair.y_w, beta);
        CHECK(std::fabs(d.residual_theta) < 1e-10);
        CHECK(std::fabs(d.residual_ref) < 1e-10);

        // the two ratio terms recompose the independently recomputed joint
        const TokenSeq prefix = query_prefix(theta.vocab, pair.x);
        TokenSeq joint = retrieval_completion(theta.vocab, pair.retrieved_docs);
        joint.insert(joint.end(), pair.y_w.begin(), pair.y_w.end());
        const double joint_ratio = beta * log_ratio(theta, ref, prefix, joint);
        CHECK(d.generation_ratio + d.retrieval_ratio ==
              doctest::Approx(joint_ratio).epsilon(1e-10));
        CHECK(d.joint_ratio == doctest::Approx(joint_ratio).epsilon(1e-12));
    }

    Policy ref = test::tiny_policy(95);
    PreferencePair pair = sample_pair(ref.vocab);
    BayesDecomposition same =
        reward_decompose(ref, ref, pair.x, pair.retrieved_docs, pair.y_w, 0.2);
    CHECK(same.generation_ratio == 0.0);
    CHECK(same.retrieval_ratio == 0.0);
}

TEST_CASE("rlhf diagnostic: identity at theta == ref, KL non-negative") {
    Policy ref = test::tiny_policy(101);
    const Vocab& vocab = ref.vocab;
    PreferencePair pair = sample_pair(vocab);
    const std::vector<TokenSeq> contexts{
        render_prompt(vocab, pair.x, {}),
        render_prompt(vocab, pair.x, pair.retrieved_docs)};

    // all two-token answers over a restricted alphabet
    std::vector<TokenSeq> space;
    const std::vector<TokenId> alphabet{vocab.id("t0"), vocab.id("t1"),
                                        vocab.id("t2"), vocab.end()};
    for (TokenId a : alphabet) {
        for (TokenId b : alphabet) {
            space.push_back({a, b});
        }
    }
    auto reward = [&](const TokenSeq&, const TokenSeq& y) {
        return y[0] == vocab.id("t1") ? 2.0 : -1.0;
    };

    RlhfDiagnostic same = rlhf_objective_diagnostic(ref, ref, contexts, reward, 0.5, space);
    CHECK(same.kl == 0.0);
    CHECK(same.objective == same.expected_reward);

    // independent expectation under ref for the first context
    {
        std::vector<double> lp;
        for (const TokenSeq& y : space) {
            lp.push_back(sequence_logprob(ref, contexts[0], y).total);
        }
        const double lse = log_sum_exp(lp);
        double expect = 0.0;
        for (size_t i = 0; i < space.size(); ++i) {
            expect += std::exp(lp[i] - lse) * reward(contexts[0], space[i]);
        }
        RlhfDiagnostic only_first =
            rlhf_objective_diagnostic(ref, ref, {contexts[0]}, reward, 0.5, space);
        CHECK(only_first.expected_reward == doctest::Approx(expect).epsilon(1e-12));
    }

    for (int trial = 0; trial < 20; ++trial) {
        Policy theta = test::tiny_policy(1100 + trial);
        RlhfDiagnostic d =
            rlhf_objective_diagnostic(theta, ref, contexts, reward, 0.5, space);
        CHECK(d.kl >= 0.0);
        CHECK(d.objective == doctest::Approx(d.expected_reward - 0.5 * d.kl));
    }

    // reversed enumeration order agrees
    Policy theta = test::tiny_policy(1200);
    std::vector<TokenSeq> reversed(space.rbegin(), space.rend());
    RlhfDiagnostic a = rlhf_objective_diagnostic(theta, ref, contexts, reward, 0.5, space);
    RlhfDiagnostic b =
        rlhf_objective_diagnostic(theta, ref, contexts, reward, 0.5, reversed);
    CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-10));

    CHECK_THROWS_AS(rlhf_objective_diagnostic(theta, ref, contexts, reward, 0.5, {}),
                    ValidationError);
    std::vector<TokenSeq> huge(kMaxAnswerSpace + 1, TokenSeq{0});
    CHECK_THROWS_AS(rlhf_objective_diagnostic(theta, ref, contexts, reward, 0.5, huge),
                    ValidationError);
}

TEST_CASE("rpo_breakdown mirrors the loss margin") {
    Policy ref = test::tiny_policy(111);
    Policy theta = test::tiny_policy(112);
    PreferencePair pair = sample_pair(ref.vocab, -1);
    RewardBreakdown b = rpo_breakdown(theta, ref, pair, 0.25);
    CHECK(b.doc_len == 3);
    CHECK(b.beta == 0.25);
    LossValue v = rpo_loss(theta, ref, pair, 0.25);
    CHECK(v.loss == doctest::Approx(softplus(-b.margin())).epsilon(1e-12));
}
