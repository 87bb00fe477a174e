#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rpo/analysis.hpp"
#include "rpo/errors.hpp"
#include "rpo/losses.hpp"
#include "rpo/pipeline.hpp"
#include "rpo/prompt.hpp"
#include "test_util.hpp"

using namespace rpo;

namespace {

WorldSpec demo_spec() {
    WorldSpec spec;
    spec.n_facts = 40;
    spec.n_relations = 4;
    spec.n_values = 10;
    spec.docs_per_fact = 1;
    spec.corruption_rate = 0.3;
    spec.stale_rate = 0.2;
    spec.k_default = 2;
    return spec;
}

} // namespace

TEST_CASE("enumerate_sequences counts and caps") {
    std::vector<TokenId> alphabet{0, 1, 2};
    auto seqs = enumerate_sequences(alphabet, 1, 3, 100000);
    CHECK(seqs.size() == 3 + 9 + 27);
    auto exact = enumerate_sequences(alphabet, 2, 2, 100000);
    CHECK(exact.size() == 9);
    CHECK_THROWS_AS(enumerate_sequences(alphabet, 1, 15, 1000), ValidationError);
    CHECK_THROWS_AS(enumerate_sequences({}, 1, 2, 100), ValidationError);
}

TEST_CASE("partition_function anchors") {
    Policy ref = test::tiny_policy(3);
    const Vocab& vocab = ref.vocab;
    TokenSeq ctx{vocab.query_begin(), vocab.id("t0"), vocab.answer_begin()};

    // full support: every length-2 sequence over the whole vocabulary sums
    // to probability one, so with zero reward log Z == 0
    std::vector<TokenId> all;
    for (TokenId t = 0; t < vocab.size(); ++t) {
        all.push_back(t);
    }
    auto full_space = enumerate_sequences(all, 2, 2, kMaxAnswerSpace);
    auto zero_reward = [](const TokenSeq&) { return 0.0; };
    const double log_z0 = partition_function(ref, ctx, zero_reward, 0.5, full_space);
    CHECK(std::fabs(log_z0) < 1e-10);

    // constant reward c shifts log Z by exactly c / beta
    auto const_reward = [](const TokenSeq&) { return 0.7; };
    const double log_zc = partition_function(ref, ctx, const_reward, 0.5, full_space);
    CHECK(log_zc == doctest::Approx(0.7 / 0.5 + log_z0).epsilon(1e-10));

    // reversed enumeration order agrees
    auto reward = hashed_reward(99);
    std::vector<TokenSeq> reversed(full_space.rbegin(), full_space.rend());
    const double a = partition_function(ref, ctx, reward, 0.5, full_space);
    const double b = partition_function(ref, ctx, reward, 0.5, reversed);
    CHECK(a == doctest::Approx(b).epsilon(1e-10));

    CHECK_THROWS_AS(partition_function(ref, ctx, reward, 0.5, {}), ValidationError);
}

TEST_CASE("partition gaps: zero on identical contexts, positive across modes") {
    World world = gen_world(demo_spec(), 3);

    // identical-context control: same context twice, gap exactly zero
    {
        Policy policy = init_policy({6, 6, 12}, world.vocab, 17);
        std::vector<TokenId> alphabet;
        for (int v = 0; v < world.spec.n_values; ++v) {
            alphabet.push_back(world.value_token(v));
        }
        auto space = enumerate_sequences(alphabet, 1, 2, kMaxAnswerSpace);
        auto reward = hashed_reward(5);
        const TokenSeq ctx = render_prompt(world.vocab, world.questions[0].x, {});
        const double za = partition_function(policy, ctx, reward, 0.1, space);
        const double zb = partition_function(policy, ctx, reward, 0.1, space);
        CHECK(za == zb);
    }

    PartitionDemoConfig config;
    config.n_samples = 50;
    config.beta = 0.1;
    config.seed = 7;
    auto reports = partition_gap_demo(world, config);
    REQUIRE(reports.size() == 50);
    size_t big = 0;
    for (const PartitionReport& r : reports) {
        CHECK(r.enumeration_size == 110); // 10 + 100
        big += r.gap > 0.01;
    }
    CHECK(big >= 45); // >= 90%

    // adding a constant to all rewards leaves every gap unchanged: both
    // log Z values shift by c/beta
    {
        Policy policy = init_policy({6, 6, 12}, world.vocab, 23);
        for (double& p : policy.params) {
            p *= 15.0;
        }
        std::vector<TokenId> alphabet;
        for (int v = 0; v < world.spec.n_values; ++v) {
            alphabet.push_back(world.value_token(v));
        }
        auto space = enumerate_sequences(alphabet, 1, 2, kMaxAnswerSpace);
        auto base_reward = hashed_reward(5);
        auto shifted = [&](const TokenSeq& y) { return base_reward(y) + 3.0; };
        const Question& q = world.questions[4];
        auto docs = retrieve(world, q.x, 2, 0.0, 9);
        std::vector<TokenSeq> doc_tokens;
        for (const Document& d : docs) {
            doc_tokens.push_back(d.tokens);
        }
        const TokenSeq ctx_q = render_prompt(world.vocab, q.x, {});
        const TokenSeq ctx_d = render_prompt(world.vocab, q.x, doc_tokens);
        const double gap_base =
            std::fabs(partition_function(policy, ctx_q, base_reward, 0.1, space) -
                      partition_function(policy, ctx_d, base_reward, 0.1, space));
        const double gap_shift =
            std::fabs(partition_function(policy, ctx_q, shifted, 0.1, space) -
                      partition_function(policy, ctx_d, shifted, 0.1, space));
        CHECK(gap_base == doctest::Approx(gap_shift).epsilon(1e-9));
    }
}

TEST_CASE("construct_pathology satisfies its constraints") {
    Vocab vocab = test::tiny_vocab(11); // V = 16

    PathologyInstance inst = construct_pathology(-0.5, 5.0, vocab, 1);
    CHECK(inst.logp_n > -0.5);
    CHECK(inst.logp_p < -0.5);
    CHECK(inst.logp_n - inst.logp_p >= 5.0);

    // the misleading document states the entrenched answer
    bool doc_mentions_y_n = false;
    for (const TokenSeq& doc : inst.docs) {
        for (TokenId t : doc) {
            doc_mentions_y_n |= t == inst.y_n[0];
        }
    }
    CHECK(doc_mentions_y_n);

    CHECK_THROWS_AS(construct_pathology(0.5, 1.0, vocab, 1), ValidationError);
    CHECK_THROWS_AS(construct_pathology(0.0, 1.0, vocab, 1), ValidationError);
    CHECK_THROWS_AS(construct_pathology(-1e-9, 1.0, vocab, 1), ValidationError);
    CHECK_THROWS_AS(construct_pathology(-0.5, -1.0, vocab, 1), ValidationError);
}

TEST_CASE("pathology_run contracts and the anchored-vs-free contrast") {
    Vocab vocab = test::tiny_vocab(11);
    PathologyInstance inst = construct_pathology(-0.5, 3.0, vocab, 2);

    TrainConfig frozen;
    frozen.phase = Phase::dpo;
    frozen.beta = 10.0;
    frozen.lr = 0.0;
    frozen.steps = 10;
    auto still = pathology_run(inst, LossVariant::dpo, frozen);
    CHECK_FALSE(still.ranking_flipped);
    CHECK(still.eps_ad == 0.0);
    CHECK(still.final_margin == doctest::Approx(still.initial_margin));

    // paired runs over ten constructions: the strongly anchored baseline
    // drifts a little and never flips; the retrieval-aware loss at its
    // default operating point flips
    int dpo_flips = 0, rpo_flips = 0, premise = 0;
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        PathologyInstance pi = construct_pathology(-0.5, 3.0, vocab, seed);
        TrainConfig dpo_cfg;
        dpo_cfg.phase = Phase::dpo;
        dpo_cfg.beta = 10.0; // strong implicit anchor
        dpo_cfg.lr = 0.1;
        dpo_cfg.steps = 400;
        auto dr = pathology_run(pi, LossVariant::dpo, dpo_cfg);
        TrainConfig rpo_cfg = dpo_cfg;
        rpo_cfg.phase = Phase::rpo;
        rpo_cfg.beta = 0.1; // the default operating point
        auto rr = pathology_run(pi, LossVariant::rpo, rpo_cfg);
        dpo_flips += dr.ranking_flipped;
        rpo_flips += rr.ranking_flipped;
        premise += pi.eps_d > 2.0 * dr.eps_ad;
    }
    CHECK(premise == 10);   // measured drift satisfies the inequality premise
    CHECK(dpo_flips == 0);
    CHECK(rpo_flips > dpo_flips);
}

TEST_CASE("bayes residual is float noise for any policy") {
    Policy policy = test::tiny_policy(77, 8, {5, 4, 8});
    auto samples = random_bayes_samples(policy.vocab, 1000, 3);
    REQUIRE(samples.size() == 1000);
    CHECK(bayes_residual_sweep(policy, samples) < 1e-10);

    // single-token retrieval and answer
    BayesSample one;
    one.x = {policy.vocab.id("t0")};
    one.docs = {{policy.vocab.id("t1")}};
    one.y = {policy.vocab.id("t2")};
    CHECK(bayes_residual_sweep(policy, {one}) < 1e-12);

    CHECK_THROWS_AS(bayes_residual_sweep(policy, {}), ValidationError);
}

TEST_CASE("cluster_report proportions and definitional accuracies") {
    World world = gen_world(demo_spec(), 5);
    Policy policy = init_policy({10, 8, 24}, world.vocab, 3);
    TrainConfig pre;
    pre.steps = 800;
    pre.lr = 0.3;
    pre.batch_size = 8;
    pre.seed = 4;
    Policy base = pretrain(policy, world, pre);

    CollectOptions options;
    options.k = 2;
    options.noise = 0.2;
    options.seed = 21;
    auto records = collect_records(world, base, options);

    ClusterReport report = cluster_report(base, records);
    CHECK(report.total == records.size());
    double sum = 0.0;
    for (double p : report.proportions) {
        sum += p;
    }
    CHECK(std::fabs(sum - 1.0) < 1e-9);

    // decoding is deterministic, so the collecting policy reproduces its own
    // stored answers: cluster B scores 0, cluster C scores 1
    if (report.counts[1] > 0) {
        CHECK(report.rag_accuracy[1] == 0.0);
    }
    if (report.counts[2] > 0) {
        CHECK(report.rag_accuracy[2] == 1.0);
    }
    if (report.counts[0] > 0) {
        CHECK(report.rag_accuracy[0] == 1.0);
    }

    // all-A eval set -> proportion 1.0
    std::vector<ConflictRecord> all_a;
    for (const ConflictRecord& r : records) {
        if (r.acc_p == 1 && r.acc_np == 1) {
            all_a.push_back(r);
        }
    }
    if (!all_a.empty()) {
        ClusterReport a_only = cluster_report(base, all_a);
        CHECK(a_only.proportions[0] == 1.0);
    }

    CHECK_THROWS_AS(cluster_report(base, {}), ValidationError);
}

TEST_CASE("mini pipeline end to end") {
    PipelineConfig config = default_pipeline_config();
    config.world_spec.n_facts = 60;
    config.world_spec.n_values = 12;
    config.arch = {14, 8, 32};
    config.pretrain_cfg.steps = 1500;
    config.sft_cfg.steps = 400;
    config.rpo_cfg.steps = 300;
    config.world_seed = 3;
    config.policy_seed = 4;

    PipelineArtifacts art = run_pipeline(config);
    CHECK(art.records_base.size() == 60);
    for (const ConflictRecord& r : art.sft_train) {
        CHECK(detect_conflict(r));
    }
    for (const PreferencePair& p : art.pairs_rpo.pairs) {
        CHECK((p.sign == 1 || p.sign == -1));
        CHECK(p.y_w != p.y_l);
    }
    CHECK(art.acc_base >= 0.0);
    CHECK(art.acc_base <= 1.0);
    CHECK(art.acc_sft >= 0.0);
    CHECK(art.acc_rpo <= 1.0);
    // the tuned policies should not be worse than the base on this world
    CHECK(art.acc_sft >= art.acc_base);

    // ablation arms share the pipeline; five rows, sane metrics
    auto table = ablation_suite(config);
    CHECK(table.size() == 5);
    for (const AblationRow& row : table) {
        CHECK(row.rag_accuracy >= 0.0);
        CHECK(row.rag_accuracy <= 1.0);
        CHECK(row.closed_book_accuracy >= 0.0);
        CHECK(row.closed_book_accuracy <= 1.0);
    }
    CHECK(table[0].arm == "full");
    CHECK(table[2].arm == "wo_po");
}
