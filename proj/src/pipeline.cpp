#include "rpo/pipeline.hpp"

#include "rpo/errors.hpp"
#include "rpo/rng.hpp"

namespace rpo {

PipelineConfig default_pipeline_config() {
    PipelineConfig config;
    config.world_spec.n_facts = 600;
    config.world_spec.n_relations = 5;
    config.world_spec.n_values = 30;
    config.world_spec.docs_per_fact = 1;
    config.world_spec.corruption_rate = 0.3;
    config.world_spec.stale_rate = 0.3;
    config.world_spec.k_default = 2;

    config.arch = {14, 10, 48};

    config.pretrain_cfg.phase = Phase::pretrain;
    config.pretrain_cfg.steps = 9000;
    config.pretrain_cfg.lr = 0.35;
    config.pretrain_cfg.batch_size = 16;
    config.pretrain_cfg.doc_fraction = 1.0;
    config.pretrain_cfg.doc_noise = 0.2;

    config.sft_cfg.phase = Phase::sft;
    config.sft_cfg.steps = 1500;
    config.sft_cfg.lr = 0.12;
    config.sft_cfg.batch_size = 16;

    config.rpo_cfg.phase = Phase::rpo;
    config.rpo_cfg.steps = 1200;
    config.rpo_cfg.lr = 0.08;
    config.rpo_cfg.batch_size = 16;
    config.rpo_cfg.beta = 0.1;
    config.rpo_cfg.loss_variant = LossVariant::rpo;

    config.collect_k = 2;
    config.collect_noise = 0.2;
    config.eval_noise = 0.2;
    return config;
}

namespace {

CollectOptions collect_options(const PipelineConfig& config, uint64_t seed) {
    CollectOptions options;
    options.k = config.collect_k;
    options.noise = config.collect_noise;
    options.seed = seed;
    options.max_answer_len = config.max_answer_len;
    return options;
}

} // namespace

PipelineArtifacts run_pipeline(const PipelineConfig& config) {
    World world = gen_world(config.world_spec, config.world_seed);
    Policy init = init_policy(config.arch, world.vocab, config.policy_seed);

    Policy base = pretrain(init, world, config.pretrain_cfg);

    // phase 1: collect conflicts with the base policy, fine-tune on them
    PipelineArtifacts art{std::move(world), std::move(base), init, init,
                          {},  {}, {}, {}, {}, 0.0, 0.0, 0.0};
    art.records_base =
        collect_records(art.world, art.base, collect_options(config, config.collect_seed));
    art.sft_train = filter_conflicts(art.records_base);
    if (art.sft_train.empty()) {
        throw ValidationError("pipeline produced no knowledge conflicts for SFT");
    }
    art.pi_sft = sft(art.base, art.sft_train, config.sft_cfg);

    // phase 2: re-collect with the tuned policy (same retrieval streams),
    // build preference pairs, optimize
    art.records_sft = collect_records(art.world, art.pi_sft,
                                      collect_options(config, config.collect_seed));
    art.pairs_rpo.pairs = build_preference_pairs(build_subsets(art.records_sft));
    art.pairs_rpo.collector_hash = param_hash_hex(art.pi_sft);
    if (art.pairs_rpo.pairs.empty()) {
        throw ValidationError("pipeline produced no preference pairs for RPO");
    }
    art.pi_rpo = rpo_train(art.pi_sft, art.pairs_rpo, config.rpo_cfg);

    // evaluation on fresh retrievals
    CollectOptions eval_opts = collect_options(config, config.eval_seed);
    eval_opts.noise = config.eval_noise;
    art.eval_records = collect_records(art.world, art.base, eval_opts);
    art.acc_base =
        qa_accuracy(art.base, art.eval_records, /*rag=*/true, config.max_answer_len);
    art.acc_sft =
        qa_accuracy(art.pi_sft, art.eval_records, /*rag=*/true, config.max_answer_len);
    art.acc_rpo =
        qa_accuracy(art.pi_rpo, art.eval_records, /*rag=*/true, config.max_answer_len);
    return art;
}

std::vector<AblationRow> ablation_suite(const PipelineConfig& config) {
    PipelineArtifacts art = run_pipeline(config);

    auto eval_both = [&](const Policy& policy, const std::string& arm) {
        AblationRow row;
        row.arm = arm;
        row.rag_accuracy =
            qa_accuracy(policy, art.eval_records, /*rag=*/true, config.max_answer_len);
        row.closed_book_accuracy =
            qa_accuracy(policy, art.eval_records, /*rag=*/false, config.max_answer_len);
        return row;
    };

    std::vector<AblationRow> table;
    table.push_back(eval_both(art.pi_rpo, "full"));

    // drop the retrieval-awareness term, same pairs and budget
    {
        TrainConfig cfg = config.rpo_cfg;
        cfg.loss_variant = LossVariant::rpo_no_ra;
        Policy wo_ra = rpo_train(art.pi_sft, art.pairs_rpo, cfg);
        table.push_back(eval_both(wo_ra, "wo_ra"));
    }

    // stop after the fine-tuning phase
    table.push_back(eval_both(art.pi_sft, "wo_po"));

    // preference-train the base policy directly on its own conflicts
    {
        PairSet base_pairs;
        base_pairs.pairs = build_preference_pairs(build_subsets(art.records_base));
        base_pairs.collector_hash = param_hash_hex(art.base);
        if (base_pairs.pairs.empty()) {
            throw ValidationError("no preference pairs for the wo_sft arm");
        }
        Policy wo_sft = rpo_train(art.base, base_pairs, config.rpo_cfg);
        table.push_back(eval_both(wo_sft, "wo_sft"));
    }

    // fine-tune without the conflict filter, same step budget
    {
        TrainConfig cfg = config.sft_cfg;
        cfg.sft_filter = false;
        Policy unfiltered = sft(art.base, art.records_base, cfg);
        table.push_back(eval_both(unfiltered, "sft_no_filter"));
    }
    return table;
}

} // namespace rpo
