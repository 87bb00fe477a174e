#pragma once

#include <string>
#include <vector>

#include "rpo/analysis.hpp"
#include "rpo/conflict.hpp"
#include "rpo/trainer.hpp"
#include "rpo/world.hpp"

namespace rpo {

// The whole two-phase procedure wired together: generate a world, pretrain a
// base policy, collect conflicts, fine-tune, re-collect with the tuned
// policy, preference-train, evaluate on fresh retrievals.
struct PipelineConfig {
    WorldSpec world_spec;
    ArchConfig arch{14, 10, 48};
    uint64_t world_seed = 1;
    uint64_t policy_seed = 1;
    TrainConfig pretrain_cfg;
    TrainConfig sft_cfg;
    TrainConfig rpo_cfg;
    int collect_k = 2;
    double collect_noise = 0.2;
    uint64_t collect_seed = 1; // reused for both collection passes
    uint64_t eval_seed = 2;    // fresh retrievals for evaluation
    double eval_noise = 0.2;
    int max_answer_len = 4;
};

PipelineConfig default_pipeline_config();

struct PipelineArtifacts {
    World world;
    Policy base;
    Policy pi_sft;
    Policy pi_rpo;
    std::vector<ConflictRecord> records_base; // all records, base collection
    std::vector<ConflictRecord> sft_train;    // conflict-filtered
    PairSet pairs_rpo;                        // collected with pi_sft
    std::vector<ConflictRecord> records_sft;  // all records, sft collection
    std::vector<ConflictRecord> eval_records; // fresh retrievals
    double acc_base = 0.0; // RAG accuracy on the eval records
    double acc_sft = 0.0;
    double acc_rpo = 0.0;
};

PipelineArtifacts run_pipeline(const PipelineConfig& config);

struct AblationRow {
    std::string arm;
    double rag_accuracy = 0.0;
    double closed_book_accuracy = 0.0;
};

// Five arms sharing the expensive stages: full, without the retrieval term,
// without preference optimization, without the fine-tuning phase, and
// fine-tuning without conflict filtering.
std::vector<AblationRow> ablation_suite(const PipelineConfig& config);

} // namespace rpo
