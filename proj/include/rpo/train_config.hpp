#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace rpo {

enum class Phase { pretrain, sft, rpo, dpo };
enum class LossVariant { rpo, rpo_no_ra, dpo };

Phase parse_phase(const std::string& s);
std::string phase_name(Phase phase);
LossVariant parse_loss_variant(const std::string& s);
std::string loss_variant_name(LossVariant variant);

// Flat key=value training configuration. Unknown keys are rejected so a typo
// never silently falls back to a default.
struct TrainConfig {
    Phase phase = Phase::pretrain;
    double beta = 0.1;
    double lr = 0.1;
    int steps = 1000;
    int batch_size = 8;
    uint64_t seed = 0;
    int eval_every = 0; // 0 = final evaluation only
    LossVariant loss_variant = LossVariant::rpo;
    double momentum = 0.0; // 0 = plain SGD
    int max_answer_len = 4;
    bool sft_filter = true;        // train only on knowledge-conflict records
    double doc_fraction = 0.5;     // pretrain: share of doc-conditioned examples
    double doc_noise = 0.2;        // pretrain: retrieval noise for those examples
    bool normalize_generation_terms = false; // length-normalize terms (a)/(b) too

    void validate() const;

    static TrainConfig from_string(const std::string& text);
    static TrainConfig from_file(const std::string& path);
    std::string to_string() const;
};

// Generic "key=value per line, # comments" parser shared by the train and
// world spec files.
std::map<std::string, std::string> parse_key_value_text(const std::string& text);
std::map<std::string, std::string> read_key_value_file(const std::string& path);

} // namespace rpo
