#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rpo/policy.hpp"
#include "rpo/world.hpp"

namespace rpo {

enum class AccuracyMode {
    subsequence, // gold appears as a contiguous run inside the answer
    exact,       // answer (with a trailing [END] stripped) equals gold
};

// One question with its closed-book answer y_p, retrieval-conditioned answer
// y_np, and the judgments the filters run on.
struct ConflictRecord {
    int question_id = -1;
    TokenSeq x;
    TokenSeq gold;
    std::vector<Document> docs;
    TokenSeq y_p;
    TokenSeq y_np;
    int acc_p = 0;
    int acc_np = 0;
    bool gold_in_docs = false;
};

// The training unit of the preference losses. sign is +1 when the
// retrieval-conditioned answer won (y_w = y_np), -1 when the parametric
// answer won (y_w = y_p).
struct PreferencePair {
    TokenSeq x;
    std::vector<TokenSeq> retrieved_docs;
    TokenSeq y_w;
    TokenSeq y_l;
    int sign = 0;
    int question_id = -1;
};

void validate_pair(const PreferencePair& pair);

// (y_p, y_np): greedy answers without and with the retrieved documents.
std::pair<TokenSeq, TokenSeq> generate_pair(const Policy& policy,
                                            const TokenSeq& x,
                                            const std::vector<Document>& docs,
                                            int max_len);

// Default mode judges by gold containment; exact mode compares the whole
// answer after stripping one trailing end marker (pass the marker id, or -1
// to compare verbatim).
int accuracy(const TokenSeq& answer, const TokenSeq& gold,
             AccuracyMode mode = AccuracyMode::subsequence,
             TokenId end_marker = -1);

// Exactly one of the two answers is correct.
bool detect_conflict(const ConflictRecord& record);

// Contiguous containment checked per document; a gold span crossing a
// document boundary does not count.
bool contains_gold(const std::vector<Document>& docs, const TokenSeq& gold);

// D1: retrieval fixed a parametric failure and the gold answer really is in
// the context. D2: retrieval broke an answer the model knew. Disjoint.
struct Subsets {
    std::vector<ConflictRecord> d1;
    std::vector<ConflictRecord> d2;
};

Subsets build_subsets(const std::vector<ConflictRecord>& records);

bool in_d1(const ConflictRecord& record);
bool in_d2(const ConflictRecord& record);

// Throws ValidationError if the record belongs to neither subset.
PreferencePair make_preference_pair(const ConflictRecord& record);

std::vector<PreferencePair> build_preference_pairs(const Subsets& subsets);

struct CollectOptions {
    int k = 2;
    double noise = 0.0;
    uint64_t seed = 0;
    int max_answer_len = 4;
    AccuracyMode accuracy_mode = AccuracyMode::subsequence;
};

// One record per world question. Retrieval uses a per-question substream
// (derive_seed(seed, question_id)), so records are independent of collection
// order and identical across runs.
std::vector<ConflictRecord> collect_records(const World& world,
                                            const Policy& policy,
                                            const CollectOptions& options);

struct CollectSummary {
    size_t total = 0;
    size_t conflicts = 0;
    size_t d1 = 0;
    size_t d2 = 0;
    size_t cluster_a = 0; // both answers correct
    size_t cluster_b = 0; // only parametric correct
    size_t cluster_c = 0; // only retrieval-conditioned correct
    size_t cluster_d = 0; // both wrong
};

CollectSummary summarize_records(const std::vector<ConflictRecord>& records);

std::vector<ConflictRecord> filter_conflicts(const std::vector<ConflictRecord>& records);

// Fraction of records the policy answers correctly when its answer is decoded
// fresh: with the record's documents (rag = true) or closed-book.
double qa_accuracy(const Policy& policy, const std::vector<ConflictRecord>& records,
                   bool rag, int max_len,
                   AccuracyMode mode = AccuracyMode::subsequence);

} // namespace rpo
