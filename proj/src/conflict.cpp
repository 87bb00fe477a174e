#include "rpo/conflict.hpp"

#include <algorithm>

#include "rpo/errors.hpp"
#include "rpo/prompt.hpp"
#include "rpo/rng.hpp"

namespace rpo {

namespace {

bool contains_run(const TokenSeq& haystack, const TokenSeq& needle) {
    if (needle.empty() || needle.size() > haystack.size()) {
        return false;
    }
    return std::search(haystack.begin(), haystack.end(), needle.begin(),
                       needle.end()) != haystack.end();
}

} // namespace

void validate_pair(const PreferencePair& pair) {
    if (pair.sign != 1 && pair.sign != -1) {
        throw ValidationError("preference pair sign must be +1 or -1");
    }
    if (pair.y_w == pair.y_l) {
        throw ValidationError("preference pair answers must differ");
    }
    if (pair.retrieved_docs.empty()) {
        throw ValidationError("preference pair needs at least one document");
    }
    if (pair.y_w.empty() || pair.y_l.empty()) {
        throw ValidationError("preference pair answers must be non-empty");
    }
}

std::pair<TokenSeq, TokenSeq> generate_pair(const Policy& policy,
                                            const TokenSeq& x,
                                            const std::vector<Document>& docs,
                                            int max_len) {
    const TokenSeq closed_book = render_prompt(policy.vocab, x, {});
    std::vector<TokenSeq> doc_tokens;
    doc_tokens.reserve(docs.size());
    for (const Document& doc : docs) {
        doc_tokens.push_back(doc.tokens);
    }
    const TokenSeq with_docs = render_prompt(policy.vocab, x, doc_tokens);
    return {greedy_decode(policy, closed_book, max_len),
            greedy_decode(policy, with_docs, max_len)};
}

int accuracy(const TokenSeq& answer, const TokenSeq& gold, AccuracyMode mode,
             TokenId end_marker) {
    if (gold.empty()) {
        throw ValidationError("gold answer must be non-empty");
    }
    if (mode == AccuracyMode::subsequence) {
        return contains_run(answer, gold) ? 1 : 0;
    }
    TokenSeq trimmed = answer;
    if (end_marker >= 0 && !trimmed.empty() && trimmed.back() == end_marker) {
        trimmed.pop_back();
    }
    return trimmed == gold ? 1 : 0;
}

bool detect_conflict(const ConflictRecord& record) {
    return record.acc_p + record.acc_np == 1;
}

bool contains_gold(const std::vector<Document>& docs, const TokenSeq& gold) {
    for (const Document& doc : docs) {
        if (contains_run(doc.tokens, gold)) {
            return true;
        }
    }
    return false;
}

bool in_d1(const ConflictRecord& record) {
    return record.acc_np > record.acc_p && record.gold_in_docs;
}

bool in_d2(const ConflictRecord& record) {
    return record.acc_p > record.acc_np;
}

Subsets build_subsets(const std::vector<ConflictRecord>& records) {
    Subsets subsets;
    for (const ConflictRecord& record : records) {
        if (in_d1(record)) {
            subsets.d1.push_back(record);
        } else if (in_d2(record)) {
            subsets.d2.push_back(record);
        }
    }
    return subsets;
}

PreferencePair make_preference_pair(const ConflictRecord& record) {
    PreferencePair pair;
    pair.x = record.x;
    pair.question_id = record.question_id;
    for (const Document& doc : record.docs) {
        pair.retrieved_docs.push_back(doc.tokens);
    }
    if (in_d1(record)) {
        pair.y_w = record.y_np;
        pair.y_l = record.y_p;
        pair.sign = 1;
    } else if (in_d2(record)) {
        pair.y_w = record.y_p;
        pair.y_l = record.y_np;
        pair.sign = -1;
    } else {
        throw ValidationError("record belongs to neither preference subset");
    }
    validate_pair(pair);
    return pair;
}

std::vector<PreferencePair> build_preference_pairs(const Subsets& subsets) {
    std::vector<PreferencePair> pairs;
    pairs.reserve(subsets.d1.size() + subsets.d2.size());
    for (const ConflictRecord& record : subsets.d1) {
        pairs.push_back(make_preference_pair(record));
    }
    for (const ConflictRecord& record : subsets.d2) {
        pairs.push_back(make_preference_pair(record));
    }
    return pairs;
}

std::vector<ConflictRecord> collect_records(const World& world,
                                            const Policy& policy,
                                            const CollectOptions& options) {
    if (!(world.vocab == policy.vocab)) {
        throw ValidationError("world and policy vocabularies differ");
    }
    std::vector<ConflictRecord> records;
    records.reserve(world.questions.size());
    for (size_t i = 0; i < world.questions.size(); ++i) {
        const Question& q = world.questions[i];
        ConflictRecord record;
        record.question_id = static_cast<int>(i);
        record.x = q.x;
        record.gold = q.gold;
        record.docs = retrieve(world, q.x, options.k, options.noise,
                               derive_seed(options.seed, i));
        auto [y_p, y_np] =
            generate_pair(policy, q.x, record.docs, options.max_answer_len);
        record.y_p = std::move(y_p);
        record.y_np = std::move(y_np);
        record.acc_p = accuracy(record.y_p, q.gold, options.accuracy_mode,
                                policy.vocab.end());
        record.acc_np = accuracy(record.y_np, q.gold, options.accuracy_mode,
                                 policy.vocab.end());
        record.gold_in_docs = contains_gold(record.docs, q.gold);
        records.push_back(std::move(record));
    }
    return records;
}

CollectSummary summarize_records(const std::vector<ConflictRecord>& records) {
    CollectSummary s;
    s.total = records.size();
    for (const ConflictRecord& record : records) {
        if (detect_conflict(record)) {
            ++s.conflicts;
        }
        if (in_d1(record)) {
            ++s.d1;
        } else if (in_d2(record)) {
            ++s.d2;
        }
        if (record.acc_p == 1 && record.acc_np == 1) {
            ++s.cluster_a;
        } else if (record.acc_p == 1) {
            ++s.cluster_b;
        } else if (record.acc_np == 1) {
            ++s.cluster_c;
        } else {
            ++s.cluster_d;
        }
    }
    return s;
}

std::vector<ConflictRecord> filter_conflicts(
    const std::vector<ConflictRecord>& records) {
    std::vector<ConflictRecord> out;
    for (const ConflictRecord& record : records) {
        if (detect_conflict(record)) {
            out.push_back(record);
        }
    }
    return out;
}

double qa_accuracy(const Policy& policy, const std::vector<ConflictRecord>& records,
                   bool rag, int max_len, AccuracyMode mode) {
    if (records.empty()) {
        throw ValidationError("evaluation set is empty");
    }
    size_t correct = 0;
    for (const ConflictRecord& record : records) {
        std::vector<TokenSeq> doc_tokens;
        if (rag) {
            for (const Document& doc : record.docs) {
                doc_tokens.push_back(doc.tokens);
            }
        }
        const TokenSeq prompt = render_prompt(policy.vocab, record.x, doc_tokens);
        const TokenSeq answer = greedy_decode(policy, prompt, max_len);
        correct += static_cast<size_t>(
            accuracy(answer, record.gold, mode, policy.vocab.end()));
    }
    return static_cast<double>(correct) / static_cast<double>(records.size());
}

} // namespace rpo
