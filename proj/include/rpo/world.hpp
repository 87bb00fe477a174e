#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "rpo/vocab.hpp"

namespace rpo {

// Knobs for the synthetic fact base. Corruption and staleness are honored as
// exact rounded counts, not expectations.
struct WorldSpec {
    int n_facts = 100;
    int n_relations = 5;
    int n_values = 20;      // distinct answer symbols
    int docs_per_fact = 1;
    double corruption_rate = 0.0; // fraction of corpus docs stating a wrong value
    double stale_rate = 0.0;      // fraction of facts memorized wrong in pretraining
    int k_default = 2;            // default retrieval depth
};

struct Fact {
    int subject = 0;
    int relation = 0;
    int value = 0;       // index into the value symbols
    int stale_value = -1; // wrong value taught during pretraining, -1 = none
};

struct Document {
    int doc_id = 0;
    int fact_id = 0;
    TokenSeq tokens;        // [subject relation stated_value]
    bool corrupted = false; // stated value differs from the true one

    bool operator==(const Document&) const = default;
};

struct Question {
    int fact_id = 0;
    TokenSeq x;    // [subject relation]
    TokenSeq gold; // [true value]
};

// Synthetic world: facts, a document corpus with controlled corruption, and
// one question per fact. Pure function of (spec, seed).
struct World {
    World(WorldSpec spec_in, Vocab vocab_in)
        : spec(spec_in), vocab(std::move(vocab_in)) {}

    WorldSpec spec;
    Vocab vocab;
    std::vector<Fact> facts;
    std::vector<Document> corpus;
    std::vector<Question> questions;

    TokenId subject_token(int subject) const;
    TokenId relation_token(int relation) const;
    TokenId value_token(int value) const;

    // fact looked up from query tokens; throws if x matches no question
    int fact_for_query(const TokenSeq& x) const;
    const std::vector<int>& docs_of_fact(int fact_id) const;

    void rebuild_index(); // called by gen_world and the loader

  private:
    std::unordered_map<int64_t, int> query_index_;
    std::vector<std::vector<int>> fact_docs_;
};

World gen_world(const WorldSpec& spec, uint64_t seed);

// Simulated retriever: each of the K slots independently returns a document
// about the queried fact with probability 1-noise, otherwise a document about
// some other fact. Deterministic given the seed.
std::vector<Document> retrieve(const World& world, const TokenSeq& x, int k,
                               double noise, uint64_t seed);

} // namespace rpo
