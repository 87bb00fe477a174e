#include "rpo/world.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "rpo/errors.hpp"
#include "rpo/rng.hpp"

namespace rpo {

namespace {

void check_spec(const WorldSpec& spec) {
    if (spec.n_facts < 10) {
        throw ValidationError("world needs at least 10 facts");
    }
    if (spec.n_relations < 1 || spec.n_values < 2 || spec.docs_per_fact < 1 ||
        spec.k_default < 1) {
        throw ValidationError("world spec dims must be positive (n_values >= 2)");
    }
    if (spec.corruption_rate < 0.0 || spec.corruption_rate > 1.0 ||
        spec.stale_rate < 0.0 || spec.stale_rate > 1.0) {
        throw ValidationError("rates must lie in [0,1]");
    }
}

int n_subjects_for(const WorldSpec& spec) {
    return (spec.n_facts + spec.n_relations - 1) / spec.n_relations;
}

// a value different from `avoid`, uniform over the rest
int other_value(SplitMix64& rng, int avoid, int n_values) {
    return (avoid + 1 +
            static_cast<int>(rng.next_below(static_cast<uint64_t>(n_values - 1)))) %
           n_values;
}

} // namespace

TokenId World::subject_token(int subject) const {
    return vocab.id("s" + std::to_string(subject));
}

TokenId World::relation_token(int relation) const {
    return vocab.id("r" + std::to_string(relation));
}

TokenId World::value_token(int value) const {
    return vocab.id("v" + std::to_string(value));
}

int World::fact_for_query(const TokenSeq& x) const {
    if (x.size() == 2) {
        const int64_t key = static_cast<int64_t>(x[0]) * vocab.size() + x[1];
        auto it = query_index_.find(key);
        if (it != query_index_.end()) {
            return it->second;
        }
    }
    throw ValidationError("query does not match any question in the world");
}

const std::vector<int>& World::docs_of_fact(int fact_id) const {
    if (fact_id < 0 || fact_id >= static_cast<int>(fact_docs_.size())) {
        throw ValidationError("fact id out of range");
    }
    return fact_docs_[static_cast<size_t>(fact_id)];
}

void World::rebuild_index() {
    query_index_.clear();
    for (size_t i = 0; i < questions.size(); ++i) {
        const TokenSeq& x = questions[i].x;
        if (x.size() != 2) {
            throw ValidationError("question query must be [subject relation]");
        }
        const int64_t key = static_cast<int64_t>(x[0]) * vocab.size() + x[1];
        if (!query_index_.emplace(key, questions[i].fact_id).second) {
            throw ValidationError("duplicate question query");
        }
    }
    fact_docs_.assign(facts.size(), {});
    for (const Document& doc : corpus) {
        if (doc.fact_id < 0 || doc.fact_id >= static_cast<int>(facts.size())) {
            throw ValidationError("document references a missing fact");
        }
        fact_docs_[static_cast<size_t>(doc.fact_id)].push_back(doc.doc_id);
    }
}

World gen_world(const WorldSpec& spec, uint64_t seed) {
    check_spec(spec);
    SplitMix64 rng(seed);

    const int n_subjects = n_subjects_for(spec);
    std::vector<std::string> symbols;
    for (int i = 0; i < n_subjects; ++i) {
        symbols.push_back("s" + std::to_string(i));
    }
    for (int i = 0; i < spec.n_relations; ++i) {
        symbols.push_back("r" + std::to_string(i));
    }
    for (int i = 0; i < spec.n_values; ++i) {
        symbols.push_back("v" + std::to_string(i));
    }

    World world(spec, Vocab::with_symbols(symbols));

    for (int i = 0; i < spec.n_facts; ++i) {
        Fact fact;
        fact.subject = i / spec.n_relations;
        fact.relation = i % spec.n_relations;
        fact.value = static_cast<int>(rng.next_below(static_cast<uint64_t>(spec.n_values)));
        world.facts.push_back(fact);
    }

    // exact stale count over facts
    {
        std::vector<int> order(static_cast<size_t>(spec.n_facts));
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        const long n_stale = std::lround(spec.stale_rate * spec.n_facts);
        for (long i = 0; i < n_stale; ++i) {
            Fact& fact = world.facts[static_cast<size_t>(order[static_cast<size_t>(i)])];
            fact.stale_value = other_value(rng, fact.value, spec.n_values);
        }
    }

    // corpus: docs_per_fact documents per fact, then an exact corrupted count
    for (int f = 0; f < spec.n_facts; ++f) {
        for (int d = 0; d < spec.docs_per_fact; ++d) {
            Document doc;
            doc.doc_id = static_cast<int>(world.corpus.size());
            doc.fact_id = f;
            world.corpus.push_back(doc);
        }
    }
    {
        std::vector<int> order(world.corpus.size());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        const long n_corrupt =
            std::lround(spec.corruption_rate * static_cast<double>(world.corpus.size()));
        for (long i = 0; i < n_corrupt; ++i) {
            world.corpus[static_cast<size_t>(order[static_cast<size_t>(i)])].corrupted = true;
        }
    }
    for (Document& doc : world.corpus) {
        const Fact& fact = world.facts[static_cast<size_t>(doc.fact_id)];
        const int stated = doc.corrupted
                               ? other_value(rng, fact.value, spec.n_values)
                               : fact.value;
        doc.tokens = {world.subject_token(fact.subject),
                      world.relation_token(fact.relation),
                      world.value_token(stated)};
    }

    for (int f = 0; f < spec.n_facts; ++f) {
        const Fact& fact = world.facts[static_cast<size_t>(f)];
        Question q;
        q.fact_id = f;
        q.x = {world.subject_token(fact.subject), world.relation_token(fact.relation)};
        q.gold = {world.value_token(fact.value)};
        world.questions.push_back(q);
    }

    world.rebuild_index();
    return world;
}

std::vector<Document> retrieve(const World& world, const TokenSeq& x, int k,
                               double noise, uint64_t seed) {
    if (k < 1) {
        throw ValidationError("retrieval depth K must be >= 1");
    }
    if (static_cast<size_t>(k) > world.corpus.size()) {
        throw ValidationError("retrieval depth K exceeds corpus size");
    }
    if (noise < 0.0 || noise > 1.0) {
        throw ValidationError("retrieval noise must lie in [0,1]");
    }
    const int fact_id = world.fact_for_query(x);
    const std::vector<int>& own = world.docs_of_fact(fact_id);

    std::vector<int> other;
    other.reserve(world.corpus.size());
    for (const Document& doc : world.corpus) {
        if (doc.fact_id != fact_id) {
            other.push_back(doc.doc_id);
        }
    }

    SplitMix64 rng(seed);
    std::vector<Document> out;
    out.reserve(static_cast<size_t>(k));
    for (int slot = 0; slot < k; ++slot) {
        const bool relevant = rng.next_unit() < 1.0 - noise;
        if (relevant) {
            const int pick = own[static_cast<size_t>(rng.next_below(own.size()))];
            out.push_back(world.corpus[static_cast<size_t>(pick)]);
        } else {
            if (other.empty()) {
                throw ValidationError("corpus too small to supply unrelated documents");
            }
            const int pick = other[static_cast<size_t>(rng.next_below(other.size()))];
            out.push_back(world.corpus[static_cast<size_t>(pick)]);
        }
    }
    return out;
}

} // namespace rpo
