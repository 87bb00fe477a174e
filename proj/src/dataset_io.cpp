#include "rpo/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rpo/errors.hpp"

namespace rpo {

using nlohmann::json;

namespace {

json parse_json(const std::string& text, const std::string& where) {
    json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
        throw ValidationError("malformed JSON in " + where);
    }
    return j;
}

std::vector<std::string> decode_or_throw(const Vocab& vocab, const json& arr,
                                         const std::string& where) {
    if (!arr.is_array()) {
        throw ValidationError("expected a token array in " + where);
    }
    std::vector<std::string> out;
    for (const auto& item : arr) {
        if (!item.is_string()) {
            throw ValidationError("expected string tokens in " + where);
        }
        out.push_back(item.get<std::string>());
    }
    (void)vocab;
    return out;
}

TokenSeq encode_tokens(const Vocab& vocab, const json& arr, const std::string& where) {
    return vocab.encode(decode_or_throw(vocab, arr, where));
}

json tokens_to_json(const Vocab& vocab, const TokenSeq& seq) {
    return json(vocab.decode(seq));
}

json doc_to_json(const Vocab& vocab, const Document& doc) {
    return json{{"id", doc.doc_id},
                {"fact", doc.fact_id},
                {"tokens", tokens_to_json(vocab, doc.tokens)},
                {"corrupted", doc.corrupted}};
}

Document doc_from_json(const Vocab& vocab, const json& j, const std::string& where) {
    Document doc;
    doc.doc_id = j.at("id").get<int>();
    doc.fact_id = j.at("fact").get<int>();
    doc.tokens = encode_tokens(vocab, j.at("tokens"), where);
    doc.corrupted = j.at("corrupted").get<bool>();
    if (doc.tokens.empty()) {
        throw ValidationError("empty document tokens in " + where);
    }
    return doc;
}

uint64_t fnv1a(const std::string& bytes) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

std::string world_to_string(const World& world) {
    json j;
    j["format"] = "rpo-world";
    j["version"] = kWorldFormatVersion;
    j["spec"] = {{"n_facts", world.spec.n_facts},
                 {"n_relations", world.spec.n_relations},
                 {"n_values", world.spec.n_values},
                 {"docs_per_fact", world.spec.docs_per_fact},
                 {"corruption_rate", world.spec.corruption_rate},
                 {"stale_rate", world.spec.stale_rate},
                 {"k_default", world.spec.k_default}};
    j["vocab"] = world.vocab.tokens();
    json facts = json::array();
    for (const Fact& f : world.facts) {
        facts.push_back({f.subject, f.relation, f.value, f.stale_value});
    }
    j["facts"] = facts;
    json corpus = json::array();
    for (const Document& doc : world.corpus) {
        corpus.push_back(doc_to_json(world.vocab, doc));
    }
    j["corpus"] = corpus;
    json questions = json::array();
    for (const Question& q : world.questions) {
        questions.push_back({{"fact", q.fact_id},
                             {"x", tokens_to_json(world.vocab, q.x)},
                             {"gold", tokens_to_json(world.vocab, q.gold)}});
    }
    j["questions"] = questions;
    return j.dump() + "\n";
}

json meta_to_json(const DatasetMeta& meta) {
    return json{{"format", "rpo-dataset"},
                {"version", kDatasetFormatVersion},
                {"kind", meta.kind},
                {"policy_hash", meta.policy_hash},
                {"world_hash", meta.world_hash},
                {"k", meta.k},
                {"noise", meta.noise},
                {"seed", meta.seed},
                {"filtered", meta.filtered},
                {"accuracy_mode", meta.accuracy_mode}};
}

DatasetMeta meta_from_json(const json& j, const std::string& where) {
    if (j.value("format", "") != "rpo-dataset") {
        throw ValidationError(where + " is not a dataset file");
    }
    const int version = j.value("version", -1);
    if (version != kDatasetFormatVersion) {
        throw ValidationError(where + " has unsupported dataset version " +
                              std::to_string(version));
    }
    DatasetMeta meta;
    meta.kind = j.at("kind").get<std::string>();
    meta.policy_hash = j.value("policy_hash", "");
    meta.world_hash = j.value("world_hash", "");
    meta.k = j.value("k", 0);
    meta.noise = j.value("noise", 0.0);
    meta.seed = j.value("seed", uint64_t{0});
    meta.filtered = j.value("filtered", true);
    meta.accuracy_mode = j.value("accuracy_mode", "subsequence");
    if (meta.kind != "records" && meta.kind != "pairs") {
        throw ValidationError(where + " has unknown dataset kind '" + meta.kind + "'");
    }
    return meta;
}

} // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) {
            throw ValidationError("cannot open file for writing: " + tmp);
        }
        f << content;
        if (!f) {
            throw ValidationError("failed writing: " + tmp);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw ValidationError("failed to move file into place: " + path);
    }
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw ValidationError("cannot open file: " + path);
    }
    return std::string(std::istreambuf_iterator<char>(f), {});
}

void save_world(const World& world, const std::string& path) {
    write_file_atomic(path, world_to_string(world));
}

World load_world(const std::string& path) {
    const json j = parse_json(read_file(path), path);
    if (j.value("format", "") != "rpo-world") {
        throw ValidationError(path + " is not a world file");
    }
    if (j.value("version", -1) != kWorldFormatVersion) {
        throw ValidationError(path + " has an unsupported world version");
    }
    WorldSpec spec;
    const json& s = j.at("spec");
    spec.n_facts = s.at("n_facts").get<int>();
    spec.n_relations = s.at("n_relations").get<int>();
    spec.n_values = s.at("n_values").get<int>();
    spec.docs_per_fact = s.at("docs_per_fact").get<int>();
    spec.corruption_rate = s.at("corruption_rate").get<double>();
    spec.stale_rate = s.at("stale_rate").get<double>();
    spec.k_default = s.at("k_default").get<int>();

    World world(spec, Vocab(j.at("vocab").get<std::vector<std::string>>()));
    for (const auto& f : j.at("facts")) {
        if (!f.is_array() || f.size() != 4) {
            throw ValidationError("malformed fact entry in " + path);
        }
        world.facts.push_back(Fact{f[0].get<int>(), f[1].get<int>(), f[2].get<int>(),
                                   f[3].get<int>()});
    }
    for (const auto& d : j.at("corpus")) {
        world.corpus.push_back(doc_from_json(world.vocab, d, path));
    }
    for (const auto& q : j.at("questions")) {
        Question question;
        question.fact_id = q.at("fact").get<int>();
        question.x = encode_tokens(world.vocab, q.at("x"), path);
        question.gold = encode_tokens(world.vocab, q.at("gold"), path);
        world.questions.push_back(std::move(question));
    }
    // structural invariants
    for (const Document& doc : world.corpus) {
        const Fact& fact = world.facts.at(static_cast<size_t>(doc.fact_id));
        const TokenId truth = world.value_token(fact.value);
        if (doc.corrupted && doc.tokens.back() == truth) {
            throw ValidationError("corrupted document states the true value in " + path);
        }
        if (!doc.corrupted && doc.tokens.back() != truth) {
            throw ValidationError("clean document states a wrong value in " + path);
        }
    }
    world.rebuild_index();
    return world;
}

std::string world_hash_hex(const World& world) {
    return hex64(fnv1a(world_to_string(world)));
}

void save_records(const std::string& path, const DatasetMeta& meta,
                  const std::vector<ConflictRecord>& records, const Vocab& vocab) {
    if (meta.kind != "records") {
        throw ValidationError("records file must have kind 'records'");
    }
    std::ostringstream out;
    out << meta_to_json(meta).dump() << '\n';
    for (const ConflictRecord& r : records) {
        json docs = json::array();
        for (const Document& doc : r.docs) {
            docs.push_back(doc_to_json(vocab, doc));
        }
        json row{{"question_id", r.question_id},
                 {"x", tokens_to_json(vocab, r.x)},
                 {"gold", tokens_to_json(vocab, r.gold)},
                 {"docs", docs},
                 {"y_p", tokens_to_json(vocab, r.y_p)},
                 {"y_np", tokens_to_json(vocab, r.y_np)},
                 {"acc_p", r.acc_p},
                 {"acc_np", r.acc_np},
                 {"gold_in_docs", r.gold_in_docs}};
        out << row.dump() << '\n';
    }
    write_file_atomic(path, out.str());
}

std::pair<DatasetMeta, std::vector<ConflictRecord>> load_records(
    const std::string& path, const Vocab& vocab) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError(path + " is empty");
    }
    DatasetMeta meta = meta_from_json(parse_json(line, path), path);
    if (meta.kind != "records") {
        throw ValidationError(path + " holds '" + meta.kind +
                              "', expected a records dataset");
    }
    std::vector<ConflictRecord> records;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const std::string where = path + ":" + std::to_string(line_no);
        const json j = parse_json(line, where);
        ConflictRecord r;
        r.question_id = j.at("question_id").get<int>();
        r.x = encode_tokens(vocab, j.at("x"), where);
        r.gold = encode_tokens(vocab, j.at("gold"), where);
        for (const auto& d : j.at("docs")) {
            r.docs.push_back(doc_from_json(vocab, d, where));
        }
        r.y_p = encode_tokens(vocab, j.at("y_p"), where);
        r.y_np = encode_tokens(vocab, j.at("y_np"), where);
        r.acc_p = j.at("acc_p").get<int>();
        r.acc_np = j.at("acc_np").get<int>();
        r.gold_in_docs = j.at("gold_in_docs").get<bool>();
        records.push_back(std::move(r));
    }
    return {meta, records};
}

void save_pairs(const std::string& path, const DatasetMeta& meta,
                const std::vector<PreferencePair>& pairs, const Vocab& vocab) {
    if (meta.kind != "pairs") {
        throw ValidationError("pairs file must have kind 'pairs'");
    }
    std::ostringstream out;
    out << meta_to_json(meta).dump() << '\n';
    for (const PreferencePair& p : pairs) {
        json docs = json::array();
        for (const TokenSeq& doc : p.retrieved_docs) {
            docs.push_back(tokens_to_json(vocab, doc));
        }
        json row{{"question_id", p.question_id},
                 {"x", tokens_to_json(vocab, p.x)},
                 {"docs", docs},
                 {"y_w", tokens_to_json(vocab, p.y_w)},
                 {"y_l", tokens_to_json(vocab, p.y_l)},
                 {"sign", p.sign}};
        out << row.dump() << '\n';
    }
    write_file_atomic(path, out.str());
}

std::pair<DatasetMeta, std::vector<PreferencePair>> load_pairs(
    const std::string& path, const Vocab& vocab) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError(path + " is empty");
    }
    DatasetMeta meta = meta_from_json(parse_json(line, path), path);
    if (meta.kind != "pairs") {
        throw ValidationError(path + " holds '" + meta.kind +
                              "', expected a pairs dataset");
    }
    std::vector<PreferencePair> pairs;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const std::string where = path + ":" + std::to_string(line_no);
        const json j = parse_json(line, where);
        PreferencePair p;
        p.question_id = j.at("question_id").get<int>();
        p.x = encode_tokens(vocab, j.at("x"), where);
        for (const auto& d : j.at("docs")) {
            p.retrieved_docs.push_back(encode_tokens(vocab, d, where));
        }
        p.y_w = encode_tokens(vocab, j.at("y_w"), where);
        p.y_l = encode_tokens(vocab, j.at("y_l"), where);
        p.sign = j.at("sign").get<int>();
        validate_pair(p);
        pairs.push_back(std::move(p));
    }
    return {meta, pairs};
}

DatasetMeta read_dataset_header(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError(path + " is empty");
    }
    return meta_from_json(parse_json(line, path), path);
}

} // namespace rpo
