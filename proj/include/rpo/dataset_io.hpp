#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rpo/conflict.hpp"
#include "rpo/world.hpp"

namespace rpo {

// World file: one JSON document {format, version, spec, vocab, facts, corpus,
// questions}. Tokens are stored as strings; the loader revalidates every
// structural invariant. Writes are atomic (tmp + rename) and byte-stable.
inline constexpr int kWorldFormatVersion = 1;

void save_world(const World& world, const std::string& path);
World load_world(const std::string& path);
std::string world_hash_hex(const World& world);

// Datasets are JSON lines: a header object on line one, then one object per
// record/pair. The header names the kind, so a training phase can reject a
// mismatched file before parsing rows. Rows only append; the version lives in
// the header.
inline constexpr int kDatasetFormatVersion = 1;

struct DatasetMeta {
    std::string kind;        // "records" | "pairs"
    std::string policy_hash; // collector policy, hex
    std::string world_hash;  // hex
    int k = 0;
    double noise = 0.0;
    uint64_t seed = 0;
    bool filtered = true;
    std::string accuracy_mode = "subsequence";
};

void save_records(const std::string& path, const DatasetMeta& meta,
                  const std::vector<ConflictRecord>& records, const Vocab& vocab);
std::pair<DatasetMeta, std::vector<ConflictRecord>> load_records(
    const std::string& path, const Vocab& vocab);

void save_pairs(const std::string& path, const DatasetMeta& meta,
                const std::vector<PreferencePair>& pairs, const Vocab& vocab);
std::pair<DatasetMeta, std::vector<PreferencePair>> load_pairs(
    const std::string& path, const Vocab& vocab);

// Header only; used for phase/data compatibility checks.
DatasetMeta read_dataset_header(const std::string& path);

// Shared atomic text-file writer.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

} // namespace rpo
