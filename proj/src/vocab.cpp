#include "rpo/vocab.hpp"

#include <cctype>

#include "rpo/errors.hpp"

namespace rpo {

namespace {

bool has_whitespace(const std::string& s) {
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            return true;
        }
    }
    return false;
}

} // namespace

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.size() < 8) {
        throw ValidationError("vocab must have at least 8 tokens, got " +
                              std::to_string(tokens_.size()));
    }
    for (size_t i = 0; i < tokens_.size(); ++i) {
        const std::string& t = tokens_[i];
        if (t.empty() || has_whitespace(t)) {
            throw ValidationError("vocab token " + std::to_string(i) +
                                  " is empty or contains whitespace");
        }
        auto [it, inserted] = index_.emplace(t, static_cast<TokenId>(i));
        if (!inserted) {
            throw ValidationError("duplicate vocab token: " + t);
        }
    }
    auto find_marker = [&](const char* name) {
        auto it = index_.find(name);
        if (it == index_.end()) {
            throw ValidationError(std::string("vocab missing reserved marker ") + name);
        }
        return it->second;
    };
    pad_ = find_marker(kPad);
    query_begin_ = find_marker(kQueryBegin);
    doc_begin_ = find_marker(kDocBegin);
    answer_begin_ = find_marker(kAnswerBegin);
    end_ = find_marker(kEnd);
}

const std::string& Vocab::token(TokenId id) const {
    if (id < 0 || id >= size()) {
        throw ValidationError("token id out of range: " + std::to_string(id));
    }
    return tokens_[static_cast<size_t>(id)];
}

TokenId Vocab::id(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) {
        throw ValidationError("unknown token: " + token);
    }
    return it->second;
}

bool Vocab::contains(const std::string& token) const {
    return index_.find(token) != index_.end();
}

TokenSeq Vocab::encode(const std::vector<std::string>& tokens) const {
    TokenSeq out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        out.push_back(id(t));
    }
    return out;
}

std::vector<std::string> Vocab::decode(const TokenSeq& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (TokenId id : ids) {
        out.push_back(token(id));
    }
    return out;
}

Vocab Vocab::with_symbols(const std::vector<std::string>& symbols) {
    std::vector<std::string> tokens = {kPad, kQueryBegin, kDocBegin, kAnswerBegin, kEnd};
    tokens.insert(tokens.end(), symbols.begin(), symbols.end());
    return Vocab(std::move(tokens));
}

} // namespace rpo
