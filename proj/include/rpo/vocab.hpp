#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace rpo {

using TokenId = int32_t;
using TokenSeq = std::vector<TokenId>;

// Token table shared by a policy and the data pipeline. Five reserved
// symbols must each appear exactly once: the four prompt markers plus the
// left-padding token used when a context is shorter than the model window.
class Vocab {
  public:
    static constexpr const char* kPad = "[PAD]";
    static constexpr const char* kQueryBegin = "[QRY]";
    static constexpr const char* kDocBegin = "[DOC]";
    static constexpr const char* kAnswerBegin = "[ANS]";
    static constexpr const char* kEnd = "[END]";

    // Validates: >= 8 tokens, all distinct, no whitespace, every reserved
    // marker present exactly once. Throws ValidationError otherwise.
    explicit Vocab(std::vector<std::string> tokens);

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::string& token(TokenId id) const;
    TokenId id(const std::string& token) const;
    bool contains(const std::string& token) const;
    const std::vector<std::string>& tokens() const { return tokens_; }

    TokenId pad() const { return pad_; }
    TokenId query_begin() const { return query_begin_; }
    TokenId doc_begin() const { return doc_begin_; }
    TokenId answer_begin() const { return answer_begin_; }
    TokenId end() const { return end_; }

    TokenSeq encode(const std::vector<std::string>& tokens) const;
    std::vector<std::string> decode(const TokenSeq& ids) const;

    bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

    // Reserved markers followed by the given symbols.
    static Vocab with_symbols(const std::vector<std::string>& symbols);

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
    TokenId pad_ = -1;
    TokenId query_begin_ = -1;
    TokenId doc_begin_ = -1;
    TokenId answer_begin_ = -1;
    TokenId end_ = -1;
};

} // namespace rpo
