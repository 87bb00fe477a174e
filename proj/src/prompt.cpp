#include "rpo/prompt.hpp"

#include "rpo/errors.hpp"

namespace rpo {

TokenSeq query_prefix(const Vocab& vocab, const TokenSeq& x) {
    TokenSeq out;
    out.reserve(1 + x.size());
    out.push_back(vocab.query_begin());
    out.insert(out.end(), x.begin(), x.end());
    return out;
}

TokenSeq retrieval_completion(const Vocab& vocab,
                              const std::vector<TokenSeq>& docs) {
    TokenSeq out;
    for (const TokenSeq& doc : docs) {
        out.push_back(vocab.doc_begin());
        out.insert(out.end(), doc.begin(), doc.end());
    }
    out.push_back(vocab.answer_begin());
    return out;
}

TokenSeq render_prompt(const Vocab& vocab, const TokenSeq& x,
                       const std::vector<TokenSeq>& docs) {
    TokenSeq out = query_prefix(vocab, x);
    const TokenSeq tail = retrieval_completion(vocab, docs);
    out.insert(out.end(), tail.begin(), tail.end());
    return out;
}

size_t doc_content_length(const std::vector<TokenSeq>& docs) {
    size_t n = 0;
    for (const TokenSeq& doc : docs) {
        n += doc.size();
    }
    return n;
}

ParsedPrompt parse_prompt(const Vocab& vocab, const TokenSeq& prompt) {
    if (prompt.size() < 2 || prompt.front() != vocab.query_begin() ||
        prompt.back() != vocab.answer_begin()) {
        throw ValidationError("prompt must start with [QRY] and end with [ANS]");
    }
    ParsedPrompt parsed;
    size_t i = 1;
    const size_t last = prompt.size() - 1; // position of [ANS]
    while (i < last && prompt[i] != vocab.doc_begin()) {
        parsed.x.push_back(prompt[i]);
        ++i;
    }
    while (i < last) {
        // prompt[i] is [DOC]
        ++i;
        TokenSeq doc;
        while (i < last && prompt[i] != vocab.doc_begin()) {
            doc.push_back(prompt[i]);
            ++i;
        }
        parsed.docs.push_back(std::move(doc));
    }
    return parsed;
}

} // namespace rpo
