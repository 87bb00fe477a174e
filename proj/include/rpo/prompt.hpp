#pragma once

#include <vector>

#include "rpo/vocab.hpp"

namespace rpo {

// Prompt template, bit-exact:
//   [QRY] x...  then per document  [DOC] d...  then [ANS]
// An empty doc list renders the closed-book form [QRY] x... [ANS].
TokenSeq render_prompt(const Vocab& vocab, const TokenSeq& x,
                       const std::vector<TokenSeq>& docs);

// [QRY] x...  (the prompt prefix shared by both conditioning modes)
TokenSeq query_prefix(const Vocab& vocab, const TokenSeq& x);

// Everything after the query prefix in the retrieval-conditioned prompt:
// [DOC] d1... [DOC] d2... [ANS]. Scoring this continuation from the query
// prefix is how the lab evaluates log pi(D|x); including the trailing answer
// cue makes prompt(x, docs) == query_prefix(x) ++ retrieval_completion(docs),
// so joint sequence scores factor exactly by the chain rule.
TokenSeq retrieval_completion(const Vocab& vocab,
                              const std::vector<TokenSeq>& docs);

// Token count of the concatenated documents themselves; template markers do
// not count toward the retrieval length |D|.
size_t doc_content_length(const std::vector<TokenSeq>& docs);

struct ParsedPrompt {
    TokenSeq x;
    std::vector<TokenSeq> docs;
};

// Inverse of render_prompt for payloads that do not themselves contain
// template markers. Throws ValidationError on malformed prompts.
ParsedPrompt parse_prompt(const Vocab& vocab, const TokenSeq& prompt);

} // namespace rpo
