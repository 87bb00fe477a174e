#include "rpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "rpo/errors.hpp"
#include "rpo/numeric.hpp"
#include "rpo/rng.hpp"

namespace rpo {

namespace {

void check_arch(const ArchConfig& arch) {
    if (arch.context_window <= 0 || arch.embedding_dim <= 0 || arch.hidden_dim <= 0) {
        throw ValidationError("architecture dims must be positive");
    }
}

void check_tokens(const Policy& policy, std::span<const TokenId> seq,
                  const char* what) {
    const TokenId v = policy.vocab_size();
    for (TokenId t : seq) {
        if (t < 0 || t >= v) {
            throw ValidationError(std::string("unknown token id in ") + what +
                                  ": " + std::to_string(t));
        }
    }
}

// Window token at position i (0 = oldest of the last W), reading virtually
// from context ++ continuation[0:cont_used], left-padded with [PAD].
TokenId window_token(const Policy& policy, std::span<const TokenId> context,
                     std::span<const TokenId> continuation, size_t cont_used,
                     int i) {
    const long total = static_cast<long>(context.size()) + static_cast<long>(cont_used);
    const long idx = total - policy.arch.context_window + i;
    if (idx < 0) {
        return policy.vocab.pad();
    }
    if (idx < static_cast<long>(context.size())) {
        return context[static_cast<size_t>(idx)];
    }
    return continuation[static_cast<size_t>(idx) - context.size()];
}

struct ForwardCache {
    std::vector<TokenId> window; // W
    std::vector<double> input;   // W*E concatenated embeddings
    std::vector<double> hidden;  // H, after tanh
    std::vector<double> logprobs; // V
};

void forward(const Policy& policy, const std::vector<TokenId>& window,
             ForwardCache& cache) {
    const int w = policy.arch.context_window;
    const int e = policy.arch.embedding_dim;
    const int h = policy.arch.hidden_dim;
    const int v = policy.vocab_size();
    const double* p = policy.params.data();
    const double* embed = p + policy.off_embed();
    const double* w1 = p + policy.off_w1();
    const double* b1 = p + policy.off_b1();
    const double* w2 = p + policy.off_w2();
    const double* b2 = p + policy.off_b2();

    cache.window = window;
    cache.input.resize(static_cast<size_t>(w) * e);
    for (int i = 0; i < w; ++i) {
        const double* row = embed + static_cast<size_t>(window[static_cast<size_t>(i)]) * e;
        std::copy(row, row + e, cache.input.begin() + static_cast<size_t>(i) * e);
    }

    cache.hidden.resize(static_cast<size_t>(h));
    const int we = w * e;
    for (int j = 0; j < h; ++j) {
        const double* row = w1 + static_cast<size_t>(j) * we;
        double acc = b1[j];
        for (int k = 0; k < we; ++k) {
            acc += row[k] * cache.input[static_cast<size_t>(k)];
        }
        cache.hidden[static_cast<size_t>(j)] = std::tanh(acc);
    }

    cache.logprobs.resize(static_cast<size_t>(v));
    for (int t = 0; t < v; ++t) {
        const double* row = w2 + static_cast<size_t>(t) * h;
        double acc = b2[t];
        for (int j = 0; j < h; ++j) {
            acc += row[j] * cache.hidden[static_cast<size_t>(j)];
        }
        cache.logprobs[static_cast<size_t>(t)] = acc;
    }
    log_softmax_inplace(cache.logprobs);
}

// Adds weight * d(logprob[target])/d(params) for one prediction step.
void backward_step(const Policy& policy, const ForwardCache& cache,
                   TokenId target, double weight, std::vector<double>& grad) {
    const int w = policy.arch.context_window;
    const int e = policy.arch.embedding_dim;
    const int h = policy.arch.hidden_dim;
    const int v = policy.vocab_size();
    const int we = w * e;
    const double* p = policy.params.data();
    const double* w1 = p + policy.off_w1();
    const double* w2 = p + policy.off_w2();
    double* g_embed = grad.data() + policy.off_embed();
    double* g_w1 = grad.data() + policy.off_w1();
    double* g_b1 = grad.data() + policy.off_b1();
    double* g_w2 = grad.data() + policy.off_w2();
    double* g_b2 = grad.data() + policy.off_b2();

    // d logp[target] / d logit[t] = delta(t == target) - softmax[t]
    std::vector<double> dlogit(static_cast<size_t>(v));
    for (int t = 0; t < v; ++t) {
        const double soft = std::exp(cache.logprobs[static_cast<size_t>(t)]);
        dlogit[static_cast<size_t>(t)] = weight * ((t == target ? 1.0 : 0.0) - soft);
    }

    std::vector<double> dhidden(static_cast<size_t>(h), 0.0);
    for (int t = 0; t < v; ++t) {
        const double d = dlogit[static_cast<size_t>(t)];
        if (d == 0.0) {
            continue;
        }
        g_b2[t] += d;
        const double* row = w2 + static_cast<size_t>(t) * h;
        double* grow = g_w2 + static_cast<size_t>(t) * h;
        for (int j = 0; j < h; ++j) {
            grow[j] += d * cache.hidden[static_cast<size_t>(j)];
            dhidden[static_cast<size_t>(j)] += d * row[j];
        }
    }

    // through tanh
    for (int j = 0; j < h; ++j) {
        const double hj = cache.hidden[static_cast<size_t>(j)];
        dhidden[static_cast<size_t>(j)] *= (1.0 - hj * hj);
    }

    std::vector<double> dinput(static_cast<size_t>(we), 0.0);
    for (int j = 0; j < h; ++j) {
        const double d = dhidden[static_cast<size_t>(j)];
        if (d == 0.0) {
            continue;
        }
        g_b1[j] += d;
        const double* row = w1 + static_cast<size_t>(j) * we;
        double* grow = g_w1 + static_cast<size_t>(j) * we;
        for (int k = 0; k < we; ++k) {
            grow[k] += d * cache.input[static_cast<size_t>(k)];
            dinput[static_cast<size_t>(k)] += d * row[k];
        }
    }

    for (int i = 0; i < w; ++i) {
        double* erow = g_embed + static_cast<size_t>(cache.window[static_cast<size_t>(i)]) * e;
        for (int k = 0; k < e; ++k) {
            erow[k] += dinput[static_cast<size_t>(i) * e + k];
        }
    }
}

} // namespace

size_t Policy::off_w1() const {
    return static_cast<size_t>(vocab_size()) * arch.embedding_dim;
}

size_t Policy::off_b1() const {
    return off_w1() + static_cast<size_t>(arch.hidden_dim) * arch.context_window *
                          arch.embedding_dim;
}

size_t Policy::off_w2() const { return off_b1() + static_cast<size_t>(arch.hidden_dim); }

size_t Policy::off_b2() const {
    return off_w2() + static_cast<size_t>(vocab_size()) * arch.hidden_dim;
}

size_t param_count(const ArchConfig& arch, int vocab_size) {
    check_arch(arch);
    const size_t v = static_cast<size_t>(vocab_size);
    const size_t w = static_cast<size_t>(arch.context_window);
    const size_t e = static_cast<size_t>(arch.embedding_dim);
    const size_t h = static_cast<size_t>(arch.hidden_dim);
    return v * e + h * w * e + h + v * h + v;
}

Policy init_policy(const ArchConfig& arch, const Vocab& vocab, uint64_t seed) {
    check_arch(arch);
    Policy policy{arch, vocab, {}};
    policy.params.resize(param_count(arch, vocab.size()));
    SplitMix64 rng(seed);
    for (double& p : policy.params) {
        p = rng.next_uniform(-0.08, 0.08);
    }
    return policy;
}

std::vector<double> token_logprobs(const Policy& policy,
                                   std::span<const TokenId> context) {
    check_tokens(policy, context, "context");
    const int w = policy.arch.context_window;
    std::vector<TokenId> window(static_cast<size_t>(w));
    for (int i = 0; i < w; ++i) {
        window[static_cast<size_t>(i)] =
            window_token(policy, context, {}, 0, i);
    }
    ForwardCache cache;
    forward(policy, window, cache);
    return cache.logprobs;
}

SequenceScore sequence_logprob(const Policy& policy,
                               std::span<const TokenId> context,
                               std::span<const TokenId> continuation) {
    if (continuation.empty()) {
        throw ValidationError("continuation must be non-empty");
    }
    check_tokens(policy, context, "context");
    check_tokens(policy, continuation, "continuation");

    const int w = policy.arch.context_window;
    SequenceScore score;
    score.per_token.reserve(continuation.size());
    std::vector<TokenId> window(static_cast<size_t>(w));
    ForwardCache cache;
    for (size_t step = 0; step < continuation.size(); ++step) {
        for (int i = 0; i < w; ++i) {
            window[static_cast<size_t>(i)] =
                window_token(policy, context, continuation, step, i);
        }
        forward(policy, window, cache);
        const double lp = cache.logprobs[static_cast<size_t>(continuation[step])];
        score.per_token.push_back(lp);
        score.total += lp;
    }
    return score;
}

TokenSeq greedy_decode(const Policy& policy, std::span<const TokenId> context,
                       int max_len) {
    if (max_len < 1) {
        throw ValidationError("max_len must be >= 1");
    }
    check_tokens(policy, context, "context");
    const int w = policy.arch.context_window;
    TokenSeq out;
    std::vector<TokenId> window(static_cast<size_t>(w));
    ForwardCache cache;
    while (static_cast<int>(out.size()) < max_len) {
        for (int i = 0; i < w; ++i) {
            window[static_cast<size_t>(i)] =
                window_token(policy, context, out, out.size(), i);
        }
        forward(policy, window, cache);
        TokenId best = 0;
        for (int t = 1; t < policy.vocab_size(); ++t) {
            if (cache.logprobs[static_cast<size_t>(t)] >
                cache.logprobs[static_cast<size_t>(best)]) {
                best = t;
            }
        }
        out.push_back(best);
        if (best == policy.vocab.end()) {
            break;
        }
    }
    return out;
}

void accumulate_logprob_gradient(const Policy& policy,
                                 std::span<const TokenId> context,
                                 std::span<const TokenId> continuation,
                                 double weight, std::vector<double>& grad) {
    if (continuation.empty()) {
        throw ValidationError("continuation must be non-empty");
    }
    if (grad.size() != policy.params.size()) {
        throw ValidationError("gradient buffer size mismatch");
    }
    check_tokens(policy, context, "context");
    check_tokens(policy, continuation, "continuation");

    const int w = policy.arch.context_window;
    std::vector<TokenId> window(static_cast<size_t>(w));
    ForwardCache cache;
    for (size_t step = 0; step < continuation.size(); ++step) {
        for (int i = 0; i < w; ++i) {
            window[static_cast<size_t>(i)] =
                window_token(policy, context, continuation, step, i);
        }
        forward(policy, window, cache);
        backward_step(policy, cache, continuation[step], weight, grad);
    }
}

GradientRecord logprob_gradient(const Policy& policy,
                                std::span<const TokenId> context,
                                std::span<const TokenId> continuation) {
    GradientRecord record;
    record.d_params.assign(policy.params.size(), 0.0);
    accumulate_logprob_gradient(policy, context, continuation, 1.0,
                                record.d_params);
    return record;
}

GradientRecord finite_difference_gradient(const Policy& policy,
                                          std::span<const TokenId> context,
                                          std::span<const TokenId> continuation,
                                          double step) {
    if (!(step > 0.0)) {
        throw ValidationError("finite-difference step must be > 0");
    }
    Policy probe = policy;
    GradientRecord record;
    record.d_params.resize(policy.params.size());
    for (size_t i = 0; i < probe.params.size(); ++i) {
        const double saved = probe.params[i];
        probe.params[i] = saved + step;
        const double plus = sequence_logprob(probe, context, continuation).total;
        probe.params[i] = saved - step;
        const double minus = sequence_logprob(probe, context, continuation).total;
        probe.params[i] = saved;
        record.d_params[i] = (plus - minus) / (2.0 * step);
    }
    return record;
}

Policy clone_freeze(const Policy& policy) { return policy; }

uint64_t param_hash(const Policy& policy) {
    uint64_t h = 0xCBF29CE484222325ull;
    auto mix = [&h](const unsigned char* bytes, size_t n) {
        for (size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001B3ull;
        }
    };
    for (const std::string& t : policy.vocab.tokens()) {
        mix(reinterpret_cast<const unsigned char*>(t.data()), t.size());
        h ^= 0x1F;
        h *= 0x100000001B3ull;
    }
    const int dims[3] = {policy.arch.context_window, policy.arch.embedding_dim,
                         policy.arch.hidden_dim};
    mix(reinterpret_cast<const unsigned char*>(dims), sizeof(dims));
    mix(reinterpret_cast<const unsigned char*>(policy.params.data()),
        policy.params.size() * sizeof(double));
    return h;
}

std::string param_hash_hex(const Policy& policy) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(param_hash(policy)));
    return std::string(buf);
}

} // namespace rpo
