#include "rpo/checkpoint.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rpo/errors.hpp"
#include "rpo/numeric.hpp"

namespace rpo {

namespace {

constexpr const char* kMagic = "rpo-policy-checkpoint";

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) {
        throw NumericalError("failed to format parameter value");
    }
    return std::string(buf, ptr);
}

double parse_double(const std::string& s, size_t line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ValidationError("checkpoint line " + std::to_string(line_no) +
                              ": bad parameter value '" + s + "'");
    }
    return v;
}

} // namespace

void checkpoint_save(const Policy& policy, const std::string& path) {
    if (!all_finite(policy.params)) {
        throw NumericalError("refusing to checkpoint non-finite parameters");
    }
    std::ostringstream out;
    out << kMagic << ' ' << kCheckpointVersion << " V=" << policy.vocab_size()
        << " W=" << policy.arch.context_window << " E=" << policy.arch.embedding_dim
        << " H=" << policy.arch.hidden_dim << " P=" << policy.params.size() << '\n';
    const auto& tokens = policy.vocab.tokens();
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) {
            out << ' ';
        }
        out << tokens[i];
    }
    out << '\n';
    for (double p : policy.params) {
        out << format_double(p) << '\n';
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) {
            throw ValidationError("cannot open checkpoint file for writing: " + tmp);
        }
        f << out.str();
        if (!f) {
            throw ValidationError("failed writing checkpoint: " + tmp);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw ValidationError("failed to move checkpoint into place: " + path);
    }
}

Policy checkpoint_load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw ValidationError("cannot open checkpoint file: " + path);
    }
    std::string header;
    if (!std::getline(f, header)) {
        throw ValidationError("checkpoint is empty: " + path);
    }
    std::istringstream hs(header);
    std::string magic;
    int version = 0;
    hs >> magic >> version;
    if (magic != kMagic) {
        throw ValidationError("not a policy checkpoint: " + path);
    }
    if (version != kCheckpointVersion) {
        throw ValidationError("unsupported checkpoint version " +
                              std::to_string(version) + " (expected " +
                              std::to_string(kCheckpointVersion) + ")");
    }
    long v = -1, w = -1, e = -1, h = -1, p = -1;
    std::string field;
    while (hs >> field) {
        if (field.size() < 3 || field[1] != '=') {
            throw ValidationError("malformed checkpoint header field: " + field);
        }
        const long value = std::strtol(field.c_str() + 2, nullptr, 10);
        switch (field[0]) {
            case 'V': v = value; break;
            case 'W': w = value; break;
            case 'E': e = value; break;
            case 'H': h = value; break;
            case 'P': p = value; break;
            default:
                throw ValidationError("unknown checkpoint header field: " + field);
        }
    }
    if (v <= 0 || w <= 0 || e <= 0 || h <= 0 || p <= 0) {
        throw ValidationError("incomplete checkpoint header: " + header);
    }

    std::string vocab_line;
    if (!std::getline(f, vocab_line)) {
        throw ValidationError("checkpoint truncated before vocab line");
    }
    std::vector<std::string> tokens;
    std::istringstream vs(vocab_line);
    std::string tok;
    while (vs >> tok) {
        tokens.push_back(tok);
    }
    if (static_cast<long>(tokens.size()) != v) {
        throw ValidationError("checkpoint vocab has " + std::to_string(tokens.size()) +
                              " tokens, header says " + std::to_string(v));
    }

    ArchConfig arch{static_cast<int>(w), static_cast<int>(e), static_cast<int>(h)};
    Policy policy{arch, Vocab(std::move(tokens)), {}};
    const size_t expected = param_count(arch, policy.vocab_size());
    if (static_cast<size_t>(p) != expected) {
        throw ValidationError("checkpoint param count " + std::to_string(p) +
                              " does not match architecture (expected " +
                              std::to_string(expected) + ")");
    }

    policy.params.reserve(expected);
    std::string line;
    size_t line_no = 2;
    while (policy.params.size() < expected) {
        ++line_no;
        if (!std::getline(f, line)) {
            throw ValidationError("checkpoint truncated: expected " +
                                  std::to_string(expected) + " parameters, got " +
                                  std::to_string(policy.params.size()));
        }
        policy.params.push_back(parse_double(line, line_no));
    }
    if (std::getline(f, line) && !line.empty()) {
        throw ValidationError("trailing data after parameters in " + path);
    }
    if (!all_finite(policy.params)) {
        throw NumericalError("checkpoint contains non-finite parameters: " + path);
    }
    return policy;
}

} // namespace rpo
