#include "rpo/train_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "rpo/errors.hpp"

namespace rpo {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) {
        return "";
    }
    return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) {
            throw std::invalid_argument(value);
        }
        return v;
    } catch (const std::exception&) {
        throw ValidationError("config key '" + key + "' has non-numeric value '" +
                              value + "'");
    }
}

long to_long(const std::string& key, const std::string& value) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ValidationError("config key '" + key + "' has non-integer value '" +
                              value + "'");
    }
    return v;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") {
        return true;
    }
    if (value == "false" || value == "0") {
        return false;
    }
    throw ValidationError("config key '" + key + "' must be true/false, got '" +
                          value + "'");
}

} // namespace

Phase parse_phase(const std::string& s) {
    if (s == "pretrain") return Phase::pretrain;
    if (s == "sft") return Phase::sft;
    if (s == "rpo") return Phase::rpo;
    if (s == "dpo") return Phase::dpo;
    throw ValidationError("unknown phase '" + s +
                          "' (expected pretrain|sft|rpo|dpo)");
}

std::string phase_name(Phase phase) {
    switch (phase) {
        case Phase::pretrain: return "pretrain";
        case Phase::sft: return "sft";
        case Phase::rpo: return "rpo";
        case Phase::dpo: return "dpo";
    }
    return "?";
}

LossVariant parse_loss_variant(const std::string& s) {
    if (s == "rpo") return LossVariant::rpo;
    if (s == "rpo_no_ra") return LossVariant::rpo_no_ra;
    if (s == "dpo") return LossVariant::dpo;
    throw ValidationError("unknown loss variant '" + s +
                          "' (expected rpo|rpo_no_ra|dpo)");
}

std::string loss_variant_name(LossVariant variant) {
    switch (variant) {
        case LossVariant::rpo: return "rpo";
        case LossVariant::rpo_no_ra: return "rpo_no_ra";
        case LossVariant::dpo: return "dpo";
    }
    return "?";
}

std::map<std::string, std::string> parse_key_value_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("config line " + std::to_string(line_no) +
                                  " is not key=value: '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ValidationError("config line " + std::to_string(line_no) +
                                  " has an empty key");
        }
        if (!out.emplace(key, value).second) {
            throw ValidationError("duplicate config key '" + key + "'");
        }
    }
    return out;
}

std::map<std::string, std::string> read_key_value_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw ValidationError("cannot open config file: " + path);
    }
    std::string text(std::istreambuf_iterator<char>(f), {});
    return parse_key_value_text(text);
}

void TrainConfig::validate() const {
    if (lr < 0.0 || !(steps >= 0) || batch_size <= 0) {
        throw ValidationError("lr must be >= 0, steps >= 0, batch_size > 0");
    }
    if (momentum < 0.0 || momentum >= 1.0) {
        throw ValidationError("momentum must lie in [0,1)");
    }
    if (max_answer_len < 1) {
        throw ValidationError("max_answer_len must be >= 1");
    }
    if (doc_fraction < 0.0 || doc_fraction > 1.0 || doc_noise < 0.0 ||
        doc_noise > 1.0) {
        throw ValidationError("doc_fraction and doc_noise must lie in [0,1]");
    }
    if ((phase == Phase::rpo || phase == Phase::dpo) && !(beta > 0.0)) {
        throw ValidationError("beta must be > 0 for preference phases");
    }
}

TrainConfig TrainConfig::from_string(const std::string& text) {
    TrainConfig config;
    for (const auto& [key, value] : parse_key_value_text(text)) {
        if (key == "phase") {
            config.phase = parse_phase(value);
        } else if (key == "beta") {
            config.beta = to_double(key, value);
        } else if (key == "lr") {
            config.lr = to_double(key, value);
        } else if (key == "steps") {
            config.steps = static_cast<int>(to_long(key, value));
        } else if (key == "batch_size") {
            config.batch_size = static_cast<int>(to_long(key, value));
        } else if (key == "seed") {
            config.seed = static_cast<uint64_t>(to_long(key, value));
        } else if (key == "eval_every") {
            config.eval_every = static_cast<int>(to_long(key, value));
        } else if (key == "loss_variant") {
            config.loss_variant = parse_loss_variant(value);
        } else if (key == "momentum") {
            config.momentum = to_double(key, value);
        } else if (key == "max_answer_len") {
            config.max_answer_len = static_cast<int>(to_long(key, value));
        } else if (key == "sft_filter") {
            config.sft_filter = to_bool(key, value);
        } else if (key == "doc_fraction") {
            config.doc_fraction = to_double(key, value);
        } else if (key == "doc_noise") {
            config.doc_noise = to_double(key, value);
        } else if (key == "normalize_generation_terms") {
            config.normalize_generation_terms = to_bool(key, value);
        } else {
            throw ValidationError("unknown config key '" + key + "'");
        }
    }
    config.validate();
    return config;
}

TrainConfig TrainConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw ValidationError("cannot open config file: " + path);
    }
    std::string text(std::istreambuf_iterator<char>(f), {});
    return from_string(text);
}

std::string TrainConfig::to_string() const {
    std::ostringstream out;
    out << "phase=" << phase_name(phase) << '\n'
        << "beta=" << beta << '\n'
        << "lr=" << lr << '\n'
        << "steps=" << steps << '\n'
        << "batch_size=" << batch_size << '\n'
        << "seed=" << seed << '\n'
        << "eval_every=" << eval_every << '\n'
        << "loss_variant=" << loss_variant_name(loss_variant) << '\n'
        << "momentum=" << momentum << '\n'
        << "max_answer_len=" << max_answer_len << '\n'
        << "sft_filter=" << (sft_filter ? "true" : "false") << '\n'
        << "doc_fraction=" << doc_fraction << '\n'
        << "doc_noise=" << doc_noise << '\n'
        << "normalize_generation_terms="
        << (normalize_generation_terms ? "true" : "false") << '\n';
    return out.str();
}

} // namespace rpo
