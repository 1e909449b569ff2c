#include "llmpred/codec.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <string>

#include "llmpred/errors.hpp"

namespace llmpred {

namespace {

constexpr double kEncodeSlack = 1e-9;

void validate_decimals(int decimals) {
    if (decimals != 1 && decimals != 2) {
        throw Error(ErrorCode::config_error, "decimals must be 1 or 2");
    }
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\f\v");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\f\v");
    return s.substr(a, b - a + 1);
}

// Lexical shape of one numeric token: [+-]? digits [ '.' digits ].
enum class TokenShape { valid, incomplete, malformed };

TokenShape classify_token(const std::string& t) {
    if (t.empty()) return TokenShape::incomplete; // "0.34, 1.54, " style tail
    std::size_t i = 0;
    if (t[i] == '+' || t[i] == '-') ++i;
    std::size_t int_digits = 0;
    while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) { ++i; ++int_digits; }
    if (int_digits == 0) return TokenShape::malformed;
    if (i == t.size()) return TokenShape::valid;
    if (t[i] != '.') return TokenShape::malformed;
    ++i;
    if (i == t.size()) return TokenShape::incomplete; // trailing dot: "2."
    std::size_t frac_digits = 0;
    while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) { ++i; ++frac_digits; }
    if (i != t.size() || frac_digits == 0) return TokenShape::malformed;
    return TokenShape::valid;
}

} // namespace

ChannelOffset make_offset(int channel_index, int decimals) {
    if (channel_index < 0) {
        throw Error(ErrorCode::config_error, "channel index must be non-negative");
    }
    validate_decimals(decimals);
    return ChannelOffset{channel_index, channel_index + 0.5, decimals};
}

std::vector<ChannelOffset> make_offsets(std::size_t channel_count, int decimals) {
    std::vector<ChannelOffset> offsets;
    offsets.reserve(channel_count);
    for (std::size_t i = 0; i < channel_count; ++i) {
        offsets.push_back(make_offset(static_cast<int>(i), decimals));
    }
    return offsets;
}

const char* drop_reason_name(DropReason reason) {
    switch (reason) {
        case DropReason::incomplete_value: return "incomplete_value";
        case DropReason::wrong_arity: return "wrong_arity";
        case DropReason::non_numeric: return "non_numeric";
        case DropReason::out_of_band: return "out_of_band";
    }
    return "unknown";
}

const std::string& prompt_instruction() {
    static const std::string text =
        "Consider the distribution. Predict the next few lines. INTEGER component of the value "
        "SHOULD be SAME as the train data. ONLY provide numerical values.";
    return text;
}

std::string encode_value(double x, const ChannelOffset& off) {
    validate_decimals(off.decimals);
    if (!std::isfinite(x) || std::fabs(x) > 1.0 + kEncodeSlack) {
        throw Error(ErrorCode::out_of_range,
                    "encode_value: input " + std::to_string(x) + " outside [-1, 1]");
    }
    const double mapped = 0.5 * x + off.c;
    const double pow10 = off.decimals == 1 ? 10.0 : 100.0;
    // llround rounds half away from zero, which keeps .005 boundaries
    // symmetric around the band center.
    const long long scaled = std::llround(mapped * pow10);
    const long long whole = scaled / static_cast<long long>(pow10);
    const long long frac = std::llabs(scaled % static_cast<long long>(pow10));
    char buf[64];
    if (scaled < 0 && whole == 0) {
        std::snprintf(buf, sizeof(buf), "-0.%0*lld", off.decimals, frac);
    } else {
        std::snprintf(buf, sizeof(buf), "%lld.%0*lld", whole, off.decimals, frac);
    }
    return buf;
}

double decode_value(const std::string& text, const ChannelOffset& off) {
    validate_decimals(off.decimals);
    const std::string t = trim(text);
    std::size_t consumed = 0;
    double parsed = 0.0;
    try {
        parsed = std::stod(t, &consumed);
    } catch (const std::exception&) {
        throw Error(ErrorCode::not_a_number, "decode_value: \"" + t + "\" is not a number");
    }
    if (consumed != t.size() || !std::isfinite(parsed)) {
        throw Error(ErrorCode::not_a_number, "decode_value: \"" + t + "\" is not a number");
    }
    // A value farther than 0.5 outside [c-0.5, c+0.5] belongs to another
    // channel's band; decoding it here would silently misattribute it.
    if (parsed < off.c - 1.0 || parsed > off.c + 1.0) {
        throw Error(ErrorCode::band_violation,
                    "decode_value: " + t + " outside band of channel " +
                        std::to_string(off.channel_index));
    }
    const double quantum = off.decimals == 1 ? 0.1 : 0.01;
    double x = (parsed - off.c) / 0.5;
    if (x > 1.0 + quantum) x = 1.0 + quantum;
    if (x < -1.0 - quantum) x = -1.0 - quantum;
    return x;
}

PromptBundle build_prompt(const ChannelSet& history, const std::vector<ChannelOffset>& offsets,
                          PromptLayout layout) {
    const std::size_t C = history.channel_count();
    if (C == 0) {
        throw Error(ErrorCode::empty_dataset, "build_prompt: no channels");
    }
    if (offsets.size() != C) {
        throw Error(ErrorCode::offset_mismatch,
                    "build_prompt: " + std::to_string(offsets.size()) + " offsets for " +
                        std::to_string(C) + " channels");
    }
    if (layout == PromptLayout::univariate && C != 1) {
        throw Error(ErrorCode::config_error, "univariate layout requires exactly one channel");
    }

    PromptBundle bundle;
    bundle.instruction = prompt_instruction();
    bundle.layout = layout;
    bundle.expected_rows = history.length();
    bundle.expected_cols = C;
    bundle.decimals = offsets.front().decimals;

    std::string body;
    for (std::size_t t = 0; t < history.length(); ++t) {
        for (std::size_t ch = 0; ch < C; ++ch) {
            if (ch > 0) body += ", ";
            body += encode_value(history.channels[ch].values[t], offsets[ch]);
        }
        body += "\n";
    }
    bundle.body = std::move(body);
    return bundle;
}

ParseReport parse_output(const std::string& text, std::size_t expected_cols,
                         const std::vector<ChannelOffset>& offsets, std::size_t max_rows) {
    ParseReport report;
    if (expected_cols == 0 || offsets.size() < expected_cols) return report;

    std::size_t pos = 0;
    std::size_t row_index = 0; // counts non-empty lines actually examined
    while (pos <= text.size() && report.valid_rows < max_rows) {
        const std::size_t nl = text.find('\n', pos);
        const std::string line =
            nl == std::string::npos ? text.substr(pos) : text.substr(pos, nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        if (trim(line).empty()) continue;

        // Tokenize on commas; trailing separators produce an empty token,
        // which classify_token treats as an incomplete value.
        std::vector<std::string> tokens;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            tokens.push_back(trim(line.substr(start, comma - start)));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }

        bool any_incomplete = false, any_malformed = false;
        for (const std::string& tok : tokens) {
            const TokenShape shape = classify_token(tok);
            if (shape == TokenShape::incomplete) any_incomplete = true;
            if (shape == TokenShape::malformed) any_malformed = true;
        }

        auto drop = [&](DropReason reason) {
            ++report.dropped_rows;
            report.dropped_reasons.emplace_back(row_index, reason);
        };

        if (any_incomplete) {
            drop(DropReason::incomplete_value);
        } else if (any_malformed) {
            drop(DropReason::non_numeric);
        } else if (tokens.size() != expected_cols) {
            drop(DropReason::wrong_arity);
        } else {
            std::vector<double> decoded(expected_cols);
            bool in_band = true;
            for (std::size_t ch = 0; ch < expected_cols && in_band; ++ch) {
                try {
                    decoded[ch] = decode_value(tokens[ch], offsets[ch]);
                } catch (const Error& e) {
                    in_band = false;
                    drop(e.code() == ErrorCode::band_violation ? DropReason::out_of_band
                                                               : DropReason::non_numeric);
                }
            }
            if (in_band) {
                ++report.valid_rows;
                report.values.push_back(std::move(decoded));
            }
        }
        ++row_index;
    }
    return report;
}

} // namespace llmpred
