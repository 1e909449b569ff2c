#include "llmpred/tokens.hpp"

#include <cctype>
#include <string>

#include "llmpred/codec.hpp"
#include "llmpred/errors.hpp"

namespace llmpred {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::size_t count_per_char(const std::string& text) {
    std::size_t tokens = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        if (is_space(text[i])) {
            while (i < text.size() && is_space(text[i])) ++i;
            ++tokens; // a whitespace run is one token
        } else {
            ++tokens;
            ++i;
        }
    }
    return tokens;
}

std::size_t count_bpe_grouped(const std::string& text) {
    std::size_t tokens = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (is_space(c)) {
            while (i < text.size() && is_space(text[i])) ++i;
        } else if (is_digit(c)) {
            while (i < text.size() && is_digit(text[i])) ++i;
        } else if (is_alpha(c)) {
            while (i < text.size() && is_alpha(text[i])) ++i;
        } else {
            ++i; // punctuation and anything else: one token per character
        }
        ++tokens;
    }
    return tokens;
}

// Widest rendering a channel's band admits: the band top i+1 carries the
// most integer digits, plus "." and the fraction digits.
std::size_t worst_case_value_width(std::size_t channel_index, int decimals) {
    std::size_t digits = 1;
    for (std::size_t top = channel_index + 1; top >= 10; top /= 10) ++digits;
    return digits + 1 + static_cast<std::size_t>(decimals);
}

} // namespace

const char* token_kind_name(TokenKind kind) {
    return kind == TokenKind::per_char ? "per_char" : "bpe_grouped";
}

TokenKind token_kind_from_name(const std::string& name) {
    if (name == "per_char") return TokenKind::per_char;
    if (name == "bpe_grouped") return TokenKind::bpe_grouped;
    throw Error(ErrorCode::config_error,
                "unknown token scheme \"" + name + "\" (expected per_char or bpe_grouped)");
}

std::size_t count_tokens(const std::string& text, const TokenScheme& scheme) {
    return scheme.kind == TokenKind::per_char ? count_per_char(text) : count_bpe_grouped(text);
}

BudgetReport budget(std::size_t H, std::size_t C, const TokenScheme& scheme, int decimals) {
    if (H == 0 || C == 0) {
        throw Error(ErrorCode::config_error, "budget: H and C must be positive");
    }

    const std::string& instruction = prompt_instruction();
    auto evaluate = [&](std::size_t channels) {
        std::string row;
        for (std::size_t ch = 0; ch < channels; ++ch) {
            if (ch > 0) row += ", ";
            row.append(worst_case_value_width(ch, decimals), '9');
            // Placeholder digits then a dot at the right spot: width is all
            // that matters to both counting models, but the dot changes
            // bpe_grouped's grouping, so place it faithfully.
            const std::size_t dot_pos = row.size() - static_cast<std::size_t>(decimals) - 1;
            row[dot_pos] = '.';
        }
        row += "\n";
        std::string body;
        body.reserve(row.size() * H);
        for (std::size_t t = 0; t < H; ++t) body += row;

        const std::size_t input = count_tokens(instruction + "\n" + body, scheme);
        const std::size_t output = count_tokens(body, scheme);
        return std::pair<std::size_t, std::size_t>{input, output};
    };

    BudgetReport report;
    report.limit = static_cast<std::size_t>(scheme.context_limit);
    const auto [input, output] = evaluate(C);
    report.input_tokens = input;
    report.output_tokens = output;
    report.total = input + output;
    report.feasible = report.total <= report.limit;

    if (report.feasible) {
        report.max_feasible_features = C;
    } else {
        report.max_feasible_features = 0;
        for (std::size_t c = C - 1; c >= 1; --c) {
            const auto [in_c, out_c] = evaluate(c);
            if (in_c + out_c <= report.limit) {
                report.max_feasible_features = c;
                break;
            }
            if (c == 1) break;
        }
    }
    return report;
}

} // namespace llmpred
