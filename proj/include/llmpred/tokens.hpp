#pragma once
#include <cstddef>
#include <string>

namespace llmpred {

// Two documented tokenizer approximations:
//  - per_char: every non-space character is one token; each whitespace run
//    is one token (character-level numeral handling).
//  - bpe_grouped: runs of digits, runs of letters, and whitespace runs are
//    one token each; any other character is one token (byte-pair-style
//    grouping of numerals, so "3.75" -> ["3", ".", "75"]).
enum class TokenKind { per_char, bpe_grouped };

struct TokenScheme {
    TokenKind kind = TokenKind::per_char;
    int context_limit = 4096;
};

const char* token_kind_name(TokenKind kind);
TokenKind token_kind_from_name(const std::string& name); // throws ConfigError

// Counts tokens in UTF-8 text under the scheme's counting model.
std::size_t count_tokens(const std::string& text, const TokenScheme& scheme);

// Context-window feasibility for an H-step, C-channel prompt, assuming every
// value is rendered at its band's maximum width. input covers instruction +
// body; output mirrors the body (generation length equals input length).
struct BudgetReport {
    std::size_t input_tokens = 0;
    std::size_t output_tokens = 0;
    std::size_t total = 0;
    std::size_t limit = 0;
    bool feasible = false;
    std::size_t max_feasible_features = 0;
};

BudgetReport budget(std::size_t H, std::size_t C, const TokenScheme& scheme, int decimals = 2);

} // namespace llmpred
