#pragma once
#include <cstddef>
#include <string>
#include <vector>

#include "llmpred/series.hpp"

namespace llmpred {

// Per-channel linear placement: normalized values in [-1, 1] are mapped by
// 0.5*x + c into the band [channel_index, channel_index + 1], so several
// channels can share one text line without ambiguity.
struct ChannelOffset {
    int channel_index = 0;
    double c = 0.5;
    int decimals = 2;
};

// The offset scheme used throughout: c = channel_index + 0.5.
ChannelOffset make_offset(int channel_index, int decimals = 2);
std::vector<ChannelOffset> make_offsets(std::size_t channel_count, int decimals = 2);

enum class PromptLayout { univariate, multivariate };

// A ready-to-send prompt: fixed instruction text plus the serialized history
// body, with the row/column shape the parser should expect back.
struct PromptBundle {
    std::string instruction;
    std::string body;
    std::size_t expected_rows = 0;
    std::size_t expected_cols = 0;
    PromptLayout layout = PromptLayout::univariate;
    int decimals = 2;

    std::string full_text() const { return instruction + "\n" + body; }
};

// Why a parsed row was rejected.
enum class DropReason { incomplete_value, wrong_arity, non_numeric, out_of_band };

const char* drop_reason_name(DropReason reason);

// Outcome of parsing raw model output: decoded rows plus per-row rejection
// bookkeeping. valid_rows + dropped_rows equals the non-empty lines seen.
struct ParseReport {
    std::size_t valid_rows = 0;
    std::size_t dropped_rows = 0;
    std::vector<std::pair<std::size_t, DropReason>> dropped_reasons;
    std::vector<std::vector<double>> values; // [row][channel], decoded to [-1, 1]
};

// The instruction sent ahead of every prompt body.
const std::string& prompt_instruction();

// Renders 0.5*x + c rounded half-away-from-zero to `decimals` places, fixed
// width. Throws OutOfRange when |x| > 1 + 1e-9.
std::string encode_value(double x, const ChannelOffset& off);

// Inverse map (parsed - c) / 0.5, clamped to [-1 - q, 1 + q] with
// q = 10^-decimals. Throws NotANumber / BandViolation.
double decode_value(const std::string& text, const ChannelOffset& off);

// Serializes a normalized history block: one line per time step, channels
// joined by ", ", each line terminated by "\n". Throws OffsetMismatch when
// the offset list does not cover the channels.
PromptBundle build_prompt(const ChannelSet& history, const std::vector<ChannelOffset>& offsets,
                          PromptLayout layout);

// Tolerant parser for raw model output. Never throws on content; rows with
// wrong arity, malformed or partial numbers, or out-of-band values are
// dropped with a reason. Stops after max_rows valid rows.
ParseReport parse_output(const std::string& text, std::size_t expected_cols,
                         const std::vector<ChannelOffset>& offsets, std::size_t max_rows);

} // namespace llmpred
