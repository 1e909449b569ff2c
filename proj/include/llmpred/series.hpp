#pragma once
#include <cstddef>
#include <utility>
#include <vector>

namespace llmpred {

// One channel of real-valued samples. Values are finite by construction of
// the loaders; operations that could introduce non-finite values re-check.
struct Series {
    std::vector<double> values;
    int channel_id = 0;

    std::size_t length() const { return values.size(); }
};

// A fixed-length multichannel slice of a dataset. All channels share the same
// length and channel_ids run 0..C-1.
struct ChannelSet {
    std::vector<Series> channels;

    std::size_t channel_count() const { return channels.size(); }
    std::size_t length() const { return channels.empty() ? 0 : channels.front().length(); }
};

// One evaluation unit: H history samples followed by H target samples,
// for every channel. `offset` is the sample index where history begins.
struct Window {
    ChannelSet history;
    ChannelSet target;
    std::size_t offset = 0;
};

// Scale captured by max_normalize so the mapping can be undone.
struct NormState {
    double scale = 1.0;
};

// Scales a series by its maximum absolute value so the output lies in
// [-1, 1]. Throws DegenerateSeries when every value is zero.
std::pair<Series, NormState> max_normalize(const Series& s);

// Inverse of max_normalize: multiplies by the recorded scale.
Series denormalize(const Series& s, const NormState& n);

// Cuts the dataset into windows of H history + H target samples starting at
// offsets 0, stride, 2*stride, ...; windows that would overrun are omitted.
// Throws SeriesTooShort when the dataset cannot fit even one window.
std::vector<Window> split_windows(const ChannelSet& set, std::size_t H, std::size_t stride);

} // namespace llmpred
