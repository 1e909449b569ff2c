#include "llmpred/series.hpp"

#include <cmath>
#include <string>

#include "llmpred/errors.hpp"

namespace llmpred {

std::pair<Series, NormState> max_normalize(const Series& s) {
    if (s.values.empty()) {
        throw Error(ErrorCode::empty_dataset, "max_normalize: empty series");
    }
    double scale = 0.0;
    for (double v : s.values) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::not_a_number, "max_normalize: non-finite value");
        }
        scale = std::max(scale, std::fabs(v));
    }
    if (scale == 0.0) {
        throw Error(ErrorCode::degenerate_series,
                    "max_normalize: all values are zero, scale undefined");
    }
    Series out;
    out.channel_id = s.channel_id;
    out.values.reserve(s.values.size());
    for (double v : s.values) out.values.push_back(v / scale);
    return {std::move(out), NormState{scale}};
}

Series denormalize(const Series& s, const NormState& n) {
    Series out;
    out.channel_id = s.channel_id;
    out.values.reserve(s.values.size());
    for (double v : s.values) out.values.push_back(v * n.scale);
    return out;
}

std::vector<Window> split_windows(const ChannelSet& set, std::size_t H, std::size_t stride) {
    if (H == 0 || stride == 0) {
        throw Error(ErrorCode::config_error, "split_windows: H and stride must be positive");
    }
    const std::size_t L = set.length();
    if (L < 2 * H) {
        throw Error(ErrorCode::series_too_short,
                    "split_windows: need at least 2*H=" + std::to_string(2 * H) +
                        " samples, have " + std::to_string(L));
    }
    std::vector<Window> windows;
    for (std::size_t off = 0; off + 2 * H <= L; off += stride) {
        Window w;
        w.offset = off;
        for (const Series& ch : set.channels) {
            Series hist, tgt;
            hist.channel_id = ch.channel_id;
            tgt.channel_id = ch.channel_id;
            hist.values.assign(ch.values.begin() + off, ch.values.begin() + off + H);
            tgt.values.assign(ch.values.begin() + off + H, ch.values.begin() + off + 2 * H);
            w.history.channels.push_back(std::move(hist));
            w.target.channels.push_back(std::move(tgt));
        }
        windows.push_back(std::move(w));
    }
    return windows;
}

} // namespace llmpred
