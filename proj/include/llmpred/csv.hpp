#pragma once
#include <optional>
#include <string>
#include <vector>

#include "llmpred/series.hpp"

namespace llmpred {

// Loads a numeric dataset from CSV. Expected layout: header row, first
// column a timestamp (ignored), remaining columns real-valued features with
// "." as decimal point. `selected_channels` picks feature columns by their
// 0-based feature index (i.e. index 0 is the first column after the
// timestamp); when given, channel_ids are remapped to 0..k-1 in the selected
// order. Throws MissingFile, ParseError(row, col), or EmptyDataset.
ChannelSet load_csv_dataset(const std::string& path,
                            const std::optional<std::vector<int>>& selected_channels = std::nullopt);

} // namespace llmpred
