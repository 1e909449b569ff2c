#include "llmpred/errors.hpp"

namespace llmpred {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::none: return "Ok";
        case ErrorCode::missing_file: return "MissingFile";
        case ErrorCode::parse_error: return "ParseError";
        case ErrorCode::empty_dataset: return "EmptyDataset";
        case ErrorCode::series_too_short: return "SeriesTooShort";
        case ErrorCode::degenerate_series: return "DegenerateSeries";
        case ErrorCode::invalid_cutoff: return "InvalidCutoff";
        case ErrorCode::degenerate_cosine: return "DegenerateCosine";
        case ErrorCode::all_candidates_degenerate: return "AllCandidatesDegenerate";
        case ErrorCode::out_of_range: return "OutOfRange";
        case ErrorCode::not_a_number: return "NotANumber";
        case ErrorCode::band_violation: return "BandViolation";
        case ErrorCode::offset_mismatch: return "OffsetMismatch";
        case ErrorCode::transport: return "Transport";
        case ErrorCode::timeout: return "Timeout";
        case ErrorCode::budget_exceeded: return "BudgetExceeded";
        case ErrorCode::unparseable_prompt: return "UnparseablePrompt";
        case ErrorCode::insufficient_data: return "InsufficientData";
        case ErrorCode::non_finite_loss: return "NonFiniteLoss";
        case ErrorCode::untrained_model: return "UntrainedModel";
        case ErrorCode::dimension_mismatch: return "DimensionMismatch";
        case ErrorCode::degenerate_prediction: return "DegeneratePrediction";
        case ErrorCode::empty_sample: return "EmptySample";
        case ErrorCode::io_error: return "IoError";
        case ErrorCode::config_error: return "ConfigError";
        case ErrorCode::internal: return "Internal";
    }
    return "Unknown";
}

} // namespace llmpred
