#pragma once
#include <stdexcept>
#include <string>

namespace llmpred {

// Every failure the library can signal. Keep in sync with llmpred_status in
// the public C header (capi.cpp maps 1:1) and with error_code_name().
enum class ErrorCode {
    none = 0,
    missing_file,
    parse_error,
    empty_dataset,
    series_too_short,
    degenerate_series,
    invalid_cutoff,
    degenerate_cosine,
    all_candidates_degenerate,
    out_of_range,
    not_a_number,
    band_violation,
    offset_mismatch,
    transport,
    timeout,
    budget_exceeded,
    unparseable_prompt,
    insufficient_data,
    non_finite_loss,
    untrained_model,
    dimension_mismatch,
    degenerate_prediction,
    empty_sample,
    io_error,
    config_error,
    internal,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}

    ErrorCode code() const { return code_; }
    const char* code_name() const { return error_code_name(code_); }

private:
    ErrorCode code_;
};

// Cell-level CSV failure; carries the 0-based data row and column indices.
class CsvParseError : public Error {
public:
    CsvParseError(std::size_t row, std::size_t col, std::string message)
        : Error(ErrorCode::parse_error, std::move(message)), row_(row), col_(col) {}

    std::size_t row() const { return row_; }
    std::size_t col() const { return col_; }

private:
    std::size_t row_;
    std::size_t col_;
};

// HTTP-level failure from a remote backend; carries status and response body.
class TransportError : public Error {
public:
    TransportError(int status, std::string body, std::string message)
        : Error(ErrorCode::transport, std::move(message)),
          status_(status), body_(std::move(body)) {}

    int status() const { return status_; }
    const std::string& body() const { return body_; }

private:
    int status_;
    std::string body_;
};

} // namespace llmpred
