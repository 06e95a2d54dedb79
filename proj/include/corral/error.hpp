#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace corral {

enum class ErrorCode {
    MalformedCsv,
    EmptyInput,
    ColumnNotFound,
    KindMismatch,
    NoCategoricalColumns,
    NoNumericColumns,
    InvalidSpec,
    InvalidConfig,
    StaleGroup,
    StaleRecord,
    StaleAction,
    InvalidAction,
    EmptyMeanBasis,
    NotConvertible,
    NoSuggestion,
    RuleSyntax,
    RuleType,
    NothingToUndo,
    NothingToRedo,
    UnsupportedKind,
    UnsupportedAction,
    DatasetNotFound,
    SessionNotFound,
    PayloadTooLarge,
    BadRequest,
    Internal,
};

/// Stable machine-readable name, e.g. "STALE_ACTION".
auto error_code_name(ErrorCode code) -> std::string_view;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] auto code() const noexcept -> ErrorCode { return code_; }

private:
    ErrorCode code_;
};

/// Raised by load_csv. `row` is the 1-based data row (header excluded).
class CsvError : public Error {
public:
    CsvError(std::size_t row, std::string reason)
        : Error(ErrorCode::MalformedCsv,
                "malformed CSV at row " + std::to_string(row) + ": " + reason),
          row_(row), reason_(std::move(reason)) {}

    [[nodiscard]] auto row() const noexcept -> std::size_t { return row_; }
    [[nodiscard]] auto reason() const noexcept -> const std::string& { return reason_; }

private:
    std::size_t row_;
    std::string reason_;
};

/// Raised by parse_rule. `position` is a byte offset into the rule source.
class RuleSyntaxError : public Error {
public:
    RuleSyntaxError(std::size_t position, std::vector<std::string> expected);

    [[nodiscard]] auto position() const noexcept -> std::size_t { return position_; }
    [[nodiscard]] auto expected() const noexcept -> const std::vector<std::string>& {
        return expected_;
    }

private:
    std::size_t position_;
    std::vector<std::string> expected_;
};

}  // namespace corral
