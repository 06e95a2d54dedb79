#include "corral/error.hpp"

namespace corral {

auto error_code_name(ErrorCode code) -> std::string_view {
    switch (code) {
        case ErrorCode::MalformedCsv: return "MALFORMED_CSV";
        case ErrorCode::EmptyInput: return "EMPTY_INPUT";
        case ErrorCode::ColumnNotFound: return "COLUMN_NOT_FOUND";
        case ErrorCode::KindMismatch: return "KIND_MISMATCH";
        case ErrorCode::NoCategoricalColumns: return "NO_CATEGORICAL_COLUMNS";
        case ErrorCode::NoNumericColumns: return "NO_NUMERIC_COLUMNS";
        case ErrorCode::InvalidSpec: return "INVALID_SPEC";
        case ErrorCode::InvalidConfig: return "INVALID_CONFIG";
        case ErrorCode::StaleGroup: return "STALE_GROUP";
        case ErrorCode::StaleRecord: return "STALE_RECORD";
        case ErrorCode::StaleAction: return "STALE_ACTION";
        case ErrorCode::InvalidAction: return "INVALID_ACTION";
        case ErrorCode::EmptyMeanBasis: return "EMPTY_MEAN_BASIS";
        case ErrorCode::NotConvertible: return "NOT_CONVERTIBLE";
        case ErrorCode::NoSuggestion: return "NO_SUGGESTION";
        case ErrorCode::RuleSyntax: return "RULE_SYNTAX";
        case ErrorCode::RuleType: return "RULE_TYPE";
        case ErrorCode::NothingToUndo: return "NOTHING_TO_UNDO";
        case ErrorCode::NothingToRedo: return "NOTHING_TO_REDO";
        case ErrorCode::UnsupportedKind: return "UNSUPPORTED_KIND";
        case ErrorCode::UnsupportedAction: return "UNSUPPORTED_ACTION";
        case ErrorCode::DatasetNotFound: return "DATASET_NOT_FOUND";
        case ErrorCode::SessionNotFound: return "SESSION_NOT_FOUND";
        case ErrorCode::PayloadTooLarge: return "PAYLOAD_TOO_LARGE";
        case ErrorCode::BadRequest: return "BAD_REQUEST";
        case ErrorCode::Internal: return "INTERNAL";
    }
    return "INTERNAL";
}

namespace {

auto describe_expected(std::size_t position, const std::vector<std::string>& expected)
    -> std::string {
    std::string message = "rule syntax error at offset " + std::to_string(position);
    if (!expected.empty()) {
        message += ": expected ";
        for (std::size_t i = 0; i < expected.size(); ++i) {
            if (i > 0) message += " | ";
            message += expected[i];
        }
    }
    return message;
}

}  // namespace

RuleSyntaxError::RuleSyntaxError(std::size_t position, std::vector<std::string> expected)
    : Error(ErrorCode::RuleSyntax, describe_expected(position, expected)),
      position_(position),
      expected_(std::move(expected)) {}

}  // namespace corral
