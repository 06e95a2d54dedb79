#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace corral {

/// A single table cell: Missing, a finite Number, or Text.
class CellValue {
public:
    CellValue() = default;

    static auto missing() -> CellValue { return CellValue{}; }
    /// Throws std::invalid_argument for NaN or infinite input.
    static auto number(double value) -> CellValue;
    static auto text(std::string value) -> CellValue;

    [[nodiscard]] auto is_missing() const noexcept -> bool {
        return std::holds_alternative<std::monostate>(value_);
    }
    [[nodiscard]] auto is_number() const noexcept -> bool {
        return std::holds_alternative<double>(value_);
    }
    [[nodiscard]] auto is_text() const noexcept -> bool {
        return std::holds_alternative<std::string>(value_);
    }

    [[nodiscard]] auto as_number() const -> double { return std::get<double>(value_); }
    [[nodiscard]] auto as_text() const -> const std::string& {
        return std::get<std::string>(value_);
    }

    /// Numbers compare by bit pattern, so this is exact equality.
    friend auto operator==(const CellValue& a, const CellValue& b) -> bool;

private:
    std::variant<std::monostate, double, std::string> value_;
};

enum class ColumnKind { Numeric, Categorical };

auto column_kind_name(ColumnKind kind) -> std::string_view;

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Categorical;
    std::vector<CellValue> cells;
};

struct CellRef {
    std::size_t row = 0;
    std::string column;

    friend auto operator<=>(const CellRef&, const CellRef&) = default;
    friend auto operator==(const CellRef&, const CellRef&) -> bool = default;
};

/// Immutable, versioned columnar table. Columns are shared between versions
/// so deriving a new version only copies the columns it touches.
class Table {
public:
    Table() = default;
    /// Throws Error(InvalidSpec) on duplicate column names or ragged columns.
    Table(std::string name, std::vector<Column> columns, std::uint64_t version = 0);

    [[nodiscard]] auto name() const noexcept -> const std::string& { return name_; }
    [[nodiscard]] auto version() const noexcept -> std::uint64_t { return version_; }
    [[nodiscard]] auto row_count() const noexcept -> std::size_t { return rows_; }
    [[nodiscard]] auto column_count() const noexcept -> std::size_t { return columns_.size(); }

    [[nodiscard]] auto column(std::size_t index) const -> const Column& { return *columns_.at(index); }
    /// Throws Error(ColumnNotFound).
    [[nodiscard]] auto column(std::string_view name) const -> const Column&;
    [[nodiscard]] auto find_column(std::string_view name) const -> std::optional<std::size_t>;
    /// Throws Error(ColumnNotFound).
    [[nodiscard]] auto column_index(std::string_view name) const -> std::size_t;
    [[nodiscard]] auto column_names() const -> std::vector<std::string>;
    [[nodiscard]] auto kinds() const -> std::vector<ColumnKind>;

    [[nodiscard]] auto cell(const CellRef& ref) const -> const CellValue&;

    [[nodiscard]] auto with_column(std::size_t index, Column column) const -> Table;
    [[nodiscard]] auto with_columns(std::vector<Column> columns) const -> Table;
    [[nodiscard]] auto with_version(std::uint64_t version) const -> Table;

private:
    std::string name_;
    std::uint64_t version_ = 0;
    std::size_t rows_ = 0;
    std::vector<std::shared_ptr<const Column>> columns_;
};

inline const std::vector<std::string> kDefaultNullTokens = {"", "NA", "N/A", "null", "NULL"};

struct CsvOptions {
    char delimiter = ',';
    std::vector<std::string> null_tokens = kDefaultNullTokens;
    bool has_header = true;
};

/// RFC 4180 reader. Unquoted empty fields and null tokens become Missing;
/// every other field (including any quoted field) becomes Text.
auto load_csv(std::string_view bytes, const CsvOptions& options = {}, std::string name = {})
    -> Table;

/// Writes Numbers in shortest round-trip form and Missing as an empty field.
/// Text that would otherwise read back as Missing is quoted.
auto serialize_csv(const Table& table, const CsvOptions& options = {}) -> std::string;

/// Strict numeric grammar: [sign] digits [. digits] [exponent]. No suffixes,
/// separators or surrounding whitespace.
auto parse_numeric_cell(std::string_view text) -> std::optional<double>;

/// Shortest decimal string that parses back to exactly `value`.
auto format_number(double value) -> std::string;

inline constexpr double kDefaultNumericMajority = 0.5;

auto infer_kinds(const Table& table, double numeric_majority = kDefaultNumericMajority) -> Table;

/// Forces each column to the given kind: Numeric parses Text cells that pass
/// parse_numeric_cell, Categorical renders Numbers back to Text.
auto coerce_kinds(const Table& table, std::span<const ColumnKind> kinds) -> Table;

auto table_equals(const Table& a, const Table& b, double tol) -> bool;

}  // namespace corral
