#include "corral/table.hpp"

#include "corral/error.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <unordered_set>

namespace corral {

auto CellValue::number(double value) -> CellValue {
    if (!std::isfinite(value)) {
        throw std::invalid_argument("CellValue::number requires a finite value");
    }
    CellValue cell;
    cell.value_ = value;
    return cell;
}

auto CellValue::text(std::string value) -> CellValue {
    CellValue cell;
    cell.value_ = std::move(value);
    return cell;
}

auto operator==(const CellValue& a, const CellValue& b) -> bool {
    if (a.value_.index() != b.value_.index()) return false;
    if (a.is_number()) {
        return std::bit_cast<std::uint64_t>(a.as_number()) ==
               std::bit_cast<std::uint64_t>(b.as_number());
    }
    if (a.is_text()) return a.as_text() == b.as_text();
    return true;
}

auto column_kind_name(ColumnKind kind) -> std::string_view {
    return kind == ColumnKind::Numeric ? "numeric" : "categorical";
}

Table::Table(std::string name, std::vector<Column> columns, std::uint64_t version)
    : name_(std::move(name)), version_(version) {
    std::unordered_set<std::string_view> seen;
    columns_.reserve(columns.size());
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i == 0) {
            rows_ = columns[i].cells.size();
        } else if (columns[i].cells.size() != rows_) {
            throw Error(ErrorCode::InvalidSpec,
                        "column '" + columns[i].name + "' has " +
                            std::to_string(columns[i].cells.size()) + " cells, expected " +
                            std::to_string(rows_));
        }
        columns_.push_back(std::make_shared<const Column>(std::move(columns[i])));
        if (!seen.insert(columns_.back()->name).second) {
            throw Error(ErrorCode::InvalidSpec,
                        "duplicate column name '" + columns_.back()->name + "'");
        }
    }
}

auto Table::find_column(std::string_view name) const -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (columns_[i]->name == name) return i;
    }
    return std::nullopt;
}

auto Table::column_index(std::string_view name) const -> std::size_t {
    if (auto idx = find_column(name)) return *idx;
    throw Error(ErrorCode::ColumnNotFound, "column '" + std::string(name) + "' not found");
}

auto Table::column(std::string_view name) const -> const Column& {
    return *columns_[column_index(name)];
}

auto Table::column_names() const -> std::vector<std::string> {
    std::vector<std::string> names;
    names.reserve(columns_.size());
    for (const auto& col : columns_) names.push_back(col->name);
    return names;
}

auto Table::kinds() const -> std::vector<ColumnKind> {
    std::vector<ColumnKind> out;
    out.reserve(columns_.size());
    for (const auto& col : columns_) out.push_back(col->kind);
    return out;
}

auto Table::cell(const CellRef& ref) const -> const CellValue& {
    const auto& col = column(ref.column);
    if (ref.row >= rows_) {
        throw Error(ErrorCode::StaleAction, "row " + std::to_string(ref.row) +
                                                " out of range (row count " +
                                                std::to_string(rows_) + ")");
    }
    return col.cells[ref.row];
}

auto Table::with_column(std::size_t index, Column column) const -> Table {
    if (index >= columns_.size()) throw std::out_of_range("Table::with_column");
    if (column.cells.size() != rows_) {
        throw Error(ErrorCode::InvalidSpec, "replacement column has wrong length");
    }
    Table out = *this;
    out.columns_[index] = std::make_shared<const Column>(std::move(column));
    return out;
}

auto Table::with_columns(std::vector<Column> columns) const -> Table {
    return Table(name_, std::move(columns), version_);
}

auto Table::with_version(std::uint64_t version) const -> Table {
    Table out = *this;
    out.version_ = version;
    return out;
}

auto parse_numeric_cell(std::string_view text) -> std::optional<double> {
    std::size_t i = 0;
    const std::size_t n = text.size();
    auto is_digit = [&](std::size_t k) { return k < n && text[k] >= '0' && text[k] <= '9'; };

    if (i < n && (text[i] == '+' || text[i] == '-')) ++i;
    std::size_t digits = 0;
    while (is_digit(i)) {
        ++i;
        ++digits;
    }
    if (i < n && text[i] == '.') {
        ++i;
        while (is_digit(i)) {
            ++i;
            ++digits;
        }
    }
    if (digits == 0) return std::nullopt;
    if (i < n && (text[i] == 'e' || text[i] == 'E')) {
        ++i;
        if (i < n && (text[i] == '+' || text[i] == '-')) ++i;
        if (!is_digit(i)) return std::nullopt;
        while (is_digit(i)) ++i;
    }
    if (i != n) return std::nullopt;

    // from_chars rejects a leading '+' but handles the rest of the grammar.
    std::size_t start = (text[0] == '+') ? 1 : 0;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data() + start, text.data() + n, value);
    if (ec != std::errc{} || ptr != text.data() + n || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

auto format_number(double value) -> std::string {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) throw std::runtime_error("format_number failed");
    return std::string(buf, ptr);
}

namespace {

auto build_column(const Column& source, ColumnKind kind) -> Column {
    Column out{source.name, kind, {}};
    out.cells.reserve(source.cells.size());
    for (const auto& cell : source.cells) {
        if (kind == ColumnKind::Numeric && cell.is_text()) {
            if (auto v = parse_numeric_cell(cell.as_text())) {
                out.cells.push_back(CellValue::number(*v));
                continue;
            }
        } else if (kind == ColumnKind::Categorical && cell.is_number()) {
            out.cells.push_back(CellValue::text(format_number(cell.as_number())));
            continue;
        }
        out.cells.push_back(cell);
    }
    return out;
}

}  // namespace

auto infer_kinds(const Table& table, double numeric_majority) -> Table {
    if (!(numeric_majority > 0.0 && numeric_majority <= 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "numeric_majority must lie in (0, 1]");
    }
    std::vector<Column> columns;
    columns.reserve(table.column_count());
    for (std::size_t c = 0; c < table.column_count(); ++c) {
        const auto& col = table.column(c);
        std::size_t present = 0;
        std::size_t numeric = 0;
        for (const auto& cell : col.cells) {
            if (cell.is_missing()) continue;
            ++present;
            if (cell.is_number() || parse_numeric_cell(cell.as_text())) ++numeric;
        }
        const bool is_numeric =
            present > 0 &&
            static_cast<double>(numeric) / static_cast<double>(present) >= numeric_majority;
        columns.push_back(
            build_column(col, is_numeric ? ColumnKind::Numeric : ColumnKind::Categorical));
    }
    return table.with_columns(std::move(columns));
}

auto coerce_kinds(const Table& table, std::span<const ColumnKind> kinds) -> Table {
    if (kinds.size() != table.column_count()) {
        throw Error(ErrorCode::InvalidSpec, "coerce_kinds: kind list length mismatch");
    }
    std::vector<Column> columns;
    columns.reserve(table.column_count());
    for (std::size_t c = 0; c < table.column_count(); ++c) {
        columns.push_back(build_column(table.column(c), kinds[c]));
    }
    return table.with_columns(std::move(columns));
}

auto table_equals(const Table& a, const Table& b, double tol) -> bool {
    if (a.column_count() != b.column_count() || a.row_count() != b.row_count()) return false;
    for (std::size_t c = 0; c < a.column_count(); ++c) {
        const auto& ca = a.column(c);
        const auto& cb = b.column(c);
        if (ca.name != cb.name || ca.kind != cb.kind) return false;
        for (std::size_t r = 0; r < a.row_count(); ++r) {
            const auto& x = ca.cells[r];
            const auto& y = cb.cells[r];
            if (x.is_number() && y.is_number()) {
                if (!(std::fabs(x.as_number() - y.as_number()) <= tol)) return false;
            } else if (!(x == y)) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace corral
