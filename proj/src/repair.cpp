#include "corral/repair.hpp"

#include "corral/error.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_map>

namespace corral {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

template <typename T>
void sort_unique(std::vector<T>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

template <typename T>
auto sorted_unique(const std::vector<T>& v) -> bool {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (!(v[i - 1] < v[i])) return false;
    }
    return true;
}

template <typename T>
void require_list(const std::vector<T>& v, std::string_view what) {
    if (v.empty()) throw Error(ErrorCode::InvalidAction, std::string(what) + " list is empty");
    if (!sorted_unique(v)) {
        throw Error(ErrorCode::InvalidAction,
                    std::string(what) + " list must be sorted and free of duplicates");
    }
}

auto matches_key(const CellValue& cell, const GroupKey& key) -> bool {
    if (!key) return cell.is_missing();
    return cell.is_text() && cell.as_text() == *key;
}

void require_in_range(const Table& table, const CellRef& ref) {
    if (!table.find_column(ref.column)) {
        throw Error(ErrorCode::StaleAction, "column '" + ref.column + "' does not exist");
    }
    if (ref.row >= table.row_count()) {
        throw Error(ErrorCode::StaleAction, "row " + std::to_string(ref.row) +
                                                " is out of range at version " +
                                                std::to_string(table.version()));
    }
}

auto require_numeric_column(const Table& table, const std::string& name) -> std::size_t {
    const std::size_t idx = table.column_index(name);
    if (table.column(idx).kind != ColumnKind::Numeric) {
        throw Error(ErrorCode::KindMismatch, "column '" + name + "' is not numeric");
    }
    return idx;
}

auto rows_of_group(const Table& table, const GroupId& group) -> std::vector<std::size_t> {
    const auto& by = table.column(group.group_by);
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < by.cells.size(); ++r) {
        if (matches_key(by.cells[r], group.key)) rows.push_back(r);
    }
    return rows;
}

auto stats_of_group(const Table& table, const GroupId& group) -> GroupStats {
    GroupSpec spec{group.group_by, group.target, 1};
    return group_stats(table, Group{spec, group.key, rows_of_group(table, group), table.version()});
}

// Writes new values into cells, grouped by column. Returns the prior values.
auto write_cells(const Table& table, const std::vector<std::pair<CellRef, CellValue>>& writes,
                 std::size_t& changed) -> std::pair<Table, CellRestores> {
    std::map<std::size_t, std::vector<const std::pair<CellRef, CellValue>*>> by_column;
    for (const auto& w : writes) by_column[table.column_index(w.first.column)].push_back(&w);

    CellRestores restores;
    Table out = table;
    for (const auto& [idx, column_writes] : by_column) {
        Column col = table.column(idx);
        for (const auto* w : column_writes) {
            auto& cell = col.cells[w->first.row];
            restores.cells.emplace_back(w->first, cell);
            if (!(cell == w->second)) ++changed;
            cell = w->second;
        }
        out = out.with_column(idx, std::move(col));
    }
    std::sort(restores.cells.begin(), restores.cells.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return {std::move(out), std::move(restores)};
}

struct Summary {
    std::size_t count = 0;
    Moments moments;
    std::size_t missing = 0;
    std::size_t mismatch = 0;

    auto operator==(const Summary& o) const -> bool {
        return count == o.count && moments.n == o.moments.n &&
               CellValue::number(moments.mean) == CellValue::number(o.moments.mean) &&
               CellValue::number(moments.std) == CellValue::number(o.moments.std) &&
               missing == o.missing && mismatch == o.mismatch;
    }
};

auto summarize(const Table& table, std::span<const GroupSpec> specs) -> std::map<GroupId, Summary> {
    std::map<GroupId, Summary> out;
    std::unordered_map<std::string, std::vector<KeyRows>> partitions;
    for (const auto& spec : specs) {
        validate_spec(table, spec);
        auto it = partitions.find(spec.group_by);
        if (it == partitions.end()) {
            it = partitions.emplace(spec.group_by, partition_by(table, table.column_index(spec.group_by)))
                     .first;
        }
        const auto& target = table.column(spec.target);
        for (const auto& part : it->second) {
            if (part.rows.size() < spec.min_support) continue;
            Summary s;
            s.count = part.rows.size();
            s.moments = numeric_moments(target, part.rows);
            for (std::size_t r : part.rows) {
                if (target.cells[r].is_missing()) ++s.missing;
                if (target.cells[r].is_text()) ++s.mismatch;
            }
            out.emplace(GroupId{spec.group_by, spec.target, part.key}, s);
        }
    }
    return out;
}

void fill_group_diff(ActionDiff& diff, const Table& before, const Table& after,
                     std::span<const GroupSpec> specs) {
    const auto a = summarize(before, specs);
    const auto b = summarize(after, specs);
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() || ib != b.end()) {
        if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
            diff.affected_groups.push_back(ia->first);
            ++ia;
        } else if (ia == a.end() || ib->first < ia->first) {
            diff.affected_groups.push_back(ib->first);
            ++ib;
        } else {
            if (!(ia->second == ib->second)) diff.affected_groups.push_back(ia->first);
            if (ia->second.moments.n > 0 && ib->second.moments.n > 0) {
                diff.mean_shift[ia->first] = ib->second.moments.mean - ia->second.moments.mean;
            }
            ++ia;
            ++ib;
        }
    }
}

}  // namespace

auto action_tag(const RepairAction& action) -> std::string_view {
    return std::visit(Overloaded{
                          [](const ImputeGroupMean&) -> std::string_view { return "impute_group_mean"; },
                          [](const ImputeColumnMean&) -> std::string_view { return "impute_column_mean"; },
                          [](const RemoveRows&) -> std::string_view { return "remove_rows"; },
                          [](const ConvertCells&) -> std::string_view { return "convert_cells"; },
                          [](const MergeGroups&) -> std::string_view { return "merge_groups"; },
                          [](const CustomWrangle&) -> std::string_view { return "custom"; },
                      },
                      action);
}

auto describe_action(const RepairAction& action) -> std::string {
    auto cells_text = [](const std::vector<CellRef>& cells) {
        std::ostringstream os;
        os << cells.size() << (cells.size() == 1 ? " cell" : " cells");
        if (!cells.empty()) os << " in " << cells.front().column;
        return os.str();
    };
    return std::visit(
        Overloaded{
            [&](const ImputeGroupMean& a) {
                return "Impute " + cells_text(a.cells) + " with the mean of " + a.group.group_by + "=" +
                       (a.group.key ? *a.group.key : "<missing>");
            },
            [&](const ImputeColumnMean& a) { return "Impute " + cells_text(a.cells) + " with the column mean"; },
            [&](const RemoveRows& a) {
                return "Remove " + std::to_string(a.rows.size()) + (a.rows.size() == 1 ? " row" : " rows");
            },
            [&](const ConvertCells& a) { return "Convert " + cells_text(a.cells) + " to numbers"; },
            [&](const MergeGroups& a) {
                return "Merge " + a.column + " \"" + a.source_key + "\" into \"" + a.dest_key + "\"";
            },
            [&](const CustomWrangle& a) { return "Apply " + a.wrangler + " to " + cells_text(a.cells); },
        },
        action);
}

void normalize_action(RepairAction& action) {
    std::visit(Overloaded{
                   [](ImputeGroupMean& a) { sort_unique(a.cells); },
                   [](ImputeColumnMean& a) { sort_unique(a.cells); },
                   [](RemoveRows& a) { sort_unique(a.rows); },
                   [](ConvertCells& a) { sort_unique(a.cells); },
                   [](MergeGroups&) {},
                   [](CustomWrangle& a) { sort_unique(a.cells); },
               },
               action);
}

void WranglerRegistry::add(CustomWrangler wrangler) {
    if (!valid_custom_id(wrangler.name) || !wrangler.transform) {
        throw Error(ErrorCode::InvalidConfig, "invalid custom wrangler '" + wrangler.name + "'");
    }
    if (find(wrangler.name) != nullptr) {
        throw Error(ErrorCode::InvalidConfig, "duplicate custom wrangler '" + wrangler.name + "'");
    }
    wranglers_.push_back(std::move(wrangler));
}

auto WranglerRegistry::find(std::string_view name) const -> const CustomWrangler* {
    for (const auto& w : wranglers_) {
        if (w.name == name) return &w;
    }
    return nullptr;
}

auto WranglerRegistry::for_anomaly(std::string_view anomaly_id) const
    -> std::vector<const CustomWrangler*> {
    std::vector<const CustomWrangler*> out;
    for (const auto& w : wranglers_) {
        if (w.anomaly_id == anomaly_id) out.push_back(&w);
    }
    std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->name < b->name; });
    return out;
}

auto suggest_repairs(const AnomalyRecord& record, const Table& table, std::span<const Group> groups,
                     const SuggestOptions& options) -> std::vector<RepairAction> {
    if (record.version != table.version()) {
        throw Error(ErrorCode::StaleRecord, "record was detected at version " +
                                                std::to_string(record.version) + ", table is at " +
                                                std::to_string(table.version()));
    }
    std::vector<CellRef> cells = record.cells;
    std::sort(cells.begin(), cells.end());
    std::vector<std::size_t> rows;
    for (const auto& c : cells) rows.push_back(c.row);
    sort_unique(rows);

    std::vector<RepairAction> out;
    switch (record.type.tag) {
        case AnomalyTag::MissingValue:
            out.emplace_back(ImputeGroupMean{cells, record.group});
            out.emplace_back(ImputeColumnMean{cells});
            out.emplace_back(RemoveRows{rows});
            break;
        case AnomalyTag::Outlier:
            out.emplace_back(RemoveRows{rows});
            out.emplace_back(ImputeGroupMean{cells, record.group});
            out.emplace_back(ImputeColumnMean{cells});
            break;
        case AnomalyTag::TypeMismatch: {
            const bool convertible = std::all_of(cells.begin(), cells.end(), [&](const CellRef& c) {
                const auto& cell = table.cell(c);
                return cell.is_text() && convert_numeric_string(cell.as_text()).has_value();
            });
            if (convertible) out.emplace_back(ConvertCells{cells});
            out.emplace_back(RemoveRows{rows});
            break;
        }
        case AnomalyTag::IncompleteGroup: {
            const Group* small = nullptr;
            for (const auto& g : groups) {
                if (g.id() == record.group) small = &g;
            }
            if (small == nullptr) {
                throw Error(ErrorCode::StaleRecord, "group " + record.group.label() + " not found");
            }
            if (auto target = suggest_merge_target(*small, groups, options.min_similarity,
                                                   options.similarity)) {
                out.emplace_back(MergeGroups{record.group.group_by, *small->key, *target->key});
            }
            if (small->rows.size() < table.row_count()) {
                out.emplace_back(RemoveRows{small->rows});
            }
            if (out.empty()) {
                throw Error(ErrorCode::NoSuggestion,
                            "no merge candidate for " + record.group.label() +
                                " and removing it would empty the table");
            }
            break;
        }
        case AnomalyTag::Custom:
            out.emplace_back(RemoveRows{rows});
            if (options.wranglers != nullptr) {
                for (const auto* w : options.wranglers->for_anomaly(record.type.custom_id)) {
                    out.emplace_back(CustomWrangle{w->name, cells, record.group});
                }
            }
            break;
    }
    return out;
}

auto apply_action(const Table& table, const RepairAction& action, std::span<const GroupSpec> specs,
                  const WranglerRegistry* wranglers) -> ActionResult {
    ActionResult result;
    result.inverse.prior_version = table.version();
    auto& diff = result.diff;

    auto finish_cells = [&](const std::vector<std::pair<CellRef, CellValue>>& writes) {
        auto [next, restores] = write_cells(table, writes, diff.cells_changed);
        result.table = std::move(next);
        result.inverse.payload = std::move(restores);
    };

    std::visit(
        Overloaded{
            [&](const ImputeGroupMean& a) {
                require_list(a.cells, "cell");
                for (const auto& c : a.cells) require_in_range(table, c);
                GroupSpec spec{a.group.group_by, a.group.target, 1};
                validate_spec(table, spec);
                const auto rows = rows_of_group(table, a.group);
                if (rows.empty()) {
                    throw Error(ErrorCode::StaleAction,
                                "group " + a.group.label() + " has no rows at this version");
                }
                for (const auto& c : a.cells) {
                    if (c.column != a.group.target || !std::binary_search(rows.begin(), rows.end(), c.row)) {
                        throw Error(ErrorCode::InvalidAction, "cell (" + std::to_string(c.row) + ", " +
                                                                  c.column + ") is not in group " +
                                                                  a.group.label());
                    }
                }
                const auto m = numeric_moments(table.column(a.group.target), rows);
                if (m.n == 0) {
                    throw Error(ErrorCode::EmptyMeanBasis,
                                "group " + a.group.label() + " has no numeric values to average");
                }
                std::vector<std::pair<CellRef, CellValue>> writes;
                for (const auto& c : a.cells) writes.emplace_back(c, CellValue::number(m.mean));
                finish_cells(writes);
            },
            [&](const ImputeColumnMean& a) {
                require_list(a.cells, "cell");
                std::map<std::string, double> means;
                for (const auto& c : a.cells) {
                    require_in_range(table, c);
                    if (means.count(c.column)) continue;
                    const auto idx = require_numeric_column(table, c.column);
                    const auto m = numeric_moments(table.column(idx));
                    if (m.n == 0) {
                        throw Error(ErrorCode::EmptyMeanBasis,
                                    "column '" + c.column + "' has no numeric values to average");
                    }
                    means[c.column] = m.mean;
                }
                std::vector<std::pair<CellRef, CellValue>> writes;
                for (const auto& c : a.cells) writes.emplace_back(c, CellValue::number(means[c.column]));
                finish_cells(writes);
            },
            [&](const RemoveRows& a) {
                require_list(a.rows, "row");
                if (a.rows.back() >= table.row_count()) {
                    throw Error(ErrorCode::StaleAction, "row " + std::to_string(a.rows.back()) +
                                                            " is out of range at version " +
                                                            std::to_string(table.version()));
                }
                RowReinserts reinserts;
                for (std::size_t r : a.rows) {
                    std::vector<CellValue> values;
                    values.reserve(table.column_count());
                    for (std::size_t c = 0; c < table.column_count(); ++c) {
                        values.push_back(table.column(c).cells[r]);
                    }
                    reinserts.rows.emplace_back(r, std::move(values));
                }
                std::vector<Column> columns;
                columns.reserve(table.column_count());
                for (std::size_t c = 0; c < table.column_count(); ++c) {
                    const auto& src = table.column(c);
                    Column col{src.name, src.kind, {}};
                    col.cells.reserve(src.cells.size() - a.rows.size());
                    std::size_t next = 0;
                    for (std::size_t r = 0; r < src.cells.size(); ++r) {
                        if (next < a.rows.size() && a.rows[next] == r) {
                            ++next;
                            continue;
                        }
                        col.cells.push_back(src.cells[r]);
                    }
                    columns.push_back(std::move(col));
                }
                result.table = table.with_columns(std::move(columns));
                result.inverse.payload = std::move(reinserts);
                diff.rows_removed = a.rows.size();
            },
            [&](const ConvertCells& a) {
                require_list(a.cells, "cell");
                std::vector<std::pair<CellRef, CellValue>> writes;
                for (const auto& c : a.cells) {
                    require_in_range(table, c);
                    require_numeric_column(table, c.column);
                    const auto& cell = table.cell(c);
                    std::optional<double> v;
                    if (cell.is_text()) v = convert_numeric_string(cell.as_text());
                    if (!v) {
                        throw Error(ErrorCode::NotConvertible,
                                    "cell (" + std::to_string(c.row) + ", " + c.column +
                                        ") is not convertible to a number");
                    }
                    writes.emplace_back(c, CellValue::number(*v));
                }
                finish_cells(writes);
            },
            [&](const MergeGroups& a) {
                if (a.source_key == a.dest_key) {
                    throw Error(ErrorCode::InvalidAction, "merge source and destination are equal");
                }
                const auto idx = table.column_index(a.column);
                if (table.column(idx).kind != ColumnKind::Categorical) {
                    throw Error(ErrorCode::KindMismatch, "column '" + a.column + "' is not categorical");
                }
                // A merge with nothing left to rewrite is a no-op, which keeps
                // repeated merges idempotent.
                std::vector<std::pair<CellRef, CellValue>> writes;
                const auto& cells = table.column(idx).cells;
                for (std::size_t r = 0; r < cells.size(); ++r) {
                    if (cells[r].is_text() && cells[r].as_text() == a.source_key) {
                        writes.emplace_back(CellRef{r, a.column}, CellValue::text(a.dest_key));
                    }
                }
                finish_cells(writes);
            },
            [&](const CustomWrangle& a) {
                require_list(a.cells, "cell");
                const CustomWrangler* w = wranglers ? wranglers->find(a.wrangler) : nullptr;
                if (w == nullptr) {
                    throw Error(ErrorCode::UnsupportedAction,
                                "custom wrangler '" + a.wrangler + "' is not registered");
                }
                for (const auto& c : a.cells) require_in_range(table, c);
                const auto stats = stats_of_group(table, a.group);
                std::vector<std::pair<CellRef, CellValue>> writes;
                for (const auto& c : a.cells) writes.emplace_back(c, w->transform(table.cell(c), stats));
                finish_cells(writes);
            },
        },
        action);

    result.table = result.table.with_version(table.version() + 1);
    if (!specs.empty()) fill_group_diff(diff, table, result.table, specs);
    return result;
}

auto apply_inverse(const Table& table, const InverseRecord& inverse) -> Table {
    return std::visit(
        Overloaded{
            [&](const CellRestores& r) {
                std::size_t ignored = 0;
                return write_cells(table, r.cells, ignored).first.with_version(inverse.prior_version);
            },
            [&](const RowReinserts& r) {
                std::vector<Column> columns;
                columns.reserve(table.column_count());
                const std::size_t total = table.row_count() + r.rows.size();
                for (std::size_t c = 0; c < table.column_count(); ++c) {
                    const auto& src = table.column(c);
                    Column col{src.name, src.kind, {}};
                    col.cells.reserve(total);
                    std::size_t next = 0;
                    std::size_t from = 0;
                    for (std::size_t pos = 0; pos < total; ++pos) {
                        if (next < r.rows.size() && r.rows[next].first == pos) {
                            col.cells.push_back(r.rows[next].second.at(c));
                            ++next;
                        } else {
                            col.cells.push_back(src.cells.at(from++));
                        }
                    }
                    columns.push_back(std::move(col));
                }
                return table.with_columns(std::move(columns)).with_version(inverse.prior_version);
            },
        },
        inverse.payload);
}

}  // namespace corral
