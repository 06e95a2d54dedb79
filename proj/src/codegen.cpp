#include "corral/codegen.hpp"

#include "corral/error.hpp"
#include "corral/version.hpp"

#include <json.hpp>

#include <map>
#include <numeric>
#include <sstream>

namespace corral {

namespace {

// Fixed prelude: an RFC 4180 reader and writer mirroring the engine's CSV
// rules, plus the step helpers the replay calls.
constexpr const char* kPrelude = R"PY(import decimal
import math
import re
import sys

_NUMBER = re.compile(r"[+-]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")


def _records(text, delim):
    pos, n = 0, len(text)
    while pos < n:
        fields = []
        buf, quoted = [], False
        while True:
            if pos < n and text[pos] == '"' and not buf and not quoted:
                quoted = True
                pos += 1
                while True:
                    ch = text[pos]
                    pos += 1
                    if ch == '"':
                        if pos < n and text[pos] == '"':
                            buf.append('"')
                            pos += 1
                        else:
                            break
                    else:
                        buf.append(ch)
            if pos >= n:
                fields.append(("".join(buf), quoted))
                yield fields
                return
            ch = text[pos]
            if ch == delim:
                pos += 1
                fields.append(("".join(buf), quoted))
                buf, quoted = [], False
                continue
            if ch in "\r\n":
                pos += 1
                if ch == "\r" and pos < n and text[pos] == "\n":
                    pos += 1
                fields.append(("".join(buf), quoted))
                break
            buf.append(ch)
            pos += 1
        yield fields


def load(path):
    with open(path, "rb") as f:
        text = f.read().decode("utf-8")
    if text.startswith("\ufeff"):
        text = text[1:]
    records = _records(text, DELIMITER)
    header = None
    if HAS_HEADER:
        header = [name for name, _ in next(records)]
    rows = []
    for fields in records:
        if header is None:
            header = ["column_%d" % (i + 1) for i in range(len(fields))]
        if len(header) > 1 and len(fields) == 1 and fields[0] == ("", False):
            continue
        cells = []
        for value, quoted in fields:
            if not quoted and (value == "" or value in NULL_TOKENS):
                cells.append(None)
            else:
                cells.append(value)
        rows.append((len(rows), cells))
    return {"header": header, "rows": rows}


def _needs_quotes(text):
    return any(c in text for c in (DELIMITER, '"', "\r", "\n"))


def _quote(text, force=False):
    if force or _needs_quotes(text):
        return '"' + text.replace('"', '""') + '"'
    return text


def _number(x):
    # Shortest round-trip digits, fixed or scientific, whichever is shorter.
    if x == 0:
        return "-0" if math.copysign(1.0, x) < 0 else "0"
    sign = "-" if x < 0 else ""
    _, raw, exp = decimal.Decimal(repr(abs(x))).as_tuple()
    digits = "".join(map(str, raw)).lstrip("0")
    stripped = digits.rstrip("0")
    exp += len(digits) - len(stripped)
    digits = stripped
    n = len(digits)
    if exp >= 0:
        fixed = str(int(abs(x)))  # integral; printed with its exact digits
    elif n + exp > 0:
        fixed = digits[: n + exp] + "." + digits[n + exp :]
    else:
        fixed = "0." + "0" * (-(n + exp)) + digits
    sci_exp = n - 1 + exp
    sci = digits[0] + ("." + digits[1:] if n > 1 else "") + "e" + ("-" if sci_exp < 0 else "+") + "%02d" % abs(sci_exp)
    return sign + (fixed if len(fixed) <= len(sci) else sci)


def _render(cell):
    if cell is None:
        return ""
    if isinstance(cell, float):
        return _number(cell)
    return _quote(cell, cell == "" or cell in NULL_TOKENS)


def write(table, path):
    lines = []
    if HAS_HEADER:
        lines.append(DELIMITER.join(_quote(name) for name in table["header"]))
    numeric = [name in NUMERIC for name in table["header"]]
    for _, cells in table["rows"]:
        lines.append(DELIMITER.join(_render(_value(c, n)) for c, n in zip(cells, numeric)))
    out = "".join(line + "\n" for line in lines)
    if path == "-":
        sys.stdout.write(out)
    else:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(out)


def _column(table, name):
    return table["header"].index(name)


def _value(cell, numeric):
    if cell is None or isinstance(cell, float):
        return cell
    if numeric and _NUMBER.fullmatch(cell):
        number = float(cell)
        if math.isfinite(number):
            return number
    return cell


def set_cells(table, column, values):
    c = _column(table, column)
    for original, cells in table["rows"]:
        if original in values:
            cells[c] = values[original]


def remove_rows(table, originals):
    table["rows"] = [row for row in table["rows"] if row[0] not in originals]


def rewrite_key(table, column, source, dest):
    c = _column(table, column)
    for _, cells in table["rows"]:
        if cells[c] == source:
            cells[c] = dest


def apply_wrangler(table, column, originals, fn, group_mean):
    c = _column(table, column)
    numeric = column in NUMERIC
    for original, cells in table["rows"]:
        if original in originals:
            result = fn(_value(cells[c], numeric), group_mean)
            if isinstance(result, (int, float)) and not isinstance(result, bool):
                result = float(result)
            cells[c] = result
)PY";

auto py_string(const std::string& s) -> std::string { return nlohmann::json(s).dump(); }

auto py_float(double v) -> std::string {
    std::string s = format_number(v);
    if (s.find_first_of(".e") == std::string::npos) s += ".0";
    return s;
}

auto py_cell(const CellValue& v) -> std::string {
    if (v.is_missing()) return "None";
    if (v.is_number()) return py_float(v.as_number());
    return py_string(v.as_text());
}

auto py_index_set(const std::vector<std::size_t>& idx) -> std::string {
    std::ostringstream os;
    os << "{";
    for (std::size_t i = 0; i < idx.size(); ++i) os << (i ? ", " : "") << idx[i];
    os << "}";
    return os.str();
}

auto group_mean_at(const Table& table, const GroupId& group) -> std::optional<double> {
    const auto by = table.find_column(group.group_by);
    const auto target = table.find_column(group.target);
    if (!by || !target) return std::nullopt;
    std::vector<std::size_t> rows;
    const auto& cells = table.column(*by).cells;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        const bool match = group.key ? (cells[r].is_text() && cells[r].as_text() == *group.key)
                                     : cells[r].is_missing();
        if (match) rows.push_back(r);
    }
    const auto m = numeric_moments(table.column(*target), rows);
    if (m.n == 0) return std::nullopt;
    return m.mean;
}

}  // namespace

auto generate_script(const Table& original, std::span<const RepairAction> actions,
                     const SourceInfo& source, const WranglerRegistry* wranglers) -> ScriptArtifact {
    ScriptArtifact art;
    art.input_ref = source.name.empty() ? "input.csv" : source.name;
    art.action_count = actions.size();

    std::ostringstream steps;
    std::ostringstream functions;
    std::map<std::string, std::string> function_names;

    Table table = original;
    std::vector<std::size_t> positions(original.row_count());
    std::iota(positions.begin(), positions.end(), std::size_t{0});

    for (std::size_t i = 0; i < actions.size(); ++i) {
        const auto& action = actions[i];
        std::string summary = describe_action(action);
        for (char& ch : summary) {
            if (ch == '\n' || ch == '\r') ch = ' ';
        }
        steps << "    # step " << (i + 1) << ": " << summary << "\n";

        if (const auto* custom = std::get_if<CustomWrangle>(&action)) {
            const CustomWrangler* w = wranglers ? wranglers->find(custom->wrangler) : nullptr;
            if (w == nullptr) {
                throw Error(ErrorCode::UnsupportedAction,
                            "custom wrangler '" + custom->wrangler + "' is not registered");
            }
            if (!w->python_expr) {
                art.verifiable = false;
                art.warnings.push_back("step " + std::to_string(i + 1) + ": custom wrangler '" +
                                       custom->wrangler + "' has no code template");
                steps << "    # TODO: custom wrangler " << py_string(custom->wrangler)
                      << " has no code template; translate by hand.\n";
                steps << "    #   parameters: " << nlohmann::json(custom->wrangler).dump() << " on";
                for (const auto& c : custom->cells) {
                    const std::size_t orig = c.row < positions.size() ? positions[c.row] : c.row;
                    steps << " (" << orig << ", " << py_string(c.column) << ")";
                }
                steps << "\n";
            } else {
                auto [it, inserted] = function_names.emplace(w->name, "wrangler_" + std::to_string(function_names.size()));
                if (inserted) {
                    functions << "\n\n# custom wrangler " << py_string(w->name) << "\n"
                              << "def " << it->second << "(x, group_mean):\n"
                              << "    return " << *w->python_expr << "\n";
                }
                const auto mean = group_mean_at(table, custom->group);
                std::map<std::string, std::vector<std::size_t>> by_column;
                for (const auto& c : custom->cells) by_column[c.column].push_back(positions.at(c.row));
                for (const auto& [column, rows] : by_column) {
                    steps << "    apply_wrangler(table, " << py_string(column) << ", " << py_index_set(rows)
                          << ", " << it->second << ", " << (mean ? py_float(*mean) : "None") << ")\n";
                }
            }
        }

        auto result = apply_action(table, action, {}, wranglers);

        std::visit(
            [&](const auto& a) {
                using T = std::decay_t<decltype(a)>;
                if constexpr (std::is_same_v<T, RemoveRows>) {
                    std::vector<std::size_t> orig;
                    for (std::size_t r : a.rows) orig.push_back(positions[r]);
                    steps << "    remove_rows(table, " << py_index_set(orig) << ")\n";
                    std::vector<std::size_t> kept;
                    kept.reserve(positions.size() - a.rows.size());
                    std::size_t next = 0;
                    for (std::size_t r = 0; r < positions.size(); ++r) {
                        if (next < a.rows.size() && a.rows[next] == r) {
                            ++next;
                        } else {
                            kept.push_back(positions[r]);
                        }
                    }
                    positions = std::move(kept);
                } else if constexpr (std::is_same_v<T, MergeGroups>) {
                    steps << "    rewrite_key(table, " << py_string(a.column) << ", " << py_string(a.source_key)
                          << ", " << py_string(a.dest_key) << ")\n";
                } else if constexpr (std::is_same_v<T, CustomWrangle>) {
                    // Emitted above, before the table advanced.
                } else {
                    std::map<std::string, std::vector<std::pair<std::size_t, std::string>>> by_column;
                    for (const auto& c : a.cells) {
                        by_column[c.column].emplace_back(positions[c.row], py_cell(result.table.cell(c)));
                    }
                    for (const auto& [column, values] : by_column) {
                        steps << "    set_cells(table, " << py_string(column) << ", {";
                        for (std::size_t k = 0; k < values.size(); ++k) {
                            steps << (k ? ", " : "") << values[k].first << ": " << values[k].second;
                        }
                        steps << "})\n";
                    }
                }
            },
            action);
        table = std::move(result.table);
    }

    std::ostringstream numeric;
    numeric << "{";
    bool first = true;
    for (std::size_t c = 0; c < original.column_count(); ++c) {
        if (original.column(c).kind != ColumnKind::Numeric) continue;
        numeric << (first ? "" : ", ") << py_string(original.column(c).name);
        first = false;
    }
    numeric << "}";
    const std::string numeric_set = first ? "set()" : numeric.str();

    std::ostringstream tokens;
    tokens << "{";
    for (std::size_t k = 0; k < source.csv.null_tokens.size(); ++k) {
        tokens << (k ? ", " : "") << py_string(source.csv.null_tokens[k]);
    }
    tokens << "}";
    const std::string token_set = source.csv.null_tokens.empty() ? "set()" : tokens.str();

    std::ostringstream out;
    out << "#!/usr/bin/env python3\n"
        << "# Replays a corral wrangling session on the original dataset.\n"
        << "# engine: corral " << kEngineVersion << "\n"
        << "# input: " << art.input_ref << "\n"
        << "# input sha256: " << (source.fingerprint.empty() ? "unknown" : source.fingerprint) << "\n"
        << "# actions: " << actions.size() << "\n"
        << "# usage: python3 " << "script.py [input.csv] [output.csv|-]\n"
        << kPrelude << "\n"
        << "INPUT = " << py_string(art.input_ref) << "\n"
        << "DELIMITER = " << py_string(std::string(1, source.csv.delimiter)) << "\n"
        << "HAS_HEADER = " << (source.csv.has_header ? "True" : "False") << "\n"
        << "NULL_TOKENS = " << token_set << "\n"
        << "NUMERIC = " << numeric_set << "\n"
        << functions.str() << "\n\n"
        << "def main(argv):\n"
        << "    table = load(argv[1] if len(argv) > 1 else INPUT)\n"
        << steps.str()
        << "    write(table, argv[2] if len(argv) > 2 else \"-\")\n"
        << "\n\n"
        << "if __name__ == \"__main__\":\n"
        << "    main(sys.argv)\n";
    art.source_text = out.str();
    return art;
}

auto generate_script(const Session& session) -> ScriptArtifact {
    const auto actions = session.actions();
    return generate_script(session.original(), actions, session.source(), session.options().wranglers.get());
}

}  // namespace corral
