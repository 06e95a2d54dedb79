#include "corral/error.hpp"
#include "corral/table.hpp"

#include <algorithm>

namespace corral {

namespace {

struct Field {
    std::string text;
    bool quoted = false;
};

auto valid_utf8(std::string_view s) -> bool {
    std::size_t i = 0;
    while (i < s.size()) {
        auto c = static_cast<unsigned char>(s[i]);
        std::size_t extra = 0;
        if (c < 0x80) {
            ++i;
            continue;
        }
        if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
            extra = 1;
        } else if ((c & 0xF0) == 0xE0) {
            extra = 2;
        } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
            extra = 3;
        } else {
            return false;
        }
        if (i + extra >= s.size()) return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
        }
        i += extra + 1;
    }
    return true;
}

// Reads one record starting at `pos`. Returns false at end of input.
class RecordReader {
public:
    RecordReader(std::string_view data, char delimiter) : data_(data), delim_(delimiter) {}

    auto next(std::vector<Field>& fields, std::size_t record_no) -> bool {
        fields.clear();
        if (pos_ >= data_.size()) return false;
        Field field;
        while (true) {
            if (pos_ < data_.size() && data_[pos_] == '"' && field.text.empty() && !field.quoted) {
                field.quoted = true;
                ++pos_;
                while (true) {
                    if (pos_ >= data_.size()) {
                        throw CsvError(record_no, "unterminated quoted field");
                    }
                    char ch = data_[pos_++];
                    if (ch == '"') {
                        if (pos_ < data_.size() && data_[pos_] == '"') {
                            field.text.push_back('"');
                            ++pos_;
                        } else {
                            break;
                        }
                    } else {
                        field.text.push_back(ch);
                    }
                }
                if (pos_ < data_.size() && data_[pos_] != delim_ && data_[pos_] != '\n' &&
                    data_[pos_] != '\r') {
                    throw CsvError(record_no, "unexpected character after closing quote");
                }
            }
            if (pos_ >= data_.size()) {
                fields.push_back(std::move(field));
                return true;
            }
            char ch = data_[pos_];
            if (ch == delim_) {
                ++pos_;
                fields.push_back(std::move(field));
                field = Field{};
                continue;
            }
            if (ch == '\n' || ch == '\r') {
                ++pos_;
                if (ch == '\r' && pos_ < data_.size() && data_[pos_] == '\n') ++pos_;
                fields.push_back(std::move(field));
                return true;
            }
            if (field.quoted) {
                throw CsvError(record_no, "unexpected character after closing quote");
            }
            if (ch == '"') {
                throw CsvError(record_no, "quote inside unquoted field");
            }
            field.text.push_back(ch);
            ++pos_;
        }
    }

private:
    std::string_view data_;
    char delim_;
    std::size_t pos_ = 0;
};

auto is_blank(const std::vector<Field>& fields) -> bool {
    return fields.size() == 1 && !fields[0].quoted && fields[0].text.empty();
}

auto needs_quotes(std::string_view text, char delimiter) -> bool {
    return text.find_first_of(std::string{delimiter, '"', '\r', '\n'}) != std::string_view::npos;
}

void append_field(std::string& out, std::string_view text, bool force_quotes, char delimiter) {
    if (!force_quotes && !needs_quotes(text, delimiter)) {
        out.append(text);
        return;
    }
    out.push_back('"');
    for (char ch : text) {
        if (ch == '"') out.push_back('"');
        out.push_back(ch);
    }
    out.push_back('"');
}

}  // namespace

auto load_csv(std::string_view bytes, const CsvOptions& options, std::string name) -> Table {
    if (bytes.size() >= 3 && bytes.substr(0, 3) == "\xEF\xBB\xBF") bytes.remove_prefix(3);
    if (!valid_utf8(bytes)) throw CsvError(0, "input is not valid UTF-8");

    RecordReader reader(bytes, options.delimiter);
    std::vector<Field> fields;
    std::vector<Column> columns;

    std::size_t record_no = 0;
    if (options.has_header) {
        if (!reader.next(fields, 0)) throw Error(ErrorCode::EmptyInput, "input has no header row");
        for (auto& f : fields) columns.push_back(Column{std::move(f.text), ColumnKind::Categorical, {}});
        std::vector<std::string> names;
        for (const auto& c : columns) names.push_back(c.name);
        std::sort(names.begin(), names.end());
        if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
            throw CsvError(0, "duplicate column name in header");
        }
    }

    auto is_null = [&](const Field& f) {
        if (f.quoted) return false;
        return std::find(options.null_tokens.begin(), options.null_tokens.end(), f.text) !=
                   options.null_tokens.end() ||
               f.text.empty();
    };

    while (reader.next(fields, record_no + 1)) {
        if (columns.empty()) {
            for (std::size_t i = 0; i < fields.size(); ++i) {
                columns.push_back(
                    Column{"column_" + std::to_string(i + 1), ColumnKind::Categorical, {}});
            }
        }
        if (columns.size() > 1 && is_blank(fields)) continue;
        ++record_no;
        if (fields.size() != columns.size()) {
            throw CsvError(record_no, "expected " + std::to_string(columns.size()) +
                                          " fields, found " + std::to_string(fields.size()));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            columns[c].cells.push_back(is_null(fields[c]) ? CellValue::missing()
                                                          : CellValue::text(std::move(fields[c].text)));
        }
    }
    if (record_no == 0) throw Error(ErrorCode::EmptyInput, "input has no data rows");
    return Table(std::move(name), std::move(columns));
}

auto serialize_csv(const Table& table, const CsvOptions& options) -> std::string {
    std::string out;
    const char delim = options.delimiter;
    auto is_null_token = [&](const std::string& s) {
        return s.empty() || std::find(options.null_tokens.begin(), options.null_tokens.end(), s) !=
                                options.null_tokens.end();
    };
    if (options.has_header) {
        for (std::size_t c = 0; c < table.column_count(); ++c) {
            if (c > 0) out.push_back(delim);
            append_field(out, table.column(c).name, false, delim);
        }
        out.push_back('\n');
    }
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        for (std::size_t c = 0; c < table.column_count(); ++c) {
            if (c > 0) out.push_back(delim);
            const auto& cell = table.column(c).cells[r];
            if (cell.is_number()) {
                out.append(format_number(cell.as_number()));
            } else if (cell.is_text()) {
                append_field(out, cell.as_text(), is_null_token(cell.as_text()), delim);
            }
        }
        out.push_back('\n');
    }
    return out;
}

}  // namespace corral
