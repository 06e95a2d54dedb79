#include "support.hpp"

#include "corral/error.hpp"
#include "corral/repair.hpp"

#include <doctest.h>

#include <algorithm>
#include <cctype>

using namespace corral;
using corral::test::Rng;
using corral::test::same_cells;

namespace {

auto income() -> Table { return corral::test::load_fixture("income.csv"); }

auto code_of(auto&& fn) -> ErrorCode {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Internal;
}

auto record_at(const Table& t, std::vector<GroupSpec> specs, const AnomalyType& type, std::size_t row,
               DetectorConfig config = {}) -> AnomalyRecord {
    const auto d = run_detectors(t, specs, config);
    for (const auto& r : d.records) {
        if (r.type == type && !r.cells.empty() && r.cells[0].row == row) return r;
    }
    FAIL("no such record");
    return {};
}

auto groups(const Table& t, const GroupSpec& spec) -> std::vector<Group> { return enumerate_groups(t, spec).groups; }

auto tags(const std::vector<RepairAction>& actions) -> std::vector<std::string> {
    std::vector<std::string> out;
    for (const auto& a : actions) out.emplace_back(action_tag(a));
    return out;
}

auto oracle_normalize(std::string_view s) -> std::u32string {
    std::u32string out;
    for (unsigned char c : s) {
        if (std::ispunct(c)) continue;
        out.push_back(static_cast<char32_t>(std::tolower(c)));
    }
    return out;
}

}  // namespace

TEST_CASE("conversion grammar") {
    struct Case {
        const char* text;
        std::optional<double> expected;
    };
    const std::vector<Case> cases = {
        {"12k", 12000.0},     {"$1,200", 1200.0},  {"1.5M", 1.5e6},   {"2b", 2e9},          {" 42 ", 42.0},
        {"-$5", -5.0},        {"$-5", -5.0},       {"\xE2\x82\xAC" "3.50", 3.5}, {"\xC2\xA3" "10k", 10000.0},
        {"1,234,567", 1234567.0}, {".5", 0.5},     {"1.1k", 1100.0},  {"+7", 7.0},          {"3K", 3000.0},
        {"abc", std::nullopt}, {"12kk", std::nullopt}, {"1,23", std::nullopt}, {"1,2345", std::nullopt},
        {"$", std::nullopt},   {"k", std::nullopt},    {"--5", std::nullopt},  {"12 k", std::nullopt},
        {"1e5", std::nullopt}, {"", std::nullopt},     {",100", std::nullopt}, {"1234,567", std::nullopt},
    };
    for (const auto& c : cases) {
        CAPTURE(c.text);
        CHECK(convert_numeric_string(c.text) == c.expected);
    }
}

TEST_CASE("initialisms match their phrases") {
    CHECK(key_similarity("USA", "United States of America") == 1.0);
    CHECK(key_similarity("United States of America", "USA") == 1.0);
    CHECK(key_similarity("UK", "United Kingdom") == 1.0);
    CHECK(key_similarity("U.S.A.", "United States of America") == 1.0);
    CHECK(key_similarity("USA", "Canada") < 0.6);
}

TEST_CASE("key similarity equals one minus normalized edit distance") {
    CHECK(key_similarity("Canada", "canada") == 1.0);
    CHECK(key_similarity("", "") == 1.0);
    CHECK(key_similarity("abc", "") == 0.0);
    Rng rng(13);
    const std::string alphabet = "abcde .,-";
    for (int i = 0; i < 3000; ++i) {
        std::string a;
        std::string b;
        for (auto n = rng() % 9; n > 0; --n) a += alphabet[rng() % alphabet.size()];
        for (auto n = rng() % 9; n > 0; --n) b += alphabet[rng() % alphabet.size()];
        const auto na = oracle_normalize(a);
        const auto nb = oracle_normalize(b);
        const std::size_t longest = std::max(na.size(), nb.size());
        const double expected =
            longest == 0 ? 1.0
                         : 1.0 - static_cast<double>(corral::test::edit_distance(na, nb)) / static_cast<double>(longest);
        CAPTURE(a);
        CAPTURE(b);
        CHECK(key_similarity(a, b) == expected);
        CHECK(key_similarity(a, b) == key_similarity(b, a));
    }
}

TEST_CASE("merge target for USA is the long form") {
    const auto t = corral::test::load_fixture("countries.csv");
    const auto gs = groups(t, {"Country", "Population", 1});
    const auto small = std::find_if(gs.begin(), gs.end(), [](const Group& g) { return g.key == "USA"; });
    REQUIRE(small != gs.end());
    const auto target = suggest_merge_target(*small, gs);
    REQUIRE(target);
    CHECK(*target->key == "United States of America");
    CHECK_FALSE(suggest_merge_target(*small, gs, 1.01).has_value());
}

TEST_CASE("merge target ties break by size then key") {
    auto g = [](std::string key, std::size_t n) {
        Group out;
        out.spec = {"k", "v", 1};
        out.key = std::move(key);
        out.rows.resize(n);
        return out;
    };
    const std::vector<Group> cands = {g("abd", 1), g("abe", 3), g("abf", 3), g("abc", 1)};
    const auto t = suggest_merge_target(g("abc", 1), cands);
    REQUIRE(t);
    CHECK(*t->key == "abe");
    const auto fixed = [](std::string_view, std::string_view) { return 0.9; };
    CHECK(*suggest_merge_target(g("zzz", 1), cands, 0.6, fixed)->key == "abe");
}

TEST_CASE("suggestions come in a fixed order per type") {
    const auto t = income();
    const GroupSpec spec{"Country", "Income", 1};
    const auto gs = groups(t, spec);

    const auto missing = record_at(t, {spec}, kMissingValue, 2);
    CHECK(tags(suggest_repairs(missing, t, gs)) ==
          std::vector<std::string>{"impute_group_mean", "impute_column_mean", "remove_rows"});

    const auto mismatch = record_at(t, {spec}, kTypeMismatch, 3);
    const auto fixes = suggest_repairs(mismatch, t, gs);
    CHECK(tags(fixes) == std::vector<std::string>{"convert_cells", "remove_rows"});
    CHECK(std::get<ConvertCells>(fixes[0]).cells == std::vector<CellRef>{{3, "Income"}});

    const auto outlier = record_at(t, {spec}, kOutlier, 7);
    CHECK(tags(suggest_repairs(outlier, t, gs)) ==
          std::vector<std::string>{"remove_rows", "impute_group_mean", "impute_column_mean"});

    auto stale = missing;
    stale.version = 4;
    CHECK(code_of([&] { (void)suggest_repairs(stale, t, gs); }) == ErrorCode::StaleRecord);
}

TEST_CASE("unconvertible text is only offered removal") {
    const auto t = infer_kinds(load_csv("k,v\na,1\na,2\na,abc\n"));
    const GroupSpec spec{"k", "v", 1};
    const auto r = record_at(t, {spec}, kTypeMismatch, 2);
    CHECK(tags(suggest_repairs(r, t, groups(t, spec))) == std::vector<std::string>{"remove_rows"});
}

TEST_CASE("incomplete groups are offered a merge, then removal") {
    const auto t = corral::test::load_fixture("countries.csv");
    const GroupSpec spec{"Country", "Population", 1};
    const auto d = run_detectors(t, std::vector<GroupSpec>{spec}, DetectorConfig{});
    const auto it = std::find_if(d.records.begin(), d.records.end(),
                                 [](const AnomalyRecord& r) { return r.type == kIncompleteGroup; });
    REQUIRE(it != d.records.end());
    CHECK(it->group.key == "USA");
    const auto fixes = suggest_repairs(*it, t, groups(t, spec));
    REQUIRE(tags(fixes) == std::vector<std::string>{"merge_groups", "remove_rows"});
    const auto& merge = std::get<MergeGroups>(fixes[0]);
    CHECK(merge.source_key == "USA");
    CHECK(merge.dest_key == "United States of America");
}

TEST_CASE("an incomplete group covering the whole table has no suggestion") {
    const auto t = infer_kinds(load_csv("k,v\na,1\n"));
    const GroupSpec spec{"k", "v", 1};
    const auto d = run_detectors(t, std::vector<GroupSpec>{spec}, DetectorConfig{});
    REQUIRE(d.records.size() == 1);
    CHECK(code_of([&] { (void)suggest_repairs(d.records[0], t, groups(t, spec)); }) == ErrorCode::NoSuggestion);
}

TEST_CASE("custom records list removal then registered wranglers by name") {
    const auto t = income();
    WranglerRegistry reg;
    auto clamp = [](const CellValue&, const GroupStats& s) { return CellValue::number(*s.mean); };
    reg.add({"zeta", "zero", clamp, std::nullopt});
    reg.add({"alpha", "zero", clamp, std::nullopt});
    reg.add({"other", "else", clamp, std::nullopt});
    CHECK(code_of([&] { reg.add({"alpha", "zero", clamp, std::nullopt}); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([&] { reg.add({"bad name", "zero", clamp, std::nullopt}); }) == ErrorCode::InvalidConfig);

    DetectorConfig c;
    c.custom_rules = {{"zero", "value == 0"}};
    const GroupSpec spec{"Country", "Income", 1};
    const auto r = record_at(t, {spec}, AnomalyType::custom("zero"), 0, c);
    SuggestOptions opts;
    opts.wranglers = &reg;
    const auto fixes = suggest_repairs(r, t, groups(t, spec), opts);
    REQUIRE(tags(fixes) == std::vector<std::string>{"remove_rows", "custom", "custom"});
    CHECK(std::get<CustomWrangle>(fixes[1]).wrangler == "alpha");
    CHECK(std::get<CustomWrangle>(fixes[2]).wrangler == "zeta");

    const auto applied = apply_action(t, fixes[1], {}, &reg);
    CHECK(applied.table.cell({0, "Income"}).as_number() == doctest::Approx(52000.0 / 3.0));
    CHECK(code_of([&] { (void)apply_action(t, fixes[1]); }) == ErrorCode::UnsupportedAction);
}

TEST_CASE("impute group mean writes the group's mean and can be inverted") {
    const auto t = income();
    const RepairAction a = ImputeGroupMean{{{2, "Income"}}, {"Country", "Income", std::string("Bhutan")}};
    const auto res = apply_action(t, a);
    CHECK(res.table.version() == t.version() + 1);
    CHECK(res.table.cell({2, "Income"}).as_number() == 52000.0 / 3.0);
    CHECK(res.diff.cells_changed == 1);
    const auto back = apply_inverse(res.table, res.inverse);
    CHECK(same_cells(back, t));
    CHECK(back.version() == t.version());
}

TEST_CASE("action validation errors") {
    const auto t = income();
    const GroupId bhutan{"Country", "Income", std::string("Bhutan")};
    CHECK(code_of([&] { (void)apply_action(t, ImputeGroupMean{{}, bhutan}); }) == ErrorCode::InvalidAction);
    CHECK(code_of([&] { (void)apply_action(t, ImputeGroupMean{{{2, "Income"}, {1, "Income"}}, bhutan}); }) ==
          ErrorCode::InvalidAction);
    CHECK(code_of([&] { (void)apply_action(t, ImputeGroupMean{{{5, "Income"}}, bhutan}); }) == ErrorCode::InvalidAction);
    CHECK(code_of([&] { (void)apply_action(t, ImputeGroupMean{{{50, "Income"}}, bhutan}); }) == ErrorCode::StaleAction);
    CHECK(code_of([&] { (void)apply_action(t, ImputeGroupMean{{{2, "Nope"}}, bhutan}); }) == ErrorCode::StaleAction);
    CHECK(code_of([&] {
              (void)apply_action(t, ImputeGroupMean{{{2, "Income"}}, {"Country", "Income", std::string("Atlantis")}});
          }) == ErrorCode::StaleAction);
    CHECK(code_of([&] { (void)apply_action(t, RemoveRows{{3, 3}}); }) == ErrorCode::InvalidAction);
    CHECK(code_of([&] { (void)apply_action(t, RemoveRows{{10}}); }) == ErrorCode::StaleAction);
    CHECK(code_of([&] { (void)apply_action(t, ImputeColumnMean{{{0, "Degree"}}}); }) == ErrorCode::KindMismatch);
    CHECK(code_of([&] { (void)apply_action(t, ConvertCells{{{0, "Income"}}}); }) == ErrorCode::NotConvertible);
    CHECK(code_of([&] { (void)apply_action(t, ConvertCells{{{0, "Degree"}}}); }) == ErrorCode::KindMismatch);
    CHECK(code_of([&] { (void)apply_action(t, MergeGroups{"Degree", "MS", "MS"}); }) == ErrorCode::InvalidAction);
    CHECK(code_of([&] { (void)apply_action(t, MergeGroups{"Income", "1", "2"}); }) == ErrorCode::KindMismatch);
    CHECK(code_of([&] { (void)apply_action(t, MergeGroups{"Nope", "1", "2"}); }) == ErrorCode::ColumnNotFound);

    const auto empty = infer_kinds(load_csv("k,v\na,1\nb,x\nb,\n"));
    CHECK(code_of([&] {
              (void)apply_action(empty, ImputeGroupMean{{{2, "v"}}, {"k", "v", std::string("b")}});
          }) == ErrorCode::EmptyMeanBasis);
}

TEST_CASE("convert turns 12k into 12000") {
    const auto t = income();
    const auto res = apply_action(t, ConvertCells{{{3, "Income"}}});
    CHECK(res.table.cell({3, "Income"}) == CellValue::number(12000));
}

TEST_CASE("column mean imputation uses every number in the column") {
    const auto t = income();
    const auto res = apply_action(t, ImputeColumnMean{{{2, "Income"}}});
    CHECK(res.table.cell({2, "Income"}).as_number() == 1203000.0 / 8.0);
}

TEST_CASE("merging rewrites only the source key and is idempotent") {
    const auto t = income();
    const auto once = apply_action(t, MergeGroups{"Degree", "PhD", "MS"});
    CHECK(once.diff.cells_changed == 3);
    for (std::size_t r = 0; r < t.row_count(); ++r) {
        const auto& before = t.cell({r, "Degree"}).as_text();
        CHECK(once.table.cell({r, "Degree"}).as_text() == (before == "PhD" ? "MS" : before));
    }
    const auto twice = apply_action(once.table, MergeGroups{"Degree", "PhD", "MS"});
    CHECK(twice.diff.cells_changed == 0);
    CHECK(same_cells(twice.table, once.table));
    CHECK(same_cells(apply_inverse(twice.table, twice.inverse), once.table));
}

TEST_CASE("removing the zero rows shifts the Bhutan mean") {
    const auto t = income();
    const std::vector<GroupSpec> specs = {{"Country", "Income", 1}, {"Degree", "Income", 1}};
    const auto res = apply_action(t, RemoveRows{{0, 1}}, specs);
    CHECK(res.table.row_count() == 8);
    CHECK(res.diff.rows_removed == 2);
    const GroupId bhutan{"Country", "Income", std::string("Bhutan")};
    const GroupId bs{"Degree", "Income", std::string("BS")};
    CHECK(std::count(res.diff.affected_groups.begin(), res.diff.affected_groups.end(), bhutan) == 1);
    CHECK(std::count(res.diff.affected_groups.begin(), res.diff.affected_groups.end(), bs) == 1);
    CHECK(res.diff.mean_shift.at(bhutan) == doctest::Approx(52000.0 - 52000.0 / 3.0));
    CHECK(res.diff.mean_shift.at(GroupId{"Country", "Income", std::string("Lesotho")}) == 0.0);
    const GroupId lesotho{"Country", "Income", std::string("Lesotho")};
    CHECK(std::count(res.diff.affected_groups.begin(), res.diff.affected_groups.end(), lesotho) == 0);
    CHECK(same_cells(apply_inverse(res.table, res.inverse), t));
}

TEST_CASE("normalize sorts and deduplicates") {
    RepairAction a = RemoveRows{{5, 1, 5, 3}};
    normalize_action(a);
    CHECK(std::get<RemoveRows>(a).rows == std::vector<std::size_t>{1, 3, 5});
    RepairAction b = ConvertCells{{{2, "b"}, {1, "b"}, {2, "b"}, {1, "a"}}};
    normalize_action(b);
    CHECK(std::get<ConvertCells>(b).cells == std::vector<CellRef>{{1, "a"}, {1, "b"}, {2, "b"}});
}

TEST_CASE("descriptions are readable") {
    CHECK(describe_action(RemoveRows{{1}}) == "Remove 1 row");
    CHECK(describe_action(MergeGroups{"Country", "USA", "United States of America"}) ==
          "Merge Country \"USA\" into \"United States of America\"");
    CHECK(describe_action(ConvertCells{{{3, "Income"}}}) == "Convert 1 cell in Income to numbers");
}

TEST_CASE("property: inverses restore exactly and only listed cells change") {
    Rng rng(17);
    std::size_t applied = 0;
    for (int i = 0; i < 300; ++i) {
        const auto session = corral::test::random_session(rng);
        const auto& t = session.table();
        for (int k = 0; k < 5; ++k) {
            const auto action = corral::test::random_action(rng, session);
            if (!action) continue;
            ActionResult res;
            try {
                res = apply_action(t, *action, session.specs());
            } catch (const Error&) {
                continue;
            }
            ++applied;
            CHECK(res.table.version() == t.version() + 1);
            const auto back = apply_inverse(res.table, res.inverse);
            CHECK(same_cells(back, t));
            CHECK(back.version() == t.version());

            std::set<CellRef> allowed;
            if (const auto* a = std::get_if<ImputeGroupMean>(&*action)) allowed.insert(a->cells.begin(), a->cells.end());
            if (const auto* a = std::get_if<ImputeColumnMean>(&*action)) allowed.insert(a->cells.begin(), a->cells.end());
            if (const auto* a = std::get_if<ConvertCells>(&*action)) allowed.insert(a->cells.begin(), a->cells.end());
            if (const auto* a = std::get_if<MergeGroups>(&*action)) {
                const auto& col = t.column(a->column);
                for (std::size_t r = 0; r < col.cells.size(); ++r) {
                    if (col.cells[r] == CellValue::text(a->source_key)) allowed.insert({r, a->column});
                }
            }
            if (const auto* a = std::get_if<RemoveRows>(&*action)) {
                REQUIRE(res.table.row_count() == t.row_count() - a->rows.size());
                std::size_t out = 0;
                for (std::size_t r = 0; r < t.row_count(); ++r) {
                    if (std::binary_search(a->rows.begin(), a->rows.end(), r)) continue;
                    for (std::size_t c = 0; c < t.column_count(); ++c) {
                        CHECK(res.table.column(c).cells[out] == t.column(c).cells[r]);
                    }
                    ++out;
                }
                continue;
            }
            std::size_t changed = 0;
            for (std::size_t c = 0; c < t.column_count(); ++c) {
                const auto& name = t.column(c).name;
                for (std::size_t r = 0; r < t.row_count(); ++r) {
                    const bool same = res.table.cell({r, name}) == t.cell({r, name});
                    if (!same) {
                        ++changed;
                        CHECK(allowed.count({r, name}) == 1);
                    }
                }
            }
            CHECK(changed == res.diff.cells_changed);
        }
    }
    CHECK(applied > 300);
}

TEST_CASE("property: merges are idempotent") {
    Rng rng(19);
    for (int i = 0; i < 200; ++i) {
        const auto session = corral::test::random_session(rng);
        for (int k = 0; k < 10; ++k) {
            const auto action = corral::test::random_action(rng, session);
            if (!action || !std::holds_alternative<MergeGroups>(*action)) continue;
            const auto once = apply_action(session.table(), *action);
            const auto twice = apply_action(once.table, *action);
            CHECK(same_cells(once.table, twice.table));
            CHECK(twice.diff.cells_changed == 0);
        }
    }
}
