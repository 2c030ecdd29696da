#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "occ/csv.hpp"
#include "occ/errors.hpp"
#include "occ/ingest.hpp"
#include "support.hpp"

using namespace occ;

namespace {

RawRow make_row(std::string text, std::string h1, std::string lang = "en",
                std::string source = "src") {
    RawRow row;
    row.occ_text = std::move(text);
    row.hisco[0] = std::move(h1);
    row.lang = std::move(lang);
    row.source = std::move(source);
    return row;
}

LabelSpace two_code_space() {
    return LabelSpace::from_codes({HiscoCode::parse("61110"), HiscoCode::parse("64100")});
}

}  // namespace

TEST_CASE("normalize_text applies the table, lowercases and collapses spaces") {
    const TranslitTable table = default_translit_table();
    CHECK(normalize_text("Gårdmand", table) == "gaardmand");
    CHECK(normalize_text("  FARMER   and  fisher ", table) == "farmer and fisher");
    CHECK(normalize_text("væver", table) == "vaever");
    CHECK(normalize_text("SØMAND", table) == "soemand");  // uppercase Ø lowers first
    CHECK(normalize_text("", table).empty());
    CHECK(normalize_text(" \t\n ", table).empty());
}

TEST_CASE("normalize_text is idempotent for ascii-producing tables") {
    const TranslitTable table = default_translit_table();
    for (const char* text : {"Gårdmand", "he is a farmer", "  Væver  og  SMED ", "x"}) {
        const std::string once = normalize_text(text, table);
        CHECK(normalize_text(once, table) == once);
    }
}

TEST_CASE("clean_dataset keeps valid rows and counts drops by reason") {
    const LabelSpace space = two_code_space();
    const TranslitTable table = default_translit_table();

    SUBCASE("single valid row") {
        const CleanDataset ds = clean_dataset({make_row("Farmer", "61110")}, space, table);
        REQUIRE(ds.records.size() == 1);
        CHECK(ds.records[0].text == "farmer");
        CHECK(ds.records[0].lang == Lang::en);
        CHECK(ds.records[0].targets.size() == 1);
        CHECK(ds.records[0].targets[0].digits() == "61110");
        CHECK(ds.dropped.total() == 0);
    }

    SUBCASE("unknown code is dropped with reason") {
        const CleanDataset ds = clean_dataset({make_row("x", "99999")}, space, table);
        CHECK(ds.records.empty());
        CHECK(ds.dropped.by_reason.at("unknown_code") == 1);
    }

    SUBCASE("three rows, one malformed") {
        const CleanDataset ds = clean_dataset(
            {make_row("farmer", "61110"), make_row("fisher", "641"), make_row("skipper", "64100")},
            space, table);
        CHECK(ds.records.size() == 2);
        CHECK(ds.dropped.by_reason.at("malformed_code") == 1);
        CHECK(ds.dropped.total() == 1);
    }

    SUBCASE("empty text, bad language, missing codes") {
        std::vector<RawRow> rows = {make_row("   ", "61110"), make_row("ok", "61110", "xx"),
                                    make_row("ok", "")};
        const CleanDataset ds = clean_dataset(rows, space, table);
        CHECK(ds.records.empty());
        CHECK(ds.dropped.by_reason.at("empty_text") == 1);
        CHECK(ds.dropped.by_reason.at("bad_language") == 1);
        CHECK(ds.dropped.by_reason.at("no_codes") == 1);
    }

    SUBCASE("duplicate codes in a row collapse") {
        RawRow row = make_row("farmer fisher", "61110");
        row.hisco[1] = "61110";
        row.hisco[2] = "64100";
        const CleanDataset ds = clean_dataset({row}, space, table);
        REQUIRE(ds.records.size() == 1);
        CHECK(ds.records[0].targets.size() == 2);
    }
}

TEST_CASE("clean_dataset is idempotent on already-clean data") {
    const LabelSpace space = two_code_space();
    const TranslitTable table = default_translit_table();
    const CleanDataset once = clean_dataset(
        {make_row("Gårdmand", "61110", "da"), make_row("  FISKER  og GÅRDMAND ", "64100", "da")},
        space, table);
    std::vector<RawRow> again;
    for (const auto& rec : once.records) {
        RawRow row = make_row(rec.text, rec.targets[0].digits(), std::string(lang_name(rec.lang)));
        again.push_back(row);
    }
    const CleanDataset twice = clean_dataset(again, space, table);
    REQUIRE(twice.records.size() == once.records.size());
    for (std::size_t i = 0; i < once.records.size(); ++i) {
        CHECK(twice.records[i].text == once.records[i].text);
    }
    CHECK(twice.dropped.total() == 0);
}

TEST_CASE("synthesize_combinations joins descriptions with the and-word") {
    const LabelSpace space = two_code_space();
    CleanDataset ds;
    OccupationRecord a;
    a.text = "he is a farmer";
    a.lang = Lang::en;
    a.targets = {HiscoCode::parse("61110")};
    a.source = "s";
    OccupationRecord b = a;
    b.text = "he fishes";
    b.targets = {HiscoCode::parse("64100")};
    ds.records = {a, b};

    CombinationPolicy policy;
    policy.and_word[Lang::en] = "and";
    policy.draws_per_description = 1;
    policy.rng_seed = 3;

    const CleanDataset out = synthesize_combinations(ds, policy);
    REQUIRE(out.records.size() == 4);  // 2 originals + 1 per unique description
    const auto& s1 = out.records[2];
    const auto& s2 = out.records[3];
    CHECK(s1.text == "he is a farmer and he fishes");
    CHECK(s2.text == "he fishes and he is a farmer");
    CHECK(s1.synthetic);
    CHECK(s1.targets.size() == 2);
    CHECK(s1.targets[0].digits() == "61110");
    CHECK(s1.targets[1].digits() == "64100");

    // reproducible across runs
    const CleanDataset rerun = synthesize_combinations(ds, policy);
    REQUIRE(rerun.records.size() == out.records.size());
    for (std::size_t i = 0; i < out.records.size(); ++i) {
        CHECK(rerun.records[i].text == out.records[i].text);
    }
}

TEST_CASE("synthesis edge cases") {
    const LabelSpace space = occ::testing::tiny_space(12);
    CleanDataset ds = occ::testing::separable_dataset(space, 1, 0);
    for (auto& rec : ds.records) rec.source = "s";

    CombinationPolicy policy;
    policy.and_word[Lang::en] = "and";
    policy.rng_seed = 1;

    SUBCASE("zero draws is a no-op") {
        policy.draws_per_description = 0;
        const CleanDataset out = synthesize_combinations(ds, policy);
        CHECK(out.records.size() == ds.records.size());
    }

    SUBCASE("missing and-word is an error") {
        policy.draws_per_description = 1;
        CleanDataset mixed = ds;
        mixed.records[0].lang = Lang::da;
        CHECK_THROWS_AS(synthesize_combinations(mixed, policy), Error);
    }

    SUBCASE("targets never exceed five codes and never duplicate") {
        policy.draws_per_description = 10;
        // Records with 3 targets each: unions of two records often exceed 5.
        CleanDataset heavy;
        for (int i = 0; i < 6; ++i) {
            OccupationRecord rec;
            rec.text = "text " + std::to_string(i);
            rec.lang = Lang::en;
            rec.source = "s";
            for (int k = 0; k < 3; ++k) {
                rec.targets.push_back(space.code_at(static_cast<std::size_t>((i * 3 + k) % 12)));
            }
            std::sort(rec.targets.begin(), rec.targets.end());
            heavy.records.push_back(rec);
        }
        const CleanDataset out = synthesize_combinations(heavy, policy);
        for (const auto& rec : out.records) {
            CHECK(rec.targets.size() <= 5);
            std::set<std::string> unique;
            for (const auto& code : rec.targets) unique.insert(code.digits());
            CHECK(unique.size() == rec.targets.size());
        }
    }

    SUBCASE("groups are per source and language") {
        policy.draws_per_description = 1;
        CleanDataset two_sources = ds;
        for (std::size_t i = 0; i < two_sources.records.size(); ++i) {
            two_sources.records[i].source = i % 2 == 0 ? "a" : "b";
        }
        const CleanDataset out = synthesize_combinations(two_sources, policy);
        for (std::size_t i = ds.records.size(); i < out.records.size(); ++i) {
            CHECK((out.records[i].source == "a" || out.records[i].source == "b"));
        }
    }
}

TEST_CASE("split_dataset partitions deterministically") {
    const LabelSpace space = occ::testing::tiny_space(10);
    const CleanDataset ds = occ::testing::separable_dataset(space, 1, 0);
    REQUIRE(ds.records.size() == 10);

    SplitSpec spec;
    spec.train_frac = 0.8;
    spec.val_frac = 0.1;
    spec.test_frac = 0.1;
    spec.rng_seed = 7;

    const SplitResult split = split_dataset(ds, spec);
    CHECK(split.train.records.size() + split.val.records.size() + split.test.records.size() ==
          10);

    // identical rerun
    const SplitResult rerun = split_dataset(ds, spec);
    CHECK(rerun.train.records.size() == split.train.records.size());
    for (std::size_t i = 0; i < split.train.records.size(); ++i) {
        CHECK(rerun.train.records[i].text == split.train.records[i].text);
    }

    // disjoint and exhaustive
    std::set<std::string> seen;
    for (const auto* part : {&split.train, &split.val, &split.test}) {
        for (const auto& rec : part->records) {
            CHECK(seen.insert(rec.text).second);
        }
    }
    CHECK(seen.size() == 10);

    // split depends only on (seed, order): permuting input may move records
    std::mt19937_64 perm_rng(2);
    CleanDataset shuffled = ds;
    std::shuffle(shuffled.records.begin(), shuffled.records.end(), perm_rng);
    const SplitResult shuffled_split = split_dataset(shuffled, spec);
    CHECK(shuffled_split.train.records.size() + shuffled_split.val.records.size() +
              shuffled_split.test.records.size() ==
          10);
}

TEST_CASE("split_dataset rejects non-positive fractions") {
    SplitSpec spec;
    spec.train_frac = 1.0;
    spec.val_frac = 0.0;
    spec.test_frac = 0.0;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec = {0.5, 0.3, 0.3, 0};
    CHECK_THROWS_AS(spec.validate(), Error);
    spec = {0.85, 0.10, 0.05, 0};
    CHECK_NOTHROW(spec.validate());
}

TEST_CASE("dataset csv round trip preserves records") {
    const LabelSpace space = two_code_space();
    const TranslitTable table = default_translit_table();
    CleanDataset ds;
    OccupationRecord rec;
    rec.text = "farmer, \"quoted\" and strange";
    rec.lang = Lang::da;
    rec.targets = {HiscoCode::parse("61110"), HiscoCode::parse("64100")};
    rec.source = "src,with comma";
    rec.synthetic = true;
    ds.records.push_back(rec);

    const auto path = std::filesystem::temp_directory_path() / "hiscoder_roundtrip.csv";
    write_dataset_csv(path, ds);
    const auto rows = raw_rows_from_csv(path);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].occ_text == rec.text);
    CHECK(rows[0].hisco[0] == "61110");
    CHECK(rows[0].hisco[1] == "64100");
    CHECK(rows[0].lang == "da");
    CHECK(rows[0].source == "src,with comma");
    CHECK(rows[0].synthetic);

    const CleanDataset back = clean_dataset(rows, space, table);
    REQUIRE(back.records.size() == 1);
    CHECK(back.records[0].targets == rec.targets);
}

TEST_CASE("target_code_counts tallies codes across records") {
    const LabelSpace space = two_code_space();
    CleanDataset ds;
    for (int i = 0; i < 3; ++i) {
        OccupationRecord rec;
        rec.text = "t" + std::to_string(i);
        rec.lang = Lang::en;
        rec.targets = {HiscoCode::parse("61110")};
        if (i == 0) rec.targets.push_back(HiscoCode::parse("64100"));
        std::sort(rec.targets.begin(), rec.targets.end());
        ds.records.push_back(rec);
    }
    const auto counts = target_code_counts(ds);
    CHECK(counts.at("61110") == 3);
    CHECK(counts.at("64100") == 1);
}
