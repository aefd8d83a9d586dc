#include <gtest/gtest.h>

#include <array>
#include <set>

#include "car/dataset.hpp"
#include "test_util.hpp"

using namespace car;

namespace {

InstructionPair make_pair(std::string instruction, std::string input, std::string output) {
    return {0, std::move(instruction), std::move(input), std::move(output)};
}

Dataset make_dataset(const std::vector<std::array<std::string, 3>>& rows) {
    Dataset ds;
    for (std::size_t i = 0; i < rows.size(); ++i) ds.pairs.push_back({i, rows[i][0], rows[i][1], rows[i][2]});
    return ds;
}

// Naive reference: split all parts on ASCII/Unicode whitespace, join tokens by one space.
std::string concat_oracle(const InstructionPair& p) {
    std::vector<std::string> tokens;
    for (const auto* part : {&p.instruction, &p.input, &p.output}) {
        std::string cur;
        for (char32_t c : utf8_decode(*part)) {
            if (is_unicode_space(c)) {
                if (!cur.empty()) tokens.push_back(cur);
                cur.clear();
            } else {
                utf8_append(cur, c);
            }
        }
        if (!cur.empty()) tokens.push_back(cur);
    }
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) out += (i ? " " : "") + tokens[i];
    return out;
}

std::string random_text(Rng& rng) {
    static const std::vector<std::string> pieces = {"a", "Zz", " ", "  ", "\t", "\n", "\"", "\\", "\xc3\xa9", "\xe2\x80\x83",
                                                    "{}", "x y", "\xf0\x9f\x98\x80", "/"};
    std::string s;
    const auto len = rng.below(8);
    for (std::uint64_t i = 0; i < len; ++i) s += pieces[rng.below(pieces.size())];
    return s;
}

}  // namespace

TEST(ParseDataset, SingleEntry) {
    const auto ds = parse_dataset(R"([{"instruction":"Give three tips for staying healthy.","input":"","output":"..."}])");
    ASSERT_EQ(ds.size(), 1u);
    EXPECT_EQ(ds[0].id, 0u);
    EXPECT_EQ(ds[0].instruction, "Give three tips for staying healthy.");
    EXPECT_EQ(ds[0].output, "...");
}

TEST(ParseDataset, EmptyArray) { EXPECT_EQ(parse_dataset("[]").size(), 0u); }

TEST(ParseDataset, MissingOrNullOptionalFieldsAreEmpty) {
    const auto ds = parse_dataset(R"([{"instruction":"x"},{"instruction":"y","input":null,"output":"o"}])");
    EXPECT_EQ(ds[0].input, "");
    EXPECT_EQ(ds[0].output, "");
    EXPECT_EQ(ds[1].input, "");
    EXPECT_EQ(ds[1].id, 1u);
}

TEST(ParseDataset, MalformedJsonReportsByteOffset) {
    try {
        parse_dataset("[{\"instruction\": }]", "bad.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::data);
        EXPECT_NE(std::string(e.what()).find("at byte"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("bad.json"), std::string::npos);
    }
}

TEST(ParseDataset, EmptyInstructionsListAllIndices) {
    try {
        parse_dataset(R"([{"instruction":""},{"instruction":"ok"},{"instruction":"  "}])");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("[0,2]"), std::string::npos) << e.what();
    }
}

TEST(ParseDataset, WrongShapesAreDataErrors) {
    EXPECT_THROW(parse_dataset(R"({"instruction":"x"})"), Error);
    EXPECT_THROW(parse_dataset(R"([1])"), Error);
    EXPECT_THROW(parse_dataset(R"([{"instruction":5}])"), Error);
}

TEST(ConcatText, Examples) {
    EXPECT_EQ(concat_text(make_pair("Sum 2 and 3", "", "5")), "Sum 2 and 3 5");
    EXPECT_EQ(concat_text(make_pair("Translate", "hola", "hello")), "Translate hola hello");
    EXPECT_EQ(concat_text(make_pair("A", " ", "B")), "A B");
    EXPECT_EQ(concat_text(make_pair("", "", "")), "");
}

TEST(ConcatText, MatchesTokenJoinOracleAndHasNoStraySpaces) {
    Rng rng(11);
    for (int i = 0; i < 2000; ++i) {
        const auto p = make_pair(random_text(rng), random_text(rng), random_text(rng));
        const auto s = concat_text(p);
        ASSERT_EQ(s, concat_oracle(p));
        EXPECT_EQ(s.find("  "), std::string::npos);
        EXPECT_EQ(trim(s), s);
    }
}

TEST(Dedupe, ExamplesById) {
    const auto ds = make_dataset({{"a", "", ""}, {"b", "", ""}, {"c", "", ""}, {"d", "", ""}, {"e", "", ""},
                                  {"f", "", ""}, {"g", "", ""}, {"h", "", ""}, {"i", "", ""}, {"j", "", ""}});
    EXPECT_EQ(dedupe_pairs({3, 3, 7}, ds), (std::vector<std::size_t>{3, 7}));
    EXPECT_EQ(dedupe_pairs({5, 2, 2, 9}, ds), (std::vector<std::size_t>{2, 5, 9}));
}

TEST(Dedupe, IdenticalTextKeepsLowerId) {
    const auto ds = make_dataset({{"x", "", "y"}, {"other", "", ""}, {" x ", "", " y"}});
    EXPECT_EQ(dedupe_pairs({2, 1, 0}, ds), (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(dedupe_pairs({2, 1}, ds), (std::vector<std::size_t>{1, 2}));
}

TEST(Dedupe, UnknownIdIsError) {
    const auto ds = make_dataset({{"x", "", ""}});
    EXPECT_THROW(dedupe_pairs({1}, ds), Error);
}

TEST(Dedupe, IdempotentAndMatchesSetOracle) {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::array<std::string, 3>> rows;
        const auto n = 1 + rng.below(15);
        for (std::uint64_t i = 0; i < n; ++i) rows.push_back({std::string(1, static_cast<char>('a' + rng.below(4))), "", ""});
        const auto ds = make_dataset(rows);
        std::vector<std::size_t> ids;
        for (int j = 0; j < 20; ++j) ids.push_back(rng.below(n));

        const auto once = dedupe_pairs(ids, ds);
        EXPECT_EQ(dedupe_pairs(once, ds), once);

        std::set<std::size_t> unique(ids.begin(), ids.end());
        std::set<std::string> texts;
        std::vector<std::size_t> expected;
        for (auto id : unique)
            if (texts.insert(concat_text(ds[id])).second) expected.push_back(id);
        EXPECT_EQ(once, expected);
    }
}

TEST(WriteDataset, RoundTripsTextFieldsByteExactly) {
    car_test::TempDir dir;
    Rng rng(8);
    Dataset ds;
    for (std::size_t i = 0; i < 50; ++i) ds.pairs.push_back({i, "q" + random_text(rng), random_text(rng), random_text(rng)});
    write_dataset(ds, all_ids(ds), dir / "d.json");
    const auto back = load_dataset(dir / "d.json");
    ASSERT_EQ(back.size(), ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(back[i], ds[i]);
}

TEST(WriteDataset, SubsetIsWrittenInGivenOrderWithFreshIds) {
    car_test::TempDir dir;
    const auto ds = make_dataset({{"a", "", "1"}, {"b", "", "2"}, {"c", "", "3"}});
    write_dataset(ds, {2, 0}, dir / "s.json");
    const auto back = load_dataset(dir / "s.json");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].instruction, "c");
    EXPECT_EQ(back[1].id, 1u);
    EXPECT_TRUE(read_file(dir / "s.json").starts_with("[\n  {\n    \"instruction\": \"c\""));
}
