#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "engage/csv.hpp"
#include "engage/rfc3339.hpp"
#include "engage/text.hpp"

using namespace engage;

TEST_CASE("rfc3339 parses offsets and utc") {
    auto z = parse_rfc3339("2025-03-04T13:45:00Z");
    REQUIRE(z.has_value());
    CHECK(z->offset_min == 0);

    auto plus8 = parse_rfc3339("2025-03-04T21:45:00+08:00");
    REQUIRE(plus8.has_value());
    CHECK(plus8->epoch_s == z->epoch_s);
    CHECK(plus8->offset_min == 480);

    auto minus5 = parse_rfc3339("2025-03-04T08:45:00-05:00");
    REQUIRE(minus5.has_value());
    CHECK(minus5->epoch_s == z->epoch_s);
}

TEST_CASE("rfc3339 truncates fractional seconds") {
    auto a = parse_rfc3339("2025-03-04T13:45:00.999Z");
    auto b = parse_rfc3339("2025-03-04T13:45:00Z");
    REQUIRE(a.has_value());
    CHECK(a->epoch_s == b->epoch_s);
}

TEST_CASE("rfc3339 rejects malformed input") {
    CHECK_FALSE(parse_rfc3339("").has_value());
    CHECK_FALSE(parse_rfc3339("2025-03-04").has_value());
    CHECK_FALSE(parse_rfc3339("2025-13-04T00:00:00Z").has_value());
    CHECK_FALSE(parse_rfc3339("2025-02-30T00:00:00Z").has_value());
    CHECK_FALSE(parse_rfc3339("2025-03-04T25:00:00Z").has_value());
    CHECK_FALSE(parse_rfc3339("2025-03-04T13:45:00").has_value());
    // The RFC's readability note: a space separator is tolerated on input.
    CHECK(parse_rfc3339("2025-03-04 13:45:00Z").has_value());
}

TEST_CASE("rfc3339 round trip is canonical") {
    for (const char* s : {"2025-03-04T13:45:00Z", "2025-12-31T23:59:59+08:00",
                          "1999-01-01T00:00:00-07:30"}) {
        auto ts = parse_rfc3339(s);
        REQUIRE(ts.has_value());
        auto again = parse_rfc3339(format_rfc3339(*ts));
        REQUIRE(again.has_value());
        CHECK(*again == *ts);
    }
    CHECK(format_rfc3339(*parse_rfc3339("2025-03-04T13:45:00+00:00")) ==
          "2025-03-04T13:45:00Z");
}

TEST_CASE("civil date round trip and weekday") {
    CHECK(days_from_civil({1970, 1, 1}) == 0);
    CHECK(weekday_from_days(days_from_civil({2025, 2, 17})) == 0);  // Monday
    CHECK(weekday_from_days(days_from_civil({2025, 2, 23})) == 6);  // Sunday
    for (int64_t d : {-1000L, 0L, 19000L, 20500L}) {
        CHECK(days_from_civil(civil_from_days(d)) == d);
    }
}

TEST_CASE("local wall clock respects the offset") {
    auto ts = parse_rfc3339("2025-03-04T21:45:30+08:00");
    REQUIRE(ts.has_value());
    CHECK(ts->local_date() == CivilDate{2025, 3, 4});
    CHECK(ts->local_minute_of_day() == 21 * 60 + 45);
    CHECK(ts->local_hour_of_day() == doctest::Approx(21.75).epsilon(1e-12));
    CHECK(ts->local_weekday() == 1);  // Tuesday

    // Hour-of-day is hour + minute/60; seconds are below its resolution.
    auto utc = parse_rfc3339("2025-03-04T13:45:30Z");
    CHECK(utc->local_hour_of_day() == doctest::Approx(13.75).epsilon(1e-12));
}

TEST_CASE("word count splits whitespace and counts cjk per character") {
    CHECK(word_count("") == 0);
    CHECK(word_count("   ") == 0);
    CHECK(word_count("a b") == 2);
    CHECK(word_count("c d e f") == 4);
    CHECK(word_count("一二三四五") == 5);
    // Mixed run: CJK chars embedded in a latin word split it.
    CHECK(word_count("solve 方程 please") == 4);
}

TEST_CASE("jaccard conventions") {
    auto t = [](const char* s) { return similarity_tokens(s); };
    CHECK(jaccard(t("a b c"), t("a b c")) == 1.0);
    CHECK(jaccard(t("a b"), t("c d")) == 0.0);
    CHECK(jaccard(t("a b c"), t("b c d")) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(jaccard(t(""), t("")) == 1.0);
    CHECK(jaccard(t(""), t("a")) == 0.0);
    // Case folding and punctuation splitting.
    CHECK(jaccard(t("Hello, World!"), t("hello world")) == 1.0);
}

TEST_CASE("contains_ci folds ascii case") {
    CHECK(contains_ci("WHAT IS THE SOLUTION OF x", "what is the solution of"));
    CHECK_FALSE(contains_ci("solution", "what is the solution of"));
    CHECK(contains_ci("abc", ""));
}

TEST_CASE("csv_double is canonical") {
    CHECK(csv_double(0.0) == "0");
    CHECK(csv_double(3.0) == "3");
    CHECK(csv_double(-2.0) == "-2");
    CHECK(csv_double(0.5) == "0.5");
    CHECK(csv_double(1.0 / 3.0) == "0.333333333333");
}

TEST_CASE("csv writer quotes and reader round-trips") {
    CsvWriter w({"id", "text", "value"});
    w.add_row({CsvWriter::cell(std::string("r1")),
               CsvWriter::cell(std::string("has,comma")), CsvWriter::cell(1.5)});
    w.add_row({CsvWriter::cell(std::string("r2")),
               CsvWriter::cell(std::string("has \"quote\"")),
               CsvWriter::cell(int64_t{7})});
    CsvTable t = read_csv_string(w.str());
    REQUIRE(t.header.size() == 3);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][1] == "has,comma");
    CHECK(t.rows[1][1] == "has \"quote\"");
    CHECK(t.rows[1][2] == "7");
    CHECK(t.column("value") == 2);
    CHECK(t.column("absent") == -1);
}
