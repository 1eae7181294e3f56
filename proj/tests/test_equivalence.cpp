#include "doctest.h"

#include "dfqa/equivalence.hpp"
#include "properties.hpp"

using namespace dfqa;
using namespace dfqa::judge;

namespace {

Scalar num(double v) { return Scalar::number(v); }
Scalar str(const char* s) { return Scalar::string(s); }

}  // namespace

TEST_CASE("scalar tolerance") {
    JudgeConfig cfg;
    CHECK(scalar_equal(num(1.0), num(1.0 + 1e-9), cfg));
    CHECK_FALSE(scalar_equal(num(1.0), num(1.001), cfg));
    cfg.rel_tol = 1e-2;
    CHECK(scalar_equal(num(100), num(100.5), cfg));
    CHECK_FALSE(scalar_equal(num(1), str("1"), cfg));
    CHECK(scalar_equal(Scalar::null(), Scalar::null(), cfg));
}

TEST_CASE("normalization unwraps singletons and parses numeric text") {
    JudgeConfig cfg;
    CHECK(normalize(ValueList{{str(" 42 ")}}, cfg) == CanonResult{num(42)});
    CHECK(normalize(Series{"x", {num(0)}, {str("auckland")}}, cfg) == CanonResult{str("auckland")});
    CHECK(normalize(TableResult{{"a"}, {{num(3)}}}, cfg) == CanonResult{num(3)});
    cfg.lowercase_compare = true;
    CHECK(normalize(Scalar(str("Auckland")), cfg) == CanonResult{str("auckland")});
}

TEST_CASE("verdicts on worked examples") {
    JudgeConfig cfg;
    // A scalar retrieval against a one-element list is strict.
    CHECK(judge::judge(Scalar(str("auckland")), ValueList{{str("auckland")}}, cfg) == Verdict::CorrectStrict);
    // A container holding the truth is relaxed.
    CHECK(judge::judge(ValueList{{str("auckland"), str("nelson")}}, Scalar(str("auckland")), cfg) == Verdict::CorrectRelaxed);
    // Partial overlap is sent to review.
    CHECK(judge::judge(ValueList{{str("a"), str("x")}}, ValueList{{str("a"), str("b")}}, cfg) == Verdict::NeedsReview);
    CHECK(judge::judge(ValueList{{str("x")}}, ValueList{{str("a"), str("b")}}, cfg) == Verdict::Incorrect);
    // A scalar never gets relaxed credit.
    CHECK(judge::judge(Scalar(num(5)), ValueList{{num(5), num(6)}}, cfg) == Verdict::Incorrect);
    // Errors map to their own verdicts.
    CHECK(judge::judge(ExecError{ExecErrorKind::Timeout, ""}, Scalar(num(1)), cfg) == Verdict::Timeout);
    CHECK(judge::judge(ExecError{ExecErrorKind::RejectedUnsafe, ""}, Scalar(num(1)), cfg) == Verdict::RejectedUnsafe);
    CHECK(judge::judge(ExecError{ExecErrorKind::NoResult, ""}, Scalar(num(1)), cfg) == Verdict::ExecErrorVerdict);
    CHECK_THROWS(judge::judge(Scalar(num(1)), ExecError{}, cfg));
    // Lowercase comparison for WikiSQL-style bundles.
    cfg.lowercase_compare = true;
    CHECK(judge::judge(Scalar(str("United States")), ValueList{{str("united states")}}, cfg) == Verdict::CorrectStrict);
}

TEST_CASE("order sensitivity and row containment options") {
    JudgeConfig cfg;
    const ValueList a{{num(1), num(2), num(3)}};
    const ValueList b{{num(3), num(1), num(2)}};
    CHECK(strict_equal(a, b, cfg));
    cfg.list_order_sensitive = true;
    CHECK_FALSE(strict_equal(a, b, cfg));

    JudgeConfig rows;
    rows.containment = Containment::Row;
    const TableResult pred{{"name", "mpg"}, {{str("audi"), num(30)}, {str("volvo"), num(29)}}};
    const TableResult truth{{"name"}, {{str("audi")}, {str("volvo")}}};
    CHECK(judge::judge(pred, truth, rows) == Verdict::CorrectRelaxed);
    // Cells scattered across rows do not count as one row.
    const TableResult split{{"a", "b"}, {{str("audi"), num(1)}, {num(30), num(2)}}};
    const TableResult pair{{"a", "b"}, {{str("audi"), num(30)}}};
    CHECK(judge::judge(split, pair, rows) != Verdict::CorrectRelaxed);
    CHECK(judge::judge(split, pair, JudgeConfig{}) == Verdict::CorrectRelaxed);
}

TEST_CASE("judge config from JSON") {
    const auto cfg = config_from_json(json{{"rel_tol", 0.01}, {"order_sensitive", true}, {"containment", "row"}});
    CHECK(cfg.rel_tol == 0.01);
    CHECK(cfg.list_order_sensitive);
    CHECK(cfg.containment == Containment::Row);
    CHECK(config_from_json(config_to_json(cfg)) == cfg);
    CHECK_THROWS(config_from_json(json{{"containment", "column"}}));
    CHECK_THROWS(config_from_json(json{{"abs_tol", -1}}));
}

TEST_CASE("invariants over randomized results") {
    const auto t = props::equivalence_invariants(2024, 12000);
    CHECK(t.n >= 10000);
    CHECK(t.violations == 0);
}

TEST_CASE("strict_equal on tables matches a brute-force permutation oracle") {
    const auto t = props::table_pairs(99, 1000);
    CHECK(t.agree == 1000);
    CHECK(t.equal_cases > 100);
    CHECK(t.equal_cases < 900);
}

TEST_CASE("multiset matching handles non-transitive tolerance") {
    JudgeConfig cfg;
    cfg.abs_tol = 0.15;
    cfg.rel_tol = 0;
    // 1.0 ~ 1.1 ~ 1.2 but 1.0 !~ 1.2; a perfect matching exists.
    const std::vector<Scalar> lhs{num(1.0), num(1.1)};
    const std::vector<Scalar> rhs{num(1.2), num(0.95)};
    CHECK(multiset_matching(lhs, rhs, cfg) == 2);
}
