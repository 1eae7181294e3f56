#pragma once

// Property sweeps shared by the unit tests and the acceptance binary. Each
// returns raw tallies so callers decide how to report them.

#include "dfqa/bundle.hpp"
#include "dfqa/equivalence.hpp"
#include "dfqa/prompt.hpp"
#include "dfqa/wikisql.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace props {

struct Tally {
    std::size_t n = 0;
    std::size_t violations = 0;
};

// Reflexivity, symmetry, idempotent normalization and two monotonicity laws
// over random results, cycling through three judge configurations.
inline Tally equivalence_invariants(std::uint64_t seed, int iterations) {
    using namespace dfqa;
    namespace J = dfqa::judge;
    oracle::ResultGen gen(seed);
    const J::JudgeConfig cfgs[] = {J::JudgeConfig{}, J::config_from_json(json{{"lowercase_compare", true}}),
                                   J::config_from_json(json{{"order_sensitive", true}, {"containment", "row"}})};
    Tally t;
    for (int i = 0; i < iterations; ++i) {
        const auto& cfg = cfgs[i % 3];
        const auto a = gen.result();
        const auto b = gen.pick(4) == 0 ? a : gen.result();
        ++t.n;
        if (!J::strict_equal(a, a, cfg)) ++t.violations;
        if (J::strict_equal(a, b, cfg) != J::strict_equal(b, a, cfg)) ++t.violations;
        if (is_error(a)) continue;
        if (J::judge(a, a, cfg) != Verdict::CorrectStrict) ++t.violations;
        const auto n1 = J::normalize(a, cfg);
        if (!(J::normalize(n1, cfg) == n1)) ++t.violations;
        if (is_error(b)) continue;
        // Widening tolerances never turns correct into incorrect.
        J::JudgeConfig loose = cfg;
        loose.rel_tol = 1e-3;
        loose.abs_tol = 1e-3;
        if (is_correct(J::judge(a, b, cfg)) && !is_correct(J::judge(a, b, loose))) ++t.violations;
        // Appending cells to a correct container keeps it correct.
        const auto* l = std::get_if<ValueList>(&a);
        if (l && !cfg.list_order_sensitive && !J::flatten(b, cfg).empty() && is_correct(J::judge(a, b, cfg))) {
            auto wider = *l;
            wider.values.push_back(Scalar::string("extra"));
            wider.values.push_back(Scalar::number(123456));
            if (!is_correct(J::judge(wider, b, cfg))) ++t.violations;
        }
    }
    return t;
}

struct TableAgreement {
    std::size_t n = 0;
    std::size_t agree = 0;
    std::size_t equal_cases = 0;
};

// strict_equal on tables against a brute-force row permutation search.
inline TableAgreement table_pairs(std::uint64_t seed, int count) {
    using namespace dfqa;
    std::mt19937_64 rng(seed);
    const auto pick = [&](std::size_t k) { return std::uniform_int_distribution<std::size_t>(0, k - 1)(rng); };
    const std::vector<Scalar> pool{Scalar::number(1),   Scalar::number(2),   Scalar::number(2.5),   Scalar::string("a"),
                                   Scalar::string("b"), Scalar::null(), Scalar::boolean(true)};
    judge::JudgeConfig cfg;
    TableAgreement out;
    for (int i = 0; i < count; ++i) {
        const auto cols = 1 + pick(3), rows = pick(6);
        TableResult x;
        for (std::size_t c = 0; c < cols; ++c) x.columns.push_back("c" + std::to_string(c));
        for (std::size_t r = 0; r < rows; ++r) {
            std::vector<Scalar> row;
            for (std::size_t c = 0; c < cols; ++c) row.push_back(pool[pick(pool.size())]);
            x.rows.push_back(row);
        }
        TableResult y = x;
        std::shuffle(y.rows.begin(), y.rows.end(), rng);
        if (pick(2) && !y.rows.empty()) y.rows[pick(y.rows.size())][pick(cols)] = pool[pick(pool.size())];
        if (pick(10) == 0) y.rows.push_back(std::vector<Scalar>(cols, Scalar::number(1)));
        const bool want = oracle::permutation_equal(x.rows, y.rows, [](const auto& p, const auto& q) {
            for (std::size_t k = 0; k < p.size(); ++k) {
                if (p[k].value != q[k].value) return false;
            }
            return true;
        });
        ++out.n;
        out.equal_cases += want;
        out.agree += judge::strict_equal(x, y, cfg) == want;
    }
    return out;
}

struct Privacy {
    std::size_t prompts = 0;
    std::size_t leaks = 0;
    std::size_t missing_columns = 0;
};

// Random schemas filled with sentinel cells; prompts must show every column
// name and no cell.
inline Privacy prompt_privacy(const dfqa::prompt::TemplateSet& templates, std::uint64_t seed, int count) {
    using namespace dfqa;
    std::mt19937_64 rng(seed);
    const auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    const std::vector<std::string> words{"age", "Total", "Rings", "car name", "tumor-size", "No.", "Score (pts)",
                                         "school/club team", "U.S. viewers", "Δx"};
    const std::vector<std::string> qwords{"what", "is", "the", "average", "of", "for", "each", "how", "many", "rows"};
    Privacy out;
    for (int i = 0; i < count; ++i) {
        DataTable t;
        t.schema.table_id = "tbl" + std::to_string(i);
        const auto ncols = 1 + pick(8);
        for (std::size_t c = 0; c < ncols; ++c) {
            std::string name = words[pick(words.size())] + "_" + std::to_string(c);
            ColumnSpec spec{name, static_cast<Dtype>(pick(5)), {}, {}};
            if (pick(3) == 0) spec.description = "describes " + name;
            if (pick(4) == 0) spec.format_hint = "YYYY-MM-DD";
            t.schema.columns.push_back(spec);
        }
        std::vector<std::string> sentinels;
        for (std::size_t r = 0, nrows = 1 + pick(5); r < nrows; ++r) {
            Row row;
            for (std::size_t c = 0; c < ncols; ++c) {
                sentinels.push_back("SENTINEL" + std::to_string(rng() % 1000000007));
                row.push_back(sentinels.back());
            }
            t.rows.push_back(row);
        }
        SupplementarySpec sup;
        for (int f = 0; f < 5; ++f) {
            if (pick(2)) sup.mitigation_flags.insert(static_cast<MitigationFlag>(f));
        }
        std::string q;
        for (std::size_t w = 0, nw = 3 + pick(6); w < nw; ++w) q += qwords[pick(qwords.size())] + " ";
        std::string text;
        for (const auto& m : prompt::build_qa_prompt(templates, sup, t.schema, {"q", q, {}, {}}).messages) {
            text += m.content + "\n";
        }
        ++out.prompts;
        for (const auto& s : sentinels) out.leaks += text.find(s) != std::string::npos;
        for (const auto& c : t.schema.columns) out.missing_columns += text.find(c.name) == std::string::npos;
    }
    return out;
}

struct WikiAgreement {
    std::size_t n = 0;
    std::size_t agree = 0;
    std::vector<std::string> disagreements;
};

// eval_logical_form against the independent evaluator on every question of
// a release directory; an oracle error must surface as OracleError.
inline WikiAgreement wikisql_agreement(const std::string& dir) {
    using namespace dfqa;
    using namespace dfqa::wikisql;
    std::map<std::string, json> tables;
    for (const auto& t : read_jsonl(dir + "/test.tables.jsonl")) tables[t["id"].get<std::string>()] = t;
    WikiAgreement out;
    for (const auto& q : read_jsonl(dir + "/test.jsonl")) {
        const auto& raw = tables.at(q["table_id"].get<std::string>());
        const auto want = oracle::wsql::evaluate(raw, q["sql"]);
        const auto table = ingest_table(raw);
        bool ok = false;
        try {
            const auto got = eval_logical_form(logical_form_from_json(q["sql"]), table);
            ok = !want.error && oracle::wsql::agrees(want, got);
        } catch (const OracleError&) {
            ok = want.error;
        }
        ++out.n;
        out.agree += ok;
        if (!ok) out.disagreements.push_back(q.dump());
    }
    return out;
}

}  // namespace props
