#include "dfqa/equivalence.hpp"

#include "dfqa/text.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace dfqa::judge {

namespace {

// Above this size the exact matching fallback is skipped and the sorted
// greedy pairing is final.
constexpr std::size_t kExactMatchingLimit = 400;

int kind_rank(const Scalar& s) {
    switch (s.kind()) {
        case ScalarKind::Null: return 0;
        case ScalarKind::Bool: return 1;
        case ScalarKind::Number: return 2;
        case ScalarKind::String: return 3;
        case ScalarKind::Datetime: return 4;
    }
    return 5;
}

// Total order used only to pair up candidates; equality is decided by scalar_equal.
int compare_scalars(const Scalar& a, const Scalar& b) {
    const int ra = kind_rank(a), rb = kind_rank(b);
    if (ra != rb) return ra < rb ? -1 : 1;
    switch (a.kind()) {
        case ScalarKind::Null: return 0;
        case ScalarKind::Bool: return static_cast<int>(std::get<bool>(a.value)) - static_cast<int>(std::get<bool>(b.value));
        case ScalarKind::Number: {
            const double x = a.as_number(), y = b.as_number();
            return x < y ? -1 : (x > y ? 1 : 0);
        }
        case ScalarKind::String: return a.as_string().compare(b.as_string()) < 0 ? -1 : (a.as_string() == b.as_string() ? 0 : 1);
        case ScalarKind::Datetime: {
            const auto& x = std::get<DateTime>(a.value).iso;
            const auto& y = std::get<DateTime>(b.value).iso;
            return x < y ? -1 : (x == y ? 0 : 1);
        }
    }
    return 0;
}

int compare_rows(const std::vector<Scalar>& a, const std::vector<Scalar>& b) {
    const auto n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (const int c = compare_scalars(a[i], b[i]); c != 0) return c;
    }
    if (a.size() == b.size()) return 0;
    return a.size() < b.size() ? -1 : 1;
}

// Kuhn's augmenting-path bipartite matching.
std::size_t max_matching(std::size_t n, std::size_t m, const std::function<bool(std::size_t, std::size_t)>& edge) {
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (edge(i, j)) adj[i].push_back(j);
        }
    }
    constexpr auto kNone = static_cast<std::size_t>(-1);
    std::vector<std::size_t> match_right(m, kNone);
    std::vector<char> visited;
    std::function<bool(std::size_t)> augment = [&](std::size_t u) {
        for (auto v : adj[u]) {
            if (visited[v]) continue;
            visited[v] = 1;
            if (match_right[v] == kNone || augment(match_right[v])) {
                match_right[v] = u;
                return true;
            }
        }
        return false;
    };
    std::size_t matched = 0;
    for (std::size_t u = 0; u < n; ++u) {
        visited.assign(m, 0);
        if (augment(u)) ++matched;
    }
    return matched;
}

template <typename T, typename Cmp, typename Eq>
std::size_t sorted_greedy(std::vector<T> lhs, std::vector<T> rhs, Cmp cmp, Eq eq) {
    const auto less = [&](const T& a, const T& b) { return cmp(a, b) < 0; };
    std::sort(lhs.begin(), lhs.end(), less);
    std::sort(rhs.begin(), rhs.end(), less);
    std::size_t i = 0, j = 0, matched = 0;
    while (i < lhs.size() && j < rhs.size()) {
        if (eq(lhs[i], rhs[j])) {
            ++matched;
            ++i;
            ++j;
        } else if (cmp(lhs[i], rhs[j]) < 0) {
            ++i;
        } else {
            ++j;
        }
    }
    return matched;
}

template <typename T, typename Cmp, typename Eq>
std::size_t matching(const std::vector<T>& lhs, const std::vector<T>& rhs, Cmp cmp, Eq eq) {
    const auto target = std::min(lhs.size(), rhs.size());
    const auto greedy = sorted_greedy(lhs, rhs, cmp, eq);
    if (greedy == target || std::max(lhs.size(), rhs.size()) > kExactMatchingLimit) return greedy;
    return max_matching(lhs.size(), rhs.size(), [&](std::size_t i, std::size_t j) { return eq(lhs[i], rhs[j]); });
}

Scalar normalize_scalar(const Scalar& s, const JudgeConfig& cfg) {
    if (!s.is_string()) {
        if (s.is_number()) return Scalar::number(s.as_number());
        return s;
    }
    std::string t = cfg.string_trim ? std::string(text::trim(s.as_string())) : s.as_string();
    if (cfg.lowercase_compare) t = text::lower(t);
    if (auto n = text::parse_number(t)) return Scalar::number(*n);
    return Scalar::string(std::move(t));
}

std::vector<Scalar> normalize_all(const std::vector<Scalar>& xs, const JudgeConfig& cfg) {
    std::vector<Scalar> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(normalize_scalar(x, cfg));
    return out;
}

bool rows_equal(const std::vector<Scalar>& a, const std::vector<Scalar>& b, const JudgeConfig& cfg) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!scalar_equal(a[i], b[i], cfg)) return false;
    }
    return true;
}

bool sequences_equal(const std::vector<Scalar>& a, const std::vector<Scalar>& b, const JudgeConfig& cfg) {
    if (a.size() != b.size()) return false;
    if (cfg.list_order_sensitive) return rows_equal(a, b, cfg);
    return multiset_matching(a, b, cfg) == a.size();
}

// Truth row (as a multiset of cells) contained in a predicted row.
bool row_contains(const std::vector<Scalar>& pred_row, const std::vector<Scalar>& truth_row, const JudgeConfig& cfg) {
    return multiset_matching(truth_row, pred_row, cfg) == truth_row.size();
}

}  // namespace

JudgeConfig config_from_json(const json& o, JudgeConfig c) {
    if (!o.is_object()) return c;
    c.rel_tol = o.value("rel_tol", c.rel_tol);
    c.abs_tol = o.value("abs_tol", c.abs_tol);
    c.list_order_sensitive = o.value("list_order_sensitive", o.value("order_sensitive", c.list_order_sensitive));
    c.string_trim = o.value("string_trim", c.string_trim);
    c.lowercase_compare = o.value("lowercase_compare", c.lowercase_compare);
    c.count_needs_review = o.value("count_needs_review", c.count_needs_review);
    if (o.contains("containment")) {
        const auto v = o["containment"].get<std::string>();
        if (v == "cell") {
            c.containment = Containment::Cell;
        } else if (v == "row") {
            c.containment = Containment::Row;
        } else {
            throw Error("containment must be 'cell' or 'row', got '" + v + "'");
        }
    }
    if (c.rel_tol < 0 || c.abs_tol < 0) throw Error("judge tolerances must be non-negative");
    return c;
}

json config_to_json(const JudgeConfig& c) {
    return json{{"rel_tol", c.rel_tol},
                {"abs_tol", c.abs_tol},
                {"list_order_sensitive", c.list_order_sensitive},
                {"string_trim", c.string_trim},
                {"lowercase_compare", c.lowercase_compare},
                {"containment", c.containment == Containment::Cell ? "cell" : "row"},
                {"count_needs_review", c.count_needs_review}};
}

CanonResult normalize(const CanonResult& r, const JudgeConfig& cfg) {
    if (const auto* s = std::get_if<Scalar>(&r)) return normalize_scalar(*s, cfg);
    if (const auto* l = std::get_if<ValueList>(&r)) {
        auto values = normalize_all(l->values, cfg);
        if (values.size() == 1) return values.front();
        return ValueList{std::move(values)};
    }
    if (const auto* se = std::get_if<Series>(&r)) {
        auto values = normalize_all(se->values, cfg);
        if (values.size() == 1) return values.front();
        return Series{se->name, normalize_all(se->index, cfg), std::move(values)};
    }
    if (const auto* t = std::get_if<TableResult>(&r)) {
        TableResult out;
        out.columns = t->columns;
        out.rows.reserve(t->rows.size());
        for (const auto& row : t->rows) out.rows.push_back(normalize_all(row, cfg));
        if (out.rows.size() == 1 && out.rows.front().size() == 1) return out.rows.front().front();
        return out;
    }
    throw std::invalid_argument("normalize: execution errors have no normal form");
}

bool scalar_equal(const Scalar& a, const Scalar& b, const JudgeConfig& cfg) {
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
        case ScalarKind::Null: return true;
        case ScalarKind::Number: {
            const double x = a.as_number(), y = b.as_number();
            const double tol = std::max(cfg.abs_tol, cfg.rel_tol * std::max(std::fabs(x), std::fabs(y)));
            return std::fabs(x - y) <= tol;
        }
        default: return a.value == b.value;
    }
}

std::size_t multiset_matching(const std::vector<Scalar>& lhs, const std::vector<Scalar>& rhs, const JudgeConfig& cfg) {
    return matching(lhs, rhs, compare_scalars, [&](const Scalar& a, const Scalar& b) { return scalar_equal(a, b, cfg); });
}

bool strict_equal(const CanonResult& a, const CanonResult& b, const JudgeConfig& cfg) {
    if (a.index() != b.index()) return false;
    if (const auto* x = std::get_if<Scalar>(&a)) return scalar_equal(*x, std::get<Scalar>(b), cfg);
    if (const auto* x = std::get_if<ValueList>(&a)) return sequences_equal(x->values, std::get<ValueList>(b).values, cfg);
    if (const auto* x = std::get_if<Series>(&a)) return sequences_equal(x->values, std::get<Series>(b).values, cfg);
    if (const auto* x = std::get_if<TableResult>(&a)) {
        const auto& y = std::get<TableResult>(b);
        if (x->columns.size() != y.columns.size() || x->rows.size() != y.rows.size()) return false;
        if (cfg.list_order_sensitive) {
            for (std::size_t i = 0; i < x->rows.size(); ++i) {
                if (!rows_equal(x->rows[i], y.rows[i], cfg)) return false;
            }
            return true;
        }
        const auto eq = [&](const std::vector<Scalar>& p, const std::vector<Scalar>& q) { return rows_equal(p, q, cfg); };
        return matching(x->rows, y.rows, compare_rows, eq) == x->rows.size();
    }
    const auto& ex = std::get<ExecError>(a);
    return ex.kind == std::get<ExecError>(b).kind;
}

std::vector<Scalar> flatten(const CanonResult& r, const JudgeConfig& cfg) {
    const auto n = normalize(r, cfg);
    if (const auto* s = std::get_if<Scalar>(&n)) return {*s};
    if (const auto* l = std::get_if<ValueList>(&n)) return l->values;
    if (const auto* se = std::get_if<Series>(&n)) return se->values;
    std::vector<Scalar> out;
    for (const auto& row : std::get<TableResult>(n).rows) out.insert(out.end(), row.begin(), row.end());
    return out;
}

Verdict error_verdict(ExecErrorKind kind) {
    switch (kind) {
        case ExecErrorKind::RejectedUnsafe: return Verdict::RejectedUnsafe;
        case ExecErrorKind::Timeout: return Verdict::Timeout;
        default: return Verdict::ExecErrorVerdict;
    }
}

Verdict judge(const CanonResult& predicted, const CanonResult& truth, const JudgeConfig& cfg) {
    if (is_error(truth)) throw std::invalid_argument("judge: ground truth is an execution error");
    if (const auto* e = std::get_if<ExecError>(&predicted)) return error_verdict(e->kind);

    const auto pred = normalize(predicted, cfg);
    const auto want = normalize(truth, cfg);
    if (strict_equal(pred, want, cfg)) return Verdict::CorrectStrict;
    if (!is_container(pred)) return Verdict::Incorrect;

    const auto truth_cells = flatten(want, cfg);
    const auto pred_cells = flatten(pred, cfg);
    if (truth_cells.empty()) return Verdict::Incorrect;

    bool contained = false;
    if (cfg.containment == Containment::Row && std::holds_alternative<TableResult>(pred)) {
        const auto& pred_rows = std::get<TableResult>(pred).rows;
        std::vector<std::vector<Scalar>> truth_rows;
        if (const auto* t = std::get_if<TableResult>(&want)) {
            truth_rows = t->rows;
        } else {
            for (const auto& c : truth_cells) truth_rows.push_back({c});
        }
        const auto m = max_matching(truth_rows.size(), pred_rows.size(), [&](std::size_t i, std::size_t j) {
            return row_contains(pred_rows[j], truth_rows[i], cfg);
        });
        contained = m == truth_rows.size();
    } else {
        contained = multiset_matching(truth_cells, pred_cells, cfg) == truth_cells.size();
    }
    if (contained) return Verdict::CorrectRelaxed;
    if (multiset_matching(truth_cells, pred_cells, cfg) > 0) return Verdict::NeedsReview;
    return Verdict::Incorrect;
}

}  // namespace dfqa::judge
