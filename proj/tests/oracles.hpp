#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls into the library's evaluation code.

#include "dfqa/gateway.hpp"
#include "dfqa/model.hpp"
#include "dfqa/sandbox.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <regex>
#include <string>
#include <variant>
#include <vector>

namespace oracle {

using nlohmann::json;

// ---------------------------------------------------------------- WikiSQL

namespace wsql {

struct Val {
    enum Kind { Null, Num, Str } kind = Null;
    double num = 0;
    std::string str;
};

inline std::string lower_trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n\f\v");
    if (b == std::string::npos) return {};
    s = s.substr(b, s.find_last_not_of(" \t\r\n\f\v") - b + 1);
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n\f\v");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n\f\v") - b + 1);
}

// Plain decimals and comma-grouped integers, optionally with a fraction.
inline std::optional<double> number(const std::string& raw) {
    static const std::regex plain(R"(^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$)");
    static const std::regex grouped(R"(^[+-]?\d{1,3}(,\d{3})+(\.\d*)?$)");
    const auto s = trim(raw);
    std::string digits;
    if (std::regex_match(s, plain)) {
        digits = s;
    } else if (std::regex_match(s, grouped)) {
        for (char c : s) {
            if (c != ',') digits.push_back(c);
        }
    } else {
        return std::nullopt;
    }
    const double v = std::strtod(digits.c_str(), nullptr);
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::string show(double v) {
    if (std::floor(v) == v && std::fabs(v) < 1e15) return std::to_string(static_cast<long long>(v));
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string raw_text(const json& v) {
    if (v.is_null()) return {};
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) return show(v.get<double>());
    return v.dump();
}

struct Outcome {
    bool error = false;
    bool scalar = false;
    std::vector<Val> values;
};

// Evaluates a raw release record pair: reals are numeric unless any cell in
// the column is not a number; text is compared lowercased and trimmed.
inline Outcome evaluate(const json& table, const json& sql) {
    const auto& header = table["header"];
    const auto& rows = table["rows"];
    const std::size_t arity = header.size();
    std::vector<bool> numeric(arity, false);
    for (std::size_t c = 0; c < arity; ++c) {
        if (!table.contains("types") || lower_trim(table["types"][c].get<std::string>()) != "real") continue;
        bool all = true;
        for (const auto& r : rows) {
            const auto t = lower_trim(raw_text(r[c]));
            if (t.empty() || t == "nan" || t == "inf" || t == "-inf") continue;
            if (!number(t)) {
                all = false;
                break;
            }
        }
        numeric[c] = all;
    }
    const auto cell = [&](const json& r, std::size_t c) {
        Val v;
        const auto t = raw_text(r[c]);
        const auto lt = lower_trim(t);
        if (lt.empty()) return v;
        if (numeric[c]) {
            if (auto n = number(lt)) {
                v.kind = Val::Num;
                v.num = *n;
            }
            return v;
        }
        v.kind = Val::Str;
        v.str = lt;
        return v;
    };

    const auto sel = sql["sel"].get<std::size_t>();
    const int agg = sql["agg"].get<int>();
    std::vector<Val> picked;
    for (const auto& r : rows) {
        bool ok = true;
        for (const auto& cond : sql["conds"]) {
            const auto col = cond[0].get<std::size_t>();
            const int op = cond[1].get<int>();
            const auto& want = cond[2];
            const Val got = cell(r, col);
            if (got.kind == Val::Null) {
                ok = false;
                break;
            }
            const std::string want_text = lower_trim(raw_text(want));
            const std::string got_text = got.kind == Val::Num ? show(got.num) : got.str;
            if (op == 0) {
                if (numeric[col]) {
                    const auto w = want.is_number() ? std::optional<double>(want.get<double>()) : number(want_text);
                    ok = w && *w == got.num;
                } else {
                    ok = got_text == want_text;
                }
            } else {
                const auto a = got.kind == Val::Num ? std::optional<double>(got.num) : number(got_text);
                const auto b = want.is_number() ? std::optional<double>(want.get<double>()) : number(want_text);
                if (a && b) {
                    ok = op == 1 ? *a > *b : *a < *b;
                } else {
                    ok = op == 1 ? got_text > want_text : got_text < want_text;
                }
            }
            if (!ok) break;
        }
        if (ok) picked.push_back(cell(r, sel));
    }

    Outcome out;
    if (agg == 0) {
        out.values = picked;
        return out;
    }
    out.scalar = true;
    if (agg == 3) {
        out.values.push_back(Val{Val::Num, static_cast<double>(picked.size()), {}});
        return out;
    }
    std::vector<double> nums;
    std::vector<std::string> strs;
    for (const auto& v : picked) {
        if (v.kind == Val::Num) {
            nums.push_back(v.num);
        } else if (v.kind == Val::Str) {
            if (auto n = number(v.str)) {
                nums.push_back(*n);
            } else {
                strs.push_back(v.str);
            }
        }
    }
    if (nums.empty() && strs.empty()) {
        out.values.push_back(Val{});
        return out;
    }
    if (agg == 1 || agg == 2) {
        if (!nums.empty()) {
            double best = nums[0];
            for (double x : nums) best = agg == 1 ? std::max(best, x) : std::min(best, x);
            out.values.push_back(Val{Val::Num, best, {}});
        } else {
            std::string best = strs[0];
            for (const auto& s : strs) best = agg == 1 ? std::max(best, s) : std::min(best, s);
            out.values.push_back(Val{Val::Str, 0, best});
        }
        return out;
    }
    if (nums.empty()) {
        out.error = true;
        return out;
    }
    double sum = 0;
    for (double x : nums) sum += x;
    out.values.push_back(Val{Val::Num, agg == 4 ? sum : sum / static_cast<double>(nums.size()), {}});
    return out;
}

inline bool same(const Val& v, const dfqa::Scalar& s) {
    switch (v.kind) {
        case Val::Null: return s.kind() == dfqa::ScalarKind::Null;
        case Val::Num: return s.is_number() && s.as_number() == v.num;
        case Val::Str: return s.is_string() && s.as_string() == v.str;
    }
    return false;
}

inline bool agrees(const Outcome& o, const dfqa::CanonResult& r) {
    if (o.scalar) {
        const auto* s = std::get_if<dfqa::Scalar>(&r);
        return s && same(o.values.front(), *s);
    }
    const auto* l = std::get_if<dfqa::ValueList>(&r);
    if (!l || l->values.size() != o.values.size()) return false;
    for (std::size_t i = 0; i < o.values.size(); ++i) {
        if (!same(o.values[i], l->values[i])) return false;
    }
    return true;
}

}  // namespace wsql

// ------------------------------------------------------------ multisets

// True when some permutation of `b` equals `a` element-wise under `eq`.
template <typename T, typename Eq>
bool permutation_equal(const std::vector<T>& a, const std::vector<T>& b, Eq eq) {
    if (a.size() != b.size()) return false;
    std::vector<std::size_t> perm(b.size());
    std::iota(perm.begin(), perm.end(), 0);
    do {
        bool all = true;
        for (std::size_t i = 0; i < a.size() && all; ++i) all = eq(a[i], b[perm[i]]);
        if (all) return true;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return false;
}

// ---------------------------------------------------- random CanonResults

struct ResultGen {
    std::mt19937_64 rng;
    explicit ResultGen(std::uint64_t seed) : rng(seed) {}

    std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

    dfqa::Scalar scalar() {
        static const std::vector<std::string> words{"a", "B", " c ", "Auckland", "grey and bell", "42", "3.5",
                                                    "x y", "", "NaN?", "1e3"};
        switch (pick(6)) {
            case 0: return dfqa::Scalar::null();
            case 1: return dfqa::Scalar::boolean(pick(2) == 1);
            case 2: return dfqa::Scalar::number(static_cast<double>(static_cast<int>(pick(21)) - 10));
            case 3: return dfqa::Scalar::number(std::uniform_real_distribution<double>(-1e3, 1e3)(rng));
            case 4: return dfqa::Scalar::string(words[pick(words.size())]);
            default: return dfqa::Scalar::datetime(pick(2) ? "2020-01-0" + std::to_string(1 + pick(9)) : "2021-06-30T12:00:00");
        }
    }

    std::vector<dfqa::Scalar> scalars(std::size_t max_len) {
        std::vector<dfqa::Scalar> out(pick(max_len + 1));
        for (auto& s : out) s = scalar();
        return out;
    }

    dfqa::CanonResult result() {
        switch (pick(5)) {
            case 0: return scalar();
            case 1: return dfqa::ValueList{scalars(6)};
            case 2: {
                auto values = scalars(6);
                std::vector<dfqa::Scalar> index;
                for (std::size_t i = 0; i < values.size(); ++i) index.push_back(dfqa::Scalar::number(static_cast<double>(i)));
                return dfqa::Series{pick(2) ? std::optional<std::string>("v") : std::nullopt, index, values};
            }
            case 3: {
                const auto cols = 1 + pick(3);
                dfqa::TableResult t;
                for (std::size_t c = 0; c < cols; ++c) t.columns.push_back("c" + std::to_string(c));
                const auto nrows = pick(5);
                for (std::size_t r = 0; r < nrows; ++r) {
                    std::vector<dfqa::Scalar> row;
                    for (std::size_t c = 0; c < cols; ++c) row.push_back(scalar());
                    t.rows.push_back(row);
                }
                return t;
            }
            default: {
                static const dfqa::ExecErrorKind kinds[] = {dfqa::ExecErrorKind::RuntimeError, dfqa::ExecErrorKind::Timeout,
                                                            dfqa::ExecErrorKind::RejectedUnsafe, dfqa::ExecErrorKind::NoResult};
                return dfqa::ExecError{kinds[pick(4)], "boom"};
            }
        }
    }
};

// ------------------------------------------------------------ endpoints

// Answers a QA prompt with a completion keyed by the question text found in
// the user message. The longest matching question wins.
class LookupEndpoint : public dfqa::llm::Endpoint {
public:
    explicit LookupEndpoint(std::map<std::string, std::string> answers) : answers_(std::move(answers)) {}

    std::string complete(const std::vector<dfqa::llm::Message>& messages, const dfqa::llm::GenParams&) override {
        ++calls;
        const auto& user = messages.back().content;
        const std::string* best = nullptr;
        std::size_t best_len = 0;
        for (const auto& [q, a] : answers_) {
            if (q.size() > best_len && user.find(q) != std::string::npos) {
                best = &a;
                best_len = q.size();
            }
        }
        if (!best) throw dfqa::llm::TransportError("no scripted answer", false);
        return *best;
    }

    std::atomic<int> calls{0};

private:
    std::map<std::string, std::string> answers_;
};

// In-process executor answering from a fixed query -> result table.
class MapExecutor : public dfqa::sandbox::Executor {
public:
    explicit MapExecutor(std::map<std::string, dfqa::CanonResult> answers) : answers_(std::move(answers)) {}

    dfqa::sandbox::ExecResponse execute(const dfqa::sandbox::ExecRequest& r) override {
        ++calls;
        const auto it = answers_.find(r.query);
        if (it == answers_.end()) {
            return {r.request_id, dfqa::ExecError{dfqa::ExecErrorKind::RuntimeError, "NameError: unknown query"}, 0};
        }
        return {r.request_id, it->second, 0};
    }

    std::atomic<int> calls{0};

private:
    std::map<std::string, dfqa::CanonResult> answers_;
};

}  // namespace oracle
