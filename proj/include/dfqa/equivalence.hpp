#pragma once

// Execution-result judging: normalization, strict equality with numeric
// tolerance, and the relaxed containment criterion for container answers.

#include "dfqa/json_io.hpp"
#include "dfqa/model.hpp"

#include <vector>

namespace dfqa::judge {

enum class Containment {
    /// Every ground-truth cell must occur in the prediction (multiset).
    Cell,
    /// Every ground-truth row must occur as a row of a predicted table;
    /// non-table predictions fall back to cell containment.
    Row,
};

struct JudgeConfig {
    double rel_tol = 1e-6;
    double abs_tol = 1e-9;
    bool list_order_sensitive = false;
    bool string_trim = true;
    bool lowercase_compare = false;
    Containment containment = Containment::Cell;
    /// Count needs_review verdicts as correct in pass@1.
    bool count_needs_review = false;

    friend bool operator==(const JudgeConfig&, const JudgeConfig&) = default;
};

/// Applies the keys present in `overrides` on top of `base`.
JudgeConfig config_from_json(const json& overrides, JudgeConfig base = {});
json config_to_json(const JudgeConfig& cfg);

/// Precondition: `r` is not an ExecError.
CanonResult normalize(const CanonResult& r, const JudgeConfig& cfg);

bool scalar_equal(const Scalar& a, const Scalar& b, const JudgeConfig& cfg);

/// Precondition: both arguments normalized.
bool strict_equal(const CanonResult& a, const CanonResult& b, const JudgeConfig& cfg);

/// Every cell value of `r`, normalized. Series contribute values only.
std::vector<Scalar> flatten(const CanonResult& r, const JudgeConfig& cfg);

/// Size of a maximum matching between `lhs` and `rhs` under scalar_equal.
std::size_t multiset_matching(const std::vector<Scalar>& lhs, const std::vector<Scalar>& rhs,
                              const JudgeConfig& cfg);

Verdict judge(const CanonResult& predicted, const CanonResult& truth, const JudgeConfig& cfg);

/// Verdict for an execution error on the predicted side.
Verdict error_verdict(ExecErrorKind kind);

}  // namespace dfqa::judge
