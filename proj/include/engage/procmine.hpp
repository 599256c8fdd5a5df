#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "engage/sessionizer.hpp"

namespace engage {

struct UnlabeledSession : EngageError {
    using EngageError::EngageError;
};
struct EmptyInput : EngageError {
    using EngageError::EngageError;
};
struct StateSetMismatch : EngageError {
    using EngageError::EngageError;
};

// Per-enrollment ordered walk through engagement labels, bracketed by the
// artificial Start and End states.
struct StateSequence {
    std::string enrollment_id;
    std::vector<std::string> states;  // Start, label..., End
};

struct TransitionMatrix {
    // states[0] == "Start", states.back() == "End", labels sorted between.
    std::vector<std::string> states;
    Eigen::MatrixXd counts;            // from x to
    Eigen::MatrixXd probs;             // row-normalized where defined
    std::vector<bool> row_defined;     // false when a row has zero outgoing count

    int state_index(const std::string& name) const;
};

// assignments: session_id -> cluster index; label_map: cluster -> name.
// Sessions are grouped by enrollment, ordered by start time (ties by
// session_id); enrollments without sessions simply never appear.
std::vector<StateSequence> build_sequences(
    const std::vector<Session>& sessions,
    const std::map<std::string, int>& assignments,
    const std::map<int, std::string>& label_map);

// Pooled counts over every sequence, no smoothing. Zero-outgoing rows are
// flagged undefined instead of being filled in.
TransitionMatrix fit_fomm(const std::vector<StateSequence>& sequences);

// Per-group models share one pooled state list so matrices stay comparable.
std::map<std::string, TransitionMatrix> subgroup_fomm(
    const std::vector<StateSequence>& sequences,
    const std::map<std::string, std::string>& enrollment_group);

struct MatrixDiffCell {
    std::string from;
    std::string to;
    std::optional<double> prob_diff;  // absent when either row is undefined
    double count_a = 0.0;
    double count_b = 0.0;
};

std::vector<MatrixDiffCell> matrix_diff(const TransitionMatrix& a,
                                        const TransitionMatrix& b);

}  // namespace engage
