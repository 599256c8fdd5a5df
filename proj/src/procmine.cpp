#include "engage/procmine.hpp"

#include <algorithm>
#include <set>

namespace engage {

int TransitionMatrix::state_index(const std::string& name) const {
    for (size_t i = 0; i < states.size(); ++i)
        if (states[i] == name) return static_cast<int>(i);
    return -1;
}

std::vector<StateSequence> build_sequences(
    const std::vector<Session>& sessions,
    const std::map<std::string, int>& assignments,
    const std::map<int, std::string>& label_map) {
    // Group by enrollment, keeping deterministic enrollment order.
    std::map<std::string, std::vector<const Session*>> by_enrollment;
    for (const Session& s : sessions) by_enrollment[s.enrollment_id].push_back(&s);

    std::vector<StateSequence> out;
    for (auto& [enrollment_id, group] : by_enrollment) {
        std::stable_sort(group.begin(), group.end(),
                         [](const Session* a, const Session* b) {
                             long long ta = a->start().epoch_s;
                             long long tb = b->start().epoch_s;
                             if (ta != tb) return ta < tb;
                             return a->session_id < b->session_id;
                         });
        StateSequence seq;
        seq.enrollment_id = enrollment_id;
        seq.states.push_back("Start");
        for (const Session* s : group) {
            auto ait = assignments.find(s->session_id);
            if (ait == assignments.end())
                throw UnlabeledSession("session " + s->session_id +
                                       " has no cluster assignment");
            auto lit = label_map.find(ait->second);
            if (lit == label_map.end())
                throw UnlabeledSession("cluster " + std::to_string(ait->second) +
                                       " has no label (session " + s->session_id + ")");
            seq.states.push_back(lit->second);
        }
        seq.states.push_back("End");
        out.push_back(std::move(seq));
    }
    return out;
}

namespace {

std::vector<std::string> pooled_states(const std::vector<StateSequence>& sequences) {
    std::set<std::string> labels;
    for (const StateSequence& seq : sequences)
        for (size_t i = 1; i + 1 < seq.states.size(); ++i) labels.insert(seq.states[i]);
    std::vector<std::string> states;
    states.push_back("Start");
    states.insert(states.end(), labels.begin(), labels.end());
    states.push_back("End");
    return states;
}

TransitionMatrix fit_with_states(const std::vector<StateSequence>& sequences,
                                 const std::vector<std::string>& states) {
    TransitionMatrix m;
    m.states = states;
    const int n = static_cast<int>(states.size());
    m.counts = Eigen::MatrixXd::Zero(n, n);
    m.probs = Eigen::MatrixXd::Zero(n, n);

    for (const StateSequence& seq : sequences) {
        if (seq.states.size() < 3 || seq.states.front() != "Start" ||
            seq.states.back() != "End")
            throw EmptyInput("sequence for " + seq.enrollment_id +
                             " is not Start ... End with at least one session");
        for (size_t i = 0; i + 1 < seq.states.size(); ++i) {
            int from = m.state_index(seq.states[i]);
            int to = m.state_index(seq.states[i + 1]);
            if (from < 0 || to < 0)
                throw StateSetMismatch("state outside the pooled state list in " +
                                       seq.enrollment_id);
            m.counts(from, to) += 1.0;
        }
    }

    m.row_defined.assign(n, false);
    for (int i = 0; i < n; ++i) {
        double row_sum = m.counts.row(i).sum();
        if (row_sum > 0.0) {
            m.row_defined[i] = true;
            m.probs.row(i) = m.counts.row(i) / row_sum;
        }
    }
    return m;
}

}  // namespace

TransitionMatrix fit_fomm(const std::vector<StateSequence>& sequences) {
    if (sequences.empty()) throw EmptyInput("no sequences to fit");
    return fit_with_states(sequences, pooled_states(sequences));
}

std::map<std::string, TransitionMatrix> subgroup_fomm(
    const std::vector<StateSequence>& sequences,
    const std::map<std::string, std::string>& enrollment_group) {
    std::vector<std::string> states = pooled_states(sequences);
    std::map<std::string, std::vector<StateSequence>> grouped;
    for (const StateSequence& seq : sequences) {
        auto it = enrollment_group.find(seq.enrollment_id);
        if (it == enrollment_group.end())
            throw EmptyInput("enrollment " + seq.enrollment_id + " has no group");
        grouped[it->second].push_back(seq);
    }
    std::map<std::string, TransitionMatrix> out;
    for (const auto& [group, seqs] : grouped)
        out.emplace(group, fit_with_states(seqs, states));
    return out;
}

std::vector<MatrixDiffCell> matrix_diff(const TransitionMatrix& a,
                                        const TransitionMatrix& b) {
    if (a.states != b.states)
        throw StateSetMismatch("transition matrices have different state lists");
    std::vector<MatrixDiffCell> out;
    const int n = static_cast<int>(a.states.size());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            MatrixDiffCell cell;
            cell.from = a.states[i];
            cell.to = a.states[j];
            cell.count_a = a.counts(i, j);
            cell.count_b = b.counts(i, j);
            if (a.row_defined[i] && b.row_defined[i])
                cell.prob_diff = a.probs(i, j) - b.probs(i, j);
            out.push_back(std::move(cell));
        }
    }
    return out;
}

}  // namespace engage
