#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "engage/procmine.hpp"

using namespace engage;

namespace {

Session session_at(const std::string& session_id, const std::string& enrollment_id,
                   long long start_epoch) {
    Session s;
    s.session_id = session_id;
    s.enrollment_id = enrollment_id;
    s.class_id = "C1";
    ConversationTurn t;
    t.turn_id = session_id + "-t0";
    t.enrollment_id = enrollment_id;
    t.class_id = "C1";
    t.timestamp.epoch_s = start_epoch;
    t.prompt_text = "p";
    s.turns.push_back(std::move(t));
    return s;
}

StateSequence seq(const std::string& enrollment_id,
                  std::vector<std::string> states) {
    return StateSequence{enrollment_id, std::move(states)};
}

double prob(const TransitionMatrix& m, const std::string& from,
            const std::string& to) {
    return m.probs(m.state_index(from), m.state_index(to));
}

double count(const TransitionMatrix& m, const std::string& from,
             const std::string& to) {
    return m.counts(m.state_index(from), m.state_index(to));
}

}  // namespace

TEST_CASE("build_sequences orders by start time with id tie-break") {
    std::vector<Session> sessions;
    sessions.push_back(session_at("S3", "E1", 3000));
    sessions.push_back(session_at("S1", "E1", 1000));
    sessions.push_back(session_at("S9", "E2", 500));
    // Equal start times fall back to session_id order.
    sessions.push_back(session_at("S2b", "E1", 2000));
    sessions.push_back(session_at("S2a", "E1", 2000));

    std::map<std::string, int> assignments = {
        {"S1", 0}, {"S2a", 1}, {"S2b", 0}, {"S3", 1}, {"S9", 0}};
    std::map<int, std::string> labels = {{0, "Type A"}, {1, "Type B"}};

    auto seqs = build_sequences(sessions, assignments, labels);
    REQUIRE(seqs.size() == 2);
    CHECK(seqs[0].enrollment_id == "E1");
    CHECK(seqs[0].states == std::vector<std::string>{"Start", "Type A", "Type B",
                                                     "Type A", "Type B", "End"});
    CHECK(seqs[1].enrollment_id == "E2");
    CHECK(seqs[1].states == std::vector<std::string>{"Start", "Type A", "End"});
}

TEST_CASE("build_sequences rejects missing assignments and labels") {
    std::vector<Session> sessions = {session_at("S1", "E1", 0)};
    std::map<int, std::string> labels = {{0, "Type A"}};
    CHECK_THROWS_AS(build_sequences(sessions, {}, labels), UnlabeledSession);
    std::map<std::string, int> assignments = {{"S1", 7}};
    CHECK_THROWS_AS(build_sequences(sessions, assignments, labels),
                    UnlabeledSession);
}

TEST_CASE("build_sequences emits nothing for absent enrollments") {
    CHECK(build_sequences({}, {}, {}).empty());
}

TEST_CASE("fomm hand example normalizes counts") {
    auto m = fit_fomm({seq("E1", {"Start", "A", "A", "B", "End"})});
    CHECK(m.states == std::vector<std::string>{"Start", "A", "B", "End"});
    CHECK(prob(m, "Start", "A") == 1.0);
    CHECK(prob(m, "A", "A") == 0.5);
    CHECK(prob(m, "A", "B") == 0.5);
    CHECK(prob(m, "B", "End") == 1.0);
    CHECK(count(m, "A", "A") == 1.0);
    CHECK(count(m, "A", "B") == 1.0);
    CHECK(m.row_defined[m.state_index("Start")]);
    CHECK_FALSE(m.row_defined[m.state_index("End")]);
}

TEST_CASE("fomm pools counts across sequences without smoothing") {
    auto m = fit_fomm({seq("E1", {"Start", "A", "End"}),
                       seq("E2", {"Start", "A", "End"}),
                       seq("E3", {"Start", "B", "A", "End"})});
    CHECK(count(m, "Start", "A") == 2.0);
    CHECK(count(m, "Start", "B") == 1.0);
    CHECK(prob(m, "Start", "A") == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    // B never goes to B and no smoothing may invent that mass.
    CHECK(prob(m, "B", "B") == 0.0);
    CHECK(prob(m, "B", "A") == 1.0);
}

TEST_CASE("fomm structural invariants") {
    std::vector<StateSequence> seqs = {
        seq("E1", {"Start", "A", "B", "A", "End"}),
        seq("E2", {"Start", "B", "End"}),
        seq("E3", {"Start", "C", "C", "End"}),
    };
    auto m = fit_fomm(seqs);

    int total_expected = 0;
    for (const auto& s : seqs) total_expected += static_cast<int>(s.states.size()) - 1;
    CHECK(m.counts.sum() == doctest::Approx(total_expected));

    int start = m.state_index("Start");
    int end = m.state_index("End");
    CHECK(m.counts.col(start).sum() == 0.0);
    CHECK(m.counts.row(end).sum() == 0.0);
    for (size_t i = 0; i < m.states.size(); ++i) {
        if (!m.row_defined[i]) continue;
        CHECK(std::fabs(m.probs.row(static_cast<int>(i)).sum() - 1.0) < 1e-10);
    }
    // Interior labels sort between the brackets.
    CHECK(m.states == std::vector<std::string>{"Start", "A", "B", "C", "End"});
}

TEST_CASE("fomm rejects empty and malformed input") {
    CHECK_THROWS_AS(fit_fomm({}), EmptyInput);
    CHECK_THROWS_AS(fit_fomm({seq("E1", {"Start", "End"})}), EmptyInput);
    CHECK_THROWS_AS(fit_fomm({seq("E1", {"A", "B"})}), EmptyInput);
}

TEST_CASE("subgroup matrices share the pooled state list and add up") {
    std::vector<StateSequence> seqs = {
        seq("E1", {"Start", "A", "A", "End"}),
        seq("E2", {"Start", "B", "End"}),
        seq("E3", {"Start", "A", "B", "End"}),
    };
    std::map<std::string, std::string> groups = {
        {"E1", "stem"}, {"E2", "other"}, {"E3", "stem"}};

    auto by_group = subgroup_fomm(seqs, groups);
    REQUIRE(by_group.size() == 2);
    auto pooled = fit_fomm(seqs);

    // Group "other" never saw state A, yet its matrix still carries the row.
    CHECK(by_group.at("other").states == pooled.states);
    CHECK(by_group.at("stem").states == pooled.states);
    CHECK_FALSE(by_group.at("other").row_defined[pooled.state_index("A")]);

    Eigen::MatrixXd sum = by_group.at("stem").counts + by_group.at("other").counts;
    CHECK((sum - pooled.counts).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("subgroup fit requires a total grouping") {
    std::vector<StateSequence> seqs = {seq("E1", {"Start", "A", "End"})};
    CHECK_THROWS_AS(subgroup_fomm(seqs, {}), EmptyInput);
}

TEST_CASE("single-group subgroup equals the pooled fit") {
    std::vector<StateSequence> seqs = {
        seq("E1", {"Start", "A", "B", "End"}),
        seq("E2", {"Start", "B", "B", "End"}),
    };
    auto by_group = subgroup_fomm(seqs, {{"E1", "all"}, {"E2", "all"}});
    auto pooled = fit_fomm(seqs);
    REQUIRE(by_group.size() == 1);
    CHECK((by_group.at("all").counts - pooled.counts).cwiseAbs().maxCoeff() == 0.0);
    CHECK((by_group.at("all").probs - pooled.probs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matrix_diff") {
    auto base = fit_fomm({seq("E1", {"Start", "A", "A", "B", "End"}),
                          seq("E2", {"Start", "B", "End"})});

    SUBCASE("identical matrices diff to zero everywhere") {
        for (const auto& cell : matrix_diff(base, base)) {
            if (cell.prob_diff) CHECK(*cell.prob_diff == 0.0);
            CHECK(cell.count_a == cell.count_b);
        }
    }
    SUBCASE("cells on an undefined row are absent, counts still carried") {
        // Second operand never leaves Start through A, so its A row is empty.
        auto other = fit_fomm({seq("E3", {"Start", "B", "End"})});
        // Rebuild over the same state set via subgroup pooling.
        std::vector<StateSequence> all = {seq("E1", {"Start", "A", "A", "B", "End"}),
                                          seq("E3", {"Start", "B", "End"})};
        auto grouped = subgroup_fomm(all, {{"E1", "g1"}, {"E3", "g2"}});
        auto diffs = matrix_diff(grouped.at("g1"), grouped.at("g2"));
        int absent = 0;
        for (const auto& cell : diffs) {
            if (cell.from == "A") {
                CHECK_FALSE(cell.prob_diff.has_value());
                ++absent;
            }
            if (cell.from == "Start" && cell.to == "A") {
                REQUIRE(cell.prob_diff.has_value());
                CHECK(*cell.prob_diff == 1.0);
                CHECK(cell.count_a == 1.0);
                CHECK(cell.count_b == 0.0);
            }
        }
        CHECK(absent == 4);
        (void)other;
    }
    SUBCASE("mismatched state sets are rejected") {
        auto other = fit_fomm({seq("E9", {"Start", "Z", "End"})});
        CHECK_THROWS_AS(matrix_diff(base, other), StateSetMismatch);
    }
}

TEST_CASE("probability of a planted one-cell difference") {
    std::vector<StateSequence> a_seqs, b_seqs;
    // Group a loops A four times out of five; group b once out of five.
    a_seqs.push_back(seq("A1", {"Start", "A", "A", "A", "A", "A", "B", "End"}));
    b_seqs.push_back(seq("B1", {"Start", "A", "B", "A", "B", "A", "B", "End"}));
    std::vector<StateSequence> all = a_seqs;
    all.insert(all.end(), b_seqs.begin(), b_seqs.end());
    auto grouped = subgroup_fomm(all, {{"A1", "a"}, {"B1", "b"}});
    auto diffs = matrix_diff(grouped.at("a"), grouped.at("b"));
    for (const auto& cell : diffs) {
        if (cell.from == "A" && cell.to == "A") {
            REQUIRE(cell.prob_diff.has_value());
            CHECK(*cell.prob_diff == doctest::Approx(4.0 / 5.0 - 0.0).epsilon(1e-12));
        }
    }
}
