#include "engage/synth.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "engage/rng.hpp"

namespace engage {

using nlohmann::json;

namespace {

std::string pad_id(const char* prefix, int value, int width) {
    std::string digits = std::to_string(value);
    std::string out(prefix);
    if (static_cast<int>(digits.size()) < width)
        out.append(width - digits.size(), '0');
    out += digits;
    return out;
}

// Vocabulary pools: pool p owns words [p*8, p*8+8). Consecutive planted
// sessions use different pools, so adjacent cross-boundary prompts share
// nothing while in-session prompts always share the three anchor words.
constexpr int kPoolSize = 8;
constexpr int kPoolCount = 50;

std::string pool_word(int pool, int index) {
    return pad_id("w", (pool % kPoolCount) * kPoolSize + index, 3);
}

std::string make_prompt(int pool, Rng& rng) {
    std::string text = pool_word(pool, 0) + " " + pool_word(pool, 1) + " " +
                       pool_word(pool, 2);
    int extras = 1 + static_cast<int>(rng.below(2));  // 1 or 2 uniques
    for (int i = 0; i < extras; ++i)
        text += " " + pool_word(pool, 3 + static_cast<int>(rng.below(kPoolSize - 3)));
    return text;
}

ContextBundle make_context(const SynthSpec& spec) {
    ContextBundle bundle;
    bundle.calendar.semester_start = spec.semester_start;
    long long start_days = days_from_civil(spec.semester_start);
    bundle.calendar.semester_end = civil_from_days(start_days + spec.semester_weeks * 7 - 1);
    bundle.calendar.exam_weeks = spec.exam_weeks;

    for (int i = 0; i < spec.n_institutions; ++i) {
        InstitutionInfo inst;
        inst.selectivity =
            (i % 2 == 0) ? Selectivity::HighlySelective : Selectivity::LessSelective;
        bundle.context.institutions[pad_id("U", i + 1, 2)] = inst;
    }
    for (int c = 0; c < spec.n_classes; ++c) {
        ClassInfo info;
        info.discipline = (c % 2 == 0) ? Discipline::STEM : Discipline::NonSTEM;
        info.institution_id = pad_id("U", (c % spec.n_institutions) + 1, 2);
        ScheduleBlock block;
        block.weekday = c % 5;           // Monday .. Friday
        block.start_minute = 9 * 60;     // 09:00
        block.end_minute = 10 * 60 + 30; // 10:30
        info.class_schedule.push_back(block);
        info.size = 30 + 5 * (c % 4);
        std::string class_id = pad_id("C", c + 1, 2);
        bundle.context.classes[class_id] = info;

        // Weekly meetings plus an assignment cycle and the exam windows.
        for (int w = 0; w < spec.semester_weeks; ++w) {
            long long day = start_days + w * 7 + block.weekday;
            ActivityEvent meeting;
            meeting.class_id = class_id;
            meeting.kind = EventKind::ClassMeeting;
            meeting.start = Timestamp{(day * 86400) + block.start_minute * 60, 0};
            meeting.end = Timestamp{(day * 86400) + block.end_minute * 60, 0};
            bundle.events.push_back(meeting);

            if (w % 3 == 0) {
                ActivityEvent release;
                release.class_id = class_id;
                release.kind = EventKind::AssignmentRelease;
                release.start = Timestamp{(day * 86400) + 12 * 3600, 0};
                bundle.events.push_back(release);

                ActivityEvent deadline;
                deadline.class_id = class_id;
                deadline.kind = EventKind::AssignmentDeadline;
                deadline.start = Timestamp{((day + 13) * 86400) + 23 * 3600, 0};
                bundle.events.push_back(deadline);
            }
        }
        for (int w : spec.exam_weeks) {
            long long day = start_days + (w - 1) * 7;
            ActivityEvent exam;
            exam.class_id = class_id;
            exam.kind = EventKind::ExamWindow;
            exam.start = Timestamp{day * 86400 + 8 * 3600, 0};
            exam.end = Timestamp{(day + 4) * 86400 + 20 * 3600, 0};
            bundle.events.push_back(exam);
        }
    }
    return bundle;
}

}  // namespace

SegmentedLogs gen_segmented_logs(const SynthSpec& spec) {
    SegmentedLogs out;
    out.context = make_context(spec);
    Rng rng(spec.seed);

    long long start_days = days_from_civil(spec.semester_start);
    long long semester_end_s =
        (start_days + spec.semester_weeks * 7) * 86400 - 1;
    double mu = std::log(spec.sessions_median);
    int turn_counter = 0;

    for (int e = 0; e < spec.n_enrollments; ++e) {
        std::string enrollment_id = pad_id("E", e + 1, 4);
        std::string class_id = pad_id("C", (e % spec.n_classes) + 1, 2);

        int n_sessions = static_cast<int>(
            std::llround(rng.lognormal(mu, spec.sessions_log_sd)));
        n_sessions = std::clamp(n_sessions, 1, spec.max_sessions_per_enrollment);

        // First turn lands in the opening week, daytime.
        long long t_s = (start_days + static_cast<long long>(rng.below(7))) * 86400 +
                        (8 * 60 + static_cast<long long>(rng.below(12 * 60))) * 60;

        std::vector<int> gold;
        int turn_index = 0;
        int pool = static_cast<int>(rng.below(kPoolCount));
        for (int s = 0; s < n_sessions; ++s) {
            if (s > 0) {
                bool topic_only = rng.uniform01() < spec.topic_boundary_fraction;
                double gap_min;
                if (topic_only) {
                    // Short gap, the vocabulary switch is the only signal.
                    gap_min = 1.0 + rng.uniform01() *
                              (spec.gap_threshold_minutes - spec.gap_margin_minutes - 1.0);
                } else {
                    gap_min = spec.gap_threshold_minutes + spec.gap_margin_minutes +
                              rng.uniform01() * 4320.0;
                }
                t_s += static_cast<long long>(std::ceil(gap_min * 60.0));
                pool = (pool + 1 + static_cast<int>(rng.below(kPoolCount - 1))) % kPoolCount;
                gold.push_back(turn_index);
            }
            if (t_s > semester_end_s - 86400) break;

            int n_turns = spec.min_turns_per_session +
                          static_cast<int>(rng.below(
                              spec.max_turns_per_session - spec.min_turns_per_session + 1));
            for (int t = 0; t < n_turns; ++t) {
                if (t > 0) {
                    double gap_min = 0.2 + rng.uniform01() *
                                     (spec.gap_threshold_minutes - spec.gap_margin_minutes - 0.4);
                    t_s += static_cast<long long>(gap_min * 60.0);
                }
                ConversationTurn turn;
                turn.turn_id = pad_id("T", ++turn_counter, 7);
                turn.enrollment_id = enrollment_id;
                turn.class_id = class_id;
                turn.timestamp = Timestamp{t_s, 0};
                turn.prompt_text = make_prompt(pool, rng);
                turn.response_text = "noted";
                if (rng.uniform01() < spec.page_context_fraction)
                    turn.page_context = enrollment_id + "-pg" + std::to_string(s);
                turn.has_image_upload = rng.uniform01() < 0.1;
                out.turns.push_back(std::move(turn));
                ++turn_index;
            }
        }
        // Drop planted boundaries that fell past the truncation point.
        while (!gold.empty() && gold.back() >= turn_index) gold.pop_back();
        out.gold_boundaries[enrollment_id] = std::move(gold);
    }
    return out;
}

ClusteredFeatures gen_clustered_features(const SynthSpec& spec) {
    if (spec.n_clusters < 1 || spec.dims < spec.n_clusters - 1)
        throw DegenerateMatrix("need dims >= n_clusters - 1 for distinct centers");
    ClusteredFeatures out;
    Rng rng(spec.seed);

    Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(spec.n_clusters, spec.dims);
    for (int c = 1; c < spec.n_clusters; ++c)
        centers(c, c - 1) = spec.separation * spec.spread;

    out.matrix.values.resize(spec.n_points, spec.dims);
    for (int j = 0; j < spec.dims; ++j)
        out.matrix.columns.push_back("f" + std::to_string(j + 1));
    for (int i = 0; i < spec.n_points; ++i) {
        int label = i % spec.n_clusters;
        out.gold_labels.push_back(label);
        out.matrix.row_ids.push_back(pad_id("p", i, 5));
        for (int j = 0; j < spec.dims; ++j)
            out.matrix.values(i, j) = centers(label, j) + spec.spread * rng.normal();
    }
    return out;
}

std::vector<StateSequence> gen_markov_sequences(const TransitionMatrix& matrix,
                                                int n, std::uint64_t seed) {
    const int m = static_cast<int>(matrix.states.size());
    int start = matrix.state_index("Start");
    int end = matrix.state_index("End");
    if (start < 0 || end < 0)
        throw NonAbsorbing("matrix must contain Start and End states");

    // Forward reachability from Start and backward reachability from End
    // over positive-probability edges.
    auto reach = [&](int origin, bool forward) {
        std::vector<bool> seen(m, false);
        std::vector<int> stack{origin};
        seen[origin] = true;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int v = 0; v < m; ++v) {
                double p = forward ? matrix.probs(u, v) : matrix.probs(v, u);
                bool defined = forward ? matrix.row_defined[u] : matrix.row_defined[v];
                if (defined && p > 0.0 && !seen[v]) {
                    seen[v] = true;
                    stack.push_back(v);
                }
            }
        }
        return seen;
    };
    std::vector<bool> from_start = reach(start, true);
    std::vector<bool> to_end = reach(end, false);
    for (int s = 0; s < m; ++s) {
        if (!from_start[s] || s == end) continue;
        if (!matrix.row_defined[s])
            throw NonAbsorbing("state " + matrix.states[s] +
                               " is reachable but has no outgoing transitions");
        if (!to_end[s])
            throw NonAbsorbing("End is unreachable from state " + matrix.states[s]);
    }

    Rng rng(seed);
    std::vector<StateSequence> out;
    for (int i = 0; i < n; ++i) {
        StateSequence seq;
        seq.enrollment_id = pad_id("S", i + 1, 5);
        int state = start;
        seq.states.push_back(matrix.states[state]);
        int steps = 0;
        while (state != end) {
            if (++steps > 10000)
                throw NonAbsorbing("sequence exceeded 10000 states");
            double r = rng.uniform01();
            double acc = 0.0;
            int next = end;
            for (int v = 0; v < m; ++v) {
                acc += matrix.probs(state, v);
                if (r < acc) {
                    next = v;
                    break;
                }
            }
            state = next;
            seq.states.push_back(matrix.states[state]);
        }
        out.push_back(std::move(seq));
    }
    return out;
}

std::string gold_boundaries_to_json(const std::map<std::string, std::vector<int>>& gold) {
    json j = json::object();
    for (const auto& [enrollment, gaps] : gold) j[enrollment] = gaps;
    return j.dump(2);
}

std::map<std::string, std::vector<int>> gold_boundaries_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ContextError(std::string("bad gold boundary JSON: ") + e.what());
    }
    std::map<std::string, std::vector<int>> out;
    for (auto it = j.begin(); it != j.end(); ++it)
        out[it.key()] = it.value().get<std::vector<int>>();
    return out;
}

}  // namespace engage
