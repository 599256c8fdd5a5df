#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "engage/cluster.hpp"
#include "engage/ingest.hpp"
#include "engage/procmine.hpp"

namespace engage {

// Generator knobs. Margins are chosen so oracle recovery is guaranteed by
// construction: in-session gaps sit below threshold - margin, planted time
// boundaries above threshold + margin, and consecutive planted sessions
// draw prompts from disjoint vocabulary pools (Jaccard 0 across a topic
// boundary, >= 3/7 inside a session).
struct SynthSpec {
    std::uint64_t seed = 0;

    // Segmented-log corpus.
    int n_enrollments = 50;
    int n_classes = 8;
    int n_institutions = 4;
    double gap_threshold_minutes = 15.0;
    double gap_margin_minutes = 1.0;
    double topic_boundary_fraction = 0.0;  // planted boundaries that are topic-only
    double sessions_median = 5.0;          // lognormal median
    double sessions_log_sd = 1.98;         // heavy tail: p25 ~ 1, p75 ~ 19
    int max_sessions_per_enrollment = 40;
    int min_turns_per_session = 2;
    int max_turns_per_session = 6;
    double page_context_fraction = 1.0;    // turns carrying a page id
    CivilDate semester_start{2025, 2, 17};  // a Monday
    int semester_weeks = 16;
    std::set<int> exam_weeks = {8, 16};

    // Clustered feature matrix.
    int n_points = 400;
    int n_clusters = 4;
    int dims = 6;
    double spread = 1.0;
    double separation = 12.0;  // center distance in units of spread
};

struct NonAbsorbing : EngageError {
    using EngageError::EngageError;
};

struct SegmentedLogs {
    std::vector<ConversationTurn> turns;  // already time-ordered per enrollment
    // Gap indices per enrollment: gap i means a new planted session starts
    // at that enrollment's turn i.
    std::map<std::string, std::vector<int>> gold_boundaries;
    ContextBundle context;
};

SegmentedLogs gen_segmented_logs(const SynthSpec& spec);

struct ClusteredFeatures {
    FeatureMatrix matrix;
    std::vector<int> gold_labels;
};

ClusteredFeatures gen_clustered_features(const SynthSpec& spec);

std::vector<StateSequence> gen_markov_sequences(const TransitionMatrix& matrix,
                                                int n, std::uint64_t seed);

// Sidecar serializations (gold data lives beside the corpus, never inside).
std::string gold_boundaries_to_json(const std::map<std::string, std::vector<int>>& gold);
std::map<std::string, std::vector<int>> gold_boundaries_from_json(const std::string& text);

}  // namespace engage
