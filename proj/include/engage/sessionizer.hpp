#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "engage/ingest.hpp"

namespace engage {

// A run of consecutive turns judged to be one topic-bounded conversation.
struct Session {
    std::string session_id;
    std::string enrollment_id;
    std::string class_id;
    std::vector<ConversationTurn> turns;  // non-empty, timestamps non-decreasing

    const Timestamp& start() const { return turns.front().timestamp; }
    const Timestamp& end() const { return turns.back().timestamp; }
};

struct SegmentationConfig {
    double gap_threshold_minutes = 15.0;
    bool topic_stage_enabled = true;
    double heuristic_similarity_threshold = 0.12;
    int min_turns_for_topic_split = 3;
    bool include_responses = false;  // feed responses to the detector too
};

// Gap indices over a turn stream of length n: a subset of {1..n-1} where
// gap i means a new session starts at turn i.
struct BoundarySet {
    std::vector<int> gaps;  // sorted, unique

    bool operator==(const BoundarySet&) const = default;
};

struct MismatchedStreamLength : EngageError {
    using EngageError::EngageError;
};

BoundarySet make_boundary_set(std::vector<int> gaps, int n_turns);

// Raised by a remote detector when the endpoint cannot be reached or
// answers badly; segment_combined falls back to the heuristic.
struct RemoteDetectorUnavailable : EngageError {
    using EngageError::EngageError;
};

class TopicDetector {
public:
    virtual ~TopicDetector() = default;
    // Internal gap indices (1..n-1) where the topic shifts.
    virtual std::vector<int> boundaries(const std::string& session_id,
                                        const std::vector<std::string>& prompts) = 0;
};

// Token-set Jaccard over consecutive prompts; splits below the configured
// similarity threshold. Deterministic stand-in for an LLM segmenter.
class HeuristicDetector : public TopicDetector {
public:
    explicit HeuristicDetector(double similarity_threshold = 0.12)
        : threshold_(similarity_threshold) {}
    std::vector<int> boundaries(const std::string& session_id,
                                const std::vector<std::string>& prompts) override;

private:
    double threshold_;
};

double heuristic_topic_similarity(const std::string& prompt_a,
                                  const std::string& prompt_b);

// Splits a single-enrollment, time-ascending turn stream wherever the gap
// between consecutive prompts strictly exceeds the threshold.
std::vector<Session> segment_time(const std::vector<ConversationTurn>& turns,
                                  double gap_threshold_minutes);

// Topic boundaries within one session; sessions shorter than
// min_turns_for_topic_split yield an empty set without consulting the
// detector. RemoteDetectorUnavailable propagates to the caller.
BoundarySet detect_topic_boundaries(const Session& session, TopicDetector& detector,
                                    const SegmentationConfig& config);

struct SegmentationOutcome {
    std::vector<Session> sessions;
    int detector_fallbacks = 0;  // remote failures answered by the heuristic
};

// Time stage, then topic splits within each time-stage session. Session ids
// are enrollment_id plus a 1-based ordinal. A null detector means the
// built-in Jaccard heuristic; disabling the stage goes through the config.
SegmentationOutcome segment_combined(const std::vector<ConversationTurn>& turns,
                                     const SegmentationConfig& config,
                                     TopicDetector* detector);

// Whole-corpus segmentation, one enrollment at a time, optionally across
// threads; output order is (enrollment_id, ordinal) regardless of thread
// count.
SegmentationOutcome segment_corpus(const Corpus& corpus,
                                   const SegmentationConfig& config,
                                   TopicDetector* detector, int threads = 1);

struct SegmentationScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Binary precision/recall/F1 over gaps. Both sets empty -> all 1.0; an
// empty side scores 1.0 on its own axis (no false positives / negatives).
SegmentationScore evaluate_segmentation(const BoundarySet& predicted,
                                        const BoundarySet& gold, int n_gaps);

// Gold from page context is tri-state: gaps touching a null page are not
// evaluable and are excluded from scoring.
struct PageGold {
    BoundarySet boundaries;
    std::vector<int> evaluable_gaps;  // sorted
};

PageGold gold_from_page_context(const std::vector<ConversationTurn>& turns);

SegmentationScore evaluate_against_page_gold(const BoundarySet& predicted,
                                             const PageGold& gold, int n_gaps);

// Pooled P/R/F1 accumulator for multi-stream evaluation.
struct BoundaryTally {
    int64_t true_positives = 0;
    int64_t predicted_total = 0;
    int64_t gold_total = 0;

    void add(const BoundarySet& predicted, const BoundarySet& gold);
    SegmentationScore score() const;
};

// Boundary set implied by a session list over the concatenated stream.
BoundarySet boundaries_of(const std::vector<Session>& sessions);

}  // namespace engage
