#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "engage/sessionizer.hpp"

namespace engage {

// The ten per-session engagement features: three behavioral, three
// cognitive, four temporal.
struct EngagementFeatures {
    int num_turns = 0;
    double avg_minutes_per_turn = 0.0;
    double avg_words_per_prompt = 0.0;
    int copy_paste_events = 0;
    int direct_answer_requests = 0;
    int understanding_queries = 0;
    int week_progress = 1;
    double exam_period_indicator = 0.0;  // fraction of turns in exam weeks
    double time_of_day = 0.0;            // local hour + minute/60, [0, 24)
    double in_class_indicator = 0.0;     // fraction of turns in class blocks
};

inline const std::vector<std::string>& core_feature_names() {
    static const std::vector<std::string> names = {
        "num_turns",        "avg_minutes_per_turn",   "avg_words_per_prompt",
        "copy_paste_events","direct_answer_requests", "understanding_queries",
        "week_progress",    "exam_period_indicator",  "time_of_day",
        "in_class_indicator"};
    return names;
}

// Distances (minutes) from the session start to surrounding class events.
// A field is absent when the class has no qualifying event.
struct ExtendedFeatures {
    std::optional<double> minutes_since_prev_class;
    std::optional<double> minutes_until_next_class;
    std::optional<double> minutes_since_assignment_release;
    std::optional<double> minutes_until_assignment_deadline;
};

inline const std::vector<std::string>& extended_feature_names() {
    static const std::vector<std::string> names = {
        "minutes_since_prev_class", "minutes_until_next_class",
        "minutes_since_assignment_release", "minutes_until_assignment_deadline"};
    return names;
}

// Keyword/pattern configuration for the cognitive detectors. Keyword
// entries are case-insensitive substrings; a "regex:" prefix switches an
// entry to a case-insensitive ECMAScript regex, which is how non-literal
// defaults (e.g. "question <number>") and per-language variants are
// expressed. structured_patterns holds the built-in names
// {multiple_choice_markers, code_block} and/or user regex strings.
struct LexiconConfig {
    std::vector<std::string> copy_paste_keywords = {
        "as follows", "regex:question\\s*[#.:]?\\s*[0-9]+"};
    std::vector<std::string> structured_patterns = {"multiple_choice_markers",
                                                    "code_block"};
    int long_prompt_threshold = 300;  // tokens
    std::vector<std::string> direct_answer_keywords = {
        "give me the answer to", "what is the solution of"};
    std::vector<std::string> understanding_keywords = {"how to understand",
                                                       "why does"};
};

struct LexiconError : EngageError {
    using EngageError::EngageError;
};

LexiconConfig load_lexicon_string(const std::string& text);
LexiconConfig load_lexicon_file(const std::string& path);

// Compiled form; build once, share read-only across threads.
class Lexicon {
public:
    explicit Lexicon(const LexiconConfig& config);

    // One binary signal per detector family: image upload, pasted-text
    // keyword, structured exam/homework pattern, excessively long prompt.
    // Per-turn value is in {0..4}.
    int copy_paste_signals(const ConversationTurn& turn) const;
    int direct_answer_hit(const ConversationTurn& turn) const;   // {0,1}
    int understanding_hit(const ConversationTurn& turn) const;   // {0,1}

    const LexiconConfig& config() const { return config_; }

private:
    struct Matcher {
        bool is_regex = false;
        std::string literal;
        std::shared_ptr<void> regex;  // compiled std::regex
    };
    static std::vector<Matcher> compile(const std::vector<std::string>& entries);
    bool any_match(const std::vector<Matcher>& ms, const std::string& text) const;

    LexiconConfig config_;
    std::vector<Matcher> copy_paste_;
    std::vector<Matcher> direct_answer_;
    std::vector<Matcher> understanding_;
    std::vector<Matcher> structured_user_;
    bool structured_mc_ = false;
    bool structured_code_ = false;
};

// Structured-text pattern primitives, exposed for tests.
bool has_multiple_choice_markers(const std::string& text);
bool has_code_block(const std::string& text);

int count_turns(const Session& session);
double avg_minutes_per_turn(const Session& session);
double avg_words_per_prompt(const Session& session);
int detect_copy_paste(const ConversationTurn& turn, const Lexicon& lexicon);
int detect_direct_answer(const ConversationTurn& turn, const Lexicon& lexicon);
int detect_understanding(const ConversationTurn& turn, const Lexicon& lexicon);

struct SessionOutsideCalendar : EngageError {
    using EngageError::EngageError;
};

struct TemporalFeatures {
    int week_progress = 1;
    double exam_period_indicator = 0.0;
    double time_of_day = 0.0;
    double in_class_indicator = 0.0;
};

TemporalFeatures temporal_features(const Session& session, const Calendar& calendar,
                                   const std::vector<ScheduleBlock>& schedule);

// Events must already be filtered to the session's class.
ExtendedFeatures extended_features(const Session& session,
                                   const std::vector<ActivityEvent>& events);

struct FeaturizedSession {
    std::string session_id;
    std::string enrollment_id;
    std::string class_id;
    EngagementFeatures core;
    ExtendedFeatures extended;
};

FeaturizedSession featurize(const Session& session, const Corpus& corpus,
                            const Lexicon& lexicon);

// All sessions, optionally across threads; output order follows input.
std::vector<FeaturizedSession> featurize_all(const std::vector<Session>& sessions,
                                             const Corpus& corpus,
                                             const Lexicon& lexicon,
                                             int threads = 1);

}  // namespace engage
