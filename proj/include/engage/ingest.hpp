#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "engage/rfc3339.hpp"

namespace engage {

struct EngageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One prompt/response pair, the atomic log record.
struct ConversationTurn {
    std::string turn_id;
    std::string enrollment_id;  // student-within-class identity
    std::string class_id;
    Timestamp timestamp;
    std::string prompt_text;
    std::string response_text;
    std::optional<std::string> page_context;
    bool has_image_upload = false;

    bool operator==(const ConversationTurn&) const = default;
};

enum class Discipline { STEM, NonSTEM };
enum class Selectivity { HighlySelective, LessSelective };

struct ScheduleBlock {
    int weekday = 0;       // 0 = Monday .. 6 = Sunday
    int start_minute = 0;  // minutes past local midnight
    int end_minute = 0;    // exclusive, > start_minute
};

struct ClassInfo {
    Discipline discipline = Discipline::NonSTEM;
    std::string institution_id;
    std::vector<ScheduleBlock> class_schedule;
    int size = 0;
};

struct InstitutionInfo {
    Selectivity selectivity = Selectivity::LessSelective;
};

struct ContextMeta {
    std::map<std::string, ClassInfo> classes;
    std::map<std::string, InstitutionInfo> institutions;
    // Optional cross-class student identity, used only as a clustering key.
    std::map<std::string, std::string> enrollment_student;
};

enum class EventKind { ClassMeeting, AssignmentRelease, AssignmentDeadline, ExamWindow };

struct ActivityEvent {
    std::string class_id;
    EventKind kind = EventKind::ClassMeeting;
    Timestamp start;
    std::optional<Timestamp> end;
};

struct Calendar {
    CivilDate semester_start;
    CivilDate semester_end;
    std::set<int> exam_weeks;  // 1-based week indices
};

// Immutable after build; per-enrollment streams sorted by (timestamp, turn_id).
struct Corpus {
    std::map<std::string, std::vector<ConversationTurn>> by_enrollment;
    ContextMeta context;
    std::vector<ActivityEvent> events;
    Calendar calendar;

    size_t turn_count() const;
    const std::string& class_of(const std::string& enrollment_id) const;
};

struct ParseResult {
    std::vector<ConversationTurn> turns;
    int skipped = 0;
    std::vector<std::string> messages;  // first N skip reasons, line-tagged
};

// Reads the line-delimited turn log: one JSON object per line with keys
// {turn_id, enrollment_id, class_id, ts, prompt, response, page, image}.
// Malformed or incomplete lines are skipped and counted, never fatal.
ParseResult parse_turns(std::istream& in);
ParseResult parse_turns_file(const std::string& path);

// Canonical one-line form of a turn; parse(serialize(t)) == t.
std::string serialize_turn(const ConversationTurn& t);

struct UnresolvedClass : EngageError {
    using EngageError::EngageError;
};
struct InconsistentEnrollment : EngageError {
    using EngageError::EngageError;
};
struct ContextError : EngageError {
    using EngageError::EngageError;
};

Corpus build_corpus(std::vector<ConversationTurn> turns, ContextMeta context,
                    std::vector<ActivityEvent> events, Calendar calendar);

struct ValidationReport {
    std::vector<std::string> duplicate_turn_ids;
    std::vector<std::string> out_of_window_turn_ids;
    std::vector<std::string> empty_prompt_turn_ids;  // empty prompt, no image

    bool clean() const {
        return duplicate_turn_ids.empty() && out_of_window_turn_ids.empty() &&
               empty_prompt_turn_ids.empty();
    }
};

ValidationReport validate_corpus(const Corpus& corpus);

// Removes turns whose local date falls outside the semester window.
// Opt-in; validation only flags them.
size_t drop_out_of_window(Corpus& corpus);

// Context document: JSON with top-level keys {classes, institutions, events,
// calendar} and optionally {enrollments} (enrollment_id -> student_id).
struct ContextBundle {
    ContextMeta context;
    std::vector<ActivityEvent> events;
    Calendar calendar;
};

ContextBundle load_context_file(const std::string& path);
ContextBundle load_context_string(const std::string& text);
std::string serialize_context(const ContextBundle& bundle);

// 1-based semester week index of a local calendar date.
int week_index(const CivilDate& date, const Calendar& calendar);

}  // namespace engage
