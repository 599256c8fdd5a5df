#include "engage/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace engage {

using nlohmann::json;

size_t Corpus::turn_count() const {
    size_t n = 0;
    for (const auto& [id, turns] : by_enrollment) n += turns.size();
    return n;
}

const std::string& Corpus::class_of(const std::string& enrollment_id) const {
    auto it = by_enrollment.find(enrollment_id);
    if (it == by_enrollment.end() || it->second.empty())
        throw EngageError("unknown enrollment: " + enrollment_id);
    return it->second.front().class_id;
}

namespace {

constexpr int kMaxMessages = 100;

void note(ParseResult& r, int line_no, const std::string& why) {
    ++r.skipped;
    if (static_cast<int>(r.messages.size()) < kMaxMessages)
        r.messages.push_back("line " + std::to_string(line_no) + ": " + why);
}

}  // namespace

ParseResult parse_turns(std::istream& in) {
    if (!in) throw EngageError("unreadable turn stream");
    ParseResult result;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            note(result, line_no, "malformed record");
            continue;
        }
        const char* required[] = {"turn_id", "enrollment_id", "class_id",
                                  "ts",      "prompt",        "response"};
        const char* missing = nullptr;
        for (const char* key : required) {
            if (!j.contains(key) || j[key].is_null()) {
                missing = key;
                break;
            }
        }
        if (missing) {
            note(result, line_no, std::string("missing field ") + missing);
            continue;
        }
        ConversationTurn t;
        try {
            t.turn_id = j["turn_id"].get<std::string>();
            t.enrollment_id = j["enrollment_id"].get<std::string>();
            t.class_id = j["class_id"].get<std::string>();
            t.prompt_text = j["prompt"].get<std::string>();
            t.response_text = j["response"].get<std::string>();
            if (j.contains("page") && !j["page"].is_null())
                t.page_context = j["page"].get<std::string>();
            t.has_image_upload = j.value("image", false);
        } catch (const json::exception&) {
            note(result, line_no, "malformed record");
            continue;
        }
        auto ts = parse_rfc3339(j["ts"].get<std::string>());
        if (!ts) {
            note(result, line_no, "bad timestamp");
            continue;
        }
        t.timestamp = *ts;
        result.turns.push_back(std::move(t));
    }
    if (in.bad()) throw EngageError("read error on turn stream");
    return result;
}

ParseResult parse_turns_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw EngageError("cannot open turn log: " + path);
    return parse_turns(f);
}

std::string serialize_turn(const ConversationTurn& t) {
    json j = json::object();
    j["turn_id"] = t.turn_id;
    j["enrollment_id"] = t.enrollment_id;
    j["class_id"] = t.class_id;
    j["ts"] = format_rfc3339(t.timestamp);
    j["prompt"] = t.prompt_text;
    j["response"] = t.response_text;
    if (t.page_context)
        j["page"] = *t.page_context;
    else
        j["page"] = nullptr;
    j["image"] = t.has_image_upload;
    return j.dump();
}

Corpus build_corpus(std::vector<ConversationTurn> turns, ContextMeta context,
                    std::vector<ActivityEvent> events, Calendar calendar) {
    Corpus corpus;
    for (auto& t : turns) {
        if (!context.classes.count(t.class_id))
            throw UnresolvedClass("turn " + t.turn_id +
                                  " references unknown class: " + t.class_id);
        corpus.by_enrollment[t.enrollment_id].push_back(std::move(t));
    }
    for (auto& [enrollment, stream] : corpus.by_enrollment) {
        std::stable_sort(stream.begin(), stream.end(),
                         [](const ConversationTurn& a, const ConversationTurn& b) {
                             if (a.timestamp.epoch_s != b.timestamp.epoch_s)
                                 return a.timestamp.epoch_s < b.timestamp.epoch_s;
                             return a.turn_id < b.turn_id;
                         });
        for (const auto& t : stream) {
            if (t.class_id != stream.front().class_id)
                throw InconsistentEnrollment("enrollment " + enrollment +
                                             " spans classes " +
                                             stream.front().class_id + " and " +
                                             t.class_id);
        }
    }
    std::sort(events.begin(), events.end(),
              [](const ActivityEvent& a, const ActivityEvent& b) {
                  if (a.class_id != b.class_id) return a.class_id < b.class_id;
                  if (a.start.epoch_s != b.start.epoch_s)
                      return a.start.epoch_s < b.start.epoch_s;
                  return static_cast<int>(a.kind) < static_cast<int>(b.kind);
              });
    corpus.context = std::move(context);
    corpus.events = std::move(events);
    corpus.calendar = std::move(calendar);
    return corpus;
}

ValidationReport validate_corpus(const Corpus& corpus) {
    ValidationReport report;
    std::unordered_set<std::string> seen;
    std::unordered_set<std::string> reported;
    for (const auto& [enrollment, stream] : corpus.by_enrollment) {
        for (const auto& t : stream) {
            if (!seen.insert(t.turn_id).second && reported.insert(t.turn_id).second)
                report.duplicate_turn_ids.push_back(t.turn_id);
            CivilDate d = t.timestamp.local_date();
            if (d < corpus.calendar.semester_start || corpus.calendar.semester_end < d)
                report.out_of_window_turn_ids.push_back(t.turn_id);
            if (t.prompt_text.empty() && !t.has_image_upload)
                report.empty_prompt_turn_ids.push_back(t.turn_id);
        }
    }
    return report;
}

size_t drop_out_of_window(Corpus& corpus) {
    size_t dropped = 0;
    for (auto it = corpus.by_enrollment.begin(); it != corpus.by_enrollment.end();) {
        auto& stream = it->second;
        auto keep_end = std::remove_if(
            stream.begin(), stream.end(), [&](const ConversationTurn& t) {
                CivilDate d = t.timestamp.local_date();
                return d < corpus.calendar.semester_start ||
                       corpus.calendar.semester_end < d;
            });
        dropped += stream.end() - keep_end;
        stream.erase(keep_end, stream.end());
        it = stream.empty() ? corpus.by_enrollment.erase(it) : std::next(it);
    }
    return dropped;
}

namespace {

Timestamp parse_ts_or_throw(const json& j, const std::string& what) {
    auto ts = parse_rfc3339(j.get<std::string>());
    if (!ts) throw ContextError("bad timestamp in " + what + ": " + j.dump());
    return *ts;
}

EventKind parse_kind(const std::string& s) {
    if (s == "ClassMeeting") return EventKind::ClassMeeting;
    if (s == "AssignmentRelease") return EventKind::AssignmentRelease;
    if (s == "AssignmentDeadline") return EventKind::AssignmentDeadline;
    if (s == "ExamWindow") return EventKind::ExamWindow;
    throw ContextError("unknown event kind: " + s);
}

std::string kind_name(EventKind k) {
    switch (k) {
        case EventKind::ClassMeeting: return "ClassMeeting";
        case EventKind::AssignmentRelease: return "AssignmentRelease";
        case EventKind::AssignmentDeadline: return "AssignmentDeadline";
        case EventKind::ExamWindow: return "ExamWindow";
    }
    return "?";
}

}  // namespace

ContextBundle load_context_string(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ContextError("context document is not a JSON object");
    ContextBundle bundle;
    for (const char* key : {"classes", "institutions", "calendar"})
        if (!j.contains(key))
            throw ContextError(std::string("context missing key: ") + key);

    for (auto& [cid, cj] : j["classes"].items()) {
        ClassInfo info;
        std::string disc = cj.value("discipline", "NonSTEM");
        if (disc == "STEM")
            info.discipline = Discipline::STEM;
        else if (disc == "NonSTEM")
            info.discipline = Discipline::NonSTEM;
        else
            throw ContextError("unknown discipline for class " + cid + ": " + disc);
        info.institution_id = cj.value("institution_id", "");
        info.size = cj.value("size", 0);
        if (info.size <= 0)
            throw ContextError("class " + cid + " has non-positive size");
        if (cj.contains("class_schedule")) {
            for (const auto& bj : cj["class_schedule"]) {
                ScheduleBlock b;
                b.weekday = bj.value("weekday", 0);
                b.start_minute = bj.value("start_minute", 0);
                b.end_minute = bj.value("end_minute", 0);
                if (b.weekday < 0 || b.weekday > 6 || b.start_minute < 0 ||
                    b.end_minute > 1440 || b.start_minute >= b.end_minute)
                    throw ContextError("bad schedule block for class " + cid);
                info.class_schedule.push_back(b);
            }
        }
        bundle.context.classes[cid] = std::move(info);
    }
    for (auto& [iid, ij] : j["institutions"].items()) {
        InstitutionInfo info;
        std::string sel = ij.value("selectivity", "LessSelective");
        if (sel == "HighlySelective")
            info.selectivity = Selectivity::HighlySelective;
        else if (sel == "LessSelective")
            info.selectivity = Selectivity::LessSelective;
        else
            throw ContextError("unknown selectivity for " + iid + ": " + sel);
        bundle.context.institutions[iid] = info;
    }
    for (const auto& [cid, info] : bundle.context.classes) {
        if (!bundle.context.institutions.count(info.institution_id))
            throw ContextError("class " + cid + " references unknown institution: " +
                               info.institution_id);
    }
    if (j.contains("enrollments")) {
        for (auto& [eid, sj] : j["enrollments"].items())
            bundle.context.enrollment_student[eid] = sj.get<std::string>();
    }
    if (j.contains("events")) {
        for (const auto& ej : j["events"]) {
            ActivityEvent e;
            e.class_id = ej.value("class_id", "");
            e.kind = parse_kind(ej.value("kind", ""));
            e.start = parse_ts_or_throw(ej.at("start"), "event");
            if (ej.contains("end") && !ej["end"].is_null())
                e.end = parse_ts_or_throw(ej["end"], "event");
            bool needs_end = e.kind == EventKind::ClassMeeting ||
                             e.kind == EventKind::ExamWindow;
            if (needs_end && !e.end)
                throw ContextError(kind_name(e.kind) + " event requires an end");
            if (e.end && e.end->epoch_s <= e.start.epoch_s)
                throw ContextError("event end not after start");
            if (!bundle.context.classes.count(e.class_id))
                throw ContextError("event references unknown class: " + e.class_id);
            bundle.events.push_back(std::move(e));
        }
    }
    const auto& cal = j["calendar"];
    auto start = parse_date(cal.value("semester_start", ""));
    auto end = parse_date(cal.value("semester_end", ""));
    if (!start || !end || *end < *start)
        throw ContextError("calendar needs semester_start <= semester_end");
    bundle.calendar.semester_start = *start;
    bundle.calendar.semester_end = *end;
    if (cal.contains("exam_weeks"))
        for (const auto& w : cal["exam_weeks"])
            bundle.calendar.exam_weeks.insert(w.get<int>());
    return bundle;
}

ContextBundle load_context_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ContextError("cannot open context file: " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return load_context_string(os.str());
}

std::string serialize_context(const ContextBundle& bundle) {
    json j = json::object();
    json classes = json::object();
    for (const auto& [cid, info] : bundle.context.classes) {
        json cj;
        cj["discipline"] = info.discipline == Discipline::STEM ? "STEM" : "NonSTEM";
        cj["institution_id"] = info.institution_id;
        cj["size"] = info.size;
        json blocks = json::array();
        for (const auto& b : info.class_schedule)
            blocks.push_back({{"weekday", b.weekday},
                              {"start_minute", b.start_minute},
                              {"end_minute", b.end_minute}});
        cj["class_schedule"] = blocks;
        classes[cid] = cj;
    }
    j["classes"] = classes;
    json insts = json::object();
    for (const auto& [iid, info] : bundle.context.institutions)
        insts[iid] = {{"selectivity", info.selectivity == Selectivity::HighlySelective
                                          ? "HighlySelective"
                                          : "LessSelective"}};
    j["institutions"] = insts;
    if (!bundle.context.enrollment_student.empty()) {
        json enr = json::object();
        for (const auto& [eid, sid] : bundle.context.enrollment_student) enr[eid] = sid;
        j["enrollments"] = enr;
    }
    json events = json::array();
    for (const auto& e : bundle.events) {
        json ej;
        ej["class_id"] = e.class_id;
        ej["kind"] = kind_name(e.kind);
        ej["start"] = format_rfc3339(e.start);
        if (e.end) ej["end"] = format_rfc3339(*e.end);
        events.push_back(ej);
    }
    j["events"] = events;
    json cal;
    cal["semester_start"] = format_date(bundle.calendar.semester_start);
    cal["semester_end"] = format_date(bundle.calendar.semester_end);
    cal["exam_weeks"] = bundle.calendar.exam_weeks;
    j["calendar"] = cal;
    return j.dump(2);
}

int week_index(const CivilDate& date, const Calendar& calendar) {
    int64_t days = days_from_civil(date) - days_from_civil(calendar.semester_start);
    // floor division for dates before the semester start
    int64_t w = days >= 0 ? days / 7 : (days - 6) / 7;
    return static_cast<int>(w) + 1;
}

}  // namespace engage
