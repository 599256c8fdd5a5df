#include "engage/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <memory>
#include <mutex>
#include <regex>
#include <thread>

#include "json.hpp"

#include "engage/text.hpp"

namespace engage {

using nlohmann::json;

namespace {

std::vector<std::string> string_list(const json& j, const char* key,
                                     const std::vector<std::string>& fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_array()) throw LexiconError(std::string(key) + " must be an array");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) throw LexiconError(std::string(key) + " entries must be strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

}  // namespace

LexiconConfig load_lexicon_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw LexiconError(std::string("lexicon is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw LexiconError("lexicon must be a JSON object");
    LexiconConfig defaults;
    LexiconConfig cfg;
    cfg.copy_paste_keywords = string_list(j, "copy_paste_keywords", defaults.copy_paste_keywords);
    cfg.structured_patterns = string_list(j, "structured_patterns", defaults.structured_patterns);
    cfg.direct_answer_keywords =
        string_list(j, "direct_answer_keywords", defaults.direct_answer_keywords);
    cfg.understanding_keywords =
        string_list(j, "understanding_keywords", defaults.understanding_keywords);
    if (j.contains("long_prompt_threshold")) {
        const json& v = j.at("long_prompt_threshold");
        if (!v.is_number_integer() || v.get<long long>() < 1)
            throw LexiconError("long_prompt_threshold must be a positive integer");
        cfg.long_prompt_threshold = v.get<int>();
    }
    if (cfg.copy_paste_keywords.empty() || cfg.structured_patterns.empty() ||
        cfg.direct_answer_keywords.empty() || cfg.understanding_keywords.empty())
        throw LexiconError("every detector needs at least one entry");
    // Compile once now so a bad regex fails at load, not mid-pipeline.
    Lexicon probe(cfg);
    return cfg;
}

LexiconConfig load_lexicon_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LexiconError("cannot open lexicon file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return load_lexicon_string(text);
}

std::vector<Lexicon::Matcher> Lexicon::compile(const std::vector<std::string>& entries) {
    std::vector<Matcher> out;
    for (const std::string& e : entries) {
        Matcher m;
        if (e.rfind("regex:", 0) == 0) {
            m.is_regex = true;
            std::string pat = e.substr(6);
            try {
                m.regex = std::make_shared<std::regex>(
                    pat, std::regex::ECMAScript | std::regex::icase);
            } catch (const std::regex_error& err) {
                throw LexiconError("bad regex '" + pat + "': " + err.what());
            }
        } else {
            m.literal = e;
        }
        out.push_back(std::move(m));
    }
    return out;
}

Lexicon::Lexicon(const LexiconConfig& config) : config_(config) {
    copy_paste_ = compile(config.copy_paste_keywords);
    direct_answer_ = compile(config.direct_answer_keywords);
    understanding_ = compile(config.understanding_keywords);
    std::vector<std::string> user_patterns;
    for (const std::string& p : config.structured_patterns) {
        if (p == "multiple_choice_markers") {
            structured_mc_ = true;
        } else if (p == "code_block") {
            structured_code_ = true;
        } else {
            user_patterns.push_back("regex:" + p);
        }
    }
    structured_user_ = compile(user_patterns);
}

bool Lexicon::any_match(const std::vector<Matcher>& ms, const std::string& text) const {
    for (const Matcher& m : ms) {
        if (m.is_regex) {
            const auto& re = *std::static_pointer_cast<std::regex>(m.regex);
            if (std::regex_search(text, re)) return true;
        } else if (contains_ci(text, m.literal)) {
            return true;
        }
    }
    return false;
}

bool has_multiple_choice_markers(const std::string& text) {
    // Two consecutive option markers in letter order (A. / A) style markers
    // at word starts), e.g. "A. foo B. bar" or "B) red C) blue". A pasted
    // option list may begin mid-question, so any starting letter counts.
    int expected = -1;  // next letter that would extend the current run
    int found = 0;
    size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        bool at_start = (i == 0) || std::isspace(static_cast<unsigned char>(text[i - 1])) ||
                        text[i - 1] == '(';
        if (at_start && c >= 'A' && c <= 'E' && i + 1 < text.size() &&
            (text[i + 1] == '.' || text[i + 1] == ')')) {
            int letter = c - 'A';
            if (expected == letter) {
                ++found;
                if (found >= 2) return true;
            } else {
                found = 1;
            }
            expected = letter + 1;
            i += 2;
            continue;
        }
        ++i;
    }
    return false;
}

bool has_code_block(const std::string& text) {
    if (text.find("```") != std::string::npos) return true;
    // Indented code line: 4 spaces or a tab after a newline (or at start).
    size_t pos = 0;
    while (pos <= text.size()) {
        bool starts_line = (pos == 0) || (pos > 0 && text[pos - 1] == '\n');
        if (starts_line && pos < text.size()) {
            if (text[pos] == '\t') return true;
            if (text.compare(pos, 4, "    ") == 0) {
                // Ignore blank indented lines.
                size_t rest = pos + 4;
                while (rest < text.size() && text[rest] == ' ') ++rest;
                if (rest < text.size() && text[rest] != '\n' && text[rest] != '\r') return true;
            }
        }
        size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) break;
        pos = nl + 1;
    }
    return false;
}

int Lexicon::copy_paste_signals(const ConversationTurn& turn) const {
    int signals = 0;
    if (turn.has_image_upload) ++signals;
    if (any_match(copy_paste_, turn.prompt_text)) ++signals;
    bool structured = false;
    if (structured_mc_ && has_multiple_choice_markers(turn.prompt_text)) structured = true;
    if (!structured && structured_code_ && has_code_block(turn.prompt_text)) structured = true;
    if (!structured && any_match(structured_user_, turn.prompt_text)) structured = true;
    if (structured) ++signals;
    if (word_count(turn.prompt_text) >= config_.long_prompt_threshold) ++signals;
    return signals;
}

int Lexicon::direct_answer_hit(const ConversationTurn& turn) const {
    return any_match(direct_answer_, turn.prompt_text) ? 1 : 0;
}

int Lexicon::understanding_hit(const ConversationTurn& turn) const {
    return any_match(understanding_, turn.prompt_text) ? 1 : 0;
}

int count_turns(const Session& session) { return static_cast<int>(session.turns.size()); }

double avg_minutes_per_turn(const Session& session) {
    size_t n = session.turns.size();
    if (n < 2) return 0.0;
    double span_s = static_cast<double>(session.end().epoch_s - session.start().epoch_s);
    return span_s / 60.0 / static_cast<double>(n - 1);
}

double avg_words_per_prompt(const Session& session) {
    if (session.turns.empty()) return 0.0;
    long long total = 0;
    for (const auto& t : session.turns) total += word_count(t.prompt_text);
    return static_cast<double>(total) / static_cast<double>(session.turns.size());
}

int detect_copy_paste(const ConversationTurn& turn, const Lexicon& lexicon) {
    return lexicon.copy_paste_signals(turn);
}

int detect_direct_answer(const ConversationTurn& turn, const Lexicon& lexicon) {
    return lexicon.direct_answer_hit(turn);
}

int detect_understanding(const ConversationTurn& turn, const Lexicon& lexicon) {
    return lexicon.understanding_hit(turn);
}

TemporalFeatures temporal_features(const Session& session, const Calendar& calendar,
                                   const std::vector<ScheduleBlock>& schedule) {
    if (session.turns.empty())
        throw SessionOutsideCalendar("cannot compute temporal features of an empty session");
    TemporalFeatures out;
    const Timestamp& first = session.start();
    int week = week_index(first.local_date(), calendar);
    if (week < 1)
        throw SessionOutsideCalendar("session " + session.session_id +
                                     " starts before the semester");
    out.week_progress = week;
    out.time_of_day = first.local_hour_of_day();

    int exam_turns = 0;
    int in_class_turns = 0;
    for (const auto& t : session.turns) {
        int w = week_index(t.timestamp.local_date(), calendar);
        if (calendar.exam_weeks.count(w)) ++exam_turns;
        int wd = t.timestamp.local_weekday();
        int minute = t.timestamp.local_minute_of_day();
        for (const ScheduleBlock& b : schedule) {
            if (b.weekday == wd && minute >= b.start_minute && minute < b.end_minute) {
                ++in_class_turns;
                break;
            }
        }
    }
    double n = static_cast<double>(session.turns.size());
    out.exam_period_indicator = exam_turns / n;
    out.in_class_indicator = in_class_turns / n;
    return out;
}

ExtendedFeatures extended_features(const Session& session,
                                   const std::vector<ActivityEvent>& events) {
    ExtendedFeatures out;
    if (session.turns.empty()) return out;
    long long start_s = session.start().epoch_s;

    auto closer = [](std::optional<double>& slot, double minutes) {
        if (!slot || minutes < *slot) slot = minutes;
    };

    for (const ActivityEvent& e : events) {
        double since = static_cast<double>(start_s - e.start.epoch_s) / 60.0;
        switch (e.kind) {
            case EventKind::ClassMeeting: {
                long long end_s = e.end ? e.end->epoch_s : e.start.epoch_s;
                if (start_s >= e.start.epoch_s && start_s <= end_s) {
                    // Session opened mid-meeting: distance zero both ways.
                    out.minutes_since_prev_class = 0.0;
                    out.minutes_until_next_class = 0.0;
                } else if (end_s <= start_s) {
                    closer(out.minutes_since_prev_class,
                           static_cast<double>(start_s - end_s) / 60.0);
                } else {
                    closer(out.minutes_until_next_class,
                           static_cast<double>(e.start.epoch_s - start_s) / 60.0);
                }
                break;
            }
            case EventKind::AssignmentRelease:
                if (e.start.epoch_s <= start_s)
                    closer(out.minutes_since_assignment_release, since);
                break;
            case EventKind::AssignmentDeadline:
                if (e.start.epoch_s >= start_s)
                    closer(out.minutes_until_assignment_deadline, -since);
                break;
            case EventKind::ExamWindow:
                break;
        }
    }
    return out;
}

FeaturizedSession featurize(const Session& session, const Corpus& corpus,
                            const Lexicon& lexicon) {
    FeaturizedSession out;
    out.session_id = session.session_id;
    out.enrollment_id = session.enrollment_id;
    out.class_id = session.class_id;

    EngagementFeatures& f = out.core;
    f.num_turns = count_turns(session);
    f.avg_minutes_per_turn = avg_minutes_per_turn(session);
    f.avg_words_per_prompt = avg_words_per_prompt(session);
    for (const auto& t : session.turns) {
        f.copy_paste_events += lexicon.copy_paste_signals(t);
        f.direct_answer_requests += lexicon.direct_answer_hit(t);
        f.understanding_queries += lexicon.understanding_hit(t);
    }

    auto cit = corpus.context.classes.find(session.class_id);
    if (cit == corpus.context.classes.end())
        throw UnresolvedClass("session " + session.session_id +
                              " references unknown class " + session.class_id);
    TemporalFeatures tf = temporal_features(session, corpus.calendar, cit->second.class_schedule);
    f.week_progress = tf.week_progress;
    f.exam_period_indicator = tf.exam_period_indicator;
    f.time_of_day = tf.time_of_day;
    f.in_class_indicator = tf.in_class_indicator;

    std::vector<ActivityEvent> class_events;
    for (const ActivityEvent& e : corpus.events)
        if (e.class_id == session.class_id) class_events.push_back(e);
    out.extended = extended_features(session, class_events);
    return out;
}

std::vector<FeaturizedSession> featurize_all(const std::vector<Session>& sessions,
                                             const Corpus& corpus, const Lexicon& lexicon,
                                             int threads) {
    std::vector<FeaturizedSession> out(sessions.size());
    if (threads < 1) threads = 1;
    size_t n = sessions.size();
    if (threads == 1 || n < 2) {
        for (size_t i = 0; i < n; ++i) out[i] = featurize(sessions[i], corpus, lexicon);
        return out;
    }
    size_t workers = std::min<size_t>(threads, n);
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex err_mu;
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (size_t i = w; i < n; i += workers)
                    out[i] = featurize(sessions[i], corpus, lexicon);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

}  // namespace engage
