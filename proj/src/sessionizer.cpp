#include "engage/sessionizer.hpp"

#include <algorithm>
#include <cstdio>
#include <thread>

#include "engage/text.hpp"

namespace engage {

BoundarySet make_boundary_set(std::vector<int> gaps, int n_turns) {
    std::sort(gaps.begin(), gaps.end());
    gaps.erase(std::unique(gaps.begin(), gaps.end()), gaps.end());
    for (int g : gaps)
        if (g < 1 || g >= n_turns)
            throw MismatchedStreamLength("gap index " + std::to_string(g) +
                                         " out of range for stream of " +
                                         std::to_string(n_turns) + " turns");
    return BoundarySet{std::move(gaps)};
}

double heuristic_topic_similarity(const std::string& prompt_a,
                                  const std::string& prompt_b) {
    return jaccard(similarity_tokens(prompt_a), similarity_tokens(prompt_b));
}

std::vector<int> HeuristicDetector::boundaries(const std::string&,
                                               const std::vector<std::string>& prompts) {
    std::vector<int> out;
    for (size_t i = 1; i < prompts.size(); ++i) {
        if (heuristic_topic_similarity(prompts[i - 1], prompts[i]) < threshold_)
            out.push_back(static_cast<int>(i));
    }
    return out;
}

std::vector<Session> segment_time(const std::vector<ConversationTurn>& turns,
                                  double gap_threshold_minutes) {
    std::vector<Session> sessions;
    if (turns.empty()) return sessions;
    const double threshold_s = gap_threshold_minutes * 60.0;
    Session cur;
    cur.enrollment_id = turns.front().enrollment_id;
    cur.class_id = turns.front().class_id;
    for (size_t i = 0; i < turns.size(); ++i) {
        if (i > 0) {
            double gap_s = static_cast<double>(turns[i].timestamp.epoch_s -
                                               turns[i - 1].timestamp.epoch_s);
            if (gap_s > threshold_s) {
                sessions.push_back(std::move(cur));
                cur = Session{};
                cur.enrollment_id = turns[i].enrollment_id;
                cur.class_id = turns[i].class_id;
            }
        }
        cur.turns.push_back(turns[i]);
    }
    sessions.push_back(std::move(cur));
    return sessions;
}

namespace {

std::vector<std::string> detector_payload(const Session& session,
                                          const SegmentationConfig& config) {
    std::vector<std::string> prompts;
    prompts.reserve(session.turns.size());
    for (const auto& t : session.turns) {
        if (config.include_responses)
            prompts.push_back(t.prompt_text + "\n" + t.response_text);
        else
            prompts.push_back(t.prompt_text);
    }
    return prompts;
}

std::string make_session_id(const std::string& enrollment_id, int ordinal) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "-%04d", ordinal);
    return enrollment_id + buf;
}

std::vector<Session> split_at(const Session& session, const BoundarySet& bounds) {
    std::vector<Session> parts;
    size_t begin = 0;
    auto flush = [&](size_t end) {
        Session s;
        s.enrollment_id = session.enrollment_id;
        s.class_id = session.class_id;
        s.turns.assign(session.turns.begin() + begin, session.turns.begin() + end);
        parts.push_back(std::move(s));
        begin = end;
    };
    for (int g : bounds.gaps) flush(static_cast<size_t>(g));
    flush(session.turns.size());
    return parts;
}

}  // namespace

BoundarySet detect_topic_boundaries(const Session& session, TopicDetector& detector,
                                    const SegmentationConfig& config) {
    int n = static_cast<int>(session.turns.size());
    if (n < config.min_turns_for_topic_split) return BoundarySet{};
    auto raw = detector.boundaries(session.session_id, detector_payload(session, config));
    return make_boundary_set(std::move(raw), n);
}

SegmentationOutcome segment_combined(const std::vector<ConversationTurn>& turns,
                                     const SegmentationConfig& config,
                                     TopicDetector* detector) {
    SegmentationOutcome outcome;
    HeuristicDetector fallback(config.heuristic_similarity_threshold);
    TopicDetector* active = detector ? detector : &fallback;
    std::vector<Session> stage = segment_time(turns, config.gap_threshold_minutes);
    for (auto& session : stage) {
        if (!config.topic_stage_enabled) {
            outcome.sessions.push_back(std::move(session));
            continue;
        }
        BoundarySet bounds;
        try {
            bounds = detect_topic_boundaries(session, *active, config);
        } catch (const RemoteDetectorUnavailable&) {
            ++outcome.detector_fallbacks;
            bounds = detect_topic_boundaries(session, fallback, config);
        }
        for (auto& part : split_at(session, bounds))
            outcome.sessions.push_back(std::move(part));
    }
    int ordinal = 0;
    for (auto& s : outcome.sessions)
        s.session_id = make_session_id(s.enrollment_id, ++ordinal);
    return outcome;
}

SegmentationOutcome segment_corpus(const Corpus& corpus,
                                   const SegmentationConfig& config,
                                   TopicDetector* detector, int threads) {
    std::vector<const std::vector<ConversationTurn>*> streams;
    streams.reserve(corpus.by_enrollment.size());
    for (const auto& [id, stream] : corpus.by_enrollment) streams.push_back(&stream);

    std::vector<SegmentationOutcome> partial(streams.size());
    auto work = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i)
            partial[i] = segment_combined(*streams[i], config, detector);
    };
    if (threads <= 1 || streams.size() < 2) {
        work(0, streams.size());
    } else {
        size_t n_threads = std::min<size_t>(threads, streams.size());
        std::vector<std::thread> pool;
        size_t chunk = (streams.size() + n_threads - 1) / n_threads;
        for (size_t t = 0; t < n_threads; ++t) {
            size_t begin = t * chunk;
            size_t end = std::min(streams.size(), begin + chunk);
            if (begin < end) pool.emplace_back(work, begin, end);
        }
        for (auto& th : pool) th.join();
    }
    SegmentationOutcome merged;
    for (auto& p : partial) {
        merged.detector_fallbacks += p.detector_fallbacks;
        for (auto& s : p.sessions) merged.sessions.push_back(std::move(s));
    }
    return merged;
}

void BoundaryTally::add(const BoundarySet& predicted, const BoundarySet& gold) {
    std::vector<int> inter;
    std::set_intersection(predicted.gaps.begin(), predicted.gaps.end(),
                          gold.gaps.begin(), gold.gaps.end(),
                          std::back_inserter(inter));
    true_positives += static_cast<int64_t>(inter.size());
    predicted_total += static_cast<int64_t>(predicted.gaps.size());
    gold_total += static_cast<int64_t>(gold.gaps.size());
}

SegmentationScore BoundaryTally::score() const {
    SegmentationScore s;
    s.precision = predicted_total == 0
                      ? 1.0
                      : static_cast<double>(true_positives) / predicted_total;
    s.recall =
        gold_total == 0 ? 1.0 : static_cast<double>(true_positives) / gold_total;
    s.f1 = (s.precision + s.recall) == 0.0
               ? 0.0
               : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

SegmentationScore evaluate_segmentation(const BoundarySet& predicted,
                                        const BoundarySet& gold, int n_gaps) {
    for (const auto* set : {&predicted, &gold})
        for (int g : set->gaps)
            if (g < 1 || g > n_gaps)
                throw MismatchedStreamLength(
                    "boundary index " + std::to_string(g) +
                    " outside stream with " + std::to_string(n_gaps) + " gaps");
    BoundaryTally tally;
    tally.add(predicted, gold);
    return tally.score();
}

PageGold gold_from_page_context(const std::vector<ConversationTurn>& turns) {
    PageGold gold;
    for (size_t i = 1; i < turns.size(); ++i) {
        const auto& prev = turns[i - 1].page_context;
        const auto& next = turns[i].page_context;
        if (!prev || !next) continue;
        gold.evaluable_gaps.push_back(static_cast<int>(i));
        if (*prev != *next) gold.boundaries.gaps.push_back(static_cast<int>(i));
    }
    return gold;
}

SegmentationScore evaluate_against_page_gold(const BoundarySet& predicted,
                                             const PageGold& gold, int n_gaps) {
    std::vector<int> restricted;
    std::set_intersection(predicted.gaps.begin(), predicted.gaps.end(),
                          gold.evaluable_gaps.begin(), gold.evaluable_gaps.end(),
                          std::back_inserter(restricted));
    return evaluate_segmentation(BoundarySet{std::move(restricted)},
                                 gold.boundaries, n_gaps);
}

BoundarySet boundaries_of(const std::vector<Session>& sessions) {
    BoundarySet out;
    int pos = 0;
    for (size_t i = 0; i < sessions.size(); ++i) {
        if (i > 0) out.gaps.push_back(pos);
        pos += static_cast<int>(sessions[i].turns.size());
    }
    return out;
}

}  // namespace engage
