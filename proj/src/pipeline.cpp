#include "engage/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <type_traits>

#include "json.hpp"

#include "engage/csv.hpp"
#include "engage/topic_detector.hpp"

namespace engage {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

double number_or(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ConfigError(std::string(key) + " must be a number");
    return j.at(key).get<double>();
}

int int_or(const json& j, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer())
        throw ConfigError(std::string(key) + " must be an integer");
    return j.at(key).get<int>();
}

bool bool_or(const json& j, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_boolean()) throw ConfigError(std::string(key) + " must be a boolean");
    return j.at(key).get<bool>();
}

std::string string_or(const json& j, const char* key, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string()) throw ConfigError(std::string(key) + " must be a string");
    return j.at(key).get<std::string>();
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << content;
}

std::string label_letter(int index) {
    std::string suffix;
    int v = index;
    do {
        suffix.insert(suffix.begin(), static_cast<char>('A' + v % 26));
        v = v / 26 - 1;
    } while (v >= 0);
    return "Type " + suffix;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");

    PipelineConfig cfg;
    cfg.turns_path = string_or(j, "turns", "");
    cfg.context_path = string_or(j, "context", "");
    if (cfg.turns_path.empty()) throw ConfigError("config lacks \"turns\" path");
    if (cfg.context_path.empty()) throw ConfigError("config lacks \"context\" path");
    cfg.out_dir = string_or(j, "out", cfg.out_dir);
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_integer() || j.at("seed").get<long long>() < 0)
            throw ConfigError("seed must be a nonnegative integer");
        cfg.seed = j.at("seed").get<std::uint64_t>();
    }
    cfg.threads = int_or(j, "threads", 1);
    if (cfg.threads < 1) throw ConfigError("threads must be positive");
    cfg.drop_out_of_window = bool_or(j, "drop_out_of_window", false);

    if (j.contains("segmentation")) {
        const json& s = j.at("segmentation");
        if (!s.is_object()) throw ConfigError("segmentation must be an object");
        cfg.segmentation.gap_threshold_minutes =
            number_or(s, "gap_threshold_minutes", cfg.segmentation.gap_threshold_minutes);
        if (cfg.segmentation.gap_threshold_minutes <= 0.0)
            throw ConfigError("gap_threshold_minutes must be positive");
        cfg.segmentation.topic_stage_enabled =
            bool_or(s, "topic_stage_enabled", cfg.segmentation.topic_stage_enabled);
        cfg.segmentation.heuristic_similarity_threshold =
            number_or(s, "heuristic_similarity_threshold",
                      cfg.segmentation.heuristic_similarity_threshold);
        cfg.segmentation.min_turns_for_topic_split =
            int_or(s, "min_turns_for_topic_split", cfg.segmentation.min_turns_for_topic_split);
        cfg.segmentation.include_responses =
            bool_or(s, "include_responses", cfg.segmentation.include_responses);
        cfg.topic_detector_url = string_or(s, "topic_detector_url", "");
        cfg.topic_detector_timeout_s =
            number_or(s, "topic_detector_timeout_s", cfg.topic_detector_timeout_s);
    }

    if (j.contains("lexicon")) {
        if (!j.at("lexicon").is_object()) throw ConfigError("lexicon must be an object");
        cfg.lexicon = load_lexicon_string(j.at("lexicon").dump());
    } else if (j.contains("lexicon_path")) {
        cfg.lexicon = load_lexicon_file(string_or(j, "lexicon_path", ""));
    }

    if (j.contains("cluster")) {
        const json& c = j.at("cluster");
        if (!c.is_object()) throw ConfigError("cluster must be an object");
        if (c.contains("log_columns")) {
            if (!c.at("log_columns").is_array())
                throw ConfigError("log_columns must be an array");
            cfg.cluster.log_columns =
                c.at("log_columns").get<std::vector<std::string>>();
        }
        if (c.contains("pca")) {
            const json& p = c.at("pca");
            if (!p.is_object()) throw ConfigError("pca must be an object");
            bool has_n = p.contains("n_components");
            bool has_v = p.contains("variance_target");
            if (has_n == has_v)
                throw ConfigError(
                    "pca needs exactly one of n_components / variance_target");
            if (has_n) {
                cfg.cluster.pca_components = int_or(p, "n_components", 0);
                cfg.cluster.pca_variance_target.reset();
            } else {
                cfg.cluster.pca_variance_target = number_or(p, "variance_target", 0.823);
                cfg.cluster.pca_components.reset();
            }
        }
        cfg.cluster.k = int_or(c, "k", cfg.cluster.k);
        cfg.cluster.k_min = int_or(c, "k_min", cfg.cluster.k_min);
        cfg.cluster.k_max = int_or(c, "k_max", cfg.cluster.k_max);
        cfg.cluster.stability_runs = int_or(c, "stability_runs", cfg.cluster.stability_runs);
        cfg.cluster.use_extended_features =
            bool_or(c, "use_extended_features", cfg.cluster.use_extended_features);
        if (cfg.cluster.k < 0) throw ConfigError("k must be 0 (elbow) or >= 2");
        if (cfg.cluster.k == 1) throw ConfigError("k must be 0 (elbow) or >= 2");
        if (cfg.cluster.stability_runs < 1)
            throw ConfigError("stability_runs must be positive");
    }

    if (j.contains("label_map")) {
        const json& m = j.at("label_map");
        if (!m.is_object()) throw ConfigError("label_map must be an object");
        for (auto it = m.begin(); it != m.end(); ++it) {
            size_t pos = 0;
            int key;
            try {
                key = std::stoi(it.key(), &pos);
            } catch (const std::exception&) {
                throw ConfigError("label_map keys must be cluster indices");
            }
            if (pos != it.key().size() || key < 0)
                throw ConfigError("label_map keys must be cluster indices");
            if (!it.value().is_string())
                throw ConfigError("label_map values must be strings");
            cfg.label_map[key] = it.value().get<std::string>();
        }
    }

    if (j.contains("subgroups")) {
        if (!j.at("subgroups").is_array()) throw ConfigError("subgroups must be an array");
        cfg.subgroups = j.at("subgroups").get<std::vector<std::string>>();
    }
    return cfg;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

// Sorted-key dump of everything that shapes the numbers. Thread count and
// output directory are deliberately absent: neither may change a single byte
// of the artifacts, and the manifest hash is how reruns prove that.
std::string PipelineConfig::canonical_json() const {
    json j;
    j["turns"] = turns_path;
    j["context"] = context_path;
    j["seed"] = seed;
    j["drop_out_of_window"] = drop_out_of_window;
    j["segmentation"] = {
        {"gap_threshold_minutes", segmentation.gap_threshold_minutes},
        {"topic_stage_enabled", segmentation.topic_stage_enabled},
        {"heuristic_similarity_threshold", segmentation.heuristic_similarity_threshold},
        {"min_turns_for_topic_split", segmentation.min_turns_for_topic_split},
        {"include_responses", segmentation.include_responses},
        {"topic_detector_url", topic_detector_url}};
    j["lexicon"] = {{"copy_paste_keywords", lexicon.copy_paste_keywords},
                    {"structured_patterns", lexicon.structured_patterns},
                    {"long_prompt_threshold", lexicon.long_prompt_threshold},
                    {"direct_answer_keywords", lexicon.direct_answer_keywords},
                    {"understanding_keywords", lexicon.understanding_keywords}};
    json pca;
    if (cluster.pca_components) pca["n_components"] = *cluster.pca_components;
    if (cluster.pca_variance_target) pca["variance_target"] = *cluster.pca_variance_target;
    j["cluster"] = {{"log_columns", cluster.log_columns},
                    {"pca", pca},
                    {"k", cluster.k},
                    {"k_min", cluster.k_min},
                    {"k_max", cluster.k_max},
                    {"stability_runs", cluster.stability_runs},
                    {"use_extended_features", cluster.use_extended_features}};
    json labels = json::object();
    for (const auto& [idx, name] : label_map) labels[std::to_string(idx)] = name;
    j["label_map"] = labels;
    j["subgroups"] = subgroups;
    return j.dump();
}

Corpus load_inputs(const PipelineConfig& config, std::vector<std::string>* warnings) {
    if (!fs::exists(config.turns_path))
        throw ConfigError("turns file not found: " + config.turns_path);
    if (!fs::exists(config.context_path))
        throw ConfigError("context file not found: " + config.context_path);

    ParseResult parsed = parse_turns_file(config.turns_path);
    if (warnings && parsed.skipped > 0)
        warnings->push_back(std::to_string(parsed.skipped) + " malformed turn lines skipped");
    ContextBundle bundle = load_context_file(config.context_path);
    Corpus corpus = build_corpus(std::move(parsed.turns), std::move(bundle.context),
                                 std::move(bundle.events), bundle.calendar);
    ValidationReport report = validate_corpus(corpus);
    if (warnings) {
        if (!report.duplicate_turn_ids.empty())
            warnings->push_back(std::to_string(report.duplicate_turn_ids.size()) +
                                " duplicate turn ids");
        if (!report.out_of_window_turn_ids.empty())
            warnings->push_back(std::to_string(report.out_of_window_turn_ids.size()) +
                                " turns outside the semester window");
        if (!report.empty_prompt_turn_ids.empty())
            warnings->push_back(std::to_string(report.empty_prompt_turn_ids.size()) +
                                " empty prompts without image upload");
    }
    if (config.drop_out_of_window) {
        size_t dropped = drop_out_of_window(corpus);
        if (warnings && dropped > 0)
            warnings->push_back(std::to_string(dropped) + " out-of-window turns dropped");
    }
    return corpus;
}

FeatureMatrix feature_matrix_from(const std::vector<FeaturizedSession>& rows,
                                  bool use_extended,
                                  std::vector<std::string>* dropped) {
    FeatureMatrix m;
    m.columns = core_feature_names();
    if (use_extended) {
        const auto& ext = extended_feature_names();
        m.columns.insert(m.columns.end(), ext.begin(), ext.end());
    }

    std::vector<const FeaturizedSession*> kept;
    for (const FeaturizedSession& r : rows) {
        if (use_extended &&
            !(r.extended.minutes_since_prev_class && r.extended.minutes_until_next_class &&
              r.extended.minutes_since_assignment_release &&
              r.extended.minutes_until_assignment_deadline)) {
            if (dropped) dropped->push_back(r.session_id);
            continue;
        }
        kept.push_back(&r);
    }

    m.values.resize(static_cast<int>(kept.size()), static_cast<int>(m.columns.size()));
    for (size_t i = 0; i < kept.size(); ++i) {
        const FeaturizedSession& r = *kept[i];
        m.row_ids.push_back(r.session_id);
        const EngagementFeatures& f = r.core;
        int row = static_cast<int>(i);
        m.values(row, 0) = f.num_turns;
        m.values(row, 1) = f.avg_minutes_per_turn;
        m.values(row, 2) = f.avg_words_per_prompt;
        m.values(row, 3) = f.copy_paste_events;
        m.values(row, 4) = f.direct_answer_requests;
        m.values(row, 5) = f.understanding_queries;
        m.values(row, 6) = f.week_progress;
        m.values(row, 7) = f.exam_period_indicator;
        m.values(row, 8) = f.time_of_day;
        m.values(row, 9) = f.in_class_indicator;
        if (use_extended) {
            m.values(row, 10) = *r.extended.minutes_since_prev_class;
            m.values(row, 11) = *r.extended.minutes_until_next_class;
            m.values(row, 12) = *r.extended.minutes_since_assignment_release;
            m.values(row, 13) = *r.extended.minutes_until_assignment_deadline;
        }
    }
    return m;
}

ClusterStage run_cluster_stage(const std::vector<FeaturizedSession>& rows,
                               const ClusterOptions& options, std::uint64_t seed) {
    ClusterStage stage;
    stage.core = feature_matrix_from(rows, options.use_extended_features,
                                     &stage.dropped_rows);
    if (stage.core.rows() == 0) throw DegenerateMatrix("no sessions to cluster");

    // log columns may omit extended features even in extended mode
    std::vector<std::string> log_columns;
    for (const std::string& c : options.log_columns)
        if (stage.core.column_index(c) >= 0) log_columns.push_back(c);
    stage.standardized = preprocess(stage.core, log_columns);
    stage.pca = fit_pca(stage.standardized.matrix, options.pca_components,
                        options.pca_variance_target);
    stage.scores = transform_pca(stage.pca, stage.standardized.matrix);

    int k = options.k;
    if (k == 0) {
        stage.elbow_used = true;
        stage.elbow = elbow_select(stage.scores.values, options.k_min, options.k_max, seed);
        k = stage.elbow.chosen_k;
    }
    stage.kmeans = kmeans_fit(stage.scores.values, k, seed);
    stage.stab = stability(stage.scores.values, k, options.stability_runs);
    stage.centroids = centroid_summary(stage.standardized.matrix, stage.kmeans.labels, k);
    for (size_t i = 0; i < stage.scores.row_ids.size(); ++i)
        stage.assignment[stage.scores.row_ids[i]] = stage.kmeans.labels[i];
    return stage;
}

std::map<int, std::string> effective_label_map(const std::map<int, std::string>& given,
                                               int k) {
    std::map<int, std::string> out;
    if (given.empty()) {
        for (int i = 0; i < k; ++i) out[i] = label_letter(i);
        return out;
    }
    for (int i = 0; i < k; ++i) {
        auto it = given.find(i);
        if (it == given.end())
            throw ConfigError("label_map lacks cluster " + std::to_string(i));
        out[i] = it->second;
    }
    return out;
}

void write_sessions_csv(const std::string& path, const std::vector<Session>& sessions,
                        const Calendar& calendar) {
    CsvWriter w({"session_id", "enrollment_id", "class_id", "start_ts", "end_ts",
                 "n_turns", "week", "turn_ids"});
    for (const Session& s : sessions) {
        std::string turn_ids;
        for (size_t i = 0; i < s.turns.size(); ++i) {
            if (i) turn_ids += ';';
            turn_ids += s.turns[i].turn_id;
        }
        w.add_row({CsvWriter::cell(s.session_id), CsvWriter::cell(s.enrollment_id),
                   CsvWriter::cell(s.class_id),
                   CsvWriter::cell(format_rfc3339(s.start())),
                   CsvWriter::cell(format_rfc3339(s.end())),
                   CsvWriter::cell(static_cast<int64_t>(s.turns.size())),
                   CsvWriter::cell(static_cast<int64_t>(
                       week_index(s.start().local_date(), calendar))),
                   CsvWriter::cell(turn_ids)});
    }
    w.write_file(path);
}

void write_features_csv(const std::string& path,
                        const std::vector<FeaturizedSession>& rows) {
    std::vector<std::string> header = {"session_id", "enrollment_id", "class_id"};
    const auto& core = core_feature_names();
    const auto& ext = extended_feature_names();
    header.insert(header.end(), core.begin(), core.end());
    header.insert(header.end(), ext.begin(), ext.end());
    CsvWriter w(header);
    auto opt_cell = [](const std::optional<double>& v) {
        return v ? csv_double(*v) : std::string();
    };
    for (const FeaturizedSession& r : rows) {
        const EngagementFeatures& f = r.core;
        w.add_row({CsvWriter::cell(r.session_id), CsvWriter::cell(r.enrollment_id),
                   CsvWriter::cell(r.class_id),
                   CsvWriter::cell(static_cast<int64_t>(f.num_turns)),
                   CsvWriter::cell(f.avg_minutes_per_turn),
                   CsvWriter::cell(f.avg_words_per_prompt),
                   CsvWriter::cell(static_cast<int64_t>(f.copy_paste_events)),
                   CsvWriter::cell(static_cast<int64_t>(f.direct_answer_requests)),
                   CsvWriter::cell(static_cast<int64_t>(f.understanding_queries)),
                   CsvWriter::cell(static_cast<int64_t>(f.week_progress)),
                   CsvWriter::cell(f.exam_period_indicator),
                   CsvWriter::cell(f.time_of_day),
                   CsvWriter::cell(f.in_class_indicator),
                   opt_cell(r.extended.minutes_since_prev_class),
                   opt_cell(r.extended.minutes_until_next_class),
                   opt_cell(r.extended.minutes_since_assignment_release),
                   opt_cell(r.extended.minutes_until_assignment_deadline)});
    }
    w.write_file(path);
}

void write_assignments_csv(const std::string& path, const ClusterStage& stage,
                           const std::map<int, std::string>& labels) {
    CsvWriter w({"session_id", "cluster", "label"});
    for (const auto& [session_id, cluster] : stage.assignment)
        w.add_row({CsvWriter::cell(session_id),
                   CsvWriter::cell(static_cast<int64_t>(cluster)),
                   CsvWriter::cell(labels.at(cluster))});
    w.write_file(path);
}

void write_elbow_csv(const std::string& path, const ElbowResult& elbow) {
    CsvWriter w({"k", "inertia", "chosen"});
    for (size_t i = 0; i < elbow.ks.size(); ++i)
        w.add_row({CsvWriter::cell(static_cast<int64_t>(elbow.ks[i])),
                   CsvWriter::cell(elbow.inertias[i]),
                   CsvWriter::cell(static_cast<int64_t>(
                       elbow.ks[i] == elbow.chosen_k ? 1 : 0))});
    w.write_file(path);
}

void write_stability_csv(const std::string& path, const StabilityResult& stab) {
    CsvWriter w({"seed", "ari", "is_reference"});
    for (size_t i = 0; i < stab.ari.size(); ++i)
        w.add_row({CsvWriter::cell(static_cast<int64_t>(i)),
                   CsvWriter::cell(stab.ari[i]),
                   CsvWriter::cell(static_cast<int64_t>(
                       static_cast<int>(i) == stab.reference_seed ? 1 : 0))});
    w.write_file(path);
}

void write_centroids_csv(const std::string& path, const CentroidSummary& centroids,
                         const std::map<int, std::string>& labels) {
    std::vector<std::string> header = {"cluster", "label", "size"};
    header.insert(header.end(), centroids.columns.begin(), centroids.columns.end());
    CsvWriter w(header);
    for (int c = 0; c < static_cast<int>(centroids.sizes.size()); ++c) {
        std::vector<std::string> row = {CsvWriter::cell(static_cast<int64_t>(c)),
                                        CsvWriter::cell(labels.at(c)),
                                        CsvWriter::cell(static_cast<int64_t>(
                                            centroids.sizes[c]))};
        for (int j = 0; j < centroids.means.cols(); ++j)
            row.push_back(CsvWriter::cell(centroids.means(c, j)));
        w.add_row(std::move(row));
    }
    w.write_file(path);
}

void write_transitions_csv(const std::string& prob_path, const std::string& count_path,
                           const TransitionMatrix& matrix) {
    std::vector<std::string> header = {"from"};
    header.insert(header.end(), matrix.states.begin(), matrix.states.end());
    CsvWriter probs(header);
    CsvWriter counts(header);
    for (size_t i = 0; i < matrix.states.size(); ++i) {
        std::vector<std::string> prow = {CsvWriter::cell(matrix.states[i])};
        std::vector<std::string> crow = prow;
        for (size_t j = 0; j < matrix.states.size(); ++j) {
            prow.push_back(matrix.row_defined[i]
                               ? csv_double(matrix.probs(static_cast<int>(i),
                                                          static_cast<int>(j)))
                               : std::string());
            crow.push_back(CsvWriter::cell(static_cast<int64_t>(
                matrix.counts(static_cast<int>(i), static_cast<int>(j)))));
        }
        probs.add_row(std::move(prow));
        counts.add_row(std::move(crow));
    }
    probs.write_file(prob_path);
    counts.write_file(count_path);
}

SubgroupAssignment subgroup_of(const Corpus& corpus, const std::string& dimension) {
    SubgroupAssignment out;
    out.dimension = dimension;
    for (const auto& [enrollment_id, turns] : corpus.by_enrollment) {
        if (turns.empty()) continue;
        const std::string& class_id = corpus.class_of(enrollment_id);
        auto cit = corpus.context.classes.find(class_id);
        if (cit == corpus.context.classes.end())
            throw UnresolvedClass("enrollment " + enrollment_id +
                                  " references unknown class " + class_id);
        if (dimension == "discipline") {
            out.enrollment_group[enrollment_id] =
                cit->second.discipline == Discipline::STEM ? "STEM" : "NonSTEM";
        } else if (dimension == "selectivity") {
            auto iit = corpus.context.institutions.find(cit->second.institution_id);
            if (iit == corpus.context.institutions.end())
                throw ContextError("class " + class_id + " references unknown institution " +
                                   cit->second.institution_id);
            out.enrollment_group[enrollment_id] =
                iit->second.selectivity == Selectivity::HighlySelective ? "HighlySelective"
                                                                        : "LessSelective";
        } else {
            throw ConfigError("unknown subgroup dimension: " + dimension);
        }
    }
    return out;
}

namespace {

struct SessionMeta {
    std::string session_id;
    std::string enrollment_id;
    std::string class_id;
    int cluster = 0;
};

// Group-difference rows for one subgroup dimension, one engagement label
// at a time, clustered by class and (when student identity exists) by
// student and class together.
void append_stats_rows(CsvWriter& w, const std::vector<SessionMeta>& metas,
                       const SubgroupAssignment& subgroup,
                       const std::map<int, std::string>& labels,
                       const std::map<std::string, std::string>& enrollment_student,
                       std::vector<std::string>* warnings) {
    std::vector<std::string> groups;
    for (const auto& [enrollment, group] : subgroup.enrollment_group)
        if (std::find(groups.begin(), groups.end(), group) == groups.end())
            groups.push_back(group);
    std::sort(groups.begin(), groups.end());
    if (groups.size() != 2) {
        if (warnings)
            warnings->push_back("subgroup " + subgroup.dimension + " has " +
                                std::to_string(groups.size()) +
                                " groups; comparison skipped (needs 2)");
        return;
    }
    std::string contrast = groups[1] + "-" + groups[0];

    for (const auto& [cluster, label] : labels) {
        std::vector<double> values;
        std::vector<int> flags;
        std::vector<std::string> class_ids, student_ids;
        for (const SessionMeta& m : metas) {
            auto git = subgroup.enrollment_group.find(m.enrollment_id);
            if (git == subgroup.enrollment_group.end()) continue;
            values.push_back(m.cluster == cluster ? 1.0 : 0.0);
            flags.push_back(git->second == groups[1] ? 1 : 0);
            class_ids.push_back(m.class_id);
            auto sit = enrollment_student.find(m.enrollment_id);
            student_ids.push_back(sit != enrollment_student.end() ? sit->second
                                                                  : m.enrollment_id);
        }
        if (values.empty()) continue;
        try {
            GroupCompareResult one = group_compare(values, flags, class_ids);
            w.add_row({CsvWriter::cell(subgroup.dimension),
                       CsvWriter::cell("share_" + label), CsvWriter::cell(contrast),
                       CsvWriter::cell(std::string("class")), CsvWriter::cell(one.diff),
                       CsvWriter::cell(one.se), CsvWriter::cell(one.t),
                       CsvWriter::cell(static_cast<int64_t>(one.df)),
                       CsvWriter::cell(one.p), CsvWriter::cell(one.cohens_d),
                       CsvWriter::cell(static_cast<int64_t>(values.size())),
                       CsvWriter::cell(static_cast<int64_t>(one.n_clusters))});

            if (!enrollment_student.empty()) {
                Eigen::VectorXd y(values.size());
                Eigen::MatrixXd X(values.size(), 2);
                for (size_t i = 0; i < values.size(); ++i) {
                    y[static_cast<int>(i)] = values[i];
                    X(static_cast<int>(i), 0) = 1.0;
                    X(static_cast<int>(i), 1) = flags[i];
                }
                OlsFit fit = ols(y, X);
                ClusterRobustResult two =
                    cluster_robust_vcov(fit, student_ids, &class_ids);
                double t = two.se[1] > 0.0 ? fit.beta[1] / two.se[1] : 0.0;
                w.add_row({CsvWriter::cell(subgroup.dimension),
                           CsvWriter::cell("share_" + label), CsvWriter::cell(contrast),
                           CsvWriter::cell(std::string("student+class")),
                           CsvWriter::cell(fit.beta[1]), CsvWriter::cell(two.se[1]),
                           CsvWriter::cell(t),
                           CsvWriter::cell(static_cast<int64_t>(two.df)),
                           CsvWriter::cell(student_t_p_two_sided(t, two.df)),
                           CsvWriter::cell(one.cohens_d),
                           CsvWriter::cell(static_cast<int64_t>(values.size())),
                           CsvWriter::cell(static_cast<int64_t>(
                               std::min(two.n_clusters_1, two.n_clusters_2)))});
            }
        } catch (const EngageError& e) {
            if (warnings)
                warnings->push_back("stats row skipped (" + subgroup.dimension + ", " +
                                    label + "): " + e.what());
        }
    }
}

void append_bars_rows(CsvWriter& w, const std::vector<SessionMeta>& metas,
                      const SubgroupAssignment& subgroup,
                      const std::map<int, std::string>& labels,
                      std::vector<std::string>* warnings) {
    std::vector<std::string> groups;
    for (const auto& [enrollment, group] : subgroup.enrollment_group)
        if (std::find(groups.begin(), groups.end(), group) == groups.end())
            groups.push_back(group);
    std::sort(groups.begin(), groups.end());

    for (const std::string& group : groups) {
        for (const auto& [cluster, label] : labels) {
            std::vector<double> values;
            std::vector<std::string> class_ids;
            for (const SessionMeta& m : metas) {
                auto git = subgroup.enrollment_group.find(m.enrollment_id);
                if (git == subgroup.enrollment_group.end() || git->second != group)
                    continue;
                values.push_back(m.cluster == cluster ? 1.0 : 0.0);
                class_ids.push_back(m.class_id);
            }
            if (values.empty()) {
                if (warnings)
                    warnings->push_back("bars row skipped: no sessions for " +
                                        subgroup.dimension + "/" + group);
                continue;
            }
            try {
                ProportionCI ci = proportion_ci(values, class_ids);
                w.add_row({CsvWriter::cell(subgroup.dimension), CsvWriter::cell(group),
                           CsvWriter::cell(label), CsvWriter::cell(ci.proportion),
                           CsvWriter::cell(ci.lo), CsvWriter::cell(ci.hi),
                           CsvWriter::cell(static_cast<int64_t>(values.size()))});
            } catch (const EngageError& e) {
                if (warnings)
                    warnings->push_back("bars row skipped (" + subgroup.dimension + "/" +
                                        group + ", " + label + "): " + e.what());
            }
        }
    }
}

class StageClock {
public:
    explicit StageClock(RunResult& result) : result_(result) {}
    // Times a stage and tags any stage failure with the stage name.
    template <typename F>
    auto time(const std::string& stage, std::size_t rows, F&& f) {
        auto start = std::chrono::steady_clock::now();
        try {
            if constexpr (std::is_void_v<decltype(f())>) {
                f();
                record(stage, rows, start);
            } else {
                auto value = f();
                record(stage, rows, start);
                return value;
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const EngageError& e) {
            throw EngageError(stage + " stage failed: " + e.what());
        }
    }
    void record(const std::string& stage, std::size_t rows,
                std::chrono::steady_clock::time_point start) {
        double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                       .count();
        result_.timings.push_back({stage, s, rows});
    }

private:
    RunResult& result_;
};

}  // namespace

RunResult run_pipeline(const PipelineConfig& config) {
    RunResult result;
    StageClock clock(result);
    fs::path out(config.out_dir);
    fs::create_directories(out);

    Corpus corpus = clock.time("ingest", 0, [&] {
        return load_inputs(config, &result.warnings);
    });
    result.n_turns = corpus.turn_count();
    result.timings.back().rows = result.n_turns;

    std::unique_ptr<TopicDetector> detector =
        make_detector(config.segmentation, config.topic_detector_url,
                      config.topic_detector_timeout_s);
    SegmentationOutcome segmented = clock.time("segment", result.n_turns, [&] {
        return segment_corpus(corpus, config.segmentation, detector.get(), config.threads);
    });
    result.detector_fallbacks = segmented.detector_fallbacks;
    result.n_sessions = segmented.sessions.size();
    if (segmented.detector_fallbacks > 0)
        result.warnings.push_back(std::to_string(segmented.detector_fallbacks) +
                                  " remote detector failures answered by the heuristic");
    write_sessions_csv((out / "sessions.csv").string(), segmented.sessions,
                       corpus.calendar);
    result.artifacts.push_back("sessions.csv");

    Lexicon lexicon(config.lexicon);
    std::vector<FeaturizedSession> features =
        clock.time("featurize", result.n_sessions, [&] {
            return featurize_all(segmented.sessions, corpus, lexicon, config.threads);
        });
    write_features_csv((out / "features.csv").string(), features);
    result.artifacts.push_back("features.csv");

    ClusterStage stage = clock.time("cluster", result.n_sessions, [&] {
        return run_cluster_stage(features, config.cluster, config.seed);
    });
    for (const std::string& warning : stage.standardized.warnings)
        result.warnings.push_back(warning);
    if (!stage.dropped_rows.empty())
        result.warnings.push_back(std::to_string(stage.dropped_rows.size()) +
                                  " sessions dropped from clustering (missing event-"
                                  "relative features)");
    int k = static_cast<int>(stage.centroids.sizes.size());
    result.chosen_k = k;
    std::map<int, std::string> labels = effective_label_map(config.label_map, k);

    // Preprocessing travels with the PCA model so artifacts re-score exactly.
    {
        json model = json::parse(pca_model_to_json(stage.pca));
        json pre;
        pre["columns"] = stage.core.columns;
        std::vector<std::string> logged;
        for (const std::string& c : config.cluster.log_columns)
            if (stage.core.column_index(c) >= 0) logged.push_back(c);
        pre["log_columns"] = logged;
        pre["means"] = std::vector<double>(
            stage.standardized.means.data(),
            stage.standardized.means.data() + stage.standardized.means.size());
        pre["sds"] = std::vector<double>(
            stage.standardized.sds.data(),
            stage.standardized.sds.data() + stage.standardized.sds.size());
        json doc;
        doc["preprocess"] = pre;
        doc["pca"] = model;
        write_text_file(out / "pca_model.json", doc.dump(2) + "\n");
        result.artifacts.push_back("pca_model.json");
    }

    write_assignments_csv((out / "assignments.csv").string(), stage, labels);
    result.artifacts.push_back("assignments.csv");
    if (stage.elbow_used) {
        write_elbow_csv((out / "elbow.csv").string(), stage.elbow);
        result.artifacts.push_back("elbow.csv");
    }
    write_stability_csv((out / "stability.csv").string(), stage.stab);
    result.artifacts.push_back("stability.csv");
    write_centroids_csv((out / "centroids.csv").string(), stage.centroids, labels);
    result.artifacts.push_back("centroids.csv");

    std::vector<StateSequence> sequences = clock.time("mine", result.n_sessions, [&] {
        return build_sequences(segmented.sessions, stage.assignment, labels);
    });
    TransitionMatrix pooled = fit_fomm(sequences);
    write_transitions_csv((out / "transitions.csv").string(),
                          (out / "transitions_counts.csv").string(), pooled);
    result.artifacts.push_back("transitions.csv");
    result.artifacts.push_back("transitions_counts.csv");

    std::vector<SubgroupAssignment> subgroup_maps;
    for (const std::string& dim : config.subgroups)
        subgroup_maps.push_back(subgroup_of(corpus, dim));

    for (const SubgroupAssignment& sub : subgroup_maps) {
        std::map<std::string, std::string> grouping;
        for (const StateSequence& seq : sequences) {
            auto it = sub.enrollment_group.find(seq.enrollment_id);
            grouping[seq.enrollment_id] =
                it != sub.enrollment_group.end() ? it->second : "unknown";
        }
        std::map<std::string, TransitionMatrix> per_group =
            subgroup_fomm(sequences, grouping);
        for (const auto& [group, matrix] : per_group) {
            std::string stem = "transitions_" + sub.dimension + "_" + group;
            write_transitions_csv((out / (stem + ".csv")).string(),
                                  (out / (stem + "_counts.csv")).string(), matrix);
            result.artifacts.push_back(stem + ".csv");
            result.artifacts.push_back(stem + "_counts.csv");
        }
    }

    clock.time("stats", result.n_sessions, [&] {
        std::vector<SessionMeta> metas;
        for (const Session& s : segmented.sessions) {
            SessionMeta m;
            m.session_id = s.session_id;
            m.enrollment_id = s.enrollment_id;
            m.class_id = s.class_id;
            auto it = stage.assignment.find(s.session_id);
            if (it == stage.assignment.end()) continue;  // extended mode dropped it
            m.cluster = it->second;
            metas.push_back(std::move(m));
        }
        CsvWriter stats({"subgroup", "outcome", "contrast", "clustering", "estimate",
                         "se", "t", "df", "p", "d", "n", "G"});
        CsvWriter bars({"subgroup", "group", "label", "share", "lo", "hi", "n"});
        for (const SubgroupAssignment& sub : subgroup_maps) {
            append_stats_rows(stats, metas, sub, labels,
                              corpus.context.enrollment_student, &result.warnings);
            append_bars_rows(bars, metas, sub, labels, &result.warnings);
        }
        stats.write_file((out / "stats.csv").string());
        bars.write_file((out / "bars.csv").string());
    });
    result.artifacts.push_back("stats.csv");
    result.artifacts.push_back("bars.csv");

    json manifest;
    manifest["tool"] = "engage";
    manifest["version"] = "0.1.0";
    char hash[32];
    std::snprintf(hash, sizeof(hash), "fnv1a-%016llx",
                  static_cast<unsigned long long>(fnv1a64(config.canonical_json())));
    manifest["config_hash"] = hash;
    manifest["seed"] = config.seed;
    manifest["chosen_k"] = k;
    manifest["detector_fallbacks"] = result.detector_fallbacks;
    manifest["counts"] = {{"turns", result.n_turns},
                          {"sessions", result.n_sessions},
                          {"enrollments", corpus.by_enrollment.size()},
                          {"clustered_sessions", stage.assignment.size()},
                          {"sequences", sequences.size()}};
    manifest["stability"] = {{"runs", config.cluster.stability_runs},
                             {"reference_seed", stage.stab.reference_seed},
                             {"mean_ari", stage.stab.mean_ari},
                             {"sd_ari", stage.stab.sd_ari}};
    manifest["artifacts"] = result.artifacts;
    manifest["warnings"] = result.warnings;
    write_text_file(out / "manifest.json", manifest.dump(2) + "\n");
    result.artifacts.push_back("manifest.json");
    return result;
}

}  // namespace engage
