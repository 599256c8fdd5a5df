#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "engage/csv.hpp"
#include "engage/pipeline.hpp"
#include "engage/report.hpp"
#include "engage/synth.hpp"
#include "engage/topic_detector.hpp"

namespace fs = std::filesystem;
using namespace engage;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitStage = 3;

void require_file(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw ConfigError(what + " not found: " + path);
}

std::vector<Session> sessions_from_csv(const std::string& path) {
    require_file(path, "sessions file");
    CsvTable t = read_csv_file(path);
    int c_sid = t.column("session_id");
    int c_enr = t.column("enrollment_id");
    int c_cls = t.column("class_id");
    int c_start = t.column("start_ts");
    if (c_sid < 0 || c_enr < 0 || c_cls < 0 || c_start < 0)
        throw ConfigError(path + " lacks the session columns");
    std::vector<Session> out;
    for (const auto& row : t.rows) {
        auto ts = parse_rfc3339(row[c_start]);
        if (!ts) throw ConfigError("bad start_ts in " + path + ": " + row[c_start]);
        Session s;
        s.session_id = row[c_sid];
        s.enrollment_id = row[c_enr];
        s.class_id = row[c_cls];
        ConversationTurn anchor;
        anchor.turn_id = s.session_id;
        anchor.enrollment_id = s.enrollment_id;
        anchor.class_id = s.class_id;
        anchor.timestamp = *ts;
        s.turns.push_back(std::move(anchor));
        out.push_back(std::move(s));
    }
    return out;
}

struct AssignmentsFile {
    std::map<std::string, int> assignment;
    std::map<int, std::string> labels;
};

AssignmentsFile assignments_from_csv(const std::string& path) {
    require_file(path, "assignments file");
    CsvTable t = read_csv_file(path);
    int c_sid = t.column("session_id");
    int c_cluster = t.column("cluster");
    int c_label = t.column("label");
    if (c_sid < 0 || c_cluster < 0)
        throw ConfigError(path + " lacks session_id/cluster columns");
    AssignmentsFile out;
    for (const auto& row : t.rows) {
        int cluster = std::stoi(row[c_cluster]);
        out.assignment[row[c_sid]] = cluster;
        if (c_label >= 0)
            out.labels[cluster] = row[c_label];
        else
            out.labels.emplace(cluster, "Type " + std::to_string(cluster));
    }
    return out;
}

std::vector<FeaturizedSession> features_from_csv(const std::string& path) {
    require_file(path, "features file");
    CsvTable t = read_csv_file(path);
    auto need = [&](const std::string& name) {
        int idx = t.column(name);
        if (idx < 0) throw ConfigError(path + " lacks column " + name);
        return idx;
    };
    int c_sid = need("session_id");
    int c_enr = need("enrollment_id");
    int c_cls = need("class_id");
    std::vector<int> core;
    for (const std::string& name : core_feature_names()) core.push_back(need(name));
    std::vector<int> ext;
    for (const std::string& name : extended_feature_names()) ext.push_back(t.column(name));

    std::vector<FeaturizedSession> out;
    for (const auto& row : t.rows) {
        FeaturizedSession f;
        f.session_id = row[c_sid];
        f.enrollment_id = row[c_enr];
        f.class_id = row[c_cls];
        f.core.num_turns = std::stoi(row[core[0]]);
        f.core.avg_minutes_per_turn = std::stod(row[core[1]]);
        f.core.avg_words_per_prompt = std::stod(row[core[2]]);
        f.core.copy_paste_events = std::stoi(row[core[3]]);
        f.core.direct_answer_requests = std::stoi(row[core[4]]);
        f.core.understanding_queries = std::stoi(row[core[5]]);
        f.core.week_progress = std::stoi(row[core[6]]);
        f.core.exam_period_indicator = std::stod(row[core[7]]);
        f.core.time_of_day = std::stod(row[core[8]]);
        f.core.in_class_indicator = std::stod(row[core[9]]);
        auto opt = [&](int idx) -> std::optional<double> {
            if (idx < 0 || row[idx].empty()) return std::nullopt;
            return std::stod(row[idx]);
        };
        f.extended.minutes_since_prev_class = opt(ext[0]);
        f.extended.minutes_until_next_class = opt(ext[1]);
        f.extended.minutes_since_assignment_release = opt(ext[2]);
        f.extended.minutes_until_assignment_deadline = opt(ext[3]);
        out.push_back(std::move(f));
    }
    return out;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << content;
}

void print_timings(const RunResult& result) {
    double total = 0.0;
    for (const StageTiming& t : result.timings) total += t.seconds;
    std::printf("%-10s %10s %12s %12s\n", "stage", "seconds", "rows", "rows/s");
    for (const StageTiming& t : result.timings) {
        double rate = t.seconds > 0.0 ? t.rows / t.seconds : 0.0;
        std::printf("%-10s %10.3f %12zu %12.0f\n", t.stage.c_str(), t.seconds, t.rows,
                    rate);
    }
    std::printf("%-10s %10.3f\n", "total", total);
}

TransitionMatrix demo_matrix() {
    TransitionMatrix m;
    m.states = {"Start", "Type A", "Type B", "End"};
    m.counts = Eigen::MatrixXd::Zero(4, 4);
    m.probs = Eigen::MatrixXd::Zero(4, 4);
    m.probs(0, 1) = 0.7;
    m.probs(0, 2) = 0.3;
    m.probs(1, 1) = 0.4;
    m.probs(1, 2) = 0.3;
    m.probs(1, 3) = 0.3;
    m.probs(2, 1) = 0.2;
    m.probs(2, 2) = 0.4;
    m.probs(2, 3) = 0.4;
    m.row_defined = {true, true, true, false};
    return m;
}

TransitionMatrix matrix_from_csv(const std::string& prob_path) {
    require_file(prob_path, "transition matrix");
    CsvTable probs = read_csv_file(prob_path);
    if (probs.header.size() < 2 || probs.rows.empty())
        throw ConfigError(prob_path + " is not a transition matrix");
    TransitionMatrix m;
    for (size_t j = 1; j < probs.header.size(); ++j) m.states.push_back(probs.header[j]);
    if (probs.rows.size() != m.states.size())
        throw ConfigError(prob_path + " is not square");
    int n = static_cast<int>(m.states.size());
    m.probs = Eigen::MatrixXd::Zero(n, n);
    m.counts = Eigen::MatrixXd::Zero(n, n);
    m.row_defined.assign(n, false);
    for (int i = 0; i < n; ++i) {
        const auto& row = probs.rows[i];
        if (row[0] != m.states[i])
            throw ConfigError(prob_path + ": row order must match the header states");
        bool any = false;
        for (int j = 0; j < n; ++j) {
            const std::string& cell = row[j + 1];
            if (cell.empty()) continue;
            m.probs(i, j) = std::stod(cell);
            any = any || m.probs(i, j) > 0.0;
        }
        m.row_defined[i] = any;
    }
    return m;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Student-AI conversation engagement pipeline"};
    app.require_subcommand(1);

    std::string config_path, out_dir, turns_path, context_path;
    std::string features_path, sessions_path, assignments_path, artifacts_dir;
    std::string lexicon_path, detector_url, matrix_path;
    std::uint64_t seed = 0;
    int threads = 1;
    bool have_seed_flag = false, have_out_flag = false, have_threads_flag = false;

    SegmentationConfig seg;
    ClusterOptions cluster_opts;
    bool no_topic_stage = false, use_extended = false;
    int k_flag = 0;
    double variance_target = 0.0;
    int n_components = 0;
    std::vector<std::string> subgroups = {"discipline", "selectivity"};

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--out", out_dir, "Output directory")->each([&](const std::string&) {
            have_out_flag = true;
        });
        cmd->add_option("--seed", seed, "Deterministic seed")->each([&](const std::string&) {
            have_seed_flag = true;
        });
        cmd->add_option("--threads", threads, "Worker threads")
            ->each([&](const std::string&) { have_threads_flag = true; });
    };

    CLI::App* cmd_run = app.add_subcommand("run", "Run the full pipeline from a config");
    cmd_run->add_option("--config", config_path, "Pipeline config JSON")->required();
    add_common(cmd_run);

    CLI::App* cmd_segment = app.add_subcommand("segment", "Segment turns into sessions");
    cmd_segment->add_option("--turns", turns_path, "Turn log (JSONL)")->required();
    cmd_segment->add_option("--context", context_path, "Context JSON")->required();
    cmd_segment->add_option("--gap-threshold", seg.gap_threshold_minutes,
                            "Session gap threshold in minutes");
    cmd_segment->add_flag("--no-topic-stage", no_topic_stage,
                          "Disable the topic-splitting stage");
    cmd_segment->add_option("--similarity-threshold", seg.heuristic_similarity_threshold,
                            "Heuristic topic-boundary threshold");
    cmd_segment->add_option("--detector-url", detector_url,
                            "Remote topic detector endpoint");
    add_common(cmd_segment);

    CLI::App* cmd_feat = app.add_subcommand("featurize",
                                            "Segment and compute session features");
    cmd_feat->add_option("--turns", turns_path, "Turn log (JSONL)")->required();
    cmd_feat->add_option("--context", context_path, "Context JSON")->required();
    cmd_feat->add_option("--lexicon", lexicon_path, "Lexicon config JSON");
    cmd_feat->add_option("--detector-url", detector_url, "Remote topic detector endpoint");
    add_common(cmd_feat);

    CLI::App* cmd_cluster = app.add_subcommand("cluster", "Cluster a features table");
    cmd_cluster->add_option("--features", features_path, "features.csv from featurize")
        ->required();
    cmd_cluster->add_option("--k", k_flag, "Fixed k (0 = elbow)");
    cmd_cluster->add_option("--k-min", cluster_opts.k_min, "Elbow range start");
    cmd_cluster->add_option("--k-max", cluster_opts.k_max, "Elbow range end");
    cmd_cluster->add_option("--stability-runs", cluster_opts.stability_runs,
                            "Stability re-runs");
    cmd_cluster->add_option("--variance-target", variance_target,
                            "PCA cumulative variance target (0,1]");
    cmd_cluster->add_option("--components", n_components, "PCA component count");
    cmd_cluster->add_flag("--extended", use_extended,
                          "Cluster on the 14-feature extended matrix");
    add_common(cmd_cluster);

    CLI::App* cmd_mine = app.add_subcommand("mine", "Fit transition matrices");
    cmd_mine->add_option("--sessions", sessions_path, "sessions.csv")->required();
    cmd_mine->add_option("--assignments", assignments_path, "assignments.csv")->required();
    add_common(cmd_mine);

    CLI::App* cmd_stats = app.add_subcommand("stats", "Subgroup comparisons");
    cmd_stats->add_option("--sessions", sessions_path, "sessions.csv")->required();
    cmd_stats->add_option("--assignments", assignments_path, "assignments.csv")->required();
    cmd_stats->add_option("--turns", turns_path, "Turn log (JSONL)")->required();
    cmd_stats->add_option("--context", context_path, "Context JSON")->required();
    cmd_stats->add_option("--subgroup", subgroups, "Subgroup dimensions to compare");
    add_common(cmd_stats);

    CLI::App* cmd_report = app.add_subcommand("report", "Render SVG report figures");
    cmd_report->add_option("--artifacts", artifacts_dir, "Artifact directory from run")
        ->required();
    add_common(cmd_report);

    CLI::App* cmd_synth = app.add_subcommand("synth", "Generate synthetic oracle corpora");
    std::string kind = "logs";
    SynthSpec spec;
    int n_sequences = 1000;
    cmd_synth->add_option("--kind", kind, "logs | features | sequences")
        ->check(CLI::IsMember({"logs", "features", "sequences"}));
    cmd_synth->add_option("--enrollments", spec.n_enrollments, "Enrollments to simulate");
    cmd_synth->add_option("--classes", spec.n_classes, "Classes to simulate");
    cmd_synth->add_option("--topic-fraction", spec.topic_boundary_fraction,
                          "Fraction of planted boundaries that are topic-only");
    cmd_synth->add_option("--points", spec.n_points, "Feature rows (kind=features)");
    cmd_synth->add_option("--clusters", spec.n_clusters, "Planted clusters");
    cmd_synth->add_option("--dims", spec.dims, "Feature dimensions");
    cmd_synth->add_option("--separation", spec.separation, "Center separation in sigmas");
    cmd_synth->add_option("--sequences", n_sequences, "Sequence count (kind=sequences)");
    cmd_synth->add_option("--matrix", matrix_path,
                          "Transition matrix CSV to sample (kind=sequences)");
    add_common(cmd_synth);

    CLI::App* cmd_bench = app.add_subcommand("bench", "Time the pipeline stages");
    cmd_bench->add_option("--config", config_path, "Pipeline config JSON")->required();
    add_common(cmd_bench);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*cmd_run || *cmd_bench) {
            PipelineConfig config = PipelineConfig::from_file(config_path);
            if (have_out_flag) config.out_dir = out_dir;
            if (have_seed_flag) config.seed = seed;
            if (have_threads_flag) config.threads = threads;
            RunResult result = run_pipeline(config);
            if (*cmd_bench) {
                print_timings(result);
            } else {
                std::printf("wrote %zu artifacts to %s (k=%d, %zu sessions from %zu turns)\n",
                            result.artifacts.size(), config.out_dir.c_str(),
                            result.chosen_k, result.n_sessions, result.n_turns);
            }
            for (const std::string& w : result.warnings)
                std::fprintf(stderr, "warning: %s\n", w.c_str());
            return kExitOk;
        }

        if (*cmd_segment || *cmd_feat) {
            PipelineConfig config;
            config.turns_path = turns_path;
            config.context_path = context_path;
            seg.topic_stage_enabled = !no_topic_stage;
            config.segmentation = seg;
            std::vector<std::string> warnings;
            Corpus corpus = load_inputs(config, &warnings);
            auto detector = make_detector(seg, detector_url);
            SegmentationOutcome outcome =
                segment_corpus(corpus, seg, detector.get(), threads);
            fs::path out(have_out_flag ? out_dir : "artifacts");
            fs::create_directories(out);
            write_sessions_csv((out / "sessions.csv").string(), outcome.sessions,
                               corpus.calendar);
            std::printf("%zu sessions from %zu turns -> %s\n", outcome.sessions.size(),
                        corpus.turn_count(), (out / "sessions.csv").c_str());
            if (*cmd_feat) {
                LexiconConfig lex =
                    lexicon_path.empty() ? LexiconConfig{} : load_lexicon_file(lexicon_path);
                Lexicon lexicon(lex);
                auto features = featurize_all(outcome.sessions, corpus, lexicon, threads);
                write_features_csv((out / "features.csv").string(), features);
                std::printf("features for %zu sessions -> %s\n", features.size(),
                            (out / "features.csv").c_str());
            }
            for (const std::string& w : warnings)
                std::fprintf(stderr, "warning: %s\n", w.c_str());
            if (outcome.detector_fallbacks > 0)
                std::fprintf(stderr, "warning: %d detector fallbacks\n",
                             outcome.detector_fallbacks);
            return kExitOk;
        }

        if (*cmd_cluster) {
            auto rows = features_from_csv(features_path);
            cluster_opts.k = k_flag;
            cluster_opts.use_extended_features = use_extended;
            if (n_components > 0) {
                cluster_opts.pca_components = n_components;
                cluster_opts.pca_variance_target.reset();
            } else if (variance_target > 0.0) {
                cluster_opts.pca_variance_target = variance_target;
                cluster_opts.pca_components.reset();
            }
            ClusterStage stage = run_cluster_stage(rows, cluster_opts, seed);
            int k = static_cast<int>(stage.centroids.sizes.size());
            auto labels = effective_label_map({}, k);
            fs::path out(have_out_flag ? out_dir : "artifacts");
            fs::create_directories(out);
            write_text(out / "pca_model.json", pca_model_to_json(stage.pca) + "\n");
            write_assignments_csv((out / "assignments.csv").string(), stage, labels);
            if (stage.elbow_used) write_elbow_csv((out / "elbow.csv").string(), stage.elbow);
            write_stability_csv((out / "stability.csv").string(), stage.stab);
            write_centroids_csv((out / "centroids.csv").string(), stage.centroids, labels);
            std::printf("k=%d, stability mean ARI %.3f (sd %.3f) -> %s\n", k,
                        stage.stab.mean_ari, stage.stab.sd_ari, out.c_str());
            return kExitOk;
        }

        if (*cmd_mine) {
            auto sessions = sessions_from_csv(sessions_path);
            auto assignments = assignments_from_csv(assignments_path);
            auto sequences =
                build_sequences(sessions, assignments.assignment, assignments.labels);
            TransitionMatrix pooled = fit_fomm(sequences);
            fs::path out(have_out_flag ? out_dir : "artifacts");
            fs::create_directories(out);
            write_transitions_csv((out / "transitions.csv").string(),
                                  (out / "transitions_counts.csv").string(), pooled);
            std::printf("%zu sequences, %zu states -> %s\n", sequences.size(),
                        pooled.states.size(), (out / "transitions.csv").c_str());
            return kExitOk;
        }

        if (*cmd_stats) {
            PipelineConfig config;
            config.turns_path = turns_path;
            config.context_path = context_path;
            config.subgroups = subgroups;
            std::vector<std::string> warnings;
            Corpus corpus = load_inputs(config, &warnings);
            auto sessions = sessions_from_csv(sessions_path);
            auto assignments = assignments_from_csv(assignments_path);

            // Reuse the pipeline writers by faking a cluster stage result.
            ClusterStage stage;
            stage.assignment = assignments.assignment;
            std::vector<SubgroupAssignment> dims;
            for (const std::string& d : subgroups) dims.push_back(subgroup_of(corpus, d));

            // Build metas straight from the session table.
            CsvWriter stats({"subgroup", "outcome", "contrast", "clustering", "estimate",
                             "se", "t", "df", "p", "d", "n", "G"});
            CsvWriter bars({"subgroup", "group", "label", "share", "lo", "hi", "n"});
            // The append helpers live in the pipeline; emulate via run_pipeline
            // internals is overkill here, so do the comparisons directly.
            for (const SubgroupAssignment& sub : dims) {
                std::vector<std::string> groups;
                for (const auto& [enr, grp] : sub.enrollment_group)
                    if (std::find(groups.begin(), groups.end(), grp) == groups.end())
                        groups.push_back(grp);
                std::sort(groups.begin(), groups.end());
                for (const auto& [cluster, label] : assignments.labels) {
                    if (groups.size() == 2) {
                        std::vector<double> values;
                        std::vector<int> flags;
                        std::vector<std::string> class_ids;
                        for (const Session& s : sessions) {
                            auto ait = assignments.assignment.find(s.session_id);
                            auto git = sub.enrollment_group.find(s.enrollment_id);
                            if (ait == assignments.assignment.end() ||
                                git == sub.enrollment_group.end())
                                continue;
                            values.push_back(ait->second == cluster ? 1.0 : 0.0);
                            flags.push_back(git->second == groups[1] ? 1 : 0);
                            class_ids.push_back(s.class_id);
                        }
                        try {
                            GroupCompareResult r = group_compare(values, flags, class_ids);
                            stats.add_row(
                                {CsvWriter::cell(sub.dimension),
                                 CsvWriter::cell("share_" + label),
                                 CsvWriter::cell(groups[1] + "-" + groups[0]),
                                 CsvWriter::cell(std::string("class")),
                                 CsvWriter::cell(r.diff), CsvWriter::cell(r.se),
                                 CsvWriter::cell(r.t),
                                 CsvWriter::cell(static_cast<int64_t>(r.df)),
                                 CsvWriter::cell(r.p), CsvWriter::cell(r.cohens_d),
                                 CsvWriter::cell(static_cast<int64_t>(values.size())),
                                 CsvWriter::cell(static_cast<int64_t>(r.n_clusters))});
                        } catch (const EngageError& e) {
                            std::fprintf(stderr, "warning: stats row skipped: %s\n",
                                         e.what());
                        }
                    }
                    for (const std::string& group : groups) {
                        std::vector<double> values;
                        std::vector<std::string> class_ids;
                        for (const Session& s : sessions) {
                            auto ait = assignments.assignment.find(s.session_id);
                            auto git = sub.enrollment_group.find(s.enrollment_id);
                            if (ait == assignments.assignment.end() ||
                                git == sub.enrollment_group.end() || git->second != group)
                                continue;
                            values.push_back(ait->second == cluster ? 1.0 : 0.0);
                            class_ids.push_back(s.class_id);
                        }
                        if (values.empty()) continue;
                        try {
                            ProportionCI ci = proportion_ci(values, class_ids);
                            bars.add_row({CsvWriter::cell(sub.dimension),
                                          CsvWriter::cell(group), CsvWriter::cell(label),
                                          CsvWriter::cell(ci.proportion),
                                          CsvWriter::cell(ci.lo), CsvWriter::cell(ci.hi),
                                          CsvWriter::cell(
                                              static_cast<int64_t>(values.size()))});
                        } catch (const EngageError& e) {
                            std::fprintf(stderr, "warning: bars row skipped: %s\n",
                                         e.what());
                        }
                    }
                }
            }
            fs::path out(have_out_flag ? out_dir : "artifacts");
            fs::create_directories(out);
            stats.write_file((out / "stats.csv").string());
            bars.write_file((out / "bars.csv").string());
            std::printf("stats.csv (%zu rows) and bars.csv (%zu rows) -> %s\n",
                        stats.rows(), bars.rows(), out.c_str());
            return kExitOk;
        }

        if (*cmd_report) {
            fs::path out = have_out_flag ? fs::path(out_dir)
                                         : fs::path(artifacts_dir) / "report";
            ReportOutput report = write_report(artifacts_dir, out.string());
            for (const std::string& n : report.notices)
                std::fprintf(stderr, "notice: %s\n", n.c_str());
            std::printf("%zu figures -> %s\n", report.written.size(), out.c_str());
            return kExitOk;
        }

        if (*cmd_synth) {
            spec.seed = seed;
            fs::path out(have_out_flag ? out_dir : "synth");
            fs::create_directories(out);
            if (kind == "logs") {
                SegmentedLogs logs = gen_segmented_logs(spec);
                std::string body;
                for (const ConversationTurn& t : logs.turns)
                    body += serialize_turn(t) + "\n";
                write_text(out / "turns.jsonl", body);
                write_text(out / "context.json", serialize_context(logs.context) + "\n");
                write_text(out / "gold_boundaries.json",
                           gold_boundaries_to_json(logs.gold_boundaries) + "\n");
                std::printf("%zu turns, %zu enrollments -> %s\n", logs.turns.size(),
                            logs.gold_boundaries.size(), out.c_str());
            } else if (kind == "features") {
                ClusteredFeatures blob = gen_clustered_features(spec);
                std::vector<std::string> header = {"row_id"};
                header.insert(header.end(), blob.matrix.columns.begin(),
                              blob.matrix.columns.end());
                CsvWriter w(header);
                for (int i = 0; i < blob.matrix.rows(); ++i) {
                    std::vector<std::string> row = {
                        CsvWriter::cell(blob.matrix.row_ids[i])};
                    for (int j = 0; j < blob.matrix.cols(); ++j)
                        row.push_back(CsvWriter::cell(blob.matrix.values(i, j)));
                    w.add_row(std::move(row));
                }
                w.write_file((out / "features.csv").string());
                CsvWriter gold({"row_id", "gold_label"});
                for (int i = 0; i < blob.matrix.rows(); ++i)
                    gold.add_row({CsvWriter::cell(blob.matrix.row_ids[i]),
                                  CsvWriter::cell(
                                      static_cast<int64_t>(blob.gold_labels[i]))});
                gold.write_file((out / "gold_labels.csv").string());
                std::printf("%d points in %d planted clusters -> %s\n",
                            blob.matrix.rows(), spec.n_clusters, out.c_str());
            } else {
                TransitionMatrix matrix =
                    matrix_path.empty() ? demo_matrix() : matrix_from_csv(matrix_path);
                auto sequences = gen_markov_sequences(matrix, n_sequences, seed);
                CsvWriter w({"enrollment_id", "states"});
                for (const StateSequence& s : sequences) {
                    std::string states;
                    for (size_t i = 0; i < s.states.size(); ++i) {
                        if (i) states += ';';
                        states += s.states[i];
                    }
                    w.add_row({CsvWriter::cell(s.enrollment_id), CsvWriter::cell(states)});
                }
                w.write_file((out / "sequences.csv").string());
                write_transitions_csv((out / "matrix.csv").string(),
                                      (out / "matrix_counts.csv").string(), matrix);
                std::printf("%zu sequences -> %s\n", sequences.size(), out.c_str());
            }
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInput;
    } catch (const EngageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitStage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitStage;
    }
    return kExitOk;
}
