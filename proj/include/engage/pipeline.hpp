#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "engage/cluster.hpp"
#include "engage/features.hpp"
#include "engage/procmine.hpp"
#include "engage/sessionizer.hpp"
#include "engage/stats.hpp"

namespace engage {

struct ConfigError : EngageError {
    using EngageError::EngageError;
};

struct ClusterOptions {
    std::vector<std::string> log_columns = {
        "num_turns", "avg_minutes_per_turn", "avg_words_per_prompt",
        "copy_paste_events", "direct_answer_requests", "understanding_queries"};
    std::optional<int> pca_components;
    std::optional<double> pca_variance_target = 0.823;
    int k = 0;  // 0 selects k by elbow over [k_min, k_max]
    int k_min = 2;
    int k_max = 10;
    int stability_runs = 50;
    bool use_extended_features = false;  // adds the 4 event-relative features,
                                         // dropping sessions missing any
};

struct PipelineConfig {
    std::string turns_path;
    std::string context_path;
    std::string out_dir = "artifacts";
    std::uint64_t seed = 0;
    int threads = 1;
    bool drop_out_of_window = false;
    SegmentationConfig segmentation;
    std::string topic_detector_url;  // empty = heuristic detector
    double topic_detector_timeout_s = 5.0;
    LexiconConfig lexicon;
    ClusterOptions cluster;
    std::map<int, std::string> label_map;  // empty = Type A, Type B, ...
    std::vector<std::string> subgroups = {"discipline", "selectivity"};

    static PipelineConfig from_json(const std::string& text);
    static PipelineConfig from_file(const std::string& path);
    // Canonical JSON of the effective config; hashed into the manifest.
    std::string canonical_json() const;
};

std::uint64_t fnv1a64(const std::string& data);

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
    std::size_t rows = 0;
};

struct RunResult {
    std::vector<std::string> artifacts;  // file names relative to out_dir
    std::vector<StageTiming> timings;
    std::vector<std::string> warnings;
    int chosen_k = 0;
    int detector_fallbacks = 0;
    std::size_t n_turns = 0;
    std::size_t n_sessions = 0;
};

// Full pipeline: ingest -> segment -> featurize -> cluster -> label ->
// mine -> stats, writing every artifact under config.out_dir.
RunResult run_pipeline(const PipelineConfig& config);

// Stage helpers shared by the focused CLI subcommands.
Corpus load_inputs(const PipelineConfig& config, std::vector<std::string>* warnings);

struct ClusterStage {
    FeatureMatrix core;            // matrix actually clustered (pre-transform)
    PreprocessResult standardized;
    PCAModel pca;
    FeatureMatrix scores;
    bool elbow_used = false;
    ElbowResult elbow;
    KMeansResult kmeans;
    StabilityResult stab;
    CentroidSummary centroids;
    std::map<std::string, int> assignment;  // session_id -> cluster
    std::vector<std::string> dropped_rows;  // extended mode only
};

FeatureMatrix feature_matrix_from(const std::vector<FeaturizedSession>& rows,
                                  bool use_extended,
                                  std::vector<std::string>* dropped);

ClusterStage run_cluster_stage(const std::vector<FeaturizedSession>& rows,
                               const ClusterOptions& options, std::uint64_t seed);

std::map<int, std::string> effective_label_map(const std::map<int, std::string>& given,
                                               int k);

// Artifact writers; all deterministic for fixed inputs.
void write_sessions_csv(const std::string& path, const std::vector<Session>& sessions,
                        const Calendar& calendar);
void write_features_csv(const std::string& path,
                        const std::vector<FeaturizedSession>& rows);
void write_assignments_csv(const std::string& path, const ClusterStage& stage,
                           const std::map<int, std::string>& labels);
void write_elbow_csv(const std::string& path, const ElbowResult& elbow);
void write_stability_csv(const std::string& path, const StabilityResult& stab);
void write_centroids_csv(const std::string& path, const CentroidSummary& centroids,
                         const std::map<int, std::string>& labels);
void write_transitions_csv(const std::string& prob_path, const std::string& count_path,
                           const TransitionMatrix& matrix);

// Session-level subgroup metadata derived from context.
struct SubgroupAssignment {
    std::string dimension;
    std::map<std::string, std::string> enrollment_group;  // enrollment -> group
};

SubgroupAssignment subgroup_of(const Corpus& corpus, const std::string& dimension);

}  // namespace engage
