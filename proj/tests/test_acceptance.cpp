#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "engage/cluster.hpp"
#include "engage/features.hpp"
#include "engage/pipeline.hpp"
#include "engage/procmine.hpp"
#include "engage/rng.hpp"
#include "engage/sessionizer.hpp"
#include "engage/stats.hpp"
#include "engage/synth.hpp"
#include "support.hpp"

using namespace engage;
namespace fs = std::filesystem;

// Release gate. Every case below checks one oracle or budget end to end and
// prints a single PASS/FAIL line, so a run can be skimmed without reading
// the doctest report. Tolerances are pinned here, next to what they guard.
namespace {

constexpr double kRealTol = 1e-9;      // hand-computed feature reals
constexpr double kSpectrumTol = 1e-8;  // PCA vs brute-force eigendecomposition
constexpr double kRowSumTol = 1e-10;   // transition row normalization
constexpr double kSandwichTol = 1e-10;  // hand-evaluated 6-row sandwich
// Identities that hold algebraically but are evaluated in a different
// association order than the closed form.
constexpr double kIdentityTol = 1e-12;

constexpr double kSegmentBudgetS = 5.0;     // 50k turns
constexpr double kClusterBudgetS = 30.0;    // 20k x 10 blob recovery
constexpr double kPipelineBudgetS = 60.0;   // 200k turns, one thread

void verdict(const char* name, bool ok, const std::string& detail) {
    std::printf("%s  %-12s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* pattern, ...) {
    char buf[512];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof buf, pattern, args);
    va_end(args);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

std::map<std::string, std::vector<ConversationTurn>> by_enrollment(
    const std::vector<ConversationTurn>& turns) {
    std::map<std::string, std::vector<ConversationTurn>> out;
    for (const auto& t : turns) out[t.enrollment_id].push_back(t);
    return out;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("engage_accept_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const {
        return (path / name).string();
    }
};

void write_corpus_files(const TempDir& dir, const SegmentedLogs& logs) {
    std::ofstream turns(dir / "turns.jsonl", std::ios::binary);
    for (const auto& t : logs.turns) turns << serialize_turn(t) << "\n";
    std::ofstream context(dir / "context.json", std::ios::binary);
    context << serialize_context(logs.context);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

std::map<std::string, std::string> artifact_bytes(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        out[fs::relative(entry.path(), dir).string()] =
            read_file(entry.path().string());
    }
    return out;
}

TransitionMatrix chain(std::vector<std::string> states,
                       const std::vector<std::vector<double>>& probs) {
    TransitionMatrix m;
    m.states = std::move(states);
    const int n = static_cast<int>(m.states.size());
    m.probs.resize(n, n);
    m.counts = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m.probs(i, j) = probs[i][j];
    m.row_defined.assign(n, true);
    m.row_defined[m.state_index("End")] = false;
    return m;
}

}  // namespace

TEST_CASE("planted session boundaries are recovered at scale") {
    SynthSpec spec;
    spec.n_enrollments = 1300;

    spec.seed = 101;
    spec.topic_boundary_fraction = 0.0;
    SegmentedLogs time_only = gen_segmented_logs(spec);
    REQUIRE(time_only.turns.size() >= 50000);

    BoundaryTally time_tally;
    auto t0 = std::chrono::steady_clock::now();
    for (auto& [enrollment, turns] : by_enrollment(time_only.turns)) {
        auto sessions = segment_time(turns, spec.gap_threshold_minutes);
        BoundarySet gold =
            make_boundary_set(time_only.gold_boundaries.at(enrollment),
                              static_cast<int>(turns.size()));
        time_tally.add(boundaries_of(sessions), gold);
    }
    double time_seconds = seconds_since(t0);
    double time_f1 = time_tally.score().f1;

    spec.seed = 102;
    spec.topic_boundary_fraction = 0.5;
    SegmentedLogs mixed = gen_segmented_logs(spec);
    REQUIRE(mixed.turns.size() >= 50000);
    SegmentationConfig config;
    config.gap_threshold_minutes = spec.gap_threshold_minutes;

    BoundaryTally mixed_tally;
    t0 = std::chrono::steady_clock::now();
    for (auto& [enrollment, turns] : by_enrollment(mixed.turns)) {
        SegmentationOutcome outcome = segment_combined(turns, config, nullptr);
        BoundarySet gold =
            make_boundary_set(mixed.gold_boundaries.at(enrollment),
                              static_cast<int>(turns.size()));
        mixed_tally.add(boundaries_of(outcome.sessions), gold);
    }
    double mixed_seconds = seconds_since(t0);
    double mixed_f1 = mixed_tally.score().f1;

    bool exact = time_f1 == 1.0;
    bool mixed_ok = mixed_f1 >= 0.95;
    bool fast = time_seconds <= kSegmentBudgetS && mixed_seconds <= kSegmentBudgetS;
    verdict("segmentation", exact && mixed_ok && fast,
            fmt("time-only F1=%.6f mixed F1=%.6f (%zu+%zu turns in %.2fs+%.2fs)",
                time_f1, mixed_f1, time_only.turns.size(), mixed.turns.size(),
                time_seconds, mixed_seconds));
    CHECK(exact);
    CHECK(mixed_ok);
    CHECK(fast);
}

TEST_CASE("a hand-built session yields the hand-computed feature vector") {
    // Three turns on Monday 2025-03-03, 10:00/10:04/10:10 local (+08:00),
    // inside a Monday 10:00-11:00 class block, semester week 3.
    std::vector<ConversationTurn> turns(3);
    const char* stamps[] = {"2025-03-03T10:00:00+08:00",
                            "2025-03-03T10:04:00+08:00",
                            "2025-03-03T10:10:00+08:00"};
    const char* prompts[] = {"Question 3: solve for x. A. 1 B. 2",
                             "why does the square root have two values",
                             "give me the answer to part b"};
    for (int i = 0; i < 3; ++i) {
        turns[i].turn_id = "T" + std::to_string(i + 1);
        turns[i].enrollment_id = "E1";
        turns[i].class_id = "C1";
        turns[i].timestamp = *parse_rfc3339(stamps[i]);
        turns[i].prompt_text = prompts[i];
    }

    Calendar cal;
    cal.semester_start = {2025, 2, 17};
    cal.semester_end = {2025, 6, 8};
    cal.exam_weeks = {8, 16};
    ContextMeta ctx;
    ClassInfo info;
    info.institution_id = "U1";
    info.class_schedule = {{0, 600, 660}};
    ctx.classes["C1"] = info;
    ctx.institutions["U1"] = {};
    Corpus corpus = build_corpus(turns, ctx, {}, cal);

    Session s;
    s.session_id = "S1";
    s.enrollment_id = "E1";
    s.class_id = "C1";
    s.turns = corpus.by_enrollment.at("E1");
    Lexicon lexicon{LexiconConfig{}};
    FeaturizedSession f = featurize(s, corpus, lexicon);

    auto near = [](double got, double want) {
        return std::fabs(got - want) <= kRealTol;
    };
    bool counts_ok = f.core.num_turns == 3 && f.core.copy_paste_events == 2 &&
                     f.core.direct_answer_requests == 1 &&
                     f.core.understanding_queries == 1 && f.core.week_progress == 3;
    bool reals_ok = near(f.core.avg_minutes_per_turn, 5.0) &&
                    near(f.core.avg_words_per_prompt, 8.0) &&
                    near(f.core.exam_period_indicator, 0.0) &&
                    near(f.core.time_of_day, 10.0) &&
                    near(f.core.in_class_indicator, 1.0);
    verdict("features", counts_ok && reals_ok,
            fmt("counts %s reals %s (turns=%d pace=%.3f words=%.3f)",
                counts_ok ? "exact" : "WRONG", reals_ok ? "within 1e-9" : "WRONG",
                f.core.num_turns, f.core.avg_minutes_per_turn,
                f.core.avg_words_per_prompt));
    CHECK(counts_ok);
    CHECK(reals_ok);
}

TEST_CASE("projection spectrum matches a brute-force eigendecomposition") {
    const int n = 1000, d = 10;
    Rng rng(2024);
    FeatureMatrix input;
    for (int j = 0; j < d; ++j) input.columns.push_back("f" + std::to_string(j));
    for (int i = 0; i < n; ++i) input.row_ids.push_back("R" + std::to_string(i));
    input.values.resize(n, d);
    for (int i = 0; i < n; ++i) {
        double shared = rng.normal();
        for (int j = 0; j < d; ++j)
            input.values(i, j) = rng.normal() * (1.0 + j) + 0.4 * shared * (j % 3);
    }

    oracle::Matrix rows(n, std::vector<double>(d));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) rows[i][j] = input.values(i, j);
    oracle::EigenResult truth = oracle::jacobi_eigen(oracle::covariance(rows));
    double total = 0.0;
    for (double v : truth.values) total += v;

    PCAModel model = fit_pca(input, d, std::nullopt);
    double ratio_dev = 0.0;
    for (int j = 0; j < d; ++j)
        ratio_dev = std::max(ratio_dev, std::fabs(model.explained_ratio(j) -
                                                  truth.values[j] / total));

    FeatureMatrix scores = transform_pca(model, input);
    Eigen::MatrixXd recon = scores.values * model.components.transpose();
    for (int j = 0; j < d; ++j)
        recon.col(j) = recon.col(j) * model.scales(j) +
                       Eigen::VectorXd::Constant(n, model.means(j));
    double recon_err = (recon - input.values).cwiseAbs().maxCoeff();

    bool ratios_ok = ratio_dev <= kSpectrumTol;
    bool recon_ok = recon_err < kSpectrumTol;
    verdict("pca", ratios_ok && recon_ok,
            fmt("ratio dev=%.2e reconstruction err=%.2e (tol %.0e)", ratio_dev,
                recon_err, kSpectrumTol));
    CHECK(ratios_ok);
    CHECK(recon_ok);
}

TEST_CASE("planted blobs are found, matched, and stable") {
    SynthSpec spec;
    spec.seed = 33;
    spec.n_points = 20000;
    spec.n_clusters = 4;
    spec.dims = 10;
    spec.separation = 10.0;
    ClusteredFeatures planted = gen_clustered_features(spec);

    auto t0 = std::chrono::steady_clock::now();
    ElbowResult elbow = elbow_select(planted.matrix.values, 2, 10, 0);
    KMeansResult km = kmeans_fit(planted.matrix.values, 4, 0);
    double ari = adjusted_rand_index(km.labels, planted.gold_labels);
    StabilityResult stab = stability(planted.matrix.values, 4, 50);
    double seconds = seconds_since(t0);

    bool k_ok = elbow.chosen_k == 4;
    bool ari_ok = ari >= 0.99;
    bool stable = stab.mean_ari >= 0.99;
    bool fast = seconds < kClusterBudgetS;
    verdict("clustering", k_ok && ari_ok && stable && fast,
            fmt("elbow k=%d ARI=%.4f stability mean=%.4f sd=%.4f (%.1fs)",
                elbow.chosen_k, ari, stab.mean_ari, stab.sd_ari, seconds));
    CHECK(k_ok);
    CHECK(ari_ok);
    CHECK(stable);
    CHECK(fast);
}

TEST_CASE("the pair-count index hits its hand-derived value") {
    double ari = adjusted_rand_index({0, 0, 1, 1}, {0, 1, 0, 1});
    bool exact = ari == -0.5;
    verdict("ari", exact, fmt("ARI([0011],[0101])=%.17g", ari));
    CHECK(exact);
}

TEST_CASE("a known six-state chain is recovered from sampled walks") {
    TransitionMatrix truth =
        chain({"Start", "A", "B", "C", "D", "End"},
              {{0.0, 0.4, 0.3, 0.2, 0.1, 0.0},
               {0.0, 0.25, 0.25, 0.25, 0.0, 0.25},
               {0.0, 0.2, 0.0, 0.3, 0.3, 0.2},
               {0.0, 0.0, 0.4, 0.0, 0.3, 0.3},
               {0.0, 0.3, 0.0, 0.3, 0.0, 0.4},
               {0.0, 0.0, 0.0, 0.0, 0.0, 0.0}});
    std::vector<StateSequence> walks = gen_markov_sequences(truth, 10000, 77);
    TransitionMatrix fit = fit_fomm(walks);
    REQUIRE(fit.states == truth.states);

    const int n = static_cast<int>(fit.states.size());
    double prob_dev = 0.0, row_dev = 0.0;
    for (int i = 0; i < n; ++i) {
        if (!truth.row_defined[i]) continue;
        REQUIRE(fit.row_defined[i]);
        for (int j = 0; j < n; ++j)
            prob_dev = std::max(prob_dev,
                                std::fabs(fit.probs(i, j) - truth.probs(i, j)));
        row_dev = std::max(row_dev, std::fabs(fit.probs.row(i).sum() - 1.0));
    }

    TransitionMatrix tiny =
        fit_fomm({StateSequence{"E1", {"Start", "A", "A", "B", "End"}}});
    int a = tiny.state_index("A"), b = tiny.state_index("B");
    bool halves = tiny.probs(a, a) == 0.5 && tiny.probs(a, b) == 0.5;

    bool probs_ok = prob_dev <= 0.02;
    bool rows_ok = row_dev <= kRowSumTol;
    verdict("transitions", probs_ok && rows_ok && halves,
            fmt("max prob dev=%.4f row-sum dev=%.1e AA/AB=%.1f/%.1f", prob_dev,
                row_dev, tiny.probs(a, a), tiny.probs(a, b)));
    CHECK(probs_ok);
    CHECK(rows_ok);
    CHECK(halves);
}

TEST_CASE("clustered errors collapse to their textbook special cases") {
    // Common regression: y = 1 + 2x + heteroskedastic noise, X = [1, x].
    const int n = 60;
    Rng rng(7);
    Eigen::VectorXd y(n), x(n);
    Eigen::MatrixXd X(n, 2);
    for (int i = 0; i < n; ++i) {
        x(i) = rng.normal();
        y(i) = 1.0 + 2.0 * x(i) + rng.normal() * (0.5 + std::fabs(x(i)));
        X(i, 0) = 1.0;
        X(i, 1) = x(i);
    }
    OlsFit fit = ols(y, X);

    auto rel_diff = [](const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
        return (got - want).cwiseAbs().maxCoeff() / want.cwiseAbs().maxCoeff();
    };

    // Singleton clusters against a by-hand heteroskedasticity-robust matrix.
    std::vector<std::string> singletons;
    for (int i = 0; i < n; ++i) singletons.push_back("r" + std::to_string(i));
    ClusterRobustResult single = cluster_robust_vcov(fit, singletons);
    double sum_x = x.sum(), sum_xx = x.squaredNorm();
    double det = n * sum_xx - sum_x * sum_x;
    Eigen::Matrix2d bread;
    bread << sum_xx / det, -sum_x / det, -sum_x / det, double(n) / det;
    Eigen::Matrix2d meat = Eigen::Matrix2d::Zero();
    for (int i = 0; i < n; ++i) {
        Eigen::Vector2d xi(1.0, x(i));
        meat += fit.residuals(i) * fit.residuals(i) * xi * xi.transpose();
    }
    Eigen::Matrix2d hc1 = (double(n) / (n - 2)) * bread * meat * bread;
    bool single_ok =
        rel_diff(single.vcov, hc1) <= kIdentityTol && single.df == n - 1;

    // Identical clusterings on both dimensions against plain one-way.
    std::vector<std::string> groups;
    for (int i = 0; i < n; ++i) groups.push_back("g" + std::to_string(i % 6));
    ClusterRobustResult one_way = cluster_robust_vcov(fit, groups);
    ClusterRobustResult two_way = cluster_robust_vcov(fit, groups, &groups);
    bool two_way_ok = rel_diff(two_way.vcov, one_way.vcov) <= kIdentityTol &&
                      two_way.df == one_way.df;

    // Six-row two-cluster fixture with a fully hand-evaluated sandwich.
    Eigen::VectorXd y6(6);
    y6 << 1.0, 2.0, 1.5, 4.0, 4.5, 6.5;
    Eigen::MatrixXd X6(6, 2);
    for (int i = 0; i < 6; ++i) {
        X6(i, 0) = 1.0;
        X6(i, 1) = i;
    }
    OlsFit fit6 = ols(y6, X6);
    ClusterRobustResult six = cluster_robust_vcov(
        fit6, {"c0", "c0", "c0", "c1", "c1", "c1"});
    Eigen::Matrix2d want;
    want << 5.0 / 196.0, -1.0 / 49.0, -1.0 / 49.0, 4.0 / 245.0;
    double six_dev = (six.vcov - want).cwiseAbs().maxCoeff();
    six_dev = std::max(six_dev, std::fabs(six.se[0] - std::sqrt(5.0) / 14.0));
    six_dev = std::max(six_dev, std::fabs(six.se[1] - 2.0 / (7.0 * std::sqrt(5.0))));
    bool six_ok = six_dev <= kSandwichTol && six.df == 1;

    // 200 clusters of two rows each put 199 degrees of freedom on the t.
    const int big = 400;
    Eigen::VectorXd yb(big);
    Eigen::MatrixXd Xb(big, 2);
    std::vector<std::string> pairs;
    for (int i = 0; i < big; ++i) {
        double xv = rng.normal();
        yb(i) = 0.5 - 1.5 * xv + rng.normal();
        Xb(i, 0) = 1.0;
        Xb(i, 1) = xv;
        pairs.push_back("s" + std::to_string(i / 2));
    }
    ClusterRobustResult wide = cluster_robust_vcov(ols(yb, Xb), pairs);
    double p = student_t_p_two_sided(-4.04, 199);
    bool df_ok = wide.df == 199 && p > 0.0 && p < 0.001;

    verdict("robust-se", single_ok && two_way_ok && six_ok && df_ok,
            fmt("singleton=HC1 %s two-way=one-way %s hand dev=%.1e df(200 cl)=%d",
                single_ok ? "yes" : "NO", two_way_ok ? "yes" : "NO", six_dev,
                wide.df));
    CHECK(single_ok);
    CHECK(two_way_ok);
    CHECK(six_ok);
    CHECK(df_ok);
}

TEST_CASE("reruns and thread counts leave every table byte-identical") {
    TempDir dir("determinism");
    SynthSpec spec;
    spec.seed = 9;
    spec.n_enrollments = 40;
    spec.topic_boundary_fraction = 0.25;
    write_corpus_files(dir, gen_segmented_logs(spec));

    PipelineConfig cfg;
    cfg.turns_path = dir / "turns.jsonl";
    cfg.context_path = dir / "context.json";
    cfg.seed = 3;
    cfg.threads = 1;
    cfg.out_dir = dir / "out_a";
    run_pipeline(cfg);
    cfg.out_dir = dir / "out_b";
    run_pipeline(cfg);
    cfg.out_dir = dir / "out_c";
    cfg.threads = 4;
    run_pipeline(cfg);

    auto a = artifact_bytes(dir / "out_a");
    auto b = artifact_bytes(dir / "out_b");
    auto c = artifact_bytes(dir / "out_c");
    REQUIRE(a.size() >= 8);
    REQUIRE(a.count("sessions.csv") == 1);
    REQUIRE(a.count("manifest.json") == 1);
    bool rerun_same = a == b;
    bool threads_same = a == c;
    verdict("determinism", rerun_same && threads_same,
            fmt("%zu artifacts, rerun %s, 4 threads %s", a.size(),
                rerun_same ? "identical" : "DIFFER",
                threads_same ? "identical" : "DIFFER"));
    CHECK(rerun_same);
    CHECK(threads_same);
}

TEST_CASE("a 200k-turn corpus clears the single-thread time budget") {
    TempDir dir("throughput");
    SynthSpec spec;
    spec.seed = 11;
    spec.n_enrollments = 5000;
    spec.topic_boundary_fraction = 0.25;
    SegmentedLogs logs = gen_segmented_logs(spec);
    REQUIRE(logs.turns.size() >= 200000);
    write_corpus_files(dir, logs);

    PipelineConfig cfg;
    cfg.turns_path = dir / "turns.jsonl";
    cfg.context_path = dir / "context.json";
    cfg.out_dir = dir / "out";
    cfg.seed = 1;
    cfg.threads = 1;
    cfg.cluster.k = 4;

    auto t0 = std::chrono::steady_clock::now();
    RunResult result = run_pipeline(cfg);
    double seconds = seconds_since(t0);

    bool fast = seconds < kPipelineBudgetS;
    bool sized = result.n_turns >= 200000;
    verdict("throughput", fast && sized,
            fmt("%zu turns, %zu sessions in %.1fs (budget %.0fs)", result.n_turns,
                result.n_sessions, seconds, kPipelineBudgetS));
    CHECK(fast);
    CHECK(sized);
}
