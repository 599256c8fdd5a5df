#include "engage/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "engage/csv.hpp"
#include "engage/rfc3339.hpp"
#include "engage/svg.hpp"

namespace engage {

namespace fs = std::filesystem;

namespace {

CsvTable require_csv(const fs::path& dir, const std::string& name) {
    fs::path p = dir / name;
    if (!fs::exists(p)) throw MissingArtifact("artifact not found: " + p.string());
    return read_csv_file(p.string());
}

int require_column(const CsvTable& t, const std::string& name, const std::string& file) {
    int idx = t.column(name);
    if (idx < 0) throw MissingArtifact(file + " lacks column " + name);
    return idx;
}

void save(SvgCanvas& canvas, const fs::path& path, ReportOutput& out) {
    std::ofstream f(path);
    if (!f) throw MissingArtifact("cannot write " + path.string());
    f << canvas.str();
    out.written.push_back(path.string());
}

// ---- (a) monthly active users and mean sessions per active user ----

void monthly_trends(const CsvTable& sessions, const fs::path& out_dir, ReportOutput& out) {
    int c_enroll = require_column(sessions, "enrollment_id", "sessions.csv");
    int c_start = require_column(sessions, "start_ts", "sessions.csv");

    std::map<std::string, std::set<std::string>> users;  // month -> enrollments
    std::map<std::string, int> session_counts;
    for (const auto& row : sessions.rows) {
        auto ts = parse_rfc3339(row[c_start]);
        if (!ts) continue;
        CivilDate d = ts->local_date();
        char key[8];
        std::snprintf(key, sizeof(key), "%04d-%02d", d.year, d.month);
        users[key].insert(row[c_enroll]);
        ++session_counts[key];
    }
    if (users.empty()) {
        out.notices.push_back("monthly trends skipped: no sessions");
        return;
    }

    std::vector<std::string> months;
    std::vector<double> active, mean_sessions;
    for (const auto& [month, set] : users) {
        months.push_back(month);
        active.push_back(static_cast<double>(set.size()));
        mean_sessions.push_back(static_cast<double>(session_counts[month]) / set.size());
    }

    const int W = 760, H = 520, ML = 70, MR = 20, MT = 40, PH = 190, GAP = 60;
    SvgCanvas svg(W, H);
    svg.text(W / 2.0, 22, "Monthly engagement trends", 16, "middle");

    auto panel = [&](int top, const std::vector<double>& ys, const std::string& title,
                     const std::string& color) {
        double hi = *std::max_element(ys.begin(), ys.end());
        if (hi <= 0.0) hi = 1.0;
        double plot_w = W - ML - MR;
        svg.text(ML, top - 8, title, 12);
        svg.line(ML, top, ML, top + PH, "#444444");
        svg.line(ML, top + PH, W - MR, top + PH, "#444444");
        for (int g = 0; g <= 4; ++g) {
            double v = hi * g / 4.0;
            double y = top + PH - PH * g / 4.0;
            svg.line(ML - 4, y, ML, y, "#444444");
            svg.text(ML - 8, y + 4, format_number(v, v < 10 ? 1 : 0), 10, "end");
        }
        std::vector<std::pair<double, double>> pts;
        for (size_t i = 0; i < ys.size(); ++i) {
            double x = ML + (months.size() == 1
                                 ? plot_w / 2.0
                                 : plot_w * i / static_cast<double>(months.size() - 1));
            double y = top + PH - PH * ys[i] / hi;
            pts.push_back({x, y});
            svg.circle(x, y, 3, color);
            svg.text(x, top + PH + 16, months[i], 10, "middle");
        }
        if (pts.size() > 1) svg.polyline(pts, color);
    };
    panel(MT + 20, active, "Active students (distinct enrollments)", "#4e79a7");
    panel(MT + 20 + PH + GAP, mean_sessions, "Mean sessions per active student", "#e15759");
    save(svg, out_dir / "monthly_trends.svg", out);
}

// ---- (b) centroid heatmap ----

void centroid_heatmap(const CsvTable& centroids, const fs::path& out_dir, ReportOutput& out) {
    int c_label = require_column(centroids, "label", "centroids.csv");
    int c_size = require_column(centroids, "size", "centroids.csv");
    // Feature columns are everything after the fixed prefix columns.
    std::vector<int> feature_cols;
    for (size_t j = 0; j < centroids.header.size(); ++j) {
        const std::string& h = centroids.header[j];
        if (h != "cluster" && h != "label" && h != "size")
            feature_cols.push_back(static_cast<int>(j));
    }
    if (centroids.rows.empty() || feature_cols.empty()) {
        out.notices.push_back("centroid heatmap skipped: empty centroids.csv");
        return;
    }

    double extent = 0.0;
    for (const auto& row : centroids.rows)
        for (int j : feature_cols) extent = std::max(extent, std::abs(std::stod(row[j])));

    const int cell_w = 64, cell_h = 44, left = 150, top = 90;
    int W = left + cell_w * static_cast<int>(feature_cols.size()) + 30;
    int H = top + cell_h * static_cast<int>(centroids.rows.size()) + 40;
    SvgCanvas svg(W, H);
    svg.text(W / 2.0, 24, "Cluster centroids (mean z-score per feature)", 15, "middle");

    for (size_t j = 0; j < feature_cols.size(); ++j)
        svg.text(left + cell_w * j + cell_w / 2.0, top - 10,
                 centroids.header[feature_cols[j]], 10, "end", "#222222", -40);
    for (size_t i = 0; i < centroids.rows.size(); ++i) {
        const auto& row = centroids.rows[i];
        svg.text(left - 10, top + cell_h * i + cell_h / 2.0 + 4,
                 row[c_label] + " (n=" + row[c_size] + ")", 11, "end");
        for (size_t j = 0; j < feature_cols.size(); ++j) {
            double v = std::stod(row[feature_cols[j]]);
            double x = left + cell_w * j, y = top + cell_h * i;
            svg.rect(x, y, cell_w, cell_h, diverging_color(v, extent), "#ffffff");
            svg.text(x + cell_w / 2.0, y + cell_h / 2.0 + 4, format_number(v, 2), 10,
                     "middle", std::abs(v) > 0.6 * extent ? "#ffffff" : "#222222");
        }
    }
    save(svg, out_dir / "centroid_heatmap.svg", out);
}

// ---- (c) weekly session distribution per engagement type ----

void weekly_distribution(const CsvTable& sessions, const CsvTable& assignments,
                         const fs::path& out_dir, ReportOutput& out) {
    int c_sid = require_column(sessions, "session_id", "sessions.csv");
    int c_week = require_column(sessions, "week", "sessions.csv");
    int a_sid = require_column(assignments, "session_id", "assignments.csv");
    int a_label = require_column(assignments, "label", "assignments.csv");

    std::map<std::string, std::string> label_of;
    for (const auto& row : assignments.rows) label_of[row[a_sid]] = row[a_label];

    std::set<std::string> label_set;
    std::map<int, std::map<std::string, int>> week_counts;
    int max_week = 0;
    for (const auto& row : sessions.rows) {
        auto it = label_of.find(row[c_sid]);
        if (it == label_of.end()) continue;
        int week = std::stoi(row[c_week]);
        ++week_counts[week][it->second];
        label_set.insert(it->second);
        max_week = std::max(max_week, week);
    }
    if (week_counts.empty()) {
        out.notices.push_back("weekly distribution skipped: no labeled sessions");
        return;
    }
    std::vector<std::string> labels(label_set.begin(), label_set.end());

    int total_max = 0;
    for (const auto& [w, counts] : week_counts) {
        int t = 0;
        for (const auto& [l, c] : counts) t += c;
        total_max = std::max(total_max, t);
    }

    const int W = 820, H = 420, left = 60, top = 60, plot_h = 280;
    double bar_w = static_cast<double>(W - left - 30) / max_week;
    SvgCanvas svg(W, H);
    svg.text(W / 2.0, 24, "Sessions per academic week by engagement type", 15, "middle");
    svg.line(left, top, left, top + plot_h, "#444444");
    svg.line(left, top + plot_h, W - 30, top + plot_h, "#444444");
    for (int g = 0; g <= 4; ++g) {
        double v = total_max * g / 4.0;
        double y = top + plot_h - plot_h * g / 4.0;
        svg.line(left - 4, y, left, y, "#444444");
        svg.text(left - 8, y + 4, format_number(v, 0), 10, "end");
    }
    for (int w = 1; w <= max_week; ++w) {
        double x = left + bar_w * (w - 1) + bar_w * 0.1;
        double y = top + plot_h;
        auto wit = week_counts.find(w);
        if (wit != week_counts.end()) {
            for (size_t li = 0; li < labels.size(); ++li) {
                auto cit = wit->second.find(labels[li]);
                if (cit == wit->second.end()) continue;
                double h = plot_h * cit->second / static_cast<double>(total_max);
                y -= h;
                svg.rect(x, y, bar_w * 0.8, h, category_color(static_cast<int>(li)));
            }
        }
        if (w == 1 || w % 2 == 0)
            svg.text(left + bar_w * (w - 1) + bar_w / 2.0, top + plot_h + 16,
                     std::to_string(w), 10, "middle");
    }
    for (size_t li = 0; li < labels.size(); ++li) {
        double x = left + 130.0 * li;
        svg.rect(x, H - 40, 14, 14, category_color(static_cast<int>(li)));
        svg.text(x + 20, H - 28, labels[li], 11);
    }
    save(svg, out_dir / "weekly_distribution.svg", out);
}

// ---- (d) type shares by subgroup with CIs ----

void type_share_bars(const CsvTable& bars, const fs::path& out_dir, ReportOutput& out) {
    int c_dim = require_column(bars, "subgroup", "bars.csv");
    int c_group = require_column(bars, "group", "bars.csv");
    int c_label = require_column(bars, "label", "bars.csv");
    int c_share = require_column(bars, "share", "bars.csv");
    int c_lo = require_column(bars, "lo", "bars.csv");
    int c_hi = require_column(bars, "hi", "bars.csv");

    std::set<std::string> dims;
    for (const auto& row : bars.rows) dims.insert(row[c_dim]);
    if (dims.empty()) {
        out.notices.push_back("type shares skipped: empty bars.csv");
        return;
    }

    const int panel_h = 250, W = 820, left = 60;
    int H = 50 + (panel_h + 50) * static_cast<int>(dims.size());
    SvgCanvas svg(W, H);
    svg.text(W / 2.0, 24, "Engagement-type shares by subgroup (95% CI)", 15, "middle");

    int panel_idx = 0;
    for (const std::string& dim : dims) {
        int top = 50 + (panel_h + 50) * panel_idx + 20;
        std::vector<std::string> groups;
        std::set<std::string> label_set;
        for (const auto& row : bars.rows) {
            if (row[c_dim] != dim) continue;
            if (std::find(groups.begin(), groups.end(), row[c_group]) == groups.end())
                groups.push_back(row[c_group]);
            label_set.insert(row[c_label]);
        }
        if (groups.empty()) {
            out.notices.push_back("type shares: subgroup " + dim + " empty, omitted");
            continue;
        }
        std::vector<std::string> labels(label_set.begin(), label_set.end());

        svg.text(left, top - 6, dim, 13);
        svg.line(left, top, left, top + panel_h - 40, "#444444");
        svg.line(left, top + panel_h - 40, W - 30, top + panel_h - 40, "#444444");
        for (int g = 0; g <= 4; ++g) {
            double y = top + (panel_h - 40) - (panel_h - 40) * g / 4.0;
            svg.line(left - 4, y, left, y, "#444444");
            svg.text(left - 8, y + 4, format_number(g / 4.0, 2), 10, "end");
        }
        double span = static_cast<double>(W - left - 30);
        double group_w = span / groups.size();
        for (size_t gi = 0; gi < groups.size(); ++gi) {
            double gx = left + group_w * gi;
            double bar_w = group_w / (labels.size() + 1.0);
            svg.text(gx + group_w / 2.0, top + panel_h - 22, groups[gi], 11, "middle");
            for (size_t li = 0; li < labels.size(); ++li) {
                const std::vector<std::string>* match = nullptr;
                for (const auto& row : bars.rows)
                    if (row[c_dim] == dim && row[c_group] == groups[gi] &&
                        row[c_label] == labels[li])
                        match = &row;
                if (!match) continue;
                double share = std::stod((*match)[c_share]);
                double lo = std::stod((*match)[c_lo]);
                double hi = std::stod((*match)[c_hi]);
                double x = gx + bar_w * (li + 0.5);
                double y0 = top + panel_h - 40;
                double h = (panel_h - 40) * share;
                svg.rect(x, y0 - h, bar_w * 0.85, h, category_color(static_cast<int>(li)));
                double cx = x + bar_w * 0.425;
                double y_lo = y0 - (panel_h - 40) * lo;
                double y_hi = y0 - (panel_h - 40) * hi;
                svg.line(cx, y_lo, cx, y_hi, "#222222");
                svg.line(cx - 3, y_lo, cx + 3, y_lo, "#222222");
                svg.line(cx - 3, y_hi, cx + 3, y_hi, "#222222");
            }
        }
        for (size_t li = 0; li < labels.size(); ++li) {
            double x = left + 130.0 * li;
            svg.rect(x, top + panel_h - 10, 12, 12, category_color(static_cast<int>(li)));
            svg.text(x + 17, top + panel_h, labels[li], 10);
        }
        ++panel_idx;
    }
    save(svg, out_dir / "type_shares.svg", out);
}

// ---- (e) transition-matrix heatmaps ----

void transition_heatmap(const CsvTable& probs, const CsvTable& counts,
                        const std::string& title, const fs::path& path,
                        ReportOutput& out) {
    if (probs.header.size() < 2 || probs.rows.empty()) {
        out.notices.push_back("transition heatmap skipped: empty matrix for " + title);
        return;
    }
    const int n_to = static_cast<int>(probs.header.size()) - 1;
    const int n_from = static_cast<int>(probs.rows.size());

    const int cell_w = 92, cell_h = 46, left = 110, top = 90;
    int W = left + cell_w * n_to + 30;
    int H = top + cell_h * n_from + 30;
    SvgCanvas svg(W, H);
    svg.text(W / 2.0, 24, title, 15, "middle");
    svg.text(W / 2.0, 44, "cell: probability (transition count)", 11, "middle", "#666666");

    for (int j = 0; j < n_to; ++j)
        svg.text(left + cell_w * j + cell_w / 2.0, top - 10, probs.header[j + 1], 11,
                 "middle");
    for (int i = 0; i < n_from; ++i) {
        svg.text(left - 10, top + cell_h * i + cell_h / 2.0 + 4, probs.rows[i][0], 11,
                 "end");
        for (int j = 0; j < n_to; ++j) {
            const std::string& cell = probs.rows[i][j + 1];
            double x = left + cell_w * j, y = top + cell_h * i;
            if (cell.empty()) {
                svg.rect(x, y, cell_w, cell_h, "#f2f2f2", "#ffffff");
                continue;
            }
            double p = std::stod(cell);
            svg.rect(x, y, cell_w, cell_h, sequential_color(p, 0.0, 1.0), "#ffffff");
            std::string count = counts.rows[i][j + 1];
            if (!count.empty() && count != "0") {
                svg.text(x + cell_w / 2.0, y + cell_h / 2.0 + 4,
                         format_number(p, 2) + " (" + count + ")", 10, "middle",
                         p > 0.6 ? "#ffffff" : "#222222");
            } else {
                svg.text(x + cell_w / 2.0, y + cell_h / 2.0 + 4, format_number(p, 2), 10,
                         "middle", p > 0.6 ? "#ffffff" : "#222222");
            }
        }
    }
    save(svg, path, out);
}

}  // namespace

ReportOutput write_report(const std::string& artifact_dir, const std::string& out_dir) {
    fs::path in(artifact_dir);
    if (!fs::exists(in)) throw MissingArtifact("artifact directory not found: " + artifact_dir);
    fs::path dest(out_dir);
    fs::create_directories(dest);

    ReportOutput out;
    CsvTable sessions = require_csv(in, "sessions.csv");
    CsvTable assignments = require_csv(in, "assignments.csv");
    CsvTable centroids = require_csv(in, "centroids.csv");

    monthly_trends(sessions, dest, out);
    centroid_heatmap(centroids, dest, out);
    weekly_distribution(sessions, assignments, dest, out);

    fs::path bars_path = in / "bars.csv";
    if (fs::exists(bars_path)) {
        type_share_bars(read_csv_file(bars_path.string()), dest, out);
    } else {
        out.notices.push_back("type shares skipped: bars.csv not present");
    }

    // The pooled matrix plus any per-subgroup matrices written beside it.
    std::vector<std::string> matrix_names;
    for (const auto& entry : fs::directory_iterator(in)) {
        std::string name = entry.path().filename().string();
        if (name.rfind("transitions", 0) == 0 && name.size() > 4 &&
            name.compare(name.size() - 4, 4, ".csv") == 0 &&
            name.find("_counts") == std::string::npos)
            matrix_names.push_back(name);
    }
    std::sort(matrix_names.begin(), matrix_names.end());
    for (const std::string& name : matrix_names) {
        std::string stem = name.substr(0, name.size() - 4);
        fs::path counts_path = in / (stem + "_counts.csv");
        if (!fs::exists(counts_path))
            throw MissingArtifact("counts companion missing for " + name);
        CsvTable probs = read_csv_file((in / name).string());
        CsvTable counts = read_csv_file(counts_path.string());
        std::string title = stem == "transitions"
                                ? "Transition probabilities (pooled)"
                                : "Transition probabilities: " + stem.substr(12);
        transition_heatmap(probs, counts, title, dest / (stem + ".svg"), out);
    }
    if (matrix_names.empty())
        out.notices.push_back("transition heatmaps skipped: no transitions*.csv");
    return out;
}

}  // namespace engage
