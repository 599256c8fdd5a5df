#pragma once

#include <string>
#include <vector>

#include "engage/ingest.hpp"

namespace engage {

struct MissingArtifact : EngageError {
    using EngageError::EngageError;
};

struct ReportOutput {
    std::vector<std::string> written;  // paths of emitted SVG files
    std::vector<std::string> notices;  // skipped charts and why
};

// Renders the report figures from the CSV artifacts of a pipeline run:
// monthly engagement trends, the cluster-centroid heatmap, weekly session
// distribution by type, type-share bars with confidence intervals, and
// transition-matrix heatmaps (probability with count in parentheses).
// Everything is derived from the CSVs alone.
ReportOutput write_report(const std::string& artifact_dir, const std::string& out_dir);

}  // namespace engage
