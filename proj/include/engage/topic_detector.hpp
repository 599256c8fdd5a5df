#pragma once

#include <memory>
#include <string>
#include <vector>

#include "engage/sessionizer.hpp"

namespace engage {

// HTTP client for an external topic segmenter (typically an LLM service).
// POSTs {"session_id": ..., "prompts": [...]} to the configured URL and
// expects {"boundaries": [gap indices]} back. Any transport or protocol
// failure raises RemoteDetectorUnavailable so the caller can fall back.
class RemoteTopicDetector : public TopicDetector {
public:
    RemoteTopicDetector(const std::string& url, double timeout_s = 10.0);
    ~RemoteTopicDetector() override;

    std::vector<int> boundaries(const std::string& session_id,
                                const std::vector<std::string>& prompts) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Detector selection: explicit URL beats the heuristic; the
// ENGAGE_TOPIC_DETECTOR_URL environment variable beats both.
std::unique_ptr<TopicDetector> make_detector(const SegmentationConfig& config,
                                             const std::string& configured_url,
                                             double timeout_s = 10.0);

}  // namespace engage
