#include "engage/topic_detector.hpp"

#include <cstdlib>

#include "httplib.h"
#include "json.hpp"

namespace engage {

using nlohmann::json;

struct RemoteTopicDetector::Impl {
    std::string host;  // scheme://host:port
    std::string path;
    double timeout_s;
};

namespace {

// Splits "http://host:port/path" into client target and request path.
std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    size_t path_start = url.find('/', scheme_end == std::string::npos
                                          ? 0
                                          : scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

RemoteTopicDetector::RemoteTopicDetector(const std::string& url, double timeout_s)
    : impl_(new Impl) {
    auto [host, path] = split_url(url);
    impl_->host = host;
    impl_->path = path;
    impl_->timeout_s = timeout_s;
}

RemoteTopicDetector::~RemoteTopicDetector() = default;

std::vector<int> RemoteTopicDetector::boundaries(
    const std::string& session_id, const std::vector<std::string>& prompts) {
    json body;
    body["session_id"] = session_id;
    body["prompts"] = prompts;

    httplib::Client client(impl_->host);
    auto sec = static_cast<time_t>(impl_->timeout_s);
    auto usec = static_cast<time_t>((impl_->timeout_s - sec) * 1e6);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);

    auto res = client.Post(impl_->path, body.dump(), "application/json");
    if (!res)
        throw RemoteDetectorUnavailable("topic detector unreachable: " + impl_->host);
    if (res->status < 200 || res->status >= 300)
        throw RemoteDetectorUnavailable("topic detector returned status " +
                                        std::to_string(res->status));
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("boundaries") ||
        !reply["boundaries"].is_array())
        throw RemoteDetectorUnavailable("topic detector sent malformed reply");
    std::vector<int> out;
    for (const auto& b : reply["boundaries"]) {
        if (!b.is_number_integer())
            throw RemoteDetectorUnavailable("topic detector sent non-integer gap");
        int gap = b.get<int>();
        if (gap < 1 || gap >= static_cast<int>(prompts.size()))
            throw RemoteDetectorUnavailable("topic detector sent out-of-range gap " +
                                            std::to_string(gap));
        out.push_back(gap);
    }
    return out;
}

std::unique_ptr<TopicDetector> make_detector(const SegmentationConfig& config,
                                             const std::string& configured_url,
                                             double timeout_s) {
    std::string url = configured_url;
    if (const char* env = std::getenv("ENGAGE_TOPIC_DETECTOR_URL"); env && *env)
        url = env;
    if (!url.empty())
        return std::make_unique<RemoteTopicDetector>(url, timeout_s);
    return std::make_unique<HeuristicDetector>(config.heuristic_similarity_threshold);
}

}  // namespace engage
