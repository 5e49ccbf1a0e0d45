#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "harmony/corpus.hpp"
#include "harmony/retouch.hpp"
#include "harmony/solver.hpp"

namespace httplib {
class Server;
}

namespace harmony {

struct ServiceConfig {
    /// Root of persisted samples; session ids are sample ids.
    std::string session_root;
    /// Where POST /export writes; defaults to <session_root>/exports.
    std::optional<std::string> export_dir;
    HarmonizeMode mode = HarmonizeMode::Supervised;
    FitOptions fit{};
};

/// Thrown by EditorService for HTTP-mappable failures.
class ServiceError : public std::runtime_error {
public:
    ServiceError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

struct MaskEdit {
    int channel = 0;
    MaskOp op = MaskOp::Add;
    /// nullopt edits the whole image.
    std::optional<int> region_label;
    double value = 0.0;
};

/// Session-scoped operator-mask editing. A session is created on first access
/// by harmonizing the stored sample; edits stay in memory until exported.
/// Requests on one session are serialized.
///
/// HTTP surface (mount()):
///   GET  /sessions                      ids available under session_root
///   GET  /session/:id                   metadata, regions, per-region slider state
///   GET  /preview/:id                   PNG of the composite retouched by current masks
///   GET  /composite/:id                 PNG of the unretouched composite
///   GET  /mask/:id/:op/:channel         PNG heatmap of one plane
///   POST /edit/:id                      {"channel","op","region","value"}
///   POST /export/:id                    writes <export_dir>/<id>.omsk
/// Errors: 404 unknown session, 422 invalid edit.
class EditorService {
public:
    explicit EditorService(ServiceConfig cfg);
    ~EditorService();

    nlohmann::json list_sessions() const;
    nlohmann::json session_info(const std::string& id);
    std::vector<unsigned char> preview_png(const std::string& id);
    std::vector<unsigned char> composite_png(const std::string& id);
    std::vector<unsigned char> mask_png(const std::string& id, const std::string& op, const std::string& channel);
    nlohmann::json apply_edit(const std::string& id, const nlohmann::json& body);
    nlohmann::json export_masks(const std::string& id);

    /// Current masks of a session (for tests and in-process callers).
    OperatorMaskSet current_masks(const std::string& id);

    /// Parses and validates an edit body against a session. Throws ServiceError(422).
    static MaskEdit parse_edit(const nlohmann::json& body, ColorSpace space, const std::vector<LabeledRegion>& regions);

    void mount(httplib::Server& server);

private:
    struct Session;
    std::shared_ptr<Session> session(const std::string& id);

    ServiceConfig cfg_;
    std::mutex sessions_mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace harmony
