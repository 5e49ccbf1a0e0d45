#include "harmony/service.hpp"

#include <cctype>
#include <cmath>
#include <filesystem>

#include "httplib.h"

#include "harmony/error.hpp"

namespace fs = std::filesystem;

namespace harmony {

struct EditorService::Session {
    std::mutex mu;
    BenchmarkSample sample;
    std::vector<LabeledRegion> regions;
    OperatorMaskSet initial;
    OperatorMaskSet current;
    std::vector<nlohmann::json> history;
};

namespace {

bool valid_id(const std::string& id) {
    if (id.empty() || id.size() > 200 || id.find("..") != std::string::npos) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
}

// Blue-white-red, white at `neutral`; |v - neutral| >= span saturates.
std::array<float, 3> diverging(double v, double neutral, double span) {
    const double t = std::clamp((v - neutral) / span, -1.0, 1.0);
    if (t >= 0) return {1.0f, static_cast<float>(1.0 - t), static_cast<float>(1.0 - t)};
    return {static_cast<float>(1.0 + t), static_cast<float>(1.0 + t), 1.0f};
}

double region_mean(std::span<const double> plane, const RegionMask& mask) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) {
            sum += plane[i];
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

int status_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::MissingFile: return 404;
        case ErrorCode::InvalidArgument:
        case ErrorCode::UnknownChannel:
        case ErrorCode::DimensionMismatch: return 422;
        default: return 500;
    }
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    res.set_header("Access-Control-Allow-Origin", "*");
    try {
        fn();
    } catch (const ServiceError& e) {
        res.status = e.status();
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    } catch (const Error& e) {
        res.status = status_for(e);
        res.set_content(nlohmann::json{{"error", e.what()}, {"code", to_string(e.code())}}.dump(), "application/json");
    } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    }
}

[[noreturn]] void unprocessable(const std::string& why) { throw ServiceError(422, why); }

}  // namespace

EditorService::EditorService(ServiceConfig cfg) : cfg_(std::move(cfg)) {
    if (!cfg_.export_dir) cfg_.export_dir = (fs::path(cfg_.session_root) / "exports").string();
}

EditorService::~EditorService() = default;

std::shared_ptr<EditorService::Session> EditorService::session(const std::string& id) {
    if (!valid_id(id)) throw ServiceError(404, "unknown session '" + id + "'");
    std::lock_guard lock(sessions_mu_);
    if (auto it = sessions_.find(id); it != sessions_.end()) return it->second;

    if (!fs::exists(fs::path(cfg_.session_root) / "composite" / (id + ".png"))) {
        throw ServiceError(404, "unknown session '" + id + "'");
    }
    auto s = std::make_shared<Session>();
    s->sample = load_sample(cfg_.session_root, id);
    s->regions = regions_from_records(s->sample.labels, s->sample.records);
    HarmonizeOptions opts;
    opts.mode = cfg_.mode;
    opts.fit = cfg_.fit;
    opts.target = &s->sample.real;
    auto result = harmonize(s->sample.composite, s->regions, opts);
    s->initial = result.masks;
    s->current = std::move(result.masks);
    sessions_.emplace(id, s);
    return s;
}

nlohmann::json EditorService::list_sessions() const {
    return {{"sessions", list_samples(cfg_.session_root)}};
}

nlohmann::json EditorService::session_info(const std::string& id) {
    auto s = session(id);
    std::lock_guard lock(s->mu);
    const ColorSpace space = s->current.space();
    nlohmann::json channels = nlohmann::json::array();
    for (int c = 0; c < 3; ++c) channels.push_back(channel_name(space, c));

    nlohmann::json regions = nlohmann::json::array();
    for (const auto& r : s->regions) {
        nlohmann::json sliders = nlohmann::json::object();
        for (int c = 0; c < 3; ++c) {
            sliders[std::string(channel_name(space, c))] = {{"mul", region_mean(s->current.mul(c), r.mask)},
                                                            {"add", region_mean(s->current.add(c), r.mask)}};
        }
        regions.push_back({{"label", r.label}, {"area", r.mask.count()}, {"sliders", sliders}});
    }
    return {{"id", id},
            {"width", s->current.width()},
            {"height", s->current.height()},
            {"space", to_string(space)},
            {"mode", to_string(cfg_.mode)},
            {"channels", channels},
            {"regions", regions},
            {"edit_count", s->history.size()},
            {"history", s->history},
            {"dirty", !(s->current == s->initial)},
            {"preview", "/preview/" + id}};
}

std::vector<unsigned char> EditorService::preview_png(const std::string& id) {
    auto s = session(id);
    std::lock_guard lock(s->mu);
    return encode_png(apply(s->sample.composite, s->current));
}

std::vector<unsigned char> EditorService::composite_png(const std::string& id) {
    auto s = session(id);
    std::lock_guard lock(s->mu);
    return encode_png(s->sample.composite);
}

std::vector<unsigned char> EditorService::mask_png(const std::string& id, const std::string& op_name,
                                                   const std::string& channel_name_or_index) {
    auto s = session(id);
    std::lock_guard lock(s->mu);
    MaskOp op;
    int channel;
    try {
        op = mask_op_from_string(op_name);
        channel = channel_index(s->current.space(), channel_name_or_index);
    } catch (const Error& e) {
        unprocessable(e.what());
    }
    const auto plane = s->current.plane(op, channel);
    const double neutral = op == MaskOp::Mul ? 1.0 : 0.0;
    double span = op == MaskOp::Mul ? 0.5 : 10.0;
    if (s->current.space() == ColorSpace::HLS && op == MaskOp::Add) span = channel == 0 ? 60.0 : 0.25;
    ImageBuf img(s->current.width(), s->current.height());
    for (std::size_t i = 0; i < plane.size(); ++i) img.set_pixel(i, diverging(plane[i], neutral, span));
    return encode_png(img);
}

MaskEdit EditorService::parse_edit(const nlohmann::json& body, ColorSpace space,
                                   const std::vector<LabeledRegion>& regions) {
    if (!body.is_object()) unprocessable("edit body must be a JSON object");
    MaskEdit edit;
    try {
        const auto& ch = body.at("channel");
        edit.channel = ch.is_number_integer() ? channel_index(space, std::to_string(ch.get<int>()))
                                              : channel_index(space, ch.get<std::string>());
        edit.op = mask_op_from_string(body.at("op").get<std::string>());
        const auto& region = body.contains("region") ? body.at("region") : nlohmann::json("all");
        if (region.is_string() && region.get<std::string>() == "all") {
            edit.region_label.reset();
        } else if (region.is_number_integer()) {
            edit.region_label = region.get<int>();
        } else {
            unprocessable("region must be a label id or \"all\"");
        }
        const auto& value = body.contains("value") ? body.at("value") : body.at("delta");
        edit.value = value.get<double>();
    } catch (const nlohmann::json::exception& e) {
        unprocessable(std::string("malformed edit: ") + e.what());
    } catch (const Error& e) {
        unprocessable(e.what());
    }
    if (!std::isfinite(edit.value)) unprocessable("edit value must be finite");
    if (edit.op == MaskOp::Mul && !(edit.value > 0.0)) unprocessable("mul edits need a positive gain");
    if (edit.region_label) {
        const bool known = std::any_of(regions.begin(), regions.end(),
                                       [&](const LabeledRegion& r) { return r.label == *edit.region_label; });
        if (!known) unprocessable("region " + std::to_string(*edit.region_label) + " is not part of this session");
    }
    return edit;
}

nlohmann::json EditorService::apply_edit(const std::string& id, const nlohmann::json& body) {
    auto s = session(id);
    {
        std::lock_guard lock(s->mu);
        const MaskEdit e = parse_edit(body, s->current.space(), s->regions);
        std::optional<RegionMask> region;
        if (e.region_label) {
            for (const auto& r : s->regions) {
                if (r.label == *e.region_label) region = r.mask;
            }
        }
        s->current = edit(s->current, e.channel, e.op, region, e.value);
        s->history.push_back({{"channel", channel_name(s->current.space(), e.channel)},
                              {"op", to_string(e.op)},
                              {"region", e.region_label ? nlohmann::json(*e.region_label) : nlohmann::json("all")},
                              {"value", e.value}});
    }
    return session_info(id);
}

nlohmann::json EditorService::export_masks(const std::string& id) {
    auto s = session(id);
    std::lock_guard lock(s->mu);
    std::error_code ec;
    fs::create_directories(*cfg_.export_dir, ec);
    if (ec) fail(ErrorCode::Io, "cannot create export directory: " + ec.message());
    const std::string path = (fs::path(*cfg_.export_dir) / (id + ".omsk")).string();
    save_masks(s->current, path);
    return {{"id", id}, {"path", path}, {"edit_count", s->history.size()}};
}

OperatorMaskSet EditorService::current_masks(const std::string& id) {
    auto s = session(id);
    std::lock_guard lock(s->mu);
    return s->current;
}

void EditorService::mount(httplib::Server& server) {
    server.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { res.set_content(list_sessions().dump(), "application/json"); });
    });
    server.Get(R"(/session/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { res.set_content(session_info(req.matches[1]).dump(), "application/json"); });
    });
    server.Get(R"(/preview/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto png = preview_png(req.matches[1]);
            res.set_content(std::string(png.begin(), png.end()), "image/png");
        });
    });
    server.Get(R"(/composite/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto png = composite_png(req.matches[1]);
            res.set_content(std::string(png.begin(), png.end()), "image/png");
        });
    });
    server.Get(R"(/mask/([^/]+)/([^/]+)/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto png = mask_png(req.matches[1], req.matches[2], req.matches[3]);
            res.set_content(std::string(png.begin(), png.end()), "image/png");
        });
    });
    server.Post(R"(/edit/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            nlohmann::json body;
            try {
                body = nlohmann::json::parse(req.body);
            } catch (const nlohmann::json::exception& e) {
                unprocessable(std::string("edit body is not JSON: ") + e.what());
            }
            res.set_content(apply_edit(req.matches[1], body).dump(), "application/json");
        });
    });
    server.Post(R"(/export/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { res.set_content(export_masks(req.matches[1]).dump(), "application/json"); });
    });
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
}

}  // namespace harmony
