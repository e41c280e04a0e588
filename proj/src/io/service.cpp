#include "relux/io/service.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "relux/error.hpp"
#include "relux/io/png.hpp"
#include "relux/log.hpp"

namespace relux::io {

using nlohmann::json;

namespace {

HttpResponse error(int status, const std::string& message) {
    return {status, "application/json", json{{"error", message}}.dump()};
}

HttpResponse png_response(const Image& linear, double exposure) {
    const auto bytes = encode_png(tonemap_to_srgb8(linear, exposure));
    return {200, "image/png", std::string(bytes.begin(), bytes.end())};
}

double finite_number(const json& j, const char* what) {
    if (!j.is_number()) throw InvalidArgument(std::string(what) + " must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be finite");
    return v;
}

std::vector<double> number_array(const json& j, std::size_t n, const char* what) {
    if (!j.is_array() || j.size() != n)
        throw InvalidArgument(std::string(what) + " must be an array of " + std::to_string(n) + " numbers");
    std::vector<double> out;
    for (const auto& v : j) out.push_back(finite_number(v, what));
    return out;
}

double read_exposure(const json& req) {
    if (!req.contains("exposure")) return 1.0;
    const double e = finite_number(req.at("exposure"), "exposure");
    if (e < 0.0) throw InvalidArgument("exposure must be nonnegative");
    return e;
}

json parse_object(const std::string& body) {
    json req = json::parse(body, nullptr, /*allow_exceptions=*/false);
    if (req.is_discarded()) throw InvalidArgument("request body is not valid JSON");
    if (!req.is_object()) throw InvalidArgument("request body must be a JSON object");
    return req;
}

olat::OlatStack preview_stack(olat::OlatStack stack, int max_side) {
    stack.validate();
    for (auto& img : stack.basis) img = downscale_to(img, max_side);
    return stack;
}

olat::HdriImage preview_hdri(const olat::HdriImage& hdri, int max_side) {
    const Image small = downscale_to(hdri.image(), max_side);
    if (small.width() == 2 * small.height()) return olat::HdriImage(small);
    // Integer box factors can break the 2:1 ratio by one column; crop it back.
    const int h = std::min(small.height(), small.width() / 2);
    Image fixed(2 * h, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < 2 * h; ++x)
            for (int c = 0; c < Image::kChannels; ++c) fixed.at(x, y, c) = small.at(x, y, c);
    return olat::HdriImage(fixed);
}

}  // namespace

PreviewService::PreviewService(olat::OlatStack stack, std::vector<std::pair<std::string, olat::HdriImage>> hdris,
                               const ServiceOptions& options)
    : stack_(preview_stack(std::move(stack), options.max_side)), index_(stack_.layout) {
    for (auto& [id, hdri] : hdris) hdris_.emplace_back(id, preview_hdri(hdri, options.hdri_max_side));
}

HttpResponse PreviewService::get_stack() const {
    json lights = json::array();
    for (const auto& d : stack_.layout.directions) {
        const LatLong uv = dir_to_latlong(d);
        lights.push_back({uv.u, uv.v});
    }
    return {200, "application/json",
            json{{"lights", stack_.size()}, {"width", stack_.width()}, {"height", stack_.height()}, {"latlong", lights}}
                .dump()};
}

HttpResponse PreviewService::get_hdris() const {
    json ids = json::array();
    for (const auto& h : hdris_) ids.push_back(h.first);
    return {200, "application/json", ids.dump()};
}

HttpResponse PreviewService::post_relight(const std::string& body) const {
    try {
        const json req = parse_object(body);
        if (!req.contains("lights") || !req.at("lights").is_array()) throw InvalidArgument("lights must be an array");
        const auto& lights = req.at("lights");
        if (lights.empty()) throw InvalidArgument("lights must not be empty");
        std::vector<Rgb> weights(stack_.size(), Rgb{});
        for (const auto& l : lights) {
            if (!l.is_object() || !l.contains("latlong") || !l.contains("rgb"))
                throw InvalidArgument("each light needs latlong and rgb");
            const auto uv = number_array(l.at("latlong"), 2, "latlong");
            if (uv[0] < 0.0 || uv[0] > 1.0 || uv[1] < 0.0 || uv[1] > 1.0)
                throw InvalidArgument("latlong coordinates must lie in [0, 1]");
            const auto rgb = number_array(l.at("rgb"), 3, "rgb");
            const Rgb c{rgb[0], rgb[1], rgb[2]};
            if (!c.nonnegative()) throw InvalidArgument("rgb must be nonnegative");
            auto& w = weights[index_.nearest(latlong_to_dir(uv[0], uv[1]))];
            w = w + c;
        }
        return png_response(olat::composite_weights(stack_, weights), read_exposure(req));
    } catch (const InvalidArgument& e) {
        return error(400, e.what());
    }
}

HttpResponse PreviewService::post_relight_hdri(const std::string& body) const {
    try {
        const json req = parse_object(body);
        if (!req.contains("id") || !req.at("id").is_string()) throw InvalidArgument("id must be a string");
        const auto id = req.at("id").get<std::string>();
        const double rotation = req.contains("rotation_deg") ? finite_number(req.at("rotation_deg"), "rotation_deg") : 0.0;
        const double exposure = read_exposure(req);
        for (const auto& [name, hdri] : hdris_) {
            if (name != id) continue;
            const auto lighting = olat::hdri_to_lights(hdri, stack_.layout, rotation);
            std::vector<Rgb> weights;
            weights.reserve(lighting.lights.size());
            for (const auto& l : lighting.lights) weights.push_back(l.intensity);
            return png_response(olat::composite_weights(stack_, weights), exposure);
        }
        return error(404, "unknown hdri id '" + id + "'");
    } catch (const InvalidArgument& e) {
        return error(400, e.what());
    }
}

HttpResponse PreviewService::handle(const std::string& method, const std::string& path, const std::string& body) const {
    if (method == "GET" && path == "/api/stack") return get_stack();
    if (method == "GET" && path == "/api/hdris") return get_hdris();
    if (method == "POST" && path == "/api/relight") return post_relight(body);
    if (method == "POST" && path == "/api/relight-hdri") return post_relight_hdri(body);
    return error(404, "no route for " + method + " " + path);
}

void PreviewService::serve(const std::string& host, int port,
                           const std::function<void(std::function<void()>)>& on_bound) const {
    httplib::Server server;
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
        const auto out = handle(req.method, req.path, req.body);
        res.status = out.status;
        res.set_content(out.body, out.content_type);
        log::debug(fmt::format("{} {} -> {}", req.method, req.path, out.status));
    };
    server.Get(R"(/api/.*)", route);
    server.Post(R"(/api/.*)", route);
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) res.set_content(json{{"error", "not found"}}.dump(), "application/json");
    });
    // The library default is SO_REUSEPORT, which lets a second instance share the port silently.
    server.set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    if (!server.bind_to_port(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    log::info(fmt::format("serving {} lights at {}x{} on {}:{}", stack_.size(), stack_.width(), stack_.height(), host, port));
    if (on_bound) on_bound([&server] { server.stop(); });
    server.listen_after_bind();
}

}  // namespace relux::io
