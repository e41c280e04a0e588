#pragma once

// Preview backend: relights a preloaded OLAT stack on request.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "relux/compositor.hpp"

namespace relux::io {

struct HttpResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

struct ServiceOptions {
    int max_side = 256;       // preview resolution of the stack
    int hdri_max_side = 512;  // HDRIs are reduced before binning
};

/// Request handlers are pure functions of the request and the immutable stack, so they are safe to call
/// concurrently.
class PreviewService {
public:
    PreviewService(olat::OlatStack stack, std::vector<std::pair<std::string, olat::HdriImage>> hdris,
                   const ServiceOptions& options = {});

    HttpResponse get_stack() const;
    HttpResponse get_hdris() const;
    /// {"lights":[{"latlong":[u,v],"rgb":[r,g,b]}],"exposure":1.0}. Each light snaps to its nearest stage light.
    HttpResponse post_relight(const std::string& body) const;
    /// {"id":"studio_01","rotation_deg":90,"exposure":1.0}
    HttpResponse post_relight_hdri(const std::string& body) const;

    /// Routes by method and path; unknown routes give 404.
    HttpResponse handle(const std::string& method, const std::string& path, const std::string& body) const;

    const olat::OlatStack& stack() const { return stack_; }

    /// Blocks serving HTTP on host:port. Throws std::runtime_error when the address cannot be bound.
    /// `on_bound` runs once the socket is bound and receives a callable that makes serve return.
    void serve(const std::string& host, int port,
               const std::function<void(std::function<void()> stop)>& on_bound = {}) const;

private:
    olat::OlatStack stack_;
    std::vector<std::pair<std::string, olat::HdriImage>> hdris_;
    olat::NearestDirectionIndex index_;
};

}  // namespace relux::io
