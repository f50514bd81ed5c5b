#pragma once

#include <string>

#include <httplib.h>

#include "hwloc/app.hpp"

namespace hwloc {

// Registers POST /locate. The handler only reads res, so httplib's worker
// threads can run requests concurrently.
inline void install_routes(httplib::Server& server, const Resources& res) {
  server.Post("/locate", [&res](const httplib::Request& req, httplib::Response& resp) {
    const Response r = handle_locate(res, req.body);
    resp.status = r.status;
    resp.set_content(r.body, "application/json");
  });
}

}  // namespace hwloc
