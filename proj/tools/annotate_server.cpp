#include "annotate_server.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <json.hpp>

#include "cli_io.hpp"
#include "png.hpp"
#include "satdepth/text.hpp"

namespace satdepth::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void send_json(httplib::Response& res, const json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, {{"error", message}}, status);
}

json record_json(const AnnotationRecord& r) {
  json j = {{"gcp_id", r.gcp_id},
            {"image_id", r.image_id},
            {"status", r.status == AnnotationStatus::Annotated ? "annotated" : "cannot_annotate"}};
  j["row"] = r.pixel ? json(r.pixel->row) : json(nullptr);
  j["col"] = r.pixel ? json(r.pixel->col) : json(nullptr);
  return j;
}

}  // namespace

AnnotateServer::AnnotateServer(AnnotateConfig cfg) : cfg_(std::move(cfg)), layout_{cfg_.tile} {
  if (cfg_.gcps.empty()) cfg_.gcps = cfg_.tile + "/gcp/gcps.csv";
  if (cfg_.patch_size < 1) throw DomainError("serve-annotate: patch size must be positive");
  gcps_ = parse_gcps(text::read_file(cfg_.gcps));
  if (!fs::is_directory(layout_.images_dir()))
    throw FormatError("serve-annotate: missing '" + layout_.images_dir() + "'");
  for (const auto& e : fs::directory_iterator(layout_.images_dir())) {
    const auto ext = e.path().extension().string();
    if (ext == ".RPB" || ext == ".rpb") image_ids_.push_back(e.path().stem().string());
  }
  std::sort(image_ids_.begin(), image_ids_.end());
  for (const auto& id : image_ids_) cams_[id] = read_camera(layout_.images_dir() + "/" + id + ".RPB");
  server_ = std::make_unique<httplib::Server>();
  routes();
}

AnnotateServer::~AnnotateServer() { stop(); }

const Image& AnnotateServer::image(const std::string& id) {
  std::lock_guard<std::mutex> g(images_mutex_);
  auto it = images_.find(id);
  if (it != images_.end()) return it->second;
  const std::string path = find_raster(layout_.images_dir(), id);
  if (path.empty()) throw FormatError("no image raster for '" + id + "'");
  return images_.emplace(id, read_image(path)).first->second;
}

void AnnotateServer::routes() {
  auto& s = *server_;
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  s.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  s.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok\n", "text/plain"); });

  s.Get("/gcps", [this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& g : gcps_) {
      std::map<std::string, const AnnotationRecord*> done;
      std::vector<AnnotationRecord> recs;
      if (fs::exists(layout_.annotation_csv(g.gcp_id))) recs = read_annotations(layout_.annotation_csv(g.gcp_id));
      for (const auto& r : recs) done[r.image_id] = &r;
      json imgs = json::array();
      for (const auto& id : image_ids_) {
        json e = {{"image_id", id}};
        try {
          const PixelPoint x = project(cams_.at(id), g.position);
          e["projected_row"] = x.row;
          e["projected_col"] = x.col;
        } catch (const DenominatorError&) {
          e["projected_row"] = nullptr;
          e["projected_col"] = nullptr;
        }
        const auto d = done.find(id);
        e["annotated"] = d != done.end();
        e["status"] = d != done.end() ? record_json(*d->second)["status"] : json(nullptr);
        imgs.push_back(std::move(e));
      }
      out.push_back({{"gcp_id", g.gcp_id},
                     {"lat", g.position.lat},
                     {"lon", g.position.lon},
                     {"h", g.position.h},
                     {"images", std::move(imgs)}});
    }
    send_json(res, out);
  });

  s.Get("/patch", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string gid = req.get_param_value("gcp"), iid = req.get_param_value("image");
    const auto g = std::find_if(gcps_.begin(), gcps_.end(), [&](const GcpRecord& r) { return r.gcp_id == gid; });
    if (g == gcps_.end()) return send_error(res, 404, "unknown gcp '" + gid + "'");
    if (!cams_.count(iid)) return send_error(res, 404, "unknown image '" + iid + "'");
    int p = cfg_.patch_size;
    if (req.has_param("size")) {
      double v = 0;
      if (!text::parse_real(req.get_param_value("size"), v) || v < 1 || v > 4096 || v != std::floor(v))
        return send_error(res, 400, "size must be an integer in [1, 4096]");
      p = int(v);
    }
    PixelPoint x;
    try {
      x = project(cams_.at(iid), g->position);
    } catch (const DenominatorError& e) {
      return send_error(res, 422, e.what());
    }
    const Image& img = image(iid);
    // Window origin so that the projected pixel sits at (p/2, p/2).
    const long r0 = std::lround(x.row) - p / 2, c0 = std::lround(x.col) - p / 2;
    Image win = Image::Constant(p, p, std::numeric_limits<float>::quiet_NaN());
    for (int r = 0; r < p; ++r)
      for (int c = 0; c < p; ++c) {
        const long sr = r0 + r, sc = c0 + c;
        if (sr >= 0 && sc >= 0 && sr < img.rows() && sc < img.cols()) win(r, c) = img(sr, sc);
      }
    res.set_header("X-Patch-Origin", std::to_string(r0) + "," + std::to_string(c0));
    res.set_content(encode_png_gray8(percentile_stretch(win, cfg_.stretch_lo, cfg_.stretch_hi), p, p), "image/png");
  });

  s.Get("/annotations", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string gid = req.get_param_value("gcp");
    if (std::none_of(gcps_.begin(), gcps_.end(), [&](const GcpRecord& r) { return r.gcp_id == gid; }))
      return send_error(res, 404, "unknown gcp '" + gid + "'");
    json out = json::array();
    if (fs::exists(layout_.annotation_csv(gid)))
      for (const auto& r : read_annotations(layout_.annotation_csv(gid))) out.push_back(record_json(r));
    send_json(res, out);
  });

  s.Post("/annotations", [this](const httplib::Request& req, httplib::Response& res) {
    AnnotationRecord rec;
    try {
      const json j = json::parse(req.body);
      rec.gcp_id = j.at("gcp_id").get<std::string>();
      rec.image_id = j.at("image_id").get<std::string>();
      const std::string status = j.value("status", std::string("annotated"));
      if (status == "annotated") {
        rec.status = AnnotationStatus::Annotated;
        rec.pixel = PixelPoint{j.at("row").get<double>(), j.at("col").get<double>()};
        if (!std::isfinite(rec.pixel->row) || !std::isfinite(rec.pixel->col))
          return send_error(res, 400, "row/col must be finite");
      } else if (status == "cannot_annotate") {
        rec.status = AnnotationStatus::CannotAnnotate;
        if ((j.contains("row") && !j["row"].is_null()) || (j.contains("col") && !j["col"].is_null()))
          return send_error(res, 400, "row/col must be absent for cannot_annotate");
      } else {
        return send_error(res, 400, "unknown status '" + status + "'");
      }
    } catch (const json::exception& e) {
      return send_error(res, 400, std::string("bad annotation body: ") + e.what());
    }
    if (std::none_of(gcps_.begin(), gcps_.end(), [&](const GcpRecord& r) { return r.gcp_id == rec.gcp_id; }))
      return send_error(res, 404, "unknown gcp '" + rec.gcp_id + "'");
    if (!cams_.count(rec.image_id)) return send_error(res, 404, "unknown image '" + rec.image_id + "'");
    append_annotations(layout_.annotation_csv(rec.gcp_id), {rec});
    send_json(res, record_json(rec));
  });

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send_json(res, {{"error", e.what()}, {"kind", e.kind()}}, 500);
    } catch (const std::exception& e) {
      send_json(res, {{"error", e.what()}, {"kind", "internal"}}, 500);
    }
  });
}

int AnnotateServer::bind() {
  if (cfg_.port == 0) return server_->bind_to_any_port(cfg_.host);
  if (!server_->bind_to_port(cfg_.host, cfg_.port))
    throw DomainError("serve-annotate: cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
  return cfg_.port;
}

void AnnotateServer::listen() { server_->listen_after_bind(); }

int AnnotateServer::start_background() {
  const int port = bind();
  if (port <= 0) throw DomainError("serve-annotate: cannot bind " + cfg_.host);
  thread_ = std::thread([this] { listen(); });
  server_->wait_until_ready();
  return port;
}

void AnnotateServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace satdepth::cli
