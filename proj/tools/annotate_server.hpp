#pragma once

// HTTP backend of the GCP annotation tool.
//
//   GET  /healthz
//   GET  /gcps                          GCPs with their projection in every image
//   GET  /patch?gcp=..&image=..&size=.. stretched PNG window centered on the projection
//   POST /annotations                   {gcp_id, image_id, row, col, status}
//   GET  /annotations?gcp=..            saved records of one GCP

#include <map>
#include <mutex>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "satdepth/correspondence.hpp"
#include "satdepth/ingest.hpp"

namespace httplib {
class Server;
}

namespace satdepth::cli {

struct AnnotateConfig {
  /// Tile root: images and RPBs under DSM_Cropped_Images, annotations under gcp/annotations.
  std::string tile;
  /// GCP list; `<tile>/gcp/gcps.csv` when empty.
  std::string gcps;
  std::string host = "127.0.0.1";
  int port = 8080;
  int patch_size = 512;
  double stretch_lo = 2.0;
  double stretch_hi = 98.0;
};

class AnnotateServer {
public:
  explicit AnnotateServer(AnnotateConfig cfg);
  ~AnnotateServer();

  /// Binds (port 0 picks a free one) and returns the bound port.
  int bind();
  /// Blocks until stop().
  void listen();
  /// bind() + listen() on a background thread.
  int start_background();
  void stop();

  const std::vector<std::string>& images() const { return image_ids_; }

private:
  void routes();
  const Image& image(const std::string& id);

  AnnotateConfig cfg_;
  TileLayout layout_;
  std::vector<GcpRecord> gcps_;
  std::vector<std::string> image_ids_;
  std::map<std::string, Camera> cams_;
  std::map<std::string, Image> images_;
  std::mutex images_mutex_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace satdepth::cli
