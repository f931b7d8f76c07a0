#include "ums/sim/euroc_export.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>

#include "ums/core/error.hpp"
#include "ums/io/png.hpp"
#include "ums/sim/generate.hpp"

namespace ums {
namespace {

namespace fs = std::filesystem;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_for_write(const fs::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) {
    raise(ErrorCode::IoError, "cannot open for writing: " + path.string());
  }
  return file;
}

int64_t to_nanoseconds(double seconds) {
  return static_cast<int64_t>(std::llround(seconds * 1e9));
}

void write_value(std::FILE* f, double v) { std::fprintf(f, ",%.17g", v); }

}  // namespace

void export_euroc(GroundTruthBundle& bundle, const std::string& directory) {
  bool missing_images = false;
  for (const SimFrame& frame : bundle.frames) {
    if (frame.left_image.data.empty() || frame.right_image.data.empty()) {
      missing_images = true;
      break;
    }
  }
  if (missing_images || bundle.frames.empty()) {
    render_images(bundle);
  }

  const fs::path root(directory);
  const fs::path mav = root / "mav0";
  const fs::path imu_dir = mav / "imu0";
  const fs::path cam0_dir = mav / "cam0";
  const fs::path cam1_dir = mav / "cam1";
  const fs::path gt_dir = mav / "state_groundtruth_estimate0";
  std::error_code ec;
  for (const fs::path& dir :
       {imu_dir, cam0_dir / "data", cam1_dir / "data", gt_dir}) {
    fs::create_directories(dir, ec);
    if (ec) {
      raise(ErrorCode::IoError,
            "cannot create directory " + dir.string() + ": " + ec.message());
    }
  }

  {
    FilePtr f = open_for_write(imu_dir / "data.csv");
    std::fprintf(f.get(),
                 "#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y [rad s^-1],"
                 "w_RS_S_z [rad s^-1],a_RS_S_x [m s^-2],a_RS_S_y [m s^-2],"
                 "a_RS_S_z [m s^-2]\n");
    for (const ImuSample& s : bundle.imu) {
      std::fprintf(f.get(), "%" PRId64, to_nanoseconds(s.t));
      for (int k = 0; k < 3; ++k) write_value(f.get(), s.gyro[k]);
      for (int k = 0; k < 3; ++k) write_value(f.get(), s.accel[k]);
      std::fprintf(f.get(), "\n");
    }
  }

  for (int cam = 0; cam < 2; ++cam) {
    const fs::path& cam_dir = cam == 0 ? cam0_dir : cam1_dir;
    FilePtr f = open_for_write(cam_dir / "data.csv");
    std::fprintf(f.get(), "#timestamp [ns],filename\n");
    for (const SimFrame& frame : bundle.frames) {
      const int64_t ns = to_nanoseconds(frame.t);
      std::fprintf(f.get(), "%" PRId64 ",%" PRId64 ".png\n", ns, ns);
      const Image& image = cam == 0 ? frame.left_image : frame.right_image;
      write_png((cam_dir / "data" / (std::to_string(ns) + ".png")).string(), image);
    }
  }

  {
    FilePtr f = open_for_write(gt_dir / "data.csv");
    std::fprintf(f.get(),
                 "#timestamp [ns],p_RS_R_x [m],p_RS_R_y [m],p_RS_R_z [m],"
                 "q_RS_w [],q_RS_x [],q_RS_y [],q_RS_z [],"
                 "v_RS_R_x [m s^-1],v_RS_R_y [m s^-1],v_RS_R_z [m s^-1],"
                 "b_w_RS_S_x [rad s^-1],b_w_RS_S_y [rad s^-1],"
                 "b_w_RS_S_z [rad s^-1],b_a_RS_S_x [m s^-2],"
                 "b_a_RS_S_y [m s^-2],b_a_RS_S_z [m s^-2]\n");
    for (size_t i = 0; i < bundle.frame_times.size(); ++i) {
      const KeyframeState& state = bundle.frame_states[i];
      std::fprintf(f.get(), "%" PRId64, to_nanoseconds(bundle.frame_times[i]));
      for (int k = 0; k < 3; ++k) write_value(f.get(), state.p[k]);
      const Eigen::Quaterniond& q = state.q.quat();
      write_value(f.get(), q.w());
      write_value(f.get(), q.x());
      write_value(f.get(), q.y());
      write_value(f.get(), q.z());
      for (int k = 0; k < 3; ++k) write_value(f.get(), state.v[k]);
      for (int k = 0; k < 3; ++k) write_value(f.get(), bundle.planted_gyro_bias[k]);
      for (int k = 0; k < 3; ++k) write_value(f.get(), bundle.planted_accel_bias[k]);
      std::fprintf(f.get(), "\n");
    }
  }

  {
    FilePtr f = open_for_write(root / "calibration.cfg");
    const StereoRig& rig = bundle.rig;
    std::fprintf(f.get(), "# Stereo rig used to generate this dataset.\n");
    for (int cam = 0; cam < 2; ++cam) {
      const CameraIntrinsics& c = cam == 0 ? rig.left : rig.right;
      const char* name = cam == 0 ? "cam0" : "cam1";
      std::fprintf(f.get(), "%s.fx = %.17g\n", name, c.fx);
      std::fprintf(f.get(), "%s.fy = %.17g\n", name, c.fy);
      std::fprintf(f.get(), "%s.cx = %.17g\n", name, c.cx);
      std::fprintf(f.get(), "%s.cy = %.17g\n", name, c.cy);
      std::fprintf(f.get(), "%s.width = %d\n", name, c.width);
      std::fprintf(f.get(), "%s.height = %d\n", name, c.height);
      std::fprintf(f.get(), "%s.k1 = %.17g\n", name, c.k1);
      std::fprintf(f.get(), "%s.k2 = %.17g\n", name, c.k2);
      std::fprintf(f.get(), "%s.p1 = %.17g\n", name, c.p1);
      std::fprintf(f.get(), "%s.p2 = %.17g\n", name, c.p2);
    }
    const auto print_transform = [&](const char* key, const Transform& T) {
      const Eigen::Quaterniond& q = T.r.quat();
      std::fprintf(f.get(), "%s = %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                   key, T.t.x(), T.t.y(), T.t.z(), q.w(), q.x(), q.y(), q.z());
    };
    print_transform("extrinsics.T_body_cam0", rig.T_body_left);
    print_transform("extrinsics.T_cam0_cam1", rig.T_left_right);
  }
}

}  // namespace ums
