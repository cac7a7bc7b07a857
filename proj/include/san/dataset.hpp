#pragma once

#include <optional>
#include <string>
#include <vector>

#include "san/geometry.hpp"
#include "san/image.hpp"
#include "san/rng.hpp"

namespace san {

struct LandmarkAnnotation {
  std::vector<Pt> points;      // original-image pixel coordinates
  std::vector<bool> visibility;

  int K() const { return static_cast<int>(points.size()); }
};

struct FaceRecord {
  std::string image_path;  // relative to the manifest directory
  Box box;
  LandmarkAnnotation annotation;
  std::string style_tag;  // optional
};

struct DatasetManifest {
  std::string name;
  std::string split;  // train | test
  std::string style;  // original | light | gray | sketch | synthetic-mixed
  int K = 0;
  std::vector<FaceRecord> records;
  std::string base_dir;  // directory of the manifest file, set on read

  std::string resolve(const std::string& rel) const;
};

// JSON manifest I/O. Validation covers required fields, landmark count
// consistency, finite coordinates and well-ordered boxes. Writes are atomic
// (temp file + rename) and byte-deterministic.
DatasetManifest read_manifest(const std::string& path);
void write_manifest(const DatasetManifest& m, const std::string& path);

// Seeded shuffle, then split at floor(n * train_fraction). Disjoint and
// exhaustive.
std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& m,
                                                          double train_fraction, uint64_t seed);

// Applies each style filter to every record image; images land in
// out_root/<style>/images, manifests in out_root/<style>/<split>.json.
// Annotations are copied unchanged, record order preserved.
std::vector<DatasetManifest> generate_styled_dataset(const DatasetManifest& m,
                                                     const std::string& out_root);

// Union of manifests with per-record style tags; all inputs must agree on K.
DatasetManifest concat_manifests(const std::vector<DatasetManifest>& parts,
                                 const std::string& name);

// pts-style sidecar files: "version: 1 / n_points: K / { / x y ... / }".
LandmarkAnnotation read_pts(const std::string& path);
void write_pts(const LandmarkAnnotation& ann, const std::string& path);

// --------------------------------------------------------------------------
// Procedural synthetic faces
// --------------------------------------------------------------------------

struct SynthParams {
  int image_size = 96;
  int count = 600;
  // K = 5 landmarks: left/right outer eye corners, nose tip, mouth corners.
};

struct SynthFace {
  RgbImage image;
  FaceRecord record;  // image_path left empty; box and landmarks filled
};

// Renders one anti-aliased parametric face. Deterministic given the seed;
// landmarks are the exact analytic feature positions used by the renderer.
SynthFace synth_face(const SynthParams& params, uint64_t seed);

// Renders `count` faces (seed + index each), writes PNGs + manifest under
// out_dir. Returns the manifest.
DatasetManifest generate_synth_dataset(const SynthParams& params, uint64_t seed,
                                       const std::string& out_dir, const std::string& name,
                                       const std::string& split);

constexpr int kSynthK = 5;
constexpr int kSynthLeftEye = 0;   // outer corner
constexpr int kSynthRightEye = 1;  // outer corner
constexpr int kSynthNose = 2;
constexpr int kSynthMouthL = 3;
constexpr int kSynthMouthR = 4;

}  // namespace san
