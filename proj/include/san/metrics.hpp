#pragma once

#include <functional>
#include <string>
#include <vector>

#include "san/dataset.hpp"
#include "san/detector.hpp"

namespace san {

enum class NmeNormalizer { Interocular, FaceSize };

std::string normalizer_name(NmeNormalizer n);
NmeNormalizer normalizer_from_name(const std::string& s);

struct EvalConfig {
  NmeNormalizer normalizer = NmeNormalizer::Interocular;
  int interocular_left = 0;   // outer-eye-corner landmark indices
  int interocular_right = 1;
  double ced_grid_max = 0.12;
  double ced_grid_step = 0.001;
  double auc_threshold = 0.08;

  std::vector<double> ced_grid() const;
};

// Distance between the configured outer-eye-corner landmarks of the ground
// truth.
double interocular_distance(const LandmarkAnnotation& gt, int left_idx, int right_idx);

// sqrt(w * h) of the unexpanded box.
double face_size_normalizer(const Box& box);

// Mean Euclidean error over visible landmarks divided by the normalizer.
double nme(const std::vector<Pt>& pred, const LandmarkAnnotation& gt, double normalizer);

struct EvalResult {
  std::vector<double> nmes;  // per image
  std::string normalizer;
  std::string dataset_name;
  std::string detector_name;
  std::vector<std::string> image_paths;

  double mean_nme() const;
};

struct CedCurve {
  std::vector<double> grid;      // ascending error thresholds
  std::vector<double> fraction;  // |{nme_i <= e}| / n, nondecreasing in [0,1]
};

CedCurve ced_curve(const std::vector<double>& nme_list, const std::vector<double>& grid);

// Trapezoidal integral of the CED polyline over [0, threshold], divided by
// threshold. The grid must cover [0, threshold].
double auc_at(const CedCurve& ced, double threshold = 0.08);

// Runs the detector over a test manifest. `aggregated` may be null for
// original-only models. Batches run in parallel over an immutable model.
EvalResult evaluate_detector(const DetectorModel& model, const DatasetManifest& test,
                             const DatasetManifest* aggregated, const EvalConfig& cfg);

// One style's train/test manifests plus their aggregated counterparts.
struct StyleSet {
  std::string style;
  DatasetManifest train, test;
  DatasetManifest train_agg, test_agg;  // may be empty for base-only runs
  bool has_agg = false;
};

using DetectorFactory = std::function<DetectorTrainResult(
    const DatasetManifest& train, const DatasetManifest* aggregated, StreamMode mode,
    uint64_t seed)>;

// Rows are test styles, columns train styles (paper table layout).
struct StyleMatrix {
  std::vector<std::string> styles;
  std::vector<std::string> variants;              // e.g. {"san-wo-gan", "san"}
  std::vector<std::vector<std::vector<double>>> nme;  // [variant][test][train], NaN = failed
  std::vector<std::vector<double>> improvement;       // (base - san) / base, per cell

  double cell(int variant, int test_style, int train_style) const {
    return nme[static_cast<size_t>(variant)][static_cast<size_t>(test_style)]
              [static_cast<size_t>(train_style)];
  }
  double mean_off_diagonal(int variant) const;
  double row_off_diagonal_mean(int variant, int test_style) const;
};

// Trains one detector per (variant, train style) and evaluates it on all
// test styles. Cell seeds derive from the master seed by (variant, style)
// so cells are independent and the whole matrix is deterministic. A training
// failure marks the row of cells NaN and the run continues.
StyleMatrix cross_style_matrix(const DetectorFactory& factory,
                               const std::vector<StyleSet>& styles,
                               const std::vector<StreamMode>& variants, uint64_t seed,
                               const EvalConfig& eval_cfg);

}  // namespace san
