#include "san/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace san {

std::string normalizer_name(NmeNormalizer n) {
  return n == NmeNormalizer::Interocular ? "interocular" : "face-size";
}

NmeNormalizer normalizer_from_name(const std::string& s) {
  if (s == "interocular") return NmeNormalizer::Interocular;
  if (s == "face-size") return NmeNormalizer::FaceSize;
  throw std::runtime_error("unknown normalizer '" + s + "' (expected interocular|face-size)");
}

std::vector<double> EvalConfig::ced_grid() const {
  std::vector<double> g;
  for (double e = 0.0; e <= ced_grid_max + 1e-12; e += ced_grid_step) g.push_back(e);
  return g;
}

double interocular_distance(const LandmarkAnnotation& gt, int left_idx, int right_idx) {
  check(left_idx >= 0 && left_idx < gt.K() && right_idx >= 0 && right_idx < gt.K(),
        "interocular: landmark index out of range");
  return dist(gt.points[static_cast<size_t>(left_idx)],
              gt.points[static_cast<size_t>(right_idx)]);
}

double face_size_normalizer(const Box& box) { return std::sqrt(box.width() * box.height()); }

double nme(const std::vector<Pt>& pred, const LandmarkAnnotation& gt, double normalizer) {
  check(normalizer > 0.0, "nme: normalizer must be positive");
  check(pred.size() == gt.points.size(), "nme: prediction count mismatch");
  double acc = 0.0;
  int visible = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (!gt.visibility[i]) continue;
    acc += dist(pred[i], gt.points[i]);
    ++visible;
  }
  check(visible > 0, "nme: no visible landmarks");
  return acc / visible / normalizer;
}

double EvalResult::mean_nme() const {
  double acc = 0.0;
  for (double v : nmes) acc += v;
  return nmes.empty() ? 0.0 : acc / static_cast<double>(nmes.size());
}

CedCurve ced_curve(const std::vector<double>& nme_list, const std::vector<double>& grid) {
  check(!nme_list.empty(), "ced_curve: empty error list");
  check(!grid.empty(), "ced_curve: empty grid");
  for (size_t i = 1; i < grid.size(); ++i)
    check(grid[i] > grid[i - 1], "ced_curve: grid must be strictly ascending");
  std::vector<double> sorted = nme_list;
  std::sort(sorted.begin(), sorted.end());
  CedCurve out;
  out.grid = grid;
  out.fraction.reserve(grid.size());
  for (double e : grid) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), e);
    out.fraction.push_back(static_cast<double>(it - sorted.begin()) /
                           static_cast<double>(sorted.size()));
  }
  return out;
}

double auc_at(const CedCurve& ced, double threshold) {
  check(threshold > 0.0, "auc_at: threshold must be positive");
  check(!ced.grid.empty() && ced.grid.front() <= 1e-12 &&
            ced.grid.back() >= threshold - 1e-12,
        "auc_at: grid does not cover [0, threshold]");
  double area = 0.0;
  for (size_t i = 1; i < ced.grid.size(); ++i) {
    double a = ced.grid[i - 1], b = ced.grid[i];
    double fa = ced.fraction[i - 1], fb = ced.fraction[i];
    if (a >= threshold) break;
    if (b > threshold) {
      fb = fa + (fb - fa) * (threshold - a) / (b - a);
      b = threshold;
    }
    area += 0.5 * (fa + fb) * (b - a);
  }
  return area / threshold;
}

EvalResult evaluate_detector(const DetectorModel& model, const DatasetManifest& test,
                             const DatasetManifest* aggregated, const EvalConfig& cfg) {
  const bool needs_agg = model.cfg.stream_mode != StreamMode::OriginalOnly;
  if (needs_agg) {
    check(aggregated != nullptr, "evaluate_detector: aggregated manifest required");
    check(aggregated->records.size() == test.records.size(),
          "evaluate_detector: aggregated manifest is not record-aligned");
  }
  EvalResult res;
  res.normalizer = normalizer_name(cfg.normalizer);
  res.dataset_name = test.name;
  res.detector_name = stream_mode_name(model.cfg.stream_mode);
  res.nmes.assign(test.records.size(), 0.0);
  res.image_paths.resize(test.records.size());
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < static_cast<int64_t>(test.records.size()); ++i) {
    const auto& r = test.records[static_cast<size_t>(i)];
    const RgbImage img_o = read_png(test.resolve(r.image_path));
    RgbImage img_s;
    if (needs_agg)
      img_s = read_png(aggregated->resolve(aggregated->records[static_cast<size_t>(i)].image_path));
    const std::vector<Pt> pred =
        predict_landmarks(model, img_o, needs_agg ? &img_s : nullptr, r.box);
    const double norm =
        cfg.normalizer == NmeNormalizer::Interocular
            ? interocular_distance(r.annotation, cfg.interocular_left, cfg.interocular_right)
            : face_size_normalizer(r.box);
    res.nmes[static_cast<size_t>(i)] = nme(pred, r.annotation, norm);
    res.image_paths[static_cast<size_t>(i)] = r.image_path;
  }
  return res;
}

double StyleMatrix::mean_off_diagonal(int variant) const {
  double acc = 0.0;
  int n = 0;
  for (size_t t = 0; t < styles.size(); ++t)
    for (size_t tr = 0; tr < styles.size(); ++tr) {
      if (t == tr) continue;
      const double v = nme[static_cast<size_t>(variant)][t][tr];
      if (std::isnan(v)) continue;
      acc += v;
      ++n;
    }
  return n ? acc / n : std::numeric_limits<double>::quiet_NaN();
}

double StyleMatrix::row_off_diagonal_mean(int variant, int test_style) const {
  double acc = 0.0;
  int n = 0;
  for (size_t tr = 0; tr < styles.size(); ++tr) {
    if (static_cast<int>(tr) == test_style) continue;
    const double v = nme[static_cast<size_t>(variant)][static_cast<size_t>(test_style)][tr];
    if (std::isnan(v)) continue;
    acc += v;
    ++n;
  }
  return n ? acc / n : std::numeric_limits<double>::quiet_NaN();
}

StyleMatrix cross_style_matrix(const DetectorFactory& factory,
                               const std::vector<StyleSet>& styles,
                               const std::vector<StreamMode>& variants, uint64_t seed,
                               const EvalConfig& eval_cfg) {
  const size_t n = styles.size();
  StyleMatrix m;
  for (const auto& s : styles) m.styles.push_back(s.style);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  m.nme.assign(variants.size(),
               std::vector<std::vector<double>>(n, std::vector<double>(n, nan)));
  for (size_t v = 0; v < variants.size(); ++v) {
    m.variants.push_back(variants[v] == StreamMode::TwoStream ? "san" : "san-wo-gan");
    for (size_t train_style = 0; train_style < n; ++train_style) {
      const uint64_t cell_seed =
          derive_seed(seed, "matrix-" + m.variants[v] + "-" + styles[train_style].style);
      try {
        const StyleSet& ts = styles[train_style];
        const bool needs_agg = variants[v] != StreamMode::OriginalOnly;
        check(!needs_agg || ts.has_agg,
              "cross_style_matrix: aggregated manifests missing for style " + ts.style);
        DetectorTrainResult trained =
            factory(ts.train, needs_agg ? &ts.train_agg : nullptr, variants[v], cell_seed);
        for (size_t test_style = 0; test_style < n; ++test_style) {
          const StyleSet& es = styles[test_style];
          EvalResult r = evaluate_detector(trained.model, es.test,
                                           needs_agg ? &es.test_agg : nullptr, eval_cfg);
          m.nme[v][test_style][train_style] = r.mean_nme();
        }
      } catch (const std::exception& e) {
        // leave the column NaN, run the remaining cells
        fprintf(stderr, "cross_style_matrix: cell (%s, train=%s) failed: %s\n",
                m.variants[v].c_str(), styles[train_style].style.c_str(), e.what());
      }
    }
  }
  if (variants.size() >= 2) {
    m.improvement.assign(n, std::vector<double>(n, nan));
    for (size_t t = 0; t < n; ++t)
      for (size_t tr = 0; tr < n; ++tr) {
        const double base = m.nme[0][t][tr], san = m.nme[1][t][tr];
        if (!std::isnan(base) && !std::isnan(san) && base > 0.0)
          m.improvement[t][tr] = (base - san) / base;
      }
  }
  return m;
}

}  // namespace san
