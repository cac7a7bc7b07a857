#include "san/detector.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "san/optim.hpp"

namespace san {

std::string stream_mode_name(StreamMode m) {
  switch (m) {
    case StreamMode::TwoStream: return "two-stream";
    case StreamMode::OriginalOnly: return "original-only";
    case StreamMode::AggregatedOnly: return "aggregated-only";
  }
  return "two-stream";
}

StreamMode stream_mode_from_name(const std::string& s) {
  if (s == "two-stream") return StreamMode::TwoStream;
  if (s == "original-only") return StreamMode::OriginalOnly;
  if (s == "aggregated-only") return StreamMode::AggregatedOnly;
  throw std::runtime_error("unknown stream mode '" + s +
                           "' (expected two-stream|original-only|aggregated-only)");
}

DetectorConfig DetectorConfig::desk_preset() { return DetectorConfig{}; }

DetectorConfig DetectorConfig::paper_preset() {
  DetectorConfig cfg;
  cfg.feature_channels = {16, 32, 32, 64};
  cfg.head_channels = 48;
  cfg.lr = 5e-5;
  cfg.weight_decay = 5e-4;
  cfg.lr_drop_epochs = {30, 35, 40, 45};
  cfg.lr_drop_factor = 0.5;
  cfg.epochs = 50;
  cfg.batch = 8;
  cfg.adam = false;
  return cfg;
}

double DetectorConfig::lr_at_epoch(int epoch_1based) const {
  double v = lr;
  for (int drop : lr_drop_epochs)
    if (epoch_1based >= drop) v *= lr_drop_factor;
  return v;
}

void DetectorConfig::validate() const {
  check(input_size % 8 == 0, "detector input_size must be divisible by 8");
  check(K >= 2, "detector needs K >= 2 landmarks");
  check(feature_channels.size() == 4, "detector expects 4 feature-extractor channel counts");
  check(sigma_gt > 0.0, "sigma_gt must be positive");
  check(batch >= 1 && epochs >= 0, "invalid batch/epochs");
}

template <typename T>
TensorT<T> StreamExtractorT<T>::forward(const TensorT<T>& x, TapeT<T>* tape) const {
  // center [0,1] inputs
  auto h = scale_shift(x, T(2), T(-1), tape);
  for (size_t b = 0; b < blocks.size(); ++b) {
    for (const auto& conv : blocks[b]) h = relu(conv(h, tape), tape);
    if (b + 1 < blocks.size()) h = max_pool2(h, tape);
  }
  return h;
}

template <typename T>
TensorT<T> StageHeadT<T>::forward(const TensorT<T>& x, TapeT<T>* tape) const {
  TensorT<T> h = x;
  for (size_t i = 0; i < convs.size(); ++i) {
    h = convs[i](h, tape);
    if (i + 1 < convs.size()) h = relu(h, tape);
  }
  return h;
}

template <typename T>
DetectorModelT<T> DetectorModelT<T>::init(const DetectorConfig& cfg, Rng& rng) {
  cfg.validate();
  DetectorModelT<T> m;
  m.cfg = cfg;
  const auto& fc = cfg.feature_channels;
  const int C = fc[3];
  const int K1 = cfg.K + 1;
  const int hc = cfg.head_channels;
  auto make_extractor = [&]() {
    StreamExtractorT<T> e;
    int in_ch = 3;
    for (int b = 0; b < 4; ++b) {
      std::vector<ConvLayer<T>> block;
      for (int i = 0; i < std::max(1, cfg.convs_per_block); ++i) {
        block.push_back(nn::conv_he<T>(rng, in_ch, fc[static_cast<size_t>(b)], 3, 1, 1));
        in_ch = fc[static_cast<size_t>(b)];
      }
      e.blocks.push_back(std::move(block));
    }
    return e;
  };
  auto make_head = [&](int in_ch, int layers) {
    StageHeadT<T> h;
    for (int i = 0; i < layers; ++i) {
      const int ci = i == 0 ? in_ch : hc;
      const int co = i == layers - 1 ? K1 : hc;
      h.convs.push_back(nn::conv_head<T>(rng, ci, co, 3, 1, 1));
    }
    return h;
  };
  m.ext_o = make_extractor();
  m.ext_s = make_extractor();
  m.stage1_o = make_head(C, 2);
  m.stage1_s = make_head(C, 2);
  m.stage2 = make_head(2 * C + 2 * K1, 3);
  m.stage3 = make_head(2 * C + K1, 3);
  return m;
}

template <typename T>
BeliefStacksT<T> DetectorModelT<T>::forward(const TensorT<T>& img_o, const TensorT<T>& img_s,
                                            TapeT<T>* tape) const {
  const TensorT<T>& in_o = cfg.stream_mode == StreamMode::AggregatedOnly ? img_s : img_o;
  const TensorT<T>& in_s = cfg.stream_mode == StreamMode::OriginalOnly ? img_o : img_s;
  check(in_o.defined() && in_s.defined(), "detector forward: missing input stream");
  check(in_o.ndim() == 4 && in_o.dim(2) == cfg.input_size && in_o.dim(3) == cfg.input_size,
        "detector forward: original stream must be [N,3," + std::to_string(cfg.input_size) +
            "," + std::to_string(cfg.input_size) + "], got " + in_o.shape_str());
  check(in_s.shape() == in_o.shape(), "detector forward: stream shape mismatch " +
                                          in_o.shape_str() + " vs " + in_s.shape_str());
  BeliefStacksT<T> out;
  const auto f_o = ext_o.forward(in_o, tape);
  const auto f_s = ext_s.forward(in_s, tape);
  out.h_o = stage1_o.forward(f_o, tape);
  out.h_s = stage1_s.forward(f_s, tape);
  out.h_2 = stage2.forward(concat_channels<T>({f_o, f_s, out.h_o, out.h_s}, tape), tape);
  out.h_3 = stage3.forward(concat_channels<T>({f_o, f_s, out.h_2}, tape), tape);
  return out;
}

template <typename T>
nn::ParamList<T> DetectorModelT<T>::named_params() {
  nn::ParamList<T> p;
  auto ext = [&](const std::string& prefix, StreamExtractorT<T>& e) {
    for (size_t b = 0; b < e.blocks.size(); ++b)
      for (size_t i = 0; i < e.blocks[b].size(); ++i)
        nn::collect(p, prefix + ".b" + std::to_string(b) + ".c" + std::to_string(i),
                    e.blocks[b][i]);
  };
  auto head = [&](const std::string& prefix, StageHeadT<T>& h) {
    for (size_t i = 0; i < h.convs.size(); ++i)
      nn::collect(p, prefix + ".conv" + std::to_string(i), h.convs[i]);
  };
  ext("ext_o", ext_o);
  ext("ext_s", ext_s);
  head("stage1_o", stage1_o);
  head("stage1_s", stage1_s);
  head("stage2", stage2);
  head("stage3", stage3);
  return p;
}

template struct StreamExtractorT<float>;
template struct StreamExtractorT<double>;
template struct StageHeadT<float>;
template struct StageHeadT<double>;
template struct DetectorModelT<float>;
template struct DetectorModelT<double>;

template <typename T>
TensorT<T> make_gt_beliefmaps(const std::vector<Pt>& landmarks_crop,
                              const std::vector<bool>& visibility, int input_size,
                              double sigma_gt, int* clamped_count) {
  check(input_size % 8 == 0, "make_gt_beliefmaps: input_size must be divisible by 8");
  const int K = static_cast<int>(landmarks_crop.size());
  check(static_cast<int>(visibility.size()) == K, "make_gt_beliefmaps: visibility mismatch");
  const int hs = input_size / 8;
  TensorT<T> out = TensorT<T>::zeros({K + 1, hs, hs});
  auto d = out.mutable_data();
  const double denom = 2.0 * sigma_gt * sigma_gt;
  int clamped = 0;
  for (int k = 0; k < K; ++k) {
    if (!visibility[static_cast<size_t>(k)]) continue;  // all-zero channel
    double cx = landmarks_crop[static_cast<size_t>(k)].x;
    double cy = landmarks_crop[static_cast<size_t>(k)].y;
    if (cx < 0.0 || cy < 0.0 || cx >= input_size || cy >= input_size) {
      cx = std::clamp(cx, 0.0, static_cast<double>(input_size) - 1.0);
      cy = std::clamp(cy, 0.0, static_cast<double>(input_size) - 1.0);
      ++clamped;
    }
    const double hx = cx / 8.0, hy = cy / 8.0;
    for (int r = 0; r < hs; ++r)
      for (int c = 0; c < hs; ++c) {
        const double dx = c - hx, dy = r - hy;
        d[(static_cast<int64_t>(k) * hs + r) * hs + c] =
            static_cast<T>(std::exp(-(dx * dx + dy * dy) / denom));
      }
  }
  // background = 1 - max_k
  for (int r = 0; r < hs; ++r)
    for (int c = 0; c < hs; ++c) {
      T mx = 0;
      for (int k = 0; k < K; ++k)
        mx = std::max(mx, d[(static_cast<int64_t>(k) * hs + r) * hs + c]);
      d[(static_cast<int64_t>(K) * hs + r) * hs + c] = T(1) - mx;
    }
  if (clamped_count) *clamped_count += clamped;
  return out;
}

template Tensor make_gt_beliefmaps<float>(const std::vector<Pt>&, const std::vector<bool>&, int,
                                          double, int*);
template DTensor make_gt_beliefmaps<double>(const std::vector<Pt>&, const std::vector<bool>&,
                                            int, double, int*);

template <typename T>
TensorT<T> detector_loss(const BeliefStacksT<T>& stacks, const TensorT<T>& target,
                         TapeT<T>* tape) {
  auto l = add(frobenius_sq_loss(stacks.h_o, target, tape),
               frobenius_sq_loss(stacks.h_s, target, tape), tape);
  l = add(l, frobenius_sq_loss(stacks.h_2, target, tape), tape);
  return add(l, frobenius_sq_loss(stacks.h_3, target, tape), tape);
}

template Tensor detector_loss<float>(const BeliefStacksT<float>&, const Tensor&, Tape*);
template DTensor detector_loss<double>(const BeliefStacksT<double>&, const DTensor&, DTape*);

namespace {

double catmull_rom_w(double t) {
  t = std::fabs(t);
  if (t <= 1.0) return (1.5 * t - 2.5) * t * t + 1.0;
  if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
  return 0.0;
}

// Up to 4 taps per output coordinate, shared by both axes.
struct AxisTaps {
  int idx[4];
  double w[4];
  int n;
};

// Sampling at u = j/stride lines pixel 8k up with heat cell k, matching the
// grid convention of the ideal belief maps (x_k/8 on integer cells). The band
// beyond the last cell (u > hs-1) has no neighbors on the right, and either
// single extrapolant misbehaves there: edge-clamped cubic raises a spurious
// bump that can outvote a peak in the last interior cell, while the quadratic
// through the last three cells can run away when the peak sits past the
// boundary. Evaluating the band with both and keeping the pointwise min
// suppresses whichever artifact inflates.
std::vector<AxisTaps> axis_taps_cr(int hs, int input_size) {
  const double stride = static_cast<double>(input_size) / hs;
  std::vector<AxisTaps> taps(static_cast<size_t>(input_size));
  for (int j = 0; j < input_size; ++j) {
    const double u = j / stride;
    AxisTaps& t = taps[static_cast<size_t>(j)];
    const int base = std::min(static_cast<int>(std::floor(u)), hs - 1);
    t.n = 4;
    for (int m = -1; m <= 2; ++m) {
      t.idx[m + 1] = std::clamp(base + m, 0, hs - 1);
      t.w[m + 1] = catmull_rom_w(u - (base + m));
    }
  }
  return taps;
}

std::vector<AxisTaps> axis_taps_quad_tail(int hs, int input_size) {
  std::vector<AxisTaps> taps = axis_taps_cr(hs, input_size);
  if (hs < 3) return taps;
  const double stride = static_cast<double>(input_size) / hs;
  for (int j = 0; j < input_size; ++j) {
    const double u = j / stride;
    if (u <= hs - 1) continue;
    // Lagrange basis on nodes hs-3, hs-2, hs-1
    const double a = hs - 3, b = hs - 2, c = hs - 1;
    AxisTaps& t = taps[static_cast<size_t>(j)];
    t.n = 3;
    t.idx[0] = hs - 3;
    t.idx[1] = hs - 2;
    t.idx[2] = hs - 1;
    t.w[0] = (u - b) * (u - c) / ((a - b) * (a - c));
    t.w[1] = (u - a) * (u - c) / ((b - a) * (b - c));
    t.w[2] = (u - a) * (u - b) / ((c - a) * (c - b));
  }
  return taps;
}

void upsample_heatmap(const float* src, int hs, float* dst, int input_size) {
  const std::vector<AxisTaps> cr = axis_taps_cr(hs, input_size);
  const std::vector<AxisTaps> qt = axis_taps_quad_tail(hs, input_size);
  const int interior_end = (hs - 1) * input_size / hs;  // largest j with u <= hs-1
  auto eval_1d = [&](const float* line, int64_t stride_el, int j) {
    const AxisTaps& a = cr[static_cast<size_t>(j)];
    double v = 0.0;
    for (int k = 0; k < a.n; ++k) v += a.w[k] * line[a.idx[k] * stride_el];
    if (j > interior_end && hs >= 3) {
      const AxisTaps& b = qt[static_cast<size_t>(j)];
      double q = 0.0;
      for (int k = 0; k < b.n; ++k) q += b.w[k] * line[b.idx[k] * stride_el];
      v = std::min(v, q);
    }
    return v;
  };
  // rows, then columns; the min combine stays per-axis
  std::vector<float> tmp(static_cast<size_t>(hs) * input_size);
  for (int r = 0; r < hs; ++r)
    for (int j = 0; j < input_size; ++j)
      tmp[static_cast<size_t>(r) * input_size + j] =
          static_cast<float>(eval_1d(src + static_cast<int64_t>(r) * hs, 1, j));
  for (int i = 0; i < input_size; ++i)
    for (int j = 0; j < input_size; ++j)
      dst[static_cast<int64_t>(i) * input_size + j] =
          static_cast<float>(eval_1d(tmp.data() + j, input_size, i));
}

}  // namespace

std::vector<Pt> decode_landmarks(const Tensor& h3, int input_size) {
  Tensor stack = h3;
  if (stack.ndim() == 4) {
    check(stack.dim(0) == 1, "decode_landmarks expects a single image stack");
    stack = Tensor::from_values({stack.dim(1), stack.dim(2), stack.dim(3)},
                                {stack.data().begin(), stack.data().end()});
  }
  check(stack.ndim() == 3, "decode_landmarks expects [K+1,h,w], got " + stack.shape_str());
  const int K = stack.dim(0) - 1;
  const int hs = stack.dim(1);
  std::vector<Pt> out(static_cast<size_t>(K));
  const auto d = stack.data();
#pragma omp parallel for schedule(static)
  for (int k = 0; k < K; ++k) {
    std::vector<float> up(static_cast<size_t>(input_size) * input_size);
    upsample_heatmap(d.data() + static_cast<int64_t>(k) * hs * hs, hs, up.data(), input_size);
    int64_t best = 0;
    for (int64_t i = 1; i < static_cast<int64_t>(up.size()); ++i)
      if (up[static_cast<size_t>(i)] > up[static_cast<size_t>(best)]) best = i;
    out[static_cast<size_t>(k)] = {static_cast<double>(best % input_size),
                                   static_cast<double>(best / input_size)};
  }
  return out;
}

namespace {

struct Sample {
  RgbImage original;
  RgbImage aggregated;  // unused in original-only mode
  Box box;
  std::vector<Pt> landmarks;
  std::vector<bool> visibility;
};

Tensor stack_images(const std::vector<Tensor>& parts) {
  const int c = parts[0].dim(1), h = parts[0].dim(2), w = parts[0].dim(3);
  Tensor out = Tensor::zeros({static_cast<int>(parts.size()), c, h, w});
  auto d = out.mutable_data();
  const int64_t sz = parts[0].numel();
  for (size_t i = 0; i < parts.size(); ++i) {
    auto s = parts[i].data();
    std::copy(s.begin(), s.end(), d.begin() + static_cast<int64_t>(i) * sz);
  }
  return out;
}

Tensor stack_gt(const std::vector<Tensor>& parts) {
  const int c = parts[0].dim(0), h = parts[0].dim(1), w = parts[0].dim(2);
  Tensor out = Tensor::zeros({static_cast<int>(parts.size()), c, h, w});
  auto d = out.mutable_data();
  const int64_t sz = parts[0].numel();
  for (size_t i = 0; i < parts.size(); ++i) {
    auto s = parts[i].data();
    std::copy(s.begin(), s.end(), d.begin() + static_cast<int64_t>(i) * sz);
  }
  return out;
}

}  // namespace

DetectorTrainResult train_detector(const DatasetManifest& train,
                                   const DatasetManifest* aggregated, const DetectorConfig& cfg,
                                   uint64_t seed) {
  cfg.validate();
  check(train.K == cfg.K, "train_detector: manifest K=" + std::to_string(train.K) +
                              " does not match config K=" + std::to_string(cfg.K));
  const bool needs_agg = cfg.stream_mode != StreamMode::OriginalOnly;
  if (needs_agg) {
    check(aggregated != nullptr, "train_detector: aggregated manifest required for " +
                                     stream_mode_name(cfg.stream_mode));
    check(aggregated->records.size() == train.records.size(),
          "train_detector: aggregated manifest is not record-aligned with the train manifest");
  }

  // preload
  std::vector<Sample> samples(train.records.size());
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < static_cast<int64_t>(train.records.size()); ++i) {
    const auto& r = train.records[static_cast<size_t>(i)];
    Sample s;
    s.original = read_png(train.resolve(r.image_path));
    if (needs_agg)
      s.aggregated =
          read_png(aggregated->resolve(aggregated->records[static_cast<size_t>(i)].image_path));
    s.box = r.box;
    s.landmarks = r.annotation.points;
    s.visibility = r.annotation.visibility;
    samples[static_cast<size_t>(i)] = std::move(s);
  }

  Rng init_rng(derive_seed(seed, "detector-init"));
  DetectorModel model = DetectorModel::init(cfg, init_rng);
  auto params = model.named_params();
  OptimConfig ocfg = cfg.adam ? OptimConfig::adam(cfg.lr, cfg.weight_decay)
                              : OptimConfig::sgd(cfg.lr, 0.9, cfg.weight_decay);
  Optimizer opt(nn::tensors_of(params), ocfg);

  Rng shuffle_rng(derive_seed(seed, "detector-shuffle"));
  std::vector<size_t> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  DetectorTrainResult res;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    opt.set_lr(cfg.lr_at_epoch(epoch));
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    int batches = 0;
    for (size_t lo = 0; lo < order.size(); lo += static_cast<size_t>(cfg.batch)) {
      const size_t hi = std::min(order.size(), lo + static_cast<size_t>(cfg.batch));
      std::vector<Tensor> ios, iss, gts;
      for (size_t i = lo; i < hi; ++i) {
        const Sample& s = samples[order[i]];
        Rng aug_rng(derive_seed(seed, "detector-aug",
                                static_cast<uint64_t>(epoch) * 1000003ULL + order[i]));
        const Box window = cfg.augment ? sample_crop_window(s.box, cfg.expand_ratio, aug_rng)
                                       : expanded_box(s.box, cfg.expand_ratio);
        CropResult crop_o = crop_window(s.original, window, cfg.input_size);
        ios.push_back(image_to_tensor(crop_o.image));
        if (needs_agg) {
          CropResult crop_s = crop_window(s.aggregated, window, cfg.input_size);
          iss.push_back(image_to_tensor(crop_s.image));
        }
        const std::vector<Pt> lms = crop_o.to_crop.apply(s.landmarks);
        gts.push_back(make_gt_beliefmaps<float>(lms, s.visibility, cfg.input_size, cfg.sigma_gt));
      }
      const Tensor io = stack_images(ios);
      const Tensor is = needs_agg ? stack_images(iss) : io;
      const Tensor gt = stack_gt(gts);
      Tape tape;
      auto stacks = model.forward(io, is, &tape);
      Tensor loss = detector_loss(stacks, gt, &tape);
      check(std::isfinite(loss.item()), "train_detector: loss diverged");
      loss_sum += loss.item();
      ++batches;
      opt.zero_grad();
      tape.backward(loss);
      opt.step();
    }
    res.log.push_back({epoch, opt.lr(), loss_sum / std::max(1, batches)});
  }
  res.model = std::move(model);
  return res;
}

std::vector<Pt> predict_landmarks(const DetectorModel& model, const RgbImage& img_o,
                                  const RgbImage* img_s, const Box& box) {
  const auto& cfg = model.cfg;
  const Box window = expanded_box(box, cfg.expand_ratio);
  CropResult crop_o = crop_window(img_o, window, cfg.input_size);
  Tensor io = image_to_tensor(crop_o.image);
  Tensor is = io;
  if (cfg.stream_mode != StreamMode::OriginalOnly) {
    check(img_s != nullptr, "predict_landmarks: aggregated image required");
    CropResult crop_s = crop_window(*img_s, window, cfg.input_size);
    is = image_to_tensor(crop_s.image);
  }
  const auto stacks = model.forward(io, is, nullptr);
  const std::vector<Pt> crop_pts = decode_landmarks(stacks.h_3, cfg.input_size);
  return crop_o.to_crop.inverse().apply(crop_pts);
}

void write_detector_log_csv(const std::vector<DetectorEpochLog>& log, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  check(f.good(), "write_detector_log_csv: cannot open '" + path + "'");
  f << "epoch,lr,mean_loss\n";
  char buf[96];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.8g,%.8f\n", r.epoch, r.lr, r.mean_loss);
    f << buf;
  }
}

Checkpoint detector_checkpoint(DetectorModel& m) {
  auto params = m.named_params();
  return save_named_params(params);
}

DetectorModel detector_from_checkpoint(const DetectorConfig& cfg, const Checkpoint& ck) {
  Rng rng(0);
  DetectorModel m = DetectorModel::init(cfg, rng);
  auto params = m.named_params();
  load_named_params(ck, params);
  return m;
}

}  // namespace san
