#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "san/checkpoint.hpp"
#include "san/dataset.hpp"
#include "san/filters.hpp"
#include "san/nn.hpp"

namespace san {

enum class StreamMode { TwoStream, OriginalOnly, AggregatedOnly };

std::string stream_mode_name(StreamMode m);
StreamMode stream_mode_from_name(const std::string& s);

struct DetectorConfig {
  int input_size = 64;  // divisible by 8
  int K = 5;
  std::vector<int> feature_channels = {12, 24, 24, 48};  // last entry = C
  int convs_per_block = 2;
  int head_channels = 40;
  double sigma_gt = 1.5;  // heatmap cells
  StreamMode stream_mode = StreamMode::TwoStream;
  double lr = 2e-3;
  double weight_decay = 5e-4;
  std::vector<int> lr_drop_epochs = {26, 31};  // 1-based epochs where lr halves
  double lr_drop_factor = 0.5;
  int epochs = 34;
  int batch = 4;
  double expand_ratio = 0.2;
  bool augment = true;
  bool adam = true;  // false: SGD momentum 0.9

  static DetectorConfig desk_preset();
  // Paper-scale settings kept as a named preset: lr 5e-5, batch 8, weight
  // decay 5e-4, 50 epochs with halving at 30/35/40/45.
  static DetectorConfig paper_preset();

  int heatmap_size() const { return input_size / 8; }
  double lr_at_epoch(int epoch_1based) const;
  void validate() const;
};

template <typename T>
struct BeliefStacksT {
  TensorT<T> h_o, h_s, h_2, h_3;
};

// Shared-structure feature extractor for one stream; the two streams hold
// separate weights. Four blocks, the first three followed by a pool; each
// block holds convs_per_block 3x3 convs.
template <typename T>
struct StreamExtractorT {
  std::vector<std::vector<ConvLayer<T>>> blocks;
  TensorT<T> forward(const TensorT<T>& x, TapeT<T>* tape) const;
};

template <typename T>
struct StageHeadT {
  std::vector<ConvLayer<T>> convs;  // all but the last followed by relu
  TensorT<T> forward(const TensorT<T>& x, TapeT<T>* tape) const;
};

// Two-stream three-stage cascade. Stage 1 maps each stream's features to
// per-stream belief maps; stage 2 fuses concat(F_o, F_s, H_o, H_s); stage 3
// consumes concat(F_o, F_s, H_2). Every stage output is (K+1) x h/8 x w/8.
template <typename T>
struct DetectorModelT {
  DetectorConfig cfg;
  StreamExtractorT<T> ext_o, ext_s;
  StageHeadT<T> stage1_o, stage1_s, stage2, stage3;

  static DetectorModelT init(const DetectorConfig& cfg, Rng& rng);
  BeliefStacksT<T> forward(const TensorT<T>& img_o, const TensorT<T>& img_s,
                           TapeT<T>* tape) const;
  nn::ParamList<T> named_params();
};

using DetectorModel = DetectorModelT<float>;

// Ideal belief maps H*: channel k = exp(-||p - x_k/8||^2 / (2 sigma^2)) on
// the heatmap grid, background channel = 1 - max_k. Invisible landmarks give
// an all-zero channel; out-of-bounds landmarks are clamped to the border and
// counted in clamped_count.
template <typename T>
TensorT<T> make_gt_beliefmaps(const std::vector<Pt>& landmarks_crop,
                              const std::vector<bool>& visibility, int input_size,
                              double sigma_gt, int* clamped_count = nullptr);

template <typename T>
TensorT<T> detector_loss(const BeliefStacksT<T>& stacks, const TensorT<T>& target,
                         TapeT<T>* tape);

// Bicubic-upsamples each landmark channel to input_size^2 and takes the
// argmax cell (ties to the smallest row-major index). Background channel
// ignored. Accepts [K+1,h,w] or [1,K+1,h,w].
std::vector<Pt> decode_landmarks(const Tensor& h3, int input_size);

struct DetectorEpochLog {
  int epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
};

struct DetectorTrainResult {
  DetectorModel model;
  std::vector<DetectorEpochLog> log;
};

// Per-sample pipeline: expand-0.2 crop -> random-crop augment -> H* ->
// forward -> stage-sum loss -> optimizer step. The same crop window is
// applied to the original and the aggregated image. `aggregated` may be null
// in original-only mode.
DetectorTrainResult train_detector(const DatasetManifest& train,
                                   const DatasetManifest* aggregated, const DetectorConfig& cfg,
                                   uint64_t seed);

// Landmarks in original-image coordinates for one record.
std::vector<Pt> predict_landmarks(const DetectorModel& model, const RgbImage& img_o,
                                  const RgbImage* img_s, const Box& box);

void write_detector_log_csv(const std::vector<DetectorEpochLog>& log, const std::string& path);

Checkpoint detector_checkpoint(DetectorModel& m);
DetectorModel detector_from_checkpoint(const DetectorConfig& cfg, const Checkpoint& ck);

}  // namespace san
