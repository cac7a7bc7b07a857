#pragma once

#include <functional>
#include <string>
#include <vector>

#include "san/checkpoint.hpp"
#include "san/dataset.hpp"
#include "san/nn.hpp"

namespace san {

// Encoder-decoder generator: full-resolution conv, two pooled downsampling
// stages, residual middle blocks, nearest-neighbor-upsample decoding, tanh
// output mapped to [0,1]. Fully convolutional, so inference runs at any
// spatial size divisible by 4; output size always equals input size.
template <typename T>
struct GeneratorT {
  int base_channels = 8;
  int res_blocks = 2;
  ConvLayer<T> enc0, enc1, enc2;
  NormLayer<T> n0, n1, n2;
  std::vector<ConvLayer<T>> res_conv1, res_conv2;
  std::vector<NormLayer<T>> res_n1, res_n2;
  ConvLayer<T> dec1, dec2, out;
  NormLayer<T> dn1, dn2;

  static GeneratorT init(int base_channels, int res_blocks, Rng& rng);
  TensorT<T> forward(const TensorT<T>& x, TapeT<T>* tape) const;
  nn::ParamList<T> named_params(const std::string& prefix = "");
};

// Patch-level discriminator producing a spatial map of real/fake scores at
// 1/4 resolution.
template <typename T>
struct DiscriminatorT {
  int base_channels = 16;
  ConvLayer<T> c0, c1, c2;
  NormLayer<T> n1;

  static DiscriminatorT init(int base_channels, Rng& rng);
  TensorT<T> forward(const TensorT<T>& x, TapeT<T>* tape) const;
  nn::ParamList<T> named_params(const std::string& prefix = "");
};

using Generator = GeneratorT<float>;
using Discriminator = DiscriminatorT<float>;

struct CycleTrainConfig {
  double lambda_cycle = 10.0;
  double lambda_identity_rel = 0.1;  // identity weight = lambda_cycle * this
  int batch = 4;
  double lr = 2e-4;
  int iterations = 300;
  uint64_t seed = 0;
  int image_size = 64;
  int base_channels = 8;
  int res_blocks = 2;
  int disc_channels = 16;
  int log_interval = 10;
};

template <typename T>
struct CycleLossParts {
  TensorT<T> adv_a, adv_b;  // generator-side least-squares terms
  TensorT<T> cycle, identity;
  TensorT<T> total_g;
};

template <typename T>
using ApplyFnT = std::function<TensorT<T>(const TensorT<T>&, TapeT<T>*)>;

// Least-squares adversarial terms (fake -> 1 for the generator), cycle
// reconstruction and identity L1 terms, combined generator loss
//   total = adv_a + adv_b + lambda_cyc * cycle
//         + lambda_cyc * lambda_idt_rel * identity
template <typename T>
CycleLossParts<T> cycle_losses(const ApplyFnT<T>& g_ab, const ApplyFnT<T>& g_ba,
                               const ApplyFnT<T>& d_a, const ApplyFnT<T>& d_b,
                               const TensorT<T>& batch_a, const TensorT<T>& batch_b,
                               double lambda_cycle, double lambda_identity_rel,
                               TapeT<T>* tape);

struct CycleLogRow {
  int iteration = 0;
  double adv = 0.0, cycle = 0.0, identity = 0.0, d_a = 0.0, d_b = 0.0;
};

struct CycleTrainResult {
  Generator g_ab;  // cluster A style -> cluster B style
  Generator g_ba;
  Discriminator d_a, d_b;
  std::vector<CycleLogRow> log;
};

// Alternating D/G updates with Adam(beta1=0.5); deterministic given the seed.
// Images are [1,3,S,S] tensors from the two style clusters.
CycleTrainResult train_cycle_generators(const std::vector<Tensor>& images_a,
                                        const std::vector<Tensor>& images_b,
                                        const CycleTrainConfig& cfg);

// I_s = clamp(mean(G_toA(I), G_toB(I))). Runs at native resolution (padded
// to a multiple of 4 by resize when necessary).
RgbImage aggregate_style(const RgbImage& img, const Generator& g_to_a, const Generator& g_to_b);

// Writes the style-aggregated image for every record to out_dir/images,
// copies annotations unchanged, preserves record order.
DatasetManifest precompute_aggregated_manifest(const DatasetManifest& m, const Generator& g_to_a,
                                               const Generator& g_to_b,
                                               const std::string& out_dir);

void write_cycle_log_csv(const std::vector<CycleLogRow>& log, const std::string& path);

Checkpoint generator_checkpoint(Generator& g);
Generator generator_from_checkpoint(const Checkpoint& ck, int base_channels, int res_blocks);

}  // namespace san
