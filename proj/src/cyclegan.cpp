#include "san/cyclegan.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "san/filters.hpp"
#include "san/optim.hpp"

namespace fs = std::filesystem;

namespace san {

template <typename T>
GeneratorT<T> GeneratorT<T>::init(int base_channels, int res_blocks, Rng& rng) {
  GeneratorT<T> g;
  g.base_channels = base_channels;
  g.res_blocks = res_blocks;
  const int c = base_channels;
  g.enc0 = nn::conv_he<T>(rng, 3, c, 3, 1, 1);
  g.n0 = nn::norm<T>(c);
  g.enc1 = nn::conv_he<T>(rng, c, 2 * c, 3, 1, 1);
  g.n1 = nn::norm<T>(2 * c);
  g.enc2 = nn::conv_he<T>(rng, 2 * c, 4 * c, 3, 1, 1);
  g.n2 = nn::norm<T>(4 * c);
  for (int i = 0; i < res_blocks; ++i) {
    g.res_conv1.push_back(nn::conv_he<T>(rng, 4 * c, 4 * c, 3, 1, 1));
    g.res_n1.push_back(nn::norm<T>(4 * c));
    g.res_conv2.push_back(nn::conv_he<T>(rng, 4 * c, 4 * c, 3, 1, 1));
    g.res_n2.push_back(nn::norm<T>(4 * c));
  }
  g.dec1 = nn::conv_he<T>(rng, 4 * c, 2 * c, 3, 1, 1);
  g.dn1 = nn::norm<T>(2 * c);
  g.dec2 = nn::conv_he<T>(rng, 2 * c, c, 3, 1, 1);
  g.dn2 = nn::norm<T>(c);
  g.out = nn::conv_head<T>(rng, c, 3, 3, 1, 1);
  return g;
}

template <typename T>
TensorT<T> GeneratorT<T>::forward(const TensorT<T>& x, TapeT<T>* tape) const {
  check(x.dim(2) % 4 == 0 && x.dim(3) % 4 == 0,
        "generator input dims must be divisible by 4, got " + x.shape_str());
  auto h = relu(n0(enc0(x, tape), tape), tape);
  h = max_pool2(h, tape);
  h = relu(n1(enc1(h, tape), tape), tape);
  h = max_pool2(h, tape);
  h = relu(n2(enc2(h, tape), tape), tape);
  for (size_t i = 0; i < res_conv1.size(); ++i) {
    auto r = relu(res_n1[i](res_conv1[i](h, tape), tape), tape);
    r = res_n2[i](res_conv2[i](r, tape), tape);
    h = add(h, r, tape);
  }
  h = upsample_nearest2(h, tape);
  h = relu(dn1(dec1(h, tape), tape), tape);
  h = upsample_nearest2(h, tape);
  h = relu(dn2(dec2(h, tape), tape), tape);
  auto y = san::tanh(out(h, tape), tape);
  return scale_shift(y, T(0.5), T(0.5), tape);  // [-1,1] -> [0,1]
}

template <typename T>
nn::ParamList<T> GeneratorT<T>::named_params(const std::string& prefix) {
  nn::ParamList<T> p;
  nn::collect(p, prefix + "enc0", enc0);
  nn::collect(p, prefix + "n0", n0);
  nn::collect(p, prefix + "enc1", enc1);
  nn::collect(p, prefix + "n1", n1);
  nn::collect(p, prefix + "enc2", enc2);
  nn::collect(p, prefix + "n2", n2);
  for (size_t i = 0; i < res_conv1.size(); ++i) {
    const std::string rb = prefix + "res" + std::to_string(i);
    nn::collect(p, rb + ".conv1", res_conv1[i]);
    nn::collect(p, rb + ".n1", res_n1[i]);
    nn::collect(p, rb + ".conv2", res_conv2[i]);
    nn::collect(p, rb + ".n2", res_n2[i]);
  }
  nn::collect(p, prefix + "dec1", dec1);
  nn::collect(p, prefix + "dn1", dn1);
  nn::collect(p, prefix + "dec2", dec2);
  nn::collect(p, prefix + "dn2", dn2);
  nn::collect(p, prefix + "out", out);
  return p;
}

template <typename T>
DiscriminatorT<T> DiscriminatorT<T>::init(int base_channels, Rng& rng) {
  DiscriminatorT<T> d;
  d.base_channels = base_channels;
  d.c0 = nn::conv_he<T>(rng, 3, base_channels, 3, 1, 1);
  d.c1 = nn::conv_he<T>(rng, base_channels, 2 * base_channels, 3, 1, 1);
  d.n1 = nn::norm<T>(2 * base_channels);
  d.c2 = nn::conv_head<T>(rng, 2 * base_channels, 1, 3, 1, 1);
  return d;
}

template <typename T>
TensorT<T> DiscriminatorT<T>::forward(const TensorT<T>& x, TapeT<T>* tape) const {
  auto h = leaky_relu(c0(x, tape), T(0.2), tape);
  h = max_pool2(h, tape);
  h = leaky_relu(n1(c1(h, tape), tape), T(0.2), tape);
  h = max_pool2(h, tape);
  return c2(h, tape);
}

template <typename T>
nn::ParamList<T> DiscriminatorT<T>::named_params(const std::string& prefix) {
  nn::ParamList<T> p;
  nn::collect(p, prefix + "c0", c0);
  nn::collect(p, prefix + "c1", c1);
  nn::collect(p, prefix + "n1", n1);
  nn::collect(p, prefix + "c2", c2);
  return p;
}

template struct GeneratorT<float>;
template struct DiscriminatorT<float>;

template <typename T>
CycleLossParts<T> cycle_losses(const ApplyFnT<T>& g_ab, const ApplyFnT<T>& g_ba,
                               const ApplyFnT<T>& d_a, const ApplyFnT<T>& d_b,
                               const TensorT<T>& batch_a, const TensorT<T>& batch_b,
                               double lambda_cycle, double lambda_identity_rel,
                               TapeT<T>* tape) {
  check(batch_a.shape() == batch_b.shape(),
        "cycle_losses: batch shape mismatch " + batch_a.shape_str() + " vs " +
            batch_b.shape_str());
  CycleLossParts<T> parts;
  auto fake_b = g_ab(batch_a, tape);
  auto fake_a = g_ba(batch_b, tape);
  parts.adv_b = mse_to_const(d_b(fake_b, tape), T(1), tape);
  parts.adv_a = mse_to_const(d_a(fake_a, tape), T(1), tape);
  auto rec_a = g_ba(fake_b, tape);
  auto rec_b = g_ab(fake_a, tape);
  parts.cycle = add(l1_loss(rec_a, batch_a, tape), l1_loss(rec_b, batch_b, tape), tape);
  auto idt_b = g_ab(batch_b, tape);
  auto idt_a = g_ba(batch_a, tape);
  parts.identity = add(l1_loss(idt_b, batch_b, tape), l1_loss(idt_a, batch_a, tape), tape);
  auto adv = add(parts.adv_a, parts.adv_b, tape);
  auto weighted = add(scale_shift(parts.cycle, static_cast<T>(lambda_cycle), T(0), tape),
                      scale_shift(parts.identity,
                                  static_cast<T>(lambda_cycle * lambda_identity_rel), T(0), tape),
                      tape);
  parts.total_g = add(adv, weighted, tape);
  return parts;
}

template CycleLossParts<float> cycle_losses<float>(const ApplyFnT<float>&,
                                                   const ApplyFnT<float>&,
                                                   const ApplyFnT<float>&,
                                                   const ApplyFnT<float>&, const Tensor&,
                                                   const Tensor&, double, double, Tape*);
template CycleLossParts<double> cycle_losses<double>(const ApplyFnT<double>&,
                                                     const ApplyFnT<double>&,
                                                     const ApplyFnT<double>&,
                                                     const ApplyFnT<double>&, const DTensor&,
                                                     const DTensor&, double, double, DTape*);

namespace {

Tensor stack_batch(const std::vector<Tensor>& images, const std::vector<size_t>& idx) {
  const int c = images[0].dim(1), h = images[0].dim(2), w = images[0].dim(3);
  Tensor out = Tensor::zeros({static_cast<int>(idx.size()), c, h, w});
  auto d = out.mutable_data();
  const int64_t sz = images[0].numel();
  for (size_t i = 0; i < idx.size(); ++i) {
    auto s = images[idx[i]].data();
    std::copy(s.begin(), s.end(), d.begin() + static_cast<int64_t>(i) * sz);
  }
  return out;
}

}  // namespace

CycleTrainResult train_cycle_generators(const std::vector<Tensor>& images_a,
                                        const std::vector<Tensor>& images_b,
                                        const CycleTrainConfig& cfg) {
  check(!images_a.empty() && !images_b.empty(),
        "train_cycle_generators: both clusters must be non-empty");

  Rng init_rng(derive_seed(cfg.seed, "cyclegan-init"));
  CycleTrainResult res;
  res.g_ab = Generator::init(cfg.base_channels, cfg.res_blocks, init_rng);
  res.g_ba = Generator::init(cfg.base_channels, cfg.res_blocks, init_rng);
  res.d_a = Discriminator::init(cfg.disc_channels, init_rng);
  res.d_b = Discriminator::init(cfg.disc_channels, init_rng);

  auto g_params = res.g_ab.named_params("g_ab.");
  for (auto& p : res.g_ba.named_params("g_ba.")) g_params.push_back(p);
  auto d_params = res.d_a.named_params("d_a.");
  for (auto& p : res.d_b.named_params("d_b.")) d_params.push_back(p);

  OptimConfig g_opt_cfg = OptimConfig::adam(cfg.lr);
  g_opt_cfg.beta1 = 0.5;
  Optimizer g_opt(nn::tensors_of(g_params), g_opt_cfg);
  Optimizer d_opt(nn::tensors_of(d_params), g_opt_cfg);

  Rng rng(derive_seed(cfg.seed, "cyclegan-batches"));
  auto sample = [&rng](size_t n, int count) {
    std::vector<size_t> idx;
    for (int i = 0; i < count; ++i)
      idx.push_back(static_cast<size_t>(rng.uniform_int(static_cast<int>(n))));
    return idx;
  };

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const Tensor batch_a = stack_batch(images_a, sample(images_a.size(), cfg.batch));
    const Tensor batch_b = stack_batch(images_b, sample(images_b.size(), cfg.batch));

    // generator update
    Tape g_tape;
    ApplyFnT<float> g_ab_fn = [&](const Tensor& x, Tape* t) { return res.g_ab.forward(x, t); };
    ApplyFnT<float> g_ba_fn = [&](const Tensor& x, Tape* t) { return res.g_ba.forward(x, t); };
    ApplyFnT<float> d_a_fn = [&](const Tensor& x, Tape* t) { return res.d_a.forward(x, t); };
    ApplyFnT<float> d_b_fn = [&](const Tensor& x, Tape* t) { return res.d_b.forward(x, t); };
    auto parts = cycle_losses<float>(g_ab_fn, g_ba_fn, d_a_fn, d_b_fn, batch_a, batch_b,
                                     cfg.lambda_cycle, cfg.lambda_identity_rel, &g_tape);
    check(std::isfinite(parts.total_g.item()), "train_cycle_generators: generator loss diverged");
    g_opt.zero_grad();
    d_opt.zero_grad();  // discriminators see generator-side gradients too
    g_tape.backward(parts.total_g);
    g_opt.step();
    d_opt.zero_grad();

    // discriminator update on detached fakes
    const Tensor fake_b = res.g_ab.forward(batch_a, nullptr).detach();
    const Tensor fake_a = res.g_ba.forward(batch_b, nullptr).detach();
    Tape d_tape;
    auto d_loss_half = [&d_tape](Tensor real_score, Tensor fake_score) {
      auto real_term = mse_to_const(real_score, 1.0f, &d_tape);
      auto fake_term = mse_to_const(fake_score, 0.0f, &d_tape);
      return scale_shift(add(real_term, fake_term, &d_tape), 0.5f, 0.0f, &d_tape);
    };
    Tensor da_loss = d_loss_half(res.d_a.forward(batch_a, &d_tape),
                                 res.d_a.forward(fake_a, &d_tape));
    Tensor db_loss = d_loss_half(res.d_b.forward(batch_b, &d_tape),
                                 res.d_b.forward(fake_b, &d_tape));
    Tensor d_total = add(da_loss, db_loss, &d_tape);
    d_opt.zero_grad();
    d_tape.backward(d_total);
    d_opt.step();

    if (iter % cfg.log_interval == 0 || iter == cfg.iterations - 1) {
      CycleLogRow row;
      row.iteration = iter;
      row.adv = parts.adv_a.item() + parts.adv_b.item();
      row.cycle = parts.cycle.item();
      row.identity = parts.identity.item();
      row.d_a = da_loss.item();
      row.d_b = db_loss.item();
      res.log.push_back(row);
    }
  }
  return res;
}

RgbImage aggregate_style(const RgbImage& img, const Generator& g_to_a, const Generator& g_to_b) {
  const int w4 = (img.width + 3) / 4 * 4;
  const int h4 = (img.height + 3) / 4 * 4;
  const bool needs_resize = w4 != img.width || h4 != img.height;
  const RgbImage work = needs_resize ? resize_image(img, w4, h4) : img;
  const Tensor x = image_to_tensor(work);
  const Tensor ya = g_to_a.forward(x, nullptr);
  const Tensor yb = g_to_b.forward(x, nullptr);
  Tensor mean = Tensor::zeros(ya.shape());
  auto md = mean.mutable_data();
  auto ad = ya.data();
  auto bd = yb.data();
  for (size_t i = 0; i < md.size(); ++i) md[i] = 0.5f * (ad[i] + bd[i]);
  RgbImage out = tensor_to_image(mean);
  if (needs_resize) out = resize_image(out, img.width, img.height);
  return out;
}

DatasetManifest precompute_aggregated_manifest(const DatasetManifest& m, const Generator& g_to_a,
                                               const Generator& g_to_b,
                                               const std::string& out_dir) {
  const fs::path img_dir = fs::path(out_dir) / "images";
  fs::create_directories(img_dir);
  DatasetManifest out = m;
  out.name = m.name + "-aggregated";
  out.base_dir = out_dir;
  std::vector<std::string> errors(m.records.size());
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < static_cast<int64_t>(m.records.size()); ++i) {
    try {
      const auto& r = m.records[static_cast<size_t>(i)];
      const RgbImage src = read_png(m.resolve(r.image_path));
      const RgbImage agg = aggregate_style(src, g_to_a, g_to_b);
      const std::string rel =
          (fs::path("images") / fs::path(r.image_path).filename()).string();
      write_png(agg, (fs::path(out_dir) / rel).string());
      out.records[static_cast<size_t>(i)].image_path = rel;
    } catch (const std::exception& e) {
      errors[static_cast<size_t>(i)] = e.what();
    }
  }
  std::string msg;
  for (size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty()) msg += "\n  record " + std::to_string(i) + ": " + errors[i];
  check(msg.empty(), "precompute_aggregated_manifest: failures:" + msg);
  write_manifest(out, (fs::path(out_dir) / (m.split + ".json")).string());
  return out;
}

void write_cycle_log_csv(const std::vector<CycleLogRow>& log, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  check(f.good(), "write_cycle_log_csv: cannot open '" + path + "'");
  f << "iteration,adv,cycle,identity,d_a,d_b\n";
  char buf[160];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.8f,%.8f,%.8f,%.8f,%.8f\n", r.iteration, r.adv, r.cycle,
                  r.identity, r.d_a, r.d_b);
    f << buf;
  }
}

Checkpoint generator_checkpoint(Generator& g) {
  auto params = g.named_params();
  return save_named_params(params);
}

Generator generator_from_checkpoint(const Checkpoint& ck, int base_channels, int res_blocks) {
  Rng rng(0);
  Generator g = Generator::init(base_channels, res_blocks, rng);
  auto params = g.named_params();
  load_named_params(ck, params);
  return g;
}

}  // namespace san
