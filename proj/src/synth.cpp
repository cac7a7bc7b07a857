#include <cmath>
#include <filesystem>

#include "san/dataset.hpp"

namespace fs = std::filesystem;

namespace san {

namespace {

struct Ellipse {
  double u = 0.0, v = 0.0;  // center in face frame
  double a = 1.0, b = 1.0;  // semi-axes
  float color[3] = {0, 0, 0};
};

// Approximate signed distance in pixels, negative inside.
double ellipse_sdf(const Ellipse& e, double u, double v) {
  const double du = (u - e.u) / e.a;
  const double dv = (v - e.v) / e.b;
  const double l = std::sqrt(du * du + dv * dv);
  return (l - 1.0) * std::min(e.a, e.b);
}

double coverage(double sdf) {
  const double c = 0.5 - sdf;
  return c < 0.0 ? 0.0 : (c > 1.0 ? 1.0 : c);
}

double hash_noise(uint64_t seed, int x, int y) {
  const uint64_t h = splitmix64(seed ^ (static_cast<uint64_t>(x) * 0x1f123bb5ULL) ^
                                (static_cast<uint64_t>(y) * 0x5851f42d4c957f2dULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

}  // namespace

SynthFace synth_face(const SynthParams& params, uint64_t seed) {
  const int S = params.image_size;
  Rng rng(seed);

  // background
  float bg_top[3], bg_bot[3];
  for (int c = 0; c < 3; ++c) bg_top[c] = static_cast<float>(rng.uniform(0.25, 0.75));
  for (int c = 0; c < 3; ++c) bg_bot[c] = static_cast<float>(rng.uniform(0.25, 0.75));
  const double wave_freq = rng.uniform(1.5, 4.0);
  const double wave_phase = rng.uniform(0.0, 2.0 * M_PI);
  const double wave_amp = rng.uniform(0.02, 0.06);
  const double noise_amp = rng.uniform(0.01, 0.03);
  const uint64_t noise_seed = rng.next();

  // head
  const double cx = S * rng.uniform(0.44, 0.56);
  const double cy = S * rng.uniform(0.46, 0.56);
  const double rx = S * rng.uniform(0.22, 0.30);
  const double ry = rx * rng.uniform(1.15, 1.35);
  const double theta = rng.uniform(-0.15, 0.15);
  float skin[3];
  skin[0] = static_cast<float>(rng.uniform(0.72, 0.92));
  skin[1] = static_cast<float>(skin[0] * rng.uniform(0.72, 0.86));
  skin[2] = static_cast<float>(skin[1] * rng.uniform(0.70, 0.92));

  // eyes
  const double eye_dx = rx * rng.uniform(0.40, 0.50);
  const double eye_y = -ry * rng.uniform(0.18, 0.30);
  const double eye_r = rx * rng.uniform(0.14, 0.20);
  const double eye_h = eye_r * rng.uniform(0.50, 0.70);
  const double iris_r = eye_h * rng.uniform(0.55, 0.75);
  const float sclera = static_cast<float>(rng.uniform(0.90, 0.98));
  float iris[3];
  iris[0] = static_cast<float>(rng.uniform(0.05, 0.30));
  iris[1] = static_cast<float>(rng.uniform(0.05, 0.35));
  iris[2] = static_cast<float>(rng.uniform(0.10, 0.45));

  // nose: small ellipse whose bottom extremum is the tip landmark
  const double nose_tip_y = ry * rng.uniform(0.10, 0.22);
  const double nose_w = rx * rng.uniform(0.08, 0.12);
  const double nose_h = ry * rng.uniform(0.10, 0.16);
  float nose_col[3];
  for (int c = 0; c < 3; ++c) nose_col[c] = static_cast<float>(skin[c] * rng.uniform(0.72, 0.85));

  // mouth
  const double mouth_y = ry * rng.uniform(0.45, 0.60);
  const double mouth_w = rx * rng.uniform(0.38, 0.52);
  const double mouth_h = ry * rng.uniform(0.05, 0.09);
  float mouth_col[3];
  mouth_col[0] = static_cast<float>(rng.uniform(0.45, 0.65));
  mouth_col[1] = static_cast<float>(rng.uniform(0.12, 0.25));
  mouth_col[2] = static_cast<float>(rng.uniform(0.15, 0.30));

  const Ellipse head{0.0, 0.0, rx, ry, {skin[0], skin[1], skin[2]}};
  const Ellipse eye_l{-eye_dx, eye_y, eye_r, eye_h, {sclera, sclera, sclera}};
  const Ellipse eye_r_e{eye_dx, eye_y, eye_r, eye_h, {sclera, sclera, sclera}};
  const Ellipse iris_l{-eye_dx, eye_y, iris_r, iris_r, {iris[0], iris[1], iris[2]}};
  const Ellipse iris_r_e{eye_dx, eye_y, iris_r, iris_r, {iris[0], iris[1], iris[2]}};
  const Ellipse nose{0.0, nose_tip_y - nose_h, nose_w, nose_h,
                     {nose_col[0], nose_col[1], nose_col[2]}};
  const Ellipse mouth{0.0, mouth_y, mouth_w, mouth_h,
                      {mouth_col[0], mouth_col[1], mouth_col[2]}};
  const Ellipse* layers[] = {&head, &eye_l, &eye_r_e, &iris_l, &iris_r_e, &nose, &mouth};

  const double ct = std::cos(theta), st = std::sin(theta);
  RgbImage img(S, S);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < S; ++y) {
    for (int x = 0; x < S; ++x) {
      const double wx = x + 0.5, wy = y + 0.5;
      const double t = wy / S;
      float col[3];
      const double wave =
          wave_amp * std::sin(2.0 * M_PI * wave_freq * (wx + 0.6 * wy) / S + wave_phase);
      const double noise = noise_amp * hash_noise(noise_seed, x, y);
      for (int c = 0; c < 3; ++c)
        col[c] = static_cast<float>(bg_top[c] * (1.0 - t) + bg_bot[c] * t + wave + noise);
      // face-frame coords
      const double u = ct * (wx - cx) + st * (wy - cy);
      const double v = -st * (wx - cx) + ct * (wy - cy);
      for (const Ellipse* e : layers) {
        const double cov = coverage(ellipse_sdf(*e, u, v));
        if (cov <= 0.0) continue;
        for (int c = 0; c < 3; ++c)
          col[c] = static_cast<float>(col[c] * (1.0 - cov) + e->color[c] * cov);
      }
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = col[c];
    }
  }
  img.clamp01();

  // analytic landmarks in face frame -> world
  auto to_world = [&](double u, double v) -> Pt {
    return {cx + ct * u - st * v, cy + st * u + ct * v};
  };
  std::vector<Pt> lms(kSynthK);
  lms[kSynthLeftEye] = to_world(-eye_dx - eye_r, eye_y);
  lms[kSynthRightEye] = to_world(eye_dx + eye_r, eye_y);
  lms[kSynthNose] = to_world(0.0, nose_tip_y);
  lms[kSynthMouthL] = to_world(-mouth_w, mouth_y);
  lms[kSynthMouthR] = to_world(mouth_w, mouth_y);

  // bounding box of the rotated head ellipse, clipped to the image
  const double hx = std::sqrt(rx * ct * rx * ct + ry * st * ry * st);
  const double hy = std::sqrt(rx * st * rx * st + ry * ct * ry * ct);
  Box box{std::max(0.0, cx - hx), std::max(0.0, cy - hy),
          std::min(static_cast<double>(S), cx + hx), std::min(static_cast<double>(S), cy + hy)};

  SynthFace out;
  out.image = std::move(img);
  out.record.box = box;
  out.record.annotation.points = std::move(lms);
  out.record.annotation.visibility.assign(kSynthK, true);
  return out;
}

DatasetManifest generate_synth_dataset(const SynthParams& params, uint64_t seed,
                                       const std::string& out_dir, const std::string& name,
                                       const std::string& split) {
  const fs::path img_dir = fs::path(out_dir) / "images";
  fs::create_directories(img_dir);
  DatasetManifest m;
  m.name = name;
  m.split = split;
  m.style = "original";
  m.K = kSynthK;
  m.base_dir = out_dir;
  m.records.resize(static_cast<size_t>(params.count));

  std::vector<SynthFace> faces(static_cast<size_t>(params.count));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < params.count; ++i)
    faces[static_cast<size_t>(i)] = synth_face(params, derive_seed(seed, "face", static_cast<uint64_t>(i)));

  char buf[32];
  for (int i = 0; i < params.count; ++i) {
    std::snprintf(buf, sizeof(buf), "%06d.png", i);
    const std::string rel = (fs::path("images") / buf).string();
    write_png(faces[static_cast<size_t>(i)].image, (fs::path(out_dir) / rel).string());
    FaceRecord r = faces[static_cast<size_t>(i)].record;
    r.image_path = rel;
    m.records[static_cast<size_t>(i)] = std::move(r);
  }
  write_manifest(m, (fs::path(out_dir) / (split + ".json")).string());
  return m;
}

}  // namespace san
