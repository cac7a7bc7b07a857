#include "san/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "san/filters.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace san {

std::string DatasetManifest::resolve(const std::string& rel) const {
  if (base_dir.empty() || fs::path(rel).is_absolute()) return rel;
  return (fs::path(base_dir) / rel).string();
}

namespace {

void require_keys(const ordered_json& j, const std::set<std::string>& allowed,
                  const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    check(allowed.count(it.key()) > 0,
          "manifest: unknown key '" + it.key() + "' in " + where);
  }
}

FaceRecord record_from_json(const ordered_json& j, int expected_k, size_t idx) {
  const std::string where = "records[" + std::to_string(idx) + "]";
  require_keys(j, {"image", "box", "landmarks", "visibility", "style_tag"}, where);
  check(j.contains("image") && j.contains("box") && j.contains("landmarks"),
        "manifest: " + where + " missing image/box/landmarks");
  FaceRecord r;
  r.image_path = j.at("image").get<std::string>();
  const auto& b = j.at("box");
  check(b.is_array() && b.size() == 4, "manifest: " + where + " box must be [x1,y1,x2,y2]");
  r.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
  check(r.box.x1 < r.box.x2 && r.box.y1 < r.box.y2,
        "manifest: " + where + " box is not well-ordered");
  for (const auto& p : j.at("landmarks")) {
    check(p.is_array() && p.size() == 2, "manifest: " + where + " landmark must be [x,y]");
    const double x = p[0].get<double>(), y = p[1].get<double>();
    check(std::isfinite(x) && std::isfinite(y),
          "manifest: " + where + " landmark is not finite");
    r.annotation.points.push_back({x, y});
  }
  check(r.annotation.K() >= 2, "manifest: " + where + " needs at least 2 landmarks");
  check(expected_k == 0 || r.annotation.K() == expected_k,
        "manifest: " + where + " has K=" + std::to_string(r.annotation.K()) +
            ", expected K=" + std::to_string(expected_k));
  if (j.contains("visibility")) {
    for (const auto& v : j.at("visibility")) r.annotation.visibility.push_back(v.get<bool>());
    check(r.annotation.visibility.size() == r.annotation.points.size(),
          "manifest: " + where + " visibility length mismatch");
  } else {
    r.annotation.visibility.assign(r.annotation.points.size(), true);
  }
  if (j.contains("style_tag")) r.style_tag = j.at("style_tag").get<std::string>();
  return r;
}

ordered_json record_to_json(const FaceRecord& r) {
  ordered_json j;
  j["image"] = r.image_path;
  j["box"] = {r.box.x1, r.box.y1, r.box.x2, r.box.y2};
  ordered_json lms = ordered_json::array();
  for (const Pt& p : r.annotation.points) lms.push_back({p.x, p.y});
  j["landmarks"] = std::move(lms);
  ordered_json vis = ordered_json::array();
  for (bool v : r.annotation.visibility) vis.push_back(v);
  j["visibility"] = std::move(vis);
  if (!r.style_tag.empty()) j["style_tag"] = r.style_tag;
  return j;
}

}  // namespace

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "manifest: cannot open '" + path + "'");
  ordered_json j;
  try {
    j = ordered_json::parse(f);
  } catch (const std::exception& e) {
    throw std::runtime_error("manifest: malformed JSON in '" + path + "': " + e.what());
  }
  require_keys(j, {"name", "split", "style", "K", "records"}, "manifest root");
  for (const char* key : {"name", "split", "style", "K", "records"})
    check(j.contains(key), std::string("manifest: missing field '") + key + "'");
  DatasetManifest m;
  m.name = j["name"].get<std::string>();
  m.split = j["split"].get<std::string>();
  m.style = j["style"].get<std::string>();
  m.K = j["K"].get<int>();
  check(m.split == "train" || m.split == "test",
        "manifest: split must be train|test, got '" + m.split + "'");
  size_t idx = 0;
  for (const auto& rj : j["records"]) m.records.push_back(record_from_json(rj, m.K, idx++));
  m.base_dir = fs::path(path).parent_path().string();
  return m;
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
  for (size_t i = 0; i < m.records.size(); ++i)
    check(m.records[i].annotation.K() == m.K,
          "manifest: record " + std::to_string(i) + " has K=" +
              std::to_string(m.records[i].annotation.K()) + ", manifest K=" +
              std::to_string(m.K));
  ordered_json j;
  j["name"] = m.name;
  j["split"] = m.split;
  j["style"] = m.style;
  j["K"] = m.K;
  ordered_json recs = ordered_json::array();
  for (const auto& r : m.records) recs.push_back(record_to_json(r));
  j["records"] = std::move(recs);

  fs::create_directories(fs::path(path).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(path).parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc);
    check(f.good(), "manifest: cannot open '" + tmp + "' for writing");
    f << j.dump(1) << "\n";
    check(f.good(), "manifest: write failed for '" + tmp + "'");
  }
  fs::rename(tmp, path);
}

std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& m,
                                                          double train_fraction, uint64_t seed) {
  check(train_fraction > 0.0 && train_fraction < 1.0,
        "split_dataset: train_fraction must be in (0,1)");
  std::vector<size_t> idx(m.records.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(idx);
  const size_t n_train = static_cast<size_t>(
      std::floor(static_cast<double>(m.records.size()) * train_fraction));
  DatasetManifest train = m, test = m;
  train.records.clear();
  test.records.clear();
  train.split = "train";
  test.split = "test";
  for (size_t i = 0; i < idx.size(); ++i)
    (i < n_train ? train : test).records.push_back(m.records[idx[i]]);
  return {std::move(train), std::move(test)};
}

std::vector<DatasetManifest> generate_styled_dataset(const DatasetManifest& m,
                                                     const std::string& out_root) {
  std::vector<DatasetManifest> out;
  for (const std::string& style : StyleFilterSet::names()) {
    const fs::path style_dir = fs::path(out_root) / style;
    const fs::path img_dir = style_dir / "images";
    fs::create_directories(img_dir);
    DatasetManifest sm = m;
    sm.name = m.name + "-" + style;
    sm.style = style;
    sm.base_dir = style_dir.string();
    std::vector<std::string> errors;
    for (size_t i = 0; i < m.records.size(); ++i) {
      try {
        const RgbImage src = read_png(m.resolve(m.records[i].image_path));
        const RgbImage styled = StyleFilterSet::apply(style, src);
        const std::string rel =
            (fs::path("images") / fs::path(m.records[i].image_path).filename()).string();
        write_png(styled, (style_dir / rel).string());
        sm.records[i].image_path = rel;
        sm.records[i].style_tag = style;
      } catch (const std::exception& e) {
        errors.push_back("record " + std::to_string(i) + ": " + e.what());
      }
    }
    if (!errors.empty()) {
      std::string msg = "generate_styled_dataset: " + std::to_string(errors.size()) +
                        " record(s) failed for style '" + style + "':";
      for (const auto& e : errors) msg += "\n  " + e;
      throw std::runtime_error(msg);
    }
    write_manifest(sm, (style_dir / (m.split + ".json")).string());
    out.push_back(read_manifest((style_dir / (m.split + ".json")).string()));
  }
  return out;
}

DatasetManifest concat_manifests(const std::vector<DatasetManifest>& parts,
                                 const std::string& name) {
  check(!parts.empty(), "concat_manifests: no inputs");
  DatasetManifest out;
  out.name = name;
  out.split = parts[0].split;
  out.style = "synthetic-mixed";
  out.K = parts[0].K;
  for (const auto& p : parts) {
    check(p.K == out.K, "concat_manifests: inconsistent K");
    for (const auto& r : p.records) {
      FaceRecord copy = r;
      copy.image_path = p.resolve(r.image_path);  // absolute so base_dir can drop
      if (copy.style_tag.empty()) copy.style_tag = p.style;
      out.records.push_back(std::move(copy));
    }
  }
  return out;
}

LandmarkAnnotation read_pts(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "pts: cannot open '" + path + "'");
  std::string tok;
  f >> tok;
  check(tok == "version:", "pts: expected 'version:' header");
  int version;
  f >> version;
  f >> tok;
  check(tok == "n_points:", "pts: expected 'n_points:'");
  int k;
  f >> k;
  check(k >= 2, "pts: n_points must be >= 2");
  f >> tok;
  check(tok == "{", "pts: expected '{'");
  LandmarkAnnotation ann;
  for (int i = 0; i < k; ++i) {
    double x, y;
    f >> x >> y;
    check(f.good(), "pts: truncated point list");
    ann.points.push_back({x, y});
  }
  f >> tok;
  check(tok == "}", "pts: expected closing '}'");
  ann.visibility.assign(static_cast<size_t>(k), true);
  return ann;
}

void write_pts(const LandmarkAnnotation& ann, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  check(f.good(), "pts: cannot open '" + path + "' for writing");
  f << "version: 1\n";
  f << "n_points: " << ann.K() << "\n";
  f << "{\n";
  char buf[64];
  for (const Pt& p : ann.points) {
    std::snprintf(buf, sizeof(buf), "%.6f %.6f\n", p.x, p.y);
    f << buf;
  }
  f << "}\n";
}

}  // namespace san
