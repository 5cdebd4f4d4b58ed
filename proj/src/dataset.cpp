#include "threer/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace threer {

namespace fs = std::filesystem;

std::vector<DatasetEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  std::vector<DatasetEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const size_t t1 = line.find('\t');
    const size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      throw IoError(path + ":" + std::to_string(lineno) +
                    ": expected clean<TAB>grainy<TAB>split");
    }
    DatasetEntry e;
    e.clean_path = line.substr(0, t1);
    e.grainy_path = line.substr(t1 + 1, t2 - t1 - 1);
    e.split = line.substr(t2 + 1);
    if (!e.split.empty() && e.split.back() == '\r') e.split.pop_back();
    if (e.split != "train" && e.split != "val") {
      throw IoError(path + ":" + std::to_string(lineno) + ": unknown split '" + e.split + "'");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_manifest(const std::vector<DatasetEntry>& entries, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path);
  for (const auto& e : entries) {
    out << e.clean_path << '\t' << e.grainy_path << '\t' << e.split << '\n';
  }
}

Dataset load_dataset(const std::string& manifest_path) {
  const auto entries = load_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  Dataset ds;
  for (const auto& e : entries) {
    TrainingPair pair;
    pair.clean_hr = load_png((base / e.clean_path).string());
    pair.grainy_hr = load_png((base / e.grainy_path).string());
    if (pair.clean_hr.width != pair.grainy_hr.width ||
        pair.clean_hr.height != pair.grainy_hr.height) {
      throw ShapeError("dataset: clean/grainy dimensions differ for " + e.clean_path);
    }
    if (pair.clean_hr.width % 2 != 0 || pair.clean_hr.height % 2 != 0) {
      throw ShapeError("dataset: odd dimensions for " + e.clean_path);
    }
    pair.clean_lr = bicubic_downscale_x2(pair.clean_hr);
    (e.split == "train" ? ds.train : ds.val).push_back(std::move(pair));
  }
  return ds;
}

namespace {

// Smooth multi-octave value noise, the "photographic" stand-in.
Image value_noise(int w, int h, Rng& rng) {
  Image img = Image::create(w, h);
  for (int c = 0; c < 3; ++c) {
    std::vector<float> plane(static_cast<size_t>(w) * h, 0.0f);
    float amp = 0.5f;
    for (int octave = 0; octave < 4; ++octave) {
      const int cells = 2 << octave;  // lattice resolution
      std::vector<float> lattice(static_cast<size_t>(cells + 1) * (cells + 1));
      for (auto& v : lattice) v = static_cast<float>(rng.uniform());
      for (int y = 0; y < h; ++y) {
        const float fy = static_cast<float>(y) / h * cells;
        const int iy = static_cast<int>(fy);
        const float ty = fy - iy;
        const float sy = ty * ty * (3 - 2 * ty);
        for (int x = 0; x < w; ++x) {
          const float fx = static_cast<float>(x) / w * cells;
          const int ix = static_cast<int>(fx);
          const float tx = fx - ix;
          const float sx = tx * tx * (3 - 2 * tx);
          const float v00 = lattice[static_cast<size_t>(iy) * (cells + 1) + ix];
          const float v01 = lattice[static_cast<size_t>(iy) * (cells + 1) + ix + 1];
          const float v10 = lattice[static_cast<size_t>(iy + 1) * (cells + 1) + ix];
          const float v11 = lattice[static_cast<size_t>(iy + 1) * (cells + 1) + ix + 1];
          const float v = (v00 * (1 - sx) + v01 * sx) * (1 - sy) + (v10 * (1 - sx) + v11 * sx) * sy;
          plane[static_cast<size_t>(y) * w + x] += amp * v;
        }
      }
      amp *= 0.5f;
    }
    for (size_t i = 0; i < plane.size(); ++i) {
      img.data[c * img.plane() + i] = std::min(1.0f, plane[i]);
    }
  }
  return img;
}

Image grating(int w, int h, Rng& rng) {
  Image img = Image::create(w, h);
  const double angle = rng.uniform(0.0, 3.14159265);
  const double freq = rng.uniform(0.05, 0.45);
  const double kx = std::cos(angle) * freq, ky = std::sin(angle) * freq;
  for (int c = 0; c < 3; ++c) {
    const double phase = rng.uniform(0.0, 6.2831853);
    const double lo = rng.uniform(0.05, 0.4), hi = rng.uniform(0.6, 0.95);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double s = 0.5 * (1.0 + std::sin(6.2831853 * (kx * x + ky * y) + phase));
        img.at(c, y, x) = static_cast<float>(lo + (hi - lo) * s);
      }
    }
  }
  return img;
}

Image gradient(int w, int h, Rng& rng) {
  Image img = Image::create(w, h);
  const bool radial = rng.coin();
  const double cx = rng.uniform(0.2, 0.8) * w, cy = rng.uniform(0.2, 0.8) * h;
  const double angle = rng.uniform(0.0, 6.2831853);
  const double dx = std::cos(angle), dy = std::sin(angle);
  for (int c = 0; c < 3; ++c) {
    const double a = rng.uniform(0.0, 0.45), b = rng.uniform(0.55, 1.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double t;
        if (radial) {
          t = std::hypot(x - cx, y - cy) / (0.7 * std::hypot(w, h));
        } else {
          t = ((x - cx) * dx + (y - cy) * dy) / std::hypot(w, h) + 0.5;
        }
        t = std::min(1.0, std::max(0.0, t));
        img.at(c, y, x) = static_cast<float>(a + (b - a) * t);
      }
    }
  }
  return img;
}

Image tiles(int w, int h, Rng& rng) {
  Image img = Image::create(w, h);
  const int tile = 4 << rng.uniform_int(0, 2);
  float colors[2][3];
  for (auto& color : colors) {
    for (auto& ch : color) ch = static_cast<float>(rng.uniform(0.05, 0.95));
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int which = ((x / tile) + (y / tile)) & 1;
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = colors[which][c];
    }
  }
  return img;
}

Image blobs(int w, int h, Rng& rng) {
  Image img = Image::create(w, h, 0.15f);
  const int n = static_cast<int>(rng.uniform_int(3, 7));
  for (int i = 0; i < n; ++i) {
    const double cx = rng.uniform(0.0, 1.0) * w, cy = rng.uniform(0.0, 1.0) * h;
    const double sigma = rng.uniform(0.05, 0.25) * std::min(w, h);
    float color[3];
    for (auto& ch : color) ch = static_cast<float>(rng.uniform(0.2, 1.0));
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        const float g = static_cast<float>(std::exp(-d2 / (2 * sigma * sigma)));
        for (int c = 0; c < 3; ++c) {
          img.at(c, y, x) = std::min(1.0f, img.at(c, y, x) + color[c] * g);
        }
      }
    }
  }
  return img;
}

Image rectangles(int w, int h, Rng& rng) {
  Image img = Image::create(w, h, 0.5f);
  const int n = static_cast<int>(rng.uniform_int(4, 9));
  for (int i = 0; i < n; ++i) {
    const int x0 = static_cast<int>(rng.uniform_int(0, w - 2));
    const int y0 = static_cast<int>(rng.uniform_int(0, h - 2));
    const int x1 = static_cast<int>(rng.uniform_int(x0 + 1, w - 1));
    const int y1 = static_cast<int>(rng.uniform_int(y0 + 1, h - 1));
    float color[3];
    for (auto& ch : color) ch = static_cast<float>(rng.uniform(0.0, 1.0));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = color[c];
      }
    }
  }
  return img;
}

}  // namespace

Image synthetic_image(int kind, int width, int height, Rng& rng) {
  switch (kind % 6) {
    case 0: return value_noise(width, height, rng);
    case 1: return grating(width, height, rng);
    case 2: return gradient(width, height, rng);
    case 3: return tiles(width, height, rng);
    case 4: return blobs(width, height, rng);
    default: return rectangles(width, height, rng);
  }
}

std::string make_synthetic_dataset(const std::string& dir, const MakeDatasetOptions& opts) {
  if (opts.count <= 0) throw ConfigError("make_dataset: count must be positive");
  if (opts.image_size < 16 || opts.image_size % 2 != 0) {
    throw ConfigError("make_dataset: image_size must be even and at least 16");
  }
  fs::create_directories(dir);
  Rng rng(opts.seed);
  std::vector<DatasetEntry> entries;
  const int val_count =
      std::min(opts.count - 1, static_cast<int>(std::lround(opts.count * opts.val_fraction)));
  for (int i = 0; i < opts.count; ++i) {
    Image clean = synthetic_image(i, opts.image_size, opts.image_size, rng);
    GrainConfig grain = opts.grain;
    grain.seed = rng.next_u64();
    const Image grainy = synthesize_grain(clean, grain);

    char name[64];
    std::snprintf(name, sizeof(name), "img%03d_clean.png", i);
    const std::string clean_name = name;
    std::snprintf(name, sizeof(name), "img%03d_grainy.png", i);
    const std::string grainy_name = name;
    save_png(clean, (fs::path(dir) / clean_name).string());
    save_png(grainy, (fs::path(dir) / grainy_name).string());

    DatasetEntry e;
    e.clean_path = clean_name;
    e.grainy_path = grainy_name;
    e.split = (i >= opts.count - val_count) ? "val" : "train";
    entries.push_back(std::move(e));
  }
  const std::string manifest = (fs::path(dir) / "manifest.tsv").string();
  save_manifest(entries, manifest);
  return manifest;
}

}  // namespace threer
