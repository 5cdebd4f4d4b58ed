#pragma once

#include <string>
#include <vector>

#include "threer/image.hpp"

namespace threer {

// One manifest line: clean_path<TAB>grainy_path<TAB>split.
struct DatasetEntry {
  std::string clean_path;
  std::string grainy_path;
  std::string split;  // "train" or "val"
};

std::vector<DatasetEntry> load_manifest(const std::string& path);
void save_manifest(const std::vector<DatasetEntry>& entries, const std::string& path);

// Pairs loaded into memory with clean_lr derived on load.
struct Dataset {
  std::vector<TrainingPair> train;
  std::vector<TrainingPair> val;
};

// Paths in the manifest are resolved relative to the manifest's directory.
Dataset load_dataset(const std::string& manifest_path);

struct MakeDatasetOptions {
  int count = 10;
  int image_size = 96;  // even
  std::uint64_t seed = 1;
  double val_fraction = 0.2;
  GrainConfig grain;  // per-image seeds derive from this seed
};

// Procedural clean images (value-noise, gratings, gradients, tiles, blobs,
// rectangles) paired with AR grain; writes PNGs plus the manifest and returns
// the manifest path.
std::string make_synthetic_dataset(const std::string& dir, const MakeDatasetOptions& opts);

// One procedural clean image; kind cycles through the generator families.
Image synthetic_image(int kind, int width, int height, Rng& rng);

}  // namespace threer
