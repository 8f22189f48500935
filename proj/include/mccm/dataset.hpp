#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mccm/image.hpp"
#include "mccm/imgdata.hpp"

namespace mccm {

enum class Split { train, val, test };

std::string_view to_string(Split s);
Split parse_split(std::string_view name);

struct SampleRecord {
  std::string id;
  int label = 1;
  Generator generator = Generator::pristine;
  std::string file;  // relative to the dataset root
};

struct DatasetManifest {
  std::vector<SampleRecord> records;
  std::vector<Split> split;  // parallel to records
};

/// Train/val/test fractions. Defaults mirror 35k/15k/20k out of 70k.
struct SplitRatios {
  double train = 0.5;
  double val = 3.0 / 14.0;
  double test = 2.0 / 7.0;
};

/// Seeded shuffle per generator group, then contiguous train/val/test cuts.
DatasetManifest split_protocol(const DatasetManifest& manifest, const SplitRatios& ratios,
                               std::uint64_t seed);

void write_manifest_csv(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest_csv(const std::filesystem::path& path);

/// A dataset directory loaded into memory; images are parallel to manifest.records.
struct Dataset {
  std::filesystem::path root;
  DatasetManifest manifest;
  std::vector<RgbImage> images;

  std::vector<std::size_t> indices(Split s) const;
};

/// Writes `manifest.csv` plus one P6 file per image under `dir`. Assumes `dir`
/// exists and is empty (the CLI enforces the --force policy).
DatasetManifest write_dataset(const std::filesystem::path& dir, Generator g,
                              const std::vector<RgbImage>& images, const SplitRatios& ratios,
                              std::uint64_t split_seed);

Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace mccm
