#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vser/config.hpp"
#include "vser/image.hpp"

namespace vser {

struct ManifestEntry {
    std::string clip_id;  // relative path, sanitized, extension stripped
    std::filesystem::path path;
    std::string speaker;
    int label = -1;
};

struct DatasetManifest {
    std::string dataset;
    std::vector<std::string> label_names;  // alphabetical, fixed per corpus
    std::vector<ManifestEntry> entries;    // sorted by clip_id
    std::vector<std::string> skipped;      // unparseable filenames
    int expected_count = 0;                // 0 = no expectation
};

// Label sets per corpus (7 classes for savee/emodb/fixture, 6 for crema-d).
std::vector<std::string> dataset_labels(const std::string& dataset_name);

// Walks root recursively, parses labels from each corpus's filename
// convention. Unparseable files land in `skipped`; zero parsed entries is
// an IngestError. A count mismatch against the corpus's published size is
// reported by the caller (see expected_count), not an error.
DatasetManifest ingest(const std::filesystem::path& root,
                       const std::string& dataset_name);

// Synthetic corpus with SAVEE-style naming: per_class clips per emotion,
// distinct spectral content per class, deterministic in seed.
void make_fixture_tree(const std::filesystem::path& root, int per_class,
                       uint64_t seed);

struct SplitIndices {
    std::vector<size_t> train, test;  // indices into manifest.entries
};

// Stratified by label, deterministic in seed. Each class keeps at least
// one clip on each side; classes with fewer than two clips are an error.
SplitIndices split_dataset(const DatasetManifest& manifest, double ratio,
                           uint64_t seed);

// One cached training example.
struct Example {
    std::string clip_id;
    std::string aug;  // "orig", "noise", "shift" or "speed"
    int label = -1;
    Image image;
};

struct TrainData {
    std::vector<Example> train, test;
    std::vector<std::string> label_names;
    int n_classes = 0;
};

}  // namespace vser
