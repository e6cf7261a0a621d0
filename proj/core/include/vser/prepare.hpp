#pragma once

#include <filesystem>

#include "vser/config.hpp"
#include "vser/dataset.hpp"

namespace vser {

struct PrepareStats {
    int computed = 0;   // cache files written this run
    int verified = 0;   // existing files whose hash matched
    int failed = 0;     // clips that could not be decoded/processed
    int train_files = 0;
    int test_files = 0;
};

// Materializes one cache file per (clip, augmentation) pair for the train
// split and per original clip for the test split. Idempotent: a re-run
// verifies recorded hashes and recomputes only missing or changed files.
// Per-clip failures are reported and skipped, not fatal.
PrepareStats prepare_cache(const RunConfig& cfg);

// Loads a cache directory produced by prepare_cache into memory.
TrainData load_prepared(const std::filesystem::path& cache_dir);

}  // namespace vser
