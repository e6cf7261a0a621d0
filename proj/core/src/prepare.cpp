#include "vser/prepare.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "vser/augment.hpp"
#include "vser/dsp.hpp"
#include "vser/error.hpp"
#include "vser/image_io.hpp"
#include "vser/rng.hpp"

namespace vser {

namespace fs = std::filesystem;

namespace {

constexpr const char* kIndexName = "index.tsv";

struct IndexRow {
    std::string clip_id, split, aug, file;
    int label = -1;
    uint64_t hash = 0;
};

uint64_t config_fingerprint(const RunConfig& cfg) {
    // keys that change cache contents
    static const char* keys[] = {
        "dataset.name",      "dataset.root",       "seed",
        "split.ratio",       "stft.n_fft",         "stft.hop",
        "stft.win_length",   "fixture.per_class",  "augment.snr_min_db",
        "augment.snr_max_db", "augment.shift_max_s", "augment.speed_min",
        "augment.speed_max"};
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const char* k : keys) {
        h = fnv1a64(k, h);
        h = fnv1a64(cfg.get_str(k), h);
    }
    return h;
}

std::string hash_hex(uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_index(const fs::path& dir, uint64_t fingerprint,
                 const std::vector<std::string>& labels,
                 const std::vector<IndexRow>& rows) {
    std::ofstream os(dir / kIndexName);
    if (!os) throw DataError("cannot write cache index");
    os << "# vser cache index v1\n";
    os << "fingerprint\t" << hash_hex(fingerprint) << "\n";
    os << "labels";
    for (const auto& l : labels) os << "\t" << l;
    os << "\n";
    for (const auto& r : rows)
        os << r.clip_id << "\t" << r.split << "\t" << r.aug << "\t" << r.label
           << "\t" << r.file << "\t" << hash_hex(r.hash) << "\n";
}

bool read_index(const fs::path& dir, uint64_t* fingerprint,
                std::vector<std::string>* labels, std::vector<IndexRow>* rows) {
    std::ifstream in(dir / kIndexName);
    if (!in) return false;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# vser cache index", 0) != 0)
        return false;
    *fingerprint = 0;
    labels->clear();
    rows->clear();
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string first;
        if (!std::getline(ls, first, '\t')) continue;
        if (first == "fingerprint") {
            std::string v;
            std::getline(ls, v, '\t');
            *fingerprint = std::stoull(v, nullptr, 16);
        } else if (first == "labels") {
            std::string v;
            while (std::getline(ls, v, '\t')) labels->push_back(v);
        } else {
            IndexRow r;
            r.clip_id = first;
            std::string label_str, hash_str;
            std::getline(ls, r.split, '\t');
            std::getline(ls, r.aug, '\t');
            std::getline(ls, label_str, '\t');
            std::getline(ls, r.file, '\t');
            std::getline(ls, hash_str, '\t');
            r.label = std::stoi(label_str);
            r.hash = std::stoull(hash_str, nullptr, 16);
            rows->push_back(std::move(r));
        }
    }
    return true;
}

}  // namespace

PrepareStats prepare_cache(const RunConfig& cfg) {
    const std::string dataset = cfg.get_str("dataset.name");
    const fs::path root = cfg.get_str("dataset.root");
    const fs::path cache_dir = cfg.get_str("cache.dir");
    const auto seed = static_cast<uint64_t>(cfg.get_int("seed"));

    if (dataset == "fixture" && !fs::exists(root))
        make_fixture_tree(root, static_cast<int>(cfg.get_int("fixture.per_class")),
                          seed);

    auto manifest = ingest(root, dataset);
    if (manifest.expected_count > 0 &&
        static_cast<int>(manifest.entries.size()) != manifest.expected_count) {
        std::fprintf(stderr,
                     "warning: %s has %zu clips, expected %d (partial corpus?)\n",
                     dataset.c_str(), manifest.entries.size(),
                     manifest.expected_count);
    }
    for (const auto& s : manifest.skipped)
        std::fprintf(stderr, "warning: skipped unparseable file %s\n", s.c_str());

    const auto split = split_dataset(manifest, cfg.get_double("split.ratio"), seed);

    fs::create_directories(cache_dir);
    const uint64_t fingerprint = config_fingerprint(cfg);

    // reusable hashes from a previous run with identical configuration
    std::map<std::string, uint64_t> prior;
    {
        uint64_t fp = 0;
        std::vector<std::string> labels;
        std::vector<IndexRow> rows;
        if (read_index(cache_dir, &fp, &labels, &rows) && fp == fingerprint)
            for (const auto& r : rows) prior[r.file] = r.hash;
    }

    const auto params =
        StftParams::make(static_cast<int>(cfg.get_int("stft.n_fft")),
                         static_cast<int>(cfg.get_int("stft.hop")),
                         static_cast<int>(cfg.get_int("stft.win_length")));
    const auto fb = mel_filterbank(kImageSize, params.n_fft, 16000);

    PrepareStats stats;
    std::vector<IndexRow> rows;

    auto process = [&](const ManifestEntry& entry, const char* split_name,
                       bool with_augment) {
        AudioClip std_clip;
        try {
            std_clip = standardize(load_wav(entry.path));
        } catch (const DataError& e) {
            std::fprintf(stderr, "warning: %s: %s\n", entry.clip_id.c_str(),
                         e.what());
            ++stats.failed;
            return;
        }
        struct Variant {
            const char* aug;
            AudioClip clip;
        };
        std::vector<Variant> variants;
        variants.push_back({"orig", std_clip});
        if (with_augment) {
            for (auto kind : {AugmentKind::noise, AugmentKind::time_shift,
                              AugmentKind::speed}) {
                const char* name = augment_kind_name(kind);
                const auto spec = AugmentSpec::sample(
                    kind, derive_seed(seed, entry.clip_id,
                                      std::string(name) + "-param"));
                variants.push_back(
                    {name, augment(std_clip, spec,
                                   derive_seed(seed, entry.clip_id,
                                               std::string(name) + "-rng"))});
            }
        }
        for (auto& v : variants) {
            IndexRow r;
            r.clip_id = entry.clip_id;
            r.split = split_name;
            r.aug = v.aug;
            r.label = entry.label;
            r.file = entry.clip_id + "__" + v.aug + ".vser";
            const fs::path out_path = cache_dir / r.file;
            auto it = prior.find(r.file);
            if (it != prior.end() && fs::exists(out_path) &&
                file_hash(out_path) == it->second) {
                r.hash = it->second;
                ++stats.verified;
            } else {
                save_image_cache(out_path, clip_to_log_mel(v.clip, params, fb));
                r.hash = file_hash(out_path);
                ++stats.computed;
            }
            rows.push_back(std::move(r));
            if (std::string_view(split_name) == "train")
                ++stats.train_files;
            else
                ++stats.test_files;
        }
    };

    for (size_t i : split.train)
        process(manifest.entries[i], "train", /*with_augment=*/true);
    for (size_t i : split.test)
        process(manifest.entries[i], "test", /*with_augment=*/false);

    write_index(cache_dir, fingerprint, manifest.label_names, rows);
    return stats;
}

TrainData load_prepared(const fs::path& cache_dir) {
    uint64_t fp = 0;
    std::vector<std::string> labels;
    std::vector<IndexRow> rows;
    if (!read_index(cache_dir, &fp, &labels, &rows))
        throw PrereqError("no cache index under " + cache_dir.string() +
                          " (run `prepare` first)");
    TrainData data;
    data.label_names = labels;
    data.n_classes = static_cast<int>(labels.size());
    for (const auto& r : rows) {
        Example ex;
        ex.clip_id = r.clip_id;
        ex.aug = r.aug;
        ex.label = r.label;
        ex.image = load_image_cache(cache_dir / r.file);
        if (r.split == "train")
            data.train.push_back(std::move(ex));
        else
            data.test.push_back(std::move(ex));
    }
    if (data.train.empty() || data.test.empty())
        throw InvalidDataset("cache at " + cache_dir.string() +
                             " has an empty split");
    return data;
}

}  // namespace vser
