#include "vser/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "vser/audio.hpp"
#include "vser/error.hpp"
#include "vser/rng.hpp"

namespace vser {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

int label_index(const std::vector<std::string>& names,
                const std::string& name) {
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

std::string sanitize(std::string s) {
    for (char& c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '-' || c == '_';
        if (!ok) c = '_';
    }
    return s;
}

// SAVEE: "DC_a01.wav" or "a01.wav" under a speaker directory. Codes:
// a, d, f, h, n plus the two-letter sa and su.
bool parse_savee(const std::string& stem, const fs::path& rel,
                 std::string* speaker, std::string* emotion) {
    std::string code = stem;
    const auto us = stem.find('_');
    if (us != std::string::npos) {
        *speaker = stem.substr(0, us);
        code = stem.substr(us + 1);
    } else if (rel.has_parent_path()) {
        *speaker = rel.parent_path().filename().string();
    }
    if (code.rfind("sa", 0) == 0) *emotion = "sadness";
    else if (code.rfind("su", 0) == 0) *emotion = "surprise";
    else if (!code.empty() && code[0] == 'a') *emotion = "anger";
    else if (!code.empty() && code[0] == 'd') *emotion = "disgust";
    else if (!code.empty() && code[0] == 'f') *emotion = "fear";
    else if (!code.empty() && code[0] == 'h') *emotion = "happiness";
    else if (!code.empty() && code[0] == 'n') *emotion = "neutral";
    else return false;
    return true;
}

// EmoDB: "03a01Fa.wav" = speaker(2) text(3) emotion(1) version(1).
bool parse_emodb(const std::string& stem, std::string* speaker,
                 std::string* emotion) {
    if (stem.size() < 6) return false;
    *speaker = stem.substr(0, 2);
    switch (stem[5]) {
        case 'W': *emotion = "anger"; break;
        case 'A': *emotion = "anxiety"; break;
        case 'L': *emotion = "boredom"; break;
        case 'E': *emotion = "disgust"; break;
        case 'F': *emotion = "happiness"; break;
        case 'N': *emotion = "neutral"; break;
        case 'T': *emotion = "sadness"; break;
        default: return false;
    }
    return true;
}

// CREMA-D: "1001_DFA_ANG_XX.wav" = actor_sentence_emotion_level.
bool parse_crema(const std::string& stem, std::string* speaker,
                 std::string* emotion) {
    std::vector<std::string> parts;
    size_t start = 0;
    for (size_t i = 0; i <= stem.size(); ++i) {
        if (i == stem.size() || stem[i] == '_') {
            parts.push_back(stem.substr(start, i - start));
            start = i + 1;
        }
    }
    if (parts.size() != 4) return false;
    *speaker = parts[0];
    const std::string& code = parts[2];
    if (code == "ANG") *emotion = "anger";
    else if (code == "DIS") *emotion = "disgust";
    else if (code == "FEA") *emotion = "fear";
    else if (code == "HAP") *emotion = "happiness";
    else if (code == "NEU") *emotion = "neutral";
    else if (code == "SAD") *emotion = "sadness";
    else return false;
    return true;
}

}  // namespace

std::vector<std::string> dataset_labels(const std::string& dataset_name) {
    if (dataset_name == "savee" || dataset_name == "fixture")
        return {"anger", "disgust",  "fear",    "happiness",
                "neutral", "sadness", "surprise"};
    if (dataset_name == "emodb")
        return {"anger",   "anxiety", "boredom", "disgust",
                "happiness", "neutral", "sadness"};
    if (dataset_name == "crema-d")
        return {"anger", "disgust", "fear", "happiness", "neutral", "sadness"};
    throw InvalidDataset("unknown dataset: " + dataset_name);
}

DatasetManifest ingest(const fs::path& root, const std::string& dataset_name) {
    DatasetManifest m;
    m.dataset = dataset_name;
    m.label_names = dataset_labels(dataset_name);
    if (dataset_name == "savee") m.expected_count = 480;
    else if (dataset_name == "emodb") m.expected_count = 535;
    else if (dataset_name == "crema-d") m.expected_count = 7442;

    if (!fs::is_directory(root))
        throw IngestError("dataset root is not a directory: " + root.string());

    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (ext == ".wav") files.push_back(e.path());
    }

    for (const auto& p : files) {
        const fs::path rel = fs::relative(p, root);
        const std::string stem = p.stem().string();
        std::string speaker, emotion;
        bool ok = false;
        if (dataset_name == "savee" || dataset_name == "fixture")
            ok = parse_savee(stem, rel, &speaker, &emotion);
        else if (dataset_name == "emodb")
            ok = parse_emodb(stem, &speaker, &emotion);
        else if (dataset_name == "crema-d")
            ok = parse_crema(stem, &speaker, &emotion);
        if (!ok) {
            m.skipped.push_back(rel.string());
            continue;
        }
        ManifestEntry entry;
        fs::path rel_noext = rel;
        rel_noext.replace_extension();
        entry.clip_id = sanitize(rel_noext.generic_string());
        entry.path = p;
        entry.speaker = speaker;
        entry.label = label_index(m.label_names, emotion);
        m.entries.push_back(std::move(entry));
    }

    // order independence: entries sorted by clip_id regardless of
    // directory traversal order
    std::sort(m.entries.begin(), m.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) {
                  return a.clip_id < b.clip_id;
              });
    std::sort(m.skipped.begin(), m.skipped.end());

    if (m.entries.empty())
        throw IngestError("no parseable audio files under " + root.string());
    return m;
}

void make_fixture_tree(const fs::path& root, int per_class, uint64_t seed) {
    if (per_class < 1) throw InvalidConfig("fixture.per_class must be >= 1");
    fs::create_directories(root);
    const auto labels = dataset_labels("fixture");
    const char* codes[] = {"a", "d", "f", "h", "n", "sa", "su"};
    const char* speakers[] = {"DC", "JE", "JK", "KL"};
    const int rate = 16000;

    for (size_t cls = 0; cls < labels.size(); ++cls) {
        for (int i = 0; i < per_class; ++i) {
            char name[64];
            std::snprintf(name, sizeof name, "%s_%s%02d.wav",
                          speakers[i % 4], codes[cls], i + 1);
            Rng rng(derive_seed(seed, name, "fixture"));

            // distinct tone per class, mild per-clip variation
            const double f0 = (280.0 + 140.0 * static_cast<double>(cls)) *
                              (1.0 + 0.02 * (rng.uniform() - 0.5));
            const double dur = 2.4 + 1.4 * rng.uniform();
            const double phase = 2.0 * kPi * rng.uniform();
            const auto n = static_cast<size_t>(dur * rate);

            AudioClip clip;
            clip.sample_rate = rate;
            clip.samples.resize(n);
            for (size_t t = 0; t < n; ++t) {
                const double x = static_cast<double>(t) / rate;
                const double env =
                    std::sin(kPi * static_cast<double>(t) / (n - 1));
                const double s =
                    0.55 * std::sin(2.0 * kPi * f0 * x + phase) +
                    0.20 * std::sin(2.0 * kPi * 2.0 * f0 * x) +
                    0.02 * rng.gaussian();
                clip.samples[t] = static_cast<float>(0.8 * env * s);
            }
            save_wav(root / name, clip, WavEncoding::pcm16);
        }
    }
}

SplitIndices split_dataset(const DatasetManifest& manifest, double ratio,
                           uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw InvalidRatio("split ratio must lie strictly inside (0, 1)");
    if (manifest.entries.empty()) throw InvalidDataset("empty manifest");

    std::map<int, std::vector<size_t>> by_label;
    for (size_t i = 0; i < manifest.entries.size(); ++i)
        by_label[manifest.entries[i].label].push_back(i);

    SplitIndices out;
    for (auto& [label, idx] : by_label) {
        const auto n = idx.size();
        if (n < 2)
            throw StratifyError("class " +
                                manifest.label_names[static_cast<size_t>(label)] +
                                " has fewer than 2 clips");
        Rng rng(derive_seed(seed, manifest.label_names[static_cast<size_t>(label)],
                            "split"));
        rng.shuffle(idx.begin(), idx.end());
        auto n_train = static_cast<size_t>(
            std::llround(ratio * static_cast<double>(n)));
        n_train = std::clamp<size_t>(n_train, 1, n - 1);
        out.train.insert(out.train.end(), idx.begin(), idx.begin() + n_train);
        out.test.insert(out.test.end(), idx.begin() + n_train, idx.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

}  // namespace vser
