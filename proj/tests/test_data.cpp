#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <cmath>
#include <set>

#include "vser/audio.hpp"
#include "vser/config.hpp"
#include "vser/dataset.hpp"
#include "vser/error.hpp"
#include "vser/image_io.hpp"
#include "vser/prepare.hpp"

using namespace vser;
namespace fs = std::filesystem;

namespace {
fs::path fresh_dir(const std::string& name) {
    auto d = fs::temp_directory_path() / "vser_test_data" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

void touch(const fs::path& p) {
    fs::create_directories(p.parent_path());
    std::ofstream(p).put('\0');
}
}  // namespace

TEST_CASE("config: round trip is the identity") {
    const std::string text =
        "# comment\n"
        "train.batch_size = 4\n"
        "dataset.name = savee\n"
        "train.lr0 = 1e-4\n";
    const auto cfg = RunConfig::parse(text);
    const auto again = RunConfig::parse(cfg.serialize());
    CHECK(cfg == again);
    CHECK(cfg.get_int("train.batch_size") == 4);
    CHECK(cfg.get_str("dataset.name") == "savee");
    CHECK(cfg.get_double("train.lr0") == 1e-4);
    // untouched keys hold their defaults
    CHECK(cfg.get_int("train.epochs") == 50);
    CHECK(cfg.get_double("train.alpha") == 10.0);
}

TEST_CASE("config: unknown keys and bad values are rejected") {
    CHECK_THROWS_AS(RunConfig::parse("no.such.key = 1\n"), InvalidConfig);
    CHECK_THROWS_AS(RunConfig::parse("train.epochs = soon\n"), InvalidConfig);
    CHECK_THROWS_AS(RunConfig::parse("garbage line\n"), InvalidConfig);
}

TEST_CASE("ingest: SAVEE naming, counts and order independence") {
    const auto root = fresh_dir("savee");
    // 480 clips: 15 per emotion x 4 speakers, except neutral with 30
    const char* codes[] = {"a", "d", "f", "h", "n", "sa", "su"};
    const char* speakers[] = {"DC", "JE", "JK", "KL"};
    for (const char* sp : speakers)
        for (const char* code : codes) {
            const int per = std::string(code) == "n" ? 30 : 15;
            for (int i = 1; i <= per; ++i) {
                char name[64];
                std::snprintf(name, sizeof name, "%s/%s%02d.wav", sp, code, i);
                touch(root / name);
            }
        }
    const auto m = ingest(root, "savee");
    CHECK(m.entries.size() == 480);
    CHECK(m.label_names.size() == 7);
    CHECK(m.expected_count == 480);
    CHECK(m.skipped.empty());
    // speaker-directory layout: speaker parsed from the parent directory
    CHECK(m.entries.front().speaker == "DC");
    // entries sorted by clip_id no matter the traversal order
    for (size_t i = 1; i < m.entries.size(); ++i)
        CHECK(m.entries[i - 1].clip_id < m.entries[i].clip_id);
    const auto again = ingest(root, "savee");
    for (size_t i = 0; i < m.entries.size(); ++i)
        CHECK(again.entries[i].clip_id == m.entries[i].clip_id);

    // label distribution: neutral 120, everything else 60
    std::vector<int> counts(7, 0);
    for (const auto& e : m.entries) ++counts[static_cast<size_t>(e.label)];
    const auto neutral = static_cast<size_t>(
        std::find(m.label_names.begin(), m.label_names.end(), "neutral") -
        m.label_names.begin());
    for (size_t c = 0; c < counts.size(); ++c)
        CHECK(counts[c] == (c == neutral ? 120 : 60));
}

TEST_CASE("ingest: flat SAVEE names, skip report, failure modes") {
    const auto root = fresh_dir("savee_flat");
    touch(root / "DC_a01.wav");
    touch(root / "JE_sa03.wav");
    touch(root / "KL_su11.wav");
    touch(root / "README.txt");      // ignored: not .wav
    touch(root / "JK_x01.wav");      // unparseable code
    const auto m = ingest(root, "savee");
    CHECK(m.entries.size() == 3);
    CHECK(m.skipped.size() == 1);
    CHECK(m.entries[0].speaker == "DC");
    CHECK(m.label_names[static_cast<size_t>(m.entries[0].label)] == "anger");
    CHECK(m.label_names[static_cast<size_t>(m.entries[1].label)] == "sadness");
    CHECK(m.label_names[static_cast<size_t>(m.entries[2].label)] == "surprise");

    const auto empty = fresh_dir("savee_empty");
    CHECK_THROWS_AS(ingest(empty, "savee"), IngestError);
    CHECK_THROWS_AS(ingest(root / "nope", "savee"), IngestError);
}

TEST_CASE("ingest: EmoDB and CREMA-D filename conventions") {
    const auto emodb = fresh_dir("emodb");
    touch(emodb / "03a01Fa.wav");  // happiness
    touch(emodb / "08b02Wb.wav");  // anger
    touch(emodb / "11a04Tc.wav");  // sadness
    touch(emodb / "16a05Lb.wav");  // boredom
    const auto me = ingest(emodb, "emodb");
    CHECK(me.entries.size() == 4);
    CHECK(me.label_names[static_cast<size_t>(me.entries[0].label)] == "happiness");
    CHECK(me.entries[0].speaker == "03");
    CHECK(me.label_names[static_cast<size_t>(me.entries[1].label)] == "anger");
    CHECK(me.label_names[static_cast<size_t>(me.entries[2].label)] == "sadness");
    CHECK(me.label_names[static_cast<size_t>(me.entries[3].label)] == "boredom");

    const auto crema = fresh_dir("crema");
    touch(crema / "1001_DFA_ANG_XX.wav");
    touch(crema / "1042_IEO_NEU_MD.wav");
    touch(crema / "1080_TSI_FEA_LO.wav");
    const auto mc = ingest(crema, "crema-d");
    CHECK(mc.entries.size() == 3);
    CHECK(mc.label_names.size() == 6);
    CHECK(mc.label_names[static_cast<size_t>(mc.entries[0].label)] == "anger");
    CHECK(mc.label_names[static_cast<size_t>(mc.entries[1].label)] == "neutral");
    CHECK(mc.label_names[static_cast<size_t>(mc.entries[2].label)] == "fear");
    CHECK(mc.entries[1].speaker == "1042");
}

TEST_CASE("split_dataset: SAVEE proportions, determinism, guards") {
    // synthetic manifest mirroring SAVEE's distribution
    DatasetManifest m;
    m.dataset = "savee";
    m.label_names = dataset_labels("savee");
    auto add = [&](int label, int count) {
        for (int i = 0; i < count; ++i) {
            ManifestEntry e;
            e.clip_id = m.label_names[static_cast<size_t>(label)] + "_" +
                        std::to_string(i);
            e.label = label;
            m.entries.push_back(e);
        }
    };
    const auto neutral = static_cast<int>(
        std::find(m.label_names.begin(), m.label_names.end(), "neutral") -
        m.label_names.begin());
    for (int l = 0; l < 7; ++l) add(l, l == neutral ? 120 : 60);

    const auto split = split_dataset(m, 0.8, 42);
    CHECK(split.train.size() == 384);
    CHECK(split.test.size() == 96);

    // per class 80/20 within one clip
    std::vector<int> train_counts(7, 0), test_counts(7, 0);
    for (auto i : split.train) ++train_counts[static_cast<size_t>(m.entries[i].label)];
    for (auto i : split.test) ++test_counts[static_cast<size_t>(m.entries[i].label)];
    for (int l = 0; l < 7; ++l) {
        const int total = l == neutral ? 120 : 60;
        CHECK(std::abs(train_counts[static_cast<size_t>(l)] -
                       static_cast<int>(std::lround(0.8 * total))) <= 1);
        CHECK(train_counts[static_cast<size_t>(l)] +
                  test_counts[static_cast<size_t>(l)] ==
              total);
    }

    // disjoint and complete
    std::set<size_t> seen(split.train.begin(), split.train.end());
    for (auto i : split.test) CHECK(seen.insert(i).second);
    CHECK(seen.size() == m.entries.size());

    // deterministic
    const auto split2 = split_dataset(m, 0.8, 42);
    CHECK(split2.train == split.train);
    CHECK(split2.test == split.test);
    const auto split3 = split_dataset(m, 0.8, 43);
    CHECK(split3.train != split.train);

    CHECK_THROWS_AS(split_dataset(m, 1.0, 1), InvalidRatio);
    CHECK_THROWS_AS(split_dataset(m, 0.0, 1), InvalidRatio);

    DatasetManifest tiny;
    tiny.dataset = "savee";
    tiny.label_names = m.label_names;
    ManifestEntry lone;
    lone.clip_id = "only";
    lone.label = 0;
    tiny.entries.push_back(lone);
    CHECK_THROWS_AS(split_dataset(tiny, 0.8, 1), StratifyError);
}

TEST_CASE("fixture tree: deterministic, parseable, stratifiable") {
    const auto root = fresh_dir("fixture");
    make_fixture_tree(root, 2, 7);
    const auto m = ingest(root, "fixture");
    CHECK(m.entries.size() == 14);
    std::vector<int> counts(7, 0);
    for (const auto& e : m.entries) ++counts[static_cast<size_t>(e.label)];
    for (int c : counts) CHECK(c == 2);
    // 2 clips per class split 1/1
    const auto split = split_dataset(m, 0.8, 9);
    CHECK(split.train.size() == 7);
    CHECK(split.test.size() == 7);
    // deterministic audio
    const auto a = load_wav(m.entries[0].path);
    make_fixture_tree(fresh_dir("fixture2"), 2, 7);
    const auto b = load_wav(fs::temp_directory_path() / "vser_test_data" /
                            "fixture2" / m.entries[0].path.filename());
    CHECK(a.samples == b.samples);
}

TEST_CASE("prepare: multiplicity, idempotence, fault isolation") {
    const auto base = fresh_dir("prepare");
    RunConfig cfg = RunConfig::defaults();
    cfg.set("dataset.name", "fixture");
    cfg.set("dataset.root", (base / "data").string());
    cfg.set("cache.dir", (base / "cache").string());
    cfg.set_int("fixture.per_class", 2);

    const auto stats = prepare_cache(cfg);
    // 7 train clips x (original + 3 augmentations) + 7 test originals
    CHECK(stats.train_files == 28);
    CHECK(stats.test_files == 7);
    CHECK(stats.computed == 35);
    CHECK(stats.failed == 0);

    const auto again = prepare_cache(cfg);
    CHECK(again.computed == 0);
    CHECK(again.verified == 35);

    // a corrupted cache file is recomputed
    std::ofstream(base / "cache" / "DC_a01__orig.vser") << "junk";
    const auto healed = prepare_cache(cfg);
    CHECK(healed.computed == 1);
    CHECK(healed.verified == 34);

    // a corrupted source wav fails that clip only
    std::ofstream(base / "data" / "DC_a01.wav") << "not audio";
    const auto partial = prepare_cache(cfg);
    CHECK(partial.failed == 1);
    CHECK(partial.train_files + partial.test_files == 35 - 4);

    const auto data = load_prepared(base / "cache");
    CHECK(data.n_classes == 7);
    CHECK(data.test.size() + data.train.size() == 35 - 4);
    for (const auto& ex : data.test) CHECK(ex.aug == "orig");
    // no augmented variant of a test clip lands in train
    std::set<std::string> test_ids;
    for (const auto& ex : data.test) test_ids.insert(ex.clip_id);
    for (const auto& ex : data.train) CHECK(!test_ids.count(ex.clip_id));
}

TEST_CASE("image cache and PGM round trips") {
    const auto dir = fresh_dir("formats");
    Image img(16, 24);
    {
        uint64_t s = 5;
        for (auto& v : img.data) {
            s = s * 6364136223846793005ULL + 1442695040888963407ULL;
            v = static_cast<float>((s >> 33) % 1000) / 999.0f;
        }
    }
    save_image_cache(dir / "img.vser", img);
    const auto back = load_image_cache(dir / "img.vser");
    CHECK(back.height == 16);
    CHECK(back.width == 24);
    CHECK(back.data == img.data);  // bit-exact

    save_pgm(dir / "img.pgm", img);
    const auto pgm = load_pgm(dir / "img.pgm");
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::abs(pgm.data[i] - img.data[i]) <= 0.5f / 255.0f + 1e-6f);

    std::ofstream(dir / "bad.vser") << "XXXX";
    CHECK_THROWS_AS(load_image_cache(dir / "bad.vser"), FormatError);
}
