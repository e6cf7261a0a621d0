#include "vser/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "vser/error.hpp"

namespace vser {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

// key -> default value; doubles as the registry of known keys
const std::vector<std::pair<std::string, std::string>>& default_entries() {
    static const std::vector<std::pair<std::string, std::string>> kDefaults = {
        {"augment.shift_max_s", "1.0"},
        {"augment.snr_max_db", "30"},
        {"augment.snr_min_db", "15"},
        {"augment.speed_max", "1.1"},
        {"augment.speed_min", "0.9"},
        {"cache.dir", "cache"},
        {"dataset.name", "fixture"},
        {"dataset.root", "data"},
        {"fixture.per_class", "4"},
        {"model.classifier_hidden", "512"},
        {"model.mlp_hidden", "1024"},
        {"model.student_depth", "3"},
        {"model.student_heads", "5"},
        {"model.teacher_depth", "6"},
        {"model.teacher_heads", "5"},
        {"model.teacher_patch", "vertical"},
        {"model.token_dim", "256"},
        {"seed", "1234"},
        {"split.ratio", "0.8"},
        {"stft.hop", "64"},
        {"stft.n_fft", "1024"},
        {"stft.win_length", "512"},
        {"train.alpha", "10"},
        {"train.batch_size", "4"},
        {"train.epochs", "50"},
        {"train.lr0", "1e-4"},
        {"train.lr_halving_period", "10"},
    };
    return kDefaults;
}

}  // namespace

RunConfig RunConfig::defaults() {
    RunConfig c;
    c.kv_ = default_entries();
    return c;
}

RunConfig RunConfig::parse(const std::string& text) {
    RunConfig c = defaults();
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidConfig("config line " + std::to_string(lineno) +
                                ": expected 'key = value'");
        c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string RunConfig::serialize() const {
    std::ostringstream os;
    for (const auto& [k, v] : kv_) os << k << " = " << v << "\n";
    return os.str();
}

bool RunConfig::has(const std::string& key) const {
    return std::binary_search(
        kv_.begin(), kv_.end(), std::pair<std::string, std::string>{key, ""},
        [](const auto& a, const auto& b) { return a.first < b.first; });
}

const std::string& RunConfig::get_str(const std::string& key) const {
    auto it = std::lower_bound(
        kv_.begin(), kv_.end(), key,
        [](const auto& a, const std::string& k) { return a.first < k; });
    if (it == kv_.end() || it->first != key)
        throw InvalidConfig("unknown config key: " + key);
    return it->second;
}

int64_t RunConfig::get_int(const std::string& key) const {
    const auto& v = get_str(key);
    int64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw InvalidConfig("config key " + key + " is not an integer: " + v);
    return out;
}

double RunConfig::get_double(const std::string& key) const {
    const auto& v = get_str(key);
    try {
        size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw InvalidConfig("config key " + key + " is not a number: " + v);
    }
}

bool RunConfig::get_bool(const std::string& key) const {
    const auto& v = get_str(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw InvalidConfig("config key " + key + " is not a boolean: " + v);
}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto it = std::lower_bound(
        kv_.begin(), kv_.end(), key,
        [](const auto& a, const std::string& k) { return a.first < k; });
    if (it != kv_.end() && it->first == key)
        it->second = value;
    else
        kv_.insert(it, {key, value});
}

void RunConfig::set_int(const std::string& key, int64_t v) {
    set(key, std::to_string(v));
}

void RunConfig::set_double(const std::string& key, double v) {
    std::ostringstream os;
    os << v;
    set(key, os.str());
}

void RunConfig::validate() const {
    static const std::set<std::string> known = [] {
        std::set<std::string> s;
        for (const auto& [k, v] : default_entries()) s.insert(k);
        return s;
    }();
    for (const auto& [k, v] : kv_) {
        if (!known.count(k))
            throw InvalidConfig("unknown config key: " + k);
    }
    // force-parse numeric keys so typos fail on load rather than mid-run
    get_int("seed");
    get_int("stft.n_fft");
    get_int("stft.hop");
    get_int("stft.win_length");
    get_int("train.batch_size");
    get_int("train.epochs");
    get_int("train.lr_halving_period");
    get_int("fixture.per_class");
    get_int("model.teacher_depth");
    get_int("model.teacher_heads");
    get_int("model.student_depth");
    get_int("model.student_heads");
    get_int("model.token_dim");
    get_int("model.mlp_hidden");
    get_int("model.classifier_hidden");
    get_double("split.ratio");
    get_double("train.lr0");
    get_double("train.alpha");
    get_double("augment.snr_min_db");
    get_double("augment.snr_max_db");
    get_double("augment.shift_max_s");
    get_double("augment.speed_min");
    get_double("augment.speed_max");
    const auto& patch = get_str("model.teacher_patch");
    if (patch != "vertical" && patch != "square")
        throw InvalidConfig("model.teacher_patch must be vertical or square");
}

}  // namespace vser
