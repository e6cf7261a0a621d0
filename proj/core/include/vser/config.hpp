#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace vser {

// Run configuration: UTF-8 text with dotted keys, one `key = value` per
// line, '#' comments. Values are kept as strings so that
// parse -> serialize -> parse is the identity; typed accessors parse on
// demand. Unknown keys are rejected.
class RunConfig {
  public:
    static RunConfig defaults();
    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);

    std::string serialize() const;  // canonical (sorted) key order

    bool has(const std::string& key) const;
    const std::string& get_str(const std::string& key) const;
    int64_t get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    void set(const std::string& key, const std::string& value);
    void set_int(const std::string& key, int64_t v);
    void set_double(const std::string& key, double v);

    bool operator==(const RunConfig&) const = default;

    // Throws InvalidConfig on unknown keys or unparseable values.
    void validate() const;

    const std::vector<std::pair<std::string, std::string>>& entries() const {
        return kv_;
    }

  private:
    // sorted by key
    std::vector<std::pair<std::string, std::string>> kv_;
};

}  // namespace vser
