#include "vser/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string_view>

#include "vser/error.hpp"
#include "vser/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "cache formats are little-endian");

namespace vser {

namespace {
constexpr char kCacheMagic[4] = {'V', 'S', 'E', 'R'};
constexpr uint16_t kCacheVersion = 1;
}  // namespace

void save_image_cache(const std::filesystem::path& path, const Image& img) {
    if (img.height <= 0 || img.width <= 0 || img.height > 0xffff ||
        img.width > 0xffff)
        throw ShapeError("image dimensions not representable");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    os.write(kCacheMagic, 4);
    const auto h = static_cast<uint16_t>(img.height);
    const auto w = static_cast<uint16_t>(img.width);
    os.write(reinterpret_cast<const char*>(&kCacheVersion), 2);
    os.write(reinterpret_cast<const char*>(&h), 2);
    os.write(reinterpret_cast<const char*>(&w), 2);
    os.write(reinterpret_cast<const char*>(img.data.data()),
             static_cast<std::streamsize>(img.data.size() * 4));
    if (!os) throw DataError("short write: " + path.string());
}

Image load_image_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    char magic[4];
    uint16_t version = 0, h = 0, w = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 2);
    in.read(reinterpret_cast<char*>(&h), 2);
    in.read(reinterpret_cast<char*>(&w), 2);
    if (!in || std::memcmp(magic, kCacheMagic, 4) != 0)
        throw FormatError("bad cache magic: " + path.string());
    if (version != kCacheVersion)
        throw FormatError("unsupported cache version: " + path.string());
    Image img(h, w);
    in.read(reinterpret_cast<char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size() * 4));
    if (!in) throw FormatError("truncated cache file: " + path.string());
    return img;
}

void save_pgm(const std::filesystem::path& path, const Image& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    os << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::string bytes;
    bytes.reserve(img.data.size());
    for (float v : img.data) {
        const double q = std::clamp(static_cast<double>(v), 0.0, 1.0);
        bytes.push_back(
            static_cast<char>(static_cast<unsigned char>(std::lrint(q * 255.0))));
    }
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw DataError("short write: " + path.string());
}

Image load_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw FormatError("not a P5 PGM: " + path.string());
    int w = 0, h = 0, maxval = 0;
    in >> w >> h >> maxval;
    if (!in || w <= 0 || h <= 0 || maxval != 255)
        throw FormatError("unsupported PGM header: " + path.string());
    in.get();  // single whitespace after header
    Image img(h, w);
    std::vector<unsigned char> raw(img.data.size());
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
    if (!in) throw FormatError("truncated PGM: " + path.string());
    for (size_t i = 0; i < raw.size(); ++i)
        img.data[i] = static_cast<float>(raw[i]) / 255.0f;
    return img;
}

uint64_t file_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        h = fnv1a64(std::string_view(buf, static_cast<size_t>(in.gcount())),
                    h);
        if (!in) break;
    }
    return h;
}

}  // namespace vser
