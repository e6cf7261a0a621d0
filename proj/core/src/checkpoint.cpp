#include "vser/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "vser/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

namespace vser {

namespace {
constexpr char kMagic[4] = {'V', 'S', 'C', 'K'};

template <class T>
void write_pod(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
}  // namespace

const NamedTensorData* CheckpointData::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

void save_checkpoint(const std::filesystem::path& path,
                     const CheckpointData& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    os.write(kMagic, 4);
    write_pod<uint16_t>(os, ckpt.version);
    write_pod<uint32_t>(os, static_cast<uint32_t>(ckpt.meta.size()));
    os.write(ckpt.meta.data(), static_cast<std::streamsize>(ckpt.meta.size()));
    write_pod<uint32_t>(os, static_cast<uint32_t>(ckpt.tensors.size()));
    for (const auto& t : ckpt.tensors) {
        if (t.name.size() > 0xffff)
            throw DataError("tensor name too long: " + t.name);
        if (shape_numel(t.shape) != static_cast<int64_t>(t.data.size()))
            throw ShapeError("tensor data does not match shape: " + t.name);
        write_pod<uint16_t>(os, static_cast<uint16_t>(t.name.size()));
        os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        write_pod<uint8_t>(os, static_cast<uint8_t>(t.shape.size()));
        for (int d : t.shape) write_pod<uint32_t>(os, static_cast<uint32_t>(d));
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * 4));
    }
    if (!os) throw DataError("short write: " + path.string());
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad checkpoint magic: " + path.string());
    CheckpointData ckpt;
    ckpt.version = read_pod<uint16_t>(in);
    if (ckpt.version != 1)
        throw FormatError("unsupported checkpoint version: " + path.string());
    const auto meta_len = read_pod<uint32_t>(in);
    ckpt.meta.resize(meta_len);
    in.read(ckpt.meta.data(), meta_len);
    const auto count = read_pod<uint32_t>(in);
    ckpt.tensors.resize(count);
    for (auto& t : ckpt.tensors) {
        const auto name_len = read_pod<uint16_t>(in);
        t.name.resize(name_len);
        in.read(t.name.data(), name_len);
        const auto rank = read_pod<uint8_t>(in);
        t.shape.resize(rank);
        for (auto& d : t.shape)
            d = static_cast<int>(read_pod<uint32_t>(in));
        if (!in) throw FormatError("truncated checkpoint: " + path.string());
        t.data.resize(static_cast<size_t>(shape_numel(t.shape)));
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * 4));
    }
    if (!in) throw FormatError("truncated checkpoint: " + path.string());
    return ckpt;
}

}  // namespace vser
