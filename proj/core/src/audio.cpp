#include "vser/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "vser/error.hpp"

namespace vser {

namespace {

constexpr double kPi = 3.14159265358979323846;

uint32_t read_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) |
           (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16(const unsigned char* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

AudioClip load_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidAudio("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw InvalidAudio("not a RIFF/WAVE file: " + path.string());
    }

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    size_t data_off = 0, data_len = 0;

    size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* hdr = bytes.data() + pos;
        uint32_t chunk_len = read_u32(hdr + 4);
        size_t body = pos + 8;
        if (std::memcmp(hdr, "fmt ", 4) == 0 && body + 16 <= bytes.size()) {
            format = read_u16(bytes.data() + body);
            channels = read_u16(bytes.data() + body + 2);
            rate = read_u32(bytes.data() + body + 4);
            bits = read_u16(bytes.data() + body + 14);
            if (format == 0xfffe && chunk_len >= 40) {
                // WAVE_FORMAT_EXTENSIBLE: actual format is the first two
                // bytes of the SubFormat GUID.
                format = read_u16(bytes.data() + body + 24);
            }
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            data_off = body;
            data_len = std::min<size_t>(chunk_len, bytes.size() - body);
        }
        pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
    }

    if (rate == 0 || channels == 0 || data_off == 0)
        throw InvalidAudio("missing fmt/data chunk: " + path.string());
    if (channels > 2)
        throw InvalidAudio("unsupported channel count: " + path.string());

    const unsigned char* d = bytes.data() + data_off;
    AudioClip clip;
    clip.sample_rate = static_cast<int>(rate);

    if (format == 1 && bits == 16) {
        size_t frames = data_len / (2 * channels);
        clip.samples.resize(frames);
        for (size_t i = 0; i < frames; ++i) {
            double acc = 0.0;
            for (int c = 0; c < channels; ++c) {
                int16_t s;
                std::memcpy(&s, d + (i * channels + c) * 2, 2);
                acc += s / 32768.0;
            }
            clip.samples[i] = static_cast<float>(acc / channels);
        }
    } else if (format == 3 && bits == 32) {
        size_t frames = data_len / (4 * channels);
        clip.samples.resize(frames);
        for (size_t i = 0; i < frames; ++i) {
            double acc = 0.0;
            for (int c = 0; c < channels; ++c) {
                float s;
                std::memcpy(&s, d + (i * channels + c) * 4, 4);
                acc += s;
            }
            clip.samples[i] = static_cast<float>(acc / channels);
        }
    } else {
        throw InvalidAudio("unsupported WAV encoding (format=" +
                           std::to_string(format) + ", bits=" +
                           std::to_string(bits) + "): " + path.string());
    }
    return clip;
}

void save_wav(const std::filesystem::path& path, const AudioClip& clip,
              WavEncoding enc) {
    if (clip.sample_rate <= 0) throw InvalidAudio("invalid sample rate");
    const uint16_t channels = 1;
    const uint16_t bits = enc == WavEncoding::pcm16 ? 16 : 32;
    const uint16_t block = channels * bits / 8;
    const uint32_t data_len =
        static_cast<uint32_t>(clip.samples.size()) * block;

    std::string out;
    out.reserve(44 + data_len);
    out += "RIFF";
    put_u32(out, 36 + data_len);
    out += "WAVEfmt ";
    put_u32(out, 16);
    put_u16(out, enc == WavEncoding::pcm16 ? 1 : 3);
    put_u16(out, channels);
    put_u32(out, static_cast<uint32_t>(clip.sample_rate));
    put_u32(out, static_cast<uint32_t>(clip.sample_rate) * block);
    put_u16(out, block);
    put_u16(out, bits);
    out += "data";
    put_u32(out, data_len);

    if (enc == WavEncoding::pcm16) {
        for (float s : clip.samples) {
            double v = std::clamp(static_cast<double>(s), -1.0, 1.0);
            auto q = static_cast<int16_t>(std::lrint(v * 32767.0));
            out.push_back(static_cast<char>(q & 0xff));
            out.push_back(static_cast<char>((q >> 8) & 0xff));
        }
    } else {
        for (float s : clip.samples) {
            char b[4];
            std::memcpy(b, &s, 4);
            out.append(b, 4);
        }
    }

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
}

std::vector<float> sinc_resample(const std::vector<float>& x, double ratio) {
    if (ratio <= 0.0) throw InvalidAudio("resample ratio must be positive");
    if (x.empty()) return {};

    constexpr int kHalfTaps = 32;  // 64-tap kernel
    const double cutoff = std::min(1.0, ratio);
    const auto n_in = static_cast<int64_t>(x.size());
    const auto n_out = static_cast<int64_t>(std::llround(n_in * ratio));

    std::vector<float> y(static_cast<size_t>(n_out));
    for (int64_t n = 0; n < n_out; ++n) {
        const double t = n / ratio;  // position in input samples
        const auto center = static_cast<int64_t>(std::floor(t));
        double acc = 0.0;
        for (int64_t i = center - kHalfTaps + 1; i <= center + kHalfTaps;
             ++i) {
            if (i < 0 || i >= n_in) continue;
            const double d = t - i;
            double s;
            if (std::abs(d) < 1e-12) {
                s = cutoff;
            } else {
                s = cutoff * std::sin(kPi * cutoff * d) / (kPi * cutoff * d);
            }
            const double w = 0.54 + 0.46 * std::cos(kPi * d / kHalfTaps);
            acc += x[static_cast<size_t>(i)] * s * w;
        }
        y[static_cast<size_t>(n)] = static_cast<float>(acc);
    }
    return y;
}

AudioClip standardize(const AudioClip& clip, int target_rate,
                      double duration_s) {
    if (clip.samples.empty() || clip.sample_rate <= 0)
        throw InvalidAudio("empty audio clip");
    if (target_rate <= 0 || duration_s <= 0.0)
        throw InvalidAudio("invalid standardization target");

    AudioClip out;
    out.sample_rate = target_rate;
    if (clip.sample_rate == target_rate) {
        out.samples = clip.samples;
    } else {
        out.samples = sinc_resample(
            clip.samples,
            static_cast<double>(target_rate) / clip.sample_rate);
    }

    const auto want =
        static_cast<size_t>(std::llround(duration_s * target_rate));
    out.samples.resize(want, 0.0f);  // truncates or zero-pads the tail
    return out;
}

}  // namespace vser
