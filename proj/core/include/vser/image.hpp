#pragma once

#include <cstddef>
#include <vector>

namespace vser {

// Row-major single-channel real image. Log-Mel spectrogram images and
// attention masks are always kImageSize x kImageSize; figure canvases vary.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<float> data;  // height * width, row-major

    Image() = default;
    Image(int h, int w, float fill = 0.0f)
        : height(h), width(w),
          data(static_cast<size_t>(h) * static_cast<size_t>(w), fill) {}

    float& at(int r, int c) {
        return data[static_cast<size_t>(r) * width + c];
    }
    float at(int r, int c) const {
        return data[static_cast<size_t>(r) * width + c];
    }
    size_t size() const { return data.size(); }
};

inline constexpr int kImageSize = 128;

}  // namespace vser
