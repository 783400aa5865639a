#pragma once

#include <string>
#include <vector>

namespace gsdf {

/// Row-major scalar image, 1 or 3 channels.
struct ImageBuffer {
    int width = 0, height = 0, channels = 1;
    std::vector<double> data;

    ImageBuffer() = default;
    ImageBuffer(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {}

    double& at(int x, int y, int c = 0) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c = 0) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    size_t size() const { return data.size(); }
    bool same_shape(const ImageBuffer& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

// Image IO (formats documented in docs/formats.md).
void write_ppm(const std::string& path, const ImageBuffer& img);   // 3-channel, [0,1]
ImageBuffer read_ppm(const std::string& path);
void write_pfm(const std::string& path, const ImageBuffer& img);   // 1 or 3 channel float
ImageBuffer read_pfm(const std::string& path);
void write_pgm(const std::string& path, const ImageBuffer& img);   // 1-channel mask
ImageBuffer read_pgm(const std::string& path);

}  // namespace gsdf
