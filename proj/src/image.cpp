#include "gsdf/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace gsdf {

namespace {
uint8_t to_byte(double v) {
    v = std::clamp(v, 0.0, 1.0);
    return static_cast<uint8_t>(std::lround(v * 255.0));
}
}  // namespace

void write_ppm(const std::string& path, const ImageBuffer& img) {
    if (img.channels != 3) throw std::invalid_argument("write_ppm: need 3 channels");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_ppm: cannot open " + path);
    f << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<uint8_t> row(static_cast<size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c)
                row[static_cast<size_t>(x) * 3 + c] = to_byte(img.at(x, y, c));
        f.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
}

ImageBuffer read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_ppm: cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxv = 0;
    f >> magic >> w >> h >> maxv;
    if (magic != "P6" || maxv != 255) throw std::runtime_error("read_ppm: unsupported format");
    f.get();
    ImageBuffer img(w, h, 3);
    std::vector<uint8_t> row(static_cast<size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        f.read(reinterpret_cast<char*>(row.data()), row.size());
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) = row[static_cast<size_t>(x) * 3 + c] / 255.0;
    }
    if (!f) throw std::runtime_error("read_ppm: truncated " + path);
    return img;
}

// PFM: scanlines stored bottom-to-top, little-endian (negative scale).
void write_pfm(const std::string& path, const ImageBuffer& img) {
    if (img.channels != 1 && img.channels != 3)
        throw std::invalid_argument("write_pfm: need 1 or 3 channels");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pfm: cannot open " + path);
    f << (img.channels == 1 ? "Pf" : "PF") << "\n"
      << img.width << " " << img.height << "\n-1.0\n";
    std::vector<float> row(static_cast<size_t>(img.width) * img.channels);
    for (int y = img.height - 1; y >= 0; --y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                row[static_cast<size_t>(x) * img.channels + c] =
                    static_cast<float>(img.at(x, y, c));
        f.write(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
    }
}

ImageBuffer read_pfm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_pfm: cannot open " + path);
    std::string magic;
    int w = 0, h = 0;
    double scale = 0;
    f >> magic >> w >> h >> scale;
    if ((magic != "Pf" && magic != "PF") || scale >= 0)
        throw std::runtime_error("read_pfm: unsupported format");
    f.get();
    int ch = magic == "Pf" ? 1 : 3;
    ImageBuffer img(w, h, ch);
    std::vector<float> row(static_cast<size_t>(w) * ch);
    for (int y = h - 1; y >= 0; --y) {
        f.read(reinterpret_cast<char*>(row.data()), row.size() * sizeof(float));
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c)
                img.at(x, y, c) = row[static_cast<size_t>(x) * ch + c];
    }
    if (!f) throw std::runtime_error("read_pfm: truncated " + path);
    return img;
}

void write_pgm(const std::string& path, const ImageBuffer& img) {
    if (img.channels != 1) throw std::invalid_argument("write_pgm: need 1 channel");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pgm: cannot open " + path);
    f << "P5\n" << img.width << " " << img.height << "\n255\n";
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            uint8_t b = to_byte(img.at(x, y));
            f.write(reinterpret_cast<const char*>(&b), 1);
        }
}

ImageBuffer read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_pgm: cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxv = 0;
    f >> magic >> w >> h >> maxv;
    if (magic != "P5" || maxv != 255) throw std::runtime_error("read_pgm: unsupported format");
    f.get();
    ImageBuffer img(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            uint8_t b = 0;
            f.read(reinterpret_cast<char*>(&b), 1);
            img.at(x, y) = b / 255.0;
        }
    if (!f) throw std::runtime_error("read_pgm: truncated " + path);
    return img;
}

}  // namespace gsdf
