#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace art {

/// Row-major H x W x C image buffer in double precision.
/// Channel values are on the [-1, 1] scale unless a function states otherwise.
class Raster {
public:
    Raster() = default;
    Raster(int height, int width, int channels, double fill = 0.0)
        : height_(height), width_(width), channels_(channels),
          data_(static_cast<std::size_t>(height) * width * channels, fill) {}

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }

    double& at(int y, int x, int c) {
        assert(y >= 0 && y < height_ && x >= 0 && x < width_ && c >= 0 && c < channels_);
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    double at(int y, int x, int c) const {
        assert(y >= 0 && y < height_ && x >= 0 && x < width_ && c >= 0 && c < channels_);
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Raster& other) const {
        return height_ == other.height_ && width_ == other.width_ &&
               channels_ == other.channels_;
    }

    bool operator==(const Raster& other) const {
        return height_ == other.height_ && width_ == other.width_ &&
               channels_ == other.channels_ && data_ == other.data_;
    }

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

}  // namespace art
