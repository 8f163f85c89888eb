#ifndef PROTOSEG_GRID_HPP
#define PROTOSEG_GRID_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "protoseg/errors.hpp"

namespace protoseg {

// Dense per-pixel embedding grid. Pixels are stored row-major
// (pixel j = y * width + x, j in [0, w*h)), channels interleaved.
class FeatureMap {
public:
    FeatureMap(int height, int width, int dim);
    FeatureMap(int height, int width, int dim, std::vector<double> values);

    int height() const { return height_; }
    int width() const { return width_; }
    int dim() const { return dim_; }
    int pixels() const { return height_ * width_; }

    double at(int pixel, int channel) const {
        return values_[static_cast<std::size_t>(pixel) * dim_ + channel];
    }
    double& at(int pixel, int channel) {
        return values_[static_cast<std::size_t>(pixel) * dim_ + channel];
    }
    // Contiguous channel values of one pixel.
    std::span<const double> pixel(int j) const {
        return {values_.data() + static_cast<std::size_t>(j) * dim_,
                static_cast<std::size_t>(dim_)};
    }

    const std::vector<double>& values() const { return values_; }

    // Re-checks the finiteness invariant after in-place writes.
    void validate() const;

private:
    int height_ = 0;
    int width_ = 0;
    int dim_ = 0;
    std::vector<double> values_;
};

// Per-pixel {0,1} indicator grid.
class BinaryMask {
public:
    BinaryMask(int height, int width);
    BinaryMask(int height, int width, std::vector<std::uint8_t> values);

    int height() const { return height_; }
    int width() const { return width_; }
    int pixels() const { return height_ * width_; }

    std::uint8_t at(int pixel) const { return values_[pixel]; }
    void set(int pixel, bool on) { values_[pixel] = on ? 1 : 0; }

    // Number of set pixels.
    int count() const;
    bool empty() const { return count() == 0; }

    const std::vector<std::uint8_t>& values() const { return values_; }

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> values_;
};

// Per-pixel confidence grid, entries in [0,1].
class SoftMask {
public:
    SoftMask(int height, int width);
    SoftMask(int height, int width, std::vector<double> values);

    int height() const { return height_; }
    int width() const { return width_; }
    int pixels() const { return height_ * width_; }

    double at(int pixel) const { return values_[pixel]; }

    const std::vector<double>& values() const { return values_; }

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<double> values_;
};

// Unconstrained per-pixel scalar grid (distance maps and the like).
struct ScalarGrid {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    ScalarGrid() = default;
    ScalarGrid(int h, int w) : height(h), width(w), values(static_cast<std::size_t>(h) * w, 0.0) {}
    ScalarGrid(int h, int w, std::vector<double> v);

    int pixels() const { return height * width; }
    double at(int pixel) const { return values[pixel]; }
};

inline bool same_shape(int h1, int w1, int h2, int w2) { return h1 == h2 && w1 == w2; }

void require_same_shape(const FeatureMap& f, const BinaryMask& m, const char* what);
void require_same_shape(const FeatureMap& f, const SoftMask& m, const char* what);
void require_same_shape(const BinaryMask& a, const BinaryMask& b, const char* what);

}  // namespace protoseg

#endif  // PROTOSEG_GRID_HPP
