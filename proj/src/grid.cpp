#include "protoseg/grid.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace protoseg {

namespace {

void check_dims(int height, int width, const char* what) {
    if (height < 1 || width < 1) {
        throw Error(std::string(what) + ": dimensions must be >= 1, got " +
                    std::to_string(height) + "x" + std::to_string(width));
    }
}

}  // namespace

FeatureMap::FeatureMap(int height, int width, int dim)
    : height_(height), width_(width), dim_(dim),
      values_(static_cast<std::size_t>(height) * width * dim, 0.0) {
    check_dims(height, width, "FeatureMap");
    if (dim < 1) throw Error("FeatureMap: dim must be >= 1");
}

FeatureMap::FeatureMap(int height, int width, int dim, std::vector<double> values)
    : height_(height), width_(width), dim_(dim), values_(std::move(values)) {
    check_dims(height, width, "FeatureMap");
    if (dim < 1) throw Error("FeatureMap: dim must be >= 1");
    if (values_.size() != static_cast<std::size_t>(height) * width * dim) {
        throw ShapeMismatchError("FeatureMap: value count " + std::to_string(values_.size()) +
                                 " does not match " + std::to_string(height) + "x" +
                                 std::to_string(width) + "x" + std::to_string(dim));
    }
    validate();
}

void FeatureMap::validate() const {
    for (double v : values_) {
        if (!std::isfinite(v)) throw Error("FeatureMap: non-finite value");
    }
}

BinaryMask::BinaryMask(int height, int width)
    : height_(height), width_(width), values_(static_cast<std::size_t>(height) * width, 0) {
    check_dims(height, width, "BinaryMask");
}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> values)
    : height_(height), width_(width), values_(std::move(values)) {
    check_dims(height, width, "BinaryMask");
    if (values_.size() != static_cast<std::size_t>(height) * width) {
        throw ShapeMismatchError("BinaryMask: value count does not match shape");
    }
    for (std::uint8_t v : values_) {
        if (v > 1) throw Error("BinaryMask: entries must be 0 or 1");
    }
}

int BinaryMask::count() const {
    return std::accumulate(values_.begin(), values_.end(), 0,
                           [](int acc, std::uint8_t v) { return acc + (v ? 1 : 0); });
}

SoftMask::SoftMask(int height, int width)
    : height_(height), width_(width), values_(static_cast<std::size_t>(height) * width, 0.0) {
    check_dims(height, width, "SoftMask");
}

SoftMask::SoftMask(int height, int width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
    check_dims(height, width, "SoftMask");
    if (values_.size() != static_cast<std::size_t>(height) * width) {
        throw ShapeMismatchError("SoftMask: value count does not match shape");
    }
    for (double v : values_) {
        if (!(v >= 0.0 && v <= 1.0)) throw Error("SoftMask: entries must lie in [0,1]");
    }
}

ScalarGrid::ScalarGrid(int h, int w, std::vector<double> v)
    : height(h), width(w), values(std::move(v)) {
    check_dims(h, w, "ScalarGrid");
    if (values.size() != static_cast<std::size_t>(h) * w) {
        throw ShapeMismatchError("ScalarGrid: value count does not match shape");
    }
}

void require_same_shape(const FeatureMap& f, const BinaryMask& m, const char* what) {
    if (!same_shape(f.height(), f.width(), m.height(), m.width())) {
        throw ShapeMismatchError(std::string(what) + ": feature map is " +
                                 std::to_string(f.height()) + "x" + std::to_string(f.width()) +
                                 ", mask is " + std::to_string(m.height()) + "x" +
                                 std::to_string(m.width()));
    }
}

void require_same_shape(const FeatureMap& f, const SoftMask& m, const char* what) {
    if (!same_shape(f.height(), f.width(), m.height(), m.width())) {
        throw ShapeMismatchError(std::string(what) + ": feature map and soft mask shapes differ");
    }
}

void require_same_shape(const BinaryMask& a, const BinaryMask& b, const char* what) {
    if (!same_shape(a.height(), a.width(), b.height(), b.width())) {
        throw ShapeMismatchError(std::string(what) + ": mask shapes differ");
    }
}

}  // namespace protoseg
