#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "exitrack/geometry.hpp"
#include "exitrack/nn/tensor.hpp"

namespace exitrack {

struct Rgb {
    std::uint8_t r{0};
    std::uint8_t g{0};
    std::uint8_t b{0};
    bool operator==(const Rgb&) const = default;
};

/// 8-bit interleaved RGB image.
class Image {
public:
    Image() = default;
    Image(int width, int height, Rgb fill = {});

    [[nodiscard]] int width() const { return width_; }
    [[nodiscard]] int height() const { return height_; }
    [[nodiscard]] bool empty() const { return data_.empty(); }

    [[nodiscard]] Rgb at(int x, int y) const {
        const auto i = index(x, y);
        return {data_[i], data_[i + 1], data_[i + 2]};
    }
    void set(int x, int y, Rgb c) {
        const auto i = index(x, y);
        data_[i] = c.r;
        data_[i + 1] = c.g;
        data_[i + 2] = c.b;
    }

    [[nodiscard]] std::span<const std::uint8_t> bytes() const { return data_; }
    [[nodiscard]] std::span<std::uint8_t> bytes() { return data_; }

    bool operator==(const Image&) const = default;

private:
    [[nodiscard]] std::size_t index(int x, int y) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                static_cast<std::size_t>(x)) * 3;
    }

    int width_{0};
    int height_{0};
    std::vector<std::uint8_t> data_;
};

void write_png(const Image& image, const std::filesystem::path& path);
[[nodiscard]] Image read_png(const std::filesystem::path& path);

/// Square crop window in frame pixel coordinates.
struct CropWindow {
    double x{0.0};
    double y{0.0};
    double side{1.0};
};

/// Square window of side `side` centred on (cx, cy), shrunk to fit and shifted inside the frame.
[[nodiscard]] CropWindow square_window(double cx, double cy, double side, int frame_w,
                                       int frame_h);

/// Window of side factor * max(w, h) around `box`, at least `min_side`, clamped to the frame.
[[nodiscard]] CropWindow context_window(const BBox& box, double factor, int frame_w, int frame_h,
                                        double min_side);

/// Bilinear resample of `window` to out_size x out_size. Result is (out_size^2) x 3 in [0, 1].
[[nodiscard]] Matrix crop_to_tensor(const Image& image, const CropWindow& window, int out_size);

/// Normalized crop coordinates ([0,1] across the window) to frame pixels, and back.
[[nodiscard]] BBox crop_to_frame(const BBox& normalized, const CropWindow& window);
[[nodiscard]] BBox frame_to_crop(const BBox& frame_box, const CropWindow& window);

}  // namespace exitrack
