#include "exitrack/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace exitrack {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("Image: non-positive size");
    data_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
    for (std::size_t i = 0; i < data_.size(); i += 3) {
        data_[i] = fill.r;
        data_[i + 1] = fill.g;
        data_[i + 2] = fill.b;
    }
}

void write_png(const Image& image, const std::filesystem::path& path) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width());
    png.height = static_cast<png_uint_32>(image.height());
    png.format = PNG_FORMAT_RGB;
    if (png_image_write_to_file(&png, path.c_str(), 0, image.bytes().data(), 0, nullptr) == 0) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw std::runtime_error("write_png " + path.string() + ": " + msg);
    }
}

Image read_png(const std::filesystem::path& path) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (png_image_begin_read_from_file(&png, path.c_str()) == 0) {
        throw std::runtime_error("read_png " + path.string() + ": " + png.message);
    }
    png.format = PNG_FORMAT_RGB;
    Image image(static_cast<int>(png.width), static_cast<int>(png.height));
    if (png_image_finish_read(&png, nullptr, image.bytes().data(), 0, nullptr) == 0) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw std::runtime_error("read_png " + path.string() + ": " + msg);
    }
    return image;
}

CropWindow square_window(double cx, double cy, double side, int frame_w, int frame_h) {
    side = std::min({side, static_cast<double>(frame_w), static_cast<double>(frame_h)});
    side = std::max(side, 1.0);
    const double x = std::clamp(cx - 0.5 * side, 0.0, frame_w - side);
    const double y = std::clamp(cy - 0.5 * side, 0.0, frame_h - side);
    return {x, y, side};
}

CropWindow context_window(const BBox& box, double factor, int frame_w, int frame_h,
                          double min_side) {
    const double side = std::max(factor * std::max(box.w, box.h), min_side);
    return square_window(box.cx(), box.cy(), side, frame_w, frame_h);
}

Matrix crop_to_tensor(const Image& image, const CropWindow& window, int out_size) {
    Matrix out(out_size * out_size, 3);
    const double step = window.side / out_size;
    const int w = image.width();
    const int h = image.height();
    const auto bytes = image.bytes();
    auto px = [&](int x, int y, int c) {
        x = std::clamp(x, 0, w - 1);
        y = std::clamp(y, 0, h - 1);
        return bytes[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0;
    };
    for (int i = 0; i < out_size; ++i) {
        const double sy = window.y + (i + 0.5) * step - 0.5;
        const int y0 = static_cast<int>(std::floor(sy));
        const double fy = sy - y0;
        for (int j = 0; j < out_size; ++j) {
            const double sx = window.x + (j + 0.5) * step - 0.5;
            const int x0 = static_cast<int>(std::floor(sx));
            const double fx = sx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = (1.0 - fx) * px(x0, y0, c) + fx * px(x0 + 1, y0, c);
                const double bot = (1.0 - fx) * px(x0, y0 + 1, c) + fx * px(x0 + 1, y0 + 1, c);
                out(i * out_size + j, c) = (1.0 - fy) * top + fy * bot;
            }
        }
    }
    return out;
}

BBox crop_to_frame(const BBox& normalized, const CropWindow& window) {
    return {window.x + normalized.x * window.side, window.y + normalized.y * window.side,
            normalized.w * window.side, normalized.h * window.side};
}

BBox frame_to_crop(const BBox& frame_box, const CropWindow& window) {
    return {(frame_box.x - window.x) / window.side, (frame_box.y - window.y) / window.side,
            frame_box.w / window.side, frame_box.h / window.side};
}

}  // namespace exitrack
