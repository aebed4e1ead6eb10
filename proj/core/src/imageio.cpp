#include "shiftsr/imageio.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "shiftsr/errors.hpp"

namespace shiftsr {

using nn::Shape;
using nn::Tensor;

namespace {

int to_u8(double v) {
    const int q = static_cast<int>(std::lround(v * 255.0));
    return std::clamp(q, 0, 255);
}

Tensor mat_to_tensor(const cv::Mat& bgr) {
    Tensor out = Tensor::zeros(Shape{1, 3, bgr.rows, bgr.cols});
    for (int y = 0; y < bgr.rows; ++y) {
        const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            out.at(0, 0, y, x) = row[x][2] / 255.0;
            out.at(0, 1, y, x) = row[x][1] / 255.0;
            out.at(0, 2, y, x) = row[x][0] / 255.0;
        }
    }
    return out;
}

cv::Mat tensor_to_mat(const Tensor& img, int index) {
    if (img.shape.c != 3) throw ShapeError("image tensors must have 3 channels");
    if (index < 0 || index >= img.shape.n) throw IndexError("image index out of range");
    cv::Mat bgr(img.shape.h, img.shape.w, CV_8UC3);
    for (int y = 0; y < img.shape.h; ++y) {
        cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < img.shape.w; ++x) {
            row[x][2] = static_cast<unsigned char>(to_u8(img.at(index, 0, y, x)));
            row[x][1] = static_cast<unsigned char>(to_u8(img.at(index, 1, y, x)));
            row[x][0] = static_cast<unsigned char>(to_u8(img.at(index, 2, y, x)));
        }
    }
    return bgr;
}

bool has_image_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

}  // namespace

Tensor load_image(const std::string& path) {
    cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
    if (bgr.empty()) throw IoError("cannot decode image: " + path);
    return mat_to_tensor(bgr);
}

void save_png(const std::string& path, const Tensor& img, int index) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    if (!cv::imwrite(path, tensor_to_mat(img, index)))
        throw IoError("cannot write image: " + path);
}

Tensor jpeg_roundtrip(const Tensor& img, int quality) {
    if (quality < 1 || quality > 100) throw ConfigError("jpeg quality must be in [1, 100]");
    if (img.shape.n != 1) throw ShapeError("jpeg_roundtrip expects a single image");
    std::vector<unsigned char> buf;
    const std::vector<int> opts{cv::IMWRITE_JPEG_QUALITY, quality};
    if (!cv::imencode(".jpg", tensor_to_mat(img, 0), buf, opts))
        throw IoError("jpeg encode failed");
    cv::Mat back = cv::imdecode(buf, cv::IMREAD_COLOR);
    if (back.empty()) throw IoError("jpeg decode failed");
    return mat_to_tensor(back);
}

std::vector<std::string> list_images(const std::string& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::vector<std::string> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && has_image_extension(entry.path()))
            out.push_back(entry.path().string());
    std::sort(out.begin(), out.end());
    return out;
}

Tensor slice_image(const Tensor& batch, int index) {
    if (index < 0 || index >= batch.shape.n) throw IndexError("batch index out of range");
    Tensor out = Tensor::zeros(Shape{1, batch.shape.c, batch.shape.h, batch.shape.w});
    const std::size_t per = out.v.size();
    std::copy_n(batch.v.begin() + static_cast<std::ptrdiff_t>(per) * index, per, out.v.begin());
    return out;
}

}  // namespace shiftsr
