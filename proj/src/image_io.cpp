#include "polypconnect/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace polyp {

namespace {

cv::Mat imread_or_fail(const std::filesystem::path& path, int flags) {
    cv::Mat m = cv::imread(path.string(), flags);
    if (m.empty())
        fail(ErrorCategory::io, "cannot read image: " + path.string());
    return m;
}

cv::Mat resize_mat(const cv::Mat& m, int width, int height) {
    if (m.cols == width && m.rows == height) return m;
    cv::Mat out;
    // area for shrinking, bilinear when growing
    int interp = (width < m.cols || height < m.rows) ? cv::INTER_AREA : cv::INTER_LINEAR;
    cv::resize(m, out, cv::Size(width, height), 0, 0, interp);
    return out;
}

RasterImage to_raster(const cv::Mat& bgr) {
    RasterImage img(bgr.cols, bgr.rows);
    for (int y = 0; y < bgr.rows; ++y) {
        const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            img.at(y, x, 0) = row[x][2] / 255.0;
            img.at(y, x, 1) = row[x][1] / 255.0;
            img.at(y, x, 2) = row[x][0] / 255.0;
        }
    }
    return img;
}

} // namespace

RasterImage load_image(const std::filesystem::path& path, int resolution) {
    cv::Mat m = imread_or_fail(path, cv::IMREAD_COLOR);
    if (resolution > 0) m = resize_mat(m, resolution, resolution);
    return to_raster(m);
}

BinaryMask load_mask(const std::filesystem::path& path, int resolution) {
    cv::Mat m = imread_or_fail(path, cv::IMREAD_COLOR);
    BinaryMask native(m.cols, m.rows);
    for (int y = 0; y < m.rows; ++y) {
        const cv::Vec3b* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < m.cols; ++x) {
            double lum = luminance(row[x][2] / 255.0, row[x][1] / 255.0, row[x][0] / 255.0);
            native.at(y, x) = lum >= 0.5 ? 1 : 0;
        }
    }
    if (resolution > 0) return resize_nearest(native, resolution, resolution);
    return native;
}

EdgeMap load_edges(const std::filesystem::path& path, int resolution) {
    cv::Mat m = imread_or_fail(path, cv::IMREAD_GRAYSCALE);
    EdgeMap native(m.cols, m.rows);
    for (int y = 0; y < m.rows; ++y) {
        const std::uint8_t* row = m.ptr<std::uint8_t>(y);
        for (int x = 0; x < m.cols; ++x)
            native.at(y, x) = row[x] >= 128 ? 1 : 0;
    }
    if (resolution > 0) return resize_nearest(native, resolution, resolution);
    return native;
}

void save_image(const std::filesystem::path& path, const RasterImage& image) {
    cv::Mat m(image.height, image.width, CV_8UC3);
    for (int y = 0; y < image.height; ++y) {
        cv::Vec3b* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                double v = image.at(y, x, c);
                if (v < 0.0) v = 0.0;
                if (v > 1.0) v = 1.0;
                row[x][2 - c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
        }
    }
    if (!cv::imwrite(path.string(), m))
        fail(ErrorCategory::io, "cannot write image: " + path.string());
}

void save_mask(const std::filesystem::path& path, const BinaryMask& mask) {
    cv::Mat m(mask.height, mask.width, CV_8UC1);
    for (int y = 0; y < mask.height; ++y) {
        std::uint8_t* row = m.ptr<std::uint8_t>(y);
        for (int x = 0; x < mask.width; ++x)
            row[x] = mask.at(y, x) ? 255 : 0;
    }
    if (!cv::imwrite(path.string(), m))
        fail(ErrorCategory::io, "cannot write mask: " + path.string());
}

void save_edges(const std::filesystem::path& path, const EdgeMap& edges) {
    cv::Mat m(edges.height, edges.width, CV_8UC1);
    for (int y = 0; y < edges.height; ++y) {
        std::uint8_t* row = m.ptr<std::uint8_t>(y);
        for (int x = 0; x < edges.width; ++x)
            row[x] = edges.at(y, x) ? 255 : 0;
    }
    std::vector<int> params = {cv::IMWRITE_PNG_BILEVEL, 1};
    if (!cv::imwrite(path.string(), m, params))
        fail(ErrorCategory::io, "cannot write edge map: " + path.string());
}

std::pair<int, int> image_dimensions(const std::filesystem::path& path) {
    cv::Mat m = imread_or_fail(path, cv::IMREAD_UNCHANGED);
    return {m.cols, m.rows};
}

RasterImage resize_image(const RasterImage& image, int width, int height) {
    if (image.width == width && image.height == height) return image;
    cv::Mat m(image.height, image.width, CV_64FC3);
    for (int y = 0; y < image.height; ++y) {
        cv::Vec3d* row = m.ptr<cv::Vec3d>(y);
        for (int x = 0; x < image.width; ++x)
            row[x] = {image.at(y, x, 0), image.at(y, x, 1), image.at(y, x, 2)};
    }
    cv::Mat r = resize_mat(m, width, height);
    RasterImage out(width, height);
    for (int y = 0; y < height; ++y) {
        const cv::Vec3d* row = r.ptr<cv::Vec3d>(y);
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < 3; ++c) {
                double v = row[x][static_cast<size_t>(c)];
                out.at(y, x, c) = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            }
        }
    }
    return out;
}

} // namespace polyp
