#include "geocurate/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "geocurate/io.hpp"
#include "geocurate/parallel.hpp"

namespace geocurate {

namespace {

cv::Mat decode(std::span<const std::uint8_t> encoded, int flags) {
    if (encoded.empty()) throw ImageDecodeError("empty image buffer");
    const cv::Mat buf(1, static_cast<int>(encoded.size()), CV_8UC1, const_cast<std::uint8_t*>(encoded.data()));
    cv::Mat img;
    try {
        img = cv::imdecode(buf, flags);
    } catch (const cv::Exception& e) {
        throw ImageDecodeError(std::string("cannot decode image: ") + e.what());
    }
    if (img.empty()) throw ImageDecodeError("cannot decode image");
    return img;
}

cv::Mat to_8bit(const cv::Mat& img) {
    if (img.depth() == CV_8U) return img;
    cv::Mat out;
    img.convertTo(out, CV_8U, img.depth() == CV_16U ? 1.0 / 257.0 : 255.0);
    return out;
}

}  // namespace

int scale_round_half_up(int value, int numerator, int denominator) {
    const std::int64_t n = 2LL * value * numerator + denominator;
    return static_cast<int>(n / (2LL * denominator));
}

ResizePlan target_dimensions(int width, int height, int limit) {
    if (width < 1 || height < 1) throw ValidationError("size", "width and height must be >= 1");
    ResizePlan plan{{width, height}, {width, height}, false};
    const int small = std::min(width, height);
    if (small <= limit) return plan;
    plan.resized = true;
    if (width <= height) {
        plan.target = {limit, scale_round_half_up(height, limit, width)};
    } else {
        plan.target = {scale_round_half_up(width, limit, height), limit};
    }
    return plan;
}

ImageSize probe_dimensions(std::span<const std::uint8_t> encoded) {
    auto img = decode(encoded, cv::IMREAD_ANYCOLOR);
    return {img.cols, img.rows};
}

PixelSample sample_pixels(std::span<const std::uint8_t> encoded, std::size_t min_samples) {
    auto img = to_8bit(decode(encoded, cv::IMREAD_UNCHANGED));
    PixelSample sample;
    if (img.channels() == 1) {
        sample.channels = 1;
        return sample;
    }
    if (img.channels() == 4) cv::cvtColor(img, img, cv::COLOR_BGRA2BGR);
    sample.channels = 3;

    const auto w = static_cast<std::size_t>(img.cols), h = static_cast<std::size_t>(img.rows);
    std::size_t stride = 1;
    if (w * h > min_samples) {
        stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(double(w * h) / double(min_samples))));
        while (stride > 1 && ((w + stride - 1) / stride) * ((h + stride - 1) / stride) < min_samples) --stride;
    }
    for (std::size_t y = 0; y < h; y += stride) {
        const auto* row = img.ptr<cv::Vec3b>(static_cast<int>(y));
        for (std::size_t x = 0; x < w; x += stride) {
            const auto& px = row[x];
            sample.pixels.push_back({px[2], px[1], px[0]});
        }
    }
    return sample;
}

Bytes transcode(std::span<const std::uint8_t> encoded, const ResizePlan& plan, int quality) {
    if (plan.target.width < 1 || plan.target.height < 1)
        throw ValidationError("plan", "target size has zero area");
    auto img = to_8bit(decode(encoded, cv::IMREAD_ANYCOLOR));
    if (img.channels() == 4) cv::cvtColor(img, img, cv::COLOR_BGRA2BGR);

    ImageSize target = plan.target;
    const ImageSize decoded{img.cols, img.rows};
    if (decoded != plan.source) {
        if (decoded == ImageSize{plan.source.height, plan.source.width}) {
            target = {plan.target.height, plan.target.width};
        } else {
            throw ValidationError("plan", "source size " + std::to_string(plan.source.width) + "x" +
                                              std::to_string(plan.source.height) + " does not match decoded " +
                                              std::to_string(decoded.width) + "x" + std::to_string(decoded.height));
        }
    }
    if (target != decoded) {
        cv::Mat resized;
        cv::resize(img, resized, cv::Size(target.width, target.height), 0, 0, cv::INTER_CUBIC);
        img = resized;
    }
    std::vector<uchar> out;
    const std::vector<int> params{cv::IMWRITE_JPEG_QUALITY, quality, cv::IMWRITE_JPEG_PROGRESSIVE, 0,
                                  cv::IMWRITE_JPEG_OPTIMIZE, 0};
    if (!cv::imencode(".jpg", img, out, params)) throw Error("JPEG encoding failed");
    return Bytes(out.begin(), out.end());
}

Bytes read_bytes(const std::filesystem::path& path) {
    auto in = open_input(path);
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    write_file_atomic(path, [&](std::ostream& out) {
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    });
}

NormalizeResult normalize_batch(Manifest& manifest, const std::filesystem::path& image_dir,
                                const std::filesystem::path& out_dir, unsigned workers, int limit, int quality) {
    auto& records = manifest.records;
    struct Slot {
        bool done = false;
        bool resized = false;
        ImageSize size;
        std::string error;
    };
    std::vector<Slot> slots(records.size());
    std::filesystem::create_directories(out_dir);

    parallel_for(records.size(), workers, [&](std::size_t i) {
        const auto& r = records[i];
        if (r.status == Status::rejected) return;
        try {
            std::filesystem::path src = r.path;
            if (src.is_relative()) src = image_dir / src;
            const auto bytes = read_bytes(src);
            const auto oriented = probe_dimensions(bytes);
            const auto plan = target_dimensions(oriented.width, oriented.height, limit);
            write_bytes(out_dir / (r.id + ".jpg"), transcode(bytes, plan, quality));
            slots[i] = {true, plan.resized, plan.target, {}};
        } catch (const std::exception& e) {
            slots[i].error = e.what();
        }
    });

    NormalizeResult result;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!slots[i].error.empty()) {
            result.failures.emplace_back(records[i].id, slots[i].error);
            continue;
        }
        if (!slots[i].done) continue;
        ++result.written;
        if (slots[i].resized) ++result.resized;
        records[i].width = slots[i].size.width;
        records[i].height = slots[i].size.height;
        records[i].path = records[i].id + ".jpg";
    }
    std::sort(result.failures.begin(), result.failures.end());
    manifest.set_header("resample", kResampleKernel);
    manifest.set_header("jpeg_quality", std::to_string(quality));
    manifest.set_header("min_dimension_limit", std::to_string(limit));
    return result;
}

}  // namespace geocurate
