#include "wmlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>

#include "wmlab/image_io.hpp"
#include "wmlab/rng.hpp"
#include "wmlab/transforms.hpp"

namespace wmlab {

void DatasetSpec::validate() const {
    if (side < 8) throw std::invalid_argument("dataset: side must be >= 8");
    if (channels != 1 && channels != 3)
        throw std::invalid_argument("dataset: channels must be 1 or 3");
    if (count < 10) throw std::invalid_argument("dataset: count must be >= 10");
    const double sum = train_fraction + val_fraction + test_fraction;
    if (train_fraction < 0 || val_fraction < 0 || test_fraction < 0 ||
        std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("dataset: split fractions must sum to 1");
    if (source == Source::Directory && directory.empty())
        throw std::invalid_argument("dataset: directory source needs a path");
}

namespace {

DatasetSplits split_images(std::vector<Image> images, const DatasetSpec& spec) {
    std::vector<size_t> order(images.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(spec.seed, "split"));
    rng.shuffle(order);

    const size_t n_train =
        static_cast<size_t>(std::llround(spec.count * spec.train_fraction));
    const size_t n_val =
        static_cast<size_t>(std::llround(spec.count * spec.val_fraction));

    DatasetSplits splits;
    for (size_t i = 0; i < order.size(); ++i) {
        Image& img = images[order[i]];
        if (i < n_train)
            splits.train.push_back(std::move(img));
        else if (i < n_train + n_val)
            splits.val.push_back(std::move(img));
        else
            splits.test.push_back(std::move(img));
    }
    return splits;
}

}  // namespace

DatasetSplits synth_dataset(const DatasetSpec& spec) {
    spec.validate();
    std::vector<Image> images;
    images.reserve(spec.count);
    for (int i = 0; i < spec.count; ++i) {
        Rng rng(derive_seed(spec.seed, "synth", static_cast<uint64_t>(i)));
        Image noise = Image::zeros(spec.side, spec.side, spec.channels);
        for (auto& v : noise.pixels) v = rng.normal();
        Image img = gaussian_blur(noise, 9, 2.0);
        const auto [mn_it, mx_it] =
            std::minmax_element(img.pixels.begin(), img.pixels.end());
        const double mn = *mn_it, mx = *mx_it;
        const double scale = mx > mn ? 1.0 / (mx - mn) : 0.0;
        for (auto& v : img.pixels) v = (v - mn) * scale;
        images.push_back(std::move(img));
    }
    return split_images(std::move(images), spec);
}

Image convert_channels(const Image& img, int channels) {
    if (img.channels == channels) return img;
    Image out = Image::zeros(img.width, img.height, channels);
    if (channels == 1) {
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out.at(y, x, 0) = 0.299 * img.at(y, x, 0) +
                                  0.587 * img.at(y, x, 1) +
                                  0.114 * img.at(y, x, 2);
        return out;
    }
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x, 0);
    return out;
}

Image resize_bilinear(const Image& img, int width, int height) {
    if (img.width == width && img.height == height) return img;
    Image out = Image::zeros(width, height, img.channels);
    const double sx = static_cast<double>(img.width) / width;
    const double sy = static_cast<double>(img.height) / height;
    for (int y = 0; y < height; ++y) {
        const double src_y = (y + 0.5) * sy - 0.5;
        const double fy = std::floor(src_y);
        const double wy = src_y - fy;
        const int y0 = std::clamp(static_cast<int>(fy), 0, img.height - 1);
        const int y1 = std::clamp(static_cast<int>(fy) + 1, 0, img.height - 1);
        for (int x = 0; x < width; ++x) {
            const double src_x = (x + 0.5) * sx - 0.5;
            const double fx = std::floor(src_x);
            const double wx = src_x - fx;
            const int x0 = std::clamp(static_cast<int>(fx), 0, img.width - 1);
            const int x1 = std::clamp(static_cast<int>(fx) + 1, 0, img.width - 1);
            for (int c = 0; c < img.channels; ++c) {
                out.at(y, x, c) =
                    (1.0 - wy) * ((1.0 - wx) * img.at(y0, x0, c) +
                                  wx * img.at(y0, x1, c)) +
                    wy * ((1.0 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c));
            }
        }
    }
    return out;
}

DatasetSplits load_dataset(const DatasetSpec& spec) {
    spec.validate();
    if (spec.source == DatasetSpec::Source::Synthetic) return synth_dataset(spec);

    namespace fs = std::filesystem;
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(spec.directory)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".png" || ext == ".ppm" || ext == ".pgm")
            paths.push_back(entry.path().string());
    }
    std::sort(paths.begin(), paths.end());

    std::vector<Image> images;
    for (const auto& path : paths) {
        if (static_cast<int>(images.size()) >= spec.count) break;
        try {
            Image img = read_image_file(path);
            img = convert_channels(img, spec.channels);
            img = resize_bilinear(img, spec.side, spec.side);
            images.push_back(std::move(img));
        } catch (const std::exception& e) {
            std::cerr << "warning: skipping " << path << ": " << e.what() << "\n";
        }
    }
    if (static_cast<int>(images.size()) < spec.count)
        throw std::runtime_error("dataset: found only " +
                                 std::to_string(images.size()) + " of " +
                                 std::to_string(spec.count) + " usable images");
    return split_images(std::move(images), spec);
}

}  // namespace wmlab
