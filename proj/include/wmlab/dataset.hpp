#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wmlab/core.hpp"

namespace wmlab {

struct DatasetSpec {
    enum class Source { Synthetic, Directory };

    Source source = Source::Synthetic;
    std::string directory;
    int side = 32;
    int channels = 1;
    int count = 2000;
    double train_fraction = 0.8;
    double val_fraction = 0.1;
    double test_fraction = 0.1;
    uint64_t seed = 0;

    void validate() const;
};

struct DatasetSplits {
    std::vector<Image> train, val, test;
};

// Smooth natural-image stand-ins: per-image seeded Gaussian noise blurred by
// a 9x9 Gaussian kernel (sigma 2.0), then min-max normalized to exactly [0,1].
DatasetSplits synth_dataset(const DatasetSpec& spec);

// Decodes 8-bit image files from a directory (PNG/PPM/PGM), converts to the
// requested channel count (luma weights 0.299/0.587/0.114), resizes to
// side x side by bilinear resampling and splits by a seeded shuffle.
// Unreadable files are skipped with a warning; fewer than `count` usable
// images is an error.
DatasetSplits load_dataset(const DatasetSpec& spec);

// Bilinear resampling helper, exposed for the ingestion tests.
Image resize_bilinear(const Image& img, int width, int height);

// Channel conversion helper (1<->3).
Image convert_channels(const Image& img, int channels);

}  // namespace wmlab
