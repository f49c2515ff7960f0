#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "annsnn/dataset.hpp"

namespace annsnn {

enum class DataFormat { idx, csv };

DataFormat parse_data_format(const std::string& text);

/// Reads an IDX image file (magic 0x00000803) and its label file (magic
/// 0x00000801). Pixels are scaled to [0,1]; samples have shape [1,rows,cols].
/// `num_classes` of 0 infers max(label) + 1.
Dataset read_idx(std::istream& images, std::istream& labels, int num_classes = 0);

/// One sample per line: integer label, then real features. Samples have shape [features].
Dataset read_csv(std::istream& in, int num_classes = 0);

/// Loads a dataset from disk. For IDX, `labels_path` names the label file.
Dataset ingest(const std::string& path, DataFormat format, const std::string& labels_path = {},
               int num_classes = 0);

/// Writes the CSV layout read_csv accepts; features print with up to 17 significant digits.
void write_csv(std::ostream& out, const Dataset& data);
void write_csv_file(const std::string& path, const Dataset& data);

struct BlobConfig
{
    std::size_t samples = 1000;
    std::size_t side = 28;
    int num_classes = 10;
    /// Per-pixel Gaussian noise level.
    double noise = 0.35;
    /// Largest weight of the distractor prototype mixed into each sample.
    double distractor = 0.6;
    std::uint64_t seed = 1;
};

/// Image-like Gaussian-blob classes: every class owns a prototype built from a
/// few Gaussian bumps; each sample is a scaled prototype, a weaker random
/// distractor prototype and pixel noise, clamped to [0,1] and quantized to
/// 1/1000. Prototypes depend on the seed only, so differently sized sets that
/// share a seed share classes; `sample_stream` separates train from test draws.
Dataset make_blobs(const BlobConfig& cfg, std::uint64_t sample_stream);

}  // namespace annsnn
