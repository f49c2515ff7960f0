#include "annsnn/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "annsnn/errors.hpp"
#include "annsnn/rng.hpp"

namespace annsnn {

DataFormat parse_data_format(const std::string& text)
{
    if (text == "idx") {
        return DataFormat::idx;
    }
    if (text == "csv") {
        return DataFormat::csv;
    }
    throw ConfigError("unknown data format '" + text + "' (idx|csv)");
}

namespace {

class ByteReader
{
public:
    ByteReader(std::istream& in, const char* name) : in_(in), name_(name) {}

    std::uint32_t u32()
    {
        unsigned char b[4];
        read(b, 4);
        return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
    }

    void read(unsigned char* dst, std::size_t n)
    {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        const auto got = static_cast<std::size_t>(in_.gcount());
        if (got != n) {
            throw ParseError(std::string(name_) + ": truncated at byte " + std::to_string(pos_ + got) + ", expected " +
                             std::to_string(n) + " more bytes");
        }
        pos_ += n;
    }

    std::size_t position() const { return pos_; }

    void expect_magic(std::uint32_t magic)
    {
        const std::uint32_t got = u32();
        if (got != magic) {
            char buf[96];
            std::snprintf(buf, sizeof buf, ": bad magic 0x%08x at byte 0, expected 0x%08x", got, magic);
            throw ParseError(name_ + std::string(buf));
        }
    }

private:
    std::istream& in_;
    const char* name_;
    std::size_t pos_ = 0;
};

int resolve_classes(const std::vector<int>& labels, int num_classes)
{
    const int max_label = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
    if (num_classes == 0) {
        return max_label + 1;
    }
    if (max_label >= num_classes) {
        throw ParseError("label " + std::to_string(max_label) + " exceeds the declared " +
                         std::to_string(num_classes) + " classes");
    }
    return num_classes;
}

}  // namespace

Dataset read_idx(std::istream& images, std::istream& labels, int num_classes)
{
    ByteReader img(images, "idx images");
    ByteReader lab(labels, "idx labels");
    img.expect_magic(0x00000803);
    lab.expect_magic(0x00000801);
    const std::uint32_t n = img.u32();
    const std::uint32_t rows = img.u32();
    const std::uint32_t cols = img.u32();
    const std::uint32_t n_labels = lab.u32();
    if (n != n_labels) {
        throw ParseError("idx: " + std::to_string(n) + " images but " + std::to_string(n_labels) + " labels");
    }
    if (n == 0 || rows == 0 || cols == 0) {
        throw ParseError("idx: empty image set");
    }

    std::vector<unsigned char> pixels(static_cast<std::size_t>(n) * rows * cols);
    img.read(pixels.data(), pixels.size());
    std::vector<unsigned char> raw_labels(n);
    lab.read(raw_labels.data(), raw_labels.size());

    std::vector<double> values(pixels.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        values[i] = pixels[i] / 255.0;
    }
    Dataset data;
    data.inputs = Tensor({n, 1, rows, cols}, std::move(values));
    data.labels.assign(raw_labels.begin(), raw_labels.end());
    data.num_classes = resolve_classes(data.labels, num_classes);
    return data;
}

Dataset read_csv(std::istream& in, int num_classes)
{
    std::vector<double> values;
    std::vector<int> labels;
    std::size_t features = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::size_t column = 0;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::size_t end = comma == std::string::npos ? line.size() : comma;
            const char* first = line.data() + start;
            const char* last = line.data() + end;
            while (first < last && *first == ' ') {
                ++first;
            }
            while (last > first && last[-1] == ' ') {
                --last;
            }
            if (column == 0) {
                int label = 0;
                const auto [ptr, ec] = std::from_chars(first, last, label);
                if (first == last || ec != std::errc() || ptr != last || label < 0) {
                    throw ParseError("csv line " + std::to_string(line_no) + ", column 1: '" +
                                     std::string(first, last) + "' is not a non-negative integer label");
                }
                labels.push_back(label);
            } else {
                double v = 0;
                const auto [ptr, ec] = std::from_chars(first, last, v);
                if (first == last || ec != std::errc() || ptr != last || !std::isfinite(v)) {
                    throw ParseError("csv line " + std::to_string(line_no) + ", column " +
                                     std::to_string(column + 1) + ": '" + std::string(first, last) +
                                     "' is not a finite number");
                }
                values.push_back(v);
            }
            ++column;
            if (comma == std::string::npos) {
                break;
            }
            start = comma + 1;
        }
        if (column < 2) {
            throw ParseError("csv line " + std::to_string(line_no) + ": needs a label and at least one feature");
        }
        if (features == 0) {
            features = column - 1;
        } else if (column - 1 != features) {
            throw ParseError("csv line " + std::to_string(line_no) + ": " + std::to_string(column - 1) +
                             " features, earlier rows have " + std::to_string(features));
        }
    }
    if (labels.empty()) {
        throw ParseError("csv: no samples");
    }
    Dataset data;
    data.inputs = Tensor({labels.size(), features}, std::move(values));
    data.labels = std::move(labels);
    data.num_classes = resolve_classes(data.labels, num_classes);
    return data;
}

Dataset ingest(const std::string& path, DataFormat format, const std::string& labels_path, int num_classes)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FilesystemError("cannot read " + path);
    }
    if (format == DataFormat::csv) {
        return read_csv(in, num_classes);
    }
    if (labels_path.empty()) {
        throw ConfigError("idx data needs a label file");
    }
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) {
        throw FilesystemError("cannot read " + labels_path);
    }
    return read_idx(in, lab, num_classes);
}

namespace {

void append_number(std::string& out, double v)
{
    // Shortest text that reads back to the same double.
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
}

}  // namespace

void write_csv(std::ostream& out, const Dataset& data)
{
    const std::size_t stride = data.inputs.size() / data.size();
    std::string line;
    for (std::size_t i = 0; i < data.size(); ++i) {
        line = std::to_string(data.labels[i]);
        for (std::size_t j = 0; j < stride; ++j) {
            line += ',';
            append_number(line, data.inputs[i * stride + j]);
        }
        line += '\n';
        out << line;
    }
}

void write_csv_file(const std::string& path, const Dataset& data)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FilesystemError("cannot write " + path);
    }
    write_csv(out, data);
}

Dataset make_blobs(const BlobConfig& cfg, std::uint64_t sample_stream)
{
    if (cfg.samples == 0 || cfg.side < 4 || cfg.num_classes < 2) {
        throw ConfigError("blob data needs samples > 0, side >= 4 and at least two classes");
    }
    const std::size_t side = cfg.side;
    const std::size_t pixels = side * side;
    const auto classes = static_cast<std::size_t>(cfg.num_classes);

    Rng proto_rng = Rng(cfg.seed).split(0);
    std::vector<std::vector<double>> prototypes(classes, std::vector<double>(pixels, 0.0));
    const double lo = 0.15 * static_cast<double>(side);
    const double hi = 0.85 * static_cast<double>(side);
    for (auto& proto : prototypes) {
        for (int bump = 0; bump < 3; ++bump) {
            const double cy = proto_rng.uniform(lo, hi);
            const double cx = proto_rng.uniform(lo, hi);
            const double width = proto_rng.uniform(0.08, 0.14) * static_cast<double>(side);
            for (std::size_t y = 0; y < side; ++y) {
                for (std::size_t x = 0; x < side; ++x) {
                    const double dy = static_cast<double>(y) - cy;
                    const double dx = static_cast<double>(x) - cx;
                    proto[y * side + x] += std::exp(-(dy * dy + dx * dx) / (2.0 * width * width));
                }
            }
        }
        const double peak = *std::max_element(proto.begin(), proto.end());
        for (double& p : proto) {
            p /= peak;
        }
    }

    Rng rng = Rng(cfg.seed).split(sample_stream + 1);
    Dataset data;
    data.num_classes = cfg.num_classes;
    data.labels.resize(cfg.samples);
    std::vector<double> values(cfg.samples * pixels);
    for (std::size_t i = 0; i < cfg.samples; ++i) {
        const auto label = static_cast<std::size_t>(rng.below(classes));
        auto other = static_cast<std::size_t>(rng.below(classes - 1));
        if (other >= label) {
            ++other;
        }
        const double scale = rng.uniform(0.6, 1.0);
        const double mix = rng.uniform(0.0, cfg.distractor);
        data.labels[i] = static_cast<int>(label);
        for (std::size_t p = 0; p < pixels; ++p) {
            const double v = scale * prototypes[label][p] + mix * prototypes[other][p] + cfg.noise * rng.normal();
            values[i * pixels + p] = std::round(std::clamp(v, 0.0, 1.0) * 1000.0) / 1000.0;
        }
    }
    data.inputs = Tensor({cfg.samples, pixels}, std::move(values));
    return data;
}

}  // namespace annsnn
