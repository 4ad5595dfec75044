#include "aidp/data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "aidp/rng.hpp"

namespace aidp {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr std::size_t kCifarRecord = 3073;

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off, const char* what) {
    if (off + 4 > b.size())
        throw FormatError(std::string("truncated file while reading ") + what, b.size());
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

}  // namespace

void Dataset::validate() const {
    if (images.rank() != 4)
        throw ShapeError("dataset images must be [N,C,H,W], got " + shape_str(images.shape()));
    if (images.extent(0) != labels.size())
        throw ShapeError("dataset has " + std::to_string(images.extent(0)) + " images but " +
                         std::to_string(labels.size()) + " labels");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= classes)
            throw DomainError("dataset label " + std::to_string(y) + " outside [0," +
                              std::to_string(classes) + ")");
    for (std::size_t i = 0; i < images.size(); ++i)
        if (!(images[i] >= 0.0 && images[i] <= 1.0))
            throw DomainError("dataset pixel outside [0,1]");
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    auto ib = read_file(images_path);
    if (be32(ib, 0, "images magic") != kIdxImagesMagic)
        throw FormatError("bad IDX images magic in " + images_path, 0);
    const std::size_t n = be32(ib, 4, "image count");
    const std::size_t h = be32(ib, 8, "image rows");
    const std::size_t w = be32(ib, 12, "image cols");
    if (ib.size() != 16 + n * h * w)
        throw FormatError("IDX images payload has " + std::to_string(ib.size() - 16) +
                              " bytes, header declares " + std::to_string(n * h * w),
                          16);

    auto lb = read_file(labels_path);
    if (be32(lb, 0, "labels magic") != kIdxLabelsMagic)
        throw FormatError("bad IDX labels magic in " + labels_path, 0);
    const std::size_t ln = be32(lb, 4, "label count");
    if (lb.size() != 8 + ln)
        throw FormatError("IDX labels payload has " + std::to_string(lb.size() - 8) +
                              " bytes, header declares " + std::to_string(ln),
                          8);
    if (ln != n)
        throw FormatError("label count " + std::to_string(ln) + " does not match image count " +
                              std::to_string(n),
                          4);

    Dataset d;
    d.images = Tensor::uninit({n, 1, h, w});
    for (std::size_t i = 0; i < n * h * w; ++i)
        d.images[i] = static_cast<double>(ib[16 + i]) / 255.0;
    d.labels.resize(n);
    int max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        d.labels[i] = lb[8 + i];
        max_label = std::max(max_label, d.labels[i]);
    }
    d.classes = n ? static_cast<std::size_t>(max_label) + 1 : 0;
    d.name = "idx";
    return d;
}

Dataset load_cifar10_binary(const std::vector<std::string>& paths) {
    Dataset d;
    d.classes = 10;
    d.name = "cifar10";
    std::vector<double> pixels;
    for (const auto& path : paths) {
        auto b = read_file(path);
        if (b.size() % kCifarRecord != 0)
            throw FormatError("CIFAR-10 file " + path + " length " + std::to_string(b.size()) +
                                  " is not a multiple of 3073",
                              b.size() - b.size() % kCifarRecord);
        const std::size_t records = b.size() / kCifarRecord;
        for (std::size_t r = 0; r < records; ++r) {
            const unsigned char* rec = b.data() + r * kCifarRecord;
            if (rec[0] > 9)
                throw FormatError("CIFAR-10 label byte " + std::to_string(rec[0]) +
                                      " outside [0,10)",
                                  r * kCifarRecord);
            d.labels.push_back(rec[0]);
            for (std::size_t p = 0; p < 3072; ++p)
                pixels.push_back(static_cast<double>(rec[1 + p]) / 255.0);
        }
    }
    d.images = Tensor::from_data({d.labels.size(), 3, 32, 32}, std::move(pixels));
    return d;
}

void write_cifar10_binary(const Dataset& data, const std::string& path) {
    if (data.images.rank() != 4 || data.images.extent(1) != 3 || data.images.extent(2) != 32 ||
        data.images.extent(3) != 32)
        throw ShapeError("write_cifar10_binary: expects [N,3,32,32] images");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    const std::size_t n = data.size();
    for (std::size_t i = 0; i < n; ++i) {
        unsigned char label = static_cast<unsigned char>(data.labels[i]);
        out.write(reinterpret_cast<const char*>(&label), 1);
        const double* img = data.images.data() + i * 3072;
        for (std::size_t p = 0; p < 3072; ++p) {
            unsigned char byte = static_cast<unsigned char>(std::lround(img[p] * 255.0));
            out.write(reinterpret_cast<const char*>(&byte), 1);
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

Dataset synth_blobs(std::uint64_t seed, std::size_t n, std::size_t size,
                    std::size_t classes) {
    if (size < 5) throw ConfigError("synth_blobs: size must be >= 5");
    if (classes < 2) throw ConfigError("synth_blobs: needs at least 2 classes");
    Dataset d;
    d.classes = classes;
    d.name = "synth-blobs";
    d.images = Tensor::uninit({n, 1, size, size});
    d.labels.resize(n);

    Rng rng(seed);
    const double s = static_cast<double>(size);
    const double ring = 0.28 * s;
    const double sigma_blob = s / 10.0;
    const double jitter = s / 16.0;
    const double amplitude = 0.55;
    const double background = 0.15;
    const double noise = 0.05;
    const double two_pi = 6.283185307179586476925287;

    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % classes;
        d.labels[i] = static_cast<int>(c);
        const double angle = two_pi * static_cast<double>(c) / static_cast<double>(classes);
        const double cy = s / 2.0 + ring * std::sin(angle) + uniform(rng, -jitter, jitter);
        const double cx = s / 2.0 + ring * std::cos(angle) + uniform(rng, -jitter, jitter);
        double* img = d.images.data() + i * size * size;
        for (std::size_t r = 0; r < size; ++r) {
            for (std::size_t col = 0; col < size; ++col) {
                const double dy = static_cast<double>(r) - cy;
                const double dx = static_cast<double>(col) - cx;
                double v = background +
                           amplitude * std::exp(-(dy * dy + dx * dx) /
                                                (2.0 * sigma_blob * sigma_blob)) +
                           noise * normal01(rng);
                img[r * size + col] = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            }
        }
    }
    return d;
}

std::pair<Dataset, Dataset> synth_blob_splits(std::uint64_t seed, std::size_t train_n,
                                              std::size_t test_n, std::size_t size,
                                              std::size_t classes) {
    Dataset all = synth_blobs(seed, train_n + test_n, size, classes);
    const std::size_t pix = size * size;
    auto slice = [&](std::size_t begin, std::size_t count, const char* split) {
        Dataset d;
        d.classes = classes;
        d.name = all.name;
        d.split = split;
        d.images = Tensor::uninit({count, 1, size, size});
        std::memcpy(d.images.data(), all.images.data() + begin * pix,
                    count * pix * sizeof(double));
        d.labels.assign(all.labels.begin() + begin, all.labels.begin() + begin + count);
        return d;
    };
    return {slice(0, train_n, "train"), slice(train_n, test_n, "test")};
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size,
                                                  bool shuffle, std::uint64_t seed) {
    if (batch_size < 1) throw ConfigError("minibatches: batch size must be >= 1");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (shuffle) {
        Rng rng(seed);
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = rng() % i;  // deterministic Fisher-Yates
            std::swap(order[i - 1], order[j]);
        }
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        std::size_t end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

std::pair<Tensor, std::vector<int>> gather(const Dataset& data,
                                           const std::vector<std::size_t>& indices) {
    const std::size_t per = data.size() ? data.images.size() / data.size() : 0;
    Shape shape = data.images.shape();
    shape[0] = indices.size();
    Tensor x = Tensor::uninit(shape);
    std::vector<int> y(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        std::memcpy(x.data() + i * per, data.images.data() + indices[i] * per,
                    per * sizeof(double));
        y[i] = data.labels[indices[i]];
    }
    return {std::move(x), std::move(y)};
}

Dataset head(const Dataset& data, std::size_t n) {
    n = std::min(n, data.size());
    const std::size_t per = data.size() ? data.images.size() / data.size() : 0;
    Dataset d;
    d.classes = data.classes;
    d.name = data.name;
    d.split = data.split;
    Shape shape = data.images.shape();
    shape[0] = n;
    d.images = Tensor::uninit(shape);
    std::memcpy(d.images.data(), data.images.data(), n * per * sizeof(double));
    d.labels.assign(data.labels.begin(), data.labels.begin() + n);
    return d;
}

}  // namespace aidp
