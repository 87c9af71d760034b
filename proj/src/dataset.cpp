#include "gti/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "gti/errors.hpp"
#include "gti/rng.hpp"

namespace gti {

Matrix Dataset::gather(const std::vector<int>& indices) const {
    Matrix m(static_cast<int>(indices.size()), dim());
    for (size_t r = 0; r < indices.size(); ++r) {
        const double* src = sample(indices[r]);
        std::copy(src, src + dim(), m.row(static_cast<int>(r)));
    }
    return m;
}

Matrix Dataset::row(int idx) const {
    Matrix m(1, dim());
    std::copy(sample(idx), sample(idx) + dim(), m.row(0));
    return m;
}

namespace {

constexpr uint32_t kIdxImagesMagic = 0x00000803;
constexpr uint32_t kIdxLabelsMagic = 0x00000801;

uint32_t read_be32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("idx file truncated");
    return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | b[3];
}

void write_be32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw std::runtime_error("cannot open idx images: " + images_path);
    if (read_be32(imgs) != kIdxImagesMagic)
        throw std::runtime_error("bad idx image magic in " + images_path);
    Dataset data;
    data.count = static_cast<int>(read_be32(imgs));
    data.rows = static_cast<int>(read_be32(imgs));
    data.cols = static_cast<int>(read_be32(imgs));
    const size_t total = static_cast<size_t>(data.count) * data.dim();
    std::vector<unsigned char> raw(total);
    imgs.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(total));
    if (!imgs) throw std::runtime_error("idx image payload truncated: " + images_path);
    data.pixels.resize(total);
    for (size_t k = 0; k < total; ++k) data.pixels[k] = raw[k] / 255.0;

    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw std::runtime_error("cannot open idx labels: " + labels_path);
    if (read_be32(labs) != kIdxLabelsMagic)
        throw std::runtime_error("bad idx label magic in " + labels_path);
    if (static_cast<int>(read_be32(labs)) != data.count)
        throw std::runtime_error("idx image/label count mismatch");
    std::vector<unsigned char> lraw(data.count);
    labs.read(reinterpret_cast<char*>(lraw.data()), data.count);
    if (!labs) throw std::runtime_error("idx label payload truncated: " + labels_path);
    data.labels.assign(lraw.begin(), lraw.end());
    data.num_classes = data.labels.empty()
                           ? 0
                           : *std::max_element(data.labels.begin(), data.labels.end()) + 1;
    return data;
}

void save_idx(const Dataset& data, const std::string& images_path,
              const std::string& labels_path) {
    std::ofstream imgs(images_path, std::ios::binary);
    if (!imgs) throw std::runtime_error("cannot write idx images: " + images_path);
    write_be32(imgs, kIdxImagesMagic);
    write_be32(imgs, static_cast<uint32_t>(data.count));
    write_be32(imgs, static_cast<uint32_t>(data.rows));
    write_be32(imgs, static_cast<uint32_t>(data.cols));
    for (double v : data.pixels) {
        double clipped = std::clamp(v, 0.0, 1.0);
        unsigned char b = static_cast<unsigned char>(std::lround(clipped * 255.0));
        imgs.write(reinterpret_cast<char*>(&b), 1);
    }

    std::ofstream labs(labels_path, std::ios::binary);
    if (!labs) throw std::runtime_error("cannot write idx labels: " + labels_path);
    write_be32(labs, kIdxLabelsMagic);
    write_be32(labs, static_cast<uint32_t>(data.count));
    for (int l : data.labels) {
        unsigned char b = static_cast<unsigned char>(l);
        labs.write(reinterpret_cast<char*>(&b), 1);
    }
}

Dataset synth_images(int per_class, int classes, uint64_t seed, int rows, int cols) {
    struct Bump {
        double cy, cx, sigma, amp;
    };
    std::vector<std::vector<Bump>> templates(classes);
    for (int c = 0; c < classes; ++c) {
        CounterRng rng(CounterRng::derive(seed, {0x1d, static_cast<uint64_t>(c)}));
        const int bumps = 3 + static_cast<int>(rng.next_below(3));
        for (int b = 0; b < bumps; ++b)
            templates[c].push_back({rng.uniform(0.2 * rows, 0.8 * rows),
                                    rng.uniform(0.2 * cols, 0.8 * cols),
                                    rng.uniform(rows * 0.07, rows * 0.16),
                                    rng.uniform(0.6, 1.0)});
    }

    Dataset data;
    data.count = per_class * classes;
    data.rows = rows;
    data.cols = cols;
    data.num_classes = classes;
    data.pixels.resize(static_cast<size_t>(data.count) * data.dim());
    data.labels.resize(data.count);

    int idx = 0;
    for (int c = 0; c < classes; ++c) {
        for (int s = 0; s < per_class; ++s, ++idx) {
            CounterRng rng(CounterRng::derive(
                seed, {0x5a, static_cast<uint64_t>(c), static_cast<uint64_t>(s)}));
            double dy = rng.uniform(-2.0, 2.0);
            double dx = rng.uniform(-2.0, 2.0);
            double scale = rng.uniform(0.85, 1.15);
            double* px = data.pixels.data() + static_cast<size_t>(idx) * data.dim();
            for (int y = 0; y < rows; ++y)
                for (int x = 0; x < cols; ++x) {
                    double v = 0.0;
                    for (const Bump& bmp : templates[c]) {
                        double ddy = y - bmp.cy - dy;
                        double ddx = x - bmp.cx - dx;
                        v += bmp.amp * scale *
                             std::exp(-(ddy * ddy + ddx * ddx) / (2.0 * bmp.sigma * bmp.sigma));
                    }
                    v += rng.normal(0.0, 0.04);
                    px[y * cols + x] = std::clamp(v, 0.0, 1.0);
                }
            data.labels[idx] = c;
        }
    }
    return data;
}

Dataset gaussian_blobs(int per_class, int classes, int dim, double spread, uint64_t seed) {
    Dataset data;
    data.count = per_class * classes;
    data.rows = 1;
    data.cols = dim;
    data.num_classes = classes;
    data.pixels.resize(static_cast<size_t>(data.count) * dim);
    data.labels.resize(data.count);

    std::vector<std::vector<double>> centers(classes, std::vector<double>(dim));
    CounterRng crng(CounterRng::derive(seed, {0xb10b}));
    for (auto& c : centers)
        for (double& v : c) v = crng.normal(0.0, spread);

    CounterRng rng(CounterRng::derive(seed, {0xb10b, 1}));
    int idx = 0;
    for (int c = 0; c < classes; ++c)
        for (int s = 0; s < per_class; ++s, ++idx) {
            double* row = data.pixels.data() + static_cast<size_t>(idx) * dim;
            for (int d = 0; d < dim; ++d) row[d] = centers[c][d] + rng.normal(0.0, 1.0);
            data.labels[idx] = c;
        }
    return data;
}

Dataset xor_rings(int count, double noise, uint64_t seed) {
    Dataset data;
    data.count = count;
    data.rows = 1;
    data.cols = 2;
    data.num_classes = 2;
    data.pixels.resize(static_cast<size_t>(count) * 2);
    data.labels.resize(count);
    CounterRng rng(CounterRng::derive(seed, {0x2175}));
    for (int i = 0; i < count; ++i) {
        int ring = static_cast<int>(rng.next_below(2));
        double radius = ring == 0 ? rng.uniform(0.5, 1.0) : rng.uniform(1.5, 2.0);
        double angle = rng.uniform(0.0, 6.283185307179586);
        int half = angle < 3.141592653589793 ? 0 : 1;
        data.pixels[2 * i] = radius * std::cos(angle) + rng.normal(0.0, noise);
        data.pixels[2 * i + 1] = radius * std::sin(angle) + rng.normal(0.0, noise);
        data.labels[i] = ring ^ half;
    }
    return data;
}

std::vector<double> mean_image(const Dataset& data) {
    if (data.count == 0) throw std::invalid_argument("mean image of an empty dataset");
    std::vector<double> mean(data.dim(), 0.0);
    for (int i = 0; i < data.count; ++i) {
        const double* px = data.sample(i);
        for (int k = 0; k < data.dim(); ++k) mean[k] += px[k];
    }
    for (double& v : mean) v /= data.count;
    return mean;
}

MislabelResult mislabel(const Dataset& data, double fraction, uint64_t seed) {
    if (fraction < 0.0 || fraction >= 1.0)
        throw std::invalid_argument("mislabel fraction must lie in [0, 1)");
    if (data.num_classes < 2)
        throw std::invalid_argument("mislabeling needs at least two classes");
    MislabelResult result;
    result.data = data;
    result.relabeled.assign(data.count, 0);
    const int n_bad = static_cast<int>(std::lround(fraction * data.count));
    CounterRng rng(CounterRng::derive(seed, {0xbad1abe1}));
    for (int idx : rng.sample_without_replacement(data.count, n_bad)) {
        int wrong = static_cast<int>(rng.next_below(data.num_classes - 1));
        if (wrong >= data.labels[idx]) ++wrong;  // uniform over incorrect classes
        result.data.labels[idx] = wrong;
        result.relabeled[idx] = 1;
        ++result.relabeled_count;
    }
    return result;
}

Dataset subset(const Dataset& data, const std::vector<int>& indices) {
    Dataset out;
    out.count = static_cast<int>(indices.size());
    out.rows = data.rows;
    out.cols = data.cols;
    out.num_classes = data.num_classes;
    out.pixels.resize(static_cast<size_t>(out.count) * data.dim());
    out.labels.resize(out.count);
    for (size_t r = 0; r < indices.size(); ++r) {
        const double* src = data.sample(indices[r]);
        std::copy(src, src + data.dim(), out.pixels.data() + r * data.dim());
        out.labels[r] = data.labels[indices[r]];
    }
    return out;
}

}  // namespace gti
