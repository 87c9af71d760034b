#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gti/matrix.hpp"

namespace gti {

/// An in-memory labeled image/vector dataset. Pixels are doubles in [0, 1]
/// (images) or plain features (vector data); rows*cols is the flat sample
/// width either way.
struct Dataset {
    int count = 0;
    int rows = 0;
    int cols = 0;
    int num_classes = 0;
    std::vector<double> pixels;  // count x (rows*cols)
    std::vector<int> labels;

    int dim() const { return rows * cols; }
    const double* sample(int idx) const { return pixels.data() + static_cast<size_t>(idx) * dim(); }

    Matrix gather(const std::vector<int>& indices) const;
    Matrix row(int idx) const;
};

/// IDX (big-endian magic + dims, unsigned byte payload) image/label pair.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void save_idx(const Dataset& data, const std::string& images_path,
              const std::string& labels_path);

/// Synthetic grayscale image classes: each class is a fixed seeded mixture of
/// Gaussian bumps; samples jitter the template by translation, amplitude and
/// pixel noise. Learnable by a small MLP, hard enough to over-fit.
Dataset synth_images(int per_class, int classes, uint64_t seed, int rows = 28, int cols = 28);

/// Well-separated Gaussian point clouds (linearly separable for spread >~ 4).
Dataset gaussian_blobs(int per_class, int classes, int dim, double spread, uint64_t seed);

/// Two interleaved ring halves in 2-D; class = ring index xor angular half.
Dataset xor_rings(int count, double noise, uint64_t seed);

/// Per-pixel mean over the dataset: the input-player baseline.
std::vector<double> mean_image(const Dataset& data);

struct MislabelResult {
    Dataset data;
    std::vector<char> relabeled;  // 1 where the label was replaced
    int relabeled_count = 0;
};

/// Replace the labels of a random fraction of samples with a uniformly drawn
/// incorrect class.
MislabelResult mislabel(const Dataset& data, double fraction, uint64_t seed);

Dataset subset(const Dataset& data, const std::vector<int>& indices);

}  // namespace gti
