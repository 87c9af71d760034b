#pragma once

#include <vector>

#include "gti/game.hpp"
#include "gti/network.hpp"

namespace gti {

/// Which scalar a masked-model game reads off the network output.
enum class ScoreSelector { true_class_logit, true_class_probability, scalar_output, loss_value };

const char* to_string(ScoreSelector sel);

/// Plain networks play the pre-softmax score of the labeled class;
/// batch-normalized networks play the post-softmax probability.
ScoreSelector default_score_selector(const Model& model);

double select_score(const Matrix& out, int row, int label, ScoreSelector sel);

/// Accumulate factor * d(score)/d(out_row) into d_out for one batch row.
void add_score_gradient(const Matrix& out, int row, int label, ScoreSelector sel, double factor,
                        Matrix& d_out);

/// A regular partition of an img_h x img_w (x channels) sample into
/// grid_rows x grid_cols cells, one player per cell. Masking a player
/// replaces every pixel of its cell (in every channel) with the baseline.
struct GridPartition {
    int img_h = 0, img_w = 0, channels = 1;
    int rows = 0, cols = 0;
    int cell_h = 0, cell_w = 0;

    int player_count() const { return rows * cols; }
    PlayerSet players() const;

    /// Flat pixel indices (channel-major planes) covered by one player.
    std::vector<int> pixels(int player) const;
};

/// Throws PartitionError unless the image sides divide evenly.
GridPartition grid_partition(int img_h, int img_w, int grid_rows, int grid_cols,
                             int channels = 1);

/// Players are the activation units at an interior act index of a frozen
/// model, captured from an eval-mode forward pass on one sample. Masked
/// units are replaced by the zero baseline and the tail of the network is
/// re-run on the interaction track, so batch-norm state is never touched.
class ActivationSiteGame : public Game {
public:
    ActivationSiteGame(const Model& model, int site_act, const Matrix& input_row, int label,
                       ScoreSelector sel);

    int site() const { return site_; }
    const Matrix& site_activations() const { return site_act_; }

protected:
    double eval_impl(const Coalition& s) const override;

private:
    const Model* model_;
    int site_;
    Matrix site_act_;  // 1 x n, eval-mode activations at the site
    int label_;
    ScoreSelector sel_;
};

/// Players are grid cells of the input image; masked cells are replaced by
/// the per-pixel baseline (mean image for inputs). Evaluating the full
/// coalition replaces nothing, so it reproduces the plain forward pass
/// bit-exactly.
class InputGridGame : public Game {
public:
    InputGridGame(const Model& model, GridPartition part, std::vector<double> image,
                  std::vector<double> baseline, int label, ScoreSelector sel);

    const GridPartition& partition() const { return part_; }

protected:
    double eval_impl(const Coalition& s) const override;

private:
    const Model* model_;
    GridPartition part_;
    std::vector<double> image_;
    std::vector<double> baseline_;
    int label_;
    ScoreSelector sel_;
};

}  // namespace gti
