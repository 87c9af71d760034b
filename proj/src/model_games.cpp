#include "gti/model_games.hpp"

#include <cmath>

#include "gti/errors.hpp"

namespace gti {

const char* to_string(ScoreSelector sel) {
    switch (sel) {
        case ScoreSelector::true_class_logit: return "true_class_logit";
        case ScoreSelector::true_class_probability: return "true_class_probability";
        case ScoreSelector::scalar_output: return "scalar_output";
        case ScoreSelector::loss_value: return "loss_value";
    }
    return "?";
}

ScoreSelector default_score_selector(const Model& model) {
    if (model.head_kind() == HeadKind::scalar) return ScoreSelector::scalar_output;
    return model.has_batchnorm() ? ScoreSelector::true_class_probability
                                 : ScoreSelector::true_class_logit;
}

namespace {

void softmax_row(const Matrix& out, int row, std::vector<double>& p) {
    const int c = out.cols();
    p.resize(c);
    double mx = out(row, 0);
    for (int k = 1; k < c; ++k) mx = std::max(mx, out(row, k));
    double z = 0.0;
    for (int k = 0; k < c; ++k) {
        p[k] = std::exp(out(row, k) - mx);
        z += p[k];
    }
    for (int k = 0; k < c; ++k) p[k] /= z;
}

}  // namespace

double select_score(const Matrix& out, int row, int label, ScoreSelector sel) {
    switch (sel) {
        case ScoreSelector::true_class_logit:
            return out(row, label);
        case ScoreSelector::true_class_probability: {
            std::vector<double> p;
            softmax_row(out, row, p);
            return p[label];
        }
        case ScoreSelector::scalar_output:
            return out(row, 0);
        case ScoreSelector::loss_value: {
            double mx = out(row, 0);
            for (int k = 1; k < out.cols(); ++k) mx = std::max(mx, out(row, k));
            double z = 0.0;
            for (int k = 0; k < out.cols(); ++k) z += std::exp(out(row, k) - mx);
            return std::log(z) + mx - out(row, label);
        }
    }
    return 0.0;
}

void add_score_gradient(const Matrix& out, int row, int label, ScoreSelector sel, double factor,
                        Matrix& d_out) {
    switch (sel) {
        case ScoreSelector::true_class_logit:
            d_out(row, label) += factor;
            break;
        case ScoreSelector::true_class_probability: {
            std::vector<double> p;
            softmax_row(out, row, p);
            for (int k = 0; k < out.cols(); ++k)
                d_out(row, k) += factor * p[label] * ((k == label ? 1.0 : 0.0) - p[k]);
            break;
        }
        case ScoreSelector::scalar_output:
            d_out(row, 0) += factor;
            break;
        case ScoreSelector::loss_value: {
            std::vector<double> p;
            softmax_row(out, row, p);
            for (int k = 0; k < out.cols(); ++k)
                d_out(row, k) += factor * (p[k] - (k == label ? 1.0 : 0.0));
            break;
        }
    }
}

PlayerSet GridPartition::players() const {
    std::vector<std::string> labels;
    labels.reserve(player_count());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            labels.push_back("g" + std::to_string(r) + "," + std::to_string(c));
    return PlayerSet(player_count(), std::move(labels));
}

std::vector<int> GridPartition::pixels(int player) const {
    if (player < 0 || player >= player_count())
        throw std::out_of_range("grid player out of range");
    const int gy = player / cols;
    const int gx = player % cols;
    std::vector<int> out;
    out.reserve(cell_h * cell_w * channels);
    for (int ch = 0; ch < channels; ++ch) {
        const int plane = ch * img_h * img_w;
        for (int y = 0; y < cell_h; ++y)
            for (int x = 0; x < cell_w; ++x)
                out.push_back(plane + (gy * cell_h + y) * img_w + gx * cell_w + x);
    }
    return out;
}

GridPartition grid_partition(int img_h, int img_w, int grid_rows, int grid_cols, int channels) {
    if (grid_rows < 1 || grid_cols < 1)
        throw PartitionError("grid needs at least one row and column");
    if (img_h % grid_rows != 0 || img_w % grid_cols != 0)
        throw PartitionError("image " + std::to_string(img_h) + "x" + std::to_string(img_w) +
                             " not divisible into " + std::to_string(grid_rows) + "x" +
                             std::to_string(grid_cols) + " grids");
    GridPartition part;
    part.img_h = img_h;
    part.img_w = img_w;
    part.channels = channels;
    part.rows = grid_rows;
    part.cols = grid_cols;
    part.cell_h = img_h / grid_rows;
    part.cell_w = img_w / grid_cols;
    return part;
}

ActivationSiteGame::ActivationSiteGame(const Model& model, int site_act, const Matrix& input_row,
                                       int label, ScoreSelector sel)
    : Game(PlayerSet(model.act_dim(site_act)), "activation-site-game",
           BaselineKind::zero_activation),
      model_(&model),
      site_(site_act),
      label_(label),
      sel_(sel) {
    if (input_row.rows() != 1)
        throw std::invalid_argument("activation-site game takes a single sample row");
    auto fr = model.forward(input_row, Mode::eval, 0, Track::interaction);
    site_act_ = fr.act[site_act];
}

double ActivationSiteGame::eval_impl(const Coalition& s) const {
    Matrix h = site_act_;
    for (int u = 0; u < h.cols(); ++u)
        if (!s.contains(u)) h(0, u) = 0.0;
    auto fr = model_->forward_from(site_, h, Mode::eval, 0, Track::interaction);
    return select_score(fr.out(), 0, label_, sel_);
}

InputGridGame::InputGridGame(const Model& model, GridPartition part, std::vector<double> image,
                             std::vector<double> baseline, int label, ScoreSelector sel)
    : Game(part.players(), "input-grid-game", BaselineKind::mean_input),
      model_(&model),
      part_(part),
      image_(std::move(image)),
      baseline_(std::move(baseline)),
      label_(label),
      sel_(sel) {
    const size_t dim = static_cast<size_t>(part_.img_h) * part_.img_w * part_.channels;
    if (image_.size() != dim || baseline_.size() != dim)
        throw std::invalid_argument("image/baseline size does not match the partition");
    if (static_cast<int>(dim) != model.input_dim())
        throw std::invalid_argument("partition does not match the model input width");
}

double InputGridGame::eval_impl(const Coalition& s) const {
    Matrix x(1, static_cast<int>(image_.size()));
    for (size_t k = 0; k < image_.size(); ++k) x(0, static_cast<int>(k)) = image_[k];
    for (int p = 0; p < part_.player_count(); ++p) {
        if (s.contains(p)) continue;
        for (int pix : part_.pixels(p)) x(0, pix) = baseline_[pix];
    }
    auto fr = model_->forward(x, Mode::eval, 0, Track::interaction);
    return select_score(fr.out(), 0, label_, sel_);
}

}  // namespace gti
