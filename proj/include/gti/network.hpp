#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gti/matrix.hpp"

namespace gti {

enum class LayerKind { dense, relu, dropout, batchnorm, patch_dense, quadratic };
enum class HeadKind { softmax_cross_entropy, scalar };
enum class Mode { train, eval };

/// Which loss track a pass belongs to. Interaction-track passes never touch
/// batch-norm running statistics and contribute no gradient to batch-norm
/// parameters; they normalize with the current running statistics.
enum class Track { classification, interaction };

struct Layer {
    LayerKind kind;
    int in = 0;
    int out = 0;

    // dense / patch_dense (shared patch weights) / quadratic (n x n form)
    Matrix W;
    std::vector<double> b;

    // batchnorm; running statistics are updated by train-mode classification
    // passes only, so eval-time evaluation of a frozen model stays const and
    // thread-safe
    std::vector<double> gamma, beta;
    mutable std::vector<double> run_mean, run_var;

    // dropout
    double rate = 0.0;

    // patch_dense geometry
    int img_h = 0, img_w = 0, patch = 0, features = 0;

    // quadratic constant term
    double c = 0.0;
};

struct BnCache {
    bool batch_stats = false;
    std::vector<double> mean, inv_std;
    Matrix xhat;
};

/// Everything a backward pass needs: the input to every layer in the run
/// span plus per-layer masks and batch-norm caches. For tail passes
/// first_act > 0 and act[k] is the input to layer (first_act + k).
struct ForwardResult {
    Mode mode = Mode::eval;
    Track track = Track::classification;
    uint64_t mask_seed = 0;
    int first_act = 0;
    std::vector<Matrix> act;
    std::vector<Matrix> dropout_mask;  // scaled masks, aligned with the span
    std::vector<BnCache> bn;           // aligned with the span

    const Matrix& out() const { return act.back(); }
};

/// Gradient storage parallel to the model's layers.
struct Gradients {
    std::vector<Matrix> W;
    std::vector<std::vector<double>> b, gamma, beta;
    std::vector<double> c;
    void zero();
};

struct ParamRef {
    std::string name;
    double* data;
    size_t size;
};

/// A minimal feedforward network with exact reverse-mode gradients.
///
/// Layers are appended through the builder calls; shapes are validated at
/// construction so a mismatch can never surface mid-training. Activation
/// indices ("act index") address the tensors between layers: act 0 is the
/// model input, act L the output. Masked-game evaluation and the interaction
/// loss run tail passes that start at an interior act index.
class Model {
public:
    explicit Model(int input_dim);

    Model& dense(int out);
    Model& relu();
    Model& dropout(double rate);
    Model& batchnorm();
    Model& patch_dense(int img_h, int img_w, int patch, int features);
    Model& quadratic();
    Model& head(HeadKind kind);

    /// He-uniform weights, zero biases, identity batch-norm.
    void init_params(uint64_t seed);

    int input_dim() const { return dims_.front(); }
    int output_dim() const { return dims_.back(); }
    int layer_count() const { return static_cast<int>(layers_.size()); }
    int act_count() const { return static_cast<int>(dims_.size()); }
    int act_dim(int act_index) const { return dims_.at(act_index); }
    HeadKind head_kind() const { return head_; }
    bool has_batchnorm() const;
    const std::vector<Layer>& layers() const { return layers_; }
    Layer& layer(int k) { return layers_.at(k); }

    /// Act indices straight after each ReLU: the candidate player sites.
    std::vector<int> relu_sites() const;

    ForwardResult forward(const Matrix& x, Mode mode, uint64_t mask_seed = 0,
                          Track track = Track::classification) const;

    /// Run layers from an interior act index to the output. When
    /// reuse_masks is given, dropout layers in the span replay the masks of
    /// that (full) forward pass instead of drawing fresh ones.
    ForwardResult forward_from(int act_index, const Matrix& x, Mode mode,
                               uint64_t mask_seed = 0, Track track = Track::classification,
                               const ForwardResult* reuse_masks = nullptr) const;

    Gradients make_gradients() const;

    /// Accumulate parameter gradients for the whole recorded span and return
    /// the gradient at the span's first act index.
    Matrix backward(const ForwardResult& fr, const Matrix& d_out, Gradients& g) const;

    /// Backprop from the output down to `stop_act`, returning the gradient
    /// there; layers below stop_act are untouched.
    Matrix backward_to(const ForwardResult& fr, const Matrix& d_out, int stop_act,
                       Gradients& g) const;

    /// Inject a gradient at an interior act index of a full forward pass and
    /// continue down to the input. `track` decides whether batch-norm
    /// parameters below the site accumulate gradient.
    void backward_from(const ForwardResult& fr, int act_index, const Matrix& d_act,
                       Gradients& g, Track track) const;

    /// Aligned parameter/gradient views (same order for both).
    std::vector<ParamRef> param_refs();
    std::vector<ParamRef> grad_refs(Gradients& g) const;

    /// Concatenated batch-norm running statistics, for isolation checks.
    std::vector<double> batchnorm_running_state() const;

private:
    Matrix backprop(const ForwardResult& fr, int top_act, Matrix d_top, int bottom_act,
                    Gradients* g, Track track) const;

    std::vector<Layer> layers_;
    std::vector<int> dims_;  // dims_[k] = width of act k
    HeadKind head_ = HeadKind::softmax_cross_entropy;
};

/// Probability that dropout leaves exactly one fixed surviving pattern among
/// the n-1 units around a focal player: keep^|S| * drop^(n-1-|S|). At rate
/// 0.5 every pattern has probability 0.5^(n-1), the Banzhaf context weight.
double dropout_coalition_probability(int n, double rate, int surviving_count);

/// Mean softmax cross-entropy over a batch of logits.
double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels);

/// d(mean CE)/d(logits) = (softmax - onehot) / batch.
Matrix softmax_cross_entropy_grad(const Matrix& logits, const std::vector<int>& labels);

double accuracy(const Matrix& logits, const std::vector<int>& labels);

}  // namespace gti
