#include "gti/network.hpp"

#include <cmath>

#include "gti/errors.hpp"
#include "gti/rng.hpp"

namespace gti {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;  // weight on the fresh batch statistic
constexpr uint64_t kDropoutStream = 0xd209;

}  // namespace

void Gradients::zero() {
    for (auto& m : W) m.fill(0.0);
    for (auto& v : b) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : gamma) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : beta) std::fill(v.begin(), v.end(), 0.0);
    std::fill(c.begin(), c.end(), 0.0);
}

Model::Model(int input_dim) {
    if (input_dim < 1) throw std::invalid_argument("model needs a positive input width");
    dims_.push_back(input_dim);
}

Model& Model::dense(int out) {
    if (out < 1) throw std::invalid_argument("dense layer needs a positive width");
    Layer l;
    l.kind = LayerKind::dense;
    l.in = dims_.back();
    l.out = out;
    l.W = Matrix(l.in, l.out);
    l.b.assign(out, 0.0);
    layers_.push_back(std::move(l));
    dims_.push_back(out);
    return *this;
}

Model& Model::relu() {
    Layer l;
    l.kind = LayerKind::relu;
    l.in = l.out = dims_.back();
    layers_.push_back(std::move(l));
    dims_.push_back(dims_.back());
    return *this;
}

Model& Model::dropout(double rate) {
    if (rate < 0.0 || rate >= 1.0)
        throw std::invalid_argument("dropout rate must lie in [0, 1)");
    Layer l;
    l.kind = LayerKind::dropout;
    l.in = l.out = dims_.back();
    l.rate = rate;
    layers_.push_back(std::move(l));
    dims_.push_back(dims_.back());
    return *this;
}

Model& Model::batchnorm() {
    Layer l;
    l.kind = LayerKind::batchnorm;
    l.in = l.out = dims_.back();
    l.gamma.assign(l.out, 1.0);
    l.beta.assign(l.out, 0.0);
    l.run_mean.assign(l.out, 0.0);
    l.run_var.assign(l.out, 1.0);
    layers_.push_back(std::move(l));
    dims_.push_back(dims_.back());
    return *this;
}

Model& Model::patch_dense(int img_h, int img_w, int patch, int features) {
    if (dims_.back() != img_h * img_w)
        throw std::invalid_argument("patch_dense input must be a flattened " +
                                    std::to_string(img_h) + "x" + std::to_string(img_w) +
                                    " image");
    if (img_h % patch != 0 || img_w % patch != 0)
        throw std::invalid_argument("image sides must be divisible by the patch size");
    Layer l;
    l.kind = LayerKind::patch_dense;
    l.img_h = img_h;
    l.img_w = img_w;
    l.patch = patch;
    l.features = features;
    l.in = img_h * img_w;
    l.out = (img_h / patch) * (img_w / patch) * features;
    l.W = Matrix(patch * patch, features);
    l.b.assign(features, 0.0);
    layers_.push_back(std::move(l));
    dims_.push_back(l.out);
    return *this;
}

Model& Model::quadratic() {
    Layer l;
    l.kind = LayerKind::quadratic;
    l.in = dims_.back();
    l.out = 1;
    l.W = Matrix(l.in, l.in);
    l.b.assign(l.in, 0.0);
    layers_.push_back(std::move(l));
    dims_.push_back(1);
    return *this;
}

Model& Model::head(HeadKind kind) {
    if (kind == HeadKind::scalar && dims_.back() != 1)
        throw std::invalid_argument("scalar head needs a one-dimensional output");
    if (kind == HeadKind::softmax_cross_entropy && dims_.back() < 2)
        throw std::invalid_argument("classification head needs >= 2 output scores");
    head_ = kind;
    return *this;
}

void Model::init_params(uint64_t seed) {
    // streams are keyed by the ordinal among parameterized layers, so
    // inserting parameter-free layers (dropout, relu) into an architecture
    // never perturbs the initialization of the others
    uint64_t param_ordinal = 0;
    for (size_t k = 0; k < layers_.size(); ++k) {
        Layer& l = layers_[k];
        if (l.kind == LayerKind::relu || l.kind == LayerKind::dropout) continue;
        CounterRng rng(CounterRng::derive(seed, {0x1417, param_ordinal++}));
        switch (l.kind) {
            case LayerKind::dense: {
                double limit = std::sqrt(6.0 / l.in);
                for (size_t i = 0; i < l.W.size(); ++i)
                    l.W.data()[i] = rng.uniform(-limit, limit);
                std::fill(l.b.begin(), l.b.end(), 0.0);
                break;
            }
            case LayerKind::patch_dense: {
                double limit = std::sqrt(6.0 / (l.patch * l.patch));
                for (size_t i = 0; i < l.W.size(); ++i)
                    l.W.data()[i] = rng.uniform(-limit, limit);
                std::fill(l.b.begin(), l.b.end(), 0.0);
                break;
            }
            case LayerKind::quadratic: {
                double limit = 1.0 / l.in;
                for (size_t i = 0; i < l.W.size(); ++i)
                    l.W.data()[i] = rng.uniform(-limit, limit);
                for (double& v : l.b) v = rng.uniform(-limit, limit);
                l.c = 0.0;
                break;
            }
            case LayerKind::batchnorm:
                std::fill(l.gamma.begin(), l.gamma.end(), 1.0);
                std::fill(l.beta.begin(), l.beta.end(), 0.0);
                std::fill(l.run_mean.begin(), l.run_mean.end(), 0.0);
                std::fill(l.run_var.begin(), l.run_var.end(), 1.0);
                break;
            default:
                break;
        }
    }
}

bool Model::has_batchnorm() const {
    for (const Layer& l : layers_)
        if (l.kind == LayerKind::batchnorm) return true;
    return false;
}

std::vector<int> Model::relu_sites() const {
    std::vector<int> sites;
    for (size_t k = 0; k < layers_.size(); ++k)
        if (layers_[k].kind == LayerKind::relu) sites.push_back(static_cast<int>(k) + 1);
    return sites;
}

ForwardResult Model::forward(const Matrix& x, Mode mode, uint64_t mask_seed,
                             Track track) const {
    return forward_from(0, x, mode, mask_seed, track, nullptr);
}

ForwardResult Model::forward_from(int act_index, const Matrix& x, Mode mode,
                                  uint64_t mask_seed, Track track,
                                  const ForwardResult* reuse_masks) const {
    if (act_index < 0 || act_index >= act_count())
        throw std::out_of_range("act index out of range");
    if (x.cols() != dims_[act_index])
        throw std::invalid_argument("input width " + std::to_string(x.cols()) +
                                    " does not match act " + std::to_string(act_index) +
                                    " width " + std::to_string(dims_[act_index]));
    if (reuse_masks && reuse_masks->first_act != 0)
        throw std::invalid_argument("mask reuse requires a full forward pass");

    ForwardResult fr;
    fr.mode = mode;
    fr.track = track;
    fr.mask_seed = mask_seed;
    fr.first_act = act_index;
    const int span = layer_count() - act_index;
    fr.act.reserve(span + 1);
    fr.dropout_mask.resize(span);
    fr.bn.resize(span);
    fr.act.push_back(x);

    for (int k = act_index; k < layer_count(); ++k) {
        const Layer& l = layers_[k];
        const Matrix& in = fr.act.back();
        const int local = k - act_index;
        Matrix out;
        switch (l.kind) {
            case LayerKind::dense: {
                matmul(in, l.W, out);
                for (int r = 0; r < out.rows(); ++r) {
                    double* row = out.row(r);
                    for (int j = 0; j < l.out; ++j) row[j] += l.b[j];
                }
                break;
            }
            case LayerKind::relu: {
                out = in;
                for (size_t i = 0; i < out.size(); ++i)
                    if (out.data()[i] < 0.0) out.data()[i] = 0.0;
                break;
            }
            case LayerKind::dropout: {
                if (mode == Mode::eval || l.rate == 0.0) {
                    out = in;
                    break;
                }
                Matrix mask(in.rows(), in.cols());
                if (reuse_masks) {
                    mask = reuse_masks->dropout_mask[k];
                    if (mask.rows() != in.rows())
                        throw std::invalid_argument("mask reuse batch size mismatch");
                } else {
                    CounterRng rng(CounterRng::derive(mask_seed,
                                                      {kDropoutStream, static_cast<uint64_t>(k)}));
                    const double keep = 1.0 - l.rate;
                    for (size_t i = 0; i < mask.size(); ++i)
                        mask.data()[i] = rng.bernoulli(l.rate) ? 0.0 : 1.0 / keep;
                }
                out = in;
                for (size_t i = 0; i < out.size(); ++i) out.data()[i] *= mask.data()[i];
                fr.dropout_mask[local] = std::move(mask);
                break;
            }
            case LayerKind::batchnorm: {
                BnCache& cache = fr.bn[local];
                cache.batch_stats = (mode == Mode::train && track == Track::classification);
                const int dim = l.out;
                const int batch = in.rows();
                cache.mean.resize(dim);
                cache.inv_std.resize(dim);
                if (cache.batch_stats) {
                    if (batch < 2)
                        throw std::invalid_argument("batch norm needs batches of >= 2 samples");
                    for (int j = 0; j < dim; ++j) {
                        double mean = 0.0;
                        for (int r = 0; r < batch; ++r) mean += in(r, j);
                        mean /= batch;
                        double var = 0.0;
                        for (int r = 0; r < batch; ++r) {
                            double d = in(r, j) - mean;
                            var += d * d;
                        }
                        var /= batch;
                        cache.mean[j] = mean;
                        cache.inv_std[j] = 1.0 / std::sqrt(var + kBnEps);
                        // unbiased variance feeds the running estimate
                        double unbiased = var * batch / (batch - 1.0);
                        l.run_mean[j] = (1.0 - kBnMomentum) * l.run_mean[j] + kBnMomentum * mean;
                        l.run_var[j] =
                            (1.0 - kBnMomentum) * l.run_var[j] + kBnMomentum * unbiased;
                    }
                } else {
                    for (int j = 0; j < dim; ++j) {
                        cache.mean[j] = l.run_mean[j];
                        cache.inv_std[j] = 1.0 / std::sqrt(l.run_var[j] + kBnEps);
                    }
                }
                cache.xhat = Matrix(batch, dim);
                out = Matrix(batch, dim);
                for (int r = 0; r < batch; ++r)
                    for (int j = 0; j < dim; ++j) {
                        double xh = (in(r, j) - cache.mean[j]) * cache.inv_std[j];
                        cache.xhat(r, j) = xh;
                        out(r, j) = l.gamma[j] * xh + l.beta[j];
                    }
                break;
            }
            case LayerKind::patch_dense: {
                const int gr = l.img_h / l.patch;
                const int gc = l.img_w / l.patch;
                out = Matrix(in.rows(), l.out);
                for (int r = 0; r < in.rows(); ++r) {
                    const double* px = in.row(r);
                    double* orow = out.row(r);
                    for (int gy = 0; gy < gr; ++gy)
                        for (int gx = 0; gx < gc; ++gx) {
                            const int base = (gy * gc + gx) * l.features;
                            for (int f = 0; f < l.features; ++f) orow[base + f] = l.b[f];
                            for (int py = 0; py < l.patch; ++py)
                                for (int pxi = 0; pxi < l.patch; ++pxi) {
                                    double v = px[(gy * l.patch + py) * l.img_w +
                                                  gx * l.patch + pxi];
                                    if (v == 0.0) continue;
                                    const double* wrow = l.W.row(py * l.patch + pxi);
                                    for (int f = 0; f < l.features; ++f)
                                        orow[base + f] += v * wrow[f];
                                }
                        }
                }
                break;
            }
            case LayerKind::quadratic: {
                // x^T W x + b . x + c per row
                out = Matrix(in.rows(), 1);
                for (int r = 0; r < in.rows(); ++r) {
                    const double* xr = in.row(r);
                    double acc = l.c;
                    for (int a = 0; a < l.in; ++a) {
                        acc += l.b[a] * xr[a];
                        if (xr[a] == 0.0) continue;
                        const double* wrow = l.W.row(a);
                        double inner = 0.0;
                        for (int bcol = 0; bcol < l.in; ++bcol) inner += wrow[bcol] * xr[bcol];
                        acc += xr[a] * inner;
                    }
                    out(r, 0) = acc;
                }
                break;
            }
        }
        fr.act.push_back(std::move(out));
    }
    return fr;
}

Gradients Model::make_gradients() const {
    Gradients g;
    g.W.resize(layers_.size());
    g.b.resize(layers_.size());
    g.gamma.resize(layers_.size());
    g.beta.resize(layers_.size());
    g.c.assign(layers_.size(), 0.0);
    for (size_t k = 0; k < layers_.size(); ++k) {
        const Layer& l = layers_[k];
        if (l.W.size() > 0) g.W[k] = Matrix(l.W.rows(), l.W.cols());
        g.b[k].assign(l.b.size(), 0.0);
        g.gamma[k].assign(l.gamma.size(), 0.0);
        g.beta[k].assign(l.beta.size(), 0.0);
    }
    return g;
}

Matrix Model::backprop(const ForwardResult& fr, int top_act, Matrix d_top, int bottom_act,
                       Gradients* g, Track track) const {
    const int span_top = fr.first_act + static_cast<int>(fr.act.size()) - 1;
    if (top_act > span_top || bottom_act < fr.first_act || bottom_act > top_act)
        throw std::out_of_range("backprop span outside the recorded forward pass");
    Matrix d = std::move(d_top);
    for (int k = top_act - 1; k >= bottom_act; --k) {
        const Layer& l = layers_[k];
        const int local = k - fr.first_act;
        const Matrix& in = fr.act[local];
        Matrix d_in;
        switch (l.kind) {
            case LayerKind::dense: {
                if (g) {
                    Matrix dW;
                    matmul_at(in, d, dW);
                    (*g).W[k] += dW;
                    for (int r = 0; r < d.rows(); ++r) {
                        const double* drow = d.row(r);
                        for (int j = 0; j < l.out; ++j) (*g).b[k][j] += drow[j];
                    }
                }
                matmul_bt(d, l.W, d_in);
                break;
            }
            case LayerKind::relu: {
                d_in = d;
                for (size_t i = 0; i < d_in.size(); ++i)
                    if (in.data()[i] <= 0.0) d_in.data()[i] = 0.0;
                break;
            }
            case LayerKind::dropout: {
                if (fr.mode == Mode::eval || l.rate == 0.0) {
                    d_in = std::move(d);
                    break;
                }
                const Matrix& mask = fr.dropout_mask[local];
                d_in = d;
                for (size_t i = 0; i < d_in.size(); ++i) d_in.data()[i] *= mask.data()[i];
                break;
            }
            case LayerKind::batchnorm: {
                const BnCache& cache = fr.bn[local];
                const int dim = l.out;
                const int batch = d.rows();
                if (g && track == Track::classification) {
                    for (int r = 0; r < batch; ++r)
                        for (int j = 0; j < dim; ++j) {
                            (*g).gamma[k][j] += d(r, j) * cache.xhat(r, j);
                            (*g).beta[k][j] += d(r, j);
                        }
                }
                d_in = Matrix(batch, dim);
                if (cache.batch_stats) {
                    for (int j = 0; j < dim; ++j) {
                        double sum_d = 0.0, sum_dx = 0.0;
                        for (int r = 0; r < batch; ++r) {
                            sum_d += d(r, j);
                            sum_dx += d(r, j) * cache.xhat(r, j);
                        }
                        double scale = l.gamma[j] * cache.inv_std[j] / batch;
                        for (int r = 0; r < batch; ++r)
                            d_in(r, j) = scale * (batch * d(r, j) - sum_d -
                                                  cache.xhat(r, j) * sum_dx);
                    }
                } else {
                    for (int j = 0; j < dim; ++j) {
                        double scale = l.gamma[j] * cache.inv_std[j];
                        for (int r = 0; r < batch; ++r) d_in(r, j) = scale * d(r, j);
                    }
                }
                break;
            }
            case LayerKind::patch_dense: {
                const int gr = l.img_h / l.patch;
                const int gc = l.img_w / l.patch;
                d_in = Matrix(in.rows(), l.in);
                for (int r = 0; r < in.rows(); ++r) {
                    const double* px = in.row(r);
                    const double* drow = d.row(r);
                    double* dinrow = d_in.row(r);
                    for (int gy = 0; gy < gr; ++gy)
                        for (int gx = 0; gx < gc; ++gx) {
                            const int base = (gy * gc + gx) * l.features;
                            if (g)
                                for (int f = 0; f < l.features; ++f)
                                    (*g).b[k][f] += drow[base + f];
                            for (int py = 0; py < l.patch; ++py)
                                for (int pxi = 0; pxi < l.patch; ++pxi) {
                                    const int pix =
                                        (gy * l.patch + py) * l.img_w + gx * l.patch + pxi;
                                    const int wrow = py * l.patch + pxi;
                                    double acc = 0.0;
                                    for (int f = 0; f < l.features; ++f) {
                                        acc += drow[base + f] * l.W(wrow, f);
                                        if (g) (*g).W[k](wrow, f) += drow[base + f] * px[pix];
                                    }
                                    dinrow[pix] = acc;
                                }
                        }
                }
                break;
            }
            case LayerKind::quadratic: {
                d_in = Matrix(in.rows(), l.in);
                for (int r = 0; r < in.rows(); ++r) {
                    const double* xr = in.row(r);
                    const double dout = d(r, 0);
                    if (g) {
                        (*g).c[k] += dout;
                        for (int a = 0; a < l.in; ++a) {
                            (*g).b[k][a] += dout * xr[a];
                            if (xr[a] == 0.0) continue;
                            for (int bcol = 0; bcol < l.in; ++bcol)
                                (*g).W[k](a, bcol) += dout * xr[a] * xr[bcol];
                        }
                    }
                    for (int a = 0; a < l.in; ++a) {
                        double acc = l.b[a];
                        for (int bcol = 0; bcol < l.in; ++bcol)
                            acc += (l.W(a, bcol) + l.W(bcol, a)) * xr[bcol];
                        d_in(r, a) = dout * acc;
                    }
                }
                break;
            }
        }
        d = std::move(d_in);
    }
    return d;
}

Matrix Model::backward(const ForwardResult& fr, const Matrix& d_out, Gradients& g) const {
    const int top = fr.first_act + static_cast<int>(fr.act.size()) - 1;
    return backprop(fr, top, d_out, fr.first_act, &g, fr.track);
}

Matrix Model::backward_to(const ForwardResult& fr, const Matrix& d_out, int stop_act,
                          Gradients& g) const {
    const int top = fr.first_act + static_cast<int>(fr.act.size()) - 1;
    return backprop(fr, top, d_out, stop_act, &g, fr.track);
}

void Model::backward_from(const ForwardResult& fr, int act_index, const Matrix& d_act,
                          Gradients& g, Track track) const {
    if (fr.first_act != 0) throw std::invalid_argument("needs a full forward pass");
    backprop(fr, act_index, d_act, 0, &g, track);
}

std::vector<ParamRef> Model::param_refs() {
    std::vector<ParamRef> refs;
    for (size_t k = 0; k < layers_.size(); ++k) {
        Layer& l = layers_[k];
        std::string tag = "layer" + std::to_string(k);
        if (l.W.size() > 0) refs.push_back({tag + ".W", l.W.data(), l.W.size()});
        if (!l.b.empty()) refs.push_back({tag + ".b", l.b.data(), l.b.size()});
        if (!l.gamma.empty()) refs.push_back({tag + ".gamma", l.gamma.data(), l.gamma.size()});
        if (!l.beta.empty()) refs.push_back({tag + ".beta", l.beta.data(), l.beta.size()});
        if (l.kind == LayerKind::quadratic) refs.push_back({tag + ".c", &l.c, 1});
    }
    return refs;
}

std::vector<ParamRef> Model::grad_refs(Gradients& g) const {
    std::vector<ParamRef> refs;
    for (size_t k = 0; k < layers_.size(); ++k) {
        const Layer& l = layers_[k];
        std::string tag = "layer" + std::to_string(k);
        if (l.W.size() > 0) refs.push_back({tag + ".W", g.W[k].data(), g.W[k].size()});
        if (!l.b.empty()) refs.push_back({tag + ".b", g.b[k].data(), g.b[k].size()});
        if (!l.gamma.empty())
            refs.push_back({tag + ".gamma", g.gamma[k].data(), g.gamma[k].size()});
        if (!l.beta.empty()) refs.push_back({tag + ".beta", g.beta[k].data(), g.beta[k].size()});
        if (l.kind == LayerKind::quadratic) refs.push_back({tag + ".c", &g.c[k], 1});
    }
    return refs;
}

std::vector<double> Model::batchnorm_running_state() const {
    std::vector<double> state;
    for (const Layer& l : layers_) {
        state.insert(state.end(), l.run_mean.begin(), l.run_mean.end());
        state.insert(state.end(), l.run_var.begin(), l.run_var.end());
    }
    return state;
}

double dropout_coalition_probability(int n, double rate, int surviving_count) {
    if (n < 2) throw std::invalid_argument("needs at least two units");
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("rate must lie in [0, 1)");
    if (surviving_count < 0 || surviving_count > n - 1)
        throw std::invalid_argument("surviving count outside [0, n-1]");
    const double keep = 1.0 - rate;
    return std::pow(keep, surviving_count) * std::pow(rate, n - 1 - surviving_count);
}

double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
    if (static_cast<int>(labels.size()) != logits.rows())
        throw std::invalid_argument("one label per row required");
    double loss = 0.0;
    for (int r = 0; r < logits.rows(); ++r) {
        const double* row = logits.row(r);
        double mx = row[0];
        for (int c = 1; c < logits.cols(); ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (int c = 0; c < logits.cols(); ++c) z += std::exp(row[c] - mx);
        loss += std::log(z) + mx - row[labels[r]];
    }
    return loss / logits.rows();
}

Matrix softmax_cross_entropy_grad(const Matrix& logits, const std::vector<int>& labels) {
    Matrix g(logits.rows(), logits.cols());
    for (int r = 0; r < logits.rows(); ++r) {
        const double* row = logits.row(r);
        double mx = row[0];
        for (int c = 1; c < logits.cols(); ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (int c = 0; c < logits.cols(); ++c) z += std::exp(row[c] - mx);
        for (int c = 0; c < logits.cols(); ++c)
            g(r, c) = std::exp(row[c] - mx) / z / logits.rows();
        g(r, labels[r]) -= 1.0 / logits.rows();
    }
    return g;
}

double accuracy(const Matrix& logits, const std::vector<int>& labels) {
    int hits = 0;
    for (int r = 0; r < logits.rows(); ++r) {
        int best = 0;
        for (int c = 1; c < logits.cols(); ++c)
            if (logits(r, c) > logits(r, best)) best = c;
        if (best == labels[r]) ++hits;
    }
    return static_cast<double>(hits) / logits.rows();
}

}  // namespace gti
