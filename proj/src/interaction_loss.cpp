#include "gti/interaction_loss.hpp"

#include <cmath>

#include "gti/errors.hpp"
#include "gti/exact.hpp"

namespace gti {

namespace {
constexpr uint64_t kQuadStream = 0xab5;
}

int quad_batch_size(int n_units, double alpha) {
    return std::max(1, static_cast<int>(std::ceil(alpha * n_units)));
}

void validate_loss_config(const Model& model, const LossConfig& cfg) {
    if (cfg.alpha <= 0.0 || cfg.alpha >= 0.5)
        throw std::invalid_argument("loss alpha must lie in (0, 0.5)");
    if (cfg.pairs_per_step < 1)
        throw std::invalid_argument("pairs_per_step must be >= 1");
    if (cfg.site < 0 || cfg.site >= model.act_count())
        throw std::invalid_argument("loss site is not an act index of the model");
    const int n = model.act_dim(cfg.site);
    const int k = quad_batch_size(n, cfg.alpha);
    if (n < 2 * k + 1)
        throw std::invalid_argument("site has " + std::to_string(n) +
                                    " units; needs at least 2*ceil(alpha n)+1 = " +
                                    std::to_string(2 * k + 1));
}

QuadSets sample_quad_at_rate(int n_units, const LossConfig& cfg, double rate, CounterRng& rng) {
    const int k = quad_batch_size(n_units, cfg.alpha);
    if (n_units < 2 * k + 1)
        throw std::invalid_argument("too few units for disjoint unit batches");

    // A and B from one partial shuffle: first k entries and next k entries.
    std::vector<int> pool(n_units);
    for (int i = 0; i < n_units; ++i) pool[i] = i;
    for (int i = 0; i < 2 * k; ++i) {
        int j = i + static_cast<int>(rng.next_below(static_cast<uint64_t>(n_units - i)));
        std::swap(pool[i], pool[j]);
    }
    QuadSets q{Coalition::empty_set(n_units), Coalition::empty_set(n_units),
               Coalition::empty_set(n_units)};
    for (int i = 0; i < k; ++i) q.a.add(pool[i]);
    for (int i = k; i < 2 * k; ++i) q.b.add(pool[i]);

    for (int i = 2 * k; i < n_units; ++i)
        if (rng.bernoulli(rate)) q.s.add(pool[i]);
    return q;
}

QuadSets sample_quad(int n_units, const LossConfig& cfg, CounterRng& rng) {
    const int k = quad_batch_size(n_units, cfg.alpha);
    if (n_units < 2 * k + 1)
        throw std::invalid_argument("too few units for disjoint unit batches");

    std::vector<int> pool(n_units);
    for (int i = 0; i < n_units; ++i) pool[i] = i;
    for (int i = 0; i < 2 * k; ++i) {
        int j = i + static_cast<int>(rng.next_below(static_cast<uint64_t>(n_units - i)));
        std::swap(pool[i], pool[j]);
    }
    QuadSets q{Coalition::empty_set(n_units), Coalition::empty_set(n_units),
               Coalition::empty_set(n_units)};
    for (int i = 0; i < k; ++i) q.a.add(pool[i]);
    for (int i = k; i < 2 * k; ++i) q.b.add(pool[i]);

    const double rate = rng.next_double();
    for (int i = 2 * k; i < n_units; ++i)
        if (rng.bernoulli(rate)) q.s.add(pool[i]);
    return q;
}

double exact_interaction_loss(const Game& site_game) {
    const int n = site_game.n_players();
    if (n > 14)
        throw SizeLimitError("exact interaction loss enumerates all pairs and contexts; n <= 14");
    if (n < 2) throw std::invalid_argument("interaction loss needs at least two units");
    double acc = 0.0;
    long pairs = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            acc += std::abs(interaction_exact(site_game, i, j).value);
            ++pairs;
        }
    return acc / static_cast<double>(pairs);
}

double approx_interaction_loss(const Model& model, const ForwardResult& fr,
                               const std::vector<int>& labels, const LossConfig& cfg,
                               ScoreSelector sel, uint64_t draw_seed, double weight,
                               Gradients* grads) {
    validate_loss_config(model, cfg);
    if (fr.first_act != 0)
        throw std::invalid_argument("interaction loss needs the full classification pass");
    const int site = cfg.site;
    const Matrix& h = fr.act[site];
    const int batch = h.rows();
    const int n = h.cols();
    if (static_cast<int>(labels.size()) != batch)
        throw std::invalid_argument("one label per batch row required");

    Matrix d_site(batch, n);  // dL/dh accumulated over draws and passes
    double loss = 0.0;

    for (int draw = 0; draw < cfg.pairs_per_step; ++draw) {
        CounterRng rng(CounterRng::derive(draw_seed, {kQuadStream, static_cast<uint64_t>(draw)}));
        QuadSets q = sample_quad(n, cfg, rng);
        const Coalition masks[4] = {q.s.united(q.a).united(q.b), q.s.united(q.a),
                                    q.s.united(q.b), q.s};
        const double signs[4] = {+1.0, -1.0, -1.0, +1.0};

        // four masked tail passes, dropout masks replayed from the
        // classification pass so the two regularizers stay orthogonal
        ForwardResult pass[4];
        std::vector<char> keep[4];
        for (int p = 0; p < 4; ++p) {
            keep[p].assign(n, 0);
            masks[p].for_each_member([&](int u) { keep[p][u] = 1; });
            Matrix hm = h;
            for (int r = 0; r < batch; ++r)
                for (int u = 0; u < n; ++u)
                    if (!keep[p][u]) hm(r, u) = 0.0;
            pass[p] = model.forward_from(site, hm, fr.mode, fr.mask_seed, Track::interaction,
                                         fr.mode == Mode::train ? &fr : nullptr);
        }

        std::vector<double> delta(batch);
        for (int r = 0; r < batch; ++r) {
            double d = 0.0;
            for (int p = 0; p < 4; ++p)
                d += signs[p] * select_score(pass[p].out(), r, labels[r], sel);
            if (!std::isfinite(d))
                throw NumericError("non-finite quad delta on draw A=" + q.a.to_string() +
                                   " B=" + q.b.to_string() + " S=" + q.s.to_string());
            delta[r] = d;
            loss += d * d;
        }

        if (grads) {
            const double scale = 2.0 * weight / (static_cast<double>(batch) * cfg.pairs_per_step);
            for (int p = 0; p < 4; ++p) {
                Matrix d_out(batch, pass[p].out().cols());
                for (int r = 0; r < batch; ++r)
                    add_score_gradient(pass[p].out(), r, labels[r], sel,
                                       signs[p] * scale * delta[r], d_out);
                Matrix d_hm = model.backward(pass[p], d_out, *grads);
                for (int r = 0; r < batch; ++r)
                    for (int u = 0; u < n; ++u)
                        if (keep[p][u]) d_site(r, u) += d_hm(r, u);
            }
        }
    }

    if (grads && site > 0) model.backward_from(fr, site, d_site, *grads, Track::interaction);
    return loss / (static_cast<double>(batch) * cfg.pairs_per_step);
}

LossBreakdown total_loss(const Model& model, const Matrix& x, const std::vector<int>& labels,
                         double lambda, const LossConfig& cfg, ScoreSelector sel, Mode mode,
                         uint64_t mask_seed, uint64_t draw_seed, Gradients* grads,
                         Matrix* logits_out) {
    if (model.head_kind() != HeadKind::softmax_cross_entropy)
        throw std::invalid_argument("total loss is defined for classification heads");
    LossBreakdown out;
    out.lambda = lambda;

    ForwardResult fr = model.forward(x, mode, mask_seed, Track::classification);
    out.classification = softmax_cross_entropy(fr.out(), labels);
    if (grads) model.backward(fr, softmax_cross_entropy_grad(fr.out(), labels), *grads);

    if (lambda != 0.0)
        out.interaction =
            approx_interaction_loss(model, fr, labels, cfg, sel, draw_seed, lambda, grads);
    if (logits_out) *logits_out = fr.out();
    return out;
}

}  // namespace gti
