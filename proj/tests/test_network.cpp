#include <doctest.h>

#include <cmath>
#include <functional>

#include "gti/network.hpp"
#include "gti/rng.hpp"

using namespace gti;

namespace {

Matrix random_batch(int rows, int cols, uint64_t seed, double lo = -1.0, double hi = 1.0) {
    CounterRng rng(seed);
    Matrix m(rows, cols);
    for (size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
    return m;
}

// Central finite differences against the analytic gradient for every
// parameter of the model, with the loss fixed to mean cross entropy (or the
// mean output for scalar heads). The mask seed is frozen so dropout draws
// identical masks on every probe.
void check_gradients(Model& model, const Matrix& x, const std::vector<int>& labels,
                     uint64_t mask_seed) {
    auto loss_fn = [&]() {
        auto fr = model.forward(x, Mode::train, mask_seed);
        if (model.head_kind() == HeadKind::softmax_cross_entropy)
            return softmax_cross_entropy(fr.out(), labels);
        double acc = 0.0;
        for (int r = 0; r < fr.out().rows(); ++r) acc += fr.out()(r, 0);
        return acc / fr.out().rows();
    };

    Gradients g = model.make_gradients();
    {
        auto fr = model.forward(x, Mode::train, mask_seed);
        Matrix d_out;
        if (model.head_kind() == HeadKind::softmax_cross_entropy) {
            d_out = softmax_cross_entropy_grad(fr.out(), labels);
        } else {
            d_out = Matrix(fr.out().rows(), 1, 1.0 / fr.out().rows());
        }
        model.backward(fr, d_out, g);
    }

    const double h = 1e-5;
    auto params = model.param_refs();
    auto grads = model.grad_refs(g);
    REQUIRE(params.size() == grads.size());
    for (size_t p = 0; p < params.size(); ++p) {
        REQUIRE(params[p].size == grads[p].size);
        for (size_t k = 0; k < params[p].size; ++k) {
            double saved = params[p].data[k];
            params[p].data[k] = saved + h;
            double up = loss_fn();
            params[p].data[k] = saved - h;
            double down = loss_fn();
            params[p].data[k] = saved;
            double numeric = (up - down) / (2.0 * h);
            double analytic = grads[p].data[k];
            double tol = 1e-4 * std::max({1.0e-3, std::abs(numeric), std::abs(analytic)});
            if (std::abs(numeric - analytic) > tol) {
                CAPTURE(params[p].name);
                CAPTURE(k);
                CAPTURE(numeric);
                CAPTURE(analytic);
                REQUIRE(std::abs(numeric - analytic) <= tol);
            }
        }
    }
}

}  // namespace

TEST_SUITE_BEGIN("network");

TEST_CASE("identity dense layer reproduces its input") {
    Model m(3);
    m.dense(3).head(HeadKind::softmax_cross_entropy);
    for (int i = 0; i < 3; ++i) m.layer(0).W(i, i) = 1.0;
    Matrix x = random_batch(5, 3, 1);
    auto fr = m.forward(x, Mode::eval);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 3; ++c) REQUIRE(fr.out()(r, c) == x(r, c));
}

TEST_CASE("rate-zero dropout leaves train and eval passes identical") {
    Model m(4);
    m.dense(6).relu().dropout(0.0).dense(3);
    m.init_params(7);
    Matrix x = random_batch(4, 4, 2);
    auto train = m.forward(x, Mode::train, 99);
    auto eval = m.forward(x, Mode::eval);
    for (size_t i = 0; i < train.out().size(); ++i)
        REQUIRE(train.out().data()[i] == eval.out().data()[i]);
}

TEST_CASE("dropout masks zero the dropped units and double the survivors") {
    Model m(8);
    m.dropout(0.5);
    Matrix x(2, 8, 1.0);
    auto fr = m.forward(x, Mode::train, 4242);
    int zeros = 0, doubled = 0;
    for (size_t i = 0; i < fr.out().size(); ++i) {
        double v = fr.out().data()[i];
        REQUIRE((v == 0.0 || v == 2.0));
        v == 0.0 ? ++zeros : ++doubled;
    }
    CHECK(zeros + doubled == 16);
    CHECK(zeros > 0);
    CHECK(doubled > 0);

    // same seed, same masks
    auto again = m.forward(x, Mode::train, 4242);
    for (size_t i = 0; i < fr.out().size(); ++i)
        REQUIRE(again.out().data()[i] == fr.out().data()[i]);
}

TEST_CASE("inverted dropout preserves the expected activation") {
    Model m(10);
    m.dropout(0.3);
    Matrix x(1, 10);
    for (int c = 0; c < 10; ++c) x(0, c) = 0.5 + 0.1 * c;
    std::vector<double> mean(10, 0.0);
    const int draws = 100000;
    for (int t = 0; t < draws; ++t) {
        auto fr = m.forward(x, Mode::train, 1000 + t);
        for (int c = 0; c < 10; ++c) mean[c] += fr.out()(0, c);
    }
    for (int c = 0; c < 10; ++c)
        CHECK(mean[c] / draws == doctest::Approx(x(0, c)).epsilon(0.01));
}

TEST_CASE("gradients match finite differences: plain mlp") {
    Model m(6);
    m.dense(8).relu().dense(5).relu().dense(3);
    m.init_params(11);
    check_gradients(m, random_batch(4, 6, 3), {0, 2, 1, 2}, 0);
}

TEST_CASE("gradients match finite differences: frozen-mask dropout") {
    Model m(6);
    m.dense(8).relu().dropout(0.5).dense(3);
    m.init_params(12);
    check_gradients(m, random_batch(4, 6, 4), {1, 0, 2, 1}, 77);
}

TEST_CASE("gradients match finite differences: batch norm") {
    Model m(5);
    m.dense(7).batchnorm().relu().dense(3);
    m.init_params(13);
    check_gradients(m, random_batch(6, 5, 5), {0, 1, 2, 0, 1, 2}, 0);
}

TEST_CASE("gradients match finite differences: patch dense") {
    Model m(16);  // 4x4 image, 2x2 patches
    m.patch_dense(4, 4, 2, 3).relu().dense(2);
    m.init_params(14);
    check_gradients(m, random_batch(3, 16, 6), {0, 1, 0}, 0);
}

TEST_CASE("gradients match finite differences: quadratic head") {
    Model m(5);
    m.quadratic().head(HeadKind::scalar);
    m.init_params(15);
    check_gradients(m, random_batch(4, 5, 7), {0, 0, 0, 0}, 0);
}

TEST_CASE("gradient of a summed loss is the sum of the gradients") {
    Model m(4);
    m.dense(6).relu().dense(3);
    m.init_params(21);
    Matrix xa = random_batch(3, 4, 8);
    Matrix xb = random_batch(3, 4, 9);
    std::vector<int> la = {0, 1, 2}, lb = {2, 1, 0};

    Gradients sum = m.make_gradients();
    {
        auto fa = m.forward(xa, Mode::train);
        m.backward(fa, softmax_cross_entropy_grad(fa.out(), la), sum);
        auto fb = m.forward(xb, Mode::train);
        m.backward(fb, softmax_cross_entropy_grad(fb.out(), lb), sum);
    }
    Gradients ga = m.make_gradients(), gb = m.make_gradients();
    {
        auto fa = m.forward(xa, Mode::train);
        m.backward(fa, softmax_cross_entropy_grad(fa.out(), la), ga);
        auto fb = m.forward(xb, Mode::train);
        m.backward(fb, softmax_cross_entropy_grad(fb.out(), lb), gb);
    }
    auto rs = m.grad_refs(sum);
    auto ra = m.grad_refs(ga);
    auto rb = m.grad_refs(gb);
    for (size_t p = 0; p < rs.size(); ++p)
        for (size_t k = 0; k < rs[p].size; ++k)
            REQUIRE(std::abs(rs[p].data[k] - (ra[p].data[k] + rb[p].data[k])) < 1e-10);
}

TEST_CASE("saturated correct predictions produce a vanishing gradient") {
    Model m(3);
    m.dense(3);
    m.init_params(22);
    // huge margins toward the right class: loss ~ 0, gradient ~ 0
    m.layer(0).W.fill(0.0);
    for (int i = 0; i < 3; ++i) m.layer(0).W(i, i) = 50.0;
    Matrix x(3, 3);
    x(0, 0) = x(1, 1) = x(2, 2) = 1.0;
    std::vector<int> labels = {0, 1, 2};
    auto fr = m.forward(x, Mode::train);
    CHECK(softmax_cross_entropy(fr.out(), labels) < 1e-10);
    Gradients g = m.make_gradients();
    m.backward(fr, softmax_cross_entropy_grad(fr.out(), labels), g);
    auto refs = m.grad_refs(g);
    for (const auto& ref : refs)
        for (size_t k = 0; k < ref.size; ++k) REQUIRE(std::abs(ref.data[k]) < 1e-10);
}

TEST_CASE("interaction-track passes leave running statistics untouched") {
    Model m(5);
    m.dense(6).batchnorm().relu().dense(3);
    m.init_params(23);
    Matrix x = random_batch(8, 5, 10);

    // prime the running stats with a classification pass
    (void)m.forward(x, Mode::train, 0, Track::classification);
    auto before = m.batchnorm_running_state();

    (void)m.forward(x, Mode::train, 0, Track::interaction);
    (void)m.forward(x, Mode::eval, 0, Track::interaction);
    (void)m.forward(x, Mode::eval, 0, Track::classification);
    auto after = m.batchnorm_running_state();
    REQUIRE(before == after);

    (void)m.forward(x, Mode::train, 0, Track::classification);
    CHECK(m.batchnorm_running_state() != before);
}

TEST_CASE("interaction-track backward skips batch-norm parameter gradients") {
    Model m(5);
    m.dense(6).batchnorm().relu().dense(3);
    m.init_params(24);
    Matrix x = random_batch(6, 5, 11);
    auto fr = m.forward(x, Mode::train, 0, Track::interaction);
    Gradients g = m.make_gradients();
    m.backward(fr, softmax_cross_entropy_grad(fr.out(), {0, 1, 2, 0, 1, 2}), g);
    for (double v : g.gamma[1]) CHECK(v == 0.0);
    for (double v : g.beta[1]) CHECK(v == 0.0);
    // while dense parameters still receive gradient
    bool any = false;
    for (size_t k = 0; k < g.W[0].size(); ++k) any = any || g.W[0].data()[k] != 0.0;
    CHECK(any);
}

TEST_CASE("dropout pattern probabilities mirror the banzhaf weight at rate 0.5") {
    // every fixed survivor set of the other n-1 units has weight 0.5^(n-1)
    for (int k = 0; k <= 4; ++k)
        CHECK(dropout_coalition_probability(5, 0.5, k) == doctest::Approx(0.0625));

    // the pattern probabilities form a distribution over all survivor sets
    for (double rate : {0.2, 0.5, 0.8}) {
        double total = 0.0;
        const int n = 6;
        for (int k = 0; k <= n - 1; ++k) {
            double c = 1.0;
            for (int i = 1; i <= k; ++i) c = c * (n - 1 - i + 1) / i;
            total += c * dropout_coalition_probability(n, rate, k);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(dropout_coalition_probability(5, 0.5, 5), std::invalid_argument);
}

TEST_CASE("empirical dropout masks land on the banzhaf pattern weights") {
    // n = 4 units, focal player 3: the 8 survivor patterns of units {0,1,2}
    Model m(4);
    m.dropout(0.5);
    Matrix x(1, 4, 1.0);
    std::vector<long> counts(8, 0);
    const long draws = 200000;
    for (long t = 0; t < draws; ++t) {
        auto fr = m.forward(x, Mode::train, 5000 + t);
        int pattern = 0;
        for (int u = 0; u < 3; ++u)
            if (fr.out()(0, u) != 0.0) pattern |= 1 << u;
        ++counts[pattern];
    }
    const double expected = dropout_coalition_probability(4, 0.5, 2);  // any k: 0.125
    for (long c : counts)
        CHECK(static_cast<double>(c) / draws == doctest::Approx(expected).epsilon(0.04));
}

TEST_CASE("shape errors surface at construction") {
    Model m(10);
    CHECK_THROWS_AS(m.patch_dense(3, 3, 2, 4), std::invalid_argument);
    CHECK_THROWS_AS(m.dropout(1.0), std::invalid_argument);
    Model s(4);
    s.dense(2);
    CHECK_THROWS_AS(s.head(HeadKind::scalar), std::invalid_argument);
}

TEST_CASE("tail passes agree with full passes on the shared span") {
    Model m(6);
    m.dense(8).relu().dense(4).relu().dense(3);
    m.init_params(31);
    Matrix x = random_batch(3, 6, 12);
    auto full = m.forward(x, Mode::eval);
    const int site = m.relu_sites()[0];  // act index after first relu
    auto tail = m.forward_from(site, full.act[site], Mode::eval);
    for (size_t i = 0; i < full.out().size(); ++i)
        REQUIRE(tail.out().data()[i] == full.out().data()[i]);
}

TEST_SUITE_END();
