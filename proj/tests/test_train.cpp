#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gti/errors.hpp"
#include "gti/train.hpp"

using namespace gti;

TEST_SUITE_BEGIN("train");

TEST_CASE("separable blobs reach full training accuracy") {
    Dataset data = gaussian_blobs(40, 2, 4, 6.0, 5);
    Model m(4);
    m.dense(8).relu().dense(2);
    m.init_params(5);
    TrainingConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.epochs = 50;
    cfg.seed = 5;
    auto metrics = train(m, data, cfg);
    bool reached = false;
    for (const auto& e : metrics) reached = reached || e.accuracy == 1.0;
    CHECK(reached);
}

TEST_CASE("plain gradient descent on a convex logistic toy never increases the loss") {
    Dataset data = gaussian_blobs(20, 2, 3, 3.0, 9);
    Model m(3);
    m.dense(2);  // single linear layer + softmax: convex objective
    m.init_params(9);
    TrainingConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.momentum = 0.0;
    cfg.batch_size = data.count;  // full-batch descent
    cfg.epochs = 40;
    cfg.seed = 9;
    auto metrics = train(m, data, cfg);
    for (size_t e = 1; e < metrics.size(); ++e)
        REQUIRE(metrics[e].cls_loss <= metrics[e - 1].cls_loss + 1e-12);
}

TEST_CASE("training is bit-deterministic per seed") {
    Dataset data = synth_images(8, 3, 33, 8, 8);
    auto run = [&](uint64_t seed) {
        Model m(64);
        m.dense(16).relu().dropout(0.5).dense(3);
        m.init_params(seed);
        TrainingConfig cfg;
        cfg.learning_rate = 0.05;
        cfg.epochs = 3;
        cfg.batch_size = 8;
        cfg.seed = seed;
        train(m, data, cfg);
        std::vector<double> flat;
        for (const auto& ref : m.param_refs())
            flat.insert(flat.end(), ref.data, ref.data + ref.size);
        return flat;
    };
    auto a = run(4);
    auto b = run(4);
    REQUIRE(a == b);
    CHECK(run(5) != a);
}

TEST_CASE("diverging runs raise a typed error carrying the step") {
    Dataset data = gaussian_blobs(16, 2, 3, 3.0, 2);
    Model m(3);
    m.dense(8).relu().dense(2);
    m.init_params(2);
    TrainingConfig cfg;
    cfg.learning_rate = 1e120;
    cfg.epochs = 20;
    cfg.seed = 2;
    CHECK_THROWS_AS(train(m, data, cfg), TrainingDivergedError);
}

TEST_CASE("interaction-loss training logs both components") {
    Dataset data = synth_images(6, 2, 44, 8, 8);
    Model m(64);
    m.dense(12).relu().dense(2);
    m.init_params(3);
    TrainingConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.epochs = 2;
    cfg.batch_size = 6;
    cfg.seed = 3;
    cfg.lambda = 1.0;
    cfg.loss.site = m.relu_sites()[0];

    Trainer trainer(m, cfg);
    for (int e = 0; e < cfg.epochs; ++e) (void)trainer.run_epoch(data, e);
    REQUIRE(!trainer.step_log().empty());
    bool any_int = false;
    for (const auto& row : trainer.step_log()) {
        CHECK(row.lambda == 1.0);
        any_int = any_int || row.int_loss != 0.0;
    }
    CHECK(any_int);

    namespace fs = std::filesystem;
    std::string path = (fs::temp_directory_path() / "gti_test_steps.csv").string();
    write_step_log_csv(trainer.step_log(), path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "step,cls_loss,int_loss,lambda");
    in.close();
    std::remove(path.c_str());
}

TEST_CASE("epoch-zero models coincide across configs sharing a seed") {
    // dropout draws must not perturb initialization
    Model a(16);
    a.dense(8).relu().dropout(0.5).dense(2);
    a.init_params(12);
    Model b(16);
    b.dense(8).relu().dropout(0.0).dense(2);
    b.init_params(12);
    REQUIRE(a.layer(0).W.size() == b.layer(0).W.size());
    for (size_t k = 0; k < a.layer(0).W.size(); ++k)
        REQUIRE(a.layer(0).W.data()[k] == b.layer(0).W.data()[k]);
}

TEST_SUITE_END();
