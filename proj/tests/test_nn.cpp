#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <vector>

#include "quanvnet/nn.hpp"

using namespace quanvnet;

namespace {

Tensor3 random_tensor(int h, int w, int c, std::mt19937_64& rng) {
    Tensor3 t = Tensor3::zeros(h, w, c);
    for (double& v : t.values) v = uniform_in(rng, 0.0, 1.0);
    return t;
}

// Central-difference loss gradient for one parameter slot.
double fd_gradient(Network& net, double& param, const std::vector<Tensor3>& xs,
                   const std::vector<int>& ys, double h = 1e-5) {
    const double saved = param;
    param = saved + h;
    const double up = loss_and_gradients(net, xs, ys).first;
    param = saved - h;
    const double down = loss_and_gradients(net, xs, ys).first;
    param = saved;
    return (up - down) / (2.0 * h);
}

void check_close(double analytic, double fd) {
    const double scale = std::max(std::abs(analytic), std::abs(fd));
    if (scale < 1e-7) return; // both at the finite-difference noise floor
    CHECK(std::abs(analytic - fd) / scale < 1e-4);
}

void gradcheck(Network& net, const std::vector<Tensor3>& xs, const std::vector<int>& ys) {
    const auto [loss, grads] = loss_and_gradients(net, xs, ys);
    CHECK(loss >= 0.0);
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        if (auto* conv = std::get_if<ConvLayer>(&net.layers[k])) {
            for (std::size_t i = 0; i < conv->weights.size(); ++i)
                check_close(grads[k].weights[i], fd_gradient(net, conv->weights[i], xs, ys));
            for (std::size_t i = 0; i < conv->biases.size(); ++i)
                check_close(grads[k].biases[i], fd_gradient(net, conv->biases[i], xs, ys));
        } else if (auto* dense = std::get_if<DenseLayer>(&net.layers[k])) {
            for (std::size_t i = 0; i < dense->weights.size(); ++i)
                check_close(grads[k].weights[i], fd_gradient(net, dense->weights[i], xs, ys));
            for (std::size_t i = 0; i < dense->biases.size(); ++i)
                check_close(grads[k].biases[i], fd_gradient(net, dense->biases[i], xs, ys));
        }
    }
}

// Four nearly one-hot classes; linearly separable by construction.
void separable_toy_set(std::size_t count, std::uint64_t seed, std::vector<Tensor3>& xs,
                       std::vector<int>& ys) {
    std::mt19937_64 rng(seed);
    for (std::size_t n = 0; n < count; ++n) {
        const int label = int(n % 4);
        Tensor3 t = Tensor3::zeros(1, 1, 4);
        for (int c = 0; c < 4; ++c) t.values[std::size_t(c)] = uniform_in(rng, 0.0, 0.1);
        t.values[std::size_t(label)] += 1.0;
        xs.push_back(std::move(t));
        ys.push_back(label);
    }
}

} // namespace

TEST_CASE("conv_forward: 1x1 identity kernel, shapes, constant bias") {
    std::mt19937_64 rng(1);
    const Tensor3 input = random_tensor(4, 4, 1, rng);

    ConvLayer identity;
    identity.num_filters = 1;
    identity.kernel = 1;
    identity.stride = 1;
    identity.in_channels = 1;
    identity.weights = {1.0};
    identity.biases = {0.0};
    const Tensor3 same = conv_forward(identity, input);
    CHECK(same.values == input.values);

    ConvLayer five;
    five.num_filters = 5;
    five.kernel = 5;
    five.stride = 1;
    five.in_channels = 4;
    five.weights.assign(5 * 5 * 5 * 4, 0.0);
    five.biases.assign(5, 2.5);
    const Tensor3 out = conv_forward(five, random_tensor(28, 28, 4, rng));
    CHECK(out.height == 24);
    CHECK(out.width == 24);
    CHECK(out.channels == 5);
    for (double v : out.values) CHECK(v == 2.5); // zero weights leave only the bias

    CHECK_THROWS_AS(conv_forward(five, random_tensor(4, 4, 4, rng)), std::invalid_argument);
    CHECK_THROWS_AS(conv_forward(five, random_tensor(28, 28, 3, rng)), std::invalid_argument);
}

TEST_CASE("pool_forward: constants, shapes, max behavior") {
    std::mt19937_64 rng(2);
    Tensor3 constant = Tensor3::zeros(6, 6, 2);
    for (double& v : constant.values) v = 3.25;

    const PoolLayer avg{PoolLayer::Kind::Average, 2, 2};
    const PoolLayer mx{PoolLayer::Kind::Max, 2, 2};
    for (const PoolLayer& layer : {avg, mx}) {
        const Tensor3 out = pool_forward(layer, constant);
        CHECK(out.height == 3);
        for (double v : out.values) CHECK(v == 3.25);
    }

    const PoolLayer pool1{PoolLayer::Kind::Average, 5, 2};
    const Tensor3 pooled = pool_forward(pool1, random_tensor(24, 24, 5, rng));
    CHECK(pooled.height == 10);
    CHECK(pooled.width == 10);
    CHECK(pooled.channels == 5);

    Tensor3 quad = Tensor3::zeros(2, 2, 1);
    quad.values = {1.0, 2.0, 3.0, 4.0};
    CHECK(pool_forward(mx, quad).values[0] == 4.0);
    CHECK(pool_forward(avg, quad).values[0] == 2.5);

    CHECK_THROWS_AS(pool_forward(pool1, quad), std::invalid_argument);
}

TEST_CASE("shape algebra: output side = (in - k) / s + 1 across configurations") {
    std::mt19937_64 rng(42);
    for (int in_side : {5, 7, 10, 16}) {
        for (int k : {1, 2, 3, 5}) {
            if (k > in_side) continue;
            for (int s : {1, 2, 3}) {
                const int want = (in_side - k) / s + 1;

                ConvLayer conv;
                conv.num_filters = 2;
                conv.kernel = k;
                conv.stride = s;
                conv.in_channels = 1;
                conv.weights.assign(std::size_t(2 * k * k), 0.1);
                conv.biases.assign(2, 0.0);
                const Tensor3 co = conv_forward(conv, random_tensor(in_side, in_side, 1, rng));
                CHECK(co.height == want);
                CHECK(co.width == want);

                const PoolLayer pool{PoolLayer::Kind::Max, k, s};
                const Tensor3 po = pool_forward(pool, random_tensor(in_side, in_side, 1, rng));
                CHECK(po.height == want);
                CHECK(po.width == want);
            }
        }
    }
}

TEST_CASE("reference CNN shape chain 28x28x4 -> 24x24x5 -> 10x10x5 -> 8x8x12 -> 4x4x12 -> 4") {
    std::mt19937_64 rng(3);
    const Network net = build_reference_cnn(17);
    Tensor3 t = random_tensor(28, 28, 4, rng);

    const int expect_h[] = {24, 10, 8, 4, 1};
    const int expect_c[] = {5, 5, 12, 12, 4};
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        t = layer_forward(net.layers[k], t);
        CHECK(t.height == expect_h[k]);
        CHECK(t.channels == expect_c[k]);
    }
    CHECK(t.values.size() == 4);
}

TEST_CASE("reference QNN shape chain 5x5x5 -> 3x3x12 -> 1x1x12 -> 4") {
    std::mt19937_64 rng(4);
    const Network net = build_reference_qnn(17, 5, 5);
    const std::vector<double> logits = network_forward(net, random_tensor(5, 5, 5, rng));
    CHECK(logits.size() == 4);

    Tensor3 t = random_tensor(5, 5, 5, rng);
    t = layer_forward(net.layers[0], t);
    CHECK(t.height == 3);
    CHECK(t.channels == 12);
    t = layer_forward(net.layers[1], t);
    CHECK(t.height == 1);
    CHECK(t.channels == 12);
}

TEST_CASE("two seeds give different weights with identical shapes") {
    const Network a = build_reference_cnn(1);
    const Network b = build_reference_cnn(2);
    const auto& ca = std::get<ConvLayer>(a.layers[0]);
    const auto& cb = std::get<ConvLayer>(b.layers[0]);
    CHECK(ca.weights.size() == cb.weights.size());
    CHECK(ca.weights != cb.weights);
}

TEST_CASE("zero input and zero weights leave only the output biases") {
    Network net = build_reference_cnn(5);
    for (Layer& layer : net.layers) {
        if (auto* conv = std::get_if<ConvLayer>(&layer))
            std::fill(conv->weights.begin(), conv->weights.end(), 0.0);
        if (auto* dense = std::get_if<DenseLayer>(&layer)) {
            std::fill(dense->weights.begin(), dense->weights.end(), 0.0);
            dense->biases = {0.5, -1.0, 2.0, 0.25};
        }
    }
    const std::vector<double> logits = network_forward(net, Tensor3::zeros(28, 28, 4));
    CHECK(logits == std::vector<double>{0.5, -1.0, 2.0, 0.25});

    CHECK_THROWS_AS(network_forward(net, Tensor3::zeros(10, 10, 4)), std::invalid_argument);
}

TEST_CASE("softmax: sums to one, uniform logits give ln 4") {
    const auto p = softmax({3.0, -1.0, 0.5, 2.0});
    double sum = 0.0;
    for (double v : p) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-12);

    Network net = build_reference_qnn(6, 5, 2);
    for (Layer& layer : net.layers) {
        if (auto* conv = std::get_if<ConvLayer>(&layer))
            std::fill(conv->weights.begin(), conv->weights.end(), 0.0);
        if (auto* dense = std::get_if<DenseLayer>(&layer))
            std::fill(dense->weights.begin(), dense->weights.end(), 0.0);
    }
    std::mt19937_64 rng(7);
    const std::vector<Tensor3> xs = {random_tensor(5, 5, 2, rng), random_tensor(5, 5, 2, rng)};
    const auto [loss, grads] = loss_and_gradients(net, xs, {0, 3});
    CHECK(loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("loss_and_gradients rejects bad labels and empty batches") {
    Network net = build_reference_qnn(8, 5, 2);
    std::mt19937_64 rng(8);
    const std::vector<Tensor3> xs = {random_tensor(5, 5, 2, rng)};
    CHECK_THROWS_AS(loss_and_gradients(net, xs, {4}), std::invalid_argument);
    CHECK_THROWS_AS(loss_and_gradients(net, xs, {-1}), std::invalid_argument);
    CHECK_THROWS_AS(loss_and_gradients(net, {}, {}), std::invalid_argument);
}

TEST_CASE("duplicated batch keeps the mean loss") {
    Network net = build_reference_qnn(9, 5, 3);
    std::mt19937_64 rng(9);
    std::vector<Tensor3> xs = {random_tensor(5, 5, 3, rng), random_tensor(5, 5, 3, rng)};
    std::vector<int> ys = {1, 2};
    const double single = loss_and_gradients(net, xs, ys).first;
    xs.push_back(xs[0]);
    xs.push_back(xs[1]);
    ys.push_back(1);
    ys.push_back(2);
    const double doubled = loss_and_gradients(net, xs, ys).first;
    CHECK(doubled == doctest::Approx(single).epsilon(1e-12));
}

TEST_CASE("gradients match central finite differences on a mixed small network") {
    std::mt19937_64 rng(10);
    Network net;
    net.input_height = 8;
    net.input_width = 8;
    net.input_channels = 2;
    net.layers.push_back(make_conv(3, 3, 1, 2, rng));
    net.layers.push_back(PoolLayer{PoolLayer::Kind::Max, 2, 2});
    net.layers.push_back(make_dense(4, 3 * 3 * 3, rng));

    std::vector<Tensor3> xs;
    std::vector<int> ys;
    for (int n = 0; n < 3; ++n) {
        xs.push_back(random_tensor(8, 8, 2, rng));
        ys.push_back(n % 4);
    }
    gradcheck(net, xs, ys);
}

TEST_CASE("gradients match finite differences through average pooling and stride 2") {
    std::mt19937_64 rng(11);
    Network net;
    net.input_height = 9;
    net.input_width = 9;
    net.input_channels = 1;
    net.layers.push_back(make_conv(2, 3, 2, 1, rng)); // -> 4x4x2
    net.layers.push_back(PoolLayer{PoolLayer::Kind::Average, 2, 2}); // -> 2x2x2
    net.layers.push_back(make_dense(4, 8, rng));

    std::vector<Tensor3> xs;
    std::vector<int> ys;
    for (int n = 0; n < 4; ++n) {
        xs.push_back(random_tensor(9, 9, 1, rng));
        ys.push_back(3 - (n % 4));
    }
    gradcheck(net, xs, ys);
}

TEST_CASE("max-pool subgradient routes to exactly the first maximum") {
    Tensor3 input = Tensor3::zeros(2, 2, 1);
    Tensor3 grad_out = Tensor3::zeros(1, 1, 1);
    grad_out.values[0] = 1.0;
    const PoolLayer mx{PoolLayer::Kind::Max, 2, 2};

    SUBCASE("all-equal window routes to the row-major first element") {
        input.values = {5.0, 5.0, 5.0, 5.0};
        const Tensor3 grad_in = detail::pool_backward(mx, input, grad_out);
        CHECK(grad_in.values == std::vector<double>{1.0, 0.0, 0.0, 0.0});
    }
    SUBCASE("unique maximum receives everything") {
        input.values = {1.0, 2.0, 4.0, 3.0};
        const Tensor3 grad_in = detail::pool_backward(mx, input, grad_out);
        CHECK(grad_in.values == std::vector<double>{0.0, 0.0, 1.0, 0.0});
    }
    SUBCASE("tie between two positions routes to the earlier one") {
        input.values = {1.0, 7.0, 7.0, 3.0};
        const Tensor3 grad_in = detail::pool_backward(mx, input, grad_out);
        CHECK(grad_in.values == std::vector<double>{0.0, 1.0, 0.0, 0.0});
    }
}

TEST_CASE("train: zero learning rate leaves the network untouched") {
    std::vector<Tensor3> xs;
    std::vector<int> ys;
    separable_toy_set(32, 13, xs, ys);

    std::mt19937_64 rng(14);
    Network net;
    net.input_height = 1;
    net.input_width = 1;
    net.input_channels = 4;
    net.layers.push_back(make_dense(4, 4, rng));
    const std::vector<double> before = std::get<DenseLayer>(net.layers[0]).weights;

    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.seed = 5;
    cfg.eval_every = 2;
    const auto metrics = train(net, xs, ys, xs, ys, cfg);
    CHECK(std::get<DenseLayer>(net.layers[0]).weights == before);
    for (std::size_t i = 1; i < metrics.size(); ++i)
        CHECK(metrics[i].test_accuracy == metrics[0].test_accuracy);
}

TEST_CASE("train: linearly separable toy set exceeds 95% within 200 iterations") {
    std::vector<Tensor3> xs;
    std::vector<int> ys;
    separable_toy_set(64, 15, xs, ys);

    std::mt19937_64 rng(16);
    Network net;
    net.input_height = 1;
    net.input_width = 1;
    net.input_channels = 4;
    net.layers.push_back(make_dense(4, 4, rng));

    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.epochs = 100; // 2 batches per epoch = 200 iterations
    cfg.batch_size = 32;
    cfg.seed = 6;
    cfg.eval_every = 50;
    const auto metrics = train(net, xs, ys, xs, ys, cfg);
    REQUIRE(!metrics.empty());
    CHECK(metrics.back().iteration == 200);
    CHECK(evaluate_accuracy(net, xs, ys) > 0.95);
}

TEST_CASE("train: fixed seed reproduces the metric stream exactly") {
    std::vector<Tensor3> xs;
    std::vector<int> ys;
    separable_toy_set(48, 19, xs, ys);

    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.epochs = 5;
    cfg.batch_size = 16;
    cfg.seed = 77;
    cfg.eval_every = 3;

    Network a = build_reference_qnn(55, 1, 4);
    a.input_height = 1;
    a.input_width = 1;
    a.input_channels = 4;
    a.layers.clear();
    std::mt19937_64 rng_a(55);
    a.layers.push_back(make_dense(4, 4, rng_a));
    Network b = a;

    const auto ma = train(a, xs, ys, xs, ys, cfg);
    const auto mb = train(b, xs, ys, xs, ys, cfg);
    REQUIRE(ma.size() == mb.size());
    for (std::size_t i = 0; i < ma.size(); ++i) {
        CHECK(ma[i].iteration == mb[i].iteration);
        CHECK(ma[i].train_loss == mb[i].train_loss);
        CHECK(ma[i].test_accuracy == mb[i].test_accuracy);
    }

    CHECK_THROWS_AS(train(a, {}, {}, xs, ys, cfg), std::invalid_argument);
}

TEST_CASE("checkpoint round trip preserves the network exactly") {
    const Network net = build_reference_cnn(23);
    const std::string path =
        (std::filesystem::temp_directory_path() / "qvn_test_model.ckpt").string();
    save_network(net, path);
    const Network loaded = load_network(path);

    std::mt19937_64 rng(24);
    const Tensor3 probe = random_tensor(28, 28, 4, rng);
    CHECK(network_forward(net, probe) == network_forward(loaded, probe));
    CHECK(std::get<ConvLayer>(loaded.layers[0]).weights ==
          std::get<ConvLayer>(net.layers[0]).weights);
    CHECK(std::get<DenseLayer>(loaded.layers[4]).biases ==
          std::get<DenseLayer>(net.layers[4]).biases);
    std::filesystem::remove(path);

    CHECK_THROWS_AS(load_network("/nonexistent/model.ckpt"), std::runtime_error);

    // Wrong magic and truncated files are rejected.
    const std::string junk =
        (std::filesystem::temp_directory_path() / "qvn_junk_model.ckpt").string();
    {
        std::ofstream out(junk, std::ios::binary);
        out << "NOTAMODEL";
    }
    CHECK_THROWS_WITH_AS(load_network(junk), doctest::Contains("bad magic"), std::runtime_error);
    {
        std::ofstream out(junk, std::ios::binary | std::ios::trunc);
        out << "QVNMODEL"; // header cut off after the magic
    }
    CHECK_THROWS_WITH_AS(load_network(junk), doctest::Contains("truncated"), std::runtime_error);
    std::filesystem::remove(junk);
}
