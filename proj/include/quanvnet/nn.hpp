// From-scratch convolutional network: valid (no padding) cross-correlation,
// average/max pooling, one dense output layer, softmax cross-entropy over 4
// classes, and deterministic mini-batch SGD.
//
// Reference architectures:
//   CNN  28x28x4 -> CONV1(5@5x5,s1) -> POOL1(avg 5x5,s2) -> CONV2(12@3x3,s1)
//        -> POOL2(max 2x2,s2) -> FC(4)
//   QNN  feature map SxSxF -> CONV2(12@3x3,s1) -> POOL2(max 2x2,s2) -> FC(4)
// The quantum layer is frozen; gradients stop at the feature map.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "quanvnet/rng.hpp"

namespace quanvnet {

struct Tensor3 {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> values; // row-major (height, width, channel)

    static Tensor3 zeros(int h, int w, int c) {
        Tensor3 t;
        t.height = h;
        t.width = w;
        t.channels = c;
        t.values.assign(std::size_t(h) * std::size_t(w) * std::size_t(c), 0.0);
        return t;
    }
    double at(int r, int c, int ch) const {
        return values[std::size_t((r * width + c) * channels + ch)];
    }
    double& at(int r, int c, int ch) {
        return values[std::size_t((r * width + c) * channels + ch)];
    }
};

struct ConvLayer {
    int num_filters = 0;
    int kernel = 0;
    int stride = 1;
    int in_channels = 0;
    std::vector<double> weights; // (filter, ki, kj, in_channel)
    std::vector<double> biases;  // per filter

    double w(int f, int i, int j, int c) const {
        return weights[std::size_t(((f * kernel + i) * kernel + j) * in_channels + c)];
    }
    double& w(int f, int i, int j, int c) {
        return weights[std::size_t(((f * kernel + i) * kernel + j) * in_channels + c)];
    }
};

struct PoolLayer {
    enum class Kind { Average, Max };
    Kind kind = Kind::Average;
    int window = 2;
    int stride = 2;
};

struct DenseLayer {
    int out_size = 0;
    int in_size = 0;
    std::vector<double> weights; // (out, in)
    std::vector<double> biases;  // per output
};

using Layer = std::variant<ConvLayer, PoolLayer, DenseLayer>;

struct Network {
    int input_height = 0;
    int input_width = 0;
    int input_channels = 0;
    int num_classes = 4;
    std::vector<Layer> layers;
};

inline int conv_output_side(int in_side, int kernel, int stride) {
    return (in_side - kernel) / stride + 1;
}

inline Tensor3 conv_forward(const ConvLayer& layer, const Tensor3& input) {
    if (layer.in_channels != input.channels)
        throw std::invalid_argument("conv_forward: layer expects " + std::to_string(layer.in_channels) +
                                    " channels, input has " + std::to_string(input.channels));
    if (layer.kernel > input.height || layer.kernel > input.width)
        throw std::invalid_argument("conv_forward: kernel larger than input");
    if (layer.stride < 1) throw std::invalid_argument("conv_forward: stride must be >= 1");
    const int oh = conv_output_side(input.height, layer.kernel, layer.stride);
    const int ow = conv_output_side(input.width, layer.kernel, layer.stride);
    Tensor3 out = Tensor3::zeros(oh, ow, layer.num_filters);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            for (int f = 0; f < layer.num_filters; ++f) {
                double acc = layer.biases[std::size_t(f)];
                for (int i = 0; i < layer.kernel; ++i)
                    for (int j = 0; j < layer.kernel; ++j)
                        for (int c = 0; c < input.channels; ++c)
                            acc += layer.w(f, i, j, c) *
                                   input.at(y * layer.stride + i, x * layer.stride + j, c);
                out.at(y, x, f) = acc;
            }
    return out;
}

inline Tensor3 pool_forward(const PoolLayer& layer, const Tensor3& input) {
    if (layer.window > input.height || layer.window > input.width)
        throw std::invalid_argument("pool_forward: window larger than input");
    if (layer.window < 1 || layer.stride < 1)
        throw std::invalid_argument("pool_forward: window and stride must be >= 1");
    const int oh = conv_output_side(input.height, layer.window, layer.stride);
    const int ow = conv_output_side(input.width, layer.window, layer.stride);
    Tensor3 out = Tensor3::zeros(oh, ow, input.channels);
    const double inv_area = 1.0 / double(layer.window * layer.window);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            for (int c = 0; c < input.channels; ++c) {
                if (layer.kind == PoolLayer::Kind::Average) {
                    double acc = 0.0;
                    for (int i = 0; i < layer.window; ++i)
                        for (int j = 0; j < layer.window; ++j)
                            acc += input.at(y * layer.stride + i, x * layer.stride + j, c);
                    out.at(y, x, c) = acc * inv_area;
                } else {
                    double best = input.at(y * layer.stride, x * layer.stride, c);
                    for (int i = 0; i < layer.window; ++i)
                        for (int j = 0; j < layer.window; ++j)
                            best = std::max(best, input.at(y * layer.stride + i, x * layer.stride + j, c));
                    out.at(y, x, c) = best;
                }
            }
    return out;
}

inline Tensor3 dense_forward(const DenseLayer& layer, const Tensor3& input) {
    if (std::size_t(layer.in_size) != input.values.size())
        throw std::invalid_argument("dense_forward: layer expects " + std::to_string(layer.in_size) +
                                    " inputs, got " + std::to_string(input.values.size()));
    Tensor3 out = Tensor3::zeros(1, 1, layer.out_size);
    for (int o = 0; o < layer.out_size; ++o) {
        double acc = layer.biases[std::size_t(o)];
        const std::size_t row = std::size_t(o) * std::size_t(layer.in_size);
        for (int i = 0; i < layer.in_size; ++i)
            acc += layer.weights[row + std::size_t(i)] * input.values[std::size_t(i)];
        out.at(0, 0, o) = acc;
    }
    return out;
}

inline Tensor3 layer_forward(const Layer& layer, const Tensor3& input) {
    return std::visit(
        [&](const auto& lay) -> Tensor3 {
            using T = std::decay_t<decltype(lay)>;
            if constexpr (std::is_same_v<T, ConvLayer>)
                return conv_forward(lay, input);
            else if constexpr (std::is_same_v<T, PoolLayer>)
                return pool_forward(lay, input);
            else
                return dense_forward(lay, input);
        },
        layer);
}

inline std::vector<double> network_forward(const Network& net, const Tensor3& input) {
    if (input.height != net.input_height || input.width != net.input_width ||
        input.channels != net.input_channels)
        throw std::invalid_argument("network_forward: input shape mismatch");
    Tensor3 t = input;
    for (const Layer& layer : net.layers) t = layer_forward(layer, t);
    if (int(t.values.size()) != net.num_classes)
        throw std::invalid_argument("network_forward: final layer produced " +
                                    std::to_string(t.values.size()) + " values, expected " +
                                    std::to_string(net.num_classes));
    return t.values;
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

struct LayerGradients {
    std::vector<double> weights;
    std::vector<double> biases;
};

namespace detail {

inline Tensor3 conv_backward(const ConvLayer& layer, const Tensor3& input, const Tensor3& grad_out,
                             LayerGradients& grads) {
    Tensor3 grad_in = Tensor3::zeros(input.height, input.width, input.channels);
    for (int y = 0; y < grad_out.height; ++y)
        for (int x = 0; x < grad_out.width; ++x)
            for (int f = 0; f < layer.num_filters; ++f) {
                const double g = grad_out.at(y, x, f);
                if (g == 0.0) continue;
                grads.biases[std::size_t(f)] += g;
                for (int i = 0; i < layer.kernel; ++i)
                    for (int j = 0; j < layer.kernel; ++j)
                        for (int c = 0; c < input.channels; ++c) {
                            const int iy = y * layer.stride + i;
                            const int ix = x * layer.stride + j;
                            grads.weights[std::size_t(((f * layer.kernel + i) * layer.kernel + j) *
                                                      layer.in_channels + c)] += g * input.at(iy, ix, c);
                            grad_in.at(iy, ix, c) += g * layer.w(f, i, j, c);
                        }
            }
    return grad_in;
}

inline Tensor3 pool_backward(const PoolLayer& layer, const Tensor3& input, const Tensor3& grad_out) {
    Tensor3 grad_in = Tensor3::zeros(input.height, input.width, input.channels);
    const double inv_area = 1.0 / double(layer.window * layer.window);
    for (int y = 0; y < grad_out.height; ++y)
        for (int x = 0; x < grad_out.width; ++x)
            for (int c = 0; c < input.channels; ++c) {
                const double g = grad_out.at(y, x, c);
                if (layer.kind == PoolLayer::Kind::Average) {
                    for (int i = 0; i < layer.window; ++i)
                        for (int j = 0; j < layer.window; ++j)
                            grad_in.at(y * layer.stride + i, x * layer.stride + j, c) += g * inv_area;
                } else {
                    // Subgradient routes to the first (row-major) maximum.
                    int bi = 0, bj = 0;
                    double best = input.at(y * layer.stride, x * layer.stride, c);
                    for (int i = 0; i < layer.window; ++i)
                        for (int j = 0; j < layer.window; ++j) {
                            const double v = input.at(y * layer.stride + i, x * layer.stride + j, c);
                            if (v > best) {
                                best = v;
                                bi = i;
                                bj = j;
                            }
                        }
                    grad_in.at(y * layer.stride + bi, x * layer.stride + bj, c) += g;
                }
            }
    return grad_in;
}

inline Tensor3 dense_backward(const DenseLayer& layer, const Tensor3& input, const Tensor3& grad_out,
                              LayerGradients& grads) {
    Tensor3 grad_in = Tensor3::zeros(input.height, input.width, input.channels);
    for (int o = 0; o < layer.out_size; ++o) {
        const double g = grad_out.values[std::size_t(o)];
        if (g == 0.0) continue;
        grads.biases[std::size_t(o)] += g;
        const std::size_t row = std::size_t(o) * std::size_t(layer.in_size);
        for (int i = 0; i < layer.in_size; ++i) {
            grads.weights[row + std::size_t(i)] += g * input.values[std::size_t(i)];
            grad_in.values[std::size_t(i)] += g * layer.weights[row + std::size_t(i)];
        }
    }
    return grad_in;
}

} // namespace detail

inline std::vector<LayerGradients> make_zero_gradients(const Network& net) {
    std::vector<LayerGradients> grads(net.layers.size());
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        if (const auto* conv = std::get_if<ConvLayer>(&net.layers[k])) {
            grads[k].weights.assign(conv->weights.size(), 0.0);
            grads[k].biases.assign(conv->biases.size(), 0.0);
        } else if (const auto* dense = std::get_if<DenseLayer>(&net.layers[k])) {
            grads[k].weights.assign(dense->weights.size(), 0.0);
            grads[k].biases.assign(dense->biases.size(), 0.0);
        }
    }
    return grads;
}

// Mean softmax cross-entropy over the batch plus exact gradients for every
// trainable parameter.
inline std::pair<double, std::vector<LayerGradients>> loss_and_gradients(
    const Network& net, const std::vector<Tensor3>& inputs, const std::vector<int>& labels) {
    if (inputs.empty() || inputs.size() != labels.size())
        throw std::invalid_argument("loss_and_gradients: batch inputs and labels must pair up");
    for (int label : labels)
        if (label < 0 || label >= net.num_classes)
            throw std::invalid_argument("loss_and_gradients: label " + std::to_string(label) +
                                        " outside [0, " + std::to_string(net.num_classes) + ")");

    std::vector<LayerGradients> grads = make_zero_gradients(net);
    double total_loss = 0.0;
    const double inv_batch = 1.0 / double(inputs.size());

    for (std::size_t n = 0; n < inputs.size(); ++n) {
        std::vector<Tensor3> acts;
        acts.reserve(net.layers.size() + 1);
        acts.push_back(inputs[n]);
        for (const Layer& layer : net.layers)
            acts.push_back(layer_forward(layer, acts.back()));

        const std::vector<double>& logits = acts.back().values;
        const std::vector<double> probs = softmax(logits);
        total_loss -= std::log(std::max(probs[std::size_t(labels[n])], 1e-300));

        Tensor3 grad = acts.back();
        for (std::size_t k = 0; k < probs.size(); ++k)
            grad.values[k] = (probs[k] - (int(k) == labels[n] ? 1.0 : 0.0)) * inv_batch;

        for (std::size_t k = net.layers.size(); k-- > 0;) {
            const Tensor3& in = acts[k];
            if (const auto* conv = std::get_if<ConvLayer>(&net.layers[k]))
                grad = detail::conv_backward(*conv, in, grad, grads[k]);
            else if (const auto* pool = std::get_if<PoolLayer>(&net.layers[k]))
                grad = detail::pool_backward(*pool, in, grad);
            else
                grad = detail::dense_backward(std::get<DenseLayer>(net.layers[k]),
                                              in, grad, grads[k]);
        }
    }
    return {total_loss * inv_batch, std::move(grads)};
}

inline void sgd_step(Network& net, const std::vector<LayerGradients>& grads, double learning_rate) {
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        if (auto* conv = std::get_if<ConvLayer>(&net.layers[k])) {
            for (std::size_t i = 0; i < conv->weights.size(); ++i)
                conv->weights[i] -= learning_rate * grads[k].weights[i];
            for (std::size_t i = 0; i < conv->biases.size(); ++i)
                conv->biases[i] -= learning_rate * grads[k].biases[i];
        } else if (auto* dense = std::get_if<DenseLayer>(&net.layers[k])) {
            for (std::size_t i = 0; i < dense->weights.size(); ++i)
                dense->weights[i] -= learning_rate * grads[k].weights[i];
            for (std::size_t i = 0; i < dense->biases.size(); ++i)
                dense->biases[i] -= learning_rate * grads[k].biases[i];
        }
    }
}

inline double evaluate_accuracy(const Network& net, const std::vector<Tensor3>& inputs,
                                const std::vector<int>& labels) {
    if (inputs.empty()) throw std::invalid_argument("evaluate_accuracy: empty set");
    std::size_t correct = 0;
    for (std::size_t n = 0; n < inputs.size(); ++n) {
        const std::vector<double> logits = network_forward(net, inputs[n]);
        const int pred = int(std::max_element(logits.begin(), logits.end()) - logits.begin());
        if (pred == labels[n]) ++correct;
    }
    return double(correct) / double(inputs.size());
}

struct TrainConfig {
    double learning_rate = 0.05;
    int epochs = 10;
    int batch_size = 32;
    std::uint64_t seed = 0;
    int eval_every = 50; // batch steps between metric rows
};

struct MetricRow {
    int iteration = 0; // batch steps completed
    double train_loss = 0.0;
    double test_accuracy = 0.0;
};

// Mini-batch SGD; the metric stream is a pure function of (net, data,
// config). train_loss is the mean batch loss since the previous row.
inline std::vector<MetricRow> train(Network& net, const std::vector<Tensor3>& train_inputs,
                                    const std::vector<int>& train_labels,
                                    const std::vector<Tensor3>& test_inputs,
                                    const std::vector<int>& test_labels, const TrainConfig& config) {
    if (train_inputs.empty() || test_inputs.empty())
        throw std::invalid_argument("train: train and test sets must be nonempty");
    if (train_inputs.size() != train_labels.size() || test_inputs.size() != test_labels.size())
        throw std::invalid_argument("train: inputs and labels must pair up");
    if (config.batch_size < 1 || config.epochs < 1 || config.eval_every < 1)
        throw std::invalid_argument("train: batch size, epochs and eval interval must be >= 1");

    std::vector<MetricRow> metrics;
    std::vector<std::size_t> order(train_inputs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    int iteration = 0;
    double window_loss = 0.0;
    int window_batches = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::mt19937_64 rng(mix_seed(config.seed, std::uint64_t(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[uniform_index(rng, i)]);

        for (std::size_t start = 0; start < order.size(); start += std::size_t(config.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + std::size_t(config.batch_size));
            std::vector<Tensor3> batch_x;
            std::vector<int> batch_y;
            batch_x.reserve(stop - start);
            batch_y.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                batch_x.push_back(train_inputs[order[i]]);
                batch_y.push_back(train_labels[order[i]]);
            }
            const auto [loss, grads] = loss_and_gradients(net, batch_x, batch_y);
            sgd_step(net, grads, config.learning_rate);
            ++iteration;
            window_loss += loss;
            ++window_batches;
            const bool last = (epoch == config.epochs - 1) && (stop == order.size());
            if (iteration % config.eval_every == 0 || last) {
                MetricRow row;
                row.iteration = iteration;
                row.train_loss = window_loss / double(window_batches);
                row.test_accuracy = evaluate_accuracy(net, test_inputs, test_labels);
                metrics.push_back(row);
                window_loss = 0.0;
                window_batches = 0;
            }
        }
    }
    return metrics;
}

namespace detail {

inline double init_range(int fan_in) { return 1.0 / std::sqrt(double(fan_in)); }

inline void init_uniform(std::vector<double>& v, double range, std::mt19937_64& rng) {
    for (double& x : v) x = uniform_in(rng, -range, range);
}

} // namespace detail

inline ConvLayer make_conv(int num_filters, int kernel, int stride, int in_channels,
                           std::mt19937_64& rng) {
    ConvLayer layer;
    layer.num_filters = num_filters;
    layer.kernel = kernel;
    layer.stride = stride;
    layer.in_channels = in_channels;
    layer.weights.assign(std::size_t(num_filters) * std::size_t(kernel) * std::size_t(kernel) *
                             std::size_t(in_channels), 0.0);
    layer.biases.assign(std::size_t(num_filters), 0.0);
    detail::init_uniform(layer.weights, detail::init_range(kernel * kernel * in_channels), rng);
    return layer;
}

inline DenseLayer make_dense(int out_size, int in_size, std::mt19937_64& rng) {
    DenseLayer layer;
    layer.out_size = out_size;
    layer.in_size = in_size;
    layer.weights.assign(std::size_t(out_size) * std::size_t(in_size), 0.0);
    layer.biases.assign(std::size_t(out_size), 0.0);
    detail::init_uniform(layer.weights, detail::init_range(in_size), rng);
    return layer;
}

inline Network build_reference_cnn(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Network net;
    net.input_height = 28;
    net.input_width = 28;
    net.input_channels = 4;
    net.layers.push_back(make_conv(5, 5, 1, 4, rng));
    net.layers.push_back(PoolLayer{PoolLayer::Kind::Average, 5, 2});
    net.layers.push_back(make_conv(12, 3, 1, 5, rng));
    net.layers.push_back(PoolLayer{PoolLayer::Kind::Max, 2, 2});
    net.layers.push_back(make_dense(4, 4 * 4 * 12, rng));
    return net;
}

inline Network build_reference_qnn(std::uint64_t seed, int feature_side, int feature_channels) {
    std::mt19937_64 rng(seed);
    Network net;
    net.input_height = feature_side;
    net.input_width = feature_side;
    net.input_channels = feature_channels;
    net.layers.push_back(make_conv(12, 3, 1, feature_channels, rng));
    const int conv_side = conv_output_side(feature_side, 3, 1);
    const int pool_side = conv_output_side(conv_side, 2, 2);
    net.layers.push_back(PoolLayer{PoolLayer::Kind::Max, 2, 2});
    net.layers.push_back(make_dense(4, pool_side * pool_side * 12, rng));
    return net;
}

// ---- checkpoints ------------------------------------------------------
//
// Flat little-endian binary: magic "QVNMODEL", u32 version, input dims and
// class count, layer descriptors, then every trainable parameter as f64 in
// layer order (conv/dense: weights then biases).

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
    out.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("checkpoint: truncated header");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

inline void put_f64(std::ostream& out, double v) {
    char b[8];
    std::memcpy(b, &v, 8);
    out.write(b, 8);
}

inline double get_f64(std::istream& in) {
    char b[8];
    in.read(b, 8);
    if (!in) throw std::runtime_error("checkpoint: truncated parameter data");
    double v;
    std::memcpy(&v, b, 8);
    return v;
}

} // namespace detail

inline void save_network(const Network& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write("QVNMODEL", 8);
    detail::put_u32(out, 1); // format version
    detail::put_u32(out, std::uint32_t(net.input_height));
    detail::put_u32(out, std::uint32_t(net.input_width));
    detail::put_u32(out, std::uint32_t(net.input_channels));
    detail::put_u32(out, std::uint32_t(net.num_classes));
    detail::put_u32(out, std::uint32_t(net.layers.size()));
    for (const Layer& layer : net.layers) {
        if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
            detail::put_u32(out, 0);
            detail::put_u32(out, std::uint32_t(conv->num_filters));
            detail::put_u32(out, std::uint32_t(conv->kernel));
            detail::put_u32(out, std::uint32_t(conv->stride));
            detail::put_u32(out, std::uint32_t(conv->in_channels));
        } else if (const auto* pool = std::get_if<PoolLayer>(&layer)) {
            detail::put_u32(out, 1);
            detail::put_u32(out, pool->kind == PoolLayer::Kind::Average ? 0 : 1);
            detail::put_u32(out, std::uint32_t(pool->window));
            detail::put_u32(out, std::uint32_t(pool->stride));
        } else {
            const auto& dense = std::get<DenseLayer>(layer);
            detail::put_u32(out, 2);
            detail::put_u32(out, std::uint32_t(dense.out_size));
            detail::put_u32(out, std::uint32_t(dense.in_size));
        }
    }
    for (const Layer& layer : net.layers) {
        if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
            for (double v : conv->weights) detail::put_f64(out, v);
            for (double v : conv->biases) detail::put_f64(out, v);
        } else if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
            for (double v : dense->weights) detail::put_f64(out, v);
            for (double v : dense->biases) detail::put_f64(out, v);
        }
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline Network load_network(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "QVNMODEL")
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const std::uint32_t version = detail::get_u32(in);
    if (version != 1)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    Network net;
    net.input_height = int(detail::get_u32(in));
    net.input_width = int(detail::get_u32(in));
    net.input_channels = int(detail::get_u32(in));
    net.num_classes = int(detail::get_u32(in));
    const std::uint32_t num_layers = detail::get_u32(in);
    for (std::uint32_t k = 0; k < num_layers; ++k) {
        const std::uint32_t kind = detail::get_u32(in);
        if (kind == 0) {
            ConvLayer conv;
            conv.num_filters = int(detail::get_u32(in));
            conv.kernel = int(detail::get_u32(in));
            conv.stride = int(detail::get_u32(in));
            conv.in_channels = int(detail::get_u32(in));
            conv.weights.assign(std::size_t(conv.num_filters) * std::size_t(conv.kernel) *
                                    std::size_t(conv.kernel) * std::size_t(conv.in_channels), 0.0);
            conv.biases.assign(std::size_t(conv.num_filters), 0.0);
            net.layers.emplace_back(std::move(conv));
        } else if (kind == 1) {
            PoolLayer pool;
            pool.kind = detail::get_u32(in) == 0 ? PoolLayer::Kind::Average : PoolLayer::Kind::Max;
            pool.window = int(detail::get_u32(in));
            pool.stride = int(detail::get_u32(in));
            net.layers.emplace_back(pool);
        } else if (kind == 2) {
            DenseLayer dense;
            dense.out_size = int(detail::get_u32(in));
            dense.in_size = int(detail::get_u32(in));
            dense.weights.assign(std::size_t(dense.out_size) * std::size_t(dense.in_size), 0.0);
            dense.biases.assign(std::size_t(dense.out_size), 0.0);
            net.layers.emplace_back(std::move(dense));
        } else {
            throw std::runtime_error("checkpoint: unknown layer kind " + std::to_string(kind));
        }
    }
    for (Layer& layer : net.layers) {
        if (auto* conv = std::get_if<ConvLayer>(&layer)) {
            for (double& v : conv->weights) v = detail::get_f64(in);
            for (double& v : conv->biases) v = detail::get_f64(in);
        } else if (auto* dense = std::get_if<DenseLayer>(&layer)) {
            for (double& v : dense->weights) v = detail::get_f64(in);
            for (double& v : dense->biases) v = detail::get_f64(in);
        }
    }
    return net;
}

} // namespace quanvnet
