// The quanvolutional layer: tile an image into window-sized blocks, encode
// pixel groups as rotation angles, run each block through a bank of fixed
// QAOA filter circuits, and decode one scalar per (block, filter).
//
// Decoder: mean over the filter graph's edges of the probability that the
// edge's two qubits measure equal, taken from exact probabilities or from
// shot frequencies. This is the two-qubit same-state statistic extended to
// every edge; for the p=1 ansatz the per-qubit P(|1>) marginal is
// identically 1/2, so edge parity is the cheapest shot statistic that
// actually responds to the encoded angles. Outputs always lie in [0,1].
#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "quanvnet/balltree.hpp"
#include "quanvnet/csv.hpp"
#include "quanvnet/qaoa.hpp"
#include "quanvnet/rng.hpp"
#include "quanvnet/statevector.hpp"

namespace quanvnet {

inline constexpr double kPi = 3.14159265358979323846;

// Row-major (height, width, channel) image of 8-bit intensities.
struct ImageTensor {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<std::uint8_t> values;

    std::uint8_t at(int row, int col, int channel) const {
        return values[std::size_t((row * width + col) * channels + channel)];
    }
    std::uint8_t& at(int row, int col, int channel) {
        return values[std::size_t((row * width + col) * channels + channel)];
    }
};

inline ImageTensor make_image(int height, int width, int channels) {
    ImageTensor img;
    img.height = height;
    img.width = width;
    img.channels = channels;
    img.values.assign(std::size_t(height) * std::size_t(width) * std::size_t(channels), 0);
    return img;
}

// Flattened window-squared-by-channels sub-tensor with entries normalized
// to [0,1].
struct TensorBlock {
    std::vector<double> values;
};

inline int blocks_per_side(int image_side, int window, int stride) {
    return (image_side - window) / stride + 1;
}

// Complete blocks only, row-major over (block_row, block_col); pixels are
// divided by 255.
inline std::vector<TensorBlock> tile_image(const ImageTensor& image, int window, int stride) {
    if (window < 1 || window > image.height || window > image.width)
        throw std::invalid_argument("tile_image: window " + std::to_string(window) +
                                    " does not fit a " + std::to_string(image.height) + "x" +
                                    std::to_string(image.width) + " image");
    if (stride < 1)
        throw std::invalid_argument("tile_image: stride must be >= 1");
    const int rows = blocks_per_side(image.height, window, stride);
    const int cols = blocks_per_side(image.width, window, stride);
    std::vector<TensorBlock> blocks;
    blocks.reserve(std::size_t(rows) * std::size_t(cols));
    for (int br = 0; br < rows; ++br) {
        for (int bc = 0; bc < cols; ++bc) {
            TensorBlock block;
            block.values.reserve(std::size_t(window) * std::size_t(window) * std::size_t(image.channels));
            for (int r = 0; r < window; ++r)
                for (int c = 0; c < window; ++c)
                    for (int ch = 0; ch < image.channels; ++ch)
                        block.values.push_back(image.at(br * stride + r, bc * stride + c, ch) / 255.0);
            blocks.push_back(std::move(block));
        }
    }
    return blocks;
}

// Averages consecutive groups of group_size entries (flattening order) and
// scales by pi, giving angles in [0, pi] for block values in [0, 1].
inline std::vector<double> encode_block(const TensorBlock& block, std::size_t group_size) {
    if (group_size < 1)
        throw std::invalid_argument("encode_block: group size must be >= 1");
    if (block.values.empty() || block.values.size() % group_size != 0)
        throw std::invalid_argument("encode_block: block length " + std::to_string(block.values.size()) +
                                    " is not divisible by group size " + std::to_string(group_size));
    std::vector<double> angles;
    angles.reserve(block.values.size() / group_size);
    for (std::size_t g = 0; g < block.values.size(); g += group_size) {
        double sum = 0.0;
        for (std::size_t k = 0; k < group_size; ++k) sum += block.values[g + k];
        angles.push_back(kPi * sum / double(group_size));
    }
    return angles;
}

enum class FilterMode { Exact, Shots };

// A fixed quanvolutional filter: one randomly weighted copy of the device
// graph. Filters in a bank share topology, p and shot budget; they differ
// only by the weight seed.
struct QuanvFilter {
    int id = 0;
    WeightedGraph graph;
    int layers = 1;          // p
    std::uint64_t shots = 1000;
    std::uint64_t seed = 0;  // weight seed; also the base sampling seed
};

inline std::vector<QuanvFilter> make_filter_bank(const DeviceTopology& topology, int count,
                                                 int layers, std::uint64_t shots,
                                                 std::uint64_t base_seed) {
    if (count < 1)
        throw std::invalid_argument("make_filter_bank: need at least one filter");
    std::vector<QuanvFilter> bank;
    bank.reserve(std::size_t(count));
    for (int i = 0; i < count; ++i) {
        QuanvFilter f;
        f.id = i;
        f.seed = mix_seed(base_seed, std::uint64_t(i));
        f.graph = random_weighted_graph(topology, f.seed);
        f.layers = layers;
        f.shots = shots;
        bank.push_back(std::move(f));
    }
    return bank;
}

namespace detail {

inline bool edge_bits_equal(std::uint64_t basis, std::pair<int, int> edge) {
    return ((basis >> edge.first) & 1) == ((basis >> edge.second) & 1);
}

inline double decode_edge_parity(const Statevector& state,
                                 const std::vector<std::pair<int, int>>& edges) {
    double mean = 0.0;
    const std::vector<double> probs = exact_probabilities(state);
    for (const auto& edge : edges) {
        double p_equal = 0.0;
        for (std::size_t k = 0; k < probs.size(); ++k)
            if (edge_bits_equal(k, edge)) p_equal += probs[k];
        mean += p_equal;
    }
    return mean / double(edges.size());
}

inline double decode_edge_parity(const ShotHistogram& hist,
                                 const std::vector<std::pair<int, int>>& edges) {
    double mean = 0.0;
    for (const auto& edge : edges) {
        std::uint64_t equal = 0;
        for (const auto& [basis, count] : hist.counts)
            if (edge_bits_equal(basis, edge)) equal += count;
        mean += double(equal) / double(hist.total_shots);
    }
    return mean / double(edges.size());
}

} // namespace detail

// Runs one block's angles through the filter circuit and decodes a scalar
// in [0,1]. sample_seed feeds shot sampling only; callers evaluating many
// blocks derive it per block so parallel and serial runs agree bit-exactly.
inline double apply_filter(const QuanvFilter& filter, std::span<const double> angles,
                           FilterMode mode, std::optional<std::uint64_t> sample_seed = std::nullopt) {
    QaoaAnsatz ansatz{filter.graph, filter.layers};
    if (filter.graph.topology.edges.empty())
        throw std::invalid_argument("apply_filter: filter graph needs at least one edge");
    const std::size_t expected = parameter_count(ansatz);
    if (angles.size() != expected)
        throw std::invalid_argument("apply_filter: expected " + std::to_string(expected) +
                                    " angles, got " + std::to_string(angles.size()));
    const Circuit circuit = build_qaoa_circuit(ansatz, angles);
    const Statevector state = apply_circuit(zero_state(circuit.num_qubits), circuit);
    if (mode == FilterMode::Exact)
        return detail::decode_edge_parity(state, filter.graph.topology.edges);
    const std::uint64_t seed = sample_seed.value_or(filter.seed);
    return detail::decode_edge_parity(sample_shots(state, filter.shots, seed),
                                      filter.graph.topology.edges);
}

// blocks_per_side x blocks_per_side x num_filters feature grid.
struct FeatureMap {
    int side = 0;
    int num_filters = 0;
    std::vector<double> values; // row-major (block_row, block_col, filter)

    double at(int row, int col, int filter) const {
        return values[std::size_t((row * side + col) * num_filters + filter)];
    }
    double& at(int row, int col, int filter) {
        return values[std::size_t((row * side + col) * num_filters + filter)];
    }
};

namespace detail {

// Evaluates one block through every filter of the bank. block_key seeds
// shot sampling per (filter, block) pair.
inline std::vector<double> evaluate_block_bank(const std::vector<QuanvFilter>& filters,
                                               const TensorBlock& block, FilterMode mode,
                                               std::uint64_t block_key) {
    std::vector<double> record;
    record.reserve(filters.size());
    for (const QuanvFilter& f : filters) {
        const std::size_t params = parameter_count(f.graph.topology, f.layers);
        if (block.values.size() % params != 0)
            throw std::invalid_argument("quanv: block length " + std::to_string(block.values.size()) +
                                        " is not divisible by the filter's " +
                                        std::to_string(params) + " parameters");
        const std::vector<double> angles = encode_block(block, block.values.size() / params);
        record.push_back(apply_filter(f, angles, mode, mix_seed(f.seed, block_key)));
    }
    return record;
}

} // namespace detail

// Feature extraction for one image. With a budget, only the first
// min(budget, distinct blocks) blocks are evaluated and the rest are
// answered by the balltree cache.
inline FeatureMap quanv_forward(const ImageTensor& image, const std::vector<QuanvFilter>& filters,
                                FilterMode mode = FilterMode::Exact, int window = 5, int stride = 5,
                                std::optional<ComputeBudget> budget = std::nullopt,
                                unsigned threads = 1) {
    if (filters.empty())
        throw std::invalid_argument("quanv_forward: empty filter bank");
    const std::vector<TensorBlock> blocks = tile_image(image, window, stride);
    const int rows = blocks_per_side(image.height, window, stride);
    const int cols = blocks_per_side(image.width, window, stride);
    if (rows != cols)
        throw std::invalid_argument("quanv_forward: feature grids must be square; got " +
                                    std::to_string(rows) + "x" + std::to_string(cols) + " blocks");

    std::vector<std::vector<double>> records;
    if (budget) {
        std::vector<std::vector<double>> raw;
        raw.reserve(blocks.size());
        for (const auto& b : blocks) raw.push_back(b.values);
        const auto evaluate = [&](std::size_t block_index) {
            return detail::evaluate_block_bank(filters, blocks[block_index], mode,
                                               std::uint64_t(block_index));
        };
        records = process_with_budget(raw, evaluate, *budget, threads).records;
    } else {
        records.resize(blocks.size());
        for (std::size_t i = 0; i < blocks.size(); ++i)
            records[i] = detail::evaluate_block_bank(filters, blocks[i], mode, std::uint64_t(i));
    }

    FeatureMap map;
    map.side = rows;
    map.num_filters = int(filters.size());
    map.values.resize(std::size_t(rows) * std::size_t(cols) * filters.size());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            for (std::size_t f = 0; f < filters.size(); ++f)
                map.at(r, c, int(f)) = records[std::size_t(r * cols + c)][f];
    return map;
}

// Feature CSV: one row per (image_index, block_row, block_col, filter_id,
// value), fixed iteration order, so precomputation and training can run in
// separate processes and reruns are byte-identical.
inline void write_feature_csv(std::ostream& out, const std::vector<FeatureMap>& maps) {
    out << "image_index,block_row,block_col,filter_id,value\n";
    for (std::size_t img = 0; img < maps.size(); ++img) {
        const FeatureMap& m = maps[img];
        for (int r = 0; r < m.side; ++r)
            for (int c = 0; c < m.side; ++c)
                for (int f = 0; f < m.num_filters; ++f)
                    out << img << ',' << r << ',' << c << ',' << f << ','
                        << format_double(m.at(r, c, f)) << '\n';
    }
}

inline std::vector<FeatureMap> read_feature_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != "image_index,block_row,block_col,filter_id,value")
        throw std::runtime_error("feature csv: missing or bad header");
    struct Row {
        std::size_t image;
        int row, col, filter;
        double value;
    };
    std::vector<Row> rows;
    std::size_t line_no = 1;
    std::size_t num_images = 0;
    int max_row = -1, max_filter = -1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto fields = split_fields(t);
        if (fields.size() != 5)
            throw std::runtime_error("feature csv row " + std::to_string(line_no) +
                                     ": expected 5 fields, got " + std::to_string(fields.size()));
        try {
            Row r{std::stoul(fields[0]), std::stoi(fields[1]), std::stoi(fields[2]),
                  std::stoi(fields[3]), std::stod(fields[4])};
            rows.push_back(r);
            num_images = std::max(num_images, r.image + 1);
            max_row = std::max(max_row, std::max(r.row, r.col));
            max_filter = std::max(max_filter, r.filter);
        } catch (const std::exception&) {
            throw std::runtime_error("feature csv row " + std::to_string(line_no) + ": bad field");
        }
    }
    if (rows.empty()) throw std::runtime_error("feature csv: no data rows");
    const int side = max_row + 1;
    const int num_filters = max_filter + 1;
    std::vector<FeatureMap> maps(num_images);
    for (auto& m : maps) {
        m.side = side;
        m.num_filters = num_filters;
        m.values.assign(std::size_t(side) * std::size_t(side) * std::size_t(num_filters), 0.0);
    }
    for (const Row& r : rows)
        maps[r.image].at(r.row, r.col, r.filter) = r.value;
    return maps;
}

} // namespace quanvnet
