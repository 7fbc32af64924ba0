// Experiment harness behind the command-line tool: a key=value config file
// names one reproducible experiment, and every command is a deterministic
// function of its config. Exit codes: 0 success, 1 validation failure,
// 2 config/IO error.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "quanvnet/balltree.hpp"
#include "quanvnet/csv.hpp"
#include "quanvnet/data.hpp"
#include "quanvnet/nn.hpp"
#include "quanvnet/qaoa.hpp"
#include "quanvnet/quanv.hpp"
#include "quanvnet/statevector.hpp"

namespace quanvnet {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidationFailure = 1;
inline constexpr int kExitConfigError = 2;

struct ExperimentConfig {
    std::string model = "cnn"; // cnn | qnn
    int filters = 5;
    int p = 1;
    std::string mode = "exact"; // exact | shots
    std::uint64_t shots = 1000;
    std::size_t budget = 0;         // exact evaluations per filter bank; 0 = cover all blocks
    std::string topology = "default"; // bundled graph, or a topology file path
    int window = 5;
    int stride = 5;
    std::string dataset;         // dataset CSV path; empty -> synthetic
    std::size_t synthetic_count = 0; // images per class when synthesizing
    std::uint64_t synthetic_seed = 7;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::uint64_t split_seed = 3;
    int replicas = 1;
    std::uint64_t seed = 1;
    double lr = 0.05;
    int epochs = 10;
    int batch = 32;
    int eval_every = 50;
    std::string features;        // precomputed feature CSV (qnn)
    bool inline_features = false; // qnn: compute features in-process instead
    unsigned threads = 1;
};

namespace detail {

inline bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::runtime_error("config: bad boolean '" + v + "'");
}

} // namespace detail

inline void apply_config_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    try {
        if (key == "model") cfg.model = value;
        else if (key == "filters") cfg.filters = std::stoi(value);
        else if (key == "p") cfg.p = std::stoi(value);
        else if (key == "mode") cfg.mode = value;
        else if (key == "shots") cfg.shots = std::stoull(value);
        else if (key == "budget") cfg.budget = std::stoull(value);
        else if (key == "topology") cfg.topology = value;
        else if (key == "window") cfg.window = std::stoi(value);
        else if (key == "stride") cfg.stride = std::stoi(value);
        else if (key == "dataset") cfg.dataset = value;
        else if (key == "synthetic_count") cfg.synthetic_count = std::stoull(value);
        else if (key == "synthetic_seed") cfg.synthetic_seed = std::stoull(value);
        else if (key == "n_train") cfg.n_train = std::stoull(value);
        else if (key == "n_test") cfg.n_test = std::stoull(value);
        else if (key == "split_seed") cfg.split_seed = std::stoull(value);
        else if (key == "replicas") cfg.replicas = std::stoi(value);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "lr") cfg.lr = std::stod(value);
        else if (key == "epochs") cfg.epochs = std::stoi(value);
        else if (key == "batch") cfg.batch = std::stoi(value);
        else if (key == "eval_every") cfg.eval_every = std::stoi(value);
        else if (key == "features") cfg.features = value;
        else if (key == "inline_features") cfg.inline_features = detail::parse_bool(value);
        else if (key == "threads") cfg.threads = unsigned(std::stoul(value));
        else throw std::runtime_error("config: unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
        throw std::runtime_error("config: bad value '" + value + "' for key '" + key + "'");
    } catch (const std::out_of_range&) {
        throw std::runtime_error("config: value '" + value + "' out of range for key '" + key + "'");
    }
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": expected key=value, got '" + t + "'");
        apply_config_key(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    return parse_config_text(read_text_file(path));
}

inline void validate_config(const ExperimentConfig& cfg) {
    const auto fail = [](const std::string& msg) { throw std::runtime_error("config: " + msg); };
    if (cfg.model != "cnn" && cfg.model != "qnn") fail("model must be cnn or qnn");
    if (cfg.mode != "exact" && cfg.mode != "shots") fail("mode must be exact or shots");
    if (cfg.filters < 1) fail("filters must be >= 1");
    if (cfg.p < 1 || cfg.p > 4) fail("p must be in [1, 4]");
    if (cfg.replicas < 1) fail("replicas must be >= 1");
    if (cfg.lr <= 0.0) fail("lr must be > 0");
    if (cfg.epochs < 1) fail("epochs must be >= 1");
    if (cfg.batch < 1) fail("batch must be >= 1");
    if (cfg.eval_every < 1) fail("eval_every must be >= 1");
    if (cfg.shots < 1) fail("shots must be >= 1");
    if (cfg.dataset.empty() && cfg.synthetic_count == 0)
        fail("either dataset=<csv path> or synthetic_count=<n> is required");
    if (!cfg.dataset.empty() && !std::filesystem::exists(cfg.dataset))
        fail("dataset file does not exist: " + cfg.dataset);
    if (cfg.topology != "default" && !std::filesystem::exists(cfg.topology))
        fail("topology file does not exist: " + cfg.topology);
}

inline DeviceTopology resolve_topology(const ExperimentConfig& cfg) {
    if (cfg.topology == "default") return aspen25_topology();
    return load_topology_file(cfg.topology);
}

inline Dataset resolve_dataset(const ExperimentConfig& cfg) {
    if (!cfg.dataset.empty()) return load_dataset_csv(cfg.dataset);
    return generate_synthetic(cfg.synthetic_count, cfg.synthetic_seed);
}

// ---- appendix validation ----------------------------------------------

struct AppendixRow {
    double theta = 0.0;
    double beta = 0.0;
    double analytic = 0.0;
    double simulated = 0.0;
    double abs_delta = 0.0;
};

// Sweeps the two-qubit QAOA circuit over theta in [0, 2pi] (resolution
// points, endpoints included) for beta in {pi/8, pi/4, 3pi/8}, comparing
// the simulated same-state probability against (1 + sin(theta) sin(2 beta))/2.
inline std::vector<AppendixRow> appendix_sweep(int resolution) {
    if (resolution < 2) throw std::invalid_argument("appendix_sweep: resolution must be >= 2");
    DeviceTopology topo;
    topo.num_qubits = 2;
    topo.edges = {{0, 1}};
    WeightedGraph graph{topo, {1.0}};
    const QaoaAnsatz ansatz{graph, 1};

    std::vector<AppendixRow> rows;
    const double betas[3] = {kPi / 8.0, kPi / 4.0, 3.0 * kPi / 8.0};
    for (double beta : betas) {
        for (int i = 0; i < resolution; ++i) {
            const double theta = 2.0 * kPi * double(i) / double(resolution - 1);
            const double params[2] = {theta, beta};
            const Circuit circuit = build_qaoa_circuit(ansatz, params);
            AppendixRow row;
            row.theta = theta;
            row.beta = beta;
            row.analytic = 0.5 * (1.0 + std::sin(theta) * std::sin(2.0 * beta));
            row.simulated = same_state_probability(apply_circuit(zero_state(2), circuit));
            row.abs_delta = std::abs(row.simulated - row.analytic);
            rows.push_back(row);
        }
    }
    return rows;
}

inline int cmd_validate_appendix(int resolution, const std::string& out_path,
                                 double tolerance = 1e-9, std::ostream& log = std::cout) {
    const std::vector<AppendixRow> rows = appendix_sweep(resolution);
    std::ostringstream csv;
    csv << "theta,beta,analytic,simulated,abs_delta\n";
    std::size_t failures = 0;
    double worst = 0.0;
    for (const AppendixRow& r : rows) {
        csv << format_double(r.theta) << ',' << format_double(r.beta) << ','
            << format_double(r.analytic) << ',' << format_double(r.simulated) << ','
            << format_double(r.abs_delta) << '\n';
        worst = std::max(worst, r.abs_delta);
        if (!(r.abs_delta < tolerance)) ++failures;
    }
    write_text_file(out_path, csv.str());
    log << "validate-appendix: " << rows.size() << " rows, max |delta| = " << format_double(worst)
        << (failures == 0 ? " (all under " : " (FAILURES over ") << format_double(tolerance) << ")\n";
    return failures == 0 ? kExitOk : kExitValidationFailure;
}

// ---- feature precomputation --------------------------------------------

struct FeatureStats {
    std::size_t total_blocks = 0;
    std::size_t exact_count = 0;  // circuit evaluations spent
    std::size_t mapped_count = 0; // blocks answered by nearest-neighbor lookup
    std::size_t budget = 0;       // 0 = unlimited
};

struct PrecomputeResult {
    std::vector<FeatureMap> maps; // one per image, dataset order
    FeatureStats stats;
};

inline PrecomputeResult precompute_features(const Dataset& dataset,
                                            const std::vector<QuanvFilter>& filters,
                                            FilterMode mode, int window, int stride,
                                            std::size_t budget, unsigned threads = 1) {
    if (dataset.size() == 0) throw std::invalid_argument("precompute_features: empty dataset");
    std::vector<std::vector<TensorBlock>> per_image;
    per_image.reserve(dataset.size());
    std::vector<std::vector<double>> all_blocks;
    for (const ImageTensor& img : dataset.images) {
        per_image.push_back(tile_image(img, window, stride));
        for (const TensorBlock& b : per_image.back()) all_blocks.push_back(b.values);
    }
    const int side = blocks_per_side(dataset.images[0].height, window, stride);
    if (side != blocks_per_side(dataset.images[0].width, window, stride))
        throw std::invalid_argument("precompute_features: feature grids must be square");
    const std::size_t blocks_per_image = per_image[0].size();

    const auto evaluate = [&](std::size_t global_index) {
        TensorBlock block{all_blocks[global_index]};
        return detail::evaluate_block_bank(filters, block, mode, std::uint64_t(global_index));
    };
    ComputeBudget cb{budget == 0 ? all_blocks.size() : budget};
    const BudgetResult result = process_with_budget(all_blocks, evaluate, cb, threads);

    PrecomputeResult out;
    out.stats.total_blocks = all_blocks.size();
    out.stats.exact_count = result.exact_count;
    out.stats.mapped_count = result.mapped_count;
    out.stats.budget = budget;
    out.maps.resize(dataset.size());
    for (std::size_t img = 0; img < dataset.size(); ++img) {
        FeatureMap& m = out.maps[img];
        m.side = side;
        m.num_filters = int(filters.size());
        m.values.resize(std::size_t(side) * std::size_t(side) * filters.size());
        for (int r = 0; r < side; ++r)
            for (int c = 0; c < side; ++c) {
                const auto& record = result.records[img * blocks_per_image + std::size_t(r * side + c)];
                for (std::size_t f = 0; f < filters.size(); ++f)
                    m.at(r, c, int(f)) = record[f];
            }
    }
    return out;
}

inline int cmd_precompute_features(const ExperimentConfig& cfg, const std::string& out_dir,
                                   std::ostream& log = std::cout) {
    validate_config(cfg);
    const Dataset dataset = resolve_dataset(cfg);
    const DeviceTopology topo = resolve_topology(cfg);
    const std::size_t params = parameter_count(topo, cfg.p);
    const std::size_t block_len = std::size_t(cfg.window) * std::size_t(cfg.window) *
                                  std::size_t(dataset.images.empty() ? kImageChannels
                                                                     : dataset.images[0].channels);
    if (block_len % params != 0)
        throw std::runtime_error("config: block length " + std::to_string(block_len) +
                                 " is not divisible by the ansatz parameter count " +
                                 std::to_string(params) + "; adjust topology, p or window");
    const std::vector<QuanvFilter> filters =
        make_filter_bank(topo, cfg.filters, cfg.p, cfg.shots, cfg.seed);
    const FilterMode mode = cfg.mode == "exact" ? FilterMode::Exact : FilterMode::Shots;

    std::filesystem::create_directories(out_dir);
    const PrecomputeResult result =
        precompute_features(dataset, filters, mode, cfg.window, cfg.stride, cfg.budget, cfg.threads);

    {
        std::ofstream out(out_dir + "/features.csv", std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + out_dir + "/features.csv");
        write_feature_csv(out, result.maps);
    }
    {
        std::ostringstream stats;
        stats << "total_blocks,exact_count,mapped_count,budget\n"
              << result.stats.total_blocks << ',' << result.stats.exact_count << ','
              << result.stats.mapped_count << ',' << result.stats.budget << '\n';
        write_text_file(out_dir + "/feature_stats.csv", stats.str());
    }
    log << "precompute-features: " << result.stats.total_blocks << " blocks, "
        << result.stats.exact_count << " evaluated, " << result.stats.mapped_count
        << " mapped via cache\n";
    return kExitOk;
}

// Rebuilds the nearest-neighbor cache from persisted features: block keys
// come from re-tiling the dataset, payloads from the stored per-filter
// values. The tree itself is never serialized structurally.
inline BallTree rebuild_cache(const Dataset& dataset, const std::vector<FeatureMap>& maps,
                              int window, int stride) {
    if (maps.size() != dataset.size())
        throw std::invalid_argument("rebuild_cache: feature maps cover " +
                                    std::to_string(maps.size()) + " images, dataset has " +
                                    std::to_string(dataset.size()));
    std::vector<std::vector<double>> points;
    std::vector<std::vector<double>> payloads;
    for (std::size_t img = 0; img < dataset.size(); ++img) {
        const auto blocks = tile_image(dataset.images[img], window, stride);
        const FeatureMap& m = maps[img];
        if (int(blocks.size()) != m.side * m.side)
            throw std::invalid_argument("rebuild_cache: tiling does not match the feature grid");
        for (int r = 0; r < m.side; ++r)
            for (int c = 0; c < m.side; ++c) {
                points.push_back(blocks[std::size_t(r * m.side + c)].values);
                std::vector<double> payload(std::size_t(m.num_filters));
                for (int f = 0; f < m.num_filters; ++f)
                    payload[std::size_t(f)] = m.at(r, c, f);
                payloads.push_back(std::move(payload));
            }
    }
    return BallTree::build(std::move(points), std::move(payloads));
}

// ---- training ------------------------------------------------------------

struct ReplicaResult {
    std::vector<MetricRow> metrics;
    Network net;
};

struct TrainOutcome {
    std::vector<ReplicaResult> replicas;
    std::vector<MetricRow> averaged;
    double final_mean_accuracy = 0.0;
};

inline Tensor3 image_to_tensor(const ImageTensor& img) {
    Tensor3 t = Tensor3::zeros(img.height, img.width, img.channels);
    for (std::size_t i = 0; i < img.values.size(); ++i)
        t.values[i] = img.values[i] / 255.0;
    return t;
}

inline Tensor3 feature_map_to_tensor(const FeatureMap& map) {
    Tensor3 t = Tensor3::zeros(map.side, map.side, map.num_filters);
    t.values = map.values;
    return t;
}

inline std::vector<MetricRow> average_metric_streams(const std::vector<ReplicaResult>& replicas) {
    if (replicas.empty()) return {};
    const std::size_t rows = replicas[0].metrics.size();
    for (const ReplicaResult& r : replicas)
        if (r.metrics.size() != rows)
            throw std::runtime_error("train: replica metric streams differ in length");
    std::vector<MetricRow> avg(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        avg[i].iteration = replicas[0].metrics[i].iteration;
        double loss = 0.0, acc = 0.0;
        for (const ReplicaResult& r : replicas) {
            loss += r.metrics[i].train_loss;
            acc += r.metrics[i].test_accuracy;
        }
        avg[i].train_loss = loss / double(replicas.size());
        avg[i].test_accuracy = acc / double(replicas.size());
    }
    return avg;
}

// Runs the configured experiment in-process: resolves data and inputs,
// trains `replicas` independent models (fanning out across threads when
// asked), and averages the metric streams by replica index.
inline TrainOutcome run_training(const ExperimentConfig& cfg) {
    validate_config(cfg);
    const Dataset dataset = resolve_dataset(cfg);
    if (cfg.n_train == 0 || cfg.n_test == 0)
        throw std::runtime_error("config: n_train and n_test must be set for training");

    std::vector<Tensor3> inputs;
    inputs.reserve(dataset.size());
    int feature_side = 0, feature_channels = 0;
    if (cfg.model == "cnn") {
        for (const ImageTensor& img : dataset.images) inputs.push_back(image_to_tensor(img));
    } else {
        std::vector<FeatureMap> maps;
        if (!cfg.features.empty()) {
            if (!std::filesystem::exists(cfg.features))
                throw std::runtime_error(
                    "config: features file '" + cfg.features +
                    "' does not exist; run `quanvnet precompute-features --config <same config>` "
                    "first or set inline_features=true");
            std::ifstream in(cfg.features, std::ios::binary);
            maps = read_feature_csv(in);
        } else if (cfg.inline_features) {
            const DeviceTopology topo = resolve_topology(cfg);
            const std::vector<QuanvFilter> filters =
                make_filter_bank(topo, cfg.filters, cfg.p, cfg.shots, cfg.seed);
            const FilterMode mode = cfg.mode == "exact" ? FilterMode::Exact : FilterMode::Shots;
            maps = precompute_features(dataset, filters, mode, cfg.window, cfg.stride, cfg.budget,
                                       cfg.threads)
                       .maps;
        } else {
            throw std::runtime_error(
                "config: qnn training needs features; run `quanvnet precompute-features --config "
                "<same config>` and set features=<out>/features.csv, or set inline_features=true");
        }
        if (maps.size() != dataset.size())
            throw std::runtime_error("config: feature csv covers " + std::to_string(maps.size()) +
                                     " images but the dataset has " + std::to_string(dataset.size()));
        feature_side = maps[0].side;
        feature_channels = maps[0].num_filters;
        for (const FeatureMap& m : maps) inputs.push_back(feature_map_to_tensor(m));
    }

    const auto [train_idx, test_idx] =
        split_indices(dataset.size(), cfg.n_train, cfg.n_test, cfg.split_seed);
    std::vector<Tensor3> train_x, test_x;
    std::vector<int> train_y, test_y;
    for (std::size_t i : train_idx) {
        train_x.push_back(inputs[i]);
        train_y.push_back(dataset.labels[i]);
    }
    for (std::size_t i : test_idx) {
        test_x.push_back(inputs[i]);
        test_y.push_back(dataset.labels[i]);
    }

    TrainOutcome outcome;
    outcome.replicas.resize(std::size_t(cfg.replicas));
    const auto run_replica = [&](int r) {
        Network net = cfg.model == "cnn"
                          ? build_reference_cnn(mix_seed(cfg.seed, 0x100 + std::uint64_t(r)))
                          : build_reference_qnn(mix_seed(cfg.seed, 0x100 + std::uint64_t(r)),
                                                feature_side, feature_channels);
        TrainConfig tc;
        tc.learning_rate = cfg.lr;
        tc.epochs = cfg.epochs;
        tc.batch_size = cfg.batch;
        tc.seed = mix_seed(cfg.seed, 0x200 + std::uint64_t(r));
        tc.eval_every = cfg.eval_every;
        outcome.replicas[std::size_t(r)].metrics = train(net, train_x, train_y, test_x, test_y, tc);
        outcome.replicas[std::size_t(r)].net = std::move(net);
    };
    if (cfg.threads <= 1 || cfg.replicas == 1) {
        for (int r = 0; r < cfg.replicas; ++r) run_replica(r);
    } else {
        std::vector<std::thread> pool;
        const unsigned workers = std::min(cfg.threads, unsigned(cfg.replicas));
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (int r = int(w); r < cfg.replicas; r += int(workers)) run_replica(r);
            });
        for (auto& t : pool) t.join();
    }

    outcome.averaged = average_metric_streams(outcome.replicas);
    outcome.final_mean_accuracy =
        outcome.averaged.empty() ? 0.0 : outcome.averaged.back().test_accuracy;
    return outcome;
}

inline int cmd_train(const ExperimentConfig& cfg, const std::string& out_dir,
                     std::ostream& log = std::cout) {
    const TrainOutcome outcome = run_training(cfg);
    std::filesystem::create_directories(out_dir);

    std::ostringstream csv;
    csv << "iteration,train_loss,test_accuracy,model_id,model_kind\n";
    for (std::size_t r = 0; r < outcome.replicas.size(); ++r)
        for (const MetricRow& row : outcome.replicas[r].metrics)
            csv << row.iteration << ',' << format_double(row.train_loss) << ','
                << format_double(row.test_accuracy) << ',' << r << ',' << cfg.model << '\n';
    for (const MetricRow& row : outcome.averaged)
        csv << row.iteration << ',' << format_double(row.train_loss) << ','
            << format_double(row.test_accuracy) << ",avg," << cfg.model << '\n';
    write_text_file(out_dir + "/metrics.csv", csv.str());

    for (std::size_t r = 0; r < outcome.replicas.size(); ++r)
        save_network(outcome.replicas[r].net,
                     out_dir + "/model_" + cfg.model + "_r" + std::to_string(r) + ".ckpt");

    log << "train: " << cfg.model << " x" << cfg.replicas << " replicas, final mean accuracy "
        << format_double(outcome.final_mean_accuracy) << '\n';
    return kExitOk;
}

// ---- dataset commands ------------------------------------------------

inline int cmd_dataset_gen(std::size_t count_per_class, std::uint64_t seed,
                           const std::string& out_path, std::ostream& log = std::cout) {
    const Dataset ds = generate_synthetic(count_per_class, seed);
    save_dataset_csv(ds, out_path);
    log << "dataset gen: wrote " << ds.size() << " images to " << out_path << '\n';
    return kExitOk;
}

inline int cmd_dataset_split(const std::string& in_path, std::size_t n_train, std::size_t n_test,
                             std::uint64_t seed, const std::string& out_train,
                             const std::string& out_test, std::ostream& log = std::cout) {
    const Dataset ds = load_dataset_csv(in_path);
    const auto [train, test] = split_dataset(ds, n_train, n_test, seed);
    save_dataset_csv(train, out_train);
    save_dataset_csv(test, out_test);
    log << "dataset split: " << train.size() << " train, " << test.size() << " test\n";
    return kExitOk;
}

} // namespace quanvnet
