// Dataset ingestion and desk-scale synthesis.
//
// Portable dataset CSV: one image per row, 3136 integers in [0,255]
// (row-major height, width, channel for 28x28x4) followed by the class
// label in {0,1,2,3}. A .gz path is decompressed transparently. The
// synthetic generator produces four classes separated by channel means and
// a simple oriented-stripe texture so desk-scale training has signal
// without the external download.
#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "quanvnet/csv.hpp"
#include "quanvnet/quanv.hpp"
#include "quanvnet/rng.hpp"

#ifdef QUANVNET_HAS_ZLIB
#include <zlib.h>
#endif

namespace quanvnet {

struct Dataset {
    std::vector<ImageTensor> images;
    std::vector<int> labels;

    std::size_t size() const { return images.size(); }
};

inline constexpr int kImageSide = 28;
inline constexpr int kImageChannels = 4;
inline constexpr int kNumClasses = 4;

namespace detail {

inline bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

#ifdef QUANVNET_HAS_ZLIB
inline std::string gunzip_file(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open gzip file: " + path);
    std::string out;
    char buf[1 << 16];
    int n = 0;
    while ((n = gzread(f, buf, sizeof(buf))) > 0) out.append(buf, std::size_t(n));
    const bool ok = (n == 0);
    gzclose(f);
    if (!ok) throw std::runtime_error("gzip read failed: " + path);
    return out;
}

inline void gzip_to_file(const std::string& path, const std::string& text) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot write gzip file: " + path);
    const int written = gzwrite(f, text.data(), unsigned(text.size()));
    gzclose(f);
    if (written != int(text.size())) throw std::runtime_error("gzip write failed: " + path);
}
#endif

} // namespace detail

inline Dataset parse_dataset_csv(const std::string& text) {
    constexpr std::size_t pixels = std::size_t(kImageSide) * kImageSide * kImageChannels;
    Dataset ds;
    std::istringstream in(text);
    std::string line;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        ++row_no;
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto fail = [&](const std::string& msg) {
            throw std::runtime_error("dataset csv row " + std::to_string(row_no) + ": " + msg);
        };
        const auto fields = split_fields(t);
        if (fields.size() != pixels + 1)
            fail("expected " + std::to_string(pixels + 1) + " fields (3136 pixels + label), got " +
                 std::to_string(fields.size()));
        ImageTensor img = make_image(kImageSide, kImageSide, kImageChannels);
        for (std::size_t i = 0; i < pixels; ++i) {
            int v = 0;
            try {
                v = std::stoi(fields[i]);
            } catch (const std::exception&) {
                fail("bad pixel value '" + fields[i] + "'");
            }
            if (v < 0 || v > 255) fail("pixel value " + std::to_string(v) + " outside [0, 255]");
            img.values[i] = std::uint8_t(v);
        }
        int label = 0;
        try {
            label = std::stoi(fields[pixels]);
        } catch (const std::exception&) {
            fail("bad label '" + fields[pixels] + "'");
        }
        if (label < 0 || label >= kNumClasses)
            fail("label " + std::to_string(label) + " outside [0, " + std::to_string(kNumClasses) + ")");
        ds.images.push_back(std::move(img));
        ds.labels.push_back(label);
    }
    return ds;
}

inline std::string dataset_to_csv(const Dataset& dataset) {
    std::string out;
    for (std::size_t n = 0; n < dataset.size(); ++n) {
        const ImageTensor& img = dataset.images[n];
        for (std::uint8_t v : img.values) {
            out += std::to_string(int(v));
            out += ',';
        }
        out += std::to_string(dataset.labels[n]);
        out += '\n';
    }
    return out;
}

inline Dataset load_dataset_csv(const std::string& path) {
    std::string text;
    if (detail::has_suffix(path, ".gz")) {
#ifdef QUANVNET_HAS_ZLIB
        text = detail::gunzip_file(path);
#else
        throw std::runtime_error("gzip dataset support not built in (zlib missing): " + path);
#endif
    } else {
        text = read_text_file(path);
    }
    return parse_dataset_csv(text);
}

inline void save_dataset_csv(const Dataset& dataset, const std::string& path) {
    const std::string text = dataset_to_csv(dataset);
    if (detail::has_suffix(path, ".gz")) {
#ifdef QUANVNET_HAS_ZLIB
        detail::gzip_to_file(path, text);
#else
        throw std::runtime_error("gzip dataset support not built in (zlib missing): " + path);
#endif
    } else {
        write_text_file(path, text);
    }
}

// Seeded Fisher-Yates shuffle of [0, size) followed by a prefix split.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t size, std::size_t n_train, std::size_t n_test, std::uint64_t seed) {
    if (n_train + n_test > size)
        throw std::invalid_argument("split: requested " + std::to_string(n_train) + "+" +
                                    std::to_string(n_test) + " rows from a dataset of " +
                                    std::to_string(size));
    std::vector<std::size_t> order(size);
    for (std::size_t i = 0; i < size; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = size; i > 1; --i)
        std::swap(order[i - 1], order[uniform_index(rng, i)]);
    return {std::vector<std::size_t>(order.begin(), order.begin() + long(n_train)),
            std::vector<std::size_t>(order.begin() + long(n_train),
                                     order.begin() + long(n_train + n_test))};
}

inline Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.images.reserve(indices.size());
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
        out.images.push_back(dataset.images[i]);
        out.labels.push_back(dataset.labels[i]);
    }
    return out;
}

inline std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, std::size_t n_train,
                                                 std::size_t n_test, std::uint64_t seed) {
    const auto [train_idx, test_idx] = split_indices(dataset.size(), n_train, n_test, seed);
    return {subset(dataset, train_idx), subset(dataset, test_idx)};
}

// Per-class signature constants for the synthetic set. Classes differ in
// channel-wise means and stripe orientation (0 none, 1 vertical,
// 2 horizontal, 3 diagonal).
struct SyntheticSpec {
    int channel_means[kNumClasses][kImageChannels] = {
        {200, 150, 100, 60},
        {60, 120, 70, 180},
        {90, 180, 90, 140},
        {140, 80, 160, 100},
    };
    int stripe_orientation[kNumClasses] = {0, 1, 2, 3};
    int stripe_amplitude = 25;
    int stripe_period = 8; // pixels per on/off half-cycle pair
    int noise_amplitude = 20;
};

inline Dataset generate_synthetic(std::size_t count_per_class, std::uint64_t seed,
                                  const SyntheticSpec& spec = SyntheticSpec{}) {
    if (count_per_class < 1)
        throw std::invalid_argument("generate_synthetic: count per class must be >= 1");
    Dataset ds;
    const std::size_t total = count_per_class * kNumClasses;
    ds.images.reserve(total);
    ds.labels.reserve(total);
    std::mt19937_64 rng(seed);
    for (std::size_t n = 0; n < total; ++n) {
        const int label = int(n % kNumClasses); // interleaved, exactly uniform
        ImageTensor img = make_image(kImageSide, kImageSide, kImageChannels);
        for (int r = 0; r < kImageSide; ++r) {
            for (int c = 0; c < kImageSide; ++c) {
                int stripe = 0;
                const int o = spec.stripe_orientation[label];
                if (o != 0) {
                    const int coord = (o == 1) ? c : (o == 2) ? r : r + c;
                    const bool on = (coord / (spec.stripe_period / 2)) % 2 == 0;
                    stripe = on ? spec.stripe_amplitude : -spec.stripe_amplitude;
                }
                for (int ch = 0; ch < kImageChannels; ++ch) {
                    const int noise = int(uniform_in(rng, -double(spec.noise_amplitude),
                                                     double(spec.noise_amplitude)));
                    int v = spec.channel_means[label][ch] + stripe + noise;
                    v = std::min(255, std::max(0, v));
                    img.at(r, c, ch) = std::uint8_t(v);
                }
            }
        }
        ds.images.push_back(std::move(img));
        ds.labels.push_back(label);
    }
    return ds;
}

} // namespace quanvnet
