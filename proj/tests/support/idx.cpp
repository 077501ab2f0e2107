#include "idx.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

namespace cbp::testsupport {
namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
    const unsigned char bytes[4] = {
        static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace

void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
    if (pixels.size() != static_cast<std::size_t>(count) * rows * cols)
        throw std::runtime_error("write_idx_images: pixel buffer does not match dimensions");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    put_u32(out, 0x00000803u);
    put_u32(out, count);
    put_u32(out, rows);
    put_u32(out, cols);
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    finish(out, path);
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    put_u32(out, 0x00000801u);
    put_u32(out, static_cast<std::uint32_t>(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
    finish(out, path);
}

DatasetPaths make_synthetic_mnist(const std::string& dir, std::uint64_t seed, std::size_t count) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    char stem[64];
    std::snprintf(stem, sizeof stem, "synth-v2-%llu-%zu",
                  static_cast<unsigned long long>(seed), count);
    DatasetPaths paths{dir + "/" + stem + "-images-idx3-ubyte",
                       dir + "/" + stem + "-labels-idx1-ubyte"};
    const std::size_t image_bytes = 16 + count * 784;
    std::error_code ec;
    if (fs::file_size(paths.images, ec) == image_bytes && !ec &&
        fs::file_size(paths.labels, ec) == 8 + count && !ec)
        return paths;  // already generated with this seed/count

    // Images live on a curved manifold: latent clusters pushed through a frozen
    // random two-layer decoder.  Each class owns several clusters (like style
    // variants of a digit), so in pixel space a class is a union of separated
    // blobs -- not linearly separable -- and neighbouring clusters of different
    // classes overlap.  A classifier has to learn and maintain real features,
    // and sits a few points below perfect accuracy, roughly the regime
    // handwritten digits put a small net in.
    std::mt19937_64 rng(seed);
    constexpr int kClasses = 10;
    constexpr int kClustersPerClass = 3;
    constexpr int kClusters = kClasses * kClustersPerClass;
    constexpr int kPixels = 784;
    constexpr int kLatent = 24;
    constexpr int kHidden = 64;
    constexpr double kSep = 1.5;    // cluster separation vs unit latent noise
    constexpr double kGain = 4.0;   // decoder output contrast

    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> mu(kClusters * kLatent);
    for (auto& v : mu) v = kSep * normal(rng);
    std::vector<int> cluster_class(kClusters);
    for (int c = 0; c < kClusters; ++c) cluster_class[c] = c % kClasses;
    std::shuffle(cluster_class.begin(), cluster_class.end(), rng);
    std::vector<double> a1(kHidden * kLatent), b1(kHidden), a2(kPixels * kHidden);
    for (auto& v : a1) v = normal(rng) / std::sqrt(double(kLatent));
    for (auto& v : b1) v = 0.2 * normal(rng);
    for (auto& v : a2) v = normal(rng) / std::sqrt(double(kHidden));

    std::vector<std::uint8_t> pixels(count * static_cast<std::size_t>(kPixels));
    std::vector<std::uint8_t> labels(count);
    std::uniform_int_distribution<int> cluster_dist(0, kClusters - 1);
    std::uniform_int_distribution<int> noise(-16, 16);
    std::vector<double> z(kLatent), h(kHidden);
    for (std::size_t i = 0; i < count; ++i) {
        const int cluster = cluster_dist(rng);
        labels[i] = static_cast<std::uint8_t>(cluster_class[cluster]);
        for (int j = 0; j < kLatent; ++j) z[j] = mu[cluster * kLatent + j] + normal(rng);
        for (int u = 0; u < kHidden; ++u) {
            double s = b1[u];
            for (int j = 0; j < kLatent; ++j) s += a1[u * kLatent + j] * z[j];
            h[u] = std::tanh(s);
        }
        std::uint8_t* img = &pixels[i * kPixels];
        for (int p = 0; p < kPixels; ++p) {
            double s = 0.0;
            for (int u = 0; u < kHidden; ++u) s += a2[p * kHidden + u] * h[u];
            int v = static_cast<int>(255.0 / (1.0 + std::exp(-kGain * s))) + noise(rng);
            img[p] = static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
        }
    }

    const std::string img_tmp = paths.images + ".tmp";
    const std::string lab_tmp = paths.labels + ".tmp";
    write_idx_images(img_tmp, pixels, static_cast<std::uint32_t>(count), 28, 28);
    write_idx_labels(lab_tmp, labels);
    fs::rename(img_tmp, paths.images);
    fs::rename(lab_tmp, paths.labels);
    return paths;
}

std::pair<DatasetPaths, bool> mnist_or_synthetic(const std::string& fallback_dir) {
    if (const char* env = std::getenv("CBPLAB_MNIST_DIR")) {
        namespace fs = std::filesystem;
        DatasetPaths real{std::string(env) + "/train-images-idx3-ubyte",
                          std::string(env) + "/train-labels-idx1-ubyte"};
        if (fs::exists(real.images) && fs::exists(real.labels)) return {real, true};
    }
    return {make_synthetic_mnist(fallback_dir, 0xC0FFEEu), false};
}

}  // namespace cbp::testsupport
