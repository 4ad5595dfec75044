#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "aidp/tensor.hpp"

namespace aidp {

struct Dataset {
    Tensor images;            // [N,C,H,W], every pixel in [0,1]
    std::vector<int> labels;  // [N], every label in [0,classes)
    std::size_t classes = 0;
    std::string name;
    std::string split;

    std::size_t size() const { return labels.size(); }
    void validate() const;
};

/// MNIST-format IDX pair: big-endian headers, byte pixels scaled by /255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// CIFAR-10 binary batches: 3073-byte records, 1 label byte + RGB planes.
Dataset load_cifar10_binary(const std::vector<std::string>& paths);

/// Inverse of load_cifar10_binary for a dataset whose pixels are byte-exact
/// multiples of 1/255 (as loaded data is).
void write_cifar10_binary(const Dataset& data, const std::string& path);

/// Class-conditional Gaussian blobs plus pixel noise, clipped to [0,1].
/// Linearly learnable but attackable; deterministic under seed.
Dataset synth_blobs(std::uint64_t seed, std::size_t n, std::size_t size,
                    std::size_t classes);

/// One generation pass split into disjoint train/test sets.
std::pair<Dataset, Dataset> synth_blob_splits(std::uint64_t seed, std::size_t train_n,
                                              std::size_t test_n, std::size_t size,
                                              std::size_t classes);

/// Index batches covering [0,n) exactly once; fixed permutation from seed
/// when shuffling; the final short batch is included.
std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size,
                                                  bool shuffle, std::uint64_t seed);

/// Materialize one batch.
std::pair<Tensor, std::vector<int>> gather(const Dataset& data,
                                           const std::vector<std::size_t>& indices);

/// First n examples (n clamped to the dataset size).
Dataset head(const Dataset& data, std::size_t n);

}  // namespace aidp
