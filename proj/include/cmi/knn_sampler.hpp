#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "cmi/batch.hpp"
#include "cmi/dataset.hpp"

namespace cmi {

// Disjoint split by a uniform random permutation: the first
// floor(n * train_fraction) permuted triples form the training set.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_fraction, std::uint64_t seed);

// b distinct indices drawn uniformly without replacement.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t b, std::uint64_t seed);

// b triples drawn uniformly without replacement. Throws InputError if b > n.
Dataset sample_joint_batch(const Dataset& data, std::size_t b, std::uint64_t seed);

// The k indices whose z is nearest (Euclidean) to z[anchor], the anchor
// itself included at distance 0. Ties go to the smaller index. Returned in
// order of increasing distance.
std::vector<std::size_t> knn_indices(const Dataset& data, std::size_t anchor, std::size_t k);

struct ProdBatchOptions {
    // When false the anchor's own x is excluded and the next-nearest
    // neighbour takes its place.
    bool include_anchor = true;
};

// m = b/k anchors (y_l, z_l) drawn without replacement; each contributes the
// k triples (x_j, y_l, z_l) for j in the k-NN set of z_l.
// Throws ConfigError if k does not divide b, InputError if m > n or k > n.
Dataset sample_prod_batch(const Dataset& data, std::size_t b, std::size_t k, std::uint64_t seed,
                          ProdBatchOptions options = {});

// Both classes drawn from the same dataset with independent seeds derived
// from `seed`.
BatchPair make_batch_pair(const Dataset& data, std::size_t b, std::size_t k, std::uint64_t seed,
                          ProdBatchOptions options = {});

}  // namespace cmi
