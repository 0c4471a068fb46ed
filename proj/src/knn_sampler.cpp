#include "cmi/knn_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "cmi/error.hpp"
#include "cmi/random.hpp"

namespace cmi {

namespace {

constexpr std::uint64_t kJointStream = 1;
constexpr std::uint64_t kProdStream = 2;

}  // namespace

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
    const std::size_t n = data.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    auto rng = make_rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));
    const std::span<const std::size_t> all(perm);
    return {data.subset(all.first(n_train)), data.subset(all.subspan(n_train))};
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t b, std::uint64_t seed) {
    if (b > n) throw InputError("cannot draw " + std::to_string(b) + " samples from " + std::to_string(n));
    // Partial Fisher-Yates.
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    auto rng = make_rng(seed);
    for (std::size_t i = 0; i < b; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(b);
    return pool;
}

Dataset sample_joint_batch(const Dataset& data, std::size_t b, std::uint64_t seed) {
    const auto idx = sample_indices(data.size(), b, seed);
    return data.subset(idx);
}

std::vector<std::size_t> knn_indices(const Dataset& data, std::size_t anchor, std::size_t k) {
    const std::size_t n = data.size();
    if (anchor >= n) throw InputError("anchor index out of range");
    if (k < 1 || k > n) throw InputError("k must lie in [1, n]; got k=" + std::to_string(k) + ", n=" + std::to_string(n));

    // Squared distances order identically to Euclidean ones.
    const std::size_t stride = data.dims().total();
    const std::size_t dz = data.dims().dz;
    const double* zs = data.matrix().data() + data.dims().dx + data.dims().dy;
    const double* anchor_z = zs + anchor * stride;

    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double* zj = zs + j * stride;
        double d2 = 0.0;
        for (std::size_t c = 0; c < dz; ++c) {
            const double diff = zj[c] - anchor_z[c];
            d2 += diff * diff;
        }
        dist[j] = {d2, j};
    }
    // (distance, index) lexicographic order gives ascending-index tie-breaking.
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

    std::vector<std::size_t> out(k);
    std::transform(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), out.begin(),
                   [](const auto& p) { return p.second; });
    return out;
}

Dataset sample_prod_batch(const Dataset& data, std::size_t b, std::size_t k, std::uint64_t seed,
                          ProdBatchOptions options) {
    if (k == 0 || b == 0 || b % k != 0)
        throw ConfigError("k=" + std::to_string(k) + " must divide the batch size b=" + std::to_string(b));
    const std::size_t n = data.size();
    const std::size_t m = b / k;
    const std::size_t search_k = options.include_anchor ? k : k + 1;
    if (search_k > n) throw InputError("k=" + std::to_string(k) + " neighbours requested from " + std::to_string(n) + " samples");
    if (m > n) throw InputError(std::to_string(m) + " anchors requested from " + std::to_string(n) + " samples");

    const auto anchors = sample_indices(n, m, seed);
    Dataset out = Dataset::with_size(data.dims(), b);
    std::size_t row = 0;
    for (const auto l : anchors) {
        auto neighbours = knn_indices(data, l, search_k);
        if (!options.include_anchor) {
            // Self is normally first, but duplicates of z_l may tie with it.
            auto self = std::find(neighbours.begin(), neighbours.end(), l);
            if (self != neighbours.end()) neighbours.erase(self);
            neighbours.resize(k);
        }
        for (const auto j : neighbours) out.set(row++, data.x(j), data.y(l), data.z(l));
    }
    return out;
}

BatchPair make_batch_pair(const Dataset& data, std::size_t b, std::size_t k, std::uint64_t seed,
                          ProdBatchOptions options) {
    return {sample_joint_batch(data, b, derive_seed(seed, {kJointStream})),
            sample_prod_batch(data, b, k, derive_seed(seed, {kProdStream}), options), k};
}

}  // namespace cmi
