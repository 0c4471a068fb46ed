#pragma once

#include <cstddef>

#include "cmi/dataset.hpp"

namespace cmi {

// Joint-class samples (drawn from p(x,y,z)) alongside product-class samples
// emulating p(x|z)p(y,z). Both hold the same number of triples.
struct BatchPair {
    Dataset joint;
    Dataset prod;
    std::size_t k = 1;  // neighbour count used to build `prod`

    std::size_t size() const noexcept { return joint.size(); }
};

}  // namespace cmi
