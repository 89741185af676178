#pragma once

#include <random>

#include "cohere/core.hpp"

namespace testing_support {

using namespace cohere;

/// Random real symmetric positive semidefinite 3x3 matrix, B B^T.
inline ComplexMatrix3 random_psd(std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, 1.0);
    ComplexMatrix3 b;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b(i, j) = n(rng);
    return (b * b.transpose()) * scale;
}

inline Vec3c random_vec(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return {cplx(n(rng), n(rng)), cplx(n(rng), n(rng)), cplx(n(rng), n(rng))};
}

inline DipolePair random_pair(std::mt19937_64& rng) { return DipolePair(random_vec(rng), random_vec(rng)); }

} // namespace testing_support
