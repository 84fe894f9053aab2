#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <vector>

namespace pauselab {

/// Dense row-major matrix. Vectors are 1×n tensors.
template <class Real>
struct Tensor {
    int rows{0};
    int cols{0};
    std::vector<Real> data;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, Real(0)) {}

    Real* row(int r) {
        assert(r >= 0 && r < rows);
        return data.data() + static_cast<std::size_t>(r) * cols;
    }
    const Real* row(int r) const {
        assert(r >= 0 && r < rows);
        return data.data() + static_cast<std::size_t>(r) * cols;
    }
    Real& at(int r, int c) {
        assert(c >= 0 && c < cols);
        return row(r)[c];
    }
    Real at(int r, int c) const {
        assert(c >= 0 && c < cols);
        return row(r)[c];
    }
    std::size_t size() const { return data.size(); }
    void zero() { std::fill(data.begin(), data.end(), Real(0)); }
};

}  // namespace pauselab
