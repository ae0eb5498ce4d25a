#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include <tilesim/errors.hpp>

namespace tilesim {

// Dense row-major matrix of doubles. All functional arithmetic in the
// simulator runs on 64-bit floats; element width in the architecture
// configuration affects timing only.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    bool operator==(const Matrix& other) const = default;
};

// Seeded, platform-independent pseudorandom matrix. std::mt19937_64 is fully
// specified by the standard; the value mapping below avoids
// std::uniform_real_distribution, whose output sequence is
// implementation-defined.
inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                            bool integer_values = false) {
    Matrix m(rows, cols);
    std::mt19937_64 rng(seed);
    for (double& v : m.data) {
        const std::uint64_t bits = rng();
        if (integer_values) {
            // Integers in [-8, 8]: sums over K <= 2^20 stay exact in doubles.
            v = static_cast<double>(static_cast<std::int64_t>(bits % 17) - 8);
        } else {
            // Uniform in [-1, 1) from the top 53 bits.
            v = static_cast<double>(bits >> 11) * (2.0 / 9007199254740992.0) - 1.0;
        }
    }
    return m;
}

}  // namespace tilesim
