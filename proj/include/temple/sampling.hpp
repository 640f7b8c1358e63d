#pragma once

#include "temple/linalg.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace temple {

// Radical-inverse low-discrepancy sequence in [0,1)^d, d <= 12.
class Halton {
public:
    explicit Halton(int d, std::uint64_t skip = 1) : d_(d), index_(skip) {}
    Vec next();

private:
    int d_;
    std::uint64_t index_;
};

double radical_inverse(std::uint64_t i, int base);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform(double a = 0.0, double b = 1.0) { return std::uniform_real_distribution<double>(a, b)(eng_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
    Vec unit_vector(int n);
    // Uniform in the n-ball of the given radius.
    Vec in_ball(int n, double radius);
    Vec in_box(const Box& b);
    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

// Deterministic, roughly uniform unit vectors in R^n (n = 1, 2 or 3 are spread evenly,
// higher dimensions use Halton-mapped Gaussian directions).
std::vector<Vec> sphere_points(int n, int count, double phase = 0.0);

// Deterministic low-discrepancy points in the closed n-ball, including the 2n axis extremes.
std::vector<Vec> ball_points(int n, int count, double radius);

}  // namespace temple
