#pragma once

#include <span>

#include "mixsig/tensor.hpp"

namespace mixsig {

/// Root-mean-square deviation per element: sqrt(sum((corrupted - ideal)^2) / n).
/// Throws std::invalid_argument on shape mismatch.
double rmse(const Tensor& corrupted, const Tensor& ideal);
double rmse(std::span<const double> corrupted, std::span<const double> ideal);

double mean(std::span<const double> xs);
/// Population standard deviation (divides by n).
double population_std(std::span<const double> xs);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};
MeanStd mean_std(std::span<const double> xs);

}  // namespace mixsig
