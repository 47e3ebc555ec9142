#include "mixsig/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace mixsig {

double rmse(std::span<const double> corrupted, std::span<const double> ideal) {
    if (corrupted.size() != ideal.size()) throw std::invalid_argument("rmse: length mismatch");
    if (corrupted.empty()) throw std::invalid_argument("rmse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < corrupted.size(); ++i) {
        const double d = corrupted[i] - ideal[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(corrupted.size()));
}

double rmse(const Tensor& corrupted, const Tensor& ideal) {
    require_same_shape(corrupted, ideal, "rmse");
    return rmse(corrupted.values(), ideal.values());
}

double mean(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean: empty input");
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc / static_cast<double>(xs.size());
}

double population_std(std::span<const double> xs) {
    const double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

MeanStd mean_std(std::span<const double> xs) {
    return {mean(xs), population_std(xs)};
}

}  // namespace mixsig
