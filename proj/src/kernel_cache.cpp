#include <cmath>
#include <limits>
#include <stdexcept>

#include "mannerist/ocsvm.hpp"

namespace mannerist {

double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma) {
    if (x.size() != y.size()) throw std::invalid_argument("rbf_kernel: dimension mismatch");
    if (!(gamma > 0.0)) throw std::invalid_argument("rbf_kernel: gamma must be positive");
    double d2 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x[k] - y[k];
        d2 += d * d;
    }
    return std::max(std::exp(-gamma * d2), std::numeric_limits<double>::min());
}

KernelCache::KernelCache(const Matrix& data, double gamma, std::size_t budget_bytes)
    : data_(data), gamma_(gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("kernel gamma must be positive");
    const std::size_t row_bytes = std::max<std::size_t>(1, size()) * sizeof(double);
    capacity_rows_ = budget_bytes / row_bytes;
}

std::vector<double> KernelCache::compute_row(std::size_t i) const {
    const auto n = size();
    const auto dim = static_cast<std::size_t>(data_.cols());
    std::vector<double> values(n);
    const std::span<const double> xi(data_.row(static_cast<Eigen::Index>(i)).data(), dim);
    for (std::size_t j = 0; j < n; ++j) {
        values[j] = rbf_kernel(xi, {data_.row(static_cast<Eigen::Index>(j)).data(), dim}, gamma_);
    }
    return values;
}

std::shared_ptr<const std::vector<double>> KernelCache::row(std::size_t i) {
    if (i >= size()) throw std::out_of_range("kernel row out of range");
    if (auto it = entries_.find(i); it != entries_.end()) {
        ++hits_;
        lru_.splice(lru_.begin(), lru_, it->second.position);
        return it->second.values;
    }
    ++misses_;
    auto values = std::make_shared<const std::vector<double>>(compute_row(i));
    if (capacity_rows_ == 0) return values;
    if (entries_.size() >= capacity_rows_) {
        entries_.erase(lru_.back());
        lru_.pop_back();
    }
    lru_.push_front(i);
    entries_.emplace(i, Entry{values, lru_.begin()});
    return values;
}

} // namespace mannerist
