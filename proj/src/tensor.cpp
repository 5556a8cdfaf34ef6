#include "aoi/tensor.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "aoi/error.hpp"

namespace aoi {

std::size_t tensor_element_count(int order, int dim) {
    if (order < 1) fail(ErrorCode::kInvalidArgument, "tensor order must be >= 1");
    if (dim < 1) fail(ErrorCode::kInvalidArgument, "tensor dim must be >= 1");
    std::size_t count = 1;
    for (int i = 0; i < order; ++i) {
        if (count > std::numeric_limits<std::size_t>::max() / static_cast<std::size_t>(dim))
            fail(ErrorCode::kInvalidArgument, "tensor size n^r overflows");
        count *= static_cast<std::size_t>(dim);
    }
    return count;
}

DenseTensor::DenseTensor(int order, int dim, double fill)
    : order_(order), dim_(dim), data_(tensor_element_count(order, dim), fill) {}

DenseTensor DenseTensor::from_data(int order, int dim, std::vector<double> data) {
    if (data.size() != tensor_element_count(order, dim))
        fail(ErrorCode::kInvalidArgument, "tensor data length does not equal n^r");
    DenseTensor t(order, dim);
    t.data_ = std::move(data);
    return t;
}

std::size_t DenseTensor::flat_index(std::span<const int> idx) const {
    if (static_cast<int>(idx.size()) != order_)
        fail(ErrorCode::kInvalidArgument,
             "multi-index length " + std::to_string(idx.size()) +
                 " does not match tensor order " + std::to_string(order_));
    std::size_t offset = 0;
    for (int j = 0; j < order_; ++j) {
        if (idx[j] < 0 || idx[j] >= dim_)
            fail(ErrorCode::kInvalidArgument,
                 "index " + std::to_string(idx[j]) + " out of range for mode " +
                     std::to_string(j) + " (extent " + std::to_string(dim_) + ")");
        offset = offset * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(idx[j]);
    }
    return offset;
}

double DenseTensor::get(std::span<const int> idx) const { return data_[flat_index(idx)]; }

void DenseTensor::set(std::span<const int> idx, double value) { data_[flat_index(idx)] = value; }

DenseTensor DenseTensor::mode_product(const Eigen::MatrixXd& a, int mode) const {
    if (mode < 0 || mode >= order_)
        fail(ErrorCode::kInvalidArgument,
             "mode " + std::to_string(mode) + " out of range for order " + std::to_string(order_));
    if (a.rows() != dim_ || a.cols() != dim_)
        fail(ErrorCode::kInvalidArgument,
             "matrix is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                 ", expected " + std::to_string(dim_) + "x" + std::to_string(dim_));

    // Row-major layout: split the flat offset as outer * (dim * inner) with
    // the chosen mode in the middle. inner = dim^(order-1-mode).
    std::size_t inner = 1;
    for (int j = mode + 1; j < order_; ++j) inner *= static_cast<std::size_t>(dim_);
    const std::size_t block = inner * static_cast<std::size_t>(dim_);
    const std::size_t outer = data_.size() / block;

    DenseTensor out(order_, dim_);
    for (std::size_t o = 0; o < outer; ++o) {
        const double* src = data_.data() + o * block;
        double* dst = out.data_.data() + o * block;
        for (int i = 0; i < dim_; ++i) {
            for (int p = 0; p < dim_; ++p) {
                const double w = a(i, p);
                if (w == 0.0) continue;
                const double* sp = src + static_cast<std::size_t>(p) * inner;
                double* dp = dst + static_cast<std::size_t>(i) * inner;
                for (std::size_t k = 0; k < inner; ++k) dp[k] += w * sp[k];
            }
        }
    }
    return out;
}

DenseTensor DenseTensor::reset_contraction(const Eigen::MatrixXd& a) const {
    const Eigen::MatrixXd at = a.transpose();
    DenseTensor out = mode_product(at, 0);
    for (int j = 1; j < order_; ++j) out = out.mode_product(at, j);
    return out;
}

DenseTensor& DenseTensor::add_scaled(const DenseTensor& other, double factor) {
    if (other.order_ != order_ || other.dim_ != dim_)
        fail(ErrorCode::kInvalidArgument, "tensor shape mismatch in add_scaled");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += factor * other.data_[i];
    return *this;
}

DenseTensor& DenseTensor::scale(double factor) {
    for (double& v : data_) v *= factor;
    return *this;
}

double DenseTensor::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

bool DenseTensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace aoi
