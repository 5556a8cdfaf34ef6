#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

namespace aoi {

/// Dense real tensor of order r with every mode of extent n, stored flat in
/// row-major order (last index fastest). Multi-indices are 0-based spans of
/// length `order()` with entries in [0, dim()).
///
/// Public operations never mutate their receiver; they return new tensors, so
/// values can be shared freely across threads.
class DenseTensor {
public:
    DenseTensor(int order, int dim, double fill = 0.0);

    static DenseTensor from_data(int order, int dim, std::vector<double> data);

    int order() const { return order_; }
    int dim() const { return dim_; }
    std::size_t size() const { return data_.size(); }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& mutable_data() { return data_; }

    /// Flat row-major offset of a multi-index; throws kInvalidArgument naming
    /// the offending mode when an entry is out of range.
    std::size_t flat_index(std::span<const int> idx) const;

    double get(std::span<const int> idx) const;
    void set(std::span<const int> idx, double value);

    /// j-mode product with a square matrix (0-based mode):
    /// [Y]_{k, k_mode=i} = sum_p a(i,p) [X]_{k, k_mode=p}.
    DenseTensor mode_product(const Eigen::MatrixXd& a, int mode) const;

    /// Contraction with the same matrix along every mode in the x' = x*A
    /// reading: order-1 gives t*A, order-2 gives A^T * T * A. Equivalent to
    /// mode_product with a^T along each mode in turn.
    DenseTensor reset_contraction(const Eigen::MatrixXd& a) const;

    DenseTensor& add_scaled(const DenseTensor& other, double factor);
    DenseTensor& scale(double factor);

    double max_abs() const;
    bool all_finite() const;

private:
    int order_;
    int dim_;
    std::vector<double> data_;
};

/// Number of elements of an order-r tensor with extent n (n^r), guarding
/// against overflow.
std::size_t tensor_element_count(int order, int dim);

}  // namespace aoi
