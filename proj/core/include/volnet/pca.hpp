#pragma once

#include <span>
#include <vector>

#include "volnet/volume.hpp"

namespace volnet {

/// Train-fitted map of retained columns after dropping those exactly zero
/// in every training row. Validation and test rows are reduced with the
/// same map regardless of their own zero pattern.
struct ColumnMap {
    std::size_t original_dim = 0;
    std::vector<std::size_t> kept; // original indices of retained columns

    std::vector<double> reduce(std::span<const double> row) const;

    /// Re-expands a reduced row with zeros in the dropped positions.
    std::vector<double> restore(std::span<const double> reduced) const;
};

ColumnMap fit_zero_column_removal(const Volume& train_matrix);
Volume remove_zero_columns(const Volume& matrix, const ColumnMap& map);

/// PCA fitted on the centered training matrix via the eigendecomposition of
/// its Gram matrix (n << d regime). Component rows are orthonormal with the
/// largest-magnitude entry of each made positive; explained variances are
/// non-increasing.
struct PcaModel {
    std::vector<double> mean;              // length d
    Volume components;                     // [k, d], rows orthonormal
    std::vector<double> explained_variance; // length k, non-increasing

    std::size_t input_dim() const { return mean.size(); }
    std::size_t n_components() const { return components.dim(0); }
};

PcaModel pca_fit(const Volume& train_matrix, std::size_t k);
Volume pca_transform(const PcaModel& model, const Volume& matrix);

/// Back-projection from component space; exact on the training span when
/// k equals the matrix rank.
Volume pca_inverse_transform(const PcaModel& model, const Volume& projected);

/// Eigen-decomposition of a symmetric matrix by the cyclic Jacobi method.
/// Eigenvalues descending; eigenvectors[i] is the i-th column-eigenvector
/// stored row-wise in a [n, n] volume's column i.
void symmetric_eigen(const Volume& matrix, std::vector<double>& eigenvalues,
                     Volume& eigenvectors);

} // namespace volnet
