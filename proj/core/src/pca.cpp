#include "volnet/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace volnet {

std::vector<double> ColumnMap::reduce(std::span<const double> row) const {
    if (row.size() != original_dim) {
        throw ShapeError("row length " + std::to_string(row.size()) +
                         " does not match column map dimension " + std::to_string(original_dim));
    }
    std::vector<double> out(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) out[i] = row[kept[i]];
    return out;
}

std::vector<double> ColumnMap::restore(std::span<const double> reduced) const {
    if (reduced.size() != kept.size()) {
        throw ShapeError("reduced length " + std::to_string(reduced.size()) +
                         " does not match retained column count " + std::to_string(kept.size()));
    }
    std::vector<double> out(original_dim, 0.0);
    for (std::size_t i = 0; i < kept.size(); ++i) out[kept[i]] = reduced[i];
    return out;
}

ColumnMap fit_zero_column_removal(const Volume& train_matrix) {
    if (train_matrix.rank() != 2) {
        throw ShapeError("zero-column removal expects a rank-2 matrix, got " +
                         train_matrix.shape_str());
    }
    const std::size_t n = train_matrix.dim(0);
    const std::size_t d = train_matrix.dim(1);
    std::vector<bool> nonzero(d, false);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = train_matrix.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) {
            if (row[j] != 0.0) nonzero[j] = true;
        }
    }
    ColumnMap map;
    map.original_dim = d;
    for (std::size_t j = 0; j < d; ++j) {
        if (nonzero[j]) map.kept.push_back(j);
    }
    if (map.kept.empty()) {
        throw DataError("every column is zero in the training matrix");
    }
    return map;
}

Volume remove_zero_columns(const Volume& matrix, const ColumnMap& map) {
    if (matrix.rank() != 2 || matrix.dim(1) != map.original_dim) {
        throw ShapeError("matrix " + matrix.shape_str() + " does not match column map of " +
                         std::to_string(map.original_dim) + " columns");
    }
    const std::size_t n = matrix.dim(0);
    Volume out({n, map.kept.size()});
    for (std::size_t i = 0; i < n; ++i) {
        const double* src = matrix.data() + i * map.original_dim;
        double* dst = out.data() + i * map.kept.size();
        for (std::size_t j = 0; j < map.kept.size(); ++j) dst[j] = src[map.kept[j]];
    }
    return out;
}

void symmetric_eigen(const Volume& matrix, std::vector<double>& eigenvalues,
                     Volume& eigenvectors) {
    if (matrix.rank() != 2 || matrix.dim(0) != matrix.dim(1)) {
        throw ShapeError("eigendecomposition expects a square matrix, got " +
                         matrix.shape_str());
    }
    const std::size_t n = matrix.dim(0);
    Volume a = matrix;
    eigenvectors = Volume({n, n});
    for (std::size_t i = 0; i < n; ++i) eigenvectors[i * n + i] = 1.0;

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        double diag_scale = 0.0;
        for (std::size_t p = 0; p < n; ++p) diag_scale += a[p * n + p] * a[p * n + p];
        const double tol = 1e-30 * std::max(1.0, diag_scale);
        if (off <= tol) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (apq == 0.0) continue;
                const double app = a[p * n + p];
                const double aqq = a[q * n + q];
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = eigenvectors[k * n + p];
                    const double vkq = eigenvectors[k * n + q];
                    eigenvectors[k * n + p] = c * vkp - s * vkq;
                    eigenvectors[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    eigenvalues.resize(n);
    for (std::size_t i = 0; i < n; ++i) eigenvalues[i] = a[i * n + i];

    // Sort by eigenvalue descending, permuting eigenvector columns along.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return eigenvalues[x] > eigenvalues[y]; });
    std::vector<double> sorted_values(n);
    Volume sorted_vectors({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        sorted_values[i] = eigenvalues[order[i]];
        for (std::size_t k = 0; k < n; ++k) {
            sorted_vectors[k * n + i] = eigenvectors[k * n + order[i]];
        }
    }
    eigenvalues = std::move(sorted_values);
    eigenvectors = std::move(sorted_vectors);
}

PcaModel pca_fit(const Volume& train_matrix, std::size_t k) {
    if (train_matrix.rank() != 2) {
        throw ShapeError("pca_fit expects a rank-2 matrix, got " + train_matrix.shape_str());
    }
    const std::size_t n = train_matrix.dim(0);
    const std::size_t d = train_matrix.dim(1);
    if (n < 2) {
        throw DataError("pca_fit needs at least 2 rows");
    }
    if (k == 0 || k > std::min(n - 1, d)) {
        throw DataError("component count " + std::to_string(k) + " exceeds min(n-1, d) = " +
                        std::to_string(std::min(n - 1, d)));
    }

    PcaModel model;
    model.mean.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = train_matrix.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) model.mean[j] += row[j];
    }
    for (double& m : model.mean) m /= static_cast<double>(n);

    std::vector<double> centered(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = train_matrix.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) {
            centered[i * d + j] = row[j] - model.mean[j];
        }
    }

    // Gram matrix of the centered rows; its eigenvectors give the right
    // singular directions at n x n cost instead of d x d.
    Volume gram({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double dot = 0.0;
            const double* a = centered.data() + i * d;
            const double* b = centered.data() + j * d;
            for (std::size_t t = 0; t < d; ++t) dot += a[t] * b[t];
            gram[i * n + j] = dot;
            gram[j * n + i] = dot;
        }
    }

    std::vector<double> eigenvalues;
    Volume eigenvectors;
    symmetric_eigen(gram, eigenvalues, eigenvectors);

    const double rank_tol = 1e-12 * std::max(1.0, eigenvalues.empty() ? 0.0 : eigenvalues[0]);
    model.components = Volume({k, d});
    model.explained_variance.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        const double lambda = eigenvalues[c];
        if (lambda <= rank_tol) {
            throw DataError("component count " + std::to_string(k) +
                            " exceeds the numerical rank " + std::to_string(c) +
                            " of the training matrix");
        }
        const double inv_sigma = 1.0 / std::sqrt(lambda);
        double* comp = model.components.data() + c * d;
        for (std::size_t j = 0; j < d; ++j) comp[j] = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double u = eigenvectors[i * n + c];
            if (u == 0.0) continue;
            const double* row = centered.data() + i * d;
            const double w = u * inv_sigma;
            for (std::size_t j = 0; j < d; ++j) comp[j] += w * row[j];
        }
        // Sign convention: the entry of largest magnitude is positive.
        std::size_t arg = 0;
        for (std::size_t j = 1; j < d; ++j) {
            if (std::abs(comp[j]) > std::abs(comp[arg])) arg = j;
        }
        if (comp[arg] < 0.0) {
            for (std::size_t j = 0; j < d; ++j) comp[j] = -comp[j];
        }
        model.explained_variance[c] = lambda / static_cast<double>(n - 1);
    }
    return model;
}

Volume pca_transform(const PcaModel& model, const Volume& matrix) {
    if (matrix.rank() != 2 || matrix.dim(1) != model.input_dim()) {
        throw ShapeError("matrix " + matrix.shape_str() + " does not match PCA input dim " +
                         std::to_string(model.input_dim()));
    }
    const std::size_t n = matrix.dim(0);
    const std::size_t d = model.input_dim();
    const std::size_t k = model.n_components();
    Volume out({n, k});
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = matrix.data() + i * d;
        for (std::size_t c = 0; c < k; ++c) {
            const double* comp = model.components.data() + c * d;
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += comp[j] * (row[j] - model.mean[j]);
            out[i * k + c] = dot;
        }
    }
    return out;
}

Volume pca_inverse_transform(const PcaModel& model, const Volume& projected) {
    if (projected.rank() != 2 || projected.dim(1) != model.n_components()) {
        throw ShapeError("projection " + projected.shape_str() +
                         " does not match component count " +
                         std::to_string(model.n_components()));
    }
    const std::size_t n = projected.dim(0);
    const std::size_t d = model.input_dim();
    const std::size_t k = model.n_components();
    Volume out({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        double* row = out.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) row[j] = model.mean[j];
        for (std::size_t c = 0; c < k; ++c) {
            const double w = projected[i * k + c];
            if (w == 0.0) continue;
            const double* comp = model.components.data() + c * d;
            for (std::size_t j = 0; j < d; ++j) row[j] += w * comp[j];
        }
    }
    return out;
}

} // namespace volnet
