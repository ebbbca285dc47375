#pragma once

#include <vector>

#include "volnet/volume.hpp"

namespace volnet {

/// L2-regularized logistic regression fitted by gradient descent with a
/// backtracking line search. The objective mean-BCE + l2*|w|^2 (bias
/// unpenalized) is convex; for l2 > 0 the optimum is unique.
struct LogRegModel {
    std::vector<double> weights;
    double bias = 0.0;
    double l2 = 0.0;
    bool converged = false;     // gradient norm reached tol within max_iters
    double gradient_norm = 0.0; // at the returned point
    std::size_t iterations = 0;
};

LogRegModel logreg_train(const Volume& features, const std::vector<int>& labels, double l2,
                         std::size_t max_iters = 5000, double tol = 1e-8);

std::vector<double> logreg_predict(const LogRegModel& model, const Volume& features);

/// Objective value at the model's parameters (test support).
double logreg_objective(const LogRegModel& model, const Volume& features,
                        const std::vector<int>& labels);

} // namespace volnet
