#include "volnet/logreg.hpp"

#include <cmath>

namespace volnet {

namespace {

double stable_sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// -log sigmoid(z) without overflow: log(1 + exp(-z)) for z >= 0,
// -z + log(1 + exp(z)) otherwise.
double log1p_exp_neg(double z) {
    if (z >= 0.0) return std::log1p(std::exp(-z));
    return -z + std::log1p(std::exp(z));
}

struct Objective {
    const Volume& x;
    const std::vector<int>& y;
    double l2;
    std::size_t n, d;

    double value(const std::vector<double>& w, double b) const {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = x.data() + i * d;
            double z = b;
            for (std::size_t j = 0; j < d; ++j) z += w[j] * row[j];
            // BCE of sigmoid(z): log1p_exp_neg(z) for y=1, same of -z for y=0.
            sum += y[i] == 1 ? log1p_exp_neg(z) : log1p_exp_neg(-z);
        }
        double reg = 0.0;
        for (double wj : w) reg += wj * wj;
        return sum / static_cast<double>(n) + l2 * reg;
    }

    // Gradient into (gw, gb); returns its Euclidean norm (bias included).
    double gradient(const std::vector<double>& w, double b, std::vector<double>& gw,
                    double& gb) const {
        gw.assign(d, 0.0);
        gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = x.data() + i * d;
            double z = b;
            for (std::size_t j = 0; j < d; ++j) z += w[j] * row[j];
            const double resid = stable_sigmoid(z) - static_cast<double>(y[i]);
            gb += resid;
            for (std::size_t j = 0; j < d; ++j) gw[j] += resid * row[j];
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        gb *= inv_n;
        double sq = gb * gb;
        for (std::size_t j = 0; j < d; ++j) {
            gw[j] = gw[j] * inv_n + 2.0 * l2 * w[j];
            sq += gw[j] * gw[j];
        }
        return std::sqrt(sq);
    }
};

} // namespace

LogRegModel logreg_train(const Volume& features, const std::vector<int>& labels, double l2,
                         std::size_t max_iters, double tol) {
    if (features.rank() != 2) {
        throw ShapeError("logreg features must be rank 2, got " + features.shape_str());
    }
    const std::size_t n = features.dim(0);
    const std::size_t d = features.dim(1);
    if (labels.size() != n || n == 0) {
        throw DataError("logreg needs matching non-empty features and labels");
    }
    for (int y : labels) {
        if (y != 0 && y != 1) throw DataError("label outside {0,1}");
    }
    if (!features.all_finite()) {
        throw DataError("logreg features contain non-finite values");
    }
    if (l2 < 0.0) {
        throw DataError("l2 strength must be non-negative");
    }

    const Objective obj{features, labels, l2, n, d};
    LogRegModel model;
    model.weights.assign(d, 0.0);
    model.bias = 0.0;
    model.l2 = l2;

    std::vector<double> gw;
    double gb = 0.0;
    double value = obj.value(model.weights, model.bias);
    double step = 1.0;
    std::vector<double> trial_w(d);

    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        model.iterations = iter;
        const double gnorm = obj.gradient(model.weights, model.bias, gw, gb);
        model.gradient_norm = gnorm;
        if (gnorm < tol) {
            model.converged = true;
            return model;
        }

        // Backtracking (Armijo) with step growth after accepted iterations.
        const double slope = gnorm * gnorm;
        bool accepted = false;
        for (int half = 0; half < 60; ++half) {
            for (std::size_t j = 0; j < d; ++j) trial_w[j] = model.weights[j] - step * gw[j];
            const double trial_b = model.bias - step * gb;
            const double trial_value = obj.value(trial_w, trial_b);
            if (trial_value <= value - 1e-4 * step * slope) {
                model.weights.swap(trial_w);
                model.bias = trial_b;
                value = trial_value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            break; // step underflow: no further descent is representable
        }
        step *= 2.0;
    }

    model.gradient_norm = obj.gradient(model.weights, model.bias, gw, gb);
    model.converged = model.gradient_norm < tol;
    return model;
}

std::vector<double> logreg_predict(const LogRegModel& model, const Volume& features) {
    if (features.rank() != 2 || features.dim(1) != model.weights.size()) {
        throw ShapeError("features " + features.shape_str() + " do not match weight length " +
                         std::to_string(model.weights.size()));
    }
    const std::size_t n = features.dim(0);
    const std::size_t d = model.weights.size();
    std::vector<double> probs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = features.data() + i * d;
        double z = model.bias;
        for (std::size_t j = 0; j < d; ++j) z += model.weights[j] * row[j];
        probs[i] = stable_sigmoid(z);
    }
    return probs;
}

double logreg_objective(const LogRegModel& model, const Volume& features,
                        const std::vector<int>& labels) {
    const Objective obj{features, labels, model.l2, features.dim(0), features.dim(1)};
    return obj.value(model.weights, model.bias);
}

} // namespace volnet
