#pragma once

#include <string>
#include <vector>

#include "volnet/error.hpp"

namespace volnet {

struct SamplePrediction {
    std::string subject_id;
    int label = 0;
    double probability = 0.0;
};

struct SubjectPrediction {
    std::string subject_id;
    int label = 0;
    double probability = 0.0; // mean over the subject's samples
};

/// Subject-level soft voting: the unweighted mean of each subject's sample
/// probabilities. Subjects keep first-appearance order; per-subject sums run
/// over sorted probabilities so the result is exactly order-invariant.
std::vector<SubjectPrediction> soft_vote(const std::vector<SamplePrediction>& samples);

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::size_t total() const { return tp + fp + tn + fn; }
};

ConfusionCounts confusion(const std::vector<SubjectPrediction>& subjects,
                          double threshold = 0.5);

/// F1 = 2*precision*recall / (precision + recall) with positive class y=1
/// and prediction 1 iff p >= threshold. Returns 0 when precision+recall is 0.
double f1_score(const std::vector<SubjectPrediction>& subjects, double threshold = 0.5);
double f1_from_confusion(const ConfusionCounts& counts);

/// Area under the ROC curve as the Mann-Whitney statistic (ties credited
/// 0.5), computed via rank sums. Throws when only one class is present.
double auc_roc(const std::vector<SubjectPrediction>& subjects);
double auc_from_scores(const std::vector<double>& scores, const std::vector<int>& labels);

/// One run's subject-level evaluation.
struct EvalReport {
    double f1 = 0.0;
    double auc = 0.0;
    ConfusionCounts counts;
    bool f1_degenerate = false; // precision+recall was 0

    std::string to_kv_text() const;
    std::string csv_row() const;
    static const char* csv_header();
};

EvalReport evaluate_subjects(const std::vector<SubjectPrediction>& subjects);

/// "mean (std)" with two decimals; std uses the n-1 denominator and is
/// omitted for a single run.
struct MetricSummary {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t n_runs = 0;
    std::string formatted() const;
};

struct RunAggregate {
    MetricSummary f1;
    MetricSummary auc;
};

RunAggregate aggregate_runs(const std::vector<EvalReport>& reports);

} // namespace volnet
