#include "volnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

namespace volnet {

std::vector<SubjectPrediction> soft_vote(const std::vector<SamplePrediction>& samples) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<double>> probs;
    std::map<std::string, int> labels;
    for (const SamplePrediction& s : samples) {
        if (s.probability < 0.0 || s.probability > 1.0) {
            throw DataError("probability outside [0,1] for subject '" + s.subject_id + "'");
        }
        auto [it, inserted] = probs.emplace(s.subject_id, std::vector<double>{});
        if (inserted) {
            order.push_back(s.subject_id);
            labels[s.subject_id] = s.label;
        } else if (labels[s.subject_id] != s.label) {
            throw DataError("conflicting labels for subject '" + s.subject_id + "'");
        }
        it->second.push_back(s.probability);
    }

    std::vector<SubjectPrediction> out;
    out.reserve(order.size());
    for (const std::string& id : order) {
        std::vector<double>& p = probs[id];
        std::sort(p.begin(), p.end()); // order-independent summation
        const double sum = std::accumulate(p.begin(), p.end(), 0.0);
        out.push_back(SubjectPrediction{id, labels[id], sum / static_cast<double>(p.size())});
    }
    return out;
}

ConfusionCounts confusion(const std::vector<SubjectPrediction>& subjects, double threshold) {
    if (subjects.empty()) {
        throw DataError("cannot evaluate an empty prediction set");
    }
    ConfusionCounts c;
    for (const SubjectPrediction& s : subjects) {
        const bool predicted = s.probability >= threshold;
        if (s.label == 1) {
            predicted ? ++c.tp : ++c.fn;
        } else {
            predicted ? ++c.fp : ++c.tn;
        }
    }
    return c;
}

double f1_from_confusion(const ConfusionCounts& c) {
    const double denom_p = static_cast<double>(c.tp + c.fp);
    const double denom_r = static_cast<double>(c.tp + c.fn);
    const double precision = denom_p > 0 ? static_cast<double>(c.tp) / denom_p : 0.0;
    const double recall = denom_r > 0 ? static_cast<double>(c.tp) / denom_r : 0.0;
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

double f1_score(const std::vector<SubjectPrediction>& subjects, double threshold) {
    return f1_from_confusion(confusion(subjects, threshold));
}

double auc_from_scores(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw DataError("AUC needs matching non-empty scores and labels");
    }
    std::size_t n_pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw DataError("label outside {0,1}");
        n_pos += static_cast<std::size_t>(y);
    }
    const std::size_t n = scores.size();
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw DataError("AUC undefined: only one class present");
    }

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Average ranks over tie groups, then the Mann-Whitney rank-sum form.
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j); // ranks are 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (labels[idx[k]] == 1) pos_rank_sum += avg_rank;
        }
        i = j;
    }
    const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) *
                                        static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auc_roc(const std::vector<SubjectPrediction>& subjects) {
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(subjects.size());
    labels.reserve(subjects.size());
    for (const SubjectPrediction& s : subjects) {
        scores.push_back(s.probability);
        labels.push_back(s.label);
    }
    return auc_from_scores(scores, labels);
}

EvalReport evaluate_subjects(const std::vector<SubjectPrediction>& subjects) {
    EvalReport report;
    report.counts = confusion(subjects);
    report.f1 = f1_from_confusion(report.counts);
    report.f1_degenerate = report.counts.tp == 0; // precision+recall is 0 exactly then
    report.auc = auc_roc(subjects);
    return report;
}

namespace {

std::string format_double(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

} // namespace

std::string EvalReport::to_kv_text() const {
    std::string out;
    out += "f1 = " + format_double("%.17g", f1) + "\n";
    out += "auc = " + format_double("%.17g", auc) + "\n";
    out += "tp = " + std::to_string(counts.tp) + "\n";
    out += "fp = " + std::to_string(counts.fp) + "\n";
    out += "tn = " + std::to_string(counts.tn) + "\n";
    out += "fn = " + std::to_string(counts.fn) + "\n";
    out += "f1_degenerate = " + std::string(f1_degenerate ? "1" : "0") + "\n";
    return out;
}

const char* EvalReport::csv_header() { return "f1,auc,tp,fp,tn,fn"; }

std::string EvalReport::csv_row() const {
    return format_double("%.17g", f1) + "," + format_double("%.17g", auc) + "," +
           std::to_string(counts.tp) + "," + std::to_string(counts.fp) + "," +
           std::to_string(counts.tn) + "," + std::to_string(counts.fn);
}

std::string MetricSummary::formatted() const {
    if (n_runs < 2) {
        return format_double("%.2f", mean);
    }
    return format_double("%.2f", mean) + " (" + format_double("%.2f", stddev) + ")";
}

RunAggregate aggregate_runs(const std::vector<EvalReport>& reports) {
    if (reports.empty()) {
        throw DataError("cannot aggregate zero runs");
    }
    auto summarize = [&](auto&& metric) {
        MetricSummary s;
        s.n_runs = reports.size();
        double sum = 0.0;
        for (const EvalReport& r : reports) sum += metric(r);
        s.mean = sum / static_cast<double>(reports.size());
        if (reports.size() >= 2) {
            double sq = 0.0;
            for (const EvalReport& r : reports) {
                const double d = metric(r) - s.mean;
                sq += d * d;
            }
            s.stddev = std::sqrt(sq / static_cast<double>(reports.size() - 1));
        }
        return s;
    };
    RunAggregate agg;
    agg.f1 = summarize([](const EvalReport& r) { return r.f1; });
    agg.auc = summarize([](const EvalReport& r) { return r.auc; });
    return agg;
}

} // namespace volnet
