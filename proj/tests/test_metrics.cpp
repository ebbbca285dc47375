#include <doctest.h>

#include "oracles.hpp"
#include "volnet/metrics.hpp"
#include "volnet/rng.hpp"

using namespace volnet;

TEST_CASE("soft voting averages per subject") {
    std::vector<SamplePrediction> samples{
        {"a", 1, 0.2}, {"a", 1, 0.4}, {"a", 1, 0.9}, {"b", 0, 0.3}};
    const auto subjects = soft_vote(samples);
    REQUIRE(subjects.size() == 2);
    CHECK(subjects[0].subject_id == "a");
    CHECK(subjects[0].probability == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(subjects[1].subject_id == "b");
    CHECK(subjects[1].probability == 0.3); // single sample is unchanged
}

TEST_CASE("soft voting is exactly order-invariant") {
    Rng rng(1);
    std::vector<SamplePrediction> samples;
    for (int i = 0; i < 40; ++i) {
        samples.push_back({"s" + std::to_string(i % 5), (i % 5) % 2, rng.uniform01()});
    }
    auto base = soft_vote(samples);
    std::vector<SamplePrediction> shuffled = samples;
    Rng shuffle_rng(2);
    shuffle_rng.shuffle(shuffled);
    auto permuted = soft_vote(shuffled);

    for (const auto& s : base) {
        bool found = false;
        for (const auto& p : permuted) {
            if (p.subject_id == s.subject_id) {
                CHECK(p.probability == s.probability); // bitwise equal
                found = true;
            }
        }
        CHECK(found);
    }
}

TEST_CASE("soft voting rejects inconsistent input") {
    CHECK_THROWS_AS(soft_vote({{"a", 1, 1.5}}), DataError);
    CHECK_THROWS_AS(soft_vote({{"a", 1, 0.5}, {"a", 0, 0.5}}), DataError);
}

TEST_CASE("f1 score follows the precision/recall formula") {
    SUBCASE("perfect predictions give 1.0") {
        std::vector<SubjectPrediction> subjects{
            {"a", 1, 0.9}, {"b", 0, 0.1}, {"c", 1, 0.8}};
        CHECK(f1_score(subjects) == 1.0);
    }
    SUBCASE("precision 0.8 and recall 0.9 give 0.8471") {
        // tp=36, fp=9, fn=4: precision 36/45 = 0.8, recall 36/40 = 0.9.
        ConfusionCounts c{36, 9, 0, 4};
        CHECK(f1_from_confusion(c) ==
              doctest::Approx(2.0 * 0.8 * 0.9 / (0.8 + 0.9)).epsilon(1e-12));
        CHECK(f1_from_confusion(c) == doctest::Approx(0.8470588).epsilon(1e-6));
    }
    SUBCASE("all-negative predictions with real positives give 0") {
        std::vector<SubjectPrediction> subjects{
            {"a", 1, 0.1}, {"b", 1, 0.2}, {"c", 0, 0.3}};
        CHECK(f1_score(subjects) == 0.0);
        const EvalReport report = evaluate_subjects(subjects);
        CHECK(report.f1_degenerate);
    }
    SUBCASE("p exactly at the threshold classifies as positive") {
        std::vector<SubjectPrediction> subjects{{"a", 1, 0.5}, {"b", 0, 0.4999}};
        const ConfusionCounts c = confusion(subjects);
        CHECK(c.tp == 1);
        CHECK(c.tn == 1);
    }
    SUBCASE("empty prediction sets are rejected") {
        CHECK_THROWS_AS(f1_score({}), DataError);
    }
}

TEST_CASE("auc matches hand-computed examples") {
    SUBCASE("perfect separation gives 1.0") {
        std::vector<SubjectPrediction> subjects{
            {"a", 1, 0.9}, {"b", 1, 0.8}, {"c", 0, 0.2}, {"d", 0, 0.1}};
        CHECK(auc_roc(subjects) == 1.0);
    }
    SUBCASE("all-tied scores give exactly 0.5") {
        std::vector<SubjectPrediction> subjects{
            {"a", 1, 0.7}, {"b", 0, 0.7}, {"c", 1, 0.7}, {"d", 0, 0.7}};
        CHECK(auc_roc(subjects) == 0.5);
    }
    SUBCASE("pos {0.9, 0.4} vs neg {0.5, 0.1} gives 0.75") {
        std::vector<SubjectPrediction> subjects{
            {"a", 1, 0.9}, {"b", 1, 0.4}, {"c", 0, 0.5}, {"d", 0, 0.1}};
        CHECK(auc_roc(subjects) == 0.75);
    }
    SUBCASE("single-class input is an error") {
        std::vector<SubjectPrediction> subjects{{"a", 1, 0.9}, {"b", 1, 0.4}};
        CHECK_THROWS_WITH_AS(auc_roc(subjects), doctest::Contains("one class"), DataError);
    }
}

TEST_CASE("rank-based auc equals brute-force pair counting") {
    Rng rng(3);
    for (int iter = 0; iter < 60; ++iter) {
        const std::size_t n = 2 + rng.below(199);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse grid so ties actually occur.
            scores[i] = std::floor(rng.uniform01() * 8.0) / 8.0;
            labels[i] = static_cast<int>(rng.below(2));
            (labels[i] == 1 ? has_pos : has_neg) = true;
        }
        if (!has_pos || !has_neg) continue;
        const double fast = auc_from_scores(scores, labels);
        const double slow = oracle::auc_pairs_bruteforce(scores, labels);
        CHECK(std::abs(fast - slow) <= 1e-12);
    }
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
    Rng rng(4);
    std::vector<double> scores(50);
    std::vector<int> labels(50);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = rng.uniform01();
        labels[i] = static_cast<int>(rng.below(2));
    }
    labels[0] = 1;
    labels[1] = 0;
    const double base = auc_from_scores(scores, labels);
    std::vector<double> transformed = scores;
    for (double& s : transformed) s = std::exp(3.0 * s) + 7.0;
    CHECK(auc_from_scores(transformed, labels) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("run aggregation formats mean (std) with the n-1 denominator") {
    std::vector<EvalReport> runs(2);
    runs[0].f1 = 0.8;
    runs[0].auc = 0.8;
    runs[1].f1 = 0.9;
    runs[1].auc = 0.9;
    const RunAggregate agg = aggregate_runs(runs);
    CHECK(agg.f1.formatted() == "0.85 (0.07)");
    CHECK(agg.f1.mean == doctest::Approx(0.85).epsilon(1e-15));
    CHECK(agg.f1.stddev == doctest::Approx(0.0707106781).epsilon(1e-8));

    SUBCASE("identical runs give zero std") {
        runs[1] = runs[0];
        const RunAggregate same = aggregate_runs(runs);
        CHECK(same.f1.formatted() == "0.80 (0.00)");
    }
    SUBCASE("a single run omits the std") {
        runs.resize(1);
        const RunAggregate one = aggregate_runs(runs);
        CHECK(one.f1.formatted() == "0.80");
    }
    SUBCASE("aggregation is order-invariant") {
        std::vector<EvalReport> reversed{runs[1], runs[0]};
        const RunAggregate rev = aggregate_runs(reversed);
        CHECK(rev.f1.mean == agg.f1.mean);
        CHECK(rev.f1.stddev == agg.f1.stddev);
    }
}

TEST_CASE("soft vote then threshold equals thresholding subject means") {
    Rng rng(5);
    std::vector<SamplePrediction> samples;
    for (int i = 0; i < 30; ++i) {
        samples.push_back({"s" + std::to_string(i % 6), (i % 6) % 2, rng.uniform01()});
    }
    const auto subjects = soft_vote(samples);
    const ConfusionCounts c = confusion(subjects, 0.5);
    std::size_t positives = 0;
    for (const auto& s : subjects) positives += s.probability >= 0.5;
    CHECK(positives == c.tp + c.fp);
}
