#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "scenevec/eval.hpp"

using namespace scenevec;

namespace {

EmbeddingStore orthonormal_store(int size) {
    Eigen::MatrixXd matrix = Eigen::MatrixXd::Identity(size, size);
    std::vector<std::string> labels;
    for (int r = 0; r < size; ++r) labels.push_back("L" + std::to_string(r));
    return EmbeddingStore(labels, matrix);
}

}  // namespace

TEST_CASE("make_instances masks every position once") {
    std::vector<SceneSentence> sentences = {{"img", {0, 1, 2}}};
    auto instances = make_instances(sentences);
    REQUIRE(instances.size() == 3);
    CHECK(instances[0].answer == 0);
    CHECK(instances[0].visible == std::vector<int>{1, 2});
    CHECK(instances[1].answer == 1);
    CHECK(instances[1].visible == std::vector<int>{0, 2});
    CHECK(instances[2].answer == 2);
    CHECK(instances[2].visible == std::vector<int>{0, 1});
}

TEST_CASE("single-box sentences yield no instances") {
    std::vector<SceneSentence> sentences = {{"img", {0}}, {"other", {}}};
    CHECK(make_instances(sentences).empty());
}

TEST_CASE("duplicate tokens keep the answer among the visible labels") {
    std::vector<SceneSentence> sentences = {{"img", {4, 4}}};
    auto instances = make_instances(sentences);
    REQUIRE(instances.size() == 2);
    for (const auto& instance : instances) {
        CHECK(instance.answer == 4);
        CHECK(instance.visible == std::vector<int>{4});
    }
}

TEST_CASE("score_classes scores the orthonormal case exactly") {
    auto store = orthonormal_store(4);
    auto ranked = score_classes(store, {1});
    REQUIRE(ranked.size() == 4);
    CHECK(ranked[0].id == 1);
    CHECK(ranked[0].score == doctest::Approx(1.0).epsilon(1e-15));
    for (std::size_t r = 1; r < 4; ++r) CHECK(ranked[r].score == doctest::Approx(0.0));
}

TEST_CASE("a class aligned with the visible blend outranks unrelated ones") {
    // c_A = (b_B + b_C) normalized; D points away
    Eigen::MatrixXd matrix(4, 2);
    matrix.row(0) << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);  // A
    matrix.row(1) << 1.0, 0.0;                                    // B
    matrix.row(2) << 0.0, 1.0;                                    // C
    matrix.row(3) << -1.0, 0.0;                                   // D
    EmbeddingStore store({"A", "B", "C", "D"}, matrix);

    auto ranked = score_classes(store, {1, 2});
    REQUIRE(ranked.size() == 4);
    CHECK(ranked[0].id == 0);
    CHECK(ranked[0].score == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(ranked[1].score == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ranked[3].id == 3);
    CHECK(ranked[3].score == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("equal scores rank by class id") {
    Eigen::MatrixXd matrix(3, 2);
    matrix.row(0) << 0.5, 0.5;
    matrix.row(1) << 0.5, 0.5;
    matrix.row(2) << 0.5, 0.5;
    EmbeddingStore store({"A", "B", "C"}, matrix);
    auto ranked = score_classes(store, {2});
    CHECK(ranked[0].id == 0);
    CHECK(ranked[1].id == 1);
    CHECK(ranked[2].id == 2);
}

TEST_CASE("score_classes validates its inputs") {
    auto store = orthonormal_store(3);
    CHECK_THROWS_AS(score_classes(store, {}), DataError);
    CHECK_THROWS_AS(score_classes(store, {7}), DataError);

    Eigen::MatrixXd matrix(2, 2);
    matrix.row(0) << 1.0, 0.0;
    matrix.row(1) << 0.0, 0.0;
    EmbeddingStore with_zero({"A", "Z"}, matrix);
    CHECK_THROWS_AS(score_classes(with_zero, {1}), DataError);
}

TEST_CASE("zero-norm candidates sink to the bottom") {
    Eigen::MatrixXd matrix(3, 2);
    matrix.row(0) << 1.0, 0.0;
    matrix.row(1) << 0.0, 0.0;  // zero vector
    matrix.row(2) << 0.9, 0.1;
    EmbeddingStore store({"A", "Z", "B"}, matrix);
    auto ranked = score_classes(store, {0});
    CHECK(ranked.back().id == 1);
    CHECK(std::isinf(ranked.back().score));
}

TEST_CASE("score_classes returns a permutation of all classes") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd matrix(12, 5);
    std::vector<std::string> labels;
    for (int r = 0; r < 12; ++r) {
        labels.push_back("L" + std::to_string(r));
        for (int c = 0; c < 5; ++c) matrix(r, c) = gauss(rng);
    }
    EmbeddingStore store(labels, matrix);
    auto ranked = score_classes(store, {3, 7, 7});
    std::vector<int> ids;
    for (const auto& entry : ranked) ids.push_back(entry.id);
    std::sort(ids.begin(), ids.end());
    for (int id = 0; id < 12; ++id) CHECK(ids[id] == id);
}

TEST_CASE("evaluate reports 100 when the answer always ranks first") {
    auto store = orthonormal_store(4);
    std::vector<SceneSentence> sentences = {{"a", {0, 0}}, {"b", {1, 1}}, {"c", {2, 2, 2}}};
    auto report = evaluate(store, sentences, {1, 2, 4});
    CHECK(report.defined);
    CHECK(report.instances == 7);
    for (double accuracy : report.accuracy) CHECK(accuracy == 100.0);
}

TEST_CASE("evaluate flags a zero-instance corpus instead of reporting zeros") {
    auto store = orthonormal_store(3);
    std::vector<SceneSentence> sentences = {{"a", {0}}, {"b", {2}}};
    auto report = evaluate(store, sentences, {1, 2});
    CHECK_FALSE(report.defined);
    CHECK(report.instances == 0);

    std::ostringstream jsonl;
    write_report_jsonl(jsonl, report);
    CHECK(jsonl.str().find("\"accuracy\":null") != std::string::npos);
}

TEST_CASE("accuracy never decreases in k") {
    auto store = orthonormal_store(5);
    std::vector<SceneSentence> sentences = {{"a", {0, 1}}, {"b", {1, 2, 3}}, {"c", {4, 0, 2}}};
    auto report = evaluate(store, sentences, {1, 2, 3, 4, 5});
    REQUIRE(report.defined);
    for (std::size_t i = 1; i < report.accuracy.size(); ++i) {
        CHECK(report.accuracy[i] >= report.accuracy[i - 1]);
    }
    CHECK(report.accuracy.back() == 100.0);  // k = V always hits
}

TEST_CASE("evaluate validates ks and produces per-instance dumps") {
    auto store = orthonormal_store(3);
    std::vector<SceneSentence> sentences = {{"a", {0, 1}}};
    CHECK_THROWS_AS(evaluate(store, sentences, {}), ConfigError);
    CHECK_THROWS_AS(evaluate(store, sentences, {5, 1}), ConfigError);
    CHECK_THROWS_AS(evaluate(store, sentences, {0, 1}), ConfigError);

    std::ostringstream dump;
    auto report = evaluate(store, sentences, {1}, 1, &dump);
    CHECK(report.instances == 2);
    CHECK(dump.str().find("a\t0\t") != std::string::npos);
    CHECK(dump.str().find("a\t1\t") != std::string::npos);
}

TEST_CASE("threaded evaluation matches single-threaded") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd matrix(10, 6);
    std::vector<std::string> labels;
    for (int r = 0; r < 10; ++r) {
        labels.push_back("L" + std::to_string(r));
        for (int c = 0; c < 6; ++c) matrix(r, c) = gauss(rng);
    }
    EmbeddingStore store(labels, matrix);

    std::uniform_int_distribution<int> token(0, 9);
    std::vector<SceneSentence> sentences;
    for (int s = 0; s < 50; ++s) {
        SceneSentence sentence{"img" + std::to_string(s), {}};
        for (int t = 0; t < 4; ++t) sentence.tokens.push_back(token(rng));
        sentences.push_back(std::move(sentence));
    }

    auto sequential = evaluate(store, sentences, {1, 3, 5}, 1);
    auto threaded = evaluate(store, sentences, {1, 3, 5}, 4);
    CHECK(sequential.accuracy == threaded.accuracy);
    CHECK(sequential.instances == threaded.instances);
}

TEST_CASE("random_baseline is 100k/V") {
    auto baseline = random_baseline(596, {1, 5, 10});
    CHECK(baseline[0] == doctest::Approx(0.16778523489932887).epsilon(1e-15));
    CHECK(baseline[1] == doctest::Approx(0.8389261744966443).epsilon(1e-15));
    CHECK(baseline[2] == doctest::Approx(1.6778523489932886).epsilon(1e-15));

    CHECK(random_baseline(10, {10})[0] == 100.0);
    CHECK_THROWS_AS(random_baseline(5, {10}), ConfigError);
}

TEST_CASE("a random store guesses at the baseline rate") {
    const int vocab_size = 100;
    std::mt19937_64 rng(920);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd matrix(vocab_size, 20);
    std::vector<std::string> labels;
    for (int r = 0; r < vocab_size; ++r) {
        labels.push_back("L" + std::to_string(r));
        for (int c = 0; c < 20; ++c) matrix(r, c) = gauss(rng);
    }
    EmbeddingStore store(labels, matrix);

    // answers drawn independently of the ranking hit the top-k with
    // probability exactly k/V; 20k draws stay within 3 standard errors
    const int n_instances = 20000;
    std::uniform_int_distribution<int> any(0, vocab_size - 1);
    std::vector<int> ks = {1, 5, 10};
    std::vector<int> hits(ks.size(), 0);
    for (int n = 0; n < n_instances; ++n) {
        std::vector<int> visible = {any(rng), any(rng), any(rng)};
        const int answer = any(rng);
        auto ranked = score_classes(store, visible);
        for (std::size_t i = 0; i < ks.size(); ++i) {
            for (int r = 0; r < ks[i]; ++r) {
                if (ranked[r].id == answer) {
                    ++hits[i];
                    break;
                }
            }
        }
    }
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const double p = static_cast<double>(ks[i]) / vocab_size;
        const double expected = 100.0 * p;
        const double sigma = 100.0 * std::sqrt(p * (1 - p) / n_instances);
        const double observed = 100.0 * hits[i] / n_instances;
        CHECK(std::fabs(observed - expected) <= 3.0 * sigma);
    }
}

TEST_CASE("synthetic corpus keeps clusters together") {
    ClusterSpec spec;
    spec.groups = {{"a0", "a1", "a2", "a3", "a4"},
                   {"b0", "b1", "b2", "b3", "b4"},
                   {"c0", "c1", "c2", "c3", "c4"}};
    auto corpus = generate_synthetic_corpus(10000, spec, 7);
    REQUIRE(corpus.scenes.size() == 10000);
    CHECK(corpus.group_of.at("a0") == 0);
    CHECK(corpus.group_of.at("c4") == 2);

    // empirical unordered pair rates per scene
    std::unordered_map<std::string, std::unordered_map<std::string, double>> pair_count;
    for (const auto& scene : corpus.scenes) {
        std::vector<std::string> unique = scene;
        std::sort(unique.begin(), unique.end());
        unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
        for (std::size_t a = 0; a < unique.size(); ++a) {
            for (std::size_t b = a + 1; b < unique.size(); ++b) {
                pair_count[unique[a]][unique[b]] += 1.0;
                pair_count[unique[b]][unique[a]] += 1.0;
            }
        }
    }
    for (const auto& [label, group] : corpus.group_of) {
        double within = 0.0, cross = 0.0;
        int within_pairs = 0, cross_pairs = 0;
        for (const auto& [other, other_group] : corpus.group_of) {
            if (other == label) continue;
            const double count = pair_count[label][other];
            if (other_group == group) {
                within += count;
                ++within_pairs;
            } else {
                cross += count;
                ++cross_pairs;
            }
        }
        CHECK(within / within_pairs > cross / cross_pairs);
    }
}

TEST_CASE("synthetic corpus generation is seeded") {
    ClusterSpec spec;
    spec.groups = {{"x", "y"}, {"u", "v"}};
    auto first = generate_synthetic_corpus(200, spec, 42);
    auto second = generate_synthetic_corpus(200, spec, 42);
    auto different = generate_synthetic_corpus(200, spec, 43);
    CHECK(first.scenes == second.scenes);
    CHECK(first.scenes != different.scenes);

    CHECK(generate_synthetic_corpus(0, spec, 1).scenes.empty());
}

TEST_CASE("overlapping cluster groups are rejected") {
    ClusterSpec spec;
    spec.groups = {{"a", "b"}, {"b", "c"}};
    CHECK_THROWS_AS(generate_synthetic_corpus(10, spec, 1), ConfigError);

    ClusterSpec bad_rate;
    bad_rate.groups = {{"a"}, {"b"}};
    bad_rate.within_rate = 1.5;
    CHECK_THROWS_AS(generate_synthetic_corpus(10, bad_rate, 1), ConfigError);
}
