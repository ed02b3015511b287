#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "scenevec/corpus.hpp"
#include "scenevec/embedding.hpp"

namespace scenevec {

/// One masking test sample: a multi-box image with one position hidden.
struct MaskingInstance {
    std::string image_id;
    std::vector<int> visible;  // the other m-1 tokens, duplicates preserved
    int answer = 0;
};

/// Emits m instances per sentence of length m >= 2, one per masked
/// position; single-token sentences yield none.
std::vector<MaskingInstance> make_instances(const std::vector<SceneSentence>& sentences);

struct ScoredClass {
    int id = 0;
    double score = 0;
};

/// Ranks every class by the summed cosine similarity between its vector
/// and each visible label's vector, descending, ties by class id.
/// Zero-norm classes sink to the bottom; a zero-norm visible label is a
/// DataError, as is an empty visible set.
std::vector<ScoredClass> score_classes(const EmbeddingStore& store,
                                       const std::vector<int>& visible);

struct MaskingReport {
    std::uint64_t instances = 0;
    std::vector<int> ks;
    std::vector<double> accuracy;  // percentage per k; meaningful only when defined
    bool defined = false;          // false when there were no instances

    struct ClassBreakdown {
        int class_id = 0;
        std::uint64_t instances = 0;
        std::vector<double> accuracy;
    };
    std::vector<ClassBreakdown> per_class;
};

/// Runs the masking evaluation over preprocessed sentences. ks must be
/// sorted ascending. When dump is given, writes one
/// `image_id<TAB>answer<TAB>rank_of_answer` line per instance.
MaskingReport evaluate(const EmbeddingStore& store, const std::vector<SceneSentence>& sentences,
                       const std::vector<int>& ks = {1, 5, 10}, int threads = 1,
                       std::ostream* dump = nullptr);

/// Expected accuracy of uniform random guessing: 100 * k / V per k.
std::vector<double> random_baseline(int vocab_size, const std::vector<int>& ks);

void print_report(std::ostream& out, const MaskingReport& report,
                  const std::vector<std::string>* labels = nullptr);
void write_report_jsonl(std::ostream& out, const MaskingReport& report);

/// Disjoint label groups with scene generation rates. Each scene draws
/// a primary group and a focus label inside it; the focus repeats
/// `focus_copies` times (detection scenes routinely repeat a class),
/// other group members appear with probability within_rate and foreign
/// labels with probability between_rate. Token order is shuffled.
struct ClusterSpec {
    std::vector<std::vector<std::string>> groups;
    double within_rate = 0.7;
    double between_rate = 0.05;
    int focus_copies = 4;
};

struct SyntheticCorpus {
    std::vector<std::vector<std::string>> scenes;
    std::unordered_map<std::string, int> group_of;
};

/// Seeded, reproducible clustered corpus. Throws ConfigError when the
/// groups overlap or a rate is outside [0, 1].
SyntheticCorpus generate_synthetic_corpus(int n_scenes, const ClusterSpec& spec,
                                          std::uint64_t seed);

}  // namespace scenevec
