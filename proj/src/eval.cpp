#include "scenevec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <random>
#include <thread>

#include "scenevec/errors.hpp"

namespace scenevec {

std::vector<MaskingInstance> make_instances(const std::vector<SceneSentence>& sentences) {
    std::vector<MaskingInstance> instances;
    for (const auto& sentence : sentences) {
        const std::size_t m = sentence.tokens.size();
        if (m < 2) continue;
        for (std::size_t masked = 0; masked < m; ++masked) {
            MaskingInstance instance;
            instance.image_id = sentence.image_id;
            instance.answer = sentence.tokens[masked];
            instance.visible.reserve(m - 1);
            for (std::size_t p = 0; p < m; ++p) {
                if (p != masked) instance.visible.push_back(sentence.tokens[p]);
            }
            instances.push_back(std::move(instance));
        }
    }
    return instances;
}

std::vector<ScoredClass> score_classes(const EmbeddingStore& store,
                                       const std::vector<int>& visible) {
    if (visible.empty()) throw DataError("masking instance has no visible labels");

    Eigen::VectorXd direction = Eigen::VectorXd::Zero(store.dim());
    for (int id : visible) {
        if (id < 0 || id >= store.size()) {
            throw DataError("visible label id " + std::to_string(id) +
                            " outside embedding store of size " + std::to_string(store.size()));
        }
        if (store.norm(id) == 0.0) {
            throw DataError("visible label '" + store.label(id) + "' has a zero vector");
        }
        direction += store.vector(id).transpose() / store.norm(id);
    }

    // score_i = sum_j cos(b_j, c_i) = c_i . direction / |c_i|
    Eigen::VectorXd raw = store.vectors() * direction;
    std::vector<ScoredClass> ranked(store.size());
    for (int id = 0; id < store.size(); ++id) {
        ranked[id].id = id;
        ranked[id].score = store.norm(id) == 0.0 ? -std::numeric_limits<double>::infinity()
                                                 : raw(id) / store.norm(id);
    }
    std::sort(ranked.begin(), ranked.end(), [](const ScoredClass& a, const ScoredClass& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    return ranked;
}

namespace {

int rank_of_answer(const std::vector<ScoredClass>& ranked, int answer) {
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        if (ranked[r].id == answer) return static_cast<int>(r) + 1;
    }
    return static_cast<int>(ranked.size()) + 1;
}

}  // namespace

MaskingReport evaluate(const EmbeddingStore& store, const std::vector<SceneSentence>& sentences,
                       const std::vector<int>& ks, int threads, std::ostream* dump) {
    if (ks.empty()) throw ConfigError("at least one k is required");
    if (!std::is_sorted(ks.begin(), ks.end())) throw ConfigError("ks must be sorted ascending");
    if (ks.front() < 1) throw ConfigError("every k must be >= 1");

    const auto instances = make_instances(sentences);

    MaskingReport report;
    report.ks = ks;
    report.instances = instances.size();
    report.accuracy.assign(ks.size(), 0.0);
    if (instances.empty()) {
        report.defined = false;
        return report;
    }
    report.defined = true;

    std::vector<int> ranks(instances.size(), 0);
    threads = std::max(1, threads);
    if (threads == 1 || instances.size() < 2) {
        for (std::size_t n = 0; n < instances.size(); ++n) {
            ranks[n] = rank_of_answer(score_classes(store, instances[n].visible),
                                      instances[n].answer);
        }
    } else {
        const std::size_t workers = std::min<std::size_t>(threads, instances.size());
        std::vector<std::exception_ptr> failures(workers);
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t n = w; n < instances.size(); n += workers) {
                        ranks[n] = rank_of_answer(score_classes(store, instances[n].visible),
                                                  instances[n].answer);
                    }
                } catch (...) {
                    failures[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (const auto& failure : failures) {
            if (failure) std::rethrow_exception(failure);
        }
    }

    std::vector<std::uint64_t> hits(ks.size(), 0);
    std::map<int, std::pair<std::uint64_t, std::vector<std::uint64_t>>> per_class;
    for (std::size_t n = 0; n < instances.size(); ++n) {
        auto& entry = per_class[instances[n].answer];
        if (entry.second.empty()) entry.second.assign(ks.size(), 0);
        ++entry.first;
        for (std::size_t i = 0; i < ks.size(); ++i) {
            if (ranks[n] <= ks[i]) {
                ++hits[i];
                ++entry.second[i];
            }
        }
        if (dump) {
            *dump << instances[n].image_id << '\t' << instances[n].answer << '\t' << ranks[n]
                  << '\n';
        }
    }

    for (std::size_t i = 0; i < ks.size(); ++i) {
        report.accuracy[i] = 100.0 * static_cast<double>(hits[i]) / instances.size();
    }
    for (const auto& [class_id, entry] : per_class) {
        MaskingReport::ClassBreakdown breakdown;
        breakdown.class_id = class_id;
        breakdown.instances = entry.first;
        breakdown.accuracy.reserve(ks.size());
        for (std::size_t i = 0; i < ks.size(); ++i) {
            breakdown.accuracy.push_back(100.0 * static_cast<double>(entry.second[i]) /
                                         entry.first);
        }
        report.per_class.push_back(std::move(breakdown));
    }
    return report;
}

std::vector<double> random_baseline(int vocab_size, const std::vector<int>& ks) {
    if (vocab_size < 1) throw ConfigError("vocabulary size must be >= 1");
    std::vector<double> baseline;
    baseline.reserve(ks.size());
    for (int k : ks) {
        if (k < 1 || k > vocab_size) {
            throw ConfigError("k = " + std::to_string(k) + " outside [1, V = " +
                              std::to_string(vocab_size) + "]");
        }
        baseline.push_back(100.0 * k / vocab_size);
    }
    return baseline;
}

void print_report(std::ostream& out, const MaskingReport& report,
                  const std::vector<std::string>* labels) {
    char buffer[128];
    out << "instances: " << report.instances << '\n';
    if (!report.defined) {
        out << "no multi-box images; accuracies are undefined\n";
        return;
    }
    for (std::size_t i = 0; i < report.ks.size(); ++i) {
        std::snprintf(buffer, sizeof(buffer), "acc@%-3d %8.2f\n", report.ks[i],
                      report.accuracy[i]);
        out << buffer;
    }
    if (!report.per_class.empty()) {
        out << "per-class breakdown (instances, acc@k...):\n";
        for (const auto& breakdown : report.per_class) {
            std::string name = labels && breakdown.class_id < static_cast<int>(labels->size())
                                   ? (*labels)[breakdown.class_id]
                                   : std::to_string(breakdown.class_id);
            out << "  " << name << '\t' << breakdown.instances;
            for (double acc : breakdown.accuracy) {
                std::snprintf(buffer, sizeof(buffer), "\t%.2f", acc);
                out << buffer;
            }
            out << '\n';
        }
    }
}

void write_report_jsonl(std::ostream& out, const MaskingReport& report) {
    char buffer[160];
    for (std::size_t i = 0; i < report.ks.size(); ++i) {
        if (report.defined) {
            std::snprintf(buffer, sizeof(buffer), "{\"k\":%d,\"accuracy\":%.17g,\"count\":%llu}\n",
                          report.ks[i], report.accuracy[i],
                          static_cast<unsigned long long>(report.instances));
        } else {
            std::snprintf(buffer, sizeof(buffer), "{\"k\":%d,\"accuracy\":null,\"count\":0}\n",
                          report.ks[i]);
        }
        out << buffer;
    }
}

SyntheticCorpus generate_synthetic_corpus(int n_scenes, const ClusterSpec& spec,
                                          std::uint64_t seed) {
    if (n_scenes < 0) throw ConfigError("scene count must be >= 0");
    if (spec.groups.empty()) throw ConfigError("cluster spec needs at least one group");
    if (spec.within_rate < 0 || spec.within_rate > 1 || spec.between_rate < 0 ||
        spec.between_rate > 1) {
        throw ConfigError("cluster rates must lie in [0, 1]");
    }
    if (spec.focus_copies < 1) throw ConfigError("focus_copies must be >= 1");

    SyntheticCorpus corpus;
    for (std::size_t g = 0; g < spec.groups.size(); ++g) {
        if (spec.groups[g].empty()) throw ConfigError("cluster group is empty");
        for (const auto& label : spec.groups[g]) {
            auto [it, inserted] = corpus.group_of.emplace(label, static_cast<int>(g));
            if (!inserted) throw ConfigError("label '" + label + "' appears in two groups");
        }
    }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_group(0, spec.groups.size() - 1);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    corpus.scenes.reserve(n_scenes);
    for (int s = 0; s < n_scenes; ++s) {
        const std::size_t primary = pick_group(rng);
        const auto& group = spec.groups[primary];
        std::uniform_int_distribution<std::size_t> pick_focus(0, group.size() - 1);
        const std::size_t focus = pick_focus(rng);

        std::vector<std::string> scene;
        for (int c = 0; c < spec.focus_copies; ++c) scene.push_back(group[focus]);
        for (std::size_t member = 0; member < group.size(); ++member) {
            if (member == focus) continue;
            if (coin(rng) < spec.within_rate) scene.push_back(group[member]);
        }
        for (std::size_t g = 0; g < spec.groups.size(); ++g) {
            if (g == primary) continue;
            for (const auto& label : spec.groups[g]) {
                if (coin(rng) < spec.between_rate) scene.push_back(label);
            }
        }
        std::shuffle(scene.begin(), scene.end(), rng);
        corpus.scenes.push_back(std::move(scene));
    }
    return corpus;
}

}  // namespace scenevec
