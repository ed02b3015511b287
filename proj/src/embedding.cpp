#include "scenevec/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <random>

namespace scenevec {

EmbeddingStore::EmbeddingStore(std::vector<std::string> labels, Eigen::MatrixXd vectors)
    : labels_(std::move(labels)), vectors_(std::move(vectors)) {
    if (static_cast<Eigen::Index>(labels_.size()) != vectors_.rows()) {
        throw DataError("label count does not match vector rows");
    }
    norms_ = vectors_.rowwise().norm();
    ids_.reserve(labels_.size());
    for (std::size_t r = 0; r < labels_.size(); ++r) {
        ids_.emplace(labels_[r], static_cast<int>(r));
    }
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
    auto loaded = load_vectors(path);
    return EmbeddingStore(std::move(loaded.labels), std::move(loaded.vectors));
}

int EmbeddingStore::id_of(std::string_view label) const {
    auto it = ids_.find(std::string(label));
    return it == ids_.end() ? -1 : it->second;
}

namespace {

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diagonal = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t insert_or_delete = std::min(row[j], row[j - 1]) + 1;
            const std::size_t substitute =
                diagonal + (std::tolower(static_cast<unsigned char>(a[i - 1])) ==
                                    std::tolower(static_cast<unsigned char>(b[j - 1]))
                                ? 0
                                : 1);
            diagonal = row[j];
            row[j] = std::min(insert_or_delete, substitute);
        }
    }
    return row[b.size()];
}

}  // namespace

int EmbeddingStore::require_id(const std::string& label) const {
    int id = id_of(label);
    if (id >= 0) return id;

    std::vector<std::pair<std::size_t, std::string>> ranked;
    ranked.reserve(labels_.size());
    for (const auto& candidate : labels_) {
        ranked.emplace_back(edit_distance(label, candidate), candidate);
    }
    std::sort(ranked.begin(), ranked.end());
    std::string message = "unknown label '" + label + "'";
    if (!ranked.empty()) {
        message += "; closest matches:";
        for (std::size_t r = 0; r < std::min<std::size_t>(3, ranked.size()); ++r) {
            message += (r ? ", " : " ") + ranked[r].second;
        }
    }
    throw DataError(message);
}

void EmbeddingStore::attach_counts(const Vocabulary& vocab) {
    counts_.assign(labels_.size(), 0);
    for (std::size_t r = 0; r < labels_.size(); ++r) {
        int id = vocab.id_of(labels_[r]);
        if (id < 0) throw DataError("vocabulary has no count for label '" + labels_[r] + "'");
        counts_[r] = vocab.count(id);
    }
}

NeighborList nearest_neighbors(const EmbeddingStore& store, const std::string& label, int k,
                               std::int64_t min_count) {
    if (k < 0) throw ConfigError("k must be >= 0");
    if (min_count > 0 && !store.has_counts()) {
        throw ConfigError("count filter requested but the store has no counts attached");
    }
    const int query = store.require_id(label);
    if (store.norm(query) == 0.0) {
        throw DataError("label '" + label + "' has a zero vector");
    }

    const Eigen::VectorXd unit = store.vector(query).transpose() / store.norm(query);
    std::vector<std::pair<double, int>> candidates;
    candidates.reserve(store.size());
    for (int id = 0; id < store.size(); ++id) {
        if (id == query) continue;
        if (store.label(id) == label) continue;
        if (store.norm(id) == 0.0) continue;
        if (min_count > 0 && store.count(id) < min_count) continue;
        const double distance = 1.0 - store.vector(id).dot(unit) / store.norm(id);
        candidates.emplace_back(distance, id);
    }
    const std::size_t keep = std::min<std::size_t>(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + keep, candidates.end());

    NeighborList result;
    result.query = label;
    result.neighbors.reserve(keep);
    for (std::size_t r = 0; r < keep; ++r) {
        result.neighbors.push_back({store.label(candidates[r].second), candidates[r].first});
    }
    return result;
}

AxisProjection project_axis(const EmbeddingStore& store, const std::string& anchor_a,
                            const std::string& anchor_b, const std::vector<std::string>& labels) {
    if (anchor_a == anchor_b) throw DataError("projection anchors must be distinct");
    const int a = store.require_id(anchor_a);
    const int b = store.require_id(anchor_b);
    Eigen::VectorXd axis = (store.vector(b) - store.vector(a)).transpose();
    const double norm = axis.norm();
    if (norm == 0.0) throw DataError("projection axis is the zero vector");
    axis /= norm;

    AxisProjection projection;
    projection.anchor_a = anchor_a;
    projection.anchor_b = anchor_b;
    if (labels.empty()) {
        projection.coordinates.reserve(store.size());
        for (int id = 0; id < store.size(); ++id) {
            projection.coordinates.emplace_back(store.label(id), store.vector(id).dot(axis));
        }
    } else {
        projection.coordinates.reserve(labels.size());
        for (const auto& label : labels) {
            const int id = store.require_id(label);
            projection.coordinates.emplace_back(label, store.vector(id).dot(axis));
        }
    }
    return projection;
}

EigenPairs top_eigenpairs(const Eigen::MatrixXd& symmetric, int count, double tolerance,
                          int max_iterations) {
    const Eigen::Index n = symmetric.rows();
    if (symmetric.cols() != n) throw DataError("matrix must be square");
    count = static_cast<int>(std::min<Eigen::Index>(count, n));

    EigenPairs pairs;
    pairs.values.resize(count);
    pairs.vectors.resize(n, count);

    Eigen::MatrixXd deflated = symmetric;
    std::mt19937_64 rng(0x9e3779b97f4a7c15ull);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int c = 0; c < count; ++c) {
        Eigen::VectorXd v(n);
        for (Eigen::Index r = 0; r < n; ++r) v(r) = dist(rng);
        v.normalize();

        double value = 0.0;
        for (int it = 0; it < max_iterations; ++it) {
            Eigen::VectorXd next = deflated * v;
            // keep iterates orthogonal to the components already found
            for (int k = 0; k < c; ++k) {
                next -= pairs.vectors.col(k).dot(next) * pairs.vectors.col(k);
            }
            const double next_norm = next.norm();
            if (next_norm == 0.0) {
                value = 0.0;
                break;
            }
            next /= next_norm;
            if (next.dot(v) < 0) next = -next;
            const double delta = (next - v).norm();
            v = next;
            value = v.dot(deflated * v);
            if (delta < tolerance) break;
        }

        // Sign convention: largest-magnitude loading positive.
        Eigen::Index max_row;
        v.cwiseAbs().maxCoeff(&max_row);
        if (v(max_row) < 0) v = -v;

        pairs.values(c) = value;
        pairs.vectors.col(c) = v;
        deflated.noalias() -= value * v * v.transpose();
    }
    return pairs;
}

namespace {

Eigen::MatrixXd selected_rows(const EmbeddingStore& store, const std::vector<std::string>& labels,
                              std::vector<std::string>& names) {
    if (labels.empty()) {
        names = store.labels();
        return store.vectors();
    }
    Eigen::MatrixXd rows(labels.size(), store.dim());
    names.reserve(labels.size());
    for (std::size_t r = 0; r < labels.size(); ++r) {
        rows.row(static_cast<Eigen::Index>(r)) = store.vector(store.require_id(labels[r]));
        names.push_back(labels[r]);
    }
    return rows;
}

}  // namespace

std::vector<PcaPoint> pca_2d(const EmbeddingStore& store, const std::vector<std::string>& labels) {
    std::vector<std::string> names;
    Eigen::MatrixXd rows = selected_rows(store, labels, names);
    if (rows.rows() < 3) throw DataError("PCA needs at least 3 labels");
    if (rows.cols() < 2) throw DataError("PCA needs dimension >= 2");

    const Eigen::RowVectorXd mean = rows.colwise().mean();
    rows.rowwise() -= mean;
    const Eigen::MatrixXd covariance =
        rows.transpose() * rows / static_cast<double>(rows.rows() - 1);

    EigenPairs pairs = top_eigenpairs(covariance, 2);
    const double scale = std::max(1.0, pairs.values(0));
    if (pairs.values(1) <= scale * 1e-12) {
        throw DataError("PCA input is degenerate: centered rows have rank < 2");
    }

    const Eigen::VectorXd xs = rows * pairs.vectors.col(0);
    const Eigen::VectorXd ys = rows * pairs.vectors.col(1);
    std::vector<PcaPoint> points;
    points.reserve(names.size());
    for (std::size_t r = 0; r < names.size(); ++r) {
        points.push_back({names[r], xs(static_cast<Eigen::Index>(r)),
                          ys(static_cast<Eigen::Index>(r))});
    }
    return points;
}

namespace {

std::string display_form(const std::string& label) {
    std::string text = label;
    for (char& c : text) {
        if (c == '_') c = ' ';
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return text;
}

}  // namespace

std::string enrich_prompt(const EmbeddingStore& store, const std::string& label, int k,
                          const PromptTemplate& tpl) {
    if (k < 0) throw ConfigError("k must be >= 0");
    store.require_id(label);

    std::string prompt = tpl.article + " " + display_form(label);
    if (k == 0) return prompt;

    auto neighbors = nearest_neighbors(store, label, k);
    if (neighbors.neighbors.empty()) return prompt;

    std::vector<std::string> names;
    names.reserve(neighbors.neighbors.size());
    for (const auto& neighbor : neighbors.neighbors) names.push_back(display_form(neighbor.label));

    prompt += " " + tpl.preposition + " ";
    if (names.size() == 1) {
        prompt += names[0];
    } else if (names.size() == 2) {
        prompt += names[0] + " and " + names[1];
    } else {
        for (std::size_t n = 0; n + 1 < names.size(); ++n) prompt += names[n] + ", ";
        prompt += "and " + names.back();
    }
    return prompt;
}

}  // namespace scenevec
