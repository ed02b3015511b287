#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scenevec/corpus.hpp"
#include "scenevec/errors.hpp"
#include "scenevec/vector_io.hpp"

namespace scenevec {

/// A . B / (|A| |B|), in [-1, 1]. Throws DataError on a zero-norm input.
template <typename DerivedA, typename DerivedB>
double cosine_similarity(const Eigen::MatrixBase<DerivedA>& u,
                         const Eigen::MatrixBase<DerivedB>& v) {
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu == 0.0 || nv == 0.0) throw DataError("cosine similarity of a zero vector is undefined");
    return u.dot(v) / (nu * nv);
}

/// Immutable store of labeled embedding rows with precomputed norms.
/// Zero-norm rows are tracked and refused in cosine queries rather than
/// silently used; all queries are read-only and thread-safe.
class EmbeddingStore {
public:
    EmbeddingStore(std::vector<std::string> labels, Eigen::MatrixXd vectors);

    static EmbeddingStore load(const std::filesystem::path& path);

    int size() const { return static_cast<int>(labels_.size()); }
    int dim() const { return static_cast<int>(vectors_.cols()); }

    const std::vector<std::string>& labels() const { return labels_; }
    const std::string& label(int id) const { return labels_.at(id); }
    const Eigen::MatrixXd& vectors() const { return vectors_; }
    Eigen::MatrixXd::ConstRowXpr vector(int id) const { return vectors_.row(id); }
    double norm(int id) const { return norms_(id); }

    int id_of(std::string_view label) const;
    /// id_of that throws DataError listing close matches when absent.
    int require_id(const std::string& label) const;

    /// Occurrence counts are optional; they gate count-filtered queries.
    void attach_counts(const Vocabulary& vocab);
    bool has_counts() const { return !counts_.empty(); }
    std::int64_t count(int id) const { return counts_.at(id); }

private:
    std::vector<std::string> labels_;
    Eigen::MatrixXd vectors_;
    Eigen::VectorXd norms_;
    std::unordered_map<std::string, int> ids_;
    std::vector<std::int64_t> counts_;
};

struct Neighbor {
    std::string label;
    double distance;  // cosine distance, 1 - cosine similarity
};

struct NeighborList {
    std::string query;
    std::vector<Neighbor> neighbors;  // ascending by distance
};

/// Exact k-nearest neighbors by cosine distance, excluding the query
/// itself and zero-norm rows. With min_count > 0, candidates whose
/// occurrence count falls below it are excluded (counts must be
/// attached). Ties break by label id.
NeighborList nearest_neighbors(const EmbeddingStore& store, const std::string& label, int k,
                               std::int64_t min_count = 0);

struct AxisProjection {
    std::string anchor_a;
    std::string anchor_b;
    std::vector<std::pair<std::string, double>> coordinates;
};

/// Scalar coordinate of each label along u = (v_b - v_a)/|v_b - v_a|;
/// larger means closer to anchor_b. An empty label list means all labels.
AxisProjection project_axis(const EmbeddingStore& store, const std::string& anchor_a,
                            const std::string& anchor_b,
                            const std::vector<std::string>& labels = {});

struct PcaPoint {
    std::string label;
    double x;
    double y;
};

/// Top two principal directions of the mean-centered rows, eigenvalues
/// descending, each component's sign fixed so its largest-magnitude
/// loading is positive. Computed by power iteration with deflation.
/// Throws DataError when the centered rows have rank < 2.
std::vector<PcaPoint> pca_2d(const EmbeddingStore& store,
                             const std::vector<std::string>& labels = {});

/// Power iteration with deflation on a symmetric PSD matrix; returns
/// eigenvalues descending with their unit eigenvectors as columns.
struct EigenPairs {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};
EigenPairs top_eigenpairs(const Eigen::MatrixXd& symmetric, int count, double tolerance = 1e-10,
                          int max_iterations = 10000);

struct PromptTemplate {
    std::string article = "a";
    std::string preposition = "with";
};

/// "a <label> with n1, n2, and n3": the article plus the lowercased
/// label, then the k nearest neighbors joined per the k=1/k=2/Oxford
/// forms. Neighbors whose label string equals the query are skipped;
/// k = 0 yields the bare prompt. Underscores display as spaces.
std::string enrich_prompt(const EmbeddingStore& store, const std::string& label, int k,
                          const PromptTemplate& tpl = {});

}  // namespace scenevec
