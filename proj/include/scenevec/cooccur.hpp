#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <unordered_map>
#include <vector>

#include "scenevec/corpus.hpp"

namespace scenevec {

enum class CooccurWeighting { Unit, Harmonic };

struct CooccurRecord {
    std::uint32_t i = 0;
    std::uint32_t j = 0;
    double weight = 0;
};

/// Sparse symmetric object-object co-occurrence table. Both directions
/// of every pair are stored, so X_ij == X_ji holds by construction;
/// diagonal entries arise from two distinct tokens of the same class.
class CooccurTable {
public:
    CooccurTable() = default;
    CooccurTable(int vocab_size, int window, CooccurWeighting mode)
        : vocab_size_(vocab_size), window_(window), mode_(mode) {}

    int vocab_size() const { return vocab_size_; }
    int window() const { return window_; }
    CooccurWeighting mode() const { return mode_; }

    void add(int i, int j, double weight);
    double at(int i, int j) const;
    std::size_t nonzero_count() const { return entries_.size(); }

    /// Row sum X_i.
    double marginal(int i) const;
    /// Sum of all stored weights (twice the total pair weight).
    double total_weight() const;

    /// Entrywise addition; the other table must share V, w, and mode.
    CooccurTable& merge(const CooccurTable& other);

    /// Records sorted by (i, j) for deterministic iteration.
    std::vector<CooccurRecord> sorted_records() const;

    const std::unordered_map<std::uint64_t, double>& entries() const { return entries_; }

    static std::uint64_t pack(std::uint32_t i, std::uint32_t j) {
        return (static_cast<std::uint64_t>(i) << 32) | j;
    }

    bool operator==(const CooccurTable& other) const;

private:
    int vocab_size_ = 0;
    int window_ = 1;
    CooccurWeighting mode_ = CooccurWeighting::Unit;
    std::unordered_map<std::uint64_t, double> entries_;
};

/// Accumulates co-occurrence over scene sentences. For each position
/// pair (p, q) with 0 < q-p <= window, adds weight to (t_p, t_q) and
/// (t_q, t_p); the weight is 1 (Unit) or 1/(q-p) (Harmonic). Windows
/// never cross sentence boundaries. Throws DataError on a token id
/// outside [0, vocab_size).
CooccurTable accumulate(const std::vector<SceneSentence>& sentences,
                        int vocab_size,
                        int window,
                        CooccurWeighting mode,
                        int threads = 1);

/// Writes the table as binary shards `cooccur-NNNNN.shard` under dir.
/// Each shard carries a header (magic, V, w, mode, record count)
/// followed by little-endian (u32 i, u32 j, f64 weight) records.
void save_shards(const CooccurTable& table,
                 const std::filesystem::path& dir,
                 std::size_t max_records_per_shard = 1u << 20);

/// Loads and merges every `*.shard` file under dir. Throws DataError
/// naming the shard on a header mismatch or truncation.
CooccurTable load_shards(const std::filesystem::path& dir);

/// Debug dump, one `i j weight` line per record in (i, j) order.
void export_text(const CooccurTable& table, std::ostream& out);

}  // namespace scenevec
