#include "scenevec/cooccur.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <thread>

#include "scenevec/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "shard format is little-endian; big-endian hosts are unsupported");

namespace scenevec {

void CooccurTable::add(int i, int j, double weight) {
    entries_[pack(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j))] += weight;
}

double CooccurTable::at(int i, int j) const {
    auto it = entries_.find(pack(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)));
    return it == entries_.end() ? 0.0 : it->second;
}

double CooccurTable::marginal(int i) const {
    double sum = 0.0;
    const auto row = static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) << 32;
    for (const auto& [key, weight] : entries_) {
        if ((key & 0xFFFFFFFF00000000ull) == row) sum += weight;
    }
    return sum;
}

double CooccurTable::total_weight() const {
    double sum = 0.0;
    for (const auto& [key, weight] : entries_) sum += weight;
    return sum;
}

CooccurTable& CooccurTable::merge(const CooccurTable& other) {
    if (other.vocab_size_ != vocab_size_ || other.window_ != window_ || other.mode_ != mode_) {
        throw DataError("cannot merge co-occurrence tables with different V, window, or mode");
    }
    for (const auto& [key, weight] : other.entries_) entries_[key] += weight;
    return *this;
}

std::vector<CooccurRecord> CooccurTable::sorted_records() const {
    std::vector<CooccurRecord> records;
    records.reserve(entries_.size());
    for (const auto& [key, weight] : entries_) {
        records.push_back({static_cast<std::uint32_t>(key >> 32),
                           static_cast<std::uint32_t>(key & 0xFFFFFFFFull), weight});
    }
    std::sort(records.begin(), records.end(), [](const CooccurRecord& a, const CooccurRecord& b) {
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    return records;
}

bool CooccurTable::operator==(const CooccurTable& other) const {
    return vocab_size_ == other.vocab_size_ && window_ == other.window_ && mode_ == other.mode_ &&
           entries_ == other.entries_;
}

namespace {

void accumulate_sentence(CooccurTable& table, const SceneSentence& sentence, int vocab_size,
                         int window, CooccurWeighting mode) {
    const auto& tokens = sentence.tokens;
    const int n = static_cast<int>(tokens.size());
    for (int p = 0; p < n; ++p) {
        if (tokens[p] < 0 || tokens[p] >= vocab_size) {
            throw DataError("sentence '" + sentence.image_id + "': token id " +
                            std::to_string(tokens[p]) + " outside vocabulary of size " +
                            std::to_string(vocab_size));
        }
        const int q_end = std::min(n - 1, p + window);
        for (int q = p + 1; q <= q_end; ++q) {
            if (tokens[q] < 0 || tokens[q] >= vocab_size) {
                throw DataError("sentence '" + sentence.image_id + "': token id " +
                                std::to_string(tokens[q]) + " outside vocabulary of size " +
                                std::to_string(vocab_size));
            }
            const double weight =
                mode == CooccurWeighting::Unit ? 1.0 : 1.0 / static_cast<double>(q - p);
            table.add(tokens[p], tokens[q], weight);
            table.add(tokens[q], tokens[p], weight);
        }
    }
}

}  // namespace

CooccurTable accumulate(const std::vector<SceneSentence>& sentences, int vocab_size, int window,
                        CooccurWeighting mode, int threads) {
    if (window < 1) throw ConfigError("window size must be >= 1");
    if (vocab_size < 0) throw ConfigError("vocab size must be >= 0");
    threads = std::max(1, threads);

    if (threads == 1 || sentences.size() < 2) {
        CooccurTable table(vocab_size, window, mode);
        for (const auto& sentence : sentences) {
            accumulate_sentence(table, sentence, vocab_size, window, mode);
        }
        return table;
    }

    // Per-worker private tables merged at the end; merge order is fixed
    // so the result does not depend on thread scheduling.
    const std::size_t workers = std::min<std::size_t>(threads, sentences.size());
    std::vector<CooccurTable> parts(workers, CooccurTable(vocab_size, window, mode));
    std::vector<std::exception_ptr> failures(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t s = w; s < sentences.size(); s += workers) {
                    accumulate_sentence(parts[w], sentences[s], vocab_size, window, mode);
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

    CooccurTable table = std::move(parts[0]);
    for (std::size_t w = 1; w < workers; ++w) table.merge(parts[w]);
    return table;
}

namespace {

constexpr std::uint32_t kShardMagic = 0x53564F43;  // "COVS" on disk
constexpr std::uint32_t kShardVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
bool read_pod(std::istream& in, T& value) {
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    return static_cast<bool>(in);
}

std::filesystem::path shard_name(const std::filesystem::path& dir, std::size_t index) {
    char name[32];
    std::snprintf(name, sizeof(name), "cooccur-%05zu.shard", index);
    return dir / name;
}

}  // namespace

void save_shards(const CooccurTable& table, const std::filesystem::path& dir,
                 std::size_t max_records_per_shard) {
    if (max_records_per_shard == 0) throw ConfigError("max_records_per_shard must be >= 1");
    std::filesystem::create_directories(dir);

    const auto records = table.sorted_records();
    const std::size_t shard_count =
        records.empty() ? 1 : (records.size() + max_records_per_shard - 1) / max_records_per_shard;

    std::size_t next = 0;
    for (std::size_t s = 0; s < shard_count; ++s) {
        const std::size_t count = std::min(max_records_per_shard, records.size() - next);
        const auto path = shard_name(dir, s);
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot open shard for writing: " + path.string());
        write_pod(out, kShardMagic);
        write_pod(out, kShardVersion);
        write_pod(out, static_cast<std::uint32_t>(table.vocab_size()));
        write_pod(out, static_cast<std::uint32_t>(table.window()));
        write_pod(out, static_cast<std::uint32_t>(table.mode()));
        write_pod(out, static_cast<std::uint64_t>(count));
        for (std::size_t r = next; r < next + count; ++r) {
            write_pod(out, records[r].i);
            write_pod(out, records[r].j);
            write_pod(out, records[r].weight);
        }
        next += count;
        if (!out) throw DataError("short write on shard: " + path.string());
    }
}

CooccurTable load_shards(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw DataError("shard directory does not exist: " + dir.string());
    }
    std::vector<std::filesystem::path> paths;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".shard") {
            paths.push_back(entry.path());
        }
    }
    if (paths.empty()) throw DataError("no .shard files under " + dir.string());
    std::sort(paths.begin(), paths.end());

    CooccurTable table;
    bool first = true;
    for (const auto& path : paths) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open shard: " + path.string());
        std::uint32_t magic = 0, version = 0, vocab_size = 0, window = 0, mode = 0;
        std::uint64_t count = 0;
        if (!read_pod(in, magic) || magic != kShardMagic) {
            throw DataError("shard " + path.string() + ": bad magic");
        }
        if (!read_pod(in, version) || version != kShardVersion) {
            throw DataError("shard " + path.string() + ": unsupported version");
        }
        if (!read_pod(in, vocab_size) || !read_pod(in, window) || !read_pod(in, mode) ||
            !read_pod(in, count)) {
            throw DataError("shard " + path.string() + ": truncated header");
        }
        if (mode > 1) throw DataError("shard " + path.string() + ": unknown weighting mode");

        CooccurTable part(static_cast<int>(vocab_size), static_cast<int>(window),
                          static_cast<CooccurWeighting>(mode));
        for (std::uint64_t r = 0; r < count; ++r) {
            CooccurRecord record;
            if (!read_pod(in, record.i) || !read_pod(in, record.j) || !read_pod(in, record.weight)) {
                throw DataError("shard " + path.string() + ": truncated records");
            }
            part.add(static_cast<int>(record.i), static_cast<int>(record.j), record.weight);
        }
        if (first) {
            table = std::move(part);
            first = false;
        } else {
            table.merge(part);
        }
    }
    return table;
}

void export_text(const CooccurTable& table, std::ostream& out) {
    char buffer[64];
    for (const auto& record : table.sorted_records()) {
        std::snprintf(buffer, sizeof(buffer), "%u %u %.17g", record.i, record.j, record.weight);
        out << buffer << '\n';
    }
}

}  // namespace scenevec
