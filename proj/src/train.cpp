#include "scenevec/train.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>
#include <thread>

namespace scenevec {

namespace {

constexpr double kAdaGradEpsilon = 1e-8;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

void TrainConfig::validate() const {
    if (dim < 1) throw ConfigError("dim must be >= 1");
    if (!(x_max > 0)) throw ConfigError("x_max must be > 0");
    if (!(alpha > 0) || alpha > 1) throw ConfigError("alpha must be in (0, 1]");
    if (!(initial_step > 0)) throw ConfigError("initial step size must be > 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
}

ModelParams init_params(int vocab_size, int dim, std::uint64_t seed) {
    ModelParams params;
    params.main.resize(vocab_size, dim);
    params.context.resize(vocab_size, dim);
    params.main_bias.resize(vocab_size);
    params.context_bias.resize(vocab_size);
    params.main_grad_sq = Eigen::MatrixXd::Zero(vocab_size, dim);
    params.context_grad_sq = Eigen::MatrixXd::Zero(vocab_size, dim);
    params.main_bias_grad_sq = Eigen::VectorXd::Zero(vocab_size);
    params.context_bias_grad_sq = Eigen::VectorXd::Zero(vocab_size);

    std::mt19937_64 rng(seed);
    const double half = 0.5 / dim;
    std::uniform_real_distribution<double> dist(-half, half);
    for (int r = 0; r < vocab_size; ++r) {
        for (int c = 0; c < dim; ++c) params.main(r, c) = dist(rng);
        for (int c = 0; c < dim; ++c) params.context(r, c) = dist(rng);
        params.main_bias(r) = dist(rng);
        params.context_bias(r) = dist(rng);
    }
    return params;
}

namespace {

double run_span(ModelParams& params, const std::vector<CooccurRecord>& records, std::size_t begin,
                std::size_t end, const TrainConfig& cfg, int epoch) {
    const double step = cfg.initial_step;
    Eigen::RowVectorXd grad_main(params.dim());
    Eigen::RowVectorXd grad_context(params.dim());
    double loss_sum = 0.0;

    for (std::size_t r = begin; r < end; ++r) {
        const auto& record = records[r];
        const int i = static_cast<int>(record.i);
        const int j = static_cast<int>(record.j);

        const double weight = cooccur_weight(record.weight, cfg.x_max, cfg.alpha);
        const double residual = params.main.row(i).dot(params.context.row(j)) +
                                params.main_bias(i) + params.context_bias(j) -
                                std::log(record.weight);
        const double g = weight * residual;
        if (!std::isfinite(g)) {
            throw NumericError("loss diverged at epoch " + std::to_string(epoch + 1) +
                               ", entry (" + std::to_string(i) + ", " + std::to_string(j) + ")");
        }
        loss_sum += weight * residual * residual;

        grad_main.noalias() = g * params.context.row(j);
        grad_context.noalias() = g * params.main.row(i);

        params.main_grad_sq.row(i).array() += grad_main.array().square();
        params.context_grad_sq.row(j).array() += grad_context.array().square();
        params.main.row(i).array() -=
            step * grad_main.array() / (params.main_grad_sq.row(i).array() + kAdaGradEpsilon).sqrt();
        params.context.row(j).array() -=
            step * grad_context.array() /
            (params.context_grad_sq.row(j).array() + kAdaGradEpsilon).sqrt();

        params.main_bias_grad_sq(i) += g * g;
        params.main_bias(i) -= step * g / std::sqrt(params.main_bias_grad_sq(i) + kAdaGradEpsilon);
        params.context_bias_grad_sq(j) += g * g;
        params.context_bias(j) -=
            step * g / std::sqrt(params.context_bias_grad_sq(j) + kAdaGradEpsilon);
    }
    return loss_sum;
}

}  // namespace

TrainReport train_epochs(ModelParams& params, const CooccurTable& table, const TrainConfig& cfg,
                         int first_epoch, const EpochCallback& after_epoch) {
    cfg.validate();
    if (params.vocab_size() != table.vocab_size()) {
        throw DataError("parameter rows (" + std::to_string(params.vocab_size()) +
                        ") do not match table vocabulary (" + std::to_string(table.vocab_size()) +
                        ")");
    }

    const auto base_records = table.sorted_records();
    TrainReport report;
    const auto start = std::chrono::steady_clock::now();

    for (int epoch = first_epoch; epoch < cfg.epochs; ++epoch) {
        // each epoch's visit order is derived from the sorted base, so it
        // depends only on (seed, epoch) and resumed runs retrace it
        auto records = base_records;
        std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        std::shuffle(records.begin(), records.end(), rng);

        double loss_sum = 0.0;
        if (cfg.threads == 1 || records.size() < 2) {
            loss_sum = run_span(params, records, 0, records.size(), cfg, epoch);
        } else {
            // Lock-free parallel spans; colliding row updates are tolerated.
            const std::size_t workers = std::min<std::size_t>(cfg.threads, records.size());
            std::vector<double> losses(workers, 0.0);
            std::vector<std::exception_ptr> failures(workers);
            std::vector<std::thread> pool;
            pool.reserve(workers);
            const std::size_t chunk = (records.size() + workers - 1) / workers;
            for (std::size_t w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    const std::size_t begin = w * chunk;
                    const std::size_t end = std::min(records.size(), begin + chunk);
                    try {
                        losses[w] = run_span(params, records, begin, end, cfg, epoch);
                    } catch (...) {
                        failures[w] = std::current_exception();
                    }
                });
            }
            for (auto& t : pool) t.join();
            for (const auto& failure : failures) {
                if (failure) std::rethrow_exception(failure);
            }
            for (double l : losses) loss_sum += l;
        }

        report.entries_processed += records.size();
        report.epoch_mean_loss.push_back(records.empty() ? 0.0 : loss_sum / records.size());
        if (after_epoch) after_epoch(epoch, params);
    }

    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::pair<ModelParams, TrainReport> train(const CooccurTable& table, const TrainConfig& cfg) {
    cfg.validate();
    if (table.nonzero_count() == 0) throw DataError("co-occurrence table is empty");
    if (table.vocab_size() < 2) throw DataError("training requires a vocabulary of at least 2");
    ModelParams params = init_params(table.vocab_size(), cfg.dim, cfg.seed);
    TrainReport report = train_epochs(params, table, cfg);
    return {std::move(params), std::move(report)};
}

double total_loss(const ModelParams& params, const CooccurTable& table, double x_max,
                  double alpha) {
    double sum = 0.0;
    for (const auto& record : table.sorted_records()) {
        sum += pair_loss(params.main.row(record.i), params.context.row(record.j),
                         params.main_bias(record.i), params.context_bias(record.j), record.weight,
                         x_max, alpha);
    }
    return sum;
}

Eigen::MatrixXd finalize(const ModelParams& params, OutputMode mode) {
    if (mode == OutputMode::SumMainContext) return params.main + params.context;
    return params.main;
}

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x53564B43;  // "CKVS" on disk
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& value, const std::string& path) {
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw DataError("checkpoint " + path + ": truncated");
}

void write_block(std::ostream& out, const double* data, std::size_t n) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_block(std::istream& in, double* data, std::size_t n, const std::string& path) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw DataError("checkpoint " + path + ": truncated");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
    const auto& p = checkpoint.params;
    write_pod(out, kCheckpointMagic);
    write_pod(out, kCheckpointVersion);
    write_pod(out, static_cast<std::int32_t>(checkpoint.config.dim));
    write_pod(out, checkpoint.config.x_max);
    write_pod(out, checkpoint.config.alpha);
    write_pod(out, checkpoint.config.initial_step);
    write_pod(out, static_cast<std::int32_t>(checkpoint.config.epochs));
    write_pod(out, checkpoint.config.seed);
    write_pod(out, static_cast<std::uint32_t>(checkpoint.config.output_mode));
    write_pod(out, static_cast<std::int32_t>(checkpoint.epochs_done));
    write_pod(out, static_cast<std::uint32_t>(p.vocab_size()));
    write_pod(out, static_cast<std::uint32_t>(p.dim()));
    const std::size_t vd = static_cast<std::size_t>(p.vocab_size()) * p.dim();
    const std::size_t v = static_cast<std::size_t>(p.vocab_size());
    write_block(out, p.main.data(), vd);
    write_block(out, p.context.data(), vd);
    write_block(out, p.main_bias.data(), v);
    write_block(out, p.context_bias.data(), v);
    write_block(out, p.main_grad_sq.data(), vd);
    write_block(out, p.context_grad_sq.data(), vd);
    write_block(out, p.main_bias_grad_sq.data(), v);
    write_block(out, p.context_bias_grad_sq.data(), v);
    if (!out) throw DataError("short write on checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    const std::string name = path.string();

    std::uint32_t magic = 0, version = 0;
    read_pod(in, magic, name);
    if (magic != kCheckpointMagic) throw DataError("checkpoint " + name + ": bad magic");
    read_pod(in, version, name);
    if (version != kCheckpointVersion) throw DataError("checkpoint " + name + ": unsupported version");

    Checkpoint checkpoint;
    std::int32_t dim = 0, epochs = 0, epochs_done = 0;
    std::uint32_t output_mode = 0, vocab_size = 0, stored_dim = 0;
    read_pod(in, dim, name);
    read_pod(in, checkpoint.config.x_max, name);
    read_pod(in, checkpoint.config.alpha, name);
    read_pod(in, checkpoint.config.initial_step, name);
    read_pod(in, epochs, name);
    read_pod(in, checkpoint.config.seed, name);
    read_pod(in, output_mode, name);
    read_pod(in, epochs_done, name);
    read_pod(in, vocab_size, name);
    read_pod(in, stored_dim, name);
    if (output_mode > 1) throw DataError("checkpoint " + name + ": unknown output mode");
    if (stored_dim != static_cast<std::uint32_t>(dim)) {
        throw DataError("checkpoint " + name + ": dimension mismatch");
    }
    checkpoint.config.dim = dim;
    checkpoint.config.epochs = epochs;
    checkpoint.config.output_mode = static_cast<OutputMode>(output_mode);
    checkpoint.epochs_done = epochs_done;

    auto& p = checkpoint.params;
    p.main.resize(vocab_size, dim);
    p.context.resize(vocab_size, dim);
    p.main_bias.resize(vocab_size);
    p.context_bias.resize(vocab_size);
    p.main_grad_sq.resize(vocab_size, dim);
    p.context_grad_sq.resize(vocab_size, dim);
    p.main_bias_grad_sq.resize(vocab_size);
    p.context_bias_grad_sq.resize(vocab_size);
    const std::size_t vd = static_cast<std::size_t>(vocab_size) * dim;
    read_block(in, p.main.data(), vd, name);
    read_block(in, p.context.data(), vd, name);
    read_block(in, p.main_bias.data(), vocab_size, name);
    read_block(in, p.context_bias.data(), vocab_size, name);
    read_block(in, p.main_grad_sq.data(), vd, name);
    read_block(in, p.context_grad_sq.data(), vd, name);
    read_block(in, p.main_bias_grad_sq.data(), vocab_size, name);
    read_block(in, p.context_bias_grad_sq.data(), vocab_size, name);
    return checkpoint;
}

}  // namespace scenevec
