#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace {

namespace fs = std::filesystem;

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

fs::path work_dir() {
    static fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("scenevec_cli_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

RunResult run_cli(const std::string& args) {
    const fs::path out_path = work_dir() / "stdout.txt";
    const fs::path err_path = work_dir() / "stderr.txt";
    const std::string command = std::string(SCENEVEC_BIN) + " " + args + " > " +
                                out_path.string() + " 2> " + err_path.string();
    const int status = std::system(command.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = slurp(out_path);
    result.err = slurp(err_path);
    return result;
}

std::string data_file(const std::string& name) {
    return (fs::path(SCENEVEC_TEST_DATA_DIR) / name).string();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

// A tiny hand-made store: house and its parts cluster on the first axis.
const char* kToyVectors =
    "house 10 0 0\n"
    "window 9 1 0\n"
    "door 9 0 1\n"
    "stairs 9 1 1\n"
    "tree -5 3 3\n";

}  // namespace

TEST_CASE("preprocess reproduces the golden fixture outputs") {
    const auto sentences = work_dir() / "fixture_sentences.tsv";
    const auto vocab = work_dir() / "fixture_vocab.tsv";
    auto result = run_cli("preprocess --annotations " + data_file("fixture_boxes.csv") +
                          " --out-sentences " + sentences.string() + " --out-vocab " +
                          vocab.string() + " --min-count 1");
    REQUIRE(result.exit_code == 0);
    CHECK(result.out.find("images: 3") != std::string::npos);
    CHECK(result.out.find("boxes: 8") != std::string::npos);
    CHECK(result.out.find("retained classes: 4") != std::string::npos);
    CHECK(slurp(sentences) == slurp(data_file("golden_sentences.tsv")));
    CHECK(slurp(vocab) == slurp(data_file("golden_vocab.tsv")));
}

TEST_CASE("preprocess min-count filtering drops rare classes") {
    const auto sentences = work_dir() / "filtered_sentences.tsv";
    const auto vocab = work_dir() / "filtered_vocab.tsv";
    auto result = run_cli("preprocess --annotations " + data_file("fixture_boxes.csv") +
                          " --out-sentences " + sentences.string() + " --out-vocab " +
                          vocab.string() + " --min-count 2");
    REQUIRE(result.exit_code == 0);
    CHECK(result.out.find("retained classes: 3") != std::string::npos);
    // car is gone: 7 of 8 boxes survive, img2 keeps only person and tree
    CHECK(result.out.find("boxes in vocabulary: 7") != std::string::npos);
    CHECK(slurp(sentences).find("img2\t0 2\n") != std::string::npos);
}

TEST_CASE("preprocess vertical scan reorders tokens") {
    const auto sentences = work_dir() / "vertical_sentences.tsv";
    const auto vocab = work_dir() / "vertical_vocab.tsv";
    auto result = run_cli("preprocess --annotations " + data_file("fixture_boxes.csv") +
                          " --out-sentences " + sentences.string() + " --out-vocab " +
                          vocab.string() + " --min-count 1 --scan vertical");
    REQUIRE(result.exit_code == 0);
    CHECK(slurp(sentences).find("img1\t0 2 1\n") != std::string::npos);
}

TEST_CASE("preprocess resolves machine ids through the class-names file") {
    const auto sentences = work_dir() / "mid_sentences.tsv";
    const auto vocab = work_dir() / "mid_vocab.tsv";
    auto result = run_cli("preprocess --annotations " + data_file("fixture_mids.csv") +
                          " --class-names " + data_file("fixture_classes.csv") +
                          " --out-sentences " + sentences.string() + " --out-vocab " +
                          vocab.string() + " --min-count 1");
    REQUIRE(result.exit_code == 0);
    // equal counts order lexicographically: Car=0, Man=1, Wheel=2
    CHECK(slurp(vocab) == "Car\t1\nMan\t1\nWheel\t1\n");
    CHECK(slurp(sentences) == "imgA\t1 0 2\n");
}

TEST_CASE("preprocess fails loudly on a missing file") {
    auto result = run_cli("preprocess --annotations /nonexistent/boxes.csv --out-sentences x "
                          "--out-vocab y");
    CHECK(result.exit_code == 1);
    CHECK(result.err.find("/nonexistent/boxes.csv") != std::string::npos);
}

TEST_CASE("preprocess reports bad rows with line numbers but keeps going") {
    const auto sentences = work_dir() / "bad_sentences.tsv";
    const auto vocab = work_dir() / "bad_vocab.tsv";
    auto result = run_cli("preprocess --annotations " + data_file("fixture_bad_rows.csv") +
                          " --out-sentences " + sentences.string() + " --out-vocab " +
                          vocab.string() + " --min-count 1");
    REQUIRE(result.exit_code == 0);
    CHECK(result.out.find("boxes: 1") != std::string::npos);
    CHECK(result.out.find("rejected rows: 3") != std::string::npos);
    CHECK(result.err.find(":2: inverted x extent") != std::string::npos);
    CHECK(result.err.find(":3:") != std::string::npos);
    CHECK(result.err.find(":4:") != std::string::npos);
}

TEST_CASE("cooccur writes golden text dumps for both modes") {
    const auto sentences = work_dir() / "fixture_sentences.tsv";
    const auto vocab = work_dir() / "fixture_vocab.tsv";
    REQUIRE(run_cli("preprocess --annotations " + data_file("fixture_boxes.csv") +
                    " --out-sentences " + sentences.string() + " --out-vocab " + vocab.string() +
                    " --min-count 1")
                .exit_code == 0);

    const auto unit_dir = work_dir() / "shards_unit";
    const auto unit_dump = work_dir() / "dump_unit.txt";
    auto unit = run_cli("cooccur --sentences " + sentences.string() + " --vocab " +
                        vocab.string() + " --out " + unit_dir.string() + " --window 2 " +
                        "--text-dump " + unit_dump.string());
    REQUIRE(unit.exit_code == 0);
    CHECK(slurp(unit_dump) == slurp(data_file("golden_cooccur_w2_unit.txt")));

    const auto harmonic_dir = work_dir() / "shards_harmonic";
    const auto harmonic_dump = work_dir() / "dump_harmonic.txt";
    auto harmonic = run_cli("cooccur --sentences " + sentences.string() + " --vocab " +
                            vocab.string() + " --out " + harmonic_dir.string() +
                            " --window 2 --mode harmonic --text-dump " + harmonic_dump.string());
    REQUIRE(harmonic.exit_code == 0);
    CHECK(slurp(harmonic_dump) == slurp(data_file("golden_cooccur_w2_harmonic.txt")));
}

TEST_CASE("cooccur rejects a zero window as a usage error") {
    auto result = run_cli("cooccur --sentences " + data_file("golden_sentences.tsv") +
                          " --vocab " + data_file("golden_vocab.tsv") +
                          " --out /tmp/unused --window 0");
    CHECK(result.exit_code == 1);
}

TEST_CASE("train is deterministic and validates alpha") {
    const auto sentences = work_dir() / "fixture_sentences.tsv";
    const auto vocab = work_dir() / "fixture_vocab.tsv";
    const auto shards = work_dir() / "train_shards";
    REQUIRE(run_cli("preprocess --annotations " + data_file("fixture_boxes.csv") +
                    " --out-sentences " + sentences.string() + " --out-vocab " + vocab.string() +
                    " --min-count 1")
                .exit_code == 0);
    REQUIRE(run_cli("cooccur --sentences " + sentences.string() + " --vocab " + vocab.string() +
                    " --out " + shards.string() + " --window 2")
                .exit_code == 0);

    const auto run1 = work_dir() / "vectors_run1.txt";
    const auto run2 = work_dir() / "vectors_run2.txt";
    const std::string common = "train --shards " + shards.string() + " --vocab " +
                               vocab.string() + " --dim 8 --epochs 12 --seed 7 --threads 1 "
                               "--quiet --out ";
    REQUIRE(run_cli(common + run1.string()).exit_code == 0);
    REQUIRE(run_cli(common + run2.string()).exit_code == 0);
    const std::string bytes = slurp(run1);
    CHECK(!bytes.empty());
    CHECK(bytes == slurp(run2));

    auto bad = run_cli(common + (work_dir() / "x.txt").string() + " --alpha 1.5");
    CHECK(bad.exit_code == 1);

    // a pathological step size overflows the residual and exits 3
    auto diverged = run_cli(common + (work_dir() / "y.txt").string() + " --eta 1e200");
    CHECK(diverged.exit_code == 3);
    CHECK(diverged.err.find("diverged at epoch") != std::string::npos);
}

TEST_CASE("train checkpoints periodically and resumes from binary state") {
    const auto sentences = work_dir() / "fixture_sentences.tsv";
    const auto vocab = work_dir() / "fixture_vocab.tsv";
    const auto shards = work_dir() / "ckpt_shards";
    REQUIRE(run_cli("preprocess --annotations " + data_file("fixture_boxes.csv") +
                    " --out-sentences " + sentences.string() + " --out-vocab " + vocab.string() +
                    " --min-count 1")
                .exit_code == 0);
    REQUIRE(run_cli("cooccur --sentences " + sentences.string() + " --vocab " + vocab.string() +
                    " --out " + shards.string() + " --window 2")
                .exit_code == 0);

    const auto checkpoint = work_dir() / "state.ckpt";
    const auto straight = work_dir() / "straight.txt";
    const auto resumed = work_dir() / "resumed.txt";
    const std::string base = "train --shards " + shards.string() + " --vocab " + vocab.string() +
                             " --dim 6 --seed 11 --threads 1 --quiet ";

    // full run in one go
    REQUIRE(run_cli(base + "--epochs 10 --out " + straight.string()).exit_code == 0);
    // half run with a checkpoint, then resume to the same epoch count
    REQUIRE(run_cli(base + "--epochs 5 --checkpoint-every 5 --checkpoint " +
                    checkpoint.string() + " --out " + (work_dir() / "half.txt").string())
                .exit_code == 0);
    REQUIRE(fs::exists(checkpoint));
    REQUIRE(fs::exists(checkpoint.string() + ".txt"));
    REQUIRE(run_cli(base + "--epochs 10 --resume " + checkpoint.string() + " --out " +
                    resumed.string())
                .exit_code == 0);
    CHECK(slurp(resumed) == slurp(straight));
}

TEST_CASE("config files fill in defaults but flags win") {
    const auto config = work_dir() / "train.ini";
    write_file(config, "[train]\ndim=16\nepochs=3\n");
    const std::string common = " train --shards /tmp/none --vocab " +
                               data_file("golden_vocab.tsv") + " --out /tmp/none.txt";
    auto from_config = run_cli("--config " + config.string() + common + " --emit-config");
    REQUIRE(from_config.exit_code == 0);
    CHECK(from_config.out.find("dim=16") != std::string::npos);
    CHECK(from_config.out.find("epochs=3") != std::string::npos);

    auto overridden =
        run_cli("--config " + config.string() + common + " --dim 24 --emit-config");
    REQUIRE(overridden.exit_code == 0);
    CHECK(overridden.out.find("dim=24") != std::string::npos);
    CHECK(overridden.out.find("epochs=3") != std::string::npos);
}

TEST_CASE("query knn emits ranked TSV") {
    const auto vectors = work_dir() / "toy_vectors.txt";
    write_file(vectors, kToyVectors);
    auto result = run_cli("query knn --vectors " + vectors.string() + " --label house -k 2");
    REQUIRE(result.exit_code == 0);
    std::istringstream lines(result.out);
    std::string line;
    std::getline(lines, line);
    CHECK(line.find("1\twindow\t") == 0);
    std::getline(lines, line);
    CHECK(line.find("2\tdoor\t") == 0);
}

TEST_CASE("query enrich renders the with-phrase") {
    const auto vectors = work_dir() / "toy_vectors.txt";
    write_file(vectors, kToyVectors);
    auto result = run_cli("query enrich --vectors " + vectors.string() + " --label house -k 3");
    REQUIRE(result.exit_code == 0);
    CHECK(result.out == "a house with window, door, and stairs\n");
}

TEST_CASE("query project rejects identical anchors as a data error") {
    const auto vectors = work_dir() / "toy_vectors.txt";
    write_file(vectors, kToyVectors);
    auto result = run_cli("query project --vectors " + vectors.string() +
                          " --anchor-a house --anchor-b house");
    CHECK(result.exit_code == 2);
    CHECK(result.err.find("distinct") != std::string::npos);
}

TEST_CASE("query project exports CSV coordinates") {
    const auto vectors = work_dir() / "toy_vectors.txt";
    write_file(vectors, kToyVectors);
    auto result = run_cli("query project --vectors " + vectors.string() +
                          " --anchor-a house --anchor-b tree --labels house,tree,window");
    REQUIRE(result.exit_code == 0);
    CHECK(result.out.find("label,coordinate\n") == 0);
    CHECK(result.out.find("house,") != std::string::npos);
    CHECK(result.out.find("window,") != std::string::npos);
}

TEST_CASE("query pca exports two columns") {
    const auto vectors = work_dir() / "toy_vectors.txt";
    write_file(vectors, kToyVectors);
    auto result = run_cli("query pca --vectors " + vectors.string());
    REQUIRE(result.exit_code == 0);
    CHECK(result.out.find("label,x,y\n") == 0);
    CHECK(result.out.find("house,") != std::string::npos);
}

TEST_CASE("query knn on an unknown label exits with a data error") {
    const auto vectors = work_dir() / "toy_vectors.txt";
    write_file(vectors, kToyVectors);
    auto result = run_cli("query knn --vectors " + vectors.string() + " --label hause -k 1");
    CHECK(result.exit_code == 2);
    CHECK(result.err.find("house") != std::string::npos);
}

TEST_CASE("mask-eval flags a single-box-only corpus") {
    const auto vectors = work_dir() / "toy_vectors.txt";
    const auto sentences = work_dir() / "single_box.tsv";
    write_file(vectors, kToyVectors);
    write_file(sentences, "img1\t0\nimg2\t3\n");
    auto result = run_cli("mask-eval --vectors " + vectors.string() + " --sentences " +
                          sentences.string() + " --ks 1,2 --jsonl -");
    REQUIRE(result.exit_code == 0);
    CHECK(result.out.find("instances: 0") != std::string::npos);
    CHECK(result.out.find("undefined") != std::string::npos);
    CHECK(result.out.find("\"accuracy\":null") != std::string::npos);
}

TEST_CASE("mask-eval scores a perfect corpus at 100") {
    const auto vectors = work_dir() / "orthonormal.txt";
    const auto sentences = work_dir() / "duplicates.tsv";
    write_file(vectors, "A 1 0 0\nB 0 1 0\nC 0 0 1\n");
    write_file(sentences, "img1\t0 0\nimg2\t1 1\nimg3\t2 2 2\n");
    auto result = run_cli("mask-eval --vectors " + vectors.string() + " --sentences " +
                          sentences.string() + " --ks 1 --dump " +
                          (work_dir() / "dump.tsv").string());
    REQUIRE(result.exit_code == 0);
    CHECK(result.out.find("instances: 7") != std::string::npos);
    CHECK(result.out.find("100.00") != std::string::npos);
    const std::string dump = slurp(work_dir() / "dump.tsv");
    CHECK(dump.find("img1\t0\t1") != std::string::npos);
}

TEST_CASE("emit-config prints the resolved configuration and exits") {
    auto result = run_cli("train --shards /tmp/none --vocab " + data_file("golden_vocab.tsv") +
                          " --out /tmp/none.txt --dim 32 --emit-config");
    REQUIRE(result.exit_code == 0);
    CHECK(result.out.find("dim=32") != std::string::npos);
    CHECK(result.out.find("epochs=50") != std::string::npos);
}

TEST_CASE("environment variables override defaults") {
    const auto vectors = work_dir() / "toy_vectors.txt";
    write_file(vectors, kToyVectors);
    const std::string command = "SCENEVEC_MIN_COUNT=2 " + std::string(SCENEVEC_BIN) +
                                " preprocess --annotations " + data_file("fixture_boxes.csv") +
                                " --out-sentences " + (work_dir() / "env_s.tsv").string() +
                                " --out-vocab " + (work_dir() / "env_v.tsv").string() + " > " +
                                (work_dir() / "env_out.txt").string() + " 2>/dev/null";
    const int status = std::system(command.c_str());
    REQUIRE(WIFEXITED(status));
    REQUIRE(WEXITSTATUS(status) == 0);
    CHECK(slurp(work_dir() / "env_out.txt").find("retained classes: 3") != std::string::npos);
}
