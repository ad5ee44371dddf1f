#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "mannerist/cli.hpp"
#include "mannerist/correlation.hpp"
#include "mannerist/ocsvm.hpp"
#include "mannerist/synthetic.hpp"

using namespace mannerist;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "mannerist");
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// A scratch directory holding a 30-minute synthetic pair and its features.
struct Workspace {
    fs::path dir;
    Workspace() {
        dir = fs::temp_directory_path() / ("mannerist-cli-" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        REQUIRE(run({"synth", "--out-dir", s(dir / "data"), "--duration", "1800", "--seed", "11"}).code == 0);
        REQUIRE(run({"featurize", s(dir / "data/persona-a.csv"), s(dir / "data/persona-b.csv"), "--out-dir",
                     s(dir / "feat")})
                    .code == 0);
    }
    ~Workspace() { fs::remove_all(dir); }
    static std::string s(const fs::path& p) { return p.string(); }
    std::string real() const { return s(dir / "feat/persona-a.features.csv"); }
    std::string fake() const { return s(dir / "feat/persona-b.features.csv"); }
};

Workspace& workspace() {
    static Workspace w;
    return w;
}

} // namespace

TEST_CASE("cli: usage") {
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"--help"}).out.find("featurize") != std::string::npos);
    CHECK(run({}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"train"}).code == 1);
}

TEST_CASE("cli: featurize a 60 s stream") {
    auto& w = workspace();
    const auto dir = w.dir / "short";
    REQUIRE(run({"synth", "--out-dir", dir.string(), "--duration", "60", "--personas", "1", "--seed", "3"}).code == 0);
    const auto r = run({"featurize", (dir / "persona-a.csv").string(), "--out-dir", dir.string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("11 clips") != std::string::npos);
    CHECK(read_feature_vectors(slurp(dir / "persona-a.features.csv")).size() == 11);
}

TEST_CASE("cli: featurize honours the config file and flags override it") {
    auto& w = workspace();
    const auto dir = w.dir / "cfg";
    REQUIRE(run({"synth", "--out-dir", dir.string(), "--duration", "60", "--personas", "1", "--seed", "3"}).code == 0);
    std::ofstream(dir / "run.ini") << "window = 20\nstride = 20\n";
    const auto csv = (dir / "persona-a.csv").string();
    auto r = run({"--config", (dir / "run.ini").string(), "featurize", csv, "--out-dir", dir.string()});
    CHECK(r.out.find(" 3 clips") != std::string::npos);
    r = run({"--config", (dir / "run.ini").string(), "featurize", csv, "--out-dir", dir.string(), "--stride", "10"});
    CHECK(r.out.find(" 5 clips") != std::string::npos);
}

TEST_CASE("cli: featurize failures") {
    auto& w = workspace();
    const auto dir = w.dir / "fail";
    fs::create_directories(dir);

    SUBCASE("missing input removes earlier outputs") {
        const auto r = run({"featurize", w.s(w.dir / "data/persona-a.csv"), "no/such.csv", "--out-dir", dir.string()});
        CHECK(r.code == 2);
        CHECK(r.err.find("no/such.csv") != std::string::npos);
        CHECK_FALSE(fs::exists(dir / "persona-a.features.csv"));
    }
    SUBCASE("malformed csv") {
        std::ofstream(dir / "bad.csv") << csv_header() << "\n1,2,3\n";
        const auto r = run({"featurize", (dir / "bad.csv").string(), "--out-dir", dir.string()});
        CHECK(r.code == 2);
        CHECK(r.err.find("row 1") != std::string::npos);
    }
    SUBCASE("camera motion everywhere leaves nothing, which is not an error") {
        auto stream = sample_stream(random_persona(2), 60.0);
        for (std::size_t i = 0; i < stream.frames.size(); i += 100) stream.frames[i].margin_diff_left = 0.5;
        std::ofstream(dir / "choppy.csv") << write_feature_csv(stream);
        const auto r = run({"featurize", (dir / "choppy.csv").string(), "--out-dir", dir.string()});
        CHECK(r.code == 0);
        CHECK(r.err.find("warning") != std::string::npos);
        CHECK(read_feature_vectors(slurp(dir / "choppy.features.csv")).empty());
    }
}

TEST_CASE("cli: train and classify") {
    auto& w = workspace();
    const auto model = w.s(w.dir / "model.json");

    auto r = run({"train", "--real", w.real(), "--decoy", w.fake(), "--seed", "1", "-o", model});
    REQUIRE(r.code == 0);
    CHECK(r.err.find("balanced accuracy") != std::string::npos);
    CHECK(r.out.find("gamma") != std::string::npos);
    CHECK(r.out.find("threshold") != std::string::npos);
    const auto m = load_model(slurp(model));
    CHECK(m.dimension() == 496);
    CHECK(m.metadata.family == "combined");
    CHECK(m.metadata.calibration_target == 0.99);

    const auto report = w.s(w.dir / "verdicts.json");
    r = run({"classify", "--model", model, w.real(), w.fake(), "-o", report});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(slurp(report));
    CHECK(j["files"][0]["fraction_target"].get<double>() >= 0.99);
    CHECK(j["files"][1]["fraction_target"].get<double>() <= 0.05);
    CHECK(j["files"][0]["clips"][0].contains("score"));
    CHECK(r.out.find("non-target") != std::string::npos);

    SUBCASE("facial family") {
        const auto facial = w.s(w.dir / "facial.json");
        REQUIRE(run({"train", "--real", w.real(), "--family", "facial", "--seed", "1", "-o", facial}).code == 0);
        CHECK(load_model(slurp(facial)).dimension() == 190);
        CHECK(run({"classify", "--model", facial, w.fake()}).code == 0);
    }
    SUBCASE("no decoys") {
        r = run({"train", "--real", w.real(), "--seed", "1", "-o", w.s(w.dir / "solo.json")});
        CHECK(r.err.find("true-positive rate") != std::string::npos);
    }
    SUBCASE("too few clips") {
        const auto few = w.dir / "few.csv";
        auto clips = read_feature_vectors(slurp(w.real()));
        clips.resize(4);
        std::ofstream(few) << write_feature_vectors(clips);
        CHECK(run({"train", "--real", few.string(), "--seed", "1"}).code == 3);
    }
    SUBCASE("hash mismatch") {
        auto text = slurp(model);
        text.replace(text.find("fnv1a64:") + 8, 4, "0000");
        std::ofstream(w.dir / "foreign.json") << text;
        CHECK(run({"classify", "--model", w.s(w.dir / "foreign.json"), w.real()}).code == 4);
    }
    SUBCASE("empty feature file") {
        std::ofstream(w.dir / "empty.csv") << "";
        r = run({"classify", "--model", model, w.s(w.dir / "empty.csv")});
        CHECK(r.code == 0);
        CHECK(r.out.find("(0/0)") != std::string::npos);
    }
    SUBCASE("same seed, same model file") {
        const auto again = w.s(w.dir / "again.json");
        REQUIRE(run({"train", "--real", w.real(), "--decoy", w.fake(), "--seed", "1", "-o", again}).code == 0);
        CHECK(slurp(again) == slurp(model));
    }
}

TEST_CASE("cli: evaluate, sweep and importance are reproducible") {
    auto& w = workspace();
    const auto decoy = "impostor=" + w.fake();
    const auto a = w.s(w.dir / "eval-a.json");
    const auto b = w.s(w.dir / "eval-b.json");
    for (const auto& out : {a, b}) {
        const auto r = run({"evaluate", "--real", w.real(), "--decoy", decoy, "--repeats", "2", "--seed", "5",
                            "--gammas", "0.0625,0.25", "--nus", "0.05,0.1", "-o", out, "--table"});
        REQUIRE(r.code == 0);
        CHECK(r.out.find("combined") != std::string::npos);
    }
    CHECK(slurp(a) == slurp(b));
    const auto j = nlohmann::json::parse(slurp(a));
    REQUIRE(j["reports"].size() == 3);
    CHECK(j["reports"][2]["per_set"][1]["name"] == "impostor");

    auto r = run({"evaluate", "--real", w.real(), "--decoy", decoy, "--repeats", "1", "--family", "gestural",
                  "--gammas", "0.25", "--nus", "0.1"});
    CHECK(r.code == 0);
    CHECK(r.err.find("using seed") != std::string::npos);
    CHECK(nlohmann::json::parse(r.out)["family"] == "gestural");

    r = run({"sweep", "--real", w.real(), "--decoy", decoy, "--sizes", "10,496", "--samples", "3", "--seed", "2",
             "--gammas", "0.25", "--nus", "0.1"});
    REQUIRE(r.code == 0);
    CHECK(nlohmann::json::parse(r.out)["per_size"].size() == 2);

    r = run({"importance", "--real", w.real(), "--decoy", decoy, "--classifiers", "20", "--seed", "2", "--gammas",
             "0.25", "--nus", "0.1"});
    REQUIRE(r.code == 0);
    CHECK(nlohmann::json::parse(r.out)["pairs"].size() == 496);
}
