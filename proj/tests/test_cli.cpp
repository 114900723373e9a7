#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "dgrain/config.hpp"
#include "dgrain/serialize.hpp"

#ifndef DGRAIN_CLI_PATH
#error "DGRAIN_CLI_PATH must point at the dgrain binary"
#endif

using namespace dgrain;

namespace {

const fs::path kWork = fs::temp_directory_path() / "dgrain_cli_test";

int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + std::string(DGRAIN_CLI_PATH) + " " + args + " >>" +
                            (kWork / "log.txt").string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string path(const std::string& rel) { return (kWork / rel).string(); }

/// Every field of a manifest except wall-clock timings.
json stable(const fs::path& manifest) {
    json j = read_json(manifest);
    j.erase("timing");
    // Output names follow --out; their content hashes must not.
    for (auto& o : j["outputs"])
        if (!o["path"].get<std::string>().starts_with("sample_")) o.erase("path");
    return j;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream os(p);
    os << s;
}

const char* kDeskConfig = R"({
  "seed": 7,
  "resolution": 32,
  "fgm": {"darcy": {"fine_res": 16}},
  "cgm": {"n_el": 4, "partition": "2x2"},
  "train": {"mc_samples": 3, "adam_steps": 5, "cache_samples": 10, "max_iterations": 3,
            "adam": {"alpha": 0.01}},
  "predict": {"n_samples": 8, "param_draws": 5, "bins": 6},
  "refine": {"max_splits": 1, "round_iterations": 2}
})";

struct Workdir {
    Workdir() {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
        write_text(kWork / "desk.json", kDeskConfig);
    }
};

}  // namespace

TEST_CASE("configuration overlay") {
    const RunConfig d = run_config_from_json(json::object());
    CHECK(to_json(d) == to_json(RunConfig{}));
    CHECK(d.train.mc_samples == 10);
    CHECK(d.partition == "4x4");

    RunConfig c = run_config_from_json(json::parse(kDeskConfig));
    CHECK(c.seed == 7);
    CHECK(c.darcy.fine_res == 16);
    CHECK(c.darcy.eps_solid == 1e-8);  // untouched sibling keeps its default
    CHECK(c.train.adam.alpha == 0.01);
    CHECK(c.train.adam.beta1 == RunConfig{}.train.adam.beta1);
    CHECK(c.n_el == 4);
    // Round trip.
    CHECK(to_json(run_config_from_json(to_json(c))) == to_json(c));

    auto message = [](const json& j) {
        try {
            run_config_from_json(j);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message({{"train", {{"mc_sample", 3}}}}).find("train.mc_sample") != std::string::npos);
    CHECK(message({{"train", {{"mc_samples", "3"}}}}).find("train.mc_samples") != std::string::npos);
    CHECK(message({{"fgm", {{"darcy", {{"fine_res", 48}}}}}}).find("fgm.darcy.fine_res") != std::string::npos);
    CHECK(message({{"cgm", {{"partition", "3x3"}}}}) != "");
    CHECK(message({{"predict", {{"n_samples", 1}}}}).find("predict.n_samples") != std::string::npos);
    CHECK(message({{"train", {{"mc_samples", 0}}}}).find("train") != std::string::npos);
    CHECK(message(json::array()) != "");
}

TEST_CASE("environment overrides") {
    json base = to_json(RunConfig{});
    json o = apply_env_overrides(base, {{"DGRAIN_TRAIN_MC_SAMPLES", "4"},
                                        {"DGRAIN_SEED", "12"},
                                        {"DGRAIN_FGM_DARCY_LINEAR_SOLVER", "direct"},
                                        {"DGRAIN_TRAIN_MONOTONE_BBVI", "false"},
                                        {"DGRAIN_BC_A_XY", "0.25"},
                                        {"HOME", "/x"}});
    RunConfig c = run_config_from_json(o);
    CHECK(c.train.mc_samples == 4);
    CHECK(c.seed == 12);
    CHECK(c.darcy.solver == LinearSolver::direct);
    CHECK_FALSE(c.train.monotone_bbvi);
    CHECK(c.bc.a_xy == 0.25);
    CHECK_THROWS_AS(apply_env_overrides(base, {{"DGRAIN_TRAIN_MC_SAMPLES", "four"}}), ConfigError);
    CHECK_THROWS_AS(apply_env_overrides(base, {{"DGRAIN_SEED", "-1"}}), ConfigError);
    CHECK_THROWS_AS(apply_env_overrides(base, {{"DGRAIN_TRAIN_MONOTONE_BBVI", "yes"}}), ConfigError);
    // Untouched keys keep the document's value.
    CHECK(apply_env_overrides(base, {}) == base);
}

TEST_CASE("pipeline through the binary") {
    Workdir w;
    const std::string cfg = "--config " + path("desk.json") + " ";

    REQUIRE(run(cfg + "gen --n 4 --out " + path("micro")) == 0);
    REQUIRE(run(cfg + "gen --n 2 --out " + path("micro_test")) == 0);
    REQUIRE(run(cfg + "fgm --micro " + path("micro") + " --out " + path("train")) == 0);
    REQUIRE(run(cfg + "fgm --micro " + path("micro_test") + " --out " + path("test")) == 0);
    CHECK(fs::exists(kWork / "train" / "sample_0.uf"));
    CHECK(fs::exists(kWork / "train" / "sample_3.uf.json"));

    REQUIRE(run(cfg + "train --data " + path("train") + " --out " + path("model.json")) == 0);
    const json model = read_json(kWork / "model.json");
    CHECK(model.contains("converged"));
    REQUIRE(run(cfg + "eval --model " + path("model.json") + " --data " + path("test") + " --out " + path("eval")) == 0);
    CHECK(fs::exists(kWork / "eval" / "metrics.csv"));
    {
        std::ifstream in(kWork / "eval" / "metrics.csv");
        std::string header, line;
        std::getline(in, header);
        CHECK(header == "metric,value");
        std::set<std::string> names;
        while (std::getline(in, line)) names.insert(line.substr(0, line.find(',')));
        CHECK(names.count("r_squared") == 1);
        CHECK(names.count("mean_log_likelihood") == 1);
        CHECK(names.count("coverage") == 1);
    }
    CHECK(run(cfg + "predict --samples --model " + path("model.json") + " --micro " + path("micro_test") + " --out " +
              path("pred")) == 0);
    CHECK(fs::file_size(kWork / "pred" / "sample_0.mean") == 65 * 65 * 8);
    CHECK(fs::file_size(kWork / "pred" / "sample_1.samples") == 65 * 65 * 8 * 8);
    CHECK(run(cfg + "features --micro " + path("micro_test") + " --out " + path("feat")) == 0);
    CHECK(fs::exists(kWork / "feat" / "columns.json"));
    CHECK(run(cfg + "up --model " + path("model.json") + " --micro " + path("micro_test") + " --out " + path("up")) ==
          0);
    CHECK(read_json(kWork / "up" / "uncertainty.json")["mean"].size() == 6);
    CHECK(run(cfg + "pca --data " + path("train") + " --out " + path("pca")) == 0);
    CHECK(run(cfg + "refine --data " + path("train") + " --out " + path("refine")) == 0);
    const json plan = read_json(kWork / "refine" / "refinement.json");
    CHECK(plan["splits"].size() == 1);
    CHECK(plan["rounds"][1]["cells"] == 7);

    SUBCASE("identical inputs give identical manifests") {
        REQUIRE(run(cfg + "gen --n 4 --out " + path("micro2")) == 0);
        CHECK(stable(kWork / "micro" / "manifest.json") == stable(kWork / "micro2" / "manifest.json"));
        REQUIRE(run(cfg + "train --data " + path("train") + " --out " + path("model2.json")) == 0);
        CHECK(stable(kWork / "model.json.manifest.json") == stable(kWork / "model2.json.manifest.json"));
        CHECK(read_json(kWork / "model.json") == read_json(kWork / "model2.json"));
        // Inputs were not modified.
        REQUIRE(run(cfg + "fgm --micro " + path("micro") + " --out " + path("train2")) == 0);
        json a = stable(kWork / "train" / "manifest.json"), b = stable(kWork / "train2" / "manifest.json");
        CHECK(a == b);
    }
    SUBCASE("parallel training matches serial training") {
        REQUIRE(run(cfg + "--parallelism 4 train --data " + path("train") + " --out " + path("model_p.json")) == 0);
        json a = read_json(kWork / "model.json"), b = read_json(kWork / "model_p.json");
        CHECK(a["state"] == b["state"]);
    }
    SUBCASE("environment override reaches the run") {
        REQUIRE(run(cfg + "train --data " + path("train") + " --out " + path("model_env.json"),
                    "DGRAIN_TRAIN_MAX_ITERATIONS=1") == 0);
        CHECK(read_json(kWork / "model_env.json.manifest.json")["settings"]["iterations"] == 1);
    }
}

TEST_CASE("exit codes") {
    Workdir w;
    const std::string cfg = "--config " + path("desk.json") + " ";
    write_text(kWork / "bad.json", R"({"train": {"mc_samplez": 2}})");
    CHECK(run("--config " + path("bad.json") + " gen --n 1 --out " + path("x")) == 2);
    CHECK(run(cfg + "gen --n 1 --out " + path("x"), "DGRAIN_TRAIN_MC_SAMPLES=abc") == 2);
    CHECK(run(cfg + "gen --n 0 --out " + path("x")) == 2);
    CHECK(run("gen --out " + path("x")) == 2);  // missing required option
    CHECK(run("frobnicate") == 2);
    CHECK(run("--config " + path("missing.json") + " gen --n 1 --out " + path("x")) == 4);
    CHECK(run(cfg + "train --data " + path("nowhere") + " --out " + path("m.json")) == 4);
    write_text(kWork / "garbage.json", "{not json");
    CHECK(run("--config " + path("garbage.json") + " gen --n 1 --out " + path("x")) != 0);

    // A model whose decoder shape is at the boundary makes predictive moments undefined.
    REQUIRE(run(cfg + "gen --n 2 --out " + path("m")) == 0);
    REQUIRE(run(cfg + "fgm --micro " + path("m") + " --out " + path("d")) == 0);
    REQUIRE(run(cfg + "train --data " + path("d") + " --out " + path("model.json")) == 0);
    json m = read_json(kWork / "model.json");
    m["state"]["e_tilde"] = 1.0;
    write_json(kWork / "broken.json", m);
    CHECK(run(cfg + "eval --model " + path("broken.json") + " --data " + path("d") + " --out " + path("e")) == 3);
    CHECK(run("--version") == 0);
}
