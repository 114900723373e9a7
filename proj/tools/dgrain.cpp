// dgrain command-line driver.
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "dgrain/config.hpp"
#include "dgrain/dataset.hpp"
#include "dgrain/log.hpp"
#include "dgrain/parallel.hpp"
#include "dgrain/predict.hpp"
#include "dgrain/refine.hpp"

using namespace dgrain;

namespace {

constexpr const char* kVersion = "0.1.0";

using Clock = std::chrono::steady_clock;

struct Globals {
    std::string config_file;
    bool json_logs = false;
    std::string log_level = "info";
    int parallelism = 0;
    std::int64_t seed = -1;
};

/// Collects the run manifest while a subcommand executes.
class Manifest {
public:
    explicit Manifest(std::string command) : command_(std::move(command)), start_(Clock::now()) {}

    void input(const std::string& key, const json& v) { doc_["inputs"][key] = v; }
    void setting(const std::string& key, const json& v) { doc_["settings"][key] = v; }
    void output(const fs::path& p) { outputs_.push_back(p); }
    void stage(const std::string& name, Clock::time_point since) {
        timings_[name] = std::chrono::duration<double>(Clock::now() - since).count();
    }

    void write(const fs::path& path) {
        json d = doc_;
        d["command"] = command_;
        d["version"] = kVersion;
        json outs = json::array();
        std::sort(outputs_.begin(), outputs_.end());
        for (const auto& p : outputs_) outs.push_back({{"path", p.filename().string()}, {"fnv1a", file_hash(p)}});
        d["outputs"] = outs;
        // Everything that varies between identical runs lives under "timing".
        std::time_t now = std::time(nullptr);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        json t = timings_;
        t["total_seconds"] = std::chrono::duration<double>(Clock::now() - start_).count();
        t["finished_at"] = buf;
        d["timing"] = t;
        write_json(path, d);
    }

    static std::string file_hash(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw IoError("cannot read " + p.string());
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
        std::ostringstream os;
        os << std::hex << std::setw(16) << std::setfill('0') << hash_bytes(bytes.data(), bytes.size());
        return os.str();
    }

private:
    std::string command_;
    Clock::time_point start_;
    json doc_ = json::object();
    json timings_ = json::object();
    std::vector<fs::path> outputs_;
};

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

RunConfig make_config(const Globals& g) {
    RunConfig c = load_run_config(g.config_file);
    if (g.parallelism > 0) c.parallelism = g.parallelism;
    if (g.seed >= 0) c.seed = std::uint64_t(g.seed);
    c.train.parallelism = c.parallelism;
    c.train.seed = SeedSeq(c.seed).child("train").child(c.train.seed).value();
    c.validate();
    return c;
}

json common_settings(const RunConfig& c) { return {{"seed", c.seed}, {"parallelism", c.parallelism}}; }

// ---------------------------------------------------------------- gen

struct GenArgs {
    std::string params, out;
    int n = 0, res = 0;
    bool tiled = false;
};

void run_gen(const Globals& g, const GenArgs& a) {
    RunConfig c = make_config(g);
    MicrostructureParams p = a.params.empty() ? c.micro : micro_params_from_json(read_json(a.params));
    p.validate();
    const int res = a.res > 0 ? a.res : c.resolution;
    require(a.n >= 1, "gen: --n must be >= 1");
    ensure_dir(a.out);
    Manifest man("gen");
    man.setting("run", common_settings(c));
    man.setting("params", to_json(p));
    man.setting("resolution", res);
    man.setting("tiled", a.tiled);
    auto t0 = Clock::now();
    const SeedSeq root = SeedSeq(c.seed).child("gen");
    std::vector<Microstructure> micro(std::size_t(a.n));
    parallel_for(a.n, c.parallelism, [&](int k) {
        const std::uint64_t seed = root.child(std::uint64_t(k)).value();
        if (a.tiled) {
            TiledParams tp;
            tp.seed = seed;
            micro[std::size_t(k)] = sample_tiled_microstructure(tp, res);
        } else {
            MicrostructureParams q = p;
            q.seed = seed;
            micro[std::size_t(k)] = sample_microstructure(q, res);
        }
    });
    for (int k = 0; k < a.n; ++k) {
        write_micro(micro_path(a.out, k), micro[std::size_t(k)]);
        man.output(micro_path(a.out, k));
        man.output(fs::path(micro_path(a.out, k).string() + ".json"));
    }
    man.stage("generate", t0);
    man.write(fs::path(a.out) / "manifest.json");
    log::info("gen: wrote " + std::to_string(a.n) + " microstructures to " + a.out);
}

// ---------------------------------------------------------------- fgm

struct FgmArgs {
    std::string solver, micro, bc, out;
    int res = 0;
};

void run_fgm(const Globals& g, const FgmArgs& a) {
    RunConfig c = make_config(g);
    const BoundaryFlux bc = a.bc.empty() ? c.bc : parse_bc(a.bc);
    FgmKind kind = c.fgm;
    if (!a.solver.empty()) {
        require(a.solver == "darcy" || a.solver == "stokes", "fgm: --solver must be darcy or stokes");
        kind = a.solver == "darcy" ? FgmKind::darcy : FgmKind::stokes;
    }
    if (a.res > 0) c.darcy.fine_res = c.stokes.fine_res = a.res;
    Dataset d = ingest_dataset(a.micro, false);
    ensure_dir(a.out);
    Manifest man("fgm");
    man.setting("run", common_settings(c));
    man.setting("solver", kind == FgmKind::darcy ? "darcy" : "stokes");
    man.setting("bc", to_json(bc));
    man.setting("fine_res", kind == FgmKind::darcy ? c.darcy.fine_res : c.stokes.fine_res);
    auto t0 = Clock::now();
    d.fields.resize(d.micro.size());
    parallel_for(d.size(), c.parallelism, [&](int k) {
        const auto& m = d.micro[std::size_t(k)];
        if (kind == FgmKind::darcy) {
            DarcyDiagnostics diag;
            d.fields[std::size_t(k)] = solve_fine_darcy(m, bc, c.darcy, &diag);
            log::debug("fgm: sample " + std::to_string(d.ids[k]) + " iterations " + std::to_string(diag.iterations));
        } else {
            StokesDiagnostics diag;
            d.fields[std::size_t(k)] = solve_fine_stokes(m, bc, c.stokes, &diag);
            log::debug("fgm: sample " + std::to_string(d.ids[k]) + " iterations " + std::to_string(diag.iterations));
        }
    });
    man.stage("solve", t0);
    write_dataset(a.out, d);
    for (int id : d.ids) {
        for (const auto& p : {micro_path(a.out, id), field_path(a.out, id)}) {
            man.output(p);
            man.output(fs::path(p.string() + ".json"));
        }
    }
    man.write(fs::path(a.out) / "manifest.json");
    log::info("fgm: solved " + std::to_string(d.size()) + " samples into " + a.out);
}

// ---------------------------------------------------------------- features

FeatureRegistry load_registry(const std::string& path) {
    return path.empty() ? default_registry() : registry_from_json(read_json(path));
}

struct FeaturesArgs {
    std::string micro, partition, registry, out;
};

void run_features(const Globals& g, const FeaturesArgs& a) {
    RunConfig c = make_config(g);
    const Partition p = parse_partition(a.partition.empty() ? c.partition : a.partition, c.n_el);
    const FeatureRegistry reg = load_registry(a.registry);
    Dataset d = ingest_dataset(a.micro, false);
    ensure_dir(a.out);
    Manifest man("features");
    man.setting("run", common_settings(c));
    man.setting("partition", to_json(p));
    auto t0 = Clock::now();
    auto fm = assemble_feature_matrices(d.micro, p, reg, c.parallelism);
    man.stage("features", t0);
    json flags = json::object();
    for (int k = 0; k < d.size(); ++k) {
        const fs::path out = fs::path(a.out) / ("sample_" + std::to_string(d.ids[k]) + ".phi");
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = fm[std::size_t(k)].values;
        write_f64(out, rm.data(), std::size_t(rm.size()));
        man.output(out);
        if (!fm[std::size_t(k)].flags.empty()) flags[std::to_string(d.ids[k])] = fm[std::size_t(k)].flags;
    }
    const fs::path cols = fs::path(a.out) / "columns.json";
    write_json(cols, {{"rows", p.size()}, {"columns", fm[0].columns}, {"layout", "row-major cells x features"},
                      {"flags", flags}});
    man.output(cols);
    man.write(fs::path(a.out) / "manifest.json");
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string data, partition, registry, out;
};

void run_train(const Globals& g, const TrainArgs& a) {
    RunConfig c = make_config(g);
    const Partition p = parse_partition(a.partition.empty() ? c.partition : a.partition, c.n_el);
    const FeatureRegistry reg = load_registry(a.registry);
    Dataset d = ingest_dataset(a.data, true);
    Manifest man("train");
    man.setting("run", common_settings(c));
    man.setting("train", to_json(c.train));
    man.input("n_samples", d.size());
    auto t0 = Clock::now();
    TrainingData td = make_training_data(d, p, reg, c.parallelism);
    man.stage("features", t0);
    const int grid = d.fields[0].grid;
    const CoarseModel cgm(c.n_el, p, td.bc[0], grid);
    t0 = Clock::now();
    TrainResult tr = train(td, cgm, c.train);
    man.stage("train", t0);
    log::info("train: " + std::to_string(tr.iterations) + " iterations, " +
              (tr.converged ? "converged" : "stopped at max_iterations") + ", ELBO " +
              std::to_string(tr.state.elbo_trace.back()));
    SurrogateModel model{c.n_el, grid, p, reg, std::move(tr.state), c.train};
    const fs::path out(a.out);
    if (out.has_parent_path()) ensure_dir(out.parent_path());
    json doc = to_json(model);
    doc["converged"] = tr.converged;
    write_json(out, doc);
    man.output(out);
    man.setting("converged", tr.converged);
    man.setting("iterations", tr.iterations);
    man.write(fs::path(out.string() + ".manifest.json"));
}

SurrogateModel load_model(const std::string& path) { return surrogate_from_json(read_json(path)); }

// ---------------------------------------------------------------- predict / eval

struct PredictArgs {
    std::string model, micro, bc, out;
    int n = 0;
    bool samples = false;
};

void run_predict(const Globals& g, const PredictArgs& a) {
    RunConfig c = make_config(g);
    const SurrogateModel model = load_model(a.model);
    const BoundaryFlux bc = a.bc.empty() ? c.bc : parse_bc(a.bc);
    const int n = a.n > 0 ? a.n : c.predict.n_samples;
    Dataset d = ingest_dataset(a.micro, false);
    ensure_dir(a.out);
    Manifest man("predict");
    man.setting("run", common_settings(c));
    man.setting("bc", to_json(bc));
    man.setting("n_samples", n);
    auto t0 = Clock::now();
    const SeedSeq root = SeedSeq(c.seed).child("predict");
    std::vector<PredictiveMoments> pm(std::size_t(d.size()));
    std::vector<MatrixXd> draws(std::size_t(d.size()));
    parallel_for(d.size(), c.parallelism, [&](int k) {
        const MatrixXd phi = assemble_feature_matrix(d.micro[std::size_t(k)], model.partition, model.registry).values;
        const std::uint64_t seed = root.child(std::uint64_t(d.ids[k])).value();
        pm[std::size_t(k)] = predict_moments(model, phi, bc, n, seed);
        if (a.samples) draws[std::size_t(k)] = predict_samples(model, phi, bc, n, seed);
    });
    man.stage("predict", t0);
    for (int k = 0; k < d.size(); ++k) {
        const std::string base = (fs::path(a.out) / ("sample_" + std::to_string(d.ids[k]))).string();
        write_f64(base + ".mean", pm[std::size_t(k)].mu.data(), std::size_t(pm[std::size_t(k)].mu.size()));
        write_f64(base + ".var", pm[std::size_t(k)].var.data(), std::size_t(pm[std::size_t(k)].var.size()));
        man.output(base + ".mean");
        man.output(base + ".var");
        if (a.samples) {
            write_f64(base + ".samples", draws[std::size_t(k)].data(), std::size_t(draws[std::size_t(k)].size()));
            man.output(base + ".samples");
        }
    }
    const fs::path info = fs::path(a.out) / "prediction.json";
    write_json(info, {{"grid", model.fine_grid},
                      {"bc", to_json(bc)},
                      {"n_samples", n},
                      {"files", "sample_<n>.mean / .var: f64 row-major fine grid"},
                      {"samples_layout", a.samples ? "column-major n_fine x n_samples" : ""}});
    man.output(info);
    man.write(fs::path(a.out) / "manifest.json");
}

struct EvalArgs {
    std::string model, data, out;
    int n = 0;
};

void run_eval(const Globals& g, const EvalArgs& a) {
    RunConfig c = make_config(g);
    const SurrogateModel model = load_model(a.model);
    const int n = a.n > 0 ? a.n : c.predict.n_samples;
    Dataset d = ingest_dataset(a.data, true);
    require(d.fields[0].grid == model.fine_grid, "eval: test fields use a different grid than the model");
    ensure_dir(a.out);
    Manifest man("eval");
    man.setting("run", common_settings(c));
    man.setting("n_samples", n);
    auto t0 = Clock::now();
    const SeedSeq root = SeedSeq(c.seed).child("eval");
    std::vector<PredictiveMoments> pm(std::size_t(d.size()));
    parallel_for(d.size(), c.parallelism, [&](int k) {
        const MatrixXd phi = assemble_feature_matrix(d.micro[std::size_t(k)], model.partition, model.registry).values;
        pm[std::size_t(k)] = predict_moments(model, phi, d.fields[std::size_t(k)].bc, n,
                                             root.child(std::uint64_t(d.ids[k])).value());
    });
    man.stage("predict", t0);
    std::vector<VectorXd> truth, mean;
    for (int k = 0; k < d.size(); ++k) {
        truth.push_back(d.fields[std::size_t(k)].values);
        mean.push_back(pm[std::size_t(k)].mu);
    }
    const double r2 = r_squared(truth, mean);
    const double mll = mean_log_likelihood(truth, pm);
    const double cov = coverage(truth, pm, c.predict.coverage_k);
    const fs::path csv = fs::path(a.out) / "metrics.csv";
    {
        std::ofstream os(csv);
        if (!os) throw IoError("cannot write " + csv.string());
        os << std::setprecision(17) << "metric,value\n"
           << "r_squared," << r2 << "\nmean_log_likelihood," << mll << "\ncoverage," << cov << "\ncoverage_k,"
           << c.predict.coverage_k << "\nn_test," << d.size() << "\nn_samples," << n << '\n';
    }
    man.output(csv);
    const fs::path per = fs::path(a.out) / "per_sample.csv";
    {
        std::ofstream os(per);
        if (!os) throw IoError("cannot write " + per.string());
        os << std::setprecision(17) << "sample,sq_error,mean_log_likelihood,coverage\n";
        for (int k = 0; k < d.size(); ++k) {
            std::vector<VectorXd> t1{truth[std::size_t(k)]};
            std::vector<PredictiveMoments> p1{pm[std::size_t(k)]};
            os << d.ids[k] << ',' << (truth[std::size_t(k)] - mean[std::size_t(k)]).squaredNorm() << ','
               << mean_log_likelihood(t1, p1) << ',' << coverage(t1, p1, c.predict.coverage_k) << '\n';
        }
    }
    man.output(per);
    man.write(fs::path(a.out) / "manifest.json");
    log::info("eval: R2 " + std::to_string(r2) + " MLL " + std::to_string(mll) + " coverage " + std::to_string(cov));
}

// ---------------------------------------------------------------- refine

struct RefineArgs {
    std::string data, start, registry, out;
    int splits = -1;
};

void run_refine(const Globals& g, const RefineArgs& a) {
    RunConfig c = make_config(g);
    const Partition start = parse_partition(a.start.empty() ? c.refine.start : a.start, c.n_el);
    const FeatureRegistry reg = load_registry(a.registry);
    Dataset d = ingest_dataset(a.data, true);
    ensure_dir(a.out);
    Manifest man("refine");
    man.setting("run", common_settings(c));
    RefineConfig rc;
    rc.max_splits = a.splits >= 0 ? a.splits : c.refine.max_splits;
    rc.round_iterations = c.refine.round_iterations;
    rc.train = c.train;
    man.setting("max_splits", rc.max_splits);
    auto t0 = Clock::now();
    TrainingData td = make_training_data(d, start, reg, c.parallelism);
    FeatureProvider provider = [&](const Partition& p) {
        std::vector<MatrixXd> phi;
        for (auto& f : assemble_feature_matrices(d.micro, p, reg, c.parallelism)) phi.push_back(std::move(f.values));
        return phi;
    };
    RefineResult rr = refine_loop(td, provider, c.n_el, d.fields[0].grid, start, rc);
    man.stage("refine", t0);
    json rounds = json::array();
    for (std::size_t r = 0; r < rr.plan.partitions.size(); ++r) {
        const fs::path pf = fs::path(a.out) / ("partition_round" + std::to_string(r) + ".json");
        write_json(pf, to_json(rr.plan.partitions[r]));
        man.output(pf);
        json round = {{"round", r}, {"cells", rr.plan.partitions[r].size()}, {"trace_start", rr.plan.round_start[r]}};
        if (r < rr.plan.scores.size())
            round["scores"] = std::vector<double>(rr.plan.scores[r].data(),
                                                  rr.plan.scores[r].data() + rr.plan.scores[r].size());
        rounds.push_back(round);
    }
    json splits = json::array();
    for (const auto& s : rr.plan.splits) {
        const Cell& cell = rr.plan.partitions[std::size_t(s.round)][s.cell_index];
        splits.push_back({{"round", s.round},
                          {"cell_id", s.cell_id},
                          {"bounds", {cell.x0, cell.y0, cell.x1, cell.y1}},
                          {"elbo_before", s.elbo_before},
                          {"elbo_after", std::isfinite(s.elbo_after) ? json(s.elbo_after) : json(nullptr)}});
    }
    const fs::path plan = fs::path(a.out) / "refinement.json";
    write_json(plan, {{"rounds", rounds}, {"splits", splits}, {"elbo_trace", rr.plan.elbo_trace}});
    man.output(plan);
    SurrogateModel model{c.n_el, d.fields[0].grid, rr.partition, reg, std::move(rr.state), c.train};
    const fs::path mf = fs::path(a.out) / "model.json";
    write_json(mf, to_json(model));
    man.output(mf);
    man.write(fs::path(a.out) / "manifest.json");
}

// ---------------------------------------------------------------- up

struct UpArgs {
    std::string model, micro, bc, out;
    int draws = 0;
};

void run_up(const Globals& g, const UpArgs& a) {
    RunConfig c = make_config(g);
    const SurrogateModel model = load_model(a.model);
    const BoundaryFlux bc = a.bc.empty() ? c.bc : parse_bc(a.bc);
    Dataset d = ingest_dataset(a.micro, false);
    ensure_dir(a.out);
    Manifest man("up");
    man.setting("run", common_settings(c));
    auto t0 = Clock::now();
    std::vector<MatrixXd> phi(std::size_t(d.size()));
    parallel_for(d.size(), c.parallelism, [&](int k) {
        phi[std::size_t(k)] = assemble_feature_matrix(d.micro[std::size_t(k)], model.partition, model.registry).values;
    });
    const int node = nearest_node(model.fine_grid, c.predict.qoi_x, c.predict.qoi_y);
    const int draws = a.draws > 0 ? a.draws : c.predict.param_draws;
    UncertaintyBands ub = propagate_uncertainty(model, phi, bc, node, draws, SeedSeq(c.seed).child("up").value(),
                                                c.predict.bins, c.parallelism);
    man.stage("propagate", t0);
    auto vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    json doc = {{"qoi", {{"node", node}, {"x", c.predict.qoi_x}, {"y", c.predict.qoi_y}}},
                {"bins", vec(ub.edges)},
                {"mean", vec(ub.mean)},
                {"lo", vec(ub.lo)},
                {"hi", vec(ub.hi)},
                {"band", "5% / 95% quantiles of the per-draw histogram density"},
                {"kde_x", vec(ub.kde_x)},
                {"kde", vec(ub.kde)},
                {"kde_label", "Gaussian kernel density of pooled values, Silverman bandwidth"}};
    const fs::path out = fs::path(a.out) / "uncertainty.json";
    write_json(out, doc);
    man.output(out);
    man.write(fs::path(a.out) / "manifest.json");
}

// ---------------------------------------------------------------- pca

struct PcaArgs {
    std::string data, out;
};

void run_pca(const Globals& g, const PcaArgs& a) {
    RunConfig c = make_config(g);
    Dataset d = ingest_dataset(a.data, true);
    ensure_dir(a.out);
    Manifest man("pca");
    man.setting("run", common_settings(c));
    std::vector<VectorXd> fields;
    for (const auto& f : d.fields) fields.push_back(f.values);
    const VectorXd cum = pca_explained_variance(fields);
    const fs::path out = fs::path(a.out) / "pca.json";
    write_json(out, {{"components", cum.size()},
                     {"cumulative_explained_variance", std::vector<double>(cum.data(), cum.data() + cum.size())}});
    man.output(out);
    man.write(fs::path(a.out) / "manifest.json");
}

int exit_code_for(const std::exception_ptr& ep) {
    try {
        std::rethrow_exception(ep);
    } catch (const ConfigError& e) {
        log::error(std::string("configuration error: ") + e.what());
        return 2;
    } catch (const NumericalError& e) {
        log::error(std::string("numerical failure: ") + e.what());
        return 3;
    } catch (const IoError& e) {
        log::error(std::string("I/O error: ") + e.what());
        return 4;
    } catch (const fs::filesystem_error& e) {
        log::error(std::string("I/O error: ") + e.what());
        return 4;
    } catch (const std::exception& e) {
        log::error(std::string("error: ") + e.what());
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic coarse-grained surrogate for porous-media flow"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    Globals g;
    app.add_option("--config", g.config_file, "JSON run configuration (DGRAIN_* env vars override it)");
    app.add_flag("--json-logs", g.json_logs, "Emit log lines as JSON objects");
    app.add_option("--log-level", g.log_level, "debug, info, warn or error")
        ->check(CLI::IsMember({"debug", "info", "warn", "error"}));
    app.add_option("--parallelism", g.parallelism, "Worker threads (overrides config)");
    app.add_option("--seed", g.seed, "Root seed (overrides config)");

    GenArgs gen;
    auto* c_gen = app.add_subcommand("gen", "Sample random microstructures");
    c_gen->add_option("--params", gen.params, "Microstructure parameter JSON");
    c_gen->add_option("--n", gen.n, "Number of samples")->required();
    c_gen->add_option("--res", gen.res, "Pixel resolution");
    c_gen->add_option("--out", gen.out, "Output directory")->required();
    c_gen->add_flag("--tiled", gen.tiled, "Tiled lower-left-quadrant microstructures");

    FgmArgs fgm;
    auto* c_fgm = app.add_subcommand("fgm", "Solve the fine-scale model for every microstructure");
    c_fgm->add_option("--solver", fgm.solver, "darcy or stokes");
    c_fgm->add_option("--micro", fgm.micro, "Microstructure directory")->required();
    c_fgm->add_option("--bc", fgm.bc, "Boundary data ax,ay,axy");
    c_fgm->add_option("--res", fgm.res, "Fine model resolution");
    c_fgm->add_option("--out", fgm.out, "Dataset output directory")->required();

    FeaturesArgs feat;
    auto* c_feat = app.add_subcommand("features", "Compute per-cell feature matrices");
    c_feat->add_option("--micro", feat.micro, "Microstructure directory")->required();
    c_feat->add_option("--partition", feat.partition, "KxK or partition JSON");
    c_feat->add_option("--registry", feat.registry, "Feature registry JSON");
    c_feat->add_option("--out", feat.out, "Output directory")->required();

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "Train the surrogate");
    c_train->add_option("--data", tr.data, "Dataset directory")->required();
    c_train->add_option("--partition", tr.partition, "KxK or partition JSON");
    c_train->add_option("--registry", tr.registry, "Feature registry JSON");
    c_train->add_option("--out", tr.out, "Model JSON path")->required();

    PredictArgs pr;
    auto* c_pred = app.add_subcommand("predict", "Predictive moments for microstructures");
    c_pred->add_option("--model", pr.model, "Model JSON")->required();
    c_pred->add_option("--micro", pr.micro, "Microstructure directory")->required();
    c_pred->add_option("--bc", pr.bc, "Boundary data ax,ay,axy");
    c_pred->add_option("--n", pr.n, "Posterior samples");
    c_pred->add_flag("--samples", pr.samples, "Also write the predictive samples");
    c_pred->add_option("--out", pr.out, "Output directory")->required();

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Evaluate R2, MLL and coverage on a test set");
    c_eval->add_option("--model", ev.model, "Model JSON")->required();
    c_eval->add_option("--data", ev.data, "Test dataset directory")->required();
    c_eval->add_option("--n", ev.n, "Posterior samples");
    c_eval->add_option("--out", ev.out, "Output directory")->required();

    RefineArgs rf;
    auto* c_ref = app.add_subcommand("refine", "Adaptive partition refinement");
    c_ref->add_option("--data", rf.data, "Dataset directory")->required();
    c_ref->add_option("--start", rf.start, "Initial KxK or partition JSON");
    c_ref->add_option("--splits", rf.splits, "Number of splits");
    c_ref->add_option("--registry", rf.registry, "Feature registry JSON");
    c_ref->add_option("--out", rf.out, "Output directory")->required();

    UpArgs up;
    auto* c_up = app.add_subcommand("up", "Uncertainty propagation of a pressure QoI");
    c_up->add_option("--model", up.model, "Model JSON")->required();
    c_up->add_option("--micro", up.micro, "Microstructure directory")->required();
    c_up->add_option("--bc", up.bc, "Boundary data ax,ay,axy");
    c_up->add_option("--draws", up.draws, "Posterior parameter draws");
    c_up->add_option("--out", up.out, "Output directory")->required();

    PcaArgs pca;
    auto* c_pca = app.add_subcommand("pca", "Cumulative explained variance of the fine fields");
    c_pca->add_option("--data", pca.data, "Dataset directory")->required();
    c_pca->add_option("--out", pca.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    log::set_json(g.json_logs);
    log::set_level(g.log_level == "debug"  ? log::Level::debug
                   : g.log_level == "warn" ? log::Level::warn
                   : g.log_level == "error" ? log::Level::error
                                            : log::Level::info);
    try {
        if (c_gen->parsed()) run_gen(g, gen);
        else if (c_fgm->parsed()) run_fgm(g, fgm);
        else if (c_feat->parsed()) run_features(g, feat);
        else if (c_train->parsed()) run_train(g, tr);
        else if (c_pred->parsed()) run_predict(g, pr);
        else if (c_eval->parsed()) run_eval(g, ev);
        else if (c_ref->parsed()) run_refine(g, rf);
        else if (c_up->parsed()) run_up(g, up);
        else if (c_pca->parsed()) run_pca(g, pca);
    } catch (...) {
        return exit_code_for(std::current_exception());
    }
    return 0;
}
