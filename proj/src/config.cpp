#include "dgrain/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

extern char** environ;

namespace dgrain {
namespace {

std::string upper_key(const std::string& path) {
    std::string s;
    for (char ch : path) s += ch == '.' ? '_' : char(std::toupper(static_cast<unsigned char>(ch)));
    return s;
}

void flatten(const json& j, const std::string& prefix, std::map<std::string, std::string>& out) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (it->is_object())
            flatten(*it, path, out);
        else
            out[upper_key(path)] = path;
    }
}

json::json_pointer pointer(const std::string& dotted) {
    std::string p;
    std::size_t start = 0;
    for (;;) {
        auto dot = dotted.find('.', start);
        p += "/" + dotted.substr(start, dot - start);
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    return json::json_pointer(p);
}

void overlay(json& base, const json& over, const std::string& prefix) {
    if (!over.is_object()) throw ConfigError("config: '" + (prefix.empty() ? "<root>" : prefix) + "' must be an object");
    for (auto it = over.begin(); it != over.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!base.contains(it.key())) throw ConfigError("config: unknown field '" + path + "'");
        json& b = base[it.key()];
        if (b.is_object()) {
            overlay(b, *it, path);
        } else {
            const bool num_ok = b.is_number() && it->is_number();
            if (!num_ok && b.type() != it->type() && !(b.is_array() && it->is_array()))
                throw ConfigError("config: field '" + path + "' expects " + std::string(b.type_name()) + ", got " +
                                  it->type_name());
            b = *it;
        }
    }
}

template <typename T>
T field(const json& doc, const std::string& path) {
    try {
        return doc.at(pointer(path)).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config: field '" + path + "': " + e.what());
    }
}

void check(bool ok, const std::string& path, const std::string& msg) {
    if (!ok) throw ConfigError("config: field '" + path + "' " + msg);
}

}  // namespace

void RunConfig::validate() const {
    check(parallelism >= 1, "parallelism", "must be >= 1");
    check(resolution >= 8, "resolution", "must be >= 8");
    check(micro.sigma_ex >= 0 && micro.sigma_r >= 0, "micro.sigma_*", "must be >= 0");
    check(micro.l_x > 0 && micro.l_r > 0 && micro.l_s >= 0, "micro.l_*", "length scales must be > 0");
    check(micro.margin >= 0 && micro.margin < 0.5, "micro.margin", "must be in [0, 0.5)");
    check(darcy.fine_res >= 2, "fgm.darcy.fine_res", "must be >= 2");
    if (fgm == FgmKind::darcy) check(resolution % darcy.fine_res == 0, "fgm.darcy.fine_res", "must divide resolution");
    check(darcy.eps_solid > 0 && darcy.eps_solid <= 1, "fgm.darcy.eps_solid", "must be in (0, 1]");
    check(darcy.output_grid == 0 || darcy.output_grid >= 2, "fgm.darcy.output_grid", "must be 0 or >= 2");
    check(darcy.tolerance > 0, "fgm.darcy.tolerance", "must be > 0");
    check(stokes.fine_res >= 2, "fgm.stokes.fine_res", "must be >= 2");
    if (fgm == FgmKind::stokes)
        check(resolution % stokes.fine_res == 0, "fgm.stokes.fine_res", "must divide resolution");
    check(stokes.viscosity > 0, "fgm.stokes.viscosity", "must be > 0");
    check(n_el >= 1, "cgm.n_el", "must be >= 1");
    check(predict.n_samples >= 2, "predict.n_samples", "must be >= 2");
    check(predict.coverage_k > 0, "predict.coverage_k", "must be > 0");
    check(predict.param_draws >= 1, "predict.param_draws", "must be >= 1");
    check(predict.bins >= 1, "predict.bins", "must be >= 1");
    check(refine.max_splits >= 0, "refine.max_splits", "must be >= 0");
    check(refine.round_iterations >= 0, "refine.round_iterations", "must be >= 0");
    try {
        train.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config: train: ") + e.what());
    }
    (void)parse_partition(partition, n_el);
}

json to_json(const RunConfig& c) {
    return {{"seed", c.seed},
            {"parallelism", c.parallelism},
            {"resolution", c.resolution},
            {"micro", to_json(c.micro)},
            {"fgm",
             {{"solver", c.fgm == FgmKind::darcy ? "darcy" : "stokes"},
              {"darcy",
               {{"fine_res", c.darcy.fine_res},
                {"eps_solid", c.darcy.eps_solid},
                {"output_grid", c.darcy.output_grid},
                {"linear_solver", c.darcy.solver == LinearSolver::pcg ? "pcg" : "direct"},
                {"tolerance", c.darcy.tolerance},
                {"max_iterations", c.darcy.max_iterations}}},
              {"stokes",
               {{"fine_res", c.stokes.fine_res},
                {"output_grid", c.stokes.output_grid},
                {"viscosity", c.stokes.viscosity},
                {"tolerance", c.stokes.tolerance},
                {"max_iterations", c.stokes.max_iterations}}}}},
            {"bc", to_json(c.bc)},
            {"cgm", {{"n_el", c.n_el}, {"partition", c.partition}}},
            {"train", to_json(c.train)},
            {"predict",
             {{"n_samples", c.predict.n_samples},
              {"coverage_k", c.predict.coverage_k},
              {"qoi_x", c.predict.qoi_x},
              {"qoi_y", c.predict.qoi_y},
              {"param_draws", c.predict.param_draws},
              {"bins", c.predict.bins}}},
            {"refine",
             {{"start", c.refine.start},
              {"max_splits", c.refine.max_splits},
              {"round_iterations", c.refine.round_iterations}}}};
}

RunConfig run_config_from_json(const json& j) {
    json doc = to_json(RunConfig{});
    overlay(doc, j, "");
    RunConfig c;
    c.seed = field<std::uint64_t>(doc, "seed");
    c.parallelism = field<int>(doc, "parallelism");
    c.resolution = field<int>(doc, "resolution");
    c.micro = micro_params_from_json(doc["micro"]);
    const auto solver = field<std::string>(doc, "fgm.solver");
    check(solver == "darcy" || solver == "stokes", "fgm.solver", "must be 'darcy' or 'stokes'");
    c.fgm = solver == "darcy" ? FgmKind::darcy : FgmKind::stokes;
    c.darcy.fine_res = field<int>(doc, "fgm.darcy.fine_res");
    c.darcy.eps_solid = field<double>(doc, "fgm.darcy.eps_solid");
    c.darcy.output_grid = field<int>(doc, "fgm.darcy.output_grid");
    const auto ls = field<std::string>(doc, "fgm.darcy.linear_solver");
    check(ls == "pcg" || ls == "direct", "fgm.darcy.linear_solver", "must be 'pcg' or 'direct'");
    c.darcy.solver = ls == "pcg" ? LinearSolver::pcg : LinearSolver::direct;
    c.darcy.tolerance = field<double>(doc, "fgm.darcy.tolerance");
    c.darcy.max_iterations = field<int>(doc, "fgm.darcy.max_iterations");
    c.stokes.fine_res = field<int>(doc, "fgm.stokes.fine_res");
    c.stokes.output_grid = field<int>(doc, "fgm.stokes.output_grid");
    c.stokes.viscosity = field<double>(doc, "fgm.stokes.viscosity");
    c.stokes.tolerance = field<double>(doc, "fgm.stokes.tolerance");
    c.stokes.max_iterations = field<int>(doc, "fgm.stokes.max_iterations");
    c.bc = {field<double>(doc, "bc.a_x"), field<double>(doc, "bc.a_y"), field<double>(doc, "bc.a_xy")};
    c.n_el = field<int>(doc, "cgm.n_el");
    c.partition = field<std::string>(doc, "cgm.partition");
    c.train = train_config_from_json(doc["train"]);
    c.predict.n_samples = field<int>(doc, "predict.n_samples");
    c.predict.coverage_k = field<double>(doc, "predict.coverage_k");
    c.predict.qoi_x = field<double>(doc, "predict.qoi_x");
    c.predict.qoi_y = field<double>(doc, "predict.qoi_y");
    c.predict.param_draws = field<int>(doc, "predict.param_draws");
    c.predict.bins = field<int>(doc, "predict.bins");
    c.refine.start = field<std::string>(doc, "refine.start");
    c.refine.max_splits = field<int>(doc, "refine.max_splits");
    c.refine.round_iterations = field<int>(doc, "refine.round_iterations");
    c.validate();
    return c;
}

json apply_env_overrides(json doc, const std::map<std::string, std::string>& env) {
    std::map<std::string, std::string> keys;
    flatten(to_json(RunConfig{}), "", keys);
    for (const auto& [name, value] : env) {
        if (name.rfind("DGRAIN_", 0) != 0) continue;
        auto it = keys.find(name.substr(7));
        if (it == keys.end()) continue;
        const std::string& path = it->second;
        const json proto = to_json(RunConfig{}).at(pointer(path));
        json v;
        try {
            if (proto.is_string()) {
                v = value;
            } else if (proto.is_boolean()) {
                if (value == "1" || value == "true")
                    v = true;
                else if (value == "0" || value == "false")
                    v = false;
                else
                    throw ConfigError("expects a boolean");
            } else if (proto.is_number_unsigned()) {
                std::size_t pos = 0;
                v = std::stoull(value, &pos);
                if (pos != value.size() || value.find('-') != std::string::npos) throw ConfigError("expects an unsigned integer");
            } else if (proto.is_number_integer()) {
                std::size_t pos = 0;
                v = std::stoll(value, &pos);
                if (pos != value.size()) throw ConfigError("expects an integer");
            } else {
                std::size_t pos = 0;
                v = std::stod(value, &pos);
                if (pos != value.size()) throw ConfigError("expects a number");
            }
        } catch (const ConfigError& e) {
            throw ConfigError("config: environment " + name + " (field '" + path + "') " + e.what());
        } catch (const std::exception&) {
            throw ConfigError("config: environment " + name + " (field '" + path + "') cannot parse '" + value + "'");
        }
        // Make sure the overridden document path exists before assignment.
        json& slot = doc[pointer(path)];
        slot = v;
    }
    return doc;
}

std::map<std::string, std::string> dgrain_environment() {
    std::map<std::string, std::string> env;
    for (char** e = environ; e && *e; ++e) {
        std::string s(*e);
        auto eq = s.find('=');
        if (eq != std::string::npos && s.rfind("DGRAIN_", 0) == 0) env[s.substr(0, eq)] = s.substr(eq + 1);
    }
    return env;
}

RunConfig load_run_config(const std::filesystem::path& file) {
    json doc = json::object();
    if (!file.empty()) doc = read_json(file);
    if (!doc.is_object()) throw ConfigError("config: " + file.string() + " must contain a JSON object");
    json full = to_json(RunConfig{});
    overlay(full, doc, "");
    return run_config_from_json(apply_env_overrides(full, dgrain_environment()));
}

}  // namespace dgrain
