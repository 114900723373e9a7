#include "dgrain/serialize.hpp"

#include <fstream>
#include <sstream>

namespace dgrain {
namespace {

json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd json_vec(const json& j) {
    auto v = j.get<std::vector<double>>();
    return Eigen::Map<VectorXd>(v.data(), Eigen::Index(v.size()));
}

json mat_json(const MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
    return rows;
}

MatrixXd json_mat(const json& j) {
    if (j.empty()) return MatrixXd();
    MatrixXd m(Eigen::Index(j.size()), Eigen::Index(j[0].size()));
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (j[r].size() != std::size_t(m.cols())) throw IoError("ragged matrix in JSON");
        for (std::size_t c = 0; c < j[r].size(); ++c) m(Eigen::Index(r), Eigen::Index(c)) = j[r][c].get<double>();
    }
    return m;
}

template <typename T>
T get_or(const json& j, const char* key, T def) {
    auto it = j.find(key);
    return it == j.end() ? def : it->get<T>();
}

const char* kind_name(FeatureKind k) {
    switch (k) {
        case FeatureKind::constant: return "constant";
        case FeatureKind::pore_fraction: return "pore_fraction";
        case FeatureKind::interface_area: return "interface_area";
        case FeatureKind::maxwell: return "maxwell";
        case FeatureKind::sca: return "sca";
        case FeatureKind::lineal_path: return "lineal_path";
        case FeatureKind::chord_length_density: return "chord_length_density";
        case FeatureKind::two_point_correlation: return "two_point_correlation";
        case FeatureKind::dt_mean: return "dt_mean";
        case FeatureKind::dt_variance: return "dt_variance";
        case FeatureKind::dt_max: return "dt_max";
        case FeatureKind::pore_size_density: return "pore_size_density";
        case FeatureKind::void_nearest_neighbor: return "void_nearest_neighbor";
        case FeatureKind::radius_moment: return "radius_moment";
        case FeatureKind::mean_edge_distance: return "mean_edge_distance";
        case FeatureKind::min_edge_distance: return "min_edge_distance";
        case FeatureKind::mean_center_distance: return "mean_center_distance";
    }
    return "?";
}

FeatureKind kind_from(const std::string& s) {
    for (int k = 0; k <= int(FeatureKind::mean_center_distance); ++k)
        if (s == kind_name(FeatureKind(k))) return FeatureKind(k);
    throw ConfigError("unknown feature kind '" + s + "'");
}

const char* transform_name(TransformKind t) {
    switch (t) {
        case TransformKind::identity: return "identity";
        case TransformKind::log: return "log";
        case TransformKind::power: return "power";
        case TransformKind::exp: return "exp";
    }
    return "?";
}

TransformKind transform_from(const std::string& s) {
    if (s == "identity") return TransformKind::identity;
    if (s == "log") return TransformKind::log;
    if (s == "power") return TransformKind::power;
    if (s == "exp") return TransformKind::exp;
    throw ConfigError("unknown feature transform '" + s + "'");
}

}  // namespace

json to_json(const BoundaryFlux& bc) { return {{"a_x", bc.a_x}, {"a_y", bc.a_y}, {"a_xy", bc.a_xy}}; }

BoundaryFlux bc_from_json(const json& j) {
    return {j.at("a_x").get<double>(), j.at("a_y").get<double>(), j.at("a_xy").get<double>()};
}

BoundaryFlux parse_bc(const std::string& s) {
    std::stringstream ss(s);
    std::string tok;
    std::vector<double> v;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t pos = 0;
            v.push_back(std::stod(tok, &pos));
            if (pos != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ConfigError("bc: cannot parse '" + tok + "' as a number");
        }
    }
    if (v.size() != 3) throw ConfigError("bc: expected three comma-separated values ax,ay,axy");
    return {v[0], v[1], v[2]};
}

json to_json(const MicrostructureParams& p) {
    return {{"mu_ex", p.mu_ex}, {"sigma_ex", p.sigma_ex}, {"mu_r_base", p.mu_r_base}, {"sigma_r", p.sigma_r},
            {"l_x", p.l_x},     {"l_r", p.l_r},           {"l_s", p.l_s},             {"margin", p.margin},
            {"seed", p.seed}};
}

MicrostructureParams micro_params_from_json(const json& j) {
    MicrostructureParams p;
    p.mu_ex = get_or(j, "mu_ex", p.mu_ex);
    p.sigma_ex = get_or(j, "sigma_ex", p.sigma_ex);
    p.mu_r_base = get_or(j, "mu_r_base", p.mu_r_base);
    p.sigma_r = get_or(j, "sigma_r", p.sigma_r);
    p.l_x = get_or(j, "l_x", p.l_x);
    p.l_r = get_or(j, "l_r", p.l_r);
    p.l_s = get_or(j, "l_s", p.l_s);
    p.margin = get_or(j, "margin", p.margin);
    p.seed = get_or<std::uint64_t>(j, "seed", p.seed);
    return p;
}

json to_json(const Partition& p) {
    json cells = json::array();
    for (const Cell& c : p.cells())
        cells.push_back({{"id", c.id}, {"parent", c.parent}, {"x0", c.x0}, {"y0", c.y0}, {"x1", c.x1}, {"y1", c.y1}});
    return {{"n_el", p.n_el()}, {"next_id", p.next_id()}, {"cells", cells}};
}

Partition partition_from_json(const json& j) {
    std::vector<Cell> cells;
    for (const auto& c : j.at("cells")) {
        Cell k;
        k.id = c.at("id").get<int>();
        k.parent = get_or(c, "parent", -1);
        k.x0 = c.at("x0").get<int>();
        k.y0 = c.at("y0").get<int>();
        k.x1 = c.at("x1").get<int>();
        k.y1 = c.at("y1").get<int>();
        cells.push_back(k);
    }
    int next = 0;
    for (const Cell& c : cells) next = std::max(next, c.id + 1);
    return Partition(j.at("n_el").get<int>(), std::move(cells), get_or(j, "next_id", next));
}

Partition parse_partition(const std::string& spec, int n_el) {
    auto x = spec.find('x');
    if (x != std::string::npos && fs::path(spec).extension() != ".json") {
        try {
            int a = std::stoi(spec.substr(0, x)), b = std::stoi(spec.substr(x + 1));
            if (a != b) throw ConfigError("partition: only square KxK specs are supported");
            return Partition::uniform(n_el, a);
        } catch (const std::invalid_argument&) {
        }
    }
    Partition p = partition_from_json(read_json(spec));
    require(p.n_el() == n_el, "partition file element grid does not match n_el");
    return p;
}

json to_json(const FeatureSpec& s) {
    json j = {{"id", s.id},
              {"scope", s.scope == FeatureScope::global ? "global" : "local"},
              {"kind", kind_name(s.kind)},
              {"phase", s.phase == Phase::pore ? "pore" : "solid"},
              {"transform", transform_name(s.transform)}};
    if (s.transform == TransformKind::power) j["power"] = s.power;
    if (s.kind == FeatureKind::lineal_path || s.kind == FeatureKind::two_point_correlation ||
        s.kind == FeatureKind::pore_size_density)
        j["d"] = s.d;
    if (s.kind == FeatureKind::chord_length_density) {
        j["bin_lo"] = s.bin_lo;
        j["bin_hi"] = s.bin_hi;
    }
    if (s.kind == FeatureKind::radius_moment) j["moment"] = s.moment;
    return j;
}

FeatureSpec feature_spec_from_json(const json& j) {
    FeatureSpec s;
    s.id = j.at("id").get<std::string>();
    s.scope = get_or<std::string>(j, "scope", "local") == "global" ? FeatureScope::global : FeatureScope::local;
    s.kind = kind_from(j.at("kind").get<std::string>());
    s.phase = get_or<std::string>(j, "phase", "pore") == "solid" ? Phase::solid : Phase::pore;
    s.transform = transform_from(get_or<std::string>(j, "transform", "identity"));
    s.power = get_or(j, "power", 1.0);
    s.d = get_or(j, "d", 0.0);
    s.bin_lo = get_or(j, "bin_lo", 0.0);
    s.bin_hi = get_or(j, "bin_hi", 0.0);
    s.moment = get_or(j, "moment", 1.0);
    return s;
}

json to_json(const FeatureRegistry& r) {
    json a = json::array();
    for (const auto& s : r) a.push_back(to_json(s));
    return a;
}

FeatureRegistry registry_from_json(const json& j) {
    FeatureRegistry r;
    for (const auto& s : j) r.push_back(feature_spec_from_json(s));
    validate_registry(r);
    return r;
}

json to_json(const HyperPriors& h) {
    return {{"a", h.a}, {"b", h.b}, {"c", h.c}, {"d", h.d}, {"e", h.e}, {"f", h.f}};
}

HyperPriors hyper_from_json(const json& j) {
    HyperPriors h;
    h.a = get_or(j, "a", h.a);
    h.b = get_or(j, "b", h.b);
    h.c = get_or(j, "c", h.c);
    h.d = get_or(j, "d", h.d);
    h.e = get_or(j, "e", h.e);
    h.f = get_or(j, "f", h.f);
    return h;
}

json to_json(const TrainConfig& c) {
    return {{"hyper", to_json(c.hyper)},
            {"adam", {{"alpha", c.adam.alpha}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
            {"mc_samples", c.mc_samples},
            {"adam_steps", c.adam_steps},
            {"cache_samples", c.cache_samples},
            {"tolerance", c.tolerance},
            {"patience", c.patience},
            {"max_iterations", c.max_iterations},
            {"min_iterations", c.min_iterations},
            {"closed_form_sweeps", c.closed_form_sweeps},
            {"init_sigma_lambda", c.init_sigma_lambda},
            {"tied_conjugate_shape", c.tied_conjugate_shape},
            {"monotone_bbvi", c.monotone_bbvi},
            {"parallelism", c.parallelism},
            {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j, const TrainConfig& d) {
    TrainConfig c = d;
    if (j.contains("hyper")) c.hyper = hyper_from_json(j["hyper"]);
    if (j.contains("adam")) {
        const auto& a = j["adam"];
        c.adam.alpha = get_or(a, "alpha", c.adam.alpha);
        c.adam.beta1 = get_or(a, "beta1", c.adam.beta1);
        c.adam.beta2 = get_or(a, "beta2", c.adam.beta2);
        c.adam.eps = get_or(a, "eps", c.adam.eps);
    }
    c.mc_samples = get_or(j, "mc_samples", c.mc_samples);
    c.adam_steps = get_or(j, "adam_steps", c.adam_steps);
    c.cache_samples = get_or(j, "cache_samples", c.cache_samples);
    c.tolerance = get_or(j, "tolerance", c.tolerance);
    c.patience = get_or(j, "patience", c.patience);
    c.max_iterations = get_or(j, "max_iterations", c.max_iterations);
    c.min_iterations = get_or(j, "min_iterations", c.min_iterations);
    c.closed_form_sweeps = get_or(j, "closed_form_sweeps", c.closed_form_sweeps);
    c.init_sigma_lambda = get_or(j, "init_sigma_lambda", c.init_sigma_lambda);
    c.tied_conjugate_shape = get_or(j, "tied_conjugate_shape", c.tied_conjugate_shape);
    c.monotone_bbvi = get_or(j, "monotone_bbvi", c.monotone_bbvi);
    c.parallelism = get_or(j, "parallelism", c.parallelism);
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    return c;
}

json to_json(const VariationalState& s) {
    json lat = json::array();
    for (const auto& l : s.lat) lat.push_back({{"mu", vec_json(l.mu)}, {"log_sigma", vec_json(l.log_sigma)}});
    return {{"hyper", to_json(s.hyper)},
            {"tied_conjugate_shape", s.tied_conjugate_shape},
            {"iteration", s.iteration},
            {"mu_theta", mat_json(s.enc.mu_theta)},
            {"var_theta", mat_json(s.enc.var_theta)},
            {"a_tilde", s.enc.a_tilde},
            {"b_tilde", vec_json(s.enc.b_tilde)},
            {"c_tilde", s.enc.c_tilde},
            {"d_tilde", vec_json(s.enc.d_tilde)},
            {"e_tilde", s.dec.e_tilde},
            {"f_tilde", vec_json(s.dec.f_tilde)},
            {"latent", lat},
            {"elbo_trace", s.elbo_trace}};
}

VariationalState state_from_json(const json& j) {
    VariationalState s;
    s.hyper = hyper_from_json(j.at("hyper"));
    s.tied_conjugate_shape = get_or(j, "tied_conjugate_shape", true);
    s.iteration = get_or(j, "iteration", 0);
    s.enc.mu_theta = json_mat(j.at("mu_theta"));
    s.enc.var_theta = json_mat(j.at("var_theta"));
    s.enc.a_tilde = j.at("a_tilde").get<double>();
    s.enc.b_tilde = json_vec(j.at("b_tilde"));
    s.enc.c_tilde = j.at("c_tilde").get<double>();
    s.enc.d_tilde = json_vec(j.at("d_tilde"));
    s.dec.e_tilde = j.at("e_tilde").get<double>();
    s.dec.f_tilde = json_vec(j.at("f_tilde"));
    for (const auto& l : j.at("latent")) {
        LatentPosterior p;
        p.mu = json_vec(l.at("mu"));
        p.log_sigma = json_vec(l.at("log_sigma"));
        p.adam.reset(2 * p.mu.size());
        s.lat.push_back(std::move(p));
    }
    s.elbo_trace = get_or(j, "elbo_trace", std::vector<double>{});
    const Eigen::Index m = s.enc.mu_theta.cols(), f = s.enc.mu_theta.rows();
    if (s.enc.var_theta.rows() != f || s.enc.var_theta.cols() != m || s.enc.b_tilde.size() != f ||
        s.enc.d_tilde.size() != m)
        throw IoError("model state: inconsistent encoder dimensions");
    return s;
}

json to_json(const SurrogateModel& m) {
    return {{"format", "dgrain-model-1"},
            {"n_el", m.n_el},
            {"fine_grid", m.fine_grid},
            {"partition", to_json(m.partition)},
            {"registry", to_json(m.registry)},
            {"feature_ids", m.feature_ids()},
            {"config", to_json(m.config)},
            {"state", to_json(m.state)}};
}

SurrogateModel surrogate_from_json(const json& j) {
    if (get_or<std::string>(j, "format", "") != "dgrain-model-1") throw IoError("not a dgrain model document");
    SurrogateModel m;
    m.n_el = j.at("n_el").get<int>();
    m.fine_grid = j.at("fine_grid").get<int>();
    m.partition = partition_from_json(j.at("partition"));
    m.registry = registry_from_json(j.at("registry"));
    m.config = train_config_from_json(j.at("config"));
    m.state = state_from_json(j.at("state"));
    if (m.state.n_cells() != m.partition.size() || m.state.n_features() != int(m.registry.size()) ||
        m.state.n_fine() != m.fine_grid * m.fine_grid)
        throw IoError("model: state dimensions do not match partition/registry/grid");
    return m;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(1) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

void write_f64(const fs::path& path, const double* data, std::size_t n) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data), std::streamsize(n * sizeof(double)));
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<double> read_f64(const fs::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open " + path.string());
    auto size = std::size_t(in.tellg());
    if (size % sizeof(double)) throw IoError(path.string() + ": size is not a multiple of 8 bytes");
    std::vector<double> v(size / sizeof(double));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(v.data()), std::streamsize(size));
    if (!in) throw IoError("read failed for " + path.string());
    return v;
}

void write_micro(const fs::path& path, const Microstructure& m) {
    const auto& px = m.pixels.data();
    std::vector<unsigned char> bytes((px.size() + 7) / 8, 0);
    for (std::size_t k = 0; k < px.size(); ++k)
        if (px[k]) bytes[k / 8] |= static_cast<unsigned char>(0x80u >> (k % 8));
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write " + path.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
        if (!out) throw IoError("write failed for " + path.string());
    }
    json side = {{"resolution", m.pixels.resolution()}};
    if (m.params) {
        side["params"] = to_json(*m.params);
        side["seed"] = m.params->seed;
    }
    if (m.disks) {
        json d = json::array();
        for (const Disk& k : *m.disks) d.push_back({k.x, k.y, k.r});
        side["disks"] = d;
    }
    write_json(fs::path(path.string() + ".json"), side);
}

Microstructure read_micro(const fs::path& path) {
    const fs::path side_path(path.string() + ".json");
    if (!fs::exists(side_path)) throw IoError("missing sidecar " + side_path.string());
    json side = read_json(side_path);
    Microstructure m;
    int res = 0;
    try {
        res = side.at("resolution").get<int>();
        if (side.contains("params")) m.params = micro_params_from_json(side["params"]);
        if (side.contains("disks")) {
            std::vector<Disk> disks;
            for (const auto& d : side["disks"]) disks.push_back({d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>()});
            m.disks = std::move(disks);
        }
    } catch (const json::exception& e) {
        throw IoError("corrupted sidecar " + side_path.string() + ": " + e.what());
    }
    if (res <= 0) throw IoError("corrupted sidecar " + side_path.string() + ": invalid resolution");
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open " + path.string());
    const std::size_t n = std::size_t(res) * res;
    if (std::size_t(in.tellg()) != (n + 7) / 8) throw IoError(path.string() + ": size does not match resolution");
    std::vector<unsigned char> bytes((n + 7) / 8);
    in.seekg(0);
    in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
    m.pixels = PixelGrid(res);
    for (std::size_t k = 0; k < n; ++k) m.pixels.data()[k] = (bytes[k / 8] >> (7 - k % 8)) & 1u;
    return m;
}

void write_field(const fs::path& path, const FineField& f) {
    write_f64(path, f.values.data(), std::size_t(f.values.size()));
    write_json(fs::path(path.string() + ".json"), {{"grid", f.grid}, {"bc", to_json(f.bc)}});
}

FineField read_field(const fs::path& path) {
    const fs::path side_path(path.string() + ".json");
    if (!fs::exists(side_path)) throw IoError("missing sidecar " + side_path.string());
    json side = read_json(side_path);
    FineField f;
    try {
        f.grid = side.at("grid").get<int>();
        f.bc = bc_from_json(side.at("bc"));
    } catch (const json::exception& e) {
        throw IoError("corrupted sidecar " + side_path.string() + ": " + e.what());
    }
    auto v = read_f64(path);
    if (f.grid <= 1 || v.size() != std::size_t(f.grid) * f.grid)
        throw IoError(path.string() + ": field size does not match grid in sidecar");
    f.values = Eigen::Map<VectorXd>(v.data(), Eigen::Index(v.size()));
    if (!f.values.allFinite()) throw IoError(path.string() + ": non-finite values");
    return f;
}

}  // namespace dgrain
