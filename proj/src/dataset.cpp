#include "dgrain/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include "dgrain/parallel.hpp"
#include "dgrain/serialize.hpp"

namespace dgrain {

fs::path micro_path(const fs::path& dir, int id) { return dir / ("sample_" + std::to_string(id) + ".micro"); }
fs::path field_path(const fs::path& dir, int id) { return dir / ("sample_" + std::to_string(id) + ".uf"); }

void write_dataset(const fs::path& dir, const Dataset& d) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    require(d.micro.size() == d.ids.size(), "dataset: ids and microstructures differ in count");
    require(d.fields.empty() || d.fields.size() == d.ids.size(), "dataset: ids and fields differ in count");
    for (int k = 0; k < d.size(); ++k) {
        write_micro(micro_path(dir, d.ids[k]), d.micro[k]);
        if (!d.fields.empty()) write_field(field_path(dir, d.ids[k]), d.fields[k]);
    }
}

Dataset ingest_dataset(const fs::path& dir, bool require_fields) {
    if (!fs::is_directory(dir)) throw IoError("dataset directory " + dir.string() + " does not exist");
    static const std::regex pattern(R"(sample_(\d+)\.micro)");
    Dataset d;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = e.path().filename().string();
        if (std::regex_match(name, m, pattern)) d.ids.push_back(std::stoi(m[1]));
    }
    if (d.ids.empty()) throw IoError("no sample_<n>.micro files in " + dir.string());
    std::sort(d.ids.begin(), d.ids.end());
    for (int id : d.ids) d.micro.push_back(read_micro(micro_path(dir, id)));
    const int res = d.micro[0].pixels.resolution();
    for (const auto& m : d.micro)
        if (m.pixels.resolution() != res) throw IoError("dataset: microstructures have different resolutions");
    if (require_fields) {
        for (int id : d.ids) {
            const fs::path p = field_path(dir, id);
            if (!fs::exists(p)) throw IoError("dataset: missing fine field " + p.string());
            d.fields.push_back(read_field(p));
        }
        for (const auto& f : d.fields)
            if (f.grid != d.fields[0].grid) throw IoError("dataset: fine fields use different grids");
    }
    return d;
}

VectorXd initial_log_permeability(const Microstructure& m, const Partition& p) {
    const int res = m.pixels.resolution();
    VectorXd lam(p.size());
    for (int c = 0; c < p.size(); ++c) {
        const Region r = cell_region(p, c, res);
        lam[c] = std::log(effective_medium(m.pixels, r, EffectiveMedium::maxwell));
    }
    return lam;
}

TrainingData make_training_data(const Dataset& d, const Partition& p, const FeatureRegistry& reg, int parallelism) {
    require(d.size() >= 1, "dataset is empty");
    require(int(d.fields.size()) == d.size(), "training needs a fine field for every sample");
    TrainingData t;
    auto fm = assemble_feature_matrices(d.micro, p, reg, parallelism);
    for (auto& f : fm) t.phi.push_back(std::move(f.values));
    for (const auto& s : reg) t.columns.push_back(s.id);
    t.init_lambda.resize(std::size_t(d.size()));
    parallel_for(d.size(), parallelism,
                 [&](int k) { t.init_lambda[std::size_t(k)] = initial_log_permeability(d.micro[k], p); });
    for (const auto& f : d.fields) {
        t.uf.push_back(f.values);
        t.bc.push_back(f.bc);
        t.keys.push_back(sample_key(f.values));
    }
    return t;
}

}  // namespace dgrain
