#include "dgrain/refine.hpp"

#include <limits>

#include "dgrain/log.hpp"

namespace dgrain {
namespace {

// Insert three copies of entry m after position m.
VectorXd expand(const VectorXd& v, int m) {
    VectorXd out(v.size() + 3);
    out.head(m + 1) = v.head(m + 1);
    out.segment(m + 1, 3).setConstant(v[m]);
    out.tail(v.size() - m - 1) = v.tail(v.size() - m - 1);
    return out;
}

MatrixXd expand_cols(const MatrixXd& a, int m) {
    MatrixXd out(a.rows(), a.cols() + 3);
    out.leftCols(m + 1) = a.leftCols(m + 1);
    for (int k = 1; k <= 3; ++k) out.col(m + k) = a.col(m);
    out.rightCols(a.cols() - m - 1) = a.rightCols(a.cols() - m - 1);
    return out;
}

}  // namespace

VectorXd score_cells(const VariationalState& s) { return elbo_per_cell(s); }

int select_split(const VectorXd& scores, const Partition& p) {
    require(scores.size() == p.size(), "select_split: score count does not match partition");
    int best = -1;
    for (int m = 0; m < p.size(); ++m) {
        if (!p.can_split(m)) continue;
        if (best < 0 || scores[m] < scores[best] || (scores[m] == scores[best] && p[m].id < p[best].id)) best = m;
    }
    return best;
}

VariationalState split_state(const VariationalState& s, const Partition& before, int cell_index) {
    require(cell_index >= 0 && cell_index < before.size(), "split_state: cell index out of range");
    require(s.n_cells() == before.size(), "split_state: state does not match partition");
    VariationalState out = s;
    auto& enc = out.enc;
    enc.mu_theta = expand_cols(s.enc.mu_theta, cell_index);
    enc.var_theta = expand_cols(s.enc.var_theta, cell_index);
    enc.d_tilde = expand(s.enc.d_tilde, cell_index);
    enc.a_tilde = s.hyper.a + (s.tied_conjugate_shape ? 0.5 * enc.mu_theta.cols() : 0.5);
    for (auto& l : out.lat) {
        l.mu = expand(l.mu, cell_index);
        l.log_sigma = expand(l.log_sigma, cell_index);
        l.adam.reset(2 * l.mu.size());
        l.lambda_mean.resize(0);
        l.lambda_sq.resize(0);
        ++l.version;
    }
    return out;
}

RefineResult refine_loop(const TrainingData& base_data, const FeatureProvider& features, int n_el, int fine_grid,
                         const Partition& initial, const RefineConfig& cfg) {
    require(cfg.max_splits >= 0, "refine: max_splits must be >= 0");
    require(base_data.size() >= 1, "refine: empty training data");
    initial.validate();

    TrainConfig tcfg = cfg.train;
    if (cfg.round_iterations > 0) {
        tcfg.max_iterations = cfg.round_iterations;
        tcfg.min_iterations = cfg.round_iterations;
    }

    RefineResult res;
    res.plan.max_splits = cfg.max_splits;
    Partition p = initial;
    TrainingData data = base_data;
    data.phi = features(p);
    if (!data.init_lambda.empty() && data.init_lambda[0].size() != p.size()) data.init_lambda.clear();

    VariationalState state;
    bool have_state = false;
    for (int round = 0;; ++round) {
        const CoarseModel cgm(n_el, p, data.bc[0], fine_grid);
        bool first = true;
        auto observer = [&](Stage st, const VariationalState& cur) {
            if (st != Stage::iteration_end || !first) return;
            first = false;
            if (!res.plan.splits.empty() && round > 0) res.plan.splits.back().elbo_after = elbo_full(cur, data);
        };
        const std::size_t before = have_state ? state.elbo_trace.size() : 0;
        TrainResult tr = have_state ? train_from(std::move(state), data, cgm, tcfg, observer)
                                    : train(data, cgm, tcfg, observer);
        state = std::move(tr.state);
        have_state = true;
        res.plan.partitions.push_back(p);
        res.plan.round_start.push_back(int(res.plan.elbo_trace.size()));
        res.plan.elbo_trace.insert(res.plan.elbo_trace.end(), state.elbo_trace.begin() + long(before),
                                   state.elbo_trace.end());
        log::info("refine: round " + std::to_string(round) + " cells " + std::to_string(p.size()) + " iterations " +
                  std::to_string(tr.iterations) + (tr.converged ? " (converged)" : ""));
        if (round == cfg.max_splits) break;

        const VectorXd scores = score_cells(state);
        res.plan.scores.push_back(scores);
        int m = select_split(scores, p);
        if (m < 0) {
            log::warn("refine: no splittable cell left, stopping after " + std::to_string(round) + " splits");
            break;
        }
        Eigen::Index argmin = 0;
        scores.minCoeff(&argmin);
        if (!p.can_split(int(argmin)))
            log::warn("refine: cell " + std::to_string(p[int(argmin)].id) +
                      " is at element resolution, splitting next-lowest cell " + std::to_string(p[m].id));

        SplitRecord rec;
        rec.round = round;
        rec.cell_id = p[m].id;
        rec.cell_index = m;
        rec.elbo_before = elbo_full(state, data);
        rec.elbo_after = std::numeric_limits<double>::quiet_NaN();
        res.plan.splits.push_back(rec);

        state = split_state(state, p, m);
        p = p.split_cell(m);
        data.phi = features(p);
        data.init_lambda.clear();  // the split state carries the latent means
    }
    res.state = std::move(state);
    res.partition = p;
    return res;
}

}  // namespace dgrain
