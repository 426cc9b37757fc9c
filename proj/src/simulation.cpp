#include "hbac/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

namespace hbac::sim {

const char* to_string(Scenario scenario) {
    return scenario == Scenario::constant ? "constant" : "linear";
}

Scenario scenario_from(const std::string& name) {
    if (name == "constant") return Scenario::constant;
    if (name == "linear") return Scenario::linear;
    raise(Errc::bad_config, "unknown scenario '" + name + "'");
}

const char* to_string(Experiment experiment) {
    switch (experiment) {
        case Experiment::insample_vs_oos: return "insample_vs_oos";
        case Experiment::bonferroni_effect: return "bonferroni_effect";
        case Experiment::perm_vs_t: return "perm_vs_t";
        case Experiment::accuracy_perm: return "accuracy_perm";
    }
    return "unknown";
}

Experiment experiment_from(const std::string& name) {
    if (name == "insample_vs_oos") return Experiment::insample_vs_oos;
    if (name == "bonferroni_effect") return Experiment::bonferroni_effect;
    if (name == "perm_vs_t") return Experiment::perm_vs_t;
    if (name == "accuracy_perm") return Experiment::accuracy_perm;
    raise(Errc::bad_config, "unknown experiment '" + name + "'");
}

void SimConfig::check() const {
    if (k_clusters < 2) raise(Errc::bad_config, "need at least 2 clusters");
    if (d < 1) raise(Errc::bad_config, "need at least 1 feature dimension");
    if (n_total == 0 || n_total % k_clusters != 0) {
        raise(Errc::bad_config,
              "n_total must be a positive multiple of k_clusters");
    }
}

double eta_for(Scenario scenario, std::size_t k, std::size_t K) {
    if (scenario == Scenario::constant) return 0.0;
    return -1.0 + 2.0 * static_cast<double>(k - 1) / static_cast<double>(K - 1);
}

double p_for(Scenario scenario, std::size_t k, std::size_t K) {
    if (scenario == Scenario::constant) return 0.5;
    return 0.1 + 0.8 * static_cast<double>(k - 1) / static_cast<double>(K - 1);
}

std::vector<ClusterParams> draw_cluster_params(const SimConfig& config,
                                               RngStream& rng) {
    config.check();
    std::vector<ClusterParams> params(config.k_clusters);
    for (std::size_t k = 0; k < config.k_clusters; ++k) {
        params[k].mu = rng.next_uniform(-1.0, 1.0);
        params[k].eta = eta_for(config.scenario, k + 1, config.k_clusters);
        params[k].p = p_for(config.scenario, k + 1, config.k_clusters);
    }
    return params;
}

GeneratedFeatures gen_features(const SimConfig& config,
                               const std::vector<ClusterParams>& params,
                               RngStream& rng) {
    config.check();
    GeneratedFeatures out;
    out.features = Matrix(config.n_total, config.d);
    out.true_cluster.resize(config.n_total);
    const std::size_t per = config.per_cluster();
    std::size_t row = 0;
    for (std::size_t k = 0; k < config.k_clusters; ++k) {
        for (std::size_t i = 0; i < per; ++i, ++row) {
            out.true_cluster[row] = k;
            double* p = out.features.row(row);
            for (std::size_t j = 0; j < config.d; ++j) {
                p[j] = params[k].mu + rng.next_gaussian();
            }
        }
    }
    return out;
}

std::vector<double> gen_metric(const SimConfig& config,
                               const std::vector<ClusterParams>& params,
                               const std::vector<std::size_t>& true_cluster,
                               RngStream& rng) {
    if (config.label_mode != LabelMode::direct_metric) {
        raise(Errc::bad_config, "gen_metric requires direct_metric mode");
    }
    std::vector<double> metric(true_cluster.size());
    for (std::size_t i = 0; i < metric.size(); ++i) {
        metric[i] = params[true_cluster[i]].eta + rng.next_gaussian();
    }
    return metric;
}

std::vector<int> gen_labels(const SimConfig& config,
                            const std::vector<ClusterParams>& params,
                            const std::vector<std::size_t>& true_cluster,
                            RngStream& rng) {
    if (config.label_mode != LabelMode::bernoulli_labels) {
        raise(Errc::bad_config, "gen_labels requires bernoulli_labels mode");
    }
    std::vector<int> labels(true_cluster.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        labels[i] = rng.next_bernoulli(params[true_cluster[i]].p) ? 1 : 0;
    }
    return labels;
}

namespace {

// Solves H x = g in place; H is (m x m) row-major. Gaussian elimination
// with partial pivoting; a vanishing pivot gets a Levenberg bump upstream.
bool solve_linear(std::vector<double> h, std::vector<double> g,
                  std::size_t m, std::vector<double>& out) {
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < m; ++r) {
            if (std::fabs(h[r * m + col]) > std::fabs(h[pivot * m + col])) {
                pivot = r;
            }
        }
        if (std::fabs(h[pivot * m + col]) < 1e-240) return false;
        if (pivot != col) {
            for (std::size_t c = 0; c < m; ++c) {
                std::swap(h[col * m + c], h[pivot * m + c]);
            }
            std::swap(g[col], g[pivot]);
        }
        const double inv = 1.0 / h[col * m + col];
        for (std::size_t r = col + 1; r < m; ++r) {
            const double f = h[r * m + col] * inv;
            if (f == 0.0) continue;
            for (std::size_t c = col; c < m; ++c) {
                h[r * m + c] -= f * h[col * m + c];
            }
            g[r] -= f * g[col];
        }
    }
    out.assign(m, 0.0);
    for (std::size_t ri = m; ri-- > 0;) {
        double s = g[ri];
        for (std::size_t c = ri + 1; c < m; ++c) s -= h[ri * m + c] * out[c];
        out[ri] = s / h[ri * m + ri];
    }
    return true;
}

double penalized_nll(MatrixView x, const std::vector<int>& y,
                     const std::vector<double>& w, double b, double lambda) {
    double nll = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) {
        double z = b;
        const double* p = x.row(r);
        for (std::size_t j = 0; j < x.cols; ++j) z += w[j] * p[j];
        // log(1 + e^z) - y z, evaluated stably.
        nll += std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z))) -
               (y[r] != 0 ? z : 0.0);
    }
    double reg = 0.0;
    for (double v : w) reg += v * v;
    return nll + 0.5 * lambda * reg;
}

}  // namespace

LogisticModel train_logistic(MatrixView x, const std::vector<int>& y,
                             double l2_penalty, std::uint64_t seed) {
    (void)seed;
    if (x.rows < 2 || x.rows != y.size()) {
        raise(Errc::bad_config, "need >= 2 rows and matching label count");
    }
    const bool has0 = std::any_of(y.begin(), y.end(), [](int v) { return v == 0; });
    const bool has1 = std::any_of(y.begin(), y.end(), [](int v) { return v != 0; });
    if (!has0 || !has1) {
        raise(Errc::single_class, "labels contain a single class");
    }
    if (l2_penalty < 0.0) raise(Errc::bad_config, "l2_penalty must be >= 0");

    const std::size_t d = x.cols;
    const std::size_t m = d + 1;  // weights then intercept
    std::vector<double> w(d, 0.0);
    double b = 0.0;

    LogisticModel model;
    model.l2_penalty = l2_penalty;

    constexpr double kGradTol = 1e-8;
    constexpr std::size_t kMaxIter = 500;

    double loss = penalized_nll(x, y, w, b, l2_penalty);
    model.loss_trace.push_back(loss);

    std::vector<double> prob(x.rows);
    std::vector<double> grad(m);
    std::vector<double> hess(m * m);
    std::vector<double> delta;

    for (std::size_t iter = 1; iter <= kMaxIter; ++iter) {
        // Gradient and Hessian of the penalized NLL.
        for (std::size_t r = 0; r < x.rows; ++r) {
            double z = b;
            const double* p = x.row(r);
            for (std::size_t j = 0; j < d; ++j) z += w[j] * p[j];
            prob[r] = 1.0 / (1.0 + std::exp(-z));
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        std::fill(hess.begin(), hess.end(), 0.0);
        for (std::size_t r = 0; r < x.rows; ++r) {
            const double* p = x.row(r);
            const double resid = prob[r] - static_cast<double>(y[r]);
            const double s = prob[r] * (1.0 - prob[r]);
            for (std::size_t j = 0; j < d; ++j) {
                grad[j] += resid * p[j];
                for (std::size_t l = j; l < d; ++l) {
                    hess[j * m + l] += s * p[j] * p[l];
                }
                hess[j * m + d] += s * p[j];
            }
            grad[d] += resid;
            hess[d * m + d] += s;
        }
        for (std::size_t j = 0; j < d; ++j) {
            grad[j] += l2_penalty * w[j];
            hess[j * m + j] += l2_penalty;
        }
        for (std::size_t j = 0; j < m; ++j) {  // mirror the upper triangle
            for (std::size_t l = j + 1; l < m; ++l) {
                hess[l * m + j] = hess[j * m + l];
            }
        }

        double gnorm = 0.0;
        for (double g : grad) gnorm += g * g;
        gnorm = std::sqrt(gnorm);
        model.grad_norm = gnorm;
        model.iterations = iter - 1;
        if (gnorm <= kGradTol) break;

        // Newton direction, with a Levenberg bump if the solve fails.
        std::vector<double> h = hess;
        double bump = 0.0;
        while (!solve_linear(h, grad, m, delta)) {
            bump = bump == 0.0 ? 1e-8 : bump * 100.0;
            if (bump > 1e8) {
                raise(Errc::domain, "logistic Hessian is unusable");
            }
            h = hess;
            for (std::size_t j = 0; j < m; ++j) h[j * m + j] += bump;
        }

        // Step halving keeps the penalized loss non-increasing up to
        // summation noise; near the optimum the true decrement is far below
        // double resolution, so the acceptance needs that slack or the full
        // Newton step would stall just above the gradient tolerance.
        const double slack = 1e-12 * (1.0 + std::fabs(loss));
        double step = 1.0;
        bool improved = false;
        for (int half = 0; half < 40; ++half) {
            std::vector<double> w_new = w;
            double b_new = b;
            for (std::size_t j = 0; j < d; ++j) w_new[j] -= step * delta[j];
            b_new -= step * delta[d];
            const double cand = penalized_nll(x, y, w_new, b_new, l2_penalty);
            if (cand <= loss + slack) {
                w = std::move(w_new);
                b = b_new;
                loss = cand;
                improved = true;
                break;
            }
            step /= 2.0;
        }
        model.loss_trace.push_back(loss);
        if (!improved) break;  // at numerical floor; gradient check decides
    }

    if (model.grad_norm > kGradTol) {
        // One more gradient evaluation at the final point (the loop may have
        // exited on the line search): recompute to report accurately.
        double gnorm = 0.0;
        std::vector<double> g(m, 0.0);
        for (std::size_t r = 0; r < x.rows; ++r) {
            double z = b;
            const double* p = x.row(r);
            for (std::size_t j = 0; j < d; ++j) z += w[j] * p[j];
            const double pr = 1.0 / (1.0 + std::exp(-z));
            const double resid = pr - static_cast<double>(y[r]);
            for (std::size_t j = 0; j < d; ++j) g[j] += resid * p[j];
            g[d] += resid;
        }
        for (std::size_t j = 0; j < d; ++j) g[j] += l2_penalty * w[j];
        for (double v : g) gnorm += v * v;
        model.grad_norm = std::sqrt(gnorm);
        if (model.grad_norm > kGradTol) {
            raise(Errc::domain, "logistic training did not reach tolerance");
        }
    }

    model.weights = std::move(w);
    model.intercept = b;
    return model;
}

std::vector<double> predict_probability(const LogisticModel& model,
                                        MatrixView x) {
    if (x.cols != model.weights.size()) {
        raise(Errc::schema_mismatch, "feature arity does not match the model");
    }
    std::vector<double> out(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r) {
        double z = model.intercept;
        const double* p = x.row(r);
        for (std::size_t j = 0; j < x.cols; ++j) z += model.weights[j] * p[j];
        out[r] = 1.0 / (1.0 + std::exp(-z));
    }
    return out;
}

std::vector<int> predict_label(const LogisticModel& model, MatrixView x) {
    const auto probs = predict_probability(model, x);
    std::vector<int> out(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        out[i] = probs[i] >= 0.5 ? 1 : 0;
    }
    return out;
}

std::vector<double> metric_from_model(MetricSource kind,
                                      const LogisticModel& model, MatrixView x,
                                      const std::vector<int>& y) {
    if (kind == MetricSource::predicted_probability) {
        return predict_probability(model, x);
    }
    const auto yhat = predict_label(model, x);
    std::vector<double> metric(yhat.size());
    if (kind == MetricSource::predicted_value) {
        for (std::size_t i = 0; i < yhat.size(); ++i) {
            metric[i] = static_cast<double>(yhat[i]);
        }
    } else {
        if (y.size() != yhat.size()) {
            raise(Errc::bad_config, "labels required for the accuracy metric");
        }
        for (std::size_t i = 0; i < yhat.size(); ++i) {
            metric[i] = yhat[i] == y[i] ? 1.0 : 0.0;
        }
    }
    return metric;
}

namespace {

FeatureSchema numeric_schema(std::size_t d) {
    FeatureSchema schema;
    schema.metric_kind = MetricKind::continuous;
    for (std::size_t j = 0; j < d; ++j) {
        schema.columns.push_back({"x" + std::to_string(j),
                                  ColumnKind::numeric,
                                  {}});
    }
    return schema;
}

// Stream tags for the independent per-simulation substreams.
enum : std::uint64_t {
    kTagParams = 1,
    kTagFeatures = 2,
    kTagOutcome = 3,
    kTagSplit = 4,
    kTagFit = 5,
    kTagPerm = 6,
};

SimRecord run_single(const CampaignConfig& cfg, std::size_t sim_index) {
    const SimConfig& sc = cfg.sim;
    const std::uint64_t seed = sc.seed;

    RngStream params_rng(seed, derive_stream(kTagParams, sim_index));
    RngStream features_rng(seed, derive_stream(kTagFeatures, sim_index));
    RngStream outcome_rng(seed, derive_stream(kTagOutcome, sim_index));

    SimConfig local = sc;
    local.label_mode = cfg.uses_labels() ? LabelMode::bernoulli_labels
                                         : LabelMode::direct_metric;

    const auto params = draw_cluster_params(local, params_rng);
    auto generated = gen_features(local, params, features_rng);

    std::vector<int> labels;
    std::vector<double> metric;
    const MetricSource source =
        cfg.experiment == Experiment::accuracy_perm
            ? MetricSource::accuracy
            : (cfg.probability_metric ? MetricSource::predicted_probability
                                      : MetricSource::predicted_value);
    if (cfg.uses_labels()) {
        labels = gen_labels(local, params, generated.true_cluster, outcome_rng);
        const LogisticModel model = train_logistic(
            generated.features.view(), labels, cfg.l2_penalty);
        metric = metric_from_model(source, model, generated.features.view(),
                                   labels);
    } else {
        metric = gen_metric(local, params, generated.true_cluster, outcome_rng);
    }

    const Dataset full(numeric_schema(local.d),
                       std::move(generated.features.data), metric);
    const SplitIndices split = split_sample(
        local.n_total, cfg.test_fraction, derive_stream(seed, kTagSplit, sim_index));
    const Dataset train = full.subset(split.train);
    const Dataset test = full.subset(split.test);

    HbacConfig hc;
    hc.n_min = cfg.n_min != 0
                   ? cfg.n_min
                   : std::max<std::size_t>(2, split.train.size() / 10);
    hc.max_iterations = cfg.max_iterations;
    hc.splitter = Splitter::kmeans;
    hc.seed = derive_stream(seed, kTagFit, sim_index);
    const Partition partition = fit_hbac(train, hc, "simulation-train");

    SimRecord record;
    record.sim = sim_index;
    record.n_clusters = partition.size();

    // In-sample differences straight from the fitted membership.
    const auto& train_metric = train.metric();
    double train_total = 0.0;
    for (double v : train_metric) train_total += v;
    for (std::size_t c = 0; c < partition.size(); ++c) {
        const Cluster& cl = partition.clusters[c];
        ClusterRecord cr;
        cr.cluster = c;
        cr.n_train = cl.members.size();
        double in_sum = 0.0;
        for (std::size_t r : cl.members) in_sum += train_metric[r];
        const double n_in = static_cast<double>(cl.members.size());
        const double n_out =
            static_cast<double>(train_metric.size()) - n_in;
        cr.diff_in =
            in_sum / n_in - (train_total - in_sum) / n_out;
        record.clusters.push_back(cr);
    }

    const TestReport report =
        test_clusters(partition, test, cfg.alpha, Correction::bonferroni,
                      "simulation-test");
    for (const ClusterTest& t : report.tests) {
        ClusterRecord& cr = record.clusters[t.cluster_index];
        cr.n_test = t.n_in;
        cr.diff_oos = t.difference;
        cr.p_t_raw = t.p_raw;
        cr.p_t_adj = t.p_adjusted;
    }
    record.reject_t_raw = report.any_significant_raw();
    record.reject_t_bonf = report.any_significant();

    if (cfg.uses_labels()) {
        const auto test_assignment = assign_all(partition, test);
        const auto& test_rows = split.test;
        auto metric_fn = [&](const std::vector<int>& perm_labels) {
            const LogisticModel m = train_logistic(
                full.features(), perm_labels, cfg.l2_penalty);
            const auto all_metric = metric_from_model(
                source, m, full.features(), perm_labels);
            std::vector<double> restricted;
            restricted.reserve(test_rows.size());
            for (std::size_t r : test_rows) restricted.push_back(all_metric[r]);
            return restricted;
        };
        auto assignment_fn = [&](const std::vector<double>&) {
            return test_assignment;
        };
        const PermutationResult perm = permutation_test(
            labels, metric_fn, assignment_fn, partition.size(), cfg.n_perm,
            derive_stream(seed, kTagPerm, sim_index));
        bool reject = false;
        for (std::size_t c = 0; c < partition.size(); ++c) {
            record.clusters[c].p_perm_raw = perm.p_raw[c];
            record.clusters[c].p_perm_max = perm.p_max[c];
            if (perm.p_max[c] && *perm.p_max[c] <= cfg.alpha) reject = true;
        }
        record.reject_perm = reject;
    }
    return record;
}

RateSummary rate_summary(std::size_t hits, std::size_t n) {
    RateSummary s;
    if (n == 0) return s;
    s.rate = static_cast<double>(hits) / static_cast<double>(n);
    const double half =
        1.96 * std::sqrt(s.rate * (1.0 - s.rate) / static_cast<double>(n));
    s.ci_low = std::max(0.0, s.rate - half);
    s.ci_high = std::min(1.0, s.rate + half);
    return s;
}

}  // namespace

CampaignResult run_campaign(const CampaignConfig& cfg) {
    if (cfg.n_sims < 1) raise(Errc::bad_config, "need at least 1 simulation");
    cfg.sim.check();

    CampaignResult result;
    result.config = cfg;
    result.sims.resize(cfg.n_sims);

    const std::size_t workers =
        std::max<std::size_t>(1, std::min(cfg.threads, cfg.n_sims));
    if (workers == 1) {
        for (std::size_t s = 0; s < cfg.n_sims; ++s) {
            try {
                result.sims[s] = run_single(cfg, s);
            } catch (const Error& e) {
                raise(e.code(), std::string(e.what()) + " (simulation " +
                                    std::to_string(s) + ", seed " +
                                    std::to_string(cfg.sim.seed) + ")");
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> failures(workers);
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (;;) {
                    const std::size_t s = next.fetch_add(1);
                    if (s >= cfg.n_sims) return;
                    try {
                        result.sims[s] = run_single(cfg, s);
                    } catch (...) {
                        failures[w] = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        for (const auto& f : failures) {
            if (f) std::rethrow_exception(f);
        }
    }

    // Aggregation is a fixed-order pass over the records, so the summary is
    // identical for any worker count.
    std::size_t hits_raw = 0;
    std::size_t hits_bonf = 0;
    std::size_t hits_perm = 0;
    std::size_t n_perm_sims = 0;
    double abs_in_sum = 0.0;
    double abs_oos_sum = 0.0;
    std::size_t abs_pairs = 0;

    std::vector<double> pos_in_sum;
    std::vector<double> pos_oos_sum;
    std::vector<std::size_t> pos_count;

    for (const SimRecord& sim : result.sims) {
        hits_raw += sim.reject_t_raw ? 1 : 0;
        hits_bonf += sim.reject_t_bonf ? 1 : 0;
        if (sim.reject_perm) {
            ++n_perm_sims;
            hits_perm += *sim.reject_perm ? 1 : 0;
        }

        std::vector<const ClusterRecord*> ordered;
        for (const ClusterRecord& cr : sim.clusters) {
            if (cr.diff_oos) {
                abs_in_sum += std::fabs(cr.diff_in);
                abs_oos_sum += std::fabs(*cr.diff_oos);
                ++abs_pairs;
                ordered.push_back(&cr);
            }
        }
        std::sort(ordered.begin(), ordered.end(),
                  [](const ClusterRecord* a, const ClusterRecord* b) {
                      return a->diff_in < b->diff_in;
                  });
        if (ordered.size() > pos_count.size()) {
            pos_in_sum.resize(ordered.size(), 0.0);
            pos_oos_sum.resize(ordered.size(), 0.0);
            pos_count.resize(ordered.size(), 0);
        }
        for (std::size_t p = 0; p < ordered.size(); ++p) {
            pos_in_sum[p] += ordered[p]->diff_in;
            pos_oos_sum[p] += *ordered[p]->diff_oos;
            pos_count[p] += 1;
        }
    }

    result.t_raw_rate = rate_summary(hits_raw, cfg.n_sims);
    result.t_bonf_rate = rate_summary(hits_bonf, cfg.n_sims);
    if (n_perm_sims > 0) {
        result.perm_rate = rate_summary(hits_perm, n_perm_sims);
    }
    if (abs_pairs > 0) {
        result.mean_abs_diff_in = abs_in_sum / static_cast<double>(abs_pairs);
        result.mean_abs_diff_oos = abs_oos_sum / static_cast<double>(abs_pairs);
    }

    double ranked_in = 0.0;
    double ranked_oos = 0.0;
    std::size_t ranked_n = 0;
    for (std::size_t p = 0; p < pos_count.size(); ++p) {
        PositionAverage pa;
        pa.position = p;
        pa.count = pos_count[p];
        pa.mean_diff_in = pos_in_sum[p] / static_cast<double>(pos_count[p]);
        pa.mean_diff_oos = pos_oos_sum[p] / static_cast<double>(pos_count[p]);
        result.positions.push_back(pa);
        ranked_in += std::fabs(pa.mean_diff_in) * static_cast<double>(pa.count);
        ranked_oos += std::fabs(pa.mean_diff_oos) * static_cast<double>(pa.count);
        ranked_n += pa.count;
    }
    if (ranked_n > 0) {
        result.ranked_mean_abs_in = ranked_in / static_cast<double>(ranked_n);
        result.ranked_mean_abs_oos = ranked_oos / static_cast<double>(ranked_n);
    }
    return result;
}

}  // namespace hbac::sim
