#include "hbac/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hbac {

namespace {

constexpr double kTiny = 1e-300;
constexpr double kEps = 3e-16;

// Continued fraction for the incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 500; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

// Series expansion of the regularized lower incomplete gamma P(a, x).
double gamma_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 1; n <= 1000; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for the regularized upper incomplete gamma Q(a, x).
double gamma_cf(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 1000; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double sample_mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v, double mean) {
    double ss = 0.0;
    for (double x : v) {
        const double d = x - mean;
        ss += d * d;
    }
    return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) raise(Errc::domain, "beta parameters must be > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) -
                                  std::lgamma(b) + a * std::log(x) +
                                  b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_cf(a, b, x) / a;
    }
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double incomplete_gamma_upper(double a, double x) {
    if (a <= 0.0) raise(Errc::domain, "gamma parameter must be > 0");
    if (x < 0.0) raise(Errc::domain, "gamma argument must be >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_series(a, x);
    return gamma_cf(a, x);
}

double student_t_cdf(double x, double df) {
    if (df <= 0.0) raise(Errc::domain, "degrees of freedom must be > 0");
    if (x == 0.0) return 0.5;
    const double ib = incomplete_beta(df / 2.0, 0.5, df / (df + x * x));
    return x > 0.0 ? 1.0 - 0.5 * ib : 0.5 * ib;
}

double chi2_sf(double x, double df) {
    if (df <= 0.0) raise(Errc::domain, "degrees of freedom must be > 0");
    if (x <= 0.0) return 1.0;
    return incomplete_gamma_upper(df / 2.0, x / 2.0);
}

TestOutcome welch_t_test(std::span<const double> a,
                         std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) {
        raise(Errc::insufficient_sample,
              "Welch t-test needs >= 2 values per sample");
    }
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double ma = sample_mean(a);
    const double mb = sample_mean(b);
    const double va = sample_variance(a, ma);
    const double vb = sample_variance(b, mb);
    if (va == 0.0 && vb == 0.0) {
        raise(Errc::degenerate_variance, "both samples have zero variance");
    }
    const double ga = va / na;
    const double gb = vb / nb;
    const double se2 = ga + gb;
    TestOutcome out;
    out.statistic = (ma - mb) / std::sqrt(se2);
    const double df =
        se2 * se2 / (ga * ga / (na - 1.0) + gb * gb / (nb - 1.0));
    // Two-tailed p; the incomplete-beta form equals 2*(1 - cdf(|t|)).
    out.p = incomplete_beta(df / 2.0, 0.5,
                            df / (df + out.statistic * out.statistic));
    return out;
}

TestOutcome chi2_test(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        raise(Errc::insufficient_sample, "chi-squared test needs nonempty samples");
    }
    double a1 = 0.0;
    for (double v : a) {
        if (v != 0.0 && v != 1.0) {
            raise(Errc::domain, "chi-squared test expects 0/1 metric values");
        }
        a1 += v;
    }
    double b1 = 0.0;
    for (double v : b) {
        if (v != 0.0 && v != 1.0) {
            raise(Errc::domain, "chi-squared test expects 0/1 metric values");
        }
        b1 += v;
    }
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double a0 = na - a1;
    const double b0 = nb - b1;
    const double col1 = a1 + b1;
    const double col0 = a0 + b0;
    if (col1 == 0.0 || col0 == 0.0) {
        raise(Errc::degenerate_table, "a column margin of the 2x2 table is zero");
    }
    const double n = na + nb;
    TestOutcome out;
    double stat = 0.0;
    const double obs[2][2] = {{a1, a0}, {b1, b0}};
    const double rows[2] = {na, nb};
    const double cols[2] = {col1, col0};
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double e = rows[i] * cols[j] / n;
            const double d = obs[i][j] - e;
            stat += d * d / e;
        }
    }
    out.statistic = stat;
    out.p = chi2_sf(stat, 1.0);
    return out;
}

std::vector<double> bonferroni(std::span<const double> p_values,
                               std::size_t k) {
    if (k < 1) raise(Errc::bad_config, "Bonferroni k must be >= 1");
    std::vector<double> out;
    out.reserve(p_values.size());
    for (double p : p_values) {
        if (p < 0.0 || p > 1.0) {
            raise(Errc::domain, "p-values must lie in [0,1]");
        }
        out.push_back(std::min(1.0, static_cast<double>(k) * p));
    }
    return out;
}

const char* to_string(TestKind kind) {
    switch (kind) {
        case TestKind::welch_t: return "welch_t";
        case TestKind::chi2: return "chi2";
        case TestKind::permutation: return "permutation";
    }
    return "unknown";
}

const char* to_string(Correction correction) {
    return correction == Correction::bonferroni ? "bonferroni" : "none";
}

bool TestReport::any_significant() const {
    return std::any_of(tests.begin(), tests.end(), [this](const ClusterTest& t) {
        return t.testable && t.p_adjusted && *t.p_adjusted <= alpha;
    });
}

bool TestReport::any_significant_raw() const {
    return std::any_of(tests.begin(), tests.end(), [this](const ClusterTest& t) {
        return t.testable && t.p_raw && *t.p_raw <= alpha;
    });
}

TestReport test_clusters(const Partition& partition, const Dataset& test_data,
                         double alpha, Correction correction,
                         const std::string& split_info) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        raise(Errc::bad_config, "alpha must lie in (0,1)");
    }
    TestReport report;
    report.alpha = alpha;
    report.correction = correction;
    report.split_info = split_info;
    if (partition.clusters.size() < 2) {
        return report;  // no contrast exists
    }

    const auto assignment = assign_all(partition, test_data);
    const auto& metric = test_data.metric();
    const bool continuous =
        test_data.schema().metric_kind == MetricKind::continuous;

    for (std::size_t c = 0; c < partition.clusters.size(); ++c) {
        ClusterTest ct;
        ct.cluster_index = c;
        ct.kind = continuous ? TestKind::welch_t : TestKind::chi2;

        std::vector<double> in;
        std::vector<double> out;
        for (std::size_t r = 0; r < assignment.size(); ++r) {
            (assignment[r] == c ? in : out).push_back(metric[r]);
        }
        ct.n_in = in.size();
        ct.n_out = out.size();
        if (!in.empty()) ct.mean_in = sample_mean(in);
        if (!out.empty()) ct.mean_out = sample_mean(out);
        if (ct.mean_in && ct.mean_out) {
            ct.difference = *ct.mean_in - *ct.mean_out;
        }

        try {
            const TestOutcome res =
                continuous ? welch_t_test(in, out) : chi2_test(in, out);
            ct.statistic = res.statistic;
            ct.p_raw = res.p;
            ct.testable = true;
        } catch (const Error& e) {
            if (e.code() != Errc::insufficient_sample &&
                e.code() != Errc::degenerate_variance &&
                e.code() != Errc::degenerate_table) {
                throw;
            }
            ct.testable = false;
            ct.note = e.what();
        }
        report.tests.push_back(std::move(ct));
    }

    report.n_tested = static_cast<std::size_t>(
        std::count_if(report.tests.begin(), report.tests.end(),
                      [](const ClusterTest& t) { return t.testable; }));
    if (report.n_tested > 0) {
        for (ClusterTest& t : report.tests) {
            if (!t.testable) continue;
            t.p_adjusted =
                correction == Correction::bonferroni
                    ? std::min(1.0, static_cast<double>(report.n_tested) *
                                        *t.p_raw)
                    : *t.p_raw;
        }
    }
    return report;
}

namespace {

// Per-cluster |mean_in - mean_out|; nullopt when one side is empty.
std::vector<std::optional<double>> abs_diffs(
    const std::vector<double>& metric,
    const std::vector<std::size_t>& assignment, std::size_t n_clusters) {
    std::vector<double> sums(n_clusters, 0.0);
    std::vector<std::size_t> counts(n_clusters, 0);
    double total = 0.0;
    for (std::size_t r = 0; r < assignment.size(); ++r) {
        sums[assignment[r]] += metric[r];
        counts[assignment[r]] += 1;
        total += metric[r];
    }
    const std::size_t n = assignment.size();
    std::vector<std::optional<double>> out(n_clusters);
    for (std::size_t c = 0; c < n_clusters; ++c) {
        const std::size_t rest = n - counts[c];
        if (counts[c] == 0 || rest == 0) continue;
        const double mean_in = sums[c] / static_cast<double>(counts[c]);
        const double mean_out =
            (total - sums[c]) / static_cast<double>(rest);
        out[c] = std::fabs(mean_in - mean_out);
    }
    return out;
}

}  // namespace

PermutationResult permutation_test(
    std::span<const int> labels,
    const std::function<std::vector<double>(const std::vector<int>&)>&
        metric_fn,
    const std::function<std::vector<std::size_t>(const std::vector<double>&)>&
        assignment_fn,
    std::size_t n_clusters, std::size_t n_perm, std::uint64_t seed,
    bool refit_partition) {
    if (n_perm < 19) {
        raise(Errc::bad_config, "need at least 19 permutations");
    }
    if (n_clusters == 0) raise(Errc::bad_config, "n_clusters must be >= 1");

    const std::vector<int> base(labels.begin(), labels.end());
    const std::vector<double> metric_obs = metric_fn(base);
    const std::vector<std::size_t> assign_obs = assignment_fn(metric_obs);
    if (assign_obs.size() != metric_obs.size()) {
        raise(Errc::bad_config, "assignment/metric length mismatch");
    }
    const auto observed = abs_diffs(metric_obs, assign_obs, n_clusters);

    std::vector<std::size_t> exceed(n_clusters, 0);
    std::vector<std::size_t> exceed_max(n_clusters, 0);

    for (std::size_t b = 0; b < n_perm; ++b) {
        std::vector<int> shuffled = base;
        RngStream rng(seed, derive_stream(0x9e37ULL, b + 1));
        rng.shuffle(shuffled);
        const std::vector<double> metric_b = metric_fn(shuffled);
        const std::vector<std::size_t> assign_b =
            refit_partition ? assignment_fn(metric_b) : assign_obs;
        const auto stats_b = abs_diffs(metric_b, assign_b, n_clusters);

        double max_b = -std::numeric_limits<double>::infinity();
        for (const auto& s : stats_b) {
            if (s && *s > max_b) max_b = *s;
        }
        for (std::size_t c = 0; c < n_clusters; ++c) {
            if (!observed[c]) continue;
            if (!refit_partition && stats_b[c] && *stats_b[c] >= *observed[c]) {
                ++exceed[c];
            }
            if (max_b >= *observed[c]) ++exceed_max[c];
        }
    }

    PermutationResult result;
    result.n_perm = n_perm;
    result.observed = observed;
    result.p_raw.resize(n_clusters);
    result.p_max.resize(n_clusters);
    const double denom = static_cast<double>(n_perm) + 1.0;
    for (std::size_t c = 0; c < n_clusters; ++c) {
        if (!observed[c]) continue;
        result.p_max[c] = (1.0 + static_cast<double>(exceed_max[c])) / denom;
        result.p_raw[c] =
            refit_partition
                ? result.p_max[c]
                : (1.0 + static_cast<double>(exceed[c])) / denom;
    }
    return result;
}

}  // namespace hbac
