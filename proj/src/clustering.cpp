#include "hbac/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace hbac {

const char* to_string(Splitter splitter) {
    return splitter == Splitter::kmeans ? "kmeans" : "kmodes";
}

Splitter splitter_from(const std::string& name) {
    if (name == "kmeans") return Splitter::kmeans;
    if (name == "kmodes") return Splitter::kmodes;
    raise(Errc::bad_config, "unknown splitter '" + name + "'");
}

const char* to_string(SplitOutcome outcome) {
    switch (outcome) {
        case SplitOutcome::accepted: return "accepted";
        case SplitOutcome::child_below_n_min: return "child_below_n_min";
        case SplitOutcome::degenerate: return "degenerate";
    }
    return "unknown";
}

std::pair<double, double> metric_stats(std::span<const double> metric,
                                       std::span<const std::size_t> members) {
    double sum = 0.0;
    for (std::size_t i : members) sum += metric[i];
    const double mean = sum / static_cast<double>(members.size());
    double ss = 0.0;
    for (std::size_t i : members) {
        const double d = metric[i] - mean;
        ss += d * d;
    }
    return {mean, std::sqrt(ss / static_cast<double>(members.size()))};
}

namespace {

double sq_euclidean(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double diff = a[j] - b[j];
        s += diff * diff;
    }
    return s;
}

double hamming(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += (a[j] != b[j]) ? 1.0 : 0.0;
    return s;
}

using DistanceFn = double (*)(const double*, const double*, std::size_t);

bool all_rows_identical(MatrixView rows) {
    for (std::size_t r = 1; r < rows.rows; ++r) {
        if (!std::equal(rows.row(r), rows.row(r) + rows.cols, rows.row(0))) {
            return false;
        }
    }
    return true;
}

// Farthest pair over the given candidate indices; ties keep the first pair
// in (i, j) scan order.
std::pair<std::size_t, std::size_t> farthest_pair(
    MatrixView rows, std::span<const std::size_t> candidates, DistanceFn dist) {
    std::size_t best_i = candidates[0];
    std::size_t best_j = candidates[0];
    double best = -1.0;
    for (std::size_t a = 0; a + 1 < candidates.size(); ++a) {
        for (std::size_t b = a + 1; b < candidates.size(); ++b) {
            const double d = dist(rows.row(candidates[a]),
                                  rows.row(candidates[b]), rows.cols);
            if (d > best) {
                best = d;
                best_i = candidates[a];
                best_j = candidates[b];
            }
        }
    }
    return {best_i, best_j};
}

constexpr std::size_t kSeedSampleCap = 512;
constexpr std::size_t kMaxSweeps = 100;

std::vector<std::size_t> seed_sample(std::size_t n, RngStream& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (n <= kSeedSampleCap) return idx;
    // Partial Fisher-Yates: the first kSeedSampleCap entries are a uniform
    // sample without replacement.
    for (std::size_t i = 0; i < kSeedSampleCap; ++i) {
        const std::size_t j = i + rng.next_below(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(kSeedSampleCap);
    std::sort(idx.begin(), idx.end());
    return idx;
}

// Assignment step shared by both splitters: nearest of the two centroids,
// ties to the left. Returns true if any label changed.
bool assign_rows(MatrixView rows, const std::vector<double>& c0,
                 const std::vector<double>& c1, DistanceFn dist,
                 std::vector<int>& label) {
    bool changed = false;
    for (std::size_t r = 0; r < rows.rows; ++r) {
        const double d0 = dist(rows.row(r), c0.data(), rows.cols);
        const double d1 = dist(rows.row(r), c1.data(), rows.cols);
        const int want = d1 < d0 ? 1 : 0;
        if (label[r] != want) {
            label[r] = want;
            changed = true;
        }
    }
    return changed;
}

BinarySplit finish_split(MatrixView rows, const std::vector<int>& label,
                         std::vector<double> c0, std::vector<double> c1,
                         std::size_t sweeps, std::vector<double> trace) {
    BinarySplit out;
    out.centroid_left = std::move(c0);
    out.centroid_right = std::move(c1);
    out.sweeps = sweeps;
    out.objective_trace = std::move(trace);
    for (std::size_t r = 0; r < rows.rows; ++r) {
        (label[r] == 0 ? out.left : out.right).push_back(r);
    }
    return out;
}

void mean_update(MatrixView rows, const std::vector<int>& label, int side,
                 std::vector<double>& centroid) {
    std::fill(centroid.begin(), centroid.end(), 0.0);
    std::size_t count = 0;
    for (std::size_t r = 0; r < rows.rows; ++r) {
        if (label[r] != side) continue;
        ++count;
        const double* p = rows.row(r);
        for (std::size_t j = 0; j < rows.cols; ++j) centroid[j] += p[j];
    }
    for (double& v : centroid) v /= static_cast<double>(count);
}

void mode_update(MatrixView rows, const std::vector<int>& label, int side,
                 std::vector<double>& centroid) {
    for (std::size_t j = 0; j < rows.cols; ++j) {
        std::map<double, std::size_t> counts;
        for (std::size_t r = 0; r < rows.rows; ++r) {
            if (label[r] == side) ++counts[rows.row(r)[j]];
        }
        // Most frequent value; ties go to the smallest value, which the
        // ordered map yields first.
        double best_v = centroid[j];
        std::size_t best_c = 0;
        for (const auto& [v, c] : counts) {
            if (c > best_c) {
                best_c = c;
                best_v = v;
            }
        }
        centroid[j] = best_v;
    }
}

double objective(MatrixView rows, const std::vector<int>& label,
                 const std::vector<double>& c0, const std::vector<double>& c1,
                 DistanceFn dist) {
    double total = 0.0;
    for (std::size_t r = 0; r < rows.rows; ++r) {
        total += dist(rows.row(r), (label[r] == 0 ? c0 : c1).data(), rows.cols);
    }
    return total;
}

BinarySplit split_two_impl(MatrixView rows, DistanceFn dist,
                           std::vector<double> c0, std::vector<double> c1,
                           bool mode_centroids) {
    std::vector<int> label(rows.rows, -1);
    std::vector<double> trace;
    bool reseeded = false;

    std::size_t sweep = 0;
    while (sweep < kMaxSweeps) {
        ++sweep;
        const bool changed = assign_rows(rows, c0, c1, dist, label);

        const auto n1 = static_cast<std::size_t>(
            std::count(label.begin(), label.end(), 1));
        if (n1 == 0 || n1 == rows.rows) {
            // One side collapsed; re-seed once from the two most distant
            // rows, then give up.
            if (reseeded) {
                raise(Errc::degenerate_split,
                      "binary split collapsed to one side twice");
            }
            reseeded = true;
            std::vector<std::size_t> all(rows.rows);
            std::iota(all.begin(), all.end(), 0);
            auto [i, j] = farthest_pair(rows, all, dist);
            c0.assign(rows.row(i), rows.row(i) + rows.cols);
            c1.assign(rows.row(j), rows.row(j) + rows.cols);
            std::fill(label.begin(), label.end(), -1);
            trace.clear();
            sweep = 0;
            continue;
        }

        if (!changed) break;  // assignment fixpoint

        if (mode_centroids) {
            mode_update(rows, label, 0, c0);
            mode_update(rows, label, 1, c1);
        } else {
            mean_update(rows, label, 0, c0);
            mean_update(rows, label, 1, c1);
        }
        trace.push_back(objective(rows, label, c0, c1, dist));
    }

    return finish_split(rows, label, std::move(c0), std::move(c1), sweep,
                        std::move(trace));
}

}  // namespace

BinarySplit split_two_kmeans(MatrixView rows, std::uint64_t seed) {
    if (rows.rows < 2) {
        raise(Errc::degenerate_split, "need at least 2 rows to split");
    }
    if (all_rows_identical(rows)) {
        raise(Errc::degenerate_split, "all rows identical; split impossible");
    }

    RngStream rng(seed, derive_stream(0x6b6d65616e73ULL));  // splitter-local
    const auto sample = seed_sample(rows.rows, rng);
    auto [i, j] = farthest_pair(rows, sample, sq_euclidean);
    if (sq_euclidean(rows.row(i), rows.row(j), rows.cols) == 0.0) {
        // Sampled rows were all identical; fall back to a global scan.
        std::vector<std::size_t> all(rows.rows);
        std::iota(all.begin(), all.end(), 0);
        std::tie(i, j) = farthest_pair(rows, all, sq_euclidean);
    }
    std::vector<double> c0(rows.row(i), rows.row(i) + rows.cols);
    std::vector<double> c1(rows.row(j), rows.row(j) + rows.cols);
    return split_two_impl(rows, sq_euclidean, std::move(c0), std::move(c1),
                          /*mode_centroids=*/false);
}

BinarySplit split_two_kmodes(MatrixView rows, std::uint64_t seed) {
    if (rows.rows < 2) {
        raise(Errc::degenerate_split, "need at least 2 rows to split");
    }
    if (all_rows_identical(rows)) {
        raise(Errc::degenerate_split, "all rows identical; split impossible");
    }

    // Density of a row: summed per-column frequency of its values. The row
    // with the highest density seeds the first mode; the second maximizes
    // density times Hamming distance to the first.
    std::vector<double> density(rows.rows, 0.0);
    for (std::size_t j = 0; j < rows.cols; ++j) {
        std::map<double, std::size_t> freq;
        for (std::size_t r = 0; r < rows.rows; ++r) {
            ++freq[rows.row(r)[j]];
        }
        for (std::size_t r = 0; r < rows.rows; ++r) {
            density[r] += static_cast<double>(freq[rows.row(r)[j]]);
        }
    }
    const double norm =
        static_cast<double>(rows.rows) * static_cast<double>(rows.cols);
    for (double& d : density) d /= norm;

    std::size_t first = 0;
    for (std::size_t r = 1; r < rows.rows; ++r) {
        if (density[r] > density[first]) first = r;
    }
    std::size_t second = 0;
    double best = -1.0;
    for (std::size_t r = 0; r < rows.rows; ++r) {
        const double score =
            density[r] * hamming(rows.row(r), rows.row(first), rows.cols);
        if (score > best) {
            best = score;
            second = r;
        }
    }

    (void)seed;  // Cao-style seeding is deterministic; kept for symmetry
    std::vector<double> c0(rows.row(first), rows.row(first) + rows.cols);
    std::vector<double> c1(rows.row(second), rows.row(second) + rows.cols);
    return split_two_impl(rows, hamming, std::move(c0), std::move(c1),
                          /*mode_centroids=*/true);
}

namespace {

void check_splitter_schema(const FeatureSchema& schema, Splitter splitter) {
    for (const Column& col : schema.columns) {
        if (splitter == Splitter::kmeans &&
            col.kind == ColumnKind::categorical) {
            raise(Errc::schema_mismatch,
                  "categorical column '" + col.name +
                      "' is not allowed with the k-means splitter");
        }
        if (splitter == Splitter::kmodes && col.kind == ColumnKind::numeric) {
            raise(Errc::schema_mismatch,
                  "numeric column '" + col.name +
                      "' is not allowed with the k-modes splitter");
        }
    }
}

Centroid centroid_of(MatrixView rows, std::span<const std::size_t> members,
                     Splitter splitter) {
    Centroid c;
    c.kind = splitter == Splitter::kmeans ? CentroidKind::mean
                                          : CentroidKind::mode;
    c.values.assign(rows.cols, 0.0);
    if (splitter == Splitter::kmeans) {
        for (std::size_t r : members) {
            const double* p = rows.row(r);
            for (std::size_t j = 0; j < rows.cols; ++j) c.values[j] += p[j];
        }
        for (double& v : c.values) v /= static_cast<double>(members.size());
    } else {
        for (std::size_t j = 0; j < rows.cols; ++j) {
            std::map<double, std::size_t> counts;
            for (std::size_t r : members) ++counts[rows.row(r)[j]];
            std::size_t best_c = 0;
            double best_v = 0.0;
            for (const auto& [v, n] : counts) {
                if (n > best_c) {
                    best_c = n;
                    best_v = v;
                }
            }
            c.values[j] = best_v;
        }
    }
    return c;
}

Cluster make_cluster(std::size_t id, std::vector<std::size_t> members,
                     const Dataset& dataset, Splitter splitter) {
    Cluster cl;
    cl.id = id;
    cl.members = std::move(members);
    std::sort(cl.members.begin(), cl.members.end());
    cl.centroid = centroid_of(dataset.features(), cl.members, splitter);
    auto [mean, sd] = metric_stats(dataset.metric(), cl.members);
    cl.metric_mean = mean;
    cl.metric_std = sd;
    return cl;
}

}  // namespace

Partition fit_hbac(const Dataset& dataset, const HbacConfig& config,
                   const std::string& source_split) {
    if (config.n_min < 1 || config.max_iterations < 1) {
        raise(Errc::bad_config, "n_min and max_iterations must be >= 1");
    }
    const ValidationResult vr = validate(dataset);
    if (!vr.ok()) {
        raise(Errc::validation, "dataset failed validation: " + vr.violations[0]);
    }
    check_splitter_schema(dataset.schema(), config.splitter);
    if (dataset.n_rows() < 2 * config.n_min) {
        raise(Errc::insufficient_data,
              "need at least 2*n_min = " + std::to_string(2 * config.n_min) +
                  " rows, got " + std::to_string(dataset.n_rows()));
    }

    Partition partition;
    partition.config = config;
    partition.column_names = dataset.schema().column_names();
    partition.source_split = source_split;
    partition.fit_data_hash = hash_dataset(dataset);

    std::vector<std::size_t> all(dataset.n_rows());
    std::iota(all.begin(), all.end(), 0);
    partition.clusters.push_back(
        make_cluster(0, std::move(all), dataset, config.splitter));
    std::size_t next_id = 1;

    const MatrixView rows = dataset.features();
    const std::size_t d = rows.cols;

    for (std::size_t iter = 1; iter <= config.max_iterations; ++iter) {
        // Highest metric std among never-selected clusters; ties keep the
        // earliest created (the list is in creation order).
        std::size_t pick = partition.clusters.size();
        for (std::size_t c = 0; c < partition.clusters.size(); ++c) {
            const Cluster& cl = partition.clusters[c];
            if (cl.ever_selected) continue;
            if (pick == partition.clusters.size() ||
                cl.metric_std > partition.clusters[pick].metric_std) {
                pick = c;
            }
        }
        if (pick == partition.clusters.size()) break;  // everything retired

        Cluster& parent = partition.clusters[pick];
        parent.ever_selected = true;

        SplitEvent event;
        event.iteration = iter;
        event.parent_id = parent.id;
        event.parent_mean = parent.metric_mean;
        event.parent_std = parent.metric_std;

        // Gather the parent's rows into a dense block for the splitter.
        Matrix block(parent.members.size(), d);
        for (std::size_t m = 0; m < parent.members.size(); ++m) {
            const double* src = rows.row(parent.members[m]);
            std::copy(src, src + d, block.row(m));
        }

        BinarySplit split;
        try {
            const std::uint64_t split_seed = derive_stream(config.seed, iter);
            split = config.splitter == Splitter::kmeans
                        ? split_two_kmeans(block.view(), split_seed)
                        : split_two_kmodes(block.view(), split_seed);
        } catch (const Error& e) {
            if (e.code() != Errc::degenerate_split) throw;
            event.outcome = SplitOutcome::degenerate;
            partition.trace.push_back(event);
            continue;
        }

        std::vector<std::size_t> side_a;
        side_a.reserve(split.left.size());
        for (std::size_t pos : split.left) side_a.push_back(parent.members[pos]);
        std::vector<std::size_t> side_b;
        side_b.reserve(split.right.size());
        for (std::size_t pos : split.right) side_b.push_back(parent.members[pos]);

        const auto [mean_a, std_a] = metric_stats(dataset.metric(), side_a);
        const auto [mean_b, std_b] = metric_stats(dataset.metric(), side_b);
        event.child_a_size = side_a.size();
        event.child_b_size = side_b.size();
        event.child_a_mean = mean_a;
        event.child_b_mean = mean_b;

        const bool size_ok = side_a.size() >= config.n_min &&
                             side_b.size() >= config.n_min;
        const bool mean_ok =
            std::max(mean_a, mean_b) >= parent.metric_mean;
        if (size_ok && mean_ok) {
            event.outcome = SplitOutcome::accepted;
            event.child_a_id = next_id;
            event.child_b_id = next_id + 1;
            partition.trace.push_back(event);

            partition.clusters.erase(partition.clusters.begin() +
                                     static_cast<long>(pick));
            partition.clusters.push_back(make_cluster(
                next_id++, std::move(side_a), dataset, config.splitter));
            partition.clusters.push_back(make_cluster(
                next_id++, std::move(side_b), dataset, config.splitter));
        } else {
            event.outcome = SplitOutcome::child_below_n_min;
            partition.trace.push_back(event);
        }
    }

    return partition;
}

std::size_t assign(const Partition& partition, std::span<const double> row) {
    if (partition.clusters.empty()) {
        raise(Errc::bad_config, "cannot assign with an empty partition");
    }
    const std::size_t d = partition.clusters[0].centroid.values.size();
    if (row.size() != d) {
        raise(Errc::schema_mismatch,
              "row arity " + std::to_string(row.size()) +
                  " does not match fit arity " + std::to_string(d));
    }
    const bool mean_kind =
        partition.clusters[0].centroid.kind == CentroidKind::mean;
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < partition.clusters.size(); ++c) {
        const auto& vals = partition.clusters[c].centroid.values;
        const double dist = mean_kind ? sq_euclidean(row.data(), vals.data(), d)
                                      : hamming(row.data(), vals.data(), d);
        if (dist < best_d) {
            best_d = dist;
            best = c;
        }
    }
    return best;
}

std::vector<std::size_t> assign_all(const Partition& partition,
                                    MatrixView rows) {
    std::vector<std::size_t> out;
    out.reserve(rows.rows);
    for (std::size_t r = 0; r < rows.rows; ++r) {
        out.push_back(assign(partition, rows.row_span(r)));
    }
    return out;
}

std::vector<std::size_t> assign_all(const Partition& partition,
                                    const Dataset& dataset) {
    return assign_all(partition, dataset.features());
}

}  // namespace hbac
