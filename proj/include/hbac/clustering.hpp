#pragma once
// Hierarchical bias-aware clustering: iterative binary splitting of the
// cluster with the highest bias-metric standard deviation, using k-means
// (numeric/binary features) or k-modes (binary/categorical features), plus
// centroid-based assignment of unseen rows.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hbac/core.hpp"

namespace hbac {

enum class Splitter { kmeans, kmodes };
const char* to_string(Splitter splitter);
Splitter splitter_from(const std::string& name);

struct HbacConfig {
    std::size_t n_min = 1;
    std::size_t max_iterations = 1;
    Splitter splitter = Splitter::kmeans;
    std::uint64_t seed = 0;
};

enum class CentroidKind { mean, mode };

struct Centroid {
    CentroidKind kind = CentroidKind::mean;
    std::vector<double> values;
};

struct Cluster {
    std::size_t id = 0;  // creation order, never reused
    std::vector<std::size_t> members;  // row indices into the fit data
    Centroid centroid;
    double metric_mean = 0.0;
    double metric_std = 0.0;  // population formula; singletons have std 0
    bool ever_selected = false;
};

enum class SplitOutcome { accepted, child_below_n_min, degenerate };
const char* to_string(SplitOutcome outcome);

// One record per fit iteration; lets the acceptance rule be replayed.
struct SplitEvent {
    std::size_t iteration = 0;
    std::size_t parent_id = 0;
    double parent_mean = 0.0;
    double parent_std = 0.0;
    std::size_t child_a_id = 0;  // meaningful only when accepted
    std::size_t child_b_id = 0;
    std::size_t child_a_size = 0;
    std::size_t child_b_size = 0;
    double child_a_mean = 0.0;
    double child_b_mean = 0.0;
    SplitOutcome outcome = SplitOutcome::degenerate;
};

struct Partition {
    std::vector<Cluster> clusters;  // creation order
    HbacConfig config;
    std::vector<std::string> column_names;
    std::string source_split;       // free-form fit-data identifier
    std::uint64_t fit_data_hash = 0;
    std::vector<SplitEvent> trace;

    std::size_t size() const { return clusters.size(); }
};

// Result of one binary split. Side indices refer to positions in the input
// row block (0..n-1), both ascending and nonempty.
struct BinarySplit {
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    std::vector<double> centroid_left;
    std::vector<double> centroid_right;
    std::size_t sweeps = 0;
    // Objective after each sweep: within-cluster sum of squares for k-means,
    // total Hamming distance to the own mode for k-modes. Non-increasing.
    std::vector<double> objective_trace;
};

// Lloyd's algorithm with k=2. Seeding takes the farthest pair among at most
// 512 sampled rows (seeded sample; exact over all rows when n <= 512).
// Throws Errc::degenerate_split when fewer than 2 rows or all rows identical.
BinarySplit split_two_kmeans(MatrixView rows, std::uint64_t seed);

// k-modes with k=2: Hamming objective, per-column mode update (ties to the
// smallest category index) and density/distance ("Cao") initialization,
// which is deterministic; the seed is only used if a side collapses and a
// re-seed is needed.
BinarySplit split_two_kmodes(MatrixView rows, std::uint64_t seed);

// Runs the full iterative fit. Requires validate(dataset).ok(), a schema
// compatible with the configured splitter, and N >= 2*n_min.
Partition fit_hbac(const Dataset& dataset, const HbacConfig& config,
                   const std::string& source_split = "full");

// Index of the cluster with the nearest centroid (squared Euclidean for
// mean centroids, Hamming for mode centroids); ties break to the lowest
// cluster position. Throws Errc::schema_mismatch on arity mismatch.
std::size_t assign(const Partition& partition, std::span<const double> row);

std::vector<std::size_t> assign_all(const Partition& partition,
                                    MatrixView rows);
std::vector<std::size_t> assign_all(const Partition& partition,
                                    const Dataset& dataset);

// Mean and population standard deviation of the metric over `members`.
std::pair<double, double> metric_stats(std::span<const double> metric,
                                       std::span<const std::size_t> members);

}  // namespace hbac
