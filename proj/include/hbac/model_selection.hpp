#pragma once
// Calinski-Harabasz scoring of a partition on the scalar bias metric, and
// cross-validated selection of the minimum cluster size.

#include <cstddef>
#include <span>
#include <vector>

#include "hbac/clustering.hpp"
#include "hbac/core.hpp"

namespace hbac {

struct ChScore {
    double value = 0.0;  // +infinity when the within-cluster variance is 0
    bool infinite = false;
    std::size_t k = 0;
    std::size_t n = 0;
};

// [SSB/(k-1)] / [SSW/(n-k)] over the metric values grouped by assignment.
// Requires k >= 2 distinct groups and n > k; otherwise Errc::undefined_score.
ChScore calinski_harabasz(std::span<const double> metric_values,
                          std::span<const std::size_t> assignment);

struct FoldScore {
    double value = 0.0;
    bool infinite = false;
    // Set when the held-out assignment produced fewer than 2 clusters (or
    // too few rows); such folds score as the minimum, 0.
    bool degenerate = false;
};

struct SelectionResult {
    std::vector<std::size_t> grid;
    std::vector<bool> feasible;                  // per candidate, all folds
    std::vector<std::vector<FoldScore>> fold_scores;  // [candidate][fold]
    std::vector<double> mean_scores;             // +inf sorts above finite
    std::size_t chosen = 0;                      // the chosen n_min value
};

// For each feasible candidate and fold: fit on the other folds, assign the
// held-out fold by centroids, score CH on the held-out metric. The winner
// maximizes the fold mean; ties go to the smaller n_min. Folds are
// contiguous blocks of a seeded shuffle (unstratified). Candidates
// infeasible on any fold (fold-train rows < 2*n_min) are excluded; if all
// are, throws Errc::infeasible_grid.
SelectionResult select_n_min(const Dataset& dataset,
                             const std::vector<std::size_t>& grid,
                             std::size_t folds, const HbacConfig& base);

}  // namespace hbac
