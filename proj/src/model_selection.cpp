#include "hbac/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace hbac {

ChScore calinski_harabasz(std::span<const double> metric_values,
                          std::span<const std::size_t> assignment) {
    if (metric_values.size() != assignment.size()) {
        raise(Errc::bad_config, "metric/assignment length mismatch");
    }
    const std::size_t n = metric_values.size();

    std::map<std::size_t, std::pair<double, std::size_t>> groups;  // sum, count
    for (std::size_t i = 0; i < n; ++i) {
        auto& g = groups[assignment[i]];
        g.first += metric_values[i];
        g.second += 1;
    }
    const std::size_t k = groups.size();
    if (k < 2 || n <= k) {
        raise(Errc::undefined_score,
              "Calinski-Harabasz needs k >= 2 and n > k (k=" +
                  std::to_string(k) + ", n=" + std::to_string(n) + ")");
    }

    double grand_sum = 0.0;
    for (const auto& [id, g] : groups) grand_sum += g.first;
    const double grand_mean = grand_sum / static_cast<double>(n);

    double ssb = 0.0;
    std::map<std::size_t, double> means;
    for (const auto& [id, g] : groups) {
        const double mean = g.first / static_cast<double>(g.second);
        means[id] = mean;
        const double d = mean - grand_mean;
        ssb += static_cast<double>(g.second) * d * d;
    }
    double ssw = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = metric_values[i] - means[assignment[i]];
        ssw += d * d;
    }

    ChScore score;
    score.k = k;
    score.n = n;
    if (ssw == 0.0) {
        score.infinite = true;
        score.value = std::numeric_limits<double>::infinity();
    } else {
        score.value = (ssb / static_cast<double>(k - 1)) /
                      (ssw / static_cast<double>(n - k));
    }
    return score;
}

SelectionResult select_n_min(const Dataset& dataset,
                             const std::vector<std::size_t>& grid,
                             std::size_t folds, const HbacConfig& base) {
    if (grid.empty()) raise(Errc::bad_config, "empty n_min grid");
    if (folds < 2) raise(Errc::bad_config, "need at least 2 folds");
    const std::size_t n = dataset.n_rows();
    if (folds > n) raise(Errc::bad_config, "more folds than rows");

    // Contiguous blocks of a seeded shuffle; the first n % folds blocks take
    // one extra row.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    RngStream shuffle_rng(base.seed, derive_stream(0xc5f01d5ULL));
    shuffle_rng.shuffle(order);

    std::vector<std::vector<std::size_t>> fold_rows(folds);
    const std::size_t base_size = n / folds;
    const std::size_t extra = n % folds;
    std::size_t cursor = 0;
    for (std::size_t f = 0; f < folds; ++f) {
        const std::size_t size = base_size + (f < extra ? 1 : 0);
        fold_rows[f].assign(order.begin() + static_cast<long>(cursor),
                            order.begin() + static_cast<long>(cursor + size));
        cursor += size;
    }

    SelectionResult result;
    result.grid = grid;
    result.feasible.assign(grid.size(), true);
    result.fold_scores.assign(grid.size(), std::vector<FoldScore>(folds));
    result.mean_scores.assign(grid.size(),
                              -std::numeric_limits<double>::infinity());

    for (std::size_t ci = 0; ci < grid.size(); ++ci) {
        const std::size_t candidate = grid[ci];
        for (std::size_t f = 0; f < folds; ++f) {
            if (candidate < 1 || n - fold_rows[f].size() < 2 * candidate) {
                result.feasible[ci] = false;
            }
        }
    }
    if (std::none_of(result.feasible.begin(), result.feasible.end(),
                     [](bool b) { return b; })) {
        raise(Errc::infeasible_grid,
              "no n_min candidate is feasible on every fold");
    }

    for (std::size_t ci = 0; ci < grid.size(); ++ci) {
        if (!result.feasible[ci]) continue;
        double sum = 0.0;
        bool any_inf = false;
        for (std::size_t f = 0; f < folds; ++f) {
            std::vector<std::size_t> train_rows;
            train_rows.reserve(n - fold_rows[f].size());
            for (std::size_t g = 0; g < folds; ++g) {
                if (g == f) continue;
                train_rows.insert(train_rows.end(), fold_rows[g].begin(),
                                  fold_rows[g].end());
            }
            std::sort(train_rows.begin(), train_rows.end());
            std::vector<std::size_t> held = fold_rows[f];
            std::sort(held.begin(), held.end());

            HbacConfig config = base;
            config.n_min = grid[ci];
            config.seed = derive_stream(base.seed, grid[ci], f);

            const Dataset train = dataset.subset(train_rows);
            const Dataset test = dataset.subset(held);
            const Partition partition =
                fit_hbac(train, config, "cv-fold-" + std::to_string(f));

            FoldScore fs;
            const auto assignment = assign_all(partition, test);
            try {
                const ChScore ch =
                    calinski_harabasz(test.metric(), assignment);
                fs.value = ch.value;
                fs.infinite = ch.infinite;
            } catch (const Error& e) {
                if (e.code() != Errc::undefined_score) throw;
                fs.degenerate = true;
                fs.value = 0.0;  // minimum possible CH
            }
            result.fold_scores[ci][f] = fs;
            if (fs.infinite) any_inf = true;
            sum += fs.infinite ? 0.0 : fs.value;
        }
        result.mean_scores[ci] =
            any_inf ? std::numeric_limits<double>::infinity()
                    : sum / static_cast<double>(folds);
    }

    // Highest mean wins; ties (including two infinities) prefer the smaller
    // n_min. Scan in order of increasing candidate value so strict '>'
    // keeps the smaller one.
    std::vector<std::size_t> idx(grid.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&grid](std::size_t a, std::size_t b) {
        return grid[a] < grid[b];
    });
    std::size_t best = grid.size();
    for (std::size_t i : idx) {
        if (!result.feasible[i]) continue;
        if (best == grid.size() ||
            result.mean_scores[i] > result.mean_scores[best]) {
            best = i;
        }
    }
    result.chosen = grid[best];
    return result;
}

}  // namespace hbac
