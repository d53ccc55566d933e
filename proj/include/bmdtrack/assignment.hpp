#pragma once

// Optimal one-to-one assignment by the epsilon-scaling auction algorithm.
//
// Values are maximized. A -infinity entry forbids the pair. Rows may end up
// unassigned only when they cannot be paired; among solutions pairing the most
// rows, total value is maximized. Values are rounded to a grid of `quantum`
// before solving, so the result is exactly optimal on that grid.

#include "bmdtrack/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>
#include <vector>

namespace bmd {

inline constexpr double kForbidden = -std::numeric_limits<double>::infinity();
inline constexpr int kUnassigned = -1;

struct AssignmentOptions {
    double quantum = 1e-4;  ///< value resolution; ties are judged on this grid
};

struct AssignmentSolution {
    std::vector<int> column;  ///< per row: column index or kUnassigned
    double value = 0.0;       ///< sum of original values over assigned rows
    int assigned = 0;
};

namespace detail {

using Int = std::int64_t;
inline constexpr Int kNoEdge = std::numeric_limits<Int>::min();

/// Forward auction with epsilon scaling on a square k x k integer benefit
/// matrix (row-major, kNoEdge = forbidden). A perfect matching must exist.
/// Benefits are pre-multiplied by k + 1 so the final epsilon of 1 is exact.
inline std::vector<int> integer_auction(const std::vector<Int>& benefit, int k) {
    std::vector<Int> b(benefit.size());
    Int lo = std::numeric_limits<Int>::max(), hi = std::numeric_limits<Int>::min();
    for (std::size_t i = 0; i < benefit.size(); ++i) {
        if (benefit[i] == kNoEdge) {
            b[i] = kNoEdge;
            continue;
        }
        b[i] = benefit[i] * (k + 1);
        lo = std::min(lo, b[i]);
        hi = std::max(hi, b[i]);
    }
    if (lo > hi) throw std::invalid_argument("auction: no admissible pairs");
    const Int span = hi - lo + 1;

    std::vector<Int> price(k, 0);
    std::vector<int> owner(k), assigned(k);
    Int eps = std::max<Int>(1, span / 4);
    for (;;) {
        std::fill(owner.begin(), owner.end(), -1);
        std::fill(assigned.begin(), assigned.end(), -1);
        std::deque<int> queue;
        for (int i = 0; i < k; ++i) queue.push_back(i);
        while (!queue.empty()) {
            const int i = queue.front();
            queue.pop_front();
            Int best = kNoEdge, second = kNoEdge;
            int bj = -1;
            const Int* row = b.data() + static_cast<std::size_t>(i) * k;
            for (int j = 0; j < k; ++j) {
                if (row[j] == kNoEdge) continue;
                const Int net = row[j] - price[j];
                if (bj < 0 || net > best) {
                    second = best;
                    best = net;
                    bj = j;
                } else if (second == kNoEdge || net > second) {
                    second = net;
                }
            }
            if (bj < 0) throw std::invalid_argument("auction: row without admissible column");
            const Int increment = (second == kNoEdge ? span : best - second) + eps;
            price[bj] += increment;
            if (owner[bj] >= 0) {
                assigned[owner[bj]] = -1;
                queue.push_back(owner[bj]);
            }
            owner[bj] = i;
            assigned[i] = bj;
        }
        if (eps == 1) break;
        eps = std::max<Int>(1, eps / 5);
    }
    return assigned;
}

/// Solves the padded square problem for integer values a (m x c, kNoEdge =
/// forbidden). Returns per-row column or kUnassigned and the padded objective.
struct PaddedResult {
    std::vector<int> column;
    Int objective = 0;
};

inline PaddedResult solve_padded(const std::vector<Int>& a, int m, int c, Int pair_bonus) {
    // rows: m real then c dummy; columns: c real then m "unassigned" slots
    const int k = m + c;
    std::vector<Int> sq(static_cast<std::size_t>(k) * k, kNoEdge);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < c; ++j) {
            const Int v = a[static_cast<std::size_t>(i) * c + j];
            if (v != kNoEdge) sq[static_cast<std::size_t>(i) * k + j] = v + pair_bonus;
        }
        sq[static_cast<std::size_t>(i) * k + c + i] = 0;
    }
    for (int d = m; d < k; ++d)
        for (int j = 0; j < k; ++j) sq[static_cast<std::size_t>(d) * k + j] = 0;
    const std::vector<int> cols = integer_auction(sq, k);
    PaddedResult out;
    out.column.assign(m, kUnassigned);
    for (int i = 0; i < m; ++i) {
        out.objective += sq[static_cast<std::size_t>(i) * k + cols[i]];
        if (cols[i] < c) out.column[i] = cols[i];
    }
    return out;
}

}  // namespace detail

/// Maximum-value assignment of rows to columns of `values` (-inf = forbidden).
/// Ties between optimal solutions go to the lowest column index, row by row in
/// order, with "unassigned" ranking after every column.
inline AssignmentSolution solve_assignment(const Eigen::MatrixXd& values,
                                           const AssignmentOptions& opt = {}) {
    const int m = static_cast<int>(values.rows());
    const int c = static_cast<int>(values.cols());
    AssignmentSolution out;
    out.column.assign(m, kUnassigned);
    if (m == 0) return out;
    if (!(opt.quantum > 0)) throw std::invalid_argument("assignment quantum must be positive");

    double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < c; ++j) {
            const double v = values(i, j);
            if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
                throw std::invalid_argument("assignment values must be finite or -inf");
            if (v == kForbidden) continue;
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
    if (vmin > vmax) return out;  // nothing admissible

    const double levels = std::floor((vmax - vmin) / opt.quantum + 0.5);
    // benefit * (k+1) plus price growth must stay well inside int64
    const double k = m + c;
    if ((levels + 2) * (m + 1) * (k + 1) * (k + 2) > 1e17)
        throw std::invalid_argument("assignment value range too large for the quantum");

    std::vector<detail::Int> a(static_cast<std::size_t>(m) * c, detail::kNoEdge);
    detail::Int top = 0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < c; ++j)
            if (values(i, j) != kForbidden) {
                const auto q = static_cast<detail::Int>(std::floor((values(i, j) - vmin) / opt.quantum + 0.5)) + 1;
                a[static_cast<std::size_t>(i) * c + j] = q;
                top = std::max(top, q);
            }
    // any extra pair outweighs every value difference
    const detail::Int bonus = (top + 1) * (m + 1);

    detail::PaddedResult best = detail::solve_padded(a, m, c, bonus);
    const detail::Int optimum = best.objective;

    // lexicographic tie-break: fix rows in order to the lowest column that keeps the optimum
    std::vector<detail::Int> pinned = a;
    for (int i = 0; i < m; ++i) {
        const int current = best.column[i] == kUnassigned ? c : best.column[i];
        for (int j = 0; j < current; ++j) {
            if (pinned[static_cast<std::size_t>(i) * c + j] == detail::kNoEdge) continue;
            std::vector<detail::Int> trial = pinned;
            for (int jj = 0; jj < c; ++jj)
                if (jj != j) trial[static_cast<std::size_t>(i) * c + jj] = detail::kNoEdge;
            for (int ii = 0; ii < m; ++ii)
                if (ii != i) trial[static_cast<std::size_t>(ii) * c + j] = detail::kNoEdge;
            detail::PaddedResult r = detail::solve_padded(trial, m, c, bonus);
            // the pinned row must actually take j (its unassigned slot stays open)
            if (r.objective == optimum && r.column[i] == j) {
                best = std::move(r);
                break;
            }
        }
        // pin row i to its chosen column for the remaining rows
        const int chosen = best.column[i];
        for (int jj = 0; jj < c; ++jj) {
            if (jj != chosen) pinned[static_cast<std::size_t>(i) * c + jj] = detail::kNoEdge;
        }
        if (chosen != kUnassigned)
            for (int ii = 0; ii < m; ++ii)
                if (ii != i) pinned[static_cast<std::size_t>(ii) * c + chosen] = detail::kNoEdge;
    }

    out.column = best.column;
    for (int i = 0; i < m; ++i)
        if (out.column[i] != kUnassigned) {
            out.value += values(i, out.column[i]);
            ++out.assigned;
        }
    return out;
}

}  // namespace bmd
