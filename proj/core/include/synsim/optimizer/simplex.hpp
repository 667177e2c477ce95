#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace synsim::optimizer {

enum class Sense { le, ge, eq };
enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

std::string_view to_string(LpStatus s) noexcept;

/// max (or min) c.x subject to dense rows and x >= 0.
struct LinearProgram {
    bool maximize = true;
    std::vector<double> objective;
    std::vector<std::vector<double>> rows;
    std::vector<Sense> senses;
    std::vector<double> rhs;

    explicit LinearProgram(std::size_t variables = 0, bool maximize_objective = true)
        : maximize(maximize_objective), objective(variables, 0.0) {}

    [[nodiscard]] std::size_t variables() const noexcept { return objective.size(); }
    [[nodiscard]] std::size_t constraints() const noexcept { return rows.size(); }

    /// Returns the new row's index.
    std::size_t add_row(std::vector<double> coefficients, Sense sense, double bound);
};

struct LpResult {
    LpStatus status = LpStatus::infeasible;
    double objective = 0.0;
    std::vector<double> x;
    /// Shadow price of each row, in the objective's own sense: d(objective)/d(rhs).
    std::vector<double> duals;
    /// Structural variables in the final basis (a vertex has at most one per row).
    std::vector<std::size_t> basis;
    std::size_t pivots = 0;
};

struct SimplexOptions {
    double tolerance = 1e-9;
    std::size_t max_pivots = 200000;
};

/// Dense two-phase primal simplex. Uses the steepest reduced cost and drops
/// to Bland's rule after a run of degenerate pivots, so it cannot cycle.
/// The returned x is a basic feasible solution.
LpResult solve_lp(const LinearProgram& lp, const SimplexOptions& options = {});

} // namespace synsim::optimizer
