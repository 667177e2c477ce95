#include "synsim/optimizer/simplex.hpp"

#include "synsim/core/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace synsim::optimizer {

std::string_view to_string(LpStatus s) noexcept {
    switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration_limit";
    }
    return "?";
}

std::size_t LinearProgram::add_row(std::vector<double> coefficients, Sense sense, double bound) {
    if (coefficients.size() != variables()) {
        throw InternalError(fmt::format("row has {} coefficients for {} variables", coefficients.size(), variables()));
    }
    rows.push_back(std::move(coefficients));
    senses.push_back(sense);
    rhs.push_back(bound);
    return rows.size() - 1;
}

namespace {

class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols) : m_(rows), n_(cols), cells_(rows * (cols + 1), 0.0) {}

    double& at(std::size_t r, std::size_t c) { return cells_[r * (n_ + 1) + c]; }
    [[nodiscard]] double at(std::size_t r, std::size_t c) const { return cells_[r * (n_ + 1) + c]; }
    double& rhs(std::size_t r) { return at(r, n_); }
    [[nodiscard]] double rhs(std::size_t r) const { return at(r, n_); }
    [[nodiscard]] std::size_t rows() const noexcept { return m_; }
    [[nodiscard]] std::size_t cols() const noexcept { return n_; }

    void pivot(std::size_t pr, std::size_t pc, std::vector<double>& reduced) {
        const double inv = 1.0 / at(pr, pc);
        double* prow = &cells_[pr * (n_ + 1)];
        for (std::size_t c = 0; c <= n_; ++c) {
            prow[c] *= inv;
        }
        prow[pc] = 1.0;
        for (std::size_t r = 0; r < m_; ++r) {
            if (r == pr) {
                continue;
            }
            double* row = &cells_[r * (n_ + 1)];
            const double f = row[pc];
            if (f == 0.0) {
                continue;
            }
            for (std::size_t c = 0; c <= n_; ++c) {
                row[c] -= f * prow[c];
            }
            row[pc] = 0.0;
        }
        const double f = reduced[pc];
        if (f != 0.0) {
            for (std::size_t c = 0; c <= n_; ++c) {
                reduced[c] -= f * prow[c];
            }
            reduced[pc] = 0.0;
        }
    }

private:
    std::size_t m_;
    std::size_t n_;
    std::vector<double> cells_;
};

struct Solver {
    Tableau t;
    std::vector<std::size_t> basis;
    std::vector<bool> blocked; // columns that may not enter
    SimplexOptions opt;
    std::size_t pivots = 0;

    // reduced[c] = cost_c - cost_B B^-1 A_c; reduced[n] = -(objective value)
    std::vector<double> reduced_costs(const std::vector<double>& cost) const {
        std::vector<double> d(t.cols() + 1, 0.0);
        for (std::size_t c = 0; c < t.cols(); ++c) {
            d[c] = cost[c];
        }
        for (std::size_t r = 0; r < t.rows(); ++r) {
            const double cb = cost[basis[r]];
            if (cb == 0.0) {
                continue;
            }
            for (std::size_t c = 0; c <= t.cols(); ++c) {
                d[c] -= cb * t.at(r, c);
            }
        }
        return d;
    }

    // Maximizes against `d`; returns optimal, unbounded or iteration_limit.
    LpStatus run(std::vector<double>& d) {
        bool bland = false;
        std::size_t degenerate_run = 0;
        while (true) {
            std::size_t enter = t.cols();
            double best = opt.tolerance;
            for (std::size_t c = 0; c < t.cols(); ++c) {
                if (blocked[c] || d[c] <= opt.tolerance) {
                    continue;
                }
                if (bland) {
                    enter = c;
                    break;
                }
                if (d[c] > best) {
                    best = d[c];
                    enter = c;
                }
            }
            if (enter == t.cols()) {
                return LpStatus::optimal;
            }
            std::size_t leave = t.rows();
            double ratio = std::numeric_limits<double>::infinity();
            for (std::size_t r = 0; r < t.rows(); ++r) {
                const double a = t.at(r, enter);
                if (a <= opt.tolerance) {
                    continue;
                }
                const double q = std::max(0.0, t.rhs(r)) / a;
                const bool tie = leave != t.rows() && std::abs(q - ratio) <= opt.tolerance * 1e-3;
                if ((!tie && q < ratio) || (tie && basis[r] < basis[leave])) {
                    ratio = q;
                    leave = r;
                }
            }
            if (leave == t.rows()) {
                return LpStatus::unbounded;
            }
            if (++pivots > opt.max_pivots) {
                return LpStatus::iteration_limit;
            }
            degenerate_run = ratio <= opt.tolerance ? degenerate_run + 1 : 0;
            if (degenerate_run > 50) {
                bland = true;
            }
            t.pivot(leave, enter, d);
            basis[leave] = enter;
        }
    }
};

} // namespace

LpResult solve_lp(const LinearProgram& lp, const SimplexOptions& options) {
    const std::size_t n = lp.variables();
    const std::size_t m = lp.constraints();
    if (lp.senses.size() != m || lp.rhs.size() != m) {
        throw InternalError("linear program rows, senses and bounds disagree");
    }

    // Column layout: structural | one slack/surplus per inequality | artificials.
    std::vector<Sense> sense = lp.senses;
    std::vector<double> sign(m, 1.0);
    std::size_t slacks = 0;
    std::size_t artificials = 0;
    for (std::size_t r = 0; r < m; ++r) {
        if (lp.rhs[r] < 0.0) {
            sign[r] = -1.0;
            if (sense[r] == Sense::le) {
                sense[r] = Sense::ge;
            } else if (sense[r] == Sense::ge) {
                sense[r] = Sense::le;
            }
        }
        slacks += sense[r] != Sense::eq ? 1 : 0;
        artificials += sense[r] != Sense::le ? 1 : 0;
    }
    const std::size_t cols = n + slacks + artificials;

    Solver s{Tableau(m, cols), std::vector<std::size_t>(m), std::vector<bool>(cols, false), options};
    std::vector<std::size_t> home(m); // column that starts basic in each row: +1 there
    std::vector<bool> is_artificial(cols, false);
    std::size_t next_slack = n;
    std::size_t next_art = n + slacks;
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            s.t.at(r, c) = sign[r] * lp.rows[r][c];
        }
        s.t.rhs(r) = sign[r] * lp.rhs[r];
        if (sense[r] == Sense::le) {
            s.t.at(r, next_slack) = 1.0;
            home[r] = next_slack++;
        } else {
            if (sense[r] == Sense::ge) {
                s.t.at(r, next_slack++) = -1.0;
            }
            s.t.at(r, next_art) = 1.0;
            is_artificial[next_art] = true;
            home[r] = next_art++;
        }
        s.basis[r] = home[r];
    }

    LpResult result;
    double scale = 1.0;
    for (double b : lp.rhs) {
        scale = std::max(scale, std::abs(b));
    }

    if (artificials > 0) {
        std::vector<double> cost(cols, 0.0);
        for (std::size_t c = 0; c < cols; ++c) {
            cost[c] = is_artificial[c] ? -1.0 : 0.0;
        }
        auto d = s.reduced_costs(cost);
        const auto st = s.run(d);
        if (st == LpStatus::iteration_limit) {
            result.status = st;
            result.pivots = s.pivots;
            return result;
        }
        if (d[cols] > 1e-7 * scale) { // d[cols] = sum of artificials left
            result.status = LpStatus::infeasible;
            result.pivots = s.pivots;
            return result;
        }
        // Swap zero-level artificials out of the basis where possible.
        for (std::size_t r = 0; r < m; ++r) {
            if (!is_artificial[s.basis[r]]) {
                continue;
            }
            for (std::size_t c = 0; c < n + slacks; ++c) {
                if (std::abs(s.t.at(r, c)) > options.tolerance) {
                    s.t.pivot(r, c, d);
                    s.basis[r] = c;
                    break;
                }
            }
        }
        for (std::size_t c = 0; c < cols; ++c) {
            s.blocked[c] = is_artificial[c];
        }
    }

    const double dir = lp.maximize ? 1.0 : -1.0;
    std::vector<double> cost(cols, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
        cost[c] = dir * lp.objective[c];
    }
    auto d = s.reduced_costs(cost);
    result.status = s.run(d);
    result.pivots = s.pivots;
    if (result.status != LpStatus::optimal) {
        return result;
    }

    result.x.assign(n, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        if (s.basis[r] < n) {
            result.x[s.basis[r]] = std::max(0.0, s.t.rhs(r));
            result.basis.push_back(s.basis[r]);
        }
    }
    std::sort(result.basis.begin(), result.basis.end());
    result.objective = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        result.objective += lp.objective[c] * result.x[c];
    }
    result.duals.assign(m, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        result.duals[r] = -d[home[r]] * sign[r] * dir;
    }
    return result;
}

} // namespace synsim::optimizer
