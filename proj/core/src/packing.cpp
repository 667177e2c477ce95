#include "synsim/optimizer/packing.hpp"

#include "synsim/core/errors.hpp"
#include "synsim/optimizer/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace synsim::optimizer {

namespace {

using core::Resources;

constexpr int kRowsPerType = 3;

double row_use(const Resources& r, int k) {
    switch (k) {
    case 0: return r.gpus;
    case 1: return r.cpus;
    default: return static_cast<double>(r.mem_mb);
    }
}

bool dominates(const PackingOption& a, const PackingOption& b) {
    return a.type == b.type && a.use.fits_in(b.use) && a.value >= b.value;
}

struct Candidate {
    int index = -1; // into the job's original option list; -1 = unassigned
    double profit = 0.0;
};

class Search {
public:
    explicit Search(const PackingProblem& p) : p_(p) {}

    PackingResult run() {
        const std::size_t n = p_.jobs.size();
        const std::size_t types = p_.capacity.size();
        kept_.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            const auto& opts = p_.jobs[j];
            for (std::size_t a = 0; a < opts.size(); ++a) {
                if (opts[a].type < 0 || static_cast<std::size_t>(opts[a].type) >= types) {
                    throw InternalError("packing option refers to an unknown machine type");
                }
                if (!opts[a].use.fits_in(p_.capacity[static_cast<std::size_t>(opts[a].type)])) {
                    continue;
                }
                bool dominated = false;
                for (std::size_t b = 0; b < opts.size() && !dominated; ++b) {
                    if (b == a || !dominates(opts[b], opts[a])) {
                        continue;
                    }
                    // Exact duplicates keep the lower index.
                    dominated = !dominates(opts[a], opts[b]) || b < a;
                }
                if (!dominated) {
                    kept_[j].push_back(static_cast<int>(a));
                }
            }
            if (kept_[j].empty() && !p_.allow_unassigned) {
                return {};
            }
        }

        if (!multipliers()) {
            return {};
        }
        prepare();

        rem_ = p_.capacity;
        current_.assign(n, -1);
        best_value_ = -std::numeric_limits<double>::infinity();
        dfs(0, 0.0, 0);

        PackingResult out;
        out.nodes = nodes_;
        out.proven_optimal = !aborted_;
        if (!found_) {
            out.feasible = false;
            return out;
        }
        out.feasible = true;
        out.choice = best_;
        out.objective = best_value_;
        return out;
    }

private:
    // Root LP relaxation; its capacity-row duals become the Lagrange
    // multipliers. Returns false when the relaxation is infeasible.
    bool multipliers() {
        const std::size_t n = p_.jobs.size();
        const std::size_t types = p_.capacity.size();
        std::vector<std::pair<std::size_t, int>> vars;
        for (std::size_t j = 0; j < n; ++j) {
            for (int a : kept_[j]) {
                vars.emplace_back(j, a);
            }
        }
        lambda_.assign(types * kRowsPerType, 0.0);
        nu_ = 0.0;
        if (vars.empty()) {
            return p_.allow_unassigned && p_.min_assigned_gpus <= 0;
        }
        LinearProgram lp(vars.size(), true);
        for (std::size_t v = 0; v < vars.size(); ++v) {
            lp.objective[v] = option(vars[v]).value;
        }
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<double> row(vars.size(), 0.0);
            for (std::size_t v = 0; v < vars.size(); ++v) {
                row[v] = vars[v].first == j ? 1.0 : 0.0;
            }
            lp.add_row(std::move(row), p_.allow_unassigned ? Sense::le : Sense::eq, 1.0);
        }
        const std::size_t first_cap = lp.constraints();
        for (std::size_t t = 0; t < types; ++t) {
            for (int k = 0; k < kRowsPerType; ++k) {
                std::vector<double> row(vars.size(), 0.0);
                for (std::size_t v = 0; v < vars.size(); ++v) {
                    const auto& o = option(vars[v]);
                    row[v] = static_cast<std::size_t>(o.type) == t ? row_use(o.use, k) : 0.0;
                }
                lp.add_row(std::move(row), Sense::le, row_use(p_.capacity[t], k));
            }
        }
        std::size_t gpu_row = lp.constraints();
        if (p_.min_assigned_gpus > 0) {
            std::vector<double> row(vars.size(), 0.0);
            for (std::size_t v = 0; v < vars.size(); ++v) {
                row[v] = option(vars[v]).use.gpus;
            }
            gpu_row = lp.add_row(std::move(row), Sense::ge, p_.min_assigned_gpus);
        }
        const auto res = solve_lp(lp);
        if (res.status == LpStatus::infeasible) {
            return false;
        }
        if (res.status != LpStatus::optimal) {
            return true; // fall back to the plain value bound
        }
        for (std::size_t r = 0; r < lambda_.size(); ++r) {
            lambda_[r] = std::max(0.0, res.duals[first_cap + r]);
        }
        if (gpu_row < lp.constraints()) {
            nu_ = std::max(0.0, -res.duals[gpu_row]);
        }
        return true;
    }

    [[nodiscard]] const PackingOption& option(const std::pair<std::size_t, int>& v) const {
        return p_.jobs[v.first][static_cast<std::size_t>(v.second)];
    }

    [[nodiscard]] double profit(const PackingOption& o) const {
        double p = o.value + nu_ * o.use.gpus;
        for (int k = 0; k < kRowsPerType; ++k) {
            p -= lambda_[static_cast<std::size_t>(o.type) * kRowsPerType + static_cast<std::size_t>(k)] * row_use(o.use, k);
        }
        return p;
    }

    void prepare() {
        const std::size_t n = p_.jobs.size();
        order_.resize(n);
        suffix_lag_.assign(n + 1, 0.0);
        suffix_plain_.assign(n + 1, 0.0);
        suffix_min_.assign(n + 1, Resources{});
        suffix_max_gpus_.assign(n + 1, 0);
        for (std::size_t j = n; j-- > 0;) {
            auto& cands = order_[j];
            double best_lag = -std::numeric_limits<double>::infinity();
            double best_plain = -std::numeric_limits<double>::infinity();
            Resources lo{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(),
                         std::numeric_limits<std::int64_t>::max()};
            int max_gpus = 0;
            for (int a : kept_[j]) {
                const auto& o = p_.jobs[j][static_cast<std::size_t>(a)];
                cands.push_back({a, profit(o)});
                best_lag = std::max(best_lag, cands.back().profit);
                best_plain = std::max(best_plain, o.value);
                lo = core::component_min(lo, o.use);
                max_gpus = std::max(max_gpus, o.use.gpus);
            }
            std::stable_sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
                return x.profit != y.profit ? x.profit > y.profit : x.index < y.index;
            });
            if (p_.allow_unassigned) {
                cands.push_back({-1, 0.0});
                best_lag = std::max(best_lag, 0.0);
                best_plain = std::max(best_plain, 0.0);
                lo = Resources{};
            }
            suffix_lag_[j] = suffix_lag_[j + 1] + best_lag;
            suffix_plain_[j] = suffix_plain_[j + 1] + best_plain;
            suffix_min_[j] = suffix_min_[j + 1] + lo;
            suffix_max_gpus_[j] = suffix_max_gpus_[j + 1] + max_gpus;
        }
    }

    [[nodiscard]] double bound(std::size_t j, double value, int gpus) const {
        double lag = suffix_lag_[j] - nu_ * (p_.min_assigned_gpus - gpus);
        for (std::size_t t = 0; t < rem_.size(); ++t) {
            for (int k = 0; k < kRowsPerType; ++k) {
                lag += lambda_[t * kRowsPerType + static_cast<std::size_t>(k)] * row_use(rem_[t], k);
            }
        }
        return value + std::min(lag, suffix_plain_[j]);
    }

    [[nodiscard]] bool hopeless(std::size_t j, int gpus) const {
        if (gpus + suffix_max_gpus_[j] < p_.min_assigned_gpus) {
            return true;
        }
        Resources total{};
        for (const auto& r : rem_) {
            total += r;
        }
        return !suffix_min_[j].fits_in(total);
    }

    // Prefer assigned over unassigned, then lower option indices.
    [[nodiscard]] bool lex_smaller(const std::vector<int>& a, const std::vector<int>& b) const {
        auto key = [](int c) { return c < 0 ? std::numeric_limits<int>::max() : c; };
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (key(a[i]) != key(b[i])) {
                return key(a[i]) < key(b[i]);
            }
        }
        return false;
    }

    void dfs(std::size_t j, double value, int gpus) {
        if (aborted_) {
            return;
        }
        if (p_.node_limit > 0 && nodes_ >= p_.node_limit) {
            aborted_ = true;
            return;
        }
        ++nodes_;
        if (j == p_.jobs.size()) {
            if (gpus < p_.min_assigned_gpus) {
                return;
            }
            if (!found_ || value > best_value_ || (value == best_value_ && lex_smaller(current_, best_))) {
                found_ = true;
                best_value_ = value;
                best_ = current_;
            }
            return;
        }
        if (hopeless(j, gpus)) {
            return;
        }
        if (found_) {
            const double slack = 1e-9 * std::max(1.0, std::abs(best_value_));
            if (bound(j, value, gpus) < best_value_ - slack) {
                return;
            }
        }
        for (const auto& c : order_[j]) {
            if (c.index < 0) {
                current_[j] = -1;
                dfs(j + 1, value + 0.0, gpus);
                continue;
            }
            const auto& o = p_.jobs[j][static_cast<std::size_t>(c.index)];
            auto& cap = rem_[static_cast<std::size_t>(o.type)];
            if (!o.use.fits_in(cap)) {
                continue;
            }
            cap -= o.use;
            current_[j] = c.index;
            dfs(j + 1, value + o.value, gpus + o.use.gpus);
            cap += o.use;
            if (aborted_) {
                break;
            }
        }
        current_[j] = -1;
    }

    const PackingProblem& p_;
    std::vector<std::vector<int>> kept_;
    std::vector<double> lambda_;
    double nu_ = 0.0;
    std::vector<std::vector<Candidate>> order_;
    std::vector<double> suffix_lag_;
    std::vector<double> suffix_plain_;
    std::vector<Resources> suffix_min_;
    std::vector<int> suffix_max_gpus_;

    std::vector<Resources> rem_;
    std::vector<int> current_;
    std::vector<int> best_;
    double best_value_ = 0.0;
    bool found_ = false;
    bool aborted_ = false;
    std::size_t nodes_ = 0;
};

} // namespace

PackingResult solve_packing(const PackingProblem& problem) {
    return Search(problem).run();
}

} // namespace synsim::optimizer
