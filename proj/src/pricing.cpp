#include "csisim/pricing.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace csisim {
namespace pricing {

QosMappings QosMappings::calibrated() {
    // perception: a*x/(b+x) through (1, 5.7) and (5, 23.5).
    // brisque/tv: gain over one step, a*(x-1)/(b+(x-1)) with the asymptote at
    // the full measured range and the 10-step gain matching the endpoints
    // (55 -> 3 and 78 -> 32).
    QosMappings m;
    m.perception = {107.16, 17.8, 0.0};
    m.brisque = {55.0, 55.0 * 9.0 / 52.0 - 9.0, 1.0};
    m.tv = {78.0, 78.0 * 9.0 / 46.0 - 9.0, 1.0};
    return m;
}

void EnvState::validate() const {
    if (v_c <= 0.0) throw std::invalid_argument("env: v_c must be > 0");
    if (v_m <= 0.0) throw std::invalid_argument("env: v_m must be > 0");
    if (total_units < 0) throw std::invalid_argument("env: total resource units must be >= 0");
    if (u_th < 0.0) throw std::invalid_argument("env: u_th must be >= 0");
    if (resources.units_per_ap <= 0 || resources.units_per_step <= 0 || resources.skeleton_units < 0)
        throw std::invalid_argument("env: invalid resource model");
}

int ap_count(const Allocation& alloc, const ResourceModel& res) {
    if (alloc.perception_units <= res.skeleton_units) return 0;
    return (alloc.perception_units - res.skeleton_units) / res.units_per_ap;
}

int step_count(const Allocation& alloc, const ResourceModel& res) {
    return alloc.generation_units / res.units_per_step;
}

Allocation make_allocation(int aps, int steps, const ResourceModel& res) {
    Allocation a;
    a.perception_units = aps > 0 ? aps * res.units_per_ap + res.skeleton_units : 0;
    a.generation_units = steps * res.units_per_step;
    return a;
}

QosBreakdown total_qos(const Allocation& alloc, const QosMappings& maps, const ResourceModel& res) {
    QosBreakdown q;
    q.q_s = maps.perception(static_cast<double>(ap_count(alloc, res)));
    const double steps = static_cast<double>(step_count(alloc, res));
    q.q_ag = maps.brisque(steps) + maps.tv(steps);
    q.q_t = q.q_s + q.q_ag;
    return q;
}

double vsp_utility(const PricingStrategy& s, const Allocation& alloc, const EnvState& env) {
    const QosBreakdown q = total_qos(alloc, env.maps, env.resources);
    return s.v_r * q.q_t + s.i_b - alloc.total() * env.v_c;
}

double user_utility(const PricingStrategy& s, const Allocation& alloc, const EnvState& env) {
    const QosBreakdown q = total_qos(alloc, env.maps, env.resources);
    return (env.v_m - s.v_r) * q.q_t - s.i_b;
}

Allocation vsp_best_response(const PricingStrategy& s, const EnvState& env) {
    env.validate();
    const auto& res = env.resources;
    Allocation best;
    double best_u = vsp_utility(s, best, env);

    const int max_aps = std::min(res.max_aps,
                                 (env.total_units - res.skeleton_units) / res.units_per_ap);
    for (int aps = 0; aps <= std::max(0, max_aps); ++aps) {
        const int base = aps > 0 ? aps * res.units_per_ap + res.skeleton_units : 0;
        if (base > env.total_units) break;
        const int max_steps = (env.total_units - base) / res.units_per_step;
        for (int steps = 0; steps <= max_steps; ++steps) {
            const Allocation cand = make_allocation(aps, steps, res);
            const double u = vsp_utility(s, cand, env);
            const bool better =
                u > best_u ||
                (u == best_u && (cand.total() < best.total() ||
                                 (cand.total() == best.total() &&
                                  cand.perception_units > best.perception_units)));
            if (better) {
                best_u = u;
                best = cand;
            }
        }
    }
    return best;
}

OracleResult oracle_optimal_pricing(const EnvState& env, const PricingGrid& grid, bool parallel) {
    env.validate();
    if (grid.v_r_step <= 0.0 || grid.i_b_step <= 0.0)
        throw std::invalid_argument("oracle: grid steps must be > 0");
    const int n_vr = static_cast<int>(std::floor(grid.v_r_max / grid.v_r_step + 1e-9)) + 1;
    const int n_ib = static_cast<int>(std::floor(grid.i_b_max / grid.i_b_step + 1e-9)) + 1;

    struct Best {
        bool feasible = false;
        double u_us = 0.0;
        long index = -1;
        PricingStrategy s;
        Allocation alloc;
        double u_vsp = 0.0;
    };

    auto scan_row = [&](int i, Best& best) {
        const double v_r = i * grid.v_r_step;
        // The best response does not depend on i_b, so compute it once per row.
        const Allocation alloc = vsp_best_response({v_r, 0.0}, env);
        const QosBreakdown q = total_qos(alloc, env.maps, env.resources);
        const double margin = v_r * q.q_t - alloc.total() * env.v_c;
        for (int j = 0; j < n_ib; ++j) {
            const double i_b = j * grid.i_b_step;
            const double u_vsp = margin + i_b;
            if (u_vsp < env.u_th) continue;
            const double u_us = (env.v_m - v_r) * q.q_t - i_b;
            const long index = static_cast<long>(i) * n_ib + j;
            if (!best.feasible || u_us > best.u_us ||
                (u_us == best.u_us && index < best.index)) {
                best = {true, u_us, index, {v_r, i_b}, alloc, u_vsp};
            }
        }
    };

    Best overall;
    if (parallel) {
        std::vector<Best> row_best(static_cast<std::size_t>(n_vr));
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < n_vr; ++i) scan_row(i, row_best[static_cast<std::size_t>(i)]);
        for (const auto& b : row_best) {
            if (!b.feasible) continue;
            if (!overall.feasible || b.u_us > overall.u_us ||
                (b.u_us == overall.u_us && b.index < overall.index))
                overall = b;
        }
    } else {
        for (int i = 0; i < n_vr; ++i) scan_row(i, overall);
    }

    OracleResult out;
    out.feasible = overall.feasible;
    if (overall.feasible) {
        out.strategy = overall.s;
        out.allocation = overall.alloc;
        out.u_us = overall.u_us;
        out.u_vsp = overall.u_vsp;
        out.qos = total_qos(overall.alloc, env.maps, env.resources);
    }
    return out;
}

bool satisfies_constraints(const PricingStrategy& s, const Allocation& alloc, const EnvState& env,
                           double tol) {
    if (alloc.total() > env.total_units) return false;
    if (alloc.perception_units < 0 || alloc.generation_units < 0) return false;
    return vsp_utility(s, alloc, env) >= env.u_th - tol;
}

} // namespace pricing
} // namespace csisim
