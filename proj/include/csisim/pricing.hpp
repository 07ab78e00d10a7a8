#pragma once

#include <optional>
#include <vector>

namespace csisim {
namespace pricing {

// Saturating curve a * x' / (b + x') with x' = max(0, x - x_offset).
struct SaturatingCurve {
    double a = 0.0;
    double b = 1.0;
    double x_offset = 0.0;

    double operator()(double x) const {
        const double xx = x - x_offset;
        return xx > 0.0 ? a * xx / (b + xx) : 0.0;
    }
};

// Resource -> QoS mappings. The perception curve takes an AP count; the
// generation curves take inference steps and are already direction-fixed
// (quality gained relative to a single step, so both increase with steps).
struct QosMappings {
    SaturatingCurve perception; // vs AP count; calibrated 1 AP -> 5.7, 5 APs -> 23.5
    SaturatingCurve brisque;    // vs steps; calibrated so the gain at 10 steps is 55 - 3
    SaturatingCurve tv;         // vs steps; 78 - 32 at 10 steps

    static QosMappings calibrated();
};

// Unit costs of the quantized allocation: an AP costs units_per_ap, skeleton
// processing adds skeleton_units once perception is on, an inference step
// costs units_per_step.
struct ResourceModel {
    int units_per_ap = 2;
    int skeleton_units = 1;
    int units_per_step = 2;
    int max_aps = 6;
};

struct EnvState {
    QosMappings maps = QosMappings::calibrated();
    ResourceModel resources;
    double v_c = 30.0;   // unit cost of computing resources
    double v_m = 40.0;   // user gain per unit QoS
    int total_units = 100; // E_t
    double u_th = 0.0;   // VSP participation threshold

    void validate() const;
};

struct PricingStrategy {
    double v_r = 0.0; // price per unit QoS
    double i_b = 0.0; // base fee
};

struct Allocation {
    int perception_units = 0; // chi_s
    int generation_units = 0; // chi_ag

    int total() const { return perception_units + generation_units; }
};

int ap_count(const Allocation& alloc, const ResourceModel& res);
int step_count(const Allocation& alloc, const ResourceModel& res);
Allocation make_allocation(int aps, int steps, const ResourceModel& res);

struct QosBreakdown {
    double q_s = 0.0;
    double q_ag = 0.0;
    double q_t = 0.0;
};

QosBreakdown total_qos(const Allocation& alloc, const QosMappings& maps, const ResourceModel& res);

// U_vsp = v_r * Q_t + i_b - (chi_s + chi_ag) * v_c
double vsp_utility(const PricingStrategy& s, const Allocation& alloc, const EnvState& env);

// U_us = (v_m - v_r) * Q_t - i_b
double user_utility(const PricingStrategy& s, const Allocation& alloc, const EnvState& env);

// Exhaustive best response over quantized allocations within the budget.
// Ties go to the smaller total, then the larger perception share.
Allocation vsp_best_response(const PricingStrategy& s, const EnvState& env);

struct PricingGrid {
    double v_r_max = 60.0;
    double v_r_step = 0.5;
    double i_b_max = 30.0;
    double i_b_step = 0.5;
};

struct OracleResult {
    bool feasible = false;
    PricingStrategy strategy;
    Allocation allocation;
    double u_us = 0.0;
    double u_vsp = 0.0;
    QosBreakdown qos;
};

// Grid search over (v_r, i_b) with the VSP playing its best response;
// infeasible when no grid point clears u_th. Deterministic lowest-index
// tie-break; the parallel path reduces in index order and matches the
// serial result exactly.
OracleResult oracle_optimal_pricing(const EnvState& env, const PricingGrid& grid,
                                    bool parallel = true);

// Eq-23 constraint audit for an accepted strategy/allocation pair.
bool satisfies_constraints(const PricingStrategy& s, const Allocation& alloc, const EnvState& env,
                           double tol = 1e-9);

} // namespace pricing
} // namespace csisim
