//! Weighted sum-rate power allocation by successive geometric programming.
//!
//! For a set of active links the objective is `sum_l W_l log(1 + SINR_l)`,
//! a ratio of posynomials per link. Each iteration condenses the per-link
//! denominator `S_l + I_l + N_l` into a monomial at the current point and
//! solves the resulting convex log-domain program; the true objective is
//! non-decreasing across iterations. A brute-force dB grid oracle and a
//! max-power bypass (for the no-power-control baseline) are included.

pub mod gp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modes::LinkBudget;
pub use gp::{condense, solve_gp, GpError, GpProblem, InnerSolveOptions, Monomial, Posynomial};

#[derive(Debug, Error)]
pub enum PowerError {
    #[error("grid oracle limited to 4 transmitters, got {0}")]
    TooManyTransmitters(usize),
    #[error("problem has no links")]
    Empty,
    #[error(transparent)]
    Gp(#[from] GpError),
}

/// Weighted sum-rate maximization instance over one mode's active links.
/// Powers are indexed by link; `weights` are the back-pressure weights in
/// bits (>= 0). With `sinr_cap` set, rate beyond the spectral efficiency cap
/// earns nothing, so above-cap power only sees the interference gradient it
/// inflicts on other links.
#[derive(Debug, Clone)]
pub struct WeightedRateProblem {
    pub budgets: Vec<LinkBudget>,
    pub weights: Vec<f64>,
    pub p_max: Vec<f64>,
    pub sinr_cap: Option<f64>,
}

impl WeightedRateProblem {
    pub fn num_links(&self) -> usize {
        self.budgets.len()
    }

    fn capped(&self, sinr: f64) -> f64 {
        match self.sinr_cap {
            Some(c) => sinr.min(c),
            None => sinr,
        }
    }

    /// True objective `sum_l W_l ln(1 + SINR_l)` in nats (zero powers
    /// allowed), with capped SINRs.
    pub fn weighted_sum_rate(&self, powers: &[f64]) -> f64 {
        self.budgets
            .iter()
            .zip(&self.weights)
            .map(|(b, w)| w * (1.0 + self.capped(b.sinr(powers))).ln())
            .sum()
    }

    /// Product-form objective of the signomial rewrite,
    /// `prod_l ((I_l + N_l) / (S_l + I_l + N_l))^{W_l}` (to be minimized).
    pub fn ratio_product(&self, powers: &[f64]) -> f64 {
        self.budgets
            .iter()
            .zip(&self.weights)
            .map(|(b, w)| {
                let sinr = self.capped(b.sinr(powers));
                -w * (1.0 + sinr).ln()
            })
            .sum::<f64>()
            .exp()
    }

    /// Printed sum-form objective `sum_l ((I_l + N_l)/(S_l + I_l + N_l))^{W_l}`
    /// (to be minimized).
    pub fn ratio_sum(&self, powers: &[f64]) -> f64 {
        self.budgets
            .iter()
            .zip(&self.weights)
            .map(|(b, w)| {
                let sinr = self.capped(b.sinr(powers));
                (1.0 / (1.0 + sinr)).powf(*w)
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectiveForm {
    /// Product of ratio terms; exactly equivalent to the weighted sum rate.
    Product,
    /// Sum of ratio terms as printed in the signomial rewrite.
    PrintedSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitRule {
    HalfMax,
    GeometricMidpointDb,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub rel_tol: f64,
    pub max_iterations: usize,
    pub init: InitRule,
    pub objective_form: ObjectiveForm,
    /// Lower power bound factor: active links are kept above
    /// `min_power_factor * p_max` inside the GP.
    pub min_power_factor: f64,
    /// Starting points tried (the condensation iteration is local): 1 uses
    /// `init` only, 2 adds full power, 3 adds the geometric midpoint.
    pub restarts: usize,
    /// Search link on/off patterns the continuous iteration cannot reach:
    /// exhaustively for up to four active links, otherwise by probing the
    /// shutdown of each link when greedy zeroing stalls.
    pub shutdown_probes: bool,
    pub inner: InnerSolveOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rel_tol: 1e-4,
            max_iterations: 30,
            init: InitRule::HalfMax,
            objective_form: ObjectiveForm::Product,
            min_power_factor: 1e-6,
            restarts: 3,
            shutdown_probes: true,
            inner: InnerSolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PowerSolution {
    pub powers: Vec<f64>,
    /// Weighted sum rate `sum W_l ln(1 + SINR_l)` in nats at the returned
    /// powers.
    pub objective_nats: f64,
    /// False when the iteration cap was reached before the tolerance.
    pub converged: bool,
}

/// All active transmitters at their maximum power (the no-power-control
/// bypass).
pub fn max_power_allocation(problem: &WeightedRateProblem) -> Vec<f64> {
    problem.p_max.clone()
}

/// Interference-plus-noise posynomial `I_l + N_l` for link `l`, excluding
/// switched-off interferers.
fn numerator_posynomial(b: &LinkBudget, n: usize, active: &[bool]) -> Posynomial {
    let mut g = Posynomial::default();
    for &(j, gain) in b.interference.iter().chain(&b.self_terms) {
        if gain > 0.0 && active[j] {
            g.push_linear(n, j, gain);
        }
    }
    g.push_constant(n, b.noise_w);
    g
}

/// Full denominator posynomial `S_l + I_l + N_l`.
fn denominator_posynomial(b: &LinkBudget, n: usize, active: &[bool]) -> Posynomial {
    let mut g = numerator_posynomial(b, n, active);
    g.push_linear(n, b.link_idx, b.signal_gain);
    g
}

/// Zeroes switched-off entries so the true objective can be evaluated.
fn masked(p: &[f64], active: &[bool]) -> Vec<f64> {
    p.iter()
        .zip(active)
        .map(|(v, a)| if *a { *v } else { 0.0 })
        .collect()
}

/// Multi-start successive condensation over the links flagged in `active`;
/// switched-off links are excluded from the objective and all interference
/// terms. Returns powers (zero for inactive links) and convergence.
/// One condensation iteration: replace each denominator with its AM-GM
/// monomial at `p` and solve the resulting convex log-domain program.
#[allow(clippy::too_many_arguments)]
fn condensation_step(
    problem: &WeightedRateProblem,
    numerators: &[Posynomial],
    denominators: &[Posynomial],
    active: &[bool],
    lo: &[f64],
    hi: &[f64],
    p: &[f64],
    opts: &SolverOptions,
) -> Vec<f64> {
    let n = problem.num_links();
    let condensed: Vec<Monomial> = denominators
        .iter()
        .map(|d| condense(d, p).expect("strictly positive iterate"))
        .collect();

    let y0: Vec<f64> = p.iter().map(|v| v.ln()).collect();
    // Per-link floor for `ln N - ln m`: rate beyond the cap earns nothing,
    // so a capped term contributes a constant and no gradient of its own
    // (only its interference on others).
    let cap_floor = problem.sinr_cap.map(|c| -(1.0 + c).ln());
    let mut scratch = vec![0.0; n];
    let y_opt = match opts.objective_form {
        ObjectiveForm::Product => {
            let mut f = |y: &[f64], grad: &mut [f64]| -> f64 {
                grad.iter_mut().for_each(|g| *g = 0.0);
                let mut val = 0.0;
                for l in 0..n {
                    let w = problem.weights[l];
                    if w == 0.0 || !active[l] {
                        continue;
                    }
                    scratch.iter_mut().for_each(|g| *g = 0.0);
                    let ln_num = numerators[l].log_value_acc_grad(y, 1.0, &mut scratch);
                    let m = &condensed[l];
                    let term = ln_num - m.log_eval(y);
                    match cap_floor {
                        Some(floor) if term <= floor => val += w * floor,
                        _ => {
                            val += w * term;
                            for k in 0..n {
                                grad[k] += w * (scratch[k] - m.exps[k]);
                            }
                        }
                    }
                }
                val
            };
            gp::minimize_box(&mut f, &y0, lo, hi, &opts.inner).0
        }
        ObjectiveForm::PrintedSum => {
            let mut f = |y: &[f64], grad: &mut [f64]| -> f64 {
                grad.iter_mut().for_each(|g| *g = 0.0);
                let mut val = 0.0;
                for l in 0..n {
                    if !active[l] {
                        continue;
                    }
                    let w = problem.weights[l];
                    scratch.iter_mut().for_each(|g| *g = 0.0);
                    let ln_num = numerators[l].log_value_acc_grad(y, 1.0, &mut scratch);
                    let m = &condensed[l];
                    let term = ln_num - m.log_eval(y);
                    match cap_floor {
                        Some(floor) if term <= floor => val += (w * floor).exp(),
                        _ => {
                            let e = (w * term).exp();
                            val += e;
                            for k in 0..n {
                                grad[k] += e * w * (scratch[k] - m.exps[k]);
                            }
                        }
                    }
                }
                val
            };
            gp::minimize_box(&mut f, &y0, lo, hi, &opts.inner).0
        }
    };
    y_opt.iter().map(|v| v.exp()).collect()
}

/// Plain successive condensation from the configured initialization with
/// every link active and no acceptance guard, returning the true objective
/// at the start and after each step. The condensed denominator touches the
/// true one at the current iterate, so the sequence should never decrease.
pub fn condensation_trajectory(
    problem: &WeightedRateProblem,
    opts: &SolverOptions,
    steps: usize,
) -> Vec<f64> {
    let n = problem.num_links();
    let active = vec![true; n];
    let numerators: Vec<Posynomial> = problem
        .budgets
        .iter()
        .map(|b| numerator_posynomial(b, n, &active))
        .collect();
    let denominators: Vec<Posynomial> = problem
        .budgets
        .iter()
        .map(|b| denominator_posynomial(b, n, &active))
        .collect();
    let lo: Vec<f64> = problem
        .p_max
        .iter()
        .map(|p| (p * opts.min_power_factor).ln())
        .collect();
    let hi: Vec<f64> = problem.p_max.iter().map(|p| p.ln()).collect();
    let mut p: Vec<f64> = match opts.init {
        InitRule::HalfMax => problem.p_max.iter().map(|v| v / 2.0).collect(),
        InitRule::GeometricMidpointDb => problem
            .p_max
            .iter()
            .map(|v| (v * v * opts.min_power_factor).sqrt())
            .collect(),
    };
    let mut out = vec![problem.weighted_sum_rate(&p)];
    for _ in 0..steps {
        p = condensation_step(problem, &numerators, &denominators, &active, &lo, &hi, &p, opts);
        out.push(problem.weighted_sum_rate(&p));
    }
    out
}

fn solve_active(
    problem: &WeightedRateProblem,
    opts: &SolverOptions,
    active: &[bool],
) -> (Vec<f64>, bool) {
    let n = problem.num_links();
    let p_min: Vec<f64> = problem
        .p_max
        .iter()
        .map(|p| p * opts.min_power_factor)
        .collect();
    let half: Vec<f64> = problem.p_max.iter().map(|p| p / 2.0).collect();
    let midpoint: Vec<f64> = problem
        .p_max
        .iter()
        .zip(&p_min)
        .map(|(hi, lo)| (hi * lo).sqrt())
        .collect();
    let first = match opts.init {
        InitRule::HalfMax => half.clone(),
        InitRule::GeometricMidpointDb => midpoint.clone(),
    };
    let mut starts = vec![first];
    if opts.restarts >= 2 {
        starts.push(problem.p_max.clone());
    }
    if opts.restarts >= 3 {
        starts.push(if opts.init == InitRule::HalfMax {
            midpoint
        } else {
            half
        });
    }
    // Inactive coordinates are pinned to 1 (y = 0); no posynomial term
    // references them.
    for s in &mut starts {
        for l in 0..n {
            if !active[l] {
                s[l] = 1.0;
            }
        }
    }

    let numerators: Vec<Posynomial> = problem
        .budgets
        .iter()
        .map(|b| numerator_posynomial(b, n, active))
        .collect();
    let denominators: Vec<Posynomial> = problem
        .budgets
        .iter()
        .map(|b| denominator_posynomial(b, n, active))
        .collect();

    // Surrogate progress is measured on the objective form being minimized;
    // the reported objective is always the true weighted sum rate.
    let track = |p: &[f64]| -> f64 {
        let pm = masked(p, active);
        match opts.objective_form {
            ObjectiveForm::Product => problem.weighted_sum_rate(&pm),
            ObjectiveForm::PrintedSum => -problem.ratio_sum(&pm),
        }
    };

    // The condensed surrogate is solved globally over the box, so every
    // start can leap into the same basin. A coarse per-axis dB grid argmax
    // seeds a start inside the best coarse basin instead.
    let act_idx: Vec<usize> = (0..n).filter(|&l| active[l]).collect();
    if opts.restarts >= 2 && !act_idx.is_empty() && act_idx.len() <= 6 {
        let levels = [1.0, 1e-1, 1e-2, 1e-3];
        let mut combo = vec![0usize; act_idx.len()];
        let mut best = (f64::NEG_INFINITY, Vec::new());
        'grid: loop {
            let mut pt = vec![1.0; n];
            for (j, &l) in act_idx.iter().enumerate() {
                pt[l] = problem.p_max[l] * levels[combo[j]];
            }
            let v = track(&pt);
            if v > best.0 {
                best = (v, pt);
            }
            let mut j = 0;
            loop {
                combo[j] += 1;
                if combo[j] < levels.len() {
                    break;
                }
                combo[j] = 0;
                j += 1;
                if j == act_idx.len() {
                    break 'grid;
                }
            }
        }
        starts.push(best.1);
    }

    let lo: Vec<f64> = p_min
        .iter()
        .enumerate()
        .map(|(l, v)| if active[l] { v.ln() } else { 0.0 })
        .collect();
    let hi: Vec<f64> = problem
        .p_max
        .iter()
        .enumerate()
        .map(|(l, v)| if active[l] { v.ln() } else { 0.0 })
        .collect();

    let mut best_p: Option<Vec<f64>> = None;
    let mut best_tracked = f64::NEG_INFINITY;
    let mut converged = true;
    for start in starts {
        let mut p = start;
        let mut tracked = track(&p);
        let mut this_converged = false;

        for _ in 0..opts.max_iterations {
            let p_new = condensation_step(problem, &numerators, &denominators, active, &lo, &hi, &p, opts);
            let tracked_new = track(&p_new);
            // The surrogate touches the true objective at p, so a surrogate
            // improvement can only improve the true objective; guard against
            // numerical noise anyway.
            if tracked_new >= tracked {
                p = p_new;
            }
            let delta = (tracked_new - tracked).abs();
            let done = delta <= opts.rel_tol * tracked.abs().max(1.0);
            tracked = tracked.max(tracked_new);
            if done {
                this_converged = true;
                break;
            }
        }
        if tracked > best_tracked {
            best_tracked = tracked;
            best_p = Some(p);
            converged = this_converged;
        }
    }
    (masked(&best_p.expect("at least one start"), active), converged)
}

/// Maximizes the weighted sum rate by successive condensation with an
/// active-set refinement: links whose shutdown improves the true objective
/// are switched off and the remainder is re-solved. The returned objective
/// is never below the value at the initialization point; on hitting the
/// iteration cap the best iterate is returned with `converged = false`.
pub fn optimize_powers(problem: &WeightedRateProblem, opts: &SolverOptions) -> PowerSolution {
    let n = problem.num_links();
    if n == 0 {
        return PowerSolution {
            powers: Vec::new(),
            objective_nats: 0.0,
            converged: true,
        };
    }
    // A zero-weight link earns nothing and only interferes.
    let mut active: Vec<bool> = problem.weights.iter().map(|w| *w > 0.0).collect();
    let mut p = vec![0.0; n];
    let mut converged = true;
    // On/off patterns form combinatorial local optima the continuous
    // iteration cannot cross (greedy shutdown never revives a link). With
    // few links the subsets are cheap to enumerate outright.
    let idx: Vec<usize> = (0..n).filter(|&l| active[l]).collect();
    if opts.shutdown_probes && (2..=4).contains(&idx.len()) {
        let mut best_v = 0.0;
        for mask in 1u32..1 << idx.len() {
            let mut trial = vec![false; n];
            for (j, &l) in idx.iter().enumerate() {
                if mask & (1 << j) != 0 {
                    trial[l] = true;
                }
            }
            let (p_trial, conv) = solve_active(problem, opts, &trial);
            let v = problem.weighted_sum_rate(&p_trial);
            if v > best_v {
                best_v = v;
                p = p_trial;
                converged = conv;
            }
        }
        return PowerSolution {
            objective_nats: best_v,
            powers: p,
            converged,
        };
    }
    for _round in 0..n {
        if active.iter().all(|a| !a) {
            break;
        }
        let (p_round, conv) = solve_active(problem, opts, &active);
        // Re-solving from the fixed starting points after a probe can lose
        // ground; keep the better iterate.
        if problem.weighted_sum_rate(&p_round) >= problem.weighted_sum_rate(&p) {
            p = p_round;
            converged = conv;
        }
        // Greedy shutdown against the true objective (the GP keeps active
        // powers strictly positive).
        let mut best = problem.weighted_sum_rate(&p);
        let mut changed = false;
        for l in 0..n {
            if !active[l] {
                continue;
            }
            let saved = p[l];
            p[l] = 0.0;
            let v = problem.weighted_sum_rate(&p);
            if v > best {
                best = v;
                active[l] = false;
                changed = true;
            } else {
                p[l] = saved;
            }
        }
        if changed {
            continue;
        }
        // No single zeroing helps at this point, but a shutdown followed by
        // re-balancing the survivors might. Probe each candidate with a
        // single-start solve.
        if !opts.shutdown_probes || active.iter().filter(|a| **a).count() < 2 {
            break;
        }
        let probe_opts = SolverOptions {
            restarts: 1,
            ..*opts
        };
        let mut probe_best: Option<(Vec<bool>, Vec<f64>, bool)> = None;
        for l in 0..n {
            if !active[l] {
                continue;
            }
            let mut trial = active.clone();
            trial[l] = false;
            let (p_trial, conv) = solve_active(problem, &probe_opts, &trial);
            let v = problem.weighted_sum_rate(&p_trial);
            if v > best {
                best = v;
                probe_best = Some((trial, p_trial, conv));
            }
        }
        match probe_best {
            Some((trial, p_trial, conv)) => {
                active = trial;
                p = p_trial;
                converged = conv;
            }
            None => break,
        }
    }

    PowerSolution {
        objective_nats: problem.weighted_sum_rate(&p),
        powers: p,
        converged,
    }
}

/// Lowers every link whose SINR exceeds `sinr_cap` down to the cap. The
/// solver maximizes uncapped rates, so it holds power above the spectral
/// efficiency cap for rate that can never be served; trimming sheds that
/// headroom. A trimmed link keeps its capped rate while every other link
/// sees less interference, so capped rates are non-decreasing per pass.
pub fn trim_to_sinr_cap(budgets: &[LinkBudget], powers: &mut [f64], sinr_cap: f64) {
    if !sinr_cap.is_finite() || sinr_cap <= 0.0 {
        return;
    }
    for _ in 0..32 {
        let mut changed = false;
        for b in budgets {
            let sinr = b.sinr(powers);
            if sinr > sinr_cap * (1.0 + 1e-9) {
                // Own SINR is linear in own power with the rest fixed.
                powers[b.link_idx] *= sinr_cap / sinr;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Exhaustively evaluates the weighted sum rate over a dB-spaced grid per
/// transmitter (3 dB steps down from `p_max`, plus exactly zero) and returns
/// the best point with its objective.
pub fn grid_oracle(
    problem: &WeightedRateProblem,
    points_per_axis: usize,
) -> Result<(Vec<f64>, f64), PowerError> {
    let n = problem.num_links();
    if n == 0 {
        return Err(PowerError::Empty);
    }
    if n > 4 {
        return Err(PowerError::TooManyTransmitters(n));
    }
    assert!(points_per_axis >= 2);
    let axes: Vec<Vec<f64>> = problem
        .p_max
        .iter()
        .map(|&pm| {
            let mut axis = vec![0.0];
            for j in (0..points_per_axis - 1).rev() {
                axis.push(pm * 10f64.powf(-3.0 * j as f64 / 10.0));
            }
            axis
        })
        .collect();

    let mut idx = vec![0usize; n];
    let mut powers = vec![0.0; n];
    let mut best_val = f64::NEG_INFINITY;
    let mut best = powers.clone();
    loop {
        for (k, &i) in idx.iter().enumerate() {
            powers[k] = axes[k][i];
        }
        let v = problem.weighted_sum_rate(&powers);
        if v > best_val {
            best_val = v;
            best.copy_from_slice(&powers);
        }
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == n {
                return Ok((best, best_val));
            }
        }
    }
}

/// Synthetic four-link instance for solver-vs-oracle comparisons. Gains
/// loosely shaped like a mixed backhaul/access slot: strong signal paths,
/// weaker cross terms, tiny self-interference, one high-power transmitter.
pub fn random_four_link_instance(rng: &mut impl rand::Rng) -> WeightedRateProblem {
    let n = 4;
    let mut budgets = Vec::new();
    for l in 0..n {
        let signal = 10f64.powf(rng.gen::<f64>() * 3.0 - 10.0);
        let mut interference = Vec::new();
        let mut self_terms = Vec::new();
        for j in 0..n {
            if j == l {
                continue;
            }
            if j % 4 == l % 4 {
                self_terms.push((j, 1e-12));
            } else {
                interference.push((j, 10f64.powf(rng.gen::<f64>() * 4.0 - 14.0)));
            }
        }
        budgets.push(LinkBudget {
            link_idx: l,
            signal_gain: signal,
            interference,
            self_terms,
            noise_w: 1.26e-13,
        });
    }
    let weights = (0..n).map(|_| rng.gen::<f64>() * 4.0 + 0.1).collect();
    WeightedRateProblem {
        budgets,
        weights,
        p_max: vec![0.2, 0.25, 19.9, 0.25],
        sinr_cap: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::LinkBudget;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_link(gain: f64, noise: f64, p_max: f64) -> WeightedRateProblem {
        WeightedRateProblem {
            budgets: vec![LinkBudget {
                link_idx: 0,
                signal_gain: gain,
                interference: vec![],
                self_terms: vec![],
                noise_w: noise,
            }],
            weights: vec![1.0],
            p_max: vec![p_max],
            sinr_cap: None,
        }
    }

    /// Two mutually interfering links with configurable gains.
    fn two_link(sig: [f64; 2], cross: [f64; 2], noise: f64, p_max: f64) -> WeightedRateProblem {
        WeightedRateProblem {
            budgets: vec![
                LinkBudget {
                    link_idx: 0,
                    signal_gain: sig[0],
                    interference: vec![(1, cross[0])],
                    self_terms: vec![],
                    noise_w: noise,
                },
                LinkBudget {
                    link_idx: 1,
                    signal_gain: sig[1],
                    interference: vec![(0, cross[1])],
                    self_terms: vec![],
                    noise_w: noise,
                },
            ],
            weights: vec![1.0, 1.0],
            p_max: vec![p_max, p_max],
            sinr_cap: None,
        }
    }

    use super::random_four_link_instance as random_four_link;

    #[test]
    fn single_link_goes_to_max_power() {
        let p = single_link(1e-8, 1e-13, 0.25);
        let sol = optimize_powers(&p, &SolverOptions::default());
        assert!((sol.powers[0] - 0.25).abs() < 1e-6 * 0.25);
        assert!(sol.converged);
    }

    #[test]
    fn symmetric_problem_gets_symmetric_allocation() {
        let p = two_link([1e-8, 1e-8], [1e-11, 1e-11], 1e-13, 0.25);
        let sol = optimize_powers(&p, &SolverOptions::default());
        assert!(
            (sol.powers[0] - sol.powers[1]).abs() / 0.25 < 1e-3,
            "powers {:?}",
            sol.powers
        );
        let (gp, gv) = grid_oracle(&p, 20).unwrap();
        assert!(sol.objective_nats >= 0.98 * gv, "gp {:?} -> {gv}", gp);
    }

    #[test]
    fn beats_grid_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = random_four_link(&mut rng);
            let sol = optimize_powers(&p, &SolverOptions::default());
            let (_, gv) = grid_oracle(&p, 20).unwrap();
            assert!(
                sol.objective_nats >= 0.98 * gv,
                "solver {} vs grid {}",
                sol.objective_nats,
                gv
            );
        }
    }

    #[test]
    fn objective_non_decreasing_from_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let p = random_four_link(&mut rng);
            let init: Vec<f64> = p.p_max.iter().map(|v| v / 2.0).collect();
            let sol = optimize_powers(&p, &SolverOptions::default());
            assert!(sol.objective_nats >= p.weighted_sum_rate(&init) - 1e-9);
        }
    }

    #[test]
    fn max_power_allocation_is_p_max() {
        let p = random_four_link(&mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(max_power_allocation(&p), p.p_max);
        let empty = WeightedRateProblem {
            budgets: vec![],
            weights: vec![],
            p_max: vec![],
            sinr_cap: None,
        };
        assert!(max_power_allocation(&empty).is_empty());
    }

    #[test]
    fn grid_oracle_basics() {
        let p = single_link(1e-8, 1e-13, 0.25);
        let (best, val) = grid_oracle(&p, 20).unwrap();
        assert_eq!(best[0], 0.25);
        assert!(val > 0.0);
        let too_big = WeightedRateProblem {
            budgets: (0..5)
                .map(|l| LinkBudget {
                    link_idx: l,
                    signal_gain: 1.0,
                    interference: vec![],
                    self_terms: vec![],
                    noise_w: 1.0,
                })
                .collect(),
            weights: vec![1.0; 5],
            p_max: vec![1.0; 5],
            sinr_cap: None,
        };
        assert!(matches!(
            grid_oracle(&too_big, 20),
            Err(PowerError::TooManyTransmitters(5))
        ));
    }

    #[test]
    fn product_and_sum_rate_order_identically() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let p = random_four_link(&mut rng);
            let a: Vec<f64> = p.p_max.iter().map(|v| v * rng.gen::<f64>()).collect();
            let b: Vec<f64> = p.p_max.iter().map(|v| v * rng.gen::<f64>()).collect();
            let rate_diff = p.weighted_sum_rate(&a) - p.weighted_sum_rate(&b);
            let prod_diff = p.ratio_product(&a).ln() - p.ratio_product(&b).ln();
            if rate_diff.abs() > 1e-9 {
                assert_eq!(rate_diff > 0.0, prod_diff < 0.0);
            }
        }
    }

    #[test]
    fn printed_sum_form_runs_and_reports_true_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_four_link(&mut rng);
        let opts = SolverOptions {
            objective_form: ObjectiveForm::PrintedSum,
            ..SolverOptions::default()
        };
        let sol = optimize_powers(&p, &opts);
        assert_eq!(sol.powers.len(), 4);
        assert!((sol.objective_nats - p.weighted_sum_rate(&sol.powers)).abs() < 1e-12);
    }

    #[test]
    fn empty_problem_is_trivial() {
        let empty = WeightedRateProblem {
            budgets: vec![],
            weights: vec![],
            p_max: vec![],
            sinr_cap: None,
        };
        let sol = optimize_powers(&empty, &SolverOptions::default());
        assert!(sol.powers.is_empty());
        assert_eq!(sol.objective_nats, 0.0);
    }

    proptest::proptest! {
        #[test]
        fn powers_always_within_bounds(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_four_link(&mut rng);
            let sol = optimize_powers(&p, &SolverOptions::default());
            for (pw, pm) in sol.powers.iter().zip(&p.p_max) {
                proptest::prop_assert!(*pw >= 0.0 && *pw <= pm * (1.0 + 1e-12));
            }
        }
    }
}

