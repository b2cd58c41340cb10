use super::component::{beta_on_curve, component_point, zero_perception_distortion, AlphaTerms};
use super::partition::{classify_working, s_of_d_working, slack_floor, spread, water_level};
use super::{Allocation, BudgetPair, KktCertificate, PlaneRegion, RdpResult, SolverConfig, Working};
use crate::entropy::{h2_unchecked, h3_unchecked};
use crate::error::{RdpError, Result};
use crate::roots::{brent, RootOptions};
use crate::scalar::{in_closure_of_u, scalar_region, Rate, ScalarPoint, ScalarRegion};
use crate::source::BernoulliVectorSource;

/// Upper end of the multiplier brackets; `e^{-2α}` underflows well beyond it.
const MULTIPLIER_CAP: f64 = 350.0;

/// Relative slack when testing membership in the closure of `U`.
const CLOSURE_SLACK: f64 = 1e-12;

/// Smallest perception multiplier tried in region `C`.
const BETA_FLOOR: f64 = 1e-12;

fn finish(
    w: &Working,
    budget: BudgetPair,
    region: PlaneRegion,
    d: Vec<f64>,
    p: Vec<f64>,
    nu: f64,
    mu: f64,
    lambda: Vec<f64>,
    iterations: usize,
) -> RdpResult {
    let n = d.len();
    let residuals = (
        (d.iter().sum::<f64>() - budget.distortion()).abs(),
        (p.iter().sum::<f64>() - budget.perception()).abs(),
    );
    let allocation = Allocation::build(w.q.clone(), d, p);
    let mut component_regions = allocation.regions();
    if region == PlaneRegion::C {
        // Optima near the zero-rate boundary sit on the edge U shares with T.
        for (i, label) in component_regions.iter_mut().enumerate() {
            let (d, p, q) = (allocation.d[i], allocation.p[i], allocation.q[i]);
            if *label != ScalarRegion::U && in_closure_of_u(d, p, q, CLOSURE_SLACK) {
                *label = ScalarRegion::U;
            }
        }
    }
    let certificate = KktCertificate { nu, mu, lambda, gamma: vec![0.0; n], component_regions };
    RdpResult {
        rate: allocation.total_rate,
        region,
        allocation,
        certificate,
        multiplier_iterations: iterations,
        residuals,
        clamped_components: w.clamped,
    }
}

fn check_residuals(result: &RdpResult, budget: BudgetPair, cfg: &SolverConfig, stage: &'static str) -> Result<()> {
    let (rd, rp) = result.residuals;
    if rd > cfg.tol * budget.distortion().max(1.0) || rp > cfg.tol * budget.perception().max(1.0) {
        return Err(RdpError::Convergence { stage, iterations: result.multiplier_iterations });
    }
    Ok(())
}

fn expect_region(w: &Working, budget: BudgetPair, want: PlaneRegion) -> Result<()> {
    let got = classify_working(w, budget);
    if got != want {
        return Err(RdpError::Infeasible(format!(
            "budget (D = {}, P = {}) lies in region {got}, not {want}",
            budget.distortion(),
            budget.perception()
        )));
    }
    Ok(())
}

fn region_a(w: &Working, budget: BudgetPair) -> RdpResult {
    let n = w.q.len();
    let (dist, perc) = (budget.distortion(), budget.perception());
    if dist == 0.0 {
        // Zero distortion forces d_i = 0; the perception budget is spread
        // evenly and the water level is formally infinite.
        let p = spread(&vec![0.0; n], perc, &w.active_mask());
        return finish(w, budget, PlaneRegion::A, vec![0.0; n], p, f64::INFINITY, 0.0, vec![0.0; n], 0);
    }
    let level = water_level(&w.q, dist);
    let d: Vec<f64> = w.q.iter().map(|&q| level.min(q)).collect();
    let floor: Vec<f64> = d.iter().zip(&w.q).map(|(&d, &q)| slack_floor(d, q)).collect();
    let floor_sum: f64 = floor.iter().sum();
    let slack = (perc - floor_sum).max(0.0);
    let p = if floor_sum > 0.0 {
        floor.iter().map(|&l| l + slack * (l / floor_sum)).collect()
    } else {
        spread(&floor, slack, &w.active_mask())
    };
    let beta = (1.0 / level - 1.0).ln();
    finish(w, budget, PlaneRegion::A, d, p, beta, 0.0, vec![0.0; n], 0)
}

fn region_b(w: &Working, budget: BudgetPair) -> RdpResult {
    let n = w.q.len();
    let lp = s_of_d_working(w, budget.distortion());
    let slack = (budget.perception() - lp.value).max(0.0);
    let mut p = spread(&lp.p, slack, &w.active_mask());
    // Keep the partially raised component on the closed side of its boundary.
    if let Some(k) = lp.k {
        let (d, q) = (lp.d[k], w.q[k]);
        while p[k] < q && scalar_region(&ScalarPoint::new(d, p[k], q).expect("valid point")) == ScalarRegion::U {
            p[k] = p[k].next_up();
        }
    }
    finish(w, budget, PlaneRegion::B, lp.d, p, 0.0, 0.0, vec![0.0; n], 0)
}

/// Per-component solutions at fixed multipliers.
///
/// Where `R` is flat (the zero-rate set) the Lagrangian minimizer can be a
/// whole segment, and the solution map jumps as a multiplier crosses the
/// critical value. A sweep may then be the convex combination of the two
/// one-sided limits that meets the budget.
#[derive(Debug, Clone)]
struct Sweep {
    alpha: f64,
    beta: f64,
    d: Vec<f64>,
    p: Vec<f64>,
    lambda: Vec<f64>,
}

impl Sweep {
    fn total_d(&self) -> f64 {
        self.d.iter().sum()
    }

    fn total_p(&self) -> f64 {
        self.p.iter().sum()
    }

    /// `θ · self + (1 - θ) · other`
    fn mix(&self, other: &Sweep, theta: f64) -> Sweep {
        let comb = |x: &[f64], y: &[f64]| -> Vec<f64> {
            x.iter().zip(y).map(|(&a, &b)| theta * a + (1.0 - theta) * b).collect()
        };
        Sweep {
            alpha: self.alpha,
            beta: self.beta,
            d: comb(&self.d, &other.d),
            p: comb(&self.p, &other.p),
            lambda: comb(&self.lambda, &other.lambda),
        }
    }
}

fn sweep(w: &Working, alpha: f64, beta: f64, max_iter: usize) -> Result<Sweep> {
    let n = w.q.len();
    let mut out = Sweep { alpha, beta, d: vec![0.0; n], p: vec![0.0; n], lambda: vec![0.0; n] };
    for (i, &q) in w.q.iter().enumerate() {
        if q == 0.0 {
            continue;
        }
        let sol = component_point(alpha, beta, q, max_iter)?;
        out.d[i] = sol.d;
        out.p[i] = sol.p;
        out.lambda[i] = sol.lambda;
    }
    Ok(out)
}

/// Finds `x >= lo` with `value(eval(x)) = target` for a `value` that is
/// non-increasing in `x`. If the map jumps over the target, the two sides of
/// the jump are bracketed to adjacent floats and mixed.
fn solve_monotone<E, V>(
    mut eval: E,
    value: V,
    lo: f64,
    target: f64,
    cfg: &SolverConfig,
    stage: &'static str,
) -> Result<Sweep>
where
    E: FnMut(f64) -> Result<Sweep>,
    V: Fn(&Sweep) -> f64,
{
    let accept = 0.1 * cfg.tol * target.max(1.0);
    let at_lo = eval(lo)?;
    if value(&at_lo) <= target + accept {
        return Ok(at_lo);
    }
    let mut hi = lo.max(1.0);
    let mut at_hi = eval(hi)?;
    while value(&at_hi) > target {
        hi *= 2.0;
        if hi > MULTIPLIER_CAP {
            return Err(RdpError::Convergence { stage, iterations: 0 });
        }
        at_hi = eval(hi)?;
    }
    if value(&at_hi) >= target - accept {
        return Ok(at_hi);
    }

    let mut failure = None;
    let mut excess = |x: f64| -> f64 {
        match eval(x) {
            Ok(s) => value(&s) - target,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let opts = RootOptions { xtol: 1e-15, ftol: 1e-3 * cfg.tol * target.max(1.0), max_iter: cfg.max_iter };
    let root = brent(&mut excess, lo, hi, opts, stage);
    if let Some(e) = failure {
        return Err(e);
    }
    let x = root?.x;
    let at_x = eval(x)?;
    if (value(&at_x) - target).abs() <= accept {
        return Ok(at_x);
    }

    let (mut a, mut b) = (lo, hi);
    let (mut at_a, mut at_b) = (at_lo, at_hi);
    for _ in 0..2 * cfg.max_iter {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let at_mid = eval(mid)?;
        let v = value(&at_mid);
        if (v - target).abs() <= accept {
            return Ok(at_mid);
        }
        if v > target {
            (a, at_a) = (mid, at_mid);
        } else {
            (b, at_b) = (mid, at_mid);
        }
    }
    let (va, vb) = (value(&at_a), value(&at_b));
    Ok(at_a.mix(&at_b, (target - vb) / (va - vb)))
}

fn region_c(w: &Working, budget: BudgetPair, cfg: &SolverConfig) -> Result<RdpResult> {
    let (dist, perc) = (budget.distortion(), budget.perception());
    let evals = std::cell::Cell::new(0usize);
    let profile = |beta: f64| -> Result<Sweep> {
        solve_monotone(
            |alpha| {
                evals.set(evals.get() + 1);
                sweep(w, alpha, beta, cfg.max_iter)
            },
            Sweep::total_d,
            0.0,
            dist,
            cfg,
            "distortion multiplier",
        )
    };
    // β = 0 is degenerate (every component's minimizer jumps at α = 0), so
    // the search starts just above it.
    let s = solve_monotone(profile, Sweep::total_p, BETA_FLOOR, perc, cfg, "perception multiplier")?;
    let result = finish(w, budget, PlaneRegion::C, s.d, s.p, s.alpha, s.beta, s.lambda, evals.get());
    check_residuals(&result, budget, cfg, "region C multipliers")?;
    Ok(result)
}

/// Expands `hi` by doubling until `f(hi) <= 0`.
fn bracket_upper<F>(mut f: F, stage: &'static str) -> Result<(f64, usize)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut hi = 1.0;
    let mut evals = 0;
    loop {
        evals += 1;
        if f(hi)? <= 0.0 {
            return Ok((hi, evals));
        }
        hi *= 2.0;
        if hi > MULTIPLIER_CAP {
            return Err(RdpError::Convergence { stage, iterations: evals });
        }
    }
}

/// Region `A`: reverse water-filling, perception budget distributed over the
/// per-component slack in proportion to each component's lower bound.
pub fn solve_region_a(src: &BernoulliVectorSource, budget: BudgetPair) -> Result<RdpResult> {
    let w = Working::new(src);
    expect_region(&w, budget, PlaneRegion::A)?;
    Ok(region_a(&w, budget))
}

/// Region `B`: zero rate, allocation from the minimum-perception optimizers
/// plus uniformly spread perception slack.
pub fn solve_region_b(src: &BernoulliVectorSource, budget: BudgetPair) -> Result<RdpResult> {
    let w = Working::new(src);
    expect_region(&w, budget, PlaneRegion::B)?;
    Ok(region_b(&w, budget))
}

/// Region `C`: finds the two shared multipliers by nested bracketed searches.
///
/// At fixed `β` the total distortion decreases in `α`; with `α` profiled
/// out, the total perception decreases in `β`. Both follow from concavity
/// of the dual function.
pub fn solve_region_c(src: &BernoulliVectorSource, budget: BudgetPair, cfg: &SolverConfig) -> Result<RdpResult> {
    let w = Working::new(src);
    expect_region(&w, budget, PlaneRegion::C)?;
    region_c(&w, budget, cfg)
}

/// Evaluates the rate-distortion-perception function.
pub fn rdp(src: &BernoulliVectorSource, budget: BudgetPair) -> Result<RdpResult> {
    rdp_with(src, budget, &SolverConfig::default())
}

pub fn rdp_with(src: &BernoulliVectorSource, budget: BudgetPair, cfg: &SolverConfig) -> Result<RdpResult> {
    let w = Working::new(src);
    let result = match classify_working(&w, budget) {
        PlaneRegion::A => region_a(&w, budget),
        PlaneRegion::B => region_b(&w, budget),
        PlaneRegion::C => region_c(&w, budget, cfg)?,
    };
    check_residuals(&result, budget, cfg, "budget equality")?;
    if result.certificate.structure().is_none() {
        return Err(RdpError::Infeasible(format!(
            "allocation mixes incompatible component regions: {:?}",
            result.certificate.component_regions
        )));
    }
    Ok(result)
}

/// Perception-unconstrained rate-distortion function (reverse water-filling).
pub fn rate_distortion(src: &BernoulliVectorSource, distortion: f64) -> Result<Rate> {
    if !(distortion >= 0.0 && distortion.is_finite()) {
        return Err(RdpError::Validation(format!("D = {distortion} must be finite and nonnegative")));
    }
    let w = Working::new(src);
    if distortion >= w.sum_q() {
        return Ok(Rate::ZERO);
    }
    let level = water_level(&w.q, distortion);
    let nats = w.q.iter().map(|&q| h2_unchecked(q) - h2_unchecked(level.min(q))).sum::<f64>();
    Rate::from_nats(nats)
}

/// Zero perception budget: every component sits at `p = 0` with distortion
/// from the closed-form `p = 0` specialization, one shared multiplier.
pub fn rdp_p_zero(src: &BernoulliVectorSource, distortion: f64) -> Result<RdpResult> {
    rdp_p_zero_with(src, distortion, &SolverConfig::default())
}

pub fn rdp_p_zero_with(src: &BernoulliVectorSource, distortion: f64, cfg: &SolverConfig) -> Result<RdpResult> {
    let budget = BudgetPair::new(distortion, 0.0)?;
    let w = Working::new(src);
    if distortion == 0.0 {
        return Ok(region_a(&w, budget));
    }
    if distortion >= w.zero_rate_distortion() {
        return Ok(region_b(&w, budget));
    }
    let stage = "distortion multiplier";
    let total = |alpha: f64| -> f64 {
        w.q.iter().filter(|&&q| q > 0.0).map(|&q| zero_perception_distortion(alpha, q)).sum::<f64>() - distortion
    };
    let (hi, evals) = bracket_upper(|a| Ok(total(a)), stage)?;
    let opts = RootOptions { xtol: 1e-15, ftol: 1e-3 * cfg.tol * distortion.max(1.0), max_iter: cfg.max_iter };
    let root = brent(total, 0.0, hi, opts, stage)?;
    let alpha = root.x;
    let d: Vec<f64> = w
        .q
        .iter()
        .map(|&q| if q > 0.0 { zero_perception_distortion(alpha, q) } else { 0.0 })
        .collect();

    // Smallest β that keeps every component at p = 0.
    let terms = AlphaTerms::new(alpha);
    let beta_zero: Vec<f64> = w
        .q
        .iter()
        .zip(&d)
        .map(|(&q, &d)| if q > 0.0 { beta_on_curve(&terms, d / 2.0, 0.0, q) } else { 0.0 })
        .collect();
    let mu = beta_zero.iter().copied().fold(0.0, f64::max);
    let lambda: Vec<f64> = w.q.iter().zip(&beta_zero).map(|(&q, &b)| if q > 0.0 { mu - b } else { 0.0 }).collect();

    let n = w.q.len();
    let mut result = finish(&w, budget, PlaneRegion::C, d, vec![0.0; n], alpha, mu, lambda, evals + root.iterations);
    // Rate from the zero-perception closed form rather than the generic branch evaluation.
    let closed: f64 = w
        .q
        .iter()
        .zip(&result.allocation.d)
        .filter(|(&q, _)| q > 0.0)
        .map(|(&q, &d)| {
            (3.0 * h2_unchecked(q) - h3_unchecked(d / 2.0, q) - h3_unchecked(d / 2.0, 1.0 - q)).max(0.0)
        })
        .sum();
    result.rate = Rate::from_nats(closed)?;
    check_residuals(&result, budget, cfg, "zero-perception multiplier")?;
    Ok(result)
}
