//! Library half of the `bernoulli-rdp` command-line tool.

pub mod args;
pub mod input;
pub mod output;

use std::io::Write;

use bernoulli_rdp::graph::graph_rdp_with;
use bernoulli_rdp::oracle::MAX_ORACLE_COMPONENTS;
use bernoulli_rdp::{
    allocation_grid_oracle, classify, rdp_with, s_of_d, s_of_d_oracle, scalar_channel_oracle,
    scalar_rdp_at, t_of_d, BernoulliVectorSource, BudgetPair, GridSpec, PlaneRegion, RdpError, RdpResult,
    SolverConfig,
};
use rayon::prelude::*;

use args::{Axis, BudgetArgs, Cli, Command, SourceArgs};
use output::{BoundsRecord, Emitter, ErrorRecord, GraphRecord, Num, OutputRecord, RegionRecord, VerifyRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;
pub const EXIT_SIZE: i32 = 5;

pub const SCALAR_ORACLE_TOL: f64 = 2e-3;
pub const VECTOR_ORACLE_TOL: f64 = 5e-3;
pub const S_ORACLE_TOL: f64 = 2e-3;

/// Slack allowed for round-off in monotonicity and certificate self-checks.
const SELF_CHECK_TOL: f64 = 1e-9;

pub fn exit_code(e: &RdpError) -> i32 {
    match e {
        RdpError::Domain(_) | RdpError::Validation(_) | RdpError::Parse(_) => EXIT_VALIDATION,
        RdpError::Convergence { .. } | RdpError::Infeasible(_) => EXIT_CONVERGENCE,
        RdpError::Size { .. } => EXIT_SIZE,
    }
}

/// A command-level failure: exit code plus the object printed on stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub record: ErrorRecord,
}

impl From<RdpError> for Failure {
    fn from(e: RdpError) -> Self {
        Failure { code: exit_code(&e), record: ErrorRecord::from_error(&e) }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 1, record: ErrorRecord::new("io", e.to_string()) }
    }
}

fn validation(msg: impl Into<String>) -> Failure {
    RdpError::Validation(msg.into()).into()
}

fn self_check_failure(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_VERIFY, record: ErrorRecord::new("self-check", msg) }
}

struct Ctx {
    cfg: SolverConfig,
    self_check: bool,
}

/// Runs a parsed command, writing records to `out`. Returns the exit code;
/// command-level failures are also printed on stderr.
pub fn run<W: Write>(cli: &Cli, out: W) -> i32 {
    let mut em = Emitter::new(cli.common.format, out);
    let result = dispatch(cli, &mut em);
    let flushed = em.flush();
    match result.and_then(|code| flushed.map(|_| code).map_err(Failure::from)) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{}", f.record.to_json());
            f.code
        }
    }
}

fn dispatch<W: Write>(cli: &Cli, em: &mut Emitter<W>) -> Result<i32, Failure> {
    let tol = cli.common.tol;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(validation(format!("--tol must be positive and finite, got {tol}")));
    }
    let ctx = Ctx { cfg: SolverConfig { tol, ..SolverConfig::default() }, self_check: cli.common.self_check };
    match &cli.command {
        Command::Eval { source, budget } => {
            let src = load_source(source)?;
            let budget = budget_pair(budget)?;
            let r = solve(&ctx, &src, budget)?;
            em.emit(&OutputRecord::new(&src, budget, &r))?;
            Ok(EXIT_OK)
        }
        Command::Bounds { source, budget } => {
            let src = load_source(source)?;
            let budget = budget_pair(budget)?;
            let r = solve(&ctx, &src, budget)?;
            em.emit(&BoundsRecord::new(budget, &r))?;
            Ok(EXIT_OK)
        }
        Command::Graph { matrix, budget } => {
            let (matrix, flat) = input::read_matrix(matrix)?;
            let budget = budget_pair(budget)?;
            let g = graph_rdp_with(&matrix, budget, &ctx.cfg)?;
            if ctx.self_check {
                check_result(&g.result, budget, &ctx.cfg)?;
            }
            em.emit(&GraphRecord(OutputRecord::graph(&flat.source, budget, &g)))?;
            Ok(EXIT_OK)
        }
        Command::Curve { source, axis, start, stop, count, fixed } => {
            let src = load_source(source)?;
            curve(&ctx, em, &src, *axis, *start, *stop, *count, *fixed)
        }
        Command::Region { source, d_min, d_max, p_min, p_max, d_count, p_count } => {
            let src = load_source(source)?;
            let d_max = d_max.unwrap_or(1.1 * src.zero_rate_distortion());
            let p_max = p_max.unwrap_or(1.1 * src.sum_q());
            let ds = linspace(*d_min, d_max, *d_count, "D")?;
            let ps = linspace(*p_min, p_max, *p_count, "P")?;
            region(&ctx, em, &src, &ds, &ps)
        }
        Command::Verify { source, d_count, p_count, grid_resolution, refine_rounds, scalar_only } => {
            let src = load_source(source)?;
            let grid = GridSpec::new(*grid_resolution, *refine_rounds)?;
            verify(&ctx, em, &src, *d_count, *p_count, grid, *scalar_only)
        }
    }
}

fn load_source(args: &SourceArgs) -> Result<BernoulliVectorSource, Failure> {
    match (&args.q, &args.matrix) {
        (Some(q), None) => Ok(input::parse_source(q)?),
        (None, Some(path)) => Ok(input::read_matrix(path)?.1.source),
        _ => Err(validation("exactly one of --q and --matrix is required")),
    }
}

fn budget_pair(b: &BudgetArgs) -> Result<BudgetPair, Failure> {
    Ok(BudgetPair::new(b.distortion, b.perception)?)
}

/// `count` evenly spaced points from `start` to `stop`; a single point is `start`.
pub fn linspace(start: f64, stop: f64, count: usize, name: &str) -> Result<Vec<f64>, Failure> {
    if !(start.is_finite() && stop.is_finite()) || start < 0.0 || start > stop {
        return Err(validation(format!("{name} range needs 0 <= start <= stop, got [{start}, {stop}]")));
    }
    if count == 0 {
        return Err(validation(format!("{name} count must be at least 1")));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (count - 1) as f64;
    Ok((0..count).map(|k| if k == count - 1 { stop } else { start + step * k as f64 }).collect())
}

fn solve(ctx: &Ctx, src: &BernoulliVectorSource, budget: BudgetPair) -> Result<RdpResult, Failure> {
    let r = rdp_with(src, budget, &ctx.cfg)?;
    if ctx.self_check {
        check_result(&r, budget, &ctx.cfg)?;
    }
    Ok(r)
}

fn check_result(r: &RdpResult, budget: BudgetPair, cfg: &SolverConfig) -> Result<(), Failure> {
    let a = &r.allocation;
    let sum_d: f64 = a.d.iter().sum();
    let sum_p: f64 = a.p.iter().sum();
    let (d, p) = (budget.distortion(), budget.perception());
    if (sum_d - d).abs() > cfg.tol * d.max(1.0) || (sum_p - p).abs() > cfg.tol * p.max(1.0) {
        return Err(self_check_failure(format!("allocation sums ({sum_d}, {sum_p}) miss the budgets ({d}, {p})")));
    }
    if !r.certificate.is_consistent(a, SELF_CHECK_TOL) {
        return Err(self_check_failure(format!("certificate is inconsistent at D = {d}, P = {p}")));
    }
    let per: f64 = (0..a.len())
        .map(|k| scalar_rdp_at(a.d[k], a.p[k], a.q[k]).map(|x| x.nats()).unwrap_or(f64::NAN))
        .sum();
    if per.is_nan() || (per - r.rate.nats()).abs() > SELF_CHECK_TOL {
        return Err(self_check_failure(format!("component rates sum to {per}, reported rate {}", r.rate.nats())));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn curve<W: Write>(
    ctx: &Ctx,
    em: &mut Emitter<W>,
    src: &BernoulliVectorSource,
    axis: Axis,
    start: f64,
    stop: f64,
    count: usize,
    fixed: f64,
) -> Result<i32, Failure> {
    let name = match axis {
        Axis::D => "D",
        Axis::P => "P",
    };
    let values = linspace(start, stop, count, name)?;
    let budgets: Vec<(f64, f64)> = values
        .iter()
        .map(|&v| match axis {
            Axis::D => (v, fixed),
            Axis::P => (fixed, v),
        })
        .collect();
    let results: Vec<Result<(BudgetPair, RdpResult), RdpError>> = budgets
        .par_iter()
        .map(|&(d, p)| {
            let budget = BudgetPair::new(d, p)?;
            rdp_with(src, budget, &ctx.cfg).map(|r| (budget, r))
        })
        .collect();

    let mut code = EXIT_OK;
    let mut previous: Option<f64> = None;
    for (&(d, p), res) in budgets.iter().zip(&results) {
        match res {
            Ok((budget, r)) => {
                if ctx.self_check {
                    check_result(r, *budget, &ctx.cfg)?;
                    let rate = r.rate.nats();
                    if let Some(prev) = previous {
                        if rate > prev + SELF_CHECK_TOL {
                            return Err(self_check_failure(format!(
                                "rate increased along the sweep: {prev} -> {rate} at D = {d}, P = {p}"
                            )));
                        }
                    }
                    previous = Some(rate);
                }
                em.emit(&OutputRecord::new(src, *budget, r))?;
            }
            Err(e) => {
                if code == EXIT_OK {
                    code = exit_code(e);
                }
                em.emit_error(&ErrorRecord::from_error(e).at(d, p))?;
            }
        }
    }
    Ok(code)
}

fn region<W: Write>(
    ctx: &Ctx,
    em: &mut Emitter<W>,
    src: &BernoulliVectorSource,
    ds: &[f64],
    ps: &[f64],
) -> Result<i32, Failure> {
    let cells: Vec<(f64, f64)> = ps.iter().flat_map(|&p| ds.iter().map(move |&d| (d, p))).collect();
    let labels: Vec<PlaneRegion> = cells
        .par_iter()
        .map(|&(d, p)| classify(src, BudgetPair::new(d, p).expect("grid values are nonnegative")))
        .collect();
    for (&(d, p), label) in cells.iter().zip(&labels) {
        em.emit(&RegionRecord::Cell { distortion: Num(d), perception: Num(p), region: label.to_string() })?;
    }

    let total = src.sum_q();
    for &d in ds {
        let t = if d < total { t_of_d(src, d)? } else { f64::NAN };
        let s = if d >= total { s_of_d(src, d)?.value } else { f64::NAN };
        if ctx.self_check {
            for (name, p, want) in [("T", t, PlaneRegion::A), ("S", s, PlaneRegion::B)] {
                if p.is_finite() {
                    let got = classify(src, BudgetPair::new(d, p)?);
                    if got != want {
                        return Err(self_check_failure(format!(
                            "boundary point ({d}, {name}(D) = {p}) classified {got}, expected {want}"
                        )));
                    }
                }
            }
        }
        em.emit(&RegionRecord::Boundary { distortion: Num(d), t: Num(t), s: Num(s) })?;
    }
    Ok(EXIT_OK)
}

fn max_deviation(devs: &[f64]) -> f64 {
    devs.iter().fold(0.0, |m, &x| if x.is_nan() || x > m { x } else { m })
}

fn verify_record(check: &str, devs: &[f64], tol: f64) -> VerifyRecord {
    let max = max_deviation(devs);
    VerifyRecord {
        check: check.to_string(),
        points: devs.len(),
        max_deviation: Num(max),
        tolerance: Num(tol),
        pass: max <= tol,
    }
}

fn verify<W: Write>(
    ctx: &Ctx,
    em: &mut Emitter<W>,
    src: &BernoulliVectorSource,
    d_count: usize,
    p_count: usize,
    grid: GridSpec,
    scalar_only: bool,
) -> Result<i32, Failure> {
    let n = src.len();
    if !scalar_only && n > MAX_ORACLE_COMPONENTS {
        return Err(RdpError::Size { n, max: MAX_ORACLE_COMPONENTS }.into());
    }
    let mut records = Vec::new();

    // Per-component scalar checks, each on its own (d, p) box.
    let mut qs: Vec<f64> = src.q().to_vec();
    qs.dedup();
    let mut scalar_points = Vec::new();
    for &q in qs.iter().filter(|&&q| q > 0.0) {
        let ds = linspace(0.0, 1.05 * 2.0 * q * (1.0 - q), d_count, "D")?;
        let ps = linspace(0.0, 1.05 * q, p_count, "P")?;
        scalar_points.extend(ps.iter().flat_map(|&p| ds.iter().map(move |&d| (q, d, p))));
    }
    let scalar_devs: Vec<f64> = scalar_points
        .par_iter()
        .map(|&(q, d, p)| -> Result<f64, RdpError> {
            let closed = scalar_rdp_at(d, p, q)?.nats();
            let oracle = scalar_channel_oracle(q, d, p, grid)?.rate.nats();
            Ok((closed - oracle).abs())
        })
        .collect::<Result<_, _>>()?;
    records.push(verify_record("scalar", &scalar_devs, SCALAR_ORACLE_TOL));

    if !scalar_only {
        let ds = linspace(0.0, 1.05 * src.zero_rate_distortion(), d_count, "D")?;
        let ps = linspace(0.0, 1.05 * src.sum_q(), p_count, "P")?;
        let budgets: Vec<BudgetPair> = ps
            .iter()
            .flat_map(|&p| ds.iter().map(move |&d| BudgetPair::new(d, p).expect("grid values are nonnegative")))
            .collect();
        let vector_devs: Vec<f64> = budgets
            .par_iter()
            .map(|&b| -> Result<f64, RdpError> {
                let closed = rdp_with(src, b, &ctx.cfg)?.rate.nats();
                let oracle = allocation_grid_oracle(src, b, grid)?.rate.nats();
                Ok((closed - oracle).abs())
            })
            .collect::<Result<_, _>>()?;
        records.push(verify_record("vector", &vector_devs, VECTOR_ORACLE_TOL));

        let s_ds = linspace(src.sum_q(), src.zero_rate_distortion().max(src.sum_q()), d_count, "D")?;
        let s_devs: Vec<f64> = s_ds
            .par_iter()
            .map(|&d| -> Result<f64, RdpError> {
                let closed = s_of_d(src, d)?.value;
                let oracle = s_of_d_oracle(src, d, grid)?;
                Ok((closed - oracle).abs())
            })
            .collect::<Result<_, _>>()?;
        records.push(verify_record("s_of_d", &s_devs, S_ORACLE_TOL));
    }

    let pass = records.iter().all(|r| r.pass);
    for r in &records {
        em.emit(r)?;
    }
    let worst = records.iter().map(|r| r.max_deviation.0).fold(0.0, |m: f64, x| if x > m { x } else { m });
    em.emit(&VerifyRecord {
        check: "all".into(),
        points: records.iter().map(|r| r.points).sum(),
        max_deviation: Num(worst),
        tolerance: Num(f64::NAN),
        pass,
    })?;
    Ok(if pass { EXIT_OK } else { EXIT_VERIFY })
}
