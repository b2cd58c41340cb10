//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p bernoulli-rdp-cli --test acceptance`.

use std::process::{Command, ExitCode};
use std::time::Instant;

use bernoulli_rdp::{
    allocation_grid_oracle, classify, length_bounds, rate_distortion, rdp, s_of_d, s_of_d_oracle,
    scalar_channel_oracle, scalar_rdp_at, t_of_d, Allocation, BernoulliVectorSource, BudgetPair, GridSpec,
    PlaneRegion, RdpResult, ScalarRegion,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

struct Suite {
    rng: ChaCha8Rng,
    /// Every rate computed by the closed-form solver, for the bounds criterion.
    rates: Vec<f64>,
}

fn budget(d: f64, p: f64) -> BudgetPair {
    BudgetPair::new(d, p).expect("nonnegative budgets")
}

impl Suite {
    fn solve(&mut self, src: &BernoulliVectorSource, d: f64, p: f64) -> RdpResult {
        let r = rdp(src, budget(d, p)).unwrap_or_else(|e| panic!("rdp failed at q = {:?}, D = {d}, P = {p}: {e}", src.raw_q()));
        self.rates.push(r.rate.nats());
        r
    }

    fn raw_source(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.rng.gen_range(0.0..=1.0)).collect()
    }

    /// A source with 1..=max_n components and a budget pair scaled so that
    /// all three plane regions occur.
    fn instance(&mut self, max_n: usize) -> (BernoulliVectorSource, f64, f64) {
        let n = self.rng.gen_range(1..=max_n);
        let src = BernoulliVectorSource::normalize(&self.raw_source(n)).unwrap();
        let d = self.rng.gen_range(0.0..1.15) * src.zero_rate_distortion();
        let p = self.rng.gen_range(0.0..1.15) * src.sum_q();
        (src, d, p)
    }

    fn scalar_oracle(&mut self) -> Outcome {
        let grid = GridSpec::new(400, 3).unwrap();
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let q = 0.5 * (1.0 - self.rng.gen_range(0.0..1.0));
            let d = self.rng.gen_range(0.0..=0.6);
            let p = self.rng.gen_range(0.0..=0.6);
            let closed = scalar_rdp_at(d, p, q).unwrap().nats();
            let oracle = scalar_channel_oracle(q, d, p, grid).unwrap().rate.nats();
            worst = worst.max((closed - oracle).abs());
        }
        Outcome { pass: worst <= 2e-3, detail: format!("200 triples, max |Δ| = {worst:.3e} nats (tol 2e-3)") }
    }

    fn vector_oracle(&mut self) -> Outcome {
        let grid = GridSpec::new(200, 3).unwrap();
        let mut worst = 0.0f64;
        let mut counts = [0usize; 3];
        for k in 0..50 {
            let n = 2 + k % 2;
            let target = [PlaneRegion::A, PlaneRegion::B, PlaneRegion::C][k % 3];
            let (src, d, p) = loop {
                let src = BernoulliVectorSource::normalize(&self.raw_source(n)).unwrap();
                if src.sum_q() == 0.0 {
                    continue;
                }
                let d = self.rng.gen_range(0.0..1.1) * src.zero_rate_distortion();
                let p = self.rng.gen_range(0.0..1.1) * src.sum_q();
                if classify(&src, budget(d, p)) == target {
                    break (src, d, p);
                }
            };
            counts[k % 3] += 1;
            let closed = self.solve(&src, d, p).rate.nats();
            let oracle = allocation_grid_oracle(&src, budget(d, p), grid).unwrap().rate.nats();
            worst = worst.max((closed - oracle).abs());
        }
        Outcome {
            pass: worst <= 5e-3,
            detail: format!(
                "50 sources (A/B/C = {}/{}/{}), max |Δ| = {worst:.3e} nats (tol 5e-3)",
                counts[0], counts[1], counts[2]
            ),
        }
    }

    fn equal_components(&mut self) -> Outcome {
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let n = self.rng.gen_range(1..=8);
            let raw = self.rng.gen_range(0.0..=1.0);
            let src = BernoulliVectorSource::normalize(&vec![raw; n]).unwrap();
            let q = src.q()[0];
            let d = self.rng.gen_range(0.0..1.15) * src.zero_rate_distortion();
            let p = self.rng.gen_range(0.0..1.15) * src.sum_q();
            let nf = n as f64;
            let expected = nf * scalar_rdp_at(d / nf, p / nf, q).unwrap().nats();
            worst = worst.max((self.solve(&src, d, p).rate.nats() - expected).abs());
        }
        Outcome { pass: worst <= 1e-8, detail: format!("100 cases, max |Δ| = {worst:.3e} nats (tol 1e-8)") }
    }

    fn region_structure(&mut self) -> Outcome {
        let mut counts = [0usize; 3];
        let mut failures = Vec::new();
        for _ in 0..300 {
            let (src, d, p) = self.instance(6);
            let r = self.solve(&src, d, p);
            let region = classify(&src, budget(d, p));
            let ok = region == r.region
                && match region {
                    PlaneRegion::A => (r.rate.nats() - rate_distortion(&src, d).unwrap().nats()).abs() <= 1e-10,
                    PlaneRegion::B => r.rate.nats() == 0.0,
                    PlaneRegion::C => r.certificate.component_regions.iter().all(|&l| l == ScalarRegion::U),
                };
            counts[region as usize] += 1;
            if !ok {
                failures.push(format!("q = {:?}, D = {d}, P = {p}", src.raw_q()));
            }
        }
        Outcome {
            pass: failures.is_empty(),
            detail: format!(
                "300 cases (A/B/C = {}/{}/{}), {} violations{}",
                counts[0],
                counts[1],
                counts[2],
                failures.len(),
                failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
            ),
        }
    }

    fn budgets_and_feasibility(&mut self) -> Outcome {
        let mut worst = 0.0f64;
        let mut outside = 0;
        for _ in 0..300 {
            let (src, d, p) = self.instance(6);
            let r = self.solve(&src, d, p);
            let a = &r.allocation;
            let sum_d: f64 = a.d.iter().sum();
            let sum_p: f64 = a.p.iter().sum();
            worst = worst.max((sum_d - d).abs() / d.max(1.0)).max((sum_p - p).abs() / p.max(1.0));
            outside += (0..a.len()).filter(|&k| !in_claimed_closure(a, k, r.certificate.component_regions[k])).count();
        }
        Outcome {
            pass: worst <= 1e-8 && outside == 0,
            detail: format!(
                "300 allocations, max relative budget error = {worst:.3e} (tol 1e-8), {outside} components outside their region"
            ),
        }
    }

    fn continuity(&mut self) -> Outcome {
        let eps = 1e-6;
        let (mut worst_t, mut worst_s) = (0.0f64, 0.0f64);
        let mut cases = 0;
        while cases < 50 {
            let n = self.rng.gen_range(1..=6);
            let src = BernoulliVectorSource::normalize(&self.raw_source(n)).unwrap();
            let total = src.sum_q();
            if total == 0.0 {
                continue;
            }
            cases += 1;
            let d = self.rng.gen_range(0.02..0.98) * total;
            let t = t_of_d(&src, d).unwrap();
            let gap = self.solve(&src, d, t + eps).rate.nats() - self.solve(&src, d, (t - eps).max(0.0)).rate.nats();
            worst_t = worst_t.max(gap.abs());

            let cap = src.zero_rate_distortion();
            let d = total + self.rng.gen_range(0.02..0.98) * (cap - total);
            let s = s_of_d(&src, d).unwrap().value;
            let gap = self.solve(&src, d, s + eps).rate.nats() - self.solve(&src, d, (s - eps).max(0.0)).rate.nats();
            worst_s = worst_s.max(gap.abs());
        }
        Outcome {
            pass: worst_t <= 1e-4 && worst_s <= 1e-4,
            detail: format!("50 sources, max gap across T(D) = {worst_t:.3e}, across S(D) = {worst_s:.3e} nats (tol 1e-4)"),
        }
    }

    fn s_oracle(&mut self) -> Outcome {
        let grid = GridSpec::new(200, 4).unwrap();
        let mut worst = 0.0f64;
        for k in 0..30 {
            let n = 2 + k % 2;
            let src = BernoulliVectorSource::normalize(&self.raw_source(n)).unwrap();
            let (total, cap) = (src.sum_q(), src.zero_rate_distortion());
            let d = total + self.rng.gen_range(0.0..=1.0) * (cap - total);
            let closed = s_of_d(&src, d).unwrap().value;
            let oracle = s_of_d_oracle(&src, d, grid).unwrap();
            worst = worst.max((closed - oracle).abs());
        }
        Outcome { pass: worst <= 2e-3, detail: format!("30 D values, max |Δ| = {worst:.3e} (tol 2e-3)") }
    }

    fn bounds(&mut self) -> Outcome {
        let mut worst = 0.0f64;
        let mut inverted = 0;
        for &nats in &self.rates {
            let b = length_bounds(bernoulli_rdp::Rate::from_nats(nats).unwrap());
            if b.lower_bits > b.upper_bits {
                inverted += 1;
            }
            let overhead = (b.lower_bits + 1.0).log2() + 5.0;
            let ulps = (b.upper_bits - b.lower_bits - overhead).abs() / (f64::EPSILON * b.upper_bits);
            worst = worst.max(ulps);
        }
        Outcome {
            pass: inverted == 0 && worst <= 4.0,
            detail: format!(
                "{} evaluated points, {inverted} with lower > upper, max |upper − lower − overhead| = {worst:.1} ulp (tol 4 ulp)",
                self.rates.len()
            ),
        }
    }

    fn canonicalization(&mut self) -> Outcome {
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let n = self.rng.gen_range(1..=6);
            let raw = self.raw_source(n);
            let src = BernoulliVectorSource::normalize(&raw).unwrap();
            let d = self.rng.gen_range(0.0..1.15) * src.zero_rate_distortion();
            let p = self.rng.gen_range(0.0..1.15) * src.sum_q();
            let base = self.solve(&src, d, p).rate.nats();
            let mut other: Vec<f64> = raw.iter().map(|&x| if self.rng.gen_bool(0.5) { 1.0 - x } else { x }).collect();
            other.shuffle(&mut self.rng);
            let moved = self.solve(&BernoulliVectorSource::normalize(&other).unwrap(), d, p).rate.nats();
            worst = worst.max((moved - base).abs());
        }
        Outcome { pass: worst <= 1e-10, detail: format!("100 cases, max |Δ| = {worst:.3e} nats (tol 1e-10)") }
    }
}

/// Closure of the scalar region a component claims, with slack for round-off.
fn in_claimed_closure(a: &Allocation, k: usize, label: ScalarRegion) -> bool {
    let (d, p, q) = (a.d[k], a.p[k], a.q[k]);
    let eps = 1e-9;
    let zero_line = 2.0 * q * (1.0 - q) - (1.0 - 2.0 * q) * p;
    match label {
        ScalarRegion::S => d >= -eps && d <= q + eps && p >= d * (1.0 - 2.0 * q) / (1.0 - 2.0 * d) - eps,
        ScalarRegion::T => d >= q - eps && d >= zero_line - eps && p >= -eps,
        ScalarRegion::U => {
            p >= -eps && p <= q + eps && d >= p / (1.0 - 2.0 * (q - p)) - eps && d <= zero_line + eps
        }
        ScalarRegion::V => (d - q).abs() <= eps && p >= q - eps,
        ScalarRegion::BoundaryExterior => d.abs() <= eps,
    }
}

fn curve_determinism() -> Outcome {
    let args = [
        "curve", "--q", "0.31,0.12,0.77", "--axis", "d", "--start", "0", "--stop", "1.3", "--count", "60", "--fixed", "0.04",
    ];
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let out = Command::new(env!("CARGO_BIN_EXE_bernoulli-rdp")).args(args).output().expect("binary runs");
            assert!(out.status.success(), "curve exited with {:?}", out.status);
            out.stdout
        })
        .collect();
    let lines = runs[0].iter().filter(|&&b| b == b'\n').count();
    Outcome {
        pass: runs[0] == runs[1] && lines == 60,
        detail: format!("two curve runs of {lines} records, byte-identical: {}", runs[0] == runs[1]),
    }
}

fn main() -> ExitCode {
    let mut suite = Suite { rng: ChaCha8Rng::seed_from_u64(0x5eed_0b5e), rates: Vec::new() };
    type Criterion = (&'static str, fn(&mut Suite) -> Outcome);
    let criteria: [Criterion; 10] = [
        ("scalar oracle equivalence", Suite::scalar_oracle),
        ("vector oracle equivalence", Suite::vector_oracle),
        ("equal-component identity", Suite::equal_components),
        ("region correctness", Suite::region_structure),
        ("budget equality and feasibility", Suite::budgets_and_feasibility),
        ("continuity across T(D) and S(D)", Suite::continuity),
        ("S(D) vs oracle", Suite::s_oracle),
        ("length bounds", Suite::bounds),
        ("canonicalization invariance", Suite::canonicalization),
        ("end-to-end determinism", |_| curve_determinism()),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check(&mut suite);
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("[{verdict}] {:>2}. {name}: {} ({:.1} s)", k + 1, outcome.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!outcome.pass);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
