//! Record types and the JSON Lines / CSV emitters.
//!
//! Every real number goes through [`Num`], which rounds to 12 significant
//! digits and writes non-finite values as `null` (JSON) or an empty field (CSV).

use std::io::{self, Write};

use bernoulli_rdp::graph::GraphRdpResult;
use bernoulli_rdp::{length_bounds, BernoulliVectorSource, BudgetPair, RdpError, RdpResult};
use serde::{Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Num {
    pub fn rounded(self) -> Option<f64> {
        if !self.0.is_finite() {
            return None;
        }
        let r: f64 = format!("{:.11e}", self.0).parse().expect("formatted float parses");
        Some(if r == 0.0 { 0.0 } else { r })
    }

    pub fn text(self) -> String {
        match self.rounded() {
            Some(x) => serde_json::to_string(&x).expect("finite float serializes"),
            None => String::new(),
        }
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.rounded() {
            Some(x) => s.serialize_f64(x),
            None => s.serialize_none(),
        }
    }
}

/// A record that also knows its CSV layout. One record may span several rows.
pub trait Tabular {
    fn header() -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<String>>;
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentRecord {
    pub index: usize,
    pub original_index: usize,
    pub q: Num,
    pub complemented: bool,
    pub d: Num,
    pub p: Num,
    pub rate_nats: Num,
    pub region: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub q: Num,
    pub d: Num,
    pub p: Num,
    pub rate_nats: Num,
}

#[derive(Debug, Clone, Serialize)]
pub struct Multipliers {
    pub nu: Num,
    pub mu: Num,
}

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    pub distortion: Num,
    pub perception: Num,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverMeta {
    pub iterations: usize,
    pub clamped_components: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    #[serde(rename = "D")]
    pub distortion: Num,
    #[serde(rename = "P")]
    pub perception: Num,
    pub rate_nats: Num,
    pub rate_bits: Num,
    pub region: String,
    pub allocation: Vec<ComponentRecord>,
    pub multipliers: Multipliers,
    pub residuals: Residuals,
    pub solver: SolverMeta,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<EdgeRecord>>,
}

impl OutputRecord {
    pub fn new(src: &BernoulliVectorSource, budget: BudgetPair, r: &RdpResult) -> Self {
        let a = &r.allocation;
        let regions = &r.certificate.component_regions;
        let allocation = (0..a.len())
            .map(|k| {
                let orig = src.original_index(k);
                ComponentRecord {
                    index: k,
                    original_index: orig,
                    q: Num(a.q[k]),
                    complemented: src.flip_mask()[orig],
                    d: Num(a.d[k]),
                    p: Num(a.p[k]),
                    rate_nats: Num(a.per_component_rate[k].nats()),
                    region: regions[k].label(),
                }
            })
            .collect();
        OutputRecord {
            distortion: Num(budget.distortion()),
            perception: Num(budget.perception()),
            rate_nats: Num(r.rate.nats()),
            rate_bits: Num(r.rate.bits()),
            region: r.region.to_string(),
            allocation,
            multipliers: Multipliers { nu: Num(r.certificate.nu), mu: Num(r.certificate.mu) },
            residuals: Residuals { distortion: Num(r.residuals.0), perception: Num(r.residuals.1) },
            solver: SolverMeta { iterations: r.multiplier_iterations, clamped_components: r.clamped_components },
            edges: None,
        }
    }

    pub fn graph(src: &BernoulliVectorSource, budget: BudgetPair, g: &GraphRdpResult) -> Self {
        let mut rec = OutputRecord::new(src, budget, &g.result);
        rec.edges = Some(
            g.edges
                .iter()
                .map(|e| EdgeRecord { i: e.i, j: e.j, q: Num(e.q), d: Num(e.d), p: Num(e.p), rate_nats: Num(e.rate.nats()) })
                .collect(),
        );
        rec
    }

    fn prefix(&self) -> Vec<String> {
        vec![
            self.distortion.text(),
            self.perception.text(),
            self.rate_nats.text(),
            self.rate_bits.text(),
            self.region.clone(),
            self.multipliers.nu.text(),
            self.multipliers.mu.text(),
            self.residuals.distortion.text(),
            self.residuals.perception.text(),
            self.solver.iterations.to_string(),
            self.solver.clamped_components.to_string(),
        ]
    }
}

const RECORD_HEADER: [&str; 11] = [
    "D",
    "P",
    "rate_nats",
    "rate_bits",
    "region",
    "nu",
    "mu",
    "residual_d",
    "residual_p",
    "iterations",
    "clamped_components",
];

impl Tabular for OutputRecord {
    fn header() -> Vec<&'static str> {
        let mut h = RECORD_HEADER.to_vec();
        h.extend([
            "index",
            "original_index",
            "q",
            "complemented",
            "d",
            "p",
            "component_rate_nats",
            "component_region",
        ]);
        h
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.allocation
            .iter()
            .map(|c| {
                let mut row = self.prefix();
                row.extend([
                    c.index.to_string(),
                    c.original_index.to_string(),
                    c.q.text(),
                    c.complemented.to_string(),
                    c.d.text(),
                    c.p.text(),
                    c.rate_nats.text(),
                    c.region.to_string(),
                ]);
                row
            })
            .collect()
    }
}

/// CSV view of a graph record: one row per vertex pair.
#[derive(Debug, Clone, Serialize)]
#[serde(transparent)]
pub struct GraphRecord(pub OutputRecord);

impl Tabular for GraphRecord {
    fn header() -> Vec<&'static str> {
        let mut h = RECORD_HEADER.to_vec();
        h.extend(["i", "j", "q", "d", "p", "edge_rate_nats"]);
        h
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.0
            .edges
            .iter()
            .flatten()
            .map(|e| {
                let mut row = self.0.prefix();
                row.extend([e.i.to_string(), e.j.to_string(), e.q.text(), e.d.text(), e.p.text(), e.rate_nats.text()]);
                row
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsRecord {
    #[serde(rename = "D")]
    pub distortion: Num,
    #[serde(rename = "P")]
    pub perception: Num,
    pub rate_nats: Num,
    pub rate_bits: Num,
    pub region: String,
    pub lower_bits: Num,
    pub upper_bits: Num,
}

impl BoundsRecord {
    pub fn new(budget: BudgetPair, r: &RdpResult) -> Self {
        let b = length_bounds(r.rate);
        BoundsRecord {
            distortion: Num(budget.distortion()),
            perception: Num(budget.perception()),
            rate_nats: Num(r.rate.nats()),
            rate_bits: Num(r.rate.bits()),
            region: r.region.to_string(),
            lower_bits: Num(b.lower_bits),
            upper_bits: Num(b.upper_bits),
        }
    }
}

impl Tabular for BoundsRecord {
    fn header() -> Vec<&'static str> {
        vec!["D", "P", "rate_nats", "rate_bits", "region", "lower_bits", "upper_bits"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        vec![vec![
            self.distortion.text(),
            self.perception.text(),
            self.rate_nats.text(),
            self.rate_bits.text(),
            self.region.clone(),
            self.lower_bits.text(),
            self.upper_bits.text(),
        ]]
    }
}

/// A region-map cell `(D, P, region)` or a boundary sample `(D, T(D), S(D))`.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RegionRecord {
    Cell {
        #[serde(rename = "D")]
        distortion: Num,
        #[serde(rename = "P")]
        perception: Num,
        region: String,
    },
    Boundary {
        #[serde(rename = "D")]
        distortion: Num,
        #[serde(rename = "T")]
        t: Num,
        #[serde(rename = "S")]
        s: Num,
    },
}

impl Tabular for RegionRecord {
    fn header() -> Vec<&'static str> {
        vec!["kind", "D", "P", "region", "T", "S"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let row = match self {
            RegionRecord::Cell { distortion, perception, region } => {
                vec!["cell".into(), distortion.text(), perception.text(), region.clone(), String::new(), String::new()]
            }
            RegionRecord::Boundary { distortion, t, s } => {
                vec!["boundary".into(), distortion.text(), String::new(), String::new(), t.text(), s.text()]
            }
        };
        vec![row]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyRecord {
    pub check: String,
    pub points: usize,
    pub max_deviation: Num,
    pub tolerance: Num,
    pub pass: bool,
}

impl Tabular for VerifyRecord {
    fn header() -> Vec<&'static str> {
        vec!["check", "points", "max_deviation", "tolerance", "pass"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        vec![vec![
            self.check.clone(),
            self.points.to_string(),
            self.max_deviation.text(),
            self.tolerance.text(),
            self.pass.to_string(),
        ]]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    #[serde(rename = "D", skip_serializing_if = "Option::is_none")]
    pub distortion: Option<Num>,
    #[serde(rename = "P", skip_serializing_if = "Option::is_none")]
    pub perception: Option<Num>,
    pub error: ErrorBody,
}

impl ErrorRecord {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        ErrorRecord { distortion: None, perception: None, error: ErrorBody { kind, message: message.into() } }
    }

    pub fn from_error(e: &RdpError) -> Self {
        ErrorRecord::new(error_kind(e), e.to_string())
    }

    pub fn at(mut self, distortion: f64, perception: f64) -> Self {
        self.distortion = Some(Num(distortion));
        self.perception = Some(Num(perception));
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error record serializes")
    }
}

pub fn error_kind(e: &RdpError) -> &'static str {
    match e {
        RdpError::Domain(_) | RdpError::Validation(_) => "validation",
        RdpError::Parse(_) => "parse",
        RdpError::Convergence { .. } | RdpError::Infeasible(_) => "convergence",
        RdpError::Size { .. } => "size",
    }
}

/// Writes records in the chosen format. Error records go inline for JSON and
/// to stderr for CSV, so the CSV stream keeps a single schema.
pub struct Emitter<W: Write> {
    format: Format,
    out: W,
    header_written: bool,
}

impl<W: Write> Emitter<W> {
    pub fn new(format: Format, out: W) -> Self {
        Emitter { format, out, header_written: false }
    }

    pub fn emit<R: Serialize + Tabular>(&mut self, record: &R) -> io::Result<()> {
        match self.format {
            Format::Json => {
                serde_json::to_writer(&mut self.out, record)?;
                self.out.write_all(b"\n")
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                if !self.header_written {
                    w.write_record(R::header())?;
                    self.header_written = true;
                }
                for row in record.rows() {
                    w.write_record(&row)?;
                }
                let buf = w.into_inner().map_err(|e| e.into_error())?;
                self.out.write_all(&buf)
            }
        }
    }

    pub fn emit_error(&mut self, record: &ErrorRecord) -> io::Result<()> {
        match self.format {
            Format::Json => writeln!(self.out, "{}", record.to_json()),
            Format::Csv => {
                eprintln!("{}", record.to_json());
                Ok(())
            }
        }
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bernoulli_rdp::rdp;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(Num(std::f64::consts::PI).text(), "3.14159265359");
        assert_eq!(Num(-0.0).text(), "0.0");
        assert_eq!(Num(1.0 / 3.0 * 1e-20).text(), "3.33333333333e-21");
        assert_eq!(Num(f64::NAN).text(), "");
        assert_eq!(serde_json::to_string(&Num(f64::INFINITY)).unwrap(), "null");
    }

    #[test]
    fn json_field_order_is_stable() {
        let src = BernoulliVectorSource::normalize(&[0.25, 0.25]).unwrap();
        let budget = BudgetPair::new(0.2, 0.1).unwrap();
        let rec = OutputRecord::new(&src, budget, &rdp(&src, budget).unwrap());
        let line = serde_json::to_string(&rec).unwrap();
        assert!(line.starts_with(r#"{"D":0.2,"P":0.1,"rate_nats":"#), "{line}");
        assert!(!line.contains("edges"));
        let keys = ["allocation", "multipliers", "residuals", "solver"];
        let pos: Vec<usize> = keys.iter().map(|k| line.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn csv_has_one_header_and_a_row_per_component() {
        let src = BernoulliVectorSource::normalize(&[0.3, 0.1, 0.7]).unwrap();
        let budget = BudgetPair::new(0.2, 0.05).unwrap();
        let rec = OutputRecord::new(&src, budget, &rdp(&src, budget).unwrap());
        let mut em = Emitter::new(Format::Csv, Vec::new());
        em.emit(&rec).unwrap();
        em.emit(&rec).unwrap();
        let text = String::from_utf8(em.out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines[0].starts_with("D,P,rate_nats"));
        assert_eq!(lines.iter().filter(|l| l.starts_with("D,")).count(), 1);
        let cols = OutputRecord::header().len();
        assert!(lines.iter().all(|l| l.split(',').count() == cols));
    }

    #[test]
    fn error_records() {
        let e = RdpError::Convergence { stage: "outer", iterations: 7 };
        let rec = ErrorRecord::from_error(&e).at(0.5, 0.0);
        assert_eq!(
            rec.to_json(),
            r#"{"D":0.5,"P":0.0,"error":{"kind":"convergence","message":"convergence failure in outer after 7 iterations"}}"#
        );
    }
}
