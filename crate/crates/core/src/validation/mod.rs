//! Validation of learned driver policies against recorded behaviour.

mod empirical;
mod ks;

pub use empirical::{build_empirical, EmpiricalPolicy, CENTER_TOLERANCE};
pub use ks::{ks_discrete, KsOutcome, ALPHA};

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_file;
use crate::rl::{apply_floor, StochasticPolicy};

/// Probability floor applied to both sides before a KS comparison.
pub const DEFAULT_FLOOR: f64 = 0.01;

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> Result<f64> {
    if let Some(x) = p.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::Argument(format!("negative probability {x}")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!("probabilities sum to {sum}")));
    }
    Ok(-p.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum::<f64>())
}

/// Raise entries below `floor` to exactly `floor` and rescale the others.
pub fn floor_normalize(p: &[f64], floor: f64) -> Result<Vec<f64>> {
    let mut out = p.to_vec();
    apply_floor(&mut out, floor)?;
    Ok(out)
}

fn cdf(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = p
        .iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateTest {
    pub state: usize,
    pub n: u64,
    pub outcome: KsOutcome,
}

/// Outcome of validating one driver against one model.
#[derive(Debug, Clone, PartialEq)]
pub struct KsReport {
    pub driver_id: u64,
    pub model: String,
    pub n_limit: u64,
    pub n_comp: usize,
    pub n_success: usize,
    pub states: Vec<StateTest>,
}

impl KsReport {
    /// Share of compared states that were not rejected, in percent.
    pub fn percentage(&self) -> Option<f64> {
        (self.n_comp > 0).then(|| 100.0 * self.n_success as f64 / self.n_comp as f64)
    }

    /// No state passed both visit thresholds.
    pub fn is_flagged(&self) -> bool {
        self.n_comp == 0
    }
}

/// Test every state the driver visited at least `n_limit` times and the
/// model visited at least `n_limit` times during training.
pub fn validate_driver(
    driver_id: u64,
    driver: &EmpiricalPolicy,
    model_name: &str,
    model: &StochasticPolicy,
    model_visits: &[u64],
    n_limit: u64,
    floor: f64,
) -> Result<KsReport> {
    if n_limit == 0 {
        return Err(Error::Argument("n_limit must be at least 1".into()));
    }
    if model_visits.len() != model.num_states() {
        return Err(Error::Argument(format!(
            "{} visit counts for a {}-state model",
            model_visits.len(),
            model.num_states()
        )));
    }
    let mut report = KsReport {
        driver_id,
        model: model_name.to_string(),
        n_limit,
        n_comp: 0,
        n_success: 0,
        states: Vec::new(),
    };
    for s in driver.states() {
        let n = driver.visits(s);
        if s >= model.num_states() {
            return Err(Error::bounds("state", s, model.num_states()));
        }
        if n < n_limit || model_visits[s] < n_limit {
            continue;
        }
        let emp = driver.distribution(s).expect("visited state");
        if emp.len() != model.num_actions() {
            return Err(Error::Argument("model and data have different action sets".into()));
        }
        let emp = floor_normalize(&emp, floor)?;
        let mdl = floor_normalize(model.row(s), floor)?;
        let outcome = ks_discrete(&cdf(&mdl), &cdf(&emp), n)?;
        report.n_comp += 1;
        if !outcome.rejected {
            report.n_success += 1;
        }
        report.states.push(StateTest { state: s, n, outcome });
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriverSummary {
    pub driver_id: u64,
    pub per_level: Vec<Option<f64>>,
    /// Level with the highest percentage; the lowest level wins ties.
    pub best_level: Option<usize>,
    pub combined: Option<f64>,
    pub uniform: Option<f64>,
    pub difference: Option<f64>,
}

pub const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSummary {
    pub n_limit: u64,
    pub levels: Vec<usize>,
    pub drivers: Vec<DriverSummary>,
    /// Drivers per 10-point bin of combined percentage; 100% falls in the
    /// last bin.
    pub histogram: [u64; HISTOGRAM_BINS],
    /// Drivers with no compared state under any level.
    pub undefined: u64,
}

impl ValidationSummary {
    fn defined_pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.drivers.iter().filter_map(|d| Some((d.combined?, d.uniform?)))
    }

    /// Fraction of drivers with both percentages defined whose combined
    /// level-k percentage strictly exceeds the uniform baseline.
    pub fn fraction_above_uniform(&self) -> Option<f64> {
        let (mut n, mut above) = (0usize, 0usize);
        for (c, u) in self.defined_pairs() {
            n += 1;
            if c > u {
                above += 1;
            }
        }
        (n > 0).then(|| above as f64 / n as f64)
    }

    /// Mean of combined minus uniform percentage over defined drivers.
    pub fn mean_gap(&self) -> Option<f64> {
        let gaps: Vec<f64> = self.defined_pairs().map(|(c, u)| c - u).collect();
        (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64)
    }
}

fn histogram_bin(pct: f64) -> usize {
    ((pct / 100.0 * HISTOGRAM_BINS as f64).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

/// Combine per-level reports with the uniform baseline. Every report list
/// must cover the same drivers in the same order.
pub fn best_level_summary(levels: &[(usize, Vec<KsReport>)], uniform: &[KsReport]) -> Result<ValidationSummary> {
    let ids: Vec<u64> = uniform.iter().map(|r| r.driver_id).collect();
    let n_limit = uniform.first().map_or(0, |r| r.n_limit);
    if levels.iter().flat_map(|(_, r)| r).chain(uniform).any(|r| r.n_limit != n_limit) {
        return Err(Error::Argument("reports use different n_limit values".into()));
    }
    for (level, reports) in levels {
        if reports.len() != ids.len() || reports.iter().zip(&ids).any(|(r, id)| r.driver_id != *id) {
            return Err(Error::Argument(format!(
                "level-{level} reports cover a different driver set"
            )));
        }
    }
    let mut summary = ValidationSummary {
        n_limit,
        levels: levels.iter().map(|(l, _)| *l).collect(),
        drivers: Vec::with_capacity(ids.len()),
        histogram: [0; HISTOGRAM_BINS],
        undefined: 0,
    };
    for (k, u) in uniform.iter().enumerate() {
        let per_level: Vec<Option<f64>> = levels.iter().map(|(_, r)| r[k].percentage()).collect();
        let mut best: Option<(usize, f64)> = None;
        for ((level, _), pct) in levels.iter().zip(&per_level) {
            if let Some(p) = pct {
                if best.is_none_or(|(_, b)| *p > b) {
                    best = Some((*level, *p));
                }
            }
        }
        let combined = best.map(|(_, p)| p);
        let uniform = u.percentage();
        match combined {
            Some(c) => summary.histogram[histogram_bin(c)] += 1,
            None => summary.undefined += 1,
        }
        summary.drivers.push(DriverSummary {
            driver_id: u.driver_id,
            per_level,
            best_level: best.map(|(l, _)| l),
            combined,
            uniform,
            difference: combined.zip(uniform).map(|(c, u)| c - u),
        });
    }
    Ok(summary)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_default()
}

pub const KS_REPORT_HEADER: &str = "driver_id,model,n_limit,n_comp,n_success,percentage";

/// One row per report; an undefined percentage is left empty.
pub fn format_ks_reports(reports: &[KsReport]) -> String {
    let mut out = format!("{KS_REPORT_HEADER}\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.driver_id,
            r.model,
            r.n_limit,
            r.n_comp,
            r.n_success,
            opt(r.percentage())
        );
    }
    out
}

pub fn write_ks_reports(path: &Path, reports: &[KsReport]) -> Result<()> {
    write_file(path, format_ks_reports(reports).as_bytes())
}

/// Per-state detail of every report.
pub fn format_ks_details(reports: &[KsReport]) -> String {
    let mut out = String::from("driver_id,model,n_limit,state,n,d,d_plus,d_minus,p_value,rejected\n");
    for r in reports {
        for t in &r.states {
            let o = &t.outcome;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
                r.driver_id, r.model, r.n_limit, t.state, t.n, o.d, o.d_plus, o.d_minus, o.p_value, o.rejected
            );
        }
    }
    out
}

/// Per-driver summary rows of every summary.
pub fn format_summaries(summaries: &[ValidationSummary]) -> String {
    let mut out = String::from("n_limit,driver_id,best_level,combined,uniform,difference\n");
    for s in summaries {
        for d in &s.drivers {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                s.n_limit,
                d.driver_id,
                d.best_level.map(|l| l.to_string()).unwrap_or_default(),
                opt(d.combined),
                opt(d.uniform),
                opt(d.difference)
            );
        }
    }
    out
}

/// Driver counts per combined-percentage bin; drivers without any compared
/// state are reported in an `undefined` row.
pub fn format_histograms(summaries: &[ValidationSummary]) -> String {
    let width = 100 / HISTOGRAM_BINS;
    let mut out = String::from("n_limit,bin_low,bin_high,drivers\n");
    for s in summaries {
        for (k, c) in s.histogram.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", s.n_limit, k * width, (k + 1) * width, c);
        }
        let _ = writeln!(out, "{},undefined,undefined,{}", s.n_limit, s.undefined);
    }
    out
}
