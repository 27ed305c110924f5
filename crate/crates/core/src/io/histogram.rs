//! Fixed-width histograms anchored at the smallest observation.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

use super::TrajectorySet;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// Left edge of bin 0.
    pub origin: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn from_values(values: &[f64], bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(Error::Argument(format!("bin width {bin_width} must be positive")));
        }
        let Some(origin) = values.iter().cloned().reduce(f64::min) else {
            return Ok(Self {
                origin: 0.0,
                bin_width,
                counts: Vec::new(),
            });
        };
        let mut counts = Vec::new();
        for v in values {
            let k = ((v - origin) / bin_width).floor() as usize;
            if k >= counts.len() {
                counts.resize(k + 1, 0);
            }
            counts[k] += 1;
        }
        Ok(Self {
            origin,
            bin_width,
            counts,
        })
    }

    /// `bin_low,bin_high,count`, one row per bin.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            let (lo, hi) = self.bin_edges(k);
            out.push_str(&format!("{lo},{hi},{c}\n"));
        }
        out
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `[left, right)` edges of bin `k`.
    pub fn bin_edges(&self, k: usize) -> (f64, f64) {
        let left = self.origin + k as f64 * self.bin_width;
        (left, left + self.bin_width)
    }

    /// Bin containing `value`, if inside the histogram's range.
    pub fn bin_of(&self, value: f64) -> Option<usize> {
        if value < self.origin {
            return None;
        }
        let k = ((value - self.origin) / self.bin_width).floor() as usize;
        (k < self.counts.len()).then_some(k)
    }

    /// Fraction of the mass in bins whose centers lie in `[lo, hi]`.
    pub fn fraction_between(&self, lo: f64, hi: f64) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let inside: u64 = self
            .counts
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let (l, r) = self.bin_edges(*k);
                let c = 0.5 * (l + r);
                (lo..=hi).contains(&c)
            })
            .map(|(_, n)| *n)
            .sum();
        inside as f64 / total as f64
    }
}

/// Centre-to-centre distance from each vehicle to the nearest vehicle
/// ahead in the same lane at the same frame. Positions wrap when
/// `ring_length` is given.
pub fn front_gaps(set: &TrajectorySet, ring_length: Option<f64>) -> Vec<f64> {
    let mut by_frame: BTreeMap<(u64, usize), Vec<f64>> = BTreeMap::new();
    for r in set.records() {
        by_frame.entry((r.frame, r.lane)).or_default().push(r.x);
    }
    let mut gaps = Vec::new();
    for xs in by_frame.values_mut() {
        xs.sort_by(f64::total_cmp);
        let n = xs.len();
        if n < 2 {
            continue;
        }
        for i in 0..n {
            match ring_length {
                Some(l) => {
                    let next = xs[(i + 1) % n];
                    gaps.push((next - xs[i]).rem_euclid(l));
                }
                None if i + 1 < n => gaps.push(xs[i + 1] - xs[i]),
                None => {}
            }
        }
    }
    gaps
}

pub fn headway_histogram(
    set: &TrajectorySet,
    bin_width: f64,
    ring_length: Option<f64>,
) -> Result<Histogram> {
    Histogram::from_values(&front_gaps(set, ring_length), bin_width)
}

pub fn acceleration_histogram(set: &TrajectorySet, bin_width: f64) -> Result<Histogram> {
    let values: Vec<f64> = set.records().map(|r| r.a).collect();
    Histogram::from_values(&values, bin_width)
}
