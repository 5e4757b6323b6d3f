//! Monte-Carlo batches of Itô trajectories and fidelity histograms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fock::{fidelity, DensityMatrix, OperatorSet};
use crate::schedule::ControlSchedule;
use crate::sme::{simulate_ket_trajectory, simulate_trajectory, NoiseStream};
use crate::{CVec, Error, Result};

pub const DEFAULT_THRESHOLDS: [f64; 2] = [0.90, 0.95];
pub const DEFAULT_BINS: usize = 50;

#[derive(Clone, Debug)]
pub enum BatchStart {
    Ket(CVec),
    Density(DensityMatrix),
}

#[derive(Clone, Debug)]
pub struct BatchSpec {
    pub control: ControlSchedule,
    pub start: BatchStart,
    pub target: DensityMatrix,
    pub n: usize,
    pub base_seed: u64,
    pub tau: f64,
    pub t_f: f64,
    pub dt: f64,
    pub thresholds: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFraction {
    pub threshold: f64,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Fraction of trajectories with fidelity strictly above each threshold.
    pub fractions_above: Vec<ThresholdFraction>,
}

impl FidelityHistogram {
    /// Uniform bins on [0, 1]; values are clamped into range, 1.0 lands in the last bin.
    pub fn from_fidelities(fidelities: &[f64], bins: usize, thresholds: &[f64]) -> Self {
        let bins = bins.max(1);
        let bin_edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
        let mut counts = vec![0; bins];
        for &f in fidelities {
            let i = ((f.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
            counts[i] += 1;
        }
        let mut ts = thresholds.to_vec();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let n = fidelities.len().max(1) as f64;
        let fractions_above = ts
            .into_iter()
            .map(|t| ThresholdFraction {
                threshold: t,
                fraction: fidelities.iter().filter(|&&f| f > t).count() as f64 / n,
            })
            .collect();
        FidelityHistogram {
            bin_edges,
            counts,
            fractions_above,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn fraction_above(&self, threshold: f64) -> Option<f64> {
        self.fractions_above
            .iter()
            .find(|t| t.threshold == threshold)
            .map(|t| t.fraction)
    }

    /// CSV `bin_lo,bin_hi,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!(
                "{:.4},{:.4},{}\n",
                self.bin_edges[i],
                self.bin_edges[i + 1],
                c
            ));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub histogram: FidelityHistogram,
    /// Final fidelity of trajectory i at index i; failed trajectories are absent.
    pub fidelities: Vec<f64>,
    pub failures: usize,
}

impl BatchResult {
    /// CSV `trajectory,fidelity`.
    pub fn trajectories_csv(&self) -> String {
        let mut out = String::from("trajectory,fidelity\n");
        for (i, f) in self.fidelities.iter().enumerate() {
            out.push_str(&format!("{i},{f:.12}\n"));
        }
        out
    }
}

fn one_trajectory(spec: &BatchSpec, i: usize, ops: &OperatorSet) -> Result<f64> {
    let noise = NoiseStream::new(spec.base_seed, i as u64);
    match &spec.start {
        BatchStart::Ket(psi) => {
            let (v, _) = simulate_ket_trajectory(
                psi,
                &spec.control,
                spec.tau,
                spec.t_f,
                spec.dt,
                noise,
                ops,
                false,
            )?;
            fidelity(&DensityMatrix::from_ket(&v), &spec.target)
        }
        BatchStart::Density(rho) => {
            let rec =
                simulate_trajectory(rho, &spec.control, spec.tau, spec.t_f, spec.dt, noise, ops)?;
            rec.fidelity(&spec.target)
        }
    }
}

/// Runs `spec.n` trajectories in parallel; trajectory i uses noise stream i.
pub fn run_batch(spec: &BatchSpec, ops: &OperatorSet) -> Result<BatchResult> {
    if spec.n == 0 {
        return Err(Error::InvalidParameter(
            "batch size must be at least 1".into(),
        ));
    }
    let dim = match &spec.start {
        BatchStart::Ket(v) => v.len(),
        BatchStart::Density(r) => r.dim(),
    };
    if dim != ops.n() || spec.target.dim() != ops.n() {
        return Err(Error::DimensionMismatch {
            left: dim,
            right: ops.n(),
        });
    }
    let mut out: Vec<(usize, Result<f64>)> = (0..spec.n)
        .into_par_iter()
        .map(|i| (i, one_trajectory(spec, i, ops)))
        .collect();
    out.sort_by_key(|(i, _)| *i);
    let mut fidelities = Vec::with_capacity(spec.n);
    let mut failures = 0;
    for (_, r) in out {
        match r {
            Ok(f) => fidelities.push(f),
            Err(Error::PositivityLoss { .. }) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    let histogram = FidelityHistogram::from_fidelities(&fidelities, DEFAULT_BINS, &spec.thresholds);
    Ok(BatchResult {
        histogram,
        fidelities,
        failures,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub threshold: f64,
    pub optimal: f64,
    pub sample: f64,
    /// `100 (optimal − sample) / sample`; absent when the sample fraction is zero.
    pub relative_increase_percent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

/// Rows for thresholds present in both histograms.
pub fn compare(
    optimal: &FidelityHistogram,
    sample: &FidelityHistogram,
    thresholds: &[f64],
) -> ComparisonReport {
    let rows = thresholds
        .iter()
        .filter_map(|&t| {
            let (o, s) = (optimal.fraction_above(t)?, sample.fraction_above(t)?);
            let rel = (s > 0.0).then(|| 100.0 * (o - s) / s);
            Some(ComparisonRow {
                threshold: t,
                optimal: o,
                sample: s,
                relative_increase_percent: rel,
            })
        })
        .collect();
    ComparisonReport { rows }
}

impl ComparisonReport {
    pub fn dominates(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.optimal > r.sample)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let rel = r
                .relative_increase_percent
                .map_or("n/a".to_string(), |v| format!("{v:+.1}%"));
            out.push_str(&format!(
                "F > {:.2}: optimal {:.2}%  sample {:.2}%  increase {}\n",
                r.threshold,
                100.0 * r.optimal,
                100.0 * r.sample,
                rel
            ));
        }
        out
    }

    /// CSV `threshold,optimal,sample,relative_increase_percent`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,optimal,sample,relative_increase_percent\n");
        for r in &self.rows {
            let rel = r
                .relative_increase_percent
                .map_or(String::new(), |v| format!("{v:.6}"));
            out.push_str(&format!(
                "{},{:.6},{:.6},{}\n",
                r.threshold, r.optimal, r.sample, rel
            ));
        }
        out
    }
}
