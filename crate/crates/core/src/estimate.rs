//! Least-squares estimation of per-constituent coefficients.
//!
//! Observations stack one flow vector per row into a design matrix `b` and
//! the matching energies into `E`; the fitted coefficients minimize
//! `||E - b A||_2`. The model has no intercept, so zero flows predict zero
//! energy. The solve goes through a singular value decomposition of the
//! column-equilibrated design matrix, which also gives the rank test.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{overall_energy, CoefficientVector, Constituent, ConstituentFlowVector, ConstituentMask};
use crate::error::{Error, Result};
use crate::sim::{Phase, Trace};

/// Smallest-to-largest singular value ratio below which the design matrix is
/// treated as rank-deficient.
pub const RANK_RATIO: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub index: u32,
    pub phase: Option<Phase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub rows: Vec<ConstituentFlowVector>,
    pub energy: Vec<f64>,
    pub mask: ConstituentMask,
    pub annotations: Vec<Annotation>,
}

impl ObservationSet {
    pub fn new(rows: Vec<ConstituentFlowVector>, energy: Vec<f64>, mask: ConstituentMask) -> Result<Self> {
        if rows.len() != energy.len() {
            return Err(Error::LengthMismatch(rows.len(), energy.len()));
        }
        let annotations = (0..rows.len() as u32)
            .map(|index| Annotation { index, phase: None })
            .collect();
        Ok(Self {
            rows,
            energy,
            mask,
            annotations,
        })
    }

    pub fn from_trace(trace: &Trace, mask: ConstituentMask) -> Self {
        Self {
            rows: trace.records.iter().map(|r| r.flows).collect(),
            energy: trace.records.iter().map(|r| r.energy_j).collect(),
            mask,
            annotations: trace
                .records
                .iter()
                .map(|r| Annotation {
                    index: r.slice,
                    phase: Some(r.phase),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows `range` as a new set.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            rows: self.rows[range.clone()].to_vec(),
            energy: self.energy[range.clone()].to_vec(),
            mask: self.mask,
            annotations: self.annotations[range].to_vec(),
        }
    }

    fn design(&self) -> (DMatrix<f64>, Vec<Constituent>) {
        let cols: Vec<Constituent> = self.mask.active().collect();
        let b = DMatrix::from_fn(self.rows.len(), cols.len(), |i, j| self.rows[i][cols[j]]);
        (b, cols)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub coefficients: CoefficientVector,
    /// `E - b A` per observation.
    pub residuals: Vec<f64>,
    /// Ratio of largest to smallest singular value of the equilibrated design.
    pub condition: f64,
    pub observations: usize,
    /// Relative standard error per constituent (NaN where undefined).
    pub rel_stderr: [f64; 5],
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn residual_norm(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum::<f64>().sqrt()
    }
}

/// Ordinary least squares over the active constituents of `obs`.
pub fn fit_ls(obs: &ObservationSet) -> Result<FitResult> {
    let n = obs.mask.count();
    let m = obs.len();
    if m <= n {
        return Err(Error::TooFewObservations { rows: m, columns: n });
    }
    for (i, e) in obs.energy.iter().enumerate() {
        if !e.is_finite() {
            return Err(Error::Parse(format!("observation {i}: energy {e} is not finite")));
        }
    }
    for row in &obs.rows {
        row.validate()?;
    }
    let (b, cols) = obs.design();
    let e = DVector::from_column_slice(&obs.energy);

    // Equilibrate columns so the rank test does not depend on units.
    let norms: Vec<f64> = (0..n).map(|j| b.column(j).norm()).collect();
    let zero: Vec<String> = norms
        .iter()
        .zip(&cols)
        .filter(|(nm, _)| **nm == 0.0)
        .map(|(_, c)| c.column().to_string())
        .collect();
    if !zero.is_empty() {
        return Err(Error::RankDeficient { columns: zero });
    }
    let mut scaled = b.clone();
    for (j, nm) in norms.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / nm);
    }

    let svd = scaled.svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    if !(smin / smax >= RANK_RATIO) {
        let mut involved = vec![false; n];
        for (k, s) in sv.iter().enumerate() {
            if s / smax < RANK_RATIO {
                let row = v_t.row(k);
                let peak = row.amax();
                for j in 0..n {
                    if row[j].abs() > 1e-6 * peak {
                        involved[j] = true;
                    }
                }
            }
        }
        let columns = cols
            .iter()
            .zip(involved)
            .filter(|(_, inv)| *inv)
            .map(|(c, _)| c.column().to_string())
            .collect();
        return Err(Error::RankDeficient { columns });
    }

    let u = svd.u.as_ref().expect("requested U");
    let ute = u.transpose() * &e;
    let mut y = DVector::zeros(n);
    for k in 0..n {
        y[k] = ute[k] / sv[k];
    }
    let scaled_coef = v_t.transpose() * y;

    let mut alpha = [0.0; 5];
    for (j, c) in cols.iter().enumerate() {
        alpha[c.index()] = scaled_coef[j] / norms[j];
    }
    let coefficients = CoefficientVector::new(alpha, obs.mask)?;
    let coef_vec = DVector::from_iterator(n, cols.iter().map(|c| alpha[c.index()]));
    let residual = &e - &b * &coef_vec;

    // Var(A_j) = s^2 [(b^T b)^-1]_jj, with (b^T b)^-1 = D^-1 V S^-2 V^T D^-1.
    let s2 = residual.norm_squared() / (m - n) as f64;
    let mut rel_stderr = [f64::NAN; 5];
    for (j, c) in cols.iter().enumerate() {
        let mut diag = 0.0;
        for k in 0..n {
            diag += (v_t[(k, j)] / sv[k]).powi(2);
        }
        let var = s2 * diag / (norms[j] * norms[j]);
        let a = alpha[c.index()];
        if a != 0.0 {
            rel_stderr[c.index()] = var.sqrt() / a.abs();
        }
    }

    let warnings = cols
        .iter()
        .filter(|c| alpha[c.index()] < 0.0)
        .map(|c| format!("negative coefficient for {}: {}", c.column(), alpha[c.index()]))
        .collect();

    Ok(FitResult {
        coefficients,
        residuals: residual.iter().copied().collect(),
        condition: smax / smin,
        observations: m,
        rel_stderr,
        warnings,
    })
}

/// Predicted energy for one flow vector.
pub fn predict(model: &CoefficientVector, flows: &ConstituentFlowVector) -> Result<f64> {
    overall_energy(model, flows)
}

pub fn predict_all(model: &CoefficientVector, rows: &[ConstituentFlowVector]) -> Result<Vec<f64>> {
    rows.iter().map(|r| predict(model, r)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Mean absolute percentage error, in percent.
    pub mape_pct: f64,
    pub max_ape_pct: f64,
    pub per_slice_pct: Vec<f64>,
    pub per_slice_abs: Vec<f64>,
}

pub fn error_report(predictions: &[f64], observations: &[f64]) -> Result<ErrorReport> {
    if predictions.len() != observations.len() {
        return Err(Error::LengthMismatch(predictions.len(), observations.len()));
    }
    if observations.is_empty() {
        return Err(Error::TooFewObservations { rows: 0, columns: 1 });
    }
    let mut per_slice_pct = Vec::with_capacity(observations.len());
    let mut per_slice_abs = Vec::with_capacity(observations.len());
    for (i, (&p, &o)) in predictions.iter().zip(observations).enumerate() {
        if o == 0.0 {
            return Err(Error::ZeroObservation(i));
        }
        let abs = (p - o).abs();
        per_slice_abs.push(abs);
        per_slice_pct.push(100.0 * abs / o.abs());
    }
    let mape_pct = per_slice_pct.iter().sum::<f64>() / per_slice_pct.len() as f64;
    let max_ape_pct = per_slice_pct.iter().copied().fold(0.0, f64::max);
    Ok(ErrorReport {
        mape_pct,
        max_ape_pct,
        per_slice_pct,
        per_slice_abs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowFit {
    /// First row of the window.
    pub start: usize,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingFit {
    pub window: usize,
    pub fits: Vec<WindowFit>,
    /// Windows whose design matrix was rank-deficient.
    pub skipped: Vec<(usize, Error)>,
}

/// Refits over every contiguous window of `window` rows.
pub fn rolling_fit(obs: &ObservationSet, window: usize) -> Result<RollingFit> {
    let n = obs.mask.count();
    if window <= n {
        return Err(Error::TooFewObservations {
            rows: window,
            columns: n,
        });
    }
    if window > obs.len() {
        return Err(Error::WindowTooLarge { window, len: obs.len() });
    }
    let results: Vec<(usize, Result<FitResult>)> = (0..=obs.len() - window)
        .into_par_iter()
        .map(|start| (start, fit_ls(&obs.slice(start..start + window))))
        .collect();
    let mut fits = Vec::new();
    let mut skipped = Vec::new();
    for (start, r) in results {
        match r {
            Ok(fit) => fits.push(WindowFit { start, fit }),
            Err(e @ Error::RankDeficient { .. }) => skipped.push((start, e)),
            Err(e) => return Err(e),
        }
    }
    Ok(RollingFit { window, fits, skipped })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::TooFewObservations {
            rows: x.len(),
            columns: 1,
        });
    }
    let rx = ranks(x);
    let ry = ranks(y);
    Ok(pearson(&rx, &ry))
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}
