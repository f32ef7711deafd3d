// SPDX-License-Identifier: Apache-2.0

//! Closed-chain wave-packet spreading by spectral propagation.
//!
//! `ψ(t) = Σ_n e^{−iE_n t} |n⟩⟨n|ψ₀⟩` with ħ = 1; times are in units of the
//! inverse energy unit (ħ/Ω when energies are in units of Ω).

use ndarray::Array1;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::analysis::{spread, TailStats};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::HermitianSpectrum;

/// Default stationary averaging window.
pub const STATIONARY_WINDOW: (f64, f64) = (500.0, 1e4);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    /// `probabilities[t][j] = |ψ_j(t)|²`.
    pub probabilities: Vec<Vec<T>>,
    pub variance: Vec<T>,
}

/// Default centre site `⌈N/2⌉` (1-based), returned 0-based.
pub fn centre_site(n: usize) -> usize {
    n.div_ceil(2).saturating_sub(1)
}

/// 400 log-spaced points in `[1e-2, 1e4]`, preceded by `t = 0` and a linear
/// grid of step `1e-3` up to `0.25`.
pub fn default_times<T: Real>() -> Vec<T> {
    time_grid(400, 1e-2, 1e4, 1e-3, 0.25)
}

pub fn time_grid<T: Real>(
    n_log: usize,
    t_min: f64,
    t_max: f64,
    early_step: f64,
    early_end: f64,
) -> Vec<T> {
    let mut t: Vec<f64> = Vec::new();
    if early_step > 0.0 {
        let m = (early_end / early_step).round() as usize;
        t.extend((0..=m).map(|i| i as f64 * early_step));
    } else {
        t.push(0.0);
    }
    if n_log > 1 {
        let (a, b) = (t_min.ln(), t_max.ln());
        t.extend((0..n_log).map(|i| (a + (b - a) * i as f64 / (n_log - 1) as f64).exp()));
    }
    t.sort_by(|x, y| x.partial_cmp(y).unwrap());
    t.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * y.abs().max(1e-300));
    t.into_iter().map(T::lit).collect()
}

/// `e^{−iHt} ψ` for a complex state.
pub fn evolve<T: Real>(
    spec: &HermitianSpectrum<T>,
    psi: &[Complex<T>],
    t: T,
) -> Result<Vec<Complex<T>>> {
    let n = spec.eigenvectors.nrows();
    if psi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: psi.len(),
        });
    }
    let v = &spec.eigenvectors;
    let mut out = vec![Complex::new(T::zero(), T::zero()); n];
    for k in 0..spec.eigenvectors.ncols() {
        let c: Complex<T> = (0..n)
            .map(|i| psi[i] * v[[i, k]])
            .fold(Complex::new(T::zero(), T::zero()), |a, b| a + b);
        let ph = Complex::new(T::zero(), -spec.eigenvalues[k] * t).exp() * c;
        for i in 0..n {
            out[i] += ph * v[[i, k]];
        }
    }
    Ok(out)
}

/// Probability distribution over sites at every requested time, for a
/// packet starting on site `psi0`.
pub fn propagate<T: Real>(
    spec: &HermitianSpectrum<T>,
    psi0: usize,
    times: &[T],
) -> Result<Trajectory<T>> {
    let n = spec.eigenvectors.nrows();
    let m = spec.eigenvectors.ncols();
    if psi0 >= n {
        return Err(Error::invalid(format!(
            "initial site {psi0} out of range for N = {n}"
        )));
    }
    if times.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::invalid("time grid must be sorted"));
    }
    let nt = times.len();
    let v = &spec.eigenvectors;
    // phases weighted by ⟨n|ψ₀⟩, column-major m × nt
    let mut cr = vec![T::zero(); m * nt];
    let mut ci = vec![T::zero(); m * nt];
    for (j, &t) in times.iter().enumerate() {
        for k in 0..m {
            let c = v[[psi0, k]];
            let (s, co) = (spec.eigenvalues[k] * t).sin_cos();
            cr[j * m + k] = co * c;
            ci[j * m + k] = -s * c;
        }
    }
    let mut vcol = vec![T::zero(); n * m];
    for k in 0..m {
        for i in 0..n {
            vcol[k * n + i] = v[[i, k]];
        }
    }
    let mut re = vec![T::zero(); n * nt];
    let mut im = vec![T::zero(); n * nt];
    T::gemm(n, nt, m, &vcol, &cr, &mut re);
    T::gemm(n, nt, m, &vcol, &ci, &mut im);
    let mut probabilities = Vec::with_capacity(nt);
    let mut variance = Vec::with_capacity(nt);
    for j in 0..nt {
        let p: Vec<T> = (0..n)
            .map(|i| re[j * n + i] * re[j * n + i] + im[j * n + i] * im[j * n + i])
            .collect();
        variance.push(spread(Array1::from(p.clone()).view()));
        probabilities.push(p);
    }
    Ok(Trajectory {
        times: times.to_vec(),
        probabilities,
        variance,
    })
}

/// `σ²(t)` recomputed from the stored distributions.
pub fn variance_trace<T: Real>(traj: &Trajectory<T>) -> Vec<T> {
    traj.probabilities
        .iter()
        .map(|p| spread(ndarray::ArrayView1::from(p.as_slice())))
        .collect()
}

/// Disorder average of probability distributions on a common time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceAverage<T> {
    pub times: Vec<T>,
    pub mean_probabilities: Vec<Vec<T>>,
    pub count: usize,
}

impl<T: Real> TraceAverage<T> {
    pub fn new(times: &[T], n_sites: usize) -> Self {
        Self {
            times: times.to_vec(),
            mean_probabilities: vec![vec![T::zero(); n_sites]; times.len()],
            count: 0,
        }
    }

    pub fn add(&mut self, traj: &Trajectory<T>) -> Result<()> {
        let other = Self {
            times: traj.times.clone(),
            mean_probabilities: traj.probabilities.clone(),
            count: 1,
        };
        self.merge(&other)
    }

    /// Count-weighted merge.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.times != self.times {
            return Err(Error::invalid("trace averages on different time grids"));
        }
        let total = self.count + other.count;
        if total == 0 {
            return Ok(());
        }
        let (a, b, t) = (
            T::of_usize(self.count),
            T::of_usize(other.count),
            T::of_usize(total),
        );
        for (x, y) in self
            .mean_probabilities
            .iter_mut()
            .zip(&other.mean_probabilities)
        {
            if x.len() != y.len() {
                return Err(Error::DimensionMismatch {
                    expected: x.len(),
                    got: y.len(),
                });
            }
            for (p, &q) in x.iter_mut().zip(y) {
                *p = (*p * a + q * b) / t;
            }
        }
        self.count = total;
        Ok(())
    }

    /// Variance of the averaged distribution at every time.
    pub fn variance(&self) -> Vec<T> {
        self.mean_probabilities
            .iter()
            .map(|p| spread(ndarray::ArrayView1::from(p.as_slice())))
            .collect()
    }
}

/// Time average of `trace` over `[t_a, t_b]` (trapezoidal in t, over the
/// grid points inside the window).
pub fn stationary_variance<T: Real>(times: &[T], trace: &[T], window: (T, T)) -> Result<T> {
    let (ta, tb) = window;
    if !(tb > ta) {
        return Err(Error::invalid("stationary window needs t_b > t_a"));
    }
    if times.len() != trace.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: trace.len(),
        });
    }
    let pts: Vec<(T, T)> = times
        .iter()
        .zip(trace)
        .filter(|(t, _)| **t >= ta && **t <= tb)
        .map(|(a, b)| (*a, *b))
        .collect();
    match pts.len() {
        0 => Err(Error::invalid(format!(
            "no samples inside the window [{ta}, {tb}]"
        ))),
        1 => Ok(pts[0].1),
        _ => {
            let mut area = T::zero();
            for w in pts.windows(2) {
                area += (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / T::lit(2.0);
            }
            let span = pts[pts.len() - 1].0 - pts[0].0;
            if span > T::zero() {
                Ok(area / span)
            } else {
                Ok(pts.iter().map(|p| p.1).sum::<T>() / T::of_usize(pts.len()))
            }
        }
    }
}

/// Time-averaged probability over the samples of `traj` inside `window`,
/// one value per site except `exclude`; merge across realizations with
/// [`TailStats::merge`].
pub fn stationary_tail_stats<T: Real>(
    traj: &Trajectory<T>,
    exclude: usize,
    window: (T, T),
) -> TailStats<T> {
    let mut st = TailStats::default();
    let n = traj.probabilities.first().map_or(0, |p| p.len());
    let mut avg = vec![T::zero(); n];
    let mut count = 0usize;
    for (t, p) in traj.times.iter().zip(&traj.probabilities) {
        if *t < window.0 || *t > window.1 {
            continue;
        }
        for (a, &q) in avg.iter_mut().zip(p) {
            *a += q;
        }
        count += 1;
    }
    if count == 0 {
        return st;
    }
    let c = T::of_usize(count);
    for (i, a) in avg.into_iter().enumerate() {
        if i != exclude {
            st.push(a / c);
        }
    }
    st
}
