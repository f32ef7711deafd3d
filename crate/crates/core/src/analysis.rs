// SPDX-License-Identifier: Apache-2.0

//! Eigenstate structure, disorder thresholds and the energy gap.
//!
//! Site coordinates in moments run over `1..=N`. Shape profiles are indexed
//! by the offset `k = i − i_peak` in `−M..=M` with `M = ⌈N/2⌉`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    build_hamiltonian, effective_long_range_coupling, ChainSpec, DisorderRealization, ModelKind,
};
use crate::scalar::Real;
use crate::spectral::{eig_chain, eig_hermitian, energy_gap, HermitianSpectrum, Vectors};

/// Numerical prefactor of the band-centre localization length.
pub const XI_PREFACTOR: f64 = 105.2;

/// Default fraction of central sites whose peaked eigenfunctions enter a
/// shape average.
pub const SHAPE_WINDOW: f64 = 0.20;

/// Disorder thresholds of the long-range chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet<T> {
    pub w1: T,
    pub w2: T,
    pub w_gap: T,
    /// `2W/(N ln N)`, present when a disorder strength was supplied.
    pub gamma_gap: Option<T>,
    pub omega: T,
}

impl<T: Real> ThresholdSet<T> {
    /// Band-centre localization length `ξ(W) = 105.2 (Ω/W)²`.
    pub fn xi(&self, w: T) -> T {
        localization_length(self.omega, w)
    }
}

pub fn localization_length<T: Real>(omega: T, w: T) -> T {
    let r = omega / w;
    T::lit(XI_PREFACTOR) * r * r
}

pub fn thresholds<T: Real>(n: usize, omega: T, gamma: T, w: Option<T>) -> Result<ThresholdSet<T>> {
    if n < 2 {
        return Err(Error::invalid("thresholds need N >= 2"));
    }
    if !(omega > T::zero()) || !(gamma >= T::zero()) {
        return Err(Error::invalid(
            "omega must be positive and gamma non-negative",
        ));
    }
    let nf = T::of_usize(n);
    let ln = nf.ln();
    let c = T::lit(2.0 * XI_PREFACTOR);
    Ok(ThresholdSet {
        w1: (c * ln / nf).sqrt() * omega,
        w2: (c * ln).sqrt() * omega,
        w_gap: gamma / T::lit(2.0) * nf * ln,
        gamma_gap: w.map(|w| T::lit(2.0) * w / (nf * ln)),
        omega,
    })
}

/// `Δ = W / (e^{2W/Nγ} − 1)`, with the `W → 0` limit `Nγ/2`.
pub fn gap_analytic<T: Real>(w: T, n: usize, gamma: T) -> Result<T> {
    if !(gamma > T::zero()) || n == 0 {
        return Err(Error::invalid("analytic gap needs gamma > 0 and N >= 1"));
    }
    let ng2 = T::of_usize(n) * gamma / T::lit(2.0);
    if w == T::zero() {
        return Ok(ng2);
    }
    Ok(w / (w / ng2).exp_m1())
}

/// Numeric gap of one realization, `max_i min_{j≠i} |E_i − E_j|`.
pub fn numeric_gap<T: Real>(spec: &ChainSpec<T>, dis: &DisorderRealization<T>) -> Result<T> {
    let s = eig_chain(spec, dis, Vectors::None)?;
    energy_gap(s.eigenvalues().as_slice().expect("contiguous"))
}

/// `⟨x²⟩ − ⟨x⟩²` of a probability distribution over sites `1..=N`.
pub fn spread<T: Real>(p: ArrayView1<'_, T>) -> T {
    let mut m1 = T::zero();
    let mut m2 = T::zero();
    let mut norm = T::zero();
    for (i, &q) in p.iter().enumerate() {
        let x = T::of_usize(i + 1);
        norm += q;
        m1 += q * x;
        m2 += q * x * x;
    }
    if norm == T::zero() {
        return T::zero();
    }
    let m1 = m1 / norm;
    (m2 / norm - m1 * m1).max(T::zero())
}

fn state_spread<T: Real>(v: ArrayView1<'_, T>) -> T {
    spread(v.mapv(|x| x * x).view())
}

/// Mean of `σ²_α` over eigenstates; the lowest one is skipped when
/// `exclude_ground` is set.
pub fn excited_state_variance<T: Real>(
    spec: &HermitianSpectrum<T>,
    exclude_ground: bool,
) -> Result<T> {
    let n = spec.len();
    if n < 2 {
        return Err(Error::invalid("variance needs N >= 2"));
    }
    let start = usize::from(exclude_ground);
    let sum: T = (start..n)
        .map(|k| state_spread(spec.eigenvectors.column(k)))
        .sum();
    Ok(sum / T::of_usize(n - start))
}

/// Variance of the ground state (lowest eigenvalue).
pub fn ground_state_variance<T: Real>(spec: &HermitianSpectrum<T>) -> T {
    state_spread(spec.eigenvectors.column(0))
}

/// Disorder-averaged `⟨|Ψ|²⟩` around the peak site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeProfile<T> {
    /// `probabilities[M + k]` is the average weight at offset `k`.
    pub probabilities: Vec<T>,
    pub count: usize,
    pub window_fraction: T,
}

impl<T: Real> ShapeProfile<T> {
    pub fn new(n_sites: usize, window_fraction: T) -> Self {
        let m = n_sites.div_ceil(2);
        Self {
            probabilities: vec![T::zero(); 2 * m + 1],
            count: 0,
            window_fraction,
        }
    }

    pub fn half_width(&self) -> usize {
        self.probabilities.len() / 2
    }

    /// `(k, ⟨|Ψ|²⟩)` pairs.
    pub fn points(&self) -> Vec<(i64, T)> {
        let m = self.half_width() as i64;
        self.probabilities
            .iter()
            .enumerate()
            .map(|(i, &p)| (i as i64 - m, p))
            .collect()
    }

    pub fn at(&self, k: i64) -> T {
        let m = self.half_width() as i64;
        if k.abs() > m {
            return T::zero();
        }
        self.probabilities[(k + m) as usize]
    }

    /// Adds the selected columns of `vectors`, using the first `n_sites` rows
    /// (renormalized) as the chain amplitudes. Returns the number kept.
    pub fn add_states(
        &mut self,
        vectors: ArrayView2<'_, T>,
        n_sites: usize,
        columns: impl IntoIterator<Item = usize>,
    ) -> Result<usize> {
        if vectors.nrows() < n_sites {
            return Err(Error::DimensionMismatch {
                expected: n_sites,
                got: vectors.nrows(),
            });
        }
        let m = self.half_width();
        let centre = (n_sites as f64 - 1.0) / 2.0;
        let reach = self.window_fraction.as_f64() * n_sites as f64 / 2.0;
        let mut sum = vec![T::zero(); self.probabilities.len()];
        let mut kept = 0usize;
        let mut p = vec![T::zero(); n_sites];
        for col in columns {
            let v = vectors.column(col);
            let mut norm = T::zero();
            let mut peak = 0;
            for i in 0..n_sites {
                p[i] = v[i] * v[i];
                norm += p[i];
                if p[i] > p[peak] {
                    peak = i;
                }
            }
            if !(norm > T::zero()) || (peak as f64 - centre).abs() > reach {
                continue;
            }
            let inv = norm.recip();
            for (i, &q) in p.iter().enumerate() {
                let k = i as i64 - peak as i64 + m as i64;
                if k >= 0 && (k as usize) < sum.len() {
                    sum[k as usize] += q * inv;
                }
            }
            kept += 1;
        }
        if kept > 0 {
            let total = self.count + kept;
            let (a, b) = (T::of_usize(self.count), T::of_usize(total));
            for (avg, s) in self.probabilities.iter_mut().zip(&sum) {
                *avg = (*avg * a + *s) / b;
            }
            self.count = total;
        }
        Ok(kept)
    }

    /// Adds the eigenstates of one realization.
    pub fn add_spectrum(
        &mut self,
        spec: &HermitianSpectrum<T>,
        exclude_ground: bool,
    ) -> Result<usize> {
        let n = spec.len();
        self.add_states(spec.eigenvectors.view(), n, usize::from(exclude_ground)..n)
    }

    /// Count-weighted merge of two partial averages.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.probabilities.len() != self.probabilities.len() {
            return Err(Error::DimensionMismatch {
                expected: self.probabilities.len(),
                got: other.probabilities.len(),
            });
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
        for (x, &y) in self.probabilities.iter_mut().zip(&other.probabilities) {
            *x = (*x * a + y * b) / t;
        }
        self.count = total;
        Ok(())
    }

    /// Least-squares slope of `ln⟨|Ψ|²⟩` against `|k|` over `k_min..=k_max`
    /// on both sides of the peak, skipping non-positive values.
    pub fn log_slope(&self, k_min: usize, k_max: usize) -> Option<T> {
        let mut pts = Vec::new();
        for k in k_min..=k_max {
            for s in [-(k as i64), k as i64] {
                let p = self.at(s).as_f64();
                if p > 0.0 {
                    pts.push((k as f64, p.ln()));
                }
            }
        }
        if pts.len() < 2 {
            return None;
        }
        let nf = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        if sxx == 0.0 {
            return None;
        }
        Some(T::lit(sxy / sxx))
    }

    /// Mean of the profile over `k_min ≤ |k| ≤ k_max`.
    pub fn plateau(&self, k_min: usize, k_max: usize) -> T {
        let mut s = T::zero();
        let mut c = 0usize;
        for k in k_min..=k_max.min(self.half_width()) {
            s += self.at(k as i64) + self.at(-(k as i64));
            c += 2;
        }
        if c == 0 {
            T::zero()
        } else {
            s / T::of_usize(c)
        }
    }
}

/// Averaged shape over a stream of realizations.
pub fn averaged_shape<'a, T: Real>(
    spectra: impl IntoIterator<Item = &'a HermitianSpectrum<T>>,
    window_fraction: T,
    exclude_ground: bool,
) -> Result<ShapeProfile<T>> {
    let mut out: Option<ShapeProfile<T>> = None;
    for s in spectra {
        let prof = out.get_or_insert_with(|| ShapeProfile::new(s.len(), window_fraction));
        prof.add_spectrum(s, exclude_ground)?;
    }
    let prof = out.ok_or_else(|| Error::Empty("no realizations".into()))?;
    if prof.count == 0 {
        return Err(Error::Empty(format!(
            "no eigenfunction peaked inside the central window (fraction {window_fraction})"
        )));
    }
    Ok(prof)
}

/// Running sums for tail probabilities: `⟨p⟩` and `exp⟨ln p⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TailStats<T> {
    pub sum: T,
    pub sum_log: T,
    pub count: usize,
}

impl<T: Real> TailStats<T> {
    pub fn push(&mut self, p: T) {
        self.sum += p;
        self.sum_log += p.max(T::min_positive_value()).ln();
        self.count += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        self.sum += other.sum;
        self.sum_log += other.sum_log;
        self.count += other.count;
    }

    pub fn average(&self) -> T {
        self.sum / T::of_usize(self.count.max(1))
    }

    pub fn typical(&self) -> T {
        (self.sum_log / T::of_usize(self.count.max(1))).exp()
    }
}

/// Default peak-exclusion half-width `max(1, ⌈3ξ⌉)`, capped at `N/10`.
pub fn default_exclusion<T: Real>(n: usize, omega: T, w: T) -> usize {
    let xi = localization_length(omega, w).as_f64();
    let h = if xi.is_finite() {
        (3.0 * xi).ceil().max(1.0)
    } else {
        f64::INFINITY
    };
    let cap = (n / 10).max(1);
    if h >= cap as f64 {
        cap
    } else {
        h as usize
    }
}

/// Probabilities of the eigenstates on sites farther than `halfwidth` from
/// each state's peak, one sample per component.
pub fn tail_amplitude<T: Real>(
    spec: &HermitianSpectrum<T>,
    halfwidth: usize,
    exclude_ground: bool,
) -> Result<TailStats<T>> {
    let n = spec.eigenvectors.nrows();
    if 2 * halfwidth + 1 >= n {
        return Err(Error::invalid(format!(
            "exclusion half-width {halfwidth} leaves no tail for N = {n}"
        )));
    }
    let mut st = TailStats::default();
    for k in usize::from(exclude_ground)..spec.eigenvectors.ncols() {
        tail_of_state(spec.eigenvectors.column(k), n, halfwidth, &mut st);
    }
    Ok(st)
}

pub(crate) fn tail_of_state<T: Real>(
    v: ArrayView1<'_, T>,
    n: usize,
    halfwidth: usize,
    st: &mut TailStats<T>,
) {
    let mut peak = 0;
    for i in 0..n {
        if v[i] * v[i] > v[peak] * v[peak] {
            peak = i;
        }
    }
    let norm: T = (0..n).map(|i| v[i] * v[i]).sum();
    for i in 0..n {
        if i.abs_diff(peak) > halfwidth {
            st.push(v[i] * v[i] / norm);
        }
    }
}

/// States of the long-range chain with the coupling between `|d⟩` and its
/// orthogonal complement dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbativeBasis<T> {
    pub d_state: Array1<T>,
    /// Column `μ` is `|μ⟩` in the site basis, ascending in `ε̃_μ`.
    pub mu_states: Array2<T>,
    pub mu_energies: Array1<T>,
    /// `h_μ = Σ_n ε_n ⟨d|n⟩⟨n|μ⟩`.
    pub h_vector: Array1<T>,
    pub zeta: T,
    /// `ε_n + γ/2 − ε̃_μ` vanished for some `n`; the column is the direct
    /// eigenvector of the projected block instead.
    pub flagged: Vec<bool>,
    pub gamma: T,
}

impl<T: Real> PerturbativeBasis<T> {
    /// Energy of `|d⟩`, `−γ(N−1)/2 + ζ`.
    pub fn d_energy(&self) -> T {
        -self.gamma / T::lit(2.0) * T::of_usize(self.d_state.len() - 1) + self.zeta
    }

    /// The approximate spectrum `{|d⟩} ∪ {|μ⟩}` as a Hermitian spectrum.
    pub fn spectrum(&self) -> Result<HermitianSpectrum<T>> {
        let n = self.d_state.len();
        let mut v = Array2::zeros((n, n));
        v.column_mut(0).assign(&self.d_state);
        v.slice_mut(ndarray::s![.., 1..]).assign(&self.mu_states);
        let mut e = vec![self.d_energy()];
        e.extend(self.mu_energies.iter().copied());
        HermitianSpectrum::from_parts(e, v)
    }
}

/// Orthonormal cosine modes `k = 1..N−1`, all orthogonal to the uniform state.
pub fn complement_basis<T: Real>(n: usize) -> Array2<T> {
    let nf = n as f64;
    let c = (2.0 / nf).sqrt();
    Array2::from_shape_fn((n, n - 1), |(j, k)| {
        T::lit(c * (std::f64::consts::PI * (k + 1) as f64 * (j as f64 + 0.5) / nf).cos())
    })
}

/// Builds `|μ⟩ = h_μ Σ_n ⟨n|d⟩/(ε_n + γ/2 − ε̃_μ) |n⟩` from the spectrum of
/// the Anderson Hamiltonian `H_0`.
pub fn perturbative_states<T: Real>(
    h0: &HermitianSpectrum<T>,
    gamma: T,
) -> Result<PerturbativeBasis<T>> {
    let n = h0.len();
    if n < 2 {
        return Err(Error::invalid("perturbative states need N >= 2"));
    }
    if !(gamma > T::zero()) {
        return Err(Error::invalid("perturbative states need gamma > 0"));
    }
    let half = gamma / T::lit(2.0);
    let v = &h0.eigenvectors;
    let eps = &h0.eigenvalues;
    let b = complement_basis::<T>(n);
    // M = Vᵀ B, H̃ = Mᵀ diag(ε) M + γ/2
    let m = v.t().dot(&b);
    let em = Array2::from_shape_fn((n, n - 1), |(i, j)| eps[i] * m[[i, j]]);
    let mut ht = m.t().dot(&em);
    for i in 0..n - 1 {
        ht[[i, i]] += half;
    }
    for i in 0..n - 1 {
        for j in 0..i {
            let s = (ht[[i, j]] + ht[[j, i]]) / T::lit(2.0);
            ht[[i, j]] = s;
            ht[[j, i]] = s;
        }
    }
    let sub = eig_hermitian(&ht)?;
    let sqn = T::of_usize(n).sqrt().recip();
    let d_state = Array1::from_elem(n, sqn);
    let dn: Array1<T> = v.t().dot(&d_state);
    let zeta: T = (0..n).map(|k| eps[k] * dn[k] * dn[k]).sum();

    let direct = b.dot(&sub.eigenvectors);
    let mut mu_states = Array2::zeros((n, n - 1));
    let mut h_vector = Array1::zeros(n - 1);
    let mut flagged = vec![false; n - 1];
    let floor = T::lit(1e-12) * gamma;
    let mut c = vec![T::zero(); n];
    for mu in 0..n - 1 {
        let et = sub.eigenvalues[mu];
        let col = direct.column(mu);
        let cn: Array1<T> = v.t().dot(&col);
        h_vector[mu] = (0..n).map(|k| eps[k] * dn[k] * cn[k]).sum();
        let mut broken = false;
        let mut norm = T::zero();
        for k in 0..n {
            let den = eps[k] + half - et;
            if den.abs() < floor {
                broken = true;
                break;
            }
            c[k] = dn[k] / den;
            norm += c[k] * c[k];
        }
        if !broken && norm > T::zero() && norm.is_finite() {
            // h_μ from the normalization, sign aligned with the direct vector
            let hn = norm.sqrt().recip();
            let sign = if (0..n).map(|k| c[k] * cn[k]).sum::<T>() < T::zero() {
                -T::one()
            } else {
                T::one()
            };
            let site = v.dot(&Array1::from(
                c.iter().map(|&x| x * hn * sign).collect::<Vec<_>>(),
            ));
            mu_states.column_mut(mu).assign(&site);
        } else {
            flagged[mu] = true;
            mu_states.column_mut(mu).assign(&col);
        }
    }
    Ok(PerturbativeBasis {
        d_state,
        mu_states,
        mu_energies: sub.eigenvalues,
        h_vector,
        zeta,
        flagged,
        gamma,
    })
}

/// Side-by-side cavity and long-range spectra on one disorder draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavityComparison<T> {
    pub g: T,
    pub gamma_eff: T,
    /// `max_i min_{j≠i} |E_i − E_j|` of the cavity Hamiltonian.
    pub polariton_gap: T,
    /// `√(N g² + Ω²) − Ω`.
    pub polariton_gap_analytic: T,
    /// Largest `|E_cav − E_lr|` over the non-polaritonic levels matched in
    /// order with the excited long-range levels.
    pub max_level_difference: T,
    pub cavity_shape: ShapeProfile<T>,
    pub long_range_shape: ShapeProfile<T>,
}

pub fn polariton_gap_analytic<T: Real>(n: usize, g: T, omega: T) -> T {
    (T::of_usize(n) * g * g + omega * omega).sqrt() - omega.abs()
}

pub fn cavity_longrange_overlap<T: Real>(
    spec: &ChainSpec<T>,
    dis: &DisorderRealization<T>,
    window_fraction: T,
) -> Result<CavityComparison<T>> {
    let g = match (spec.kind, spec.cavity) {
        (ModelKind::Cavity, Some(c)) if c.g > T::zero() => c.g,
        _ => {
            return Err(Error::invalid(
                "cavity comparison needs a cavity model with g > 0",
            ))
        }
    };
    let n = spec.n_sites;
    let gamma_eff = effective_long_range_coupling(g, n);
    let cav = eig_hermitian(&build_hamiltonian(spec, dis)?)?;
    let lr_spec = ChainSpec::long_range(n, spec.omega, gamma_eff);
    let lr = eig_chain(&lr_spec, dis, Vectors::Full)?.into_full()?;

    let polariton_gap = energy_gap(cav.eigenvalues.as_slice().expect("contiguous"))?;
    let mut max_level_difference = T::zero();
    for k in 1..n {
        max_level_difference =
            max_level_difference.max((cav.eigenvalues[k] - lr.eigenvalues[k]).abs());
    }
    let mut cavity_shape = ShapeProfile::new(n, window_fraction);
    cavity_shape.add_states(cav.eigenvectors.view(), n, non_polaritonic(&cav))?;
    let mut long_range_shape = ShapeProfile::new(n, window_fraction);
    long_range_shape.add_spectrum(&lr, true)?;
    Ok(CavityComparison {
        g,
        gamma_eff,
        polariton_gap,
        polariton_gap_analytic: polariton_gap_analytic(n, g, spec.omega),
        max_level_difference,
        cavity_shape,
        long_range_shape,
    })
}

/// Eigenstates of the cavity Hamiltonian other than the two with the largest
/// photon weight.
pub fn non_polaritonic<T: Real>(cav: &HermitianSpectrum<T>) -> Vec<usize> {
    let dim = cav.len();
    let photon = dim - 1;
    let mut order: Vec<usize> = (0..dim).collect();
    let w = |k: usize| cav.eigenvectors[[photon, k]].abs();
    order.sort_by(|&a, &b| w(b).partial_cmp(&w(a)).unwrap_or(std::cmp::Ordering::Equal));
    let mut rest: Vec<usize> = order.into_iter().skip(2).collect();
    rest.sort_unstable();
    rest
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sample_disorder;

    #[test]
    fn threshold_examples() {
        let t = thresholds::<f64>(100_000, 0.03, 2e-5, None).unwrap();
        assert!((t.w1 - 5e-3).abs() < 0.5e-3, "{}", t.w1);
        assert!((t.w2 - 1.5).abs() < 0.05, "{}", t.w2);
        assert!((t.w_gap - 11.5).abs() < 0.1, "{}", t.w_gap);
        assert!((t.xi(0.03) - 105.2).abs() < 1e-12);
        let t = thresholds(1000, 1.0f64, 1.0, Some(100.0)).unwrap();
        assert!((t.w2 / t.w1 - 1000f64.sqrt()).abs() < 1e-12);
        assert!((t.gamma_gap.unwrap() - 200.0 / (1000.0 * 1000f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn gap_formula() {
        assert_eq!(gap_analytic(0.0, 1000, 1.0).unwrap(), 500.0);
        let d = gap_analytic(100.0, 1000, 1.0f64).unwrap();
        assert!((d - 451.66).abs() < 0.01, "{d}");
        let n = 50;
        let wg = 25.0 * (n as f64).ln();
        let d = gap_analytic(wg, n, 1.0).unwrap();
        assert!((d - wg / 49.0).abs() < 1e-12 * d);
        assert!((gap_analytic(1e-9f64, 10, 2.0).unwrap() - 10.0).abs() < 1e-8);
    }

    #[test]
    fn spread_of_simple_distributions() {
        let mut p = Array1::zeros(9);
        p[3] = 1.0;
        assert_eq!(spread(p.view()), 0.0);
        let n = 11;
        let u = Array1::from_elem(n, 1.0 / n as f64);
        assert!((spread(u.view()) - (n * n - 1) as f64 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn sine_mode_variance() {
        let n = 50;
        let spec = ChainSpec::anderson(n, 1.0);
        let h = build_hamiltonian(&spec, &DisorderRealization::clean(n)).unwrap();
        let s = eig_hermitian(&h).unwrap();
        let got = excited_state_variance(&s, false).unwrap();
        let mut want = 0.0;
        for k in 1..=n {
            let mut m1 = 0.0;
            let mut m2 = 0.0;
            for j in 1..=n {
                let a = (2.0 / (n as f64 + 1.0))
                    * (std::f64::consts::PI * (k * j) as f64 / (n as f64 + 1.0))
                        .sin()
                        .powi(2);
                m1 += a * j as f64;
                m2 += a * (j * j) as f64;
            }
            want += m2 - m1 * m1;
        }
        want /= n as f64;
        assert!((got - want).abs() < 1e-10, "{got} {want}");
    }

    #[test]
    fn centred_delta_profile() {
        let mut v = Array2::zeros((5, 1));
        v[[2, 0]] = 1.0;
        let mut p = ShapeProfile::new(5, 0.2);
        assert_eq!(p.add_states(v.view(), 5, [0]).unwrap(), 1);
        assert_eq!(p.at(0), 1.0);
        assert_eq!(p.probabilities.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn profile_merge_is_weighted() {
        let spec = ChainSpec::long_range(40, 1.0, 1.0);
        let specs: Vec<_> = (0..4)
            .map(|i| {
                let d = sample_disorder(&spec, 30.0, 9, i).unwrap();
                eig_hermitian(&build_hamiltonian(&spec, &d).unwrap()).unwrap()
            })
            .collect();
        let whole = averaged_shape(specs.iter(), 0.2f64, true).unwrap();
        let mut a = averaged_shape(specs[..1].iter(), 0.2, true).unwrap();
        let b = averaged_shape(specs[1..].iter(), 0.2, true).unwrap();
        a.merge(&b).unwrap();
        assert_eq!(a.count, whole.count);
        for (x, y) in a.probabilities.iter().zip(&whole.probabilities) {
            assert!((x - y).abs() < 1e-14, "{x} {y}");
        }
        assert!(whole.probabilities.iter().sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn uniform_tail_is_one_over_n() {
        let n = 12;
        let v = Array2::from_elem((n, 1), 1.0 / (n as f64).sqrt());
        let s = HermitianSpectrum {
            eigenvalues: Array1::zeros(1),
            eigenvectors: v,
        };
        for h in [0, 1, 3] {
            let t = tail_amplitude(&s, h, false).unwrap();
            assert!(
                (t.average() - 1.0 / n as f64).abs() < 1e-15,
                "{} {}",
                t.average(),
                t.count
            );
            assert!((t.typical() - 1.0 / n as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn exclusion_default() {
        assert_eq!(default_exclusion(1000, 1.0, 10.0), 4);
        assert_eq!(default_exclusion(1000, 1.0, 1e3), 1);
        assert_eq!(default_exclusion(1000, 1.0, 1.0), 100);
    }

    #[test]
    fn perturbative_basis_is_orthonormal() {
        let n = 30;
        let spec = ChainSpec::anderson(n, 1.0);
        let d = sample_disorder(&spec, 50.0, 3, 0).unwrap();
        let h0 = eig_hermitian(&build_hamiltonian(&spec, &d).unwrap()).unwrap();
        let pb = perturbative_states(&h0, 100.0f64).unwrap();
        assert!(pb.flagged.iter().all(|f| !f));
        let g = pb.mu_states.t().dot(&pb.mu_states);
        for i in 0..n - 1 {
            assert!(pb.d_state.dot(&pb.mu_states.column(i)).abs() < 1e-12);
            for j in 0..n - 1 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[[i, j]] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn perturbative_clean_flat_chain() {
        let n = 8;
        let spec = ChainSpec::anderson(n, 0.0);
        let h0 = eig_hermitian(&build_hamiltonian(&spec, &DisorderRealization::clean(n)).unwrap())
            .unwrap();
        let pb = perturbative_states(&h0, 1.0f64).unwrap();
        assert_eq!(pb.zeta, 0.0);
        assert!(pb.h_vector.iter().all(|h| h.abs() < 1e-15));
        assert!(pb.mu_energies.iter().all(|e| (e - 0.5).abs() < 1e-14));
    }

    #[test]
    fn perturbative_weights_scale_with_disorder() {
        let n = 40;
        let spec = ChainSpec::anderson(n, 1.0);
        let d = sample_disorder(&spec, 1e8f64, 5, 0).unwrap();
        let a = perturbative_states(
            &eig_hermitian(&build_hamiltonian(&spec, &d).unwrap()).unwrap(),
            1.0,
        )
        .unwrap();
        let d2 = d.rescaled(2e8);
        let b = perturbative_states(
            &eig_hermitian(&build_hamiltonian(&spec, &d2).unwrap()).unwrap(),
            1.0,
        )
        .unwrap();
        for mu in 0..n - 1 {
            for i in 0..n {
                let (x, y) = (a.mu_states[[i, mu]].powi(2), b.mu_states[[i, mu]].powi(2));
                assert!((x - y).abs() < 1e-6, "{mu} {i} {x} {y}");
            }
        }
    }

    #[test]
    fn clean_cavity_without_hopping() {
        let n = 64;
        let g = 0.3;
        let spec = ChainSpec::cavity(n, 0.0, crate::model::CavityParams::with_coupling(g));
        let cmp = cavity_longrange_overlap(&spec, &DisorderRealization::clean(n), 0.2);
        // no state is peaked away from the flat degenerate block, so shapes may
        // be empty; only the spectra matter here
        let cav = eig_hermitian(&build_hamiltonian(&spec, &DisorderRealization::clean(n)).unwrap())
            .unwrap();
        let top = (n as f64).sqrt() * g;
        assert!((cav.eigenvalues[0] + top).abs() < 1e-13);
        assert!((cav.eigenvalues[n] - top).abs() < 1e-13);
        assert!((polariton_gap_analytic(n, g, 0.0) - top).abs() < 1e-15);
        let cmp = cmp.unwrap();
        assert!((cmp.polariton_gap - top).abs() < 1e-13);
        let lr = ChainSpec::long_range(n, 0.0, cmp.gamma_eff);
        let e = eig_chain(&lr, &DisorderRealization::clean(n), Vectors::None).unwrap();
        let want = -cmp.gamma_eff * (n as f64 - 1.0) / 2.0;
        assert!((e.eigenvalues()[0] - want).abs() < 1e-12);
    }
}
