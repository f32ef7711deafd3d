// SPDX-License-Identifier: Apache-2.0

//! Chain Hamiltonians and disorder realizations.
//!
//! Three closed models share one nearest-neighbour Anderson block:
//!
//! * `Anderson`: on-site energies ε_j on the diagonal, hopping Ω between
//!   neighbours, open boundaries.
//! * `LongRange`: Anderson plus a uniform coupling −γ/2 between every pair of
//!   sites.
//! * `Cavity`: Anderson block for the N sites plus one resonant cavity state
//!   (last index, diagonal 0) coupled with strength g to every site.
//!
//! Energies are in units of Ω with ħ = 1 unless the caller works in raw
//! energy units (e.g. eV); nothing in this module assumes a particular unit.

use std::fmt::Write as _;

use ndarray::Array2;
use num_complex::Complex;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Identifier of the disorder generator, recorded in every output manifest.
pub const RNG_ID: &str =
    "chacha20(rand_chacha 0.3; key=seed LE, stream=index); u=(x>>11)*2^-53; eps=W*(u-1/2)";

/// Coupling constant of the single-mode dipole formula in eV, for a dipole in
/// Debye, a photon energy in eV and a mode volume in nm³ (Gaussian units):
/// `g = K · μ · sqrt(ħω_c / V_c)`.
pub const DIPOLE_COUPLING_EV: f64 = 0.062_623_125_210_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Anderson,
    LongRange,
    Cavity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams<T> {
    /// Per-emitter coupling to the cavity mode.
    pub g: T,
    /// Transition dipole (Debye).
    pub mu: Option<T>,
    /// Photon energy ħω_c (eV).
    pub omega_c: Option<T>,
    /// Mode volume (nm³).
    pub v_c: Option<T>,
}

impl<T: Real> CavityParams<T> {
    pub fn with_coupling(g: T) -> Self {
        Self {
            g,
            mu: None,
            omega_c: None,
            v_c: None,
        }
    }

    /// Derives `g` from the dipole, photon energy and mode volume.
    pub fn from_dipole(mu: T, omega_c: T, v_c: T) -> Result<Self> {
        let g = cavity_coupling(mu, omega_c, v_c)?;
        Ok(Self {
            g,
            mu: Some(mu),
            omega_c: Some(omega_c),
            v_c: Some(v_c),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g > T::zero()) {
            return Err(Error::invalid(format!(
                "cavity coupling g must be positive, got {}",
                self.g
            )));
        }
        if let (Some(mu), Some(w), Some(v)) = (self.mu, self.omega_c, self.v_c) {
            let g = cavity_coupling(mu, w, v)?;
            if ((g - self.g) / g).abs() > T::lit(1e-12) {
                return Err(Error::invalid(format!(
                    "cavity coupling g = {} inconsistent with dipole formula value {}",
                    self.g, g
                )));
            }
        }
        Ok(())
    }
}

/// Static model definition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec<T> {
    pub n_sites: usize,
    /// Nearest-neighbour hopping Ω.
    pub omega: T,
    /// Long-range hopping strength γ. Only used by [`ModelKind::LongRange`].
    pub gamma: T,
    pub kind: ModelKind,
    pub cavity: Option<CavityParams<T>>,
}

impl<T: Real> ChainSpec<T> {
    pub fn anderson(n_sites: usize, omega: T) -> Self {
        Self {
            n_sites,
            omega,
            gamma: T::zero(),
            kind: ModelKind::Anderson,
            cavity: None,
        }
    }

    pub fn long_range(n_sites: usize, omega: T, gamma: T) -> Self {
        Self {
            n_sites,
            omega,
            gamma,
            kind: ModelKind::LongRange,
            cavity: None,
        }
    }

    pub fn cavity(n_sites: usize, omega: T, params: CavityParams<T>) -> Self {
        Self {
            n_sites,
            omega,
            gamma: T::zero(),
            kind: ModelKind::Cavity,
            cavity: Some(params),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::invalid("n_sites must be at least 1"));
        }
        if !self.omega.is_finite() {
            return Err(Error::invalid("omega must be finite"));
        }
        if !(self.gamma >= T::zero()) || !self.gamma.is_finite() {
            return Err(Error::invalid(format!(
                "gamma must be finite and >= 0, got {}",
                self.gamma
            )));
        }
        match (self.kind, &self.cavity) {
            (ModelKind::Cavity, Some(c)) => c.validate(),
            (ModelKind::Cavity, None) => {
                Err(Error::invalid("cavity model requires cavity parameters"))
            }
            (_, Some(_)) => Err(Error::invalid(
                "cavity parameters given for a non-cavity model",
            )),
            (_, None) => Ok(()),
        }
    }

    /// Hilbert-space dimension of the closed Hamiltonian.
    pub fn dim(&self) -> usize {
        match self.kind {
            ModelKind::Cavity => self.n_sites + 1,
            _ => self.n_sites,
        }
    }
}

/// One draw of on-site energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization<T> {
    pub w: T,
    pub seed: u64,
    pub index: u64,
    pub epsilon: Vec<T>,
}

impl<T: Real> DisorderRealization<T> {
    /// A realization with all on-site energies zero.
    pub fn clean(n: usize) -> Self {
        Self {
            w: T::zero(),
            seed: 0,
            index: 0,
            epsilon: vec![T::zero(); n],
        }
    }

    /// Wraps explicit on-site energies (seed and index are recorded as 0).
    pub fn from_energies(w: T, epsilon: Vec<T>) -> Self {
        Self {
            w,
            seed: 0,
            index: 0,
            epsilon,
        }
    }

    /// Same underlying uniform draw, rescaled to disorder strength `w`.
    pub fn rescaled(&self, w: T) -> Self {
        let factor = if self.w > T::zero() {
            w / self.w
        } else {
            T::zero()
        };
        Self {
            w,
            seed: self.seed,
            index: self.index,
            epsilon: self.epsilon.iter().map(|&e| e * factor).collect(),
        }
    }
}

/// Pump, drain and lead parameters of the open chain.
///
/// Site indices are zero-based: the default source is site 0 and the default
/// drain is site N−1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpenSystemConfig<T> {
    pub gamma_p: T,
    pub gamma_d: T,
    pub nu: T,
    pub source_site: usize,
    pub drain_site: usize,
}

impl<T: Real> OpenSystemConfig<T> {
    /// Pumping on the first site, draining (and the second lead) on the last.
    pub fn edges(n_sites: usize, gamma_p: T, gamma_d: T, nu: T) -> Self {
        Self {
            gamma_p,
            gamma_d,
            nu,
            source_site: 0,
            drain_site: n_sites.saturating_sub(1),
        }
    }

    pub fn validate(&self, n_sites: usize) -> Result<()> {
        for (name, v) in [
            ("gamma_p", self.gamma_p),
            ("gamma_d", self.gamma_d),
            ("nu", self.nu),
        ] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.source_site >= n_sites || self.drain_site >= n_sites {
            return Err(Error::invalid(format!(
                "site indices ({}, {}) out of range for {} sites",
                self.source_site, self.drain_site, n_sites
            )));
        }
        if self.source_site == self.drain_site && n_sites > 1 {
            return Err(Error::invalid("source and drain must differ when N > 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpenMode {
    /// −iγ_d/2 on the drain site only.
    Drain,
    /// −iν/2 on both the source and the drain site.
    Scattering,
}

fn chacha_for(seed: u64, index: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Draws N on-site energies uniformly from `[−w/2, w/2)`.
///
/// The result depends only on `(seed, index, w, N)`; the underlying uniform
/// variates depend only on `(seed, index)`, so realizations with the same seed
/// and index but different `w` are rescaled copies of one another.
pub fn sample_disorder<T: Real>(
    spec: &ChainSpec<T>,
    w: T,
    seed: u64,
    index: u64,
) -> Result<DisorderRealization<T>> {
    if !(w >= T::zero()) || !w.is_finite() {
        return Err(Error::invalid(format!(
            "disorder strength must be finite and >= 0, got {w}"
        )));
    }
    let mut rng = chacha_for(seed, index);
    let wf = w.as_f64();
    let epsilon = (0..spec.n_sites)
        .map(|_| {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            T::lit(wf * (u - 0.5))
        })
        .collect();
    Ok(DisorderRealization {
        w,
        seed,
        index,
        epsilon,
    })
}

/// Dense real symmetric Hamiltonian of the closed chain.
pub fn build_hamiltonian<T: Real>(
    spec: &ChainSpec<T>,
    dis: &DisorderRealization<T>,
) -> Result<Array2<T>> {
    spec.validate()?;
    let n = spec.n_sites;
    if dis.epsilon.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: dis.epsilon.len(),
        });
    }
    let dim = spec.dim();
    let mut h = Array2::<T>::zeros((dim, dim));
    let lr = match spec.kind {
        ModelKind::LongRange => -spec.gamma / T::lit(2.0),
        _ => T::zero(),
    };
    for i in 0..n {
        h[[i, i]] = dis.epsilon[i];
        for j in (i + 1)..n {
            let mut v = lr;
            if j == i + 1 {
                v += spec.omega;
            }
            h[[i, j]] = v;
            h[[j, i]] = v;
        }
    }
    if let (ModelKind::Cavity, Some(c)) = (spec.kind, spec.cavity) {
        for i in 0..n {
            h[[i, n]] = c.g;
            h[[n, i]] = c.g;
        }
    }
    Ok(h)
}

/// Adds the anti-Hermitian sink terms of the open chain.
pub fn build_effective<T: Real>(
    h: &Array2<T>,
    open: &OpenSystemConfig<T>,
    mode: OpenMode,
) -> Result<Array2<Complex<T>>> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: h.ncols(),
        });
    }
    open.validate(n)?;
    let mut heff = h.mapv(|x| Complex::new(x, T::zero()));
    let half = T::lit(0.5);
    match mode {
        OpenMode::Drain => {
            heff[[open.drain_site, open.drain_site]].im -= half * open.gamma_d;
        }
        OpenMode::Scattering => {
            heff[[open.source_site, open.source_site]].im -= half * open.nu;
            heff[[open.drain_site, open.drain_site]].im -= half * open.nu;
        }
    }
    Ok(heff)
}

/// Single-mode coupling `g = sqrt(2π μ² ħω_c / V_c)` in eV.
///
/// `mu` in Debye, `omega_c` (the photon energy ħω_c) in eV, `v_c` in nm³.
/// The Gaussian-unit conversion is folded into [`DIPOLE_COUPLING_EV`].
pub fn cavity_coupling<T: Real>(mu: T, omega_c: T, v_c: T) -> Result<T> {
    if !(mu > T::zero() && omega_c > T::zero() && v_c > T::zero()) {
        return Err(Error::invalid(
            "dipole, photon energy and mode volume must be positive",
        ));
    }
    Ok(T::lit(DIPOLE_COUPLING_EV) * mu * (omega_c / v_c).sqrt())
}

/// Long-range coupling that reproduces the polaritonic gap of N emitters
/// coupled with strength g: `γ_eff = 2 g / √N`.
pub fn effective_long_range_coupling<T: Real>(g: T, n: usize) -> T {
    T::lit(2.0) * g / T::of_usize(n).sqrt()
}

/// Row-major text dump with 17 significant digits, one row per line.
pub fn dump_matrix<T: Real>(h: &Array2<T>) -> String {
    let mut out = String::new();
    for row in h.rows() {
        let line: Vec<String> = row.iter().map(|x| format!("{:.16e}", x.as_f64())).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::eig_hermitian;

    fn eigs(h: &Array2<f64>) -> Vec<f64> {
        eig_hermitian(h).unwrap().eigenvalues.to_vec()
    }

    #[test]
    fn zero_disorder_is_zero_vector() {
        let spec = ChainSpec::<f64>::anderson(17, 1.0);
        let d = sample_disorder(&spec, 0.0, 99, 3).unwrap();
        assert!(d.epsilon.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn uniform_moments() {
        let spec = ChainSpec::<f64>::anderson(1_000_000, 1.0);
        let d = sample_disorder(&spec, 1.0, 2024, 0).unwrap();
        let n = d.epsilon.len() as f64;
        let mean = d.epsilon.iter().sum::<f64>() / n;
        let var = d.epsilon.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 4.0 * (1.0 / 12f64.sqrt()) / 1e3, "mean {mean}");
        assert!((var - 1.0 / 12.0).abs() < 0.01 / 12.0, "var {var}");
        assert!(d.epsilon.iter().all(|&e| (-0.5..0.5).contains(&e)));
    }

    #[test]
    fn deterministic_regeneration() {
        let spec = ChainSpec::<f64>::anderson(100, 1.0);
        let a = sample_disorder(&spec, 3.0, 42, 7).unwrap();
        let b = sample_disorder(&spec, 3.0, 42, 7).unwrap();
        assert_eq!(
            a.epsilon.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.epsilon.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        let c = sample_disorder(&spec, 3.0, 42, 8).unwrap();
        assert_ne!(a.epsilon, c.epsilon);
    }

    #[test]
    fn anderson_dimer() {
        let spec = ChainSpec::anderson(2, 0.7);
        let h = build_hamiltonian(&spec, &DisorderRealization::clean(2)).unwrap();
        let e = eigs(&h);
        assert!((e[0] + 0.7).abs() < 1e-14 && (e[1] - 0.7).abs() < 1e-14);
    }

    #[test]
    fn long_range_all_ones_spectrum() {
        let spec = ChainSpec::long_range(4, 0.0, 1.0);
        let h = build_hamiltonian(&spec, &DisorderRealization::clean(4)).unwrap();
        let e = eigs(&h);
        assert!((e[0] + 1.5).abs() < 1e-14);
        for &x in &e[1..] {
            assert!((x - 0.5).abs() < 1e-14);
        }
        assert!((e[1] - e[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn long_range_adds_to_nearest_neighbour() {
        let spec = ChainSpec::long_range(3, 1.0, 0.5);
        let h = build_hamiltonian(&spec, &DisorderRealization::clean(3)).unwrap();
        assert_eq!(h[[0, 1]], 0.75);
        assert_eq!(h[[0, 2]], -0.25);
    }

    #[test]
    fn cavity_star_graph() {
        let spec = ChainSpec::cavity(3, 0.0, CavityParams::with_coupling(1.0));
        let h = build_hamiltonian(&spec, &DisorderRealization::clean(3)).unwrap();
        assert_eq!(h.nrows(), 4);
        let e = eigs(&h);
        let s = 3f64.sqrt();
        assert!((e[0] + s).abs() < 1e-14 && (e[3] - s).abs() < 1e-14);
        assert!(e[1].abs() < 1e-14 && e[2].abs() < 1e-14);
    }

    #[test]
    fn spec_validation() {
        assert!(ChainSpec::<f64>::anderson(0, 1.0).validate().is_err());
        assert!(ChainSpec::<f64>::long_range(3, 1.0, -1.0)
            .validate()
            .is_err());
        let mut s = ChainSpec::<f64>::anderson(3, 1.0);
        s.cavity = Some(CavityParams::with_coupling(1.0));
        assert!(s.validate().is_err());
        s.kind = ModelKind::Cavity;
        s.cavity = None;
        assert!(s.validate().is_err());
        let bad = CavityParams {
            g: 1.0,
            mu: Some(36.0),
            omega_c: Some(2.0),
            v_c: Some(1e4),
        };
        assert!(ChainSpec::cavity(3, 1.0, bad).validate().is_err());
        let good = CavityParams::<f64>::from_dipole(36.0, 2.0, 1e4).unwrap();
        assert!(ChainSpec::cavity(3, 1.0, good).validate().is_ok());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let spec = ChainSpec::<f64>::anderson(3, 1.0);
        assert!(matches!(
            build_hamiltonian(&spec, &DisorderRealization::clean(4)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn effective_drain_and_scattering() {
        let h = Array2::from_elem((1, 1), 0.3f64);
        let open = OpenSystemConfig::edges(1, 0.0, 1.0, 0.0);
        let heff = build_effective(&h, &open, OpenMode::Drain).unwrap();
        assert_eq!(heff[[0, 0]], Complex::new(0.3, -0.5));

        let spec = ChainSpec::anderson(2, 1.3);
        let h = build_hamiltonian(&spec, &DisorderRealization::clean(2)).unwrap();
        let none = OpenSystemConfig::edges(2, 1.0, 0.0, 0.0);
        let same = build_effective(&h, &none, OpenMode::Drain).unwrap();
        assert!(same
            .iter()
            .zip(h.iter())
            .all(|(a, b)| a.re == *b && a.im == 0.0));
        let open = OpenSystemConfig::edges(2, 0.0, 0.0, 1.3);
        let s = build_effective(&h, &open, OpenMode::Scattering).unwrap();
        assert_eq!(s[[0, 0]], Complex::new(0.0, -0.65));
        assert_eq!(s[[1, 1]], Complex::new(0.0, -0.65));
        assert_eq!(s[[0, 1]], Complex::new(1.3, 0.0));

        let neg = OpenSystemConfig::edges(2, 0.0, -1.0, 0.0);
        assert!(build_effective(&h, &neg, OpenMode::Drain).is_err());
    }

    #[test]
    fn dipole_coupling_reported_values() {
        // g_c = sqrt(N) g = 3.188 eV at N = 1e4, V_c = 1e4 nm³
        let g = cavity_coupling(36.0f64, 2.0, 1e4).unwrap();
        assert!((100.0 * g - 3.188).abs() < 5e-4, "g_c = {}", 100.0 * g);
        // fixed g_c with V_c ∝ N: N = 1e3 ⇒ V_c = 1e3 nm³, g ≈ 0.1008 eV
        let g3 = cavity_coupling(36.0f64, 2.0, 1e3).unwrap();
        assert!((g3 - 0.1008).abs() < 5e-5, "g = {g3}");
        let g2 = cavity_coupling(36.0f64, 2.0, 2e4).unwrap();
        assert!((g2 / g - 1.0 / 2f64.sqrt()).abs() < 1e-14);
        assert!(cavity_coupling(0.0f64, 2.0, 1.0).is_err());
    }

    #[test]
    fn effective_coupling_values() {
        let gc = 3.188f64;
        let n = 10_000usize;
        let g = gc / (n as f64).sqrt();
        assert!((effective_long_range_coupling(g, n) - 2.0 * gc / 1e4).abs() < 1e-15);
        let g = 1.0 / 1e5f64.sqrt();
        assert!((effective_long_range_coupling(g, 100_000) - 2e-5).abs() < 1e-18);
        assert_eq!(effective_long_range_coupling(1.0f64, 4), 1.0);
    }

    #[test]
    fn matrix_dump_round_trips() {
        let spec = ChainSpec::long_range(3, 1.0, 0.3);
        let d = sample_disorder(&spec, 2.0, 1, 1).unwrap();
        let h = build_hamiltonian(&spec, &d).unwrap();
        let text = dump_matrix(&h);
        let parsed: Vec<f64> = text
            .split_whitespace()
            .map(|t| t.parse().unwrap())
            .collect();
        assert_eq!(parsed, h.iter().copied().collect::<Vec<_>>());
    }
}
