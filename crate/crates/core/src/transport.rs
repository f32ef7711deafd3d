// SPDX-License-Identifier: Apache-2.0

//! Transfer time, steady-state current and transmission.
//!
//! Units: ħ = 1, so rates and energies share units and times are inverse
//! energies.

use ndarray::Array2;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{OpenMode, OpenSystemConfig};
use crate::scalar::{cplx, re, Real};
use crate::spectral::{project_open, HermitianSpectrum, Resonances};

/// Largest Hilbert space (chain plus vacuum) accepted by the Lindblad solver.
pub const LINDBLAD_MAX_DIM: usize = 64;

/// Reported currents are floored here before taking logarithms.
pub const CURRENT_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportRecord<T> {
    pub tau: T,
    pub current: T,
    pub t_int: Option<T>,
    pub t_of_e: Option<Vec<(T, T)>>,
    pub seed: u64,
    pub index: u64,
    pub w: T,
}

/// Edge amplitudes `⟨drain|r_k⟩⟨r̃_k|source⟩`.
fn edge_amplitudes<T: Real, S: Resonances<T>>(
    spec: &S,
    source: usize,
    drain: usize,
) -> Result<Vec<Complex<T>>> {
    let r = spec.right_at(drain)?;
    let l = spec.left_at(source)?;
    Ok(r.iter().zip(&l).map(|(a, b)| a * b).collect())
}

/// Average transfer time `τ = γ_d ∫ t |Ψ_drain(t)|² dt` for an excitation
/// starting on `source`, from the resonance expansion of the drain-mode
/// effective Hamiltonian.
pub fn transfer_time<T: Real, S: Resonances<T>>(
    spec: &S,
    source: usize,
    drain: usize,
    gamma_d: T,
) -> Result<T> {
    if !(gamma_d > T::zero()) {
        return Err(Error::invalid("transfer time needs a positive drain rate"));
    }
    let n = spec.len();
    let a = edge_amplitudes(spec, source, drain)?;
    let mut x = vec![cplx(T::zero(), T::zero()); n];
    let mut sum = cplx(T::zero(), T::zero());
    let mut mag = T::zero();
    for k in 0..n {
        if a[k] == cplx(T::zero(), T::zero()) {
            continue;
        }
        for j in 0..n {
            x[j] = spec.diff_conj(k, j);
        }
        for j in 0..n {
            if a[j] == cplx(T::zero(), T::zero()) {
                continue;
            }
            let xj = x[j];
            // −a_k a_j* / x², split to avoid underflow of x²
            let t = -(a[k] / xj) * (a[j].conj() / xj);
            if !(t.re.is_finite() && t.im.is_finite()) {
                let width = -T::lit(2.0) * spec.eigenvalue(k).im;
                return Err(Error::ZeroWidth {
                    index: k,
                    width: width.as_f64(),
                });
            }
            sum += t;
            mag += t.norm();
        }
    }
    let tau = gamma_d * sum.re;
    if sum.im.abs() > T::lit(1e-8) * sum.re.abs().max(T::epsilon() * mag) {
        log::warn!(
            "transfer time has imaginary residue {} against {}",
            sum.im,
            sum.re
        );
    }
    if !(tau > T::zero()) {
        return Err(Error::NoConvergence(format!(
            "non-positive transfer time {tau}"
        )));
    }
    Ok(tau)
}

/// `I = γ_p / (γ_p τ + 1)`.
pub fn steady_current<T: Real>(tau: T, gamma_p: T) -> T {
    if gamma_p == T::zero() {
        return T::zero();
    }
    if tau.is_infinite() {
        return T::zero();
    }
    gamma_p / (gamma_p * tau + T::one())
}

fn two_sum<T: Real>(a: T, b: T) -> (T, T) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Compensated accumulator carrying roughly twice the working precision.
#[derive(Clone, Copy)]
struct Dot2<T> {
    hi: T,
    lo: T,
}

impl<T: Real> Dot2<T> {
    fn new(x: T) -> Self {
        Dot2 {
            hi: x,
            lo: T::zero(),
        }
    }

    fn add_prod(&mut self, a: T, b: T) {
        let p = a * b;
        let e = a.mul_add(b, -p);
        let (s, t) = two_sum(self.hi, p);
        self.hi = s;
        self.lo += t + e;
    }

    fn value(self) -> T {
        self.hi + self.lo
    }
}

/// LU solve of the column-major system `A x = b` followed by iterative
/// refinement with compensated residuals.
fn refined_solve<T: Real>(n: usize, a: &[Complex<T>], b: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    let mut lu = a.to_vec();
    let mut ipiv = vec![0i32; n];
    T::getrf_c(n, &mut lu, &mut ipiv)?;
    let mut x = b.to_vec();
    T::getrs_c(n, 1, &lu, &ipiv, &mut x)?;
    let cols: Vec<Vec<(usize, Complex<T>)>> = (0..n)
        .map(|j| {
            (0..n)
                .filter_map(|i| {
                    Some((i, a[i + j * n])).filter(|(_, v)| v.re != T::zero() || v.im != T::zero())
                })
                .collect()
        })
        .collect();
    let mut last = T::infinity();
    for _ in 0..10 {
        let mut re_acc: Vec<Dot2<T>> = b.iter().map(|v| Dot2::new(v.re)).collect();
        let mut im_acc: Vec<Dot2<T>> = b.iter().map(|v| Dot2::new(v.im)).collect();
        for (j, col) in cols.iter().enumerate() {
            let xj = x[j];
            for &(i, v) in col {
                re_acc[i].add_prod(-v.re, xj.re);
                re_acc[i].add_prod(v.im, xj.im);
                im_acc[i].add_prod(-v.re, xj.im);
                im_acc[i].add_prod(-v.im, xj.re);
            }
        }
        let mut r: Vec<Complex<T>> = re_acc
            .iter()
            .zip(&im_acc)
            .map(|(p, q)| cplx(p.value(), q.value()))
            .collect();
        T::getrs_c(n, 1, &lu, &ipiv, &mut r)?;
        let scale = x.iter().fold(T::zero(), |m, v| m.max(v.norm()));
        let floor = scale * T::epsilon() * T::epsilon();
        let change = x.iter().zip(&r).fold(T::zero(), |m, (xi, di)| {
            m.max(di.norm() / (xi.norm() + floor))
        });
        for (xi, di) in x.iter_mut().zip(&r) {
            *xi += *di;
        }
        if change <= T::epsilon() || change >= last {
            break;
        }
        last = change;
    }
    Ok(x)
}

/// Steady-state current from the full Lindblad master equation on the chain
/// plus vacuum, with pumping `|source⟩⟨0|` and draining `|0⟩⟨drain|`.
///
/// Dense solve in dimension `(N+1)²`; intended as a reference for small N.
pub fn lindblad_steady_current<T: Real>(h: &Array2<T>, open: &OpenSystemConfig<T>) -> Result<T> {
    let n = h.nrows();
    open.validate(n)?;
    let d = n + 1;
    if d > LINDBLAD_MAX_DIM {
        return Err(Error::SizeLimit {
            what: "Lindblad dimension",
            got: d,
            limit: LINDBLAD_MAX_DIM,
        });
    }
    if open.gamma_p == T::zero() && open.gamma_d == T::zero() {
        return Err(Error::SingularLiouvillian(
            "both pump and drain rates vanish".into(),
        ));
    }
    // vacuum is index 0, chain site s is index s + 1
    let mut hf = Array2::<Complex<T>>::zeros((d, d));
    for i in 0..n {
        for j in 0..n {
            hf[[i + 1, j + 1]] = re(h[[i, j]]);
        }
    }
    let half = T::lit(0.5);
    let mut lp = Array2::<Complex<T>>::zeros((d, d));
    lp[[open.source_site + 1, 0]] = re((open.gamma_p * half).sqrt());
    let mut ld = Array2::<Complex<T>>::zeros((d, d));
    ld[[0, open.drain_site + 1]] = re((open.gamma_d * half).sqrt());

    let dd = d * d;
    // column-major superoperator acting on row-major vec(ρ)
    let mut a = vec![cplx(T::zero(), T::zero()); dd * dd];
    let eye = Array2::<Complex<T>>::eye(d);
    let minus_i = cplx(T::zero(), -T::one());
    // vec(A ρ B) = (A ⊗ Bᵀ) vec(ρ)
    let mut add = |coef: Complex<T>, x: &Array2<Complex<T>>, y: &Array2<Complex<T>>| {
        for i in 0..d {
            for k in 0..d {
                let xik = x[[i, k]];
                if xik == cplx(T::zero(), T::zero()) {
                    continue;
                }
                for j in 0..d {
                    for l in 0..d {
                        let ylj = y[[l, j]];
                        if ylj == cplx(T::zero(), T::zero()) {
                            continue;
                        }
                        let row = i * d + j;
                        let col = k * d + l;
                        a[row + col * dd] += coef * xik * ylj;
                    }
                }
            }
        }
    };
    add(minus_i, &hf, &eye);
    add(-minus_i, &eye, &hf);
    for l in [&lp, &ld] {
        let ldag = l.t().mapv(|x| x.conj());
        let ldl = ldag.dot(l);
        add(re(-T::one()), &ldl, &eye);
        add(re(-T::one()), &eye, &ldl);
        add(re(T::lit(2.0)), l, &ldag);
    }
    // trace condition replaces the equation for ρ_00
    for col in 0..dd {
        a[col * dd] = cplx(T::zero(), T::zero());
    }
    for i in 0..d {
        a[(i * d + i) * dd] = re(T::one());
    }
    let mut rhs = vec![cplx(T::zero(), T::zero()); dd];
    rhs[0] = re(T::one());
    let x = refined_solve(dd, &a, &rhs).map_err(|e| match e {
        Error::Lapack { info, .. } if info > 0 => {
            Error::SingularLiouvillian(format!("LU pivot {info} vanished"))
        }
        other => other,
    })?;
    let m = open.drain_site + 1;
    Ok(open.gamma_d * x[m * d + m].re)
}

/// Transmission `T(E) = |ν Σ_r ⟨source|r⟩⟨r̃|drain⟩ / (E − ℰ_r)|²` from a
/// scattering-mode decomposition.
pub fn transmission_at<T: Real, S: Resonances<T>>(
    spec: &S,
    e: T,
    nu: T,
    source: usize,
    drain: usize,
) -> Result<T> {
    if nu == T::zero() {
        return Ok(T::zero());
    }
    let r = spec.right_at(source)?;
    let l = spec.left_at(drain)?;
    let mut z = cplx(T::zero(), T::zero());
    for k in 0..spec.len() {
        let (b, d) = spec.split(k);
        let den = re(e - b) - d;
        if den.norm() == T::zero() {
            return Err(Error::ZeroWidth {
                index: k,
                width: 0.0,
            });
        }
        z += r[k] * l[k] / den;
    }
    Ok((z * nu).norm_sqr())
}

/// `T(E)` sampled on `energies`.
pub fn transmission_curve<T: Real, S: Resonances<T>>(
    spec: &S,
    energies: &[T],
    nu: T,
    source: usize,
    drain: usize,
) -> Result<Vec<(T, T)>> {
    energies
        .iter()
        .map(|&e| Ok((e, transmission_at(spec, e, nu, source, drain)?)))
        .collect()
}

/// `T(E) = |ν [(E − H_eff)⁻¹]_{source, drain}|²` by a direct linear solve.
pub fn transmission_resolvent<T: Real>(
    heff: &Array2<Complex<T>>,
    e: T,
    nu: T,
    source: usize,
    drain: usize,
) -> Result<T> {
    let n = heff.nrows();
    if source >= n || drain >= n {
        return Err(Error::invalid("site index out of range"));
    }
    let mut a = vec![cplx(T::zero(), T::zero()); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut v = -heff[[i, j]];
            if i == j {
                v += re(e);
            }
            a[i + j * n] = v;
        }
    }
    let mut b = vec![cplx(T::zero(), T::zero()); n];
    b[drain] = re(T::one());
    T::gesv_c(n, 1, &mut a, &mut b)?;
    Ok((b[source] * nu).norm_sqr())
}

/// Integrated transmission `∫ T(E) dE` from the resonance expansion:
/// `2πν² Σ_{r,k} a_r a_k* / [(Γ_r + Γ_k)/2 − i(E_k − E_r)]` with
/// `a_r = ⟨source|r⟩⟨r̃|drain⟩`.
pub fn integrated_transmission<T: Real, S: Resonances<T>>(
    spec: &S,
    nu: T,
    source: usize,
    drain: usize,
) -> Result<T> {
    if nu == T::zero() {
        return Ok(T::zero());
    }
    let n = spec.len();
    let r = spec.right_at(source)?;
    let l = spec.left_at(drain)?;
    let a: Vec<Complex<T>> = r.iter().zip(&l).map(|(x, y)| x * y).collect();
    let mut sum = cplx(T::zero(), T::zero());
    let mut mag = T::zero();
    for k in 0..n {
        if a[k] == cplx(T::zero(), T::zero()) {
            continue;
        }
        for j in 0..n {
            if a[j] == cplx(T::zero(), T::zero()) {
                continue;
            }
            // (Γ_r + Γ_k)/2 − i(E_k − E_r) = i (λ_k* − λ_r)... written via λ_r − λ_k*
            let x = spec.diff_conj(j, k);
            // λ_j − λ_k* = (E_j − E_k) − i(Γ_j + Γ_k)/2, so den = i·x
            let den = cplx(-x.im, x.re);
            if den.norm() == T::zero() {
                let width = -T::lit(2.0) * spec.eigenvalue(k).im;
                return Err(Error::ZeroWidth {
                    index: k,
                    width: width.as_f64(),
                });
            }
            let t = a[j] * a[k].conj() / den;
            sum += t;
            mag += t.norm();
        }
    }
    let val = T::lit(2.0) * T::PI() * nu * nu * sum.re;
    if sum.im.abs() > T::lit(1e-8) * sum.re.abs().max(T::epsilon() * mag) {
        log::warn!(
            "integrated transmission has imaginary residue {} against {}",
            sum.im,
            sum.re
        );
    }
    Ok(val)
}

/// Transfer time and current of one realization; adds `T_int` when
/// `open.nu > 0`.
pub fn transport_record<T: Real>(
    hs: &HermitianSpectrum<T>,
    open: &OpenSystemConfig<T>,
    seed: u64,
    index: u64,
    w: T,
) -> Result<TransportRecord<T>> {
    let sites = [open.source_site, open.drain_site];
    let drain = project_open(hs, open, OpenMode::Drain, &sites)?;
    let tau = transfer_time(&drain, open.source_site, open.drain_site, open.gamma_d)?;
    let current = steady_current(tau, open.gamma_p);
    let t_int = if open.nu > T::zero() {
        let sc = project_open(hs, open, OpenMode::Scattering, &sites)?;
        Some(integrated_transmission(
            &sc,
            open.nu,
            open.source_site,
            open.drain_site,
        )?)
    } else {
        None
    };
    Ok(TransportRecord {
        tau,
        current,
        t_int,
        t_of_e: None,
        seed,
        index,
        w,
    })
}
