// SPDX-License-Identifier: Apache-2.0

//! Complex-symmetric rank-one update `diag(d) + ρ w wᵀ`.
//!
//! Roots of `1 + ρ Σ_k w_k² / (d_k − λ) = 0` are found with simultaneous
//! Aberth–Ehrlich iteration. Each root is kept as `d_p + δ` for a reference
//! pole `p`, so a root sitting extremely close to its pole (a resonance with a
//! tiny width) keeps full relative accuracy in `δ`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_SWEEPS: usize = 80;

#[derive(Debug, Clone)]
pub(crate) struct RankOne<T> {
    d: Vec<Complex<T>>,
    /// Weights after cluster compression and the Löwner correction.
    w: Vec<Complex<T>>,
    active: Vec<bool>,
    pole: Vec<usize>,
    delta: Vec<Complex<T>>,
    reflectors: Vec<(Vec<usize>, Vec<Complex<T>>)>,
}

fn zero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

impl<T: Real> RankOne<T> {
    pub(crate) fn solve(d: &[Complex<T>], w: &[Complex<T>], rho: Complex<T>) -> Result<Self> {
        let n = d.len();
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: w.len(),
            });
        }
        if d.iter()
            .chain(w)
            .any(|x| !x.re.is_finite() || !x.im.is_finite())
        {
            return Err(Error::invalid("non-finite input to rank-one update"));
        }
        let mut w = w.to_vec();
        let eps = T::epsilon();
        let dmax = d.iter().fold(T::zero(), |m, x| m.max(x.norm()));
        let tol = T::lit(8.0) * eps * dmax.max(T::min_positive_value());

        let reflectors = compress_clusters(d, &mut w, tol)?;
        let active: Vec<bool> = w
            .iter()
            .map(|x| {
                let x2 = x * x;
                (rho * x2).norm() > T::zero() && x2.norm() > T::zero()
            })
            .collect();

        let mut s = Self {
            d: d.to_vec(),
            w,
            active,
            pole: (0..n).collect(),
            delta: vec![zero(); n],
            reflectors,
        };
        s.iterate(rho)?;
        s.lowner(rho);
        Ok(s)
    }

    /// Real symmetric update `diag(d) + ρ w wᵀ`. Roots interlace with the
    /// poles, so each one is bracketed and found by safeguarded Newton steps.
    /// Weights below the usual deflation threshold are dropped.
    pub(crate) fn solve_real(d: &[T], w: &[T], rho: T) -> Result<Self> {
        let n = d.len();
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: w.len(),
            });
        }
        if d.iter().chain(w).any(|x| !x.is_finite()) || !rho.is_finite() {
            return Err(Error::invalid("non-finite input to rank-one update"));
        }
        let dc: Vec<Complex<T>> = d.iter().map(|&x| Complex::new(x, T::zero())).collect();
        let mut wc: Vec<Complex<T>> = w.iter().map(|&x| Complex::new(x, T::zero())).collect();
        let eps = T::epsilon();
        let dmax = d.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let reflectors = compress_clusters(
            &dc,
            &mut wc,
            T::lit(8.0) * eps * dmax.max(T::min_positive_value()),
        )?;
        let wn = wc.iter().map(|x| x.re * x.re).sum::<T>().sqrt();
        let cut = T::lit(8.0) * eps * dmax.max(rho.abs() * wn * wn);
        let active: Vec<bool> = wc
            .iter()
            .map(|x| rho.abs() * wn * x.re.abs() > cut)
            .collect();
        let mut s = Self {
            d: dc,
            w: wc,
            active,
            pole: (0..n).collect(),
            delta: vec![zero(); n],
            reflectors,
        };
        s.bracketed(rho)?;
        s.lowner(Complex::new(rho, T::zero()));
        Ok(s)
    }

    fn bracketed(&mut self, rho: T) -> Result<()> {
        let mut idx: Vec<usize> = (0..self.d.len()).filter(|&k| self.active[k]).collect();
        idx.sort_by(|&a, &b| self.d[a].re.partial_cmp(&self.d[b].re).unwrap());
        let m = idx.len();
        if m == 0 {
            return Ok(());
        }
        let a: Vec<T> = idx.iter().map(|&k| self.d[k].re).collect();
        let w2: Vec<T> = idx.iter().map(|&k| self.w[k].re * self.w[k].re).collect();
        let spread = rho.abs() * w2.iter().copied().sum::<T>();
        let half = T::lit(0.5);
        let mut diff = vec![T::zero(); m];
        for r in 0..m {
            // bracket (lo, hi) between consecutive poles; the outermost root
            // lies within ρ‖w‖² of the extreme pole
            let (lo, hi) = if rho < T::zero() {
                if r == 0 {
                    (None, Some(0))
                } else {
                    (Some(r - 1), Some(r))
                }
            } else if r + 1 == m {
                (Some(r), None)
            } else {
                (Some(r), Some(r + 1))
            };
            let (p, mut dlo, mut dhi) = match (lo, hi) {
                (Some(l), Some(h)) => {
                    let gap = a[h] - a[l];
                    // f is monotone on the interval; its sign at the midpoint
                    // selects the nearer pole
                    let mid = a[l] + half * gap;
                    let f = T::one() + rho * (0..m).map(|k| w2[k] / (a[k] - mid)).sum::<T>();
                    let right = if rho < T::zero() {
                        f > T::zero()
                    } else {
                        f < T::zero()
                    };
                    if right {
                        (h, -half * gap, T::zero())
                    } else {
                        (l, T::zero(), half * gap)
                    }
                }
                (None, Some(h)) => (h, -spread, T::zero()),
                (Some(l), None) => (l, T::zero(), spread),
                (None, None) => unreachable!(),
            };
            for k in 0..m {
                diff[k] = a[k] - a[p];
            }
            // h(δ) = −δ (1 + ρ Σ_{k≠p} w_k²/(d_k − λ)) + ρ w_p², λ = d_p + δ
            let eval = |dl: T, diff: &[T]| {
                let mut s = T::zero();
                let mut s2 = T::zero();
                for k in 0..m {
                    if k != p {
                        let inv = (diff[k] - dl).recip();
                        s += w2[k] * inv;
                        s2 += w2[k] * inv * inv;
                    }
                }
                let g = -dl * (T::one() + rho * s) + rho * w2[p];
                let gp = -(T::one() + rho * s) - dl * rho * s2;
                (g, gp)
            };
            // h(0) = ρ w_p² fixes the sign on the pole side of the bracket
            let pole_hi = dhi == T::zero();
            let lo_sign = if pole_hi {
                rho < T::zero()
            } else {
                rho > T::zero()
            };
            let mut dl = (rho * w2[p]).max(dlo).min(dhi);
            if dl == dlo || dl == dhi {
                dl = half * (dlo + dhi);
            }
            let mut done = false;
            for _ in 0..400 {
                let (g, gp) = eval(dl, &diff);
                if g == T::zero() {
                    done = true;
                    break;
                }
                if (g > T::zero()) == lo_sign {
                    dlo = dl;
                } else {
                    dhi = dl;
                }
                let mut next = dl - g / gp;
                if !(next > dlo && next < dhi) || !next.is_finite() {
                    next = half * (dlo + dhi);
                }
                let step = (next - dl).abs();
                dl = next;
                if step <= T::lit(4.0) * T::epsilon() * dl.abs()
                    || dhi - dlo <= T::lit(4.0) * T::epsilon() * dl.abs()
                {
                    done = true;
                    break;
                }
            }
            if !done {
                return Err(Error::NoConvergence(format!(
                    "bracketed secular root {r} did not converge"
                )));
            }
            self.pole[idx[r]] = idx[p];
            self.delta[idx[r]] = Complex::new(dl, T::zero());
        }
        Ok(())
    }

    fn iterate(&mut self, rho: Complex<T>) -> Result<()> {
        let idx: Vec<usize> = (0..self.d.len()).filter(|&k| self.active[k]).collect();
        let m = idx.len();
        if m == 0 {
            return Ok(());
        }
        let one = Complex::new(T::one(), T::zero());
        let w2: Vec<Complex<T>> = idx.iter().map(|&k| self.w[k] * self.w[k]).collect();
        let da: Vec<Complex<T>> = idx.iter().map(|&k| self.d[k]).collect();
        // local pole index and offset per active root
        let mut p: Vec<usize> = (0..m).collect();
        let mut dl: Vec<Complex<T>> = (0..m).map(|j| rho * w2[j]).collect();
        let mut diff = vec![zero::<T>(); m];
        let tol = T::lit(8.0) * T::epsilon();
        let mut worst = T::infinity();
        for _ in 0..MAX_SWEEPS {
            worst = T::zero();
            for j in 0..m {
                // d_k − λ_j, relative to the current reference pole
                let mut pj = p[j];
                let mut best = T::infinity();
                let mut arg = pj;
                for k in 0..m {
                    diff[k] = (da[k] - da[pj]) - dl[j];
                    let a = diff[k].norm();
                    if a < best {
                        best = a;
                        arg = k;
                    }
                }
                if arg != pj {
                    dl[j] = -diff[arg];
                    pj = arg;
                    p[j] = pj;
                    for k in 0..m {
                        diff[k] = (da[k] - da[pj]) - dl[j];
                    }
                }
                let mut s = zero::<T>();
                let mut s2 = zero::<T>();
                let mut s1 = zero::<T>();
                for k in 0..m {
                    if k == pj {
                        continue;
                    }
                    let inv = diff[k].inv();
                    let t = w2[k] * inv;
                    s += t;
                    s2 += t * inv;
                    s1 -= inv;
                }
                let delta = dl[j];
                let a = one + rho * s;
                let g = -delta * a + rho * w2[pj];
                if g.norm() == T::zero() {
                    continue;
                }
                let gp = -a - delta * rho * s2;
                let newton = (s1 + gp / g).inv();
                let mut ab = zero::<T>();
                for i in 0..m {
                    if i != j {
                        ab += ((da[pj] - da[p[i]]) + (delta - dl[i])).inv();
                    }
                }
                let corr = newton / (one - newton * ab);
                if !corr.re.is_finite() || !corr.im.is_finite() {
                    return Err(Error::NoConvergence("non-finite Aberth correction".into()));
                }
                dl[j] = delta - corr;
                let rel = corr.norm() / dl[j].norm().max(T::min_positive_value());
                if rel > worst {
                    worst = rel;
                }
            }
            if worst <= tol {
                break;
            }
        }
        if !(worst <= T::epsilon().sqrt()) {
            return Err(Error::NoConvergence(format!(
                "secular roots stalled at relative step {worst}"
            )));
        }
        if worst > tol {
            log::debug!("secular iteration accepted at relative step {worst}");
        }
        for j in 0..m {
            self.pole[idx[j]] = idx[p[j]];
            self.delta[idx[j]] = dl[j];
        }
        Ok(())
    }

    /// Recomputes the weights from the converged roots so that the computed
    /// eigenvectors are mutually biorthogonal to working precision.
    fn lowner(&mut self, rho: Complex<T>) {
        let idx: Vec<usize> = (0..self.d.len()).filter(|&k| self.active[k]).collect();
        let mut fresh = Vec::with_capacity(idx.len());
        for &k in &idx {
            let dk = self.d[k];
            let mut logmod = T::zero();
            let mut phase = Complex::new(T::one(), T::zero());
            let lam_k = (self.d[self.pole[k]] - dk) + self.delta[k];
            let f = lam_k / rho;
            logmod += f.norm().ln();
            phase *= f / f.norm();
            for &j in &idx {
                if j == k {
                    continue;
                }
                let num = (self.d[self.pole[j]] - dk) + self.delta[j];
                let den = self.d[j] - dk;
                let q = num / den;
                let a = q.norm();
                logmod += a.ln();
                phase *= q / a;
            }
            let h = logmod / T::lit(2.0);
            let half = phase.sqrt();
            let cand = half * h.exp();
            let old = self.w[k];
            let cand = if (cand - old).norm() <= (cand + old).norm() {
                cand
            } else {
                -cand
            };
            let ok = cand.re.is_finite()
                && cand.im.is_finite()
                && (cand - old).norm() <= T::lit(1e-4) * old.norm();
            fresh.push(if ok { cand } else { old });
        }
        for (&k, v) in idx.iter().zip(fresh) {
            self.w[k] = v;
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.d.len()
    }

    /// Reference pole and offset of root `j`.
    pub(crate) fn root(&self, j: usize) -> (usize, Complex<T>) {
        (self.pole[j], self.delta[j])
    }

    pub(crate) fn eigenvalue(&self, j: usize) -> Complex<T> {
        self.d[self.pole[j]] + self.delta[j]
    }

    /// Eigenvector of root `j` in the pole basis, normalized so that `cᵀc = 1`.
    pub(crate) fn coefficients(&self, j: usize, out: &mut [Complex<T>]) -> Result<()> {
        let n = self.len();
        out.iter_mut().for_each(|x| *x = zero());
        if !self.active[j] {
            out[j] = Complex::new(T::one(), T::zero());
        } else {
            let p = self.pole[j];
            let dl = self.delta[j];
            let mut ss = zero::<T>();
            let mut sa = T::zero();
            for k in 0..n {
                if self.active[k] {
                    let c = self.w[k] / ((self.d[k] - self.d[p]) - dl);
                    out[k] = c;
                    ss += c * c;
                    sa += c.norm_sqr();
                }
            }
            if !(ss.norm() > T::epsilon() * sa) {
                return Err(Error::PairingFailure(format!(
                    "self-orthogonal eigenvector at root {j}: |cᵀc| = {} vs |c|² = {}",
                    ss.norm(),
                    sa
                )));
            }
            let s = ss.sqrt().inv();
            out.iter_mut().for_each(|x| *x *= s);
        }
        for (cl, u) in &self.reflectors {
            let uu: Complex<T> = u.iter().map(|x| x * x).fold(zero(), |a, b| a + b);
            let uc: Complex<T> = cl.iter().zip(u).fold(zero(), |a, (&i, x)| a + x * out[i]);
            let f = uc * T::lit(2.0) / uu;
            for (&i, x) in cl.iter().zip(u) {
                out[i] -= x * f;
            }
        }
        Ok(())
    }
}

/// Merges numerically equal poles: within each cluster a complex-orthogonal
/// reflector moves all weight onto the first member and zeroes the rest.
fn compress_clusters<T: Real>(
    d: &[Complex<T>],
    w: &mut [Complex<T>],
    tol: T,
) -> Result<Vec<(Vec<usize>, Vec<Complex<T>>)>> {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        d[a].re
            .partial_cmp(&d[b].re)
            .unwrap()
            .then(d[a].im.partial_cmp(&d[b].im).unwrap())
    });
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && (d[order[j]] - d[order[j - 1]]).norm() <= tol {
            j += 1;
        }
        let cl: Vec<usize> = order[i..j].to_vec();
        i = j;
        if cl.len() < 2 {
            continue;
        }
        let wc: Vec<Complex<T>> = cl.iter().map(|&k| w[k]).collect();
        let wt: Complex<T> = wc.iter().map(|x| x * x).fold(zero(), |a, b| a + b);
        let wa: T = wc.iter().map(|x| x.norm_sqr()).sum();
        if !(wa > T::zero()) {
            continue;
        }
        if wt.norm() < T::lit(1e-8) * wa {
            return Err(Error::PairingFailure(
                "isotropic weight on a degenerate pole cluster".into(),
            ));
        }
        let s0 = wt.sqrt();
        let s = if (wc[0] - s0).norm() >= (wc[0] + s0).norm() {
            s0
        } else {
            -s0
        };
        let mut u = wc;
        u[0] -= s;
        let uu: Complex<T> = u.iter().map(|x| x * x).fold(zero(), |a, b| a + b);
        if uu.norm() > T::epsilon() * wa {
            w[cl[0]] = s;
            for &k in &cl[1..] {
                w[k] = zero();
            }
            out.push((cl, u));
        }
    }
    Ok(out)
}
