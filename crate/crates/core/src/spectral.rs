// SPDX-License-Identifier: Apache-2.0

//! Dense Hermitian and non-Hermitian eigendecompositions.
//!
//! Left eigenvectors are stored so that `⟨r̃_k|x⟩ = Σ_i left[[i, k]] · x_i`
//! (no conjugation), and the pairing is normalized to `⟨r̃_k|r_k⟩ = 1`.
//!
//! For the open chains built in [`crate::model`] the effective Hamiltonian is
//! `H − iβ Σ_s |s⟩⟨s|` over one or two sites. [`project_open`] solves that
//! case as one or two rank-one updates of the spectrum of `H`, which is both
//! cheaper and more accurate for resonance widths than a dense complex
//! eigensolver, and keeps only the eigenvector components on a few sites.

use ndarray::{Array1, Array2, ShapeBuilder};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::model::{
    build_hamiltonian, ChainSpec, DisorderRealization, ModelKind, OpenMode, OpenSystemConfig,
};
use crate::scalar::{cplx, re, Real};
use crate::secular::RankOne;

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianSpectrum<T> {
    /// Ascending.
    pub eigenvalues: Array1<T>,
    /// Column `k` is the eigenvector of `eigenvalues[k]`.
    pub eigenvectors: Array2<T>,
}

impl<T: Real> HermitianSpectrum<T> {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Builds a spectrum from explicit eigenpairs, sorting by eigenvalue.
    pub fn from_parts(values: Vec<T>, vectors: Array2<T>) -> Result<Self> {
        let n = values.len();
        if vectors.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: vectors.ncols(),
            });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            values[a]
                .partial_cmp(&values[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let eigenvalues = order.iter().map(|&k| values[k]).collect();
        let eigenvectors = vectors.select(ndarray::Axis(1), &order);
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }
}

/// Eigenvalues and eigenvectors of a non-Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BiorthogonalSpectrum<T> {
    /// `E_k − iΓ_k/2`, sorted by real part.
    pub eigenvalues: Array1<Complex<T>>,
    /// Column `k` is `|r_k⟩`.
    pub right: Array2<Complex<T>>,
    /// Column `k` holds the components of `⟨r̃_k|`.
    pub left: Array2<Complex<T>>,
}

/// Resonances with eigenvector components on selected sites.
///
/// Each eigenvalue is stored as `base + delta` with a real `base`, so that
/// differences between nearby eigenvalues keep their relative accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedSpectrum<T> {
    pub base: Vec<T>,
    pub delta: Vec<Complex<T>>,
    pub sites: Vec<usize>,
    /// `right[[k, i]] = ⟨sites[i]|r_k⟩`.
    pub right: Array2<Complex<T>>,
    /// `left[[k, i]] = ⟨r̃_k|sites[i]⟩`.
    pub left: Array2<Complex<T>>,
}

/// Read access shared by the full and projected spectra.
pub trait Resonances<T: Real> {
    fn len(&self) -> usize;

    /// Real reference energy and complex offset of eigenvalue `k`.
    fn split(&self, k: usize) -> (T, Complex<T>);

    fn eigenvalue(&self, k: usize) -> Complex<T> {
        let (b, d) = self.split(k);
        re(b) + d
    }

    /// `λ_k − λ_j*` evaluated without cancellation in the widths.
    fn diff_conj(&self, k: usize, j: usize) -> Complex<T> {
        let (bk, dk) = self.split(k);
        let (bj, dj) = self.split(j);
        re(bk - bj) + (dk - dj.conj())
    }

    /// `⟨site|r_k⟩` for every `k`.
    fn right_at(&self, site: usize) -> Result<Vec<Complex<T>>>;

    /// `⟨r̃_k|site⟩` for every `k`.
    fn left_at(&self, site: usize) -> Result<Vec<Complex<T>>>;
}

impl<T: Real> Resonances<T> for BiorthogonalSpectrum<T> {
    fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    fn split(&self, k: usize) -> (T, Complex<T>) {
        (T::zero(), self.eigenvalues[k])
    }

    fn right_at(&self, site: usize) -> Result<Vec<Complex<T>>> {
        check_site(site, self.right.nrows())?;
        Ok(self.right.row(site).to_vec())
    }

    fn left_at(&self, site: usize) -> Result<Vec<Complex<T>>> {
        check_site(site, self.left.nrows())?;
        Ok(self.left.row(site).to_vec())
    }
}

impl<T: Real> Resonances<T> for ProjectedSpectrum<T> {
    fn len(&self) -> usize {
        self.base.len()
    }

    fn split(&self, k: usize) -> (T, Complex<T>) {
        (self.base[k], self.delta[k])
    }

    fn right_at(&self, site: usize) -> Result<Vec<Complex<T>>> {
        let i = self.column(site)?;
        Ok(self.right.column(i).to_vec())
    }

    fn left_at(&self, site: usize) -> Result<Vec<Complex<T>>> {
        let i = self.column(site)?;
        Ok(self.left.column(i).to_vec())
    }
}

impl<T: Real> ProjectedSpectrum<T> {
    fn column(&self, site: usize) -> Result<usize> {
        self.sites.iter().position(|&s| s == site).ok_or_else(|| {
            Error::invalid(format!(
                "site {site} not among projected sites {:?}",
                self.sites
            ))
        })
    }

    /// Restricts a full decomposition to the given sites.
    pub fn from_full(spec: &BiorthogonalSpectrum<T>, sites: &[usize]) -> Result<Self> {
        let n = spec.eigenvalues.len();
        let mut right = Array2::zeros((n, sites.len()));
        let mut left = Array2::zeros((n, sites.len()));
        for (i, &s) in sites.iter().enumerate() {
            check_site(s, spec.right.nrows())?;
            right.column_mut(i).assign(&spec.right.row(s));
            left.column_mut(i).assign(&spec.left.row(s));
        }
        Ok(Self {
            base: vec![T::zero(); n],
            delta: spec.eigenvalues.to_vec(),
            sites: sites.to_vec(),
            right,
            left,
        })
    }
}

fn check_site(site: usize, n: usize) -> Result<()> {
    if site >= n {
        return Err(Error::invalid(format!(
            "site {site} out of range for dimension {n}"
        )));
    }
    Ok(())
}

fn frobenius<T: Real>(h: &Array2<T>) -> T {
    h.iter().map(|x| *x * *x).sum::<T>().sqrt()
}

fn frobenius_c<T: Real>(h: &Array2<Complex<T>>) -> T {
    h.iter().map(|x| x.norm_sqr()).sum::<T>().sqrt()
}

/// Real symmetric eigendecomposition.
pub fn eig_hermitian<T: Real>(h: &Array2<T>) -> Result<HermitianSpectrum<T>> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: h.ncols(),
        });
    }
    if n == 0 {
        return Err(Error::Empty("matrix has no rows".into()));
    }
    let norm = frobenius(h);
    if !norm.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let tol = T::epsilon() * T::lit(16.0) * norm;
    for i in 0..n {
        for j in (i + 1)..n {
            if (h[[i, j]] - h[[j, i]]).abs() > tol {
                return Err(Error::invalid(format!(
                    "matrix not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    // symmetric, so the row-major buffer is also a valid column-major one
    let mut a: Vec<T> = h.iter().copied().collect();
    let mut w = vec![T::zero(); n];
    T::syevd(n, &mut a, &mut w).map_err(|e| match e {
        Error::Lapack { routine, info } if info > 0 => Error::NoConvergence(format!(
            "{routine} failed to converge (info {info}) for n = {n}, ‖H‖_F = {norm}"
        )),
        other => other,
    })?;
    let v = Array2::from_shape_vec((n, n).f(), a).expect("shape");
    Ok(HermitianSpectrum {
        eigenvalues: Array1::from(w),
        eigenvectors: v,
    })
}

/// Full biorthogonal eigendecomposition of a dense complex matrix.
///
/// Real symmetric input goes through the symmetric solver. Complex symmetric
/// input (`Hᵀ = H`) uses right eigenvectors only, with `left = right`. Any
/// other matrix is solved two-sided; left and right vectors come from the same
/// Schur form, so they are paired by construction and then biorthogonalized
/// within clusters of numerically equal eigenvalues.
pub fn eig_biorthogonal<T: Real>(heff: &Array2<Complex<T>>) -> Result<BiorthogonalSpectrum<T>> {
    let n = heff.nrows();
    if heff.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: heff.ncols(),
        });
    }
    if n == 0 {
        return Err(Error::Empty("matrix has no rows".into()));
    }
    let norm = frobenius_c(heff);
    if !norm.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let sym_tol = T::epsilon() * T::lit(16.0) * norm;

    if heff.iter().all(|x| x.im == T::zero()) {
        let h = heff.mapv(|x| x.re);
        if (0..n).all(|i| (i + 1..n).all(|j| (h[[i, j]] - h[[j, i]]).abs() <= sym_tol)) {
            let hs = eig_hermitian(&h)?;
            let v = hs.eigenvectors.mapv(re);
            return Ok(BiorthogonalSpectrum {
                eigenvalues: hs.eigenvalues.mapv(re),
                right: v.clone(),
                left: v,
            });
        }
    }

    let symmetric =
        (0..n).all(|i| (i + 1..n).all(|j| (heff[[i, j]] - heff[[j, i]]).norm() <= sym_tol));
    // column-major copy
    let mut a: Vec<Complex<T>> = heff.t().iter().copied().collect();
    let mut w = vec![re(T::zero()); n];
    let mut vr = vec![re(T::zero()); n * n];
    let cluster_tol = T::lit(1e4) * T::epsilon() * norm;
    let (vals, right, left) = if symmetric {
        T::geev(n, &mut a, &mut w, None, Some(&mut vr))?;
        let mut r = Array2::from_shape_vec((n, n).f(), vr).expect("shape");
        for cl in clusters(&w, cluster_tol) {
            bilinear_gram_schmidt(&mut r, &cl)?;
        }
        (w, r.clone(), r)
    } else {
        let mut vl = vec![re(T::zero()); n * n];
        T::geev(n, &mut a, &mut w, Some(&mut vl), Some(&mut vr))?;
        let r = Array2::from_shape_vec((n, n).f(), vr).expect("shape");
        let mut l = Array2::from_shape_vec((n, n).f(), vl)
            .expect("shape")
            .mapv(|x| x.conj());
        for cl in clusters(&w, cluster_tol) {
            biorthogonalize(&mut l, &r, &cl, norm)?;
        }
        (w, r, l)
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        vals[a]
            .re
            .partial_cmp(&vals[b].re)
            .unwrap()
            .then(vals[a].im.partial_cmp(&vals[b].im).unwrap())
    });
    Ok(BiorthogonalSpectrum {
        eigenvalues: order.iter().map(|&k| vals[k]).collect(),
        right: right.select(ndarray::Axis(1), &order),
        left: left.select(ndarray::Axis(1), &order),
    })
}

/// Groups indices whose eigenvalues are within `tol` (single linkage).
fn clusters<T: Real>(w: &[Complex<T>], tol: T) -> Vec<Vec<usize>> {
    let n = w.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| w[a].re.partial_cmp(&w[b].re).unwrap());
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for a in 0..n {
        for b in (a + 1)..n {
            if w[order[b]].re - w[order[a]].re > tol {
                break;
            }
            if (w[order[b]] - w[order[a]]).norm() <= tol {
                let (x, y) = (find(&mut parent, order[a]), find(&mut parent, order[b]));
                parent[x] = y;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Makes the columns in `cl` satisfy `rᵀ_a r_b = δ_ab`.
fn bilinear_gram_schmidt<T: Real>(r: &mut Array2<Complex<T>>, cl: &[usize]) -> Result<()> {
    for (ia, &a) in cl.iter().enumerate() {
        for &b in &cl[..ia] {
            let proj: Complex<T> = r
                .column(b)
                .iter()
                .zip(r.column(a).iter())
                .map(|(x, y)| x * y)
                .sum();
            let rb = r.column(b).to_owned();
            r.column_mut(a).zip_mut_with(&rb, |x, y| *x -= proj * y);
        }
        let ss: Complex<T> = r.column(a).iter().map(|x| x * x).sum();
        let sa: T = r.column(a).iter().map(|x| x.norm_sqr()).sum();
        if !(ss.norm() > T::lit(1e-10) * sa) {
            return Err(Error::PairingFailure(format!(
                "eigenvector {a} is nearly self-orthogonal (|rᵀr| = {}); matrix close to defective",
                ss.norm()
            )));
        }
        let s = ss.sqrt().inv();
        r.column_mut(a).mapv_inplace(|x| x * s);
    }
    Ok(())
}

/// Replaces the left vectors of a cluster by the dual basis of its right vectors.
fn biorthogonalize<T: Real>(
    l: &mut Array2<Complex<T>>,
    r: &Array2<Complex<T>>,
    cl: &[usize],
    norm: T,
) -> Result<()> {
    let m = cl.len();
    let n = l.nrows();
    // M[a][b] = Σ_i l[i,a] r[i,b], column-major
    let mut mt = vec![re(T::zero()); m * m];
    for (ia, &a) in cl.iter().enumerate() {
        for (ib, &b) in cl.iter().enumerate() {
            let s: Complex<T> = l
                .column(a)
                .iter()
                .zip(r.column(b).iter())
                .map(|(x, y)| x * y)
                .sum();
            // store Mᵀ so that solving Mᵀ Y = L_cᵀ gives the new left rows
            mt[ia * m + ib] = s;
        }
    }
    let scale = mt.iter().fold(T::zero(), |a, x| a.max(x.norm()));
    if m == 1 {
        if !(mt[0].norm() > T::lit(1e-10) * scale.max(T::min_positive_value()))
            || mt[0].norm() == T::zero()
        {
            return Err(Error::PairingFailure(format!(
                "left/right overlap vanishes for eigenvalue index {} (‖H‖ = {norm})",
                cl[0]
            )));
        }
        let f = mt[0].inv();
        l.column_mut(cl[0]).mapv_inplace(|x| x * f);
        return Ok(());
    }
    // new left column a = Σ_b X[a][b] l_b with X = M⁻¹, i.e. Lnew = Lc · (M⁻¹)ᵀ
    // solve Mᵀ Z = I  ⇒  Z = (M⁻¹)ᵀ
    let mut z = vec![re(T::zero()); m * m];
    for i in 0..m {
        z[i * m + i] = re(T::one());
    }
    T::gesv_c(m, m, &mut mt, &mut z).map_err(|_| {
        Error::PairingFailure(format!(
            "singular left/right overlap in a cluster of {m} eigenvalues"
        ))
    })?;
    let old: Vec<Vec<Complex<T>>> = cl.iter().map(|&a| l.column(a).to_vec()).collect();
    for (ia, &a) in cl.iter().enumerate() {
        for i in 0..n {
            let mut s = re(T::zero());
            for ib in 0..m {
                // Z column-major: Z[ib][ia] at ia*m+ib
                s += old[ib][i] * z[ia * m + ib];
            }
            l[[i, a]] = s;
        }
    }
    Ok(())
}

/// Numeric energy gap `Δ = max_i min_{j≠i} |E_i − E_j|`.
pub fn energy_gap<T: Real>(eigenvalues: &[T]) -> Result<T> {
    let n = eigenvalues.len();
    if n < 2 {
        return Err(Error::invalid("energy gap needs at least two levels"));
    }
    let mut e = eigenvalues.to_vec();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut best = T::zero();
    for i in 0..n {
        let mut near = T::infinity();
        if i > 0 {
            near = near.min(e[i] - e[i - 1]);
        }
        if i + 1 < n {
            near = near.min(e[i + 1] - e[i]);
        }
        best = best.max(near);
    }
    Ok(best)
}

/// Eigenvalues of a real symmetric matrix with the eigenvector components on
/// a few sites only.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRows<T> {
    /// Ascending.
    pub eigenvalues: Array1<T>,
    pub sites: Vec<usize>,
    /// `rows[[i, k]] = ⟨sites[i]|k⟩`.
    pub rows: Array2<T>,
}

impl<T: Real> SpectrumRows<T> {
    fn row(&self, site: usize) -> Result<usize> {
        self.sites.iter().position(|&s| s == site).ok_or_else(|| {
            Error::invalid(format!(
                "site {site} not among stored rows {:?}",
                self.sites
            ))
        })
    }
}

impl<T: Real> HermitianSpectrum<T> {
    /// Keeps only the eigenvector components on `sites`.
    pub fn rows(&self, sites: &[usize]) -> Result<SpectrumRows<T>> {
        let n = self.len();
        let mut rows = Array2::zeros((sites.len(), n));
        for (i, &s) in sites.iter().enumerate() {
            check_site(s, n)?;
            rows.row_mut(i).assign(&self.eigenvectors.row(s));
        }
        Ok(SpectrumRows {
            eigenvalues: self.eigenvalues.clone(),
            sites: sites.to_vec(),
            rows,
        })
    }
}

fn with_edges<T: Real>(open: &OpenSystemConfig<T>, sites: &[usize]) -> Vec<usize> {
    let mut all = sites.to_vec();
    for s in [open.source_site, open.drain_site] {
        if !all.contains(&s) {
            all.push(s);
        }
    }
    all
}

/// Resonances of `H − iβ Σ_s |s⟩⟨s|` from the spectrum of `H`.
///
/// In `Drain` mode the sink sits on `open.drain_site` with `β = γ_d/2`; in
/// `Scattering` mode both `open.source_site` and `open.drain_site` carry
/// `β = ν/2`. Eigenvector components are returned on `sites`. Falls back to
/// the dense solver if the rank-one iteration fails.
pub fn project_open<T: Real>(
    hs: &HermitianSpectrum<T>,
    open: &OpenSystemConfig<T>,
    mode: OpenMode,
    sites: &[usize],
) -> Result<ProjectedSpectrum<T>> {
    let rows = hs.rows(&with_edges(open, sites))?;
    match project_rows(&rows, open, mode, sites) {
        Ok(p) => Ok(p),
        Err(e @ (Error::NoConvergence(_) | Error::PairingFailure(_))) => {
            log::warn!("rank-one update failed ({e}); using dense solver");
            let h = reconstruct(hs);
            let heff = crate::model::build_effective(&h, open, mode)?;
            ProjectedSpectrum::from_full(&eig_biorthogonal(&heff)?, sites)
        }
        Err(e) => Err(e),
    }
}

/// As [`project_open`], from stored eigenvector rows, without the dense
/// fallback. `rows` must cover `sites` and the open sites.
pub fn project_rows<T: Real>(
    rows: &SpectrumRows<T>,
    open: &OpenSystemConfig<T>,
    mode: OpenMode,
    sites: &[usize],
) -> Result<ProjectedSpectrum<T>> {
    let n = rows.eigenvalues.len();
    open.validate(n)?;
    for &s in sites {
        check_site(s, n)?;
    }
    match mode {
        OpenMode::Drain => drain_update(rows, open.drain_site, open.gamma_d / T::lit(2.0), sites),
        OpenMode::Scattering => scattering_update(
            rows,
            open.source_site,
            open.drain_site,
            open.nu / T::lit(2.0),
            sites,
        ),
    }
}

fn reconstruct<T: Real>(hs: &HermitianSpectrum<T>) -> Array2<T> {
    let v = &hs.eigenvectors;
    let n = hs.len();
    let mut h = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let s: T = (0..n)
                .map(|k| v[[i, k]] * hs.eigenvalues[k] * v[[j, k]])
                .sum();
            h[[i, j]] = s;
            h[[j, i]] = s;
        }
    }
    h
}

fn drain_update<T: Real>(
    hs: &SpectrumRows<T>,
    drain: usize,
    beta: T,
    sites: &[usize],
) -> Result<ProjectedSpectrum<T>> {
    let n = hs.eigenvalues.len();
    let v = &hs.rows;
    let dr = hs.row(drain)?;
    let idx: Vec<usize> = sites.iter().map(|&s| hs.row(s)).collect::<Result<_>>()?;
    let d: Vec<Complex<T>> = hs.eigenvalues.iter().map(|&e| re(e)).collect();
    let z: Vec<Complex<T>> = (0..n).map(|k| re(v[[dr, k]])).collect();
    let ro = RankOne::solve(&d, &z, cplx(T::zero(), -beta))?;
    let mut right = Array2::zeros((n, sites.len()));
    let mut c = vec![re(T::zero()); n];
    let mut base = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    for j in 0..n {
        ro.coefficients(j, &mut c)?;
        for (i, &r) in idx.iter().enumerate() {
            right[[j, i]] = (0..n).map(|k| c[k] * v[[r, k]]).sum();
        }
        let (p, dl) = ro.root(j);
        base.push(hs.eigenvalues[p]);
        delta.push(dl);
    }
    let left = right.clone();
    Ok(ProjectedSpectrum {
        base,
        delta,
        sites: sites.to_vec(),
        right,
        left,
    }
    .sorted())
}

fn scattering_update<T: Real>(
    hs: &SpectrumRows<T>,
    source: usize,
    drain: usize,
    beta: T,
    sites: &[usize],
) -> Result<ProjectedSpectrum<T>> {
    let n = hs.eigenvalues.len();
    let v = &hs.rows;
    let (sr, dr) = (hs.row(source)?, hs.row(drain)?);
    let idx: Vec<usize> = sites.iter().map(|&s| hs.row(s)).collect::<Result<_>>()?;
    let d: Vec<Complex<T>> = hs.eigenvalues.iter().map(|&e| re(e)).collect();
    let z: Vec<Complex<T>> = (0..n).map(|k| re(v[[dr, k]])).collect();
    let rho = cplx(T::zero(), -beta);
    let first = RankOne::solve(&d, &z, rho)?;

    // second stage in the basis of the first-stage eigenvectors
    let mut c = vec![re(T::zero()); n];
    let mut poles = Vec::with_capacity(n);
    let mut w2 = Vec::with_capacity(n);
    let mut proj = Array2::<Complex<T>>::zeros((n, sites.len()));
    for j in 0..n {
        first.coefficients(j, &mut c)?;
        w2.push((0..n).map(|k| c[k] * v[[sr, k]]).sum());
        for (i, &r) in idx.iter().enumerate() {
            proj[[j, i]] = (0..n).map(|k| c[k] * v[[r, k]]).sum();
        }
        poles.push(first.eigenvalue(j));
    }
    let second = RankOne::solve(&poles, &w2, rho)?;
    let mut right = Array2::zeros((n, sites.len()));
    let mut base = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    for j in 0..n {
        second.coefficients(j, &mut c)?;
        for i in 0..sites.len() {
            right[[j, i]] = (0..n).map(|k| c[k] * proj[[k, i]]).sum();
        }
        let (p2, d2) = second.root(j);
        let (p1, d1) = first.root(p2);
        base.push(hs.eigenvalues[p1]);
        delta.push(d1 + d2);
    }
    let left = right.clone();
    Ok(ProjectedSpectrum {
        base,
        delta,
        sites: sites.to_vec(),
        right,
        left,
    }
    .sorted())
}

/// How much of the eigenvector matrix [`eig_chain`] should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vectors<'a> {
    None,
    Rows(&'a [usize]),
    Full,
}

/// Output of [`eig_chain`].
#[derive(Debug, Clone, PartialEq)]
pub enum ChainSpectrum<T> {
    Values(Array1<T>),
    Rows(SpectrumRows<T>),
    Full(HermitianSpectrum<T>),
}

impl<T: Real> ChainSpectrum<T> {
    pub fn eigenvalues(&self) -> &Array1<T> {
        match self {
            Self::Values(v) => v,
            Self::Rows(r) => &r.eigenvalues,
            Self::Full(h) => &h.eigenvalues,
        }
    }

    pub fn into_full(self) -> Result<HermitianSpectrum<T>> {
        match self {
            Self::Full(h) => Ok(h),
            _ => Err(Error::invalid("eigenvectors were not requested")),
        }
    }

    pub fn into_rows(self) -> Result<SpectrumRows<T>> {
        match self {
            Self::Rows(r) => Ok(r),
            _ => Err(Error::invalid("eigenvector rows were not requested")),
        }
    }
}

/// Closed-chain spectrum without forming the dense Hamiltonian where possible.
///
/// The Anderson chain is tridiagonal. The long-range chain is
/// `T + γ/2 − (Nγ/2)|d⟩⟨d|` with `T` tridiagonal and `|d⟩` uniform, so its
/// spectrum is a rank-one update of the tridiagonal one. The cavity model goes
/// through the dense symmetric solver.
pub fn eig_chain<T: Real>(
    spec: &ChainSpec<T>,
    dis: &DisorderRealization<T>,
    want: Vectors<'_>,
) -> Result<ChainSpectrum<T>> {
    spec.validate()?;
    let n = spec.n_sites;
    if dis.epsilon.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: dis.epsilon.len(),
        });
    }
    if spec.kind == ModelKind::Cavity || n < 3 {
        let h = build_hamiltonian(spec, dis)?;
        return match want {
            Vectors::None => {
                let m = h.nrows();
                let mut a: Vec<T> = h.iter().copied().collect();
                let mut w = vec![T::zero(); m];
                T::syev_values(m, &mut a, &mut w)?;
                Ok(ChainSpectrum::Values(Array1::from(w)))
            }
            Vectors::Rows(sites) => Ok(ChainSpectrum::Rows(eig_hermitian(&h)?.rows(sites)?)),
            Vectors::Full => Ok(ChainSpectrum::Full(eig_hermitian(&h)?)),
        };
    }
    if dis.epsilon.iter().any(|e| !e.is_finite()) {
        return Err(Error::invalid("non-finite on-site energy"));
    }
    let mut t = dis.epsilon.clone();
    let mut e = vec![spec.omega; n - 1];
    let mut z = vec![T::zero(); n * n];
    T::stevd(n, &mut t, &mut e, &mut z).map_err(|e| match e {
        Error::Lapack { routine, info } if info > 0 => Error::NoConvergence(format!(
            "{routine} failed to converge (info {info}) for n = {n}"
        )),
        other => other,
    })?;
    let vt = Array2::from_shape_vec((n, n).f(), z).expect("shape");
    let gamma = if spec.kind == ModelKind::LongRange {
        spec.gamma
    } else {
        T::zero()
    };
    if gamma == T::zero() {
        return Ok(match want {
            Vectors::None => ChainSpectrum::Values(Array1::from(t)),
            Vectors::Rows(sites) => ChainSpectrum::Rows(
                HermitianSpectrum {
                    eigenvalues: Array1::from(t),
                    eigenvectors: vt,
                }
                .rows(sites)?,
            ),
            Vectors::Full => ChainSpectrum::Full(HermitianSpectrum {
                eigenvalues: Array1::from(t),
                eigenvectors: vt,
            }),
        });
    }

    let half = T::lit(0.5);
    let scale = T::of_usize(n).sqrt().recip();
    let d: Vec<T> = t.iter().map(|&x| x + half * gamma).collect();
    let w: Vec<T> = (0..n).map(|k| vt.column(k).sum() * scale).collect();
    let ro = RankOne::solve_real(&d, &w, -half * gamma * T::of_usize(n))?;
    let values: Vec<T> = (0..n).map(|j| ro.eigenvalue(j).re).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues: Array1<T> = order.iter().map(|&j| values[j]).collect();
    if want == Vectors::None {
        return Ok(ChainSpectrum::Values(eigenvalues));
    }
    // coefficient matrix in the tridiagonal eigenbasis, column-major
    let mut cm = vec![T::zero(); n * n];
    let mut c = vec![re(T::zero()); n];
    for (col, &j) in order.iter().enumerate() {
        ro.coefficients(j, &mut c)?;
        for k in 0..n {
            cm[col * n + k] = c[k].re;
        }
    }
    match want {
        Vectors::Rows(sites) => {
            let m = sites.len();
            let mut a = vec![T::zero(); m * n];
            for (i, &s) in sites.iter().enumerate() {
                check_site(s, n)?;
                for k in 0..n {
                    a[k * m + i] = vt[[s, k]];
                }
            }
            let mut out = vec![T::zero(); m * n];
            T::gemm(m, n, n, &a, &cm, &mut out);
            let rows = Array2::from_shape_vec((m, n).f(), out).expect("shape");
            Ok(ChainSpectrum::Rows(SpectrumRows {
                eigenvalues,
                sites: sites.to_vec(),
                rows,
            }))
        }
        _ => {
            let a = vt.into_raw_vec_and_offset().0;
            let mut out = vec![T::zero(); n * n];
            T::gemm(n, n, n, &a, &cm, &mut out);
            drop(cm);
            let v = Array2::from_shape_vec((n, n).f(), out).expect("shape");
            Ok(ChainSpectrum::Full(HermitianSpectrum {
                eigenvalues,
                eigenvectors: v,
            }))
        }
    }
}

impl<T: Real> ProjectedSpectrum<T> {
    fn sorted(self) -> Self {
        let n = self.base.len();
        let key = |k: usize| (self.base[k] + self.delta[k].re, self.delta[k].im);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let (ra, ia) = key(a);
            let (rb, ib) = key(b);
            ra.partial_cmp(&rb)
                .unwrap()
                .then(ia.partial_cmp(&ib).unwrap())
        });
        Self {
            base: order.iter().map(|&k| self.base[k]).collect(),
            delta: order.iter().map(|&k| self.delta[k]).collect(),
            sites: self.sites.clone(),
            right: self.right.select(ndarray::Axis(0), &order),
            left: self.left.select(ndarray::Axis(0), &order),
        }
    }
}
