// SPDX-License-Identifier: Apache-2.0

//! Independent reference calculations shared by the integration tests.
//! Nothing here goes through the resonance expansions of the library.

#![allow(dead_code)]

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Uniform(ChaCha8Rng);

impl Uniform {
    pub fn new(seed: u64) -> Self {
        Uniform(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, a: f64, b: f64) -> f64 {
        a + (b - a) * self.next()
    }

    pub fn int(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.0.next_u64() % (hi - lo + 1) as u64) as usize
    }
}

pub fn matmul(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    a.dot(b)
}

fn norm1(a: &Array2<C64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(A)` by scaling and squaring of a degree-20 Taylor polynomial.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let nrm = norm1(a);
    let s = if nrm > 0.25 {
        (nrm / 0.25).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.mapv(|z| z / 2f64.powi(s));
    let mut out = Array2::<C64>::eye(n);
    let mut term = Array2::<C64>::eye(n);
    for k in 1..=20 {
        term = matmul(&term, &scaled).mapv(|z| z / k as f64);
        out += &term;
    }
    for _ in 0..s {
        out = matmul(&out, &out);
    }
    out
}

/// 8-point Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_01() -> ([f64; 8], [f64; 8]) {
    let x = [
        -0.960_289_856_497_536_2,
        -0.796_666_477_413_626_7,
        -0.525_532_409_916_329,
        -0.183_434_642_495_649_8,
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_2,
    ];
    let w = [
        0.101_228_536_290_376_26,
        0.222_381_034_453_374_47,
        0.313_706_645_877_887_3,
        0.362_683_783_378_362,
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_47,
        0.101_228_536_290_376_26,
    ];
    let mut xs = [0.0; 8];
    let mut ws = [0.0; 8];
    for i in 0..8 {
        xs[i] = 0.5 * (x[i] + 1.0);
        ws[i] = 0.5 * w[i];
    }
    (xs, ws)
}

/// `γ_d ∫₀^∞ t |⟨drain|e^{−i H_eff t}|source⟩|² dt` by exact short-time
/// propagators and Gauss-Legendre panels of length `step`.
pub fn tau_by_propagation(
    heff: &Array2<C64>,
    source: usize,
    drain: usize,
    gamma_d: f64,
    step: f64,
) -> f64 {
    let n = heff.nrows();
    let (xs, ws) = gauss_legendre_01();
    let gen = |t: f64| expm(&heff.mapv(|z| z * C64::new(0.0, -t)));
    let full = gen(step);
    let nodes: Vec<Array2<C64>> = xs.iter().map(|&x| gen(x * step)).collect();
    let mut psi = ndarray::Array1::<C64>::zeros(n);
    psi[source] = C64::new(1.0, 0.0);
    let mut t0 = 0.0;
    let mut total = 0.0;
    let mut c = 0.0;
    loop {
        let mut panel = 0.0;
        for (u, (&x, &w)) in nodes.iter().zip(xs.iter().zip(ws.iter())) {
            let amp: C64 = u
                .row(drain)
                .iter()
                .zip(psi.iter())
                .map(|(a, b)| a * b)
                .sum();
            panel += w * (t0 + x * step) * amp.norm_sqr();
        }
        // Kahan summation over many panels.
        let y = panel * step - c;
        let s = total + y;
        c = (s - total) - y;
        total = s;
        psi = full.dot(&psi);
        t0 += step;
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm < 1e-18 || t0 > 1e7 {
            break;
        }
    }
    gamma_d * total
}

/// 15-point Kronrod / 7-point Gauss pair on [a, b]; returns (K15, |K15 − G7|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    const XK: [f64; 8] = [
        0.991_455_371_120_813,
        0.949_107_912_342_759,
        0.864_864_423_359_769,
        0.741_531_185_599_394,
        0.586_087_235_467_691,
        0.405_845_151_377_397,
        0.207_784_955_007_898,
        0.0,
    ];
    const WK: [f64; 8] = [
        0.022_935_322_010_529,
        0.063_092_092_629_979,
        0.104_790_010_322_250,
        0.140_653_259_715_525,
        0.169_004_726_639_267,
        0.190_350_578_064_785,
        0.204_432_940_075_298,
        0.209_482_141_084_728,
    ];
    const WG: [f64; 4] = [
        0.129_484_966_168_870,
        0.279_705_391_489_277,
        0.381_830_050_505_119,
        0.417_959_183_673_469,
    ];
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XK[i];
        let s = f(c - x) + f(c + x);
        k += WK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod on [a, b] to absolute tolerance `tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let mut stack = vec![(a, b, tol, 0u32)];
    let mut total = 0.0;
    while let Some((a, b, tol, depth)) = stack.pop() {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth > 60 {
            total += v;
        } else {
            let m = 0.5 * (a + b);
            stack.push((a, m, tol / 2.0, depth + 1));
            stack.push((m, b, tol / 2.0, depth + 1));
        }
    }
    total
}

/// `∫_{−∞}^{∞} f(E) dE` with panels split at `breaks` (sorted) and
/// algebraically mapped tails.
pub fn integrate_line<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: f64) -> f64 {
    let lo = breaks[0];
    let hi = breaks[breaks.len() - 1];
    let span = (hi - lo).max(1.0);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            total += adaptive(f, w[0], w[1], tol);
        }
    }
    // E = hi + span·u/(1−u), u ∈ [0, 1).
    let right = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let d = 1.0 - u;
        f(hi + span * u / d) * span / (d * d)
    };
    let left = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let d = 1.0 - u;
        f(lo - span * u / d) * span / (d * d)
    };
    total + adaptive(&right, 0.0, 1.0, tol) + adaptive(&left, 0.0, 1.0, tol)
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
