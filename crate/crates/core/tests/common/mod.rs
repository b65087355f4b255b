//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub type C64 = Complex<f64>;

/// Solves the normal equations `R a = -r[1..=p]` with a dense LU.
pub fn toeplitz_solve(r: &[f64], p: usize) -> Vec<f64> {
    let m = DMatrix::from_fn(p, p, |i, j| r[i.abs_diff(j)]);
    let rhs = DVector::from_iterator(p, r[1..=p].iter().map(|v| -v));
    m.lu().solve(&rhs).expect("Toeplitz matrix is nonsingular").iter().copied().collect()
}

/// Roots of the monic polynomial `z^p + c[0] z^(p-1) + ... + c[p-1]`.
pub fn roots_real(coeffs: &[f64]) -> Vec<C64> {
    let p = coeffs.len();
    if p == 0 {
        return Vec::new();
    }
    let mut comp = DMatrix::zeros(p, p);
    for j in 0..p {
        comp[(0, j)] = -coeffs[j];
    }
    for i in 1..p {
        comp[(i, i - 1)] = 1.0;
    }
    comp.complex_eigenvalues().iter().copied().collect()
}

/// Expands `prod (1 - r z^-1)` into `[1, c_1, ..., c_n]`.
pub fn poly_from_roots(roots: &[C64]) -> Vec<C64> {
    let mut poly = vec![C64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = poly.clone();
        next.push(C64::new(0.0, 0.0));
        for (i, c) in poly.iter().enumerate() {
            next[i + 1] -= r * c;
        }
        poly = next;
    }
    poly
}

/// `c[n] = sum_i p_i^n / n` for `n = 1..=ncep`.
pub fn power_sum_cepstrum(poles: &[C64], ncep: usize) -> Vec<f64> {
    (1..=ncep)
        .map(|n| poles.iter().map(|p| p.powi(n as i32)).sum::<C64>().re / n as f64)
        .collect()
}

/// LPCC of `1/A(z)` from the roots of `A`.
pub fn lpcc_oracle(a: &[f64], ncep: usize) -> Vec<f64> {
    power_sum_cepstrum(&roots_real(a), ncep)
}

/// ACW cepstrum from root finding: the numerator is rebuilt as the sum of
/// the partial-fraction terms with unit residues, then its zeros are found.
pub fn acw_oracle(a: &[f64], ncep: usize) -> Vec<f64> {
    let poles = roots_real(a);
    let p = poles.len();
    let mut numer = vec![C64::new(0.0, 0.0); p];
    for i in 0..p {
        let others: Vec<C64> = poles.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
        for (k, c) in poly_from_roots(&others).into_iter().enumerate() {
            numer[k] += c / p as f64;
        }
    }
    let numer_real: Vec<f64> = numer[1..].iter().map(|c| c.re).collect();
    let zeros = roots_real(&numer_real);
    let cp = power_sum_cepstrum(&poles, ncep);
    let cz = power_sum_cepstrum(&zeros, ncep);
    cp.iter().zip(&cz).map(|(x, y)| x - y).collect()
}

/// Random real polynomial `[a_1..a_p]` whose roots lie inside radius `max_r`.
pub fn random_min_phase<R: Rng>(rng: &mut R, p: usize, max_r: f64) -> Vec<f64> {
    let mut roots = Vec::with_capacity(p);
    while roots.len() + 1 < p {
        let r = rng.random_range(0.05..max_r);
        let th = rng.random_range(0.05..std::f64::consts::PI - 0.05);
        roots.push(C64::from_polar(r, th));
        roots.push(C64::from_polar(r, -th));
    }
    if roots.len() < p {
        roots.push(C64::new(rng.random_range(-max_r..max_r), 0.0));
    }
    poly_from_roots(&roots)[1..].iter().map(|c| c.re).collect()
}

/// Biased autocorrelation of a random AR-coloured signal.
pub fn random_autocorrelation<R: Rng>(rng: &mut R, p: usize, n: usize) -> Vec<f64> {
    let a = random_min_phase(rng, p, 0.9);
    let mut y = vec![0.0; n];
    for t in 0..n {
        let mut v: f64 = StandardNormal.sample(rng);
        for (k, ak) in a.iter().enumerate() {
            if t > k {
                v -= ak * y[t - k - 1];
            }
        }
        y[t] = v;
    }
    (0..=p).map(|k| (k..n).map(|t| y[t] * y[t - k]).sum()).collect()
}

pub fn random_spd<R: Rng>(rng: &mut R, d: usize) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(d, 2 * d, |_, _| StandardNormal.sample(rng));
    &g * g.transpose() / (2 * d) as f64 + DMatrix::identity(d, d) * 0.05
}

/// Random `U diag(s) V^T` with singular values in `[0.2, 5]`, so rounding in
/// `M A M^T` stays far below the tolerances under test.
pub fn random_matrix<R: Rng>(rng: &mut R, d: usize) -> DMatrix<f64> {
    let orthogonal = |rng: &mut R| DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(rng)).qr().q();
    let u = orthogonal(rng);
    let v = orthogonal(rng);
    let s = DMatrix::from_diagonal(&DVector::from_fn(d, |_, _| rng.random_range(0.2..5.0)));
    u * s * v.transpose()
}

/// First grid index with `far <= frr`, else the last index.
pub fn eer_index_oracle(far: &[f64], frr: &[f64]) -> usize {
    for i in 0..far.len() {
        if far[i] <= frr[i] {
            return i;
        }
    }
    far.len() - 1
}

/// A nonincreasing FAR curve and a nondecreasing FRR curve on `n` points,
/// with plateaus so ties occur.
pub fn random_monotone_pair<R: Rng>(rng: &mut R, n: usize) -> (Vec<f64>, Vec<f64>) {
    let steps = |rng: &mut R| {
        let mut v = Vec::with_capacity(n);
        let mut level: usize = 0;
        let total = rng.random_range(1..=40usize);
        for _ in 0..n {
            if rng.random_bool(0.3) && level < total {
                level += rng.random_range(1..=total - level);
            }
            v.push(level as f64 / total as f64);
        }
        v
    };
    let frr = steps(rng);
    let far: Vec<f64> = steps(rng).into_iter().map(|v| 1.0 - v).collect();
    (far, frr)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn rel_error(a: &[f64], reference: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(reference).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / norm.max(f64::MIN_POSITIVE)
}
