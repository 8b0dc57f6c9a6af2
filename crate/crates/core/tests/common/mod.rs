//! Brute-force oracles that share no code with the library.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Minimizes a 1-D function on `[lo, hi]` with a `points`-point grid, then again on a
/// second grid spanning two cells around the first winner.
pub fn zoom_grid_min(h: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> f64 {
    let scan = |a: f64, b: f64| {
        let step = (b - a) / (points - 1) as f64;
        let mut best = (a, h(a));
        for i in 1..points {
            let y = a + step * i as f64;
            let v = h(y);
            if v < best.1 {
                best = (y, v);
            }
        }
        (best.0, step)
    };
    let (y, step) = scan(lo, hi);
    scan(y - 2.0 * step, y + 2.0 * step).0
}

pub struct EllipsoidResult {
    pub point: Vec<f64>,
    pub value: f64,
    /// Certified lower bound on the minimum.
    pub lower: f64,
}

/// Central-cut ellipsoid method for a convex function on `R^d` (d ≥ 2), started from the
/// ball `B(center, radius)`, which must contain a minimizer. Stops once the certified gap
/// is at most `gap`.
pub fn ellipsoid_min(
    h: impl Fn(&[f64]) -> f64,
    subgrad: impl Fn(&[f64]) -> Vec<f64>,
    center: &[f64],
    radius: f64,
    gap: f64,
    max_iter: usize,
) -> Option<EllipsoidResult> {
    let d = center.len();
    assert!(d >= 2);
    let df = d as f64;
    let mut x = DVector::from_column_slice(center);
    let mut p = DMatrix::identity(d, d) * (radius * radius);
    let mut best = (x.clone(), h(x.as_slice()));
    let mut lower = f64::NEG_INFINITY;
    for _ in 0..max_iter {
        let f = h(x.as_slice());
        if f < best.1 {
            best = (x.clone(), f);
        }
        let g = DVector::from_vec(subgrad(x.as_slice()));
        let pg = &p * &g;
        let gpg = g.dot(&pg);
        if gpg <= 0.0 {
            // Zero subgradient: x is a minimizer.
            lower = lower.max(f);
            break;
        }
        let width = gpg.sqrt();
        lower = lower.max(f - width);
        if best.1 - lower <= gap {
            break;
        }
        let b = pg / width;
        x -= &b / (df + 1.0);
        p = (&p - (&b * b.transpose()) * (2.0 / (df + 1.0))) * (df * df / (df * df - 1.0));
        p = (&p + p.transpose()) * 0.5;
    }
    (best.1 - lower <= gap).then(|| EllipsoidResult {
        point: best.0.as_slice().to_vec(),
        value: best.1,
        lower,
    })
}

/// Objective of the sparse-group prox problem on one block:
/// `α(λ‖y‖₁ + w‖y‖) + ½‖y − v‖²`.
pub fn block_prox_objective(y: &[f64], v: &[f64], alpha: f64, w: f64, lambda: f64) -> f64 {
    let l1: f64 = y.iter().map(|t| t.abs()).sum();
    let l2 = y.iter().map(|t| t * t).sum::<f64>().sqrt();
    let quad: f64 = y.iter().zip(v).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum();
    alpha * (lambda * l1 + w * l2) + quad
}

pub fn block_prox_subgradient(y: &[f64], v: &[f64], alpha: f64, w: f64, lambda: f64) -> Vec<f64> {
    let l2 = y.iter().map(|t| t * t).sum::<f64>().sqrt();
    y.iter()
        .zip(v)
        .map(|(&a, &b)| {
            let sign = if a > 0.0 {
                1.0
            } else if a < 0.0 {
                -1.0
            } else {
                0.0
            };
            let radial = if l2 > 0.0 { a / l2 } else { 0.0 };
            alpha * (lambda * sign + w * radial) + (a - b)
        })
        .collect()
}

/// Brute-force prox of `α(λ‖·‖₁ + w‖·‖)` on one block. The minimizer lies within
/// `α(λ√d + w)` of `v`. The objective is 1-strongly convex, so a certified gap `g` pins
/// the minimizer to a ball of radius `√(2g)`; the ellipsoid method is restarted on that
/// ball with a fresh shape matrix until the gap reaches `1e-13`.
pub fn brute_block_prox(v: &[f64], alpha: f64, w: f64, lambda: f64) -> Option<Vec<f64>> {
    let d = v.len();
    let reach = alpha * (lambda * (d as f64).sqrt() + w);
    if d == 1 {
        let lo = v[0].min(0.0) - reach - 1.0;
        let hi = v[0].max(0.0) + reach + 1.0;
        let y = zoom_grid_min(|t| block_prox_objective(&[t], v, alpha, w, lambda), lo, hi, 1_000_000);
        return Some(vec![y]);
    }
    let h = |y: &[f64]| block_prox_objective(y, v, alpha, w, lambda);
    let sub = |y: &[f64]| block_prox_subgradient(y, v, alpha, w, lambda);
    let mut center = v.to_vec();
    let mut radius = reach * 1.01 + 1e-9;
    for target in [1e-6, 1e-10, 1e-13, 1e-13] {
        let r = ellipsoid_min(h, sub, &center, radius, target, 100_000)?;
        center = r.point;
        radius = (2.0 * (r.value - r.lower)).sqrt() * 1.01 + 1e-15;
    }
    Some(center)
}

/// `λ_max(AᵀA)` from a dense symmetric eigendecomposition.
pub fn dense_gram_lambda_max(a: &DMatrix<f64>) -> f64 {
    (a.transpose() * a).symmetric_eigen().eigenvalues.max()
}

pub fn dense_gram_lambda_min(a: &DMatrix<f64>) -> f64 {
    (a.transpose() * a).symmetric_eigen().eigenvalues.min()
}

/// Least squares plus a block penalty `Σ_J (w_J‖x_J‖ + λ‖x_J‖₁)`, evaluated and solved
/// without the library.
pub struct DenseComposite {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub blocks: Vec<std::ops::Range<usize>>,
    pub weights: Vec<f64>,
    pub lambda: f64,
}

impl DenseComposite {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let r = &self.a * x - &self.b;
        let mut f = 0.5 * r.dot(&r) + self.lambda * x.iter().map(|t| t.abs()).sum::<f64>();
        for (j, range) in self.blocks.iter().enumerate() {
            f += self.weights[j] * x.rows(range.start, range.len()).norm();
        }
        f
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.a.transpose() * (&self.a * x - &self.b)
    }

    pub fn prox(&self, v: &DVector<f64>, alpha: f64) -> DVector<f64> {
        let mut y = v.map(|t| t.signum() * (t.abs() - alpha * self.lambda).max(0.0));
        for (j, range) in self.blocks.iter().enumerate() {
            let mut blk = y.rows_mut(range.start, range.len());
            let n = blk.norm();
            let t = alpha * self.weights[j];
            if n <= t {
                blk.fill(0.0);
            } else {
                blk *= 1.0 - t / n;
            }
        }
        y
    }

    pub fn psi(&self, x: &DVector<f64>) -> f64 {
        (x - self.prox(&(x - self.gradient(x)), 1.0)).norm()
    }

    /// FISTA with adaptive restart, step `1/λ_max(AᵀA)`.
    pub fn fista(&self, iters: usize) -> DVector<f64> {
        let step = 1.0 / dense_gram_lambda_max(&self.a);
        let n = self.a.ncols();
        let mut x = DVector::zeros(n);
        let mut y = x.clone();
        let mut t = 1.0f64;
        for _ in 0..iters {
            let next = self.prox(&(&y - self.gradient(&y) * step), step);
            if (&y - &next).dot(&(&next - &x)) > 0.0 {
                t = 1.0;
                y = x.clone();
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &next + (&next - &x) * ((t - 1.0) / t_next);
            x = next;
            t = t_next;
        }
        x
    }
}
