//! Random states, projectors and distributions for property suites.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::Result;
use crate::linalg::{
    hermitize, real_trace, ClassicalJoint, DensityOperator, HermitianObservable, Mat,
    RegisterSpace, C64,
};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

/// Complex Ginibre matrix with unit-variance entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-random unitary via QR with phase correction.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Mat {
    let qr = ginibre(rng, d, d).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let z = r[(j, j)];
        let phase = if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn pure_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<C64> {
    let v = DVector::from_fn(d, |_, _| gaussian(rng));
    let n = v.norm();
    v.unscale(n)
}

pub fn pure<R: Rng + ?Sized>(rng: &mut R, space: RegisterSpace) -> Result<DensityOperator> {
    let v = pure_vector(rng, space.dim());
    DensityOperator::pure(space, &v)
}

/// Random unit-trace PSD `G G^dagger / tr`, full rank unless `rank` is set.
pub fn density<R: Rng + ?Sized>(
    rng: &mut R,
    space: RegisterSpace,
    rank: Option<usize>,
) -> Result<DensityOperator> {
    let d = space.dim();
    let g = ginibre(rng, d, rank.unwrap_or(d).max(1));
    let m = hermitize(&(&g * g.adjoint()));
    let tr = real_trace(&m);
    DensityOperator::new(space, m.unscale(tr))
}

/// Random PSD observable of the given rank with unit-order spectrum.
pub fn psd<R: Rng + ?Sized>(rng: &mut R, space: RegisterSpace, rank: usize) -> HermitianObservable {
    let d = space.dim();
    let g = ginibre(rng, d, rank.max(1));
    let m = hermitize(&(&g * g.adjoint())).unscale(d as f64);
    HermitianObservable::new(space, m).expect("hermitized by construction")
}

/// Orthogonal projector onto a random `rank`-dimensional subspace.
pub fn projector<R: Rng + ?Sized>(
    rng: &mut R,
    space: RegisterSpace,
    rank: usize,
) -> HermitianObservable {
    let d = space.dim();
    let u = unitary(rng, d);
    let v = u.columns(0, rank.min(d)).into_owned();
    HermitianObservable::new(space, hermitize(&(&v * v.adjoint()))).expect("projector is Hermitian")
}

/// Maximally entangled state on two registers of equal dimension.
pub fn bell(labels: &[&str; 2]) -> Result<DensityOperator> {
    maximally_entangled(labels, 2)
}

pub fn maximally_entangled(labels: &[&str; 2], d: usize) -> Result<DensityOperator> {
    let space = RegisterSpace::new(&[(labels[0], d), (labels[1], d)])?;
    let mut v = DVector::zeros(d * d);
    for i in 0..d {
        v[i * d + i] = C64::new(1.0, 0.0);
    }
    DensityOperator::pure(space, &v)
}

/// Point drawn uniformly from the probability simplex.
pub fn distribution<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

pub fn joint<R: Rng + ?Sized>(rng: &mut R, space: RegisterSpace) -> Result<ClassicalJoint> {
    let p = distribution(rng, space.dim());
    ClassicalJoint::new(space, p)
}

/// `(1 - t) rho + t tau` for a fresh random `tau`, so the trace distance to
/// `rho` is at most `t`.
pub fn nearby<R: Rng + ?Sized>(
    rng: &mut R,
    rho: &DensityOperator,
    t: f64,
) -> Result<DensityOperator> {
    let tau = density(rng, rho.space().clone(), None)?;
    DensityOperator::new(
        rho.space().clone(),
        rho.matrix().scale(1.0 - t) + tau.matrix().scale(t),
    )
}

/// Random CQ state `sum_x p(x) |x><x| ⊗ rho_x` with the classical register
/// first.
pub fn cq_state<R: Rng + ?Sized>(
    rng: &mut R,
    classical: (&str, usize),
    quantum: RegisterSpace,
) -> Result<DensityOperator> {
    let p = distribution(rng, classical.1);
    let dq = quantum.dim();
    let mut m = Mat::zeros(classical.1 * dq, classical.1 * dq);
    for (x, &px) in p.iter().enumerate() {
        let r = density(rng, quantum.clone(), None)?;
        m.view_mut((x * dq, x * dq), (dq, dq))
            .copy_from(&r.matrix().scale(px));
    }
    let space = RegisterSpace::new(&[classical]).and_then(|c| c.concat(&quantum))?;
    DensityOperator::new(space, m)
}
