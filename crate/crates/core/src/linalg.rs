//! Labeled tensor spaces, dense Hermitian linear algebra and the distance
//! measures the rest of the crate builds on.
//!
//! An operator acting on a subset of registers is always stored with those
//! registers in the order of the parent space.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat = DMatrix<C64>;

/// Eigenvalues at or below this are outside the support.
pub const SUPPORT_TOL: f64 = 1e-10;
/// Largest tolerated entry of `X - X^dagger` at construction.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues in `[-CLAMP_TOL, 0]` are rounding noise and read as zero.
pub const CLAMP_TOL: f64 = 1e-10;
/// Hard cap on the total dimension of any dense operator.
pub const MAX_DIM: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub label: String,
    pub dim: usize,
}

/// Ordered list of labeled registers. The first register is the most
/// significant digit of a flat index.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Register>", into = "Vec<Register>")]
pub struct RegisterSpace {
    registers: Vec<Register>,
}

impl TryFrom<Vec<Register>> for RegisterSpace {
    type Error = Error;

    fn try_from(registers: Vec<Register>) -> Result<Self> {
        for (i, r) in registers.iter().enumerate() {
            if r.dim == 0 {
                return Err(Error::ZeroDimension(r.label.clone()));
            }
            if registers[..i].iter().any(|q| q.label == r.label) {
                return Err(Error::DuplicateLabel(r.label.clone()));
            }
        }
        Ok(Self { registers })
    }
}

impl From<RegisterSpace> for Vec<Register> {
    fn from(s: RegisterSpace) -> Self {
        s.registers
    }
}

impl RegisterSpace {
    pub fn new(registers: &[(&str, usize)]) -> Result<Self> {
        registers
            .iter()
            .map(|&(label, dim)| Register {
                label: label.to_string(),
                dim,
            })
            .collect::<Vec<_>>()
            .try_into()
    }

    /// The trivial space of dimension one.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.registers.iter().map(|r| r.dim).product()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.registers.iter().map(|r| r.label.as_str()).collect()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.registers.iter().any(|r| r.label == label)
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.registers
            .iter()
            .position(|r| r.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.registers[self.position(label)?].dim)
    }

    /// Product dimension of a label set.
    pub fn dim_of_all(&self, labels: &[&str]) -> Result<usize> {
        labels.iter().try_fold(1, |acc, l| Ok(acc * self.dim_of(l)?))
    }

    /// The registers named in `labels`, kept in this space's order.
    pub fn subspace(&self, labels: &[&str]) -> Result<Self> {
        for (i, l) in labels.iter().enumerate() {
            self.position(l)?;
            if labels[..i].contains(l) {
                return Err(Error::DuplicateLabel(l.to_string()));
            }
        }
        Ok(Self {
            registers: self
                .registers
                .iter()
                .filter(|r| labels.contains(&r.label.as_str()))
                .cloned()
                .collect(),
        })
    }

    /// The registers not named in `labels`.
    pub fn complement(&self, labels: &[&str]) -> Result<Self> {
        for l in labels {
            self.position(l)?;
        }
        Ok(Self {
            registers: self
                .registers
                .iter()
                .filter(|r| !labels.contains(&r.label.as_str()))
                .cloned()
                .collect(),
        })
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        let mut registers = self.registers.clone();
        registers.extend(other.registers.iter().cloned());
        registers.try_into()
    }

    /// Same labels and dims, possibly in another order.
    pub fn same_registers(&self, other: &Self) -> bool {
        self.len() == other.len()
            && self
                .registers
                .iter()
                .all(|r| other.registers.iter().any(|q| q == r))
    }

    /// Digits of a flat index, one per register.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.len()];
        for (k, r) in self.registers.iter().enumerate().rev() {
            out[k] = index % r.dim;
            index /= r.dim;
        }
        out
    }

    pub fn flat_index(&self, digits: &[usize]) -> usize {
        self.registers
            .iter()
            .zip(digits)
            .fold(0, |acc, (r, &d)| acc * r.dim + d)
    }

    /// For every flat index of `self`, the flat index of its restriction to
    /// `sub`, read in `sub`'s own register order.
    pub fn project_indices(&self, sub: &Self) -> Result<Vec<usize>> {
        let pos = sub
            .registers
            .iter()
            .map(|r| {
                let p = self.position(&r.label)?;
                if self.registers[p].dim != r.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.registers[p].dim,
                        got: r.dim,
                    });
                }
                Ok(p)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((0..self.dim())
            .map(|i| {
                let d = self.digits(i);
                pos.iter()
                    .zip(&sub.registers)
                    .fold(0, |acc, (&p, r)| acc * r.dim + d[p])
            })
            .collect())
    }

    fn guard(&self) -> Result<()> {
        let d = self.dim();
        if d > MAX_DIM {
            return Err(Error::TooLarge(format!(
                "total dimension {d} exceeds {MAX_DIM}"
            )));
        }
        Ok(())
    }
}

/// Read access shared by states and observables.
pub trait Operator {
    fn space(&self) -> &RegisterSpace;
    fn matrix(&self) -> &Mat;
}

/// Hermitian PSD matrix with trace in `(0, 1]`.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    space: RegisterSpace,
    matrix: Mat,
}

/// Hermitian matrix of either sign.
#[derive(Clone, Debug)]
pub struct HermitianObservable {
    space: RegisterSpace,
    matrix: Mat,
}

impl Operator for DensityOperator {
    fn space(&self) -> &RegisterSpace {
        &self.space
    }
    fn matrix(&self) -> &Mat {
        &self.matrix
    }
}

impl Operator for HermitianObservable {
    fn space(&self) -> &RegisterSpace {
        &self.space
    }
    fn matrix(&self) -> &Mat {
        &self.matrix
    }
}

fn checked_hermitian(space: &RegisterSpace, matrix: Mat) -> Result<Mat> {
    let d = space.dim();
    if matrix.nrows() != d || matrix.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: matrix.nrows().max(matrix.ncols()),
        });
    }
    let dev = hermitian_deviation(&matrix);
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    Ok(hermitize(&matrix))
}

impl DensityOperator {
    pub fn space(&self) -> &RegisterSpace {
        &self.space
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn new(space: RegisterSpace, matrix: Mat) -> Result<Self> {
        space.guard()?;
        let matrix = checked_hermitian(&space, matrix)?;
        let lo = min_eigenvalue(&matrix);
        if lo < -CLAMP_TOL {
            return Err(Error::NotPsd(lo));
        }
        let tr = real_trace(&matrix);
        if !(tr > 0.0 && tr <= 1.0 + 1e-10) {
            return Err(Error::InvalidTrace(tr));
        }
        Ok(Self { space, matrix })
    }

    /// Normalizes a nonzero PSD matrix to unit trace.
    pub fn normalized(space: RegisterSpace, matrix: Mat) -> Result<Self> {
        let tr = real_trace(&matrix);
        if !(tr > 0.0 && tr.is_finite()) {
            return Err(Error::InvalidTrace(tr));
        }
        Self::new(space, matrix.unscale(tr))
    }

    pub fn diagonal(space: RegisterSpace, probs: &[f64]) -> Result<Self> {
        if probs.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: probs.len(),
            });
        }
        Self::new(space, diag_matrix(probs))
    }

    pub fn pure(space: RegisterSpace, psi: &DVector<C64>) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 {
            return Err(Error::InvalidTrace(0.0));
        }
        let v = psi.unscale(n);
        Self::new(space, &v * v.adjoint())
    }

    pub fn maximally_mixed(space: RegisterSpace) -> Result<Self> {
        let d = space.dim();
        Self::new(space, Mat::identity(d, d).unscale(d as f64))
    }

    pub fn trace(&self) -> f64 {
        real_trace(&self.matrix)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.space.clone(), self.matrix.scale(c))
    }

    pub fn into_matrix(self) -> Mat {
        self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh(&self.matrix).values
    }

    pub fn as_observable(&self) -> HermitianObservable {
        HermitianObservable {
            space: self.space.clone(),
            matrix: self.matrix.clone(),
        }
    }

    pub fn partial_trace(&self, keep: &[&str]) -> Result<Self> {
        partial_trace(self, keep)
    }

    /// Reorders registers to match `to`, which must hold the same registers.
    pub fn permuted(&self, to: &RegisterSpace) -> Result<Self> {
        let m = permute_registers(&self.matrix, &self.space, to)?;
        Ok(Self {
            space: to.clone(),
            matrix: m,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(StateFile::from_parts(&self.space, &self.matrix))
            .expect("state serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: StateFile = serde_json::from_str(text)?;
        let (space, m) = f.into_parts()?;
        Self::new(space, m)
    }
}

impl HermitianObservable {
    pub fn space(&self) -> &RegisterSpace {
        &self.space
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn new(space: RegisterSpace, matrix: Mat) -> Result<Self> {
        space.guard()?;
        let matrix = checked_hermitian(&space, matrix)?;
        Ok(Self { space, matrix })
    }

    pub fn identity(space: RegisterSpace) -> Self {
        let d = space.dim();
        Self {
            space,
            matrix: Mat::identity(d, d),
        }
    }

    pub fn into_matrix(self) -> Mat {
        self.matrix
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    pub fn trace(&self) -> f64 {
        real_trace(&self.matrix)
    }

    /// Converts a PSD observable with trace in `(0, 1]` into a state.
    pub fn to_state(&self) -> Result<DensityOperator> {
        DensityOperator::new(self.space.clone(), self.matrix.clone())
    }
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    registers: RegisterSpace,
    matrix: Vec<[f64; 2]>,
}

impl StateFile {
    fn from_parts(space: &RegisterSpace, m: &Mat) -> Self {
        let d = m.nrows();
        let mut matrix = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let z = m[(i, j)];
                matrix.push([z.re, z.im]);
            }
        }
        Self {
            registers: space.clone(),
            matrix,
        }
    }

    fn into_parts(self) -> Result<(RegisterSpace, Mat)> {
        let d = self.registers.dim();
        if self.matrix.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: self.matrix.len(),
            });
        }
        let m = Mat::from_row_iterator(d, d, self.matrix.iter().map(|z| C64::new(z[0], z[1])));
        Ok((self.registers, m))
    }
}

/// Joint pmf over labeled finite alphabets, flat row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalJoint {
    registers: RegisterSpace,
    probs: Vec<f64>,
}

impl ClassicalJoint {
    pub fn new(space: RegisterSpace, mut probs: Vec<f64>) -> Result<Self> {
        if probs.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: probs.len(),
            });
        }
        for p in probs.iter_mut() {
            if !p.is_finite() || *p < -1e-15 {
                return Err(Error::InvalidDistribution(format!("entry {p}")));
            }
            *p = p.max(0.0);
        }
        let total: f64 = probs.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::InvalidDistribution(format!("total mass {total}")));
        }
        Ok(Self {
            registers: space,
            probs,
        })
    }

    pub fn uniform(space: RegisterSpace) -> Self {
        let d = space.dim();
        Self {
            registers: space,
            probs: vec![1.0 / d as f64; d],
        }
    }

    pub fn space(&self) -> &RegisterSpace {
        &self.registers
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn prob(&self, digits: &[usize]) -> f64 {
        self.probs[self.registers.flat_index(digits)]
    }

    /// Marginal on `keep`, in this space's register order.
    pub fn marginal(&self, keep: &[&str]) -> Result<Self> {
        let sub = self.registers.subspace(keep)?;
        let idx = self.registers.project_indices(&sub)?;
        let mut probs = vec![0.0; sub.dim()];
        for (i, &k) in idx.iter().enumerate() {
            probs[k] += self.probs[i];
        }
        Ok(Self {
            registers: sub,
            probs,
        })
    }

    /// Table `t[b][a]` with `a` ranging over `a_labels` and `b` over
    /// `b_labels`, both in space order; other registers are summed out.
    pub fn blocks(&self, a_labels: &[&str], b_labels: &[&str]) -> Result<Vec<Vec<f64>>> {
        disjoint(a_labels, b_labels)?;
        let sa = self.registers.subspace(a_labels)?;
        let sb = self.registers.subspace(b_labels)?;
        let ia = self.registers.project_indices(&sa)?;
        let ib = self.registers.project_indices(&sb)?;
        let mut t = vec![vec![0.0; sa.dim()]; sb.dim()];
        for (i, p) in self.probs.iter().enumerate() {
            t[ib[i]][ia[i]] += p;
        }
        Ok(t)
    }

    pub fn to_density(&self) -> Result<DensityOperator> {
        DensityOperator::diagonal(self.registers.clone(), &self.probs)
    }

    /// Reads the diagonal of a state as a joint pmf.
    pub fn from_density(rho: &DensityOperator) -> Result<Self> {
        let m = rho.matrix();
        Self::new(
            rho.space().clone(),
            (0..m.nrows()).map(|i| m[(i, i)].re.max(0.0)).collect(),
        )
    }

    pub fn permuted(&self, to: &RegisterSpace) -> Result<Self> {
        if !self.registers.same_registers(to) {
            return Err(Error::SpaceMismatch);
        }
        let map = to.project_indices(&self.registers)?;
        Ok(Self {
            registers: to.clone(),
            probs: map.iter().map(|&i| self.probs[i]).collect(),
        })
    }
}

pub(crate) fn disjoint(a: &[&str], b: &[&str]) -> Result<()> {
    match a.iter().find(|l| b.contains(l)) {
        Some(l) => Err(Error::DuplicateLabel(l.to_string())),
        None => Ok(()),
    }
}

/// Eigendecomposition with eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

impl Eigh {
    /// `U diag(f(lambda)) U^dagger`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Mat {
        let d = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..d {
            let c = f(self.values[j]);
            for i in 0..d {
                scaled[(i, j)] *= c;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// Columns of eigenvectors with eigenvalue above `tol`.
    pub fn support_basis(&self, tol: f64) -> Mat {
        let cols: Vec<usize> = (0..self.values.len())
            .filter(|&j| self.values[j] > tol)
            .collect();
        self.vectors.select_columns(&cols)
    }
}

pub fn eigh(m: &Mat) -> Eigh {
    let d = m.nrows();
    if d == 0 {
        return Eigh {
            values: vec![],
            vectors: Mat::zeros(0, 0),
        };
    }
    let h = hermitize(m);
    let rough = h.clone().symmetric_eigen().eigenvectors;
    let unitary = (rough.adjoint() * &rough - Mat::identity(d, d)).norm() < 1e-12;
    let (values, vectors) = if unitary {
        let (values, w) = jacobi_eigen(rough.adjoint() * &h * &rough);
        (values, rough * w)
    } else {
        jacobi_eigen(h)
    };
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    Eigh {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: vectors.select_columns(&order),
    }
}

/// Cyclic complex Jacobi, run on nalgebra's rough eigenbasis. nalgebra's
/// Hermitian `symmetric_eigen` alone loses accuracy on nearly diagonal
/// complex input (off-diagonal entries near 1e-14 give reconstruction
/// errors near 1e-2), which is exactly the shape produced by
/// re-diagonalizing in an eigenbasis.
fn jacobi_eigen(mut a: Mat) -> (Vec<f64>, Mat) {
    let n = a.nrows();
    let mut v = Mat::identity(n, n);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let am = a.as_mut_slice();
    let vm = v.as_mut_slice();
    // Column-major: entry (i, j) lives at i + j n.
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = am[p + q * n];
                let r = apq.norm();
                let (app, aqq) = (am[p + p * n].re, am[q + q * n].re);
                // Negligible against both the diagonal pair and the matrix.
                if r <= 1e-16 * scale || r <= f64::EPSILON * (app * aqq).abs().sqrt() {
                    continue;
                }
                rotated = true;
                // Phase `w` makes the pivot real, then a real rotation
                // annihilates it: U = diag(1, conj w) [[c, s], [-s, c]].
                let wc = (apq / r).conj();
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let (up_q, uq_q) = (-wc * s, wc * c);
                for m in [&mut *am, &mut *vm] {
                    let (cp, cq) = (p * n, q * n);
                    for k in 0..n {
                        let (x, y) = (m[k + cp], m[k + cq]);
                        m[k + cp] = x * c + y * up_q;
                        m[k + cq] = x * s + y * uq_q;
                    }
                }
                let (upc, uqc) = (up_q.conj(), uq_q.conj());
                for k in 0..n {
                    let (x, y) = (am[p + k * n], am[q + k * n]);
                    am[p + k * n] = x * c + y * upc;
                    am[q + k * n] = x * s + y * uqc;
                }
                am[p + q * n] = C64::new(0.0, 0.0);
                am[q + p * n] = C64::new(0.0, 0.0);
                am[p + p * n] = C64::new(am[p + p * n].re, 0.0);
                am[q + q * n] = C64::new(am[q + q * n].re, 0.0);
            }
        }
        if !rotated {
            break;
        }
    }
    ((0..n).map(|i| am[i + i * n].re).collect(), v)
}

pub fn hermitize(m: &Mat) -> Mat {
    (m + m.adjoint()).unscale(2.0)
}

pub fn hermitian_deviation(m: &Mat) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn real_trace(m: &Mat) -> f64 {
    m.trace().re
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    eigh(m).values.first().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(m: &Mat) -> f64 {
    eigh(m).values.last().copied().unwrap_or(0.0)
}

pub fn diag_matrix(d: &[f64]) -> Mat {
    Mat::from_diagonal(&DVector::from_iterator(
        d.len(),
        d.iter().map(|&x| C64::new(x, 0.0)),
    ))
}

/// Real part of `tr(a b)`.
pub fn trace_product(a: &Mat, b: &Mat) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for k in 0..n {
            s += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    s
}

/// Power of a Hermitian matrix under the support convention.
///
/// Positive exponents clamp negative eigenvalues to zero unless the exponent
/// is an integer, in which case the sign is kept. Exponents `<= 0` act only on
/// eigenvalues above `SUPPORT_TOL`; exponent 0 yields the support projector.
pub fn mat_power(m: &Mat, exponent: f64) -> Mat {
    eigh(m).apply(|l| scalar_power(l, exponent))
}

pub(crate) fn scalar_power(l: f64, a: f64) -> f64 {
    if a > 0.0 {
        if a.fract() == 0.0 && a <= i32::MAX as f64 {
            l.powi(a as i32)
        } else {
            l.max(0.0).powf(a)
        }
    } else if l > SUPPORT_TOL {
        l.powf(a)
    } else {
        0.0
    }
}

pub fn herm_power(x: &HermitianObservable, exponent: f64) -> HermitianObservable {
    HermitianObservable {
        space: x.space.clone(),
        matrix: hermitize(&mat_power(&x.matrix, exponent)),
    }
}

/// Base-2 logarithm on the support, zero elsewhere.
pub fn log2_support(m: &Mat) -> Mat {
    eigh(m).apply(|l| if l > SUPPORT_TOL { l.log2() } else { 0.0 })
}

pub fn support_projector(m: &Mat) -> Mat {
    mat_power(m, 0.0)
}

pub fn trace_norm(m: &Mat) -> f64 {
    eigh(m).values.iter().map(|l| l.abs()).sum()
}

/// Shannon/von Neumann entropy in bits of the eigenvalues of `m`.
pub fn entropy_of(m: &Mat) -> f64 {
    eigh(m)
        .values
        .iter()
        .filter(|&&l| l > SUPPORT_TOL)
        .map(|&l| -l * l.log2())
        .sum()
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

fn same_space(a: &impl Operator, b: &impl Operator) -> Result<()> {
    if a.space() != b.space() {
        return Err(Error::SpaceMismatch);
    }
    Ok(())
}

pub fn tensor_product(a: &DensityOperator, b: &DensityOperator) -> Result<DensityOperator> {
    let space = a.space.concat(&b.space)?;
    space.guard()?;
    Ok(DensityOperator {
        space,
        matrix: kron(&a.matrix, &b.matrix),
    })
}

/// Partial trace of a raw matrix, keeping `keep` in parent order.
pub fn partial_trace_mat(
    space: &RegisterSpace,
    m: &Mat,
    keep: &[&str],
) -> Result<(RegisterSpace, Mat)> {
    let kept = space.subspace(keep)?;
    let traced = space.complement(keep)?;
    let k = space.project_indices(&kept)?;
    let t = space.project_indices(&traced)?;
    let d = space.dim();
    let mut out = Mat::zeros(kept.dim(), kept.dim());
    for i in 0..d {
        for j in 0..d {
            if t[i] == t[j] {
                out[(k[i], k[j])] += m[(i, j)];
            }
        }
    }
    Ok((kept, out))
}

pub fn partial_trace(rho: &DensityOperator, keep: &[&str]) -> Result<DensityOperator> {
    let (space, m) = partial_trace_mat(&rho.space, &rho.matrix, keep)?;
    Ok(DensityOperator {
        space,
        matrix: hermitize(&m),
    })
}

/// `op ⊗ I` on `parent`, where `op` acts on the registers of `op_space`
/// (any order, all present in `parent`).
pub fn embed(op: &Mat, op_space: &RegisterSpace, parent: &RegisterSpace) -> Result<Mat> {
    let labels = op_space.labels();
    let rest = parent.complement(&labels)?;
    let k = parent.project_indices(op_space)?;
    let t = parent.project_indices(&rest)?;
    let d = parent.dim();
    let mut out = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            if t[i] == t[j] {
                out[(i, j)] = op[(k[i], k[j])];
            }
        }
    }
    Ok(out)
}

/// Reorders the tensor factors of `op` from `from` to `to`.
pub fn permute_registers(op: &Mat, from: &RegisterSpace, to: &RegisterSpace) -> Result<Mat> {
    if !from.same_registers(to) {
        return Err(Error::SpaceMismatch);
    }
    let map = to.project_indices(from)?;
    let d = to.dim();
    Ok(Mat::from_fn(d, d, |i, j| op[(map[i], map[j])]))
}

pub fn trace_distance(a: &impl Operator, b: &impl Operator) -> Result<f64> {
    same_space(a, b)?;
    Ok(0.5 * trace_norm(&(a.matrix() - b.matrix())))
}

/// `||sqrt(a) sqrt(b)||_1` for PSD `a`, `b`.
pub fn fidelity_root(a: &Mat, b: &Mat) -> f64 {
    let sa = mat_power(a, 0.5);
    eigh(&(&sa * b * &sa))
        .values
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum()
}

/// Generalized fidelity for subnormalized states.
pub fn generalized_fidelity(a: &impl Operator, b: &impl Operator) -> Result<f64> {
    same_space(a, b)?;
    let ta = real_trace(a.matrix()).min(1.0);
    let tb = real_trace(b.matrix()).min(1.0);
    let f = fidelity_root(a.matrix(), b.matrix()) + ((1.0 - ta) * (1.0 - tb)).max(0.0).sqrt();
    Ok((f * f).min(1.0))
}

pub fn purified_distance(a: &impl Operator, b: &impl Operator) -> Result<f64> {
    Ok((1.0 - generalized_fidelity(a, b)?).max(0.0).sqrt())
}

/// Gap `(1+t) Π X Π + (1+1/t) Π⊥ X Π⊥ - X`, certified PSD.
pub fn asymmetric_pinching_witness(
    x: &HermitianObservable,
    pi: &HermitianObservable,
    t: f64,
) -> Result<HermitianObservable> {
    if x.space != pi.space {
        return Err(Error::SpaceMismatch);
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(crate::error::domain("t", t, "(0, inf)"));
    }
    let p = &pi.matrix;
    let dev = (p * p - p).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dev > 1e-9 {
        return Err(Error::NotProjector(dev));
    }
    let lo = x.min_eigenvalue();
    if lo < -1e-9 {
        return Err(Error::NotPsd(lo));
    }
    let d = p.nrows();
    let q = Mat::identity(d, d) - p;
    let gap = (p * &x.matrix * p).scale(1.0 + t) + (&q * &x.matrix * &q).scale(1.0 + 1.0 / t)
        - &x.matrix;
    let gap = hermitize(&gap);
    let lo = min_eigenvalue(&gap);
    if lo < -1e-9 {
        return Err(Error::Certificate(format!(
            "pinching gap has eigenvalue {lo:e}"
        )));
    }
    Ok(HermitianObservable {
        space: x.space.clone(),
        matrix: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit(label: &str) -> RegisterSpace {
        RegisterSpace::new(&[(label, 2)]).unwrap()
    }

    fn close(a: &Mat, b: &Mat) -> f64 {
        (a - b).norm()
    }

    #[test]
    fn space_rejects_duplicates_and_zero() {
        assert!(matches!(
            RegisterSpace::new(&[("A", 2), ("A", 3)]),
            Err(Error::DuplicateLabel(_))
        ));
        assert!(matches!(
            RegisterSpace::new(&[("A", 0)]),
            Err(Error::ZeroDimension(_))
        ));
        assert_eq!(RegisterSpace::empty().dim(), 1);
    }

    #[test]
    fn maximally_mixed_product() {
        let a = DensityOperator::maximally_mixed(qubit("A")).unwrap();
        let b = DensityOperator::maximally_mixed(qubit("B")).unwrap();
        let ab = tensor_product(&a, &b).unwrap();
        assert!(close(ab.matrix(), &Mat::identity(4, 4).unscale(4.0)) < 1e-15);
        assert!(tensor_product(&a, &a).is_err());
    }

    #[test]
    fn tensor_with_scalar_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = random::density(&mut rng, qubit("A"), None).unwrap();
        let one = DensityOperator::new(RegisterSpace::empty(), Mat::identity(1, 1)).unwrap();
        assert!(close(tensor_product(&r, &one).unwrap().matrix(), r.matrix()) < 1e-15);
    }

    #[test]
    fn kron_matches_index_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random::density(&mut rng, qubit("A"), None).unwrap();
        let b = random::density(&mut rng, qubit("B"), None).unwrap();
        let ab = tensor_product(&a, &b).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = a.matrix()[(i / 2, j / 2)] * b.matrix()[(i % 2, j % 2)];
                assert!((ab.matrix()[(i, j)] - want).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn partial_trace_of_product_and_bell() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random::density(&mut rng, qubit("A"), None).unwrap();
        let b = random::density(&mut rng, qubit("B"), None).unwrap();
        let ab = tensor_product(&a, &b).unwrap();
        assert!(close(ab.partial_trace(&["A"]).unwrap().matrix(), a.matrix()) < 1e-14);
        assert!(close(ab.partial_trace(&["B"]).unwrap().matrix(), b.matrix()) < 1e-14);

        let bell = random::bell(&["A", "B"]).unwrap();
        let rb = bell.partial_trace(&["B"]).unwrap();
        assert!(close(rb.matrix(), &Mat::identity(2, 2).unscale(2.0)) < 1e-15);
    }

    #[test]
    fn nested_partial_traces_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = RegisterSpace::new(&[("A", 2), ("B", 3), ("C", 2)]).unwrap();
        let r = random::density(&mut rng, s, None).unwrap();
        let direct = r.partial_trace(&["A", "C"]).unwrap();
        let two = r
            .partial_trace(&["A", "B"])
            .unwrap()
            .partial_trace(&["A"])
            .unwrap();
        let other = r.partial_trace(&["B", "C"]).unwrap().partial_trace(&["C"]).unwrap();
        let ac_a = direct.partial_trace(&["A"]).unwrap();
        let ac_c = direct.partial_trace(&["C"]).unwrap();
        assert!(close(two.matrix(), ac_a.matrix()) < 1e-14);
        assert!(close(other.matrix(), ac_c.matrix()) < 1e-14);
        assert!((direct.trace() - r.trace()).abs() < 1e-14);
    }

    #[test]
    fn embed_and_permute_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = RegisterSpace::new(&[("A", 2), ("B", 3)]).unwrap();
        let t = RegisterSpace::new(&[("B", 3), ("A", 2)]).unwrap();
        let r = random::density(&mut rng, s.clone(), None).unwrap();
        let p = permute_registers(r.matrix(), &s, &t).unwrap();
        let back = permute_registers(&p, &t, &s).unwrap();
        assert!(close(&back, r.matrix()) < 1e-15);
        let x = random::density(&mut rng, qubit("A"), None).unwrap();
        let e = embed(x.matrix(), x.space(), &s).unwrap();
        assert!(close(&e, &kron(x.matrix(), &Mat::identity(3, 3))) < 1e-15);
        let e2 = embed(x.matrix(), x.space(), &t).unwrap();
        assert!(close(&e2, &kron(&Mat::identity(3, 3), x.matrix())) < 1e-15);
    }

    #[test]
    fn herm_power_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = RegisterSpace::new(&[("A", 3)]).unwrap();
        let r = random::density(&mut rng, s.clone(), None).unwrap().as_observable();
        assert!(close(herm_power(&r, 1.0).matrix(), r.matrix()) < 1e-14);
        let mm = DensityOperator::maximally_mixed(s).unwrap().as_observable();
        let p = herm_power(&mm, 0.7);
        assert!(close(p.matrix(), &Mat::identity(3, 3).scale(3f64.powf(-0.7))) < 1e-14);

        // Oracle: eigen-decompose, raise each eigenvalue, reassemble.
        let e = r.matrix().clone().symmetric_eigen();
        let mut want = Mat::zeros(3, 3);
        for k in 0..3 {
            let v = e.eigenvectors.column(k);
            want += (&v * v.adjoint()).scale(e.eigenvalues[k].powf(0.37));
        }
        assert!(close(herm_power(&r, 0.37).matrix(), &want) < 1e-12);
    }

    #[test]
    fn negative_power_is_pseudo_inverse() {
        let s = qubit("A");
        let x = HermitianObservable::new(s, diag_matrix(&[0.5, 0.0])).unwrap();
        let inv = herm_power(&x, -1.0);
        assert!(close(inv.matrix(), &diag_matrix(&[2.0, 0.0])) < 1e-15);
        let proj = herm_power(&x, 0.0);
        assert!(close(proj.matrix(), &diag_matrix(&[1.0, 0.0])) < 1e-15);
    }

    #[test]
    fn distances_basic() {
        let s = qubit("A");
        let z0 = DensityOperator::diagonal(s.clone(), &[1.0, 0.0]).unwrap();
        let z1 = DensityOperator::diagonal(s.clone(), &[0.0, 1.0]).unwrap();
        assert!((trace_distance(&z0, &z1).unwrap() - 1.0).abs() < 1e-14);
        assert!(trace_distance(&z0, &z0).unwrap().abs() < 1e-14);

        let plus = DensityOperator::pure(
            s.clone(),
            &DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]),
        )
        .unwrap();
        let pd = purified_distance(&z0, &plus).unwrap();
        assert!((pd - 0.5f64.sqrt()).abs() < 1e-12);

        let half = z0.scaled(0.5).unwrap();
        assert!(purified_distance(&half, &half).unwrap() < 1e-7);

        let p = DensityOperator::diagonal(s.clone(), &[0.3, 0.7]).unwrap();
        let q = DensityOperator::diagonal(s, &[0.55, 0.45]).unwrap();
        assert!((trace_distance(&p, &q).unwrap() - 0.25).abs() < 1e-14);
        assert!(trace_distance(&p, &z0.as_observable()).is_ok());
        let other = DensityOperator::diagonal(qubit("B"), &[0.5, 0.5]).unwrap();
        assert!(matches!(trace_distance(&p, &other), Err(Error::SpaceMismatch)));
    }

    #[test]
    fn pinching_witness_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = RegisterSpace::new(&[("A", 4)]).unwrap();
        let x = random::psd(&mut rng, s.clone(), 4);
        let pi = random::projector(&mut rng, s.clone(), 2);
        for t in [1.0, 0.3] {
            let g = asymmetric_pinching_witness(&x, &pi, t).unwrap();
            assert!(g.min_eigenvalue() >= -1e-9);
        }
        // Block-diagonal X: gap is t Π X Π + Π⊥ X Π⊥ / t.
        let xb = HermitianObservable::new(s.clone(), diag_matrix(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        let pb = HermitianObservable::new(s.clone(), diag_matrix(&[1.0, 1.0, 0.0, 0.0])).unwrap();
        let g = asymmetric_pinching_witness(&xb, &pb, 0.5).unwrap();
        assert!(close(g.matrix(), &diag_matrix(&[0.5, 1.0, 6.0, 8.0])) < 1e-14);
        let bad = HermitianObservable::new(s, diag_matrix(&[0.5, 1.0, 0.0, 0.0])).unwrap();
        assert!(matches!(
            asymmetric_pinching_witness(&xb, &bad, 1.0),
            Err(Error::NotProjector(_))
        ));
    }

    #[test]
    fn state_json_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = RegisterSpace::new(&[("A", 2), ("B", 2)]).unwrap();
        let r = random::density(&mut rng, s, None).unwrap();
        let text = r.to_json().to_string();
        let back = DensityOperator::from_json(&text).unwrap();
        assert!(close(back.matrix(), r.matrix()) < 1e-15);
        assert_eq!(back.space(), r.space());
    }

    #[test]
    fn classical_joint_marginals() {
        let s = RegisterSpace::new(&[("A", 2), ("B", 3)]).unwrap();
        let p = ClassicalJoint::new(s, vec![0.1, 0.2, 0.1, 0.3, 0.2, 0.1]).unwrap();
        let b = p.marginal(&["B"]).unwrap();
        assert!((b.probs()[0] - 0.4).abs() < 1e-15);
        let t = p.blocks(&["A"], &["B"]).unwrap();
        assert_eq!(t[2], vec![0.1, 0.1]);
        let bad = ClassicalJoint::new(RegisterSpace::new(&[("A", 2)]).unwrap(), vec![0.7, 0.7]);
        assert!(bad.is_err());
    }

    #[test]
    fn rejects_invalid_states() {
        let s = qubit("A");
        assert!(matches!(
            DensityOperator::new(s.clone(), diag_matrix(&[1.2, -0.2])),
            Err(Error::NotPsd(_))
        ));
        assert!(matches!(
            DensityOperator::new(s.clone(), diag_matrix(&[0.8, 0.8])),
            Err(Error::InvalidTrace(_))
        ));
        let mut m = diag_matrix(&[0.5, 0.5]);
        m[(0, 1)] = C64::new(0.1, 0.0);
        assert!(matches!(
            DensityOperator::new(s, m),
            Err(Error::NotHermitian(_))
        ));
    }
}
