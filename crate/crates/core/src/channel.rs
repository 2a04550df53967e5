//! Classical conditional tables and Kraus channels, with diamond distances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{eigh, hermitize, kron, trace_norm, Mat, RegisterSpace, C64, MAX_DIM};
use crate::random;

/// Row-stochastic table `table[x * |out| + y] = P(y | x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalChannel {
    input: RegisterSpace,
    output: RegisterSpace,
    table: Vec<f64>,
}

impl ClassicalChannel {
    pub fn new(input: RegisterSpace, output: RegisterSpace, table: Vec<f64>) -> Result<Self> {
        let (di, dout) = (input.dim(), output.dim());
        if table.len() != di * dout {
            return Err(Error::DimensionMismatch {
                expected: di * dout,
                got: table.len(),
            });
        }
        for x in 0..di {
            let row = &table[x * dout..(x + 1) * dout];
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::InvalidDistribution(format!(
                    "negative entry in row {x}"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidDistribution(format!(
                    "row {x} sums to {s}"
                )));
            }
        }
        Ok(Self {
            input,
            output,
            table,
        })
    }

    /// Builds a channel from a closure `P(y | x)` over flat indices.
    pub fn from_fn(
        input: RegisterSpace,
        output: RegisterSpace,
        f: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        let (di, dout) = (input.dim(), output.dim());
        let table = (0..di * dout).map(|i| f(i / dout, i % dout)).collect();
        Self::new(input, output, table)
    }

    pub fn input(&self) -> &RegisterSpace {
        &self.input
    }

    pub fn output(&self) -> &RegisterSpace {
        &self.output
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn row(&self, x: usize) -> &[f64] {
        let d = self.output.dim();
        &self.table[x * d..(x + 1) * d]
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.table[x * self.output.dim() + y]
    }

    fn same_signature(&self, other: &Self) -> Result<()> {
        if self.input != other.input || self.output != other.output {
            return Err(Error::SpaceMismatch);
        }
        Ok(())
    }

    /// `(1 - delta) self + delta other`.
    pub fn mix(&self, other: &Self, delta: f64) -> Result<Self> {
        self.same_signature(other)?;
        if !(0.0..=1.0).contains(&delta) {
            return Err(domain("delta", delta, "[0, 1]"));
        }
        let table = self
            .table
            .iter()
            .zip(&other.table)
            .map(|(a, b)| (1.0 - delta) * a + delta * b)
            .collect();
        Ok(Self {
            input: self.input.clone(),
            output: self.output.clone(),
            table,
        })
    }

    /// Kraus form `sqrt(P(y|x)) |y><x|`.
    pub fn to_kraus(&self) -> Result<KrausChannel> {
        let (di, dout) = (self.input.dim(), self.output.dim());
        let mut ops = Vec::new();
        for x in 0..di {
            for y in 0..dout {
                let p = self.prob(x, y);
                if p > 0.0 {
                    let mut k = Mat::zeros(dout, di);
                    k[(y, x)] = C64::new(p.sqrt(), 0.0);
                    ops.push(k);
                }
            }
        }
        KrausChannel::new(self.input.clone(), self.output.clone(), ops)
    }
}

/// Max over input letters of the total-variation distance of output rows.
/// Exact for classical channels.
pub fn classical_diamond_distance(n: &ClassicalChannel, m: &ClassicalChannel) -> Result<f64> {
    n.same_signature(m)?;
    Ok((0..n.input.dim())
        .map(|x| {
            0.5 * n
                .row(x)
                .iter()
                .zip(m.row(x))
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max))
}

/// Completely positive trace-preserving map given by Kraus operators.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    input: RegisterSpace,
    output: RegisterSpace,
    kraus: Vec<Mat>,
}

impl KrausChannel {
    pub fn new(input: RegisterSpace, output: RegisterSpace, kraus: Vec<Mat>) -> Result<Self> {
        let (di, dout) = (input.dim(), output.dim());
        let mut sum = Mat::zeros(di, di);
        for k in &kraus {
            if k.nrows() != dout || k.ncols() != di {
                return Err(Error::DimensionMismatch {
                    expected: dout * di,
                    got: k.nrows() * k.ncols(),
                });
            }
            sum += k.adjoint() * k;
        }
        let dev = (sum - Mat::identity(di, di)).norm();
        if dev > 1e-9 {
            return Err(Error::Precondition(format!(
                "Kraus operators are not trace preserving (deviation {dev:e})"
            )));
        }
        Ok(Self {
            input,
            output,
            kraus,
        })
    }

    pub fn unitary(space: RegisterSpace, u: Mat) -> Result<Self> {
        Self::new(space.clone(), space, vec![u])
    }

    pub fn identity(space: RegisterSpace) -> Self {
        let d = space.dim();
        Self {
            input: space.clone(),
            output: space,
            kraus: vec![Mat::identity(d, d)],
        }
    }

    /// `rho -> (1 - p) rho + p I/d` on a single space.
    pub fn depolarizing(space: RegisterSpace, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(domain("p", p, "[0, 1]"));
        }
        let d = space.dim();
        let mut ops = vec![Mat::identity(d, d).scale((1.0 - p).sqrt())];
        let w = (p / d as f64).sqrt();
        for i in 0..d {
            for j in 0..d {
                let mut k = Mat::zeros(d, d);
                k[(i, j)] = C64::new(w, 0.0);
                ops.push(k);
            }
        }
        Self::new(space.clone(), space, ops)
    }

    pub fn input(&self) -> &RegisterSpace {
        &self.input
    }

    pub fn output(&self) -> &RegisterSpace {
        &self.output
    }

    pub fn kraus(&self) -> &[Mat] {
        &self.kraus
    }

    pub fn apply(&self, rho: &Mat) -> Mat {
        let d = self.output.dim();
        let out = self
            .kraus
            .iter()
            .fold(Mat::zeros(d, d), |acc, k| acc + k * rho * k.adjoint());
        hermitize(&out)
    }

    /// `(1 - delta) self + delta other` as a Kraus list.
    pub fn mix(&self, other: &Self, delta: f64) -> Result<Self> {
        if self.input != other.input || self.output != other.output {
            return Err(Error::SpaceMismatch);
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(domain("delta", delta, "[0, 1]"));
        }
        let mut ops: Vec<Mat> = self
            .kraus
            .iter()
            .map(|k| k.scale((1.0 - delta).sqrt()))
            .collect();
        ops.extend(other.kraus.iter().map(|k| k.scale(delta.sqrt())));
        Self::new(self.input.clone(), self.output.clone(), ops)
    }
}

fn top_eigenvector(w: &Mat) -> nalgebra::DVector<C64> {
    let e = eigh(w);
    e.vectors.column(e.values.len() - 1).into_owned()
}

/// Lower bound on half the diamond distance by see-saw ascent over pure
/// inputs on `A ⊗ R` with `|R| = |A|`. Each restart starts from a random
/// pure input; the objective never decreases along an ascent.
pub fn quantum_diamond_lower_bound(
    n: &KrausChannel,
    m: &KrausChannel,
    restarts: usize,
    seed: u64,
) -> Result<f64> {
    if n.input.dim() != m.input.dim() || n.output.dim() != m.output.dim() {
        return Err(Error::SpaceMismatch);
    }
    let (di, dout) = (n.input.dim(), n.output.dim());
    if di * di > MAX_DIM * MAX_DIM || dout * di > MAX_DIM {
        return Err(Error::TooLarge(format!(
            "extended output dimension {}",
            dout * di
        )));
    }
    let id = Mat::identity(di, di);
    let kn: Vec<Mat> = n.kraus.iter().map(|k| kron(k, &id)).collect();
    let km: Vec<Mat> = m.kraus.iter().map(|k| kron(k, &id)).collect();
    let out = |ops: &[Mat], psi: &Mat| {
        ops.iter()
            .fold(Mat::zeros(dout * di, dout * di), |acc, k| {
                acc + k * psi * k.adjoint()
            })
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..restarts.max(1) {
        let mut v = random::pure_vector(&mut rng, di * di);
        let mut value = -1.0;
        for _ in 0..500 {
            let psi = &v * v.adjoint();
            let delta = hermitize(&(out(&kn, &psi) - out(&km, &psi)));
            let e = eigh(&delta);
            let current = 0.5 * e.values.iter().map(|l| l.abs()).sum::<f64>();
            if current <= value + 1e-14 {
                value = value.max(current);
                break;
            }
            value = current;
            let s = e.apply(|l| if l > 0.0 { 1.0 } else if l < 0.0 { -1.0 } else { 0.0 });
            let mut w = Mat::zeros(di * di, di * di);
            for k in &kn {
                w += k.adjoint() * &s * k;
            }
            for k in &km {
                w -= k.adjoint() * &s * k;
            }
            v = top_eigenvector(&hermitize(&w));
        }
        best = best.max(value);
    }
    Ok(best)
}

/// Half trace norm of the output difference on a fixed input on `A ⊗ R`.
pub fn output_distance_on(n: &KrausChannel, m: &KrausChannel, input: &Mat) -> Result<f64> {
    let di = n.input.dim();
    if input.nrows() % di != 0 {
        return Err(Error::DimensionMismatch {
            expected: di,
            got: input.nrows(),
        });
    }
    let r = input.nrows() / di;
    let id = Mat::identity(r, r);
    let apply = |ch: &KrausChannel| {
        ch.kraus.iter().fold(
            Mat::zeros(ch.output.dim() * r, ch.output.dim() * r),
            |acc, k| {
                let kk = kron(k, &id);
                acc + &kk * input * kk.adjoint()
            },
        )
    };
    Ok(0.5 * trace_norm(&(apply(n) - apply(m))))
}
