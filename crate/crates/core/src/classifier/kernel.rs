use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    Rbf,
    Polynomial,
    Sigmoid,
}

impl KernelKind {
    pub const ALL: [KernelKind; 4] = [
        KernelKind::Linear,
        KernelKind::Rbf,
        KernelKind::Polynomial,
        KernelKind::Sigmoid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Rbf => "rbf",
            KernelKind::Polynomial => "polynomial",
            KernelKind::Sigmoid => "sigmoid",
        }
    }

    pub fn uses_gamma(self) -> bool {
        self != KernelKind::Linear
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(KernelKind::Linear),
            "rbf" => Ok(KernelKind::Rbf),
            "polynomial" | "poly" => Ok(KernelKind::Polynomial),
            "sigmoid" => Ok(KernelKind::Sigmoid),
            other => Err(Error::ConfigInvalid(format!("unknown kernel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub gamma: f64,
    pub degree: u32,
    pub coef0: f64,
}

impl KernelSpec {
    pub fn linear() -> Self {
        KernelSpec {
            kind: KernelKind::Linear,
            gamma: 0.0,
            degree: 1,
            coef0: 0.0,
        }
    }

    pub fn rbf(gamma: f64) -> Self {
        KernelSpec {
            kind: KernelKind::Rbf,
            gamma,
            degree: 1,
            coef0: 0.0,
        }
    }

    pub fn polynomial(gamma: f64, degree: u32, coef0: f64) -> Self {
        KernelSpec {
            kind: KernelKind::Polynomial,
            gamma,
            degree,
            coef0,
        }
    }

    pub fn sigmoid(gamma: f64, coef0: f64) -> Self {
        KernelSpec {
            kind: KernelKind::Sigmoid,
            gamma,
            degree: 1,
            coef0,
        }
    }

    /// Family defaults: cubic polynomial with coef0 = 1, sigmoid with coef0 = 0.
    pub fn family(kind: KernelKind, gamma: f64) -> Self {
        match kind {
            KernelKind::Linear => KernelSpec::linear(),
            KernelKind::Rbf => KernelSpec::rbf(gamma),
            KernelKind::Polynomial => KernelSpec::polynomial(gamma, 3, 1.0),
            KernelKind::Sigmoid => KernelSpec::sigmoid(gamma, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.uses_gamma() && !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::ConfigInvalid(format!("{} kernel needs gamma > 0", self.kind)));
        }
        if self.kind == KernelKind::Polynomial && self.degree < 1 {
            return Err(Error::ConfigInvalid("polynomial degree must be >= 1".into()));
        }
        if !self.coef0.is_finite() {
            return Err(Error::ConfigInvalid("coef0 must be finite".into()));
        }
        Ok(())
    }

    /// Kernel value from the inner product and squared distance of a pair.
    #[inline]
    pub fn from_parts(&self, dot: f64, sqdist: f64) -> f64 {
        match self.kind {
            KernelKind::Linear => dot,
            KernelKind::Rbf => (-self.gamma * sqdist.max(0.0)).exp(),
            KernelKind::Polynomial => (self.gamma * dot + self.coef0).powi(self.degree as i32),
            KernelKind::Sigmoid => (self.gamma * dot + self.coef0).tanh(),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Rbf => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-self.gamma * sq).exp()
            }
            _ => self.from_parts(dot(x, y), 0.0),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            KernelKind::Linear => write!(f, "linear"),
            KernelKind::Rbf => write!(f, "rbf(gamma={})", self.gamma),
            KernelKind::Polynomial => write!(
                f,
                "polynomial(gamma={}, degree={}, coef0={})",
                self.gamma, self.degree, self.coef0
            ),
            KernelKind::Sigmoid => write!(f, "sigmoid(gamma={}, coef0={})", self.gamma, self.coef0),
        }
    }
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::len(x.len(), y.len()));
    }
    Ok(spec.eval(x, y))
}

/// Dense symmetric `n x n` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl GramMatrix {
    pub fn zeros(n: usize) -> Self {
        GramMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn compute<V: AsRef<[f64]> + Sync>(spec: &KernelSpec, xs: &[V]) -> Self {
        let n = xs.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| spec.eval(xs[i].as_ref(), xs[j].as_ref())).collect())
            .collect();
        GramMatrix { n, data: rows.concat() }
    }

    /// Inner-product matrix; kernels of sums of blocks are built from sums of these.
    pub fn inner<V: AsRef<[f64]> + Sync>(xs: &[V]) -> Self {
        GramMatrix::compute(&KernelSpec::linear(), xs)
    }

    pub fn add_assign(&mut self, other: &GramMatrix) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Applies `spec` to an inner-product matrix.
    pub fn kernel_from_inner(&self, spec: &KernelSpec) -> GramMatrix {
        let n = self.n;
        let data = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                (0..n).map(move |j| {
                    let d = self.get(i, j);
                    let sq = self.get(i, i) + self.get(j, j) - 2.0 * d;
                    spec.from_parts(d, sq)
                })
            })
            .collect();
        GramMatrix { n, data }
    }

    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Vec<f64> {
        rows.iter()
            .flat_map(|&i| cols.iter().map(move |&j| self.get(i, j)))
            .collect()
    }

    pub fn submatrix(&self, idx: &[usize]) -> GramMatrix {
        GramMatrix {
            n: idx.len(),
            data: self.select(idx, idx),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_cases() {
        assert_eq!(
            kernel_eval(&KernelSpec::linear(), &[1.0, 2.0], &[3.0, 4.0]).unwrap(),
            11.0
        );
        assert_eq!(
            kernel_eval(&KernelSpec::polynomial(1.0, 2, 0.0), &[1.0, 1.0], &[1.0, 1.0]).unwrap(),
            4.0
        );
        let x = [0.3, -2.0, 7.5];
        assert_eq!(kernel_eval(&KernelSpec::rbf(0.7), &x, &x).unwrap(), 1.0);
        let s = kernel_eval(&KernelSpec::sigmoid(0.5, -1.0), &[1.0, 2.0], &[1.0, 0.0]).unwrap();
        assert!((s - (-0.5f64).tanh()).abs() < 1e-15);
        assert!(kernel_eval(&KernelSpec::linear(), &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn validation() {
        assert!(KernelSpec::rbf(0.0).validate().is_err());
        assert!(KernelSpec::polynomial(1.0, 0, 1.0).validate().is_err());
        assert!(KernelSpec::linear().validate().is_ok());
        assert_eq!("poly".parse::<KernelKind>().unwrap(), KernelKind::Polynomial);
        assert!("cubic".parse::<KernelKind>().is_err());
    }

    #[test]
    fn gram_from_inner_matches_direct() {
        let xs = vec![vec![0.1, 0.2], vec![-1.0, 0.5], vec![2.0, 2.0]];
        let ip = GramMatrix::inner(&xs);
        for spec in [
            KernelSpec::linear(),
            KernelSpec::rbf(0.3),
            KernelSpec::polynomial(0.5, 3, 1.0),
            KernelSpec::sigmoid(0.2, 0.1),
        ] {
            let a = ip.kernel_from_inner(&spec);
            let b = GramMatrix::compute(&spec, &xs);
            for (u, v) in a.data.iter().zip(&b.data) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn block_inner_products_add() {
        let a = vec![vec![1.0, 2.0], vec![3.0, -1.0]];
        let b = vec![vec![0.5], vec![2.0]];
        let joined: Vec<Vec<f64>> = a.iter().zip(&b).map(|(x, y)| [x.clone(), y.clone()].concat()).collect();
        let mut g = GramMatrix::inner(&a);
        g.add_assign(&GramMatrix::inner(&b));
        assert_eq!(g, GramMatrix::inner(&joined));
        assert_eq!(g.submatrix(&[1]).data, vec![10.0 + 4.0]);
    }
}
