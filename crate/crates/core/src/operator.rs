//! Dense Hermitian linear algebra.
//!
//! Every form, operator and perturbation in the crate is a [`HermitianOperator`]:
//! in finite dimension a symmetric sesquiform and its operator coincide, and the
//! form domain is the whole space. Operator functions go through the spectral
//! theorem, so `e^{-H}`, `H^{1/2}`, `H^{-1/2}` and `log H` share one code path.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Absolute tolerance on `A[i][j] - conj(A[j][i])` accepted at construction.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative Frobenius tolerance for the spectral reconstruction invariant.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// A dense complex conjugate-symmetric matrix, stored exactly symmetrized.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    m: CMatrix,
}

impl HermitianOperator {
    /// Validates conjugate symmetry to [`HERMITIAN_TOL`] and stores `(A + A*)/2`.
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, HERMITIAN_TOL)
    }

    pub fn with_tolerance(m: CMatrix, tol: f64) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows == 0 || cols == 0 {
            return Err(Error::Empty);
        }
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        for i in 0..rows {
            for j in i..cols {
                let deviation = (m[(i, j)] - m[(j, i)].conj()).norm();
                if !deviation.is_finite() || deviation > tol {
                    return Err(Error::NotHermitian {
                        row: i,
                        col: j,
                        deviation,
                        tolerance: tol,
                    });
                }
            }
        }
        Ok(Self::symmetrize(m))
    }

    /// Hermitian part `(A + A*)/2` of an arbitrary square matrix.
    pub fn symmetrize(m: CMatrix) -> Self {
        let n = m.nrows();
        assert_eq!(n, m.ncols(), "symmetrize requires a square matrix");
        let mut s = m;
        for i in 0..n {
            s[(i, i)] = Complex64::new(s[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                let v = (s[(i, j)] + s[(j, i)].conj()) * 0.5;
                s[(i, j)] = v;
                s[(j, i)] = v.conj();
            }
        }
        HermitianOperator { m: s }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::Empty);
        }
        let n = diag.len();
        let m = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Ok(HermitianOperator { m })
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        HermitianOperator {
            m: CMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        HermitianOperator {
            m: CMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn frobenius_distance(&self, other: &HermitianOperator) -> f64 {
        (&self.m - &other.m).norm()
    }

    /// `A + alpha I`.
    pub fn shifted(&self, alpha: f64) -> HermitianOperator {
        let mut m = self.m.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += Complex64::new(alpha, 0.0);
        }
        HermitianOperator { m }
    }

    pub fn scaled(&self, c: f64) -> HermitianOperator {
        HermitianOperator {
            m: &self.m * Complex64::new(c, 0.0),
        }
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &HermitianOperator, lambda: f64) -> HermitianOperator {
        self.scaled(lambda) + other.scaled(1.0 - lambda)
    }

    /// Real quadratic form `<psi, A psi>`.
    pub fn expectation(&self, psi: &CVector) -> f64 {
        psi.dotc(&(&self.m * psi)).re
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.m[(i, j)].norm() <= tol))
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            })
        }
    }

    pub fn spectral(&self) -> Result<SpectralDecomposition> {
        spectral(self)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(spectral(self)?.eigenvalues)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(spectral(self)?.eigenvalues[0])
    }
}

impl Add for HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: HermitianOperator) -> HermitianOperator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in addition");
        HermitianOperator { m: self.m + rhs.m }
    }
}

impl<'a> Add<&'a HermitianOperator> for &'a HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: &HermitianOperator) -> HermitianOperator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in addition");
        HermitianOperator {
            m: &self.m + &rhs.m,
        }
    }
}

impl Sub for HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: HermitianOperator) -> HermitianOperator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in subtraction");
        HermitianOperator { m: self.m - rhs.m }
    }
}

impl<'a> Sub<&'a HermitianOperator> for &'a HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: &HermitianOperator) -> HermitianOperator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in subtraction");
        HermitianOperator {
            m: &self.m - &rhs.m,
        }
    }
}

impl Neg for HermitianOperator {
    type Output = HermitianOperator;
    fn neg(self) -> HermitianOperator {
        HermitianOperator { m: -self.m }
    }
}

impl Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, c: f64) -> HermitianOperator {
        self.scaled(c)
    }
}

impl Mul<f64> for HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, c: f64) -> HermitianOperator {
        self.scaled(c)
    }
}

/// Eigenvalues in ascending order with the matching unitary of column eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `U diag(values) U*` for a real vector of per-eigenvalue values.
    pub fn synthesize(&self, values: &[f64]) -> HermitianOperator {
        debug_assert_eq!(values.len(), self.dim());
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, &v) in values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(v);
        }
        HermitianOperator::symmetrize(scaled * u.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianOperator {
        self.synthesize(&self.eigenvalues)
    }

    /// Matrix of `A` expressed in this eigenbasis: `U* A U`.
    pub fn to_eigenbasis(&self, a: &HermitianOperator) -> CMatrix {
        self.eigenvectors.adjoint() * a.matrix() * &self.eigenvectors
    }

    pub fn eigenvector(&self, index: usize) -> CVector {
        self.eigenvectors.column(index).into_owned()
    }

    /// Applies `f` to the spectrum, reporting the first eigenvalue where it is undefined.
    pub fn map(&self, f: ScalarFn) -> Result<HermitianOperator> {
        let values = self
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(index, &e)| {
                f.eval(e).ok_or(Error::Domain {
                    function: f.name(),
                    eigenvalue: e,
                    index,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.synthesize(&values))
    }
}

pub fn spectral(a: &HermitianOperator) -> Result<SpectralDecomposition> {
    let m = a.matrix();
    let n = a.dim();
    let eig = m
        .clone()
        .try_symmetric_eigen(EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::NoConvergence {
            dim: n,
            frobenius: m.norm(),
            max_abs: m.iter().map(|z| z.norm()).fold(0.0, f64::max),
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Scalar functions applied through the spectral calculus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarFn {
    Exp,
    /// `x -> e^{-x}`
    NegExp,
    Log,
    Sqrt,
    /// `x -> x^{-1/2}`
    InvSqrt,
    Square,
    Inverse,
    /// `x -> x^p` for `x > 0`
    Pow(f64),
}

impl ScalarFn {
    pub fn name(self) -> &'static str {
        match self {
            ScalarFn::Exp => "exp",
            ScalarFn::NegExp => "exp(-x)",
            ScalarFn::Log => "log",
            ScalarFn::Sqrt => "sqrt",
            ScalarFn::InvSqrt => "x^(-1/2)",
            ScalarFn::Square => "square",
            ScalarFn::Inverse => "inverse",
            ScalarFn::Pow(_) => "pow",
        }
    }

    /// `None` outside the domain.
    pub fn eval(self, x: f64) -> Option<f64> {
        let y = match self {
            ScalarFn::Exp => x.exp(),
            ScalarFn::NegExp => (-x).exp(),
            ScalarFn::Log if x > 0.0 => x.ln(),
            ScalarFn::Sqrt if x >= 0.0 => x.sqrt(),
            ScalarFn::InvSqrt if x > 0.0 => x.sqrt().recip(),
            ScalarFn::Square => x * x,
            ScalarFn::Inverse if x != 0.0 => x.recip(),
            ScalarFn::Pow(p) if x > 0.0 => x.powf(p),
            _ => return None,
        };
        y.is_finite().then_some(y)
    }
}

pub fn apply_function(a: &HermitianOperator, f: ScalarFn) -> Result<HermitianOperator> {
    spectral(a)?.map(f)
}

/// Spectral calculus with an arbitrary closure; non-finite outputs are domain errors.
pub fn apply_fn<F: Fn(f64) -> f64>(a: &HermitianOperator, f: F) -> Result<HermitianOperator> {
    let s = spectral(a)?;
    let values = s
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(index, &e)| {
            let y = f(e);
            if y.is_finite() {
                Ok(y)
            } else {
                Err(Error::Domain {
                    function: "f",
                    eigenvalue: e,
                    index,
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(s.synthesize(&values))
}

/// Schatten exponent: `p >= 1` or `p = f64::INFINITY`.
fn check_schatten_p(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        Err(Error::invalid(
            "p",
            format!("Schatten exponent must be >= 1, got {p}"),
        ))
    } else {
        Ok(())
    }
}

fn schatten_from_singular(values: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0, f64::max)
    } else if p == 1.0 {
        values.sum()
    } else {
        let s: Vec<f64> = values.collect();
        let scale = s.iter().copied().fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        scale
            * s.iter()
                .map(|v| (v / scale).powf(p))
                .sum::<f64>()
                .powf(p.recip())
    }
}

/// `(sum |e_i|^p)^{1/p}` over the spectrum; `p = inf` gives the operator norm.
pub fn schatten_norm(a: &HermitianOperator, p: f64) -> Result<f64> {
    check_schatten_p(p)?;
    let s = spectral(a)?;
    Ok(schatten_from_singular(
        s.eigenvalues.iter().map(|e| e.abs()),
        p,
    ))
}

/// Schatten norm of an arbitrary square matrix via its singular values.
pub fn schatten_norm_general(m: &CMatrix, p: f64) -> Result<f64> {
    check_schatten_p(p)?;
    let sv = m.clone().singular_values();
    Ok(schatten_from_singular(sv.iter().copied(), p))
}

/// Numerically stable `log Tr exp(-H)` from eigenvalues (shifted by the minimum).
pub fn log_trace_exp_neg(eigenvalues: &[f64]) -> f64 {
    let e_min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let s: f64 = eigenvalues.iter().map(|&e| (-(e - e_min)).exp()).sum();
    s.ln() - e_min
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[serde(alias = "harmonic")]
    HarmonicOscillator,
    #[serde(alias = "dirichlet")]
    DirichletBox,
    Custom,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::HarmonicOscillator => "harmonic_oscillator",
            ModelKind::DirichletBox => "dirichlet_box",
            ModelKind::Custom => "custom",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "harmonic" | "harmonic_oscillator" | "harmonic-oscillator" => {
                Ok(ModelKind::HarmonicOscillator)
            }
            "dirichlet" | "dirichlet_box" | "dirichlet-box" => Ok(ModelKind::DirichletBox),
            "custom" => Ok(ModelKind::Custom),
            other => Err(Error::invalid(
                "kind",
                format!(
                    "unknown model kind {other:?} (expected harmonic, dirichlet_box or custom)"
                ),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelParams {
    pub beta0: f64,
    /// Box length for `dirichlet_box`; the spectrum is normalized so this only has to be positive.
    pub length: f64,
    pub custom: Option<HermitianOperator>,
    /// Shift a custom matrix by `(1 - min eigenvalue) I` when it violates `H >= I`.
    pub auto_shift: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            beta0: 0.0,
            length: std::f64::consts::PI,
            custom: None,
            auto_shift: false,
        }
    }
}

/// Unperturbed Hamiltonian `H0 >= I` with threshold `beta0` and cached `Z0 = Tr e^{-H0}`, `Psi0 = log Z0`.
#[derive(Debug, Clone)]
pub struct ModelHamiltonian {
    kind: ModelKind,
    h0: HermitianOperator,
    beta0: f64,
    z0: f64,
    psi0: f64,
}

/// Slack on `min eig(H0) >= 1`.
const MODEL_MIN_EIG_SLACK: f64 = 1e-12;

impl ModelHamiltonian {
    pub fn new(kind: ModelKind, h0: HermitianOperator, beta0: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta0) {
            return Err(Error::invalid(
                "beta0",
                format!("must lie in [0,1), got {beta0}"),
            ));
        }
        let s = spectral(&h0)?;
        let min = s.eigenvalues[0];
        if min < 1.0 - MODEL_MIN_EIG_SLACK {
            return Err(Error::NotPositive {
                min_eigenvalue: min,
            });
        }
        let psi0 = log_trace_exp_neg(&s.eigenvalues);
        Ok(ModelHamiltonian {
            kind,
            h0,
            beta0,
            z0: psi0.exp(),
            psi0,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }
    pub fn h0(&self) -> &HermitianOperator {
        &self.h0
    }
    pub fn beta0(&self) -> f64 {
        self.beta0
    }
    pub fn z0(&self) -> f64 {
        self.z0
    }
    pub fn psi0(&self) -> f64 {
        self.psi0
    }
    pub fn dim(&self) -> usize {
        self.h0.dim()
    }

    /// Admission radius of the first patch, `a0 = 1 - beta0`.
    pub fn radius(&self) -> f64 {
        1.0 - self.beta0
    }

    pub fn with_beta0(&self, beta0: f64) -> Result<Self> {
        ModelHamiltonian::new(self.kind, self.h0.clone(), beta0)
    }
}

pub fn build_model(kind: ModelKind, dim: usize, params: &ModelParams) -> Result<ModelHamiltonian> {
    if dim == 0 {
        return Err(Error::invalid("dim", "must be at least 1"));
    }
    let h0 = match kind {
        // levels n + 1/2 shifted by +1/2
        ModelKind::HarmonicOscillator => {
            let diag: Vec<f64> = (1..=dim).map(|n| n as f64).collect();
            HermitianOperator::from_real_diagonal(&diag)?
        }
        ModelKind::DirichletBox => {
            let l = params.length;
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::invalid(
                    "length",
                    format!("must be positive, got {l}"),
                ));
            }
            let scale = (std::f64::consts::PI / l).powi(2);
            let raw: Vec<f64> = (1..=dim).map(|k| (k * k) as f64 * scale).collect();
            let diag: Vec<f64> = raw.iter().map(|e| e / raw[0]).collect();
            HermitianOperator::from_real_diagonal(&diag)?
        }
        ModelKind::Custom => {
            let m = params
                .custom
                .clone()
                .ok_or_else(|| Error::invalid("entries", "custom model requires a matrix"))?;
            m.check_dim(dim)?;
            let min = m.min_eigenvalue()?;
            if min >= 1.0 - MODEL_MIN_EIG_SLACK {
                m
            } else if params.auto_shift {
                m.shifted(1.0 - min)
            } else {
                return Err(Error::NotPositive {
                    min_eigenvalue: min,
                });
            }
        }
    };
    ModelHamiltonian::new(kind, h0, params.beta0)
}
