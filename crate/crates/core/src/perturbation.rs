//! Relative-bound norms, the KLMN sum, smallness gating and eigenvalue sandwich bounds.
//!
//! A perturbation `X` of `H0` is form-bounded with bounds `(a, b)` when
//! `|<psi, X psi>| <= a <psi, H0 psi> + b ||psi||^2`. In finite dimension the
//! relative norm `||H0^{-1/2} X H0^{-1/2}||` is always a witness with `b = 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{spectral, CVector, HermitianOperator, ModelHamiltonian, ScalarFn};
use crate::sampling::CaseRng;

/// Slack applied to each sandwich and trace inequality, scaled by `1 + |value|`.
pub const SANDWICH_SLACK: f64 = 1e-10;
/// Random directions used to validate a user-supplied `(a, b)` witness.
pub const WITNESS_SAMPLES: u64 = 64;
const WITNESS_SEED: u64 = 0x5eed_b0d5;

/// `H^{-1/2}`, failing unless `H` is positive definite.
pub fn inverse_sqrt(h: &HermitianOperator) -> Result<HermitianOperator> {
    let s = spectral(h)?;
    if s.eigenvalues[0] <= 0.0 {
        return Err(Error::NotPositive {
            min_eigenvalue: s.eigenvalues[0],
        });
    }
    s.map(ScalarFn::InvSqrt)
}

/// `H^{-1/2} X H^{-1/2}`.
pub fn sandwich(x: &HermitianOperator, h: &HermitianOperator) -> Result<HermitianOperator> {
    x.check_dim(h.dim())?;
    let r = inverse_sqrt(h)?;
    Ok(HermitianOperator::symmetrize(
        r.matrix() * x.matrix() * r.matrix(),
    ))
}

/// `||H^{-1/2} X H^{-1/2}||_inf`. With `H = H0` this is `||X||_0`; with `H = H_X` it is `||Y||_X`.
pub fn relative_norm(x: &HermitianOperator, h: &HermitianOperator) -> Result<f64> {
    let s = spectral(&sandwich(x, h)?)?;
    Ok(s.eigenvalues[0].abs().max(s.eigenvalues[s.dim() - 1].abs()))
}

/// Unit-norm direction `psi` attaining `|<psi,X psi>| = ||X||_H <psi,H psi>`.
pub fn maximizing_direction(x: &HermitianOperator, h: &HermitianOperator) -> Result<CVector> {
    let s = spectral(&sandwich(x, h)?)?;
    let last = s.dim() - 1;
    let k = if s.eigenvalues[0].abs() > s.eigenvalues[last].abs() {
        0
    } else {
        last
    };
    let psi = inverse_sqrt(h)?.matrix() * s.eigenvector(k);
    let n = psi.norm();
    Ok(psi / num_complex::Complex64::new(n, 0.0))
}

/// A symmetric form `X` over a base model.
#[derive(Debug, Clone)]
pub struct Perturbation<'a> {
    x: HermitianOperator,
    base: &'a ModelHamiltonian,
}

impl<'a> Perturbation<'a> {
    pub fn new(x: HermitianOperator, base: &'a ModelHamiltonian) -> Result<Self> {
        x.check_dim(base.dim())?;
        Ok(Perturbation { x, base })
    }

    pub fn form(&self) -> &HermitianOperator {
        &self.x
    }

    pub fn base(&self) -> &'a ModelHamiltonian {
        self.base
    }

    /// `||X||_0`.
    pub fn norm0(&self) -> Result<f64> {
        relative_norm(&self.x, self.base.h0())
    }

    pub fn canonical_bound(&self) -> Result<RelativeBound> {
        Ok(RelativeBound {
            a: self.norm0()?,
            b: 0.0,
        })
    }
}

/// Bound pair `(a, b)` in `|X(psi,psi)| <= a q0(psi,psi) + b ||psi||^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelativeBound {
    pub a: f64,
    pub b: f64,
}

impl RelativeBound {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::invalid(
                "bound",
                format!("(a, b) must be finite and nonnegative, got ({a}, {b})"),
            ));
        }
        Ok(RelativeBound { a, b })
    }
}

/// `||X||_0 < threshold`; the threshold defaults to `1 - beta0`.
pub fn is_small(x: &Perturbation<'_>, threshold: Option<f64>) -> Result<bool> {
    let t = threshold.unwrap_or_else(|| x.base.radius());
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::invalid(
            "threshold",
            format!("must lie in (0,1], got {t}"),
        ));
    }
    Ok(x.norm0()? < t)
}

/// The operator of the form `q0 + X`: in finite dimension, `H0 + X`.
pub fn klmn(x: &Perturbation<'_>) -> HermitianOperator {
    x.base.h0() + &x.x
}

/// Checks a witness numerically.
///
/// Any `a >= ||X||_0` is valid outright. Otherwise the inequality is sampled on the
/// eigenvectors of `H0` and on [`WITNESS_SAMPLES`] seeded random directions.
pub fn validate_witness(x: &Perturbation<'_>, bound: RelativeBound) -> Result<()> {
    let norm0 = x.norm0()?;
    if bound.a >= norm0 * (1.0 - 1e-12) {
        return Ok(());
    }
    let h0 = x.base.h0();
    let s = spectral(h0)?;
    let mut rng = CaseRng::new(WITNESS_SEED, 0);
    let directions = (0..s.dim())
        .map(|k| s.eigenvector(k))
        .chain((0..WITNESS_SAMPLES).map(|_| rng.vector(h0.dim())));
    for psi in directions {
        let lhs = x.x.expectation(&psi).abs();
        let rhs = bound.a * h0.expectation(&psi) + bound.b * psi.norm_squared();
        if lhs > rhs * (1.0 + 1e-12) + 1e-14 {
            return Err(Error::InvalidWitness {
                a: bound.a,
                b: bound.b,
                lhs,
                rhs,
            });
        }
    }
    Ok(())
}

fn within(lower: f64, value: f64, upper: f64) -> bool {
    let slack = SANDWICH_SLACK * (1.0 + value.abs());
    lower - slack <= value && value <= upper + slack
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub bound: RelativeBound,
    pub lower: Vec<f64>,
    pub observed: Vec<f64>,
    pub upper: Vec<f64>,
    /// Every index satisfies `lower_n <= observed_n <= upper_n` within [`SANDWICH_SLACK`].
    pub holds: bool,
}

/// `-b + (1-a) lambda_n(H0) <= lambda_n(H_X) <= b + (1+a) lambda_n(H0)` for every `n`.
pub fn eigenvalue_sandwich(x: &Perturbation<'_>, bound: RelativeBound) -> Result<SandwichReport> {
    validate_witness(x, bound)?;
    let base = x.base.h0().eigenvalues()?;
    let observed = klmn(x).eigenvalues()?;
    let lower: Vec<f64> = base
        .iter()
        .map(|l| -bound.b + (1.0 - bound.a) * l)
        .collect();
    let upper: Vec<f64> = base.iter().map(|l| bound.b + (1.0 + bound.a) * l).collect();
    let holds = (0..base.len()).all(|n| within(lower[n], observed[n], upper[n]));
    Ok(SandwichReport {
        bound,
        lower,
        observed,
        upper,
        holds,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceBoundReport {
    pub beta: f64,
    pub bound: RelativeBound,
    /// `e^{b beta} Tr e^{-(1-a) beta H0}`
    pub upper_trace: f64,
    /// `Tr e^{-beta H_X}`
    pub observed: f64,
    /// `e^{-b beta} Tr e^{-(1+a) beta H0}`
    pub lower_trace: f64,
    pub upper_holds: bool,
    pub lower_holds: bool,
}

impl TraceBoundReport {
    pub fn holds(&self) -> bool {
        self.upper_holds && self.lower_holds
    }
}

pub fn trace_bound_check(
    x: &Perturbation<'_>,
    beta: f64,
    bound: RelativeBound,
) -> Result<TraceBoundReport> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid(
            "beta",
            format!("must be positive, got {beta}"),
        ));
    }
    validate_witness(x, bound)?;
    let base = x.base.h0().eigenvalues()?;
    let perturbed = klmn(x).eigenvalues()?;
    let trace = |scale: f64, ev: &[f64]| ev.iter().map(|l| (-scale * beta * l).exp()).sum::<f64>();
    let upper_trace = (bound.b * beta).exp() * trace(1.0 - bound.a, &base);
    let lower_trace = (-bound.b * beta).exp() * trace(1.0 + bound.a, &base);
    let observed = trace(1.0, &perturbed);
    let tol = |v: f64| SANDWICH_SLACK * v.abs().max(1e-300);
    Ok(TraceBoundReport {
        beta,
        bound,
        upper_trace,
        observed,
        lower_trace,
        upper_holds: observed <= upper_trace + tol(upper_trace),
        lower_holds: observed >= lower_trace - tol(lower_trace),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{build_model, ModelKind, ModelParams};

    fn ho(dim: usize, beta0: f64) -> ModelHamiltonian {
        build_model(
            ModelKind::HarmonicOscillator,
            dim,
            &ModelParams {
                beta0,
                ..ModelParams::default()
            },
        )
        .unwrap()
    }

    fn diag(d: &[f64]) -> HermitianOperator {
        HermitianOperator::from_real_diagonal(d).unwrap()
    }

    /// Cholesky route: the spectrum of `L^{-1} X L^{-*}` with `H = L L*`.
    fn cholesky_relative_norm(x: &HermitianOperator, h: &HermitianOperator) -> f64 {
        let l = h.matrix().clone().cholesky().unwrap().l();
        let linv = l.try_inverse().unwrap();
        let m = HermitianOperator::symmetrize(&linv * x.matrix() * linv.adjoint());
        let e = m.eigenvalues().unwrap();
        e[0].abs().max(e[e.len() - 1].abs())
    }

    #[test]
    fn diagonal_relative_norm() {
        let n = relative_norm(&diag(&[0.5, 1.0]), &diag(&[1.0, 2.0])).unwrap();
        assert!((n - 0.5).abs() < 1e-15);
    }

    #[test]
    fn self_relative_norm_is_one() {
        let mut rng = CaseRng::new(2, 0);
        let h = rng.positive_definite(5, 0.3);
        assert!((relative_norm(&h, &h).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relative_norm_matches_cholesky_oracle() {
        let mut rng = CaseRng::new(4, 0);
        for _ in 0..10 {
            let h = rng.positive_definite(6, 1.0);
            let x = rng.hermitian(6);
            let a = relative_norm(&x, &h).unwrap();
            let b = cholesky_relative_norm(&x, &h);
            assert!((a - b).abs() <= 1e-12 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn relative_norm_rejects_nonpositive() {
        let h = diag(&[1.0, -1.0]);
        assert!(matches!(
            relative_norm(&diag(&[1.0, 1.0]), &h),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn smallness_gate() {
        let m = ho(3, 0.0);
        let zero = Perturbation::new(HermitianOperator::zeros(3), &m).unwrap();
        assert!(is_small(&zero, None).unwrap());
        let full = Perturbation::new(m.h0().clone(), &m).unwrap();
        assert!(!is_small(&full, Some(1.0)).unwrap());
        let m6 = ho(3, 0.6);
        let half = Perturbation::new(m6.h0().scaled(0.5), &m6).unwrap();
        assert!(!is_small(&half, None).unwrap());
        assert!(is_small(&half, Some(0.51)).unwrap());
        assert!(is_small(&half, Some(0.0)).is_err());
    }

    #[test]
    fn klmn_is_matrix_sum() {
        let m = build_model(
            ModelKind::Custom,
            2,
            &ModelParams {
                custom: Some(diag(&[1.0, 2.0])),
                ..ModelParams::default()
            },
        )
        .unwrap();
        let x = Perturbation::new(diag(&[0.3, -0.4]), &m).unwrap();
        assert!(klmn(&x).frobenius_distance(&diag(&[1.3, 1.6])) < 1e-15);
        let z = Perturbation::new(HermitianOperator::zeros(2), &m).unwrap();
        assert_eq!(&klmn(&z), m.h0());
    }

    #[test]
    fn klmn_positive_below_unit_norm() {
        let m = ho(8, 0.0);
        let mut rng = CaseRng::new(8, 0);
        for _ in 0..20 {
            let x = Perturbation::new(rng.perturbation(m.h0(), 0.9), &m).unwrap();
            assert!(klmn(&x).min_eigenvalue().unwrap() > 0.0);
        }
    }

    #[test]
    fn sandwich_zero_perturbation() {
        let m = ho(4, 0.0);
        let z = Perturbation::new(HermitianOperator::zeros(4), &m).unwrap();
        let r = eigenvalue_sandwich(&z, RelativeBound::new(0.3, 0.2).unwrap()).unwrap();
        assert!(r.holds);
        assert_eq!(r.observed, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn sandwich_scaling_case_is_tight() {
        let m = ho(5, 0.0);
        let x = Perturbation::new(m.h0().scaled(0.5), &m).unwrap();
        let r = eigenvalue_sandwich(&x, RelativeBound::new(0.5, 0.0).unwrap()).unwrap();
        assert!(r.holds);
        for n in 0..5 {
            let expected = 1.5 * (n + 1) as f64;
            assert!((r.observed[n] - expected).abs() < 1e-12);
            assert!((r.upper[n] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn sandwich_rejects_invalid_witness() {
        let m = ho(4, 0.0);
        let x = Perturbation::new(m.h0().scaled(0.5), &m).unwrap();
        assert!(matches!(
            eigenvalue_sandwich(&x, RelativeBound::new(0.1, 0.0).unwrap()),
            Err(Error::InvalidWitness { .. })
        ));
    }

    #[test]
    fn sampled_witness_with_b() {
        // |X| <= 0.1 H0 + 0.5: valid with a below ||X||_0 = 0.6 on level 1.
        let m = ho(3, 0.0);
        let x = Perturbation::new(diag(&[0.6, 0.5, 0.3]), &m).unwrap();
        let bound = RelativeBound::new(0.1, 0.5).unwrap();
        let r = eigenvalue_sandwich(&x, bound).unwrap();
        assert!(r.holds);
    }

    #[test]
    fn trace_bounds_zero_and_scaling() {
        let m = ho(6, 0.0);
        let z = Perturbation::new(HermitianOperator::zeros(6), &m).unwrap();
        let r = trace_bound_check(&z, 1.0, RelativeBound::new(0.0, 0.0).unwrap()).unwrap();
        for v in [r.upper_trace, r.observed, r.lower_trace] {
            assert!((v - m.z0()).abs() < 1e-14);
        }
        let x = Perturbation::new(m.h0().scaled(0.5), &m).unwrap();
        let r = trace_bound_check(&x, 1.0, RelativeBound::new(0.5, 0.0).unwrap()).unwrap();
        let expected: f64 = (1..=6).map(|n| (-1.5 * n as f64).exp()).sum();
        assert!((r.observed - expected).abs() < 1e-14);
        assert!((r.lower_trace - expected).abs() < 1e-14);
        assert!(r.holds());
        assert!(trace_bound_check(&x, 0.0, RelativeBound::new(0.5, 0.0).unwrap()).is_err());
    }

    #[test]
    fn lemma2_attained_by_maximizer() {
        let m = ho(6, 0.0);
        let mut rng = CaseRng::new(21, 0);
        let x = rng.perturbation(m.h0(), 0.7);
        let psi = maximizing_direction(&x, m.h0()).unwrap();
        let lhs = x.expectation(&psi).abs();
        let rhs = 0.7 * m.h0().expectation(&psi);
        assert!((lhs - rhs).abs() < 1e-8 * rhs);
    }
}
