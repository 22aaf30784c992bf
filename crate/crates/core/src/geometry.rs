//! BKM metric, the Duhamel identity, `(+1)`-affine mixtures and parallel transport.
//!
//! The BKM inner product at `rho = e^{-(H + Psi)}` is
//! `g(Y, X) = int_0^1 Tr(rho^l Y rho^{1-l} X) dl`. In the eigenbasis of `H` the
//! integral is done in closed form: with `p_i = e^{-e_i}`,
//! `int_0^1 p_i^l p_j^{1-l} dl = (e^{-e_j} - e^{-e_i}) / (e_i - e_j)`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::atlas::{mix_chains, ManifoldPoint};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gibbs::{center, gibbs_state, GibbsState, TangentVector, CENTERING_TOL};
use crate::operator::{log_trace_exp_neg, HermitianOperator, ModelHamiltonian};
use crate::perturbation::Perturbation;
use crate::quadrature::GaussLegendre;

/// Relative gap below which the kernel switches to its series branch.
pub const SWITCH_EPS: f64 = 1e-7;
/// Gram matrices with min eigenvalue below this (relative to the largest diagonal) are rank deficient.
pub const GRAM_RANK_TOL: f64 = 1e-12;

/// `phi(d) = (e^d - 1) / d` by its Taylor series, for small `|d|`.
fn phi_series(d: f64) -> f64 {
    1.0 + d / 2.0 * (1.0 + d / 3.0 * (1.0 + d / 4.0 * (1.0 + d / 5.0)))
}

/// Kernel `k(e_i, e_j)` of the closed-form BKM sum.
#[derive(Debug, Clone)]
pub struct BkmKernel {
    pub eigenvalues: Vec<f64>,
    pub kernel: DMatrix<f64>,
    pub switch_eps: f64,
}

impl BkmKernel {
    /// Kernel over the normalized energies `e_i + Psi` of `state`.
    pub fn new(state: &GibbsState, switch_eps: f64) -> BkmKernel {
        let e = state.normalized_energies();
        let n = e.len();
        let kernel = DMatrix::from_fn(n, n, |i, j| kernel_entry(e[i], e[j], switch_eps));
        BkmKernel {
            eigenvalues: e,
            kernel,
            switch_eps,
        }
    }
}

/// `(e^{-ej} - e^{-ei}) / (ei - ej)`, evaluated as `e^{-ej} phi(ej - ei)`.
pub fn kernel_entry(ei: f64, ej: f64, switch_eps: f64) -> f64 {
    let d = ej - ei;
    if d == 0.0 {
        (-ei).exp()
    } else if d.abs() > switch_eps * ei.abs().max(1.0) {
        (-ej).exp() * d.exp_m1() / d
    } else {
        (-ej).exp() * phi_series(d)
    }
}

/// Operand used in the kernel sum: the centered part, or the raw `cI` for the identity direction.
fn operand<'a>(state: &GibbsState, v: &'a TangentVector) -> Result<&'a HermitianOperator> {
    v.raw.check_dim(state.dim())?;
    if v.is_identity_direction(1e-14) {
        return Ok(&v.raw);
    }
    v.check_centered(state, CENTERING_TOL)?;
    Ok(&v.centered)
}

fn kernel_sum(
    state: &GibbsState,
    kernel: &BkmKernel,
    y: &HermitianOperator,
    x: &HermitianOperator,
) -> f64 {
    let s = state.spectrum();
    let yt = s.to_eigenbasis(y);
    let xt = s.to_eigenbasis(x);
    let n = state.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += kernel.kernel[(i, j)] * (yt[(i, j)] * xt[(j, i)]).re;
        }
    }
    acc
}

/// `g_rho(Y, X)` in closed form. The identity direction is accepted: `g(Y, I) = rho.Y`.
pub fn bkm(state: &GibbsState, y: &TangentVector, x: &TangentVector) -> Result<f64> {
    let ky = operand(state, y)?;
    let kx = operand(state, x)?;
    let kernel = BkmKernel::new(state, SWITCH_EPS);
    Ok(kernel_sum(state, &kernel, ky, kx))
}

/// `int_0^1 Tr(rho^l Y rho^{1-l} X) dl` by Gauss–Legendre quadrature on full matrix products.
pub fn bkm_quadrature(
    state: &GibbsState,
    y: &HermitianOperator,
    x: &HermitianOperator,
    nodes: usize,
    exec: Execution,
) -> Result<f64> {
    y.check_dim(state.dim())?;
    x.check_dim(state.dim())?;
    let rule = GaussLegendre::new(nodes)?;
    Ok(rule.integrate(exec, |l| {
        let a = state.rho_power(l);
        let b = state.rho_power(1.0 - l);
        (a.matrix() * y.matrix() * b.matrix() * x.matrix())
            .trace()
            .re
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct GramMatrix {
    pub entries: Vec<Vec<f64>>,
    pub min_eigenvalue: Option<f64>,
}

/// Gram matrix of the BKM metric over `basis`; rank deficiency is an error carrying the matrix.
pub fn bkm_gram(state: &GibbsState, basis: &[TangentVector]) -> Result<GramMatrix> {
    let n = basis.len();
    if n == 0 {
        return Ok(GramMatrix {
            entries: Vec::new(),
            min_eigenvalue: None,
        });
    }
    let ops = basis
        .iter()
        .map(|v| {
            v.raw.check_dim(state.dim())?;
            v.check_centered(state, CENTERING_TOL)?;
            Ok(&v.centered)
        })
        .collect::<Result<Vec<_>>>()?;
    let zero = zero_directions(basis);
    let kernel = BkmKernel::new(state, SWITCH_EPS);
    let mut g = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            if zero.contains(&a) || zero.contains(&b) {
                continue;
            }
            let v = kernel_sum(state, &kernel, ops[a], ops[b]);
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    let eig = SymmetricEigen::new(g.clone());
    let (k, &min) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty basis");
    let entries: Vec<Vec<f64>> = (0..n)
        .map(|a| (0..n).map(|b| g[(a, b)]).collect())
        .collect();
    let scale = (0..n)
        .map(|a| g[(a, a)].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    if min <= GRAM_RANK_TOL * scale {
        return Err(Error::RankDeficient {
            gram: entries,
            min_eigenvalue: min,
            null_combination: eig.eigenvectors.column(k).iter().copied().collect(),
        });
    }
    Ok(GramMatrix {
        entries,
        min_eigenvalue: Some(min),
    })
}

/// Indices of basis vectors whose centered part vanishes (multiples of the identity).
pub fn zero_directions(basis: &[TangentVector]) -> Vec<usize> {
    basis
        .iter()
        .enumerate()
        .filter(|(_, v)| v.centered.frobenius_norm() <= 1e-12 * v.raw.frobenius_norm().max(1.0))
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DuhamelReport {
    /// `Tr e^{-H0} - Tr e^{-H_X}`
    pub lhs: f64,
    /// `int_0^1 Tr(e^{-l H0} X e^{-(1-l) H_X}) dl`
    pub rhs: f64,
    pub residual: f64,
    pub nodes: usize,
}

impl DuhamelReport {
    /// `residual < rel * |lhs|`, with `floor` when the difference vanishes.
    pub fn within(&self, rel: f64, floor: f64) -> bool {
        self.residual < (rel * self.lhs.abs()).max(floor)
    }
}

/// Trace-level Duhamel identity `Z_0 - Z_X = int_0^1 Tr(e^{-l H0} X e^{-(1-l) H_X}) dl`.
pub fn duhamel_check(x: &Perturbation<'_>, nodes: usize, exec: Execution) -> Result<DuhamelReport> {
    if nodes < 2 {
        return Err(Error::invalid(
            "nodes",
            format!("need at least 2, got {nodes}"),
        ));
    }
    let base: &ModelHamiltonian = x.base();
    let h0 = base.h0().spectral()?;
    let hx = (base.h0() + x.form()).spectral()?;
    let z = |ev: &[f64]| ev.iter().map(|e| (-e).exp()).sum::<f64>();
    let lhs = z(&h0.eigenvalues) - z(&hx.eigenvalues);
    let rule = GaussLegendre::new(nodes)?;
    let xm = x.form().matrix();
    let rhs = rule.integrate(exec, |l| {
        let a = h0.synthesize(
            &h0.eigenvalues
                .iter()
                .map(|e| (-l * e).exp())
                .collect::<Vec<_>>(),
        );
        let b = hx.synthesize(
            &hx.eigenvalues
                .iter()
                .map(|e| (-(1.0 - l) * e).exp())
                .collect::<Vec<_>>(),
        );
        (a.matrix() * xm * b.matrix()).trace().re
    });
    Ok(DuhamelReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        nodes,
    })
}

/// `(+1)` mixture: the chain whose total is `lambda total(p) + (1 - lambda) total(q)`.
///
/// Mixing is level by level; a failed gate would contradict `(+1)`-convexity and is
/// reported as [`Error::Falsified`].
pub fn plus_mix(p: &ManifoldPoint, q: &ManifoldPoint, lambda: f64) -> Result<ManifoldPoint> {
    let (point, levels) = mix_chains(p, q, lambda)?;
    match point {
        Some(m) => Ok(m),
        None => {
            let bad = levels
                .iter()
                .find(|l| !l.passed())
                .expect("a failing level");
            Err(Error::Falsified {
                level: bad.level,
                reason: format!(
                    "mixed norm {} vs witness {} (small {}, psi convexity {}, positive {})",
                    bad.mixed_norm, bad.witness, bad.small, bad.psi_convexity_holds, bad.positive
                ),
            })
        }
    }
}

/// `Psi` of the mixed state at each `lambda`.
pub fn psi_along_mix(p: &ManifoldPoint, q: &ManifoldPoint, lambdas: &[f64]) -> Result<Vec<f64>> {
    lambdas
        .iter()
        .map(|&l| {
            let m = plus_mix(p, q, l)?;
            Ok(log_trace_exp_neg(&m.hamiltonian().eigenvalues()?))
        })
        .collect()
}

/// Second differences `f[i-1] - 2 f[i] + f[i+1]` of equally spaced samples.
pub fn second_differences(values: &[f64]) -> Vec<f64> {
    values
        .windows(3)
        .map(|w| w[0] - 2.0 * w[1] + w[2])
        .collect()
}

/// `(+1)` parallel transport between two states. Flat: it needs no path.
#[derive(Debug, Clone)]
pub struct TransportMap {
    pub source: GibbsState,
    pub target: GibbsState,
}

impl TransportMap {
    pub fn new(source: GibbsState, target: GibbsState) -> Result<Self> {
        target.hamiltonian().check_dim(source.dim())?;
        Ok(TransportMap { source, target })
    }

    pub fn inverse(&self) -> TransportMap {
        TransportMap {
            source: self.target.clone(),
            target: self.source.clone(),
        }
    }
}

/// `Y - rho_source.Y  ->  Y - rho_target.Y`.
pub fn transport(map: &TransportMap, v: &TangentVector) -> Result<TangentVector> {
    v.raw.check_dim(map.source.dim())?;
    v.check_centered(&map.source, CENTERING_TOL)?;
    center(&map.target, &v.raw)
}

#[derive(Debug, Clone, Serialize)]
pub struct HessianReport {
    pub steps: (f64, f64),
    pub second_differences: (f64, f64),
    pub richardson: f64,
    pub bkm: f64,
    pub relative_error: f64,
}

/// Default Hessian steps, in units of `1 / ||X_hat||`.
pub const HESSIAN_STEPS: (f64, f64) = (1e-2, 1e-3);

/// Second central differences of `Psi(H + t X_hat)` at `t = 0`, Richardson-combined, against `g(X_hat, X_hat)`.
///
/// `steps` are relative: the actual steps are `steps / ||X_hat||_op`.
pub fn bkm_hessian_check(
    h: &HermitianOperator,
    x_hat: &TangentVector,
    steps: (f64, f64),
) -> Result<HessianReport> {
    if !(steps.0 > 0.0 && steps.1 > 0.0 && steps.0 != steps.1) {
        return Err(Error::invalid("steps", "need two distinct positive steps"));
    }
    let state = gibbs_state(h)?;
    let g = bkm(&state, x_hat, x_hat)?;
    let x = &x_hat.centered;
    let ev = x.eigenvalues()?;
    let scale = ev[0].abs().max(ev[ev.len() - 1].abs());
    if scale == 0.0 {
        return Err(Error::invalid(
            "x_hat",
            "zero direction has no curvature to compare",
        ));
    }
    let steps = (steps.0 / scale, steps.1 / scale);
    let psi = |t: f64| -> Result<f64> { Ok(log_trace_exp_neg(&(h + &x.scaled(t)).eigenvalues()?)) };
    let p0 = psi(0.0)?;
    let d2 = |s: f64| -> Result<f64> { Ok((psi(s)? - 2.0 * p0 + psi(-s)?) / (s * s)) };
    let (h1, h2) = steps;
    let d1 = d2(h1)?;
    let d2v = d2(h2)?;
    let r2 = (h1 / h2).powi(2);
    let richardson = (r2 * d2v - d1) / (r2 - 1.0);
    Ok(HessianReport {
        steps,
        second_differences: (d1, d2v),
        richardson,
        bkm: g,
        relative_error: (richardson - g).abs() / g.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{build_model, ModelKind, ModelParams};
    use crate::sampling::CaseRng;
    use std::sync::Arc;

    fn diag(d: &[f64]) -> HermitianOperator {
        HermitianOperator::from_real_diagonal(d).unwrap()
    }

    fn ho(dim: usize) -> ModelHamiltonian {
        build_model(ModelKind::HarmonicOscillator, dim, &ModelParams::default()).unwrap()
    }

    #[test]
    fn kernel_branches_meet() {
        let rule = GaussLegendre::new(64).unwrap();
        for e in [0.3, 1.0, 7.5, 40.0] {
            let ej = e + SWITCH_EPS * f64::max(e, 1.0);
            // force each branch at the crossover
            let series = kernel_entry(e, ej, f64::INFINITY);
            let exact = kernel_entry(e, ej, 0.0);
            assert!((exact - series).abs() <= 1e-9 * series, "e={e}");
            // int_0^1 e^{-l ei} e^{-(1-l) ej} dl
            let oracle = rule.integrate(Execution::Sequential, |l| (-l * e - (1.0 - l) * ej).exp());
            assert!((series - oracle).abs() <= 1e-13 * oracle, "e={e}");
        }
        assert_eq!(kernel_entry(2.0, 2.0, SWITCH_EPS), (-2f64).exp());
        let k = kernel_entry(1.0, 3.0, SWITCH_EPS);
        assert!((k - ((-3f64).exp() - (-1f64).exp()) / (1.0 - 3.0)).abs() < 1e-16);
        assert!((k - kernel_entry(3.0, 1.0, SWITCH_EPS)).abs() < 1e-16);
    }

    #[test]
    fn commuting_case_is_variance() {
        let s = gibbs_state(&diag(&[1.0, 2.0, 4.0])).unwrap();
        let x = center(&s, &diag(&[0.5, -1.0, 2.0])).unwrap();
        let g = bkm(&s, &x, &x).unwrap();
        let variance = (s.rho().matrix() * x.centered.matrix() * x.centered.matrix())
            .trace()
            .re;
        assert!((g - variance).abs() < 1e-14);
    }

    #[test]
    fn identity_direction_gives_mean() {
        let mut rng = CaseRng::new(3, 3);
        let s = gibbs_state(&rng.hermitian(5)).unwrap();
        let y = center(&s, &rng.hermitian(5)).unwrap();
        let id = center(&s, &HermitianOperator::identity(5)).unwrap();
        assert!(bkm(&s, &y, &id).unwrap().abs() < 1e-12);
        // an uncentered Y is rejected
        let raw = TangentVector {
            raw: y.raw.clone(),
            mean: 0.0,
            centered: y.raw.clone(),
        };
        if y.mean.abs() > 1e-6 {
            assert!(matches!(bkm(&s, &raw, &id), Err(Error::NotCentered { .. })));
        }
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let mut rng = CaseRng::new(10, 0);
        let s = gibbs_state(&rng.hermitian(6)).unwrap();
        let y = center(&s, &rng.hermitian(6)).unwrap();
        let x = center(&s, &rng.hermitian(6)).unwrap();
        let closed = bkm(&s, &y, &x).unwrap();
        let quad = bkm_quadrature(&s, &y.centered, &x.centered, 64, Execution::Sequential).unwrap();
        assert!((closed - quad).abs() <= 1e-9 * closed.abs().max(1e-12));
        let swapped = bkm(&s, &x, &y).unwrap();
        assert!((closed - swapped).abs() < 1e-12);
    }

    #[test]
    fn gram_cases() {
        let s = gibbs_state(&diag(&[1.0, 2.0, 3.0])).unwrap();
        let v = center(&s, &diag(&[1.0, 0.0, 0.0])).unwrap();
        let g = bkm_gram(&s, std::slice::from_ref(&v)).unwrap();
        assert_eq!(g.entries.len(), 1);
        assert!((g.entries[0][0] - bkm(&s, &v, &v).unwrap()).abs() < 1e-15);
        assert!(g.entries[0][0] > 0.0);

        // off-diagonal directions on a diagonal state have no diagonal overlap
        let mut e01 = nalgebra::DMatrix::zeros(3, 3);
        e01[(0, 1)] = num_complex::Complex64::new(1.0, 0.0);
        e01[(1, 0)] = num_complex::Complex64::new(1.0, 0.0);
        let off = center(&s, &HermitianOperator::new(e01).unwrap()).unwrap();
        let g = bkm_gram(&s, &[v.clone(), off]).unwrap();
        assert!(g.entries[0][1].abs() < 1e-15);

        let id = center(&s, &HermitianOperator::identity(3)).unwrap();
        match bkm_gram(&s, &[v, id]) {
            Err(Error::RankDeficient {
                gram,
                null_combination,
                ..
            }) => {
                assert_eq!(gram[1], vec![0.0, 0.0]);
                assert_eq!(gram[0][1], 0.0);
                assert!(null_combination[1].abs() > 0.99);
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
        assert!(bkm_gram(&s, &[]).unwrap().entries.is_empty());
    }

    #[test]
    fn duhamel_zero_and_identity() {
        let m = ho(5);
        let z = Perturbation::new(HermitianOperator::zeros(5), &m).unwrap();
        let r = duhamel_check(&z, 64, Execution::Sequential).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        for alpha in [0.5, 1.0] {
            let x = Perturbation::new(HermitianOperator::identity(5).scaled(alpha), &m).unwrap();
            let r = duhamel_check(&x, 64, Execution::Sequential).unwrap();
            let closed = m.z0() * (1.0 - f64::exp(-alpha));
            assert!((r.lhs - closed).abs() < 1e-14);
            assert!((r.rhs - closed).abs() < 1e-14);
        }
        assert!(duhamel_check(&z, 1, Execution::Sequential).is_err());
    }

    #[test]
    fn duhamel_random() {
        let m = ho(8);
        let x = Perturbation::new(CaseRng::new(4, 4).perturbation(m.h0(), 0.5), &m).unwrap();
        let r = duhamel_check(&x, 64, Execution::Parallel).unwrap();
        assert!(r.within(1e-9, 1e-12), "{r:?}");
    }

    #[test]
    fn transport_identities() {
        let mut rng = CaseRng::new(50, 0);
        let a = gibbs_state(&rng.hermitian(4)).unwrap();
        let b = gibbs_state(&rng.hermitian(4)).unwrap();
        let map = TransportMap::new(a.clone(), b.clone()).unwrap();
        let zero = TangentVector::zero(4);
        let t = transport(&map, &zero).unwrap();
        assert_eq!(t.centered.frobenius_norm(), 0.0);

        let v = center(&a, &rng.hermitian(4)).unwrap();
        let same = TransportMap::new(a.clone(), a.clone()).unwrap();
        assert!(
            transport(&same, &v)
                .unwrap()
                .centered
                .frobenius_distance(&v.centered)
                < 1e-13
        );

        let back = transport(&map.inverse(), &transport(&map, &v).unwrap()).unwrap();
        assert!(back.centered.frobenius_distance(&v.centered) < 1e-12);

        let w = center(&b, &rng.hermitian(4)).unwrap();
        assert!(transport(&map, &w).is_err() || w.mean.abs() < 1e-10);
    }

    #[test]
    fn hessian_matches_bkm() {
        let m = ho(4);
        let s = gibbs_state(m.h0()).unwrap();
        let x = center(&s, &CaseRng::new(60, 0).perturbation(m.h0(), 0.5)).unwrap();
        let r = bkm_hessian_check(m.h0(), &x, HESSIAN_STEPS).unwrap();
        assert!(r.relative_error < 1e-6, "{r:?}");
    }

    #[test]
    fn plus_mix_endpoints_and_convex_psi() {
        let m = Arc::new(ho(5));
        let mut rng = CaseRng::new(70, 0);
        let o = ManifoldPoint::origin(m.clone());
        let p = crate::atlas::extend(&o, &rng.perturbation(m.h0(), 0.4)).unwrap();
        let q = crate::atlas::extend(&o, &rng.perturbation(m.h0(), 0.6)).unwrap();
        assert_eq!(plus_mix(&p, &q, 1.0).unwrap().total(), p.total());
        assert_eq!(plus_mix(&p, &q, 0.0).unwrap().total(), q.total());
        let pp = plus_mix(&p, &p, 0.37).unwrap();
        assert!(pp.total().frobenius_distance(p.total()) < 1e-14);
        let psi = psi_along_mix(&p, &q, &[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        assert!(second_differences(&psi).iter().all(|&d| d >= -1e-12));
    }
}
