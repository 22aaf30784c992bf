//! Patches, chain extension, cross-patch norm equivalence and the Luxemburg seminorm.
//!
//! A [`ManifoldPoint`] is reached from the base model by a chain of steps
//! `X_1, ..., X_n`; step `k` must be small relative to the Hamiltonian of the
//! patch opened after step `k - 1`. Each patch renormalizes its Hamiltonian to
//! satisfy `H >= I` and tightens its admission radius to `1 - beta_X` with
//! `beta_X = beta / (1 - a)`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gibbs::gibbs_state;
use crate::operator::{
    log_trace_exp_neg, schatten_norm_general, HermitianOperator, ModelHamiltonian, ScalarFn,
};
use crate::perturbation::{relative_norm, Perturbation};
use crate::quadrature::GaussLegendre;

/// Totals are considered equal within this Frobenius distance (relative to `1 + ||total||`).
pub const TOTAL_TOL: f64 = 1e-12;
/// Path-independence tolerance on the state difference.
pub const STATE_TOL: f64 = 1e-11;
/// Slack on witness and norm-equivalence inequalities.
pub const BOUND_SLACK: f64 = 1e-10;
pub const BISECTION_MAX_ITER: usize = 200;
/// Slack on `min eig(h) >= 1` for a patch Hamiltonian.
const PATCH_MIN_EIG_SLACK: f64 = 1e-10;

/// Chart data at one point of a chain.
#[derive(Debug, Clone, Serialize)]
pub struct Patch {
    /// Number of steps from the base model.
    pub level: usize,
    #[serde(skip)]
    pub h_at_base: HermitianOperator,
    /// Cumulative `alpha` in `h_at_base = H0 + total + alpha I`.
    pub shift: f64,
    pub beta: f64,
    pub radius: f64,
}

impl Patch {
    fn origin(base: &ModelHamiltonian) -> Patch {
        Patch {
            level: 0,
            h_at_base: base.h0().clone(),
            shift: 0.0,
            beta: base.beta0(),
            radius: base.radius(),
        }
    }

    /// Opens a patch at `h` (already containing previous shifts), renormalizing to `h >= I`.
    fn open(level: usize, h: HermitianOperator, prev_shift: f64, beta: f64) -> Result<Patch> {
        let min = h.min_eigenvalue()?;
        let alpha = if min < 1.0 { 1.0 - min } else { 0.0 };
        Ok(Patch {
            level,
            h_at_base: if alpha > 0.0 { h.shifted(alpha) } else { h },
            shift: prev_shift + alpha,
            beta,
            radius: 1.0 - beta,
        })
    }
}

/// How a step was admitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AdmissionRule {
    /// `||Y||_patch < radius`.
    Extension,
    /// Level-wise `(+1)` mixture: `||lambda X1 + (1-lambda) X2||_mix <= max(a1, a2) < 1`.
    Mixture { witness: f64 },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Admission {
    pub norm: f64,
    pub threshold: f64,
    #[serde(flatten)]
    pub rule: AdmissionRule,
}

#[derive(Debug, Clone)]
pub struct ManifoldPoint {
    base: Arc<ModelHamiltonian>,
    steps: Vec<HermitianOperator>,
    total: HermitianOperator,
    patches: Vec<Patch>,
    admissions: Vec<Admission>,
}

impl ManifoldPoint {
    /// The base state `rho_0`, with no steps.
    pub fn origin(base: Arc<ModelHamiltonian>) -> ManifoldPoint {
        let patch = Patch::origin(&base);
        ManifoldPoint {
            total: HermitianOperator::zeros(base.dim()),
            base,
            steps: Vec::new(),
            patches: vec![patch],
            admissions: Vec::new(),
        }
    }

    /// Extends from the origin through every step in order.
    pub fn from_steps(
        base: Arc<ModelHamiltonian>,
        steps: &[HermitianOperator],
    ) -> Result<ManifoldPoint> {
        steps
            .iter()
            .try_fold(ManifoldPoint::origin(base), |p, y| extend(&p, y))
    }

    pub fn base(&self) -> &Arc<ModelHamiltonian> {
        &self.base
    }
    pub fn steps(&self) -> &[HermitianOperator] {
        &self.steps
    }
    pub fn len(&self) -> usize {
        self.steps.len()
    }
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
    /// Cached `sum X_k`.
    pub fn total(&self) -> &HermitianOperator {
        &self.total
    }
    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }
    /// Patch opened at this point (after the last step).
    pub fn patch(&self) -> &Patch {
        self.patches
            .last()
            .expect("a point always has its origin patch")
    }
    pub fn admissions(&self) -> &[Admission] {
        &self.admissions
    }

    /// `H0 + total`.
    pub fn hamiltonian(&self) -> HermitianOperator {
        self.base.h0() + &self.total
    }

    pub fn same_base(&self, other: &ManifoldPoint) -> bool {
        Arc::ptr_eq(&self.base, &other.base)
            || (self.base.beta0() == other.base.beta0() && self.base.h0() == other.base.h0())
    }

    /// Re-derives the admission trail from scratch.
    ///
    /// Extension steps are replayed through [`extend`] and must reproduce the same
    /// patches and decisions; mixture steps are checked against their recorded patch.
    pub fn revalidate(&self) -> Result<()> {
        let mut running = HermitianOperator::zeros(self.base.dim());
        for (k, (step, adm)) in self.steps.iter().zip(&self.admissions).enumerate() {
            let prev = &self.patches[k];
            let next = &self.patches[k + 1];
            let expected_prev = self.base.h0() + &running;
            let scale = 1.0 + prev.h_at_base.frobenius_norm();
            if expected_prev
                .shifted(prev.shift)
                .frobenius_distance(&prev.h_at_base)
                > 1e-10 * scale
            {
                return Err(Error::Falsified {
                    level: k,
                    reason: "patch Hamiltonian does not match H0 + partial sum + shift".into(),
                });
            }
            if prev.h_at_base.min_eigenvalue()? < 1.0 - PATCH_MIN_EIG_SLACK
                || !(prev.radius > 0.0 && prev.radius <= 1.0)
            {
                return Err(Error::Falsified {
                    level: k,
                    reason: format!(
                        "patch violates H >= I or radius in (0,1] (radius {})",
                        prev.radius
                    ),
                });
            }
            let norm = relative_norm(step, &prev.h_at_base)?;
            match adm.rule {
                AdmissionRule::Extension => {
                    if norm.is_nan() || norm >= prev.radius {
                        return Err(Error::Admission {
                            norm,
                            threshold: prev.radius,
                        });
                    }
                    let replay = Patch::open(
                        k + 1,
                        &prev.h_at_base + step,
                        prev.shift,
                        prev.beta / (1.0 - norm),
                    )?;
                    if (replay.shift - next.shift).abs() > 1e-12 * (1.0 + next.shift.abs())
                        || (replay.beta - next.beta).abs() > 1e-12
                    {
                        return Err(Error::Falsified {
                            level: k + 1,
                            reason: "replayed patch differs from recorded patch".into(),
                        });
                    }
                }
                AdmissionRule::Mixture { witness } => {
                    if witness.is_nan()
                        || witness >= 1.0
                        || norm > witness * (1.0 + BOUND_SLACK) + BOUND_SLACK
                    {
                        return Err(Error::Falsified {
                            level: k + 1,
                            reason: format!("mixture step norm {norm} exceeds witness {witness}"),
                        });
                    }
                }
            }
            running = running + step.clone();
        }
        let scale = 1.0 + self.total.frobenius_norm();
        if running.frobenius_distance(&self.total) > TOTAL_TOL * scale {
            return Err(Error::TotalsDiffer {
                difference: running.frobenius_distance(&self.total),
            });
        }
        Ok(())
    }
}

/// Admits `Y` at the patch of `p` when `||Y||_patch < radius`, opening the next patch.
pub fn extend(p: &ManifoldPoint, y: &HermitianOperator) -> Result<ManifoldPoint> {
    y.check_dim(p.base.dim())?;
    let patch = p.patch();
    let norm = relative_norm(y, &patch.h_at_base)?;
    if norm.is_nan() || norm >= patch.radius {
        return Err(Error::Admission {
            norm,
            threshold: patch.radius,
        });
    }
    let next = Patch::open(
        patch.level + 1,
        &patch.h_at_base + y,
        patch.shift,
        patch.beta / (1.0 - norm),
    )?;
    let mut out = p.clone();
    out.total = &out.total + y;
    out.steps.push(y.clone());
    out.patches.push(next);
    out.admissions.push(Admission {
        norm,
        threshold: patch.radius,
        rule: AdmissionRule::Extension,
    });
    Ok(out)
}

/// Extends `p` with zero steps up to `len` steps.
pub fn pad(p: &ManifoldPoint, len: usize) -> Result<ManifoldPoint> {
    let zero = HermitianOperator::zeros(p.base.dim());
    (p.len()..len).try_fold(p.clone(), |acc, _| extend(&acc, &zero))
}

#[derive(Debug, Clone, Serialize)]
pub struct PathReport {
    pub state_distance: f64,
    pub tolerance: f64,
    pub equal: bool,
}

/// Do two chains with the same total reach the same state?
pub fn path_independence_check(p: &ManifoldPoint, q: &ManifoldPoint) -> Result<PathReport> {
    if !p.same_base(q) {
        return Err(Error::BaseMismatch);
    }
    let difference = p.total.frobenius_distance(&q.total);
    if difference > TOTAL_TOL * (1.0 + p.total.frobenius_norm()) {
        return Err(Error::TotalsDiffer { difference });
    }
    let a = gibbs_state(&p.hamiltonian())?;
    let b = gibbs_state(&q.hamiltonian())?;
    let state_distance = a.rho().frobenius_distance(b.rho());
    Ok(PathReport {
        state_distance,
        tolerance: STATE_TOL,
        equal: state_distance <= STATE_TOL,
    })
}

/// Level-by-level checks for one `(+1)` mixture of two chains.
#[derive(Debug, Clone, Serialize)]
pub struct LevelCheck {
    pub level: usize,
    pub a1: f64,
    pub a2: f64,
    /// `max(a1, a2)`
    pub witness: f64,
    /// `||lambda X1 + (1-lambda) X2||` relative to the mixed patch Hamiltonian.
    pub mixed_norm: f64,
    pub witness_holds: bool,
    pub small: bool,
    /// `Psi(mix) <= lambda Psi_1 + (1-lambda) Psi_2`: finiteness of the mixed partition function.
    pub psi_convexity_holds: bool,
    pub positive: bool,
    /// Informational: would the mixed step also pass the stricter radius gate of [`extend`]?
    pub within_patch_radius: bool,
}

impl LevelCheck {
    pub fn passed(&self) -> bool {
        self.witness_holds && self.small && self.psi_convexity_holds && self.positive
    }
}

/// Mixes two chains level by level.
///
/// At level `k` the mixed patch Hamiltonian is `K = lambda H1 + (1-lambda) H2` built
/// from the two chains' patch Hamiltonians, and the mixed step is checked against
/// the witness `max(a1, a2)`. Returns the mixed chain when every gate passes.
pub fn mix_chains(
    p: &ManifoldPoint,
    q: &ManifoldPoint,
    lambda: f64,
) -> Result<(Option<ManifoldPoint>, Vec<LevelCheck>)> {
    if !p.same_base(q) {
        return Err(Error::BaseMismatch);
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(
            "lambda",
            format!("must lie in [0,1], got {lambda}"),
        ));
    }
    let n = p.len().max(q.len());
    let p = pad(p, n)?;
    let q = pad(q, n)?;
    let mu = 1.0 - lambda;
    let mix_beta = |b1: f64, b2: f64| {
        if lambda == 1.0 {
            b1
        } else if lambda == 0.0 {
            b2
        } else {
            b1.max(b2)
        }
    };

    let mut mixed = ManifoldPoint::origin(p.base.clone());
    let mut checks = Vec::with_capacity(n);
    let mut all_pass = true;
    for k in 0..n {
        let k_h = mixed.patches[k].h_at_base.clone();
        let step = p.steps[k].mix(&q.steps[k], lambda);
        let a1 = p.admissions[k].norm;
        let a2 = q.admissions[k].norm;
        let witness = a1.max(a2);
        let mixed_norm = relative_norm(&step, &k_h)?;
        let next_h = &k_h + &step;
        let positive = next_h.min_eigenvalue()? > 0.0;
        let psi_mix = log_trace_exp_neg(&next_h.eigenvalues()?);
        let psi1 = log_trace_exp_neg(&(&p.patches[k].h_at_base + &p.steps[k]).eigenvalues()?);
        let psi2 = log_trace_exp_neg(&(&q.patches[k].h_at_base + &q.steps[k]).eigenvalues()?);
        let bound = lambda * psi1 + mu * psi2;
        let check = LevelCheck {
            level: k + 1,
            a1,
            a2,
            witness,
            mixed_norm,
            witness_holds: mixed_norm <= witness * (1.0 + BOUND_SLACK) + BOUND_SLACK,
            small: witness < 1.0,
            psi_convexity_holds: psi_mix.is_finite()
                && psi_mix <= bound + 1e-12 * (1.0 + bound.abs()),
            positive,
            within_patch_radius: mixed_norm < mixed.patches[k].radius,
        };
        all_pass &= check.passed();
        checks.push(check);

        let (p1, p2) = (&p.patches[k + 1], &q.patches[k + 1]);
        let patch = Patch {
            level: k + 1,
            h_at_base: p1.h_at_base.mix(&p2.h_at_base, lambda),
            shift: lambda * p1.shift + mu * p2.shift,
            beta: mix_beta(p1.beta, p2.beta),
            radius: 1.0 - mix_beta(p1.beta, p2.beta),
        };
        mixed.total = &mixed.total + &step;
        mixed.steps.push(step);
        mixed.patches.push(patch);
        mixed.admissions.push(Admission {
            norm: mixed_norm,
            threshold: witness,
            rule: AdmissionRule::Mixture { witness },
        });
    }
    Ok((all_pass.then_some(mixed), checks))
}

#[derive(Debug, Clone, Serialize)]
pub struct MixtureOutcome {
    pub lambda: f64,
    pub levels: Vec<LevelCheck>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    pub outcomes: Vec<MixtureOutcome>,
    /// Any failed gate is a counterexample to `(+1)`-convexity.
    pub falsified: bool,
}

pub fn plus_convexity_check(
    p: &ManifoldPoint,
    q: &ManifoldPoint,
    lambdas: &[f64],
) -> Result<ConvexityReport> {
    let outcomes = lambdas
        .iter()
        .map(|&lambda| {
            let (point, levels) = mix_chains(p, q, lambda)?;
            let passed = match &point {
                Some(m) => m.revalidate().is_ok(),
                None => false,
            };
            Ok(MixtureOutcome {
                lambda,
                levels,
                passed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let falsified = outcomes.iter().any(|o| !o.passed);
    Ok(ConvexityReport {
        outcomes,
        falsified,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NormEquivalence {
    /// `||X||_0`
    pub x_norm0: f64,
    /// `||Y||_X`
    pub nx: f64,
    /// `||Y||_0`
    pub n0: f64,
    /// `1 / (1 + ||X||_0)`: `lower_const * n0 <= nx`
    pub lower_const: f64,
    /// `1 / (1 - ||X||_0)`: `nx <= upper_const * n0`
    pub upper_const: f64,
    pub ratio: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
    /// `||H0^{1/2} H_X^{-1/2}||`
    pub resolvent_bound: f64,
    /// `(1 - ||X||_0)^{-1/2}`
    pub resolvent_limit: f64,
    pub resolvent_holds: bool,
}

impl NormEquivalence {
    pub fn holds(&self) -> bool {
        self.lower_holds && self.upper_holds && self.resolvent_holds
    }
}

pub fn norm_equivalence_report(
    x: &Perturbation<'_>,
    y: &HermitianOperator,
) -> Result<NormEquivalence> {
    let base = x.base();
    let x_norm0 = x.norm0()?;
    if x_norm0.is_nan() || x_norm0 >= 1.0 {
        return Err(Error::invalid(
            "X",
            format!("requires ||X||_0 < 1, got {x_norm0}"),
        ));
    }
    let hx = base.h0() + x.form();
    let nx = relative_norm(y, &hx)?;
    let n0 = relative_norm(y, base.h0())?;
    let lower_const = 1.0 / (1.0 + x_norm0);
    let upper_const = 1.0 / (1.0 - x_norm0);
    let slack = |v: f64| BOUND_SLACK * (1.0 + v.abs());
    let h0_sqrt = crate::operator::apply_function(base.h0(), ScalarFn::Sqrt)?;
    let hx_isqrt = crate::operator::apply_function(&hx, ScalarFn::InvSqrt)?;
    let resolvent_bound =
        schatten_norm_general(&(h0_sqrt.matrix() * hx_isqrt.matrix()), f64::INFINITY)?;
    let resolvent_limit = upper_const.sqrt();
    Ok(NormEquivalence {
        x_norm0,
        nx,
        n0,
        lower_const,
        upper_const,
        ratio: if n0 > 0.0 { nx / n0 } else { 1.0 },
        lower_holds: lower_const * n0 <= nx + slack(nx),
        upper_holds: nx <= upper_const * n0 + slack(nx),
        resolvent_bound,
        resolvent_limit,
        resolvent_holds: resolvent_bound <= resolvent_limit + slack(resolvent_limit),
    })
}

/// `f(r) = Tr[(e^{-(H0 + X/r)} + e^{-(H0 - X/r)}) / (2 Z0)]`; `+inf` on overflow.
pub fn luxemburg_predicate(base: &ModelHamiltonian, x: &HermitianOperator, r: f64) -> Result<f64> {
    let scaled = x.scaled(1.0 / r);
    let plus = log_trace_exp_neg(&(base.h0() + &scaled).eigenvalues()?) - base.psi0();
    let minus = log_trace_exp_neg(&(base.h0() - &scaled).eigenvalues()?) - base.psi0();
    let m = plus.max(minus);
    if !m.is_finite() || m > 700.0 {
        return Ok(f64::INFINITY);
    }
    Ok(0.5 * (plus.exp() + minus.exp()))
}

#[derive(Debug, Clone, Serialize)]
pub struct LuxemburgResult {
    pub value: f64,
    /// Final bracket `(lo, hi)`: `f(lo) >= 2 > f(hi)`.
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// `||X||_L = inf { r > 0 : f(r) < 2 }` by bisection to bracket width `< tol`.
pub fn luxemburg(
    base: &ModelHamiltonian,
    x: &HermitianOperator,
    tol: f64,
) -> Result<LuxemburgResult> {
    x.check_dim(base.dim())?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid(
            "tol",
            format!("must be positive, got {tol}"),
        ));
    }
    let norm0 = relative_norm(x, base.h0())?;
    if norm0 == 0.0 {
        return Ok(LuxemburgResult {
            value: 0.0,
            bracket: (0.0, 0.0),
            iterations: 0,
        });
    }
    let holds = |r: f64| -> Result<(bool, f64)> {
        let f = luxemburg_predicate(base, x, r)?;
        Ok((f < 2.0, f))
    };
    let mut samples = Vec::new();
    let fail = |reason: &str, samples: Vec<(f64, f64)>| Error::Bisection {
        reason: reason.to_string(),
        samples,
    };

    let mut hi = 2.0 * norm0;
    let mut tries = 0;
    loop {
        let (ok, f) = holds(hi)?;
        samples.push((hi, f));
        if ok {
            break;
        }
        hi *= 2.0;
        tries += 1;
        if tries >= BISECTION_MAX_ITER {
            return Err(fail("predicate never satisfied while growing r", samples));
        }
    }
    let mut lo = hi / 2.0;
    tries = 0;
    loop {
        let (ok, f) = holds(lo)?;
        samples.push((lo, f));
        if !ok {
            break;
        }
        hi = lo;
        lo /= 2.0;
        tries += 1;
        if tries >= BISECTION_MAX_ITER || lo == 0.0 {
            return Err(fail("predicate never failed while shrinking r", samples));
        }
    }
    let mut iterations = 0;
    while hi - lo >= tol {
        if iterations >= BISECTION_MAX_ITER {
            return Err(fail("bracket did not shrink below tol", samples));
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (ok, f) = holds(mid)?;
        if ok {
            hi = mid;
        } else {
            lo = mid;
        }
        samples.push((mid, f));
        iterations += 1;
    }
    Ok(LuxemburgResult {
        value: 0.5 * (lo + hi),
        bracket: (lo, hi),
        iterations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    /// `|Z_{X+Y} - Z_X|`
    pub dz: f64,
    /// `||Y||_X`
    pub y_norm: f64,
    /// `sup_l |Tr(e^{-l H_X} Y e^{-(1-l) H_{X+Y}})| / ||Y||_X` over quadrature nodes and endpoints.
    pub constant: f64,
    pub holds: bool,
}

/// `|Z_{X+Y} - Z_X| <= C ||Y||_X` with `C` estimated from the Duhamel integrand.
pub fn lipschitz_check(
    base: &ModelHamiltonian,
    x: &HermitianOperator,
    y: &HermitianOperator,
    nodes: usize,
    exec: Execution,
) -> Result<LipschitzReport> {
    let hx = base.h0() + x;
    let hxy = &hx + y;
    let y_norm = relative_norm(y, &hx)?;
    let sx = hx.spectral()?;
    let sxy = hxy.spectral()?;
    let zx: f64 = sx.eigenvalues.iter().map(|e| (-e).exp()).sum();
    let zxy: f64 = sxy.eigenvalues.iter().map(|e| (-e).exp()).sum();
    let integrand = |l: f64| {
        let a = sx.synthesize(
            &sx.eigenvalues
                .iter()
                .map(|e| (-l * e).exp())
                .collect::<Vec<_>>(),
        );
        let b = sxy.synthesize(
            &sxy.eigenvalues
                .iter()
                .map(|e| (-(1.0 - l) * e).exp())
                .collect::<Vec<_>>(),
        );
        (a.matrix() * y.matrix() * b.matrix()).trace().re
    };
    let rule = GaussLegendre::new(nodes)?;
    let (_, mut values) = rule.integrate_with_samples(exec, integrand);
    values.push(integrand(0.0));
    values.push(integrand(1.0));
    let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dz = (zxy - zx).abs();
    let constant = if y_norm > 0.0 { sup / y_norm } else { 0.0 };
    Ok(LipschitzReport {
        dz,
        y_norm,
        constant,
        holds: dz <= constant * y_norm * (1.0 + 1e-9) + 1e-15,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{build_model, ModelKind, ModelParams};
    use crate::sampling::CaseRng;

    fn ho(dim: usize, beta0: f64) -> Arc<ModelHamiltonian> {
        Arc::new(
            build_model(
                ModelKind::HarmonicOscillator,
                dim,
                &ModelParams {
                    beta0,
                    ..ModelParams::default()
                },
            )
            .unwrap(),
        )
    }

    #[test]
    fn zero_step_is_accepted() {
        let m = ho(4, 0.3);
        let o = ManifoldPoint::origin(m.clone());
        let p = extend(&o, &HermitianOperator::zeros(4)).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.total(), &HermitianOperator::zeros(4));
        assert_eq!(p.patch().beta, 0.3);
        assert!(p.revalidate().is_ok());
    }

    #[test]
    fn two_stage_half_steps() {
        let m = ho(5, 0.0);
        let half = m.h0().scaled(0.5);
        let p1 = extend(&ManifoldPoint::origin(m.clone()), &half).unwrap();
        assert!((p1.admissions()[0].norm - 0.5).abs() < 1e-14);
        assert!(p1.patch().h_at_base.frobenius_distance(&m.h0().scaled(1.5)) < 1e-13);
        let p2 = extend(&p1, &half).unwrap();
        assert!((p2.admissions()[1].norm - 1.0 / 3.0).abs() < 1e-14);
        assert!(p2.hamiltonian().frobenius_distance(&m.h0().scaled(2.0)) < 1e-13);
    }

    #[test]
    fn rejected_outside_tightened_radius() {
        let m = ho(4, 0.5);
        let o = ManifoldPoint::origin(m.clone());
        // first step 0.3: beta_X = 0.5/0.7, radius = 1 - 0.714.. = 0.2857
        let p = extend(&o, &m.h0().scaled(0.3)).unwrap();
        assert!((p.patch().radius - (1.0 - 0.5 / 0.7)).abs() < 1e-14);
        let hx = &p.patch().h_at_base;
        let y = CaseRng::new(3, 0).perturbation(hx, 0.6);
        match extend(&p, &y) {
            Err(Error::Admission { norm, threshold }) => {
                assert!((norm - 0.6).abs() < 1e-12);
                assert!((threshold - p.patch().radius).abs() < 1e-15);
            }
            other => panic!("expected admission error, got {other:?}"),
        }
        // 0.6 also exceeds the initial radius 0.5
        assert!(extend(&o, &CaseRng::new(3, 1).perturbation(m.h0(), 0.6)).is_err());
    }

    #[test]
    fn patch_shift_restores_lower_bound() {
        let m = ho(3, 0.0);
        let o = ManifoldPoint::origin(m.clone());
        let p = extend(&o, &m.h0().scaled(-0.5)).unwrap();
        assert!((p.patch().shift - 0.5).abs() < 1e-14);
        assert!((p.patch().h_at_base.min_eigenvalue().unwrap() - 1.0).abs() < 1e-13);
        assert!(p.revalidate().is_ok());
    }

    #[test]
    fn path_independence_routes() {
        let m = ho(6, 0.0);
        let mut rng = CaseRng::new(5, 0);
        let x = rng.perturbation(m.h0(), 0.2);
        let y = rng.perturbation(m.h0(), 0.2);
        let o = ManifoldPoint::origin(m.clone());
        let xy = extend(&extend(&o, &x).unwrap(), &y).unwrap();
        let yx = extend(&extend(&o, &y).unwrap(), &x).unwrap();
        let one = extend(&o, &(&x + &y)).unwrap();
        assert!(path_independence_check(&xy, &one).unwrap().equal);
        assert!(path_independence_check(&xy, &yx).unwrap().equal);
        assert!(path_independence_check(&xy, &xy).unwrap().equal);
        assert!(matches!(
            path_independence_check(&xy, &extend(&o, &x).unwrap()),
            Err(Error::TotalsDiffer { .. })
        ));
    }

    #[test]
    fn norm_equivalence_cases() {
        let m = ho(5, 0.0);
        let mut rng = CaseRng::new(8, 0);
        let y = rng.hermitian(5);

        let zero = Perturbation::new(HermitianOperator::zeros(5), &m).unwrap();
        let r = norm_equivalence_report(&zero, &y).unwrap();
        assert_eq!(r.nx, r.n0);
        assert_eq!((r.lower_const, r.upper_const), (1.0, 1.0));

        let c = 0.4;
        let scaled = Perturbation::new(m.h0().scaled(c), &m).unwrap();
        let r = norm_equivalence_report(&scaled, &y).unwrap();
        assert!((r.nx - r.n0 / (1.0 + c)).abs() < 1e-12);
        assert!(r.holds());

        let x = Perturbation::new(rng.perturbation(m.h0(), 0.8), &m).unwrap();
        assert!(norm_equivalence_report(&x, &y).unwrap().holds());

        let big = Perturbation::new(m.h0().scaled(1.0), &m).unwrap();
        assert!(norm_equivalence_report(&big, &y).is_err());
    }

    #[test]
    fn luxemburg_identity_closed_form() {
        let m = ho(4, 0.0);
        let acosh2 = 2f64.acosh();
        for alpha in [2.0, -0.7, 5.0] {
            let x = HermitianOperator::identity(4).scaled(alpha);
            let r = luxemburg(&m, &x, 1e-8).unwrap();
            assert!((r.value - alpha.abs() / acosh2).abs() < 1e-8);
            assert!(r.bracket.1 - r.bracket.0 < 1e-8);
        }
        assert_eq!(
            luxemburg(&m, &HermitianOperator::zeros(4), 1e-8)
                .unwrap()
                .value,
            0.0
        );
        assert!(luxemburg(&m, &HermitianOperator::zeros(4), 0.0).is_err());
    }

    #[test]
    fn luxemburg_homogeneity() {
        let m = ho(5, 0.0);
        let x = CaseRng::new(2, 0).hermitian(5);
        let tol = 1e-9;
        let base = luxemburg(&m, &x, tol).unwrap().value;
        for c in [0.5, 2.0, -1.0] {
            let v = luxemburg(&m, &x.scaled(c), tol).unwrap().value;
            assert!((v - c.abs() * base).abs() <= 2.0 * tol * c.abs().max(1.0));
        }
    }

    #[test]
    fn lipschitz_small_steps() {
        let m = ho(6, 0.0);
        let mut rng = CaseRng::new(12, 0);
        let x = rng.perturbation(m.h0(), 0.5);
        let hx = m.h0() + &x;
        let y = rng.perturbation(&hx, 0.1);
        let r = lipschitz_check(&m, &x, &y, 64, Execution::Sequential).unwrap();
        assert!(r.holds, "{r:?}");
    }

    #[test]
    fn mixture_endpoints_reproduce_chains() {
        let m = ho(4, 0.3);
        let mut rng = CaseRng::new(31, 0);
        let o = ManifoldPoint::origin(m.clone());
        let p = extend(&o, &rng.perturbation(m.h0(), 0.2)).unwrap();
        let q = extend(
            &extend(&o, &rng.perturbation(m.h0(), 0.1)).unwrap(),
            &HermitianOperator::zeros(4),
        )
        .unwrap();
        let (one, _) = mix_chains(&p, &q, 1.0).unwrap();
        let one = one.unwrap();
        assert!(one.total().frobenius_distance(p.total()) == 0.0);
        let (zero, _) = mix_chains(&p, &q, 0.0).unwrap();
        assert!(zero.unwrap().total().frobenius_distance(q.total()) == 0.0);
    }

    #[test]
    fn single_step_mixture_witness() {
        let m = ho(6, 0.0);
        let mut rng = CaseRng::new(40, 0);
        let o = ManifoldPoint::origin(m.clone());
        let p = extend(&o, &rng.perturbation(m.h0(), 0.3)).unwrap();
        let q = extend(&o, &rng.perturbation(m.h0(), 0.7)).unwrap();
        let report = plus_convexity_check(&p, &q, &[0.0, 0.2, 0.5, 0.8, 1.0]).unwrap();
        assert!(!report.falsified);
        for o in &report.outcomes {
            assert!(o.levels[0].mixed_norm <= 0.7 + 1e-12);
        }
    }
}
