//! Named verification suites.
//!
//! Each suite draws seeded random cases, checks one family of identities or
//! inequalities on each, and collects every violated check as a [`Failure`]. Cases
//! are independent and may run in parallel; the report is assembled in case order
//! so a given `(suite, models, seed, config)` always serializes to the same bytes.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::atlas::{
    extend, lipschitz_check, luxemburg, luxemburg_predicate, norm_equivalence_report,
    path_independence_check, plus_convexity_check, ManifoldPoint,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{
    bkm, bkm_gram, bkm_hessian_check, bkm_quadrature, duhamel_check, psi_along_mix,
    second_differences, transport, TransportMap, HESSIAN_STEPS,
};
use crate::gibbs::{center, entropy, gibbs_state, regularized_mean, TangentVector};
use crate::operator::{build_model, HermitianOperator, ModelHamiltonian, ModelKind, ModelParams};
use crate::perturbation::{
    eigenvalue_sandwich, klmn, maximizing_direction, relative_norm, sandwich, trace_bound_check,
    Perturbation,
};
use crate::quadrature::DEFAULT_NODES;
use crate::sampling::{CaseRng, SAMPLING_SCHEME};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Lemma2,
    Lemma4,
    Lemma5,
    Lemma7,
    Thm8Duhamel,
    Lemma11,
    EntropyIdentity,
    TransportAffine,
    Thm14Convex,
    Luxemburg,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Lemma2,
        Suite::Lemma4,
        Suite::Lemma5,
        Suite::Lemma7,
        Suite::Thm8Duhamel,
        Suite::Lemma11,
        Suite::EntropyIdentity,
        Suite::TransportAffine,
        Suite::Thm14Convex,
        Suite::Luxemburg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemma2 => "lemma2",
            Suite::Lemma4 => "lemma4",
            Suite::Lemma5 => "lemma5",
            Suite::Lemma7 => "lemma7",
            Suite::Thm8Duhamel => "thm8-duhamel",
            Suite::Lemma11 => "lemma11",
            Suite::EntropyIdentity => "entropy-identity",
            Suite::TransportAffine => "transport-affine",
            Suite::Thm14Convex => "thm14-convex",
            Suite::Luxemburg => "luxemburg",
        }
    }

    pub fn default_cases(self) -> usize {
        match self {
            Suite::Lemma2 => 200,
            Suite::Lemma4 | Suite::Lemma7 | Suite::Lemma11 => 500,
            Suite::Lemma5 => 200,
            Suite::Thm8Duhamel => 100,
            Suite::EntropyIdentity => 200,
            Suite::TransportAffine => 200,
            Suite::Thm14Convex => 100,
            Suite::Luxemburg => 100,
        }
    }

    /// Tolerance keys with their defaults; the first is the one `--tolerance <value>` overrides.
    pub fn tolerances(self) -> &'static [(&'static str, f64)] {
        match self {
            Suite::Lemma2 => &[
                ("form_bound", 1e-10),
                ("attainment", 1e-8),
                ("norm_axioms", 1e-12),
                ("oracle", 1e-12),
            ],
            Suite::Lemma4 => &[("sandwich", 1e-10)],
            Suite::Lemma5 => &[("mean", 1e-12), ("continuity", 1e-12)],
            Suite::Lemma7 => &[("resolvent", 1e-10)],
            Suite::Thm8Duhamel => &[
                ("duhamel", 1e-9),
                ("duhamel_floor", 1e-12),
                ("bkm_quadrature", 1e-9),
                ("bkm_symmetry", 1e-12),
                ("hessian", 1e-6),
            ],
            Suite::Lemma11 => &[("equivalence", 1e-10)],
            Suite::EntropyIdentity => &[("entropy", 1e-10), ("mixed", 1e-12), ("gauge", 1e-12)],
            Suite::TransportAffine => &[
                ("transport", 1e-12),
                ("gauge", 1e-12),
                ("psi_convexity", 1e-12),
            ],
            Suite::Thm14Convex => &[("witness", 1e-10)],
            Suite::Luxemburg => &[("tol", 1e-8)],
        }
    }

    fn index(self) -> u64 {
        Suite::ALL.iter().position(|&s| s == self).expect("listed") as u64
    }
}

impl std::fmt::Display for Suite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Suite> {
        Suite::ALL
            .iter()
            .copied()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
                Error::invalid(
                    "suite",
                    format!("unknown suite {s:?}; valid suites: {}", names.join(", ")),
                )
            })
    }
}

/// Harmonic oscillator models at dims 2, 4, 8, 16 with `beta0 = 0`.
pub fn default_models() -> Vec<ModelHamiltonian> {
    [2, 4, 8, 16]
        .iter()
        .map(|&d| {
            build_model(ModelKind::HarmonicOscillator, d, &ModelParams::default())
                .expect("valid model")
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub seed: u64,
    pub cases: Option<usize>,
    pub nodes: usize,
    /// Tolerance overrides by key; unknown keys are rejected by [`run_suite`].
    pub tolerances: BTreeMap<String, f64>,
    pub exec: Execution,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 0,
            cases: None,
            nodes: DEFAULT_NODES,
            tolerances: BTreeMap::new(),
            exec: Execution::Parallel,
        }
    }
}

fn sig17<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        let raw = serde_json::value::RawValue::from_string(format!("{x:.16e}"))
            .map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    } else {
        s.serialize_str(&x.to_string())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub case_id: u64,
    pub quantity: String,
    #[serde(serialize_with = "sig17")]
    pub expected: f64,
    #[serde(serialize_with = "sig17")]
    pub observed: f64,
    #[serde(serialize_with = "sig17")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Stat {
    pub name: String,
    #[serde(serialize_with = "sig17")]
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelInfo {
    pub kind: &'static str,
    pub dim: usize,
    #[serde(serialize_with = "sig17")]
    pub beta0: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub cases: usize,
    pub checks: usize,
    pub nodes: usize,
    pub models: Vec<ModelInfo>,
    pub sampling: &'static str,
    pub tolerances: Vec<Stat>,
    /// Maxima (or minima, where named so) of the monitored quantities over all cases.
    pub summary: Vec<Stat>,
    pub failures: Vec<Failure>,
    /// Wall time; only serialized when requested so reports stay byte-reproducible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<u64>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn summary_value(&self, name: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Per-case collector of checks and monitored values.
struct Case {
    id: u64,
    checks: usize,
    failures: Vec<Failure>,
    /// `(name, value, is_min)`: aggregated by max unless `is_min`.
    stats: Vec<(&'static str, f64, bool)>,
}

impl Case {
    fn new(id: u64) -> Case {
        Case {
            id,
            checks: 0,
            failures: Vec::new(),
            stats: Vec::new(),
        }
    }

    fn check(
        &mut self,
        ok: bool,
        quantity: impl Into<String>,
        expected: f64,
        observed: f64,
        tolerance: f64,
    ) {
        self.checks += 1;
        if !ok {
            self.failures.push(Failure {
                case_id: self.id,
                quantity: quantity.into(),
                expected,
                observed,
                tolerance,
            });
        }
    }

    /// `|observed - expected| <= tol`.
    fn close(&mut self, quantity: impl Into<String>, expected: f64, observed: f64, tol: f64) {
        let ok = (observed - expected).abs() <= tol;
        self.check(ok, quantity, expected, observed, tol);
    }

    /// `observed <= bound + tol`.
    fn at_most(&mut self, quantity: impl Into<String>, bound: f64, observed: f64, tol: f64) {
        self.check(observed <= bound + tol, quantity, bound, observed, tol);
    }

    fn max(&mut self, name: &'static str, v: f64) {
        self.stats.push((name, v, false));
    }

    fn min(&mut self, name: &'static str, v: f64) {
        self.stats.push((name, v, true));
    }

    fn error(&mut self, quantity: &str, e: Error) {
        self.check(
            false,
            format!("{quantity}: error: {e}"),
            f64::NAN,
            f64::NAN,
            0.0,
        );
    }
}

struct Ctx<'a> {
    model: &'a ModelHamiltonian,
    rng: CaseRng,
    tol: &'a BTreeMap<&'static str, f64>,
    nodes: usize,
}

impl Ctx<'_> {
    fn tol(&self, key: &str) -> f64 {
        self.tol[key]
    }
}

pub fn run_suite(
    suite: Suite,
    models: &[ModelHamiltonian],
    config: &SuiteConfig,
) -> Result<SuiteReport> {
    if models.is_empty() {
        return Err(Error::invalid("models", "at least one model is required"));
    }
    let mut tol: BTreeMap<&'static str, f64> = suite.tolerances().iter().copied().collect();
    for (k, v) in &config.tolerances {
        let key = suite
            .tolerances()
            .iter()
            .map(|(name, _)| *name)
            .find(|name| name == k)
            .ok_or_else(|| {
                let keys: Vec<&str> = suite.tolerances().iter().map(|(n, _)| *n).collect();
                Error::invalid(
                    "tolerance",
                    format!(
                        "suite {suite} has no tolerance {k:?} (keys: {})",
                        keys.join(", ")
                    ),
                )
            })?;
        if !(*v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(
                "tolerance",
                format!("{k} must be positive, got {v}"),
            ));
        }
        tol.insert(key, *v);
    }
    if config.nodes < 2 {
        return Err(Error::invalid("nodes", "need at least 2 quadrature nodes"));
    }

    // thm14 sweeps beta0 over {0, 0.3, 0.6} for each model
    let expanded: Vec<ModelHamiltonian>;
    let models: &[ModelHamiltonian] = if suite == Suite::Thm14Convex {
        expanded = models
            .iter()
            .flat_map(|m| [0.0, 0.3, 0.6].map(|b| m.with_beta0(b)))
            .collect::<Result<Vec<_>>>()?;
        &expanded
    } else {
        models
    };

    let n = config.cases.unwrap_or_else(|| suite.default_cases());
    let stream_base = suite.index() << 40;
    // cases parallelize; node-level work inside a case stays sequential
    let results: Vec<Case> = config.exec.map_indices(n, |i| {
        let model = &models[i % models.len()];
        let mut ctx = Ctx {
            model,
            rng: CaseRng::new(config.seed, stream_base | i as u64),
            tol: &tol,
            nodes: config.nodes,
        };
        let mut case = Case::new(i as u64);
        run_case(suite, &mut ctx, &mut case);
        case
    });

    let mut failures = Vec::new();
    let mut checks = 0;
    let mut stats: BTreeMap<&'static str, f64> = BTreeMap::new();
    for c in results {
        checks += c.checks;
        failures.extend(c.failures);
        for (name, v, is_min) in c.stats {
            let e = stats.entry(name).or_insert(v);
            *e = if is_min { e.min(v) } else { e.max(v) };
        }
    }
    failures.sort_by_key(|f| f.case_id);
    Ok(SuiteReport {
        suite: suite.name().to_string(),
        seed: config.seed,
        cases: n,
        checks,
        nodes: config.nodes,
        models: models
            .iter()
            .map(|m| ModelInfo {
                kind: m.kind().name(),
                dim: m.dim(),
                beta0: m.beta0(),
            })
            .collect(),
        sampling: SAMPLING_SCHEME,
        tolerances: tol
            .iter()
            .map(|(k, v)| Stat {
                name: k.to_string(),
                value: *v,
            })
            .collect(),
        summary: stats
            .into_iter()
            .map(|(k, v)| Stat {
                name: k.to_string(),
                value: v,
            })
            .collect(),
        failures,
        runtime_ms: None,
    })
}

/// Runs every suite in order.
pub fn run_battery(models: &[ModelHamiltonian], config: &SuiteConfig) -> Result<Vec<SuiteReport>> {
    Suite::ALL
        .iter()
        .map(|&s| run_suite(s, models, config))
        .collect()
}

fn run_case(suite: Suite, ctx: &mut Ctx<'_>, case: &mut Case) {
    let result = match suite {
        Suite::Lemma2 => lemma2(ctx, case),
        Suite::Lemma4 => lemma4(ctx, case),
        Suite::Lemma5 => lemma5(ctx, case),
        Suite::Lemma7 => lemma7(ctx, case),
        Suite::Thm8Duhamel => thm8(ctx, case),
        Suite::Lemma11 => lemma11(ctx, case),
        Suite::EntropyIdentity => entropy_identity(ctx, case),
        Suite::TransportAffine => transport_affine(ctx, case),
        Suite::Thm14Convex => thm14(ctx, case),
        Suite::Luxemburg => luxemburg_suite(ctx, case),
    };
    if let Err(e) = result {
        case.error(suite.name(), e);
    }
}

/// A random state `rho_X` with `||X||_0` uniform in `(0, 0.9)`.
fn random_state_hamiltonian(ctx: &mut Ctx<'_>) -> HermitianOperator {
    let a = ctx.rng.uniform(0.0, 0.9);
    let x = ctx.rng.perturbation(ctx.model.h0(), a);
    ctx.model.h0() + &x
}

/// `||L^{-1} X L^{-*}||` with `H = L L*`: a Cholesky route independent of the spectral square root.
fn cholesky_relative_norm(x: &HermitianOperator, h: &HermitianOperator) -> Result<f64> {
    let l = h
        .matrix()
        .clone()
        .cholesky()
        .ok_or(Error::NotPositive {
            min_eigenvalue: f64::NAN,
        })?
        .l();
    let linv = l.try_inverse().ok_or(Error::NotPositive {
        min_eigenvalue: 0.0,
    })?;
    let m = HermitianOperator::symmetrize(&linv * x.matrix() * linv.adjoint());
    let e = m.eigenvalues()?;
    Ok(e[0].abs().max(e[e.len() - 1].abs()))
}

fn lemma2(ctx: &mut Ctx<'_>, case: &mut Case) -> Result<()> {
    let h0 = ctx.model.h0().clone();
    let dim = h0.dim();
    let target = ctx.rng.uniform(0.05, 1.5);
    let x = ctx.rng.perturbation(&h0, target);
    let norm = relative_norm(&x, &h0)?;

    let oracle = cholesky_relative_norm(&x, &h0)?;
    case.close(
        "relative_norm_vs_cholesky",
        oracle,
        norm,
        ctx.tol("oracle") * oracle.max(1.0),
    );

    for k in 0..8 {
        let psi = ctx.rng.vector(dim);
        let lhs = x.expectation(&psi).abs();
        let rhs = norm * h0.expectation(&psi);
        case.at_most(
            format!("form_bound[{k}]"),
            rhs,
            lhs,
            ctx.tol("form_bound") * rhs.max(1.0),
        );
    }
    let psi = maximizing_direction(&x, &h0)?;
    let lhs = x.expectation(&psi).abs();
    let rhs = norm * h0.expectation(&psi);
    case.close(
        "form_bound_attained",
        rhs,
        lhs,
        ctx.tol("attainment") * rhs.max(1.0),
    );

    // norm axioms over a fixed H
    let ty = ctx.rng.uniform(0.05, 1.5);
    let y = ctx.rng.perturbation(&h0, ty);
    let c = ctx.rng.uniform(-3.0, 3.0);
    let ny = relative_norm(&y, &h0)?;
    let ncx = relative_norm(&x.scaled(c), &h0)?;
    let t = ctx.tol("norm_axioms");
    case.close(
        "homogeneity",
        c.abs() * norm,
        ncx,
        t * norm.max(1.0) * c.abs().max(1.0),
    );
    let nsum = relative_norm(&(&x + &y), &h0)?;
    case.at_most("triangle", norm + ny, nsum, t * (norm + ny).max(1.0));

    // positivity gate
    let base = ctx.model;
    let p = Perturbation::new(x, base)?;
    if norm < 1.0 {
        let min = klmn(&p).min_eigenvalue()?;
        case.check(min > 0.0, "klmn_positive", 0.0, min, 0.0);
        case.min("min_eig_klmn_below_unit_norm", min);
    }
    case.max("max_relative_norm", norm);
    Ok(())
}

fn lemma4(ctx: &mut Ctx<'_>, case: &mut Case) -> Result<()> {
    let target = ctx.rng.uniform(0.0, 0.99);
    let x = ctx.rng.perturbation(ctx.model.h0(), target);
    let p = Perturbation::new(x, ctx.model)?;
    let bound = p.canonical_bound()?;
    let s = eigenvalue_sandwich(&p, bound)?;
    let tol = ctx.tol("sandwich");
    for n in 0..s.observed.len() {
        let slack = tol * (1.0 + s.observed[n].abs());
        case.at_most(
            format!("lambda_lower[{n}]"),
            s.observed[n],
            s.lower[n],
            slack,
        );
        case.at_most(
            format!("lambda_upper[{n}]"),
            s.upper[n],
            s.observed[n],
            slack,
        );
    }
    for beta in [0.5, 1.0, 2.0] {
        let r = trace_bound_check(&p, beta, bound)?;
        case.at_most(
            format!("trace_upper[beta={beta}]"),
            r.upper_trace,
            r.observed,
            tol * r.upper_trace,
        );
        case.at_most(
            format!("trace_lower[beta={beta}]"),
            r.observed,
            r.lower_trace,
            tol * r.lower_trace,
        );
    }
    case.max("max_witness_a", bound.a);
    Ok(())
}

fn lemma5(ctx: &mut Ctx<'_>, case: &mut Case) -> Result<()> {
    let h = random_state_hamiltonian(ctx);
    let state = gibbs_state(&h)?;
    let y = ctx.rng.hermitian(h.dim());
    let l1 = ctx.rng.uniform(0.01, 0.99);
    let l2 = ctx.rng.uniform(0.01, 0.99);
    let m1 = regularized_mean(&state, &y, l1)?;
    let m2 = regularized_mean(&state, &y, l2)?;
    let cyclic = (state.rho().matrix() * y.matrix()).trace().re;
    let tol = ctx.tol("mean");
    case.close("mean_lambda1_vs_lambda2", m1, m2, tol);
    case.close("mean_lambda1_vs_trace", cyclic, m1, tol);
    case.close("mean_lambda2_vs_trace", cyclic, m2, tol);
    case.max("max_lambda_spread", (m1 - m2).abs());
    case.max(
        "max_trace_deviation",
        (m1 - cyclic).abs().max((m2 - cyclic).abs()),
    );

    // |rho.Y| <= ||Y||_H Tr(rho H) for positive H
    let ny = relative_norm(&y, &h)?;
    let energy = regularized_mean(&state, &h, 0.5)?;
    case.at_most(
        "mean_continuity",
        ny * energy,
        m1.abs(),
        ctx.tol("continuity") * (1.0 + ny * energy),
    );
    Ok(())
}

fn lemma7(ctx: &mut Ctx<'_>, case: &mut Case) -> Result<()> {
    let a = ctx.rng.uniform(0.0, 0.95);
    let x = ctx.rng.perturbation(ctx.model.h0(), a);
    let p = Perturbation::new(x, ctx.model)?;
    let y = ctx.rng.hermitian(ctx.model.dim());
    let r = norm_equivalence_report(&p, &y)?;
    let tol = ctx.tol("resolvent");
    case.at_most(
        "resolvent_bound",
        r.resolvent_limit,
        r.resolvent_bound,
        tol * (1.0 + r.resolvent_limit),
    );
    // (1 - ||X||_0) I <= R0^{1/2} H_X R0^{1/2} <= (1 + ||X||_0) I
    let cc = sandwich(&klmn(&p), ctx.model.h0())?.eigenvalues()?;
    let n0 = r.x_norm0;
    case.at_most("cstar_c_lower", cc[0], 1.0 - n0, tol);
    case.at_most("cstar_c_upper", 1.0 + n0, cc[cc.len() - 1], tol);
    case.max("max_resolvent_ratio", r.resolvent_bound / r.resolvent_limit);
    Ok(())
}

fn lemma11(ctx: &mut Ctx<'_>, case: &mut Case) -> Result<()> {
    let a = ctx.rng.uniform(0.0, 0.95);
    let x = ctx.rng.perturbation(ctx.model.h0(), a);
    let p = Perturbation::new(x, ctx.model)?;
    let y = ctx.rng.hermitian(ctx.model.dim());
    let r = norm_equivalence_report(&p, &y)?;
    let tol = ctx.tol("equivalence");
    case.at_most(
        "upper: ||Y||_X <= ||Y||_0/(1-||X||_0)",
        r.upper_const * r.n0,
        r.nx,
        tol * (1.0 + r.nx),
    );
    case.at_most(
        "lower: ||Y||_0 <= (1+||X||_0)||Y||_X",
        (1.0 + r.x_norm0) * r.nx,
        r.n0,
        tol * (1.0 + r.n0),
    );
    case.max("max_ratio_over_upper", r.nx / (r.upper_const * r.n0));
    Ok(())
}

fn thm8(ctx: &mut Ctx<'_>, case: &mut Case) -> Result<()> {
    let model = ctx.model;
    let a = ctx.rng.uniform(0.05, 0.9);
    let x = ctx.rng.perturbation(model.h0(), a);
    let p = Perturbation::new(x.clone(), model)?;
    let d = duhamel_check(&p, ctx.nodes, Execution::Sequential)?;
    let rel = ctx.tol("duhamel");
    let floor = ctx.tol("duhamel_floor");
    case.check(
        d.within(rel, floor),
        "duhamel_residual",
        d.lhs,
        d.rhs,
        (rel * d.lhs.abs()).max(floor),
    );
    case.max(
        "max_duhamel_relative_residual",
        d.residual / d.lhs.abs().max(floor),
    );

    // Lipschitz: small step at rho_X
    let hx = model.h0() + &x;
    let ty = ctx.rng.uniform(0.001, 0.1);
    let y = ctx.rng.perturbation(&hx, ty);
    let lip = lipschitz_check(model, &x, &y, ctx.nodes, Execution::Sequential)?;
    case.check(
        lip.holds,
        "lipschitz",
        lip.constant * lip.y_norm,
        lip.dz,
        1e-9,
    );

    // BKM: closed form vs quadrature, symmetry, positivity
    let state = gibbs_state(&hx)?;
    let u = center(&state, &ctx.rng.hermitian(hx.dim()))?;
    let v = center(&state, &ctx.rng.hermitian(hx.dim()))?;
    let g_uv = bkm(&state, &u, &v)?;
    let g_vu = bkm(&state, &v, &u)?;
    let q_uv = bkm_quadrature(
        &state,
        &u.centered,
        &v.centered,
        ctx.nodes,
        Execution::Sequential,
    )?;
    let g_uu = bkm(&state, &u, &u)?;
    let q_uu = bkm_quadrature(
        &state,
        &u.centered,
        &u.centered,
        ctx.nodes,
        Execution::Sequential,
    )?;
    let qt = ctx.tol("bkm_quadrature");
    case.close("bkm_vs_quadrature(u,u)", q_uu, g_uu, qt * q_uu.abs());
    let scale = g_uu.abs().max(bkm(&state, &v, &v)?.abs());
    case.close("bkm_vs_quadrature(u,v)", q_uv, g_uv, qt * scale);
    case.close("bkm_symmetry", g_uv, g_vu, ctx.tol("bkm_symmetry") * scale);
    case.check(g_uu > 0.0, "bkm_positive", 0.0, g_uu, 0.0);
    case.max(
        "max_bkm_quadrature_relative",
        (g_uu - q_uu).abs() / q_uu.abs(),
    );

    if hx.dim() >= 2 {
        let k = hx.dim().min(4);
        let basis = (0..k)
            .map(|_| center(&state, &ctx.rng.hermitian(hx.dim())))
            .collect::<Result<Vec<_>>>()?;
        match bkm_gram(&state, &basis) {
            Ok(g) => {
                let min = g.min_eigenvalue.unwrap_or(0.0);
                case.check(min > 0.0, "gram_min_eigenvalue", 0.0, min, 0.0);
                case.min("min_gram_eigenvalue", min);
            }
            Err(e) => case.error("gram", e),
        }
    }

    // Hessian of Psi along H0 + t X_hat at rho_0
    let s0 = gibbs_state(model.h0())?;
    let xh = center(&s0, &ctx.rng.perturbation(model.h0(), 0.5))?;
    if xh.centered.frobenius_norm() > 1e-8 {
        let h = bkm_hessian_check(model.h0(), &xh, HESSIAN_STEPS)?;
        case.close(
            "hessian_vs_bkm",
            h.bkm,
            h.richardson,
            ctx.tol("hessian") * h.bkm.abs(),
        );
        case.max("max_hessian_relative_error", h.relative_error);
    }
    Ok(())
}

fn entropy_identity(ctx: &mut Ctx<'_>, case: &mut Case) -> Result<()> {
    let h = random_state_hamiltonian(ctx);
    let state = gibbs_state(&h)?;
    let s = entropy(&state)?;
    let rhs = regularized_mean(&state, &h, 0.5)? + state.psi();
    case.close("entropy_identity", rhs, s.value, ctx.tol("entropy"));
    case.max("max_entropy_identity_residual", (s.value - rhs).abs());

    let dim = h.dim();
    let mixed = entropy(&gibbs_state(
        &HermitianOperator::zeros(dim).shifted(ctx.rng.uniform(-3.0, 3.0)),
    )?)?;
    case.close(
        "maximally_mixed",
        (dim as f64).ln(),
        mixed.value,
        ctx.tol("mixed"),
    );

    // gauge invariance and injectivity up to gauge
    let alpha = ctx.rng.uniform(-5.0, 5.0);
    let shifted = gibbs_state(&h.shifted(alpha))?;
    let dist = shifted.rho().frobenius_distance(state.rho());
    case.at_most("gauge_invariance", 0.0, dist, ctx.tol("gauge"));
    if dim >= 2 {
        let other = random_state_hamiltonian(ctx);
        let diff = &other - &h;
        let c = center(&state, &diff)?;
        if c.centered.frobenius_norm() > 1e-6 {
            let d = gibbs_state(&other)?.rho().frobenius_distance(state.rho());
            case.check(d > 1e-12, "injectivity_up_to_gauge", 1e-12, d, 0.0);
        }
    }
    Ok(())
}

fn transport_affine(ctx: &mut Ctx<'_>, case: &mut Case) -> Result<()> {
    let dim = ctx.model.dim();
    let s0 = gibbs_state(ctx.model.h0())?;
    let sx = gibbs_state(&random_state_hamiltonian(ctx))?;
    let sy = gibbs_state(&random_state_hamiltonian(ctx))?;
    let tol = ctx.tol("transport");
    let v1 = center(&s0, &ctx.rng.hermitian(dim))?;
    let v2 = center(&s0, &ctx.rng.hermitian(dim))?;
    let l = ctx.rng.uniform(0.0, 1.0);

    let to_x = TransportMap::new(s0.clone(), sx.clone())?;
    let mix = TangentVector::combine(l, &v1, 1.0 - l, &v2);
    let lhs = transport(&to_x, &mix)?;
    let rhs = TangentVector::combine(l, &transport(&to_x, &v1)?, 1.0 - l, &transport(&to_x, &v2)?);
    let scale = 1.0 + v1.centered.frobenius_norm() + v2.centered.frobenius_norm();
    case.at_most(
        "affinity",
        0.0,
        lhs.centered.frobenius_distance(&rhs.centered),
        tol * scale,
    );

    let zero = transport(&to_x, &TangentVector::zero(dim))?;
    case.at_most(
        "zero_maps_to_zero",
        0.0,
        zero.centered.frobenius_norm(),
        tol,
    );

    let x_to_y = TransportMap::new(sx.clone(), sy.clone())?;
    let direct = transport(&TransportMap::new(s0.clone(), sy.clone())?, &v1)?;
    let composed = transport(&x_to_y, &transport(&to_x, &v1)?)?;
    case.at_most(
        "flatness",
        0.0,
        direct.centered.frobenius_distance(&composed.centered),
        tol * scale,
    );

    let back = transport(&to_x.inverse(), &transport(&to_x, &v1)?)?;
    case.at_most(
        "invertibility",
        0.0,
        back.centered.frobenius_distance(&v1.centered),
        tol * scale,
    );

    let alpha = ctx.rng.uniform(-5.0, 5.0);
    let g = gibbs_state(&sx.hamiltonian().shifted(alpha))?;
    case.at_most(
        "gauge_invariance",
        0.0,
        g.rho().frobenius_distance(sx.rho()),
        ctx.tol("gauge"),
    );

    // Psi is convex along a (+1) mixture
    let base = Arc::new(ctx.model.clone());
    let o = ManifoldPoint::origin(base);
    let r = ctx.model.radius();
    let (ta, tb) = (
        ctx.rng.uniform(0.0, 0.95) * r,
        ctx.rng.uniform(0.0, 0.95) * r,
    );
    let p = extend(&o, &ctx.rng.perturbation(ctx.model.h0(), ta))?;
    let q = extend(&o, &ctx.rng.perturbation(ctx.model.h0(), tb))?;
    let psi = psi_along_mix(&p, &q, &[0.0, 0.25, 0.5, 0.75, 1.0])?;
    let worst = second_differences(&psi)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    case.check(
        worst >= -ctx.tol("psi_convexity"),
        "psi_second_difference",
        0.0,
        worst,
        ctx.tol("psi_convexity"),
    );
    case.min("min_psi_second_difference", worst);
    Ok(())
}

/// A random chain of `len` steps, each a random fraction of its patch radius.
fn random_chain(
    ctx: &mut Ctx<'_>,
    base: &Arc<ModelHamiltonian>,
    len: usize,
) -> Result<ManifoldPoint> {
    let mut p = ManifoldPoint::origin(base.clone());
    for _ in 0..len {
        let patch = p.patch();
        let a = ctx.rng.uniform(0.05, 0.95) * patch.radius;
        let y = ctx.rng.perturbation(&patch.h_at_base, a);
        p = extend(&p, &y)?;
    }
    Ok(p)
}

fn thm14(ctx: &mut Ctx<'_>, case: &mut Case) -> Result<()> {
    let base = Arc::new(ctx.model.clone());
    let len1 = 1 + ctx.rng.index(3);
    let len2 = 1 + ctx.rng.index(3);
    let p = random_chain(ctx, &base, len1)?;
    let q = random_chain(ctx, &base, len2)?;
    for (name, point) in [("p", &p), ("q", &q)] {
        if let Err(e) = point.revalidate() {
            case.error(&format!("replay_{name}"), e);
        } else {
            case.check(true, "replay", 0.0, 0.0, 0.0);
        }
    }
    let lambdas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let report = plus_convexity_check(&p, &q, &lambdas)?;
    let slack = ctx.tol("witness");
    for o in &report.outcomes {
        for lv in &o.levels {
            let q = format!("lambda={}, level={}", o.lambda, lv.level);
            case.at_most(
                format!("witness[{q}]"),
                lv.witness,
                lv.mixed_norm,
                slack * (1.0 + lv.witness),
            );
            case.check(lv.small, format!("small[{q}]"), 1.0, lv.witness, 0.0);
            case.check(
                lv.psi_convexity_holds,
                format!("psi_convexity[{q}]"),
                0.0,
                0.0,
                0.0,
            );
            case.check(lv.positive, format!("positive[{q}]"), 0.0, 0.0, 0.0);
            case.max(
                "max_mixed_over_witness",
                if lv.witness > 0.0 {
                    lv.mixed_norm / lv.witness
                } else {
                    0.0
                },
            );
            case.min(
                "radius_gate_all_within",
                if lv.within_patch_radius { 1.0 } else { 0.0 },
            );
        }
        case.check(
            o.passed,
            format!("mixture_revalidates[lambda={}]", o.lambda),
            1.0,
            0.0,
            0.0,
        );
    }
    // endpoints reproduce the chains
    let n = p.len().max(q.len());
    let one = crate::geometry::plus_mix(&p, &q, 1.0)?;
    let zero = crate::geometry::plus_mix(&p, &q, 0.0)?;
    case.at_most(
        "endpoint_lambda1",
        0.0,
        one.total().frobenius_distance(p.total()),
        0.0,
    );
    case.at_most(
        "endpoint_lambda0",
        0.0,
        zero.total().frobenius_distance(q.total()),
        0.0,
    );
    case.check(
        one.len() == n,
        "endpoint_length",
        n as f64,
        one.len() as f64,
        0.0,
    );

    // path independence: [X1, X2] vs [X2, X1]-style reordering has equal totals
    if p.len() >= 2 {
        let reversed: Vec<HermitianOperator> = p.steps().iter().rev().cloned().collect();
        if let Ok(r) = ManifoldPoint::from_steps(base.clone(), &reversed) {
            let pi = path_independence_check(&p, &r)?;
            case.check(
                pi.equal,
                "path_independence",
                0.0,
                pi.state_distance,
                pi.tolerance,
            );
        }
    }
    Ok(())
}

fn luxemburg_suite(ctx: &mut Ctx<'_>, case: &mut Case) -> Result<()> {
    let model = ctx.model;
    let dim = model.dim();
    let tol = ctx.tol("tol");

    let alpha = ctx.rng.uniform(-3.0, 3.0);
    let closed = alpha.abs() / 2f64.acosh();
    let r = luxemburg(model, &HermitianOperator::identity(dim).scaled(alpha), tol)?;
    case.close("identity_closed_form", closed, r.value, tol);

    let x = ctx.rng.hermitian(dim);
    let y = ctx.rng.hermitian(dim);
    let lx = luxemburg(model, &x, tol)?.value;
    let ly = luxemburg(model, &y, tol)?.value;
    let lxy = luxemburg(model, &(&x + &y), tol)?.value;
    case.at_most("triangle", lx + ly, lxy, 4.0 * tol);
    case.max("max_triangle_ratio", lxy / (lx + ly));

    let c = [0.5, 2.0, -1.0][ctx.rng.index(3)];
    let lc = luxemburg(model, &x.scaled(c), tol)?.value;
    case.close(
        format!("homogeneity[c={c}]"),
        c.abs() * lx,
        lc,
        2.0 * tol * c.abs().max(1.0),
    );

    // f(r) non-increasing on a log grid around r*
    let grid: Vec<f64> = (0..=20)
        .map(|k| lx * 10f64.powf(-1.0 + k as f64 / 10.0))
        .collect();
    let f: Vec<f64> = grid
        .iter()
        .map(|&r| luxemburg_predicate(model, &x, r))
        .collect::<Result<Vec<_>>>()?;
    let worst = f
        .windows(2)
        .filter(|w| w[0].is_finite())
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    case.check(
        worst <= 1e-12 * f[0].min(1e300),
        "predicate_monotone",
        0.0,
        worst,
        1e-12,
    );
    Ok(())
}
