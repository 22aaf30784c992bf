//! Perturbed Gibbs states `rho_X = exp -(H_X + Psi_X)`, regularized means, centering and entropy.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{spectral, HermitianOperator, SpectralDecomposition};

/// Population below which a level is counted as underflowed.
pub const UNDERFLOW_THRESHOLD: f64 = 1e-300;
/// Tolerance on the imaginary part of `Tr(rho^l X rho^{1-l})`, relative to `max(1, ||X||_F)`.
pub const IMAGINARY_TOL: f64 = 1e-12;
/// Tolerance for "this tangent vector is centered at this state".
pub const CENTERING_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct GibbsState {
    hamiltonian: HermitianOperator,
    spectrum: SpectralDecomposition,
    rho: HermitianOperator,
    z: f64,
    psi: f64,
    populations: Vec<f64>,
    underflowed: usize,
}

/// Builds `rho = e^{-H}/Tr e^{-H}`, exponentiating `-(H - e_min)` and carrying `e_min` in `Psi`.
pub fn gibbs_state(h: &HermitianOperator) -> Result<GibbsState> {
    let spectrum = spectral(h)?;
    let e_min = spectrum.eigenvalues[0];
    let weights: Vec<f64> = spectrum
        .eigenvalues
        .iter()
        .map(|e| (-(e - e_min)).exp())
        .collect();
    let shifted_z: f64 = weights.iter().sum();
    let psi = shifted_z.ln() - e_min;
    let populations: Vec<f64> = weights.iter().map(|w| w / shifted_z).collect();
    let underflowed = populations
        .iter()
        .filter(|&&p| p < UNDERFLOW_THRESHOLD)
        .count();
    let rho = spectrum.synthesize(&populations);
    Ok(GibbsState {
        hamiltonian: h.clone(),
        spectrum,
        rho,
        z: psi.exp(),
        psi,
        populations,
        underflowed,
    })
}

impl GibbsState {
    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.hamiltonian
    }
    pub fn rho(&self) -> &HermitianOperator {
        &self.rho
    }
    pub fn z(&self) -> f64 {
        self.z
    }
    /// Massieu function `Psi = log Z`.
    pub fn psi(&self) -> f64 {
        self.psi
    }
    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }
    /// Eigendecomposition of the Hamiltonian; `rho` is diagonal in the same basis.
    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }
    /// Eigenvalues of `H + Psi`, so that `p_i = e^{-e_i}`.
    pub fn normalized_energies(&self) -> Vec<f64> {
        self.spectrum
            .eigenvalues
            .iter()
            .map(|e| e + self.psi)
            .collect()
    }
    pub fn populations(&self) -> &[f64] {
        &self.populations
    }
    /// Levels whose population fell below [`UNDERFLOW_THRESHOLD`].
    pub fn underflowed_levels(&self) -> usize {
        self.underflowed
    }

    /// `rho^t` for `t >= 0`, computed as `exp(-t (H + Psi))` so tiny populations keep their exponent.
    pub fn rho_power(&self, t: f64) -> HermitianOperator {
        let values: Vec<f64> = self
            .normalized_energies()
            .iter()
            .map(|e| (-t * e).exp())
            .collect();
        self.spectrum.synthesize(&values)
    }
}

/// `rho.X = Tr(rho^l X rho^{1-l})`, independent of `l` in finite dimension.
pub fn regularized_mean(state: &GibbsState, x: &HermitianOperator, lambda: f64) -> Result<f64> {
    x.check_dim(state.dim())?;
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid(
            "lambda",
            format!("must lie in (0,1), got {lambda}"),
        ));
    }
    let left = state.rho_power(lambda);
    let right = state.rho_power(1.0 - lambda);
    let t = (left.matrix() * x.matrix() * right.matrix()).trace();
    let scale = x.frobenius_norm().max(1.0);
    if t.im.abs() > IMAGINARY_TOL * scale {
        return Err(Error::ImaginaryResidue { residue: t.im });
    }
    Ok(t.re)
}

/// Representative `Y_hat = Y - (rho.Y) I` of the gauge class `Y + alpha I`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub raw: HermitianOperator,
    pub mean: f64,
    pub centered: HermitianOperator,
}

impl TangentVector {
    pub fn dim(&self) -> usize {
        self.raw.dim()
    }

    /// `a u + b v`, component-wise; centering is linear so the result stays centered.
    pub fn combine(a: f64, u: &TangentVector, b: f64, v: &TangentVector) -> TangentVector {
        TangentVector {
            raw: u.raw.scaled(a) + v.raw.scaled(b),
            mean: a * u.mean + b * v.mean,
            centered: u.centered.scaled(a) + v.centered.scaled(b),
        }
    }

    pub fn zero(dim: usize) -> TangentVector {
        TangentVector {
            raw: HermitianOperator::zeros(dim),
            mean: 0.0,
            centered: HermitianOperator::zeros(dim),
        }
    }

    /// The `I` direction itself (raw a multiple of the identity, nonzero).
    pub fn is_identity_direction(&self, tol: f64) -> bool {
        let n = self.dim();
        let c = self.raw.matrix()[(0, 0)].re;
        c.abs() > tol
            && self.raw.is_diagonal(tol)
            && (0..n).all(|i| (self.raw.matrix()[(i, i)].re - c).abs() <= tol)
    }

    /// Errors unless `rho.centered` vanishes at `state` within `tol`.
    pub fn check_centered(&self, state: &GibbsState, tol: f64) -> Result<()> {
        let mean = regularized_mean(state, &self.centered, 0.5)?;
        if mean.abs() > tol * (1.0 + self.centered.frobenius_norm()) {
            return Err(Error::NotCentered {
                mean,
                tolerance: tol,
            });
        }
        Ok(())
    }
}

pub fn center(state: &GibbsState, y: &HermitianOperator) -> Result<TangentVector> {
    let mean = regularized_mean(state, y, 0.5)?;
    Ok(TangentVector {
        raw: y.clone(),
        mean,
        centered: y.shifted(-mean),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Entropy {
    pub value: f64,
    /// Eigenvalues of `rho` treated as zero (`0 log 0 := 0`).
    pub underflowed: usize,
}

/// von Neumann entropy `-sum p log p` over the eigenvalues of the density matrix.
pub fn entropy(state: &GibbsState) -> Result<Entropy> {
    let p = state.rho().eigenvalues()?;
    let mut underflowed = 0;
    let mut s = 0.0;
    for &pi in &p {
        if pi < UNDERFLOW_THRESHOLD {
            underflowed += 1;
        } else {
            s -= pi * pi.ln();
        }
    }
    Ok(Entropy {
        value: s.max(0.0),
        underflowed,
    })
}
