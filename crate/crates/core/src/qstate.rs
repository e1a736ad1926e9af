//! Two-qubit polarization states over the basis (HH, HV, VH, VV) and their
//! entanglement measures.
//!
//! The target state is (|HH⟩ + e^{iϕ}|VV⟩)/√2, so the coherence element
//! ⟨HH|ρ|VV⟩ carries e^{−iϕ}.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rho = Matrix4<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = -1e-10;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A validated density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    rho: Rho,
}

impl TwoQubitState {
    /// Checks Hermiticity, unit trace and positivity.
    pub fn new(rho: Rho) -> Result<TwoQubitState> {
        let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm >= HERMITIAN_TOL {
            return Err(Error::State(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::State(format!("trace {tr}")));
        }
        let min = hermitian_eigenvalues(&rho).min();
        if min < PSD_TOL {
            return Err(Error::State(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(TwoQubitState { rho })
    }

    pub fn rho(&self) -> &Rho {
        &self.rho
    }

    pub fn coherence(&self) -> Complex64 {
        self.rho[(0, 3)]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vector4<f64> {
        let mut v = hermitian_eigenvalues(&self.rho);
        v.as_mut_slice().sort_by(f64::total_cmp);
        v
    }
}

impl Serialize for TwoQubitState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let part = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..4).map(|r| (0..4).map(|k| f(&self.rho[(r, k)])).collect()).collect()
        };
        let mut st = s.serialize_struct("TwoQubitState", 2)?;
        st.serialize_field("re", &part(|z| z.re))?;
        st.serialize_field("im", &part(|z| z.im))?;
        st.end()
    }
}

#[derive(Deserialize)]
struct RawState {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl<'de> Deserialize<'de> for TwoQubitState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawState::deserialize(d)?;
        let ok = raw.re.len() == 4 && raw.im.len() == 4 && raw.re.iter().chain(&raw.im).all(|r| r.len() == 4);
        if !ok {
            return Err(serde::de::Error::custom("density matrix must be 4×4"));
        }
        let rho = Rho::from_fn(|r, k| c(raw.re[r][k], raw.im[r][k]));
        TwoQubitState::new(rho).map_err(serde::de::Error::custom)
    }
}

fn hermitian_eigenvalues(m: &Rho) -> Vector4<f64> {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    SymmetricEigen::new(h).eigenvalues
}

/// ρ with populations `p`, 0, 0, 1 − p on HH, HV, VH, VV and the given
/// coherence ⟨HH|ρ|VV⟩. `p` is the fraction of pairs from crystal 1.
pub fn rho_x(coherence: Complex64, p: f64) -> Result<TwoQubitState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Argument(format!("crystal balance {p} outside [0, 1]")));
    }
    let mut rho = Rho::zeros();
    rho[(0, 0)] = c(p, 0.0);
    rho[(3, 3)] = c(1.0 - p, 0.0);
    rho[(0, 3)] = coherence;
    rho[(3, 0)] = coherence.conj();
    TwoQubitState::new(rho)
}

/// Weighted ⟨e^{−iϕ}⟩ over phase samples (rad). Weights are normalised.
pub fn mean_phasor(phases: &[f64], weights: Option<&[f64]>) -> Result<Complex64> {
    if phases.is_empty() {
        return Err(Error::Argument("no phase samples".into()));
    }
    let uniform;
    let w = match weights {
        Some(w) => {
            if w.len() != phases.len() || w.iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::Argument("weights must be non-negative, one per sample".into()));
            }
            w
        }
        None => {
            uniform = vec![1.0; phases.len()];
            &uniform
        }
    };
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Argument("weights sum to zero".into()));
    }
    let acc: Complex64 = phases.iter().zip(w).map(|(&p, &wk)| Complex64::from_polar(wk, -p)).sum();
    Ok(acc / total)
}

/// Σ w_k |ψ(ϕ_k)⟩⟨ψ(ϕ_k)| over iris samples.
pub fn rho_spatial(phases: &[f64], weights: Option<&[f64]>) -> Result<TwoQubitState> {
    rho_x(0.5 * mean_phasor(phases, weights)?, 0.5)
}

/// Temporally decohered state with visibility `v`.
pub fn rho_temporal(v: Complex64) -> Result<TwoQubitState> {
    if v.norm() > 1.0 + 1e-12 {
        return Err(Error::Argument(format!("|v| = {} exceeds 1", v.norm())));
    }
    rho_x(0.5 * v, 0.5)
}

/// Spatial and temporal averaging combined: coherence ½·v·⟨e^{−iϕ}⟩.
pub fn rho_combined(phases: &[f64], weights: Option<&[f64]>, v: Complex64) -> Result<TwoQubitState> {
    rho_combined_balanced(phases, weights, v, 0.5)
}

/// As [`rho_combined`] with a crystal balance `p` other than ½.
pub fn rho_combined_balanced(phases: &[f64], weights: Option<&[f64]>, v: Complex64, p: f64) -> Result<TwoQubitState> {
    if v.norm() > 1.0 + 1e-12 {
        return Err(Error::Argument(format!("|v| = {} exceeds 1", v.norm())));
    }
    let amp = (p * (1.0 - p)).max(0.0).sqrt();
    rho_x(amp * v * mean_phasor(phases, weights)?, p)
}

/// (|HH⟩ + e^{iϕ}|VV⟩)/√2.
pub fn target_state(phi_rad: f64) -> Vector4<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Vector4::new(c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), Complex64::from_polar(s, phi_rad))
}

pub fn fidelity(state: &TwoQubitState, psi: &Vector4<Complex64>) -> Result<f64> {
    let norm = psi.norm();
    if !(norm > 0.0) {
        return Err(Error::Argument("target state has zero norm".into()));
    }
    let psi = psi / c(norm, 0.0);
    let f = (psi.adjoint() * state.rho * psi)[(0, 0)];
    if f.im.abs() > 1e-12 {
        return Err(Error::Numeric {
            what: "fidelity has an imaginary part".into(),
            residual: f.im,
        });
    }
    Ok(f.re.clamp(0.0, 1.0))
}

/// Fidelity with the closest (|HH⟩ + e^{iϕ}|VV⟩)/√2, ϕ free. For the
/// X-states built here this is ½ + |⟨HH|ρ|VV⟩|.
pub fn max_fidelity_over_phase(state: &TwoQubitState) -> f64 {
    let r = &state.rho;
    (0.5 * (r[(0, 0)].re + r[(3, 3)].re) + r[(0, 3)].norm()).clamp(0.0, 1.0)
}

/// Eigenvalues this far below the largest are indistinguishable from zero.
const EIG_FLOOR: f64 = 64.0 * f64::EPSILON;

fn floored_sqrt(x: f64, scale: f64) -> f64 {
    if x <= EIG_FLOOR * scale.max(1.0) {
        0.0
    } else {
        x.sqrt()
    }
}

fn is_x_state(rho: &Rho) -> bool {
    (0..4).all(|r| (0..4).all(|k| r == k || r + k == 3 || rho[(r, k)] == c(0.0, 0.0)))
}

/// Wootters concurrence and tangle. X-shaped matrices (only diagonal and
/// anti-diagonal entries) use the closed form.
pub fn concurrence_tangle(state: &TwoQubitState) -> Result<(f64, f64)> {
    let rho = &state.rho;
    let conc = if is_x_state(rho) {
        let d = |i: usize| rho[(i, i)].re.max(0.0);
        let a = rho[(0, 3)].norm() - (d(1) * d(2)).sqrt();
        let b = rho[(1, 2)].norm() - (d(0) * d(3)).sqrt();
        (2.0 * a.max(b)).max(0.0)
    } else {
        concurrence_wootters(state)
    };
    let conc = conc.min(1.0);
    Ok((conc, conc * conc))
}

/// General Wootters concurrence from the eigenvalues of √ρ ρ̃ √ρ, with
/// ρ̃ = (σ_y⊗σ_y) ρ* (σ_y⊗σ_y).
pub fn concurrence_wootters(state: &TwoQubitState) -> f64 {
    let rho = &state.rho;
    let e = SymmetricEigen::new(*rho);
    let top = e.eigenvalues.max();
    let sqrt_vals = e.eigenvalues.map(|x| c(floored_sqrt(x, top), 0.0));
    let sqrt_rho = e.eigenvectors * Rho::from_diagonal(&sqrt_vals) * e.eigenvectors.adjoint();
    // σ_y⊗σ_y in the (HH, HV, VH, VV) basis is the anti-diagonal (−1, 1, 1, −1).
    let mut yy = Rho::zeros();
    yy[(0, 3)] = c(-1.0, 0.0);
    yy[(1, 2)] = c(1.0, 0.0);
    yy[(2, 1)] = c(1.0, 0.0);
    yy[(3, 0)] = c(-1.0, 0.0);
    let tilde = yy * rho.conjugate() * yy;
    let r = sqrt_rho * tilde * sqrt_rho;
    let ev = hermitian_eigenvalues(&r);
    let top = ev.max();
    let mut lam: Vec<f64> = ev.iter().map(|&x| floored_sqrt(x, top)).collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    (lam[0] - lam[1] - lam[2] - lam[3]).clamp(0.0, 1.0)
}

/// arg⟨HH|ρ|VV⟩ in degrees.
pub fn state_phase(state: &TwoQubitState) -> Result<f64> {
    let z = state.coherence();
    if z.norm() < 1e-9 {
        return Err(Error::Domain(format!(
            "coherence {:.3e} too small for a defined phase",
            z.norm()
        )));
    }
    Ok(z.arg().to_degrees())
}
