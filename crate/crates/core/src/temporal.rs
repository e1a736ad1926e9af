//! Group delays between the |HH⟩ and |VV⟩ pair amplitudes, the joint
//! two-photon amplitude (JTPA), the visibility it sets on the coherence
//! term, and precompensator design.
//!
//! Delays are quoted as VV minus HH: the pair from crystal 2 relative to the
//! pair from crystal 1. The precompensator delay is that of the pump
//! component feeding crystal 1 (V) relative to the one feeding crystal 2
//! (H); compensator delays are V minus H for the daughter photon. The net
//! delay per arm is Δt_dc − τ_pc + τ_sc.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::{group_index, Branch, Material, SPEED_OF_LIGHT};
use crate::numeric::{golden_section, trapezoid_weights, linspace, Vec3};
use crate::phasematch::{solve_kz, vacuum_k, Arm, CrystalPlate, Orientation, PlateRole};
use crate::qstate;
use crate::source::SourceSetup;

/// Speed of light in nm/fs.
const C_NM_FS: f64 = 299.792_458;

/// Angular-frequency width (rad/fs) of a wavelength interval at `lambda`.
pub fn nm_to_rad_per_fs(width_nm: f64, lambda_nm: f64) -> f64 {
    2.0 * std::f64::consts::PI * C_NM_FS * width_nm / (lambda_nm * lambda_nm)
}

pub fn rad_per_fs_to_nm(width: f64, lambda_nm: f64) -> f64 {
    width * lambda_nm * lambda_nm / (2.0 * std::f64::consts::PI * C_NM_FS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PumpKind {
    CwDiode,
    Pulsed,
}

/// Pump with Gaussian spectral amplitude exp(−(Ω/σ)²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    pub center_nm: f64,
    /// Amplitude width σ_p, rad/fs.
    pub sigma: f64,
    pub kind: PumpKind,
}

impl PumpSpec {
    /// From an intensity FWHM in nm.
    pub fn from_fwhm_nm(center_nm: f64, fwhm_nm: f64, kind: PumpKind) -> Result<PumpSpec> {
        if !(fwhm_nm > 0.0 && center_nm > 0.0) {
            return Err(Error::Argument(format!("pump bandwidth {fwhm_nm} nm at {center_nm} nm")));
        }
        let fwhm_w = nm_to_rad_per_fs(fwhm_nm, center_nm);
        Ok(PumpSpec {
            center_nm,
            sigma: fwhm_w / (2.0 * std::f64::consts::LN_2).sqrt(),
            kind,
        })
    }

    /// Intensity FWHM in nm.
    pub fn fwhm_nm(&self) -> f64 {
        rad_per_fs_to_nm(self.sigma * (2.0 * std::f64::consts::LN_2).sqrt(), self.center_nm)
    }

    pub fn with_sigma(&self, sigma: f64) -> PumpSpec {
        PumpSpec { sigma, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterShape {
    Gaussian,
    TopHat,
}

/// Bandpass filter described by its intensity FWHM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    pub fwhm_nm: f64,
    pub shape: FilterShape,
}

impl Filter {
    pub fn gaussian(fwhm_nm: f64) -> Filter {
        Filter {
            fwhm_nm,
            shape: FilterShape::Gaussian,
        }
    }

    /// Amplitude transmission at detuning `nu` (rad/fs) from `lambda_nm`.
    pub fn amplitude(&self, nu: f64, lambda_nm: f64) -> f64 {
        let w = nm_to_rad_per_fs(self.fwhm_nm, lambda_nm);
        match self.shape {
            FilterShape::Gaussian => (-2.0 * std::f64::consts::LN_2 * nu * nu / (w * w)).exp(),
            FilterShape::TopHat => {
                if nu.abs() <= 0.5 * w {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Detuning beyond which the amplitude stays below `level`.
    fn reach(&self, lambda_nm: f64, level: f64) -> f64 {
        let w = nm_to_rad_per_fs(self.fwhm_nm, lambda_nm);
        match self.shape {
            FilterShape::Gaussian => w * (level.recip().ln() / (2.0 * std::f64::consts::LN_2)).sqrt(),
            FilterShape::TopHat => 0.5 * w,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Filters {
    pub signal: Option<Filter>,
    pub idler: Option<Filter>,
}

impl Filters {
    pub fn none() -> Filters {
        Filters::default()
    }

    pub fn both(f: Filter) -> Filters {
        Filters {
            signal: Some(f),
            idler: Some(f),
        }
    }

    fn get(&self, arm: Arm) -> Option<Filter> {
        match arm {
            Arm::Signal => self.signal,
            Arm::Idler => self.idler,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayBudget {
    pub dt_dc_s: f64,
    pub dt_dc_i: f64,
    pub tau_pc: f64,
    pub tau_sc_s: f64,
    pub tau_sc_i: f64,
    pub net_s: f64,
    pub net_i: f64,
}

/// Exit times after the second crystal, relative to the pump reaching the
/// first face. `t1` for the pair born in crystal 1, `t2` for crystal 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitTimes {
    pub t1_s: f64,
    pub t1_i: f64,
    pub t2_s: f64,
    pub t2_i: f64,
}

/// Inverse group velocities (fs/mm) of every leg of the two-crystal model
/// for one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Legs {
    pub pump_fast1: f64,
    pub pump_slow1: f64,
    pub pump_fast2: f64,
    pub daughter_slow1: f64,
    pub daughter_fast2: f64,
    pub daughter_slow2: f64,
}

/// Internal wave-normal of an arm's central photon in one crystal.
fn internal_dir(source: &SourceSetup, plate: &CrystalPlate, arm: Arm, branch: Branch) -> Result<Vec3<f64>> {
    let lambda = source.lambda(arm);
    let frame = plate.frame(source.triplet.lambda_p)?;
    let k = source.arm_direction(arm);
    let k0 = vacuum_k(lambda);
    Ok(solve_kz(&plate.material, &frame, lambda, [k0 * k[0], k0 * k[1]], branch)?.dir_crystal)
}

fn inv_vg(m: &Material, lambda: f64, dir: &Vec3<f64>, branch: Branch) -> Result<f64> {
    Ok(group_index(m, lambda, dir, branch)? / SPEED_OF_LIGHT)
}

pub fn legs(source: &SourceSetup, arm: Arm) -> Result<Legs> {
    let c1 = &source.crystal1;
    let c2 = source.crystal2();
    let m = &*c1.material;
    let lp = source.triplet.lambda_p;
    let la = source.lambda(arm);
    let z1 = c1.frame(lp)?.n;
    let z2 = c2.frame(lp)?.n;
    Ok(Legs {
        pump_fast1: inv_vg(m, lp, &z1, Branch::Fast)?,
        pump_slow1: inv_vg(m, lp, &z1, Branch::Slow)?,
        pump_fast2: inv_vg(m, lp, &z2, Branch::Fast)?,
        daughter_slow1: inv_vg(m, la, &internal_dir(source, c1, arm, Branch::Slow)?, Branch::Slow)?,
        daughter_fast2: inv_vg(m, la, &internal_dir(source, &c2, arm, Branch::Fast)?, Branch::Fast)?,
        daughter_slow2: inv_vg(m, la, &internal_dir(source, &c2, arm, Branch::Slow)?, Branch::Slow)?,
    })
}

pub fn crystal_exit_times(source: &SourceSetup) -> Result<ExitTimes> {
    let d = source.thickness();
    let t = |l: &Legs| {
        let t1 = 0.5 * d * l.pump_fast1 + 0.5 * d * l.daughter_slow1 + d * l.daughter_fast2;
        let t2 = d * l.pump_slow1 + 0.5 * d * l.pump_fast2 + 0.5 * d * l.daughter_slow2;
        (t1, t2)
    };
    let (t1_s, t2_s) = t(&legs(source, Arm::Signal)?);
    let (t1_i, t2_i) = t(&legs(source, Arm::Idler)?);
    Ok(ExitTimes { t1_s, t1_i, t2_s, t2_i })
}

/// Δt_dc for one arm: exit time of the crystal-2 pair minus that of the
/// crystal-1 pair, fs.
pub fn delta_t_dc(source: &SourceSetup, arm: Arm) -> Result<f64> {
    let d = source.thickness();
    let l = legs(source, arm)?;
    Ok(d * (l.pump_slow1 - l.daughter_fast2)
        + 0.5 * d * (l.pump_fast2 - l.pump_fast1)
        + 0.5 * d * (l.daughter_slow2 - l.daughter_slow1))
}

/// Delay of the V-polarized component relative to H after crossing the
/// plate along its normal, fs.
fn v_minus_h_delay(plate: &CrystalPlate, lambda_nm: f64) -> Result<f64> {
    if plate.thickness_mm == 0.0 {
        return Ok(0.0);
    }
    let n = plate.frame(lambda_nm)?.n;
    let m = &*plate.material;
    let fast = inv_vg(m, lambda_nm, &n, Branch::Fast)?;
    let slow = inv_vg(m, lambda_nm, &n, Branch::Slow)?;
    let per_mm = if plate.fast_along_h() { slow - fast } else { fast - slow };
    Ok(plate.thickness_mm * per_mm)
}

/// Pump delay added by a precompensator at the pump wavelength, fs.
pub fn tau_pc(plate: &CrystalPlate, lambda_p: f64) -> Result<f64> {
    v_minus_h_delay(plate, lambda_p)
}

/// Daughter delay added by a spatial compensator, fs.
pub fn tau_sc(plate: &CrystalPlate, lambda_nm: f64) -> Result<f64> {
    v_minus_h_delay(plate, lambda_nm)
}

pub fn delay_budget(source: &SourceSetup) -> Result<DelayBudget> {
    let dt_dc_s = delta_t_dc(source, Arm::Signal)?;
    let dt_dc_i = delta_t_dc(source, Arm::Idler)?;
    let tau_pc = match source.precompensator() {
        Some(p) => tau_pc(p, source.triplet.lambda_p)?,
        None => 0.0,
    };
    let sc = |arm| -> Result<f64> {
        match source.spatial_compensator(arm) {
            Some(p) => tau_sc(p, source.lambda(arm)),
            None => Ok(0.0),
        }
    };
    let tau_sc_s = sc(Arm::Signal)?;
    let tau_sc_i = sc(Arm::Idler)?;
    Ok(DelayBudget {
        dt_dc_s,
        dt_dc_i,
        tau_pc,
        tau_sc_s,
        tau_sc_i,
        net_s: dt_dc_s - tau_pc + tau_sc_s,
        net_i: dt_dc_i - tau_pc + tau_sc_i,
    })
}

// ---------------------------------------------------------------------------
// Joint two-photon amplitude

/// Coefficients of the phasematching argument
/// X = (d/2)·(D₊,s ν_s + D₊,i ν_i + ¼ D″ (ν_s − ν_i)²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JtpaParams {
    pub thickness_mm: f64,
    /// Daughter minus pump inverse group velocity, fs/mm.
    pub d_plus_s: f64,
    pub d_plus_i: f64,
    /// Mean daughter GVD, fs²/mm.
    pub d2: f64,
    pub sigma: f64,
}

impl JtpaParams {
    pub fn new(source: &SourceSetup, pump: &PumpSpec) -> Result<JtpaParams> {
        let c1 = &source.crystal1;
        let m = &*c1.material;
        let lp = source.triplet.lambda_p;
        let z = c1.frame(lp)?.n;
        let p = inv_vg(m, lp, &z, Branch::Fast)?;
        let dau = |arm| -> Result<(f64, f64)> {
            let dir = internal_dir(source, c1, arm, Branch::Slow)?;
            let la = source.lambda(arm);
            Ok((
                inv_vg(m, la, &dir, Branch::Slow)? - p,
                crate::materials::gvd(m, la, &dir, Branch::Slow)?,
            ))
        };
        let (d_plus_s, g_s) = dau(Arm::Signal)?;
        let (d_plus_i, g_i) = dau(Arm::Idler)?;
        Ok(JtpaParams {
            thickness_mm: source.thickness(),
            d_plus_s,
            d_plus_i,
            d2: 0.5 * (g_s + g_i),
            sigma: pump.sigma,
        })
    }

    pub fn argument(&self, nu_s: f64, nu_i: f64) -> f64 {
        let delta = nu_s - nu_i;
        0.5 * self.thickness_mm * (self.d_plus_s * nu_s + self.d_plus_i * nu_i + 0.25 * self.d2 * delta * delta)
    }

    /// Unnormalised amplitude e^{−iX}·sinc(X)·e^{−((ν_s+ν_i)/σ)²}.
    pub fn amplitude(&self, nu_s: f64, nu_i: f64) -> Complex64 {
        let x = self.argument(nu_s, nu_i);
        let sinc = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
        let om = (nu_s + nu_i) / self.sigma;
        Complex64::from_polar(sinc * (-om * om).exp(), -x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points: usize,
    pub half_width_s: f64,
    pub half_width_i: f64,
    /// Filters assumed downstream; the truncation check is applied to the
    /// filtered amplitude.
    pub window: Filters,
}

const EDGE_LEVEL: f64 = 1e-4;

impl GridSpec {
    /// Square grid sized from the filters (or the pump and phasematching
    /// widths when a filter is absent), with enough points to resolve the
    /// pump-limited anti-diagonal.
    pub fn auto(source: &SourceSetup, pump: &PumpSpec, window: &Filters) -> Result<GridSpec> {
        let params = JtpaParams::new(source, pump)?;
        let pump_reach = pump.sigma * EDGE_LEVEL.recip().ln().sqrt();
        let width = |arm: Arm| -> f64 {
            match window.get(arm) {
                Some(f) => 1.05 * f.reach(source.lambda(arm), EDGE_LEVEL),
                None => {
                    // Without a filter the sinc tail sets the scale; take the
                    // detuning where the GVD term reaches X = 50 or the
                    // group-delay term does, whichever comes first.
                    let d = params.thickness_mm.max(1e-6);
                    let from_gvd = (400.0 / (d * params.d2.abs().max(1e-9))).sqrt();
                    let dp = params.d_plus_s.abs().max(params.d_plus_i.abs()).max(1e-9);
                    from_gvd.min(100.0 / (d * dp)) + pump_reach
                }
            }
        };
        let (ws, wi) = (width(Arm::Signal), width(Arm::Idler));
        let mut points = 512;
        let finest = pump.sigma / 4.0;
        while 2.0 * ws.max(wi) / (points - 1) as f64 > finest && points < 4096 {
            points *= 2;
        }
        Ok(GridSpec {
            points,
            half_width_s: ws,
            half_width_i: wi,
            window: *window,
        })
    }

    pub fn with_points(&self, points: usize) -> GridSpec {
        GridSpec { points, ..self.clone() }
    }
}

/// Sampled JTPA, normalised so that Σ|f|² dν_s dν_i = 1 (trapezoid).
#[derive(Debug, Clone, PartialEq)]
pub struct JtpaGrid {
    pub nu_s: Vec<f64>,
    pub nu_i: Vec<f64>,
    /// Row-major: index `is * nu_i.len() + ii`.
    pub amplitude: Vec<Complex64>,
    pub lambda_s: f64,
    pub lambda_i: f64,
    pub params: JtpaParams,
}

impl JtpaGrid {
    pub fn at(&self, is: usize, ii: usize) -> Complex64 {
        self.amplitude[is * self.nu_i.len() + ii]
    }

    fn step(v: &[f64]) -> f64 {
        if v.len() > 1 {
            v[1] - v[0]
        } else {
            1.0
        }
    }

    pub fn weights(&self) -> (Vec<f64>, Vec<f64>) {
        (
            trapezoid_weights(self.nu_s.len(), Self::step(&self.nu_s)),
            trapezoid_weights(self.nu_i.len(), Self::step(&self.nu_i)),
        )
    }

    fn filter_profile(&self, filters: &Filters) -> (Vec<f64>, Vec<f64>) {
        let prof = |f: Option<Filter>, axis: &[f64], lam: f64| -> Vec<f64> {
            axis.iter().map(|&nu| f.map_or(1.0, |f| f.amplitude(nu, lam))).collect()
        };
        (
            prof(filters.signal, &self.nu_s, self.lambda_s),
            prof(filters.idler, &self.nu_i, self.lambda_i),
        )
    }

    /// Filter-multiplied amplitude, renormalised.
    pub fn filtered(&self, filters: &Filters) -> Result<JtpaGrid> {
        let (fs, fi) = self.filter_profile(filters);
        let (ws, wi) = self.weights();
        let ni = self.nu_i.len();
        let mut amp = self.amplitude.clone();
        let mut norm = 0.0;
        for is in 0..self.nu_s.len() {
            for ii in 0..ni {
                let a = &mut amp[is * ni + ii];
                *a *= fs[is] * fi[ii];
                norm += a.norm_sqr() * ws[is] * wi[ii];
            }
        }
        if !(norm > 1e-300) {
            return Err(Error::Numeric {
                what: "JTPA has zero norm after filtering".into(),
                residual: norm,
            });
        }
        let k = norm.sqrt().recip();
        amp.iter_mut().for_each(|a| *a *= k);
        Ok(JtpaGrid {
            amplitude: amp,
            ..self.clone()
        })
    }
}

pub fn jtpa(source: &SourceSetup, pump: &PumpSpec, grid: &GridSpec) -> Result<JtpaGrid> {
    if grid.points < 3 || !(grid.half_width_s > 0.0 && grid.half_width_i > 0.0) {
        return Err(Error::Argument(format!("bad grid {grid:?}")));
    }
    if !(pump.sigma > 0.0) {
        return Err(Error::Argument("pump bandwidth must be positive".into()));
    }
    let params = JtpaParams::new(source, pump)?;
    let n = grid.points;
    let nu_s = linspace(-grid.half_width_s, grid.half_width_s, n);
    let nu_i = linspace(-grid.half_width_i, grid.half_width_i, n);
    let amplitude: Vec<Complex64> = (0..n * n)
        .into_par_iter()
        .map(|k| params.amplitude(nu_s[k / n], nu_i[k % n]))
        .collect();
    let raw = JtpaGrid {
        nu_s,
        nu_i,
        amplitude,
        lambda_s: source.triplet.lambda_s,
        lambda_i: source.triplet.lambda_i,
        params,
    };
    check_truncation(&raw, grid)?;
    // Normalise without filters; visibility renormalises after filtering.
    raw.filtered(&Filters::none())
}

/// JTPA on an automatically sized grid, widened up to three times if the
/// amplitude at the edges is still above the truncation threshold.
pub fn jtpa_auto(source: &SourceSetup, pump: &PumpSpec, window: &Filters) -> Result<JtpaGrid> {
    let mut grid = GridSpec::auto(source, pump, window)?;
    for _ in 0..3 {
        match jtpa(source, pump, &grid) {
            Err(Error::Grid { suggest_s, suggest_i, .. }) => {
                grid.half_width_s = suggest_s;
                grid.half_width_i = suggest_i;
            }
            other => return other,
        }
    }
    jtpa(source, pump, &grid)
}

fn check_truncation(g: &JtpaGrid, spec: &GridSpec) -> Result<()> {
    let (fs, fi) = g.filter_profile(&spec.window);
    let n = g.nu_i.len();
    let mut peak: f64 = 0.0;
    let mut edge: f64 = 0.0;
    for is in 0..g.nu_s.len() {
        for ii in 0..n {
            let a = g.amplitude[is * n + ii].norm() * fs[is] * fi[ii];
            peak = peak.max(a);
            if is == 0 || ii == 0 || is == g.nu_s.len() - 1 || ii == n - 1 {
                edge = edge.max(a);
            }
        }
    }
    let ratio = edge / peak;
    if !(ratio <= EDGE_LEVEL) {
        return Err(Error::Grid {
            edge_ratio: ratio,
            suggest_s: 1.5 * spec.half_width_s,
            suggest_i: 1.5 * spec.half_width_i,
        });
    }
    Ok(())
}

/// Filtered, normalised joint spectral intensity with quadrature weights
/// folded in, reusable across delays.
#[derive(Debug, Clone, PartialEq)]
pub struct JointIntensity {
    pub nu_s: Vec<f64>,
    pub nu_i: Vec<f64>,
    /// Row-major like [`JtpaGrid::amplitude`]; sums to 1.
    pub weight: Vec<f64>,
}

impl JointIntensity {
    pub fn new(j: &JtpaGrid, filters: &Filters) -> Result<JointIntensity> {
        let (fs, fi) = j.filter_profile(filters);
        let (ws, wi) = j.weights();
        let n = j.nu_i.len();
        let mut weight: Vec<f64> = (0..j.amplitude.len())
            .map(|k| {
                let (a, b) = (k / n, k % n);
                j.amplitude[k].norm_sqr() * (fs[a] * fi[b]).powi(2) * ws[a] * wi[b]
            })
            .collect();
        let total: f64 = weight.iter().sum();
        if !(total > 1e-300) {
            return Err(Error::Numeric {
                what: "JTPA has zero norm after filtering".into(),
                residual: total,
            });
        }
        weight.iter_mut().for_each(|w| *w /= total);
        Ok(JointIntensity {
            nu_s: j.nu_s.clone(),
            nu_i: j.nu_i.clone(),
            weight,
        })
    }

    /// v(Δ_s, Δ_i) = Σ I(ν_s, ν_i)·e^{i(ν_sΔ_s + ν_iΔ_i)}.
    pub fn visibility(&self, net_s: f64, net_i: f64) -> Complex64 {
        let n = self.nu_i.len();
        let ei: Vec<Complex64> = self.nu_i.iter().map(|&nu| Complex64::from_polar(1.0, nu * net_i)).collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, &nu) in self.nu_s.iter().enumerate() {
            let row = &self.weight[a * n..(a + 1) * n];
            let r: Complex64 = row.iter().zip(&ei).map(|(w, e)| e * w).sum();
            acc += Complex64::from_polar(1.0, nu * net_s) * r;
        }
        acc
    }
}

/// v(Δ_s, Δ_i) = ∬|f_filtered|² e^{i(ν_sΔ_s + ν_iΔ_i)} / ∬|f_filtered|².
pub fn visibility(j: &JtpaGrid, net_s: f64, net_i: f64, filters: &Filters) -> Result<Complex64> {
    Ok(JointIntensity::new(j, filters)?.visibility(net_s, net_i))
}

/// Visibility with an arbitrary relative spectral phase Φ(ν_s, ν_i) in place
/// of the linear delay term.
pub fn visibility_with_phase<F>(j: &JtpaGrid, filters: &Filters, phase: F) -> Result<Complex64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let f = j.filtered(filters)?;
    let (ws, wi) = f.weights();
    let n = f.nu_i.len();
    let acc = (0..f.nu_s.len())
        .into_par_iter()
        .map(|is| {
            let mut r = Complex64::new(0.0, 0.0);
            for ii in 0..n {
                let p = phase(f.nu_s[is], f.nu_i[ii]);
                r += Complex64::from_polar(f.amplitude[is * n + ii].norm_sqr() * wi[ii], p);
            }
            r * ws[is]
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Exact spectral phase

#[derive(Debug, Clone)]
struct PhaseTerm {
    material: Arc<Material>,
    dir: Vec3<f64>,
    branch: Branch,
    /// Signed length: positive on the crystal-2 (VV) path, negative on the
    /// crystal-1 (HH) path.
    length_mm: f64,
}

impl PhaseTerm {
    fn phase(&self, omega: f64) -> f64 {
        let lambda = 2.0 * std::f64::consts::PI * C_NM_FS / omega;
        let n = self.material.mode_unchecked(lambda, &self.dir, self.branch).n;
        self.length_mm * n * omega / SPEED_OF_LIGHT
    }

    fn group_delay(&self, omega: f64) -> f64 {
        let lambda = 2.0 * std::f64::consts::PI * C_NM_FS / omega;
        let m = self.material.mode_unchecked(lambda, &self.dir, self.branch);
        self.length_mm * m.group_index(lambda) / SPEED_OF_LIGHT
    }
}

/// Relative spectral phase (VV minus HH) of the pair amplitudes through every
/// plate, evaluated with full dispersion along the central directions.
#[derive(Debug, Clone)]
pub struct SpectralPhase {
    pump: Vec<PhaseTerm>,
    signal: Vec<PhaseTerm>,
    idler: Vec<PhaseTerm>,
    omega_s: f64,
    omega_i: f64,
}

fn omega_of(lambda_nm: f64) -> f64 {
    2.0 * std::f64::consts::PI * C_NM_FS / lambda_nm
}

impl SpectralPhase {
    pub fn new(source: &SourceSetup) -> Result<SpectralPhase> {
        let d = source.thickness();
        let c1 = &source.crystal1;
        let c2 = source.crystal2();
        let lp = source.triplet.lambda_p;
        let m = c1.material.clone();
        let z = c1.frame(lp)?.n;
        let term = |material: &Arc<Material>, dir, branch, length_mm| PhaseTerm {
            material: material.clone(),
            dir,
            branch,
            length_mm,
        };
        let mut pump = vec![
            term(&m, z, Branch::Slow, d),
            term(&m, c2.frame(lp)?.n, Branch::Fast, 0.5 * d),
            term(&m, z, Branch::Fast, -0.5 * d),
        ];
        if let Some(pc) = source.precompensator() {
            let n = pc.frame(lp)?.n;
            let (h, v) = if pc.fast_along_h() { (Branch::Fast, Branch::Slow) } else { (Branch::Slow, Branch::Fast) };
            pump.push(term(&pc.material, n, h, pc.thickness_mm));
            pump.push(term(&pc.material, n, v, -pc.thickness_mm));
        }
        let arm_terms = |arm: Arm| -> Result<Vec<PhaseTerm>> {
            let mut t = vec![
                term(&m, internal_dir(source, &c2, arm, Branch::Slow)?, Branch::Slow, 0.5 * d),
                term(&m, internal_dir(source, c1, arm, Branch::Slow)?, Branch::Slow, -0.5 * d),
                term(&m, internal_dir(source, &c2, arm, Branch::Fast)?, Branch::Fast, -d),
            ];
            if let Some(sc) = source.spatial_compensator(arm) {
                let n = sc.frame(source.lambda(arm))?.n;
                let (h, v) = if sc.fast_along_h() { (Branch::Fast, Branch::Slow) } else { (Branch::Slow, Branch::Fast) };
                t.push(term(&sc.material, n, v, sc.thickness_mm));
                t.push(term(&sc.material, n, h, -sc.thickness_mm));
            }
            Ok(t)
        };
        Ok(SpectralPhase {
            pump,
            signal: arm_terms(Arm::Signal)?,
            idler: arm_terms(Arm::Idler)?,
            omega_s: omega_of(source.triplet.lambda_s),
            omega_i: omega_of(source.triplet.lambda_i),
        })
    }

    fn sum(terms: &[PhaseTerm], omega: f64) -> f64 {
        terms.iter().map(|t| t.phase(omega)).sum()
    }

    /// Φ(ν_s, ν_i) − Φ(0, 0), rad.
    pub fn eval(&self, nu_s: f64, nu_i: f64) -> f64 {
        let wp = self.omega_s + self.omega_i;
        Self::sum(&self.pump, wp + nu_s + nu_i) - Self::sum(&self.pump, wp)
            + Self::sum(&self.signal, self.omega_s + nu_s)
            - Self::sum(&self.signal, self.omega_s)
            + Self::sum(&self.idler, self.omega_i + nu_i)
            - Self::sum(&self.idler, self.omega_i)
    }

    /// First derivatives at the centre: the net delays (fs) per arm.
    pub fn linear(&self) -> (f64, f64) {
        let wp = self.omega_s + self.omega_i;
        let p: f64 = self.pump.iter().map(|t| t.group_delay(wp)).sum();
        let s: f64 = self.signal.iter().map(|t| t.group_delay(self.omega_s)).sum();
        let i: f64 = self.idler.iter().map(|t| t.group_delay(self.omega_i)).sum();
        (p + s, p + i)
    }
}

// ---------------------------------------------------------------------------
// Precompensator design and delay sweeps

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecompDesign {
    pub thickness_mm: f64,
    pub orientation: Orientation,
    pub tau_pc: f64,
    /// Delay each arm needs from the precompensator, fs.
    pub target_s: f64,
    pub target_i: f64,
    /// |v| at the chosen thickness (first-order model).
    pub visibility: f64,
    /// Set when the arms need different delays, so a crystal after the
    /// downconversion crystals would be required for full compensation.
    pub needs_postcompensator: bool,
}

/// Arms differing by more than this (fs) are flagged for postcompensation.
const POSTCOMP_THRESHOLD_FS: f64 = 1.0;

/// Precompensator thickness for a template plate (material, cut and
/// orientation), accounting for the spatial compensators in `source`.
/// Any precompensator already in `source` is ignored.
pub fn design_precompensator(source: &SourceSetup, pump: &PumpSpec, template: &CrystalPlate) -> Result<PrecompDesign> {
    let lp = source.triplet.lambda_p;
    if !template.material.is_birefringent(lp) {
        return Err(Error::Argument(format!("{} is not birefringent", template.material.name)));
    }
    let unit = CrystalPlate {
        thickness_mm: 1.0,
        role: PlateRole::Precompensator,
        ..template.clone()
    };
    let per_mm = tau_pc(&unit, lp)?;
    if per_mm.abs() < 1e-9 {
        return Err(Error::Argument(format!(
            "{} gives no pump delay along this cut",
            template.material.name
        )));
    }
    let base = delay_budget(&source.with_plate(PlateRole::Precompensator, None))?;
    let target_s = base.dt_dc_s + base.tau_sc_s;
    let target_i = base.dt_dc_i + base.tau_sc_i;
    let mean = 0.5 * (target_s + target_i);
    let filters = source.collection.filters;
    let intensity = JointIntensity::new(&jtpa_auto(source, pump, &filters)?, &filters)?;
    let vis = |tau: f64| -> Result<f64> { Ok(intensity.visibility(target_s - tau, target_i - tau).norm()) };
    let split = (target_s - target_i).abs() > POSTCOMP_THRESHOLD_FS;
    let tau = if split {
        let (lo, hi) = (target_s.min(target_i), target_s.max(target_i));
        golden_section(|t| vis(t).map(|v| -v), lo, hi, 1e-3)?.0
    } else {
        mean
    };
    let mut thickness_mm = tau / per_mm;
    let mut orientation = unit.orientation;
    if thickness_mm < 0.0 {
        thickness_mm = -thickness_mm;
        orientation = unit.rotated().orientation;
    }
    Ok(PrecompDesign {
        thickness_mm,
        orientation,
        tau_pc: tau,
        target_s,
        target_i,
        visibility: vis(tau)?,
        needs_postcompensator: split,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayPoint {
    pub delay_fs: f64,
    pub tangle: f64,
}

/// Tangle of the temporally decohered state for a list of precompensator
/// delays (replacing any precompensator in `source`).
pub fn tangle_vs_delay(source: &SourceSetup, pump: &PumpSpec, delays: &[f64], filters: &Filters) -> Result<Vec<DelayPoint>> {
    let base = delay_budget(&source.with_plate(PlateRole::Precompensator, None))?;
    let intensity = JointIntensity::new(&jtpa_auto(source, pump, filters)?, filters)?;
    delays
        .par_iter()
        .map(|&tau| {
            let v = intensity.visibility(base.net_s - tau, base.net_i - tau);
            let rho = qstate::rho_temporal(v)?;
            Ok(DelayPoint {
                delay_fs: tau,
                tangle: qstate::concurrence_tangle(&rho)?.1,
            })
        })
        .collect()
}

/// Full width at half maximum of a sampled peak, by linear interpolation.
pub fn peak_fwhm(curve: &[DelayPoint]) -> Option<f64> {
    let (imax, pmax) = curve
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.tangle.total_cmp(&b.1.tangle))?;
    let half = 0.5 * pmax.tangle;
    let cross = |range: Box<dyn Iterator<Item = usize>>| -> Option<f64> {
        let mut prev = imax;
        for k in range {
            if curve[k].tangle < half {
                let (a, b) = (&curve[k], &curve[prev]);
                let t = (half - a.tangle) / (b.tangle - a.tangle);
                return Some(a.delay_fs + t * (b.delay_fs - a.delay_fs));
            }
            prev = k;
        }
        None
    };
    let right = cross(Box::new(imax + 1..curve.len()))?;
    let left = cross(Box::new((0..imax).rev()))?;
    Some(right - left)
}
