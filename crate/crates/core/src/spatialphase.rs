//! Emission-direction dependence of the relative phase between the |HH⟩
//! and |VV⟩ amplitudes, phase maps at the iris plane, and spatial
//! compensator design.
//!
//! Phases are accumulated as plane-wave k·r along each segment: the pair
//! born in crystal 1 crosses half of crystal 1 on its slow branch and all of
//! crystal 2 on crystal 2's fast branch; the pair born in crystal 2 crosses
//! half of crystal 2 on the slow branch. Signal and idler carry opposite
//! transverse wavevectors.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::{Branch, Material};
use crate::numeric::{golden_section, normalize, unwrap_phase, Vec3};
use crate::phasematch::{
    solve_kz, vacuum_k, Arm, CrystalPlate, Orientation, PlateFrame, PlateRole,
};
use crate::source::{ArmFrame, SourceSetup};

/// Phase terms for one photon, rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseComponents {
    /// Crystal-2 traversal of the crystal-1 photon along its refracted ray.
    pub phi_e: f64,
    /// Birth-crystal phase of the crystal-1 photon minus that of the
    /// crystal-2 photon. Identically zero when the slow branch is ordinary.
    pub phi_o: f64,
    /// External path difference from the walkoff-displaced exit points.
    pub phi_delta: f64,
}

impl PhaseComponents {
    pub fn total(&self) -> f64 {
        self.phi_e + self.phi_o + self.phi_delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanAxis {
    /// Along the outward direction in the emission plane.
    Radial,
    /// Perpendicular to the emission plane.
    Tangential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    pub x_mm: f64,
    pub phase_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMapMeta {
    pub lambda_p_nm: f64,
    pub lambda_s_nm: f64,
    pub lambda_i_nm: f64,
    pub setup_hash: String,
}

/// Relative phase sampled across the signal iris; each signal point is paired
/// with the idler direction of opposite transverse wavevector. Phases are
/// relative to the scan centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMap {
    pub plane_distance_mm: f64,
    pub axis: ScanAxis,
    pub samples: Vec<PhaseSample>,
    /// Phase at the scan centre, wrapped to [0, 360).
    pub global_phase_deg: f64,
    pub meta: PhaseMapMeta,
}

impl PhaseMap {
    /// Least-squares slope, deg/mm.
    pub fn slope_deg_per_mm(&self) -> f64 {
        let x: Vec<f64> = self.samples.iter().map(|s| s.x_mm).collect();
        let y: Vec<f64> = self.samples.iter().map(|s| s.phase_deg).collect();
        crate::numeric::linear_slope(&x, &y)
    }

    pub fn peak_to_peak_deg(&self) -> f64 {
        let it = self.samples.iter().map(|s| s.phase_deg);
        it.clone().fold(f64::NEG_INFINITY, f64::max) - it.fold(f64::INFINITY, f64::min)
    }
}

fn k_transverse(khat: &Vec3<f64>, lambda_nm: f64) -> [f64; 2] {
    let k0 = vacuum_k(lambda_nm);
    [k0 * khat[0], k0 * khat[1]]
}

fn direction_from_q(q: [f64; 2], lambda_nm: f64) -> Result<Vec3<f64>> {
    let k0 = vacuum_k(lambda_nm);
    let (a, b) = (q[0] / k0, q[1] / k0);
    let z2 = 1.0 - a * a - b * b;
    if !(z2 > 0.0) {
        return Err(Error::Domain("transverse wavevector exceeds the vacuum wavevector".into()));
    }
    Ok([a, b, z2.sqrt()])
}

fn check_forward(khat: &Vec3<f64>) -> Result<()> {
    let r = (khat[0] * khat[0] + khat[1] * khat[1] + khat[2] * khat[2]).sqrt();
    if !(khat[2] > 0.0) || (r - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("emission direction {khat:?} is not a forward unit vector")));
    }
    Ok(())
}

/// Transverse walkoff displacement after crossing `length` along the ray of
/// a mode, in the plate's local (h, v) coordinates.
fn ray_offset(m: &Material, frame: &PlateFrame<f64>, lambda: f64, dir: &Vec3<f64>, branch: Branch, length: f64) -> [f64; 2] {
    let t = frame.to_local(&m.ray_unchecked(lambda, dir, branch));
    [length * t[0] / t[2], length * t[1] / t[2]]
}

/// Phase components for a photon with lab transverse wavevector `q`.
pub fn phi_components_q(source: &SourceSetup, q: [f64; 2], lambda_nm: f64) -> Result<PhaseComponents> {
    let d = source.thickness();
    let c1 = &source.crystal1;
    let c2 = source.crystal2();
    let m = &*c1.material;
    let f1 = c1.frame(source.triplet.lambda_p)?;
    let f2 = c2.frame(source.triplet.lambda_p)?;

    let s1 = solve_kz(m, &f1, lambda_nm, q, Branch::Slow)?;
    let e2 = solve_kz(m, &f2, lambda_nm, q, Branch::Fast)?;
    let s2 = solve_kz(m, &f2, lambda_nm, q, Branch::Slow)?;
    let r1 = ray_offset(m, &f1, lambda_nm, &s1.dir_crystal, Branch::Slow, 0.5 * d);
    let r2 = ray_offset(m, &f2, lambda_nm, &e2.dir_crystal, Branch::Fast, d);
    let r3 = ray_offset(m, &f2, lambda_nm, &s2.dir_crystal, Branch::Slow, 0.5 * d);
    let qdot = |r: [f64; 2]| q[0] * r[0] + q[1] * r[1];

    let phi_e = qdot(r2) + e2.kz * d;
    let phi_o = (qdot(r1) + 0.5 * d * s1.kz) - (qdot(r3) + 0.5 * d * s2.kz);
    let phi_delta = -(qdot(r1) + qdot(r2) - qdot(r3));
    Ok(PhaseComponents { phi_e, phi_o, phi_delta })
}

/// Phase components for a photon leaving along the lab unit vector `khat`.
pub fn phi_components(source: &SourceSetup, khat: &Vec3<f64>, lambda_nm: f64) -> Result<PhaseComponents> {
    check_forward(khat)?;
    phi_components_q(source, k_transverse(khat, lambda_nm), lambda_nm)
}

/// Relative phase a single photon picks up in the crystal pair, rad.
pub fn phi_dc(source: &SourceSetup, khat: &Vec3<f64>, lambda_nm: f64) -> Result<f64> {
    Ok(phi_components(source, khat, lambda_nm)?.total())
}

/// Phase of a compensator plate sitting normal to an arm: thickness times
/// (kz of the H-like mode − kz of the V-like mode), rad.
pub fn phi_c(plate: &CrystalPlate, arm: &ArmFrame, khat: &Vec3<f64>, lambda_nm: f64) -> Result<f64> {
    check_forward(khat)?;
    if plate.thickness_mm == 0.0 {
        return Ok(0.0);
    }
    Ok(plate.thickness_mm * compensator_kz_split(plate, arm, khat, lambda_nm)?)
}

/// kz(H) − kz(V) in a compensator, rad/mm.
fn compensator_kz_split(plate: &CrystalPlate, arm: &ArmFrame, khat: &Vec3<f64>, lambda_nm: f64) -> Result<f64> {
    let local = arm.to_local(khat);
    if !(local[2] > 0.0) {
        return Err(Error::Domain("photon travels away from the compensator".into()));
    }
    let k0 = vacuum_k(lambda_nm);
    let q = [k0 * local[0], k0 * local[1]];
    let frame = plate.frame(lambda_nm)?;
    let m = &*plate.material;
    let fast = solve_kz(m, &frame, lambda_nm, q, Branch::Fast)?;
    let slow = solve_kz(m, &frame, lambda_nm, q, Branch::Slow)?;
    let d_fast = frame.to_local(&m.polarization_unchecked(lambda_nm, &fast.dir_crystal, Branch::Fast));
    let d_slow = frame.to_local(&m.polarization_unchecked(lambda_nm, &slow.dir_crystal, Branch::Slow));
    Ok(if d_fast[0].abs() >= d_slow[0].abs() {
        fast.kz - slow.kz
    } else {
        slow.kz - fast.kz
    })
}

/// Idler direction paired with a signal direction (opposite transverse
/// wavevector).
pub fn conjugate_direction(source: &SourceSetup, khat: &Vec3<f64>, from: Arm) -> Result<Vec3<f64>> {
    let q = k_transverse(khat, source.lambda(from));
    direction_from_q([-q[0], -q[1]], source.lambda(from.other()))
}

fn arm_phase(source: &SourceSetup, arm: Arm, khat: &Vec3<f64>, compensated: bool) -> Result<f64> {
    let lambda = source.lambda(arm);
    let mut phi = phi_dc(source, khat, lambda)?;
    if compensated {
        if let Some(p) = source.spatial_compensator(arm) {
            phi += phi_c(p, &source.arm_frame(arm), khat, lambda)?;
        }
    }
    Ok(phi)
}

/// Total relative phase ϕ for a signal direction and its paired idler, rad.
/// Spatial compensators present in the setup are included when
/// `compensated` is set.
pub fn total_phase(source: &SourceSetup, khat_s: &Vec3<f64>, compensated: bool) -> Result<f64> {
    check_forward(khat_s)?;
    let khat_i = conjugate_direction(source, khat_s, Arm::Signal)?;
    Ok(arm_phase(source, Arm::Signal, khat_s, compensated)? + arm_phase(source, Arm::Idler, &khat_i, compensated)?)
}

/// Lab direction through a point of an arm's iris plane at local offsets
/// (h, v) mm from the iris centre.
pub fn iris_direction(source: &SourceSetup, arm: Arm, offset_h: f64, offset_v: f64) -> Vec3<f64> {
    let f = source.arm_frame(arm);
    let l = source.collection.iris_distance_mm;
    normalize(&f.to_lab(&[offset_h, offset_v, l]))
}

/// Phase map along a scan of the signal iris. `range` gives the first and
/// last offsets in mm.
pub fn phase_map(setup: &SourceSetup, axis: ScanAxis, range: (f64, f64), n_samples: usize) -> Result<PhaseMap> {
    if n_samples < 2 {
        return Err(Error::Argument("phase map needs at least 2 samples".into()));
    }
    if !(range.0.is_finite() && range.1.is_finite()) || range.0 == range.1 {
        return Err(Error::Argument(format!("bad scan range {range:?}")));
    }
    let xs = crate::numeric::linspace(range.0, range.1, n_samples);
    let centre = 0.5 * (range.0 + range.1);
    let dir = |x: f64| match axis {
        ScanAxis::Radial => iris_direction(setup, Arm::Signal, x, 0.0),
        ScanAxis::Tangential => iris_direction(setup, Arm::Signal, 0.0, x),
    };
    let reference = total_phase(setup, &dir(centre), true)?;
    let raw: Vec<f64> = xs
        .par_iter()
        .map(|&x| total_phase(setup, &dir(x), true).map(|p| p - reference))
        .collect::<Result<Vec<f64>>>()?;
    let mut rel = raw.clone();
    unwrap_phase(&mut rel);
    if rel.windows(2).any(|w| (w[1] - w[0]).abs() > std::f64::consts::FRAC_PI_2) {
        return Err(Error::Argument("scan step too coarse: phase changes by more than 90° between samples".into()));
    }
    let samples = xs
        .iter()
        .zip(&rel)
        .map(|(&x_mm, &p)| PhaseSample {
            x_mm,
            phase_deg: p.to_degrees(),
        })
        .collect();
    Ok(PhaseMap {
        plane_distance_mm: setup.collection.iris_distance_mm,
        axis,
        samples,
        global_phase_deg: reference.to_degrees().rem_euclid(360.0),
        meta: PhaseMapMeta {
            lambda_p_nm: setup.triplet.lambda_p,
            lambda_s_nm: setup.triplet.lambda_s,
            lambda_i_nm: setup.triplet.lambda_i,
            setup_hash: setup.hash(),
        },
    })
}

/// Uniform grid of points inside a disk of diameter `d`, as (h, v) offsets.
pub fn disk_points(diameter: f64, per_side: usize) -> Vec<(f64, f64)> {
    let r = 0.5 * diameter;
    if per_side <= 1 || r == 0.0 {
        return vec![(0.0, 0.0)];
    }
    let step = diameter / (per_side - 1) as f64;
    let mut out = Vec::new();
    for i in 0..per_side {
        for j in 0..per_side {
            let (x, y) = (-r + step * i as f64, -r + step * j as f64);
            if x * x + y * y <= r * r * (1.0 + 1e-12) {
                out.push((x, y));
            }
        }
    }
    out
}

/// Relative phases (rad) over a circular signal iris, uniform area weights.
pub fn iris_phases(source: &SourceSetup, diameter_mm: f64, per_side: usize, compensated: bool) -> Result<Vec<f64>> {
    disk_points(diameter_mm, per_side)
        .par_iter()
        .map(|&(h, v)| total_phase(source, &iris_direction(source, Arm::Signal, h, v), compensated))
        .collect()
}

/// Per-sample data for compensator design: the arm's share of the source
/// phase and the compensator phase per mm of thickness.
struct ArmShare {
    share: Vec<f64>,
    per_mm: Vec<f64>,
}

const DESIGN_GRID: usize = 15;

fn arm_share(source: &SourceSetup, plate: &CrystalPlate, arm: Arm, diameter: f64) -> Result<ArmShare> {
    let lam_a = source.lambda(arm);
    let lam_b = source.lambda(arm.other());
    let q0 = k_transverse(&source.arm_direction(arm), lam_a);
    let frame = source.arm_frame(arm);
    let rows: Vec<(f64, f64)> = disk_points(diameter, DESIGN_GRID)
        .par_iter()
        .map(|&(h, v)| -> Result<(f64, f64)> {
            let kp = iris_direction(source, arm, h, v);
            let qp = k_transverse(&kp, lam_a);
            let qm = [2.0 * q0[0] - qp[0], 2.0 * q0[1] - qp[1]];
            let pa = phi_components_q(source, qp, lam_a)?.total();
            let ma = phi_components_q(source, qm, lam_a)?.total();
            let pb = phi_components_q(source, [-qp[0], -qp[1]], lam_b)?.total();
            let mb = phi_components_q(source, [-qm[0], -qm[1]], lam_b)?.total();
            // Even part of this arm plus half of the odd residual left by
            // both arms together.
            let share = 0.5 * (pa + ma) + 0.25 * (pa - ma) + 0.25 * (pb - mb);
            let per_mm = compensator_kz_split(plate, &frame, &kp, lam_a)?;
            Ok((share, per_mm))
        })
        .collect::<Result<Vec<_>>>()?;
    let (share, per_mm) = rows.into_iter().unzip();
    Ok(ArmShare { share, per_mm })
}

fn rms_about_mean(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    (v.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

impl ArmShare {
    fn rms(&self, thickness: f64) -> f64 {
        // Subtract the centre values to keep magnitudes small.
        let s0 = self.share[0];
        let g0 = self.per_mm[0];
        rms_about_mean(
            self.share
                .iter()
                .zip(&self.per_mm)
                .map(move |(s, g)| (s - s0) + thickness * (g - g0)),
        )
    }
}

/// Iris diameter used for compensator design: the largest listed, or 5 mm.
pub fn design_iris(source: &SourceSetup) -> f64 {
    source
        .collection
        .iris_diameters_mm
        .iter()
        .cloned()
        .reduce(f64::max)
        .unwrap_or(5.0)
}

fn template_plate(material: Arc<Material>, theta: f64, phi: f64, arm: Arm) -> Result<CrystalPlate> {
    let role = match arm {
        Arm::Signal => PlateRole::SpatialCompSignal,
        Arm::Idler => PlateRole::SpatialCompIdler,
    };
    CrystalPlate::new(material, theta, phi, 1.0, role, Orientation::AsCut)
}

/// RMS (rad) over the design iris of one arm's share of the relative phase
/// with a compensator of the given plate and thickness.
pub fn compensator_rms(source: &SourceSetup, plate: &CrystalPlate, arm: Arm, thickness_mm: f64) -> Result<f64> {
    let share = arm_share(source, plate, arm, design_iris(source))?;
    Ok(share.rms(thickness_mm))
}

/// Optimal compensator thickness (mm) for one arm, as-cut orientation.
pub fn design_spatial_compensator(
    source: &SourceSetup,
    material: Arc<Material>,
    theta_cut: f64,
    phi_cut: f64,
    arm: Arm,
) -> Result<f64> {
    let plate = template_plate(material, theta_cut, phi_cut, arm)?;
    design_with_plate(source, &plate, arm)
}

pub fn design_with_plate(source: &SourceSetup, plate: &CrystalPlate, arm: Arm) -> Result<f64> {
    let share = arm_share(source, plate, arm, design_iris(source))?;
    let base = share.rms(0.0);
    if base < 1e-12 {
        return Ok(0.0);
    }
    // RMS² is quadratic in thickness; its vertex sets the bracket.
    let r1 = share.rms(1.0);
    let r2 = share.rms(2.0);
    let (a, b, c) = (base * base, r1 * r1, r2 * r2);
    let curv = 0.5 * (c - 2.0 * b + a);
    let lin = b - a - curv;
    let vertex = -lin / (2.0 * curv);
    if !(curv > 0.0) || !(vertex > 0.0) {
        return Err(Error::CannotCompensate(format!(
            "compensator phase has the same sign of slope as the source in the {arm:?} arm"
        )));
    }
    let hi = 2.0 * vertex + 0.01;
    let (l, _) = golden_section(|l: f64| Ok(share.rms(l)), 0.0, hi, 1e-4)?;
    Ok(l)
}
