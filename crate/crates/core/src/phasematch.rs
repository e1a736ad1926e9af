//! Type-I phasematching for two-crystal sources: plate frames, longitudinal
//! wavevector solutions at fixed transverse momentum, emission cones and cut
//! angles.
//!
//! Lab frame: Z along the pump, X horizontal (H), Y vertical (V). Each plate
//! carries a local frame (h, v, n) with n its face normal; for the
//! downconversion crystals and the precompensator this is the lab frame
//! itself. The pump travels on the fast branch and the daughters on the slow
//! branch of the crystal they are born in.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::{Branch, Material};
use crate::numeric::{bracketed_root, cross, dot, norm, scale, spherical, Real, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlateRole {
    DcCrystal1,
    DcCrystal2,
    SpatialCompSignal,
    SpatialCompIdler,
    Precompensator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    AsCut,
    #[serde(rename = "rotated-90")]
    Rotated90,
}

/// Which side of a two-arm source a quantity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Signal,
    Idler,
}

impl Arm {
    pub fn other(self) -> Arm {
        match self {
            Arm::Signal => Arm::Idler,
            Arm::Idler => Arm::Signal,
        }
    }
}

/// A cut birefringent plate.
#[derive(Debug, Clone, PartialEq)]
pub struct CrystalPlate<T = f64> {
    pub material: Arc<Material<T>>,
    pub theta_cut: T,
    pub phi_cut: T,
    pub thickness_mm: T,
    pub role: PlateRole,
    pub orientation: Orientation,
}

/// Local plate axes expressed in the crystal's principal frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateFrame<T> {
    pub h: Vec3<T>,
    pub v: Vec3<T>,
    pub n: Vec3<T>,
}

impl<T: Real> PlateFrame<T> {
    pub fn to_crystal(&self, local: &Vec3<T>) -> Vec3<T> {
        [
            self.h[0] * local[0] + self.v[0] * local[1] + self.n[0] * local[2],
            self.h[1] * local[0] + self.v[1] * local[1] + self.n[1] * local[2],
            self.h[2] * local[0] + self.v[2] * local[1] + self.n[2] * local[2],
        ]
    }

    pub fn to_local(&self, crystal: &Vec3<T>) -> Vec3<T> {
        [dot(&self.h, crystal), dot(&self.v, crystal), dot(&self.n, crystal)]
    }
}

impl<T: Real> CrystalPlate<T> {
    pub fn new(
        material: Arc<Material<T>>,
        theta_cut: T,
        phi_cut: T,
        thickness_mm: T,
        role: PlateRole,
        orientation: Orientation,
    ) -> Result<CrystalPlate<T>> {
        if !(thickness_mm >= T::zero()) || !thickness_mm.is_finite() {
            return Err(Error::Argument(format!("thickness {thickness_mm} mm")));
        }
        if !theta_cut.is_finite() || !phi_cut.is_finite() {
            return Err(Error::Argument("cut angles must be finite".into()));
        }
        Ok(CrystalPlate {
            material,
            theta_cut,
            phi_cut,
            thickness_mm,
            role,
            orientation,
        })
    }

    /// The second downconversion crystal: same material, cut and thickness,
    /// rotated 90° about the pump axis.
    pub fn second_crystal(&self) -> CrystalPlate<T> {
        CrystalPlate {
            role: PlateRole::DcCrystal2,
            ..self.clone()
        }
    }

    pub fn with_thickness(&self, thickness_mm: T) -> CrystalPlate<T> {
        CrystalPlate {
            thickness_mm,
            ..self.clone()
        }
    }

    pub fn rotated(&self) -> CrystalPlate<T> {
        let orientation = match self.orientation {
            Orientation::AsCut => Orientation::Rotated90,
            Orientation::Rotated90 => Orientation::AsCut,
        };
        CrystalPlate {
            orientation,
            ..self.clone()
        }
    }

    /// True when the fast eigenpolarization at normal incidence lies along
    /// the local h (H) axis; otherwise it lies along v (V).
    ///
    /// As-cut conventions: crystal 1 has its fast (pump) axis vertical and
    /// crystal 2 horizontal; the precompensator is slow for V so it delays
    /// the pump component feeding crystal 1; spatial compensators are fast
    /// for H with the optic axis tilted away from the pump axis.
    pub fn fast_along_h(&self) -> bool {
        let base = match self.role {
            PlateRole::DcCrystal1 => false,
            PlateRole::DcCrystal2 => true,
            PlateRole::Precompensator => true,
            PlateRole::SpatialCompSignal | PlateRole::SpatialCompIdler => true,
        };
        match self.orientation {
            Orientation::AsCut => base,
            Orientation::Rotated90 => !base,
        }
    }

    /// Plate frame at a reference wavelength, used to fix the eigen-axes.
    pub fn frame(&self, lambda_ref_nm: T) -> Result<PlateFrame<T>> {
        let n = spherical(self.theta_cut, self.phi_cut);
        let e1 = self.material.polarization(lambda_ref_nm, &n, Branch::Fast)?;
        let e2 = cross(&n, &e1);
        let h = if self.fast_along_h() { e1 } else { scale(&e2, -T::one()) };
        let v = cross(&n, &h);
        Ok(PlateFrame { h, v, n })
    }
}

/// Wavevector magnitude in vacuum, rad/mm, for a wavelength in nm.
pub fn vacuum_k<T: Real>(lambda_nm: T) -> T {
    T::lit(2.0) * T::PI() / (lambda_nm * T::lit(1e-6))
}

/// Longitudinal solution of one eigenmode at fixed transverse wavevector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KzSolution<T> {
    /// Longitudinal wavevector along the plate normal, rad/mm.
    pub kz: T,
    /// Index along the wave-normal.
    pub n: T,
    /// Wave-normal in crystal coordinates.
    pub dir_crystal: Vec3<T>,
}

/// Solves kz = sqrt((k0·n(k̂))² − |q|²) for one branch by fixed-point
/// iteration. `q` holds the (h, v) transverse components in rad/mm.
pub fn solve_kz<T: Real>(
    material: &Material<T>,
    frame: &PlateFrame<T>,
    lambda_nm: T,
    q: [T; 2],
    branch: Branch,
) -> Result<KzSolution<T>> {
    let k0 = vacuum_k(lambda_nm);
    let q2 = q[0] * q[0] + q[1] * q[1];
    let mut kz = k0 * material.indices(lambda_nm, &frame.n)?.0;
    let mut last = T::zero();
    for _ in 0..200 {
        let kv = [q[0], q[1], kz];
        let s = scale(&frame.to_crystal(&kv), T::one() / norm(&kv));
        let n = material.mode_unchecked(lambda_nm, &s, branch).n;
        let avail = k0 * n;
        let kz2 = avail * avail - q2;
        if !(kz2 > T::zero()) {
            return Err(Error::Domain(format!(
                "evanescent: |q| = {} exceeds k = {} rad/mm",
                q2.sqrt(),
                avail
            )));
        }
        let next = kz2.sqrt();
        let delta = (next - kz).abs();
        kz = next;
        if delta <= T::epsilon() * T::lit(4.0) * kz {
            return Ok(KzSolution { kz, n, dir_crystal: s });
        }
        last = delta;
    }
    Err(Error::Numeric {
        what: "longitudinal wavevector iteration did not converge".into(),
        residual: last.f64(),
    })
}

/// Wavelengths of a downconversion triplet with external cone half-angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdcTriplet<T = f64> {
    pub lambda_p: T,
    pub lambda_s: T,
    pub lambda_i: T,
    pub external_half_angle_s: T,
    pub external_half_angle_i: T,
}

impl<T: Real> SpdcTriplet<T> {
    /// Idler wavelength fixed by energy conservation.
    pub fn new(lambda_p: T, lambda_s: T) -> Result<SpdcTriplet<T>> {
        if !(lambda_p > T::zero() && lambda_s > lambda_p) {
            return Err(Error::Argument(format!(
                "need 0 < lambda_p < lambda_s, got {lambda_p} and {lambda_s} nm"
            )));
        }
        let lambda_i = T::one() / (T::one() / lambda_p - T::one() / lambda_s);
        Ok(SpdcTriplet {
            lambda_p,
            lambda_s,
            lambda_i,
            external_half_angle_s: T::zero(),
            external_half_angle_i: T::zero(),
        })
    }

    pub fn lambda(&self, arm: Arm) -> T {
        match arm {
            Arm::Signal => self.lambda_s,
            Arm::Idler => self.lambda_i,
        }
    }

    /// Relative energy-conservation residual.
    pub fn energy_residual(&self) -> T {
        let inv_p = T::one() / self.lambda_p;
        ((inv_p - T::one() / self.lambda_s - T::one() / self.lambda_i) / inv_p).abs()
    }
}

fn mismatch_tolerance<T: Real>(k: T) -> T {
    T::lit(1e-10).max(k * T::epsilon() * T::lit(4.0))
}

/// Lab-frame unit vector for polar angle `theta` about the pump axis in the
/// emission plane at `azimuth` from +X.
fn in_plane<T: Real>(theta: T, azimuth: T) -> Vec3<T> {
    spherical(theta, azimuth)
}

/// k_p,z − k_s,z − k_i,z for a signal wave-normal at internal polar angle
/// `theta_s_int` in the emission plane at `azimuth`; the idler carries the
/// opposite transverse wavevector.
pub fn phasematch_mismatch<T: Real>(
    plate: &CrystalPlate<T>,
    triplet: &SpdcTriplet<T>,
    theta_s_int: T,
    azimuth: T,
) -> Result<T> {
    let frame = plate.frame(triplet.lambda_p)?;
    let m = &*plate.material;
    let kp = solve_kz(m, &frame, triplet.lambda_p, [T::zero(), T::zero()], Branch::Fast)?.kz;
    let s_lab = in_plane(theta_s_int, azimuth);
    let ns = m.mode(triplet.lambda_s, &frame.to_crystal(&s_lab), Branch::Slow)?.n;
    let ks = vacuum_k(triplet.lambda_s) * ns;
    let q = [ks * s_lab[0], ks * s_lab[1]];
    let ki = solve_kz(m, &frame, triplet.lambda_i, [-q[0], -q[1]], Branch::Slow)?.kz;
    Ok(kp - ks * s_lab[2] - ki)
}

/// Mismatch as a function of the external signal angle, which fixes the
/// transverse wavevector directly.
fn mismatch_external<T: Real>(
    plate: &CrystalPlate<T>,
    frame: &PlateFrame<T>,
    lambda_p: T,
    lambda_s: T,
    lambda_i: T,
    ext_s: T,
    azimuth: T,
) -> Result<T> {
    let m = &*plate.material;
    let kp = solve_kz(m, frame, lambda_p, [T::zero(), T::zero()], Branch::Fast)?.kz;
    let qm = vacuum_k(lambda_s) * ext_s.sin();
    let q = [qm * azimuth.cos(), qm * azimuth.sin()];
    let ks = solve_kz(m, frame, lambda_s, q, Branch::Slow)?.kz;
    let ki = solve_kz(m, frame, lambda_i, [-q[0], -q[1]], Branch::Slow)?.kz;
    Ok(kp - ks - ki)
}

/// External cone half-angles (signal, idler) in the emission plane along +X.
pub fn emission_angle<T: Real>(plate: &CrystalPlate<T>, lambda_p: T, lambda_s: T) -> Result<SpdcTriplet<T>> {
    emission_angle_at(plate, lambda_p, lambda_s, T::zero())
}

/// External cone half-angles in the emission plane at `azimuth` from +X.
pub fn emission_angle_at<T: Real>(
    plate: &CrystalPlate<T>,
    lambda_p: T,
    lambda_s: T,
    azimuth: T,
) -> Result<SpdcTriplet<T>> {
    let mut tri = SpdcTriplet::new(lambda_p, lambda_s)?;
    let frame = plate.frame(lambda_p)?;
    let ks0 = vacuum_k(lambda_s);
    let ki0 = vacuum_k(tri.lambda_i);
    let ftol = mismatch_tolerance(vacuum_k(lambda_p));
    let f = |a: T| mismatch_external(plate, &frame, lambda_p, lambda_s, tri.lambda_i, a, azimuth);

    let f0 = f(T::zero())?;
    let ext_s = if f0.abs() <= ftol {
        T::zero()
    } else {
        // Scan outward until the mismatch changes sign or the idler turns
        // evanescent.
        let step = T::lit(0.25_f64.to_radians());
        let limit = (ki0 / ks0).min(T::one()).asin();
        let mut a = T::zero();
        let mut fa = f0;
        let mut best = (T::zero(), f0.abs());
        let mut found = None;
        while a + step < limit {
            let b = a + step;
            let fb = match f(b) {
                Ok(v) => v,
                Err(Error::Domain(_)) => break,
                Err(e) => return Err(e),
            };
            if fb.abs() < best.1 {
                best = (b, fb.abs());
            }
            if fb.signum() != fa.signum() {
                found = Some((a, b));
                break;
            }
            a = b;
            fa = fb;
        }
        let (lo, hi) = found.ok_or_else(|| {
            let ns = plate.material.indices(lambda_s, &frame.n).map(|x| x.1).unwrap_or(T::one());
            Error::NotPhasematchable {
                best_angle_rad: (best.0.sin() / ns).asin().f64(),
                residual: best.1.f64(),
            }
        })?;
        bracketed_root(f, lo, hi, T::epsilon() * T::lit(4.0), ftol)?
    };
    let q = ks0 * ext_s.sin();
    tri.external_half_angle_s = ext_s;
    tri.external_half_angle_i = (q / ki0).asin();
    Ok(tri)
}

/// Internal wave-normal polar angle of the signal for an external angle.
pub fn internal_angle<T: Real>(plate: &CrystalPlate<T>, lambda_p: T, lambda: T, ext: T, branch: Branch) -> Result<T> {
    let frame = plate.frame(lambda_p)?;
    let q = vacuum_k(lambda) * ext.sin();
    let sol = solve_kz(&plate.material, &frame, lambda, [q, T::zero()], branch)?;
    Ok(q.atan2(sol.kz))
}

/// Cut angle θ (for a given φ) whose degenerate-plane emission reaches
/// `target_ext` external half-angle. Searches outward from `guess` and
/// returns the nearest root.
pub fn solve_cut_angle<T: Real>(
    material: &Arc<Material<T>>,
    phi_cut: T,
    lambda_p: T,
    lambda_s: T,
    target_ext: T,
    guess: T,
) -> Result<T> {
    let tri = SpdcTriplet::new(lambda_p, lambda_s)?;
    let ftol = mismatch_tolerance(vacuum_k(lambda_p));
    let g = |theta: T| -> Result<T> {
        let plate = CrystalPlate::new(
            material.clone(),
            theta,
            phi_cut,
            T::one(),
            PlateRole::DcCrystal1,
            Orientation::AsCut,
        )?;
        let frame = plate.frame(lambda_p)?;
        mismatch_external(&plate, &frame, lambda_p, lambda_s, tri.lambda_i, target_ext, T::zero())
    };
    let step = T::lit(0.25_f64.to_radians());
    let lo_lim = T::lit(1e-3);
    let hi_lim = T::PI() - T::lit(1e-3);
    let g0 = g(guess)?;
    if g0.abs() <= ftol {
        return Ok(guess);
    }
    let mut bracket = None;
    'scan: for k in 1..=800 {
        for dir in [T::one(), -T::one()] {
            let a = guess + dir * step * T::lit((k - 1) as f64);
            let b = guess + dir * step * T::lit(k as f64);
            if b < lo_lim || b > hi_lim {
                continue;
            }
            let (fa, fb) = match (g(a), g(b)) {
                (Ok(fa), Ok(fb)) => (fa, fb),
                _ => continue,
            };
            if fa.signum() != fb.signum() {
                bracket = Some((a.min(b), a.max(b)));
                break 'scan;
            }
        }
    }
    match bracket {
        Some((a, b)) => bracketed_root(g, a, b, T::epsilon() * T::lit(4.0), ftol),
        None => Err(attainable_range(material, phi_cut, lambda_p, lambda_s)),
    }
}

fn attainable_range<T: Real>(material: &Arc<Material<T>>, phi_cut: T, lambda_p: T, lambda_s: T) -> Error {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 1..180 {
        let theta = T::lit((i as f64).to_radians());
        let Ok(plate) = CrystalPlate::new(
            material.clone(),
            theta,
            phi_cut,
            T::one(),
            PlateRole::DcCrystal1,
            Orientation::AsCut,
        ) else {
            continue;
        };
        if let Ok(t) = emission_angle(&plate, lambda_p, lambda_s) {
            lo = lo.min(t.external_half_angle_s.f64());
            hi = hi.max(t.external_half_angle_s.f64());
        }
    }
    Error::CutUnreachable { lo_rad: lo, hi_rad: hi }
}
