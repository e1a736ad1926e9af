#![allow(dead_code)]

use std::sync::Arc;

use spdc_core::source::{Collection, SourceSetup};
use spdc_core::temporal::{Filter, Filters, PumpKind, PumpSpec};
use spdc_core::{CrystalPlate, Material, MaterialDb, Orientation, PlateRole};

pub fn material(name: &str) -> Arc<Material> {
    Arc::new(MaterialDb::builtin().get(name).unwrap())
}

pub fn plate(name: &str, theta_deg: f64, phi_deg: f64, thickness: f64, role: PlateRole) -> CrystalPlate {
    CrystalPlate::new(
        material(name),
        theta_deg.to_radians(),
        phi_deg.to_radians(),
        thickness,
        role,
        Orientation::AsCut,
    )
    .unwrap()
}

pub fn collection() -> Collection {
    Collection {
        iris_distance_mm: 840.0,
        iris_diameters_mm: vec![5.0],
        filters: Filters::both(Filter::gaussian(10.0)),
    }
}

pub fn bibo_source(lambda_s: f64) -> SourceSetup {
    let pump = PumpSpec::from_fwhm_nm(405.0, 0.5, PumpKind::CwDiode).unwrap();
    let c1 = plate("BiBO", 151.7, 90.0, 0.6, PlateRole::DcCrystal1);
    SourceSetup::new(c1, lambda_s, 0.0, pump, collection(), vec![]).unwrap()
}

pub fn bbo_source() -> SourceSetup {
    let pump = PumpSpec::from_fwhm_nm(405.0, 4.0, PumpKind::Pulsed).unwrap();
    let c1 = plate("BBO", 29.3, 0.0, 0.6, PlateRole::DcCrystal1);
    SourceSetup::new(c1, 810.0, 0.0, pump, collection(), vec![]).unwrap()
}

pub fn with_compensators(src: &SourceSetup, thickness: f64) -> SourceSetup {
    src.with_plate(
        PlateRole::SpatialCompSignal,
        Some(plate("BBO", 33.9, 0.0, thickness, PlateRole::SpatialCompSignal)),
    )
    .with_plate(
        PlateRole::SpatialCompIdler,
        Some(plate("BBO", 33.9, 0.0, thickness, PlateRole::SpatialCompIdler)),
    )
}

/// Fresnel equation of wave normals as a quadratic in x = n²:
/// a·x² − b·x + c = 0, roots from the companion matrix.
pub fn fresnel_roots(principal: [f64; 3], s: [f64; 3]) -> (f64, f64) {
    let e = principal.map(|n| n * n);
    let a: f64 = (0..3).map(|i| s[i] * s[i] * e[i]).sum();
    let b: f64 = (0..3).map(|i| s[i] * s[i] * e[i] * (e[(i + 1) % 3] + e[(i + 2) % 3])).sum();
    let c = e[0] * e[1] * e[2];
    let comp = nalgebra::Matrix2::new(0.0, -c / a, 1.0, b / a);
    let ev = comp.complex_eigenvalues();
    let mut r = [ev[0].re.sqrt(), ev[1].re.sqrt()];
    r.sort_by(f64::total_cmp);
    (r[0], r[1])
}

/// Longitudinal wavevector of one branch in a plate, by bisection on the
/// Fresnel roots. `q` is in the plate's local transverse frame.
pub fn oracle_kz(p: &CrystalPlate, frame_lambda: f64, lambda: f64, q: [f64; 2], slow: bool) -> f64 {
    let frame = p.frame(frame_lambda).unwrap();
    let principal = p.material.principal_indices(lambda).unwrap();
    let k0 = 2.0 * std::f64::consts::PI / (lambda * 1e-6);
    let g = |kz: f64| {
        let v = [q[0], q[1], kz];
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let s = frame.to_crystal(&[v[0] / r, v[1] / r, v[2] / r]);
        let (f, sl) = fresnel_roots(principal, s);
        let n = if slow { sl } else { f };
        r - k0 * n
    };
    let (mut lo, mut hi) = (0.5 * k0, 4.0 * k0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Lateral ray displacement after a length `l`, from the gradient of kz(q).
pub fn oracle_offset(p: &CrystalPlate, frame_lambda: f64, lambda: f64, q: [f64; 2], slow: bool, l: f64) -> [f64; 2] {
    let h = 0.05;
    let kz = |a: f64, b: f64| oracle_kz(p, frame_lambda, lambda, [q[0] + a, q[1] + b], slow);
    let gx = (kz(h, 0.0) - kz(-h, 0.0)) / (2.0 * h);
    let gy = (kz(0.0, h) - kz(0.0, -h)) / (2.0 * h);
    [-l * gx, -l * gy]
}
