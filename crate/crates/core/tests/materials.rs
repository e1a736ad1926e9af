mod common;

use approx::assert_relative_eq;
use spdc_core::materials::*;
use spdc_core::numeric::spherical;
use spdc_core::{Material, Material32, MaterialDb};

use common::{fresnel_roots, material};

const C: f64 = SPEED_OF_LIGHT;

fn k_of_omega(m: &Material, dir: &[f64; 3], branch: Branch, omega: f64) -> f64 {
    let lambda = 2.0 * std::f64::consts::PI * 299.792_458 / omega;
    let mi = m.mode(lambda, dir, branch).unwrap();
    mi.n * omega / C
}

fn directions() -> Vec<[f64; 3]> {
    vec![
        spherical(0.3, 0.2),
        spherical(29.3f64.to_radians(), 0.0),
        spherical(151.7f64.to_radians(), 90f64.to_radians()),
        spherical(1.2, 2.5),
    ]
}

#[test]
fn ordinary_index_matches_direct_coefficient_evaluation() {
    let m = material("BBO");
    let l: f64 = 0.405;
    let oracle = (2.7359 + 0.01878 / (l * l - 0.01822) - 0.01354 * l * l).sqrt();
    for theta in [0.0, 0.4, 1.3] {
        let n = index_uniaxial(&m, 405.0, UniaxialBranch::Ordinary, theta).unwrap();
        assert!((n - oracle).abs() < 1e-14);
    }
}

#[test]
fn extraordinary_index_limits() {
    let m = material("BBO");
    let no = index_uniaxial(&m, 810.0, UniaxialBranch::Ordinary, 0.0).unwrap();
    let ne0 = index_uniaxial(&m, 810.0, UniaxialBranch::Extraordinary, 0.0).unwrap();
    let p = m.principal_indices(810.0).unwrap();
    let ne90 = index_uniaxial(&m, 810.0, UniaxialBranch::Extraordinary, std::f64::consts::FRAC_PI_2).unwrap();
    assert_eq!(no, ne0);
    assert_relative_eq!(ne90, p[2], max_relative = 1e-15);
}

#[test]
fn biaxial_along_z_gives_x_and_y() {
    let m = material("BiBO");
    let p = m.principal_indices(810.0).unwrap();
    let (f, s) = index_biaxial(&m, 810.0, &[0.0, 0.0, 1.0]).unwrap();
    assert_relative_eq!(f, p[0], max_relative = 1e-14);
    assert_relative_eq!(s, p[1], max_relative = 1e-14);
}

#[test]
fn biaxial_roots_match_companion_oracle() {
    let m = material("BiBO");
    for lambda in [405.0, 810.0, 1064.0] {
        let p = m.principal_indices(lambda).unwrap();
        for d in directions() {
            let (f, s) = index_biaxial(&m, lambda, &d).unwrap();
            let (of, os) = fresnel_roots(p, d);
            assert!((f - of).abs() < 1e-9, "fast {f} vs {of}");
            assert!((s - os).abs() < 1e-9, "slow {s} vs {os}");
        }
    }
}

#[test]
fn biaxial_path_reproduces_uniaxial_for_bbo() {
    let m = material("BBO");
    for lambda in [405.0, 810.0] {
        for theta in [0.1, 0.5, 1.0, 1.5] {
            let (f, s) = index_biaxial(&m, lambda, &spherical(theta, 0.7)).unwrap();
            let no = index_uniaxial(&m, lambda, UniaxialBranch::Ordinary, theta).unwrap();
            let ne = index_uniaxial(&m, lambda, UniaxialBranch::Extraordinary, theta).unwrap();
            // BBO is negative uniaxial: e is fast
            assert!((f - ne).abs() < 1e-12 && (s - no).abs() < 1e-12);
        }
    }
}

#[test]
fn constant_material_is_dispersionless() {
    let m = Material::constant("glass", 1.5);
    let z = [0.0, 0.0, 1.0];
    assert_relative_eq!(group_velocity(&m, 800.0, &z, Branch::Fast).unwrap(), C / 1.5, max_relative = 1e-15);
    assert_eq!(gvd(&m, 800.0, &z, Branch::Fast).unwrap(), 0.0);
    assert!(!m.is_birefringent(800.0));
}

#[test]
fn group_index_matches_finite_difference() {
    for name in ["BBO", "BiBO", "quartz"] {
        let m = material(name);
        for lambda in [405.0, 810.0] {
            for d in directions() {
                for b in [Branch::Fast, Branch::Slow] {
                    let h = 0.01;
                    let np = m.mode(lambda + h, &d, b).unwrap().n;
                    let nm = m.mode(lambda - h, &d, b).unwrap().n;
                    let n = m.mode(lambda, &d, b).unwrap().n;
                    let ng_fd = n - lambda * (np - nm) / (2.0 * h);
                    let ng = group_index(&m, lambda, &d, b).unwrap();
                    assert_relative_eq!(ng, ng_fd, max_relative = 1e-6);
                }
            }
        }
    }
}

#[test]
fn gvd_matches_second_difference_of_k() {
    for name in ["BBO", "BiBO", "quartz"] {
        let m = material(name);
        for lambda in [405.0, 810.0] {
            let w = 2.0 * std::f64::consts::PI * 299.792_458 / lambda;
            for d in directions() {
                for b in [Branch::Fast, Branch::Slow] {
                    let h = 1e-3;
                    let k2 = (k_of_omega(&m, &d, b, w + h) - 2.0 * k_of_omega(&m, &d, b, w) + k_of_omega(&m, &d, b, w - h))
                        / (h * h);
                    let g = gvd(&m, lambda, &d, b).unwrap();
                    assert_relative_eq!(g, k2, max_relative = 1e-4);
                }
            }
        }
    }
}

#[test]
fn bbo_ordinary_gvd_is_positive() {
    let m = material("BBO");
    let b = uniaxial_branch(&m, 810.0, UniaxialBranch::Ordinary).unwrap();
    assert_eq!(b, Branch::Slow);
    assert!(gvd(&m, 810.0, &spherical(0.5, 0.0), b).unwrap() > 0.0);
}

#[test]
fn quartz_group_delay_per_mm() {
    let m = material("quartz");
    let d = [1.0, 0.0, 0.0];
    let (f, s) = (
        group_index(&m, 405.0, &d, Branch::Fast).unwrap(),
        group_index(&m, 405.0, &d, Branch::Slow).unwrap(),
    );
    let per_mm = (s - f) / C;
    assert!((per_mm - 37.5).abs() < 0.15 * 37.5, "{per_mm} fs/mm");
}

#[test]
fn walkoff_vanishes_on_principal_directions() {
    let m = material("BBO");
    for theta in [0.0, std::f64::consts::FRAC_PI_2] {
        let w = walkoff_angle(&m, 405.0, &spherical(theta, 0.0), Branch::Fast).unwrap();
        assert!(w.abs() < 1e-12);
    }
}

#[test]
fn uniaxial_walkoff_matches_angular_derivative() {
    let m = material("BBO");
    for theta in [0.2, 29.3f64.to_radians(), 1.1] {
        let h = 1e-5;
        let n = |t| index_uniaxial(&m, 405.0, UniaxialBranch::Extraordinary, t).unwrap();
        let rho_fd = (-(n(theta + h) - n(theta - h)) / (2.0 * h) / n(theta)).atan();
        let rho = walkoff_angle_uniaxial(&m, 405.0, theta).unwrap();
        assert!((rho - rho_fd.abs()).abs() < 1e-8);
    }
}

/// Ray direction is normal to the index surface r(s) = n(s)·s, so tan ρ is
/// the tangential gradient of n divided by n.
#[test]
fn walkoff_matches_index_surface_gradient() {
    for (name, dir) in [
        ("BBO", spherical(29.3f64.to_radians(), 0.0)),
        ("BiBO", spherical(151.7f64.to_radians(), 90f64.to_radians())),
        ("BiBO", spherical(0.7, 0.4)),
    ] {
        let m = material(name);
        for b in [Branch::Fast, Branch::Slow] {
            let n = |s: [f64; 3]| {
                let r = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
                m.mode(405.0, &[s[0] / r, s[1] / r, s[2] / r], b).unwrap().n
            };
            let h = 1e-6;
            let mut grad = [0.0; 3];
            for i in 0..3 {
                let mut p = dir;
                let mut q = dir;
                p[i] += h;
                q[i] -= h;
                grad[i] = (n(p) - n(q)) / (2.0 * h);
            }
            let g2: f64 = grad.iter().map(|g| g * g).sum();
            let rho_oracle = (g2.sqrt() / n(dir)).atan();
            let rho = walkoff_angle(&m, 405.0, &dir, b).unwrap();
            assert!((rho - rho_oracle).abs() < 1e-7, "{name} {b:?}: {rho} vs {rho_oracle}");
        }
    }
    let rho = walkoff_angle(&material("BBO"), 405.0, &spherical(29.3f64.to_radians(), 0.0), Branch::Fast).unwrap();
    assert!(rho.to_degrees() > 2.0 && rho.to_degrees() < 6.0);
}

#[test]
fn out_of_range_and_unknown_material() {
    let m = material("BBO");
    assert!(matches!(
        index_biaxial(&m, 100.0, &[0.0, 0.0, 1.0]),
        Err(spdc_core::Error::WavelengthRange { .. })
    ));
    assert!(matches!(
        MaterialDb::builtin().get::<f64>("unobtainium"),
        Err(spdc_core::Error::UnknownMaterial(_))
    ));
}

#[test]
fn data_file_round_trips_exactly() {
    let db = MaterialDb::builtin();
    let text = db.to_toml().unwrap();
    let back = MaterialDb::parse(&text).unwrap();
    assert_eq!(db, back);
    for name in db.names() {
        let a: Material = db.get(name).unwrap();
        let b: Material = back.get(name).unwrap();
        let d = spherical(0.4, 0.9);
        assert_eq!(a.indices(700.0, &d).unwrap(), b.indices(700.0, &d).unwrap());
    }
}

#[test]
fn unknown_keys_rejected() {
    let bad = "schema_version = 1\ndata_version = \"x\"\nextra = 3\n";
    assert!(MaterialDb::parse(bad).is_err());
}

#[test]
fn single_precision_tracks_double() {
    let db = MaterialDb::builtin();
    let m32: Material32 = db.get("BiBO").unwrap();
    let m64: Material = db.get("BiBO").unwrap();
    let d = spherical(2.6f32, 1.57f32);
    let (f32_fast, _) = index_biaxial(&m32, 810.0f32, &d).unwrap();
    let (f64_fast, _) = index_biaxial(&m64, 810.0, &spherical(2.6f32 as f64, 1.57f32 as f64)).unwrap();
    assert!((f32_fast as f64 - f64_fast).abs() < 1e-5);
}

#[test]
fn branches_stay_continuous_away_from_optic_axes() {
    // The y-z plane of BiBO holds no optic axis (they lie in x-z).
    let m = material("BiBO");
    for b in [Branch::Fast, Branch::Slow] {
        let mut prev: Option<[f64; 3]> = None;
        for k in 0..=720 {
            let d = spherical(k as f64 * std::f64::consts::PI / 720.0, std::f64::consts::FRAC_PI_2);
            let p = m.polarization(810.0, &d, b).unwrap();
            if let Some(q) = prev {
                let c = (p[0] * q[0] + p[1] * q[1] + p[2] * q[2]).abs();
                assert!(c > 0.99, "{b:?} jumps at step {k}");
            }
            prev = Some(p);
        }
    }
}
