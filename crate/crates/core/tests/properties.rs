mod common;

use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;
use spdc_core::materials::*;
use spdc_core::numeric::spherical;
use spdc_core::qstate::*;
use spdc_core::temporal::*;
use spdc_core::{Material, SpdcTriplet};

use common::*;

fn bbo() -> &'static Material {
    static M: OnceLock<Material> = OnceLock::new();
    M.get_or_init(|| (*material("BBO")).clone())
}

fn bbo_biaxial() -> &'static Material {
    static M: OnceLock<Material> = OnceLock::new();
    M.get_or_init(|| bbo().as_biaxial().unwrap())
}

fn bibo() -> &'static Material {
    static M: OnceLock<Material> = OnceLock::new();
    M.get_or_init(|| (*material("BiBO")).clone())
}

fn intensity() -> &'static JointIntensity {
    static J: OnceLock<JointIntensity> = OnceLock::new();
    J.get_or_init(|| {
        let src = bibo_source(851.0);
        let j = jtpa_auto(&src, &src.pump, &src.collection.filters).unwrap();
        JointIntensity::new(&j, &src.collection.filters).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn biaxial_solver_reduces_to_uniaxial(theta in 0.0..std::f64::consts::PI, phi in 0.0..6.28, lambda in 300.0..2000.0) {
        let d = spherical(theta, phi);
        let (f, s) = bbo_biaxial().indices(lambda, &d).unwrap();
        let no = index_uniaxial(bbo(), lambda, UniaxialBranch::Ordinary, theta).unwrap();
        let ne = index_uniaxial(bbo(), lambda, UniaxialBranch::Extraordinary, theta).unwrap();
        prop_assert!((f - ne).abs() < 1e-12);
        prop_assert!((s - no).abs() < 1e-12);
    }

    #[test]
    fn fast_never_exceeds_slow(theta in 0.0..std::f64::consts::PI, phi in 0.0..6.28, lambda in 400.0..2000.0) {
        let (f, s) = bibo().indices(lambda, &spherical(theta, phi)).unwrap();
        prop_assert!(f <= s && f > 1.0);
    }

    #[test]
    fn principal_indices_are_ordered(lambda in 400.0..2000.0) {
        let n = bibo().principal_indices(lambda).unwrap();
        prop_assert!(n[0] <= n[1] && n[1] <= n[2] && n[0] > 1.0);
    }

    #[test]
    fn triplets_conserve_energy(lp in 300.0..600.0, ratio in 1.2..3.0) {
        let t = SpdcTriplet::<f64>::new(lp, lp * ratio).unwrap();
        prop_assert!(t.energy_residual() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn analytic_derivatives_match_finite_differences(theta in 0.05..3.09, phi in 0.0..6.28, lambda in 450.0..1500.0, slow in any::<bool>()) {
        let m = bibo();
        let d = spherical(theta, phi);
        let b = if slow { Branch::Slow } else { Branch::Fast };
        let h = 0.01;
        let n = |l: f64| m.mode(l, &d, b).unwrap().n;
        let mi = m.mode(lambda, &d, b).unwrap();
        let dn = (n(lambda + h) - n(lambda - h)) / (2.0 * h);
        let d2n = (n(lambda + h) - 2.0 * n(lambda) + n(lambda - h)) / (h * h);
        prop_assert!((mi.dn - dn).abs() <= 1e-4 * dn.abs().max(1e-7));
        prop_assert!((mi.d2n - d2n).abs() <= 1e-4 * d2n.abs().max(1e-5));
    }

    #[test]
    fn concurrence_of_decohered_state(r in 0.0..1.0f64, arg in -3.14..3.14f64) {
        let v = Complex64::from_polar(r, arg);
        let s = rho_temporal(v).unwrap();
        let (c, t) = concurrence_tangle(&s).unwrap();
        prop_assert!((c - r).abs() < 1e-10);
        prop_assert!((concurrence_wootters(&s) - r).abs() < 1e-10);
        prop_assert!((t - r * r).abs() < 1e-10);
        let f = fidelity(&rho_temporal(Complex64::new(r, 0.0)).unwrap(), &target_state(0.0)).unwrap();
        prop_assert!((f - (1.0 + r) / 2.0).abs() < 1e-10);
    }

    #[test]
    fn combined_states_are_valid(phases in prop::collection::vec(-10.0..10.0f64, 1..40), r in 0.0..1.0f64, arg in -3.0..3.0f64) {
        let s = rho_combined(&phases, None, Complex64::from_polar(r, arg)).unwrap();
        let rho = s.rho();
        prop_assert!((rho - rho.adjoint()).norm() < 1e-12);
        prop_assert!((rho.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(s.eigenvalues().min() > -1e-10);
        let f = fidelity(&s, &target_state(0.0)).unwrap();
        let m = mean_phasor(&phases, None).unwrap();
        let v = Complex64::from_polar(r, arg);
        // ½ + Re(v⟨e^{−iϕ}⟩)/2 for the |φ+⟩ target
        prop_assert!((f - 0.5 * (1.0 + (v * m).re)).abs() < 1e-12);
    }

    #[test]
    fn visibility_is_bounded(ds in -3000.0..3000.0f64, di in -3000.0..3000.0f64) {
        let v = intensity().visibility(ds, di);
        prop_assert!(v.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn pump_width_round_trips(center in 350.0..1100.0f64, fwhm in 0.01..20.0f64) {
        let p = PumpSpec::from_fwhm_nm(center, fwhm, PumpKind::Pulsed).unwrap();
        prop_assert!((p.fwhm_nm() - fwhm).abs() < 1e-12 * fwhm.max(1.0));
        prop_assert!(p.sigma > 0.0);
    }
}

#[test]
fn visibility_is_one_at_zero_delay() {
    assert!((intensity().visibility(0.0, 0.0) - 1.0).norm() < 1e-12);
}
