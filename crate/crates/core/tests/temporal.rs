mod common;

use std::sync::Arc;

use num_complex::Complex64;
use spdc_core::materials::{group_velocity, Branch};
use spdc_core::phasematch::{solve_kz, vacuum_k, Arm, Orientation, PlateRole};
use spdc_core::source::SourceSetup;
use spdc_core::temporal::*;
use spdc_core::{CrystalPlate, Material};

use common::*;

fn pump_of(src: &SourceSetup) -> PumpSpec {
    src.pump
}

fn mean(a: f64, b: f64) -> f64 {
    0.5 * (a + b)
}

/// Time through `length` of a plate along the central direction of an arm,
/// from group velocities of independently solved wave-normals.
fn segment(src: &SourceSetup, p: &CrystalPlate, arm: Option<Arm>, slow: bool, length: f64) -> f64 {
    let lp = src.triplet.lambda_p;
    let (lambda, q) = match arm {
        None => (lp, [0.0, 0.0]),
        Some(a) => {
            let k = src.arm_direction(a);
            let k0 = vacuum_k(src.lambda(a));
            (src.lambda(a), [k0 * k[0], k0 * k[1]])
        }
    };
    let kz = oracle_kz(p, lp, lambda, q, slow);
    let f = p.frame(lp).unwrap();
    let r = (q[0] * q[0] + q[1] * q[1] + kz * kz).sqrt();
    let dir = f.to_crystal(&[q[0] / r, q[1] / r, kz / r]);
    let b = if slow { Branch::Slow } else { Branch::Fast };
    length / group_velocity(&p.material, lambda, &dir, b).unwrap()
}

#[test]
fn exit_times_match_segment_oracle() {
    for src in [bibo_source(810.0), bibo_source(851.0), bbo_source()] {
        let d = src.thickness();
        let c1 = &src.crystal1;
        let c2 = src.crystal2();
        let t = crystal_exit_times(&src).unwrap();
        for (arm, t1, t2) in [(Arm::Signal, t.t1_s, t.t2_s), (Arm::Idler, t.t1_i, t.t2_i)] {
            let o1 = segment(&src, c1, None, false, 0.5 * d)
                + segment(&src, c1, Some(arm), true, 0.5 * d)
                + segment(&src, &c2, Some(arm), false, d);
            let o2 = segment(&src, c1, None, true, d)
                + segment(&src, &c2, None, false, 0.5 * d)
                + segment(&src, &c2, Some(arm), true, 0.5 * d);
            assert!((t1 - o1).abs() < 1e-9, "{t1} {o1}");
            assert!((t2 - o2).abs() < 1e-9, "{t2} {o2}");
            let dt = delta_t_dc(&src, arm).unwrap();
            assert!((dt - (t2 - t1)).abs() < 1e-9);
        }
    }
}

#[test]
fn zero_thickness_gives_zero_times() {
    let src = bibo_source(810.0).with_crystal_thickness(0.0);
    let t = crystal_exit_times(&src).unwrap();
    assert_eq!((t.t1_s, t.t1_i, t.t2_s, t.t2_i), (0.0, 0.0, 0.0, 0.0));
}

fn glass_source() -> SourceSetup {
    let glass = Arc::new(Material::constant("glass", 1.5));
    let c1 = CrystalPlate::new(glass, 0.0, 0.0, 0.6, PlateRole::DcCrystal1, Orientation::AsCut).unwrap();
    let base = bibo_source(810.0);
    SourceSetup::new(c1, 810.0, 0.0, base.pump, base.collection.clone(), vec![]).unwrap()
}

#[test]
fn equal_group_velocities_give_no_delay() {
    let src = glass_source();
    assert!(delta_t_dc(&src, Arm::Signal).unwrap().abs() < 1e-9);
}

#[test]
fn published_crystal_delays() {
    let bbo = bbo_source();
    let dt = mean(delta_t_dc(&bbo, Arm::Signal).unwrap(), delta_t_dc(&bbo, Arm::Idler).unwrap());
    assert!((dt - 253.0).abs() < 0.1 * 253.0, "{dt}");
    let bibo = bibo_source(810.0);
    let dt = mean(delta_t_dc(&bibo, Arm::Signal).unwrap(), delta_t_dc(&bibo, Arm::Idler).unwrap());
    assert!((dt - 600.0).abs() < 0.1 * 600.0, "{dt}");
}

#[test]
fn plate_delays() {
    let q = plate("quartz", 90.0, 0.0, 16.0, PlateRole::Precompensator);
    assert_eq!(tau_pc(&q.with_thickness(0.0), 405.0).unwrap(), 0.0);
    let t = tau_pc(&q, 405.0).unwrap();
    assert!((t - 600.0).abs() < 0.15 * 600.0, "{t}");
    assert!((tau_pc(&q.rotated(), 405.0).unwrap() + t).abs() < 1e-9);
    let b = plate("BBO", 29.4, 0.0, 1.9, PlateRole::Precompensator);
    let t = tau_pc(&b, 405.0).unwrap();
    assert!((t - 253.0).abs() < 0.15 * 253.0, "{t}");
}

#[test]
fn compensator_delay_matches_segment_oracle() {
    let src = bibo_source(810.0);
    let sc = plate("BBO", 33.9, 0.0, 0.245, PlateRole::SpatialCompSignal);
    let f = sc.frame(810.0).unwrap();
    // along the plate normal: V minus H, with H the fast axis as cut
    let slow = 0.245 / group_velocity(&sc.material, 810.0, &f.n, Branch::Slow).unwrap();
    let fast = 0.245 / group_velocity(&sc.material, 810.0, &f.n, Branch::Fast).unwrap();
    assert!((tau_sc(&sc, 810.0).unwrap() - (slow - fast)).abs() < 1e-9);
    assert_eq!(tau_sc(&sc.with_thickness(0.0), 810.0).unwrap(), 0.0);
    let with = delay_budget(&with_compensators(&src, 0.245)).unwrap();
    let net = mean(with.net_s, with.net_i);
    assert!((net - 640.0).abs() < 0.15 * 640.0, "{net}");
    let _ = solve_kz::<f64>;
}

#[test]
fn jtpa_matches_pointwise_formula() {
    let src = bibo_source(851.0);
    let pump = pump_of(&src);
    let j = jtpa_auto(&src, &pump, &src.collection.filters).unwrap();
    let p = j.params;
    let f = |a: f64, b: f64| {
        let x = 0.5 * p.thickness_mm * (p.d_plus_s * a + p.d_plus_i * b + 0.25 * p.d2 * (a - b) * (a - b));
        let s = if x == 0.0 { 1.0 } else { x.sin() / x };
        Complex64::from_polar(s * (-((a + b) / p.sigma).powi(2)).exp(), -x)
    };
    let n = j.nu_s.len();
    let (ks, ki) = (n / 2, n / 2);
    let scale = j.at(ks, ki) / f(j.nu_s[ks], j.nu_i[ki]);
    let peak = j.amplitude.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut state: u64 = 0x2545_f491_4f6c_dd1d;
    for _ in 0..100 {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let (a, b) = ((state % n as u64) as usize, ((state >> 32) % n as u64) as usize);
        let d = j.at(a, b) - scale * f(j.nu_s[a], j.nu_i[b]);
        assert!(d.norm() < 1e-12 * peak);
    }
}

#[test]
fn jtpa_peaks_at_the_origin() {
    let src = bbo_source();
    let pump = pump_of(&src);
    let p = JtpaParams::new(&src, &pump).unwrap();
    let c = p.amplitude(0.0, 0.0);
    assert_eq!(c, Complex64::new(1.0, 0.0));
    for (a, b) in [(0.01, 0.0), (0.0, -0.02), (0.03, 0.01)] {
        assert!(p.amplitude(a, b).norm() < 1.0);
    }
}

#[test]
fn monochromatic_limit_collapses_onto_antidiagonal() {
    let p = JtpaParams {
        thickness_mm: 0.6,
        d_plus_s: 0.5,
        d_plus_i: 0.5,
        d2: 0.0,
        sigma: 1e-6,
    };
    assert!(p.amplitude(0.01, -0.01).norm() > 0.99);
    assert!(p.amplitude(0.01, -0.01 + 1e-4).norm() < 1e-12);
}

#[test]
fn truncated_grid_is_rejected() {
    let src = bbo_source();
    let pump = pump_of(&src);
    let g = GridSpec::auto(&src, &pump, &src.collection.filters).unwrap();
    let narrow = GridSpec {
        half_width_s: 0.2 * g.half_width_s,
        half_width_i: 0.2 * g.half_width_i,
        ..g
    };
    assert!(matches!(jtpa(&src, &pump, &narrow), Err(spdc_core::Error::Grid { .. })));
}

/// ∬ f(t_s+Δ_s, t_i+Δ_i) f*(t_s, t_i) dt dt over one period of the sampled
/// spectrum, normalised by ∬|f|².
fn time_domain_visibility(j: &JtpaGrid, filter_nm: f64, ds: f64, di: f64) -> Complex64 {
    let n = j.nu_s.len();
    let w = |lam: f64| 2.0 * std::f64::consts::PI * 299.792_458 * filter_nm / (lam * lam);
    let (ws, wi) = (w(j.lambda_s), w(j.lambda_i));
    let g = |nu: f64, w: f64| (-2.0 * std::f64::consts::LN_2 * nu * nu / (w * w)).exp();
    let spec: Vec<Complex64> = (0..n * n)
        .map(|k| j.amplitude[k] * g(j.nu_s[k / n], ws) * g(j.nu_i[k % n], wi))
        .collect();
    let (hs, hi) = (j.nu_s[1] - j.nu_s[0], j.nu_i[1] - j.nu_i[0]);
    let ts: Vec<f64> = (0..n).map(|k| 2.0 * std::f64::consts::PI * k as f64 / (n as f64 * hs)).collect();
    let ti: Vec<f64> = (0..n).map(|k| 2.0 * std::f64::consts::PI * k as f64 / (n as f64 * hi)).collect();
    let to_time = |shift_s: f64, shift_i: f64| -> Vec<Complex64> {
        let mut half = vec![Complex64::new(0.0, 0.0); n * n];
        for (a, &t) in ts.iter().enumerate() {
            let ph: Vec<Complex64> = j.nu_s.iter().map(|&nu| Complex64::from_polar(1.0, nu * (t + shift_s))).collect();
            for b in 0..n {
                half[a * n + b] = (0..n).map(|c| spec[c * n + b] * ph[c]).sum();
            }
        }
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for (b, &t) in ti.iter().enumerate() {
            let ph: Vec<Complex64> = j.nu_i.iter().map(|&nu| Complex64::from_polar(1.0, nu * (t + shift_i))).collect();
            for a in 0..n {
                out[a * n + b] = (0..n).map(|c| half[a * n + c] * ph[c]).sum();
            }
        }
        out
    };
    let f0 = to_time(0.0, 0.0);
    let f1 = to_time(ds, di);
    let num: Complex64 = f1.iter().zip(&f0).map(|(a, b)| a * b.conj()).sum();
    let den: f64 = f0.iter().map(|a| a.norm_sqr()).sum();
    num / den
}

#[test]
fn visibility_matches_time_domain_oracle() {
    let filters = Filters::both(Filter::gaussian(10.0));
    for src in [bibo_source(810.0), bibo_source(851.0), bbo_source()] {
        let pump = pump_of(&src);
        let g = GridSpec::auto(&src, &pump, &filters).unwrap().with_points(256);
        let j = jtpa(&src, &pump, &g).unwrap();
        let b = delay_budget(&src).unwrap();
        for (ds, di) in [(0.0, 0.0), (b.net_s, b.net_i), (0.3 * b.net_s, -0.2 * b.net_i)] {
            let v = visibility(&j, ds, di, &filters).unwrap();
            let o = time_domain_visibility(&j, 10.0, ds, di);
            assert!((v - o).norm() < 1e-3, "{v} vs {o}");
        }
        let v0 = visibility(&j, 0.0, 0.0, &filters).unwrap();
        assert!((v0 - 1.0).norm() < 1e-12);
    }
}

#[test]
fn visibility_decays_along_delay_rays() {
    let src = bibo_source(851.0);
    let filters = src.collection.filters;
    let j = jtpa_auto(&src, &pump_of(&src), &filters).unwrap();
    for (a, b) in [(1.0, 1.0), (1.0, 0.0), (0.0, 1.0), (1.0, -0.5)] {
        let mut last = 1.0 + 1e-12;
        for k in 0..30 {
            let t = 40.0 * k as f64;
            let v = visibility(&j, a * t, b * t, &filters).unwrap().norm();
            assert!(v <= last + 1e-12 && v <= 1.0 + 1e-12);
            last = v;
        }
    }
}

#[test]
fn narrower_filters_raise_visibility() {
    let src = bibo_source(810.0);
    let wide = Filters::both(Filter::gaussian(20.0));
    let j = jtpa_auto(&src, &pump_of(&src), &wide).unwrap();
    let mut last = 0.0;
    for fwhm in [20.0, 10.0, 5.0, 2.0] {
        let v = visibility(&j, 300.0, 300.0, &Filters::both(Filter::gaussian(fwhm))).unwrap().norm();
        assert!(v > last);
        last = v;
    }
}

#[test]
fn top_hat_filter_is_supported() {
    let src = bibo_source(810.0);
    let f = Filters::both(Filter {
        fwhm_nm: 10.0,
        shape: FilterShape::TopHat,
    });
    let j = jtpa_auto(&src, &pump_of(&src), &f).unwrap();
    let v = visibility(&j, 0.0, 0.0, &f).unwrap();
    assert!((v - 1.0).norm() < 1e-12);
}

#[test]
fn precompensator_designs() {
    let bbo = with_compensators(&bbo_source(), 0.245);
    let tmpl = plate("BBO", 29.4, 0.0, 1.0, PlateRole::Precompensator);
    let d = design_precompensator(&bbo, &pump_of(&bbo), &tmpl).unwrap();
    assert!((d.thickness_mm - 2.1).abs() < 0.15 * 2.1, "{d:?}");
    let bibo = with_compensators(&bibo_source(810.0), 0.245);
    let tmpl = plate("quartz", 90.0, 0.0, 1.0, PlateRole::Precompensator);
    let d = design_precompensator(&bibo, &pump_of(&bibo), &tmpl).unwrap();
    assert!((d.thickness_mm - 17.2).abs() < 0.15 * 17.2, "{d:?}");
    assert!(d.visibility > 0.95);
}

#[test]
fn precompensator_for_delay_free_source_is_empty() {
    let src = glass_source();
    let tmpl = plate("quartz", 90.0, 0.0, 1.0, PlateRole::Precompensator);
    let d = design_precompensator(&src, &pump_of(&src), &tmpl).unwrap();
    assert!(d.thickness_mm.abs() < 1e-9);
    assert!(!d.needs_postcompensator);
    let glass = Arc::new(Material::constant("glass", 1.5));
    let iso = CrystalPlate::new(glass, 0.0, 0.0, 1.0, PlateRole::Precompensator, Orientation::AsCut).unwrap();
    assert!(design_precompensator(&bibo_source(810.0), &pump_of(&src), &iso).is_err());
}

#[test]
fn wrong_orientation_is_flipped() {
    let src = bibo_source(810.0);
    let tmpl = plate("quartz", 90.0, 0.0, 1.0, PlateRole::Precompensator).rotated();
    let d = design_precompensator(&src, &pump_of(&src), &tmpl).unwrap();
    assert_eq!(d.orientation, Orientation::AsCut);
    assert!(d.thickness_mm > 10.0);
}

#[test]
fn tangle_curve_peaks_at_the_budget() {
    let src = bibo_source(810.0);
    let b = delay_budget(&src).unwrap();
    let delays: Vec<f64> = (-40..=160).map(|k| 5.0 * k as f64).collect();
    let c = tangle_vs_delay(&src, &pump_of(&src), &delays, &src.collection.filters).unwrap();
    let best = c.iter().max_by(|a, b| a.tangle.total_cmp(&b.tangle)).unwrap();
    assert!((best.delay_fs - mean(b.net_s, b.net_i)).abs() <= 5.0);
    let zero = c.iter().find(|p| p.delay_fs == 0.0).unwrap().tangle;
    let neg: Vec<f64> = c.iter().filter(|p| p.delay_fs < 0.0).map(|p| p.tangle).collect();
    assert!(neg.iter().all(|&t| t <= zero));
    assert!(neg.windows(2).all(|w| w[0] <= w[1] + 1e-12));
}

#[test]
fn doubling_pump_bandwidth_halves_peak_width() {
    let src = bbo_source();
    let filters = Filters::both(Filter::gaussian(40.0));
    let delays: Vec<f64> = (-100..=250).map(|k| 4.0 * k as f64).collect();
    let w = |fwhm: f64| {
        let pump = PumpSpec::from_fwhm_nm(405.0, fwhm, PumpKind::Pulsed).unwrap();
        peak_fwhm(&tangle_vs_delay(&src, &pump, &delays, &filters).unwrap()).unwrap()
    };
    let (a, b) = (w(1.0), w(2.0));
    assert!((a / b - 2.0).abs() < 0.2, "{a} {b}");
}

#[test]
fn spectral_phase_linear_part_is_the_net_delay() {
    for src in [with_compensators(&bbo_source(), 0.245), bibo_source(851.0)] {
        let sp = SpectralPhase::new(&src).unwrap();
        let b = delay_budget(&src).unwrap();
        let (s, i) = sp.linear();
        assert!((s - b.net_s).abs() < 1e-6 && (i - b.net_i).abs() < 1e-6, "{s} {i} {b:?}");
        let h = 1e-4;
        let fd = (sp.eval(h, 0.0) - sp.eval(-h, 0.0)) / (2.0 * h);
        assert!((fd - b.net_s).abs() < 1e-3 * b.net_s.abs());
        assert_eq!(sp.eval(0.0, 0.0), 0.0);
    }
}
