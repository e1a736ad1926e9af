//! Subcommand bodies. Each takes plain values and returns a [`Report`];
//! argument parsing and file output live in the binary.

use num_complex::Complex64;
use serde::Serialize;
use spdc_core::materials::{self, Branch, MaterialDb, SPEED_OF_LIGHT};
use spdc_core::numeric::{linspace, spherical};
use spdc_core::phasematch::{Arm, CrystalPlate, Orientation, PlateRole, SpdcTriplet};
use spdc_core::qstate::{self, TwoQubitState};
use spdc_core::source::SourceSetup;
use spdc_core::spatialphase::{self, ScanAxis};
use spdc_core::temporal::{self, DelayBudget, DelayPoint, PrecompDesign, SpectralPhase};

use crate::config::{Scenario, ScenarioConfig};
use crate::output::{Cell, Report};
use crate::CliError;

/// Points per side of the square lattice sampling an iris.
pub const IRIS_GRID: usize = 15;

fn role_name(role: PlateRole) -> &'static str {
    match role {
        PlateRole::DcCrystal1 => "dc_crystal_1",
        PlateRole::DcCrystal2 => "dc_crystal_2",
        PlateRole::SpatialCompSignal => "spatial_comp_signal",
        PlateRole::SpatialCompIdler => "spatial_comp_idler",
        PlateRole::Precompensator => "precompensator",
    }
}

fn arm_of(role: PlateRole) -> Option<Arm> {
    match role {
        PlateRole::SpatialCompSignal => Some(Arm::Signal),
        PlateRole::SpatialCompIdler => Some(Arm::Idler),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// index

#[derive(Debug, Clone, Serialize)]
pub struct IndexRow {
    pub branch: Branch,
    pub n: f64,
    pub group_index: f64,
    pub group_velocity_mm_per_fs: f64,
    pub group_delay_fs_per_mm: f64,
    pub gvd_fs2_per_mm: f64,
    pub walkoff_deg: f64,
}

#[derive(Serialize)]
struct IndexBody<'a> {
    material: &'a str,
    lambda_nm: f64,
    theta_deg: f64,
    phi_deg: f64,
    rows: &'a [IndexRow],
    birefringent_delay_fs_per_mm: f64,
}

pub fn index_rows(db: &MaterialDb, name: &str, lambda_nm: f64, theta_deg: f64, phi_deg: f64) -> Result<Vec<IndexRow>, CliError> {
    let m = db.get::<f64>(name).map_err(CliError::Input)?;
    let dir = spherical(theta_deg.to_radians(), phi_deg.to_radians());
    [Branch::Fast, Branch::Slow]
        .into_iter()
        .map(|b| {
            let ng = materials::group_index(&m, lambda_nm, &dir, b)?;
            Ok(IndexRow {
                branch: b,
                n: m.mode(lambda_nm, &dir, b)?.n,
                group_index: ng,
                group_velocity_mm_per_fs: materials::group_velocity(&m, lambda_nm, &dir, b)?,
                group_delay_fs_per_mm: ng / SPEED_OF_LIGHT,
                gvd_fs2_per_mm: materials::gvd(&m, lambda_nm, &dir, b)?,
                walkoff_deg: materials::walkoff_angle(&m, lambda_nm, &dir, b)?.to_degrees(),
            })
        })
        .collect::<spdc_core::Result<Vec<_>>>()
        .map_err(CliError::Input)
}

pub fn index(db: &MaterialDb, name: &str, lambda_nm: f64, theta_deg: f64, phi_deg: f64) -> Result<Report, CliError> {
    let rows = index_rows(db, name, lambda_nm, theta_deg, phi_deg)?;
    let biref = rows[1].group_delay_fs_per_mm - rows[0].group_delay_fs_per_mm;
    let mut r = Report::new(
        "index",
        &[
            "material",
            "lambda_nm",
            "theta_deg",
            "phi_deg",
            "branch",
            "n",
            "group_index",
            "group_velocity_mm_per_fs",
            "group_delay_fs_per_mm",
            "gvd_fs2_per_mm",
            "walkoff_deg",
            "birefringent_delay_fs_per_mm",
        ],
        &IndexBody {
            material: name,
            lambda_nm,
            theta_deg,
            phi_deg,
            rows: &rows,
            birefringent_delay_fs_per_mm: biref,
        },
    )?;
    for row in &rows {
        let branch = match row.branch {
            Branch::Fast => "fast",
            Branch::Slow => "slow",
        };
        r.row([
            Cell::from(name),
            lambda_nm.into(),
            theta_deg.into(),
            phi_deg.into(),
            branch.into(),
            row.n.into(),
            row.group_index.into(),
            row.group_velocity_mm_per_fs.into(),
            row.group_delay_fs_per_mm.into(),
            row.gvd_fs2_per_mm.into(),
            row.walkoff_deg.into(),
            biref.into(),
        ]);
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// Placeholder resolution

#[derive(Debug, Clone, Serialize)]
pub struct SpatialDesign {
    pub arm: Arm,
    pub material: String,
    /// Thickness fixed by the config, if any.
    pub installed_mm: Option<f64>,
    /// RMS-optimal thickness over the largest iris; absent when the plate
    /// cannot compensate this arm.
    pub optimal_mm: Option<f64>,
    pub rms_without_rad: f64,
    pub rms_with_rad: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub setup: SourceSetup,
    pub spatial: Vec<SpatialDesign>,
    pub precompensator: Option<PrecompDesign>,
}

/// Designs every placeholder: spatial compensators first, then the
/// precompensator with the spatial compensators installed.
pub fn resolve(scn: &Scenario) -> Result<Resolved, CliError> {
    let mut setup = scn.setup.clone();
    let mut spatial = Vec::new();
    for arm in [Arm::Signal, Arm::Idler] {
        let fixed = scn.setup.spatial_compensator(arm).cloned();
        let pending = scn.placeholders.iter().find(|p| arm_of(p.role) == Some(arm));
        let Some(plate) = pending.or(fixed.as_ref()) else {
            continue;
        };
        let optimal = match spatialphase::design_with_plate(&setup, plate, arm) {
            Ok(t) => Some(t),
            Err(e) if pending.is_some() => return Err(e.into()),
            Err(_) => None,
        };
        if pending.is_some() {
            setup = setup.with_plate(plate.role, Some(plate.with_thickness(optimal.unwrap_or(0.0))));
        }
        let installed_mm = fixed.as_ref().map(|p| p.thickness_mm);
        let used = setup.spatial_compensator(arm).map(|p| p.thickness_mm);
        spatial.push(SpatialDesign {
            arm,
            material: plate.material.name.clone(),
            installed_mm,
            optimal_mm: optimal,
            rms_without_rad: spatialphase::compensator_rms(&setup, plate, arm, 0.0)?,
            rms_with_rad: used.map(|t| spatialphase::compensator_rms(&setup, plate, arm, t)).transpose()?,
        });
    }
    let mut precompensator = None;
    if let Some(t) = scn.placeholders.iter().find(|p| p.role == PlateRole::Precompensator) {
        let d = temporal::design_precompensator(&setup, &setup.pump, t)?;
        let plate = CrystalPlate {
            thickness_mm: d.thickness_mm,
            orientation: d.orientation,
            ..t.clone()
        };
        setup = setup.with_plate(PlateRole::Precompensator, Some(plate));
        precompensator = Some(d);
    }
    Ok(Resolved {
        setup,
        spatial,
        precompensator,
    })
}

/// Loads a config into a fully specified source, designing placeholders.
pub fn prepare(cfg: &ScenarioConfig, db: &MaterialDb) -> Result<SourceSetup, CliError> {
    Ok(resolve(&cfg.build(db)?)?.setup)
}

// ---------------------------------------------------------------------------
// State predictions

/// Temporal visibility with the full relative spectral phase of every plate.
pub fn exact_visibility(setup: &SourceSetup) -> Result<Complex64, CliError> {
    let filters = setup.collection.filters;
    let j = temporal::jtpa_auto(setup, &setup.pump, &filters)?;
    let phase = SpectralPhase::new(setup)?;
    Ok(temporal::visibility_with_phase(&j, &filters, |s, i| phase.eval(s, i))?)
}

/// Density matrix over an iris with a given temporal visibility.
pub fn iris_state(setup: &SourceSetup, v: Complex64, iris_mm: f64) -> Result<TwoQubitState, CliError> {
    let phases = spatialphase::iris_phases(setup, iris_mm, IRIS_GRID, true)?;
    Ok(qstate::rho_combined(&phases, None, v)?)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Prediction {
    pub iris_mm: f64,
    pub visibility: f64,
    pub spatial_coherence: f64,
    pub concurrence: f64,
    pub tangle: f64,
    /// Fidelity with the closest maximally entangled |HH⟩ + e^{iϕ}|VV⟩.
    pub fidelity: f64,
}

pub fn predict(setup: &SourceSetup, v: Complex64, iris_mm: f64) -> Result<Prediction, CliError> {
    let phases = spatialphase::iris_phases(setup, iris_mm, IRIS_GRID, true)?;
    let state = qstate::rho_combined(&phases, None, v)?;
    let (concurrence, tangle) = qstate::concurrence_tangle(&state)?;
    Ok(Prediction {
        iris_mm,
        visibility: v.norm(),
        spatial_coherence: qstate::mean_phasor(&phases, None)?.norm(),
        concurrence,
        tangle,
        fidelity: qstate::max_fidelity_over_phase(&state),
    })
}

fn predictions(setup: &SourceSetup) -> Result<Vec<Prediction>, CliError> {
    let v = exact_visibility(setup)?;
    setup
        .collection
        .iris_diameters_mm
        .iter()
        .map(|&d| predict(setup, v, d))
        .collect()
}

// ---------------------------------------------------------------------------
// phasemap

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PairedSample {
    pub x_mm: f64,
    pub phase_deg: f64,
    /// Idler iris offsets of the conjugate photon, mm.
    pub idler_h_mm: f64,
    pub idler_v_mm: f64,
}

#[derive(Serialize)]
struct PhaseMapBody {
    compensated: bool,
    axis: ScanAxis,
    plane_distance_mm: f64,
    slope_deg_per_mm: f64,
    peak_to_peak_deg: f64,
    global_phase_deg: f64,
    triplet: SpdcTriplet,
    setup_hash: String,
    samples: Vec<PairedSample>,
}

pub fn phasemap(
    setup: &SourceSetup,
    compensated: bool,
    axis: ScanAxis,
    range: (f64, f64),
    samples: usize,
) -> Result<Report, CliError> {
    let setup = if compensated {
        setup.clone()
    } else {
        setup.without_spatial_compensators()
    };
    let map = spatialphase::phase_map(&setup, axis, range, samples)?;
    let frame = setup.arm_frame(Arm::Idler);
    let l = setup.collection.iris_distance_mm;
    let paired = map
        .samples
        .iter()
        .map(|s| {
            let (h, v) = match axis {
                ScanAxis::Radial => (s.x_mm, 0.0),
                ScanAxis::Tangential => (0.0, s.x_mm),
            };
            let ks = spatialphase::iris_direction(&setup, Arm::Signal, h, v);
            let ki = frame.to_local(&spatialphase::conjugate_direction(&setup, &ks, Arm::Signal)?);
            Ok(PairedSample {
                x_mm: s.x_mm,
                phase_deg: s.phase_deg,
                idler_h_mm: l * ki[0] / ki[2],
                idler_v_mm: l * ki[1] / ki[2],
            })
        })
        .collect::<spdc_core::Result<Vec<_>>>()?;
    let mut r = Report::new(
        "phasemap",
        &["x_mm", "phase_deg"],
        &PhaseMapBody {
            compensated,
            axis,
            plane_distance_mm: map.plane_distance_mm,
            slope_deg_per_mm: map.slope_deg_per_mm(),
            peak_to_peak_deg: map.peak_to_peak_deg(),
            global_phase_deg: map.global_phase_deg,
            triplet: setup.triplet,
            setup_hash: setup.hash(),
            samples: paired,
        },
    )?;
    for s in &map.samples {
        r.row([s.x_mm, s.phase_deg]);
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// design

#[derive(Debug, Clone, Serialize)]
pub struct PlateSummary {
    pub role: PlateRole,
    pub material: String,
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub thickness_mm: f64,
    pub orientation: Orientation,
    pub designed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignReport {
    pub status: &'static str,
    pub plates: Vec<PlateSummary>,
    pub spatial: Vec<SpatialDesign>,
    pub precompensator: Option<PrecompDesign>,
    pub budget_before: Option<DelayBudget>,
    pub budget_after: Option<DelayBudget>,
    pub before: Vec<Prediction>,
    pub after: Vec<Prediction>,
}

pub const NOTHING_TO_DESIGN: &str = "nothing to design";

pub fn design_report(cfg: &ScenarioConfig, db: &MaterialDb) -> Result<DesignReport, CliError> {
    let scn = cfg.build(db)?;
    if scn.placeholders.is_empty() {
        return Ok(DesignReport {
            status: NOTHING_TO_DESIGN,
            plates: Vec::new(),
            spatial: Vec::new(),
            precompensator: None,
            budget_before: None,
            budget_after: None,
            before: Vec::new(),
            after: Vec::new(),
        });
    }
    let res = resolve(&scn)?;
    let plates = res
        .setup
        .compensators
        .iter()
        .map(|p| PlateSummary {
            role: p.role,
            material: p.material.name.clone(),
            theta_deg: p.theta_cut.to_degrees(),
            phi_deg: p.phi_cut.to_degrees(),
            thickness_mm: p.thickness_mm,
            orientation: p.orientation,
            designed: scn.placeholders.iter().any(|q| q.role == p.role),
        })
        .collect();
    Ok(DesignReport {
        status: "designed",
        plates,
        spatial: res.spatial,
        precompensator: res.precompensator,
        budget_before: Some(temporal::delay_budget(&scn.setup)?),
        budget_after: Some(temporal::delay_budget(&res.setup)?),
        before: predictions(&scn.setup)?,
        after: predictions(&res.setup)?,
    })
}

pub fn design(cfg: &ScenarioConfig, db: &MaterialDb) -> Result<Report, CliError> {
    let d = design_report(cfg, db)?;
    let mut r = Report::new("design", &["quantity", "value"], &d)?;
    r.row(["status", d.status]);
    for p in &d.plates {
        let key = role_name(p.role);
        r.row([Cell::from(format!("{key}.material")), p.material.as_str().into()]);
        r.row([Cell::from(format!("{key}.thickness_mm")), p.thickness_mm.into()]);
        let o = match p.orientation {
            Orientation::AsCut => "as-cut",
            Orientation::Rotated90 => "rotated-90",
        };
        r.row([Cell::from(format!("{key}.orientation")), o.into()]);
        r.row([Cell::from(format!("{key}.designed")), p.designed.into()]);
    }
    for s in &d.spatial {
        let arm = match s.arm {
            Arm::Signal => "signal",
            Arm::Idler => "idler",
        };
        if let Some(t) = s.optimal_mm {
            r.row([Cell::from(format!("spatial_comp_{arm}.optimal_mm")), t.into()]);
        }
    }
    if let Some(p) = &d.precompensator {
        r.row([Cell::from("precompensator.delay_fs"), p.tau_pc.into()]);
        r.row([Cell::from("precompensator.first_order_visibility"), p.visibility.into()]);
        r.row([Cell::from("precompensator.needs_postcompensator"), p.needs_postcompensator.into()]);
    }
    for (stage, preds) in [("before", &d.before), ("after", &d.after)] {
        for p in preds {
            let d = p.iris_mm;
            r.row([Cell::from(format!("{stage}.iris_{d}mm.tangle")), p.tangle.into()]);
            r.row([Cell::from(format!("{stage}.iris_{d}mm.fidelity")), p.fidelity.into()]);
        }
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Serialize)]
struct DelaySweepBody {
    axis: &'static str,
    budget: DelayBudget,
    peak_delay_fs: f64,
    peak_tangle: f64,
    points: Vec<DelayPoint>,
}

/// Tangle against precompensator delay, first-order delay model.
pub fn sweep_pc_delay(setup: &SourceSetup, range: (f64, f64), points: usize) -> Result<Report, CliError> {
    let delays = linspace(range.0, range.1, points);
    let filters = setup.collection.filters;
    let curve = temporal::tangle_vs_delay(setup, &setup.pump, &delays, &filters)?;
    let budget = temporal::delay_budget(&setup.with_plate(PlateRole::Precompensator, None))?;
    let peak = curve
        .iter()
        .copied()
        .max_by(|a, b| a.tangle.total_cmp(&b.tangle))
        .ok_or_else(|| CliError::Usage("sweep needs at least one point".into()))?;
    let mut r = Report::new(
        "sweep",
        &["delay_fs", "tangle"],
        &DelaySweepBody {
            axis: "pc_delay",
            budget,
            peak_delay_fs: peak.delay_fs,
            peak_tangle: peak.tangle,
            points: curve.clone(),
        },
    )?;
    for p in &curve {
        r.row([p.delay_fs, p.tangle]);
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IrisPoint {
    pub diameter_mm: f64,
    pub tangle_compensated: f64,
    pub tangle_uncompensated: f64,
    pub fidelity_compensated: f64,
    pub fidelity_uncompensated: f64,
}

#[derive(Serialize)]
struct IrisSweepBody {
    axis: &'static str,
    visibility: f64,
    points: Vec<IrisPoint>,
}

/// Tangle and fidelity against iris diameter with and without the spatial
/// compensators. Both curves share the temporal visibility of the full
/// setup so that only the spatial effect differs.
pub fn iris_curve(setup: &SourceSetup, range: (f64, f64), points: usize) -> Result<Vec<IrisPoint>, CliError> {
    if !(range.0 > 0.0) {
        return Err(CliError::Usage("iris diameters must be positive".into()));
    }
    let v = exact_visibility(setup)?;
    let bare = setup.without_spatial_compensators();
    linspace(range.0, range.1, points)
        .into_iter()
        .map(|d| {
            let c = predict(setup, v, d)?;
            let u = predict(&bare, v, d)?;
            Ok(IrisPoint {
                diameter_mm: d,
                tangle_compensated: c.tangle,
                tangle_uncompensated: u.tangle,
                fidelity_compensated: c.fidelity,
                fidelity_uncompensated: u.fidelity,
            })
        })
        .collect()
}

pub fn sweep_iris(setup: &SourceSetup, range: (f64, f64), points: usize) -> Result<Report, CliError> {
    let curve = iris_curve(setup, range, points)?;
    let mut r = Report::new(
        "sweep",
        &[
            "diameter_mm",
            "tangle_compensated",
            "tangle_uncompensated",
            "fidelity_compensated",
            "fidelity_uncompensated",
        ],
        &IrisSweepBody {
            axis: "iris",
            visibility: exact_visibility(setup)?.norm(),
            points: curve.clone(),
        },
    )?;
    for p in &curve {
        r.row([
            p.diameter_mm,
            p.tangle_compensated,
            p.tangle_uncompensated,
            p.fidelity_compensated,
            p.fidelity_uncompensated,
        ]);
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// state

#[derive(Serialize)]
struct StateBody {
    iris_mm: f64,
    rho: TwoQubitState,
    prediction: Prediction,
    phase_deg: Option<f64>,
}

pub fn state(setup: &SourceSetup, iris_mm: f64) -> Result<Report, CliError> {
    if !(iris_mm > 0.0) {
        return Err(CliError::Usage(format!("iris diameter {iris_mm} mm must be positive")));
    }
    let v = exact_visibility(setup)?;
    let rho = iris_state(setup, v, iris_mm)?;
    let prediction = predict(setup, v, iris_mm)?;
    let phase_deg = qstate::state_phase(&rho).ok();
    let mut r = Report::new(
        "state",
        &["row", "col", "re", "im"],
        &StateBody {
            iris_mm,
            rho: rho.clone(),
            prediction,
            phase_deg,
        },
    )?;
    for i in 0..4 {
        for j in 0..4 {
            let z = rho.rho()[(i, j)];
            r.row([Cell::from(i), j.into(), z.re.into(), z.im.into()]);
        }
    }
    Ok(r)
}
