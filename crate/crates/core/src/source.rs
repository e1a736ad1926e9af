//! Full description of a two-crystal source and its collection geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{cross, normalize, scale, sub, dot, Vec3};
use crate::phasematch::{emission_angle_at, Arm, CrystalPlate, PlateRole, SpdcTriplet};
use crate::temporal::{Filters, PumpSpec};

/// Collection optics: irises on each arm and their spectral filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Collection {
    /// Distance from the crystals to the iris plane along each arm, mm.
    pub iris_distance_mm: f64,
    pub iris_diameters_mm: Vec<f64>,
    pub filters: Filters,
}

/// Arm-local frame in lab coordinates: `n` along the central emission
/// direction, `h` pointing away from the pump axis, `v = n × h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmFrame {
    pub h: Vec3<f64>,
    pub v: Vec3<f64>,
    pub n: Vec3<f64>,
}

impl ArmFrame {
    pub fn to_local(&self, lab: &Vec3<f64>) -> Vec3<f64> {
        [dot(&self.h, lab), dot(&self.v, lab), dot(&self.n, lab)]
    }

    pub fn to_lab(&self, local: &Vec3<f64>) -> Vec3<f64> {
        [
            self.h[0] * local[0] + self.v[0] * local[1] + self.n[0] * local[2],
            self.h[1] * local[0] + self.v[1] * local[1] + self.n[1] * local[2],
            self.h[2] * local[0] + self.v[2] * local[1] + self.n[2] * local[2],
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSetup {
    pub crystal1: CrystalPlate,
    pub triplet: SpdcTriplet,
    /// Azimuth of the emission plane from lab +X, rad. The signal arm sits
    /// on the positive side.
    pub emission_azimuth: f64,
    pub pump: PumpSpec,
    pub collection: Collection,
    pub compensators: Vec<CrystalPlate>,
}

impl SourceSetup {
    /// Solves the emission cone for the crystal pair and assembles the setup.
    pub fn new(
        crystal1: CrystalPlate,
        lambda_s: f64,
        emission_azimuth: f64,
        pump: PumpSpec,
        collection: Collection,
        compensators: Vec<CrystalPlate>,
    ) -> Result<SourceSetup> {
        if crystal1.role != PlateRole::DcCrystal1 {
            return Err(Error::Argument("first plate must have role dc_crystal_1".into()));
        }
        for c in &compensators {
            if matches!(c.role, PlateRole::DcCrystal1 | PlateRole::DcCrystal2) {
                return Err(Error::Argument("compensator list holds a downconversion crystal".into()));
            }
        }
        for role in [PlateRole::SpatialCompSignal, PlateRole::SpatialCompIdler, PlateRole::Precompensator] {
            if compensators.iter().filter(|c| c.role == role).count() > 1 {
                return Err(Error::Argument(format!("more than one {role:?} plate")));
            }
        }
        if !(collection.iris_distance_mm > 0.0) {
            return Err(Error::Argument("iris distance must be positive".into()));
        }
        // Zero-thickness crystals still define a cone; solve it with a unit
        // plate since the cone does not depend on thickness.
        let probe = crystal1.with_thickness(1.0);
        let triplet = emission_angle_at(&probe, pump.center_nm, lambda_s, emission_azimuth)?;
        Ok(SourceSetup {
            crystal1,
            triplet,
            emission_azimuth,
            pump,
            collection,
            compensators,
        })
    }

    pub fn crystal2(&self) -> CrystalPlate {
        self.crystal1.second_crystal()
    }

    pub fn thickness(&self) -> f64 {
        self.crystal1.thickness_mm
    }

    pub fn lambda(&self, arm: Arm) -> f64 {
        self.triplet.lambda(arm)
    }

    pub fn external_angle(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Signal => self.triplet.external_half_angle_s,
            Arm::Idler => self.triplet.external_half_angle_i,
        }
    }

    /// Outward radial unit vector of an arm in the lab transverse plane.
    fn radial(&self, arm: Arm) -> Vec3<f64> {
        let (s, c) = self.emission_azimuth.sin_cos();
        match arm {
            Arm::Signal => [c, s, 0.0],
            Arm::Idler => [-c, -s, 0.0],
        }
    }

    /// Central emission direction of an arm (lab, unit).
    pub fn arm_direction(&self, arm: Arm) -> Vec3<f64> {
        let a = self.external_angle(arm);
        let r = self.radial(arm);
        [r[0] * a.sin(), r[1] * a.sin(), a.cos()]
    }

    pub fn arm_frame(&self, arm: Arm) -> ArmFrame {
        let n = self.arm_direction(arm);
        let r = self.radial(arm);
        let h = normalize(&sub(&r, &scale(&n, dot(&r, &n))));
        let v = cross(&n, &h);
        ArmFrame { h, v, n }
    }

    pub fn plate(&self, role: PlateRole) -> Option<&CrystalPlate> {
        self.compensators.iter().find(|c| c.role == role)
    }

    pub fn spatial_compensator(&self, arm: Arm) -> Option<&CrystalPlate> {
        self.plate(match arm {
            Arm::Signal => PlateRole::SpatialCompSignal,
            Arm::Idler => PlateRole::SpatialCompIdler,
        })
    }

    pub fn precompensator(&self) -> Option<&CrystalPlate> {
        self.plate(PlateRole::Precompensator)
    }

    /// Copy with the compensator for `role` replaced (or removed with `None`).
    pub fn with_plate(&self, role: PlateRole, plate: Option<CrystalPlate>) -> SourceSetup {
        let mut out = self.clone();
        out.compensators.retain(|c| c.role != role);
        if let Some(p) = plate {
            out.compensators.push(CrystalPlate { role, ..p });
        }
        out
    }

    /// Copy without any spatial compensators.
    pub fn without_spatial_compensators(&self) -> SourceSetup {
        self.with_plate(PlateRole::SpatialCompSignal, None)
            .with_plate(PlateRole::SpatialCompIdler, None)
    }

    /// Copy with thicker or thinner downconversion crystals.
    pub fn with_crystal_thickness(&self, thickness_mm: f64) -> SourceSetup {
        let mut out = self.clone();
        out.crystal1 = out.crystal1.with_thickness(thickness_mm);
        out
    }

    /// Deterministic hex digest identifying the setup.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(format!("{self:?}").as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
