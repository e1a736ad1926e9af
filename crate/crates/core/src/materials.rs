//! Dispersion database and index, group-velocity, GVD and walkoff solvers
//! for uniaxial, biaxial and isotropic media.
//!
//! Wavelengths are vacuum wavelengths in nm, lengths mm, times fs. All
//! wavelength derivatives are per nm. Directions are unit vectors in the
//! crystal's principal (optical) frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{cross, dot, norm, normalize, scale, Real, Vec3};

/// Speed of light in mm/fs.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e-4;

/// Distance from the range edges kept free for wavelength derivatives.
pub const EDGE_MARGIN_NM: f64 = 1.0;

const BUILTIN_DATA: &str = include_str!("../data/materials.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    Uniaxial,
    Biaxial,
    Isotropic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formula {
    Pole,
    Sellmeier,
    Constant,
}

/// Polarization eigenmode for a given propagation direction. `Fast` has the
/// lower index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Fast,
    Slow,
}

impl Branch {
    pub fn other(self) -> Branch {
        match self {
            Branch::Fast => Branch::Slow,
            Branch::Slow => Branch::Fast,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UniaxialBranch {
    Ordinary,
    Extraordinary,
}

// ---------------------------------------------------------------------------
// Data file

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRecord {
    pub label: String,
    pub formula: Formula,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialRecord {
    pub name: String,
    pub symmetry: Symmetry,
    pub range_nm: [f64; 2],
    pub citation: String,
    pub axis: Vec<AxisRecord>,
}

/// Versioned collection of material records as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialDb {
    pub schema_version: u32,
    pub data_version: String,
    pub material: Vec<MaterialRecord>,
}

impl MaterialDb {
    /// The database compiled into the library.
    pub fn builtin() -> MaterialDb {
        MaterialDb::parse(BUILTIN_DATA).expect("builtin materials data is valid")
    }

    pub fn parse(text: &str) -> Result<MaterialDb> {
        let db: MaterialDb = toml::from_str(text).map_err(|e| Error::Data(e.to_string()))?;
        if db.schema_version != 1 {
            return Err(Error::Data(format!(
                "unsupported schema_version {}",
                db.schema_version
            )));
        }
        for rec in &db.material {
            Material::<f64>::from_record(rec)?;
        }
        Ok(db)
    }

    pub fn load(path: &std::path::Path) -> Result<MaterialDb> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        MaterialDb::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.material.iter().map(|m| m.name.as_str()).collect()
    }

    /// Case-insensitive lookup.
    pub fn get<T: Real>(&self, name: &str) -> Result<Material<T>> {
        self.material
            .iter()
            .find(|m| m.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
            .and_then(Material::from_record)
    }
}

// ---------------------------------------------------------------------------
// Dispersion formulas

#[derive(Debug, Clone, PartialEq)]
pub struct Dispersion<T> {
    pub formula: Formula,
    pub coefficients: Vec<T>,
}

/// n² and its first two wavelength derivatives (per nm, per nm²).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Eps<T> {
    v: T,
    d1: T,
    d2: T,
}

impl<T: Real> Dispersion<T> {
    fn validate(formula: Formula, c: &[f64]) -> Result<()> {
        let ok = match formula {
            Formula::Pole => c.len() == 4,
            Formula::Sellmeier => c.len() >= 3 && c.len() % 2 == 1,
            Formula::Constant => c.len() == 1,
        };
        if ok && c.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::Data(format!(
                "bad coefficient list for {formula:?}: {c:?}"
            )))
        }
    }

    fn eps(&self, lambda_nm: T) -> Eps<T> {
        let k = T::lit(1e-3);
        let l = lambda_nm * k;
        let l2 = l * l;
        let two = T::lit(2.0);
        let eight = T::lit(8.0);
        let c = &self.coefficients;
        // Derivatives below are per µm; converted to per nm at the end.
        let (v, d1, d2) = match self.formula {
            Formula::Pole => {
                let (a, b, p, d) = (c[0], c[1], c[2], c[3]);
                let den = l2 - p;
                let v = a + b / den - d * l2;
                let d1 = -two * b * l / (den * den) - two * d * l;
                let d2 = -two * b / (den * den) + eight * b * l2 / (den * den * den) - two * d;
                (v, d1, d2)
            }
            Formula::Sellmeier => {
                let mut v = c[0];
                let mut d1 = T::zero();
                let mut d2 = T::zero();
                for t in c[1..].chunks(2) {
                    let (b, p) = (t[0], t[1]);
                    let den = l2 - p;
                    v = v + b * l2 / den;
                    d1 = d1 - two * b * p * l / (den * den);
                    d2 = d2 - two * b * p / (den * den) + eight * b * p * l2 / (den * den * den);
                }
                (v, d1, d2)
            }
            Formula::Constant => (c[0] * c[0], T::zero(), T::zero()),
        };
        Eps {
            v,
            d1: d1 * k,
            d2: d2 * k * k,
        }
    }
}

// ---------------------------------------------------------------------------
// Material

/// Index of one eigenmode with its wavelength derivatives (per nm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeIndex<T> {
    pub n: T,
    pub dn: T,
    pub d2n: T,
}

impl<T: Real> ModeIndex<T> {
    pub fn group_index(&self, lambda_nm: T) -> T {
        self.n - lambda_nm * self.dn
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Material<T = f64> {
    pub name: String,
    pub symmetry: Symmetry,
    /// Principal-axis dispersions: `[o, e]`, `[x, y, z]` or `[n]`.
    pub axes: Vec<Dispersion<T>>,
    pub range_nm: (T, T),
    pub citation: String,
}

impl<T: Real> Material<T> {
    pub fn from_record(rec: &MaterialRecord) -> Result<Material<T>> {
        let expected: &[&str] = match rec.symmetry {
            Symmetry::Uniaxial => &["o", "e"],
            Symmetry::Biaxial => &["x", "y", "z"],
            Symmetry::Isotropic => &["n"],
        };
        let labels: Vec<&str> = rec.axis.iter().map(|a| a.label.as_str()).collect();
        if labels != expected {
            return Err(Error::Data(format!(
                "{}: axis labels {labels:?}, expected {expected:?}",
                rec.name
            )));
        }
        for a in &rec.axis {
            Dispersion::<T>::validate(a.formula, &a.coefficients)?;
        }
        let [lo, hi] = rec.range_nm;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::Data(format!("{}: bad range {lo}..{hi}", rec.name)));
        }
        let m = Material {
            name: rec.name.clone(),
            symmetry: rec.symmetry,
            axes: rec
                .axis
                .iter()
                .map(|a| Dispersion {
                    formula: a.formula,
                    coefficients: a.coefficients.iter().map(|&x| T::lit(x)).collect(),
                })
                .collect(),
            range_nm: (T::lit(lo), T::lit(hi)),
            citation: rec.citation.clone(),
        };
        m.check_physical()?;
        Ok(m)
    }

    /// Builds a material without the principal-ordering check. Used for
    /// synthetic media such as a uniaxial crystal routed through the
    /// biaxial solver.
    pub fn new_unchecked(
        name: &str,
        symmetry: Symmetry,
        axes: Vec<Dispersion<T>>,
        range_nm: (T, T),
    ) -> Material<T> {
        Material {
            name: name.to_string(),
            symmetry,
            axes,
            range_nm,
            citation: String::new(),
        }
    }

    /// Non-dispersive isotropic medium.
    pub fn constant(name: &str, n: T) -> Material<T> {
        let d = Dispersion {
            formula: Formula::Constant,
            coefficients: vec![n],
        };
        Material::new_unchecked(name, Symmetry::Isotropic, vec![d], (T::lit(100.0), T::lit(5000.0)))
    }

    /// Non-dispersive uniaxial medium.
    pub fn constant_uniaxial(name: &str, n_o: T, n_e: T) -> Material<T> {
        let d = |n| Dispersion {
            formula: Formula::Constant,
            coefficients: vec![n],
        };
        Material::new_unchecked(
            name,
            Symmetry::Uniaxial,
            vec![d(n_o), d(n_e)],
            (T::lit(100.0), T::lit(5000.0)),
        )
    }

    /// The same medium with principal axes `[o, o, e]`, tagged biaxial so the
    /// general Fresnel solver is used everywhere.
    pub fn as_biaxial(&self) -> Result<Material<T>> {
        if self.symmetry != Symmetry::Uniaxial {
            return Err(Error::Argument(format!("{} is not uniaxial", self.name)));
        }
        let mut m = self.clone();
        m.symmetry = Symmetry::Biaxial;
        m.axes = vec![self.axes[0].clone(), self.axes[0].clone(), self.axes[1].clone()];
        m.name = format!("{}-biaxial", self.name);
        Ok(m)
    }

    pub fn cast<U: Real>(&self) -> Material<U> {
        Material {
            name: self.name.clone(),
            symmetry: self.symmetry,
            axes: self
                .axes
                .iter()
                .map(|a| Dispersion {
                    formula: a.formula,
                    coefficients: a.coefficients.iter().map(|&x| U::lit(x.f64())).collect(),
                })
                .collect(),
            range_nm: (U::lit(self.range_nm.0.f64()), U::lit(self.range_nm.1.f64())),
            citation: self.citation.clone(),
        }
    }

    fn check_physical(&self) -> Result<()> {
        let (lo, hi) = self.range_nm;
        for i in 0..=64 {
            let l = lo + (hi - lo) * T::lit(i as f64 / 64.0);
            let eps = self.principal_eps(l);
            for e in &eps {
                if !(e.v > T::one()) {
                    return Err(Error::Data(format!(
                        "{}: n <= 1 at {} nm",
                        self.name, l
                    )));
                }
            }
            if self.symmetry == Symmetry::Biaxial && !(eps[0].v <= eps[1].v && eps[1].v <= eps[2].v) {
                return Err(Error::Data(format!(
                    "{}: principal indices not ordered n_x <= n_y <= n_z at {} nm",
                    self.name, l
                )));
            }
        }
        Ok(())
    }

    pub fn is_birefringent(&self, lambda_nm: T) -> bool {
        let e = self.principal_eps(lambda_nm);
        let tol = T::epsilon() * T::lit(16.0);
        (e[0].v - e[2].v).abs() > tol || (e[0].v - e[1].v).abs() > tol
    }

    fn check_lambda(&self, lambda_nm: T, margin: T) -> Result<()> {
        if !lambda_nm.is_finite() || lambda_nm <= T::zero() {
            return Err(Error::Argument(format!("wavelength {lambda_nm} nm")));
        }
        let (lo, hi) = self.range_nm;
        if lambda_nm < lo + margin || lambda_nm > hi - margin {
            return Err(Error::WavelengthRange {
                material: self.name.clone(),
                lambda_nm: lambda_nm.f64(),
                lo_nm: (lo + margin).f64(),
                hi_nm: (hi - margin).f64(),
            });
        }
        Ok(())
    }

    fn check_direction(dir: &Vec3<T>) -> Result<Vec3<T>> {
        let r = norm(dir);
        let tol = T::epsilon().sqrt() * T::lit(10.0);
        if !r.is_finite() || (r - T::one()).abs() > tol {
            return Err(Error::Argument(format!("direction norm {r} is not 1")));
        }
        Ok(scale(dir, T::one() / r))
    }

    /// Principal n² values along x, y, z with derivatives.
    fn principal_eps(&self, lambda_nm: T) -> [Eps<T>; 3] {
        let e: Vec<Eps<T>> = self.axes.iter().map(|a| a.eps(lambda_nm)).collect();
        match self.symmetry {
            Symmetry::Isotropic => [e[0], e[0], e[0]],
            Symmetry::Uniaxial => [e[0], e[0], e[1]],
            Symmetry::Biaxial => [e[0], e[1], e[2]],
        }
    }

    /// Principal indices `[n_x, n_y, n_z]`.
    pub fn principal_indices(&self, lambda_nm: T) -> Result<[T; 3]> {
        self.check_lambda(lambda_nm, T::zero())?;
        let e = self.principal_eps(lambda_nm);
        Ok([e[0].v.sqrt(), e[1].v.sqrt(), e[2].v.sqrt()])
    }

    /// Index and wavelength derivatives of one eigenmode along `dir`.
    pub fn mode(&self, lambda_nm: T, dir: &Vec3<T>, branch: Branch) -> Result<ModeIndex<T>> {
        self.check_lambda(lambda_nm, T::zero())?;
        let s = Self::check_direction(dir)?;
        Ok(self.mode_unchecked(lambda_nm, &s, branch))
    }

    /// Both eigen-indices `(n_fast, n_slow)` along `dir`.
    pub fn indices(&self, lambda_nm: T, dir: &Vec3<T>) -> Result<(T, T)> {
        self.check_lambda(lambda_nm, T::zero())?;
        let s = Self::check_direction(dir)?;
        let (uf, us) = self.inverse_eps(lambda_nm, &s);
        Ok((T::one() / uf.0.sqrt(), T::one() / us.0.sqrt()))
    }

    pub(crate) fn mode_unchecked(&self, lambda_nm: T, s: &Vec3<T>, branch: Branch) -> ModeIndex<T> {
        let (uf, us) = self.inverse_eps(lambda_nm, s);
        let (u, u1, u2) = match branch {
            Branch::Fast => uf,
            Branch::Slow => us,
        };
        // n = u^(-1/2)
        let half = T::lit(0.5);
        let n = T::one() / u.sqrt();
        let n3 = n * n * n;
        let dn = -half * n3 * u1;
        let d2n = T::lit(0.75) * n3 * n * n * u1 * u1 - half * n3 * u2;
        ModeIndex { n, dn, d2n }
    }

    /// Fast and slow roots of the Fresnel equation in u = 1/n², each with
    /// its first and second wavelength derivatives.
    fn inverse_eps(&self, lambda_nm: T, s: &Vec3<T>) -> ((T, T, T), (T, T, T)) {
        let eps = self.principal_eps(lambda_nm);
        let two = T::lit(2.0);
        // a = 1/N and derivatives.
        let inv = |e: &Eps<T>| {
            let a = T::one() / e.v;
            let a1 = -e.d1 * a * a;
            let a2 = -e.d2 * a * a + two * e.d1 * e.d1 * a * a * a;
            (a, a1, a2)
        };
        let (ax, ay, az) = (inv(&eps[0]), inv(&eps[1]), inv(&eps[2]));
        let p = [s[0] * s[0], s[1] * s[1], s[2] * s[2]];
        match self.symmetry {
            Symmetry::Isotropic => (ax, ax),
            Symmetry::Uniaxial => {
                let st2 = p[0] + p[1];
                let e = (
                    st2 * az.0 + p[2] * ax.0,
                    st2 * az.1 + p[2] * ax.1,
                    st2 * az.2 + p[2] * ax.2,
                );
                if e.0 >= ax.0 {
                    (e, ax)
                } else {
                    (ax, e)
                }
            }
            Symmetry::Biaxial => biaxial_roots(p, ax, ay, az),
        }
    }

    /// Electric displacement direction of one eigenmode (unit, crystal
    /// frame). The sign is fixed so the first non-negligible component in
    /// the order z, x, y is positive.
    pub fn polarization(&self, lambda_nm: T, dir: &Vec3<T>, branch: Branch) -> Result<Vec3<T>> {
        self.check_lambda(lambda_nm, T::zero())?;
        let s = Self::check_direction(dir)?;
        Ok(self.polarization_unchecked(lambda_nm, &s, branch))
    }

    pub(crate) fn polarization_unchecked(&self, lambda_nm: T, s: &Vec3<T>, branch: Branch) -> Vec3<T> {
        let eps = self.principal_eps(lambda_nm);
        let eta = [T::one() / eps[0].v, T::one() / eps[1].v, T::one() / eps[2].v];
        let (uf, us) = self.inverse_eps(lambda_nm, s);
        let u = match branch {
            Branch::Fast => uf.0,
            Branch::Slow => us.0,
        };
        // M = P η P − u I with P = I − s sᵀ; D spans its null space.
        let mut m = [[T::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = T::zero();
                for k in 0..3 {
                    let pik = if i == k { T::one() } else { T::zero() } - s[i] * s[k];
                    let pkj = if k == j { T::one() } else { T::zero() } - s[k] * s[j];
                    acc = acc + pik * eta[k] * pkj;
                }
                m[i][j] = acc - if i == j { u } else { T::zero() };
            }
        }
        let cands = [cross(&m[0], &m[1]), cross(&m[0], &m[2]), cross(&m[1], &m[2])];
        let mut best = cands[0];
        for c in &cands[1..] {
            if norm(c) > norm(&best) {
                best = *c;
            }
        }
        let scale_ref = eta[0].max(eta[1]).max(eta[2]);
        let d = if norm(&best) > T::epsilon().sqrt() * scale_ref * scale_ref {
            normalize(&best)
        } else {
            // Optic-axis degeneracy: any transverse pair is an eigenbasis.
            let mut k = 0;
            for i in 1..3 {
                if s[i].abs() < s[k].abs() {
                    k = i;
                }
            }
            let mut e = [T::zero(); 3];
            e[k] = T::one();
            let fast = normalize(&cross(s, &e));
            match branch {
                Branch::Fast => fast,
                Branch::Slow => normalize(&cross(s, &fast)),
            }
        };
        fix_sign(d)
    }

    /// Unit Poynting (ray) direction of one eigenmode.
    pub fn ray_direction(&self, lambda_nm: T, dir: &Vec3<T>, branch: Branch) -> Result<Vec3<T>> {
        self.check_lambda(lambda_nm, T::zero())?;
        let s = Self::check_direction(dir)?;
        Ok(self.ray_unchecked(lambda_nm, &s, branch))
    }

    pub(crate) fn ray_unchecked(&self, lambda_nm: T, s: &Vec3<T>, branch: Branch) -> Vec3<T> {
        let eps = self.principal_eps(lambda_nm);
        let d = self.polarization_unchecked(lambda_nm, s, branch);
        let e = [d[0] / eps[0].v, d[1] / eps[1].v, d[2] / eps[2].v];
        let t = [
            s[0] * dot(&e, &e) - e[0] * dot(&e, s),
            s[1] * dot(&e, &e) - e[1] * dot(&e, s),
            s[2] * dot(&e, &e) - e[2] * dot(&e, s),
        ];
        normalize(&t)
    }
}

fn fix_sign<T: Real>(d: Vec3<T>) -> Vec3<T> {
    let tol = T::epsilon().sqrt();
    for i in [2usize, 0, 1] {
        if d[i].abs() > tol {
            return if d[i] < T::zero() { scale(&d, -T::one()) } else { d };
        }
    }
    d
}

type Root<T> = (T, T, T);

fn biaxial_roots<T: Real>(p: [T; 3], ax: Root<T>, ay: Root<T>, az: Root<T>) -> (Root<T>, Root<T>) {
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    // B = Σ p_i (a_j + a_k), C = Σ p_i a_j a_k and their derivatives.
    let b = p[0] * (ay.0 + az.0) + p[1] * (ax.0 + az.0) + p[2] * (ax.0 + ay.0);
    let b1 = p[0] * (ay.1 + az.1) + p[1] * (ax.1 + az.1) + p[2] * (ax.1 + ay.1);
    let b2 = p[0] * (ay.2 + az.2) + p[1] * (ax.2 + az.2) + p[2] * (ax.2 + ay.2);
    let prod = |u: Root<T>, v: Root<T>| {
        (
            u.0 * v.0,
            u.1 * v.0 + u.0 * v.1,
            u.2 * v.0 + two * u.1 * v.1 + u.0 * v.2,
        )
    };
    let (yz, xz, xy) = (prod(ay, az), prod(ax, az), prod(ax, ay));
    let c1 = p[0] * yz.1 + p[1] * xz.1 + p[2] * xy.1;
    let c2 = p[0] * yz.2 + p[1] * xz.2 + p[2] * xy.2;
    // Discriminant written so that it is exact when two principal values
    // coincide (uses p_x + p_y + p_z = 1).
    let lin = p[0] * (az.0 - ay.0) + p[1] * (az.0 - ax.0) + p[2] * (ax.0 - ay.0);
    let disc = (lin * lin + four * p[1] * p[2] * (ax.0 - ay.0) * (ax.0 - az.0)).max(T::zero());
    let sq = disc.sqrt();
    let roots = [(b + sq) * T::lit(0.5), (b - sq) * T::lit(0.5)];
    let degenerate = sq <= T::epsilon() * T::lit(64.0) * b;
    let deriv = |u: T, sign: T| {
        if degenerate {
            (u, b1 * T::lit(0.5), b2 * T::lit(0.5))
        } else {
            // (2u − B) = ±√disc
            let den = sign * sq;
            let u1 = (b1 * u - c1) / den;
            let u2 = (b2 * u + two * b1 * u1 - c2 - two * u1 * u1) / den;
            (u, u1, u2)
        }
    };
    (deriv(roots[0], T::one()), deriv(roots[1], -T::one()))
}

// ---------------------------------------------------------------------------
// Free-function operations

/// Uniaxial index for the ordinary or extraordinary wave at polar angle
/// `theta` from the optic axis.
pub fn index_uniaxial<T: Real>(
    m: &Material<T>,
    lambda_nm: T,
    branch: UniaxialBranch,
    theta: T,
) -> Result<T> {
    if m.symmetry != Symmetry::Uniaxial {
        return Err(Error::Argument(format!("{} is not uniaxial", m.name)));
    }
    if !theta.is_finite() {
        return Err(Error::Argument(format!("theta {theta}")));
    }
    m.check_lambda(lambda_nm, T::zero())?;
    let eps = m.principal_eps(lambda_nm);
    let (no2, ne2) = (eps[0].v, eps[2].v);
    Ok(match branch {
        UniaxialBranch::Ordinary => no2.sqrt(),
        UniaxialBranch::Extraordinary => {
            let (st, ct) = theta.sin_cos();
            let u = ct * ct / no2 + st * st / ne2;
            T::one() / u.sqrt()
        }
    })
}

/// Two roots `(n_fast, n_slow)` of the Fresnel equation of wave normals.
/// Uniaxial materials are accepted and solved as biaxial with `n_x = n_y`.
pub fn index_biaxial<T: Real>(m: &Material<T>, lambda_nm: T, dir: &Vec3<T>) -> Result<(T, T)> {
    match m.symmetry {
        Symmetry::Biaxial => m.indices(lambda_nm, dir),
        Symmetry::Uniaxial => m.as_biaxial()?.indices(lambda_nm, dir),
        Symmetry::Isotropic => m.indices(lambda_nm, dir),
    }
}

/// Group velocity in mm/fs along a fixed direction and branch.
pub fn group_velocity<T: Real>(m: &Material<T>, lambda_nm: T, dir: &Vec3<T>, branch: Branch) -> Result<T> {
    m.check_lambda(lambda_nm, T::lit(EDGE_MARGIN_NM))?;
    let mi = m.mode(lambda_nm, dir, branch)?;
    Ok(T::lit(SPEED_OF_LIGHT) / mi.group_index(lambda_nm))
}

/// Group index n − λ·dn/dλ.
pub fn group_index<T: Real>(m: &Material<T>, lambda_nm: T, dir: &Vec3<T>, branch: Branch) -> Result<T> {
    m.check_lambda(lambda_nm, T::lit(EDGE_MARGIN_NM))?;
    Ok(m.mode(lambda_nm, dir, branch)?.group_index(lambda_nm))
}

/// Group-velocity dispersion d²k/dω² in fs²/mm.
pub fn gvd<T: Real>(m: &Material<T>, lambda_nm: T, dir: &Vec3<T>, branch: Branch) -> Result<T> {
    m.check_lambda(lambda_nm, T::lit(EDGE_MARGIN_NM))?;
    let mi = m.mode(lambda_nm, dir, branch)?;
    let c = T::lit(SPEED_OF_LIGHT);
    Ok(lambda_nm * lambda_nm * lambda_nm * mi.d2n * T::lit(1e-6) / (T::lit(2.0) * T::PI() * c * c))
}

/// Angle between the Poynting vector and the wave vector.
pub fn walkoff_angle<T: Real>(m: &Material<T>, lambda_nm: T, dir: &Vec3<T>, branch: Branch) -> Result<T> {
    let s = Material::<T>::check_direction(dir)?;
    let t = m.ray_direction(lambda_nm, &s, branch)?;
    let c = cross(&s, &t);
    Ok(norm(&c).atan2(dot(&s, &t)))
}

/// Extraordinary-wave walkoff from the uniaxial closed form
/// tan ρ = (n²/2)·sin 2θ·(1/n_e² − 1/n_o²), returned as a magnitude.
pub fn walkoff_angle_uniaxial<T: Real>(m: &Material<T>, lambda_nm: T, theta: T) -> Result<T> {
    let n = index_uniaxial(m, lambda_nm, UniaxialBranch::Extraordinary, theta)?;
    let eps = m.principal_eps(lambda_nm);
    let tan = n * n * T::lit(0.5) * (T::lit(2.0) * theta).sin() * (T::one() / eps[2].v - T::one() / eps[0].v);
    Ok(tan.atan().abs())
}

/// Maps an ordinary/extraordinary label to the fast/slow branch at `theta`.
pub fn uniaxial_branch<T: Real>(m: &Material<T>, lambda_nm: T, which: UniaxialBranch) -> Result<Branch> {
    let n = m.principal_indices(lambda_nm)?;
    let e_slow = n[2] > n[0];
    Ok(match (which, e_slow) {
        (UniaxialBranch::Extraordinary, true) | (UniaxialBranch::Ordinary, false) => Branch::Slow,
        _ => Branch::Fast,
    })
}
