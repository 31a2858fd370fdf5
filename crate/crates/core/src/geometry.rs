//! Poincaré-disk and SPD(2) geometry.
//!
//! Distances use the curvature convention `d(z, z') = artanh |z - z'| / |1 - conj(z) z'|`,
//! so the point `tanh(r) e^{iθ}` sits at distance `r` from the origin.

use std::f64::consts::TAU;

use num_complex::Complex64;
use thiserror::Error;

/// Largest argument passed to `artanh` before clamping.
pub const ARTANH_CLAMP: f64 = 1.0 - 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point ({z1}, {z2}) is not inside the open unit disk")]
    OutsideDisk { z1: f64, z2: f64 },
    #[error("matrix [[{x1}, {x3}], [{x3}, {x2}]] is not symmetric positive-definite")]
    NotSpd { x1: f64, x2: f64, x3: f64 },
    #[error("Delta must be positive and finite, got {0}")]
    BadDelta(f64),
    #[error("|alpha|^2 - |beta|^2 = {0}, expected 1")]
    NotSu11(f64),
    #[error("boundary point must have unit modulus, got |b| = {0}")]
    NotOnBoundary(f64),
    #[error("horocyclic inversion residual {0:e} exceeds 1e-8 (point too close to the boundary)")]
    HorocyclicInversion(f64),
}

/// A point of the open unit disk in Cartesian components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskPoint {
    z1: f64,
    z2: f64,
}

impl DiskPoint {
    pub const ORIGIN: DiskPoint = DiskPoint { z1: 0.0, z2: 0.0 };

    pub fn new(z1: f64, z2: f64) -> Result<Self, GeometryError> {
        if !(z1.is_finite() && z2.is_finite()) || z1 * z1 + z2 * z2 >= 1.0 {
            return Err(GeometryError::OutsideDisk { z1, z2 });
        }
        Ok(Self { z1, z2 })
    }

    pub fn from_complex(z: Complex64) -> Result<Self, GeometryError> {
        Self::new(z.re, z.im)
    }

    pub fn z1(&self) -> f64 {
        self.z1
    }

    pub fn z2(&self) -> f64 {
        self.z2
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.z1, self.z2)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.z1 * self.z1 + self.z2 * self.z2
    }

    /// Hyperbolic polar coordinates `(r, θ)` with `z = tanh(r) e^{iθ}`; θ = 0 at the origin.
    pub fn to_polar(self) -> (f64, f64) {
        let rho = self.norm_sqr().sqrt();
        if rho == 0.0 {
            return (0.0, 0.0);
        }
        (clamped_artanh(rho), self.z2.atan2(self.z1))
    }

    pub fn from_polar(r: f64, theta: f64) -> Result<Self, GeometryError> {
        let t = r.abs().tanh();
        let p = Self::new(t * theta.cos(), t * theta.sin())?;
        if r < 0.0 {
            return Ok(Self {
                z1: -p.z1,
                z2: -p.z2,
            });
        }
        Ok(p)
    }

    /// Horocyclic coordinates `(s, r)` with `z = n_s a_r · O`.
    pub fn to_horocyclic(self) -> Result<(f64, f64), GeometryError> {
        let r = horocyclic_inner(self, Complex64::new(1.0, 0.0))?;
        let t = r.tanh();
        let z = self.to_complex();
        let s_c = Complex64::i() * (z - t) / ((1.0 - z) * (1.0 - t));
        let s = s_c.re;
        let back = Self::from_horocyclic(s, r)?;
        let residual = (back.to_complex() - z).norm();
        if residual > 1e-8 || !residual.is_finite() {
            return Err(GeometryError::HorocyclicInversion(residual));
        }
        Ok((s, r))
    }

    pub fn from_horocyclic(s: f64, r: f64) -> Result<Self, GeometryError> {
        let g = subgroup_element(Subgroup::N, s).compose(&subgroup_element(Subgroup::A, r));
        g.apply(DiskPoint::ORIGIN)
    }
}

fn clamped_artanh(x: f64) -> f64 {
    if x > ARTANH_CLAMP {
        log::debug!("artanh argument {x} clamped near the disk boundary");
        ARTANH_CLAMP.atanh()
    } else {
        x.atanh()
    }
}

/// Hyperbolic distance between two disk points.
pub fn dist_disk(p: DiskPoint, q: DiskPoint) -> f64 {
    let z = p.to_complex();
    let w = q.to_complex();
    let num = (z - w).norm();
    if num == 0.0 {
        return 0.0;
    }
    let den = (Complex64::new(1.0, 0.0) - z.conj() * w).norm();
    clamped_artanh(num / den)
}

/// Distance between `tanh(r)` and `tanh(r') e^{iθ}` through the polar
/// trigonometric formula, without forming Möbius maps.
pub fn dist_polar(r: f64, r_prime: f64, theta: f64) -> f64 {
    let a = r.tanh();
    let b = r_prime.tanh();
    let c = theta.cos();
    let num = a * a + b * b - 2.0 * a * b * c;
    let den = 1.0 + a * a * b * b - 2.0 * a * b * c;
    let f = (num / den).max(0.0);
    clamped_artanh(f.sqrt())
}

/// The horocyclic "inner product" `<z, b> = ½ log((1 - |z|²) / |z - b|²)`.
pub fn horocyclic_inner(p: DiskPoint, b: Complex64) -> Result<f64, GeometryError> {
    let nb = b.norm();
    if (nb - 1.0).abs() > 1e-12 {
        return Err(GeometryError::NotOnBoundary(nb));
    }
    let z = p.to_complex();
    Ok(0.5 * ((1.0 - p.norm_sqr()) / (z - b).norm_sqr()).ln())
}

/// A 2×2 symmetric positive-definite matrix `[[x1, x3], [x3, x2]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureTensor {
    x1: f64,
    x2: f64,
    x3: f64,
}

impl StructureTensor {
    pub fn new(x1: f64, x2: f64, x3: f64) -> Result<Self, GeometryError> {
        let ok = x1.is_finite()
            && x2.is_finite()
            && x3.is_finite()
            && x1 > 0.0
            && x1 * x2 - x3 * x3 > 0.0;
        if !ok {
            return Err(GeometryError::NotSpd { x1, x2, x3 });
        }
        Ok(Self { x1, x2, x3 })
    }

    pub fn identity() -> Self {
        Self {
            x1: 1.0,
            x2: 1.0,
            x3: 0.0,
        }
    }

    pub fn entries(&self) -> (f64, f64, f64) {
        (self.x1, self.x2, self.x3)
    }

    pub fn det(&self) -> f64 {
        self.x1 * self.x2 - self.x3 * self.x3
    }

    pub fn scaled(&self, c: f64) -> Result<Self, GeometryError> {
        Self::new(c * self.x1, c * self.x2, c * self.x3)
    }
}

/// Split an SPD matrix into its disk point and `Δ = sqrt(det T)`.
pub fn coords_from_spd(t: &StructureTensor) -> (DiskPoint, f64) {
    let delta = t.det().sqrt();
    let (y1, y2, y3) = (t.x1 / delta, t.x2 / delta, t.x3 / delta);
    let tau = 0.5 * (y1 + y2);
    let z1 = 0.5 * (y1 - y2) / (1.0 + tau);
    let z2 = y3 / (1.0 + tau);
    // |z|² = (τ - 1)/(τ + 1) < 1 whenever the input is SPD.
    (DiskPoint { z1, z2 }, delta)
}

pub fn spd_from_coords(p: DiskPoint, delta: f64) -> Result<StructureTensor, GeometryError> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(GeometryError::BadDelta(delta));
    }
    let (z1, z2) = (p.z1, p.z2);
    let den = 1.0 - z1 * z1 - z2 * z2;
    let x1 = ((1.0 + z1).powi(2) + z2 * z2) / den;
    let x2 = ((1.0 - z1).powi(2) + z2 * z2) / den;
    let x3 = 2.0 * z2 / den;
    StructureTensor::new(delta * x1, delta * x2, delta * x3)
}

/// Distance on SPD(2): `sqrt(2 (log Δ - log Δ')² + d(z, z')²)`.
pub fn dist_tensor(s: &StructureTensor, t: &StructureTensor) -> f64 {
    let (zs, ds) = coords_from_spd(s);
    let (zt, dt) = coords_from_spd(t);
    let dl = ds.ln() - dt.ln();
    let d2 = dist_disk(zs, zt);
    (2.0 * dl * dl + d2 * d2).sqrt()
}

/// Density of the SPD(2) volume element in `(Δ, z1, z2)` coordinates.
pub fn volume_density(p: DiskPoint, delta: f64) -> f64 {
    let den = 1.0 - p.norm_sqr();
    8.0 * std::f64::consts::SQRT_2 / (delta * den * den)
}

/// An element `[[α, β], [conj β, conj α]]` of SU(1,1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Su11 {
    alpha: Complex64,
    beta: Complex64,
}

impl Su11 {
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self, GeometryError> {
        let det = alpha.norm_sqr() - beta.norm_sqr();
        if !det.is_finite() || (det - 1.0).abs() > 1e-12 * alpha.norm_sqr().max(1.0) {
            return Err(GeometryError::NotSu11(det));
        }
        Ok(Self { alpha, beta })
    }

    pub fn identity() -> Self {
        Self {
            alpha: Complex64::new(1.0, 0.0),
            beta: Complex64::new(0.0, 0.0),
        }
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn beta(&self) -> Complex64 {
        self.beta
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Su11) -> Su11 {
        let (a, b) = (self.alpha, self.beta);
        let (c, d) = (other.alpha, other.beta);
        Su11 {
            alpha: a * c + b * d.conj(),
            beta: a * d + b * c.conj(),
        }
    }

    pub fn inverse(&self) -> Su11 {
        Su11 {
            alpha: self.alpha.conj(),
            beta: -self.beta,
        }
    }

    pub fn negated(&self) -> Su11 {
        Su11 {
            alpha: -self.alpha,
            beta: -self.beta,
        }
    }

    /// Möbius action `(αz + β)/(conj β z + conj α)`.
    pub fn apply(&self, p: DiskPoint) -> Result<DiskPoint, GeometryError> {
        let z = p.to_complex();
        let w = (self.alpha * z + self.beta) / (self.beta.conj() * z + self.alpha.conj());
        DiskPoint::from_complex(w)
    }

    /// Largest entrywise difference to `other`.
    pub fn max_entry_diff(&self, other: &Su11) -> f64 {
        (self.alpha - other.alpha)
            .norm()
            .max((self.beta - other.beta).norm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subgroup {
    /// Rotations `rot_φ`.
    K,
    /// Translations `a_r` along the real diameter.
    A,
    /// Horocyclic translations `n_s` with base point 1.
    N,
}

pub fn subgroup_element(kind: Subgroup, t: f64) -> Su11 {
    match kind {
        Subgroup::K => Su11 {
            alpha: Complex64::from_polar(1.0, 0.5 * t),
            beta: Complex64::new(0.0, 0.0),
        },
        Subgroup::A => Su11 {
            alpha: Complex64::new(t.cosh(), 0.0),
            beta: Complex64::new(t.sinh(), 0.0),
        },
        Subgroup::N => Su11 {
            alpha: Complex64::new(1.0, t),
            beta: Complex64::new(0.0, -t),
        },
    }
}

/// Factors of `g = ± rot_φ a_r n_s`, with `φ ∈ [0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IwasawaFactors {
    pub phi: f64,
    pub r: f64,
    pub s: f64,
}

impl IwasawaFactors {
    pub fn recompose(&self) -> Su11 {
        subgroup_element(Subgroup::K, self.phi)
            .compose(&subgroup_element(Subgroup::A, self.r))
            .compose(&subgroup_element(Subgroup::N, self.s))
    }

    /// Entrywise residual against `g`, up to the sign shared by `g` and `-g`
    /// (both induce the same isometry, and `φ ∈ [0, 2π)` only fixes the
    /// rotation modulo that sign).
    pub fn residual(&self, g: &Su11) -> f64 {
        let h = self.recompose();
        h.max_entry_diff(g).min(h.negated().max_entry_diff(g))
    }
}

pub fn iwasawa_decompose(g: &Su11) -> IwasawaFactors {
    // For a_r n_s: α' + β' = e^r, and α' = cosh r + i s e^r.
    let sum = g.alpha + g.beta;
    let r = sum.norm().ln();
    let half_phi = sum.arg();
    let unrot = g.alpha * Complex64::from_polar(1.0, -half_phi);
    let s = unrot.im / r.exp();
    let phi = (2.0 * half_phi).rem_euclid(TAU);
    let phi = if phi >= TAU { 0.0 } else { phi };
    let f = IwasawaFactors { phi, r, s };
    debug_assert!(f.residual(g) < 1e-6 * g.alpha.norm().max(1.0));
    f
}

/// Rotation by `φ` of a disk point.
pub fn rotate(p: DiskPoint, phi: f64) -> DiskPoint {
    let w = p.to_complex() * Complex64::from_polar(1.0, phi);
    DiskPoint { z1: w.re, z2: w.im }
}

/// Element mapping the origin to `p`: `rot_θ a_r` with `p = tanh(r) e^{iθ}`.
pub fn translation_to(p: DiskPoint) -> Su11 {
    let (r, theta) = p.to_polar();
    subgroup_element(Subgroup::K, theta).compose(&subgroup_element(Subgroup::A, r))
}

/// Canonical angle in `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}
