//! Scalar constitutive laws of the damage/fatigue model.
//!
//! Strains and strain rates are carried in Voigt form `[xx, yy, 2xy]`
//! (engineering shear), so that `eᵀ C e` is the tensor contraction `E : C : E`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Plane-stress elasticity tensor in Voigt form.
pub type Elasticity = [[f64; 3]; 3];

/// Voigt strain (or strain-rate) vector `[xx, yy, 2xy]`.
pub type Voigt = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Young modulus (Pa).
    pub e: f64,
    /// Poisson ratio.
    pub nu: f64,
    /// Density (kg/m³).
    pub rho: f64,
    /// Viscous damping (N·s/m²).
    pub b: f64,
    /// Fatigue rate coefficient (m²).
    pub a: f64,
    /// Phase-field layer width (m).
    pub gamma: f64,
    /// Griffith energy (N/m).
    pub gc: f64,
    /// Damage rate coefficient (m/(N·s)).
    pub c: f64,
    /// Exponent of the damage-rate law.
    pub sigma_exp: f64,
    /// Regularization of the damage-rate law and the potential penalty slope.
    pub delta: f64,
    /// Plane-stress thickness (m).
    pub h: f64,
}

impl Default for MaterialParams {
    /// Steel-like material with the case-1 damage parameters.
    fn default() -> Self {
        Self {
            e: 160e9,
            nu: 0.3,
            rho: 7800.0,
            b: 1e8,
            a: 5e-7,
            gamma: 3e-4,
            gc: 2700.0,
            c: 2e-6,
            sigma_exp: 1.0,
            delta: 1e-3,
            h: 5e-3,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("E", self.e),
            ("rho", self.rho),
            ("gamma", self.gamma),
            ("gc", self.gc),
            ("sigma_exp", self.sigma_exp),
            ("delta", self.delta),
            ("h", self.h),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be positive, got {value}")));
            }
        }
        // c = 0 switches damage evolution off, which the elastic checks rely on.
        for (name, value) in [("a", self.a), ("b", self.b), ("c", self.c)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be non-negative, got {value}")));
            }
        }
        if !(self.nu > 0.0 && self.nu < 0.5) {
            return Err(Error::Parameter(format!("nu must lie in (0, 0.5), got {}", self.nu)));
        }
        Ok(())
    }

    pub fn elasticity(&self) -> Elasticity {
        plane_stress(self.e, self.nu)
    }
}

/// Plane-stress elasticity tensor for Young modulus `e` and Poisson ratio `nu`.
pub fn elasticity_tensor(e: f64, nu: f64) -> Result<Elasticity> {
    if !(nu < 0.5 && nu > -1.0) {
        return Err(Error::Parameter(format!("Poisson ratio {nu} outside (-1, 0.5)")));
    }
    if !(e > 0.0) {
        return Err(Error::Parameter(format!("Young modulus {e} must be positive")));
    }
    Ok(plane_stress(e, nu))
}

fn plane_stress(e: f64, nu: f64) -> Elasticity {
    let s = e / (1.0 - nu * nu);
    [
        [s, nu * s, 0.0],
        [nu * s, s, 0.0],
        [0.0, 0.0, s * (1.0 - nu) / 2.0],
    ]
}

/// `(1 - φ)²`.
#[inline]
pub fn degradation(phi: f64) -> f64 {
    (1.0 - phi) * (1.0 - phi)
}

/// Damage potential: quadratic on `[0, 1]`, linear penalty branches outside.
#[inline]
pub fn potential_h(phi: f64, delta: f64) -> f64 {
    if phi > 1.0 {
        0.5 + delta * (phi - 1.0)
    } else if phi < 0.0 {
        -delta * phi
    } else {
        0.5 * phi * phi
    }
}

#[inline]
pub fn potential_h_prime(phi: f64, delta: f64) -> f64 {
    if phi > 1.0 {
        delta
    } else if phi < 0.0 {
        -delta
    } else {
        phi
    }
}

/// Fatigue potential: `-φ` on `[0, 1]`, saturated at `-1` above and `0` below.
#[inline]
pub fn potential_hf(phi: f64) -> f64 {
    if phi > 1.0 {
        -1.0
    } else if phi < 0.0 {
        0.0
    } else {
        -phi
    }
}

#[inline]
pub fn potential_hf_prime(phi: f64) -> f64 {
    if (0.0..=1.0).contains(&phi) {
        -1.0
    } else {
        0.0
    }
}

/// Damage mobility `1/λ = c / (1 + δ - φ)^ς`, with φ clamped to `[0, 1]`.
#[inline]
pub fn inverse_lambda(phi: f64, c: f64, delta: f64, sigma_exp: f64) -> f64 {
    let phi = phi.clamp(0.0, 1.0);
    let base = 1.0 + delta - phi;
    if sigma_exp == 1.0 {
        c / base
    } else {
        c / base.powf(sigma_exp)
    }
}

/// `Eᵀ C E` for a Voigt strain.
#[inline]
pub fn strain_energy_density2(cmat: &Elasticity, strain: &Voigt) -> f64 {
    let stress = stress(cmat, strain);
    stress[0] * strain[0] + stress[1] * strain[1] + stress[2] * strain[2]
}

#[inline]
pub fn stress(cmat: &Elasticity, strain: &Voigt) -> Voigt {
    let mut s = [0.0; 3];
    for (i, row) in cmat.iter().enumerate() {
        s[i] = row[0] * strain[0] + row[1] * strain[1] + row[2] * strain[2];
    }
    s
}

/// Fatigue source `a (1 - φ) |(C E + b D) : D|`.
///
/// φ is clamped to `[0, 1]` so the source stays non-negative when the
/// damage field overshoots numerically.
pub fn fatigue_source(
    strain: &Voigt,
    strain_rate: &Voigt,
    phi: f64,
    cmat: &Elasticity,
    a: f64,
    b: f64,
) -> f64 {
    let sigma = stress(cmat, strain);
    let d = strain_rate;
    // Voigt shear entries hold 2·D12, hence the halved viscous shear term.
    let elastic_power = sigma[0] * d[0] + sigma[1] * d[1] + sigma[2] * d[2];
    let viscous_power = b * (d[0] * d[0] + d[1] * d[1] + 0.5 * d[2] * d[2]);
    a * (1.0 - phi.clamp(0.0, 1.0)) * (elastic_power + viscous_power).abs()
}
