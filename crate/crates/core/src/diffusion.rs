//! Closed-form diffusion solutions for a point source in an infinite medium.
//!
//! The diffusion description of the transport problem reads
//! `-(<s^2> / 6 <s>) lap phi_0 + ((1 - c) / <s>) phi_0 = Q`. Eliminating the
//! emission density between this equation and `S = c phi_0 / <s> + Q` turns
//! the collision-rate density `f = phi_0 / <s>` into a screened-Poisson
//! problem `-lap f + kappa^2 f = lambda^2 Q` with `lambda^2 = 6 / <s^2>` and
//! `kappa = lambda sqrt(1 - c)`, whose point-source solution is available in
//! closed form. These functions are the analytic ground truth against which
//! the Monte Carlo and integral-equation routes are checked; they share no
//! code with either solver.

use crate::error::Error;

/// Parameters of the diffusion description of a medium.
///
/// `mean_free_path` is supplied by the caller rather than derived from
/// `mean_square_free_path`: the surrogate law's first moment and the true
/// medium value differ in general, and the two must never be silently
/// interchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionParams {
    pub mean_free_path: f64,
    pub mean_square_free_path: f64,
    pub scattering_ratio: f64,
}

impl DiffusionParams {
    pub fn new(
        mean_free_path: f64,
        mean_square_free_path: f64,
        scattering_ratio: f64,
    ) -> Result<Self, Error> {
        if !(mean_free_path > 0.0) {
            return Err(Error::domain(format!(
                "mean free path must be positive, got {mean_free_path}"
            )));
        }
        if !(mean_square_free_path > 0.0) {
            return Err(Error::domain(format!(
                "mean squared free path must be positive, got {mean_square_free_path}"
            )));
        }
        if !(0.0..1.0).contains(&scattering_ratio) {
            return Err(Error::domain(format!(
                "scattering ratio must lie in [0, 1), got {scattering_ratio}"
            )));
        }
        Ok(DiffusionParams {
            mean_free_path,
            mean_square_free_path,
            scattering_ratio,
        })
    }

    /// `lambda = sqrt(6 / <s^2>)`; same arithmetic as the diffusion-matched
    /// path-length law, so the two agree bit for bit.
    pub fn lambda(&self) -> f64 {
        (6.0 / self.mean_square_free_path).sqrt()
    }

    /// Screening rate `kappa = lambda sqrt(1 - c)`; `kappa < lambda` for
    /// every `c > 0`.
    pub fn kappa(&self) -> f64 {
        self.lambda() * (1.0 - self.scattering_ratio).sqrt()
    }

    /// Diffusion coefficient `<s^2> / (6 <s>)`.
    pub fn diffusion_coefficient(&self) -> f64 {
        self.mean_square_free_path / (6.0 * self.mean_free_path)
    }
}

/// Green's function of `-lap + lambda^2` in free space:
/// `G(r) = e^{-lambda r} / (4 pi r)`.
pub fn greens_function(lambda: f64, r: f64) -> Result<f64, Error> {
    if !(r > 0.0) {
        return Err(Error::domain(format!(
            "greens_function requires r > 0, got {r}"
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::domain(format!(
            "greens_function requires lambda >= 0, got {lambda}"
        )));
    }
    Ok((-lambda * r).exp() / (4.0 * std::f64::consts::PI * r))
}

/// Collision-rate density of a point isotropic source:
/// `f(r) = strength lambda^2 e^{-kappa r} / (4 pi r)`.
pub fn point_source_collision_density(
    params: &DiffusionParams,
    strength: f64,
    r: f64,
) -> Result<f64, Error> {
    let lambda = params.lambda();
    Ok(strength * lambda * lambda * greens_function(params.kappa(), r)?)
}

/// Scalar flux `phi_0(r) = <s> f(r)` with the caller-chosen mean free path.
pub fn point_source_scalar_flux(
    params: &DiffusionParams,
    strength: f64,
    r: f64,
) -> Result<f64, Error> {
    Ok(params.mean_free_path * point_source_collision_density(params, strength, r)?)
}

/// Exact volume average of the collision density over the shell
/// `[r_lo, r_hi]`. This is what a shell-binned Monte Carlo tally estimates,
/// so comparisons against it carry no binning bias.
pub fn shell_averaged_collision_density(
    params: &DiffusionParams,
    strength: f64,
    r_lo: f64,
    r_hi: f64,
) -> Result<f64, Error> {
    if !(0.0 <= r_lo && r_lo < r_hi) {
        return Err(Error::domain(format!(
            "shell average requires 0 <= r_lo < r_hi, got [{r_lo}, {r_hi}]"
        )));
    }
    let lambda = params.lambda();
    let kappa = params.kappa();
    // int 4 pi r^2 f dr = strength lambda^2 int r e^{-kappa r} dr, with
    // antiderivative -e^{-kappa r} (r / kappa + 1 / kappa^2).
    let anti = |r: f64| -(-kappa * r).exp() * (r / kappa + 1.0 / (kappa * kappa));
    let integral = strength * lambda * lambda * (anti(r_hi) - anti(r_lo));
    let volume = 4.0 * std::f64::consts::PI / 3.0 * (r_hi.powi(3) - r_lo.powi(3));
    Ok(integral / volume)
}
