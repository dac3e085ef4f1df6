use crate::error::{LabError, Result};
use crate::profile::PhiProfile;
use crate::quad::{Adaptive, GaussLegendre};
use crate::real::Real;

/// `Λ_δ` of an affine function of the given slope on an interval of length `len`,
/// through the one-dimensional reduction `2 ∫_0^L (L - s) φ_δ(|slope| s) s^{-(p+1)} ds`.
pub fn lambda_affine_1d<T: Real>(slope: T, len: T, delta: T, profile: &PhiProfile<T>) -> Result<T> {
    if !(delta > T::zero()) {
        return Err(LabError::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    if !(len > T::zero()) {
        return Err(LabError::InvalidParameter(format!("length must be positive, got {len}")));
    }
    if slope == T::zero() {
        return Ok(T::zero());
    }
    let p = profile.p();
    let k = slope.abs() / delta;
    let mut pts: Vec<T> = profile.breakpoints().map(|t| t / k).collect();
    let grid = crate::quad::breakpoints(T::zero(), len, &mut pts);
    let rule = GaussLegendre::<T>::new(15);
    let quad = Adaptive::new(&rule, T::lit(1e-12), T::lit(1e-300), 80);
    let r = quad.integrate_split(
        |s: T| (len - s) * profile.eval(k * s) * s.powf(-(p + T::one())),
        &grid,
    );
    if !r.converged || !r.value.is_finite() {
        return Err(LabError::QuadratureFailure(format!(
            "affine reduction did not converge (value {}, error {})",
            r.value, r.error
        )));
    }
    Ok(T::lit(2.0) * delta.powf(p) * r.value)
}
