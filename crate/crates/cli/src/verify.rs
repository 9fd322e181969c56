//! Numerical verification of threshold families.

use okra_core::thresholds::{
    necessary_condition_residuals, psi_star, verify_sufficient_ode, ThresholdFamily, Variant,
};
use okra_core::{OkraError, Result, Setup};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub theta: f64,
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub family: String,
    /// Multiplier applied to the family's ratio before checking (1 = as
    /// designed).
    pub alpha_scale: f64,
    pub grid_points: usize,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

fn check(out: &mut Vec<Check>, theta: f64, name: &'static str, value: f64, tolerance: f64) {
    out.push(Check { theta, name, value, tolerance, pass: value.is_finite() && value <= tolerance });
}

/// Checks every `theta` with a unit-capacity, `L = 1` setup:
///
/// * `monotone`: largest decrease of `phi` between grid points;
/// * `boundary`: relative mismatch of the boundary values;
/// * `ode`: largest violation of the sufficient condition (and of
///   `phi(C) >= U`) with the claimed ratio;
/// * `ode_equality`: largest absolute residual, which is zero for the
///   designed families;
///
/// plus, for the one-way trading family, the utilisation function `psi*`:
/// its end values, the necessary condition holding with equality, and
/// `phi(psi*(p)) = p` on the rising part.
pub fn verify(variant: &Variant, thetas: &[f64], alpha_scale: f64, grid_points: usize) -> Result<VerifyReport> {
    if thetas.is_empty() {
        return Err(OkraError::Invalid("empty theta grid".into()));
    }
    if grid_points < 2 {
        return Err(OkraError::Invalid("grid needs at least two points".into()));
    }
    let mut checks = Vec::new();
    for &theta in thetas {
        let setup = Setup::single(1.0, 1.0, theta);
        let designed = ThresholdFamily::build(variant.clone(), &setup)?;
        let fam = designed.with_claimed_alpha(designed.alpha * alpha_scale);
        let (u, c) = (setup.u, 1.0);
        let n = grid_points;
        let mut drop = 0.0f64;
        let mut prev = fam.phi(0, 0.0);
        for i in 1..=n {
            let p = fam.phi(0, c * i as f64 / n as f64);
            drop = drop.max(prev - p);
            prev = p;
        }
        check(&mut checks, theta, "monotone", drop, 1e-12 * u);
        let ode = verify_sufficient_ode(&fam, 0, grid_points);
        check(&mut checks, theta, "boundary", ode.boundary_mismatch, 1e-9);
        check(&mut checks, theta, "ode", ode.max_residual(), 1e-6 * u * c);
        check(&mut checks, theta, "ode_equality", ode.max_equality_residual, 1e-6 * u * c);
        if matches!(variant, Variant::Got) {
            let alpha = fam.alpha;
            let ends = (psi_star(&setup, setup.l) - c / designed.alpha)
                .abs()
                .max((psi_star(&setup, u) - c).abs());
            check(&mut checks, theta, "psi_endpoints", ends, 1e-12);
            let (shortfall, abs) =
                necessary_condition_residuals(|p| psi_star(&setup, p), &setup, alpha, grid_points.max(100_000));
            check(&mut checks, theta, "necessary", shortfall, 1e-6 * u * c);
            check(&mut checks, theta, "necessary_equality", abs, 1e-6 * u * c);
            let mut inv = 0.0f64;
            for i in 1..=n {
                let p = setup.l + (u - setup.l) * i as f64 / n as f64;
                inv = inv.max((designed.phi(0, psi_star(&setup, p)) - p).abs() / p);
            }
            check(&mut checks, theta, "inverse", inv, 1e-9);
        }
    }
    let passed = checks.iter().all(|c| c.pass);
    Ok(VerifyReport { family: variant.name().to_string(), alpha_scale, grid_points, checks, passed })
}
