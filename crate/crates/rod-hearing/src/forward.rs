//! Forward problem: the first N positive eigenvalues of a configuration.
//!
//! Roots are located by scanning in `beta = sqrt(s)`, where consecutive roots
//! approach a spacing of pi, then refined per bracket: bisection first for
//! robustness, then a secant step loop for the remaining digits.

use crate::beam::FasteningConfig;
use crate::charfn::char_det_normalized;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Root-scan options. Defaults cover any first-9 request at desk scale.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverOpts {
    /// Scan step in `beta = sqrt(s)`; roots are quasi-uniform with spacing
    /// about pi, so pi/40 cannot skip a pair of well-separated simple roots.
    pub scan_step_beta: f64,
    /// Scan ceiling in beta (s up to ceiling^2).
    pub beta_ceiling: f64,
    /// Bracket width at which bisection hands over to secant refinement.
    pub bisect_width: f64,
    /// Relative tolerance on the final bracket width in beta.
    pub rtol: f64,
    /// Residual bound on the normalized determinant at an accepted root.
    pub residual_tol: f64,
    /// Normalized-determinant magnitude below which a local minimum without a
    /// sign change is flagged as a suspected double root.
    pub dip_tol: f64,
}

impl Default for SolverOpts {
    fn default() -> Self {
        Self {
            scan_step_beta: std::f64::consts::PI / 40.0,
            beta_ceiling: 400.0,
            bisect_width: 1e-3,
            rtol: 1e-13,
            residual_tol: 1e-10,
            dip_tol: 1e-6,
        }
    }
}

/// Ordered positive eigenvalues with per-root residuals of the scaled
/// determinant, plus scan diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `s` locations where |det| dipped below `dip_tol` without a sign change;
    /// possible double roots, reported rather than silently accepted.
    pub suspected_double_roots: Vec<f64>,
}

/// Physical rod parameters for converting between angular frequency and the
/// dimensionless spectral parameter: `s = l^2 omega sqrt(rho F / alpha)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Flexural rigidity (force * length^2).
    pub alpha: f64,
    /// Density (mass / length^3).
    pub rho: f64,
    /// Cross-section area (length^2).
    pub f_area: f64,
    /// Rod length.
    pub length: f64,
}

impl MaterialParams {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("rho", self.rho),
            ("F", self.f_area),
            ("l", self.length),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!(
                    "material parameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Dimensionless spectral parameter of an angular frequency.
pub fn omega_to_s(omega: f64, p: &MaterialParams) -> Result<f64> {
    p.validate()?;
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::Domain(format!(
            "angular frequency must be positive, got {omega}"
        )));
    }
    Ok(p.length * p.length * omega * (p.rho * p.f_area / p.alpha).sqrt())
}

/// Angular frequency of a dimensionless spectral parameter.
pub fn s_to_omega(s: f64, p: &MaterialParams) -> Result<f64> {
    p.validate()?;
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!(
            "spectral parameter must be positive, got {s}"
        )));
    }
    Ok(s / (p.length * p.length) * (p.alpha / (p.rho * p.f_area)).sqrt())
}

/// First `n` positive roots of the characteristic determinant, each bracketed
/// by a sign change of the normalized determinant and refined until the
/// bracket width drops below `rtol * beta`.
pub fn forward_spectrum(config: &FasteningConfig, n: usize, opts: &SolverOpts) -> Result<Spectrum> {
    if n == 0 {
        return Err(Error::Domain("requested eigenvalue count is zero".into()));
    }
    let f = |beta: f64| char_det_normalized(config, beta * beta);

    let mut values = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    let mut suspected = Vec::new();

    let h = opts.scan_step_beta;
    let mut b_prev = 1e-3;
    let mut f_prev = f(b_prev)?;
    // window of |f| samples for dip detection
    let mut window: [(f64, f64); 3] = [(b_prev, f_prev); 3];
    let mut k = 1usize;
    while values.len() < n {
        let b = 1e-3 + k as f64 * h;
        if b > opts.beta_ceiling {
            return Err(Error::ScanExhausted {
                found: values.len(),
                requested: n,
                beta_ceiling: opts.beta_ceiling,
            });
        }
        let fv = f(b)?;
        if fv == 0.0 {
            // landed exactly on a root
            values.push(b * b);
            residuals.push(0.0);
        } else if f_prev != 0.0 && fv.signum() != f_prev.signum() {
            let root_beta = refine_root(&f, b_prev, b, f_prev, fv, opts)?;
            let resid = f(root_beta)?.abs();
            values.push(root_beta * root_beta);
            residuals.push(resid);
        } else {
            // local |f| minimum below dip_tol with equal signs on both sides
            window = [window[1], window[2], (b, fv)];
            let (_, f0) = window[0];
            let (b1, f1) = window[1];
            let (_, f2) = window[2];
            if k >= 2
                && f1.abs() < opts.dip_tol
                && f1.abs() < f0.abs()
                && f1.abs() < f2.abs()
                && f0.signum() == f2.signum()
            {
                suspected.push(b1 * b1);
            }
        }
        window = [window[1], window[2], (b, fv)];
        b_prev = b;
        f_prev = fv;
        k += 1;
    }
    Ok(Spectrum {
        values,
        residuals,
        suspected_double_roots: suspected,
    })
}

// Bisection down to `bisect_width`, then secant steps with bracket fallback.
fn refine_root<F>(f: &F, mut lo: f64, mut hi: f64, mut flo: f64, mut fhi: f64, opts: &SolverOpts) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    while hi - lo > opts.bisect_width {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    // secant within the bracket; fall back to bisection when the proposal
    // leaves the interval or stalls
    for _ in 0..200 {
        if hi - lo <= opts.rtol * hi.abs() {
            break;
        }
        let denom = fhi - flo;
        let mut next = if denom != 0.0 {
            hi - fhi * (hi - lo) / denom
        } else {
            0.5 * (lo + hi)
        };
        let margin = 0.01 * (hi - lo);
        if !(next > lo + margin && next < hi - margin) {
            next = 0.5 * (lo + hi);
        }
        let fn_ = f(next)?;
        if fn_ == 0.0 {
            return Ok(next);
        }
        if fn_.signum() == flo.signum() {
            lo = next;
            flo = fn_;
        } else {
            hi = next;
            fhi = fn_;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::{dual_of, FasteningConfig};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn config(a: [f64; 8]) -> FasteningConfig {
        FasteningConfig::from_coefficients(&a).unwrap()
    }

    #[test]
    fn pinned_pinned_closed_form() {
        let c = config([1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let sp = forward_spectrum(&c, 3, &SolverOpts::default()).unwrap();
        for (i, v) in sp.values.iter().enumerate() {
            let expected = ((i + 1) as f64 * PI).powi(2);
            assert_relative_eq!(v, &expected, max_relative = 1e-11);
        }
    }

    #[test]
    fn clamped_pinned_paper_values() {
        let c = config([1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let sp = forward_spectrum(&c, 2, &SolverOpts::default()).unwrap();
        assert_relative_eq!(sp.values[0], 15.4182057169801, max_relative = 1e-11);
        assert_relative_eq!(sp.values[1], 49.9648620318002, max_relative = 1e-11);
        assert!(sp.residuals.iter().all(|r| *r < 1e-10));
    }

    #[test]
    fn residuals_below_tolerance() {
        let c = config([1.0, 2.0, 1.0, 1.0, 3.0, 4.0, 1.0, 1.0]);
        let sp = forward_spectrum(&c, 9, &SolverOpts::default()).unwrap();
        assert_eq!(sp.values.len(), 9);
        assert!(sp.values.windows(2).all(|w| w[0] < w[1]));
        assert!(sp.residuals.iter().all(|r| *r < 1e-10));
    }

    #[test]
    fn duality_spectrum_equality() {
        let c = config([0.9, 0.31, 0.72, 0.44, 0.15, 0.8, 0.63, 0.27]);
        let d = dual_of(&c);
        let a = forward_spectrum(&c, 6, &SolverOpts::default()).unwrap();
        let b = forward_spectrum(&d, 6, &SolverOpts::default()).unwrap();
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert_relative_eq!(x, y, max_relative = 1e-10);
        }
    }

    #[test]
    fn row_scaling_leaves_spectrum() {
        let base = config([1.0, 2.0, 1.0, 1.0, 3.0, 4.0, 1.0, 1.0]);
        let scaled = config([2.5, 2.0, 1.0, 2.5, 3.0, 4.0, 1.0, 1.0]);
        let a = forward_spectrum(&base, 5, &SolverOpts::default()).unwrap();
        let b = forward_spectrum(&scaled, 5, &SolverOpts::default()).unwrap();
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert_relative_eq!(x, y, max_relative = 1e-12);
        }
    }

    #[test]
    fn asymptotic_root_spacing() {
        let c = config([1.0, 2.0, 1.0, 1.0, 3.0, 4.0, 1.0, 1.0]);
        let sp = forward_spectrum(&c, 9, &SolverOpts::default()).unwrap();
        let b8 = sp.values[7].sqrt();
        let b9 = sp.values[8].sqrt();
        assert!(((b9 - b8) - PI).abs() < 0.2 * PI, "spacing {}", b9 - b8);
    }

    #[test]
    fn scan_exhausted_reported() {
        let c = config([1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let opts = SolverOpts {
            beta_ceiling: 7.0, // only two pinned-pinned roots below beta = 7
            ..SolverOpts::default()
        };
        match forward_spectrum(&c, 9, &opts) {
            Err(Error::ScanExhausted { found, requested, .. }) => {
                assert_eq!(found, 2);
                assert_eq!(requested, 9);
            }
            other => panic!("expected ScanExhausted, got {other:?}"),
        }
    }

    #[test]
    fn unit_conversion_round_trip() {
        let p = MaterialParams {
            alpha: 3.7,
            rho: 1.9,
            f_area: 0.04,
            length: 1.6,
        };
        let omega = 81.3;
        let s = omega_to_s(omega, &p).unwrap();
        assert_relative_eq!(s_to_omega(s, &p).unwrap(), omega, max_relative = 1e-14);
        // doubling the length quadruples s
        let p2 = MaterialParams {
            length: 2.0 * p.length,
            ..p
        };
        assert_relative_eq!(
            omega_to_s(omega, &p2).unwrap(),
            4.0 * s,
            max_relative = 1e-14
        );
    }

    #[test]
    fn unit_params_identity_scaling() {
        let p = MaterialParams {
            alpha: 1.0,
            rho: 1.0,
            f_area: 1.0,
            length: 1.0,
        };
        assert_relative_eq!(omega_to_s(15.4182, &p).unwrap(), 15.4182);
        assert_relative_eq!(s_to_omega(PI * PI, &p).unwrap(), PI * PI);
    }

    #[test]
    fn conversion_domain_errors() {
        let p = MaterialParams {
            alpha: 1.0,
            rho: 1.0,
            f_area: 1.0,
            length: 1.0,
        };
        assert!(omega_to_s(0.0, &p).is_err());
        assert!(s_to_omega(-2.0, &p).is_err());
        let bad = MaterialParams { alpha: 0.0, ..p };
        assert!(omega_to_s(1.0, &bad).is_err());
    }
}
