//! Virial and concentration functionals: the localized momentum functional
//! g_R with its derivative identity, the y_R functionals behind the
//! concavity blow-up mechanism, and the exterior energy densities.

use std::sync::Arc;

use crate::dim::Dimension;
use crate::error::DiagnosticsError;
use crate::field::RadialField;
use crate::grid::RadialGrid;
use crate::numerics::{line_fit, tail_log_slope};
use crate::real::Real;

/// Smooth radial cutoff: `phi_R(r) = phi(r/R)` with `phi = 1` on [0,1] and
/// `phi = 0` on [2, inf), glued by a quintic smoothstep (C^2, monotone), and
/// `psi_R(r) = r phi(r/R)`, the radial component of `x phi(x/R)`.
pub struct CutoffPair<S: Real> {
    radius: S,
    phi: Vec<S>,
    psi: Vec<S>,
}

/// The scalar cutoff profile phi(rho).
pub fn smoothstep_cutoff<S: Real>(rho: S) -> S {
    if rho <= S::one() {
        S::one()
    } else if rho >= S::of(2.0) {
        S::zero()
    } else {
        let x = rho - S::one();
        let s = x * x * x * (S::of(10.0) - S::of(15.0) * x + S::of(6.0) * x * x);
        S::one() - s
    }
}

impl<S: Real> CutoffPair<S> {
    pub fn new(grid: &Arc<RadialGrid<S>>, radius: S) -> Self {
        assert!(radius > S::zero());
        let phi: Vec<S> = grid.radii().iter().map(|&r| smoothstep_cutoff(r / radius)).collect();
        let psi: Vec<S> = grid.radii().iter().zip(&phi).map(|(&r, &p)| r * p).collect();
        Self { radius, phi, psi }
    }

    #[inline]
    pub fn radius(&self) -> S {
        self.radius
    }

    #[inline]
    pub fn phi(&self) -> &[S] {
        &self.phi
    }

    #[inline]
    pub fn psi(&self) -> &[S] {
        &self.psi
    }
}

/// `g_R(u, v) = int psi_R d_r u v dx + (N-1)/2 int phi_R u v dx`.
pub fn g_r<S: Real>(u: &RadialField<S>, v: &RadialField<S>, cut: &CutoffPair<S>) -> S {
    let grid = u.grid();
    let du = u.gradient();
    let half_nm1 = S::of((grid.dim().n() as f64 - 1.0) / 2.0);
    let integrand: Vec<S> = (0..grid.len())
        .map(|i| {
            v.values()[i] * (cut.psi[i] * du[i] + half_nm1 * cut.phi[i] * u.values()[i])
        })
        .collect();
    grid.integrate_truncated(&integrand)
}

/// A-priori bound `|g_R| <= C1 R` with
/// `C1 = 2 ||grad u|| ||v|| (1 + (N-1)/(N-2))` (Hardy on the second term).
pub fn g_r_bound_constant<S: Real>(u: &RadialField<S>, v: &RadialField<S>) -> S {
    let n = u.grid().dim().n() as f64;
    S::of(2.0)
        * u.grad_norm_sq().sqrt()
        * v.l2_norm_sq().sqrt()
        * (S::one() + S::of((n - 1.0) / (n - 2.0)))
}

/// `y = int u^2 phi_R dx` and `y' = 2 int u v phi_R dx`; pass `None` for the
/// uncut (global) functionals, which require `u in L^2` (N = 5 for W-like
/// tails; the divergent case is detected from the tail log-slope).
pub fn y_functionals<S: Real>(
    u: &RadialField<S>,
    v: &RadialField<S>,
    cut: Option<&CutoffPair<S>>,
) -> Result<(S, S), DiagnosticsError> {
    let grid = u.grid();
    match cut {
        Some(c) => {
            let y_int: Vec<S> = (0..grid.len())
                .map(|i| u.values()[i] * u.values()[i] * c.phi[i])
                .collect();
            let yp_int: Vec<S> = (0..grid.len())
                .map(|i| S::of(2.0) * u.values()[i] * v.values()[i] * c.phi[i])
                .collect();
            Ok((grid.integrate_truncated(&y_int), grid.integrate_truncated(&yp_int)))
        }
        None => {
            // integrability test: log-slope of u^2 r^(N-1) at the tail
            let m = grid.last();
            let nm1 = (grid.dim().n() - 1) as i32;
            let sup = u.sup_norm();
            if u.values()[m].abs() > S::of(1e-12) * sup.max(S::of(1e-300)) {
                let k = (m / 20).clamp(4, 200);
                let xs: Vec<S> = (m - k..=m).map(|i| grid.r(i)).collect();
                let ys: Vec<S> = (m - k..=m)
                    .map(|i| u.values()[i] * u.values()[i] * grid.r(i).powi(nm1))
                    .collect();
                if let Some(slope) = tail_log_slope(&xs, &ys) {
                    if slope > S::of(-1.05) {
                        return Err(DiagnosticsError::DivergentTail {
                            slope: slope.to_f64_lossy(),
                        });
                    }
                }
            }
            let y_int: Vec<S> = u.values().iter().map(|&x| x * x).collect();
            let yp_int: Vec<S> =
                u.values().iter().zip(v.values()).map(|(&a, &b)| S::of(2.0) * a * b).collect();
            Ok((grid.integrate(&y_int), grid.integrate(&yp_int)))
        }
    }
}

/// Positive density `r(u) = |v|^2 + |grad u|^2 + u^2/|x|^2 + |u|^(2*)`
/// integrated over the exterior `{r >= radius}`.
pub fn exterior_density<S: Real>(u: &RadialField<S>, v: &RadialField<S>, radius: S) -> S {
    let grid = u.grid();
    let dim = grid.dim();
    let p = S::of(dim.critical_exponent());
    let du = u.gradient();
    let nm1 = (dim.n() - 1) as i32;
    let mut acc = S::zero();
    for i in 1..grid.len() {
        let r = grid.r(i);
        if r < radius {
            continue;
        }
        let uu = u.values()[i];
        let dens = v.values()[i] * v.values()[i]
            + du[i] * du[i]
            + uu * uu / (r * r)
            + uu.abs().powf(p);
        acc += grid.trapezoid_weight(i) * dens * r.powi(nm1);
    }
    dim.sphere_area::<S>() * acc
}

/// Exterior densities for a list of radii (nonincreasing in the radius).
pub fn density_report<S: Real>(
    u: &RadialField<S>,
    v: &RadialField<S>,
    radii: &[S],
) -> Vec<(S, S)> {
    radii.iter().map(|&r| (r, exterior_density(u, v, r))).collect()
}

/// One recorded virial sample along a run.
#[derive(Debug, Clone, Copy)]
pub struct VirialSample<S: Real> {
    pub t: S,
    pub g_r: S,
    pub grad_sq: S,
    pub v_sq: S,
    /// Exterior density beyond the cutoff radius.
    pub exterior: S,
}

/// Result of checking the g_R derivative identity along a run.
#[derive(Debug, Clone)]
pub struct VirialCheck<S: Real> {
    /// (t, FD derivative of g_R, main terms, exterior density) per interior sample.
    pub rows: Vec<(S, S, S, S)>,
    /// Worst |FD - main| over the samples.
    pub max_mismatch: S,
    /// Worst |FD - main| / exterior over samples with nonnegligible exterior.
    pub fitted_constant: S,
}

/// Check `g_R'(t) = 1/(N-2) ||v||^2 - 1/(N-2)(||grad W||^2 - ||grad u||^2) + A_R`
/// with `|A_R|` bounded by the exterior density. `gw_ref` must come from the
/// same finite-difference pipeline as the recorded `grad_sq`.
pub fn virial_identity_check<S: Real>(
    samples: &[VirialSample<S>],
    gw_ref: S,
    dim: Dimension,
) -> Result<VirialCheck<S>, DiagnosticsError> {
    if samples.len() < 3 {
        return Err(DiagnosticsError::TooFewSamples { need: 3, got: samples.len() });
    }
    let inv_nm2 = S::one() / S::of(dim.n() as f64 - 2.0);
    let mut rows = Vec::with_capacity(samples.len() - 2);
    let mut max_mismatch = S::zero();
    let mut c_fit = S::zero();
    for i in 1..samples.len() - 1 {
        let dt_f = samples[i + 1].t - samples[i].t;
        let dt_b = samples[i].t - samples[i - 1].t;
        let fd = (samples[i + 1].g_r - samples[i - 1].g_r) / (dt_f + dt_b);
        let main = inv_nm2 * samples[i].v_sq - inv_nm2 * (gw_ref - samples[i].grad_sq);
        let mismatch = (fd - main).abs();
        max_mismatch = max_mismatch.max(mismatch);
        let ext = samples[i].exterior;
        if ext > S::of(1e-14) {
            c_fit = c_fit.max(mismatch / ext);
        }
        rows.push((samples[i].t, fd, main, ext));
    }
    Ok(VirialCheck { rows, max_mismatch, fitted_constant: c_fit })
}

/// Result of the second-derivative identity check on the uncut y (N = 5).
#[derive(Debug, Clone)]
pub struct YppCheck<S: Real> {
    /// Max relative mismatch between the FD second derivative and the identity.
    pub max_rel_mismatch: S,
    /// Whether `y'' >= d(t)` held at every interior sample.
    pub concavity_bound_holds: bool,
}

/// Check `y'' = 4 (N-1)/(N-2) ||v||^2 + 4/(N-2) (||grad u||^2 - ||grad W||^2)`
/// against a finite-difference second derivative, and `y'' >= d(t)`.
pub fn ypp_identity_check<S: Real>(
    ts: &[S],
    ys: &[S],
    grad_sqs: &[S],
    v_sqs: &[S],
    ds: &[S],
    gw_ref: S,
    dim: Dimension,
) -> Result<YppCheck<S>, DiagnosticsError> {
    let n = ts.len();
    if n < 3 {
        return Err(DiagnosticsError::TooFewSamples { need: 3, got: n });
    }
    let nn = dim.n() as f64;
    let c1 = S::of(4.0 * (nn - 1.0) / (nn - 2.0));
    let c2 = S::of(4.0 / (nn - 2.0));
    let mut max_rel = S::zero();
    let mut holds = true;
    let mut scale = S::zero();
    for i in 1..n - 1 {
        let ident = c1 * v_sqs[i] + c2 * (grad_sqs[i] - gw_ref);
        scale = scale.max(ident.abs());
    }
    for i in 1..n - 1 {
        let dt = ts[i + 1] - ts[i];
        let ypp = (ys[i + 1] - S::of(2.0) * ys[i] + ys[i - 1]) / (dt * dt);
        let ident = c1 * v_sqs[i] + c2 * (grad_sqs[i] - gw_ref);
        let rel = (ypp - ident).abs() / scale.max(S::of(1e-300));
        max_rel = max_rel.max(rel);
        if ypp < ds[i] - S::of(1e-6) * scale.max(S::one()) {
            holds = false;
        }
    }
    Ok(YppCheck { max_rel_mismatch: max_rel, concavity_bound_holds: holds })
}

/// Report of the concavity blow-up monitor on a localized y_R record.
#[derive(Debug, Clone)]
pub struct ConcavityReport<S: Real> {
    /// First sample time at which the differential-inequality mechanism is
    /// active: main terms positive, `y_R' < 0`, `y_R''` positive.
    pub activation_time: Option<S>,
    /// Fitted constant: `max(0, main - y_R'') * R^(N-2)` over the run.
    pub fitted_c0: S,
}

/// Corroborating monitor for the concavity blow-up mechanism. Never triggers
/// the blow-up label; it reports when the localized concavity argument is
/// visibly driving the collapse.
pub fn concavity_blowup_monitor<S: Real>(
    ts: &[S],
    y_rs: &[S],
    yp_rs: &[S],
    grad_sqs: &[S],
    v_sqs: &[S],
    gw_ref: S,
    dim: Dimension,
    radius: S,
) -> Result<ConcavityReport<S>, DiagnosticsError> {
    let n = ts.len();
    if n < 3 {
        return Err(DiagnosticsError::TooFewSamples { need: 3, got: n });
    }
    let nn = dim.n() as f64;
    let c1 = S::of(4.0 * (nn - 1.0) / (nn - 2.0));
    let c2 = S::of(4.0 / (nn - 2.0));
    let rpow = radius.powf(S::of(nn - 2.0));
    let mut activation = None;
    let mut c0 = S::zero();
    for i in 1..n - 1 {
        let dt = ts[i + 1] - ts[i];
        let ypp = (y_rs[i + 1] - S::of(2.0) * y_rs[i] + y_rs[i - 1]) / (dt * dt);
        let main = c1 * v_sqs[i] + c2 * (grad_sqs[i] - gw_ref);
        c0 = c0.max((main - ypp).max(S::zero()) * rpow);
        if activation.is_none() && main > S::zero() && yp_rs[i] < S::zero() && ypp > S::zero() {
            activation = Some(ts[i]);
        }
    }
    Ok(ConcavityReport { activation_time: activation, fitted_c0: c0 })
}

/// Least-squares decay rate of a positive series (ln y against t).
pub fn decay_rate<S: Real>(ts: &[S], vals: &[S], floor: S) -> Option<S> {
    let pts: Vec<(S, S)> = ts
        .iter()
        .zip(vals)
        .filter(|(_, &v)| v.abs() > floor)
        .map(|(&t, &v)| (t, v.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let xs: Vec<S> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<S> = pts.iter().map(|p| p.1).collect();
    Some(-line_fit(&xs, &ys).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::w_field;

    fn grid() -> Arc<RadialGrid<f64>> {
        RadialGrid::new(Dimension::Three, 0.02, 120.0)
    }

    #[test]
    fn cutoff_shape() {
        let g = grid();
        let cut = CutoffPair::new(&g, 10.0);
        for (i, &r) in g.radii().iter().enumerate() {
            let p = cut.phi()[i];
            assert!((0.0..=1.0).contains(&p));
            if r <= 10.0 {
                assert_eq!(p, 1.0);
            }
            if r >= 20.0 {
                assert_eq!(p, 0.0);
            }
            assert!(cut.psi()[i].abs() <= 2.0 * 10.0 + 1e-12);
        }
        // monotone
        let mut prev = 1.0;
        for &p in cut.phi() {
            assert!(p <= prev + 1e-15);
            prev = p;
        }
    }

    #[test]
    fn g_r_examples() {
        let g = grid();
        let w = w_field(&g);
        let zero = RadialField::zeros(&g);
        let cut = CutoffPair::new(&g, 10.0);
        assert_eq!(g_r(&w, &zero, &cut), 0.0);
        // antisymmetry in v and the C1 R bound
        let v = RadialField::from_fn(&g, |r| 0.4 * (-(r - 1.5f64).powi(2)).exp());
        let plus = g_r(&w, &v, &cut);
        let minus = g_r(&w, &v.map(|x| -x), &cut);
        assert!((plus + minus).abs() < 1e-14);
        let c1 = g_r_bound_constant(&w, &v);
        for &radius in &[2.0, 5.0, 10.0, 30.0] {
            let cut = CutoffPair::new(&g, radius);
            assert!(g_r(&w, &v, &cut).abs() <= c1 * radius, "R={radius}");
        }
    }

    #[test]
    fn g_r_insensitive_to_cutoff_beyond_support() {
        // compactly supported state: g_R must not depend on the smoothstep
        // once phi = 1 on the support
        let g = grid();
        let u = RadialField::from_fn(&g, |r| (-(r - 2.0f64).powi(2) * 2.0).exp());
        let v = RadialField::from_fn(&g, |r| 0.3 * (-(r - 1.0f64).powi(2) * 2.0).exp());
        let a = g_r(&u, &v, &CutoffPair::new(&g, 40.0));
        let b = g_r(&u, &v, &CutoffPair::new(&g, 55.0));
        assert!((a - b).abs() < 1e-10 * a.abs().max(1e-3), "{a} vs {b}");
    }

    #[test]
    fn y_divergence_detection() {
        let g = grid();
        let w = w_field(&g);
        let zero = RadialField::zeros(&g);
        // N = 3 W-like tail: divergent
        let err = y_functionals(&w, &zero, None);
        assert!(matches!(err, Err(DiagnosticsError::DivergentTail { .. })));
        // N = 5: finite, y' = 0
        let g5 = RadialGrid::new(Dimension::Five, 0.02, 120.0);
        let w5 = w_field(&g5);
        let z5 = RadialField::zeros(&g5);
        let (y, yp): (f64, f64) = y_functionals(&w5, &z5, None).unwrap();
        assert!(y.is_finite() && y > 0.0);
        assert_eq!(yp, 0.0);
        // localized version works in any dimension
        let cut = CutoffPair::new(&g, 5.0);
        let (yc, _) = y_functionals(&w, &zero, Some(&cut)).unwrap();
        assert!(yc > 0.0);
    }

    #[test]
    fn cauchy_schwarz_on_y() {
        let g5 = RadialGrid::new(Dimension::Five, 0.05, 80.0);
        let u = w_field(&g5);
        let v = RadialField::from_fn(&g5, |r| 0.2 * (-(r - 1.0f64).powi(2)).exp());
        let (y, yp) = y_functionals(&u, &v, None).unwrap();
        let v2 = v.l2_norm_sq();
        assert!(yp * yp <= 4.0 * y * v2 * (1.0 + 1e-12));
    }

    #[test]
    fn exterior_density_monotone() {
        let g = grid();
        let w = w_field(&g);
        let v = RadialField::from_fn(&g, |r| 0.1 * (-(r - 3.0f64).powi(2)).exp());
        let report = density_report(&w, &v, &[1.0, 2.0, 5.0, 10.0, 20.0, 50.0]);
        for pair in report.windows(2) {
            assert!(pair[0].1 >= pair[1].1, "not monotone: {:?}", report);
            assert!(pair[0].1 >= 0.0);
        }
    }

    #[test]
    fn stationary_virial_identity_is_zero() {
        // For (W_{lambda0}, 0): g_R = 0 for all t and the main terms vanish by
        // scale invariance of the gradient norm, so A_R = 0.
        let g = grid();
        let w = w_field(&g);
        let zero = RadialField::zeros(&g);
        let (wl, _) = crate::ground_state::apply_symmetry(
            &w,
            &zero,
            crate::ground_state::SymmetryAction::new(1.5, true),
        )
        .unwrap();
        let gw_fd = crate::ground_state::grad_norm_sq_w_fd(&g);
        let cut = CutoffPair::new(&g, 8.0);
        let samples: Vec<VirialSample<f64>> = (0..5)
            .map(|i| VirialSample {
                t: i as f64 * 0.1,
                g_r: g_r(&wl, &zero, &cut),
                grad_sq: wl.grad_norm_sq(),
                v_sq: 0.0,
                exterior: exterior_density(&wl, &zero, 8.0),
            })
            .collect();
        let check = virial_identity_check(&samples, gw_fd, Dimension::Three).unwrap();
        // g_R identically 0, main terms = scale-invariance defect of the
        // discretized gradient norm (O(dr^2))
        assert!(check.max_mismatch < 5e-4, "mismatch {:e}", check.max_mismatch);
    }
}
