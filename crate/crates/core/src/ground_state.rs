//! The Aubin-Talenti ground state W, its symmetry family, the energy, and the
//! distance functional that measures departure from W.
//!
//! W(r) = (1 + r^2/(N(N-2)))^(-(N-2)/2) solves  Delta W + W^((N+2)/(N-2)) = 0
//! and extremizes the Sobolev inequality. Its gradient norm is the threshold
//! constant of the whole problem: E(W, 0) = ||grad W||_2^2 / N.

use std::sync::Arc;

use crate::dim::Dimension;
use crate::error::FieldError;
use crate::field::RadialField;
use crate::grid::RadialGrid;
use crate::real::Real;

/// Evaluate W at radius `r`.
#[inline]
pub fn eval_w<S: Real>(dim: Dimension, r: S) -> S {
    let c = S::of(dim.scale_const());
    let base = S::one() + r * r / c;
    base.powf(S::of(-(dim.n() as f64 - 2.0) / 2.0))
}

/// Radial derivative W'(r) = -((N-2) r / c) (1 + r^2/c)^(-N/2), c = N(N-2).
#[inline]
pub fn eval_w_prime<S: Real>(dim: Dimension, r: S) -> S {
    let c = S::of(dim.scale_const());
    let base = S::one() + r * r / c;
    -S::of(dim.n() as f64 - 2.0) * r / c * base.powf(S::of(-(dim.n() as f64) / 2.0))
}

/// Second radial derivative of W.
#[inline]
pub fn eval_w_second<S: Real>(dim: Dimension, r: S) -> S {
    let n = dim.n() as f64;
    let c = S::of(dim.scale_const());
    let base = S::one() + r * r / c;
    // W'' = -((N-2)/c)(1+r^2/c)^(-N/2-1) (1 + (1-N) r^2/c)
    -S::of(n - 2.0) / c
        * base.powf(S::of(-n / 2.0 - 1.0))
        * (S::one() + S::of(1.0 - n) * r * r / c)
}

/// W sampled on a grid, carrying its analytic derivative.
pub fn w_field<S: Real>(grid: &Arc<RadialGrid<S>>) -> RadialField<S> {
    let dim = grid.dim();
    RadialField::from_fn_with_deriv(grid, |r| eval_w(dim, r), |r| eval_w_prime(dim, r))
}

/// `-Delta W = W^((N+2)/(N-2))` evaluated analytically.
#[inline]
pub fn eval_minus_laplacian_w<S: Real>(dim: Dimension, r: S) -> S {
    eval_w(dim, r).powf(S::of((dim.n() as f64 + 2.0) / (dim.n() as f64 - 2.0)))
}

/// Quadrature of `||grad W||_2^2` with the exact analytic tail.
///
/// The derivative samples are analytic, so the only error is the trapezoid
/// rule itself; the identity `||W||_{2*}^{2*} = ||grad W||_2^2` is reported
/// alongside as a cross-check.
pub struct VariationalConstants<S: Real> {
    /// `||grad W||_2^2 = C_N^{-N}`.
    pub grad_norm_sq: S,
    /// `||W||_{2*}^{2*}`; equals `grad_norm_sq` in the continuum.
    pub critical_norm: S,
    /// Relative discretization error indicated by Richardson extrapolation.
    pub richardson_rel_err: S,
}

/// Compute the variational constants of W on a grid.
///
/// Signals `GridTooCoarse` when comparing against an internally refined grid
/// indicates a relative discretization error above `1e-6`.
pub fn grad_norm_sq_w<S: Real>(grid: &Arc<RadialGrid<S>>) -> Result<VariationalConstants<S>, FieldError> {
    let dim = grid.dim();
    let compute = |g: &Arc<RadialGrid<S>>| {
        let dw: Vec<S> = g.radii().iter().map(|&r| eval_w_prime(dim, r)).collect();
        let integrand: Vec<S> = dw.iter().map(|&d| d * d).collect();
        let grad = g.integrate_with_analytic_tail(&integrand, |r| {
            let d = eval_w_prime(dim, r);
            d * d
        });
        let p = dim.critical_exponent();
        let wp: Vec<S> = g.radii().iter().map(|&r| eval_w(dim, r).powf(S::of(p))).collect();
        let crit = g.integrate_with_analytic_tail(&wp, |r| eval_w(dim, r).powf(S::of(p)));
        (grad, crit)
    };
    let (grad, crit) = compute(grid);
    let fine = RadialGrid::new(dim, grid.dr() * S::of(0.5), grid.r_max());
    let (grad_fine, _) = compute(&fine);
    // second-order rule: extrapolated value grad_fine + (grad_fine - grad)/3
    let extrap = grad_fine + (grad_fine - grad) / S::of(3.0);
    let rel = ((grad - extrap) / extrap).abs();
    if rel > S::of(1e-6) {
        return Err(FieldError::GridTooCoarse(format!(
            "grad norm relative discretization error {:e}",
            rel.to_f64_lossy()
        )));
    }
    Ok(VariationalConstants { grad_norm_sq: grad, critical_norm: crit, richardson_rel_err: rel })
}

/// Energy of a state (u, v = dt u), split into its three terms.
#[derive(Debug, Clone, Copy)]
pub struct EnergyReport<S: Real> {
    /// `1/2 ||v||_2^2`.
    pub kinetic: S,
    /// `1/2 ||grad u||_2^2`.
    pub gradient: S,
    /// `1/(2*) ||u||_{2*}^{2*}`.
    pub potential: S,
    /// `kinetic + gradient - potential`.
    pub total: S,
}

/// Conserved energy `E(u, v) = 1/2 ||v||^2 + 1/2 ||grad u||^2 - 1/(2*) ||u||_{2*}^{2*}`.
pub fn energy<S: Real>(u: &RadialField<S>, v: &RadialField<S>) -> Result<EnergyReport<S>, FieldError> {
    u.same_grid(v)?;
    let dim = u.grid().dim();
    let half = S::of(0.5);
    let kinetic = half * v.l2_norm_sq();
    let gradient = half * u.grad_norm_sq();
    let p = S::of(dim.critical_exponent());
    let up: Vec<S> = u.values().iter().map(|&x| x.abs().powf(p)).collect();
    let potential = u.grid().integrate(&up) / p;
    Ok(EnergyReport { kinetic, gradient, potential, total: kinetic + gradient - potential })
}

/// Scaling/sign action of the equation's symmetry group (radial sector):
/// `(u, v) -> (d0 l0^(-(N-2)/2) u(./l0), d0 l0^(-N/2) v(./l0))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryAction<S: Real> {
    /// Scale lambda0 > 0.
    pub lambda0: S,
    /// Sign delta0, +1 or -1.
    pub delta0: S,
}

impl<S: Real> SymmetryAction<S> {
    pub fn new(lambda0: S, positive: bool) -> Self {
        assert!(lambda0 > S::zero());
        Self { lambda0, delta0: if positive { S::one() } else { -S::one() } }
    }

    pub fn identity() -> Self {
        Self { lambda0: S::one(), delta0: S::one() }
    }

    /// Composition law `(l, d) o (l', d') = (l l', d d')`.
    pub fn compose(self, other: Self) -> Self {
        Self { lambda0: self.lambda0 * other.lambda0, delta0: self.delta0 * other.delta0 }
    }
}

/// Apply a symmetry action to a state pair, resampling by monotone cubic
/// interpolation. For `lambda0 < 1` samples beyond `r_max` are needed; the
/// power-law tail continuation covers W-like profiles, and the call fails if
/// the outer tail is too large for that to be trustworthy.
pub fn apply_symmetry<S: Real>(
    u: &RadialField<S>,
    v: &RadialField<S>,
    action: SymmetryAction<S>,
) -> Result<(RadialField<S>, RadialField<S>), FieldError> {
    u.same_grid(v)?;
    let grid = u.grid();
    let n = grid.dim().n() as f64;
    let l = action.lambda0;
    if l < S::one() {
        let tail = u.relative_tail_amplitude().max(v.relative_tail_amplitude());
        if tail > S::of(1e-8) {
            return Err(FieldError::ScaleExitsDomain {
                lambda0: l.to_f64_lossy(),
                tail_amplitude: tail.to_f64_lossy(),
            });
        }
    }
    let cu = action.delta0 * l.powf(S::of(-(n - 2.0) / 2.0));
    let cv = action.delta0 * l.powf(S::of(-n / 2.0));
    let su = resample_scaled(u, l, cu);
    let sv = resample_scaled(v, l, cv);
    Ok((su, sv))
}

fn resample_scaled<S: Real>(f: &RadialField<S>, l: S, amp: S) -> RadialField<S> {
    let grid = f.grid();
    let resampler = f.resampler();
    let values: Vec<S> = grid.radii().iter().map(|&r| amp * resampler.eval(r / l)).collect();
    // fields carrying analytic derivatives keep them under rescaling:
    // d/dr [amp f(r/l)] = (amp/l) f'(r/l)
    let deriv = if f.has_analytic_deriv() {
        let df = RadialField::from_values(grid, f.gradient());
        let dre = df.resampler();
        Some(grid.radii().iter().map(|&r| amp / l * dre.eval(r / l)).collect())
    } else {
        None
    };
    RadialField::from_parts(grid, values, deriv)
}

/// The scaling generator `Wtilde = -c ((N-2)/2 W + r W')`, with `c > 0`
/// normalized so that `||grad Wtilde||_2 = 1`. The translation generators
/// `W_j = c_j d_{x_j} W` are odd in x_j, so every radial pairing against them
/// vanishes identically; they are recorded, not stored.
pub struct Generators<S: Real> {
    /// The normalized scaling generator.
    pub w_tilde: RadialField<S>,
    /// Normalization constant c.
    pub c_tilde: S,
    /// Note on the translation generators in the radial sector.
    pub translation_note: &'static str,
}

/// Raw (unnormalized) scaling direction `(N-2)/2 W + r W'` and its derivative.
fn scaling_direction<S: Real>(dim: Dimension, r: S) -> (S, S) {
    let half_nm2 = S::of((dim.n() as f64 - 2.0) / 2.0);
    let w = eval_w(dim, r);
    let wp = eval_w_prime(dim, r);
    let wpp = eval_w_second(dim, r);
    let val = half_nm2 * w + r * wp;
    // d/dr [ (N-2)/2 W + r W' ] = N/2 W' + r W''
    let der = S::of(dim.n() as f64 / 2.0) * wp + r * wpp;
    (val, der)
}

/// Build the scaling generator on a grid.
pub fn generators<S: Real>(grid: &Arc<RadialGrid<S>>) -> Generators<S> {
    let dim = grid.dim();
    let raw = RadialField::from_fn_with_deriv(
        grid,
        |r| scaling_direction(dim, r).0,
        |r| scaling_direction(dim, r).1,
    );
    let d: Vec<S> = raw.gradient();
    let sq: Vec<S> = d.iter().map(|&x| x * x).collect();
    let norm_sq = grid.integrate_with_analytic_tail(&sq, |r| {
        let dd = scaling_direction(dim, r).1;
        dd * dd
    });
    let c = S::one() / norm_sq.sqrt();
    let w_tilde = RadialField::from_fn_with_deriv(
        grid,
        |r| -c * scaling_direction(dim, r).0,
        |r| -c * scaling_direction(dim, r).1,
    );
    Generators {
        w_tilde,
        c_tilde: c,
        translation_note:
            "translation generators d_{x_j} W are odd in x_j; radial pairings against them vanish by parity",
    }
}

/// `Wtilde(r)` for a given normalization constant.
#[inline]
pub fn eval_w_tilde<S: Real>(dim: Dimension, c_tilde: S, r: S) -> S {
    -c_tilde * scaling_direction(dim, r).0
}

/// `Wtilde'(r)` for a given normalization constant.
#[inline]
pub fn eval_w_tilde_prime<S: Real>(dim: Dimension, c_tilde: S, r: S) -> S {
    -c_tilde * scaling_direction(dim, r).1
}

/// `-Delta Wtilde` evaluated analytically (used as an exact H^1-pairing
/// constraint vector: <grad f, grad Wtilde> = <f, -Delta Wtilde>).
pub fn eval_minus_laplacian_w_tilde<S: Real>(dim: Dimension, c_tilde: S, r: S) -> S {
    let n = dim.n() as f64;
    let p = (n + 2.0) / (n - 2.0);
    let w = eval_w(dim, r);
    let wp = eval_w_prime(dim, r);
    // Delta(x . grad W) = 2 Delta W + r d_r(Delta W), Delta W = -W^p
    // => -Delta Wtilde = -c [ (N+2)/2 W^p + p W^(p-1) r W' ]
    -c_tilde * (S::of((n + 2.0) / 2.0) * w.powf(S::of(p)) + S::of(p) * w.powf(S::of(p - 1.0)) * r * wp)
}

/// Reference value of `||grad W||_2^2` computed with the same finite-difference
/// pipeline used for evolved states. Distance computations must subtract this
/// (not the analytic-derivative value) so that `d(W, 0) = 0` holds exactly.
pub fn grad_norm_sq_w_fd<S: Real>(grid: &Arc<RadialGrid<S>>) -> S {
    let dim = grid.dim();
    let w = RadialField::from_fn(grid, |r| eval_w(dim, r));
    w.grad_norm_sq()
}

/// Distance functional `d(u, v) = | ||grad u||^2 - ||grad W||^2 | + ||v||^2`
/// with the finite-difference reference `gw_ref` for `||grad W||^2`.
pub fn d_functional<S: Real>(u: &RadialField<S>, v: &RadialField<S>, gw_ref: S) -> S {
    (u.grad_norm_sq() - gw_ref).abs() + v.l2_norm_sq()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(dim: Dimension) -> Arc<RadialGrid<f64>> {
        RadialGrid::new(dim, 0.02, 200.0)
    }

    #[test]
    fn w_at_symmetry_points() {
        assert_eq!(eval_w(Dimension::Three, 0.0), 1.0);
        let v3 = eval_w(Dimension::Three, 3f64.sqrt());
        assert!((v3 - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        let v5 = eval_w(Dimension::Five, 15f64.sqrt());
        assert!((v5 - 2f64.powf(-1.5)).abs() < 1e-15);
    }

    #[test]
    fn w_decreasing_positive() {
        for dim in [Dimension::Three, Dimension::Four, Dimension::Five] {
            let mut prev = eval_w(dim, 0.0);
            let mut r = 0.1;
            while r < 50.0 {
                let v = eval_w(dim, r);
                assert!(v > 0.0 && v < prev);
                prev = v;
                r += 0.7;
            }
        }
    }

    #[test]
    fn w_prime_matches_difference_quotient() {
        for dim in [Dimension::Three, Dimension::Four, Dimension::Five] {
            for &r in &[0.3f64, 1.0, 4.0, 20.0] {
                let h = 1e-6f64;
                let fd = (eval_w(dim, r + h) - eval_w(dim, r - h)) / (2.0 * h);
                assert!((eval_w_prime(dim, r) - fd).abs() < 1e-8);
                let fd2 = (eval_w_prime(dim, r + h) - eval_w_prime(dim, r - h)) / (2.0 * h);
                assert!((eval_w_second(dim, r) - fd2).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn critical_norm_equals_grad_norm_all_dims() {
        for dim in [Dimension::Three, Dimension::Four, Dimension::Five] {
            let vc = grad_norm_sq_w(&grid(dim)).unwrap();
            let rel = (vc.critical_norm - vc.grad_norm_sq).abs() / vc.grad_norm_sq;
            assert!(rel < 1e-6, "N={} rel={rel:e}", dim.n());
        }
    }

    #[test]
    fn energy_of_ground_state() {
        let g = grid(Dimension::Three);
        let w = RadialField::from_fn(&g, |r| eval_w(Dimension::Three, r));
        let zero = RadialField::zeros(&g);
        let e = energy(&w, &zero).unwrap();
        // N E(W,0) = ||grad W||^2: with finite-difference gradients the gap
        // is the O(dr^2) bias of the gradient term (~3e-6 relative at dr=0.02)
        let gw = grad_norm_sq_w_fd(&g);
        assert!((e.total - gw / 3.0).abs() / (gw / 3.0) < 5e-6);
        assert_eq!(e.kinetic, 0.0);
        let e0 = energy(&zero, &zero).unwrap();
        assert_eq!(e0.total, 0.0);
        // the analytic-derivative pipeline hits the identity to quadrature noise
        let wa = w_field(&g);
        let ea = energy(&wa, &zero).unwrap();
        let gwa = grad_norm_sq_w(&g).unwrap().grad_norm_sq;
        assert!((ea.total - gwa / 3.0).abs() / (gwa / 3.0) < 1e-7);
    }

    #[test]
    fn energy_scaling_law() {
        // E(lambda W, 0) = ||grad W||^2 (lambda^2/2 - lambda^6/6) for N = 3
        let g = grid(Dimension::Three);
        let lam = 0.9;
        let w = RadialField::from_fn(&g, |r| lam * eval_w(Dimension::Three, r));
        let zero = RadialField::zeros(&g);
        let e = energy(&w, &zero).unwrap();
        let gw = grad_norm_sq_w_fd(&g);
        let expected = gw * (lam * lam / 2.0) - grad_norm_sq_w(&grid(Dimension::Three)).unwrap().critical_norm * lam.powi(6) / 6.0;
        assert!((e.total - expected).abs() / expected.abs() < 1e-4, "{} vs {expected}", e.total);
    }

    #[test]
    fn symmetry_identity_and_composition() {
        let g = grid(Dimension::Three);
        let w = w_field(&g);
        let zero = RadialField::zeros(&g);
        let (u, v) = apply_symmetry(&w, &zero, SymmetryAction::identity()).unwrap();
        for (a, b) in u.values().iter().zip(w.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(v.sup_norm() == 0.0);
        let a = SymmetryAction::new(2.0, true);
        let b = SymmetryAction::new(0.75, false);
        let ab = a.compose(b);
        assert_eq!(ab.lambda0, 1.5);
        assert_eq!(ab.delta0, -1.0);
    }

    #[test]
    fn scaled_w_pointwise() {
        // lambda0 = 2, N = 3: scaled W at r equals 2^(-1/2) W(r/2)
        let g = grid(Dimension::Three);
        let w = w_field(&g);
        let zero = RadialField::zeros(&g);
        let (u, _) = apply_symmetry(&w, &zero, SymmetryAction::new(2.0, true)).unwrap();
        for i in (0..g.last()).step_by(1303) {
            let r = g.r(i);
            let expect = 2f64.powf(-0.5) * eval_w(Dimension::Three, r / 2.0);
            assert!((u.values()[i] - expect).abs() < 1e-9, "r={r}");
        }
    }

    #[test]
    fn energy_invariant_under_symmetry() {
        let g = grid(Dimension::Three);
        let w = w_field(&g);
        // a state with both components, scaled up (lambda0 >= 1 stays in-domain)
        let v0 = RadialField::from_fn(&g, |r| 0.3 * (-r * r / 4.0).exp());
        let e_before = energy(&w, &v0).unwrap().total;
        let (u1, v1) = apply_symmetry(&w, &v0, SymmetryAction::new(1.7, true)).unwrap();
        let e_after = energy(&u1, &v1).unwrap().total;
        assert!((e_after - e_before).abs() / e_before.abs() < 1e-6, "{e_before} {e_after}");
        // and d is invariant too
        let gw = grad_norm_sq_w_fd(&g);
        let d_before = d_functional(&w, &v0, gw);
        let d_after = d_functional(&u1, &v1, gw);
        assert!((d_after - d_before).abs() / d_before < 1e-5, "{d_before} {d_after}");
    }

    #[test]
    fn shrink_with_fat_tail_rejected() {
        let g = grid(Dimension::Three);
        let w = w_field(&g);
        let zero = RadialField::zeros(&g);
        let err = apply_symmetry(&w, &zero, SymmetryAction::new(0.5, true));
        assert!(matches!(err, Err(FieldError::ScaleExitsDomain { .. })));
    }

    #[test]
    fn d_functional_examples() {
        let g = grid(Dimension::Three);
        let gw = grad_norm_sq_w_fd(&g);
        let w = RadialField::from_fn(&g, |r| eval_w(Dimension::Three, r));
        let zero = RadialField::zeros(&g);
        assert_eq!(d_functional(&w, &zero, gw), 0.0);
        assert_eq!(d_functional(&zero, &zero, gw), gw);
    }

    #[test]
    fn generators_normalized_and_orthogonal() {
        let g = grid(Dimension::Three);
        let gens = generators(&g);
        let norm = gens.w_tilde.grad_norm_sq();
        assert!((norm - 1.0).abs() < 1e-6, "norm^2 = {norm}");
        let w = w_field(&g);
        let gw = grad_norm_sq_w(&g).unwrap().grad_norm_sq;
        let ip = w.h1_inner(&gens.w_tilde);
        assert!(ip.abs() < 1e-6 * gw, "ip = {ip:e}");
        // value at origin: -c/2 * W(0) for N = 3
        let at0 = gens.w_tilde.values()[0];
        assert!((at0 + gens.c_tilde / 2.0).abs() < 1e-14);
    }

    #[test]
    fn grad_norm_convergence_is_second_order() {
        // differences between successive refinements shrink ~4x
        let mk = |dr: f64| {
            let g = RadialGrid::new(Dimension::Three, dr, 200.0);
            grad_norm_sq_w(&g).unwrap().grad_norm_sq
        };
        let (a, b, c) = (mk(0.32), mk(0.16), mk(0.08));
        let ratio = (a - b) / (b - c);
        assert!((ratio - 4.0).abs() < 0.6, "ratio = {ratio}");
    }
}
