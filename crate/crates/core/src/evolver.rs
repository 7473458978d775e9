//! Radial time evolution of `dtt u = Delta u + |u|^(4/(N-2)) u`.
//!
//! Stoermer-Verlet stepping on `w = r^((N-1)/2) u` for odd N (the radial
//! Laplacian becomes a plain second difference plus a centrifugal term) and on
//! the conservative finite-volume stencil for N = 4. The outer boundary node
//! carries first-order characteristic outflow for the deviation from the
//! initial profile; runs are sized so the light cone never reaches it, making
//! the closure exact by finite speed of propagation.

use std::sync::Arc;

use crate::diagnostics::{g_r, y_functionals, CutoffPair};
use crate::dim::Dimension;
use crate::error::EvolveError;
use crate::field::RadialField;
use crate::grid::RadialGrid;
use crate::ground_state::{energy, eval_w, grad_norm_sq_w_fd};
use crate::numerics::{line_fit, solve_tridiagonal};
use crate::real::Real;

/// Time direction. Backward evolution negates the velocity and steps forward
/// (the equation is invariant under time reversal); sampled times are always
/// the nonnegative elapsed time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Solver configuration.
#[derive(Debug, Clone)]
pub struct SolverConfig<S: Real> {
    /// CFL number `dt/dr`, at most 1/2.
    pub cfl: S,
    /// Blow-up threshold: `sup |u| > blowup_factor * W(0)`.
    pub blowup_factor: S,
    /// Convergence tolerance on the distance functional.
    pub tol_d: S,
    /// Steps between samples of the time series.
    pub sample_every: usize,
    /// Radius of the ball used for the local-energy diagnostic.
    pub local_radius: S,
    /// Cutoff radius for the recorded virial functional g_R.
    pub gr_radius: S,
    /// Cutoff radius for the recorded y functional (`None` = uncut, N = 5 only).
    pub y_cut: Option<S>,
    /// Consecutive growth steps required besides the threshold crossing.
    pub growth_steps: usize,
}

impl<S: Real> Default for SolverConfig<S> {
    fn default() -> Self {
        Self {
            cfl: S::of(0.5),
            blowup_factor: S::of(20.0),
            tol_d: S::of(0.05),
            sample_every: 1,
            local_radius: S::of(5.0),
            gr_radius: S::of(10.0),
            y_cut: Some(S::of(10.0)),
            growth_steps: 50,
        }
    }
}

/// Snapshot of the evolution at a sample time.
#[derive(Debug, Clone)]
pub struct EvolutionState<S: Real> {
    /// Elapsed time (nonnegative regardless of direction).
    pub t: S,
    pub u: RadialField<S>,
    pub v: RadialField<S>,
    pub step: u64,
}

/// One sampled row of diagnostics.
#[derive(Debug, Clone)]
pub struct Row<S: Real> {
    pub t: S,
    pub energy: S,
    pub d: S,
    pub dtu_l2: S,
    pub sup_u: S,
    pub local_energy: S,
    pub y: S,
    pub yprime: S,
    pub g_r: S,
    pub alpha: Option<S>,
    pub mu: Option<S>,
    /// `||grad u||_2^2` (kept for the trapping and virial checks).
    pub grad_sq: S,
    /// `||dt u||_2^2`.
    pub v_sq: S,
}

/// Sampled diagnostics along a run.
#[derive(Debug, Clone)]
pub struct TimeSeries<S: Real> {
    pub rows: Vec<Row<S>>,
}

impl<S: Real> Default for TimeSeries<S> {
    fn default() -> Self {
        Self { rows: Vec::new() }
    }
}

impl<S: Real> TimeSeries<S> {
    /// Elapsed time covered by the samples.
    pub fn coverage(&self) -> S {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => S::zero(),
        }
    }
}

/// Detected blow-up event (an outcome, not a failure).
#[derive(Debug, Clone, Copy)]
pub struct BlowupEvent<S: Real> {
    /// First threshold crossing, refined by step bisection.
    pub t_blow: S,
    /// Sup norm at detection.
    pub sup_u: S,
}

/// Result of an evolution.
pub struct EvolveResult<S: Real> {
    pub series: TimeSeries<S>,
    pub final_state: EvolutionState<S>,
    pub blowup: Option<BlowupEvent<S>>,
}

/// Outcome classification of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeLabel<S: Real> {
    /// Distance to W stayed/ended below tolerance; `rate` is the fitted decay
    /// exponent of d(t) (can be ~0 for stationary data).
    ConvergedToW { rate: S },
    /// Local energy on the configured ball dropped below 5% of E(W, 0).
    Dispersed { final_local_energy: S },
    /// Sup-norm blow-up detected.
    BlewUp { t_blow: S },
    Undetermined,
}

enum Layout {
    /// Odd N: state vectors hold `w = r^((N-1)/2) u` on nodes `0..=m` (w[0]=0).
    WSubstitution { kappa: f64, centrifugal: f64 },
    /// N = 4: state vectors hold `u` on nodes `0..=m`.
    FiniteVolume,
}

/// The explicit integrator. Public methods hand out sampled states; internals
/// stay in the substituted variable.
pub struct Integrator<S: Real> {
    grid: Arc<RadialGrid<S>>,
    layout: Layout,
    dt: S,
    pos: Vec<S>,
    vel: Vec<S>,
    /// Frozen copy of the initial boundary neighborhood for the outflow closure.
    bdry_init: (S, S),
    step: u64,
    power: S,
}

impl<S: Real> Integrator<S> {
    pub fn new(
        u0: &RadialField<S>,
        v0: &RadialField<S>,
        config: &SolverConfig<S>,
        direction: Direction,
    ) -> Result<Self, EvolveError> {
        u0.same_grid(v0).map_err(|e| EvolveError::Config(e.to_string()))?;
        if config.cfl > S::of(0.5) || config.cfl <= S::zero() {
            return Err(EvolveError::Config(format!(
                "cfl {} outside (0, 0.5]",
                config.cfl.to_f64_lossy()
            )));
        }
        let grid = u0.grid().clone();
        let dim = grid.dim();
        let dt = config.cfl * grid.dr();
        let sign = match direction {
            Direction::Forward => S::one(),
            Direction::Backward => -S::one(),
        };
        let layout = match dim {
            Dimension::Three | Dimension::Five => Layout::WSubstitution {
                kappa: dim.w_power(),
                centrifugal: dim.centrifugal(),
            },
            Dimension::Four => Layout::FiniteVolume,
        };
        let (pos, vel) = match &layout {
            Layout::WSubstitution { kappa, .. } => {
                let k = S::of(*kappa);
                let mut p = vec![S::zero(); grid.len()];
                let mut v = vec![S::zero(); grid.len()];
                for i in 1..grid.len() {
                    let rk = grid.r(i).powf(k);
                    p[i] = rk * u0.values()[i];
                    v[i] = sign * rk * v0.values()[i];
                }
                (p, v)
            }
            Layout::FiniteVolume => (
                u0.values().to_vec(),
                v0.values().iter().map(|&x| sign * x).collect(),
            ),
        };
        let m = grid.last();
        let bdry_init = (pos[m], pos[m - 1]);
        Ok(Self {
            grid,
            layout,
            dt,
            pos,
            vel,
            bdry_init,
            step: 0,
            power: S::of(dim.nonlin_power()),
        })
    }

    fn force(&self, pos: &[S], out: &mut [S]) {
        let m = self.grid.last();
        let dr = self.grid.dr();
        let dr2 = dr * dr;
        let q = self.power;
        match &self.layout {
            Layout::WSubstitution { kappa, centrifugal } => {
                let k = S::of(*kappa);
                let cc = S::of(*centrifugal);
                out[0] = S::zero();
                for i in 1..m {
                    let r = self.grid.r(i);
                    let lap = (pos[i + 1] - S::of(2.0) * pos[i] + pos[i - 1]) / dr2;
                    let u = pos[i] / r.powf(k);
                    let mut f = lap + u.abs().powf(q) * pos[i];
                    if cc != S::zero() {
                        f -= cc / (r * r) * pos[i];
                    }
                    out[i] = f;
                }
                out[m] = S::zero();
            }
            Layout::FiniteVolume => {
                let n = S::of(4.0);
                out[0] = S::of(2.0) * n * (pos[1] - pos[0]) / dr2
                    + pos[0].abs().powf(q) * pos[0];
                let half = dr * S::of(0.5);
                for i in 1..m {
                    let r = self.grid.r(i);
                    let fp = (r + half).powi(3) * (pos[i + 1] - pos[i]) / dr;
                    let fm = (r - half).powi(3) * (pos[i] - pos[i - 1]) / dr;
                    let mass = ((r + half).powi(4) - (r - half).powi(4)) * S::of(0.25);
                    out[i] = (fp - fm) / mass + pos[i].abs().powf(q) * pos[i];
                }
                out[m] = S::zero();
            }
        }
    }

    /// One Stoermer-Verlet step of size `dt`. The outer node advects the
    /// deviation from the initial profile outward at unit speed.
    fn step_once(&mut self, dt: S, f: &mut Vec<S>, fnew: &mut Vec<S>) {
        let m = self.grid.last();
        let half = dt * S::of(0.5);
        for i in 0..m {
            self.vel[i] += half * f[i];
            self.pos[i] += dt * self.vel[i];
        }
        // outflow on the deviation from the initial boundary state
        let dr = self.grid.dr();
        let dev_m = self.pos[m] - self.bdry_init.0;
        let dev_m1 = self.pos[m - 1] - self.bdry_init.1;
        let new_dev = dev_m - dt / dr * (dev_m - dev_m1);
        self.vel[m] = (new_dev - dev_m) / dt;
        self.pos[m] = self.bdry_init.0 + new_dev;
        self.force(&self.pos, fnew);
        for i in 0..m {
            self.vel[i] += half * fnew[i];
        }
        std::mem::swap(f, fnew);
        self.step += 1;
    }

    fn sup_u(&self) -> S {
        let m = self.grid.last();
        match &self.layout {
            Layout::WSubstitution { kappa, .. } => {
                let k = S::of(*kappa);
                let mut sup = S::zero();
                for i in 1..=m {
                    let u = self.pos[i] / self.grid.r(i).powf(k);
                    sup = sup.max(u.abs());
                }
                // origin estimate by even extrapolation
                let u1 = self.pos[1] / self.grid.r(1).powf(k);
                let u2 = self.pos[2] / self.grid.r(2).powf(k);
                sup.max(((S::of(4.0) * u1 - u2) / S::of(3.0)).abs())
            }
            Layout::FiniteVolume => self.pos.iter().fold(S::zero(), |a, &x| a.max(x.abs())),
        }
    }

    /// Materialize (u, v) fields from the internal representation.
    pub fn state(&self, t: S) -> EvolutionState<S> {
        let m = self.grid.last();
        let (u, v) = match &self.layout {
            Layout::WSubstitution { kappa, .. } => {
                let k = S::of(*kappa);
                let mut uu = vec![S::zero(); m + 1];
                let mut vv = vec![S::zero(); m + 1];
                for i in 1..=m {
                    let rk = self.grid.r(i).powf(k);
                    uu[i] = self.pos[i] / rk;
                    vv[i] = self.vel[i] / rk;
                }
                uu[0] = (S::of(4.0) * uu[1] - uu[2]) / S::of(3.0);
                vv[0] = (S::of(4.0) * vv[1] - vv[2]) / S::of(3.0);
                (uu, vv)
            }
            Layout::FiniteVolume => (self.pos.clone(), self.vel.clone()),
        };
        EvolutionState {
            t,
            u: RadialField::from_values(&self.grid, u),
            v: RadialField::from_values(&self.grid, v),
            step: self.step,
        }
    }
}

/// Evolve `(u0, v0)` for duration `T`, sampling diagnostics and invoking
/// `on_sample` at every sampled state (including t = 0 and the final state).
pub fn evolve_with<S: Real>(
    u0: &RadialField<S>,
    v0: &RadialField<S>,
    duration: S,
    config: &SolverConfig<S>,
    direction: Direction,
    mut on_sample: impl FnMut(&EvolutionState<S>),
) -> Result<EvolveResult<S>, EvolveError> {
    let grid = u0.grid().clone();
    if duration + S::of(10.0) > grid.r_max() {
        return Err(EvolveError::Config(format!(
            "duration {} too long for r_max {} (light-cone margin)",
            duration.to_f64_lossy(),
            grid.r_max().to_f64_lossy()
        )));
    }
    let mut integ = Integrator::new(u0, v0, config, direction)?;
    let gw_ref = grad_norm_sq_w_fd(&grid);
    let gr_cut = CutoffPair::new(&grid, config.gr_radius);
    let y_cut = config.y_cut.map(|r| CutoffPair::new(&grid, r));
    let dt = integ.dt;
    let steps = (duration / dt).round().to_f64_lossy() as u64;
    let mut f = vec![S::zero(); grid.len()];
    let mut fnew = vec![S::zero(); grid.len()];
    integ.force(&integ.pos, &mut f);

    let mut series = TimeSeries::default();
    let mut prev_pos = integ.pos.clone();
    let mut prev_vel = integ.vel.clone();
    let mut grow = 0usize;
    let mut prev_sup = integ.sup_u();
    let mut blowup = None;

    let sample =
        |integ: &Integrator<S>, t: S, series: &mut TimeSeries<S>, cb: &mut dyn FnMut(&EvolutionState<S>)| {
            let st = integ.state(t);
            let e = energy(&st.u, &st.v).expect("same grid");
            let grad_sq = st.u.grad_norm_sq();
            let v_sq = st.v.l2_norm_sq();
            let d = (grad_sq - gw_ref).abs() + v_sq;
            let local = local_energy(&st.u, &st.v, config.local_radius);
            let (y, yp) = match y_functionals(&st.u, &st.v, y_cut.as_ref()) {
                Ok((y, yp)) => (y, yp),
                Err(_) => (S::nan(), S::nan()),
            };
            series.rows.push(Row {
                t,
                energy: e.total,
                d,
                dtu_l2: v_sq.sqrt(),
                sup_u: st.u.sup_norm(),
                local_energy: local,
                y,
                yprime: yp,
                g_r: g_r(&st.u, &st.v, &gr_cut),
                alpha: None,
                mu: None,
                grad_sq,
                v_sq,
            });
            cb(&st);
        };

    sample(&integ, S::zero(), &mut series, &mut on_sample);
    let threshold = config.blowup_factor * eval_w(grid.dim(), S::zero());
    // state just before the first threshold crossing, for bisection refinement
    let mut crossing: Option<(S, Vec<S>, Vec<S>)> = None;
    for n in 1..=steps {
        prev_pos.copy_from_slice(&integ.pos);
        prev_vel.copy_from_slice(&integ.vel);
        integ.step_once(dt, &mut f, &mut fnew);
        let t = S::of(n as f64) * dt;
        let sup = integ.sup_u();
        let finite = sup.is_finite();
        if !finite || sup >= prev_sup {
            grow += 1;
        } else {
            grow = 0;
        }
        if finite && sup <= threshold {
            crossing = None;
        } else if crossing.is_none() {
            crossing = Some((t - dt, prev_pos.clone(), prev_vel.clone()));
        }
        if !finite || (sup > threshold && grow >= config.growth_steps) {
            let (t_before, pos0, vel0) =
                crossing.take().unwrap_or((t - dt, prev_pos.clone(), prev_vel.clone()));
            let t_blow = refine_crossing(&grid, &pos0, &vel0, &integ, dt, threshold)
                .map(|frac| t_before + frac * dt)
                .unwrap_or(t);
            blowup = Some(BlowupEvent { t_blow, sup_u: sup });
            // report the last finite state
            let sample_t = if finite { t } else { t - dt };
            if !finite {
                integ.pos.copy_from_slice(&prev_pos);
                integ.vel.copy_from_slice(&prev_vel);
            }
            sample(&integ, sample_t, &mut series, &mut on_sample);
            break;
        }
        prev_sup = sup;
        if n % config.sample_every as u64 == 0 || n == steps {
            sample(&integ, t, &mut series, &mut on_sample);
        }
    }
    let t_final = series.rows.last().map(|r| r.t).unwrap_or(S::zero());
    let final_state = integ.state(t_final);
    Ok(EvolveResult { series, final_state, blowup })
}

/// Convenience wrapper without an observer.
pub fn evolve<S: Real>(
    u0: &RadialField<S>,
    v0: &RadialField<S>,
    duration: S,
    config: &SolverConfig<S>,
    direction: Direction,
) -> Result<EvolveResult<S>, EvolveError> {
    evolve_with(u0, v0, duration, config, direction, |_| {})
}

/// Bisection refinement of the first sup-norm threshold crossing inside one
/// step, returning the crossing as a fraction of `dt`.
fn refine_crossing<S: Real>(
    grid: &Arc<RadialGrid<S>>,
    pos0: &[S],
    vel0: &[S],
    template: &Integrator<S>,
    dt: S,
    threshold: S,
) -> Option<S> {
    let sup_at = |frac: S| -> S {
        let mut probe = Integrator {
            grid: grid.clone(),
            layout: match &template.layout {
                Layout::WSubstitution { kappa, centrifugal } => Layout::WSubstitution {
                    kappa: *kappa,
                    centrifugal: *centrifugal,
                },
                Layout::FiniteVolume => Layout::FiniteVolume,
            },
            dt,
            pos: pos0.to_vec(),
            vel: vel0.to_vec(),
            bdry_init: template.bdry_init,
            step: 0,
            power: template.power,
        };
        let mut f = vec![S::zero(); grid.len()];
        let mut fnew = vec![S::zero(); grid.len()];
        probe.force(&probe.pos, &mut f);
        probe.step_once(frac * dt, &mut f, &mut fnew);
        probe.sup_u()
    };
    let mut lo = S::zero();
    let mut hi = S::one();
    let end = sup_at(S::one());
    if end.is_finite() && end <= threshold {
        return Some(S::one());
    }
    for _ in 0..30 {
        let mid = (lo + hi) * S::of(0.5);
        let s = sup_at(mid);
        if s.is_finite() && s <= threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some((lo + hi) * S::of(0.5))
}

/// Energy density integrated over the ball `{r <= radius}`.
pub fn local_energy<S: Real>(u: &RadialField<S>, v: &RadialField<S>, radius: S) -> S {
    let grid = u.grid();
    let dim = grid.dim();
    let p = S::of(dim.critical_exponent());
    let du = u.gradient();
    let nm1 = (dim.n() - 1) as i32;
    let mut acc = S::zero();
    for i in 0..grid.len() {
        let r = grid.r(i);
        if r > radius {
            break;
        }
        let e = S::of(0.5) * v.values()[i] * v.values()[i]
            + S::of(0.5) * du[i] * du[i]
            - u.values()[i].abs().powf(p) / p;
        acc += grid.trapezoid_weight(i) * e * r.powi(nm1);
    }
    dim.sphere_area::<S>() * acc
}

/// Classify a run from its sampled series.
///
/// Precedence: a detected blow-up wins; then dispersal (local energy under 5%
/// of E(W,0)); then convergence (late-time d below `tol_d`); else
/// undetermined. A series that neither blew up nor covers `min_coverage` time
/// units is undetermined.
pub fn detect_outcome<S: Real>(
    result: &EvolveResult<S>,
    config: &SolverConfig<S>,
    min_coverage: S,
) -> OutcomeLabel<S> {
    if let Some(b) = &result.blowup {
        return OutcomeLabel::BlewUp { t_blow: b.t_blow };
    }
    let rows = &result.series.rows;
    if rows.len() < 4 || result.series.coverage() < min_coverage {
        return OutcomeLabel::Undetermined;
    }
    let grid = result.final_state.u.grid();
    let e_threshold = grad_norm_sq_w_fd(grid) / grid.dim().n_s::<S>();
    let final_local = rows.last().unwrap().local_energy;
    if final_local.abs() < S::of(0.05) * e_threshold {
        return OutcomeLabel::Dispersed { final_local_energy: final_local };
    }
    let tail_start = rows.len() - rows.len() / 4 - 1;
    let mut late: Vec<S> = rows[tail_start..].iter().map(|r| r.d).collect();
    late.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = late[late.len() / 2];
    if median < config.tol_d {
        // decay rate from the samples above noise
        let pts: Vec<(S, S)> = rows
            .iter()
            .filter(|r| r.d > S::of(1e-12))
            .map(|r| (r.t, r.d.ln()))
            .collect();
        let rate = if pts.len() >= 2 {
            let xs: Vec<S> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<S> = pts.iter().map(|p| p.1).collect();
            -line_fit(&xs, &ys).0
        } else {
            S::zero()
        };
        return OutcomeLabel::ConvergedToW { rate };
    }
    OutcomeLabel::Undetermined
}

/// Energy-trapping report: `||grad u||^2 + N/2 ||dt u||^2 <= ||grad W||^2`
/// with the given slack, checked at every sample.
#[derive(Debug, Clone, Copy)]
pub struct TrappingReport<S: Real> {
    pub pass: bool,
    /// Smallest margin `||grad W||^2 + slack - LHS` over the samples.
    pub min_margin: S,
}

/// Check the variational trapping inequality
/// `||grad u||^2 + N/2 ||dt u||^2 <= ||grad W||^2 + slack` at every sample.
pub fn trapping_check<S: Real>(
    series: &TimeSeries<S>,
    dim: Dimension,
    gw_ref: S,
    slack: S,
) -> TrappingReport<S> {
    let half_n = dim.n_s::<S>() * S::of(0.5);
    let mut min_margin = S::infinity();
    let mut pass = true;
    for row in &series.rows {
        let lhs = row.grad_sq + half_n * row.v_sq;
        let margin = gw_ref + slack - lhs;
        min_margin = min_margin.min(margin);
        if margin < S::zero() {
            pass = false;
        }
    }
    TrappingReport { pass, min_margin }
}

/// Finite-speed-of-propagation check: evolve two data sets that agree outside
/// `{r >= r0}` and verify the solutions agree outside `{r >= r0 + t}`.
pub struct FsopReport<S: Real> {
    pub pass: bool,
    /// Worst pointwise disagreement outside the light cone over all samples.
    pub worst: S,
}

pub fn fsop_check<S: Real>(
    data1: (&RadialField<S>, &RadialField<S>),
    data2: (&RadialField<S>, &RadialField<S>),
    r0: S,
    duration: S,
    config: &SolverConfig<S>,
    tol: S,
) -> Result<FsopReport<S>, EvolveError> {
    let grid = data1.0.grid().clone();
    let mut snaps1: Vec<EvolutionState<S>> = Vec::new();
    let mut cfg = config.clone();
    cfg.sample_every = cfg.sample_every.max(25);
    evolve_with(data1.0, data1.1, duration, &cfg, Direction::Forward, |st| {
        snaps1.push(st.clone());
    })?;
    let mut worst = S::zero();
    let mut idx = 0usize;
    evolve_with(data2.0, data2.1, duration, &cfg, Direction::Forward, |st| {
        if idx < snaps1.len() {
            let ref1 = &snaps1[idx];
            let start = ((r0 + st.t) / grid.dr()).ceil().to_f64_lossy() as usize;
            for i in start..grid.len() {
                let du = (st.u.values()[i] - ref1.u.values()[i]).abs();
                let dv = (st.v.values()[i] - ref1.v.values()[i]).abs();
                worst = worst.max(du).max(dv);
            }
            idx += 1;
        }
    })?;
    Ok(FsopReport { pass: worst <= tol, worst })
}

/// Newton-corrected discrete equilibrium: the profile `W*` with
/// `Delta_disc W* + |W*|^(4/(N-2)) W* = 0` exactly on the grid. Sampled W is
/// the starting guess; the correction is `O(dr^2)`. Stationary runs prepared
/// with `W*` stay put to machine precision, whereas sampled W excites the
/// linearized instability `e^(e0 t)` through its `O(dr^2)` residual.
pub fn discrete_ground<S: Real>(grid: &Arc<RadialGrid<S>>) -> Result<RadialField<S>, EvolveError> {
    let dim = grid.dim();
    let m = grid.last();
    let q = S::of(dim.nonlin_power());
    let cfg = SolverConfig::default();
    let mut integ = Integrator::new(
        &RadialField::from_fn(grid, |r| eval_w(dim, r)),
        &RadialField::zeros(grid),
        &cfg,
        Direction::Forward,
    )?;
    // Newton on F(pos) = force(pos) over the evolved nodes, boundary pinned
    let idx: std::ops::Range<usize> = match integ.layout {
        Layout::WSubstitution { .. } => 1..m,
        Layout::FiniteVolume => 0..m,
    };
    let n = idx.end - idx.start;
    let mut f = vec![S::zero(); grid.len()];
    // convergence floor: roundoff through the 1/dr^2 stencil
    let tol = S::of(100.0) * S::epsilon() / (grid.dr() * grid.dr());
    for _ in 0..25 {
        integ.force(&integ.pos, &mut f);
        let res_norm = idx.clone().fold(S::zero(), |a, i| a.max(f[i].abs()));
        if res_norm < tol {
            let st = integ.state(S::zero());
            return Ok(st.u);
        }
        // Jacobian: discrete Laplacian part plus (q+1)|u|^q diagonal
        let dr2 = grid.dr() * grid.dr();
        let mut diag = vec![S::zero(); n];
        let mut sub = vec![S::zero(); n - 1];
        let mut sup = vec![S::zero(); n - 1];
        match &integ.layout {
            Layout::WSubstitution { kappa, centrifugal } => {
                let k = S::of(*kappa);
                let cc = S::of(*centrifugal);
                for (j, i) in idx.clone().enumerate() {
                    let r = grid.r(i);
                    let u = integ.pos[i] / r.powf(k);
                    diag[j] = -S::of(2.0) / dr2 - cc / (r * r)
                        + (q + S::one()) * u.abs().powf(q);
                }
                let off = S::one() / dr2;
                sub.fill(off);
                sup.fill(off);
            }
            Layout::FiniteVolume => {
                let half = grid.dr() * S::of(0.5);
                for (j, i) in idx.clone().enumerate() {
                    let r = grid.r(i);
                    let u = integ.pos[i];
                    // d(force_i)/du_{i+1}, du_{i-1}: flux coefficients over cell mass
                    let (f_out, f_in) = if i == 0 {
                        (S::of(8.0) / dr2, S::zero())
                    } else {
                        let mass = ((r + half).powi(4) - (r - half).powi(4)) * S::of(0.25);
                        (
                            (r + half).powi(3) / grid.dr() / mass,
                            (r - half).powi(3) / grid.dr() / mass,
                        )
                    };
                    diag[j] = -(f_out + f_in) + (q + S::one()) * u.abs().powf(q);
                    if j + 1 < n {
                        sup[j] = f_out;
                    }
                    if j > 0 {
                        sub[j - 1] = f_in;
                    }
                }
            }
        }
        let rhs: Vec<S> = idx.clone().map(|i| -f[i]).collect();
        let delta = solve_tridiagonal(&sub, &diag, &sup, &rhs)
            .ok_or(EvolveError::GroundNewton(res_norm.to_f64_lossy()))?;
        for (j, i) in idx.clone().enumerate() {
            integ.pos[i] += delta[j];
        }
    }
    integ.force(&integ.pos, &mut f);
    let res = idx.fold(S::zero(), |a, i| a.max(f[i].abs()));
    if res < tol * S::of(10.0) {
        return Ok(integ.state(S::zero()).u);
    }
    Err(EvolveError::GroundNewton(res.to_f64_lossy()))
}
