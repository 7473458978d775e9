//! Radial profiles sampled on a [`RadialGrid`].

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::FieldError;
use crate::grid::RadialGrid;
use crate::numerics::{tail_log_slope, MonotoneCubic};
use crate::real::Real;

/// A real radial profile on a grid. May carry analytically sampled radial
/// derivatives; norms fall back to centered finite differences otherwise.
#[derive(Debug, Clone)]
pub struct RadialField<S: Real> {
    grid: Arc<RadialGrid<S>>,
    values: Vec<S>,
    deriv: Option<Vec<S>>,
}

impl<S: Real> RadialField<S> {
    /// Zero field.
    pub fn zeros(grid: &Arc<RadialGrid<S>>) -> Self {
        Self { grid: grid.clone(), values: vec![S::zero(); grid.len()], deriv: None }
    }

    /// Sample a function of r on the nodes.
    pub fn from_fn(grid: &Arc<RadialGrid<S>>, f: impl Fn(S) -> S) -> Self {
        let values = grid.radii().iter().map(|&r| f(r)).collect();
        Self { grid: grid.clone(), values, deriv: None }
    }

    /// Sample a function together with its radial derivative.
    pub fn from_fn_with_deriv(
        grid: &Arc<RadialGrid<S>>,
        f: impl Fn(S) -> S,
        df: impl Fn(S) -> S,
    ) -> Self {
        let values = grid.radii().iter().map(|&r| f(r)).collect();
        let deriv = grid.radii().iter().map(|&r| df(r)).collect();
        Self { grid: grid.clone(), values, deriv: Some(deriv) }
    }

    /// Wrap raw node values.
    pub fn from_values(grid: &Arc<RadialGrid<S>>, values: Vec<S>) -> Self {
        assert_eq!(values.len(), grid.len());
        Self { grid: grid.clone(), values, deriv: None }
    }

    /// Wrap raw node values together with derivative samples.
    pub fn from_parts(grid: &Arc<RadialGrid<S>>, values: Vec<S>, deriv: Option<Vec<S>>) -> Self {
        assert_eq!(values.len(), grid.len());
        if let Some(d) = &deriv {
            assert_eq!(d.len(), grid.len());
        }
        Self { grid: grid.clone(), values, deriv }
    }

    #[inline]
    pub fn grid(&self) -> &Arc<RadialGrid<S>> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[S] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [S] {
        self.deriv = None;
        &mut self.values
    }

    #[inline]
    pub fn has_analytic_deriv(&self) -> bool {
        self.deriv.is_some()
    }

    /// Check two fields share a grid.
    pub fn same_grid(&self, other: &Self) -> Result<(), FieldError> {
        if self.grid.as_ref() == other.grid.as_ref() {
            Ok(())
        } else {
            Err(FieldError::MismatchedGrids("fields on different grids"))
        }
    }

    /// Radial derivative samples: stored analytic values when present,
    /// otherwise centered differences. Smooth radial profiles are even at the
    /// origin, so the derivative at r = 0 vanishes (even reflection); the
    /// outer node uses a second-order one-sided stencil.
    pub fn gradient(&self) -> Vec<S> {
        if let Some(d) = &self.deriv {
            return d.clone();
        }
        let v = &self.values;
        let m = self.grid.last();
        let dr = self.grid.dr();
        let two_dr = S::of(2.0) * dr;
        let mut g = vec![S::zero(); m + 1];
        g[0] = S::zero();
        for i in 1..m {
            g[i] = (v[i + 1] - v[i - 1]) / two_dr;
        }
        g[m] = (S::of(3.0) * v[m] - S::of(4.0) * v[m - 1] + v[m - 2]) / two_dr;
        g
    }

    /// `int_{R^N} f^2 dx` (with sampled-tail estimate).
    pub fn l2_norm_sq(&self) -> S {
        self.grid.l2_inner(&self.values, &self.values)
    }

    /// `int_{R^N} |grad f|^2 dx`.
    pub fn grad_norm_sq(&self) -> S {
        let g = self.gradient();
        self.grid.l2_inner(&g, &g)
    }

    /// `int_{R^N} f g dx`.
    pub fn l2_inner(&self, other: &Self) -> S {
        self.grid.l2_inner(&self.values, &other.values)
    }

    /// `int_{R^N} grad f . grad g dx`.
    pub fn h1_inner(&self, other: &Self) -> S {
        let a = self.gradient();
        let b = other.gradient();
        self.grid.l2_inner(&a, &b)
    }

    /// Sup norm over the nodes.
    pub fn sup_norm(&self) -> S {
        self.values.iter().fold(S::zero(), |acc, &x| acc.max(x.abs()))
    }

    /// Pointwise map, dropping stored derivatives.
    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&x| f(x)).collect(),
            deriv: None,
        }
    }

    /// Linear combination `a * self + b * other`.
    pub fn lin_comb(&self, a: S, other: &Self, b: S) -> Self {
        debug_assert!(self.grid.as_ref() == other.grid.as_ref());
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        Self { grid: self.grid.clone(), values, deriv: None }
    }

    /// Add `a * other` in place.
    pub fn axpy(&mut self, a: S, other: &Self) {
        debug_assert!(self.grid.as_ref() == other.grid.as_ref());
        self.deriv = None;
        for (x, &y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }

    /// Build a reusable point evaluator (monotone cubic interpolation inside
    /// the grid, fitted power-law continuation beyond `r_max`).
    pub fn resampler(&self) -> FieldResampler<S> {
        let m = self.grid.last();
        let last = self.values[m];
        let tail_slope = if last.abs() < S::of(1e-300) {
            None
        } else {
            let k = (m / 20).clamp(4, 200);
            let xs: Vec<S> = (m - k..=m).map(|i| self.grid.r(i)).collect();
            let ys: Vec<S> = (m - k..=m).map(|i| self.values[i].abs()).collect();
            tail_log_slope(&xs, &ys).filter(|&p| p < S::zero())
        };
        FieldResampler {
            interp: MonotoneCubic::new(self.grid.dr(), &self.values),
            r_max: self.grid.r_max(),
            last,
            tail_slope,
        }
    }

    /// Evaluate at an arbitrary radius. For repeated queries build a
    /// [`resampler`](Self::resampler) once instead.
    pub fn eval(&self, r: S) -> S {
        self.resampler().eval(r)
    }

    /// Amplitude of the outer tail relative to the sup norm.
    pub fn relative_tail_amplitude(&self) -> S {
        let sup = self.sup_norm();
        if sup == S::zero() {
            S::zero()
        } else {
            self.values[self.grid.last()].abs() / sup
        }
    }

    /// Write as CSV with header `r,value` and 17-significant-digit floats.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), FieldError> {
        writeln!(out, "r,value")?;
        for (i, &v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", fmt_g17(self.grid.r(i).to_f64_lossy()), fmt_g17(v.to_f64_lossy()))?;
        }
        Ok(())
    }

    /// Read a CSV produced by [`write_csv`](Self::write_csv) onto the given grid.
    pub fn read_csv<Rd: BufRead>(grid: &Arc<RadialGrid<S>>, reader: Rd) -> Result<Self, FieldError> {
        let mut values = Vec::with_capacity(grid.len());
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('r') {
                continue;
            }
            let mut parts = trimmed.split(',');
            let _r = parts.next();
            let v = parts
                .next()
                .ok_or_else(|| FieldError::Parse { line: lineno + 1, msg: "missing value column".into() })?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|e| FieldError::Parse { line: lineno + 1, msg: format!("{e}") })?;
            values.push(S::of(v));
        }
        if values.len() != grid.len() {
            return Err(FieldError::Parse {
                line: 0,
                msg: format!("expected {} samples, found {}", grid.len(), values.len()),
            });
        }
        Ok(Self::from_values(grid, values))
    }
}

/// Reusable point evaluator for a radial field.
pub struct FieldResampler<S: Real> {
    interp: MonotoneCubic<S>,
    r_max: S,
    last: S,
    tail_slope: Option<S>,
}

impl<S: Real> FieldResampler<S> {
    pub fn eval(&self, r: S) -> S {
        if r <= self.r_max {
            return self.interp.eval(r);
        }
        match self.tail_slope {
            Some(p) => self.last * (r / self.r_max).powf(p),
            None => S::zero(),
        }
    }
}

/// Format a float with 17 significant digits (round-trips f64 exactly).
pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}
