//! Space dimension and the exponents derived from it.

use crate::real::Real;

/// Space dimension N of the radial problem. Only 3, 4 and 5 are admitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    /// N = 3 (quintic nonlinearity).
    Three,
    /// N = 4 (cubic nonlinearity).
    Four,
    /// N = 5 (|u|^(4/3) u nonlinearity).
    Five,
}

impl Dimension {
    /// Construct from an integer, rejecting anything outside {3,4,5}.
    pub fn new(n: u32) -> Option<Self> {
        match n {
            3 => Some(Self::Three),
            4 => Some(Self::Four),
            5 => Some(Self::Five),
            _ => None,
        }
    }

    /// N as an integer.
    #[inline]
    pub fn n(self) -> u32 {
        match self {
            Self::Three => 3,
            Self::Four => 4,
            Self::Five => 5,
        }
    }

    /// N as a scalar.
    #[inline]
    pub fn n_s<S: Real>(self) -> S {
        S::of(self.n() as f64)
    }

    /// Critical Sobolev exponent 2* = 2N/(N-2).
    #[inline]
    pub fn critical_exponent(self) -> f64 {
        let n = self.n() as f64;
        2.0 * n / (n - 2.0)
    }

    /// Nonlinearity power 4/(N-2) = 2* - 2.
    #[inline]
    pub fn nonlin_power(self) -> f64 {
        4.0 / (self.n() as f64 - 2.0)
    }

    /// N(N-2), the scale constant inside the ground state profile.
    #[inline]
    pub fn scale_const(self) -> f64 {
        let n = self.n() as f64;
        n * (n - 2.0)
    }

    /// Surface measure of the unit sphere S^(N-1).
    #[inline]
    pub fn sphere_area<S: Real>(self) -> S {
        let pi = S::PI();
        match self {
            Self::Three => S::of(4.0) * pi,
            Self::Four => S::of(2.0) * pi * pi,
            Self::Five => S::of(8.0 / 3.0) * pi * pi,
        }
    }

    /// Exponent (N-1)/2 of the first-derivative-removing substitution w = r^((N-1)/2) u.
    #[inline]
    pub fn w_power(self) -> f64 {
        (self.n() as f64 - 1.0) / 2.0
    }

    /// Centrifugal coefficient (N-1)(N-3)/4 of the substituted operator.
    #[inline]
    pub fn centrifugal(self) -> f64 {
        let n = self.n() as f64;
        (n - 1.0) * (n - 3.0) / 4.0
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.n())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admits_only_3_4_5() {
        assert!(Dimension::new(2).is_none());
        assert!(Dimension::new(6).is_none());
        for n in 3..=5 {
            assert_eq!(Dimension::new(n).unwrap().n(), n);
        }
    }

    #[test]
    fn exponents() {
        assert_eq!(Dimension::Three.critical_exponent(), 6.0);
        assert_eq!(Dimension::Four.critical_exponent(), 4.0);
        assert_eq!(Dimension::Five.critical_exponent(), 10.0 / 3.0);
        assert_eq!(Dimension::Three.nonlin_power(), 4.0);
        assert_eq!(Dimension::Four.nonlin_power(), 2.0);
        assert_eq!(Dimension::Five.nonlin_power(), 4.0 / 3.0);
        assert_eq!(Dimension::Five.centrifugal(), 2.0);
        assert_eq!(Dimension::Three.centrifugal(), 0.0);
    }
}
