//! Piecewise radial interaction kernels.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::Region;

/// Radial profile of one kernel piece.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    /// `c` inside the horizon ball.
    Constant(f64),
    /// `coef * r^-(2 + 2s)` inside the horizon ball.
    Fractional { coef: f64, s: f64 },
}

/// Profile with unit coefficient; the part of a piece that quadrature depends on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Constant { delta: f64 },
    Fractional { s: f64, delta: f64 },
}

impl Shape {
    pub fn delta(&self) -> f64 {
        match *self {
            Shape::Constant { delta } | Shape::Fractional { delta, .. } => delta,
        }
    }

    /// Bit pattern usable as an ordered cache key.
    pub fn key(&self) -> (u8, u64, u64) {
        match *self {
            Shape::Constant { delta } => (0, 0, delta.to_bits()),
            Shape::Fractional { s, delta } => (1, s.to_bits(), delta.to_bits()),
        }
    }

    /// Unit-coefficient profile value at distance `r` (no horizon cut).
    pub fn radial(&self, r: f64) -> f64 {
        match *self {
            Shape::Constant { .. } => 1.0,
            Shape::Fractional { s, .. } => r.powf(-2.0 - 2.0 * s),
        }
    }
}

/// A radial profile together with its own horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub profile: Profile,
    pub delta: f64,
}

impl Piece {
    pub fn constant(c: f64, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidKernel(format!("kernel coefficient must be nonnegative, got {c}")));
        }
        Ok(Self { profile: Profile::Constant(c), delta })
    }

    pub fn fractional(coef: f64, s: f64, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        check_order(s)?;
        if !(coef >= 0.0) || !coef.is_finite() {
            return Err(Error::InvalidKernel(format!("kernel coefficient must be nonnegative, got {coef}")));
        }
        Ok(Self { profile: Profile::Fractional { coef, s }, delta })
    }

    pub fn coefficient(&self) -> f64 {
        match self.profile {
            Profile::Constant(c) => c,
            Profile::Fractional { coef, .. } => coef,
        }
    }

    pub fn shape(&self) -> Shape {
        match self.profile {
            Profile::Constant(_) => Shape::Constant { delta: self.delta },
            Profile::Fractional { s, .. } => Shape::Fractional { s, delta: self.delta },
        }
    }

    /// Kernel value at distance `r`; zero beyond the horizon.
    pub fn value(&self, r: f64) -> f64 {
        if r > self.delta {
            return 0.0;
        }
        self.coefficient() * self.shape().radial(r)
    }

    /// `int_{B_delta(0)} z_1^2 gamma(|z|) dz`, in closed form.
    pub fn second_moment(&self) -> f64 {
        second_moment(self)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidKernel(format!("horizon must be positive, got {delta}")));
    }
    Ok(())
}

fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidKernel(format!("fractional order must lie in (0, 1), got {s}")));
    }
    Ok(())
}

/// `(2 - 2s) / (pi delta^(2 - 2s))`, the constant normalizing the fractional profile.
pub fn scaling_constant(s: f64, delta: f64) -> Result<f64> {
    check_order(s)?;
    check_delta(delta)?;
    Ok((2.0 - 2.0 * s) / (PI * delta.powf(2.0 - 2.0 * s)))
}

/// `4 / (pi delta^4)`, the constant giving the indicator kernel unit second moment.
pub fn four_over_pi_delta4(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(4.0 / (PI * delta.powi(4)))
}

/// Second moment `int_{B_delta(0)} z_1^2 gamma(|z|) dz` of a piece.
pub fn second_moment(piece: &Piece) -> f64 {
    let d = piece.delta;
    match piece.profile {
        Profile::Constant(c) => c * PI * d.powi(4) / 4.0,
        Profile::Fractional { coef, s } => coef * PI * d.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s),
    }
}

/// Table of kernel pieces indexed by the ordered pair (region of x, region of y).
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    regions: usize,
    pieces: Vec<Option<Piece>>,
}

impl KernelSpec {
    /// Empty table for `subdomains` subdomains plus the interaction layer.
    pub fn new(subdomains: usize) -> Self {
        let regions = subdomains + 1;
        Self { regions, pieces: vec![None; regions * regions] }
    }

    /// The same piece for every region pair.
    pub fn uniform(subdomains: usize, piece: Piece) -> Self {
        let mut k = Self::new(subdomains);
        k.pieces.iter_mut().for_each(|p| *p = Some(piece));
        k
    }

    pub fn subdomain_count(&self) -> usize {
        self.regions - 1
    }

    fn slot(&self, rx: Region, ry: Region) -> Result<usize> {
        let (a, b) = (rx.index(), ry.index());
        if a >= self.regions || b >= self.regions {
            return Err(Error::InvalidKernel(format!("region pair {rx:?}/{ry:?} outside the kernel table")));
        }
        Ok(a * self.regions + b)
    }

    pub fn set(&mut self, rx: Region, ry: Region, piece: Piece) -> Result<()> {
        let k = self.slot(rx, ry)?;
        self.pieces[k] = Some(piece);
        Ok(())
    }

    /// Set the piece for both orderings of the pair.
    pub fn set_symmetric(&mut self, a: Region, b: Region, piece: Piece) -> Result<()> {
        self.set(a, b, piece)?;
        self.set(b, a, piece)
    }

    pub fn piece(&self, rx: Region, ry: Region) -> Result<&Piece> {
        let k = self.slot(rx, ry)?;
        self.pieces[k]
            .as_ref()
            .ok_or_else(|| Error::InvalidKernel(format!("no kernel piece for region pair {rx:?}/{ry:?}")))
    }

    pub fn try_piece(&self, rx: Region, ry: Region) -> Option<&Piece> {
        self.slot(rx, ry).ok().and_then(|k| self.pieces[k].as_ref())
    }

    pub fn is_complete(&self) -> bool {
        self.pieces.iter().all(|p| p.is_some())
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.regions)
            .all(|a| (0..self.regions).all(|b| self.pieces[a * self.regions + b] == self.pieces[b * self.regions + a]))
    }

    /// Largest horizon over all pieces.
    pub fn max_delta(&self) -> f64 {
        self.pieces.iter().flatten().map(|p| p.delta).fold(0.0, f64::max)
    }

    /// `gamma(x, y)` for `x` in region `rx` and `y` in region `ry`.
    pub fn eval(&self, x: Point, y: Point, rx: Region, ry: Region) -> Result<f64> {
        Ok(self.piece(rx, ry)?.value((x - y).norm()))
    }
}
