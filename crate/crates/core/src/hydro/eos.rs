//! Ideal-gas equation of state and conserved/primitive conversion.
//!
//! Conserved layout per cell: `[ρ, ρu_0 .. ρu_{d-1}, E, (E_rad)]`.
//! Primitive layout: `[ρ, u_0 .. u_{d-1}, P, (E_rad)]`.

use std::fmt;

/// Component layout of the state vector for a given dimensionality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub dims: usize,
    pub radiation: bool,
}

impl Layout {
    pub fn new(dims: usize, radiation: bool) -> Self {
        Self { dims, radiation }
    }

    pub fn ncomp(&self) -> usize {
        self.dims + 2 + usize::from(self.radiation)
    }

    pub fn momentum(&self, axis: usize) -> usize {
        1 + axis
    }

    /// Index of total energy (conserved) or pressure (primitive).
    pub fn energy(&self) -> usize {
        self.dims + 1
    }

    pub fn rad(&self) -> Option<usize> {
        self.radiation.then_some(self.dims + 2)
    }
}

/// Which state invariant a cell broke, and the offending value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    Density(f64),
    Pressure(f64),
    Radiation(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Density(v) => write!(f, "density {v}"),
            Violation::Pressure(v) => write!(f, "pressure {v}"),
            Violation::Radiation(v) => write!(f, "radiation energy {v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealGas {
    pub gamma: f64,
}

impl IdealGas {
    pub fn new(gamma: f64) -> Result<Self, String> {
        if gamma > 1.0 && gamma.is_finite() {
            Ok(Self { gamma })
        } else {
            Err(format!("adiabatic exponent must exceed 1, got {gamma}"))
        }
    }

    pub fn sound_speed(&self, rho: f64, p: f64) -> f64 {
        (self.gamma * p / rho).sqrt()
    }

    /// Converts conserved `u` to primitive `q`, checking positivity.
    pub fn to_primitive(&self, layout: Layout, u: &[f64], q: &mut [f64]) -> Result<(), Violation> {
        let rho = u[0];
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Violation::Density(rho));
        }
        q[0] = rho;
        let mut kinetic = 0.0;
        for axis in 0..layout.dims {
            let m = u[1 + axis];
            let v = m / rho;
            q[1 + axis] = v;
            kinetic += 0.5 * m * v;
        }
        let e = layout.energy();
        let p = (self.gamma - 1.0) * (u[e] - kinetic);
        if !(p > 0.0) || !p.is_finite() {
            return Err(Violation::Pressure(p));
        }
        q[e] = p;
        if let Some(r) = layout.rad() {
            if !(u[r] >= 0.0) || !u[r].is_finite() {
                return Err(Violation::Radiation(u[r]));
            }
            q[r] = u[r];
        }
        Ok(())
    }

    /// Converts primitive `q` to conserved `u`.
    pub fn to_conserved(&self, layout: Layout, q: &[f64], u: &mut [f64]) {
        let rho = q[0];
        u[0] = rho;
        let mut kinetic = 0.0;
        for axis in 0..layout.dims {
            let v = q[1 + axis];
            u[1 + axis] = rho * v;
            kinetic += 0.5 * rho * v * v;
        }
        let e = layout.energy();
        u[e] = q[e] / (self.gamma - 1.0) + kinetic;
        if let Some(r) = layout.rad() {
            u[r] = q[r];
        }
    }

    /// Checks the conserved-state invariants without keeping primitives.
    pub fn check(&self, layout: Layout, u: &[f64]) -> Result<(), Violation> {
        let mut q = [0.0; 8];
        self.to_primitive(layout, u, &mut q[..layout.ncomp()])
    }
}
