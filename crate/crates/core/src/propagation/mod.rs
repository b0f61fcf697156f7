//! Spatially resolved propagation of the signal pair.
//!
//! [`cw`] covers stationary fields along z, [`pulse`] pulses in the co-moving
//! frame and [`paraxial`] focussed beams with a transverse density profile.

pub mod cw;
pub mod paraxial;
pub mod pulse;

pub use cw::{propagate_cw_1d, propagate_cw_oracle, CwProfile};
pub use paraxial::{
    paraxial_step, run_paraxial_scenario, BeamSpec, CloudSpec, ParaxialGrid, ParaxialOptions, ParaxialResult,
    ParaxialStepper, Port, RadialField,
};
pub use pulse::{cross_correlation, gaussian_pulse, propagate_pulse_1d, PulseMode, PulseOptions, PulseResult};

use crate::error::{Error, Result};

/// Uniform, increasing 1D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub nodes: Vec<f64>,
}

impl Grid1D {
    /// `n` nodes from `start` to `end` inclusive.
    pub fn uniform(start: f64, end: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("grid", "needs at least two nodes"));
        }
        if !(end > start) || !start.is_finite() || !end.is_finite() {
            return Err(Error::invalid("grid", "end must exceed start"));
        }
        let h = (end - start) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| start + h * i as f64).collect();
        nodes[n - 1] = end;
        Ok(Grid1D { nodes })
    }

    /// Nodes from `start` to at least `end` with spacing at most `max_step`.
    pub fn with_max_step(start: f64, end: f64, max_step: f64) -> Result<Self> {
        if !(max_step > 0.0) {
            return Err(Error::invalid("step", "must be positive"));
        }
        let n = ((end - start) / max_step).ceil().max(1.0) as usize + 1;
        Self::uniform(start, end, n)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::invalid("grid", "needs at least two nodes"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("grid", "nodes must increase"));
        }
        Ok(Grid1D { nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest spacing.
    pub fn step(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid() {
        let g = Grid1D::uniform(0.0, 1.0, 11).unwrap();
        assert_eq!(g.len(), 11);
        assert!((g.step() - 0.1).abs() < 1e-15);
        assert_eq!(g.end(), 1.0);
        assert!(Grid1D::uniform(0.0, 1.0, 1).is_err());
        assert!(Grid1D::uniform(1.0, 0.0, 5).is_err());
        assert!(Grid1D::from_nodes(vec![0.0, 0.0]).is_err());
        let g = Grid1D::with_max_step(0.0, 1.0, 0.3).unwrap();
        assert!(g.step() <= 0.3);
    }
}
