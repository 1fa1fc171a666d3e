//! Time-independent one-dimensional Hamiltonians H(p, q) = p²/2m + V(q)
//! and the staggered single-step evolution used by the lattice module.
//!
//! Three potentials are supported: V = 0 (free), V = ½mω²q² (harmonic),
//! and V = Fq (linear). All quantities are in natural units with ħ = 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which potential enters H(p, q) = p²/2m + V(q).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HamiltonianKind {
    Free,
    Harmonic,
    LinearPotential,
}

impl HamiltonianKind {
    pub fn name(&self) -> &'static str {
        match self {
            HamiltonianKind::Free => "free",
            HamiltonianKind::Harmonic => "harmonic",
            HamiltonianKind::LinearPotential => "linear-potential",
        }
    }
}

/// A concrete Hamiltonian: kind, mass, and the single potential parameter
/// that applies to the kind (ω for harmonic, F for linear).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hamiltonian {
    pub kind: HamiltonianKind,
    pub mass: f64,
    pub omega: f64,
    pub force: f64,
}

impl Hamiltonian {
    pub fn free(mass: f64) -> Result<Self> {
        Self::build(HamiltonianKind::Free, mass, 0.0, 0.0)
    }

    pub fn harmonic(mass: f64, omega: f64) -> Result<Self> {
        if omega < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "omega must be nonnegative, got {omega}"
            )));
        }
        Self::build(HamiltonianKind::Harmonic, mass, omega, 0.0)
    }

    pub fn linear(mass: f64, force: f64) -> Result<Self> {
        if !force.is_finite() {
            return Err(Error::NonFinite("force"));
        }
        Self::build(HamiltonianKind::LinearPotential, mass, 0.0, force)
    }

    fn build(kind: HamiltonianKind, mass: f64, omega: f64, force: f64) -> Result<Self> {
        if !mass.is_finite() || !omega.is_finite() {
            return Err(Error::NonFinite("hamiltonian parameter"));
        }
        if mass <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "mass must be positive, got {mass}"
            )));
        }
        Ok(Hamiltonian {
            kind,
            mass,
            omega,
            force,
        })
    }

    /// V(q).
    pub fn potential(&self, q: f64) -> f64 {
        match self.kind {
            HamiltonianKind::Free => 0.0,
            HamiltonianKind::Harmonic => 0.5 * self.mass * self.omega * self.omega * q * q,
            HamiltonianKind::LinearPotential => self.force * q,
        }
    }

    /// H_q = ∂H/∂q = V'(q).
    pub fn h_q(&self, q: f64) -> f64 {
        match self.kind {
            HamiltonianKind::Free => 0.0,
            HamiltonianKind::Harmonic => self.mass * self.omega * self.omega * q,
            HamiltonianKind::LinearPotential => self.force,
        }
    }

    /// H_p = ∂H/∂p = p/m.
    pub fn h_p(&self, p: f64) -> f64 {
        p / self.mass
    }

    /// H(p, q).
    pub fn energy(&self, p: f64, q: f64) -> f64 {
        p * p / (2.0 * self.mass) + self.potential(q)
    }

    /// Solve q̇ = H_p for p. Exact for all supported kinds: p = m q̇.
    pub fn momentum_from_velocity(&self, qdot: f64) -> f64 {
        self.mass * qdot
    }

    /// Solve ṗ = −H_q for q. Only the harmonic H_q = mω²q is invertible.
    pub fn position_from_pdot(&self, pdot: f64) -> Result<f64> {
        match self.kind {
            HamiltonianKind::Harmonic if self.omega > 0.0 => {
                Ok(-pdot / (self.mass * self.omega * self.omega))
            }
            _ => Err(Error::NotInvertibleInQ {
                kind: self.kind.name(),
            }),
        }
    }

    /// One staggered (kick–drift–kick) step of q̇ = H_p, ṗ = −H_q.
    ///
    /// Input and output (q, p) are synchronous; the momentum internally
    /// lives at the half step, matching the lattice's Δt/2 offset. Exact
    /// for the free particle, second order otherwise.
    pub fn step(&self, q: f64, p: f64, dt: f64) -> Result<(f64, f64)> {
        if !q.is_finite() || !p.is_finite() || !dt.is_finite() {
            return Err(Error::NonFinite("step input"));
        }
        if dt <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive, got {dt}"
            )));
        }
        let p_half = p - 0.5 * dt * self.h_q(q);
        let q_next = q + dt * self.h_p(p_half);
        let p_next = p_half - 0.5 * dt * self.h_q(q_next);
        Ok((q_next, p_next))
    }
}
