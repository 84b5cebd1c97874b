//! Simulation and controller-synthesis toolkit for variable-speed wind
//! turbines with doubly fed induction generators.
//!
//! The crate couples a fifth-order nonlinear electromechanical plant model
//! (per-unit, dq-frame) with a dual-mode nonlinear controller that combines
//! feedback linearization, pole placement, a clamped speed loop and a slow
//! gradient flow on a quadratic power-tracking objective. A scenario engine
//! reproduces maximum-power-tracking, power-regulation, mode-switching and
//! robustness experiments at desk scale, and the CLI exposes both the
//! scenario runs and the numerical verification sweeps behind them.

pub mod numerics;
pub mod controller;
pub mod plant;

pub use numerics::NumericsError;
