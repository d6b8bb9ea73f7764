//! Spectrum-sensing experimentation toolkit.
//!
//! The crate covers the full loop of a sensing study:
//!
//! - [`sigmod`] synthesizes modulated I/Q frames, applies channel and noise,
//!   and assembles deterministic labeled datasets (SPSD container).
//! - [`endet`] is the classical energy detector with exact CFAR thresholds
//!   and the closed-form SNR-wall under noise uncertainty.
//! - [`tensornet`] is a small self-contained neural-network engine (conv,
//!   dense, time-distributed dense, LSTM, softmax, dropout, Adam) with
//!   finite-difference gradient checking.
//! - [`detectnet`] builds and trains the CLDNN signal detector with the
//!   two-stage false-alarm-aware training strategy.
//! - [`coopfuse`] simulates multi-node cooperative sensing with hard fusion
//!   rules and the learned soft-combination fusion network.
//! - [`harness`] ties everything into reproducible experiments, detection
//!   curves, CSV emission, and SNR-wall reports.
//!
//! Start with the runnable demos under `examples/`; the `specsense` binary
//! exposes the same pipeline as subcommands.

pub mod cli;
pub mod coopfuse;
pub mod detectnet;
pub mod endet;
pub mod harness;
pub mod rng;
pub mod sigmod;
pub mod tensornet;
