//! A desk-scale simulated hybrid HPC environment built around loop-based
//! photonic QPUs.
//!
//! - [`fock`]: exact boson-sampling physics of the interferometer.
//! - [`service`]: an HTTP service emulating one QPU with a FIFO job queue.
//! - [`scheduler`]: a fair-share workload manager that leases QPUs as licenses
//!   alongside CPU and GPU slots.
//! - [`client`]: submission, polling and shot splitting across QPU endpoints.
//! - [`algos`]: hybrid algorithms (binary bosonic solver, a trainable photonic
//!   layer, and quantum-driven neural architecture search).
//! - [`workload`]: the named workloads a scheduler job can run.

pub mod algos;
pub mod client;
pub mod fock;
pub mod http;
pub mod scheduler;
pub mod service;
pub mod workload;

pub use client::{EndpointPool, QpuClient, SampleResult, SplitPolicy};
pub use fock::{CircuitSpec, FockState, Histogram, OutcomeDistribution};
pub use scheduler::client::SchedulerClient;
pub use scheduler::{Allocation, ResourceRequest};
