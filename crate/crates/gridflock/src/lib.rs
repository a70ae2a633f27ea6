//! Desk-scale simulation toolkit for scale-free adaptive distributed
//! cooperative voltage control of inverter-based microgrids.
//!
//! The toolkit covers the full loop: a Riccati-based gain design
//! ([`linalg::care`]), time-varying weighted communication graphs with
//! per-link delays, loss, and noise ([`graph`]), the adaptive nonlinear
//! protocol itself ([`protocol`]), a reduced pilot-bus plant model
//! ([`plant`]), a deterministic fixed-step delay integrator ([`engine`]),
//! a frequency-domain delay-stability analyzer ([`stability`]), and a
//! scenario-driven CLI ([`scenario`], [`cli`]).
//!
//! The protocol is scale-free: each agent's controller is built from the
//! agent model `(A, B)` and a design weight `M` alone, never from the
//! network size or Laplacian spectrum bounds. That constraint is enforced
//! by API shape in [`protocol`].

pub mod cli;
pub mod engine;
pub mod graph;
pub mod linalg;
pub mod plant;
pub mod protocol;
pub mod rng;
pub mod scenario;
pub mod stability;
pub mod trace;
