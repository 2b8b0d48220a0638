//! Capacity expansion planning for multi-commodity networks when demand is
//! uncertain.
//!
//! Two planning models are provided. [`drso`] plans against the worst
//! demand distribution with a given mean and variance per commodity, using
//! a closed-form worst-case shortfall ([`ambiguity`]) and a derivative-free
//! search over planned routing levels. [`robust`] plans against the worst
//! scenario of a finite set. [`evaluation`] replays plans on sampled demand
//! and runs repeated train/evaluate experiments.
//!
//! Everything is built on [`lp`], a small LP layer with a dense bounded
//! simplex (warm re-solves after right-hand-side changes) and a sparse
//! backend for large models.
//!
//! ```
//! use netplan::ambiguity::MomentInfo;
//! use netplan::drso::{solve_drso, DrsoConfig};
//! use netplan::network::{Commodity, Instance, Network};
//!
//! let net = Network::new(
//!     vec!["a".into(), "b".into()],
//!     vec![("ab".into(), "a".into(), "b".into(), 5.0, 40.0)],
//! )?;
//! let inst = Instance::new(net, vec![Commodity { id: "k".into(), source: 0, sink: 1 }], 130.0)?;
//! let sol = solve_drso(&inst, &[MomentInfo::new(20.0, 100.0)?], &DrsoConfig::default())?;
//! assert!(sol.plan.expansions[0] > 15.0);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod ambiguity;
pub mod cli;
pub mod drso;
pub mod evaluation;
pub mod formulations;
pub mod io;
pub mod lp;
pub mod network;
pub mod robust;
