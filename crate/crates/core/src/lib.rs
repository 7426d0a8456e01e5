//! Decision models for storm relief logistics.
//!
//! The crate covers two coupled planning problems:
//!
//! * **Dispatch timing.** A pre-staging LP allocates supplies to regional
//!   sites under a site-loss risk penalty ([`prestage`]); the fixed plan is
//!   re-evaluated over a tree of landfall outcomes and forecast positions
//!   ([`scenario`]); and a per-supply dispatch time is selected by weighing
//!   expected closing time, lateness, and expected unmet demand ([`timing`]).
//! * **Robust last-mile routing.** A route-based vehicle/cargo MIP
//!   ([`blue`]) is hardened against worst-case link disruptions found by a
//!   budgeted adversary ([`red`]) inside an iterative penalize-and-reroute
//!   loop ([`robust`]), with candidate routes produced by penalized shortest
//!   paths ([`route`]).
//!
//! Everything is deterministic: identical inputs produce identical outputs,
//! including solver pivot order and all tie-breaking. The crate is
//! `no_std + alloc`; file formats and the CLI live in the companion
//! `stormstage` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod blue;
pub mod model;
pub mod num;
pub mod opt;
pub mod prestage;
pub mod red;
pub mod robust;
pub mod route;
pub mod scenario;
pub mod timing;
