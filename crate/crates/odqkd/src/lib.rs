//! Simulation and analysis toolkit for open-destination MDI-QKD networks.
//!
//! An N-user star network shares one leg of a GHZ resource with each user's
//! untrusted relay; users send BB84 photons to those relays, which perform
//! linear-optics Bell measurements and announce the results. Any two (or
//! three) users can then distill a key from the same transcript by
//! post-selecting on the other users' X-basis announcements.
//!
//! The crate provides, module by module:
//!
//! * [`quantum`] — exact dense states and measurements for up to 8 qubits,
//!   the ground truth every protocol rule is checked against;
//! * [`protocol`] — the BB84 alphabet, announcement records, parity rules,
//!   and the full sifting logic for key and conference rounds;
//! * [`detector`] — equivalent-detector parameters for a Bell analyzer fed
//!   by a local photon (per-basis efficiencies and dark counts);
//! * [`keyrate`] — binary entropy, yields, error rates, secret key rates,
//!   and rate-versus-distance sweeps with cutoff search;
//! * [`netsim`] — a seeded, reproducible event-level Monte Carlo of the
//!   whole network, cross-validated against the analytic predictions;
//! * [`verify`] — exhaustive table verification used by tests and the CLI.
//!
//! The `odqkd-cli` crate exposes all of this as the `odqkd` command with the
//! `verify-tables`, `detector-params`, `sweep`, and `montecarlo` subcommands.

pub mod detector;
pub mod keyrate;
pub mod netsim;
pub mod protocol;
pub mod quantum;
pub mod verify;

pub use detector::{equivalent_detector, DetectorParams, EquivalentDetector};
pub use keyrate::{binary_entropy, key_rate_realistic, sweep, KeyRatePoint, LinkBudget, SweepReport};
pub use netsim::{run_session, SessionConfig, SessionStats, Topology};
pub use protocol::{sift_round, Basis, Bb84Symbol, BsmOutcome, RoundRecord, SiftResult};
pub use quantum::{basis_state, ghz_state, werner_ghz, DensityOperator, PureState};

// Doc-test the guide: every fenced Rust block in the book chapters compiles
// and runs under `cargo test --doc`, keeping the prose in sync with the API.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub struct $name;
        };
    }

    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(QuantumStates, "../../../book/src/quantum-states.md");
    chapter!(ProtocolSifting, "../../../book/src/protocol-sifting.md");
    chapter!(DetectorModel, "../../../book/src/detector-model.md");
    chapter!(KeyRates, "../../../book/src/key-rates.md");
    chapter!(NetworkSimulation, "../../../book/src/network-simulation.md");
    chapter!(CliReference, "../../../book/src/cli-reference.md");
}
