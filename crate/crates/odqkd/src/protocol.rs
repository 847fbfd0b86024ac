//! Discrete protocol layer: the BB84 preparation alphabet, relay announcement
//! semantics, and the complete sifting logic for two-user key rounds and
//! three-user conference rounds.
//!
//! The network distributes one leg of an N-partite GHZ state to each relay,
//! and every user sends a BB84-encoded photon to their own relay. A relay
//! that observes a valid two-detector coincidence announces a Bell result
//! (`psi+` or `psi-`); everything else is a failure. Sifting combines the
//! announced Bell results with the auxiliary users' X-basis states to decide,
//! per round, whether the communication users' bits are kept and whether one
//! of them must flip.
//!
//! The correlation bookkeeping reduces to parities:
//!
//! * [`sigma_parity`] counts `-` signs in an X-symbol string,
//! * [`tau_parity`] combines the auxiliary parity with the two communication
//!   relays' Bell results; `tau = 1` means X-basis bits are anticorrelated,
//! * [`equivalent_bsm`] / [`ghz_analyzer_equivalent`] express the same rule
//!   as the measurement-correspondence tables, row for row.
//!
//! Every rule here is verified against exact state projections in the
//! `quantum` module (see the `verify` module and the oracle test suites).

use serde::{Deserialize, Serialize};

mod wire;

pub use wire::{read_records, write_records, WireError};

/// Preparation/announcement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

/// One of the four BB84 polarization states.
///
/// The fixed polarization-to-qubit map is `H = |0>`, `V = |1>`,
/// `D = |+> = (|0>+|1>)/sqrt(2)`, `A = |-> = (|0>-|1>)/sqrt(2)`.
/// The wire spellings (`"H"`, `"V"`, `"D"`, `"A"`) follow the same map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bb84Symbol {
    #[serde(rename = "H")]
    Zero,
    #[serde(rename = "V")]
    One,
    #[serde(rename = "D")]
    Plus,
    #[serde(rename = "A")]
    Minus,
}

impl Bb84Symbol {
    pub const ALL: [Bb84Symbol; 4] = [
        Bb84Symbol::Zero,
        Bb84Symbol::One,
        Bb84Symbol::Plus,
        Bb84Symbol::Minus,
    ];

    /// Basis this symbol belongs to. Total: every symbol has exactly one.
    pub fn basis(self) -> Basis {
        match self {
            Bb84Symbol::Zero | Bb84Symbol::One => Basis::Z,
            Bb84Symbol::Plus | Bb84Symbol::Minus => Basis::X,
        }
    }

    /// Key-bit convention: `Zero`/`Plus` encode 0, `One`/`Minus` encode 1.
    pub fn bit(self) -> u8 {
        match self {
            Bb84Symbol::Zero | Bb84Symbol::Plus => 0,
            Bb84Symbol::One | Bb84Symbol::Minus => 1,
        }
    }

    /// The other symbol of the same basis.
    pub fn basis_partner(self) -> Bb84Symbol {
        match self {
            Bb84Symbol::Zero => Bb84Symbol::One,
            Bb84Symbol::One => Bb84Symbol::Zero,
            Bb84Symbol::Plus => Bb84Symbol::Minus,
            Bb84Symbol::Minus => Bb84Symbol::Plus,
        }
    }

    /// Sign of an X-basis symbol; `None` for Z-basis symbols.
    pub fn x_sign(self) -> Option<Sign> {
        match self {
            Bb84Symbol::Plus => Some(Sign::Plus),
            Bb84Symbol::Minus => Some(Sign::Minus),
            _ => None,
        }
    }

    /// Symbol encoding `bit` in `basis`.
    pub fn from_bit(basis: Basis, bit: u8) -> Bb84Symbol {
        match (basis, bit & 1) {
            (Basis::Z, 0) => Bb84Symbol::Zero,
            (Basis::Z, _) => Bb84Symbol::One,
            (Basis::X, 0) => Bb84Symbol::Plus,
            (Basis::X, _) => Bb84Symbol::Minus,
        }
    }
}

/// Announced result of one relay's Bell-state measurement.
///
/// A linear-optics Bell analyzer only resolves `|psi+-> = (|01> +- |10>)/sqrt(2)`;
/// any click pattern other than the two valid coincidences is a `Failure` and
/// the round is discarded during sifting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BsmOutcome {
    #[serde(rename = "psi+")]
    PsiPlus,
    #[serde(rename = "psi-")]
    PsiMinus,
    #[serde(rename = "fail")]
    Failure,
}

impl BsmOutcome {
    pub fn is_success(self) -> bool {
        !matches!(self, BsmOutcome::Failure)
    }

    /// Sign of a successful outcome; `None` for `Failure`.
    pub fn sign(self) -> Option<Sign> {
        match self {
            BsmOutcome::PsiPlus => Some(Sign::Plus),
            BsmOutcome::PsiMinus => Some(Sign::Minus),
            BsmOutcome::Failure => None,
        }
    }

    /// Parity bit of a successful outcome (`psi+` = 0, `psi-` = 1).
    pub fn parity(self) -> Option<u8> {
        self.sign().map(Sign::parity)
    }
}

/// A `+`/`-` sign, the letter of the parity alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn parity(self) -> u8 {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }

    pub fn xor(self, other: Sign) -> Sign {
        if self == other {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// Sign of a post-selected GHZ-class state `(|0..0> +- |1..1>)/sqrt(2)`.
///
/// For two communication users this is the equivalent Bell state
/// (`phi+`/`phi-`); for three it is the sign of the shared three-party state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GhzSign {
    #[serde(rename = "phi+")]
    Plus,
    #[serde(rename = "phi-")]
    Minus,
}

impl GhzSign {
    pub fn parity(self) -> u8 {
        match self {
            GhzSign::Plus => 0,
            GhzSign::Minus => 1,
        }
    }

    pub fn from_parity(parity: u8) -> GhzSign {
        if parity & 1 == 0 {
            GhzSign::Plus
        } else {
            GhzSign::Minus
        }
    }

    pub fn flipped(self) -> GhzSign {
        GhzSign::from_parity(self.parity() ^ 1)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("auxiliary symbol and BSM strings differ in length ({symbols} vs {outcomes})")]
    LengthMismatch { symbols: usize, outcomes: usize },
    #[error("operation requires a successful BSM outcome, got a failure")]
    BsmFailed,
    #[error("operation requires an X-basis symbol, got a Z-basis one")]
    NotXBasis,
    #[error("malformed round record: {0}")]
    MalformedRecord(String),
}

/// Parity of the number of `-` signs in a string: 0 if even, 1 if odd.
///
/// The empty string has even parity.
pub fn sigma_parity(signs: &[Sign]) -> u8 {
    signs.iter().fold(0u8, |acc, s| acc ^ s.parity())
}

/// The sifting parity for a two-user round.
///
/// `aux_symbols` are the auxiliary users' announced X symbols, `aux_bsm` the
/// corresponding relays' Bell results, and `comm_bsm` the two communication
/// relays' results. The returned bit is the parity of `-` signs in the
/// elementwise XOR of the auxiliary strings, XORed with the two communication
/// outcomes. `1` means X-basis key bits are anticorrelated and one user must
/// flip; Z-basis bits are unaffected either way.
pub fn tau_parity(
    aux_symbols: &[Bb84Symbol],
    aux_bsm: &[BsmOutcome],
    comm_bsm: (BsmOutcome, BsmOutcome),
) -> Result<u8, ProtocolError> {
    if aux_symbols.len() != aux_bsm.len() {
        return Err(ProtocolError::LengthMismatch {
            symbols: aux_symbols.len(),
            outcomes: aux_bsm.len(),
        });
    }
    let mut parity = 0u8;
    for (&symbol, &outcome) in aux_symbols.iter().zip(aux_bsm) {
        let chi = symbol.x_sign().ok_or(ProtocolError::NotXBasis)?;
        let upsilon = outcome.sign().ok_or(ProtocolError::BsmFailed)?;
        parity ^= chi.xor(upsilon).parity();
    }
    let u1 = comm_bsm.0.parity().ok_or(ProtocolError::BsmFailed)?;
    let u2 = comm_bsm.1.parity().ok_or(ProtocolError::BsmFailed)?;
    Ok(parity ^ u1 ^ u2)
}

/// Single-qubit POVM element equivalent to one relay's announcement.
///
/// A Bell projection on (GHZ leg, auxiliary photon) with the auxiliary photon
/// in a known X state acts on the GHZ leg alone as `|s><s| / 2` for an X
/// eigenstate `|s>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PovmElement {
    /// X-basis label of the projected state (`Plus` or `Minus`).
    pub outcome: Bb84Symbol,
    /// Scalar weight of the element (always 1/2 for successful outcomes).
    pub weight: f64,
}

/// Equivalent single-qubit measurement for one auxiliary relay announcement.
///
/// | auxiliary state | BSM result | element        |
/// |-----------------|------------|----------------|
/// | `+`             | `psi-`     | `\|-><-\| / 2` |
/// | `-`             | `psi-`     | `\|+><+\| / 2` |
/// | `+`             | `psi+`     | `\|+><+\| / 2` |
/// | `-`             | `psi+`     | `\|-><-\| / 2` |
pub fn povm_equivalent(
    aux_symbol: Bb84Symbol,
    bsm: BsmOutcome,
) -> Result<PovmElement, ProtocolError> {
    let chi = aux_symbol.x_sign().ok_or(ProtocolError::NotXBasis)?;
    let upsilon = bsm.sign().ok_or(ProtocolError::BsmFailed)?;
    let outcome = match chi.xor(upsilon) {
        Sign::Plus => Bb84Symbol::Plus,
        Sign::Minus => Bb84Symbol::Minus,
    };
    Ok(PovmElement {
        outcome,
        weight: 0.5,
    })
}

/// Equivalent Bell measurement between the two communication users.
///
/// Given the post-selected Bell state `bell_a` left on the communication
/// relays and those relays' own results, the three-step chain acts on the
/// users' photons as a single Bell measurement whose result is `phi+` exactly
/// when the number of minus signs among `{bell_a, bsm1, bsm2}` is even.
pub fn equivalent_bsm(
    bell_a: GhzSign,
    bsm1: BsmOutcome,
    bsm2: BsmOutcome,
) -> Result<GhzSign, ProtocolError> {
    let u1 = bsm1.parity().ok_or(ProtocolError::BsmFailed)?;
    let u2 = bsm2.parity().ok_or(ProtocolError::BsmFailed)?;
    Ok(GhzSign::from_parity(bell_a.parity() ^ u1 ^ u2))
}

/// Whether the flipping user must invert their bit.
///
/// Only X-basis rounds with an equivalent result of `phi-` flip; Z-basis
/// bits are correlated for either sign.
pub fn flip_decision(basis: Basis, equivalent: GhzSign) -> bool {
    basis == Basis::X && equivalent == GhzSign::Minus
}

/// Equivalent GHZ-analyzer result for three communication users.
///
/// The post-selected three-party sign `ghz_a` is flipped exactly when the
/// number of `psi-` results among the three communication relays is odd.
pub fn ghz_analyzer_equivalent(
    ghz_a: GhzSign,
    bsm1: BsmOutcome,
    bsm2: BsmOutcome,
    bsm3: BsmOutcome,
) -> Result<GhzSign, ProtocolError> {
    let mut parity = ghz_a.parity();
    for bsm in [bsm1, bsm2, bsm3] {
        parity ^= bsm.parity().ok_or(ProtocolError::BsmFailed)?;
    }
    Ok(GhzSign::from_parity(parity))
}

/// Why a round was discarded during sifting.
///
/// Checks run in this order: relay failures first, then auxiliary users that
/// did not announce an X symbol, then mismatched communication bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiscardReason {
    BsmFailure,
    AuxNotX,
    BasisMismatch,
}

/// Outcome of sifting one two-user round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiftResult {
    Kept {
        /// Key bits of the two communication users, flip already applied.
        bits: (u8, u8),
        /// Index of the user that flipped, when the flip rule fired.
        flip_user: Option<usize>,
    },
    Discarded(DiscardReason),
}

impl SiftResult {
    pub fn is_kept(&self) -> bool {
        matches!(self, SiftResult::Kept { .. })
    }

    pub fn bits(&self) -> Option<(u8, u8)> {
        match self {
            SiftResult::Kept { bits, .. } => Some(*bits),
            SiftResult::Discarded(_) => None,
        }
    }

    pub fn discard_reason(&self) -> Option<DiscardReason> {
        match self {
            SiftResult::Discarded(reason) => Some(*reason),
            SiftResult::Kept { .. } => None,
        }
    }
}

/// Outcome of sifting one three-user conference round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConferenceSift {
    Kept {
        /// Common announced basis (`Z` for key rounds, `X` for test rounds).
        basis: Basis,
        /// The three users' bits, flip already applied.
        bits: [u8; 3],
        /// Equivalent GHZ-analyzer result for the round.
        analyzer: GhzSign,
        /// Index of the user that flipped, when the flip rule fired.
        flip_user: Option<usize>,
    },
    Discarded(DiscardReason),
}

impl ConferenceSift {
    pub fn is_kept(&self) -> bool {
        matches!(self, ConferenceSift::Kept { .. })
    }
}

/// Full per-round transcript: private preparations plus everything announced.
///
/// `preparations` holds each user's prepared symbol and is private data; the
/// announced fields are what actually crosses the public channel. Sifting
/// reads only the announcements plus the communication users' own
/// preparations, so a record restricted to announcements carries the same
/// information (the "announcement log" equivalence exercised in the network
/// simulator tests).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_id: u64,
    /// Prepared symbol per user, indexed by user.
    pub preparations: Vec<Bb84Symbol>,
    /// Announced Bell result per relay, indexed by user.
    pub bsm: Vec<BsmOutcome>,
    /// Indices of the communication users (2 for key rounds, 3 for conference).
    pub comm_users: Vec<usize>,
    /// Announced basis per communication user, in `comm_users` order.
    pub announced_bases: Vec<Basis>,
    /// Announced X symbol per auxiliary user in ascending user order;
    /// `None` when that user prepared in the Z basis and had nothing to announce.
    pub announced_aux_symbols: Vec<Option<Bb84Symbol>>,
}

impl RoundRecord {
    /// Indices of the auxiliary users, ascending.
    pub fn aux_users(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.preparations.len()).filter(move |u| !self.comm_users.contains(u))
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let n = self.preparations.len();
        let err = |msg: String| Err(ProtocolError::MalformedRecord(msg));
        if self.bsm.len() != n {
            return err(format!("{} BSM entries for {} users", self.bsm.len(), n));
        }
        if self.comm_users.len() < 2 || self.comm_users.len() > 3 {
            return err(format!(
                "{} communication users (need 2 or 3)",
                self.comm_users.len()
            ));
        }
        for (i, &u) in self.comm_users.iter().enumerate() {
            if u >= n {
                return err(format!("communication user {u} out of range"));
            }
            if self.comm_users[..i].contains(&u) {
                return err(format!("communication user {u} listed twice"));
            }
        }
        if self.announced_bases.len() != self.comm_users.len() {
            return err(format!(
                "{} announced bases for {} communication users",
                self.announced_bases.len(),
                self.comm_users.len()
            ));
        }
        if self.announced_aux_symbols.len() != n - self.comm_users.len() {
            return err(format!(
                "{} auxiliary announcements for {} auxiliary users",
                self.announced_aux_symbols.len(),
                n - self.comm_users.len()
            ));
        }
        if self
            .announced_aux_symbols
            .iter()
            .flatten()
            .any(|s| s.basis() != Basis::X)
        {
            return err("announced auxiliary symbol not in the X basis".into());
        }
        Ok(())
    }

    fn aux_announcements(&self) -> Option<Vec<Bb84Symbol>> {
        self.announced_aux_symbols.iter().copied().collect()
    }
}

/// Sift one two-user round.
///
/// Discards on any relay failure, then on any auxiliary user that did not
/// announce an X symbol, then on mismatched communication bases. A kept
/// round derives each communication user's bit from their prepared symbol
/// and applies the flip rule to the second-listed user.
pub fn sift_round(record: &RoundRecord) -> Result<SiftResult, ProtocolError> {
    record.validate()?;
    if record.comm_users.len() != 2 {
        return Err(ProtocolError::MalformedRecord(
            "two-user sifting needs exactly 2 communication users".into(),
        ));
    }
    if record.bsm.iter().any(|b| !b.is_success()) {
        return Ok(SiftResult::Discarded(DiscardReason::BsmFailure));
    }
    let Some(aux_symbols) = record.aux_announcements() else {
        return Ok(SiftResult::Discarded(DiscardReason::AuxNotX));
    };
    if record.announced_bases[0] != record.announced_bases[1] {
        return Ok(SiftResult::Discarded(DiscardReason::BasisMismatch));
    }
    let basis = record.announced_bases[0];

    let aux_bsm: Vec<BsmOutcome> = record.aux_users().map(|u| record.bsm[u]).collect();
    let comm_bsm = (
        record.bsm[record.comm_users[0]],
        record.bsm[record.comm_users[1]],
    );
    let tau = tau_parity(&aux_symbols, &aux_bsm, comm_bsm)?;
    let equivalent = GhzSign::from_parity(tau);

    let mut bits = (
        record.preparations[record.comm_users[0]].bit(),
        record.preparations[record.comm_users[1]].bit(),
    );
    let flip_user = if flip_decision(basis, equivalent) {
        bits.1 ^= 1;
        Some(record.comm_users[1])
    } else {
        None
    };
    Ok(SiftResult::Kept { bits, flip_user })
}

/// Sift one three-user conference round.
///
/// The post-selected three-party sign comes from the auxiliary parity, is
/// mapped through the equivalent GHZ analyzer, and X-basis test rounds with
/// an analyzer result of `phi-` flip the last-listed user so the effective
/// shared state is always the `+` one. Z-basis key rounds never flip.
pub fn conference_sift_round(record: &RoundRecord) -> Result<ConferenceSift, ProtocolError> {
    record.validate()?;
    if record.comm_users.len() != 3 {
        return Err(ProtocolError::MalformedRecord(
            "conference sifting needs exactly 3 communication users".into(),
        ));
    }
    if record.bsm.iter().any(|b| !b.is_success()) {
        return Ok(ConferenceSift::Discarded(DiscardReason::BsmFailure));
    }
    let Some(aux_symbols) = record.aux_announcements() else {
        return Ok(ConferenceSift::Discarded(DiscardReason::AuxNotX));
    };
    if record.announced_bases[1..]
        .iter()
        .any(|&b| b != record.announced_bases[0])
    {
        return Ok(ConferenceSift::Discarded(DiscardReason::BasisMismatch));
    }
    let basis = record.announced_bases[0];

    // Post-selected sign: parity of chi XOR upsilon over the auxiliary users.
    let mut parity = 0u8;
    for (&symbol, user) in aux_symbols.iter().zip(record.aux_users()) {
        let chi = symbol.x_sign().ok_or(ProtocolError::NotXBasis)?;
        let upsilon = record.bsm[user].sign().ok_or(ProtocolError::BsmFailed)?;
        parity ^= chi.xor(upsilon).parity();
    }
    let post_selected = GhzSign::from_parity(parity);
    let analyzer = ghz_analyzer_equivalent(
        post_selected,
        record.bsm[record.comm_users[0]],
        record.bsm[record.comm_users[1]],
        record.bsm[record.comm_users[2]],
    )?;

    let mut bits = [0u8; 3];
    for (slot, &u) in bits.iter_mut().zip(&record.comm_users) {
        *slot = record.preparations[u].bit();
    }
    let flip_user = if flip_decision(basis, analyzer) {
        bits[2] ^= 1;
        Some(record.comm_users[2])
    } else {
        None
    };
    Ok(ConferenceSift::Kept {
        basis,
        bits,
        analyzer,
        flip_user,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record_42() -> RoundRecord {
        RoundRecord {
            round_id: 0,
            preparations: vec![
                Bb84Symbol::Zero,
                Bb84Symbol::Zero,
                Bb84Symbol::Plus,
                Bb84Symbol::Plus,
            ],
            bsm: vec![BsmOutcome::PsiPlus; 4],
            comm_users: vec![0, 1],
            announced_bases: vec![Basis::Z, Basis::Z],
            announced_aux_symbols: vec![Some(Bb84Symbol::Plus), Some(Bb84Symbol::Plus)],
        }
    }

    #[test]
    fn sigma_parity_counts_minus_signs() {
        assert_eq!(sigma_parity(&[Sign::Plus, Sign::Plus]), 0);
        assert_eq!(sigma_parity(&[Sign::Plus, Sign::Minus]), 1);
        assert_eq!(sigma_parity(&[Sign::Minus, Sign::Minus]), 0);
        assert_eq!(sigma_parity(&[]), 0);
    }

    #[test]
    fn tau_parity_matches_table_rows() {
        let pp = [Bb84Symbol::Plus, Bb84Symbol::Plus];
        let psi_pp = [BsmOutcome::PsiPlus, BsmOutcome::PsiPlus];
        assert_eq!(
            tau_parity(&pp, &psi_pp, (BsmOutcome::PsiPlus, BsmOutcome::PsiPlus)).unwrap(),
            0
        );
        assert_eq!(
            tau_parity(&pp, &psi_pp, (BsmOutcome::PsiPlus, BsmOutcome::PsiMinus)).unwrap(),
            1
        );
        // Every input minus: two sign flips cancel in the auxiliary string,
        // and the two communication outcomes cancel each other.
        let mm = [Bb84Symbol::Minus, Bb84Symbol::Minus];
        let psi_mm = [BsmOutcome::PsiMinus, BsmOutcome::PsiMinus];
        assert_eq!(
            tau_parity(&mm, &psi_mm, (BsmOutcome::PsiMinus, BsmOutcome::PsiMinus)).unwrap(),
            0
        );
    }

    #[test]
    fn tau_parity_rejects_bad_inputs() {
        let e = tau_parity(
            &[Bb84Symbol::Plus],
            &[],
            (BsmOutcome::PsiPlus, BsmOutcome::PsiPlus),
        );
        assert!(matches!(e, Err(ProtocolError::LengthMismatch { .. })));
        let e = tau_parity(
            &[Bb84Symbol::Zero],
            &[BsmOutcome::PsiPlus],
            (BsmOutcome::PsiPlus, BsmOutcome::PsiPlus),
        );
        assert_eq!(e, Err(ProtocolError::NotXBasis));
        let e = tau_parity(&[], &[], (BsmOutcome::Failure, BsmOutcome::PsiPlus));
        assert_eq!(e, Err(ProtocolError::BsmFailed));
    }

    #[test]
    fn povm_equivalent_covers_all_rows() {
        let cases = [
            (Bb84Symbol::Plus, BsmOutcome::PsiMinus, Bb84Symbol::Minus),
            (Bb84Symbol::Minus, BsmOutcome::PsiMinus, Bb84Symbol::Plus),
            (Bb84Symbol::Plus, BsmOutcome::PsiPlus, Bb84Symbol::Plus),
            (Bb84Symbol::Minus, BsmOutcome::PsiPlus, Bb84Symbol::Minus),
        ];
        for (aux, bsm, expected) in cases {
            let element = povm_equivalent(aux, bsm).unwrap();
            assert_eq!(element.outcome, expected);
            assert_eq!(element.weight, 0.5);
        }
        assert_eq!(
            povm_equivalent(Bb84Symbol::Zero, BsmOutcome::PsiPlus),
            Err(ProtocolError::NotXBasis)
        );
        assert_eq!(
            povm_equivalent(Bb84Symbol::Plus, BsmOutcome::Failure),
            Err(ProtocolError::BsmFailed)
        );
    }

    #[test]
    fn equivalent_bsm_spot_rows() {
        use BsmOutcome::{PsiMinus, PsiPlus};
        assert_eq!(
            equivalent_bsm(GhzSign::Plus, PsiMinus, PsiPlus).unwrap(),
            GhzSign::Minus
        );
        assert_eq!(
            equivalent_bsm(GhzSign::Minus, PsiMinus, PsiMinus).unwrap(),
            GhzSign::Minus
        );
        assert_eq!(
            equivalent_bsm(GhzSign::Minus, PsiPlus, PsiMinus).unwrap(),
            GhzSign::Plus
        );
        assert_eq!(
            equivalent_bsm(GhzSign::Plus, PsiPlus, BsmOutcome::Failure),
            Err(ProtocolError::BsmFailed)
        );
    }

    #[test]
    fn flip_only_for_x_phi_minus() {
        assert!(!flip_decision(Basis::Z, GhzSign::Plus));
        assert!(!flip_decision(Basis::Z, GhzSign::Minus));
        assert!(!flip_decision(Basis::X, GhzSign::Plus));
        assert!(flip_decision(Basis::X, GhzSign::Minus));
    }

    #[test]
    fn ghz_analyzer_spot_rows() {
        use BsmOutcome::{PsiMinus, PsiPlus};
        assert_eq!(
            ghz_analyzer_equivalent(GhzSign::Plus, PsiPlus, PsiPlus, PsiMinus).unwrap(),
            GhzSign::Minus
        );
        assert_eq!(
            ghz_analyzer_equivalent(GhzSign::Plus, PsiMinus, PsiMinus, PsiPlus).unwrap(),
            GhzSign::Plus
        );
        assert_eq!(
            ghz_analyzer_equivalent(GhzSign::Minus, PsiMinus, PsiMinus, PsiMinus).unwrap(),
            GhzSign::Plus
        );
    }

    #[test]
    fn sift_keeps_ideal_z_round() {
        let result = sift_round(&record_42()).unwrap();
        assert_eq!(
            result,
            SiftResult::Kept {
                bits: (0, 0),
                flip_user: None
            }
        );
    }

    #[test]
    fn sift_discards_in_documented_order() {
        let mut r = record_42();
        r.announced_bases[1] = Basis::X;
        assert_eq!(
            sift_round(&r).unwrap(),
            SiftResult::Discarded(DiscardReason::BasisMismatch)
        );

        // A relay failure takes precedence over everything else.
        let mut r = record_42();
        r.announced_bases[1] = Basis::X;
        r.bsm[2] = BsmOutcome::Failure;
        assert_eq!(
            sift_round(&r).unwrap(),
            SiftResult::Discarded(DiscardReason::BsmFailure)
        );

        let mut r = record_42();
        r.announced_aux_symbols[0] = None;
        assert_eq!(
            sift_round(&r).unwrap(),
            SiftResult::Discarded(DiscardReason::AuxNotX)
        );
    }

    #[test]
    fn sift_applies_flip_to_second_listed_user() {
        let mut r = record_42();
        r.preparations[0] = Bb84Symbol::Plus;
        r.preparations[1] = Bb84Symbol::Plus;
        r.announced_bases = vec![Basis::X, Basis::X];
        // tau = 1: one communication relay reports psi-.
        r.bsm[1] = BsmOutcome::PsiMinus;
        let result = sift_round(&r).unwrap();
        assert_eq!(
            result,
            SiftResult::Kept {
                bits: (0, 0),
                flip_user: Some(1)
            }
        );
    }

    #[test]
    fn sift_rejects_malformed_records() {
        let mut r = record_42();
        r.comm_users = vec![0, 0];
        assert!(matches!(
            sift_round(&r),
            Err(ProtocolError::MalformedRecord(_))
        ));
        let mut r = record_42();
        r.bsm.pop();
        assert!(matches!(
            sift_round(&r),
            Err(ProtocolError::MalformedRecord(_))
        ));
    }

    #[test]
    fn conference_z_round_keeps_all_ones() {
        let r = RoundRecord {
            round_id: 7,
            preparations: vec![
                Bb84Symbol::One,
                Bb84Symbol::One,
                Bb84Symbol::One,
                Bb84Symbol::Plus,
                Bb84Symbol::Minus,
            ],
            bsm: vec![BsmOutcome::PsiPlus; 5],
            comm_users: vec![0, 1, 2],
            announced_bases: vec![Basis::Z; 3],
            announced_aux_symbols: vec![Some(Bb84Symbol::Plus), Some(Bb84Symbol::Minus)],
        };
        match conference_sift_round(&r).unwrap() {
            ConferenceSift::Kept {
                bits, flip_user, ..
            } => {
                assert_eq!(bits, [1, 1, 1]);
                assert_eq!(flip_user, None);
            }
            other => panic!("expected kept round, got {other:?}"),
        }
    }

    #[test]
    fn conference_x_round_flip_restores_even_parity() {
        let r = RoundRecord {
            round_id: 8,
            preparations: vec![
                Bb84Symbol::Plus,
                Bb84Symbol::Plus,
                Bb84Symbol::Minus,
                Bb84Symbol::Plus,
                Bb84Symbol::Plus,
            ],
            bsm: vec![BsmOutcome::PsiPlus; 5],
            comm_users: vec![0, 1, 2],
            announced_bases: vec![Basis::X; 3],
            announced_aux_symbols: vec![Some(Bb84Symbol::Plus), Some(Bb84Symbol::Plus)],
        };
        match conference_sift_round(&r).unwrap() {
            ConferenceSift::Kept {
                bits,
                analyzer,
                flip_user,
                ..
            } => {
                assert_eq!(bits.iter().fold(0, |a, b| a ^ b), 0);
                assert_eq!(analyzer, GhzSign::Minus);
                assert_eq!(flip_user, Some(2));
            }
            other => panic!("expected kept round, got {other:?}"),
        }
    }

    proptest! {
        /// tau is the parity of minus signs across all six sign-valued inputs.
        #[test]
        fn tau_parity_is_total_parity(bits in proptest::collection::vec(0u8..2, 0..6),
                                      aux in proptest::collection::vec(0u8..2, 0..6),
                                      u1 in 0u8..2, u2 in 0u8..2) {
            let n = bits.len().min(aux.len());
            let symbols: Vec<Bb84Symbol> =
                bits[..n].iter().map(|&b| Bb84Symbol::from_bit(Basis::X, b)).collect();
            let outcomes: Vec<BsmOutcome> = aux[..n]
                .iter()
                .map(|&b| if b == 0 { BsmOutcome::PsiPlus } else { BsmOutcome::PsiMinus })
                .collect();
            let comm = (
                if u1 == 0 { BsmOutcome::PsiPlus } else { BsmOutcome::PsiMinus },
                if u2 == 0 { BsmOutcome::PsiPlus } else { BsmOutcome::PsiMinus },
            );
            let expected = bits[..n].iter().zip(&aux[..n]).fold(0, |acc, (a, b)| acc ^ a ^ b) ^ u1 ^ u2;
            prop_assert_eq!(tau_parity(&symbols, &outcomes, comm).unwrap(), expected);
        }

        /// The closed form and the table route always agree.
        #[test]
        fn tau_matches_equivalent_bsm_route(chi in proptest::collection::vec(0u8..2, 2),
                                            ups in proptest::collection::vec(0u8..2, 2),
                                            u1 in 0u8..2, u2 in 0u8..2) {
            let symbols: Vec<Bb84Symbol> =
                chi.iter().map(|&b| Bb84Symbol::from_bit(Basis::X, b)).collect();
            let outcomes: Vec<BsmOutcome> = ups
                .iter()
                .map(|&b| if b == 0 { BsmOutcome::PsiPlus } else { BsmOutcome::PsiMinus })
                .collect();
            let comm = (
                if u1 == 0 { BsmOutcome::PsiPlus } else { BsmOutcome::PsiMinus },
                if u2 == 0 { BsmOutcome::PsiPlus } else { BsmOutcome::PsiMinus },
            );
            let tau = tau_parity(&symbols, &outcomes, comm).unwrap();

            // Table route: collapse each auxiliary announcement, fold the
            // resulting sign into the post-selected Bell state, then map
            // through the equivalent-BSM table.
            let mut bell_a = 0u8;
            for (&s, &o) in symbols.iter().zip(&outcomes) {
                bell_a ^= povm_equivalent(s, o).unwrap().outcome.bit();
            }
            let equivalent = equivalent_bsm(GhzSign::from_parity(bell_a), comm.0, comm.1).unwrap();
            prop_assert_eq!(GhzSign::from_parity(tau), equivalent);
        }
    }
}
