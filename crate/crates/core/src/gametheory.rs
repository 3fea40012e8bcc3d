//! Cooperative and verification-game analysis of the agent pipeline.
//!
//! Coalitions are bitmasks over at most [`MAX_PLAYERS`] named players. A
//! [`CoalitionValuation`] may be partial (measured systems rarely cover all
//! subsets); operations that need every subset say so with
//! [`GameError::Incomplete`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub const MAX_PLAYERS: usize = 12;
const EPS: f64 = 1e-12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GameError {
    #[error("at most {MAX_PLAYERS} players supported, got {0}")]
    TooManyPlayers(usize),
    #[error("duplicate player `{0}`")]
    DuplicatePlayer(String),
    #[error("unknown player `{0}`")]
    UnknownPlayer(String),
    #[error("coalition {0} has no value")]
    UndefinedCoalition(String),
    #[error("valuation defines {defined} of {needed} coalitions")]
    Incomplete { defined: usize, needed: usize },
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("invalid game: {0}")]
    InvalidSpec(String),
}

/// Set of player indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Coalition(pub u32);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn full(k: usize) -> Self {
        Coalition(((1u64 << k) - 1) as u32)
    }

    pub fn singleton(i: usize) -> Self {
        Coalition(1 << i)
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn with(self, i: usize) -> Self {
        Coalition(self.0 | (1 << i))
    }

    pub fn without(self, i: usize) -> Self {
        Coalition(self.0 & !(1 << i))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Coalition) -> Self {
        Coalition(self.0 | other.0)
    }

    pub fn is_disjoint(self, other: Coalition) -> bool {
        self.0 & other.0 == 0
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&i| self.contains(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoalitionEntry {
    pub q: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoalitionValuation {
    players: Vec<String>,
    entries: BTreeMap<Coalition, CoalitionEntry>,
    pub w1: f64,
    pub w2: f64,
}

impl CoalitionValuation {
    /// Valuation with only the empty coalition (q = c = 0) defined.
    pub fn new(players: Vec<String>, w1: f64, w2: f64) -> Result<Self, GameError> {
        if players.len() > MAX_PLAYERS {
            return Err(GameError::TooManyPlayers(players.len()));
        }
        for (i, p) in players.iter().enumerate() {
            if players[..i].contains(p) {
                return Err(GameError::DuplicatePlayer(p.clone()));
            }
        }
        for (name, w) in [("w1", w1), ("w2", w2)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(GameError::InvalidValue(format!(
                    "{name} = {w} must be finite and ≥ 0"
                )));
            }
        }
        let mut entries = BTreeMap::new();
        entries.insert(Coalition::EMPTY, CoalitionEntry { q: 0.0, c: 0.0 });
        Ok(CoalitionValuation {
            players,
            entries,
            w1,
            w2,
        })
    }

    pub fn players(&self) -> &[String] {
        &self.players
    }

    pub fn player_index(&self, name: &str) -> Result<usize, GameError> {
        self.players
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| GameError::UnknownPlayer(name.to_string()))
    }

    pub fn coalition<S: AsRef<str>>(&self, names: &[S]) -> Result<Coalition, GameError> {
        names.iter().try_fold(Coalition::EMPTY, |acc, n| {
            Ok(acc.with(self.player_index(n.as_ref())?))
        })
    }

    pub fn grand(&self) -> Coalition {
        Coalition::full(self.players.len())
    }

    /// Define q and c for `s`. The empty coalition is pinned at zero.
    pub fn set(&mut self, s: Coalition, q: f64, c: f64) -> Result<(), GameError> {
        if s.0 & !self.grand().0 != 0 {
            return Err(GameError::InvalidValue(format!(
                "coalition mask {:#b} has non-players",
                s.0
            )));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(GameError::InvalidValue(format!(
                "q{} = {q} outside [0, 1]",
                self.label(s)
            )));
        }
        if !(c.is_finite() && c >= 0.0) {
            return Err(GameError::InvalidValue(format!(
                "c{} = {c} must be ≥ 0",
                self.label(s)
            )));
        }
        if s.is_empty() && (q != 0.0 || c != 0.0) {
            return Err(GameError::InvalidValue(
                "the empty coalition has q = c = 0".into(),
            ));
        }
        self.entries.insert(s, CoalitionEntry { q, c });
        Ok(())
    }

    pub fn set_named<S: AsRef<str>>(
        &mut self,
        names: &[S],
        q: f64,
        c: f64,
    ) -> Result<(), GameError> {
        let s = self.coalition(names)?;
        self.set(s, q, c)
    }

    pub fn entry(&self, s: Coalition) -> Option<CoalitionEntry> {
        self.entries.get(&s).copied()
    }

    pub fn quality(&self, s: Coalition) -> Option<f64> {
        self.entry(s).map(|e| e.q)
    }

    pub fn is_complete(&self) -> bool {
        self.entries.len() == 1 << self.players.len()
    }

    pub fn defined(&self) -> impl Iterator<Item = (Coalition, CoalitionEntry)> + '_ {
        self.entries.iter().map(|(s, e)| (*s, *e))
    }

    /// `{a,b}` style label; `∅` for the empty set.
    pub fn label(&self, s: Coalition) -> String {
        if s.is_empty() {
            return "∅".into();
        }
        let names: Vec<&str> = s
            .members()
            .filter_map(|i| self.players.get(i).map(String::as_str))
            .collect();
        format!("{{{}}}", names.join(","))
    }

    fn value_of(&self, s: Coalition) -> Option<f64> {
        self.entry(s).map(|e| self.w1 * e.q - self.w2 * e.c)
    }
}

/// v(S) = w1·q(S) − w2·c(S).
pub fn coalition_value(valuation: &CoalitionValuation, s: Coalition) -> Result<f64, GameError> {
    valuation
        .value_of(s)
        .ok_or_else(|| GameError::UndefinedCoalition(valuation.label(s)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyResult {
    pub players: Vec<String>,
    pub phi: Vec<f64>,
}

impl ShapleyResult {
    pub fn get(&self, player: &str) -> Option<f64> {
        self.players
            .iter()
            .position(|p| p == player)
            .map(|i| self.phi[i])
    }

    pub fn total(&self) -> f64 {
        self.phi.iter().sum()
    }
}

/// Exact Shapley values of the `k`-player game `v` by subset enumeration.
pub fn shapley_values(k: usize, v: impl Fn(Coalition) -> f64) -> Result<Vec<f64>, GameError> {
    if k > MAX_PLAYERS {
        return Err(GameError::TooManyPlayers(k));
    }
    let values: Vec<f64> = (0..1u32 << k).map(|m| v(Coalition(m))).collect();
    // weight[s] = s!(k−s−1)!/k!
    let mut fact = vec![1.0f64; k + 1];
    for i in 1..=k {
        fact[i] = fact[i - 1] * i as f64;
    }
    let weight: Vec<f64> = (0..k)
        .map(|s| fact[s] * fact[k - s - 1] / fact[k])
        .collect();
    let mut phi = vec![0.0; k];
    for (i, p) in phi.iter_mut().enumerate() {
        for m in 0..1u32 << k {
            let s = Coalition(m);
            if !s.contains(i) {
                *p += weight[s.len()] * (values[s.with(i).0 as usize] - values[m as usize]);
            }
        }
    }
    Ok(phi)
}

/// Shapley values of v over a complete valuation.
pub fn shapley(valuation: &CoalitionValuation) -> Result<ShapleyResult, GameError> {
    let k = valuation.players.len();
    if k > MAX_PLAYERS {
        return Err(GameError::TooManyPlayers(k));
    }
    if !valuation.is_complete() {
        return Err(GameError::Incomplete {
            defined: valuation.entries.len(),
            needed: 1 << k,
        });
    }
    let phi = shapley_values(k, |s| valuation.value_of(s).unwrap_or(0.0))?;
    Ok(ShapleyResult {
        players: valuation.players.clone(),
        phi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifierMarginal {
    pub value: f64,
    /// Adding the verifier lowers v.
    pub harmful: bool,
}

/// v(N) − v(N ∖ {verifier}).
pub fn verifier_marginal(
    valuation: &CoalitionValuation,
    verifier: &str,
) -> Result<VerifierMarginal, GameError> {
    let v = valuation.player_index(verifier)?;
    let full = valuation.grand();
    let value = coalition_value(valuation, full)? - coalition_value(valuation, full.without(v))?;
    Ok(VerifierMarginal {
        value,
        harmful: value < 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStatus {
    Satisfied,
    Violated,
    /// Not enough coalitions defined to decide.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub s: String,
    pub t: String,
    /// q(S∪T) ≥ max(q(S), q(T)).
    pub quality: PairStatus,
    /// v(S∪T) ≥ v(S) + v(T).
    pub value: PairStatus,
    pub q_s: Option<f64>,
    pub q_t: Option<f64>,
    pub q_union: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperadditivityReport {
    /// Every unordered pair of disjoint non-empty coalitions.
    pub pairs: Vec<PairCheck>,
}

impl SuperadditivityReport {
    pub fn quality_violations(&self) -> Vec<&PairCheck> {
        self.pairs
            .iter()
            .filter(|p| p.quality == PairStatus::Violated)
            .collect()
    }

    pub fn value_violations(&self) -> Vec<&PairCheck> {
        self.pairs
            .iter()
            .filter(|p| p.value == PairStatus::Violated)
            .collect()
    }

    pub fn count(&self, quality: bool, status: PairStatus) -> usize {
        self.pairs
            .iter()
            .filter(|p| (if quality { p.quality } else { p.value }) == status)
            .count()
    }
}

/// Check both super-additivity conditions on every disjoint pair.
///
/// A quality violation is reported as soon as q(S∪T) and one part are
/// known and the part is strictly better; "satisfied" needs all three.
pub fn superadditivity_check(valuation: &CoalitionValuation) -> SuperadditivityReport {
    let k = valuation.players.len();
    let mut pairs = Vec::new();
    for a in 1..1u32 << k {
        for b in (a + 1)..1u32 << k {
            let (s, t) = (Coalition(a), Coalition(b));
            if !s.is_disjoint(t) {
                continue;
            }
            let u = s.union(t);
            let (q_s, q_t, q_union) = (
                valuation.quality(s),
                valuation.quality(t),
                valuation.quality(u),
            );
            let quality = match q_union {
                None => PairStatus::Undetermined,
                Some(qu) => {
                    if [q_s, q_t].into_iter().flatten().any(|q| q > qu + EPS) {
                        PairStatus::Violated
                    } else if q_s.is_some() && q_t.is_some() {
                        PairStatus::Satisfied
                    } else {
                        PairStatus::Undetermined
                    }
                }
            };
            let value = match (
                valuation.value_of(s),
                valuation.value_of(t),
                valuation.value_of(u),
            ) {
                (Some(vs), Some(vt), Some(vu)) if vu + EPS >= vs + vt => PairStatus::Satisfied,
                (Some(_), Some(_), Some(_)) => PairStatus::Violated,
                _ => PairStatus::Undetermined,
            };
            if quality == PairStatus::Undetermined && value == PairStatus::Undetermined {
                continue;
            }
            pairs.push(PairCheck {
                s: valuation.label(s),
                t: valuation.label(t),
                quality,
                value,
                q_s,
                q_t,
                q_union,
            });
        }
    }
    SuperadditivityReport { pairs }
}

fn check_probability(name: &str, p: f64) -> Result<(), GameError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(GameError::InvalidValue(format!(
            "{name} = {p} outside [0, 1]"
        )))
    }
}

/// Precision after a verifier that removes each false positive with
/// probability `p_fp` and wrongly drops each true positive with `p_fn`.
pub fn system_precision(tp: u64, fp: u64, p_fp: f64, p_fn: f64) -> Result<f64, GameError> {
    check_probability("p_fp", p_fp)?;
    check_probability("p_fn", p_fn)?;
    let kept_tp = tp as f64 * (1.0 - p_fn);
    let kept_fp = fp as f64 * (1.0 - p_fp);
    let den = kept_tp + kept_fp;
    if den <= 0.0 {
        return Err(GameError::Undefined(format!(
            "no findings survive verification (tp={tp}, fp={fp}, p_fp={p_fp}, p_fn={p_fn})"
        )));
    }
    Ok(kept_tp / den)
}

/// Whether verification strictly raises precision above tp/(tp+fp).
pub fn precision_improves(tp: u64, fp: u64, p_fp: f64, p_fn: f64) -> Result<bool, GameError> {
    let after = system_precision(tp, fp, p_fp, p_fn)?;
    let before = system_precision(tp, fp, 0.0, 0.0)?;
    Ok(after > before)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effort {
    High,
    Low,
}

impl Effort {
    pub const ALL: [Effort; 2] = [Effort::High, Effort::Low];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifierStrategy {
    AcceptIfConsistent,
    AlwaysAccept,
    AlwaysReject,
}

impl VerifierStrategy {
    pub const ALL: [VerifierStrategy; 3] = [
        VerifierStrategy::AcceptIfConsistent,
        VerifierStrategy::AlwaysAccept,
        VerifierStrategy::AlwaysReject,
    ];
}

impl fmt::Display for Effort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Effort::High => "high",
            Effort::Low => "low",
        })
    }
}

impl fmt::Display for VerifierStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerifierStrategy::AcceptIfConsistent => "accept_if_consistent",
            VerifierStrategy::AlwaysAccept => "always_accept",
            VerifierStrategy::AlwaysReject => "always_reject",
        })
    }
}

/// Verifier payoff per (action, expert effort).
///
/// `challenge` is kept for completeness of the table; none of the three
/// pure strategies above ever challenges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifierPayoffs {
    pub accept_high: f64,
    pub accept_low: f64,
    pub reject_high: f64,
    pub reject_low: f64,
    pub challenge: f64,
}

impl Default for VerifierPayoffs {
    fn default() -> Self {
        VerifierPayoffs {
            accept_high: 1.0,
            accept_low: -1.0,
            reject_high: -1.0,
            reject_low: 1.0,
            challenge: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationGameSpec {
    pub q_high: f64,
    pub q_low: f64,
    pub c_high: f64,
    pub c_low: f64,
    /// Penalty the expert pays when its output is rejected.
    pub penalty: f64,
    /// Chance the consistency check rejects low-effort output.
    pub p_fp: f64,
    /// Chance the consistency check rejects high-effort output.
    pub p_fn: f64,
    #[serde(default)]
    pub payoffs: VerifierPayoffs,
}

impl VerificationGameSpec {
    pub fn validate(&self) -> Result<(), GameError> {
        for (name, q) in [("q_high", self.q_high), ("q_low", self.q_low)] {
            if !(0.0..=1.0).contains(&q) {
                return Err(GameError::InvalidSpec(format!(
                    "{name} = {q} outside [0, 1]"
                )));
            }
        }
        if !(self.c_low.is_finite() && self.c_high.is_finite() && self.c_high > self.c_low) {
            return Err(GameError::InvalidSpec(format!(
                "need c_high > c_low, got {} and {}",
                self.c_high, self.c_low
            )));
        }
        if !(self.penalty.is_finite() && self.penalty > 0.0) {
            return Err(GameError::InvalidSpec(format!(
                "penalty {} must be > 0",
                self.penalty
            )));
        }
        check_probability("p_fp", self.p_fp).map_err(|e| GameError::InvalidSpec(e.to_string()))?;
        check_probability("p_fn", self.p_fn).map_err(|e| GameError::InvalidSpec(e.to_string()))?;
        let p = self.payoffs;
        if ![
            p.accept_high,
            p.accept_low,
            p.reject_high,
            p.reject_low,
            p.challenge,
        ]
        .iter()
        .all(|x| x.is_finite())
        {
            return Err(GameError::InvalidSpec("payoff table must be finite".into()));
        }
        Ok(())
    }

    /// Probability that `v` rejects output produced with effort `e`.
    pub fn reject_probability(&self, e: Effort, v: VerifierStrategy) -> f64 {
        match (v, e) {
            (VerifierStrategy::AcceptIfConsistent, Effort::High) => self.p_fn,
            (VerifierStrategy::AcceptIfConsistent, Effort::Low) => self.p_fp,
            (VerifierStrategy::AlwaysAccept, _) => 0.0,
            (VerifierStrategy::AlwaysReject, _) => 1.0,
        }
    }

    pub fn expert_payoff(&self, e: Effort, v: VerifierStrategy) -> f64 {
        let (q, c) = match e {
            Effort::High => (self.q_high, self.c_high),
            Effort::Low => (self.q_low, self.c_low),
        };
        q - c - self.penalty * self.reject_probability(e, v)
    }

    pub fn verifier_payoff(&self, e: Effort, v: VerifierStrategy) -> f64 {
        let r = self.reject_probability(e, v);
        let (accept, reject) = match e {
            Effort::High => (self.payoffs.accept_high, self.payoffs.reject_high),
            Effort::Low => (self.payoffs.accept_low, self.payoffs.reject_low),
        };
        (1.0 - r) * accept + r * reject
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffCell {
    pub expert: Effort,
    pub verifier: VerifierStrategy,
    pub expert_payoff: f64,
    pub verifier_payoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    /// (high, accept-if-consistent) is a mutual best response, with a
    /// strict preference for high effort.
    pub is_ne: bool,
    /// penalty > c_high − c_low.
    pub theorem_condition_holds: bool,
    pub cells: Vec<PayoffCell>,
    /// Expert best responses to each verifier strategy.
    pub expert_best: Vec<(VerifierStrategy, Vec<Effort>)>,
    /// Verifier best responses to each expert effort.
    pub verifier_best: Vec<(Effort, Vec<VerifierStrategy>)>,
}

fn argmax<T: Copy>(options: &[T], payoff: impl Fn(T) -> f64) -> Vec<T> {
    let best = options
        .iter()
        .map(|&o| payoff(o))
        .fold(f64::NEG_INFINITY, f64::max);
    options
        .iter()
        .copied()
        .filter(|&o| payoff(o) >= best - EPS)
        .collect()
}

/// Enumerate the 2×3 game and test (high, accept-if-consistent).
pub fn equilibrium_check(spec: &VerificationGameSpec) -> Result<EquilibriumReport, GameError> {
    spec.validate()?;
    let mut cells = Vec::new();
    for e in Effort::ALL {
        for v in VerifierStrategy::ALL {
            cells.push(PayoffCell {
                expert: e,
                verifier: v,
                expert_payoff: spec.expert_payoff(e, v),
                verifier_payoff: spec.verifier_payoff(e, v),
            });
        }
    }
    let expert_best = VerifierStrategy::ALL
        .iter()
        .map(|&v| (v, argmax(&Effort::ALL, |e| spec.expert_payoff(e, v))))
        .collect();
    let verifier_best = Effort::ALL
        .iter()
        .map(|&e| {
            (
                e,
                argmax(&VerifierStrategy::ALL, |v| spec.verifier_payoff(e, v)),
            )
        })
        .collect();

    let aic = VerifierStrategy::AcceptIfConsistent;
    let expert_strict =
        spec.expert_payoff(Effort::High, aic) > spec.expert_payoff(Effort::Low, aic) + EPS;
    let verifier_ok = VerifierStrategy::ALL.iter().all(|&v| {
        spec.verifier_payoff(Effort::High, aic) >= spec.verifier_payoff(Effort::High, v) - EPS
    });
    Ok(EquilibriumReport {
        is_ne: expert_strict && verifier_ok,
        theorem_condition_holds: spec.penalty - (spec.c_high - spec.c_low) > EPS,
        cells,
        expert_best,
        verifier_best,
    })
}

/// On-disk valuation: players, weights, measured coalitions and an
/// optional verification game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationFile {
    pub players: Vec<String>,
    #[serde(default = "one")]
    pub w1: f64,
    #[serde(default)]
    pub w2: f64,
    /// Player name designated as the verifier, if any.
    #[serde(default)]
    pub verifier: Option<String>,
    pub coalitions: Vec<CoalitionRecord>,
    #[serde(default)]
    pub game: Option<VerificationGameSpec>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalitionRecord {
    pub members: Vec<String>,
    pub q: f64,
    #[serde(default)]
    pub c: f64,
}

impl ValuationFile {
    pub fn valuation(&self) -> Result<CoalitionValuation, GameError> {
        let mut val = CoalitionValuation::new(self.players.clone(), self.w1, self.w2)?;
        for rec in &self.coalitions {
            val.set_named(&rec.members, rec.q, rec.c)?;
        }
        if let Some(v) = &self.verifier {
            val.player_index(v)?;
        }
        Ok(val)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(ns: &[&str]) -> Vec<String> {
        ns.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn coalition_value_basics() {
        let mut val = CoalitionValuation::new(names(&["a", "b"]), 1.0, 1.0).unwrap();
        val.set_named(&["a"], 0.7, 0.2).unwrap();
        assert!(
            (coalition_value(&val, val.coalition(&["a"]).unwrap()).unwrap() - 0.5).abs() < 1e-15
        );
        assert_eq!(coalition_value(&val, Coalition::EMPTY).unwrap(), 0.0);
        assert!(matches!(
            coalition_value(&val, val.grand()),
            Err(GameError::UndefinedCoalition(_))
        ));
        val.w2 = 0.0;
        assert_eq!(
            coalition_value(&val, val.coalition(&["a"]).unwrap()).unwrap(),
            0.7
        );
        assert!(val.set(Coalition::EMPTY, 0.1, 0.0).is_err());
        assert!(val.set_named(&["a"], 1.5, 0.0).is_err());
        assert!(val.set_named(&["zz"], 0.5, 0.0).is_err());
    }

    fn valuation_from(k: usize, v: impl Fn(Coalition) -> f64) -> CoalitionValuation {
        let players = (0..k).map(|i| format!("p{i}")).collect();
        let mut val = CoalitionValuation::new(players, 1.0, 0.0).unwrap();
        for m in 1..1u32 << k {
            val.set(Coalition(m), v(Coalition(m)), 0.0).unwrap();
        }
        val
    }

    #[test]
    fn shapley_textbook_games() {
        let additive = valuation_from(2, |s| {
            0.25 * s.contains(0) as u8 as f64 + 0.5 * s.contains(1) as u8 as f64
        });
        let phi = shapley(&additive).unwrap().phi;
        assert!((phi[0] - 0.25).abs() < 1e-12 && (phi[1] - 0.5).abs() < 1e-12);

        let phi = shapley_values(2, |s| [0.0, 1.0, 2.0, 3.0][s.0 as usize]).unwrap();
        assert!((phi[0] - 1.0).abs() < 1e-12 && (phi[1] - 2.0).abs() < 1e-12);

        let phi = shapley_values(3, |s| s.len() as f64).unwrap();
        assert!(phi.iter().all(|p| (p - 1.0).abs() < 1e-12));

        let glove = shapley_values(3, |s| {
            (s.contains(0) && (s.contains(1) || s.contains(2))) as u8 as f64
        })
        .unwrap();
        for (got, want) in glove.iter().zip([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(
            shapley_values(13, |_| 0.0),
            Err(GameError::TooManyPlayers(13))
        );
    }

    #[test]
    fn shapley_requires_complete_valuation() {
        let val = CoalitionValuation::new(names(&["a", "b"]), 1.0, 0.0).unwrap();
        assert_eq!(
            shapley(&val),
            Err(GameError::Incomplete {
                defined: 1,
                needed: 4
            })
        );
    }

    fn team_players() -> Vec<String> {
        names(&["code", "security", "debug", "verifier"])
    }

    #[test]
    fn verifier_marginal_cases() {
        let mut val = CoalitionValuation::new(team_players(), 1.0, 0.0).unwrap();
        val.set_named(&["code", "security", "debug", "verifier"], 0.776, 0.0)
            .unwrap();
        val.set_named(&["code", "security", "debug"], 0.670, 0.0)
            .unwrap();
        let m = verifier_marginal(&val, "verifier").unwrap();
        assert!((m.value - 0.106).abs() < 1e-12);
        assert!(!m.harmful);

        val.set_named(&["code", "security", "debug"], 0.776, 0.0)
            .unwrap();
        assert_eq!(verifier_marginal(&val, "verifier").unwrap().value, 0.0);

        val.set_named(&["code", "security", "debug"], 0.8, 0.0)
            .unwrap();
        assert!(verifier_marginal(&val, "verifier").unwrap().harmful);
    }

    #[test]
    fn superadditivity_on_measured_systems() {
        let mut val = CoalitionValuation::new(team_players(), 1.0, 0.0).unwrap();
        val.set_named(&["security"], 0.714, 0.0).unwrap();
        val.set_named(&["code", "security", "debug"], 0.689, 0.0)
            .unwrap();
        val.set_named(&["code", "security", "debug", "verifier"], 0.772, 0.0)
            .unwrap();
        let report = superadditivity_check(&val);
        let violations = report.quality_violations();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].s, "{security}");
        assert_eq!(violations[0].t, "{code,debug}");
        assert!(report
            .pairs
            .iter()
            .filter(|p| p.q_union == Some(0.772))
            .all(|p| p.quality != PairStatus::Violated));
    }

    #[test]
    fn superadditivity_monotone_and_hand_built() {
        let val = valuation_from(3, |s| s.len() as f64 / 3.0);
        let report = superadditivity_check(&val);
        assert!(report.quality_violations().is_empty());
        assert!(report.value_violations().is_empty());

        // Only {p0,p1} is worse than one of its parts.
        let val = valuation_from(3, |s| {
            if s == Coalition(0b011) {
                0.1
            } else {
                s.len() as f64 / 3.0
            }
        });
        let report = superadditivity_check(&val);
        let v: Vec<_> = report
            .quality_violations()
            .iter()
            .map(|p| (p.s.clone(), p.t.clone()))
            .collect();
        assert_eq!(v, vec![("{p0}".to_string(), "{p1}".to_string())]);
    }

    #[test]
    fn system_precision_cases() {
        assert_eq!(system_precision(132, 119, 0.0, 0.0).unwrap(), 132.0 / 251.0);
        let p = system_precision(132, 119, 41.0 / 119.0, 0.0).unwrap();
        assert!((p - 132.0 / 210.0).abs() < 1e-12);
        assert!((p - 0.6286).abs() < 0.0005);
        assert_eq!(system_precision(10, 5, 1.0, 0.0).unwrap(), 1.0);
        assert!(matches!(
            system_precision(0, 0, 0.0, 0.0),
            Err(GameError::Undefined(_))
        ));
        assert!(matches!(
            system_precision(5, 5, 1.0, 1.0),
            Err(GameError::Undefined(_))
        ));
        assert!(system_precision(1, 1, 1.5, 0.0).is_err());
        assert!(precision_improves(100, 50, 0.3, 0.0).unwrap());
        assert!(!precision_improves(100, 50, 0.0, 0.0).unwrap());
    }

    fn game(penalty: f64) -> VerificationGameSpec {
        VerificationGameSpec {
            q_high: 0.8,
            q_low: 0.8,
            c_high: 0.3,
            c_low: 0.1,
            penalty,
            p_fp: 1.0,
            p_fn: 0.0,
            payoffs: VerifierPayoffs::default(),
        }
    }

    #[test]
    fn equilibrium_examples() {
        let r = equilibrium_check(&game(0.5)).unwrap();
        assert!(r.is_ne && r.theorem_condition_holds);

        let r = equilibrium_check(&game(0.15)).unwrap();
        assert!(!r.is_ne && !r.theorem_condition_holds);
        let aic = &r.cells[0];
        assert!((aic.expert_payoff - 0.5).abs() < 1e-12);
        assert!((r.cells[3].expert_payoff - 0.55).abs() < 1e-12);

        let r = equilibrium_check(&game(0.2)).unwrap();
        assert!(!r.is_ne && !r.theorem_condition_holds);

        assert!(equilibrium_check(&VerificationGameSpec {
            c_high: 0.1,
            ..game(0.5)
        })
        .is_err());
        assert!(equilibrium_check(&VerificationGameSpec {
            penalty: 0.0,
            ..game(0.5)
        })
        .is_err());
    }

    #[test]
    fn valuation_file_round_trip() {
        let json = r#"{
            "players": ["code", "security", "debug", "verifier"],
            "verifier": "verifier",
            "coalitions": [
                {"members": ["code", "security", "debug"], "q": 0.670},
                {"members": ["code", "security", "debug", "verifier"], "q": 0.776}
            ]
        }"#;
        let file: ValuationFile = serde_json::from_str(json).unwrap();
        assert_eq!((file.w1, file.w2), (1.0, 0.0));
        let val = file.valuation().unwrap();
        assert!((verifier_marginal(&val, "verifier").unwrap().value - 0.106).abs() < 1e-12);
    }

    /// Average marginal contribution over all k! join orders.
    fn permutation_oracle(k: usize, v: &dyn Fn(Coalition) -> f64) -> Vec<f64> {
        fn permute(items: &mut Vec<usize>, i: usize, out: &mut Vec<Vec<usize>>) {
            if i == items.len() {
                out.push(items.clone());
                return;
            }
            for j in i..items.len() {
                items.swap(i, j);
                permute(items, i + 1, out);
                items.swap(i, j);
            }
        }
        let mut orders = Vec::new();
        permute(&mut (0..k).collect(), 0, &mut orders);
        let mut phi = vec![0.0; k];
        for order in &orders {
            let mut s = Coalition::EMPTY;
            for &p in order {
                phi[p] += v(s.with(p)) - v(s);
                s = s.with(p);
            }
        }
        phi.iter().map(|x| x / orders.len() as f64).collect()
    }

    fn arb_game() -> impl Strategy<Value = (usize, Vec<f64>)> {
        (1usize..=5).prop_flat_map(|k| {
            (Just(k), proptest::collection::vec(-10.0f64..10.0, 1 << k)).prop_map(|(k, mut v)| {
                v[0] = 0.0;
                (k, v)
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn shapley_matches_permutation_oracle((k, table) in arb_game()) {
            let v = |s: Coalition| table[s.0 as usize];
            let phi = shapley_values(k, v).unwrap();
            let oracle = permutation_oracle(k, &v);
            for (a, b) in phi.iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            prop_assert!((phi.iter().sum::<f64>() - table[(1 << k) - 1]).abs() < 1e-9);
        }

        #[test]
        fn system_precision_monotone(tp in 1u64..500, fp in 1u64..500, a in 0.0f64..0.99, b in 0.0f64..0.99, d in 0.0f64..0.01) {
            let base = system_precision(tp, fp, a, b).unwrap();
            prop_assert!(system_precision(tp, fp, a + d, b).unwrap() >= base - 1e-15);
            prop_assert!(system_precision(tp, fp, a, b + d).unwrap() <= base + 1e-15);
        }

        #[test]
        fn free_verifier_never_hurts(q_exp in 0.0f64..0.9, gain in 0.0001f64..0.1, c in 0.0f64..5.0, w1 in 0.0f64..10.0, w2 in 0.0f64..10.0) {
            let mut val = CoalitionValuation::new(names(&["e", "v"]), 1.0, 0.0).unwrap();
            val.set_named(&["e"], q_exp, c).unwrap();
            val.set_named(&["e", "v"], q_exp + gain, c).unwrap();
            prop_assert!(verifier_marginal(&val, "v").unwrap().value > 0.0);
            val.w1 = w1;
            val.w2 = w2;
            prop_assert!(verifier_marginal(&val, "v").unwrap().value >= 0.0);
        }
    }
}
