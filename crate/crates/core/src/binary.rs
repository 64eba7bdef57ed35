//! Binary decisions derived from vectors, and the two termination paradigms
//! on a lock-step synchronous harness.
//!
//! The traditional paradigm agrees on a vector, lets every process apply the
//! binary function locally, then agrees on the resulting bit. The new
//! paradigm agrees on the vector a second time and applies the function to
//! the agreed vector. With a pure function both orders give the same bit.

use serde::Serialize;
use thiserror::Error;

use crate::sim::{ProcessOutcome, Trace};
use crate::value::{InitialValue, VectorValue};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BinaryError {
    #[error("slot {slot} holds {value}, not a single bit")]
    NotABit { slot: usize, value: String },
    #[error("vector {0} has more than one missing slot")]
    TooManyMissing(String),
    #[error("tie rule must be 0 or 1, got {0}")]
    BadTieRule(u8),
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no value reached the quorum of {quorum}")]
    QuorumUnreachable { quorum: usize },
    #[error("trace decided different vectors")]
    AgreementFailed,
    #[error("deciders derived different bits: {0:?}")]
    BitsDiffer(Vec<Option<u8>>),
}

fn check_tie(tie: u8) -> Result<(), BinaryError> {
    if tie > 1 {
        return Err(BinaryError::BadTieRule(tie));
    }
    Ok(())
}

fn bits_of(slots: &[Option<u8>], tie: u8) -> u8 {
    let ones = slots.iter().flatten().filter(|&&b| b == 1).count();
    let zeros = slots.iter().flatten().count() - ones;
    match ones.cmp(&zeros) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => 0,
        std::cmp::Ordering::Equal => tie,
    }
}

/// Majority over the present slots read as bits; an exact tie gives `tie`.
pub fn bf(v: &VectorValue, tie: u8) -> Result<u8, BinaryError> {
    check_tie(tie)?;
    if v.null_count() > 1 {
        return Err(BinaryError::TooManyMissing(v.to_string()));
    }
    let mut slots = Vec::with_capacity(v.len());
    for (slot, x) in v.slots().iter().enumerate() {
        slots.push(match x {
            None => None,
            Some(x) => match x.as_bytes() {
                [b @ (0 | 1)] => Some(*b),
                _ => return Err(BinaryError::NotABit { slot, value: x.to_hex() }),
            },
        });
    }
    Ok(bits_of(&slots, tie))
}

/// Bit values as initial values, one byte each.
pub fn bit_values(bits: &[u8]) -> Vec<InitialValue> {
    bits.iter().map(|&b| InitialValue::new([b])).collect()
}

/// Lock-step system: every message of a phase arrives before the next
/// phase starts. A faulty process is silent from the beginning.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SyncSystem {
    pub n: usize,
    pub faulty: Option<usize>,
    pub bits: Vec<u8>,
}

type Vector = Vec<Option<u8>>;

impl SyncSystem {
    pub fn new(bits: Vec<u8>, faulty: Option<usize>) -> Result<Self, BinaryError> {
        let sys = SyncSystem { n: bits.len(), faulty, bits };
        sys.validate()?;
        Ok(sys)
    }

    /// Several faulty processes are outside what the harness models.
    pub fn with_faulty(bits: Vec<u8>, faulty: &[usize]) -> Result<Self, BinaryError> {
        match faulty {
            [] => Self::new(bits, None),
            [f] => Self::new(bits, Some(*f)),
            _ => Err(BinaryError::Unsupported(format!("{} faulty processes; at most one is modeled", faulty.len()))),
        }
    }

    pub fn quorum(&self) -> usize {
        self.n / 2 + 1
    }

    fn validate(&self) -> Result<(), BinaryError> {
        if self.n < 3 {
            return Err(BinaryError::InvalidSystem(format!("n={} below 3", self.n)));
        }
        if let Some(b) = self.bits.iter().find(|&&b| b > 1) {
            return Err(BinaryError::InvalidSystem(format!("initial bit {b}")));
        }
        if let Some(f) = self.faulty {
            if f >= self.n {
                return Err(BinaryError::InvalidSystem(format!("faulty process {f} out of range")));
            }
        }
        if self.correct().count() < self.quorum() {
            return Err(BinaryError::InvalidSystem("correct processes below quorum".into()));
        }
        Ok(())
    }

    fn correct(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&i| Some(i) != self.faulty)
    }

    /// Phase 0: broadcast bits; each correct process builds its vector.
    fn phase0(&self) -> Vec<Option<Vector>> {
        let sent: Vector = (0..self.n).map(|j| (Some(j) != self.faulty).then_some(self.bits[j])).collect();
        (0..self.n).map(|i| (Some(i) != self.faulty).then(|| sent.clone())).collect()
    }

    /// Exchange vectors; each process keeps, per slot, the value at least a
    /// quorum of the received vectors agree on.
    fn agree_vectors(&self, held: &[Option<Vector>]) -> Result<Vec<Option<Vector>>, BinaryError> {
        let received: Vec<&Vector> = self.correct().map(|j| held[j].as_ref().expect("correct")).collect();
        let mut agreed = Vec::with_capacity(self.n);
        for slot in 0..self.n {
            let value = [None, Some(0), Some(1)]
                .into_iter()
                .find(|v| received.iter().filter(|r| r[slot] == *v).count() >= self.quorum())
                .ok_or(BinaryError::QuorumUnreachable { quorum: self.quorum() })?;
            agreed.push(value);
        }
        Ok((0..self.n).map(|i| (Some(i) != self.faulty).then(|| agreed.clone())).collect())
    }

    /// Exchange bits; the decision is the bit a quorum holds.
    fn agree_bits(&self, held: &[Option<u8>]) -> Result<u8, BinaryError> {
        let received: Vec<u8> = self.correct().map(|j| held[j].expect("correct")).collect();
        [0, 1]
            .into_iter()
            .find(|b| received.iter().filter(|r| *r == b).count() >= self.quorum())
            .ok_or(BinaryError::QuorumUnreachable { quorum: self.quorum() })
    }

    fn local_bits(&self, vectors: &[Option<Vector>], tie: u8) -> Result<Vec<Option<u8>>, BinaryError> {
        vectors
            .iter()
            .map(|v| {
                v.as_ref()
                    .map(|v| {
                        if v.iter().filter(|x| x.is_none()).count() > 1 {
                            return Err(BinaryError::TooManyMissing(format!("{v:?}")));
                        }
                        Ok(bits_of(v, tie))
                    })
                    .transpose()
            })
            .collect()
    }
}

/// Agree on a vector, apply the function per process, then agree on the bit.
pub fn run_traditional(sys: &SyncSystem, tie: u8) -> Result<u8, BinaryError> {
    check_tie(tie)?;
    sys.validate()?;
    let v = sys.agree_vectors(&sys.phase0())?;
    let local = sys.local_bits(&v, tie)?;
    sys.agree_bits(&local)
}

/// Agree on a vector (twice, the second round being the final phase's
/// agreement step), then apply the function to the agreed vector.
pub fn run_new_paradigm(sys: &SyncSystem, tie: u8) -> Result<u8, BinaryError> {
    check_tie(tie)?;
    sys.validate()?;
    let v = sys.agree_vectors(&sys.phase0())?;
    let v = sys.agree_vectors(&v)?;
    let bits = sys.local_bits(&v, tie)?;
    let mut correct = bits.iter().flatten();
    let first = *correct.next().expect("at least one correct process");
    if correct.any(|&b| b != first) {
        return Err(BinaryError::BitsDiffer(bits));
    }
    Ok(first)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub bits: Vec<u8>,
    pub faulty: Option<usize>,
    pub traditional: Result<u8, String>,
    pub new_paradigm: Result<u8, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CommuteReport {
    pub n: usize,
    pub tie: u8,
    pub instances: usize,
    pub mismatches: Vec<Mismatch>,
}

impl CommuteReport {
    pub fn summary(&self) -> String {
        format!(
            "commute n={} tie={}: {} instances, {} mismatches",
            self.n,
            self.tie,
            self.instances,
            self.mismatches.len()
        )
    }
}

/// Every bit assignment, with no fault and with each single silent process.
pub fn commutativity_check(n: usize, tie: u8) -> Result<CommuteReport, BinaryError> {
    check_tie(tie)?;
    if !(5..=7).contains(&n) {
        return Err(BinaryError::Unsupported(format!("n={n}; enumeration covers 5..=7")));
    }
    let mut instances = 0;
    let mut mismatches = Vec::new();
    for mask in 0u32..(1 << n) {
        let bits: Vec<u8> = (0..n).map(|k| ((mask >> k) & 1) as u8).collect();
        for faulty in std::iter::once(None).chain((0..n).map(Some)) {
            let sys = SyncSystem::new(bits.clone(), faulty)?;
            instances += 1;
            let a = run_traditional(&sys, tie).map_err(|e| e.to_string());
            let b = run_new_paradigm(&sys, tie).map_err(|e| e.to_string());
            if a != b || a.is_err() {
                mismatches.push(Mismatch { bits: bits.clone(), faulty, traditional: a, new_paradigm: b });
            }
        }
    }
    Ok(CommuteReport { n, tie, instances, mismatches })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BinaryLift {
    pub tie: u8,
    /// Per process; `None` where nothing was decided.
    pub bits: Vec<Option<u8>>,
    pub bit: u8,
}

/// Apply the binary function to every decided vector of an agreeing trace.
pub fn binary_from_async(trace: &Trace, tie: u8) -> Result<BinaryLift, BinaryError> {
    check_tie(tie)?;
    let decided: Vec<Option<&VectorValue>> = trace.verdict.outcomes.iter().map(ProcessOutcome::decided).collect();
    let mut present = decided.iter().flatten();
    if let Some(first) = present.next() {
        if present.any(|v| v != first) {
            return Err(BinaryError::AgreementFailed);
        }
    }
    let bits = decided.iter().map(|v| v.map(|v| bf(v, tie)).transpose()).collect::<Result<Vec<_>, _>>()?;
    let mut present = bits.iter().flatten();
    let Some(&bit) = present.next() else {
        return Err(BinaryError::InvalidSystem("no process decided".into()));
    };
    if present.any(|&b| b != bit) {
        return Err(BinaryError::BitsDiffer(bits));
    }
    Ok(BinaryLift { tie, bits, bit })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vv(slots: &[Option<u8>]) -> VectorValue {
        VectorValue::new(slots.iter().map(|s| s.map(|b| InitialValue::new([b]))).collect())
    }

    #[test]
    fn bf_examples() {
        assert_eq!(bf(&vv(&[Some(1), Some(1), Some(1), Some(0), Some(0)]), 0), Ok(1));
        assert_eq!(bf(&vv(&[Some(1), Some(1), Some(0), Some(0), None]), 0), Ok(0));
        assert_eq!(bf(&vv(&[Some(1), Some(1), Some(0), Some(0), None]), 1), Ok(1));
        assert_eq!(bf(&vv(&[None, Some(0), Some(0), Some(0), Some(0)]), 1), Ok(0));
    }

    #[test]
    fn bf_rejects_non_bits_and_double_gaps() {
        let v = VectorValue::new(vec![Some(InitialValue::new([2])), None]);
        assert!(matches!(bf(&v, 0), Err(BinaryError::NotABit { slot: 0, .. })));
        assert!(matches!(bf(&vv(&[None, None, Some(1)]), 0), Err(BinaryError::TooManyMissing(_))));
        assert_eq!(bf(&vv(&[Some(1)]), 2), Err(BinaryError::BadTieRule(2)));
    }

    #[test]
    fn paradigm_examples() {
        let all = SyncSystem::new(vec![1, 1, 0, 1, 0], None).unwrap();
        assert_eq!(run_traditional(&all, 0), Ok(1));
        assert_eq!(run_new_paradigm(&all, 0), Ok(1));
        for tie in [0, 1] {
            let silent = SyncSystem::new(vec![1, 1, 0, 0, 1], Some(4)).unwrap();
            assert_eq!(run_traditional(&silent, tie), Ok(tie));
            assert_eq!(run_new_paradigm(&silent, tie), Ok(tie));
            let silent = SyncSystem::new(vec![1, 0, 1, 0, 0], Some(4)).unwrap();
            assert_eq!(run_new_paradigm(&silent, tie), Ok(tie));
        }
        let three = SyncSystem::new(vec![0, 0, 0], None).unwrap();
        assert_eq!(run_traditional(&three, 1), Ok(0));
        assert_eq!(run_new_paradigm(&SyncSystem::new(vec![1; 5], None).unwrap(), 0), Ok(1));
    }

    #[test]
    fn system_validation() {
        assert!(SyncSystem::new(vec![0, 1], None).is_err());
        assert!(SyncSystem::new(vec![0, 1, 2], None).is_err());
        assert!(SyncSystem::new(vec![0, 1, 1], Some(3)).is_err());
        assert!(matches!(SyncSystem::with_faulty(vec![0; 5], &[0, 1]), Err(BinaryError::Unsupported(_))));
        // one silent process out of three still leaves a quorum of two
        assert!(SyncSystem::new(vec![0, 1, 1], Some(0)).is_ok());
    }

    #[test]
    fn commutativity_counts() {
        for tie in [0, 1] {
            let r = commutativity_check(5, tie).unwrap();
            assert_eq!(r.instances, 192);
            assert!(r.mismatches.is_empty(), "{:?}", r.mismatches);
            let r = commutativity_check(6, tie).unwrap();
            assert_eq!(r.instances, 448);
            assert!(r.mismatches.is_empty());
        }
        assert!(commutativity_check(4, 0).is_err());
    }

    #[test]
    fn unanimous_rows_give_the_unanimous_bit() {
        for b in [0, 1] {
            for faulty in [None, Some(2)] {
                let sys = SyncSystem::new(vec![b; 5], faulty).unwrap();
                assert_eq!(run_traditional(&sys, 1 - b), Ok(b));
                assert_eq!(run_new_paradigm(&sys, 1 - b), Ok(b));
            }
        }
    }
}
