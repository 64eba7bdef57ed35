//! Process identities, opaque initial values and N-slot vectors.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Smallest system size the algorithm is defined for.
pub const MIN_PROCESSES: usize = 5;

/// Dense process index in `[0, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(pub usize);

impl ProcessId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// An opaque initial value. Compared bytewise and never interpreted by the protocol.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InitialValue(Arc<[u8]>);

impl InitialValue {
    pub fn new(bytes: impl AsRef<[u8]>) -> Self {
        InitialValue(Arc::from(bytes.as_ref()))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        hex::decode(s).map(InitialValue::new)
    }
}

impl fmt::Debug for InitialValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", self.to_hex())
    }
}

impl fmt::Display for InitialValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for InitialValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for InitialValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        InitialValue::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Distinct one-byte values `0x01..=n` (wrapping past 255).
pub fn default_initial_values(n: usize) -> Vec<InitialValue> {
    (1..=n).map(|k| InitialValue::new([k as u8])).collect()
}

/// An N-slot vector of initial values where a slot may hold the null marker.
///
/// Equality is structural: slotwise bytewise, and a null slot equals only a null slot.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VectorValue(Arc<[Option<InitialValue>]>);

impl VectorValue {
    pub fn new(slots: Vec<Option<InitialValue>>) -> Self {
        VectorValue(Arc::from(slots))
    }

    pub fn empty(n: usize) -> Self {
        VectorValue::new(vec![None; n])
    }

    pub fn full(values: &[InitialValue]) -> Self {
        VectorValue::new(values.iter().cloned().map(Some).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn slots(&self) -> &[Option<InitialValue>] {
        &self.0
    }

    pub fn get(&self, k: usize) -> Option<&InitialValue> {
        self.0.get(k).and_then(Option::as_ref)
    }

    pub fn null_count(&self) -> usize {
        self.0.iter().filter(|s| s.is_none()).count()
    }

    /// Index of the first null slot, if any.
    pub fn null_index(&self) -> Option<usize> {
        self.0.iter().position(Option::is_none)
    }

    /// True when no slot is null (the full vector).
    pub fn is_full(&self) -> bool {
        self.null_count() == 0
    }

    pub fn with_slot(&self, k: usize, value: InitialValue) -> Self {
        let mut slots = self.0.to_vec();
        slots[k] = Some(value);
        VectorValue::new(slots)
    }
}

impl fmt::Debug for VectorValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for VectorValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (k, slot) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            match slot {
                Some(v) => write!(f, "{v}")?,
                None => f.write_str("∅")?,
            }
        }
        f.write_str(")")
    }
}

impl Serialize for VectorValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.0.as_ref().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for VectorValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Vec::<Option<InitialValue>>::deserialize(deserializer).map(VectorValue::new)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(b: u8) -> InitialValue {
        InitialValue::new([b])
    }

    #[test]
    fn null_bookkeeping() {
        let vec = VectorValue::new(vec![Some(v(1)), None, Some(v(3))]);
        assert_eq!(vec.null_count(), 1);
        assert_eq!(vec.null_index(), Some(1));
        assert!(!vec.is_full());
        let filled = vec.with_slot(1, v(2));
        assert!(filled.is_full());
        assert_eq!(filled.to_string(), "(01,02,03)");
    }

    #[test]
    fn null_equals_only_null() {
        let a = VectorValue::new(vec![None, Some(v(2))]);
        let b = VectorValue::new(vec![Some(v(1)), Some(v(2))]);
        assert_ne!(a, b);
        assert_eq!(a, VectorValue::new(vec![None, Some(v(2))]));
    }

    #[test]
    fn json_uses_hex_and_null() {
        let vec = VectorValue::new(vec![Some(v(0xab)), None]);
        let s = serde_json::to_string(&vec).unwrap();
        assert_eq!(s, r#"["ab",null]"#);
        let back: VectorValue = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec);
    }
}
