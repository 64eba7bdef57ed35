//! Canonical byte encoding used for configuration hashing.
//!
//! Field order is fixed, integers are little-endian `u64`, byte strings are
//! length-prefixed, and optional values carry a one-byte tag. Two values with
//! equal encodings are treated as the same state by the explorer.

use std::hash::Hasher;

use fnv::FnvHasher;

use crate::value::{InitialValue, ProcessId, VectorValue};

pub trait Canonical {
    fn encode(&self, out: &mut Vec<u8>);
}

/// 64-bit FNV-1a over the canonical encoding.
pub fn canonical_hash<T: Canonical + ?Sized>(value: &T) -> u64 {
    let mut buf = Vec::with_capacity(1024);
    value.encode(&mut buf);
    hash_bytes(&buf)
}

pub fn hash_bytes(bytes: &[u8]) -> u64 {
    let mut hasher = FnvHasher::default();
    hasher.write(bytes);
    hasher.finish()
}

/// Lowercase 16-digit hex rendering used in trace files.
pub fn hash_hex(hash: u64) -> String {
    format!("{hash:016x}")
}

pub fn parse_hash_hex(s: &str) -> Option<u64> {
    u64::from_str_radix(s, 16).ok()
}

pub(crate) fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_bool(out: &mut Vec<u8>, v: bool) {
    out.push(v as u8);
}

impl Canonical for u64 {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u64(out, *self);
    }
}

impl Canonical for u32 {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u64(out, u64::from(*self));
    }
}

impl Canonical for usize {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u64(out, *self as u64);
    }
}

impl Canonical for bool {
    fn encode(&self, out: &mut Vec<u8>) {
        put_bool(out, *self);
    }
}

impl Canonical for ProcessId {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u64(out, self.0 as u64);
    }
}

impl Canonical for InitialValue {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u64(out, self.as_bytes().len() as u64);
        out.extend_from_slice(self.as_bytes());
    }
}

impl Canonical for VectorValue {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u64(out, self.len() as u64);
        for slot in self.slots() {
            slot.encode(out);
        }
    }
}

impl<T: Canonical> Canonical for Option<T> {
    fn encode(&self, out: &mut Vec<u8>) {
        match self {
            None => out.push(0),
            Some(v) => {
                out.push(1);
                v.encode(out);
            }
        }
    }
}

impl<T: Canonical> Canonical for [T] {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u64(out, self.len() as u64);
        for item in self {
            item.encode(out);
        }
    }
}

impl<T: Canonical> Canonical for Vec<T> {
    fn encode(&self, out: &mut Vec<u8>) {
        self.as_slice().encode(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_and_empty_string_differ() {
        let a = VectorValue::new(vec![None]);
        let b = VectorValue::new(vec![Some(InitialValue::new([]))]);
        assert_ne!(canonical_hash(&a), canonical_hash(&b));
    }

    #[test]
    fn length_prefix_separates_concatenations() {
        let a = VectorValue::new(vec![Some(InitialValue::new([1, 2])), Some(InitialValue::new([3]))]);
        let b = VectorValue::new(vec![Some(InitialValue::new([1])), Some(InitialValue::new([2, 3]))]);
        assert_ne!(canonical_hash(&a), canonical_hash(&b));
    }

    #[test]
    fn fnv_reference_value() {
        // FNV-1a 64 of the empty input is the offset basis.
        assert_eq!(hash_bytes(&[]), 0xcbf29ce484222325);
        assert_eq!(hash_hex(0xab), "00000000000000ab");
        assert_eq!(parse_hash_hex("00000000000000ab"), Some(0xab));
    }
}
