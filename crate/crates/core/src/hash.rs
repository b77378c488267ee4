//! 64-bit FNV-1a, used for vocabulary fingerprints and input-file hashes.

const OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(OFFSET_BASIS, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Hash of a list of strings joined by `'\n'`.
pub fn fnv1a_lines<S: AsRef<str>>(items: &[S]) -> u64 {
    let mut h = OFFSET_BASIS;
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            h = (h ^ u64::from(b'\n')).wrapping_mul(PRIME);
        }
        for &b in item.as_ref().as_bytes() {
            h = (h ^ u64::from(b)).wrapping_mul(PRIME);
        }
    }
    h
}

pub fn to_hex(h: u64) -> String {
    format!("{h:016x}")
}

pub fn from_hex(s: &str) -> Option<u64> {
    u64::from_str_radix(s, 16).ok()
}

/// Serde adapter storing a `u64` hash as a 16-digit hex string.
pub(crate) mod hex_u64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::to_hex(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let s = String::deserialize(d)?;
        super::from_hex(&s).ok_or_else(|| serde::de::Error::custom(format!("bad hex hash {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_vectors() {
        // Published FNV-1a 64 test vectors.
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn lines_match_joined_bytes() {
        let items = ["$KEEP", "$DELETE", "$APPEND_to"];
        assert_eq!(fnv1a_lines(&items), fnv1a(items.join("\n").as_bytes()));
        assert_eq!(fnv1a_lines::<&str>(&[]), fnv1a(b""));
    }

    #[test]
    fn hex_round_trip() {
        let h = fnv1a(b"xyz");
        assert_eq!(from_hex(&to_hex(h)), Some(h));
        assert_eq!(to_hex(1).len(), 16);
    }
}
