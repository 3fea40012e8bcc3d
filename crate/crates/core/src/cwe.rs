//! CWE identifiers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A normalized CWE identifier, displayed as `CWE-<n>`.
///
/// Ordering is numeric, so `CWE-78 < CWE-121`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cwe(u32);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid CWE identifier `{0}`")]
pub struct InvalidCwe(pub String);

impl Cwe {
    pub fn new(id: u32) -> Result<Self, InvalidCwe> {
        if id == 0 {
            return Err(InvalidCwe("CWE-0".into()));
        }
        Ok(Cwe(id))
    }

    pub fn id(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Cwe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CWE-{}", self.0)
    }
}

impl FromStr for Cwe {
    type Err = InvalidCwe;

    /// Accepts `CWE-121`, `cwe 121`, `CWE121` and a bare `121`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        let upper = trimmed.to_ascii_uppercase();
        let digits = upper
            .strip_prefix("CWE")
            .map(|rest| rest.trim_start_matches(['-', ' ', '_']))
            .unwrap_or(&upper);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(InvalidCwe(trimmed.to_string()));
        }
        let id: u32 = digits
            .parse()
            .map_err(|_| InvalidCwe(trimmed.to_string()))?;
        Cwe::new(id).map_err(|_| InvalidCwe(trimmed.to_string()))
    }
}

impl Serialize for Cwe {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Cwe {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_surface_forms() {
        for s in ["CWE-121", "cwe-121", "CWE 121", "CWE121", "121", "CWE-0121"] {
            assert_eq!(s.parse::<Cwe>().unwrap(), Cwe(121), "{s}");
        }
    }

    #[test]
    fn rejects_garbage() {
        for s in ["", "CWE-", "CWE-0", "CWEXYZ", "CWE-12a", "-5"] {
            assert!(s.parse::<Cwe>().is_err(), "{s}");
        }
    }

    #[test]
    fn numeric_order() {
        let a: Cwe = "CWE-78".parse().unwrap();
        let b: Cwe = "CWE-121".parse().unwrap();
        assert!(a < b);
        assert_eq!(serde_json::to_string(&b).unwrap(), "\"CWE-121\"");
    }
}
