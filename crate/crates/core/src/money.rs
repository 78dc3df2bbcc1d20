//! Exact currency amounts in integer cents.

use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A non-negative currency amount stored as integer cents.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Cents(pub u64);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AmountError {
    #[error("empty amount")]
    Empty,
    #[error("negative amount {0:?}")]
    Negative(String),
    #[error("invalid amount text {0:?}")]
    Invalid(String),
    #[error("amount {0:?} has sub-cent precision")]
    SubCent(String),
    #[error("amount {0:?} overflows")]
    Overflow(String),
}

impl Cents {
    pub const ZERO: Cents = Cents(0);

    pub fn value(self) -> u64 {
        self.0
    }

    /// Amount in currency units (lossy).
    pub fn as_units(self) -> f64 {
        self.0 as f64 / 100.0
    }

    /// Parse decimal text such as `"1,56"` or `"14000000.00"`.
    ///
    /// The optional thousands separator is dropped before parsing. No
    /// floating point is involved.
    pub fn parse_decimal(
        text: &str,
        decimal_separator: char,
        thousands_separator: Option<char>,
    ) -> Result<Cents, AmountError> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(AmountError::Empty);
        }
        let body = match trimmed.strip_prefix('+') {
            Some(rest) => rest,
            None if trimmed.starts_with('-') => return Err(AmountError::Negative(text.into())),
            None => trimmed,
        };
        let cleaned: String = match thousands_separator {
            Some(sep) => body.chars().filter(|&c| c != sep).collect(),
            None => body.to_string(),
        };
        let (int_part, frac_part) = match cleaned.split_once(decimal_separator) {
            Some((i, f)) => (i, f),
            None => (cleaned.as_str(), ""),
        };
        let digits = |s: &str| s.chars().all(|c| c.is_ascii_digit());
        if (int_part.is_empty() && frac_part.is_empty()) || !digits(int_part) || !digits(frac_part)
        {
            return Err(AmountError::Invalid(text.into()));
        }
        if frac_part.len() > 2 && frac_part[2..].chars().any(|c| c != '0') {
            return Err(AmountError::SubCent(text.into()));
        }
        let units: u64 = if int_part.is_empty() {
            0
        } else {
            int_part
                .parse()
                .map_err(|_| AmountError::Overflow(text.into()))?
        };
        let mut frac = frac_part.chars().take(2).collect::<String>();
        while frac.len() < 2 {
            frac.push('0');
        }
        let cents: u64 = frac.parse().expect("two ascii digits");
        units
            .checked_mul(100)
            .and_then(|u| u.checked_add(cents))
            .map(Cents)
            .ok_or_else(|| AmountError::Overflow(text.into()))
    }
}

impl fmt::Display for Cents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl Add for Cents {
    type Output = Cents;
    fn add(self, rhs: Cents) -> Cents {
        Cents(self.0 + rhs.0)
    }
}

impl AddAssign for Cents {
    fn add_assign(&mut self, rhs: Cents) {
        self.0 += rhs.0;
    }
}

impl std::iter::Sum for Cents {
    fn sum<I: Iterator<Item = Cents>>(iter: I) -> Cents {
        Cents(iter.map(|c| c.0).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_comma_decimals() {
        assert_eq!(Cents::parse_decimal("1,56", ',', None), Ok(Cents(156)));
        assert_eq!(
            Cents::parse_decimal("14000000,00", ',', None),
            Ok(Cents(1_400_000_000))
        );
        assert_eq!(Cents::parse_decimal(" 0,02 ", ',', None), Ok(Cents(2)));
        assert_eq!(Cents::parse_decimal("100", ',', None), Ok(Cents(10_000)));
        assert_eq!(Cents::parse_decimal("1,5", ',', None), Ok(Cents(150)));
        assert_eq!(Cents::parse_decimal(",5", ',', None), Ok(Cents(50)));
        assert_eq!(
            Cents::parse_decimal("1.234,50", ',', Some('.')),
            Ok(Cents(123_450))
        );
        assert_eq!(Cents::parse_decimal("2,500", ',', None), Ok(Cents(250)));
    }

    #[test]
    fn rejects_bad_amounts() {
        assert_eq!(Cents::parse_decimal("", ',', None), Err(AmountError::Empty));
        assert!(matches!(
            Cents::parse_decimal("-3,00", ',', None),
            Err(AmountError::Negative(_))
        ));
        assert!(matches!(
            Cents::parse_decimal("1.56", ',', None),
            Err(AmountError::Invalid(_))
        ));
        assert!(matches!(
            Cents::parse_decimal("abc", ',', None),
            Err(AmountError::Invalid(_))
        ));
        assert!(matches!(
            Cents::parse_decimal(",", ',', None),
            Err(AmountError::Invalid(_))
        ));
        assert!(matches!(
            Cents::parse_decimal("1,005", ',', None),
            Err(AmountError::SubCent(_))
        ));
        assert!(matches!(
            Cents::parse_decimal("999999999999999999999", ',', None),
            Err(AmountError::Overflow(_))
        ));
    }

    #[test]
    fn displays_two_decimals() {
        assert_eq!(Cents(2).to_string(), "0.02");
        assert_eq!(Cents(93_222_252_831).to_string(), "932222528.31");
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(c in 0u64..10_000_000_000_000) {
            prop_assert_eq!(Cents::parse_decimal(&Cents(c).to_string(), '.', None), Ok(Cents(c)));
            let comma = Cents(c).to_string().replace('.', ",");
            prop_assert_eq!(Cents::parse_decimal(&comma, ',', None), Ok(Cents(c)));
        }
    }
}
