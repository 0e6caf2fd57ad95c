//! Plate-format alphabet and positional disambiguation.
//!
//! Characters '0'/'O' and '1'/'I' are visually indistinguishable on plates
//! and are detected as single merged classes. A layout pattern such as
//! `AAANNNN` (A = alphabetic slot, N = numeric slot, ? = any) resolves the
//! merged classes by position after voting.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("layout pattern is empty")]
    EmptyPattern,
    #[error("invalid layout symbol '{0}' (expected A, N, ? or |)")]
    InvalidSymbol(char),
    #[error("layout rows must be 1 or 2")]
    InvalidRows,
    #[error("unknown character class '{0}'")]
    UnknownClass(char),
}

/// What a layout position accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    Alphabetic,
    Numeric,
    Any,
}

impl SlotKind {
    pub fn accepts(&self, c: char) -> bool {
        match self {
            SlotKind::Alphabetic => c.is_ascii_uppercase(),
            SlotKind::Numeric => c.is_ascii_digit(),
            SlotKind::Any => true,
        }
    }
}

/// Positional plate template in reading order.
///
/// Parsed from strings like `"AAANNNN"`; an optional `'|'` separates the two
/// rows of a square plate (`"NN|NNNNN"`) and is not part of the pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutSpec {
    pattern: Vec<SlotKind>,
    rows: u8,
}

impl LayoutSpec {
    pub fn parse(s: &str) -> Result<Self, LayoutError> {
        let mut pattern = Vec::new();
        let mut rows = 1u8;
        for c in s.chars() {
            match c {
                'A' | 'a' => pattern.push(SlotKind::Alphabetic),
                'N' | 'n' => pattern.push(SlotKind::Numeric),
                '?' => pattern.push(SlotKind::Any),
                '|' => rows += 1,
                other => return Err(LayoutError::InvalidSymbol(other)),
            }
        }
        if pattern.is_empty() {
            return Err(LayoutError::EmptyPattern);
        }
        if rows > 2 {
            return Err(LayoutError::InvalidRows);
        }
        Ok(Self { pattern, rows })
    }

    /// Brazilian single-row format: three letters then four digits.
    pub fn brazilian() -> Self {
        Self::parse("AAANNNN").expect("static pattern")
    }

    pub fn pattern(&self) -> &[SlotKind] {
        &self.pattern
    }

    pub fn len(&self) -> usize {
        self.pattern.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pattern.is_empty()
    }

    pub fn rows(&self) -> u8 {
        self.rows
    }
}

impl Default for LayoutSpec {
    fn default() -> Self {
        Self::brazilian()
    }
}

/// Detector class alphabet with the ambiguous pairs merged.
///
/// Canonical labels are `0-9` followed by `A-Z` without `I` and `O`
/// (34 classes); `I` maps to the `1` class and `O` to the `0` class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    labels: Vec<char>,
}

impl Alphabet {
    pub fn merged_latin() -> Self {
        let mut labels: Vec<char> = ('0'..='9').collect();
        labels.extend(('A'..='Z').filter(|c| *c != 'I' && *c != 'O'));
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Class index for a character, folding merged pairs onto their
    /// canonical class.
    pub fn class_of(&self, c: char) -> Result<usize, LayoutError> {
        let canonical = match c.to_ascii_uppercase() {
            'I' => '1',
            'O' => '0',
            other => other,
        };
        self.labels
            .iter()
            .position(|&l| l == canonical)
            .ok_or(LayoutError::UnknownClass(c))
    }

    /// Canonical label of a class index.
    pub fn label(&self, class_id: usize) -> Option<char> {
        self.labels.get(class_id).copied()
    }
}

impl Default for Alphabet {
    fn default() -> Self {
        Self::merged_latin()
    }
}

/// Outcome of [`disambiguate`]: the resolved text, and whether the input
/// length failed to match the layout (in which case the text is unchanged).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Disambiguated {
    pub text: String,
    pub length_mismatch: bool,
}

/// Resolves merged classes by slot: `0`/`O` becomes `O` at alphabetic slots
/// and `0` at numeric slots, likewise `1`/`I`. Other characters pass through.
/// A length mismatch leaves the text unchanged and sets the flag.
pub fn disambiguate(text: &str, layout: &LayoutSpec) -> Disambiguated {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() != layout.len() {
        return Disambiguated {
            text: text.to_string(),
            length_mismatch: true,
        };
    }
    let resolved: String = chars
        .iter()
        .zip(layout.pattern())
        .map(|(&c, slot)| match (slot, c) {
            (SlotKind::Alphabetic, '0') | (SlotKind::Alphabetic, 'O') => 'O',
            (SlotKind::Alphabetic, '1') | (SlotKind::Alphabetic, 'I') => 'I',
            (SlotKind::Numeric, 'O') | (SlotKind::Numeric, '0') => '0',
            (SlotKind::Numeric, 'I') | (SlotKind::Numeric, '1') => '1',
            (_, c) => c,
        })
        .collect();
    Disambiguated {
        text: resolved,
        length_mismatch: false,
    }
}

/// A place where the text contradicts the layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    LengthMismatch { expected: usize, actual: usize },
    SlotMismatch { index: usize, found: char },
}

/// Checks each position against the pattern. A length mismatch is reported
/// alone; otherwise every offending index is listed.
pub fn validate(text: &str, layout: &LayoutSpec) -> Vec<Violation> {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() != layout.len() {
        return vec![Violation::LengthMismatch {
            expected: layout.len(),
            actual: chars.len(),
        }];
    }
    chars
        .iter()
        .zip(layout.pattern())
        .enumerate()
        .filter(|(_, (c, slot))| !slot.accepts(**c))
        .map(|(index, (c, _))| Violation::SlotMismatch { index, found: *c })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn alphabet_has_34_merged_classes() {
        let a = Alphabet::merged_latin();
        assert_eq!(a.len(), 34);
        assert_eq!(a.class_of('I').unwrap(), a.class_of('1').unwrap());
        assert_eq!(a.class_of('O').unwrap(), a.class_of('0').unwrap());
        assert_eq!(a.label(a.class_of('I').unwrap()), Some('1'));
        assert!(a.class_of('#').is_err());
    }

    #[test]
    fn alphabet_round_trips_canonical_labels() {
        let a = Alphabet::merged_latin();
        for id in 0..a.len() {
            let label = a.label(id).unwrap();
            assert_eq!(a.class_of(label).unwrap(), id);
        }
    }

    #[test]
    fn pattern_parsing() {
        let l = LayoutSpec::parse("AAANNNN").unwrap();
        assert_eq!(l.len(), 7);
        assert_eq!(l.rows(), 1);
        let two_row = LayoutSpec::parse("NN|NNNNN").unwrap();
        assert_eq!(two_row.rows(), 2);
        assert_eq!(two_row.len(), 7);
        assert_eq!(LayoutSpec::parse(""), Err(LayoutError::EmptyPattern));
        assert_eq!(
            LayoutSpec::parse("AAX"),
            Err(LayoutError::InvalidSymbol('X'))
        );
    }

    #[test]
    fn resolves_merged_one_at_alphabetic_slot() {
        let l = LayoutSpec::brazilian();
        let d = disambiguate("A1Q1056", &l);
        assert_eq!(d.text, "AIQ1056");
        assert!(!d.length_mismatch);
    }

    #[test]
    fn leaves_unambiguous_text_alone() {
        let l = LayoutSpec::brazilian();
        assert_eq!(disambiguate("ABC1234", &l).text, "ABC1234");
    }

    #[test]
    fn length_mismatch_degrades_gracefully() {
        let l = LayoutSpec::brazilian();
        let d = disambiguate("AT7402", &l);
        assert_eq!(d.text, "AT7402");
        assert!(d.length_mismatch);
    }

    #[test]
    fn validate_accepts_well_formed_plate() {
        let l = LayoutSpec::brazilian();
        assert!(validate("AEK0977", &l).is_empty());
    }

    #[test]
    fn validate_reports_length() {
        let l = LayoutSpec::brazilian();
        assert_eq!(
            validate("AT7402", &l),
            vec![Violation::LengthMismatch {
                expected: 7,
                actual: 6
            }]
        );
    }

    #[test]
    fn validate_reports_letter_in_numeric_slot() {
        let l = LayoutSpec::brazilian();
        assert_eq!(
            validate("ATT402G", &l),
            vec![Violation::SlotMismatch {
                index: 6,
                found: 'G'
            }]
        );
    }

    #[test]
    fn validate_flags_misplaced_letter_after_length_match() {
        let l = LayoutSpec::parse("ANNNNN").unwrap();
        let d = disambiguate("0W0000", &l);
        assert!(!d.length_mismatch);
        // '0' at the A slot resolves to 'O'; 'W' at an N slot stays invalid.
        assert_eq!(d.text, "OW0000");
        assert_eq!(
            validate(&d.text, &l),
            vec![Violation::SlotMismatch {
                index: 1,
                found: 'W'
            }]
        );
    }

    fn plate_char() -> impl Strategy<Value = char> {
        prop::sample::select(('0'..='9').chain('A'..='Z').collect::<Vec<char>>())
    }

    proptest! {
        #[test]
        fn disambiguate_is_idempotent(
            chars in proptest::collection::vec(plate_char(), 0..12),
            pattern in "[AN?]{1,12}",
        ) {
            let layout = LayoutSpec::parse(&pattern).unwrap();
            let text: String = chars.into_iter().collect();
            let once = disambiguate(&text, &layout);
            let twice = disambiguate(&once.text, &layout);
            prop_assert_eq!(&once.text, &twice.text);
        }

        #[test]
        fn disambiguate_preserves_length_and_plain_chars(
            chars in proptest::collection::vec(plate_char(), 1..12),
        ) {
            let pattern: String = "AN?".chars().cycle().take(chars.len()).collect();
            let layout = LayoutSpec::parse(&pattern).unwrap();
            let text: String = chars.iter().collect();
            let out = disambiguate(&text, &layout);
            prop_assert_eq!(out.text.chars().count(), text.chars().count());
            for (a, b) in text.chars().zip(out.text.chars()) {
                if !matches!(a, '0' | 'O' | '1' | 'I') {
                    prop_assert_eq!(a, b);
                }
            }
        }

        #[test]
        fn disambiguated_text_has_no_merged_class_violations(
            chars in proptest::collection::vec(plate_char(), 1..12),
        ) {
            let pattern: String = "NA".chars().cycle().take(chars.len()).collect();
            let layout = LayoutSpec::parse(&pattern).unwrap();
            let text: String = chars.iter().collect();
            let out = disambiguate(&text, &layout);
            for v in validate(&out.text, &layout) {
                if let Violation::SlotMismatch { found, .. } = v {
                    prop_assert!(!matches!(found, '0' | 'O' | '1' | 'I'));
                }
            }
        }
    }
}
