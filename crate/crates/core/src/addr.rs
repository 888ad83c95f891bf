//! IPv6 value types: 128-bit addresses, prefixes, interface identifiers,
//! and normalized Shannon entropy over IID nibbles.
//!
//! Addresses render in RFC 5952 canonical form (lowercase, zero-compressed);
//! all persisted output uses that form. Parsing accepts any RFC 4291 textual
//! form including embedded dotted-quads and reports the byte offset of the
//! offending token on failure.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// A 128-bit IPv6 address, stored as a big-endian-ordered unsigned value.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ip6(u128);

impl Ip6 {
    pub const UNSPECIFIED: Ip6 = Ip6(0);

    pub const fn from_bits(bits: u128) -> Self {
        Ip6(bits)
    }

    pub const fn bits(self) -> u128 {
        self.0
    }

    pub fn octets(self) -> [u8; 16] {
        self.0.to_be_bytes()
    }

    /// The interface identifier: the low 64 bits of the address.
    pub const fn iid(self) -> Iid {
        Iid(self.0 as u64)
    }

    /// The containing /48, used as the privacy-preserving release granularity.
    pub fn net48(self) -> Prefix {
        Prefix::new(self, 48).expect("48 is a valid prefix length")
    }

    /// The containing /64, the standard subnet and tracking unit.
    pub fn net64(self) -> Prefix {
        Prefix::new(self, 64).expect("64 is a valid prefix length")
    }
}

impl fmt::Display for Ip6 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // std's Display implements RFC 5952: lowercase hex, longest zero run
        // compressed, mixed notation for v4-mapped forms.
        std::net::Ipv6Addr::from(self.0).fmt(f)
    }
}

impl fmt::Debug for Ip6 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ip6({self})")
    }
}

impl From<std::net::Ipv6Addr> for Ip6 {
    fn from(a: std::net::Ipv6Addr) -> Self {
        Ip6(u128::from(a))
    }
}

impl FromStr for Ip6 {
    type Err = ParseAddrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_ipv6(s)
    }
}

/// Why an address failed to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseAddrErrorKind {
    Empty,
    UnexpectedColon,
    EmptyGroup,
    GroupTooLong,
    InvalidCharacter,
    DoubleCompression,
    TooManyGroups,
    TooFewGroups,
    InvalidIpv4Tail,
}

impl fmt::Display for ParseAddrErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            Self::Empty => "empty input",
            Self::UnexpectedColon => "unexpected leading colon",
            Self::EmptyGroup => "empty hex group",
            Self::GroupTooLong => "hex group longer than 4 digits",
            Self::InvalidCharacter => "invalid character",
            Self::DoubleCompression => "'::' appears more than once",
            Self::TooManyGroups => "too many groups",
            Self::TooFewGroups => "too few groups and no '::'",
            Self::InvalidIpv4Tail => "invalid embedded IPv4 address",
        };
        f.write_str(msg)
    }
}

/// Address parse failure, carrying the byte offset of the offending token.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid IPv6 address at byte {offset}: {kind}")]
pub struct ParseAddrError {
    pub offset: usize,
    pub kind: ParseAddrErrorKind,
}

fn err(offset: usize, kind: ParseAddrErrorKind) -> ParseAddrError {
    ParseAddrError { offset, kind }
}

/// Parses any RFC 4291/5952 textual form, including zero compression and an
/// embedded dotted-quad tail.
pub fn parse_ipv6(text: &str) -> Result<Ip6, ParseAddrError> {
    use ParseAddrErrorKind::*;

    let bytes = text.as_bytes();
    if bytes.is_empty() {
        return Err(err(0, Empty));
    }

    let mut head: Vec<u16> = Vec::with_capacity(8);
    let mut tail: Vec<u16> = Vec::new();
    let mut compressed = false;
    let mut pos = 0usize;

    if bytes.len() >= 2 && bytes[0] == b':' && bytes[1] == b':' {
        compressed = true;
        pos = 2;
        if pos == bytes.len() {
            return Ok(Ip6(0));
        }
    } else if bytes[0] == b':' {
        return Err(err(0, UnexpectedColon));
    }

    loop {
        let group_start = pos;
        let group_end = bytes[pos..]
            .iter()
            .position(|&b| b == b':')
            .map_or(bytes.len(), |i| pos + i);
        let token = &text[group_start..group_end];

        if token.is_empty() {
            return Err(err(group_start, EmptyGroup));
        }

        if token.contains('.') {
            // Dotted-quad tail: must be the final token and contributes two groups.
            if group_end != bytes.len() {
                return Err(err(group_end, InvalidIpv4Tail));
            }
            let v4 = parse_dotted_quad(token, group_start)?;
            let side = if compressed { &mut tail } else { &mut head };
            side.push((v4 >> 16) as u16);
            side.push(v4 as u16);
            pos = group_end;
            break;
        }

        if token.len() > 4 {
            return Err(err(group_start, GroupTooLong));
        }
        let mut value = 0u16;
        for (i, b) in token.bytes().enumerate() {
            let digit = match b {
                b'0'..=b'9' => b - b'0',
                b'a'..=b'f' => b - b'a' + 10,
                b'A'..=b'F' => b - b'A' + 10,
                _ => return Err(err(group_start + i, InvalidCharacter)),
            };
            value = (value << 4) | u16::from(digit);
        }
        if compressed { &mut tail } else { &mut head }.push(value);

        pos = group_end;
        if pos == bytes.len() {
            break;
        }
        pos += 1; // consume ':'
        if pos < bytes.len() && bytes[pos] == b':' {
            if compressed {
                return Err(err(pos - 1, DoubleCompression));
            }
            compressed = true;
            pos += 1;
            if pos == bytes.len() {
                break;
            }
        } else if pos == bytes.len() {
            // A trailing single colon leaves an empty final group.
            return Err(err(pos, EmptyGroup));
        }
    }

    let total = head.len() + tail.len();
    let groups: [u16; 8] = if compressed {
        if total > 7 {
            return Err(err(pos, TooManyGroups));
        }
        let mut g = [0u16; 8];
        g[..head.len()].copy_from_slice(&head);
        g[8 - tail.len()..].copy_from_slice(&tail);
        g
    } else {
        match total.cmp(&8) {
            std::cmp::Ordering::Less => return Err(err(pos, TooFewGroups)),
            std::cmp::Ordering::Greater => return Err(err(pos, TooManyGroups)),
            std::cmp::Ordering::Equal => {
                let mut g = [0u16; 8];
                g.copy_from_slice(&head);
                g
            }
        }
    };

    let mut bits = 0u128;
    for g in groups {
        bits = (bits << 16) | u128::from(g);
    }
    Ok(Ip6(bits))
}

fn parse_dotted_quad(token: &str, base: usize) -> Result<u32, ParseAddrError> {
    use ParseAddrErrorKind::InvalidIpv4Tail;

    let mut out = 0u32;
    let mut count = 0;
    let mut offset = base;
    for part in token.split('.') {
        count += 1;
        if count > 4 || part.is_empty() || part.len() > 3 {
            return Err(err(offset, InvalidIpv4Tail));
        }
        if part.len() > 1 && part.starts_with('0') {
            return Err(err(offset, InvalidIpv4Tail));
        }
        let mut octet = 0u32;
        for b in part.bytes() {
            if !b.is_ascii_digit() {
                return Err(err(offset, InvalidIpv4Tail));
            }
            octet = octet * 10 + u32::from(b - b'0');
        }
        if octet > 255 {
            return Err(err(offset, InvalidIpv4Tail));
        }
        out = (out << 8) | octet;
        offset += part.len() + 1;
    }
    if count != 4 {
        return Err(err(base, InvalidIpv4Tail));
    }
    Ok(out)
}

/// Prefix length outside 0..=128.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("prefix length {0} out of range 0..=128")]
pub struct InvalidPrefixLen(pub u8);

/// An IPv6 prefix: a base address masked to `len` bits.
///
/// The stored base always has every bit below `128 - len` cleared.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix {
    base: Ip6,
    len: u8,
}

#[allow(clippy::len_without_is_empty)] // a prefix length, not a container
impl Prefix {
    /// Masks `addr` down to `len` bits. Host bits in `addr` are discarded.
    pub fn new(addr: Ip6, len: u8) -> Result<Prefix, InvalidPrefixLen> {
        if len > 128 {
            return Err(InvalidPrefixLen(len));
        }
        Ok(Prefix {
            base: Ip6(addr.0 & mask_bits(len)),
            len,
        })
    }

    pub const fn base(self) -> Ip6 {
        self.base
    }

    pub const fn len(self) -> u8 {
        self.len
    }

    pub fn contains(self, addr: Ip6) -> bool {
        addr.0 & mask_bits(self.len) == self.base.0
    }
}

pub(crate) const fn mask_bits(len: u8) -> u128 {
    if len == 0 { 0 } else { !0u128 << (128 - len as u32) }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.base, self.len)
    }
}

impl fmt::Debug for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Prefix({self})")
    }
}

/// Prefix parse failure.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParsePrefixError {
    #[error("missing '/' in prefix")]
    MissingSlash,
    #[error(transparent)]
    Addr(#[from] ParseAddrError),
    #[error("invalid prefix length: {0:?}")]
    Len(String),
}

impl FromStr for Prefix {
    type Err = ParsePrefixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr_text, len_text) = s.rsplit_once('/').ok_or(ParsePrefixError::MissingSlash)?;
        let addr = parse_ipv6(addr_text)?;
        let len: u8 = len_text
            .parse()
            .map_err(|_| ParsePrefixError::Len(len_text.to_string()))?;
        Prefix::new(addr, len).map_err(|_| ParsePrefixError::Len(len_text.to_string()))
    }
}

/// A 64-bit interface identifier: the low half of an IPv6 address.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Iid(u64);

impl Iid {
    pub const fn from_bits(bits: u64) -> Self {
        Iid(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    /// Normalized Shannon entropy of the IID's 16 hex nibbles.
    ///
    /// The per-symbol entropy over the nibble-frequency distribution is
    /// divided by 4 bits (the 16-symbol maximum), yielding a value in
    /// [0.0, 1.0]. 1.0 means all nibbles distinct, 0.0 all equal.
    pub fn entropy(self) -> Entropy {
        let mut counts = [0u32; 16];
        let mut v = self.0;
        for _ in 0..16 {
            counts[(v & 0xF) as usize] += 1;
            v >>= 4;
        }
        let mut h = 0.0f64;
        for &c in &counts {
            if c > 0 {
                let p = f64::from(c) / 16.0;
                h -= p * p.log2();
            }
        }
        Entropy((h / 4.0).clamp(0.0, 1.0))
    }
}

impl fmt::Debug for Iid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Iid({:#018x})", self.0)
    }
}

/// Normalized entropy score in [0.0, 1.0].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Entropy(f64);

impl Entropy {
    /// Rejects NaN and out-of-range values.
    pub fn new(value: f64) -> Option<Entropy> {
        (0.0..=1.0).contains(&value).then_some(Entropy(value))
    }

    pub const fn value(self) -> f64 {
        self.0
    }
}

/// Coarse entropy band. The 0.25 and 0.75 boundaries belong to `Medium`;
/// `Low` and `High` are strict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntropyBand {
    Low,
    Medium,
    High,
}

impl EntropyBand {
    pub fn of(score: Entropy) -> EntropyBand {
        if score.0 < 0.25 {
            EntropyBand::Low
        } else if score.0 > 0.75 {
            EntropyBand::High
        } else {
            EntropyBand::Medium
        }
    }
}
