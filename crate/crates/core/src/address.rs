//! Physical address decoding.
//!
//! A [`MappingScheme`] is an ordered list of bit slices that together cover
//! the address word exactly once. The named schemes derive their field widths
//! from the [`Geometry`], so with the default geometry `DEFAULT_MICRON` lays
//! out as
//!
//! ```text
//! [36:35] rank  [34:23] row  [22:14] column  [13:11] partition
//! [10:8]  bank  [7:6]   channel              [5:0]   byte in line
//! ```
//!
//! `ROW_INTERLEAVED` keeps whole rows of columns contiguous before moving to
//! the next channel/bank, and `BLOCK_INTERLEAVED` spreads consecutive lines
//! over channel, bank, rank and partition before advancing the column:
//!
//! ```text
//! ROW_INTERLEAVED:   row | partition | rank | bank | channel | column | byte
//! BLOCK_INTERLEAVED: row | column | partition | rank | bank | channel | byte
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::Geometry;
use crate::request::AccessKind;

/// Default width of the byte-in-line field (64-byte lines on the bus).
pub const DEFAULT_BYTE_BITS: u32 = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AddressError {
    #[error("address {addr:#x} does not fit in {width} bits")]
    AddressOutOfRange { addr: u64, width: u32 },
    #[error("scheme does not match geometry: {0}")]
    SchemeGeometryMismatch(String),
    #[error("{field} = {value} exceeds its bound {bound}")]
    FieldOutOfRange { field: Field, value: u64, bound: u64 },
    #[error("malformed mapping scheme: {0}")]
    InvalidScheme(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Channel,
    Rank,
    Bank,
    Partition,
    Row,
    Column,
    Byte,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Field::Channel => "channel",
            Field::Rank => "rank",
            Field::Bank => "bank",
            Field::Partition => "partition",
            Field::Row => "row",
            Field::Column => "column",
            Field::Byte => "byte",
        };
        f.write_str(s)
    }
}

/// Inclusive bit range `[hi:lo]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitRange {
    pub hi: u32,
    pub lo: u32,
}

impl BitRange {
    pub fn width(&self) -> u32 {
        self.hi - self.lo + 1
    }

    fn mask(&self) -> u64 {
        if self.width() >= 64 {
            u64::MAX
        } else {
            (1u64 << self.width()) - 1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    DefaultMicron,
    RowInterleaved,
    BlockInterleaved,
    Custom,
}

/// One slice of a custom scheme as written in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSlice {
    pub field: Field,
    pub hi: u32,
    pub lo: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecodedAddress {
    pub channel: u32,
    pub rank: u32,
    pub bank: u32,
    pub partition: u32,
    pub row: u32,
    pub column: u32,
    pub byte_in_line: u32,
}

impl DecodedAddress {
    /// `((channel * ranks + rank) * banks_per_rank + bank)`.
    pub fn global_bank(&self, g: &Geometry) -> usize {
        ((self.channel as usize * g.ranks_per_channel as usize) + self.rank as usize) * g.banks_per_rank as usize
            + self.bank as usize
    }

    fn get(&self, field: Field) -> u32 {
        match field {
            Field::Channel => self.channel,
            Field::Rank => self.rank,
            Field::Bank => self.bank,
            Field::Partition => self.partition,
            Field::Row => self.row,
            Field::Column => self.column,
            Field::Byte => self.byte_in_line,
        }
    }

    fn set(&mut self, field: Field, value: u32) {
        match field {
            Field::Channel => self.channel = value,
            Field::Rank => self.rank = value,
            Field::Bank => self.bank = value,
            Field::Partition => self.partition = value,
            Field::Row => self.row = value,
            Field::Column => self.column = value,
            Field::Byte => self.byte_in_line = value,
        }
    }
}

/// Bank-level conflict class of two accesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConflictKind {
    RR,
    RW,
    WW,
    None,
}

impl ConflictKind {
    pub fn of_kinds(a: AccessKind, b: AccessKind) -> Self {
        match (a, b) {
            (AccessKind::Read, AccessKind::Read) => ConflictKind::RR,
            (AccessKind::Write, AccessKind::Write) => ConflictKind::WW,
            _ => ConflictKind::RW,
        }
    }
}

/// Classifies two accesses by bank: partitions are irrelevant here.
pub fn conflict_kind(a: (&DecodedAddress, AccessKind), b: (&DecodedAddress, AccessKind), g: &Geometry) -> ConflictKind {
    if a.0.global_bank(g) != b.0.global_bank(g) {
        ConflictKind::None
    } else {
        ConflictKind::of_kinds(a.1, b.1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingScheme {
    name: SchemeName,
    /// Most significant slice first.
    fields: Vec<(Field, BitRange)>,
    width: u32,
}

const DEFAULT_MICRON_ORDER: [Field; 7] = [
    Field::Rank,
    Field::Row,
    Field::Column,
    Field::Partition,
    Field::Bank,
    Field::Channel,
    Field::Byte,
];

const ROW_INTERLEAVED_ORDER: [Field; 7] = [
    Field::Row,
    Field::Partition,
    Field::Rank,
    Field::Bank,
    Field::Channel,
    Field::Column,
    Field::Byte,
];

const BLOCK_INTERLEAVED_ORDER: [Field; 7] = [
    Field::Row,
    Field::Column,
    Field::Partition,
    Field::Rank,
    Field::Bank,
    Field::Channel,
    Field::Byte,
];

fn field_bound(field: Field, g: &Geometry) -> Option<u64> {
    let n = match field {
        Field::Channel => g.channels,
        Field::Rank => g.ranks_per_channel,
        Field::Bank => g.banks_per_rank,
        Field::Partition => g.partitions_per_bank,
        Field::Row => g.rows_per_partition,
        Field::Column => g.columns_per_row,
        Field::Byte => return None,
    };
    Some(n as u64)
}

impl MappingScheme {
    pub fn named(name: SchemeName, g: &Geometry) -> Result<Self, AddressError> {
        Self::named_with_byte_bits(name, g, DEFAULT_BYTE_BITS)
    }

    pub fn named_with_byte_bits(name: SchemeName, g: &Geometry, byte_bits: u32) -> Result<Self, AddressError> {
        let order = match name {
            SchemeName::DefaultMicron => &DEFAULT_MICRON_ORDER,
            SchemeName::RowInterleaved => &ROW_INTERLEAVED_ORDER,
            SchemeName::BlockInterleaved => &BLOCK_INTERLEAVED_ORDER,
            SchemeName::Custom => {
                return Err(AddressError::InvalidScheme(
                    "custom schemes need an explicit field list".into(),
                ))
            }
        };
        g.validate()
            .map_err(|e| AddressError::SchemeGeometryMismatch(e.to_string()))?;
        let widths: Vec<(Field, u32)> = order
            .iter()
            .map(|&f| (f, field_bound(f, g).map_or(byte_bits, |n| n.trailing_zeros())))
            .collect();
        let width: u32 = widths.iter().map(|(_, w)| w).sum();
        let mut next = width;
        let mut fields = Vec::with_capacity(widths.len());
        for (f, w) in widths {
            if w == 0 {
                continue;
            }
            fields.push((f, BitRange { hi: next - 1, lo: next - w }));
            next -= w;
        }
        let scheme = Self { name, fields, width };
        scheme.validate(g)?;
        Ok(scheme)
    }

    pub fn default_micron(g: &Geometry) -> Result<Self, AddressError> {
        Self::named(SchemeName::DefaultMicron, g)
    }

    /// Builds a scheme from an explicit slice list (any order).
    pub fn custom(slices: &[FieldSlice], g: &Geometry) -> Result<Self, AddressError> {
        let mut fields: Vec<(Field, BitRange)> = Vec::with_capacity(slices.len());
        for s in slices {
            if s.hi < s.lo || s.hi >= 64 {
                return Err(AddressError::InvalidScheme(format!(
                    "bad bit range [{}:{}] for {}",
                    s.hi, s.lo, s.field
                )));
            }
            fields.push((s.field, BitRange { hi: s.hi, lo: s.lo }));
        }
        fields.sort_by(|a, b| b.1.lo.cmp(&a.1.lo));
        let width = fields.first().map_or(0, |(_, r)| r.hi + 1);
        let scheme = Self {
            name: SchemeName::Custom,
            fields,
            width,
        };
        scheme.validate(g)?;
        Ok(scheme)
    }

    pub fn name(&self) -> SchemeName {
        self.name
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn fields(&self) -> &[(Field, BitRange)] {
        &self.fields
    }

    pub fn range_of(&self, field: Field) -> Option<BitRange> {
        self.fields.iter().find(|(f, _)| *f == field).map(|(_, r)| *r)
    }

    /// Checks disjoint, gap-free coverage of `[width-1:0]` and that every
    /// coordinate field is exactly as wide as the geometry requires.
    pub fn validate(&self, g: &Geometry) -> Result<(), AddressError> {
        g.validate()
            .map_err(|e| AddressError::SchemeGeometryMismatch(e.to_string()))?;
        if self.width == 0 || self.width > 64 {
            return Err(AddressError::InvalidScheme(format!("unsupported width {}", self.width)));
        }
        let mut expect_hi = self.width;
        for (f, r) in &self.fields {
            if r.hi + 1 != expect_hi {
                return Err(AddressError::InvalidScheme(format!(
                    "{f} at [{}:{}] leaves a gap or overlaps below bit {}",
                    r.hi, r.lo, expect_hi
                )));
            }
            expect_hi = r.lo;
        }
        if expect_hi != 0 {
            return Err(AddressError::InvalidScheme(format!("bits [{}:0] are not covered", expect_hi - 1)));
        }
        for field in [
            Field::Channel,
            Field::Rank,
            Field::Bank,
            Field::Partition,
            Field::Row,
            Field::Column,
            Field::Byte,
        ] {
            let count = self.fields.iter().filter(|(f, _)| *f == field).count();
            if count > 1 {
                return Err(AddressError::InvalidScheme(format!("{field} appears {count} times")));
            }
            let width = self.range_of(field).map_or(0, |r| r.width());
            if let Some(bound) = field_bound(field, g) {
                if width != bound.trailing_zeros() {
                    return Err(AddressError::SchemeGeometryMismatch(format!(
                        "{field} is {width} bits wide but geometry has {bound} entries"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn decode(&self, addr: u64, g: &Geometry) -> Result<DecodedAddress, AddressError> {
        if self.width < 64 && addr >> self.width != 0 {
            return Err(AddressError::AddressOutOfRange {
                addr,
                width: self.width,
            });
        }
        let mut d = DecodedAddress::default();
        for (f, r) in &self.fields {
            d.set(*f, ((addr >> r.lo) & r.mask()) as u32);
        }
        // Bounds are implied by the widths, but custom geometries are checked
        // at validate() time only.
        debug_assert!(self.check_bounds(&d, g).is_ok());
        Ok(d)
    }

    pub fn encode(&self, d: &DecodedAddress, g: &Geometry) -> Result<u64, AddressError> {
        self.check_bounds(d, g)?;
        let mut addr = 0u64;
        for (f, r) in &self.fields {
            addr |= (d.get(*f) as u64 & r.mask()) << r.lo;
        }
        Ok(addr)
    }

    fn check_bounds(&self, d: &DecodedAddress, g: &Geometry) -> Result<(), AddressError> {
        for field in [
            Field::Channel,
            Field::Rank,
            Field::Bank,
            Field::Partition,
            Field::Row,
            Field::Column,
            Field::Byte,
        ] {
            let value = d.get(field) as u64;
            let bound = match field_bound(field, g) {
                Some(b) => b,
                None => self.range_of(Field::Byte).map_or(1, |r| 1u64 << r.width()),
            };
            if value >= bound {
                return Err(AddressError::FieldOutOfRange { field, value, bound });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g() -> Geometry {
        Geometry::default()
    }

    // Independent reference: slice bits straight from the documented layout.
    fn slice(addr: u64, hi: u32, lo: u32) -> u32 {
        ((addr >> lo) & ((1u64 << (hi - lo + 1)) - 1)) as u32
    }

    #[test]
    fn default_layout_matches_documented_bits() {
        let s = MappingScheme::default_micron(&g()).unwrap();
        assert_eq!(s.width(), 37);
        let expect = [
            (Field::Rank, 36, 35),
            (Field::Row, 34, 23),
            (Field::Column, 22, 14),
            (Field::Partition, 13, 11),
            (Field::Bank, 10, 8),
            (Field::Channel, 7, 6),
            (Field::Byte, 5, 0),
        ];
        for (f, hi, lo) in expect {
            assert_eq!(s.range_of(f), Some(BitRange { hi, lo }), "{f}");
        }
    }

    #[test]
    fn decode_zero() {
        let s = MappingScheme::default_micron(&g()).unwrap();
        assert_eq!(s.decode(0, &g()).unwrap(), DecodedAddress::default());
    }

    #[test]
    fn decode_partition_bits() {
        let s = MappingScheme::default_micron(&g()).unwrap();
        let addr = 0b101u64 << 11;
        let d = s.decode(addr, &g()).unwrap();
        assert_eq!(slice(addr, 13, 11), 5);
        assert_eq!(
            d,
            DecodedAddress {
                partition: 5,
                ..Default::default()
            }
        );
    }

    #[test]
    fn decode_bank_and_channel_bits() {
        let s = MappingScheme::default_micron(&g()).unwrap();
        let addr = (0b011u64 << 8) | (0b10u64 << 6);
        let d = s.decode(addr, &g()).unwrap();
        assert_eq!((slice(addr, 10, 8), slice(addr, 7, 6)), (3, 2));
        assert_eq!((d.bank, d.channel), (3, 2));
        assert_eq!((d.rank, d.row, d.column, d.partition), (0, 0, 0, 0));
    }

    #[test]
    fn encode_partition_only() {
        let s = MappingScheme::default_micron(&g()).unwrap();
        let d = DecodedAddress {
            partition: 5,
            ..Default::default()
        };
        let a = s.encode(&d, &g()).unwrap();
        assert_eq!(a, 0b101 << 11);
        assert_eq!(s.encode(&DecodedAddress::default(), &g()).unwrap(), 0);
    }

    #[test]
    fn wide_address_rejected() {
        let s = MappingScheme::default_micron(&g()).unwrap();
        assert!(matches!(
            s.decode(1 << 37, &g()),
            Err(AddressError::AddressOutOfRange { width: 37, .. })
        ));
    }

    #[test]
    fn encode_rejects_out_of_range_field() {
        let s = MappingScheme::default_micron(&g()).unwrap();
        let d = DecodedAddress {
            bank: 8,
            ..Default::default()
        };
        assert!(matches!(
            s.encode(&d, &g()),
            Err(AddressError::FieldOutOfRange { field: Field::Bank, .. })
        ));
    }

    #[test]
    fn scheme_geometry_mismatch() {
        let s = MappingScheme::default_micron(&g()).unwrap();
        let other = Geometry {
            partitions_per_bank: 16,
            ..g()
        };
        assert!(matches!(s.validate(&other), Err(AddressError::SchemeGeometryMismatch(_))));
        // A named scheme re-derived for the new geometry is fine.
        let s16 = MappingScheme::named(SchemeName::DefaultMicron, &other).unwrap();
        assert_eq!(s16.range_of(Field::Partition).unwrap().width(), 4);
        assert_eq!(s16.width(), 38);
    }

    #[test]
    fn custom_scheme_overlap_rejected() {
        let slices = [
            FieldSlice { field: Field::Rank, hi: 36, lo: 35 },
            FieldSlice { field: Field::Row, hi: 35, lo: 23 },
        ];
        assert!(matches!(MappingScheme::custom(&slices, &g()), Err(AddressError::InvalidScheme(_))));
    }

    #[test]
    fn custom_scheme_equal_to_default() {
        let d = MappingScheme::default_micron(&g()).unwrap();
        let mut slices: Vec<FieldSlice> = d
            .fields()
            .iter()
            .map(|(f, r)| FieldSlice { field: *f, hi: r.hi, lo: r.lo })
            .collect();
        slices.reverse();
        let c = MappingScheme::custom(&slices, &g()).unwrap();
        assert_eq!(c.fields(), d.fields());
        assert_eq!(c.name(), SchemeName::Custom);
    }

    #[test]
    fn conflict_kinds() {
        let a = DecodedAddress { bank: 2, ..Default::default() };
        let b = DecodedAddress { bank: 5, ..Default::default() };
        let w0 = DecodedAddress { partition: 1, ..Default::default() };
        let w1 = DecodedAddress { partition: 7, ..Default::default() };
        assert_eq!(conflict_kind((&a, AccessKind::Read), (&a, AccessKind::Write), &g()), ConflictKind::RW);
        assert_eq!(conflict_kind((&a, AccessKind::Read), (&b, AccessKind::Read), &g()), ConflictKind::None);
        assert_eq!(conflict_kind((&w0, AccessKind::Write), (&w1, AccessKind::Write), &g()), ConflictKind::WW);
    }

    fn arb_decoded() -> impl Strategy<Value = DecodedAddress> {
        (0u32..4, 0u32..4, 0u32..8, 0u32..8, 0u32..4096, 0u32..512, 0u32..64).prop_map(
            |(channel, rank, bank, partition, row, column, byte_in_line)| DecodedAddress {
                channel,
                rank,
                bank,
                partition,
                row,
                column,
                byte_in_line,
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn encode_decode_roundtrip(d in arb_decoded(), which in 0usize..3) {
            let name = [SchemeName::DefaultMicron, SchemeName::RowInterleaved, SchemeName::BlockInterleaved][which];
            let s = MappingScheme::named(name, &g()).unwrap();
            let a = s.encode(&d, &g()).unwrap();
            prop_assert_eq!(s.decode(a, &g()).unwrap(), d);
        }

        #[test]
        fn decode_encode_roundtrip(addr in 0u64..(1u64 << 37), which in 0usize..3) {
            let name = [SchemeName::DefaultMicron, SchemeName::RowInterleaved, SchemeName::BlockInterleaved][which];
            let s = MappingScheme::named(name, &g()).unwrap();
            let d = s.decode(addr, &g()).unwrap();
            prop_assert_eq!(s.encode(&d, &g()).unwrap(), addr);
        }
    }
}
