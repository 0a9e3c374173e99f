//! External-memory organization of wavelet coefficients.
//!
//! Two layouts are modelled over the same address space:
//!
//! * [`Layout::PrecinctAligned`] (Method 0): each precinct/component region
//!   stores whole bands in canonical order, row-major. A unit fetch needs
//!   one command per contiguous word run.
//! * [`Layout::GroupAligned`] (Method 1): each precinct/component region is
//!   split into four group regions; every unit entry holds all of the
//!   unit's blocks back to back, so one command fetches a unit.
//!
//! Coefficients are 32-bit sign-magnitude words packed two per 64-bit
//! memory word, even slot in the low half. The original and reconstructed
//! banks are disjoint and laid out back to back.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::AddAssign;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coeff::SignMag32;
use crate::error::{Error, Result};
use crate::grouping::{block_columns, unit_blocks, Geometry, GroupId, UNIT_COLUMNS};
use crate::residual::UnitBuffer;
use crate::wavelet::{Band, BandGrid, Component, PrecinctCoeffs, PRECINCT_LINES};

pub const COEFF_BITS: u32 = 32;
pub const COEFFS_PER_WORD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layout {
    PrecinctAligned,
    GroupAligned,
}

impl Layout {
    pub const BOTH: [Layout; 2] = [Layout::PrecinctAligned, Layout::GroupAligned];

    pub fn method(self) -> u8 {
        match self {
            Layout::PrecinctAligned => 0,
            Layout::GroupAligned => 1,
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.method())
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "0" => Ok(Layout::PrecinctAligned),
            "1" => Ok(Layout::GroupAligned),
            _ => Err(Error::Config(format!("unknown memory method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bank {
    Original,
    Reconstructed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DramConfig {
    pub word_bits: u32,
    pub burst_words: u64,
    pub cmd_overhead_cycles: u64,
    pub cycles_per_word: u64,
}

impl Default for DramConfig {
    fn default() -> Self {
        DramConfig {
            word_bits: 64,
            burst_words: 8,
            cmd_overhead_cycles: 20,
            cycles_per_word: 1,
        }
    }
}

impl DramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.word_bits != COEFF_BITS * COEFFS_PER_WORD as u32 {
            return Err(Error::Config(format!(
                "only 64-bit memory words are supported, got {}",
                self.word_bits
            )));
        }
        if self.burst_words == 0 || self.cycles_per_word == 0 {
            return Err(Error::Config(
                "burst_words and cycles_per_word must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Frame-level dimensions of the coefficient store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemGeometry {
    pub geometry: Geometry,
    pub components: usize,
    pub precincts: usize,
}

impl MemGeometry {
    pub fn new(width: usize, components: usize, precincts: usize) -> Result<Self> {
        if components == 0 || components > 3 {
            return Err(Error::Config(format!("unsupported component count {components}")));
        }
        Ok(MemGeometry {
            geometry: Geometry::new(width)?,
            components,
            precincts,
        })
    }

    pub fn width(&self) -> usize {
        self.geometry.width
    }

    pub fn component_slots(&self) -> usize {
        self.width() * PRECINCT_LINES
    }

    pub fn component_stride(&self) -> u64 {
        (self.component_slots() / COEFFS_PER_WORD) as u64
    }

    pub fn precinct_stride(&self) -> u64 {
        self.component_stride() * self.components as u64
    }

    pub fn bank_words(&self) -> u64 {
        self.precinct_stride() * self.precincts as u64
    }

    pub fn bank_base(&self, bank: Bank) -> u64 {
        match bank {
            Bank::Original => 0,
            Bank::Reconstructed => self.bank_words(),
        }
    }

    fn region_base(&self, bank: Bank, precinct: usize, component: usize) -> Result<u64> {
        check(precinct, self.precincts, "precinct")?;
        check(component, self.components, "component")?;
        Ok(self.bank_base(bank)
            + precinct as u64 * self.precinct_stride()
            + component as u64 * self.component_stride())
    }
}

fn check(index: usize, limit: usize, what: &'static str) -> Result<()> {
    if index < limit {
        Ok(())
    } else {
        Err(Error::OutOfRange { what, index, limit })
    }
}

/// Address of one 32-bit coefficient slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotAddr(pub u64);

impl SlotAddr {
    pub fn word(self) -> u64 {
        self.0 / COEFFS_PER_WORD as u64
    }

    pub fn lane(self) -> usize {
        (self.0 % COEFFS_PER_WORD as u64) as usize
    }
}

/// Slot offset of `band` inside a Method-0 component region.
pub fn band_offset(band: Band, width: usize) -> usize {
    Band::ALL[..band.canonical_index()]
        .iter()
        .map(|b| b.width(width) * b.rows())
        .sum()
}

#[allow(clippy::too_many_arguments)]
pub fn layout0_address(
    geo: &MemGeometry,
    bank: Bank,
    precinct: usize,
    component: usize,
    band: Band,
    row: usize,
    col: usize,
) -> Result<SlotAddr> {
    let bw = band.width(geo.width());
    check(row, band.rows(), "row")?;
    check(col, bw, "column")?;
    let base = geo.region_base(bank, precinct, component)? * COEFFS_PER_WORD as u64;
    Ok(SlotAddr(
        base + (band_offset(band, geo.width()) + row * bw + col) as u64,
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TlbEntry {
    pub group: GroupId,
    /// Coefficients per unit block, canonical band order.
    pub block_lengths: Vec<(Band, usize)>,
    /// Words per unit entry (block lengths summed, rounded up to a word).
    pub unit_stride: u64,
    /// Word offset of the group region inside a component region.
    pub region_offset: u64,
}

impl TlbEntry {
    pub fn unit_slots(&self) -> usize {
        self.block_lengths.iter().map(|(_, n)| n).sum()
    }
}

/// Per-group block lengths and strides for one precinct geometry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TlbTable {
    pub width: usize,
    pub entries: Vec<TlbEntry>,
}

impl TlbTable {
    pub fn entry(&self, group: GroupId) -> &TlbEntry {
        &self.entries[group.index()]
    }
}

pub fn build_tlb(geometry: &Geometry) -> TlbTable {
    let units = geometry.units() as u64;
    let mut offset = 0u64;
    let entries = GroupId::ALL
        .iter()
        .map(|&g| {
            let block_lengths: Vec<(Band, usize)> = g
                .bands()
                .iter()
                .map(|&b| (b, b.rows() * block_columns(b)))
                .collect();
            let slots: usize = block_lengths.iter().map(|(_, n)| n).sum();
            let unit_stride = slots.div_ceil(COEFFS_PER_WORD) as u64;
            let e = TlbEntry {
                group: g,
                block_lengths,
                unit_stride,
                region_offset: offset,
            };
            offset += unit_stride * units;
            e
        })
        .collect();
    TlbTable {
        width: geometry.width,
        entries,
    }
}

/// Word address and length of one Method-1 unit entry.
pub fn layout1_entry(
    geo: &MemGeometry,
    bank: Bank,
    precinct: usize,
    component: usize,
    group: GroupId,
    unit: usize,
    tlb: &TlbTable,
) -> Result<(u64, u64)> {
    if tlb.width != geo.width() {
        return Err(Error::StaleTlb {
            tlb_width: tlb.width,
            width: geo.width(),
        });
    }
    check(unit, geo.geometry.units(), "unit")?;
    let e = tlb.entry(group);
    let addr = geo.region_base(bank, precinct, component)? + e.region_offset + unit as u64 * e.unit_stride;
    Ok((addr, e.unit_stride))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct BurstCommand {
    pub bank: Bank,
    /// Word address.
    pub address: u64,
    /// Words.
    pub length: u64,
}

/// One unit fetch request for a single component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UnitRef {
    pub bank: Bank,
    pub precinct: usize,
    pub component: usize,
    pub group: GroupId,
    pub unit: usize,
}

/// Word ranges `[start, end)` touched by a unit under Method 0, in block
/// scan order (one range per band-block row).
fn layout0_row_ranges(r: &UnitRef, geo: &MemGeometry) -> Result<Vec<(u64, u64)>> {
    let desc = unit_blocks(r.group, r.unit, &geo.geometry)?;
    let mut ranges = Vec::new();
    for b in &desc.blocks {
        for row in b.rows.clone() {
            let first = layout0_address(geo, r.bank, r.precinct, r.component, b.band, row, b.cols.start)?;
            let last = first.0 + b.cols.len() as u64;
            ranges.push((first.word(), last.div_ceil(COEFFS_PER_WORD as u64)));
        }
    }
    Ok(ranges)
}

/// Address generation for one unit fetch.
///
/// Method 1 yields the single unit entry. Method 0 yields one command per
/// maximal run of contiguous words; block rows that touch or share a word
/// are merged so no word is requested twice.
pub fn cmd_generate(r: &UnitRef, layout: Layout, geo: &MemGeometry, tlb: &TlbTable) -> Result<Vec<BurstCommand>> {
    match layout {
        Layout::GroupAligned => {
            let (address, length) = layout1_entry(geo, r.bank, r.precinct, r.component, r.group, r.unit, tlb)?;
            Ok(vec![BurstCommand {
                bank: r.bank,
                address,
                length,
            }])
        }
        Layout::PrecinctAligned => {
            let mut ranges = layout0_row_ranges(r, geo)?;
            ranges.sort_unstable();
            let mut merged: Vec<(u64, u64)> = Vec::with_capacity(ranges.len());
            for (s, e) in ranges {
                match merged.last_mut() {
                    Some(last) if s <= last.1 => last.1 = last.1.max(e),
                    _ => merged.push((s, e)),
                }
            }
            Ok(merged
                .into_iter()
                .map(|(s, e)| BurstCommand {
                    bank: r.bank,
                    address: s,
                    length: e - s,
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct TransferStats {
    pub commands: u64,
    pub words: u64,
    pub bursts: u64,
    pub cycles: u64,
}

impl AddAssign for TransferStats {
    fn add_assign(&mut self, o: TransferStats) {
        self.commands += o.commands;
        self.words += o.words;
        self.bursts += o.bursts;
        self.cycles += o.cycles;
    }
}

impl TransferStats {
    pub fn of_command(cmd: &BurstCommand, cfg: &DramConfig) -> TransferStats {
        let bursts = cmd.length.div_ceil(cfg.burst_words);
        TransferStats {
            commands: 1,
            words: cmd.length,
            bursts,
            cycles: cfg.cmd_overhead_cycles + bursts * cfg.burst_words * cfg.cycles_per_word,
        }
    }
}

/// Each command costs its overhead plus its burst-rounded length.
pub fn simulate_transfer(commands: &[BurstCommand], cfg: &DramConfig) -> TransferStats {
    let mut s = TransferStats::default();
    for c in commands {
        s += TransferStats::of_command(c, cfg);
    }
    s
}

/// Transfer cost of a sequence of unit fetches.
pub fn sweep_stats(
    fetches: impl IntoIterator<Item = UnitRef>,
    layout: Layout,
    geo: &MemGeometry,
    tlb: &TlbTable,
    cfg: &DramConfig,
) -> Result<TransferStats> {
    let mut s = TransferStats::default();
    for r in fetches {
        for c in cmd_generate(&r, layout, geo, tlb)? {
            s += TransferStats::of_command(&c, cfg);
        }
    }
    Ok(s)
}

fn put_slot(words: &mut [u64], slot: usize, v: SignMag32) {
    let shift = (slot % COEFFS_PER_WORD) as u32 * COEFF_BITS;
    let w = &mut words[slot / COEFFS_PER_WORD];
    *w = (*w & !(0xFFFF_FFFFu64 << shift)) | ((v.to_bits() as u64) << shift);
}

fn get_slot(words: &[u64], slot: usize) -> SignMag32 {
    let shift = (slot % COEFFS_PER_WORD) as u32 * COEFF_BITS;
    SignMag32::from_bits((words[slot / COEFFS_PER_WORD] >> shift) as u32)
}

/// Slot of every coefficient of one component region, visited band by band
/// in row-major order: `f(band, row, col, slot)`.
fn for_each_slot(width: usize, layout: Layout, mut f: impl FnMut(Band, usize, usize, usize)) {
    match layout {
        Layout::PrecinctAligned => {
            for band in Band::ALL {
                let base = band_offset(band, width);
                let bw = band.width(width);
                for r in 0..band.rows() {
                    for c in 0..bw {
                        f(band, r, c, base + r * bw + c);
                    }
                }
            }
        }
        Layout::GroupAligned => {
            let geometry = Geometry { width };
            let tlb = build_tlb(&geometry);
            for g in GroupId::ALL {
                let e = tlb.entry(g);
                for u in 0..geometry.units() {
                    let mut slot = (e.region_offset + u as u64 * e.unit_stride) as usize * COEFFS_PER_WORD;
                    for &band in g.bands() {
                        let w = block_columns(band);
                        for r in 0..band.rows() {
                            for c in u * w..(u + 1) * w {
                                f(band, r, c, slot);
                                slot += 1;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Memory image of one precinct (all components), `precinct_stride` words.
pub fn serialize_precinct(components: &[PrecinctCoeffs], layout: Layout) -> Result<Vec<u64>> {
    let first = components
        .first()
        .ok_or_else(|| Error::Degenerate("precinct has no components".into()))?;
    let width = first.padded_width;
    let geo = MemGeometry::new(width, components.len(), 1)?;
    let stride = geo.component_stride() as usize;
    let mut words = vec![0u64; geo.precinct_stride() as usize];
    for (ci, pc) in components.iter().enumerate() {
        if pc.padded_width != width || pc.coefficient_count() != geo.component_slots() {
            return Err(Error::LengthMismatch {
                expected: geo.component_slots(),
                actual: pc.coefficient_count(),
            });
        }
        let region = &mut words[ci * stride..(ci + 1) * stride];
        for_each_slot(width, layout, |band, r, c, slot| {
            put_slot(region, slot, pc.band(band).get(r, c));
        });
    }
    Ok(words)
}

/// Inverse of [`serialize_precinct`].
pub fn deserialize_precinct(
    image: &[u64],
    layout: Layout,
    padded_width: usize,
    source_width: usize,
    components: usize,
    precinct_index: usize,
) -> Result<Vec<PrecinctCoeffs>> {
    let geo = MemGeometry::new(padded_width, components, 1)?;
    if image.len() as u64 != geo.precinct_stride() {
        return Err(Error::LengthMismatch {
            expected: geo.precinct_stride() as usize,
            actual: image.len(),
        });
    }
    let stride = geo.component_stride() as usize;
    (0..components)
        .map(|ci| {
            let region = &image[ci * stride..(ci + 1) * stride];
            let mut pc = PrecinctCoeffs::zeroed(precinct_index, Component::from_index(ci), source_width);
            pc.padded_width = padded_width;
            pc.bands = Band::ALL
                .iter()
                .map(|&b| BandGrid::zeroed(b, padded_width))
                .collect();
            for_each_slot(padded_width, layout, |band, r, c, slot| {
                let g = pc.band_mut(band);
                let w = g.width;
                g.data[r * w + c] = get_slot(region, slot);
            });
            Ok(pc)
        })
        .collect()
}

/// Both banks of a whole frame under one layout.
#[derive(Debug, Clone)]
pub struct DramImage {
    pub layout: Layout,
    pub geo: MemGeometry,
    pub words: Vec<u64>,
}

impl DramImage {
    /// `original[p][c]` and `reconstructed[p][c]` are precinct `p`,
    /// component `c`.
    pub fn build(
        layout: Layout,
        original: &[Vec<PrecinctCoeffs>],
        reconstructed: &[Vec<PrecinctCoeffs>],
    ) -> Result<Self> {
        let first = original
            .first()
            .and_then(|p| p.first())
            .ok_or_else(|| Error::Degenerate("empty frame".into()))?;
        let geo = MemGeometry::new(first.padded_width, original[0].len(), original.len())?;
        if reconstructed.len() != original.len() {
            return Err(Error::LengthMismatch {
                expected: original.len(),
                actual: reconstructed.len(),
            });
        }
        let mut words = Vec::with_capacity(2 * geo.bank_words() as usize);
        for bank in [original, reconstructed] {
            for p in bank {
                words.extend(serialize_precinct(p, layout)?);
            }
        }
        Ok(DramImage { layout, geo, words })
    }

    pub fn read(&self, cmd: &BurstCommand) -> Result<&[u64]> {
        let s = cmd.address as usize;
        let e = s + cmd.length as usize;
        self.words.get(s..e).ok_or(Error::OutOfRange {
            what: "word",
            index: e,
            limit: self.words.len(),
        })
    }

    /// Fetches one component of a unit through [`cmd_generate`] and decodes
    /// it into block scan order.
    pub fn fetch_unit(&self, r: &UnitRef, tlb: &TlbTable) -> Result<UnitBuffer> {
        let cmds = cmd_generate(r, self.layout, &self.geo, tlb)?;
        let mut fetched: BTreeMap<u64, u64> = BTreeMap::new();
        for c in &cmds {
            for (i, w) in self.read(c)?.iter().enumerate() {
                fetched.insert(c.address + i as u64, *w);
            }
        }
        let word = |addr: u64| -> Result<u64> {
            fetched.get(&addr).copied().ok_or(Error::OutOfRange {
                what: "unfetched word",
                index: addr as usize,
                limit: 0,
            })
        };
        let lane = |w: u64, lane: usize| SignMag32::from_bits((w >> (lane as u32 * COEFF_BITS)) as u32);

        let desc = unit_blocks(r.group, r.unit, &self.geo.geometry)?;
        let mut data = Vec::with_capacity(desc.coefficient_count());
        match self.layout {
            Layout::PrecinctAligned => {
                for b in &desc.blocks {
                    for row in b.rows.clone() {
                        for col in b.cols.clone() {
                            let a = layout0_address(&self.geo, r.bank, r.precinct, r.component, b.band, row, col)?;
                            data.push(lane(word(a.word())?, a.lane()));
                        }
                    }
                }
            }
            Layout::GroupAligned => {
                let start = cmds[0].address * COEFFS_PER_WORD as u64;
                for i in 0..desc.coefficient_count() as u64 {
                    let a = SlotAddr(start + i);
                    data.push(lane(word(a.word())?, a.lane()));
                }
            }
        }
        Ok(UnitBuffer {
            group: r.group,
            components: 1,
            data,
        })
    }

    /// Flat little-endian dump, one u64 per word.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.words.iter().flat_map(|w| w.to_le_bytes()).collect()
    }
}

/// Maximal contiguous word runs of a Method-0 unit, counted directly from
/// every coefficient's word address.
pub fn layout0_run_count(r: &UnitRef, geo: &MemGeometry) -> Result<usize> {
    let desc = unit_blocks(r.group, r.unit, &geo.geometry)?;
    let mut words = Vec::new();
    for b in &desc.blocks {
        for row in b.rows.clone() {
            for col in b.cols.clone() {
                words.push(layout0_address(geo, r.bank, r.precinct, r.component, b.band, row, col)?.word());
            }
        }
    }
    words.sort_unstable();
    words.dedup();
    Ok(1 + words.windows(2).filter(|w| w[1] != w[0] + 1).count())
}

/// Pixels per unit strip and precinct, used by throughput reports.
pub fn pixels_per_unit() -> usize {
    UNIT_COLUMNS * PRECINCT_LINES
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residual::gather_unit;
    use crate::wavelet::decompose_precinct;

    fn geo(width: usize) -> MemGeometry {
        MemGeometry::new(width, 1, 4).unwrap()
    }

    fn unit(bank: Bank, precinct: usize, group: usize, unit: usize) -> UnitRef {
        UnitRef {
            bank,
            precinct,
            component: 0,
            group: GroupId::ALL[group],
            unit,
        }
    }

    #[test]
    fn layout0_addresses() {
        let g = geo(2560);
        assert_eq!(layout0_address(&g, Bank::Original, 0, 0, Band::LL5, 0, 0).unwrap(), SlotAddr(0));
        let a = layout0_address(&g, Bank::Original, 1, 0, Band::HL3, 0, 7).unwrap();
        let b = layout0_address(&g, Bank::Original, 1, 0, Band::HL3, 0, 8).unwrap();
        assert_eq!(b.0 - a.0, 1);
        let recon = layout0_address(&g, Bank::Reconstructed, 0, 0, Band::LL5, 0, 0).unwrap();
        assert_eq!(recon.word(), g.bank_words());
        // one precinct/component spans 2560 x 4 coefficients
        let last = layout0_address(&g, Bank::Original, 0, 0, Band::HH1, 1, 1279).unwrap();
        assert_eq!(last.0 + 1, 2560 * 4);
        assert!(layout0_address(&g, Bank::Original, 0, 0, Band::HH1, 2, 0).is_err());
        assert!(layout0_address(&g, Bank::Original, 4, 0, Band::HH1, 0, 0).is_err());
    }

    #[test]
    fn tlb_contents() {
        let tlb = build_tlb(&Geometry::new(2560).unwrap());
        let g3 = tlb.entry(GroupId::ALL[3]);
        assert_eq!(g3.block_lengths, vec![(Band::LL5, 1), (Band::HL5, 1)]);
        let strides: Vec<u64> = tlb.entries.iter().map(|e| e.unit_stride).collect();
        assert_eq!(strides, vec![48, 12, 3, 1]);
        let total: u64 = tlb.entries.iter().map(|e| e.unit_stride * 80).sum();
        assert_eq!(total, 2560 * 4 / 2);
        assert_eq!(tlb, build_tlb(&Geometry::new(2560).unwrap()));
    }

    #[test]
    fn layout1_entries() {
        let g = geo(512);
        let tlb = build_tlb(&g.geometry);
        let (a0, len) = layout1_entry(&g, Bank::Original, 0, 0, GroupId::ALL[0], 0, &tlb).unwrap();
        assert_eq!((a0, len), (0, 48));
        let (a1, _) = layout1_entry(&g, Bank::Original, 0, 0, GroupId::ALL[0], 1, &tlb).unwrap();
        assert_eq!(a1 - a0, 48);
        let (g1, _) = layout1_entry(&g, Bank::Original, 0, 0, GroupId::ALL[1], 0, &tlb).unwrap();
        assert_eq!(g1, 48 * 16);
        let stale = build_tlb(&Geometry::new(256).unwrap());
        assert!(matches!(
            layout1_entry(&g, Bank::Original, 0, 0, GroupId::ALL[0], 0, &stale),
            Err(Error::StaleTlb { .. })
        ));
    }

    #[test]
    fn command_counts() {
        let g = geo(2560);
        let tlb = build_tlb(&g.geometry);
        let runs = [6usize, 3, 2, 2];
        for (gi, &want) in runs.iter().enumerate() {
            let r = unit(Bank::Reconstructed, 2, gi, 17);
            assert_eq!(cmd_generate(&r, Layout::GroupAligned, &g, &tlb).unwrap().len(), 1);
            let m0 = cmd_generate(&r, Layout::PrecinctAligned, &g, &tlb).unwrap();
            assert_eq!(m0.len(), want, "group {gi}");
            assert_eq!(layout0_run_count(&r, &g).unwrap(), want);
        }
    }

    #[test]
    fn narrow_frames_merge_adjacent_rows() {
        let g = geo(32);
        let tlb = build_tlb(&g.geometry);
        // coefficient spans at width 32: G0 16..48 + 64..128, G1 8..16 + 48..64,
        // G2 2..8, G3 0..2
        for (gi, want) in [2usize, 2, 1, 1].into_iter().enumerate() {
            let r = unit(Bank::Original, 0, gi, 0);
            let m0 = cmd_generate(&r, Layout::PrecinctAligned, &g, &tlb).unwrap();
            assert_eq!(m0.len(), want, "group {gi}");
            assert_eq!(m0.len(), layout0_run_count(&r, &g).unwrap());
        }
    }

    #[test]
    fn transfer_formula() {
        let cfg = DramConfig::default();
        assert_eq!(simulate_transfer(&[], &cfg), TransferStats::default());
        let one = BurstCommand {
            bank: Bank::Original,
            address: 0,
            length: 8,
        };
        assert_eq!(simulate_transfer(&[one], &cfg).cycles, 28);
        let odd = BurstCommand { length: 9, ..one };
        let s = simulate_transfer(&[odd], &cfg);
        assert_eq!((s.bursts, s.cycles, s.words), (2, 36, 9));
    }

    #[test]
    fn dram_config_validation() {
        assert!(DramConfig::default().validate().is_ok());
        assert!(DramConfig { word_bits: 32, ..Default::default() }.validate().is_err());
        assert!(DramConfig { burst_words: 0, ..Default::default() }.validate().is_err());
    }

    fn precinct(width: usize, seed: i32, index: usize) -> Vec<PrecinctCoeffs> {
        let lines: Vec<i32> = (0..4 * width as i32).map(|i| (i * 31 + seed * 17) % 256).collect();
        vec![decompose_precinct(&lines, width, index, Component::Y).unwrap()]
    }

    #[test]
    fn serialize_round_trip_and_permutation() {
        let p = precinct(96, 3, 0);
        let mut images = Vec::new();
        for layout in Layout::BOTH {
            let img = serialize_precinct(&p, layout).unwrap();
            assert_eq!(img.len(), 96 * 2);
            assert_eq!(deserialize_precinct(&img, layout, 96, 96, 1, 0).unwrap(), p);
            let mut halves: Vec<u32> = img.iter().flat_map(|w| [*w as u32, (*w >> 32) as u32]).collect();
            halves.sort_unstable();
            images.push(halves);
        }
        assert_eq!(images[0], images[1]);
        assert!(deserialize_precinct(&[0; 5], Layout::GroupAligned, 96, 96, 1, 0).is_err());
    }

    #[test]
    fn zero_precinct_zero_image() {
        let z = vec![PrecinctCoeffs::zeroed(0, Component::Y, 64)];
        for layout in Layout::BOTH {
            assert!(serialize_precinct(&z, layout).unwrap().iter().all(|&w| w == 0));
        }
    }

    #[test]
    fn both_layouts_fetch_the_same_unit() {
        let frame: Vec<Vec<PrecinctCoeffs>> = (0..3).map(|i| precinct(128, i as i32, i)).collect();
        let recon: Vec<Vec<PrecinctCoeffs>> = (0..3).map(|i| precinct(128, 10 + i as i32, i)).collect();
        let m0 = DramImage::build(Layout::PrecinctAligned, &frame, &recon).unwrap();
        let m1 = DramImage::build(Layout::GroupAligned, &frame, &recon).unwrap();
        let tlb = build_tlb(&m0.geo.geometry);
        for bank in [Bank::Original, Bank::Reconstructed] {
            for p in 0..3 {
                for g in GroupId::ALL {
                    for u in 0..4 {
                        let r = UnitRef { bank, precinct: p, component: 0, group: g, unit: u };
                        let a = m0.fetch_unit(&r, &tlb).unwrap();
                        let b = m1.fetch_unit(&r, &tlb).unwrap();
                        assert_eq!(a, b);
                        let src = if bank == Bank::Original { &frame } else { &recon };
                        let desc = unit_blocks(g, u, &m0.geo.geometry).unwrap();
                        assert_eq!(a, gather_unit(&src[p], &desc));
                    }
                }
            }
        }
    }
}
