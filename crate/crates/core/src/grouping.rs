//! IPC Groups (frequency partitions of the band set) and IPC Units
//! (32-column spatial strips across a group's bands).

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wavelet::{Band, WIDTH_ALIGN};

/// Image columns covered by one IPC Unit.
pub const UNIT_COLUMNS: usize = WIDTH_ALIGN;
pub const GROUP_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupId(u8);

impl GroupId {
    pub const ALL: [GroupId; GROUP_COUNT] = [GroupId(0), GroupId(1), GroupId(2), GroupId(3)];

    pub fn new(index: usize) -> Result<Self> {
        if index < GROUP_COUNT {
            Ok(GroupId(index as u8))
        } else {
            Err(Error::OutOfRange {
                what: "group",
                index,
                limit: GROUP_COUNT,
            })
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Member bands in canonical order.
    pub fn bands(self) -> &'static [Band] {
        match self.0 {
            0 => &[Band::HL1, Band::LH1, Band::HH1],
            1 => &[Band::HL2, Band::LH2, Band::HH2],
            2 => &[Band::HL4, Band::HL3],
            _ => &[Band::LL5, Band::HL5],
        }
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn band_to_group(band: Band) -> GroupId {
    match band {
        Band::HL1 | Band::LH1 | Band::HH1 => GroupId(0),
        Band::HL2 | Band::LH2 | Band::HH2 => GroupId(1),
        Band::HL3 | Band::HL4 => GroupId(2),
        Band::HL5 | Band::LL5 => GroupId(3),
    }
}

/// Same mapping keyed by band name, for callers holding textual ids.
pub fn band_name_to_group(name: &str) -> Result<GroupId> {
    Ok(band_to_group(name.parse()?))
}

/// Precinct geometry that every unit/group computation depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Geometry {
    /// Padded precinct width in pixels (multiple of 32).
    pub width: usize,
}

impl Geometry {
    pub fn new(width: usize) -> Result<Self> {
        if width == 0 || !width.is_multiple_of(UNIT_COLUMNS) {
            return Err(Error::UnalignedWidth(width));
        }
        Ok(Geometry { width })
    }

    pub fn units(&self) -> usize {
        self.width / UNIT_COLUMNS
    }
}

pub fn units_per_precinct(precinct_width: usize) -> Result<usize> {
    Geometry::new(precinct_width).map(|g| g.units())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockRef {
    pub band: Band,
    pub rows: Range<usize>,
    pub cols: Range<usize>,
}

impl BlockRef {
    pub fn len(&self) -> usize {
        self.rows.len() * self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitDescriptor {
    pub group: GroupId,
    pub unit_index: usize,
    pub blocks: Vec<BlockRef>,
}

impl UnitDescriptor {
    pub fn coefficient_count(&self) -> usize {
        self.blocks.iter().map(BlockRef::len).sum()
    }
}

/// Columns of one unit inside `band`.
pub fn block_columns(band: Band) -> usize {
    UNIT_COLUMNS >> band.level_h()
}

pub fn unit_blocks(group: GroupId, unit_index: usize, geometry: &Geometry) -> Result<UnitDescriptor> {
    let units = geometry.units();
    if unit_index >= units {
        return Err(Error::OutOfRange {
            what: "unit",
            index: unit_index,
            limit: units,
        });
    }
    let blocks = group
        .bands()
        .iter()
        .map(|&band| {
            let w = block_columns(band);
            BlockRef {
                band,
                rows: 0..band.rows(),
                cols: unit_index * w..(unit_index + 1) * w,
            }
        })
        .collect();
    Ok(UnitDescriptor {
        group,
        unit_index,
        blocks,
    })
}

/// Stage-0 parameters (BandIdx, GrpSize, UnitWidth) of one group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupParams {
    pub group: GroupId,
    pub band_idx: Vec<Band>,
    /// Coefficients per unit per component.
    pub grp_size: usize,
    pub unit_width: usize,
}

impl GroupParams {
    /// Quads per component segment.
    pub fn quads(&self) -> usize {
        self.grp_size.div_ceil(4)
    }
}

/// Independent of the precinct width: every unit of a group has the same
/// block shapes.
pub fn group_params(group: GroupId) -> GroupParams {
    let bands = group.bands();
    GroupParams {
        group,
        band_idx: bands.to_vec(),
        grp_size: bands.iter().map(|&b| b.rows() * block_columns(b)).sum(),
        unit_width: bands.iter().map(|&b| block_columns(b)).max().unwrap_or(0),
    }
}
