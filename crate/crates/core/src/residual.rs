//! SIG_MAG_SUB and the CTRL/FIFO dataflow feeding the comparison pipeline.

use std::collections::VecDeque;

use crate::coeff::{SignMag32, MAGNITUDE_MASK};
use crate::error::{Error, Result};
use crate::grouping::{GroupId, UnitDescriptor, GROUP_COUNT};
use crate::wavelet::PrecinctCoeffs;

pub fn encode_sign_mag(v: i64) -> Result<SignMag32> {
    SignMag32::encode(v)
}

pub fn decode_sign_mag(v: SignMag32) -> i64 {
    v.decode()
}

/// `a - b` without leaving sign-magnitude form. One arm per operand sign
/// pair, as in the four hardware subtraction paths.
pub fn sig_mag_sub(a: SignMag32, b: SignMag32) -> Result<SignMag32> {
    let (ma, mb) = (a.magnitude(), b.magnitude());
    let (negative, magnitude) = match (a.is_negative(), b.is_negative()) {
        // a - b
        (false, false) => {
            if ma >= mb {
                (false, ma - mb)
            } else {
                (true, mb - ma)
            }
        }
        // a + |b|
        (false, true) => (false, add_magnitudes(ma, mb)?),
        // -(|a| + b)
        (true, false) => (true, add_magnitudes(ma, mb)?),
        // |b| - |a|
        (true, true) => {
            if mb >= ma {
                (false, mb - ma)
            } else {
                (true, ma - mb)
            }
        }
    };
    SignMag32::from_parts(negative, magnitude)
}

fn add_magnitudes(a: u32, b: u32) -> Result<u32> {
    let s = a as u64 + b as u64;
    if s > MAGNITUDE_MASK as u64 {
        Err(Error::MagnitudeOverflow(s as i64))
    } else {
        Ok(s as u32)
    }
}

/// Coefficients of one IPC Unit in block scan order.
///
/// `data` holds one segment of `grp_size` coefficients per component,
/// component-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitBuffer {
    pub group: GroupId,
    pub components: usize,
    pub data: Vec<SignMag32>,
}

impl UnitBuffer {
    pub fn segment_len(&self) -> usize {
        self.data.len() / self.components.max(1)
    }

    pub fn segments(&self) -> impl Iterator<Item = &[SignMag32]> {
        self.data.chunks(self.segment_len().max(1))
    }
}

/// Reads one unit's blocks from each component of a precinct.
pub fn gather_unit(components: &[PrecinctCoeffs], unit: &UnitDescriptor) -> UnitBuffer {
    let mut data = Vec::with_capacity(unit.coefficient_count() * components.len());
    for pc in components {
        for block in &unit.blocks {
            let grid = pc.band(block.band);
            for r in block.rows.clone() {
                let start = r * grid.width;
                data.extend_from_slice(&grid.data[start + block.cols.start..start + block.cols.end]);
            }
        }
    }
    UnitBuffer {
        group: unit.group,
        components: components.len(),
        data,
    }
}

pub fn compute_unit_residuals(orig: &UnitBuffer, reference: &UnitBuffer) -> Result<UnitBuffer> {
    if orig.group != reference.group
        || orig.components != reference.components
        || orig.data.len() != reference.data.len()
    {
        return Err(Error::LengthMismatch {
            expected: orig.data.len(),
            actual: reference.data.len(),
        });
    }
    let data = orig
        .data
        .iter()
        .zip(&reference.data)
        .map(|(&a, &b)| sig_mag_sub(a, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(UnitBuffer {
        group: orig.group,
        components: orig.components,
        data,
    })
}

pub const DEFAULT_FIFO_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FifoId {
    /// Original (query) data, Q0..Q3.
    Query(GroupId),
    /// Reconstructed (candidate) data, C0..C3.
    Candidate(GroupId),
    /// Residuals, R0..R3.
    Residual(GroupId),
}

/// Bounded FIFO with occupancy counted in IPC Units.
#[derive(Debug, Clone)]
pub struct FifoModel<T> {
    pub id: FifoId,
    pub depth: usize,
    entries: VecDeque<T>,
}

impl<T> FifoModel<T> {
    pub fn new(id: FifoId, depth: usize) -> Self {
        FifoModel {
            id,
            depth,
            entries: VecDeque::with_capacity(depth),
        }
    }

    pub fn occupancy(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn free(&self) -> usize {
        self.depth - self.entries.len()
    }

    /// Returns the entry back when full.
    pub fn push(&mut self, v: T) -> std::result::Result<(), T> {
        if self.entries.len() >= self.depth {
            return Err(v);
        }
        self.entries.push_back(v);
        Ok(())
    }

    pub fn pop(&mut self) -> Option<T> {
        self.entries.pop_front()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CtrlEvent {
    /// One unit's residuals, `seq` counting units within the group.
    Residual {
        group: GroupId,
        seq: usize,
        data: UnitBuffer,
    },
    /// Q/C FIFOs of `group` were empty on its turn; a burst read is due.
    Refill { group: GroupId },
}

impl CtrlEvent {
    pub fn group(&self) -> GroupId {
        match self {
            CtrlEvent::Residual { group, .. } | CtrlEvent::Refill { group } => *group,
        }
    }
}

/// Original/reference unit pairs waiting in DRAM for one group.
pub type UnitStream = Vec<(UnitBuffer, UnitBuffer)>;

/// Round-robin CTRL arbitration over the four groups.
///
/// Each group's Q/C FIFOs start with one burst (up to `depth` units) from its
/// stream. On its turn a group with data emits one unit's residuals; a group
/// with empty FIFOs emits a refill request and, if its stream has more
/// units, receives the next burst (usable from its following turn). The
/// schedule ends once every FIFO and stream is drained.
pub fn ctrl_schedule(streams: [UnitStream; GROUP_COUNT], depth: usize) -> Result<Vec<CtrlEvent>> {
    if depth == 0 {
        return Err(Error::Config("FIFO depth must be positive".into()));
    }
    let mut sources: Vec<VecDeque<(UnitBuffer, UnitBuffer)>> =
        streams.into_iter().map(VecDeque::from).collect();
    let mut q: Vec<FifoModel<UnitBuffer>> = GroupId::ALL
        .iter()
        .map(|&g| FifoModel::new(FifoId::Query(g), depth))
        .collect();
    let mut c: Vec<FifoModel<UnitBuffer>> = GroupId::ALL
        .iter()
        .map(|&g| FifoModel::new(FifoId::Candidate(g), depth))
        .collect();
    let mut seq = [0usize; GROUP_COUNT];

    let burst = |g: usize,
                 sources: &mut [VecDeque<(UnitBuffer, UnitBuffer)>],
                 q: &mut [FifoModel<UnitBuffer>],
                 c: &mut [FifoModel<UnitBuffer>]| {
        // Q and C move in lockstep so their occupancies always match
        while q[g].free() > 0 {
            let Some((o, r)) = sources[g].pop_front() else { break };
            let _ = q[g].push(o);
            let _ = c[g].push(r);
        }
    };

    for g in 0..GROUP_COUNT {
        burst(g, &mut sources, &mut q, &mut c);
    }

    let mut events = Vec::new();
    loop {
        let pending = (0..GROUP_COUNT).any(|g| !q[g].is_empty() || !sources[g].is_empty());
        if !pending {
            break;
        }
        for (g, &group) in GroupId::ALL.iter().enumerate() {
            if !q[g].is_empty() && !c[g].is_empty() {
                let (Some(o), Some(r)) = (q[g].pop(), c[g].pop()) else { unreachable!() };
                let data = compute_unit_residuals(&o, &r)?;
                events.push(CtrlEvent::Residual {
                    group,
                    seq: seq[g],
                    data,
                });
                seq[g] += 1;
            } else {
                events.push(CtrlEvent::Refill { group });
                burst(g, &mut sources, &mut q, &mut c);
            }
        }
    }
    Ok(events)
}
