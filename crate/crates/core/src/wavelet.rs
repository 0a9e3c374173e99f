//! Reversible color transform and the LeGall 5/3 integer wavelet, applied
//! to 4-line precinct strips with five horizontal and two vertical levels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coeff::SignMag32;
use crate::error::{Error, Result};

pub const PRECINCT_LINES: usize = 4;
pub const HORIZONTAL_LEVELS: u32 = 5;
pub const VERTICAL_LEVELS: u32 = 2;
/// Widths are padded to a multiple of this so every band has integral columns.
pub const WIDTH_ALIGN: usize = 1 << HORIZONTAL_LEVELS;

// Keeps every lifting intermediate well inside i32 for 7 decomposition levels.
const MAX_SAMPLE_MAGNITUDE: i64 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PixelTriple {
    pub r: u16,
    pub g: u16,
    pub b: u16,
}

impl PixelTriple {
    pub fn new(r: u16, g: u16, b: u16) -> Self {
        PixelTriple { r, g, b }
    }
}

/// `(y, cb, cr)` with `y = (r + 2g + b) >> 2`, `cb = b - g`, `cr = r - g`.
pub fn rct_forward(p: PixelTriple) -> (i32, i32, i32) {
    let (r, g, b) = (p.r as i32, p.g as i32, p.b as i32);
    ((r + 2 * g + b) >> 2, b - g, r - g)
}

pub fn rct_inverse(y: i32, cb: i32, cr: i32) -> PixelTriple {
    let g = y - ((cb + cr) >> 2);
    let r = cr + g;
    let b = cb + g;
    PixelTriple {
        r: r as u16,
        g: g as u16,
        b: b as u16,
    }
}

/// One level of 5/3 lifting with whole-sample symmetric extension.
///
/// Returns `(low, high)` with `ceil(n/2)` and `floor(n/2)` samples.
pub fn dwt53_analyze_1d(signal: &[i32]) -> Result<(Vec<i32>, Vec<i32>)> {
    let n = signal.len();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "wavelet input needs at least 2 samples, got {n}"
        )));
    }
    let n_high = n / 2;
    let n_low = n - n_high;
    let x = |i: usize| -> i32 {
        // only the right edge can run past the end here
        if i < n {
            signal[i]
        } else {
            signal[2 * (n - 1) - i]
        }
    };

    let high: Vec<i32> = (0..n_high)
        .map(|k| x(2 * k + 1) - (x(2 * k) + x(2 * k + 2)).div_euclid(2))
        .collect();
    let d = |k: isize| -> i32 {
        // d[-1] = d[0] and, for odd n, d[n_high] = d[n_high - 1]
        let k = k.clamp(0, n_high as isize - 1) as usize;
        high[k]
    };
    let low: Vec<i32> = (0..n_low)
        .map(|k| {
            let k = k as isize;
            signal[2 * k as usize] + (d(k - 1) + d(k) + 2).div_euclid(4)
        })
        .collect();
    Ok((low, high))
}

pub fn dwt53_synthesize_1d(low: &[i32], high: &[i32]) -> Result<Vec<i32>> {
    let n_low = low.len();
    let n_high = high.len();
    if n_high == 0 || !(n_low == n_high || n_low == n_high + 1) {
        return Err(Error::LengthMismatch {
            expected: n_high + (n_low > n_high) as usize,
            actual: n_low,
        });
    }
    let n = n_low + n_high;
    let d = |k: isize| -> i32 { high[k.clamp(0, n_high as isize - 1) as usize] };

    let mut out = vec![0i32; n];
    for k in 0..n_low {
        let k_i = k as isize;
        out[2 * k] = low[k] - (d(k_i - 1) + d(k_i) + 2).div_euclid(4);
    }
    for k in 0..n_high {
        let right = if 2 * k + 2 < n {
            out[2 * k + 2]
        } else {
            out[2 * k]
        };
        out[2 * k + 1] = high[k] + (out[2 * k] + right).div_euclid(2);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    LL,
    HL,
    LH,
    HH,
}

/// Sub-bands of the 5H/2V decomposition, declared in canonical storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Band {
    LL5,
    HL5,
    HL4,
    HL3,
    HL2,
    HL1,
    LH2,
    HH2,
    LH1,
    HH1,
}

impl Band {
    /// Canonical order inside a precinct.
    pub const ALL: [Band; 10] = [
        Band::LL5,
        Band::HL5,
        Band::HL4,
        Band::HL3,
        Band::HL2,
        Band::HL1,
        Band::LH2,
        Band::HH2,
        Band::LH1,
        Band::HH1,
    ];

    pub fn level_h(self) -> u32 {
        match self {
            Band::LL5 | Band::HL5 => 5,
            Band::HL4 => 4,
            Band::HL3 => 3,
            Band::HL2 | Band::LH2 | Band::HH2 => 2,
            Band::HL1 | Band::LH1 | Band::HH1 => 1,
        }
    }

    pub fn level_v(self) -> u32 {
        match self {
            Band::HL1 | Band::LH1 | Band::HH1 => 1,
            _ => 2,
        }
    }

    pub fn orientation(self) -> Orientation {
        match self {
            Band::LL5 => Orientation::LL,
            Band::HL5 | Band::HL4 | Band::HL3 | Band::HL2 | Band::HL1 => Orientation::HL,
            Band::LH2 | Band::LH1 => Orientation::LH,
            Band::HH2 | Band::HH1 => Orientation::HH,
        }
    }

    /// Position in [`Band::ALL`].
    pub fn canonical_index(self) -> usize {
        self as usize
    }

    /// Rows this band contributes to one 4-line precinct.
    pub fn rows(self) -> usize {
        PRECINCT_LINES >> self.level_v()
    }

    /// Columns for a padded precinct width.
    pub fn width(self, padded_width: usize) -> usize {
        padded_width >> self.level_h()
    }

    pub fn name(self) -> &'static str {
        match self {
            Band::LL5 => "LL5",
            Band::HL5 => "HL5",
            Band::HL4 => "HL4",
            Band::HL3 => "HL3",
            Band::HL2 => "HL2",
            Band::HL1 => "HL1",
            Band::LH2 => "LH2",
            Band::HH2 => "HH2",
            Band::LH1 => "LH1",
            Band::HH1 => "HH1",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Band::ALL
            .iter()
            .copied()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownBand(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    Y,
    U,
    V,
}

impl Component {
    pub fn from_index(i: usize) -> Self {
        match i {
            0 => Component::Y,
            1 => Component::U,
            _ => Component::V,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandGrid {
    pub band: Band,
    pub width: usize,
    pub height: usize,
    pub data: Vec<SignMag32>,
}

impl BandGrid {
    fn from_rows(band: Band, rows: &[Vec<i32>]) -> Self {
        let width = rows[0].len();
        let data = rows
            .iter()
            .flat_map(|r| r.iter().map(|&v| SignMag32::from_i32(v)))
            .collect();
        BandGrid {
            band,
            width,
            height: rows.len(),
            data,
        }
    }

    pub fn zeroed(band: Band, padded_width: usize) -> Self {
        let width = band.width(padded_width);
        let height = band.rows();
        BandGrid {
            band,
            width,
            height,
            data: vec![SignMag32::ZERO; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> SignMag32 {
        self.data[row * self.width + col]
    }

    fn row_i32(&self, row: usize) -> Vec<i32> {
        self.data[row * self.width..(row + 1) * self.width]
            .iter()
            .map(|c| c.decode() as i32)
            .collect()
    }
}

/// All band coefficients of one component over one 4-line precinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecinctCoeffs {
    pub precinct_index: usize,
    pub component: Component,
    /// Width before right padding.
    pub source_width: usize,
    pub padded_width: usize,
    /// Bands in [`Band::ALL`] order.
    pub bands: Vec<BandGrid>,
}

impl PrecinctCoeffs {
    pub fn zeroed(precinct_index: usize, component: Component, width: usize) -> Self {
        let padded_width = padded_width(width);
        PrecinctCoeffs {
            precinct_index,
            component,
            source_width: width,
            padded_width,
            bands: Band::ALL
                .iter()
                .map(|&b| BandGrid::zeroed(b, padded_width))
                .collect(),
        }
    }

    pub fn band(&self, band: Band) -> &BandGrid {
        &self.bands[band.canonical_index()]
    }

    pub fn band_mut(&mut self, band: Band) -> &mut BandGrid {
        &mut self.bands[band.canonical_index()]
    }

    pub fn coefficient_count(&self) -> usize {
        self.bands.iter().map(|b| b.data.len()).sum()
    }
}

pub fn padded_width(width: usize) -> usize {
    width.div_ceil(WIDTH_ALIGN) * WIDTH_ALIGN
}

/// Low and high halves of a set of rows.
type Split = (Vec<Vec<i32>>, Vec<Vec<i32>>);

fn analyze_rows(rows: &[Vec<i32>]) -> Result<Split> {
    let mut lows = Vec::with_capacity(rows.len());
    let mut highs = Vec::with_capacity(rows.len());
    for r in rows {
        let (l, h) = dwt53_analyze_1d(r)?;
        lows.push(l);
        highs.push(h);
    }
    Ok((lows, highs))
}

/// Vertical lifting over a stack of equal-length rows.
fn analyze_columns(rows: &[Vec<i32>]) -> Result<Split> {
    let width = rows[0].len();
    let n_high = rows.len() / 2;
    let n_low = rows.len() - n_high;
    let mut low = vec![vec![0; width]; n_low];
    let mut high = vec![vec![0; width]; n_high];
    let mut column = vec![0; rows.len()];
    for c in 0..width {
        for (slot, r) in column.iter_mut().zip(rows) {
            *slot = r[c];
        }
        let (l, h) = dwt53_analyze_1d(&column)?;
        for (i, v) in l.into_iter().enumerate() {
            low[i][c] = v;
        }
        for (i, v) in h.into_iter().enumerate() {
            high[i][c] = v;
        }
    }
    Ok((low, high))
}

fn synthesize_columns(low: &[Vec<i32>], high: &[Vec<i32>]) -> Result<Vec<Vec<i32>>> {
    let width = low[0].len();
    let n = low.len() + high.len();
    let mut out = vec![vec![0; width]; n];
    let mut l = vec![0; low.len()];
    let mut h = vec![0; high.len()];
    for c in 0..width {
        for (slot, r) in l.iter_mut().zip(low) {
            *slot = r[c];
        }
        for (slot, r) in h.iter_mut().zip(high) {
            *slot = r[c];
        }
        for (i, v) in dwt53_synthesize_1d(&l, &h)?.into_iter().enumerate() {
            out[i][c] = v;
        }
    }
    Ok(out)
}

/// Forward transform of one 4-line strip (`lines` is row-major, `4 * width`).
///
/// Cascade: vertical + horizontal level 1 on the strip, vertical +
/// horizontal level 2 on the LL1 rows, then horizontal levels 3..5 on the
/// LL2 row. Widths that are not a multiple of 32 are right-padded by edge
/// replication.
pub fn decompose_precinct(
    lines: &[i32],
    width: usize,
    precinct_index: usize,
    component: Component,
) -> Result<PrecinctCoeffs> {
    if width == 0 {
        return Err(Error::Degenerate("precinct width is zero".into()));
    }
    if lines.len() != PRECINCT_LINES * width {
        return Err(Error::LengthMismatch {
            expected: PRECINCT_LINES * width,
            actual: lines.len(),
        });
    }
    if let Some(&v) = lines
        .iter()
        .find(|v| (**v as i64).abs() >= MAX_SAMPLE_MAGNITUDE)
    {
        return Err(Error::MagnitudeOverflow(v as i64));
    }
    let pw = padded_width(width);
    let rows: Vec<Vec<i32>> = lines
        .chunks_exact(width)
        .map(|r| {
            let mut row = r.to_vec();
            row.resize(pw, r[width - 1]);
            row
        })
        .collect();

    // level 1
    let (v_low, v_high) = analyze_columns(&rows)?;
    let (ll1, hl1) = analyze_rows(&v_low)?;
    let (lh1, hh1) = analyze_rows(&v_high)?;

    // level 2
    let (v_low2, v_high2) = analyze_columns(&ll1)?;
    let (ll2, hl2) = analyze_rows(&v_low2)?;
    let (lh2, hh2) = analyze_rows(&v_high2)?;

    // horizontal-only levels 3..5
    let (ll3, hl3) = analyze_rows(&ll2)?;
    let (ll4, hl4) = analyze_rows(&ll3)?;
    let (ll5, hl5) = analyze_rows(&ll4)?;

    let bands = Band::ALL
        .iter()
        .map(|&b| {
            let rows = match b {
                Band::LL5 => &ll5,
                Band::HL5 => &hl5,
                Band::HL4 => &hl4,
                Band::HL3 => &hl3,
                Band::HL2 => &hl2,
                Band::HL1 => &hl1,
                Band::LH2 => &lh2,
                Band::HH2 => &hh2,
                Band::LH1 => &lh1,
                Band::HH1 => &hh1,
            };
            BandGrid::from_rows(b, rows)
        })
        .collect();

    Ok(PrecinctCoeffs {
        precinct_index,
        component,
        source_width: width,
        padded_width: pw,
        bands,
    })
}

/// Inverse of [`decompose_precinct`]; returns `4 * source_width` samples.
pub fn reconstruct_precinct(coeffs: &PrecinctCoeffs) -> Result<Vec<i32>> {
    let pw = coeffs.padded_width;
    if pw == 0 || !pw.is_multiple_of(WIDTH_ALIGN) {
        return Err(Error::UnalignedWidth(pw));
    }
    if coeffs.bands.len() != Band::ALL.len() {
        return Err(Error::LengthMismatch {
            expected: Band::ALL.len(),
            actual: coeffs.bands.len(),
        });
    }
    for (grid, &b) in coeffs.bands.iter().zip(Band::ALL.iter()) {
        let want = b.width(pw) * b.rows();
        if grid.band != b || grid.data.len() != want {
            return Err(Error::LengthMismatch {
                expected: want,
                actual: grid.data.len(),
            });
        }
    }
    let rows_of = |b: Band| -> Vec<Vec<i32>> {
        let g = coeffs.band(b);
        (0..g.height).map(|r| g.row_i32(r)).collect()
    };
    let synth_rows = |low: &[Vec<i32>], high: &[Vec<i32>]| -> Result<Vec<Vec<i32>>> {
        low.iter()
            .zip(high)
            .map(|(l, h)| dwt53_synthesize_1d(l, h))
            .collect()
    };

    let ll4 = synth_rows(&rows_of(Band::LL5), &rows_of(Band::HL5))?;
    let ll3 = synth_rows(&ll4, &rows_of(Band::HL4))?;
    let ll2 = synth_rows(&ll3, &rows_of(Band::HL3))?;

    let v_low2 = synth_rows(&ll2, &rows_of(Band::HL2))?;
    let v_high2 = synth_rows(&rows_of(Band::LH2), &rows_of(Band::HH2))?;
    let ll1 = synthesize_columns(&v_low2, &v_high2)?;

    let v_low = synth_rows(&ll1, &rows_of(Band::HL1))?;
    let v_high = synth_rows(&rows_of(Band::LH1), &rows_of(Band::HH1))?;
    let rows = synthesize_columns(&v_low, &v_high)?;

    let w = coeffs.source_width;
    Ok(rows.iter().flat_map(|r| r[..w].iter().copied()).collect())
}

/// Splits a plane into 4-line strips (bottom rows edge-replicated) and
/// decomposes each one.
pub fn decompose_plane(
    plane: &[i32],
    width: usize,
    height: usize,
    component: Component,
) -> Result<Vec<PrecinctCoeffs>> {
    if plane.len() != width * height {
        return Err(Error::LengthMismatch {
            expected: width * height,
            actual: plane.len(),
        });
    }
    let precincts = height.div_ceil(PRECINCT_LINES);
    let mut strip = vec![0i32; PRECINCT_LINES * width];
    (0..precincts)
        .map(|p| {
            for l in 0..PRECINCT_LINES {
                let src = (p * PRECINCT_LINES + l).min(height - 1);
                strip[l * width..(l + 1) * width]
                    .copy_from_slice(&plane[src * width..(src + 1) * width]);
            }
            decompose_precinct(&strip, width, p, component)
        })
        .collect()
}

/// Inverse of [`decompose_plane`], cropped to `height` rows.
pub fn reconstruct_plane(precincts: &[PrecinctCoeffs], height: usize) -> Result<Vec<i32>> {
    let mut out = Vec::new();
    for p in precincts {
        out.extend(reconstruct_precinct(p)?);
    }
    let width = precincts.first().map_or(0, |p| p.source_width);
    out.truncate(width * height);
    Ok(out)
}
