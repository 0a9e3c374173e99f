//! Synthetic fixtures: a screen-content test card tiled with a 32-px glyph
//! cell, and seeded noise frames.

use crate::pnm::PnmImage;

pub const TILE: usize = 32;
/// Lines of black border above the tiled area; one precinct.
pub const TOP_BORDER: usize = 4;

/// SplitMix64; enough for reproducible fixtures without pulling an RNG
/// crate into the library.
#[derive(Debug, Clone)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn next_u8(&mut self) -> u8 {
        (self.next_u64() >> 56) as u8
    }
}

/// 32x32 cell: light background, dark text-like strokes, a thin frame on
/// the left and top edges.
fn glyph_cell() -> [[u8; TILE]; TILE] {
    let mut cell = [[236u8; TILE]; TILE];
    for (i, row) in cell.iter_mut().enumerate() {
        row[0] = 96;
        if i == 0 {
            row.iter_mut().for_each(|v| *v = 96);
        }
    }
    let mut rng = SplitMix64::new(0x6c79_7068);
    // a few horizontal and vertical strokes
    for _ in 0..6 {
        let r = 3 + (rng.next_u64() % 26) as usize;
        let c0 = 3 + (rng.next_u64() % 18) as usize;
        let len = 4 + (rng.next_u64() % 9) as usize;
        cell[r][c0..(c0 + len).min(TILE - 1)].fill(24);
    }
    for _ in 0..5 {
        let c = 3 + (rng.next_u64() % 26) as usize;
        let r0 = 3 + (rng.next_u64() % 16) as usize;
        let len = 5 + (rng.next_u64() % 10) as usize;
        for row in cell.iter_mut().take((r0 + len).min(TILE - 1)).skip(r0) {
            row[c] = 24;
        }
    }
    cell
}

/// Grayscale card: a black first precinct, then the glyph cell repeated
/// every 32 pixels in both directions.
pub fn screen_card(width: usize, height: usize) -> PnmImage {
    let cell = glyph_cell();
    let mut data = vec![0u8; width * height];
    for y in TOP_BORDER..height {
        let row = &cell[(y - TOP_BORDER) % TILE];
        for x in 0..width {
            data[y * width + x] = row[x % TILE];
        }
    }
    PnmImage {
        width,
        height,
        channels: 1,
        data,
    }
}

/// RGB version of [`screen_card`] with a tinted cell.
pub fn screen_card_rgb(width: usize, height: usize) -> PnmImage {
    let gray = screen_card(width, height);
    let mut data: Vec<u8> = gray
        .data
        .iter()
        .flat_map(|&v| [v, v.saturating_sub(40), v / 2 + 60])
        .collect();
    // keep the border black in every channel
    data[..TOP_BORDER.min(height) * width * 3].fill(0);
    PnmImage {
        width,
        height,
        channels: 3,
        data,
    }
}

pub fn noise_image(width: usize, height: usize, channels: usize, seed: u64) -> PnmImage {
    let mut rng = SplitMix64::new(seed);
    PnmImage {
        width,
        height,
        channels,
        data: (0..width * height * channels).map(|_| rng.next_u8()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn card_is_periodic_below_border() {
        let img = screen_card(128, 64);
        assert!(img.data[..4 * 128].iter().all(|&v| v == 0));
        for y in 4..64 {
            for x in 32..128 {
                assert_eq!(img.data[y * 128 + x], img.data[y * 128 + x - 32]);
            }
        }
        assert!(img.data[4 * 128..].contains(&24));
    }

    #[test]
    fn rgb_card_border_black() {
        let img = screen_card_rgb(64, 16);
        assert_eq!(img.data.len(), 64 * 16 * 3);
        assert!(img.data[..4 * 64 * 3].iter().all(|&v| v == 0));
    }

    #[test]
    fn noise_is_seeded() {
        assert_eq!(noise_image(8, 8, 1, 5), noise_image(8, 8, 1, 5));
        assert_ne!(noise_image(8, 8, 1, 5), noise_image(8, 8, 1, 6));
    }
}
