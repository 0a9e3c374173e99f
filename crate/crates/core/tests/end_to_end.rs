use ipcdv_core::pnm::PnmImage;
use ipcdv_core::search::oracle::brute_force_search;
use ipcdv_core::search::{candidate_window, search_image, Frame, ReconMode};
use ipcdv_core::testcard::{noise_image, screen_card, screen_card_rgb, SplitMix64};
use ipcdv_core::{DisplacementVector, Mode, SearchConfig};
use proptest::prelude::*;

fn frame(img: &PnmImage) -> Frame {
    Frame::from_planes(&img.to_planes(), img.width, img.height).unwrap()
}

fn assert_matches_oracle(img: &PnmImage, cfg: &SearchConfig) {
    let f = frame(img);
    let report = search_image(&f, cfg, 4).unwrap();
    let got: Vec<_> = report.decisions().copied().collect();
    let want = brute_force_search(&f, cfg).unwrap();
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        assert_eq!(g, w);
    }
}

#[test]
fn gray_card_matches_brute_force() {
    assert_matches_oracle(&screen_card(160, 24), &SearchConfig::default());
}

#[test]
fn rgb_noise_matches_brute_force() {
    assert_matches_oracle(&noise_image(96, 16, 3, 11), &SearchConfig::default());
}

#[test]
fn unaligned_frame_matches_brute_force() {
    // 70 columns pad to 96, 10 rows pad to 12
    assert_matches_oracle(&noise_image(70, 10, 1, 4), &SearchConfig::default());
}

#[test]
fn quantized_recon_and_narrow_window_match_brute_force() {
    let cfg = SearchConfig {
        dx_min: -64,
        dx_max: 64,
        dy_min: -8,
        recon: ReconMode::Quantize(3),
        ..Default::default()
    };
    assert_matches_oracle(&screen_card_rgb(128, 20), &cfg);
    assert_matches_oracle(&noise_image(128, 12, 1, 9), &cfg);
}

#[test]
fn thread_count_does_not_change_results() {
    let f = frame(&noise_image(192, 24, 3, 2));
    let cfg = SearchConfig::default();
    let a = search_image(&f, &cfg, 1).unwrap();
    let b = search_image(&f, &cfg, 8).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn first_unit_is_orig_without_dv() {
    let f = frame(&noise_image(64, 8, 1, 1));
    let r = search_image(&f, &SearchConfig::default(), 1).unwrap();
    for d in r.precincts[0].decisions.iter().filter(|d| d.unit_index == 0) {
        assert_eq!(d.mode, Mode::Orig);
        assert_eq!(d.best_dv, None);
        assert_eq!(d.ipc_bits, None);
    }
    assert!(r.to_csv().lines().nth(1).unwrap().starts_with("0,0,0,,,,"));
}

#[test]
fn vertically_periodic_content_picks_dy_minus_4() {
    // every precinct identical, no horizontal repetition
    let (w, h) = (128, 32);
    let mut rng = SplitMix64::new(77);
    let strip: Vec<u8> = (0..w * 4).map(|_| rng.next_u8()).collect();
    let data: Vec<u8> = (0..h).flat_map(|y| strip[(y % 4) * w..(y % 4 + 1) * w].to_vec()).collect();
    let f = frame(&PnmImage::gray(w, h, data).unwrap());
    let r = search_image(&f, &SearchConfig::default(), 2).unwrap();
    let later: Vec<_> = r.decisions().filter(|d| d.precinct > 0).collect();
    assert!(later
        .iter()
        .all(|d| d.mode == Mode::Ipc && d.best_dv == Some(DisplacementVector::new(0, -4)) && d.ipc_bits == Some(ipc_floor(d.group.index()))));
}

/// Cost of an all-zero residual: 4 bits per quad.
fn ipc_floor(group: usize) -> u64 {
    4 * [24u64, 6, 2, 1][group]
}

#[test]
fn fully_quantized_reference_never_wins() {
    let img = screen_card(96, 16);
    let f = frame(&img);
    let cfg = SearchConfig {
        recon: ReconMode::Quantize(31),
        ..Default::default()
    };
    // zero reference: residual equals original, never cheaper by 16 bits
    let r = search_image(&f, &cfg, 1).unwrap();
    assert!(r.decisions().all(|d| d.mode == Mode::Orig));
    assert!(r.decisions().all(|d| d.ipc_bits.is_none_or(|b| b == d.orig_bits)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn window_is_causal_and_complete(
        p in 0usize..6,
        units in 1usize..20,
        u_frac in 0.0f64..1.0,
        dx_k in 1i32..6,
        dy_k in 0i32..4,
    ) {
        let u = ((units as f64) * u_frac) as usize % units;
        let cfg = SearchConfig {
            dx_min: -32 * dx_k,
            dx_max: 32 * dx_k,
            dy_min: -4 * dy_k,
            ..Default::default()
        };
        let w = candidate_window(&cfg, p, u, units);
        let mut expect = 0;
        for dy in -dy_k..=0 {
            for dx in -dx_k..=dx_k {
                let (tp, tu) = (p as i32 + dy, u as i32 + dx);
                if tp >= 0 && tu >= 0 && tu < units as i32 && (dy < 0 || tu < u as i32) {
                    expect += 1;
                }
            }
        }
        prop_assert_eq!(w.len(), expect);
        for dv in &w {
            prop_assert!(dv.dy <= 0);
            prop_assert!(dv.dy < 0 || dv.dx < 0);
            prop_assert!(p as i32 + dv.dy / 4 >= 0);
        }
    }
}
