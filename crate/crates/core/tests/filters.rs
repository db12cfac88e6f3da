use ecsgfx::gpu::Device;
use ecsgfx::renderer::{dispatch_filter, dispatch_image_filter, filter_reference, FilterKind};
use ecsgfx::{Error, Image};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn random_image(seed: u64, w: u32, h: u32) -> Image {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let pixels = (0..w * h * 4).map(|_| rng.random()).collect();
    Image::new(w, h, pixels).unwrap()
}

/// Luma with the weights scaled to integers out of 10000.
fn gray_oracle(p: [u8; 4]) -> u8 {
    let scaled = 2126 * p[0] as u32 + 7152 * p[1] as u32 + 722 * p[2] as u32;
    ((scaled + 5000) / 10000) as u8
}

fn blur_oracle(img: &Image, x: u32, y: u32, c: usize) -> u8 {
    let mut sum = 0u32;
    for dy in [-1i64, 0, 1] {
        for dx in [-1i64, 0, 1] {
            let sx = (x as i64 + dx).clamp(0, img.width as i64 - 1) as u32;
            let sy = (y as i64 + dy).clamp(0, img.height as i64 - 1) as u32;
            sum += img.pixel(sx, sy)[c] as u32;
        }
    }
    ((2 * sum + 9) / 18) as u8
}

fn assert_close(a: u8, b: u8, what: &str) {
    assert!(a.abs_diff(b) <= 1, "{what}: {a} vs {b}");
}

#[test]
fn grayscale_matches_on_random_image() {
    let device = Device::new();
    let img = random_image(1, 64, 64);
    let gpu = dispatch_image_filter(&device, &img, FilterKind::Grayscale).unwrap();
    let cpu = filter_reference(&img, FilterKind::Grayscale);
    for y in 0..64 {
        for x in 0..64 {
            let (g, src) = (gpu.pixel(x, y), img.pixel(x, y));
            let want = gray_oracle(src);
            for c in 0..3 {
                assert_close(g[c], want, "gpu gray");
                assert_close(cpu.pixel(x, y)[c], want, "cpu gray");
            }
            assert_eq!(g[3], src[3]);
        }
    }
    assert!(gpu.max_abs_diff(&cpu).unwrap() <= 1);
}

#[test]
fn blur_matches_on_random_image() {
    let device = Device::new();
    let img = random_image(2, 64, 64);
    let gpu = dispatch_image_filter(&device, &img, FilterKind::BoxBlur3).unwrap();
    let cpu = filter_reference(&img, FilterKind::BoxBlur3);
    for y in 0..64 {
        for x in 0..64 {
            for c in 0..4 {
                let want = blur_oracle(&img, x, y, c);
                assert_close(gpu.pixel(x, y)[c], want, "gpu blur");
                assert_close(cpu.pixel(x, y)[c], want, "cpu blur");
            }
        }
    }
}

#[test]
fn grayscale_fixed_points() {
    let device = Device::new();
    let pixels = [255, 0, 0, 255, 255, 255, 255, 255, 0, 0, 0, 17, 0, 255, 0, 255];
    let out = dispatch_filter(&device, 2, 2, 4, &pixels, FilterKind::Grayscale).unwrap();
    assert_eq!(out.pixel(0, 0), [54, 54, 54, 255]);
    assert_eq!(out.pixel(1, 0), [255, 255, 255, 255]);
    assert_eq!(out.pixel(0, 1), [0, 0, 0, 17]);
    assert_eq!(out.pixel(1, 1), [182, 182, 182, 255]);
}

#[test]
fn blur_leaves_flat_images_alone() {
    let device = Device::new();
    let img = Image::filled(9, 5, [12, 200, 99, 255]);
    assert_eq!(dispatch_image_filter(&device, &img, FilterKind::BoxBlur3).unwrap(), img);
    let one = Image::filled(1, 1, [3, 4, 5, 6]);
    assert_eq!(dispatch_image_filter(&device, &one, FilterKind::BoxBlur3).unwrap(), one);
}

#[test]
fn only_rgba_input_is_accepted() {
    let device = Device::new();
    for channels in [1, 3] {
        let pixels = vec![0u8; 4 * channels];
        assert!(matches!(
            dispatch_filter(&device, 2, 2, channels, &pixels, FilterKind::Grayscale),
            Err(Error::UnsupportedFormat(c)) if c == channels
        ));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn odd_sizes_match_reference(w in 1u32..20, h in 1u32..20, seed in any::<u64>()) {
        let device = Device::new();
        let img = random_image(seed, w, h);
        for kind in [FilterKind::Grayscale, FilterKind::BoxBlur3] {
            let gpu = dispatch_image_filter(&device, &img, kind).unwrap();
            prop_assert!(gpu.max_abs_diff(&filter_reference(&img, kind)).unwrap() <= 1);
        }
    }
}
