use serde::{Deserialize, Serialize};

use super::BinaryImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphOp {
    Dilate,
    Erode,
}

/// One pass of a `2r+1` box along rows (`horizontal`) or columns.
/// Pixels outside the image are background.
fn pass(img: &BinaryImage, op: MorphOp, r: usize, horizontal: bool) -> BinaryImage {
    let (w, h) = (img.width, img.height);
    let (len, lines) = if horizontal { (w, h) } else { (h, w) };
    let at = |line: usize, i: usize| if horizontal { (i, line) } else { (line, i) };
    let full = 2 * r + 1;
    let mut out = BinaryImage::new(w, h);
    let mut prefix = vec![0usize; len + 1];
    for line in 0..lines {
        for i in 0..len {
            let (x, y) = at(line, i);
            prefix[i + 1] = prefix[i] + img.get(x, y) as usize;
        }
        for i in 0..len {
            let lo = i.saturating_sub(r);
            let hi = (i + r + 1).min(len);
            let n = prefix[hi] - prefix[lo];
            let v = match op {
                MorphOp::Dilate => n > 0,
                MorphOp::Erode => n == full,
            };
            let (x, y) = at(line, i);
            out.set(x, y, v);
        }
    }
    out
}

/// Dilation or erosion with a square of side `2 * radius + 1`.
pub fn morphology(img: &BinaryImage, op: MorphOp, radius: usize) -> BinaryImage {
    if radius == 0 {
        return img.clone();
    }
    let tmp = pass(img, op, radius, true);
    pass(&tmp, op, radius, false)
}

pub fn dilate(img: &BinaryImage, radius: usize) -> BinaryImage {
    morphology(img, MorphOp::Dilate, radius)
}

pub fn erode(img: &BinaryImage, radius: usize) -> BinaryImage {
    morphology(img, MorphOp::Erode, radius)
}

/// Erosion then dilation: removes specks narrower than the box.
pub fn open(img: &BinaryImage, radius: usize) -> BinaryImage {
    dilate(&erode(img, radius), radius)
}

/// Dilation then erosion: fills holes narrower than the box.
pub fn close(img: &BinaryImage, radius: usize) -> BinaryImage {
    erode(&dilate(img, radius), radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Direct set-algebra definition, O(r^2) per pixel.
    fn naive(img: &BinaryImage, op: MorphOp, r: i64) -> BinaryImage {
        BinaryImage::from_fn(img.width, img.height, |x, y| {
            let mut any = false;
            let mut all = true;
            for dy in -r..=r {
                for dx in -r..=r {
                    let v = img.get_signed(x as i64 + dx, y as i64 + dy);
                    any |= v;
                    all &= v;
                }
            }
            match op {
                MorphOp::Dilate => any,
                MorphOp::Erode => all,
            }
        })
    }

    #[test]
    fn empty_stays_empty() {
        let e = BinaryImage::new(10, 7);
        assert_eq!(dilate(&e, 2).count(), 0);
        assert_eq!(erode(&e, 2).count(), 0);
    }

    #[test]
    fn single_pixel_dilates_to_block() {
        let mut img = BinaryImage::new(7, 7);
        img.set(3, 3, true);
        let d = dilate(&img, 1);
        assert_eq!(d.count(), 9);
        for y in 2..=4 {
            for x in 2..=4 {
                assert!(d.get(x, y));
            }
        }
    }

    #[test]
    fn matches_naive_definition() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for r in 1..4 {
            let bits: Vec<bool> = (0..23 * 17).map(|_| rng.random_bool(0.4)).collect();
            let img = BinaryImage { width: 23, height: 17, data: bits };
            for op in [MorphOp::Dilate, MorphOp::Erode] {
                assert_eq!(morphology(&img, op, r), naive(&img, op, r as i64));
            }
        }
    }

    #[test]
    fn opening_removes_specks_and_closing_fills_holes() {
        let mut img = BinaryImage::from_fn(40, 40, |x, y| (10..30).contains(&x) && (10..30).contains(&y));
        img.set(2, 2, true);
        img.set(35, 3, true);
        img.set(36, 3, true);
        img.set(20, 20, false);
        img.set(21, 20, false);
        let opened = open(&img, 1);
        assert!(!opened.get(2, 2) && !opened.get(35, 3));
        let closed = close(&img, 1);
        assert!(closed.get(20, 20) && closed.get(21, 20));
        let square = BinaryImage::from_fn(40, 40, |x, y| (10..30).contains(&x) && (10..30).contains(&y));
        assert_eq!(close(&open(&img, 1), 1), square);
    }
}
