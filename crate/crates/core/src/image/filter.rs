use super::{BinaryImage, GrayImage, ImageError, ImageStack};

/// Median over the `(2r+1)²` window around each pixel.
///
/// Windows are truncated at the image border rather than padded. When the
/// truncated window has an even number of samples the lower median is used.
pub fn median_filter(img: &GrayImage, radius: usize) -> Result<GrayImage, ImageError> {
    if radius == 0 {
        return Err(ImageError::InvalidParameter("median radius must be at least 1".into()));
    }
    let (w, h) = img.dimensions();
    let px = img.pixels();
    let mut out = vec![0u8; w * h];
    if radius <= 2 {
        let mut window = Vec::with_capacity((2 * radius + 1).pow(2));
        for y in 0..h {
            let (y0, y1) = (y.saturating_sub(radius), (y + radius).min(h - 1));
            for x in 0..w {
                let (x0, x1) = (x.saturating_sub(radius), (x + radius).min(w - 1));
                window.clear();
                for yy in y0..=y1 {
                    window.extend_from_slice(&px[yy * w + x0..=yy * w + x1]);
                }
                let k = (window.len() - 1) / 2;
                let (_, m, _) = window.select_nth_unstable(k);
                out[y * w + x] = *m;
            }
        }
    } else {
        // sliding histogram along each row
        for y in 0..h {
            let (y0, y1) = (y.saturating_sub(radius), (y + radius).min(h - 1));
            let mut hist = [0u32; 256];
            let mut n = 0u32;
            let add_col = |hist: &mut [u32; 256], n: &mut u32, x: usize| {
                for yy in y0..=y1 {
                    hist[px[yy * w + x] as usize] += 1;
                }
                *n += (y1 - y0 + 1) as u32;
            };
            for x in 0..=radius.min(w - 1) {
                add_col(&mut hist, &mut n, x);
            }
            for x in 0..w {
                if x > 0 {
                    if x + radius < w {
                        add_col(&mut hist, &mut n, x + radius);
                    }
                    if x > radius {
                        let gone = x - radius - 1;
                        for yy in y0..=y1 {
                            hist[px[yy * w + gone] as usize] -= 1;
                        }
                        n -= (y1 - y0 + 1) as u32;
                    }
                }
                let k = (n - 1) / 2;
                let mut acc = 0u32;
                for (v, &c) in hist.iter().enumerate() {
                    acc += c;
                    if acc > k {
                        out[y * w + x] = v as u8;
                        break;
                    }
                }
            }
        }
    }
    let mut res = GrayImage::new(w, h, out)?;
    res.set_calibration(img.calibration());
    Ok(res)
}

/// Foreground iff `lo <= intensity <= hi`. A single threshold `t` is `[t, 255]`.
pub fn band_threshold(img: &GrayImage, lo: u8, hi: u8) -> Result<BinaryImage, ImageError> {
    if lo > hi {
        return Err(ImageError::InvalidParameter(format!("empty band [{lo}, {hi}]")));
    }
    let mask = img.pixels().iter().map(|&v| lo <= v && v <= hi).collect();
    BinaryImage::new(img.width(), img.height(), mask)
}

/// Per-pixel maximum over all slices.
pub fn max_projection(stack: &ImageStack) -> GrayImage {
    let mut slices = stack.slices().iter();
    let mut acc = slices.next().expect("stack is non-empty").clone();
    for s in slices {
        for (a, &b) in acc.data.iter_mut().zip(s.pixels()) {
            *a = (*a).max(b);
        }
    }
    acc
}

/// Most frequent intensity within Euclidean distance `radius` of `center`.
///
/// The disk is clipped at the border; ties go to the lower intensity.
pub fn region_mode(img: &GrayImage, center: (usize, usize), radius: usize) -> Result<u8, ImageError> {
    let (cx, cy) = center;
    if radius == 0 {
        return Err(ImageError::InvalidParameter("mode radius must be at least 1".into()));
    }
    if cx >= img.width() || cy >= img.height() {
        return Err(ImageError::InvalidParameter(format!(
            "center ({cx}, {cy}) outside {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let mut hist = [0u32; 256];
    let r2 = (radius * radius) as isize;
    let r = radius as isize;
    for dy in -r..=r {
        let y = cy as isize + dy;
        if y < 0 || y >= img.height() as isize {
            continue;
        }
        for dx in -r..=r {
            let x = cx as isize + dx;
            if x < 0 || x >= img.width() as isize || dx * dx + dy * dy > r2 {
                continue;
            }
            hist[img.get(x as usize, y as usize) as usize] += 1;
        }
    }
    let mut best = 0usize;
    for v in 1..256 {
        if hist[v] > hist[best] {
            best = v;
        }
    }
    Ok(best as u8)
}
