use image::{Rgb, RgbImage};
use neurotopo_core::{BinaryImage, GrayImage};

/// Red and green channels with the dendrite band in blue and marked
/// synapses in white.
pub fn render(red: &GrayImage, green: &GrayImage, band: &BinaryImage, marked: &BinaryImage) -> RgbImage {
    let (w, h) = red.dimensions();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let (x, y) = (x as usize, y as usize);
        if marked.get(x, y) {
            Rgb([255, 255, 255])
        } else {
            Rgb([red.get(x, y), green.get(x, y), if band.get(x, y) { 160 } else { 0 }])
        }
    })
}
