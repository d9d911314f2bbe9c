//! Reference inputs shared by unit tests, the acceptance suite and the CLI
//! examples.

use crate::dvf::{parse_field, DiscreteVectorField};
use crate::image::{BinaryImage, GrayImage, ImageStack};
use crate::pipelines::{IntensityRange, RoiPolyline};

/// The 5×5 mask whose complex has two components and three holes.
pub fn three_hole_mask() -> BinaryImage {
    BinaryImage::from_rows(&["01001", "10100", "01010", "00101", "00010"]).expect("valid rows")
}

/// 3×3 foreground square with the centre pixel removed.
pub fn annulus_mask() -> BinaryImage {
    BinaryImage::from_rows(&["111", "101", "111"]).expect("valid rows")
}

/// Reference vector field on [`annulus_mask`]: vertical arrows from
/// vertices down onto edges and from horizontal edges down onto squares,
/// plus three leftward arrows along the bottom row. It leaves one critical
/// vertex (the bottom-left corner) and one critical edge (the top side of
/// the hole).
pub const ANNULUS_FIELD: &str = include_str!("../fixtures/annulus_field.txt");

pub fn annulus_field() -> DiscreteVectorField {
    parse_field(ANNULUS_FIELD).expect("fixture parses")
}

/// Corner cuts, as `(dy, dx)` offsets measured inwards from a corner.
const CUTS: [&[(usize, usize)]; 7] = [
    &[],
    &[(0, 0)],
    &[(0, 0), (0, 1), (1, 0)],
    &[(0, 0), (0, 1)],
    &[(0, 0), (1, 0)],
    &[(0, 0), (0, 1), (0, 2), (1, 0), (2, 0)],
    &[(0, 0), (0, 1), (0, 2), (1, 0)],
];

/// Rectangles with trimmed corners; each is unchanged by a 3×3 median.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NucleusBlob {
    /// 39 px.
    Small,
    /// 201 px.
    Large,
    /// 5×15 with corners trimmed, axis ratio close to 3.
    Oblong,
    /// 100 px, nearly square.
    Round,
    /// 140 px, placed away from the neuron channel.
    Orphan,
}

impl NucleusBlob {
    pub const ALL: [NucleusBlob; 5] = [
        NucleusBlob::Small,
        NucleusBlob::Large,
        NucleusBlob::Oblong,
        NucleusBlob::Round,
        NucleusBlob::Orphan,
    ];

    /// `(width, height, cut index per corner TL, TR, BL, BR)`.
    fn geometry(self) -> (usize, usize, [usize; 4]) {
        match self {
            NucleusBlob::Small => (5, 9, [1, 1, 1, 2]),
            NucleusBlob::Large => (13, 16, [1, 1, 1, 6]),
            NucleusBlob::Oblong => (5, 15, [1, 1, 1, 1]),
            NucleusBlob::Round => (10, 11, [1, 1, 6, 6]),
            NucleusBlob::Orphan => (12, 12, [1, 1, 1, 1]),
        }
    }

    /// Offsets of the blob's pixels from its top-left corner.
    pub fn pixels(self) -> Vec<(usize, usize)> {
        let (w, h, cuts) = self.geometry();
        let mut keep = vec![true; w * h];
        let corners = [(false, false), (false, true), (true, false), (true, true)];
        for (&(flip_y, flip_x), &c) in corners.iter().zip(&cuts) {
            for &(dy, dx) in CUTS[c] {
                let y = if flip_y { h - 1 - dy } else { dy };
                let x = if flip_x { w - 1 - dx } else { dx };
                keep[y * w + x] = false;
            }
        }
        (0..w * h).filter(|&i| keep[i]).map(|i| (i % w, i / w)).collect()
    }

    pub fn area(self) -> usize {
        self.pixels().len()
    }
}

fn stamp(img: &mut GrayImage, blob: NucleusBlob, (x0, y0): (usize, usize), value: u8) {
    for (dx, dy) in blob.pixels() {
        img.set(x0 + dx, y0 + dy, value);
    }
}

/// A dark `width × height` image holding one blob at `origin`.
pub fn paint_blob(width: usize, height: usize, blob: NucleusBlob, origin: (usize, usize), value: u8) -> GrayImage {
    let mut img = GrayImage::filled(width, height, 0).expect("non-empty");
    stamp(&mut img, blob, origin, value);
    img
}

pub struct NucleusFixture {
    pub nuclei: GrayImage,
    pub neurons: GrayImage,
}

/// One blob of every kind, 50 px apart; the neuron channel covers all but
/// the orphan.
pub fn nucleus_fixture() -> NucleusFixture {
    let places = [(10, 10), (60, 10), (110, 10), (10, 60), (60, 60)];
    let mut nuclei = GrayImage::filled(160, 110, 0).expect("non-empty");
    let mut neurons = nuclei.clone();
    for (&blob, &at) in NucleusBlob::ALL.iter().zip(&places) {
        stamp(&mut nuclei, blob, at, 220);
        if blob != NucleusBlob::Orphan {
            stamp(&mut neurons, blob, at, 200);
        }
    }
    NucleusFixture { nuclei, neurons }
}

/// A 7×7 grid of 10×10 nuclei packed 2 px apart.
pub fn dense_cluster_image() -> GrayImage {
    let mut img = GrayImage::filled(84, 84, 0).expect("non-empty");
    for r in 0..7 {
        for c in 0..7 {
            for y in 0..10 {
                for x in 0..10 {
                    let corner = (x == 0 || x == 9) && (y == 0 || y == 9);
                    if !corner {
                        img.set(1 + 12 * c + x, 1 + 12 * r + y, 220);
                    }
                }
            }
        }
    }
    img
}

/// 125×125 image: a bright soma at (62, 62) and two dashed 60 px bars
/// through it (dashes of 4 px, gaps of 2 px).
pub fn cross_image() -> GrayImage {
    let c = 62isize;
    GrayImage::from_fn(125, 125, |x, y| {
        let (dx, dy) = (x as isize - c, y as isize - c);
        if dx * dx + dy * dy <= 25 {
            return 255;
        }
        let on_arm = |d: isize| (-30..=29).contains(&d) && !matches!(d.abs() % 6, 3 | 4);
        if (dy == 0 && on_arm(dx)) || (dx == 0 && on_arm(dy)) {
            200
        } else {
            0
        }
    })
    .expect("non-empty")
}

pub struct SynapseFixture {
    pub red: GrayImage,
    pub green: GrayImage,
    pub roi: RoiPolyline,
    pub red_range: IntensityRange,
    pub green_range: IntensityRange,
    pub calibration: f64,
}

pub const SYNAPSE_CALIBRATION: f64 = 0.22266;

/// 96×64 scene: five blobs bright in both channels (three inside the band
/// of a horizontal dendrite, two outside), one red-only and one green-only
/// blob inside the band, over dim background texture.
pub fn synapse_fixture() -> SynapseFixture {
    let texture = |x: usize, y: usize| ((x * 7 + y * 13) % 30) as u8;
    let mut red = GrayImage::from_fn(96, 64, texture).expect("non-empty");
    let mut green = GrayImage::from_fn(96, 64, |x, y| texture(y, x)).expect("non-empty");
    let square = |img: &mut GrayImage, cx: usize, cy: usize, v: u8| {
        for y in cy - 1..=cy + 1 {
            for x in cx - 1..=cx + 1 {
                img.set(x, y, v);
            }
        }
    };
    for (cx, cy) in [(20, 32), (48, 32), (76, 32), (20, 10), (76, 54)] {
        square(&mut red, cx, cy, 220);
        square(&mut green, cx, cy, 210);
    }
    square(&mut red, 34, 32, 230);
    square(&mut green, 62, 32, 230);
    let calibration = SYNAPSE_CALIBRATION;
    SynapseFixture {
        red: red.with_calibration(calibration).expect("positive"),
        green: green.with_calibration(calibration).expect("positive"),
        roi: RoiPolyline::new(vec![[8.0, 32.5], [88.0, 32.5]], 4.0).expect("valid ROI"),
        red_range: IntensityRange { lo: 50, hi: 255 },
        green_range: IntensityRange { lo: 50, hi: 255 },
        calibration,
    }
}

/// Deterministic `size × size` synapse scene with many coincident blobs
/// along a diagonal dendrite, for timing runs.
pub fn synapse_field(size: usize) -> SynapseFixture {
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let mut red = GrayImage::filled(size, size, 0).expect("non-empty");
    let mut green = red.clone();
    for img in [&mut red, &mut green] {
        for y in 0..size {
            for x in 0..size {
                img.set(x, y, (next() % 40) as u8);
            }
        }
    }
    let blobs = size * size / 2000;
    for _ in 0..blobs {
        let cx = 2 + (next() as usize) % (size - 4);
        let cy = 2 + (next() as usize) % (size - 4);
        let both = next() % 3 != 0;
        for y in cy - 1..=cy + 1 {
            for x in cx - 1..=cx + 1 {
                red.set(x, y, 180 + (next() % 60) as u8);
                if both {
                    green.set(x, y, 180 + (next() % 60) as u8);
                }
            }
        }
    }
    let s = size as f64;
    SynapseFixture {
        red,
        green,
        roi: RoiPolyline::new(
            vec![[0.05 * s, 0.05 * s], [0.5 * s, 0.45 * s], [0.95 * s, 0.95 * s]],
            12.0,
        )
        .expect("valid ROI"),
        red_range: IntensityRange { lo: 100, hi: 255 },
        green_range: IntensityRange { lo: 100, hi: 255 },
        calibration: SYNAPSE_CALIBRATION,
    }
}

/// Three 64×64 slices: a bright blob drifting by one pixel per slice, a
/// steady dimmer bar, and a faint speck in the middle slice only.
pub fn structure_stack() -> ImageStack {
    let slices = (0..3)
        .map(|z| {
            let mut img = GrayImage::filled(64, 64, 5).expect("non-empty");
            stamp(&mut img, NucleusBlob::Round, (10 + z, 10), 200);
            for y in 40..44 {
                for x in 8..56 {
                    img.set(x, y, 180);
                }
            }
            if z == 1 {
                stamp(&mut img, NucleusBlob::Small, (45, 10), 40);
            }
            img
        })
        .collect();
    ImageStack::new(slices).expect("uniform slices")
}
