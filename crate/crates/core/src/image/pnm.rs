//! Netpbm readers and writers: PGM (`P2` plain, `P5` raw) and PAM (`P7`).
//!
//! Reading is bit-exact for `maxval <= 255`. Wider samples are rejected
//! unless [`DecodeOptions::rescale_wide`] is set, in which case every
//! sample `v` is mapped to `round(v * 255 / maxval)`.
//!
//! Calibration travels in a header comment `# calibration <microns-per-pixel>`
//! so that a save/load cycle keeps it.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::GrayImage;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PnmError {
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },
    #[error("truncated payload at byte {offset}: expected {expected} more bytes, found {found}")]
    Truncated {
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("unsupported maxval {maxval} at byte {offset} (at most 255)")]
    UnsupportedMaxval { offset: usize, maxval: u32 },
    #[error("sample {value} exceeds maxval {maxval} at byte {offset}")]
    SampleOutOfRange { offset: usize, value: u32, maxval: u32 },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelTag {
    Gray,
    Red,
    Green,
    Blue,
    Alpha,
    Index(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedChannel {
    pub tag: ChannelTag,
    pub image: GrayImage,
}

/// Result of decoding: a single gray image or one image per PAM channel.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedImage {
    Gray(GrayImage),
    Channels(Vec<TaggedChannel>),
}

impl LoadedImage {
    pub fn channel(&self, tag: ChannelTag) -> Option<&GrayImage> {
        match self {
            LoadedImage::Gray(img) => (tag == ChannelTag::Gray).then_some(img),
            LoadedImage::Channels(chs) => chs.iter().find(|c| c.tag == tag).map(|c| &c.image),
        }
    }

    /// The gray image, or the first channel of a multi-channel file.
    pub fn into_gray(self) -> GrayImage {
        match self {
            LoadedImage::Gray(img) => img,
            LoadedImage::Channels(mut chs) => chs.swap_remove(0).image,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DecodeOptions {
    pub rescale_wide: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmEncoding {
    Plain,
    Raw,
}

pub fn load_image(path: impl AsRef<Path>) -> Result<LoadedImage, PnmError> {
    load_image_with(path, DecodeOptions::default())
}

pub fn load_image_with(path: impl AsRef<Path>, opts: DecodeOptions) -> Result<LoadedImage, PnmError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| PnmError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    decode(&bytes, opts)
}

pub fn save_pgm(path: impl AsRef<Path>, img: &GrayImage, encoding: PgmEncoding) -> Result<(), PnmError> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(img, encoding)).map_err(|e| PnmError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn save_pam(path: impl AsRef<Path>, channels: &[TaggedChannel]) -> Result<(), PnmError> {
    let path = path.as_ref();
    let bytes = encode_pam(channels).map_err(|reason| PnmError::MalformedHeader { offset: 0, reason })?;
    std::fs::write(path, bytes).map_err(|e| PnmError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn encode_pgm(img: &GrayImage, encoding: PgmEncoding) -> Vec<u8> {
    let mut header = String::new();
    let magic = match encoding {
        PgmEncoding::Plain => "P2",
        PgmEncoding::Raw => "P5",
    };
    let _ = writeln!(header, "{magic}");
    if let Some(c) = img.calibration() {
        let _ = writeln!(header, "# calibration {c:?}");
    }
    let _ = write!(header, "{} {}\n255\n", img.width(), img.height());
    let mut out = header.into_bytes();
    match encoding {
        PgmEncoding::Raw => out.extend_from_slice(img.pixels()),
        PgmEncoding::Plain => {
            for row in img.pixels().chunks(img.width()) {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    out
}

/// Interleaves equally sized channels into a `P7` file.
pub fn encode_pam(channels: &[TaggedChannel]) -> Result<Vec<u8>, String> {
    let first = channels.first().ok_or("PAM needs at least one channel")?;
    let (w, h) = first.image.dimensions();
    if channels.iter().any(|c| c.image.dimensions() != (w, h)) {
        return Err("PAM channels differ in size".into());
    }
    let tags: Vec<ChannelTag> = channels.iter().map(|c| c.tag).collect();
    let tupltype = match tags.as_slice() {
        [ChannelTag::Gray] => Some("GRAYSCALE"),
        [ChannelTag::Gray, ChannelTag::Alpha] => Some("GRAYSCALE_ALPHA"),
        [ChannelTag::Red, ChannelTag::Green, ChannelTag::Blue] => Some("RGB"),
        [ChannelTag::Red, ChannelTag::Green, ChannelTag::Blue, ChannelTag::Alpha] => Some("RGB_ALPHA"),
        _ => None,
    };
    let mut header = String::from("P7\n");
    if let Some(c) = first.image.calibration() {
        let _ = writeln!(header, "# calibration {c:?}");
    }
    let _ = write!(header, "WIDTH {w}\nHEIGHT {h}\nDEPTH {}\nMAXVAL 255\n", channels.len());
    if let Some(t) = tupltype {
        let _ = writeln!(header, "TUPLTYPE {t}");
    }
    header.push_str("ENDHDR\n");
    let mut out = header.into_bytes();
    out.reserve(w * h * channels.len());
    for i in 0..w * h {
        for c in channels {
            out.push(c.image.pixels()[i]);
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8], opts: DecodeOptions) -> Result<LoadedImage, PnmError> {
    let mut cur = Cursor::new(bytes);
    match bytes.get(..2) {
        Some(b"P2") | Some(b"P5") => decode_pgm(&mut cur, opts).map(LoadedImage::Gray),
        Some(b"P7") => decode_pam(&mut cur, opts),
        _ => Err(PnmError::MalformedHeader {
            offset: 0,
            reason: "expected magic P2, P5 or P7".into(),
        }),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    calibration: Option<f64>,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self {
            bytes,
            pos: 0,
            calibration: None,
        }
    }

    fn malformed<T>(&self, reason: impl Into<String>) -> Result<T, PnmError> {
        Err(PnmError::MalformedHeader {
            offset: self.pos,
            reason: reason.into(),
        })
    }

    /// Skips whitespace and `#` comments, harvesting calibration comments.
    fn skip_ws(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                let start = self.pos;
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
                let comment = String::from_utf8_lossy(&self.bytes[start + 1..self.pos]);
                let mut parts = comment.split_whitespace();
                if parts.next() == Some("calibration") {
                    if let Some(v) = parts.next().and_then(|s| s.parse::<f64>().ok()) {
                        if v.is_finite() && v > 0.0 {
                            self.calibration = Some(v);
                        }
                    }
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<(usize, &'a str)> {
        self.skip_ws();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .map(|s| (start, s))
    }

    fn number(&mut self, what: &str) -> Result<(usize, u32), PnmError> {
        match self.token() {
            Some((off, tok)) => match tok.parse::<u32>() {
                Ok(v) => Ok((off, v)),
                Err(_) => Err(PnmError::MalformedHeader {
                    offset: off,
                    reason: format!("{what}: expected an unsigned integer, found {tok:?}"),
                }),
            },
            None => self.malformed(format!("{what}: unexpected end of header")),
        }
    }

    fn rest_of_line(&mut self) -> &'a str {
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("")
    }
}

fn check_maxval(off: usize, maxval: u32, opts: DecodeOptions) -> Result<(), PnmError> {
    if maxval == 0 || maxval > 65535 {
        return Err(PnmError::MalformedHeader {
            offset: off,
            reason: format!("maxval {maxval} outside 1..=65535"),
        });
    }
    if maxval > 255 && !opts.rescale_wide {
        return Err(PnmError::UnsupportedMaxval { offset: off, maxval });
    }
    Ok(())
}

fn scale(value: u32, maxval: u32) -> u8 {
    if maxval <= 255 {
        value as u8
    } else {
        ((value as u64 * 255 + maxval as u64 / 2) / maxval as u64) as u8
    }
}

fn dims(off: usize, w: u32, h: u32) -> Result<(usize, usize), PnmError> {
    if w == 0 || h == 0 {
        return Err(PnmError::MalformedHeader {
            offset: off,
            reason: format!("zero dimension {w}x{h}"),
        });
    }
    Ok((w as usize, h as usize))
}

/// Reads `count` binary samples of 1 or 2 bytes starting at `cur.pos`.
fn read_raw(cur: &mut Cursor<'_>, count: usize, maxval: u32) -> Result<Vec<u8>, PnmError> {
    let width = if maxval > 255 { 2 } else { 1 };
    let need = count * width;
    let avail = cur.bytes.len().saturating_sub(cur.pos);
    if avail < need {
        return Err(PnmError::Truncated {
            offset: cur.pos,
            expected: need,
            found: avail,
        });
    }
    let raw = &cur.bytes[cur.pos..cur.pos + need];
    let mut out = Vec::with_capacity(count);
    for (i, chunk) in raw.chunks(width).enumerate() {
        let v = if width == 2 {
            u32::from(chunk[0]) << 8 | u32::from(chunk[1])
        } else {
            u32::from(chunk[0])
        };
        if v > maxval {
            return Err(PnmError::SampleOutOfRange {
                offset: cur.pos + i * width,
                value: v,
                maxval,
            });
        }
        out.push(scale(v, maxval));
    }
    cur.pos += need;
    Ok(out)
}

fn decode_pgm(cur: &mut Cursor<'_>, opts: DecodeOptions) -> Result<GrayImage, PnmError> {
    let plain = cur.bytes[1] == b'2';
    cur.pos = 2;
    if cur.bytes.get(2).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
        return cur.malformed("magic number must be followed by whitespace");
    }
    let (woff, w) = cur.number("width")?;
    let (_, h) = cur.number("height")?;
    let (moff, maxval) = cur.number("maxval")?;
    check_maxval(moff, maxval, opts)?;
    let (w, h) = dims(woff, w, h)?;
    let count = w * h;
    let data = if plain {
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            let (off, v) = match cur.token() {
                Some((off, tok)) => match tok.parse::<u32>() {
                    Ok(v) => (off, v),
                    Err(_) => {
                        return Err(PnmError::MalformedHeader {
                            offset: off,
                            reason: format!("expected sample, found {tok:?}"),
                        })
                    }
                },
                None => {
                    return Err(PnmError::Truncated {
                        offset: cur.pos,
                        expected: count - data.len(),
                        found: 0,
                    })
                }
            };
            if v > maxval {
                return Err(PnmError::SampleOutOfRange {
                    offset: off,
                    value: v,
                    maxval,
                });
            }
            data.push(scale(v, maxval));
        }
        data
    } else {
        // exactly one whitespace byte separates the header from the raster
        match cur.bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return cur.malformed("missing whitespace before raster"),
        }
        read_raw(cur, count, maxval)?
    };
    let mut img = GrayImage::new(w, h, data).expect("dimensions checked");
    img.set_calibration(cur.calibration);
    Ok(img)
}

fn decode_pam(cur: &mut Cursor<'_>, opts: DecodeOptions) -> Result<LoadedImage, PnmError> {
    cur.pos = 2;
    let mut width = None;
    let mut height = None;
    let mut depth = None;
    let mut maxval = None;
    let mut tupltype = String::new();
    loop {
        let Some((off, key)) = cur.token() else {
            return cur.malformed("missing ENDHDR");
        };
        match key {
            "ENDHDR" => {
                match cur.bytes.get(cur.pos) {
                    Some(b'\n') => cur.pos += 1,
                    _ => return cur.malformed("ENDHDR must end its line"),
                }
                break;
            }
            "WIDTH" => width = Some(cur.number("WIDTH")?),
            "HEIGHT" => height = Some(cur.number("HEIGHT")?),
            "DEPTH" => depth = Some(cur.number("DEPTH")?),
            "MAXVAL" => maxval = Some(cur.number("MAXVAL")?),
            "TUPLTYPE" => {
                let t = cur.rest_of_line().trim();
                if !tupltype.is_empty() {
                    tupltype.push(' ');
                }
                tupltype.push_str(t);
            }
            other => {
                return Err(PnmError::MalformedHeader {
                    offset: off,
                    reason: format!("unknown PAM header field {other:?}"),
                })
            }
        }
    }
    let missing = |name: &str| PnmError::MalformedHeader {
        offset: cur.pos,
        reason: format!("PAM header lacks {name}"),
    };
    let (woff, w) = width.ok_or_else(|| missing("WIDTH"))?;
    let (_, h) = height.ok_or_else(|| missing("HEIGHT"))?;
    let (doff, depth) = depth.ok_or_else(|| missing("DEPTH"))?;
    let (moff, maxval) = maxval.ok_or_else(|| missing("MAXVAL"))?;
    check_maxval(moff, maxval, opts)?;
    let (w, h) = dims(woff, w, h)?;
    if depth == 0 {
        return Err(PnmError::MalformedHeader {
            offset: doff,
            reason: "DEPTH must be at least 1".into(),
        });
    }
    let depth = depth as usize;
    let samples = read_raw(cur, w * h * depth, maxval)?;
    let tags: Vec<ChannelTag> = match (tupltype.as_str(), depth) {
        ("GRAYSCALE" | "", 1) => vec![ChannelTag::Gray],
        ("GRAYSCALE_ALPHA", 2) => vec![ChannelTag::Gray, ChannelTag::Alpha],
        ("RGB" | "", 3) => vec![ChannelTag::Red, ChannelTag::Green, ChannelTag::Blue],
        ("RGB_ALPHA", 4) => vec![ChannelTag::Red, ChannelTag::Green, ChannelTag::Blue, ChannelTag::Alpha],
        _ => (0..depth).map(ChannelTag::Index).collect(),
    };
    let mut planes: Vec<Vec<u8>> = (0..depth).map(|_| Vec::with_capacity(w * h)).collect();
    for px in samples.chunks(depth) {
        for (plane, &v) in planes.iter_mut().zip(px) {
            plane.push(v);
        }
    }
    let calibration = cur.calibration;
    let mut channels: Vec<TaggedChannel> = planes
        .into_iter()
        .zip(tags)
        .map(|(data, tag)| {
            let mut image = GrayImage::new(w, h, data).expect("dimensions checked");
            image.set_calibration(calibration);
            TaggedChannel { tag, image }
        })
        .collect();
    if channels.len() == 1 && channels[0].tag == ChannelTag::Gray {
        return Ok(LoadedImage::Gray(channels.swap_remove(0).image));
    }
    Ok(LoadedImage::Channels(channels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(bytes: &[u8]) -> GrayImage {
        match decode(bytes, DecodeOptions::default()).unwrap() {
            LoadedImage::Gray(g) => g,
            other => panic!("expected gray, got {other:?}"),
        }
    }

    #[test]
    fn reads_plain_pgm() {
        let img = gray(b"P2\n2 2\n255\n0 255 128 7\n");
        assert_eq!(img.dimensions(), (2, 2));
        assert_eq!(img.pixels(), &[0, 255, 128, 7]);
        assert_eq!(img.calibration(), None);
    }

    #[test]
    fn reads_comments_and_calibration() {
        let img = gray(b"P2\n# made by hand\n# calibration 0.22265625\n2 1 # trailing\n9\n3 9\n");
        assert_eq!(img.pixels(), &[3, 9]);
        assert_eq!(img.calibration(), Some(0.22265625));
    }

    #[test]
    fn reports_truncation_offset() {
        let err = decode(b"P5\n3 2\n255\nabcd", DecodeOptions::default()).unwrap_err();
        assert_eq!(
            err,
            PnmError::Truncated {
                offset: 11,
                expected: 6,
                found: 4
            }
        );
        let err = decode(b"P2 2 2 255 1 2 3", DecodeOptions::default()).unwrap_err();
        assert!(matches!(err, PnmError::Truncated { expected: 1, .. }));
    }

    #[test]
    fn reports_header_errors() {
        let err = decode(b"P2\n2 x\n255\n", DecodeOptions::default()).unwrap_err();
        assert!(matches!(err, PnmError::MalformedHeader { offset: 5, .. }), "{err:?}");
        let err = decode(b"P9\n", DecodeOptions::default()).unwrap_err();
        assert!(matches!(err, PnmError::MalformedHeader { offset: 0, .. }));
        let err = decode(b"P2\n1 1\n3\n4\n", DecodeOptions::default()).unwrap_err();
        assert!(matches!(
            err,
            PnmError::SampleOutOfRange {
                offset: 9,
                value: 4,
                maxval: 3
            }
        ));
    }

    #[test]
    fn wide_samples_are_rejected_or_rescaled() {
        let bytes = b"P5\n2 1\n65535\n\xff\xff\x80\x00";
        let err = decode(bytes, DecodeOptions::default()).unwrap_err();
        assert_eq!(
            err,
            PnmError::UnsupportedMaxval {
                offset: 7,
                maxval: 65535
            }
        );
        let img = decode(bytes, DecodeOptions { rescale_wide: true }).unwrap().into_gray();
        // 0x8000 * 255 / 65535 = 127.5019.. -> 128
        assert_eq!(img.pixels(), &[255, 128]);
    }

    #[test]
    fn pam_channels_reconstruct_interleaving() {
        // byte-level oracle: build the interleaved payload by hand first
        let (w, h) = (3usize, 2usize);
        let mut payload = Vec::new();
        for i in 0..w * h {
            payload.extend_from_slice(&[i as u8, 100 + i as u8, 200 + i as u8]);
        }
        let mut file = b"P7\nWIDTH 3\nHEIGHT 2\nDEPTH 3\nMAXVAL 255\nTUPLTYPE RGB\nENDHDR\n".to_vec();
        file.extend_from_slice(&payload);
        let LoadedImage::Channels(chs) = decode(&file, DecodeOptions::default()).unwrap() else {
            panic!("expected channels");
        };
        assert_eq!(
            chs.iter().map(|c| c.tag).collect::<Vec<_>>(),
            vec![ChannelTag::Red, ChannelTag::Green, ChannelTag::Blue]
        );
        let mut rebuilt = Vec::new();
        for i in 0..w * h {
            for c in &chs {
                rebuilt.push(c.image.pixels()[i]);
            }
        }
        assert_eq!(rebuilt, payload);
        let encoded = encode_pam(&chs).unwrap();
        assert_eq!(encoded, file);
    }

    #[test]
    fn pam_without_tupltype_uses_index_tags() {
        let mut file = b"P7\nWIDTH 1\nHEIGHT 1\nDEPTH 5\nMAXVAL 255\nENDHDR\n".to_vec();
        file.extend_from_slice(&[1, 2, 3, 4, 5]);
        let LoadedImage::Channels(chs) = decode(&file, DecodeOptions::default()).unwrap() else {
            panic!("expected channels");
        };
        assert_eq!(chs[4].tag, ChannelTag::Index(4));
        assert_eq!(chs[4].image.pixels(), &[5]);
    }

    proptest! {
        #[test]
        fn pgm_round_trip(data in proptest::collection::vec(any::<u8>(), 256), plain in any::<bool>(), calib in proptest::option::of(0.01f64..10.0)) {
            let mut img = GrayImage::new(16, 16, data).unwrap();
            if let Some(c) = calib {
                img = img.with_calibration(c).unwrap();
            }
            let enc = if plain { PgmEncoding::Plain } else { PgmEncoding::Raw };
            let bytes = encode_pgm(&img, enc);
            let back = decode(&bytes, DecodeOptions::default()).unwrap().into_gray();
            prop_assert_eq!(&back, &img);
            // writing again is byte-identical
            prop_assert_eq!(encode_pgm(&back, enc), bytes);
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        let img = GrayImage::from_fn(5, 3, |x, y| (x * 40 + y) as u8).unwrap();
        save_pgm(&path, &img, PgmEncoding::Raw).unwrap();
        assert_eq!(load_image(&path).unwrap().into_gray(), img);
        assert!(matches!(
            load_image(dir.path().join("missing.pgm")),
            Err(PnmError::Io { .. })
        ));
    }
}
