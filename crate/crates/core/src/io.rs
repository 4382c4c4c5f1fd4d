//! Binary PPM (P6) / PGM (P5) with 8-bit samples, CSV dumps of polar fields
//! and angular profiles, and the fixed numeric formatting used in every CSV.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{AngularProfile, CartesianImage, PolarField};
use crate::metrics::BinaryMask;

/// Six significant digits, no trailing zeros, `.` decimal separator.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return "NA".into();
    }
    let exp = v.abs().log10().floor() as i32;
    let mut s = if !(-4..6).contains(&exp) {
        format!("{v:.5e}")
    } else {
        format!("{:.*}", (5 - exp).max(0) as usize, v)
    };
    // Rounding can carry into a new digit, e.g. 999999.5; tidy either way.
    if s.contains('.') && !s.contains('e') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_else(|| "NA".into())
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 {
        return Err(Error::Format("file too short for a netpbm header".into()));
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(Error::Format("truncated netpbm header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("expected a number in netpbm header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("bad number in netpbm header".into()))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format("missing whitespace after maxval".into()));
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Format(format!("only 8-bit maxval 255 is supported, got {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Format("zero image dimension".into()));
    }
    Ok(Header { magic, width, height, data_start: pos + 1 })
}

fn payload<'a>(bytes: &'a [u8], h: &Header, channels: usize) -> Result<&'a [u8]> {
    let need = h.width * h.height * channels;
    let data = &bytes[h.data_start.min(bytes.len())..];
    if data.len() < need {
        return Err(Error::Format(format!("expected {need} pixel bytes, found {}", data.len())));
    }
    Ok(&data[..need])
}

/// Decode a P6 or P5 buffer into an image with values in `[0, 1]`.
pub fn decode_netpbm(bytes: &[u8]) -> Result<CartesianImage> {
    let h = parse_header(bytes)?;
    let channels = match &h.magic {
        b"P6" => 3,
        b"P5" => 1,
        m => return Err(Error::Format(format!("unsupported netpbm magic {:?}", String::from_utf8_lossy(m)))),
    };
    let px = payload(bytes, &h, channels)?;
    let mut data = vec![0.0; px.len()];
    let plane = h.width * h.height;
    for (k, &b) in px.iter().enumerate() {
        let (pixel, c) = (k / channels, k % channels);
        data[c * plane + pixel] = b as f64 / 255.0;
    }
    CartesianImage::new(channels, h.height, h.width, data)
}

#[inline]
fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encode as P6; single-channel images are replicated to RGB.
pub fn encode_ppm(image: &CartesianImage) -> Vec<u8> {
    let (h, w) = (image.height(), image.width());
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let ch = if image.channels() == 1 { 0 } else { c.min(image.channels() - 1) };
                out.push(quantize(image.get(ch, x, y)));
            }
        }
    }
    out
}

/// Encode channel 0 as P5.
pub fn encode_pgm(image: &CartesianImage) -> Vec<u8> {
    let (h, w) = (image.height(), image.width());
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(image.channel_plane(0).iter().map(|&v| quantize(v)));
    out
}

pub fn read_image(path: &Path) -> Result<CartesianImage> {
    decode_netpbm(&fs::read(path)?)
}

pub fn write_ppm(path: &Path, image: &CartesianImage) -> Result<()> {
    Ok(fs::write(path, encode_ppm(image))?)
}

/// Masks are P5 with foreground 255 and background 0.
pub fn write_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.bits().iter().map(|&b| if b { 255u8 } else { 0 }));
    Ok(fs::write(path, out)?)
}

/// Read a P5 mask; any value other than 0 and 255 is rejected.
pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    let bytes = fs::read(path)?;
    let h = parse_header(&bytes)?;
    if &h.magic != b"P5" {
        return Err(Error::Format(format!("{} is not a binary PGM", path.display())));
    }
    let px = payload(&bytes, &h, 1)?;
    let bits = px
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            255 => Ok(true),
            v => Err(Error::Format(format!("mask value {v} is neither 0 nor 255"))),
        })
        .collect::<Result<Vec<_>>>()?;
    BinaryMask::new(h.height, h.width, bits)
}

/// One row per radial bin, one column per angular bin (channel 0).
pub fn field_to_csv(field: &PolarField) -> String {
    let mut out = String::new();
    for j in 0..field.n_rho() {
        let row: Vec<String> = (0..field.n_theta()).map(|i| fmt_sig(field.get(j, i))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn field_from_csv(text: &str) -> Result<PolarField> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Format(format!("bad CSV number '{v}': {e}"))))
                .collect()
        })
        .collect::<Result<_>>()?;
    let n_theta = rows.first().map(Vec::len).unwrap_or(0);
    if rows.iter().any(|r| r.len() != n_theta) {
        return Err(Error::Format("ragged field CSV".into()));
    }
    let n_rho = rows.len();
    PolarField::new(1, n_rho, n_theta, rows.into_iter().flatten().collect())
}

/// `theta,<name>...` table of aligned profiles.
pub fn profiles_to_csv(thetas: &[f64], columns: &[(&str, &AngularProfile)]) -> Result<String> {
    for (name, p) in columns {
        if p.len() != thetas.len() {
            return Err(Error::ShapeMismatch(format!("profile '{name}' has {} angles", p.len())));
        }
    }
    let mut out = String::from("theta");
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, t) in thetas.iter().enumerate() {
        out.push_str(&fmt_sig(*t));
        for (_, p) in columns {
            out.push(',');
            out.push_str(&fmt_sig(p.values[i]));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(0.123456789), "0.123457");
        assert_eq!(fmt_sig(-2.5), "-2.5");
        assert_eq!(fmt_sig(123456.7), "123457");
        assert_eq!(fmt_sig(1234567.0), "1.23457e6");
        assert_eq!(fmt_sig(0.000012345678), "1.23457e-5");
        assert_eq!(fmt_sig(0.00012345678), "0.000123457");
        assert_eq!(fmt_sig(f64::NAN), "NA");
        assert_eq!(fmt_opt(None), "NA");
    }

    #[test]
    fn ppm_header_with_comments() {
        let mut bytes = b"P6\n# made by hand\n2 1\n# max\n255\n".to_vec();
        bytes.extend([255, 0, 0, 0, 0, 255]);
        let img = decode_netpbm(&bytes).unwrap();
        assert_eq!((img.channels(), img.width(), img.height()), (3, 2, 1));
        assert_eq!(img.get(0, 0, 0), 1.0);
        assert_eq!(img.get(2, 1, 0), 1.0);
        let enc = encode_ppm(&img);
        assert!(enc.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(&enc[11..], &bytes[bytes.len() - 6..]);
    }

    #[test]
    fn rejects_corrupt_files() {
        assert!(decode_netpbm(b"P6\n2 2\n255\n\x00").is_err());
        assert!(decode_netpbm(b"P3\n1 1\n255\n0 0 0").is_err());
        assert!(decode_netpbm(b"P5\n1 1\n65535\n\x00\x00").is_err());
        assert!(decode_netpbm(b"P5\nx 1\n255\n\x00").is_err());
        assert!(decode_netpbm(b"").is_err());
    }

    #[test]
    fn mask_files_round_trip_and_reject_grey() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        let m = BinaryMask::from_fn(5, 7, |x, y| (x + y) % 3 == 0);
        write_mask(&p, &m).unwrap();
        assert_eq!(read_mask(&p).unwrap(), m);
        std::fs::write(&p, b"P5\n1 1\n255\n\x80").unwrap();
        assert!(read_mask(&p).is_err());
    }

    proptest! {
        #[test]
        fn ppm_round_trip(w in 1usize..8, h in 1usize..8, seed in any::<u64>()) {
            let img = CartesianImage::from_fn(3, h, w, |c, x, y| {
                (((seed >> ((c + x + y) % 48)) as usize + c * 7 + x * 3 + y) % 256) as f64 / 255.0
            });
            let back = decode_netpbm(&encode_ppm(&img)).unwrap();
            prop_assert_eq!(back, img);
        }

        #[test]
        fn field_csv_round_trip(vals in proptest::collection::vec(-1e3f64..1e3, 12)) {
            let f = PolarField::new(1, 3, 4, vals).unwrap();
            let back = field_from_csv(&field_to_csv(&f)).unwrap();
            for (a, b) in back.data().iter().zip(f.data()) {
                prop_assert!((a - b).abs() <= 1e-5 * b.abs().max(1e-3));
            }
        }
    }
}
