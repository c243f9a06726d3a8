//! File formats.
//!
//! * Depth: 16-bit grayscale PNG in millimetres, `0` meaning no measurement.
//! * Normals: 3-channel PFM (`PF`). Boundaries: 1-channel PFM (`Pf`).
//! * Derivatives: 1-channel PFM of size `width x 8*height`; direction `k`
//!   (in [`Direction::ALL`](crate::Direction::ALL) order) occupies image rows
//!   `k*height .. (k+1)*height`.
//! * Colour: 8-bit RGB PNG.
//! * Intrinsics: one text line `fx fy cx cy width height`.
//! * Reports: CSV with a label column followed by numeric columns printed
//!   with 6 significant digits.
//!
//! PFM files are written little-endian (scale `-1.0`), rows bottom to top.
//! Values are stored as `f32`, so maps whose entries are representable in
//! `f32` (in particular anything read from a PFM file) round-trip bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, Write};
use std::path::Path;

use crate::geometry::CameraIntrinsics;
use crate::image::{BoundaryMap, ColorImage, DepthImage, DerivativeMap, NormalMap};
use crate::metrics::MetricsReport;
use crate::{Error, Result};

/// Largest depth a millimetre PNG can hold, in metres.
pub const MAX_PNG_DEPTH: f64 = 65.535;

/// Header of metric report CSV files.
pub const METRICS_HEADER: [&str; 9] = ["method", "n_eval", "rel", "rmse", "d105", "d110", "d125", "d125_2", "d125_3"];

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

// ---------------------------------------------------------------- PNG

/// Encodes depth as millimetres, rounding half up.
pub fn depth_to_millimetres(depth: &DepthImage) -> Result<Vec<u16>> {
    (0..depth.len())
        .map(|i| match depth.depth(i) {
            None => Ok(0),
            Some(d) if !(d.is_finite() && d > 0.0 && d <= MAX_PNG_DEPTH) => Err(Error::DepthOutOfRange(d)),
            Some(d) => {
                let mm = (d * 1000.0).round();
                // Depths under half a millimetre would collide with the invalid code.
                if mm < 1.0 {
                    Err(Error::DepthOutOfRange(d))
                } else {
                    Ok(mm as u16)
                }
            }
        })
        .collect()
}

pub fn depth_from_millimetres(width: usize, height: usize, mm: &[u16]) -> Result<DepthImage> {
    let data = mm.iter().map(|&m| m as f64 / 1000.0).collect();
    let valid = mm.iter().map(|&m| m != 0).collect();
    DepthImage::new(width, height, data, valid)
}

pub fn encode_depth_png<W: Write>(depth: &DepthImage, out: W) -> Result<()> {
    let mm = depth_to_millimetres(depth)?;
    let (w, h) = png_dims(depth.width(), depth.height())?;
    let mut encoder = png::Encoder::new(out, w, h);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Sixteen);
    let mut writer = encoder.write_header()?;
    let bytes: Vec<u8> = mm.iter().flat_map(|m| m.to_be_bytes()).collect();
    writer.write_image_data(&bytes)?;
    writer.finish()?;
    Ok(())
}

pub fn decode_depth_png<R: BufRead + Seek>(input: R) -> Result<DepthImage> {
    let (width, height, color, depth, bytes) = decode_png(input)?;
    if color != png::ColorType::Grayscale || depth != png::BitDepth::Sixteen {
        return Err(Error::format(
            "PNG",
            format!("expected 16-bit grayscale depth, got {color:?} {depth:?}"),
        ));
    }
    let mm: Vec<u16> = bytes.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    depth_from_millimetres(width, height, &mm)
}

pub fn write_depth_png(path: impl AsRef<Path>, depth: &DepthImage) -> Result<()> {
    // Encode first so that a range error leaves no partial file behind.
    let mut buf = Vec::new();
    encode_depth_png(depth, &mut buf)?;
    create(path.as_ref())?.write_all(&buf)?;
    Ok(())
}

pub fn read_depth_png(path: impl AsRef<Path>) -> Result<DepthImage> {
    decode_depth_png(open(path.as_ref())?)
}

/// Writes colour as 8-bit RGB, clamping to `[0, 1]`.
pub fn encode_color_png<W: Write>(color: &ColorImage, out: W) -> Result<()> {
    let (w, h) = png_dims(color.width(), color.height())?;
    let mut encoder = png::Encoder::new(out, w, h);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header()?;
    let bytes: Vec<u8> = color
        .data()
        .iter()
        .flat_map(|rgb| rgb.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8))
        .collect();
    writer.write_image_data(&bytes)?;
    writer.finish()?;
    Ok(())
}

/// Reads 8-bit RGB or RGBA (alpha ignored) or grayscale.
pub fn decode_color_png<R: BufRead + Seek>(input: R) -> Result<ColorImage> {
    let (width, height, color, depth, bytes) = decode_png(input)?;
    if depth != png::BitDepth::Eight {
        return Err(Error::format("PNG", format!("expected 8-bit colour, got {depth:?}")));
    }
    let channels = match color {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => return Err(Error::format("PNG", format!("unsupported colour type {other:?}"))),
    };
    let to_f = |b: u8| b as f32 / 255.0;
    let data = bytes
        .chunks_exact(channels)
        .map(|c| if channels < 3 { [to_f(c[0]); 3] } else { [to_f(c[0]), to_f(c[1]), to_f(c[2])] })
        .collect();
    ColorImage::new(width, height, data)
}

pub fn write_color_png(path: impl AsRef<Path>, color: &ColorImage) -> Result<()> {
    let mut buf = Vec::new();
    encode_color_png(color, &mut buf)?;
    create(path.as_ref())?.write_all(&buf)?;
    Ok(())
}

pub fn read_color_png(path: impl AsRef<Path>) -> Result<ColorImage> {
    decode_color_png(open(path.as_ref())?)
}

fn png_dims(width: usize, height: usize) -> Result<(u32, u32)> {
    match (u32::try_from(width), u32::try_from(height)) {
        (Ok(w), Ok(h)) if w > 0 && h > 0 => Ok((w, h)),
        _ => Err(Error::format("PNG", format!("cannot store a {width}x{height} image"))),
    }
}

type DecodedPng = (usize, usize, png::ColorType, png::BitDepth, Vec<u8>);

fn decode_png<R: BufRead + Seek>(input: R) -> Result<DecodedPng> {
    let mut decoder = png::Decoder::new(input);
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info()?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format("PNG", "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf)?;
    if info.color_type == png::ColorType::Indexed {
        return Err(Error::format("PNG", "palette images are not supported"));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, info.color_type, info.bit_depth, buf))
}

// ---------------------------------------------------------------- PFM

/// A decoded PFM image: `channels` interleaved floats per pixel, rows top to
/// bottom.
#[derive(Clone, Debug, PartialEq)]
pub struct Pfm {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Pfm {
    pub fn encode<W: Write>(&self, mut out: W) -> Result<()> {
        let magic = match self.channels {
            1 => "Pf",
            3 => "PF",
            c => return Err(Error::format("PFM", format!("{c} channels is not 1 or 3"))),
        };
        let row_len = self.width * self.channels;
        if self.data.len() != row_len * self.height {
            return Err(Error::format("PFM", "data length does not match dimensions"));
        }
        write!(out, "{magic}\n{} {}\n-1.0\n", self.width, self.height)?;
        let mut bytes = Vec::with_capacity(self.data.len() * 4);
        for row in (0..self.height).rev() {
            for x in &self.data[row * row_len..(row + 1) * row_len] {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
        out.write_all(&bytes)?;
        Ok(())
    }

    pub fn decode<R: Read>(mut input: R) -> Result<Pfm> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let mut pos = 0;
        let mut token = || -> Result<String> {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos || pos == bytes.len() {
                return Err(Error::format("PFM", "truncated header"));
            }
            let t = String::from_utf8_lossy(&bytes[start..pos]).into_owned();
            // Exactly one whitespace byte separates each header token.
            pos += 1;
            Ok(t)
        };
        let channels = match token()?.as_str() {
            "PF" => 3,
            "Pf" => 1,
            other => return Err(Error::format("PFM", format!("bad magic {other:?}"))),
        };
        let mut dim = || -> Result<usize> {
            let t = token()?;
            t.parse()
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| Error::format("PFM", format!("bad dimension {t:?}")))
        };
        let width = dim()?;
        let height = dim()?;
        let scale_token = token()?;
        let scale: f32 = scale_token
            .parse()
            .ok()
            .filter(|s: &f32| *s != 0.0 && s.is_finite())
            .ok_or_else(|| Error::format("PFM", format!("bad scale {scale_token:?}")))?;
        let body = &bytes[pos..];
        let row_len = width * channels;
        let expected = row_len
            .checked_mul(height)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::format("PFM", "dimensions overflow"))?;
        if body.len() != expected {
            return Err(Error::format(
                "PFM",
                format!("expected {expected} data bytes, found {}", body.len()),
            ));
        }
        let little = scale < 0.0;
        let mut data = vec![0f32; row_len * height];
        for (file_row, chunk) in body.chunks_exact(row_len * 4).enumerate() {
            let row = height - 1 - file_row;
            for (x, b) in data[row * row_len..(row + 1) * row_len].iter_mut().zip(chunk.chunks_exact(4)) {
                let b = [b[0], b[1], b[2], b[3]];
                *x = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
            }
        }
        Ok(Pfm {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.encode(&mut buf)?;
        create(path.as_ref())?.write_all(&buf)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Pfm> {
        Pfm::decode(open(path.as_ref())?)
    }

    fn expect_channels(self, channels: usize) -> Result<Pfm> {
        if self.channels == channels {
            Ok(self)
        } else {
            Err(Error::format(
                "PFM",
                format!("expected {channels} channel(s), found {}", self.channels),
            ))
        }
    }
}

impl From<&NormalMap> for Pfm {
    fn from(n: &NormalMap) -> Pfm {
        Pfm {
            width: n.width(),
            height: n.height(),
            channels: 3,
            data: n.data().iter().flat_map(|v| v.map(|c| c as f32)).collect(),
        }
    }
}

impl From<&BoundaryMap> for Pfm {
    fn from(b: &BoundaryMap) -> Pfm {
        Pfm {
            width: b.width(),
            height: b.height(),
            channels: 1,
            data: b.data().iter().map(|&x| x as f32).collect(),
        }
    }
}

impl From<&DerivativeMap> for Pfm {
    fn from(d: &DerivativeMap) -> Pfm {
        let n = d.width() * d.height();
        let mut data = vec![0f32; 8 * n];
        for (i, deltas) in d.data().iter().enumerate() {
            for (k, &x) in deltas.iter().enumerate() {
                data[k * n + i] = x as f32;
            }
        }
        Pfm {
            width: d.width(),
            height: 8 * d.height(),
            channels: 1,
            data,
        }
    }
}

impl TryFrom<Pfm> for NormalMap {
    type Error = Error;

    fn try_from(p: Pfm) -> Result<NormalMap> {
        let p = p.expect_channels(3)?;
        let data = p
            .data
            .chunks_exact(3)
            .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
            .collect();
        NormalMap::new(p.width, p.height, data)
    }
}

impl TryFrom<Pfm> for BoundaryMap {
    type Error = Error;

    fn try_from(p: Pfm) -> Result<BoundaryMap> {
        let p = p.expect_channels(1)?;
        BoundaryMap::new(p.width, p.height, p.data.iter().map(|&x| x as f64).collect())
    }
}

impl TryFrom<Pfm> for DerivativeMap {
    type Error = Error;

    fn try_from(p: Pfm) -> Result<DerivativeMap> {
        let p = p.expect_channels(1)?;
        if p.height % 8 != 0 {
            return Err(Error::format(
                "PFM",
                format!("derivative map height {} is not a multiple of 8", p.height),
            ));
        }
        let height = p.height / 8;
        let n = p.width * height;
        let data = (0..n)
            .map(|i| std::array::from_fn(|k| p.data[k * n + i] as f64))
            .collect();
        DerivativeMap::new(p.width, height, data)
    }
}

pub fn write_normals_pfm(path: impl AsRef<Path>, normals: &NormalMap) -> Result<()> {
    Pfm::from(normals).write(path)
}

pub fn read_normals_pfm(path: impl AsRef<Path>) -> Result<NormalMap> {
    Pfm::read(path)?.try_into()
}

pub fn write_boundary_pfm(path: impl AsRef<Path>, boundary: &BoundaryMap) -> Result<()> {
    Pfm::from(boundary).write(path)
}

pub fn read_boundary_pfm(path: impl AsRef<Path>) -> Result<BoundaryMap> {
    Pfm::read(path)?.try_into()
}

pub fn write_derivatives_pfm(path: impl AsRef<Path>, derivs: &DerivativeMap) -> Result<()> {
    Pfm::from(derivs).write(path)
}

pub fn read_derivatives_pfm(path: impl AsRef<Path>) -> Result<DerivativeMap> {
    Pfm::read(path)?.try_into()
}

// ---------------------------------------------------------------- intrinsics

pub fn format_intrinsics(k: &CameraIntrinsics) -> String {
    format!("{} {} {} {} {} {}", k.fx, k.fy, k.cx, k.cy, k.width, k.height)
}

pub fn parse_intrinsics(text: &str) -> Result<CameraIntrinsics> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() != 6 {
        return Err(Error::format(
            "intrinsics",
            format!("expected 6 values `fx fy cx cy width height`, found {}", tokens.len()),
        ));
    }
    let float = |t: &str| -> Result<f64> {
        t.parse()
            .map_err(|_| Error::format("intrinsics", format!("not a number: {t:?}")))
    };
    let int = |t: &str| -> Result<usize> {
        t.parse()
            .map_err(|_| Error::format("intrinsics", format!("not an image size: {t:?}")))
    };
    CameraIntrinsics::new(
        float(tokens[0])?,
        float(tokens[1])?,
        float(tokens[2])?,
        float(tokens[3])?,
        int(tokens[4])?,
        int(tokens[5])?,
    )
}

pub fn write_intrinsics(path: impl AsRef<Path>, k: &CameraIntrinsics) -> Result<()> {
    std::fs::write(path, format_intrinsics(k) + "\n")?;
    Ok(())
}

pub fn read_intrinsics(path: impl AsRef<Path>) -> Result<CameraIntrinsics> {
    parse_intrinsics(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------- CSV

/// `%g`-style formatting with 6 significant digits.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub values: Vec<f64>,
}

/// A CSV report: one label column, then numeric columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportTable {
    pub header: Vec<String>,
    pub rows: Vec<ReportRow>,
}

impl ReportTable {
    pub fn new(header: &[&str]) -> Self {
        ReportTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn metrics() -> Self {
        ReportTable::new(&METRICS_HEADER)
    }

    pub fn push(&mut self, label: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() + 1 != self.header.len() {
            return Err(Error::format(
                "CSV",
                format!("row has {} values for {} columns", values.len() + 1, self.header.len()),
            ));
        }
        self.rows.push(ReportRow {
            label: label.into(),
            values,
        });
        Ok(())
    }

    pub fn push_metrics(&mut self, label: impl Into<String>, m: &MetricsReport) -> Result<()> {
        let mut values = vec![m.n_eval as f64, m.rel, m.rmse];
        values.extend(m.delta);
        self.push(label, values)
    }

    /// Column index of `name` among the numeric columns.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().skip(1).position(|h| h == name)
    }

    pub fn encode<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            let mut record = vec![row.label.clone()];
            record.extend(row.values.iter().map(|&x| format_number(x)));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn decode<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        if header.is_empty() {
            return Err(Error::format("CSV", "missing header"));
        }
        let mut table = ReportTable { header, rows: Vec::new() };
        for record in r.records() {
            let record = record?;
            let label = record.get(0).unwrap_or_default().to_string();
            let values = record
                .iter()
                .skip(1)
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::format("CSV", format!("not a number: {t:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            table.push(label, values)?;
        }
        Ok(table)
    }

    /// Reads the metric columns of a row written by [`push_metrics`](Self::push_metrics).
    pub fn metrics_row(&self, index: usize) -> Result<MetricsReport> {
        if self.header.iter().map(String::as_str).ne(METRICS_HEADER) {
            return Err(Error::format("CSV", "not a metrics report"));
        }
        let v = &self.rows[index].values;
        Ok(MetricsReport {
            n_eval: v[0] as usize,
            rel: v[1],
            rmse: v[2],
            delta: [v[3], v[4], v[5], v[6], v[7]],
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        self.encode(create(path.as_ref())?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        ReportTable::decode(open(path.as_ref())?)
    }
}
