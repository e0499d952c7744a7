//! Colored point clouds in PLY (`x y z` as float32, `red green blue` as
//! uchar), binary little-endian or ASCII.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f32; 3]>,
    pub colors: Vec<[u8; 3]>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, p: [f32; 3], c: [u8; 3]) {
        self.points.push(p);
        self.colors.push(c);
    }

    pub fn extend(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
        self.colors.extend_from_slice(&other.colors);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    BinaryLittleEndian,
    Ascii,
}

fn header(encoding: Encoding, n: usize) -> String {
    let fmt = match encoding {
        Encoding::BinaryLittleEndian => "binary_little_endian",
        Encoding::Ascii => "ascii",
    };
    format!(
        "ply\nformat {fmt} 1.0\nelement vertex {n}\nproperty float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n"
    )
}

pub fn encode(cloud: &PointCloud, encoding: Encoding) -> Vec<u8> {
    let mut out = header(encoding, cloud.len()).into_bytes();
    match encoding {
        Encoding::BinaryLittleEndian => {
            out.reserve(15 * cloud.len());
            for (p, c) in cloud.points.iter().zip(&cloud.colors) {
                for v in p {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out.extend_from_slice(c);
            }
        }
        Encoding::Ascii => {
            let mut s = String::new();
            for (p, c) in cloud.points.iter().zip(&cloud.colors) {
                let _ = writeln!(s, "{} {} {} {} {} {}", p[0], p[1], p[2], c[0], c[1], c[2]);
            }
            out.extend_from_slice(s.as_bytes());
        }
    }
    out
}

pub fn write(path: &Path, cloud: &PointCloud, encoding: Encoding) -> Result<()> {
    std::fs::write(path, encode(cloud, encoding)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<PointCloud> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Parses files with exactly the vertex layout written by [`encode`].
pub fn decode(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    let corrupt = |reason: &str| Error::CorruptHeader { path: path.to_path_buf(), reason: reason.into() };
    let marker = b"end_header\n";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| corrupt("missing end_header"))?
        + marker.len();
    let text = std::str::from_utf8(&bytes[..end]).map_err(|_| corrupt("header is not text"))?;
    let mut lines = text.lines();
    if lines.next() != Some("ply") {
        return Err(corrupt("missing ply magic"));
    }
    let mut encoding = None;
    let mut count = None;
    let mut props = Vec::new();
    for line in lines {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["format", "binary_little_endian", "1.0"] => encoding = Some(Encoding::BinaryLittleEndian),
            ["format", "ascii", "1.0"] => encoding = Some(Encoding::Ascii),
            ["format", ..] => return Err(corrupt("unsupported format")),
            ["element", "vertex", n] => count = Some(n.parse::<usize>().map_err(|_| corrupt("bad vertex count"))?),
            ["element", ..] => return Err(corrupt("unsupported element")),
            ["property", ty, name] => props.push((ty.to_string(), name.to_string())),
            ["comment", ..] | ["end_header"] | [] => {}
            _ => return Err(corrupt("unrecognized header line")),
        }
    }
    let expected = [("float", "x"), ("float", "y"), ("float", "z"), ("uchar", "red"), ("uchar", "green"), ("uchar", "blue")];
    if props.len() != expected.len() || props.iter().zip(expected).any(|((t, n), (et, en))| t != et || n != en) {
        return Err(corrupt("unsupported vertex properties"));
    }
    let encoding = encoding.ok_or_else(|| corrupt("missing format"))?;
    let n = count.ok_or_else(|| corrupt("missing vertex element"))?;
    let body = &bytes[end..];
    let inconsistent = |reason: String| Error::InconsistentDimensions { path: path.to_path_buf(), reason };
    let mut cloud = PointCloud::default();
    match encoding {
        Encoding::BinaryLittleEndian => {
            if body.len() != 15 * n {
                return Err(inconsistent(format!("{} payload bytes for {n} vertices", body.len())));
            }
            for rec in body.chunks_exact(15) {
                let f = |i: usize| f32::from_le_bytes(rec[4 * i..4 * i + 4].try_into().unwrap());
                cloud.push([f(0), f(1), f(2)], [rec[12], rec[13], rec[14]]);
            }
        }
        Encoding::Ascii => {
            let text = std::str::from_utf8(body).map_err(|_| inconsistent("body is not text".into()))?;
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let w: Vec<&str> = line.split_whitespace().collect();
                let parse_err = || Error::Parse { path: path.to_path_buf(), reason: format!("bad vertex line '{line}'") };
                if w.len() != 6 {
                    return Err(parse_err());
                }
                let f = |i: usize| w[i].parse::<f32>().map_err(|_| parse_err());
                let u = |i: usize| w[i].parse::<u8>().map_err(|_| parse_err());
                cloud.push([f(0)?, f(1)?, f(2)?], [u(3)?, u(4)?, u(5)?]);
            }
            if cloud.len() != n {
                return Err(inconsistent(format!("{} vertex lines, header says {n}", cloud.len())));
            }
        }
    }
    Ok(cloud)
}

/// Color for a mask label: gray for static, a fixed palette otherwise.
pub fn label_color(label: u32) -> [u8; 3] {
    const PALETTE: [[u8; 3]; 8] = [
        [230, 25, 75],
        [60, 180, 75],
        [0, 130, 200],
        [245, 130, 48],
        [145, 30, 180],
        [70, 240, 240],
        [240, 50, 230],
        [210, 245, 60],
    ];
    if label == 0 {
        [160, 160, 160]
    } else {
        PALETTE[(label as usize - 1) % PALETTE.len()]
    }
}
