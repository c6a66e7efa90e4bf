//! Portable graymap (PGM) images, plain (P2) and raw (P5).

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct Gray {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major samples in `0..=maxval`.
    pub data: Vec<u16>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Plain,
    Raw,
}

impl Gray {
    /// Linearly maps `values` onto `0..=maxval`; a constant image maps to 0.
    pub fn from_values(values: &[f64], width: usize, height: usize, maxval: u16) -> Self {
        assert_eq!(values.len(), width * height);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let data = values
            .iter()
            .map(|&v| if span > 0.0 { ((v - lo) / span * f64::from(maxval)).round() as u16 } else { 0 })
            .collect();
        Gray { width, height, maxval, data }
    }

    /// Samples scaled to `[0, 1]`.
    pub fn values(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v) / f64::from(self.maxval)).collect()
    }

    pub fn encode(&self, enc: Encoding) -> Vec<u8> {
        match enc {
            Encoding::Plain => {
                let mut s = format!("P2\n{} {}\n{}\n", self.width, self.height, self.maxval);
                for row in self.data.chunks(self.width.max(1)) {
                    let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                    let _ = writeln!(s, "{}", line.join(" "));
                }
                s.into_bytes()
            }
            Encoding::Raw => {
                let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
                for &v in &self.data {
                    if self.maxval < 256 {
                        out.push(v as u8);
                    } else {
                        out.extend_from_slice(&v.to_be_bytes());
                    }
                }
                out
            }
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Gray, String> {
        let mut pos = 0;
        let magic = header_token(bytes, &mut pos)?;
        let raw = match magic.as_str() {
            "P2" => false,
            "P5" => true,
            other => return Err(format!("not a graymap (magic {other:?})")),
        };
        let width: usize = header_token(bytes, &mut pos)?.parse().map_err(|_| "bad width")?;
        let height: usize = header_token(bytes, &mut pos)?.parse().map_err(|_| "bad height")?;
        let maxval: u16 = header_token(bytes, &mut pos)?.parse().map_err(|_| "bad maxval")?;
        if maxval == 0 {
            return Err("maxval must be positive".into());
        }
        let count = width * height;
        let data = if raw {
            // exactly one whitespace byte after maxval
            pos += 1;
            let wide = maxval > 255;
            let need = count * if wide { 2 } else { 1 };
            let body = bytes.get(pos..pos + need).ok_or("truncated raster")?;
            if wide {
                body.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
            } else {
                body.iter().map(|&b| u16::from(b)).collect()
            }
        } else {
            let mut data = Vec::with_capacity(count);
            for _ in 0..count {
                data.push(header_token(bytes, &mut pos)?.parse().map_err(|_| "bad sample")?);
            }
            data
        };
        if data.iter().any(|&v| v > maxval) {
            return Err("sample exceeds maxval".into());
        }
        Ok(Gray { width, height, maxval, data })
    }
}

/// Next whitespace-separated token, skipping `#` comments.
fn header_token(bytes: &[u8], pos: &mut usize) -> Result<String, String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err("unexpected end of file".into());
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}
