//! Binary PGM (P5) images of maps, one byte per cell, row 0 on top.

use std::io::{BufRead, Write};

use ogm_core::freespace::{BinaryMap, EdgeIndexGrid};
use ogm_core::grid::ProbabilityMap;

use crate::error::FormatError;

/// Gray image with 8-bit pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// `round(255 * P(occupied))` per cell, so 128 is unknown.
pub fn from_probability(map: &ProbabilityMap) -> Gray {
    Gray {
        width: map.width,
        height: map.height,
        pixels: map.data.iter().map(|&p| (255.0 * p).round().clamp(0.0, 255.0) as u8).collect(),
    }
}

/// Free cells white, occupied black.
pub fn from_binary(map: &BinaryMap) -> Gray {
    Gray {
        width: map.width(),
        height: map.height(),
        pixels: map.data().iter().map(|&free| if free { 255 } else { 0 }).collect(),
    }
}

/// Edge cells shaded by sort key (darker = earlier), everything else white.
pub fn from_edges(grid: &EdgeIndexGrid) -> Gray {
    let max = grid.keys().iter().copied().max().unwrap_or(0).max(1);
    Gray {
        width: grid.width(),
        height: grid.height(),
        pixels: grid
            .keys()
            .iter()
            .map(|&k| if k == 0 { 255 } else { (200 * u64::from(k) / u64::from(max)) as u8 })
            .collect(),
    }
}

pub fn write<W: Write>(mut out: W, img: &Gray) -> Result<(), FormatError> {
    write!(out, "P5\n{} {}\n255\n", img.width, img.height)?;
    out.write_all(&img.pixels)?;
    out.flush()?;
    Ok(())
}

fn token<R: BufRead>(input: &mut R) -> Result<String, FormatError> {
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    loop {
        if input.read(&mut byte)? == 0 {
            break;
        }
        let c = byte[0];
        if c == b'#' && tok.is_empty() {
            let mut skip = Vec::new();
            input.read_until(b'\n', &mut skip)?;
            continue;
        }
        if c.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(c as char);
    }
    if tok.is_empty() {
        return Err(FormatError::invalid("truncated PGM header"));
    }
    Ok(tok)
}

pub fn read<R: BufRead>(mut input: R) -> Result<Gray, FormatError> {
    if token(&mut input)? != "P5" {
        return Err(FormatError::invalid("not a binary PGM (P5)"));
    }
    let mut num = |name: &str| -> Result<usize, FormatError> {
        let t = token(&mut input)?;
        t.parse().map_err(|_| FormatError::invalid(format!("bad PGM {name} `{t}`")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval != 255 {
        return Err(FormatError::invalid(format!("unsupported maxval {maxval}")));
    }
    let mut pixels = vec![0u8; width * height];
    input.read_exact(&mut pixels)?;
    Ok(Gray { width, height, pixels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_is_128() {
        let img = from_probability(&ProbabilityMap::filled(3, 2, 0.5));
        assert!(img.pixels.iter().all(|&p| p == 128));
    }

    #[test]
    fn roundtrip() {
        let img = Gray {
            width: 3,
            height: 2,
            pixels: vec![0, 10, 32, 128, 200, 255],
        };
        let mut buf = Vec::new();
        write(&mut buf, &img).unwrap();
        assert!(buf.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(read(buf.as_slice()).unwrap(), img);
    }
}
