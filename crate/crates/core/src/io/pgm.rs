//! Binary PGM grids with a sibling metadata file.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::map::{Cell, OccupancyGrid};

use super::ply::write_file;

/// PGM bytes; the first image row is the maximum-y grid row.
pub fn encode_pgm(grid: &OccupancyGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.width, grid.height).into_bytes();
    out.reserve(grid.cells.len());
    for j in (0..grid.height).rev() {
        out.extend(grid.cells[j * grid.width..(j + 1) * grid.width].iter().map(|&c| c as u8));
    }
    out
}

pub fn metadata_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("yaml")
}

pub fn encode_metadata(grid: &OccupancyGrid, image: &str) -> String {
    format!(
        "image: {image}\nresolution: {}\norigin: [{}, {}, 0.0]\noccupied_value: {}\nfree_value: {}\nunknown_value: {}\nnegate: 0\n",
        grid.resolution,
        grid.origin.0,
        grid.origin.1,
        Cell::Occupied as u8,
        Cell::Free as u8,
        Cell::Unknown as u8
    )
}

/// Writes `path` and its `.yaml` sibling.
pub fn write_grid(path: &Path, grid: &OccupancyGrid) -> Result<()> {
    write_file(path, &encode_pgm(grid))?;
    let image = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    write_file(&metadata_path(path), encode_metadata(grid, &image).as_bytes())
}

/// Reads a grid written by [`write_grid`]. Resolution and origin come from the
/// sibling metadata when present, else default to 1 and (0, 0).
pub fn read_grid(path: &Path) -> Result<OccupancyGrid> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0;
    let mut fields = Vec::new();
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::parse(path, 1, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" {
        return Err(Error::parse(path, 1, "not a binary PGM"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(path, 1, format!("bad header value `{s}`")));
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 255 {
        return Err(Error::parse(path, 1, "maxval must be 255"));
    }
    let body = bytes.get(pos..pos + w * h).ok_or_else(|| Error::parse(path, 1, "truncated PGM body"))?;
    let mut cells = vec![Cell::Unknown; w * h];
    for (row, chunk) in body.chunks(w).enumerate() {
        let j = h - 1 - row;
        for (i, &b) in chunk.iter().enumerate() {
            cells[j * w + i] =
                Cell::from_byte(b).ok_or_else(|| Error::parse(path, 1, format!("unexpected cell value {b}")))?;
        }
    }
    let mut resolution = 1.0;
    let mut origin = (0.0, 0.0);
    let meta = metadata_path(path);
    if let Ok(text) = std::fs::read_to_string(&meta) {
        for (k, line) in text.lines().enumerate() {
            if let Some(v) = line.strip_prefix("resolution:") {
                resolution = v.trim().parse().map_err(|_| Error::parse(&meta, k + 1, "bad resolution"))?;
            } else if let Some(v) = line.strip_prefix("origin:") {
                let v: Vec<f64> = v
                    .trim()
                    .trim_start_matches('[')
                    .trim_end_matches(']')
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::parse(&meta, k + 1, "bad origin"))?;
                if v.len() < 2 {
                    return Err(Error::parse(&meta, k + 1, "bad origin"));
                }
                origin = (v[0], v[1]);
            }
        }
    }
    Ok(OccupancyGrid {
        width: w,
        height: h,
        resolution,
        origin,
        cells,
    })
}
