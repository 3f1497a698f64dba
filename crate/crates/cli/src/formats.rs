//! Versioned text formats.
//!
//! * image CSV: `#version 1`, `#image W H`, then `H` rows of `W` values
//! * sinogram CSV: `#version 1`, `#geometry bins=N bin_width=W offset=O`,
//!   header `angle_deg,bin_0,...`, then one row per angle
//! * QUBO: `#version 1`, `#vars N`, `#offset X`, `#encoding ...`, `#dims W H`,
//!   `#layout p,k=v ...`, then `i j value` lines with `i <= j`
//!   (`i == j` is a linear term)
//! * assignment: `#version 1`, `#vars N`, then one line of 0/1 digits
//! * PGM: plain P2, maxval 255, scaled, with a version comment
//!
//! Reals are printed with Rust's shortest round-trip representation, so
//! reading a file back yields bitwise identical values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use qubo_ct::qubo::{Encoding, EncodingSpec, QuboModel, VarLayout};
use qubo_ct::{Assignment, AttenuationSpec, BinaryImage, GridImage, ProjectionGeometry, Sinogram};

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

const VERSION_LINE: &str = "#version 1";

/// Shortest representation that parses back to the same bits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:?}")
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

struct Lines<'a> {
    path: &'a Path,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, path: &'a Path) -> Self {
        Self {
            path,
            iter: text.lines().enumerate(),
            last: 0,
        }
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> CliError {
        CliError::Parse {
            path: self.path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    /// Next line and its 1-based number; error naming the line after the
    /// last one when the file ends early.
    fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.iter.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l))
            }
            None => Err(self.err(
                self.last + 1,
                format!("unexpected end of file, expected {what}"),
            )),
        }
    }

    fn expect_version(&mut self) -> Result<()> {
        let (n, l) = self.next_line("version line")?;
        let l = l.trim();
        match l.strip_prefix("#version ") {
            Some(v) if v.trim() == FORMAT_VERSION.to_string() => Ok(()),
            Some(v) => Err(self.err(n, format!("unsupported format version '{}'", v.trim()))),
            None => Err(self.err(n, format!("expected '{VERSION_LINE}'"))),
        }
    }

    fn keyword(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, l) = self.next_line(key)?;
        match l.trim().strip_prefix(key) {
            Some(rest) if rest.is_empty() || rest.starts_with(' ') => Ok((n, rest.trim())),
            _ => Err(self.err(n, format!("expected '{key}' header"))),
        }
    }
}

fn parse_num<T: std::str::FromStr>(lines: &Lines, line: usize, s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| lines.err(line, format!("invalid {what} '{s}'")))
}

fn kv<'a>(lines: &Lines, line: usize, field: &'a str, key: &str) -> Result<&'a str> {
    field
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| lines.err(line, format!("expected '{key}=...', got '{field}'")))
}

// ---- images ----

pub fn format_image(img: &GridImage) -> String {
    let mut out = format!("{VERSION_LINE}\n#image {} {}\n", img.width(), img.height());
    for row in img.values().chunks(img.width()) {
        let cells: Vec<String> = row.iter().map(|&v| fmt_real(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_image(text: &str, path: &Path) -> Result<GridImage> {
    let mut lines = Lines::new(text, path);
    lines.expect_version()?;
    let (n, dims) = lines.keyword("#image")?;
    let parts: Vec<&str> = dims.split_whitespace().collect();
    if parts.len() != 2 {
        return Err(lines.err(n, "expected '#image W H'"));
    }
    let w: usize = parse_num(&lines, n, parts[0], "width")?;
    let h: usize = parse_num(&lines, n, parts[1], "height")?;
    let mut values = Vec::with_capacity(w * h);
    for _ in 0..h {
        let (n, l) = lines.next_line("image row")?;
        let row: Vec<f64> = l
            .split(',')
            .map(|c| parse_num(&lines, n, c, "pixel value"))
            .collect::<Result<_>>()?;
        if row.len() != w {
            return Err(lines.err(n, format!("expected {w} values, got {}", row.len())));
        }
        values.extend(row);
    }
    GridImage::new(w, h, values).map_err(|e| lines.err(n, e.to_string()))
}

pub fn write_image(path: &Path, img: &GridImage) -> Result<()> {
    write_text(path, &format_image(img))
}

pub fn read_image(path: &Path) -> Result<GridImage> {
    parse_image(&read_text(path)?, path)
}

/// Plain PGM, values mapped linearly from `[min(0, lo), hi]` onto `0..=255`.
pub fn format_pgm(img: &GridImage) -> String {
    let lo = img.min().min(0.0);
    let hi = img.max();
    let mut out = format!(
        "P2\n# qubo-ct format version {FORMAT_VERSION}\n{} {}\n255\n",
        img.width(),
        img.height()
    );
    for row in img.values().chunks(img.width()) {
        let cells: Vec<String> = row
            .iter()
            .map(|&v| {
                let s = if hi > lo {
                    (255.0 * (v - lo) / (hi - lo)).round()
                } else {
                    0.0
                };
                (s as u32).to_string()
            })
            .collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_pgm(path: &Path, img: &GridImage) -> Result<()> {
    write_text(path, &format_pgm(img))
}

/// Reads a plain PGM as raw gray levels.
pub fn parse_pgm(text: &str, path: &Path) -> Result<GridImage> {
    let err = |line: usize, msg: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut tokens = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let (content, comment) = match l.find('#') {
            Some(p) => (&l[..p], Some(&l[p..])),
            None => (l, None),
        };
        if let Some(v) = comment.and_then(|c| c.trim().strip_prefix("# qubo-ct format version ")) {
            if v.trim() != FORMAT_VERSION.to_string() {
                return Err(err(
                    i + 1,
                    format!("unsupported format version '{}'", v.trim()),
                ));
            }
        }
        tokens.extend(content.split_whitespace().map(|t| (i + 1, t)));
    }
    let mut it = tokens.into_iter();
    let mut next = |what: &str| {
        it.next()
            .ok_or_else(|| err(text.lines().count() + 1, format!("missing {what}")))
    };
    let (n, magic) = next("magic")?;
    if magic != "P2" {
        return Err(err(n, format!("expected plain PGM 'P2', got '{magic}'")));
    }
    let mut num = |what: &str| -> Result<usize> {
        let (n, t) = next(what)?;
        t.parse()
            .map_err(|_| err(n, format!("invalid {what} '{t}'")))
    };
    let w = num("width")?;
    let h = num("height")?;
    let _maxval = num("maxval")?;
    let mut values = Vec::with_capacity(w * h);
    for _ in 0..w * h {
        values.push(num("pixel")? as f64);
    }
    GridImage::new(w, h, values).map_err(|e| err(0, e.to_string()))
}

/// Mask from a CSV or PGM file (by extension); nonzero pixels are set.
pub fn read_mask(path: &Path) -> Result<BinaryImage> {
    let text = read_text(path)?;
    let img = if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
    {
        parse_pgm(&text, path)?
    } else {
        parse_image(&text, path)?
    };
    Ok(img.above(0.0))
}

pub fn write_mask(dir: &Path, stem: &str, mask: &BinaryImage) -> Result<()> {
    let grid = mask.to_grid();
    write_image(&dir.join(format!("{stem}.csv")), &grid)?;
    write_pgm(&dir.join(format!("{stem}.pgm")), &grid)
}

pub fn write_image_pair(dir: &Path, stem: &str, img: &GridImage) -> Result<()> {
    write_image(&dir.join(format!("{stem}.csv")), img)?;
    write_pgm(&dir.join(format!("{stem}.pgm")), img)
}

// ---- sinograms ----

pub fn format_sinogram(s: &Sinogram) -> String {
    let g = s.geometry();
    let mut out = format!(
        "{VERSION_LINE}\n#geometry bins={} bin_width={} offset={}\nangle_deg",
        g.bin_count(),
        fmt_real(g.bin_width()),
        fmt_real(g.detector_offset())
    );
    for b in 0..g.bin_count() {
        let _ = write!(out, ",bin_{b}");
    }
    out.push('\n');
    for (a, row) in s.rows().enumerate() {
        out.push_str(&fmt_real(g.angles()[a]));
        for v in row {
            out.push(',');
            out.push_str(&fmt_real(*v));
        }
        out.push('\n');
    }
    out
}

pub fn parse_sinogram(text: &str, path: &Path) -> Result<Sinogram> {
    let mut lines = Lines::new(text, path);
    lines.expect_version()?;
    let (n, geo) = lines.keyword("#geometry")?;
    let fields: Vec<&str> = geo.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(lines.err(n, "expected '#geometry bins=N bin_width=W offset=O'"));
    }
    let bins: usize = parse_num(&lines, n, kv(&lines, n, fields[0], "bins")?, "bin count")?;
    let width: f64 = parse_num(
        &lines,
        n,
        kv(&lines, n, fields[1], "bin_width")?,
        "bin width",
    )?;
    let offset: f64 = parse_num(&lines, n, kv(&lines, n, fields[2], "offset")?, "offset")?;
    let (n, header) = lines.next_line("column header")?;
    let expected: Vec<String> = std::iter::once("angle_deg".to_string())
        .chain((0..bins).map(|b| format!("bin_{b}")))
        .collect();
    if header.trim() != expected.join(",") {
        return Err(lines.err(
            n,
            format!(
                "expected header 'angle_deg,bin_0,...,bin_{}'",
                bins.saturating_sub(1)
            ),
        ));
    }
    let mut angles = Vec::new();
    let mut values = Vec::new();
    let mut last = n;
    for (i, l) in lines.iter.by_ref() {
        let n = i + 1;
        last = n;
        if l.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = l.split(',').collect();
        if cells.len() != bins + 1 {
            return Err(Lines::new("", path).err(
                n,
                format!("expected {} columns, got {}", bins + 1, cells.len()),
            ));
        }
        let probe = Lines::new("", path);
        angles.push(parse_num::<f64>(&probe, n, cells[0], "angle")?);
        for c in &cells[1..] {
            values.push(parse_num::<f64>(&probe, n, c, "projection value")?);
        }
    }
    let err = |line: usize, e: qubo_ct::Error| CliError::Parse {
        path: path.to_path_buf(),
        line,
        msg: e.to_string(),
    };
    if angles.is_empty() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: last + 1,
            msg: "sinogram has no angle rows".into(),
        });
    }
    let geometry =
        ProjectionGeometry::new(angles, bins, width, offset).map_err(|e| err(last, e))?;
    Sinogram::new(geometry, values).map_err(|e| err(last, e))
}

pub fn write_sinogram(path: &Path, s: &Sinogram) -> Result<()> {
    write_text(path, &format_sinogram(s))
}

pub fn read_sinogram(path: &Path) -> Result<Sinogram> {
    parse_sinogram(&read_text(path)?, path)
}

// ---- QUBO ----

/// A model together with the encoding needed to decode its solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboFile {
    pub model: QuboModel,
    pub encoding: EncodingSpec,
}

fn format_encoding(enc: &EncodingSpec) -> String {
    match enc.encoding() {
        Encoding::Segmentation(spec) => {
            let levels: Vec<String> = spec.levels().iter().map(|&l| fmt_real(l)).collect();
            format!(
                "segmentation levels={} penalty={}",
                levels.join(","),
                fmt_real(spec.one_hot_penalty())
            )
        }
        Encoding::Reconstruction { bits } => format!("reconstruction bits={bits}"),
    }
}

pub fn format_qubo(file: &QuboFile) -> String {
    let m = &file.model;
    let layout = m.layout();
    let (w, h) = file.encoding.dims();
    let mut out = String::new();
    let _ = writeln!(out, "{VERSION_LINE}");
    let _ = writeln!(out, "#vars {}", m.num_vars());
    let _ = writeln!(out, "#offset {}", fmt_real(m.offset()));
    let _ = writeln!(out, "#encoding {}", format_encoding(&file.encoding));
    let _ = writeln!(out, "#dims {w} {h}");
    out.push_str("#layout");
    for p in 0..layout.pixels {
        for k in 0..layout.levels {
            let _ = write!(out, " {p},{k}={}", layout.var(p, k));
        }
    }
    out.push('\n');
    let quad = m.quadratic();
    let mut q = 0;
    for (i, &l) in m.linear().iter().enumerate() {
        if l != 0.0 {
            let _ = writeln!(out, "{i} {i} {}", fmt_real(l));
        }
        while q < quad.len() && quad[q].0 == i {
            let (a, b, v) = quad[q];
            let _ = writeln!(out, "{a} {b} {}", fmt_real(v));
            q += 1;
        }
    }
    out
}

pub fn parse_qubo(text: &str, path: &Path) -> Result<QuboFile> {
    let mut lines = Lines::new(text, path);
    lines.expect_version()?;
    let (n, vars) = lines.keyword("#vars")?;
    let num_vars: usize = parse_num(&lines, n, vars, "variable count")?;
    let (n, off) = lines.keyword("#offset")?;
    let offset: f64 = parse_num(&lines, n, off, "offset")?;
    let (enc_line, enc) = lines.keyword("#encoding")?;
    let (n, dims) = lines.keyword("#dims")?;
    let d: Vec<&str> = dims.split_whitespace().collect();
    if d.len() != 2 {
        return Err(lines.err(n, "expected '#dims W H'"));
    }
    let w: usize = parse_num(&lines, n, d[0], "width")?;
    let h: usize = parse_num(&lines, n, d[1], "height")?;
    let encoding = parse_encoding(&lines, enc_line, enc, w, h)?;
    if encoding.num_vars() != num_vars {
        return Err(lines.err(
            enc_line,
            format!(
                "encoding implies {} variables, header says {num_vars}",
                encoding.num_vars()
            ),
        ));
    }
    let layout = encoding.layout();
    let (n, table) = lines.keyword("#layout")?;
    let mut count = 0;
    for entry in table.split_whitespace() {
        let bad = || lines.err(n, format!("malformed layout entry '{entry}'"));
        let (pk, v) = entry.split_once('=').ok_or_else(bad)?;
        let (p, k) = pk.split_once(',').ok_or_else(bad)?;
        let (p, k, v): (usize, usize, usize) = (
            p.parse().map_err(|_| bad())?,
            k.parse().map_err(|_| bad())?,
            v.parse().map_err(|_| bad())?,
        );
        if p >= layout.pixels || k >= layout.levels || layout.var(p, k) != v {
            return Err(lines.err(
                n,
                format!("layout entry '{entry}' does not match pixel-major numbering"),
            ));
        }
        count += 1;
    }
    if count != num_vars {
        return Err(lines.err(
            n,
            format!("layout lists {count} variables, expected {num_vars}"),
        ));
    }

    let mut linear = vec![0.0; num_vars];
    let mut seen_linear = vec![false; num_vars];
    let mut quadratic: Vec<(usize, usize, f64)> = Vec::new();
    let mut last = n;
    for (i, l) in lines.iter.by_ref() {
        let n = i + 1;
        last = n;
        if l.trim().is_empty() {
            continue;
        }
        let probe = Lines::new("", path);
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(probe.err(n, "expected 'i j value'"));
        }
        let a: usize = parse_num(&probe, n, parts[0], "variable index")?;
        let b: usize = parse_num(&probe, n, parts[1], "variable index")?;
        let v: f64 = parse_num(&probe, n, parts[2], "coefficient")?;
        if a > b || b >= num_vars {
            return Err(probe.err(
                n,
                format!("index pair ({a}, {b}) must satisfy i <= j < {num_vars}"),
            ));
        }
        if a == b {
            if seen_linear[a] {
                return Err(probe.err(n, format!("duplicate linear term for {a}")));
            }
            seen_linear[a] = true;
            linear[a] = v;
        } else {
            if quadratic.last().is_some_and(|&(x, y, _)| (x, y) >= (a, b)) {
                return Err(probe.err(n, "quadratic terms must be sorted and unique"));
            }
            quadratic.push((a, b, v));
        }
    }
    let model =
        QuboModel::from_parts(linear, quadratic, offset, VarLayout { ..layout }).map_err(|e| {
            CliError::Parse {
                path: path.to_path_buf(),
                line: last,
                msg: e.to_string(),
            }
        })?;
    Ok(QuboFile { model, encoding })
}

fn parse_encoding(lines: &Lines, n: usize, s: &str, w: usize, h: usize) -> Result<EncodingSpec> {
    let fields: Vec<&str> = s.split_whitespace().collect();
    let wrap = |e: qubo_ct::Error| lines.err(n, e.to_string());
    match fields.as_slice() {
        ["segmentation", levels, penalty] => {
            let levels: Vec<f64> = kv(lines, n, levels, "levels")?
                .split(',')
                .map(|l| parse_num(lines, n, l, "level"))
                .collect::<Result<_>>()?;
            let penalty: f64 = parse_num(lines, n, kv(lines, n, penalty, "penalty")?, "penalty")?;
            EncodingSpec::segmentation(AttenuationSpec::new(levels, penalty).map_err(wrap)?, w, h)
                .map_err(wrap)
        }
        ["reconstruction", bits] => {
            let bits: usize = parse_num(lines, n, kv(lines, n, bits, "bits")?, "bit count")?;
            EncodingSpec::reconstruction(bits, w, h).map_err(wrap)
        }
        _ => Err(lines.err(n, format!("unknown encoding '{s}'"))),
    }
}

pub fn write_qubo(path: &Path, file: &QuboFile) -> Result<()> {
    write_text(path, &format_qubo(file))
}

pub fn read_qubo(path: &Path) -> Result<QuboFile> {
    parse_qubo(&read_text(path)?, path)
}

// ---- assignments ----

pub fn format_assignment(x: &Assignment) -> String {
    let bits: String = x
        .bits()
        .iter()
        .map(|&b| if b == 1 { '1' } else { '0' })
        .collect();
    format!("{VERSION_LINE}\n#vars {}\n{bits}\n", x.len())
}

pub fn parse_assignment(text: &str, path: &Path) -> Result<Assignment> {
    let mut lines = Lines::new(text, path);
    lines.expect_version()?;
    let (n, vars) = lines.keyword("#vars")?;
    let num_vars: usize = parse_num(&lines, n, vars, "variable count")?;
    let (n, body) = if num_vars == 0 {
        (n, "")
    } else {
        lines.next_line("bit string")?
    };
    let bits: Vec<u8> = body
        .trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(lines.err(n, format!("invalid bit '{c}'"))),
        })
        .collect::<Result<_>>()?;
    if bits.len() != num_vars {
        return Err(lines.err(n, format!("expected {num_vars} bits, got {}", bits.len())));
    }
    Assignment::new(bits).map_err(|e| lines.err(n, e.to_string()))
}

pub fn write_assignment(path: &Path, x: &Assignment) -> Result<()> {
    write_text(path, &format_assignment(x))
}

pub fn read_assignment(path: &Path) -> Result<Assignment> {
    parse_assignment(&read_text(path)?, path)
}
