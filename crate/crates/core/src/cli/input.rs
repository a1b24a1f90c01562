//! Text formats read and written by the command-line tool.
//!
//! BAF input is either one value per line, or a tab-separated table with a
//! header naming a `baf` column and optionally `chrom` and `pos` columns.
//! Blank lines and lines starting with `#` are skipped in both layouts.

use std::collections::HashSet;
use std::path::Path;

use crate::cusum::{Label, Segment, Segmentation};
use crate::error::{Error, Result};
use crate::simulate::ResamplePools;

/// Parsed BAF input. `chroms` and `positions` are present only for tables
/// that carry those columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BafInput {
    pub values: Vec<f64>,
    pub chroms: Option<Vec<String>>,
    pub positions: Option<Vec<u64>>,
}

impl BafInput {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Half-open row ranges of consecutive rows sharing a chromosome; the
    /// whole input when there is no chromosome column.
    pub fn chrom_blocks(&self) -> Vec<(Option<String>, std::ops::Range<usize>)> {
        let Some(chroms) = &self.chroms else {
            return vec![(None, 0..self.values.len())];
        };
        let mut blocks: Vec<(Option<String>, std::ops::Range<usize>)> = Vec::new();
        for (i, c) in chroms.iter().enumerate() {
            match blocks.last_mut() {
                Some((Some(name), r)) if name == c => r.end = i + 1,
                _ => blocks.push((Some(c.clone()), i..i + 1)),
            }
        }
        blocks
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

fn parse_baf_value(field: &str, line: usize, snap_eps: f64) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("'{}' is not a number", field.trim()) })?;
    if !v.is_finite() || v < -snap_eps || v > 1.0 + snap_eps {
        return Err(Error::Parse { line, msg: format!("BAF value {v} is outside [0, 1]") });
    }
    Ok(v)
}

fn split_tab(line: &str) -> Vec<&str> {
    line.split('\t').map(str::trim).collect()
}

/// Parses BAF text in either layout.
pub fn parse_baf(text: &str, snap_eps: f64) -> Result<BafInput> {
    let mut lines = data_lines(text).peekable();
    let Some(&(first_no, first)) = lines.peek() else {
        return Ok(BafInput::default());
    };
    if first.trim().parse::<f64>().is_ok() {
        let values = lines
            .map(|(no, l)| parse_baf_value(l, no, snap_eps))
            .collect::<Result<Vec<_>>>()?;
        return Ok(BafInput { values, chroms: None, positions: None });
    }

    lines.next();
    let header = split_tab(first);
    let col = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let baf_col = col("baf")
        .ok_or_else(|| Error::Parse { line: first_no, msg: "header has no 'baf' column".into() })?;
    let chrom_col = col("chrom");
    let pos_col = col("pos");

    let mut out = BafInput {
        values: Vec::new(),
        chroms: chrom_col.map(|_| Vec::new()),
        positions: pos_col.map(|_| Vec::new()),
    };
    let mut seen_chroms: HashSet<String> = HashSet::new();
    let mut last: Option<(String, u64)> = None;
    for (no, l) in lines {
        let fields = split_tab(l);
        let get = |c: usize| {
            fields.get(c).copied().ok_or_else(|| Error::Parse {
                line: no,
                msg: format!("expected at least {} columns, found {}", c + 1, fields.len()),
            })
        };
        out.values.push(parse_baf_value(get(baf_col)?, no, snap_eps)?);
        let chrom = match chrom_col {
            Some(c) => get(c)?.to_string(),
            None => String::new(),
        };
        if let Some(chroms) = out.chroms.as_mut() {
            let is_new = last.as_ref().is_none_or(|(prev, _)| *prev != chrom);
            if is_new && !seen_chroms.insert(chrom.clone()) {
                return Err(Error::Parse { line: no, msg: format!("rows of chromosome '{chrom}' are not contiguous") });
            }
            chroms.push(chrom.clone());
        }
        if let (Some(c), Some(positions)) = (pos_col, out.positions.as_mut()) {
            let pos: u64 = get(c)?
                .parse()
                .map_err(|_| Error::Parse { line: no, msg: format!("position '{}' is not an integer", get(c).unwrap_or("")) })?;
            if let Some((prev_chrom, prev_pos)) = &last {
                if *prev_chrom == chrom && pos <= *prev_pos {
                    return Err(Error::Parse {
                        line: no,
                        msg: format!("position {pos} does not increase (previous {prev_pos})"),
                    });
                }
            }
            positions.push(pos);
            last = Some((chrom, pos));
        } else {
            last = Some((chrom, 0));
        }
    }
    Ok(out)
}

pub fn read_baf_file(path: &Path, snap_eps: f64) -> Result<BafInput> {
    parse_baf(&std::fs::read_to_string(path)?, snap_eps)
}

/// Per-observation labels from a TSV with an `index` column and a `label`
/// (or `truth`) column holding 0/1 or NonLOH/LOH. Indices must run 0..n.
pub fn parse_labels(text: &str) -> Result<Vec<Label>> {
    let mut lines = data_lines(text);
    let Some((hno, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let header = split_tab(header);
    let col = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let idx_col = col("index").ok_or_else(|| Error::Parse { line: hno, msg: "header has no 'index' column".into() })?;
    let label_col = col("label")
        .or_else(|| col("truth"))
        .ok_or_else(|| Error::Parse { line: hno, msg: "header has no 'label' column".into() })?;
    let mut labels = Vec::new();
    for (no, l) in lines {
        let f = split_tab(l);
        let (Some(idx), Some(lab)) = (f.get(idx_col), f.get(label_col)) else {
            return Err(Error::Parse { line: no, msg: "missing columns".into() });
        };
        let idx: usize = idx.parse().map_err(|_| Error::Parse { line: no, msg: format!("bad index '{idx}'") })?;
        if idx != labels.len() {
            return Err(Error::Parse { line: no, msg: format!("expected index {}, found {idx}", labels.len()) });
        }
        labels.push(lab.parse::<Label>().map_err(|e| Error::Parse { line: no, msg: e.to_string() })?);
    }
    Ok(labels)
}

/// Reads a segmentation TSV (`start\tend\tlabel\tn_obs`).
pub fn parse_segmentation(text: &str) -> Result<Segmentation> {
    let mut lines = data_lines(text);
    let Some((hno, header)) = lines.next() else {
        return Ok(Segmentation::from_segments(Vec::new()));
    };
    let header = split_tab(header);
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::Parse { line: hno, msg: format!("header has no '{name}' column") })
    };
    let (sc, ec, lc) = (col("start")?, col("end")?, col("label")?);
    let mut segments = Vec::new();
    for (no, l) in lines {
        let f = split_tab(l);
        let field = |c: usize| f.get(c).copied().ok_or_else(|| Error::Parse { line: no, msg: "missing columns".into() });
        let num = |c: usize| -> Result<usize> {
            let s = field(c)?;
            s.parse().map_err(|_| Error::Parse { line: no, msg: format!("bad index '{s}'") })
        };
        let label = field(lc)?.parse::<Label>().map_err(|e| Error::Parse { line: no, msg: e.to_string() })?;
        segments.push(Segment { start: num(sc)?, end: num(ec)?, label });
    }
    Ok(Segmentation::from_segments(segments))
}

/// Resampling pools from a TSV with `population` and `baf` columns;
/// population is `NonLOH`/`0` or `LOH`/`1`.
pub fn parse_pools(text: &str) -> Result<ResamplePools> {
    let mut lines = data_lines(text);
    let Some((hno, header)) = lines.next() else {
        return Ok(ResamplePools::default());
    };
    let header = split_tab(header);
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse { line: hno, msg: format!("header has no '{name}' column") })
    };
    let (pc, bc) = (col("population")?, col("baf")?);
    let mut pools = ResamplePools::default();
    for (no, l) in lines {
        let f = split_tab(l);
        let (Some(p), Some(b)) = (f.get(pc), f.get(bc)) else {
            return Err(Error::Parse { line: no, msg: "missing columns".into() });
        };
        let v = parse_baf_value(b, no, 0.0)?;
        match p.parse::<Label>().map_err(|e| Error::Parse { line: no, msg: e.to_string() })? {
            Label::NonLoh => pools.non_loh.push(v),
            Label::Loh => pools.loh.push(v),
        }
    }
    Ok(pools)
}
