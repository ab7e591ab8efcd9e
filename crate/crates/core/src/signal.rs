//! Trajectories, block-Hankel construction and the past/future split.
//!
//! Multi-channel signals are stored column-per-sample (`m x T`), and the
//! Hankel rows are stacked sample-major: all channels of the first sample of a
//! window, then all channels of the second, and so on.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Synchronized input, output and scheduling-variable samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `m x T`, one column per sample.
    pub u: DMatrix<f64>,
    /// `p x T`, one column per sample.
    pub y: DMatrix<f64>,
    pub rho: Vec<f64>,
    pub ts: f64,
}

impl Trajectory {
    pub fn new(u: DMatrix<f64>, y: DMatrix<f64>, rho: Vec<f64>, ts: f64) -> Result<Self> {
        let t = u.ncols();
        if y.ncols() != t || rho.len() != t {
            return Err(Error::Dimension(format!(
                "trajectory lengths differ: u={}, y={}, rho={}",
                t,
                y.ncols(),
                rho.len()
            )));
        }
        if u.nrows() == 0 || y.nrows() == 0 {
            return Err(Error::Dimension("m and p must be at least 1".into()));
        }
        if !(ts > 0.0) {
            return Err(Error::Config(format!("sampling period must be positive, got {ts}")));
        }
        Ok(Self { u, y, rho, ts })
    }

    /// Single-input single-output trajectory.
    pub fn from_scalar(u: &[f64], y: &[f64], rho: &[f64], ts: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_row_slice(1, u.len(), u),
            DMatrix::from_row_slice(1, y.len(), y),
            rho.to_vec(),
            ts,
        )
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn m(&self) -> usize {
        self.u.nrows()
    }

    pub fn p(&self) -> usize {
        self.y.nrows()
    }

    /// Copy of samples `start..end` without the scheduling variable.
    pub fn segment(&self, start: usize, end: usize) -> Segment {
        Segment {
            start,
            u: self.u.columns(start, end - start).into_owned(),
            y: self.y.columns(start, end - start).into_owned(),
        }
    }

    /// The whole trajectory as one segment.
    pub fn as_segment(&self) -> Segment {
        self.segment(0, self.len())
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Header `t,u,y,rho` for SISO data, `t,u0,..,y0,..,rho` otherwise.
    pub fn write_csv_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let (m, p) = (self.m(), self.p());
        let mut header = vec!["t".to_string()];
        if m == 1 {
            header.push("u".into());
        } else {
            header.extend((0..m).map(|i| format!("u{i}")));
        }
        if p == 1 {
            header.push("y".into());
        } else {
            header.extend((0..p).map(|i| format!("y{i}")));
        }
        header.push("rho".into());
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = format!("{:.6}", k as f64 * self.ts);
            for v in self.u.column(k).iter().chain(self.y.column(k).iter()) {
                row.push(',');
                row.push_str(&fmt_f64(*v));
            }
            row.push(',');
            row.push_str(&fmt_f64(self.rho[k]));
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    /// Read a trajectory written by [`Trajectory::write_csv`]. The sampling
    /// period is taken from the first two time stamps, or from `ts` when the
    /// file holds fewer than two rows.
    pub fn read_csv<P: AsRef<Path>>(path: P, ts: Option<f64>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv_from(BufReader::new(f), ts)
    }

    pub fn read_csv_from<R: BufRead>(reader: R, ts: Option<f64>) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty trajectory file".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.first() != Some(&"t") || cols.last() != Some(&"rho") {
            return Err(Error::Parse(format!("unexpected trajectory header `{header}`")));
        }
        let m = cols.iter().filter(|c| c.starts_with('u')).count();
        let p = cols.iter().filter(|c| c.starts_with('y')).count();
        if m + p + 2 != cols.len() || m == 0 || p == 0 {
            return Err(Error::Parse(format!("unexpected trajectory header `{header}`")));
        }
        let (mut t, mut u, mut y, mut rho) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 2)))?;
            if vals.len() != cols.len() {
                return Err(Error::Parse(format!(
                    "row {} has {} fields, expected {}",
                    lineno + 2,
                    vals.len(),
                    cols.len()
                )));
            }
            t.push(vals[0]);
            u.extend_from_slice(&vals[1..1 + m]);
            y.extend_from_slice(&vals[1 + m..1 + m + p]);
            rho.push(vals[1 + m + p]);
        }
        let ts = match (t.len(), ts) {
            (n, _) if n >= 2 => round6(t[1] - t[0]),
            (_, Some(ts)) => ts,
            _ => {
                return Err(Error::Parse(
                    "cannot infer sampling period from fewer than two rows".into(),
                ))
            }
        };
        let n = rho.len();
        Self::new(
            DMatrix::from_column_slice(m, n, &u),
            DMatrix::from_column_slice(p, n, &y),
            rho,
            ts,
        )
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// A contiguous slice of input/output samples, remembering where it started
/// in the source trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: usize,
    pub u: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.u.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.u.ncols() == 0
    }
}

/// Block-Hankel matrix with `r` block rows: block `(i, j)` is sample `i + j`.
pub fn build_hankel(data: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    let (d, len) = data.shape();
    if r == 0 {
        return Err(Error::Dimension("block-row count must be at least 1".into()));
    }
    if len < r {
        return Err(Error::Dimension(format!(
            "need at least {r} samples for {r} block rows, got {len}"
        )));
    }
    let c = len - r + 1;
    Ok(DMatrix::from_fn(d * r, c, |row, col| {
        data[(row % d, row / d + col)]
    }))
}

/// Past/future partitioned data matrices for one (possibly composite) region.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelSet {
    pub up: DMatrix<f64>,
    pub yp: DMatrix<f64>,
    pub uf: DMatrix<f64>,
    pub yf: DMatrix<f64>,
    pub t_ini: usize,
    pub horizon: usize,
}

/// Shape metadata; two sets with equal shapes are interchangeable in the
/// controller without rebuilding the optimization problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HankelShape {
    pub m: usize,
    pub p: usize,
    pub t_ini: usize,
    pub horizon: usize,
    pub columns: usize,
}

impl HankelSet {
    pub fn from_blocks(
        up: DMatrix<f64>,
        yp: DMatrix<f64>,
        uf: DMatrix<f64>,
        yf: DMatrix<f64>,
        t_ini: usize,
        horizon: usize,
    ) -> Result<Self> {
        let c = up.ncols();
        if yp.ncols() != c || uf.ncols() != c || yf.ncols() != c {
            return Err(Error::Dimension("Hankel blocks differ in column count".into()));
        }
        if t_ini == 0 || horizon == 0 {
            return Err(Error::Dimension("T_ini and N must be at least 1".into()));
        }
        let m = up.nrows() / t_ini;
        let p = yp.nrows() / t_ini;
        if m == 0
            || p == 0
            || up.nrows() != m * t_ini
            || yp.nrows() != p * t_ini
            || uf.nrows() != m * horizon
            || yf.nrows() != p * horizon
        {
            return Err(Error::Dimension(format!(
                "block row counts {}/{}/{}/{} inconsistent with T_ini={t_ini}, N={horizon}",
                up.nrows(),
                yp.nrows(),
                uf.nrows(),
                yf.nrows()
            )));
        }
        Ok(Self { up, yp, uf, yf, t_ini, horizon })
    }

    pub fn columns(&self) -> usize {
        self.up.ncols()
    }

    pub fn m(&self) -> usize {
        self.up.nrows() / self.t_ini
    }

    pub fn p(&self) -> usize {
        self.yp.nrows() / self.t_ini
    }

    pub fn shape(&self) -> HankelShape {
        HankelShape {
            m: self.m(),
            p: self.p(),
            t_ini: self.t_ini,
            horizon: self.horizon,
            columns: self.columns(),
        }
    }

    /// `[Up; Uf]`, the full input Hankel matrix.
    pub fn input_matrix(&self) -> DMatrix<f64> {
        stack_rows(&self.up, &self.uf)
    }

    /// `[Yp; Yf]`, the full output Hankel matrix.
    pub fn output_matrix(&self) -> DMatrix<f64> {
        stack_rows(&self.yp, &self.yf)
    }

    /// Restrict all four blocks to the given columns, in order.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        Self {
            up: self.up.select_columns(idx),
            yp: self.yp.select_columns(idx),
            uf: self.uf.select_columns(idx),
            yf: self.yf.select_columns(idx),
            t_ini: self.t_ini,
            horizon: self.horizon,
        }
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.t_ini != other.t_ini
            || self.horizon != other.horizon
            || self.m() != other.m()
            || self.p() != other.p()
        {
            return Err(Error::Dimension("cannot concatenate Hankel sets of different shape".into()));
        }
        Ok(Self {
            up: hcat(&self.up, &other.up),
            yp: hcat(&self.yp, &other.yp),
            uf: hcat(&self.uf, &other.uf),
            yf: hcat(&self.yf, &other.yf),
            t_ini: self.t_ini,
            horizon: self.horizon,
        })
    }
}

pub(crate) fn stack_rows(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

pub(crate) fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Mosaic-Hankel construction: one Hankel block of depth `t_ini + horizon`
/// per segment, concatenated in segment order and split into past/future.
pub fn build_hankel_set(segments: &[Segment], t_ini: usize, horizon: usize) -> Result<HankelSet> {
    let depth = t_ini + horizon;
    if t_ini == 0 || horizon == 0 {
        return Err(Error::Dimension("T_ini and N must be at least 1".into()));
    }
    let first = segments
        .first()
        .ok_or_else(|| Error::Dimension("no segments given".into()))?;
    let (m, p) = (first.u.nrows(), first.y.nrows());
    let mut total = 0;
    for (i, s) in segments.iter().enumerate() {
        if s.u.nrows() != m || s.y.nrows() != p || s.y.ncols() != s.u.ncols() {
            return Err(Error::Dimension(format!("segment {i} has inconsistent channel counts")));
        }
        if s.len() < depth {
            return Err(Error::SegmentTooShort {
                index: i,
                len: s.len(),
                required: depth,
            });
        }
        total += s.len() - depth + 1;
    }
    let mut hu = DMatrix::zeros(m * depth, total);
    let mut hy = DMatrix::zeros(p * depth, total);
    let mut col = 0;
    for s in segments {
        let bu = build_hankel(&s.u, depth)?;
        let by = build_hankel(&s.y, depth)?;
        let c = bu.ncols();
        hu.columns_mut(col, c).copy_from(&bu);
        hy.columns_mut(col, c).copy_from(&by);
        col += c;
    }
    HankelSet::from_blocks(
        hu.rows(0, m * t_ini).into_owned(),
        hy.rows(0, p * t_ini).into_owned(),
        hu.rows(m * t_ini, m * horizon).into_owned(),
        hy.rows(p * t_ini, p * horizon).into_owned(),
        t_ini,
        horizon,
    )
}

/// How surplus columns are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ColumnPolicy {
    First,
    #[default]
    Uniform,
}

impl std::str::FromStr for ColumnPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(ColumnPolicy::First),
            "uniform" => Ok(ColumnPolicy::Uniform),
            _ => Err(Error::Config(format!("unknown column policy `{s}`"))),
        }
    }
}

impl std::fmt::Display for ColumnPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ColumnPolicy::First => "first",
            ColumnPolicy::Uniform => "uniform",
        })
    }
}

/// Column indices (0-based) kept when reducing `available` columns to `target`.
pub fn column_indices(available: usize, target: usize, policy: ColumnPolicy) -> Vec<usize> {
    match policy {
        ColumnPolicy::First => (0..target).collect(),
        // floor(j * available / target) is strictly increasing when available >= target
        ColumnPolicy::Uniform => (0..target).map(|j| j * available / target).collect(),
    }
}

pub fn truncate_columns(h: &HankelSet, target: usize, policy: ColumnPolicy) -> Result<HankelSet> {
    let c = h.columns();
    if c < target {
        return Err(Error::InsufficientColumns {
            available: c,
            required: target,
        });
    }
    if c == target {
        return Ok(h.clone());
    }
    Ok(h.select_columns(&column_indices(c, target, policy)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PersistencyReport {
    pub rank: usize,
    pub required_rank: usize,
    pub is_pe: bool,
}

pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Numerical rank of a matrix: singular values at or above `tol * sigma_max`.
pub fn numerical_rank(a: &DMatrix<f64>, tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv: DVector<f64> = a.clone().singular_values();
    let smax = sv.max();
    if !(smax > 0.0) {
        return 0;
    }
    sv.iter().filter(|&&s| s >= tol * smax).count()
}

/// Persistency-of-excitation check on the stacked input matrix `[Up; Uf]`.
pub fn check_persistency(h: &HankelSet, tol: f64) -> PersistencyReport {
    let required_rank = h.m() * (h.t_ini + h.horizon);
    let rank = numerical_rank(&h.input_matrix(), tol);
    PersistencyReport {
        rank,
        required_rank,
        is_pe: rank == required_rank && h.columns() >= required_rank,
    }
}
