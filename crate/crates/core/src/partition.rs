//! Uniform partition of the scheduling range, per-region data extraction and
//! the regional/composite Hankel bank.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, RegionDeficit, Result};
use crate::par::Execution;
use crate::signal::{
    build_hankel_set, fmt_f64, truncate_columns, ColumnPolicy, HankelSet, Segment, Trajectory,
};

/// Uniform partition of `[l_lo, l_hi]` into `m_n` regions.
///
/// Region `i` is `[l_i, l_{i+1})`; the last region also contains `l_hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub l_lo: f64,
    pub l_hi: f64,
    pub m_n: usize,
}

pub fn make_partition(l_lo: f64, l_hi: f64, m_n: usize) -> Result<PartitionSpec> {
    if m_n == 0 {
        return Err(Error::Config("number of regions must be at least 1".into()));
    }
    if !(l_hi > l_lo) || !l_lo.is_finite() || !l_hi.is_finite() {
        return Err(Error::Config(format!(
            "scheduling limits must satisfy l_lo < l_hi, got [{l_lo}, {l_hi}]"
        )));
    }
    Ok(PartitionSpec { l_lo, l_hi, m_n })
}

impl PartitionSpec {
    pub fn width(&self) -> f64 {
        (self.l_hi - self.l_lo) / self.m_n as f64
    }

    /// Boundary `l_i` for `i in 0..=m_n`; the last one is exactly `l_hi`.
    pub fn boundary(&self, i: usize) -> f64 {
        if i >= self.m_n {
            self.l_hi
        } else {
            self.l_lo + i as f64 * self.width()
        }
    }

    pub fn boundaries(&self) -> Vec<f64> {
        (0..=self.m_n).map(|i| self.boundary(i)).collect()
    }

    pub fn bounds(&self, i: usize) -> (f64, f64) {
        (self.boundary(i), self.boundary(i + 1))
    }

    pub fn center(&self, i: usize) -> f64 {
        let (a, b) = self.bounds(i);
        0.5 * (a + b)
    }

    /// Region containing `rho`; out-of-range values are clamped to the end
    /// regions and NaN maps to region 0.
    pub fn region_of(&self, rho: f64) -> usize {
        if !(rho > self.l_lo) {
            return 0;
        }
        if rho >= self.l_hi {
            return self.m_n - 1;
        }
        let mut i = (((rho - self.l_lo) / self.width()).floor() as usize).min(self.m_n - 1);
        // settle rounding so membership agrees with `boundary`
        while i > 0 && rho < self.boundary(i) {
            i -= 1;
        }
        while i + 1 < self.m_n && rho >= self.boundary(i + 1) {
            i += 1;
        }
        i
    }

    /// Whether `rho` lies in the partitioned range.
    pub fn contains(&self, rho: f64) -> bool {
        self.l_lo <= rho && rho <= self.l_hi
    }

    /// Number of composite regions, `m_n - 1`.
    pub fn composite_count(&self) -> usize {
        self.m_n - 1
    }

    /// Composite `i` spans `[l_i, l_{i+2}]`.
    pub fn composite_bounds(&self, i: usize) -> (f64, f64) {
        (self.boundary(i), self.boundary(i + 2))
    }

    pub fn composite_center(&self, i: usize) -> f64 {
        self.boundary(i + 1)
    }
}

/// Maximal runs of samples in each region, keeping only runs of at least
/// `min_len` samples.
pub fn extract_region_segments(
    traj: &Trajectory,
    spec: &PartitionSpec,
    min_len: usize,
) -> Vec<Vec<Segment>> {
    let mut out = vec![Vec::new(); spec.m_n];
    for (region, start, end) in region_runs(&traj.rho, spec) {
        if end - start >= min_len {
            out[region].push(traj.segment(start, end));
        }
    }
    out
}

/// `(region, start, end)` of every maximal run, in time order. Samples
/// outside the partitioned range belong to no region and end a run.
pub fn region_runs(rho: &[f64], spec: &PartitionSpec) -> Vec<(usize, usize, usize)> {
    let mut runs = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    for (k, &r) in rho.iter().enumerate() {
        let reg = spec.contains(r).then(|| spec.region_of(r));
        match (current, reg) {
            (Some((c, _)), Some(g)) if c == g => {}
            (Some((c, start)), _) => {
                runs.push((c, start, k));
                current = reg.map(|g| (g, k));
            }
            (None, _) => current = reg.map(|g| (g, k)),
        }
    }
    if let Some((c, start)) = current {
        runs.push((c, start, rho.len()));
    }
    runs
}

/// Per-region sample count and qualifying-run statistics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionCoverage {
    pub region: usize,
    pub samples: usize,
    pub segments: usize,
    pub columns: usize,
}

/// Coverage of a trajectory over a partition for window depth `t_ini + n`.
pub fn coverage(traj: &Trajectory, spec: &PartitionSpec, depth: usize) -> Vec<RegionCoverage> {
    let mut cov: Vec<RegionCoverage> = (0..spec.m_n)
        .map(|region| RegionCoverage { region, samples: 0, segments: 0, columns: 0 })
        .collect();
    for (region, start, end) in region_runs(&traj.rho, spec) {
        let len = end - start;
        let c = &mut cov[region];
        c.samples += len;
        if len >= depth {
            c.segments += 1;
            c.columns += len - depth + 1;
        }
    }
    cov
}

/// Regional and composite data for one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionBank {
    pub spec: PartitionSpec,
    pub regional: Vec<HankelSet>,
    pub composite: Vec<HankelSet>,
    /// Raw column count per region before truncation.
    pub raw_columns: Vec<usize>,
    pub t_ini: usize,
    pub horizon: usize,
    pub c: usize,
    pub policy: ColumnPolicy,
}

impl RegionBank {
    pub fn composite_columns(&self) -> usize {
        2 * self.c
    }

    pub fn composite_bounds(&self, i: usize) -> (f64, f64) {
        self.spec.composite_bounds(i)
    }

    /// Rebuild composites from the regional sets.
    fn from_regional(
        spec: PartitionSpec,
        regional: Vec<HankelSet>,
        raw_columns: Vec<usize>,
        t_ini: usize,
        horizon: usize,
        c: usize,
        policy: ColumnPolicy,
    ) -> Result<Self> {
        let composite = regional
            .windows(2)
            .map(|w| w[0].concat(&w[1]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec, regional, composite, raw_columns, t_ini, horizon, c, policy })
    }

    /// Write `partition.json` and one CSV per block and region into `dir`.
    pub fn save<P: AsRef<Path>>(&self, dir: P) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let meta = BankMeta {
            l_lo: self.spec.l_lo,
            l_hi: self.spec.l_hi,
            m_n: self.spec.m_n,
            t_ini: self.t_ini,
            n: self.horizon,
            c: self.c,
            policy: self.policy,
            raw_columns: self.raw_columns.clone(),
        };
        std::fs::write(dir.join("partition.json"), serde_json::to_string_pretty(&meta)?)?;
        for (i, h) in self.regional.iter().enumerate() {
            for (name, m) in [("Up", &h.up), ("Yp", &h.yp), ("Uf", &h.uf), ("Yf", &h.yf)] {
                write_matrix_csv(&dir.join(format!("region_{i}_{name}.csv")), m)?;
            }
        }
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(dir: P) -> Result<Self> {
        let dir = dir.as_ref();
        let meta: BankMeta = serde_json::from_str(&std::fs::read_to_string(dir.join("partition.json"))?)
            .map_err(|e| Error::Parse(format!("partition.json: {e}")))?;
        let spec = make_partition(meta.l_lo, meta.l_hi, meta.m_n)?;
        let mut regional = Vec::with_capacity(meta.m_n);
        for i in 0..meta.m_n {
            let read = |name: &str| read_matrix_csv(&dir.join(format!("region_{i}_{name}.csv")));
            let h = HankelSet::from_blocks(read("Up")?, read("Yp")?, read("Uf")?, read("Yf")?, meta.t_ini, meta.n)?;
            if h.columns() != meta.c {
                return Err(Error::Parse(format!(
                    "region {i} has {} columns, partition.json says {}",
                    h.columns(),
                    meta.c
                )));
            }
            regional.push(h);
        }
        let raw = if meta.raw_columns.len() == meta.m_n {
            meta.raw_columns
        } else {
            vec![meta.c; meta.m_n]
        };
        Self::from_regional(spec, regional, raw, meta.t_ini, meta.n, meta.c, meta.policy)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BankMeta {
    l_lo: f64,
    l_hi: f64,
    m_n: usize,
    t_ini: usize,
    n: usize,
    c: usize,
    #[serde(default)]
    policy: ColumnPolicy,
    #[serde(default)]
    raw_columns: Vec<usize>,
}

/// Row-major CSV without header.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut s = String::with_capacity(m.len() * 20);
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|v| fmt_f64(*v)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut data = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let vals = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        match ncols {
            None => ncols = Some(vals.len()),
            Some(n) if n != vals.len() => {
                return Err(Error::Parse(format!("{}: ragged rows", path.display())))
            }
            _ => {}
        }
        data.extend(vals);
        nrows += 1;
    }
    Ok(DMatrix::from_row_slice(nrows, ncols.unwrap_or(0), &data))
}

/// Build the regional sets (each truncated to `c` columns) and the composites.
pub fn assemble_bank(
    traj: &Trajectory,
    spec: &PartitionSpec,
    t_ini: usize,
    horizon: usize,
    c: usize,
    policy: ColumnPolicy,
    exec: Execution,
) -> Result<RegionBank> {
    if c == 0 {
        return Err(Error::Config("column count c must be at least 1".into()));
    }
    let depth = t_ini + horizon;
    let segments = extract_region_segments(traj, spec, depth);
    let raw: Vec<usize> = segments
        .iter()
        .map(|segs| segs.iter().map(|s| s.len() - depth + 1).sum())
        .collect();
    let starved: Vec<RegionDeficit> = raw
        .iter()
        .enumerate()
        .filter(|(_, &a)| a < c)
        .map(|(region, &available)| RegionDeficit { region, available, required: c })
        .collect();
    if !starved.is_empty() {
        return Err(Error::StarvedRegions(starved));
    }
    let regional = exec
        .map(&segments, |segs| {
            build_hankel_set(segs, t_ini, horizon).and_then(|h| truncate_columns(&h, c, policy))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    RegionBank::from_regional(*spec, regional, raw, t_ini, horizon, c, policy)
}
