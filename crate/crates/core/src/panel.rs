//! Balanced panel model: entity/period index, entity-by-period series with an
//! explicit missing marker, stacked design matrices and the demeaning
//! transforms the estimators are built on.

use std::collections::HashSet;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Cell, Error, Result};

/// Ordered entities (partner countries) and consecutive integer periods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelIndex {
    entities: Vec<String>,
    periods: Vec<i32>,
}

impl PanelIndex {
    /// `N >= 2` entities with unique non-empty ids and `T >= 3` consecutive periods.
    pub fn new(entities: Vec<String>, first_period: i32, n_periods: usize) -> Result<Self> {
        let periods = (0..n_periods).map(|t| first_period + t as i32).collect();
        Self::from_periods(entities, periods)
    }

    pub fn from_periods(entities: Vec<String>, periods: Vec<i32>) -> Result<Self> {
        if entities.len() < 2 {
            return Err(Error::Panel(format!(
                "at least 2 entities required, got {}",
                entities.len()
            )));
        }
        if periods.len() < 3 {
            return Err(Error::Panel(format!(
                "at least 3 periods required, got {}",
                periods.len()
            )));
        }
        let mut seen = HashSet::new();
        for e in &entities {
            if e.is_empty() {
                return Err(Error::Panel("empty entity identifier".into()));
            }
            if !seen.insert(e.as_str()) {
                return Err(Error::Panel(format!("duplicate entity `{e}`")));
            }
        }
        if periods.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::Panel("periods must be consecutive integers".into()));
        }
        Ok(Self { entities, periods })
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn periods(&self) -> &[i32] {
        &self.periods
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_periods(&self) -> usize {
        self.periods.len()
    }

    pub fn entity_position(&self, id: &str) -> Option<usize> {
        self.entities.iter().position(|e| e == id)
    }

    pub fn period_position(&self, period: i32) -> Option<usize> {
        let first = *self.periods.first()?;
        let pos = period.checked_sub(first)?;
        (pos >= 0 && (pos as usize) < self.periods.len()).then_some(pos as usize)
    }

    pub fn cell(&self, entity: usize, period: usize) -> Cell {
        Cell {
            entity: self.entities[entity].clone(),
            period: self.periods[period],
        }
    }
}

/// An `N x T` series; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSeries {
    name: String,
    index: PanelIndex,
    values: Vec<Option<f64>>,
}

impl PanelSeries {
    /// `values` is entity-major, time-minor and must hold `N * T` cells.
    /// Present values must be finite.
    pub fn new(name: impl Into<String>, index: PanelIndex, values: Vec<Option<f64>>) -> Result<Self> {
        let name = name.into();
        let expected = index.n_entities() * index.n_periods();
        if values.len() != expected {
            return Err(Error::Panel(format!(
                "series `{name}` has {} cells, index requires {expected}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| matches!(v, Some(x) if !x.is_finite())) {
            let t = index.n_periods();
            return Err(Error::Panel(format!(
                "series `{name}` holds a non-finite value at {}",
                index.cell(pos / t, pos % t)
            )));
        }
        Ok(Self { name, index, values })
    }

    pub fn from_complete(name: impl Into<String>, index: PanelIndex, values: &[f64]) -> Result<Self> {
        Self::new(name, index, values.iter().copied().map(Some).collect())
    }

    /// Builds a series from a closure over (entity, period) positions.
    pub fn from_fn(
        name: impl Into<String>,
        index: PanelIndex,
        mut f: impl FnMut(usize, usize) -> Option<f64>,
    ) -> Result<Self> {
        let (n, t) = (index.n_entities(), index.n_periods());
        let mut values = Vec::with_capacity(n * t);
        for i in 0..n {
            for s in 0..t {
                values.push(f(i, s));
            }
        }
        Self::new(name, index, values)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn index(&self) -> &PanelIndex {
        &self.index
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn get(&self, entity: usize, period: usize) -> Option<f64> {
        self.values[entity * self.index.n_periods() + period]
    }

    pub fn entity_values(&self, entity: usize) -> &[Option<f64>] {
        let t = self.index.n_periods();
        &self.values[entity * t..(entity + 1) * t]
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Row `i` of the `N x T` matrix; fails on the first missing cell.
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        let (n, t) = (self.index.n_entities(), self.index.n_periods());
        let mut out = DMatrix::zeros(n, t);
        for i in 0..n {
            for s in 0..t {
                out[(i, s)] = self.get(i, s).ok_or_else(|| {
                    Error::Panel(format!(
                        "series `{}` is missing {}",
                        self.name,
                        self.index.cell(i, s)
                    ))
                })?;
            }
        }
        Ok(out)
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Element-wise map; missing stays missing.
    pub fn map(&self, name: impl Into<String>, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(name, self.index.clone(), self.values.iter().map(|v| v.map(&f)).collect())
    }

    /// Fallible element-wise map; the closure receives the cell position.
    pub fn try_map(
        &self,
        name: impl Into<String>,
        f: impl Fn(f64, usize, usize) -> Result<f64>,
    ) -> Result<Self> {
        let t = self.index.n_periods();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(pos, v)| v.map(|x| f(x, pos / t, pos % t)).transpose())
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, self.index.clone(), values)
    }

    /// Fallible element-wise combination; missing in either input propagates.
    pub fn try_zip(
        &self,
        other: &PanelSeries,
        name: impl Into<String>,
        f: impl Fn(f64, f64, usize, usize) -> Result<f64>,
    ) -> Result<Self> {
        if self.index != other.index {
            return Err(Error::Panel(format!(
                "series `{}` and `{}` have different indices",
                self.name, other.name
            )));
        }
        let t = self.index.n_periods();
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(pos, (a, b))| match (a, b) {
                (Some(a), Some(b)) => f(*a, *b, pos / t, pos % t).map(Some),
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, self.index.clone(), values)
    }
}

/// Value at `(i, t)` becomes the input at `(i, t - k)`; the first `k` periods
/// of every entity are missing.
pub fn lag(series: &PanelSeries, k: usize) -> Result<PanelSeries> {
    let t = series.index.n_periods();
    if k == 0 || k >= t {
        return Err(Error::InvalidArgument(format!(
            "lag order must satisfy 1 <= k < T = {t}, got {k}"
        )));
    }
    PanelSeries::from_fn(
        format!("L{k}.{}", series.name),
        series.index.clone(),
        |i, s| if s >= k { series.get(i, s - k) } else { None },
    )
}

/// Stacked regression data: one row per (entity, period) observation.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    y_name: String,
    y: DVector<f64>,
    names: Vec<String>,
    x: DMatrix<f64>,
    entity_of_row: Vec<usize>,
    period_of_row: Vec<i32>,
    entity_ids: Vec<String>,
    groups: Vec<Range<usize>>,
    degenerate: Vec<bool>,
}

impl DesignMatrix {
    /// Rows must be grouped by entity (each entity one contiguous block,
    /// entities numbered `0..N` in order of appearance) with strictly
    /// increasing periods inside a block.
    pub fn new(
        y_name: impl Into<String>,
        y: DVector<f64>,
        names: Vec<String>,
        x: DMatrix<f64>,
        entity_of_row: Vec<usize>,
        period_of_row: Vec<i32>,
    ) -> Result<Self> {
        let n = y.len();
        if x.nrows() != n || entity_of_row.len() != n || period_of_row.len() != n {
            return Err(Error::Panel("design matrix row counts disagree".into()));
        }
        if x.ncols() != names.len() {
            return Err(Error::Panel(format!(
                "{} columns but {} names",
                x.ncols(),
                names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Panel(format!("duplicate column name `{name}`")));
            }
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Panel("design matrix holds non-finite values".into()));
        }
        let mut groups: Vec<Range<usize>> = Vec::new();
        for r in 0..n {
            let e = entity_of_row[r];
            match groups.len() {
                len if e == len => groups.push(r..r + 1),
                len if len > 0 && e == len - 1 => {
                    if period_of_row[r] <= period_of_row[r - 1] {
                        return Err(Error::Panel(format!(
                            "periods not increasing within entity {e} at row {r}"
                        )));
                    }
                    groups[len - 1].end = r + 1;
                }
                _ => {
                    return Err(Error::Panel(format!(
                        "rows not grouped by entity at row {r}"
                    )))
                }
            }
        }
        let entity_ids = (0..groups.len()).map(|e| e.to_string()).collect();
        let degenerate = vec![false; names.len()];
        Ok(Self {
            y_name: y_name.into(),
            y,
            names,
            x,
            entity_of_row,
            period_of_row,
            entity_ids,
            groups,
            degenerate,
        })
    }

    /// Stacks the complete rows of `y` and `columns` (all on one index).
    /// Rows with any missing cell are dropped, which is how lagged regressors
    /// shorten the sample.
    pub fn from_series(y: &PanelSeries, columns: &[&PanelSeries]) -> Result<Self> {
        let index = y.index();
        for c in columns {
            if c.index() != index {
                return Err(Error::Panel(format!(
                    "column `{}` is not on the index of `{}`",
                    c.name(),
                    y.name()
                )));
            }
        }
        let (n, t) = (index.n_entities(), index.n_periods());
        let k = columns.len();
        let mut ys = Vec::with_capacity(n * t);
        let mut xs = Vec::with_capacity(n * t * k);
        let mut ent = Vec::with_capacity(n * t);
        let mut per = Vec::with_capacity(n * t);
        let mut kept_entities = Vec::new();
        for i in 0..n {
            let mut any = false;
            for s in 0..t {
                let Some(yv) = y.get(i, s) else { continue };
                let row: Option<Vec<f64>> = columns.iter().map(|c| c.get(i, s)).collect();
                let Some(row) = row else { continue };
                if !any {
                    kept_entities.push(index.entities()[i].clone());
                    any = true;
                }
                ys.push(yv);
                xs.extend(row);
                ent.push(kept_entities.len() - 1);
                per.push(index.periods()[s]);
            }
        }
        let rows = ys.len();
        let names = columns.iter().map(|c| c.name().to_string()).collect();
        let mut m = Self::new(
            y.name(),
            DVector::from_vec(ys),
            names,
            DMatrix::from_row_slice(rows, k, &xs),
            ent,
            per,
        )?;
        m.entity_ids = kept_entities;
        Ok(m)
    }

    /// A plain cross-section: every row its own entity, period 0.
    pub fn cross_section(
        y_name: impl Into<String>,
        y: DVector<f64>,
        names: Vec<String>,
        x: DMatrix<f64>,
    ) -> Result<Self> {
        let n = y.len();
        Self::new(y_name, y, names, x, (0..n).collect(), vec![0; n])
    }

    pub fn with_entity_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.groups.len() {
            return Err(Error::Panel("entity id count mismatch".into()));
        }
        self.entity_ids = ids;
        Ok(self)
    }

    pub fn y_name(&self) -> &str {
        &self.y_name
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn n_entities(&self) -> usize {
        self.groups.len()
    }

    pub fn entity_ids(&self) -> &[String] {
        &self.entity_ids
    }

    pub fn entity_of_row(&self) -> &[usize] {
        &self.entity_of_row
    }

    pub fn period_of_row(&self) -> &[i32] {
        &self.period_of_row
    }

    /// Row range of each entity block.
    pub fn groups(&self) -> &[Range<usize>] {
        &self.groups
    }

    /// Columns that became identically zero under a transform.
    pub fn degenerate(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn degenerate_names(&self) -> Vec<String> {
        self.names
            .iter()
            .zip(&self.degenerate)
            .filter(|(_, d)| **d)
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<DVector<f64>> {
        self.column_index(name).map(|j| self.x.column(j).into_owned())
    }

    /// True when every entity block has the same number of rows.
    pub fn is_balanced(&self) -> bool {
        self.groups.windows(2).all(|w| w[0].len() == w[1].len())
    }

    /// Keeps the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::InvalidArgument(format!("no column `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = self.clone();
        out.x = self.x.select_columns(&idx);
        out.names = idx.iter().map(|&j| self.names[j].clone()).collect();
        out.degenerate = idx.iter().map(|&j| self.degenerate[j]).collect();
        Ok(out)
    }

    /// Same rows with `y` replaced.
    pub fn with_y(&self, y: DVector<f64>) -> Result<Self> {
        if y.len() != self.n_rows() {
            return Err(Error::Panel("replacement y has the wrong length".into()));
        }
        let mut out = self.clone();
        out.y = y;
        Ok(out)
    }

    /// Keeps the rows whose flag is set; entity numbering is compacted.
    pub fn filter_rows(&self, keep: &[bool]) -> Result<Self> {
        let rows: Vec<usize> = (0..self.n_rows()).filter(|&r| keep[r]).collect();
        let mut ent = Vec::with_capacity(rows.len());
        let mut ids = Vec::new();
        let mut last: Option<usize> = None;
        for &r in &rows {
            let e = self.entity_of_row[r];
            if last != Some(e) {
                ids.push(self.entity_ids[e].clone());
                last = Some(e);
            }
            ent.push(ids.len() - 1);
        }
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.y[r]));
        let x = self.x.select_rows(&rows);
        let per = rows.iter().map(|&r| self.period_of_row[r]).collect();
        let mut out = Self::new(self.y_name.clone(), y, self.names.clone(), x, ent, per)?;
        out.entity_ids = ids;
        out.degenerate = self.degenerate.clone();
        Ok(out)
    }

    /// Appends columns, keeping row structure.
    pub fn with_columns(&self, names: &[String], cols: &DMatrix<f64>) -> Result<Self> {
        if cols.nrows() != self.n_rows() || cols.ncols() != names.len() {
            return Err(Error::Panel("appended columns have the wrong shape".into()));
        }
        let mut all_names = self.names.clone();
        all_names.extend(names.iter().cloned());
        let k = self.n_cols();
        let mut x = DMatrix::zeros(self.n_rows(), k + names.len());
        x.columns_mut(0, k).copy_from(&self.x);
        x.columns_mut(k, names.len()).copy_from(cols);
        let mut out = Self::new(
            self.y_name.clone(),
            self.y.clone(),
            all_names,
            x,
            self.entity_of_row.clone(),
            self.period_of_row.clone(),
        )?;
        out.entity_ids = self.entity_ids.clone();
        out.degenerate = self.degenerate.clone();
        out.degenerate.extend(std::iter::repeat_n(false, names.len()));
        Ok(out)
    }

    /// Entity means of `y` (first column) and every regressor: `N x (1 + k)`.
    pub fn entity_means(&self) -> DMatrix<f64> {
        let k = self.n_cols();
        let mut out = DMatrix::zeros(self.groups.len(), k + 1);
        for (e, g) in self.groups.iter().enumerate() {
            let len = g.len() as f64;
            out[(e, 0)] = self.y.rows_range(g.clone()).sum() / len;
            for j in 0..k {
                out[(e, j + 1)] = self.x.view((g.start, j), (g.len(), 1)).sum() / len;
            }
        }
        out
    }

    /// Row index of `(entity, period)` if present.
    pub fn row_of(&self, entity: usize, period: i32) -> Option<usize> {
        let g = self.groups.get(entity)?;
        let first = self.period_of_row[g.start];
        let off = period.checked_sub(first)?;
        if off < 0 {
            return None;
        }
        let r = g.start + off as usize;
        // blocks need not be gap-free, fall back to a scan
        if r < g.end && self.period_of_row[r] == period {
            return Some(r);
        }
        g.clone().find(|&r| self.period_of_row[r] == period)
    }
}

fn demean_by(m: &DesignMatrix, theta: &[f64]) -> DesignMatrix {
    let means = m.entity_means();
    let mut out = m.clone();
    for (e, g) in m.groups.iter().enumerate() {
        let th = theta[e];
        for r in g.clone() {
            out.y[r] = m.y[r] - th * means[(e, 0)];
            for j in 0..m.n_cols() {
                out.x[(r, j)] = m.x[(r, j)] - th * means[(e, j + 1)];
            }
        }
    }
    for j in 0..m.n_cols() {
        let scale = m.x.column(j).amax().max(1.0);
        let after = out.x.column(j).amax();
        if after <= 1e-10 * scale {
            out.degenerate[j] = true;
        }
    }
    out
}

/// Replaces `y` and every column by deviations from the entity mean.
/// Columns that are constant within every entity become zero and are
/// flagged degenerate.
pub fn within_transform(m: &DesignMatrix) -> Result<DesignMatrix> {
    if let Some((e, _)) = m.groups.iter().enumerate().find(|(_, g)| g.len() < 2) {
        return Err(Error::Panel(format!(
            "entity `{}` has a single row; within transform undefined",
            m.entity_ids[e]
        )));
    }
    Ok(demean_by(m, &vec![1.0; m.n_entities()]))
}

/// GLS quasi-demeaning `x_it - theta_i * mean_i(x)`, applied to `y` too.
pub fn quasi_demean(m: &DesignMatrix, theta_per_entity: &[f64]) -> Result<DesignMatrix> {
    if theta_per_entity.len() != m.n_entities() {
        return Err(Error::InvalidArgument(format!(
            "{} theta values for {} entities",
            theta_per_entity.len(),
            m.n_entities()
        )));
    }
    if let Some(th) = theta_per_entity.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidArgument(format!("theta {th} outside [0, 1]")));
    }
    Ok(demean_by(m, theta_per_entity))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(n: usize, t: usize) -> PanelIndex {
        PanelIndex::new((0..n).map(|i| format!("E{i}")).collect(), 2000, t).unwrap()
    }

    fn single_column(values: &[f64], n: usize, t: usize) -> DesignMatrix {
        let s = PanelSeries::from_complete("x", idx(n, t), values).unwrap();
        DesignMatrix::from_series(&s, &[&s]).unwrap()
    }

    #[test]
    fn index_invariants() {
        assert!(PanelIndex::new(vec!["A".into()], 2000, 5).is_err());
        assert!(PanelIndex::new(vec!["A".into(), "B".into()], 2000, 2).is_err());
        assert!(PanelIndex::new(vec!["A".into(), "A".into()], 2000, 3).is_err());
        assert!(PanelIndex::from_periods(vec!["A".into(), "B".into()], vec![1, 2, 4]).is_err());
        let i = idx(6, 14);
        assert_eq!((i.n_entities(), i.n_periods()), (6, 14));
        assert_eq!(i.period_position(2013), Some(13));
        assert_eq!(i.period_position(2014), None);
    }

    #[test]
    fn within_of_one_two_three() {
        let m = single_column(&[1.0, 2.0, 3.0, 10.0, 20.0, 30.0], 2, 3);
        let w = within_transform(&m).unwrap();
        let col: Vec<f64> = w.x().column(0).iter().copied().collect();
        assert_eq!(&col[..3], &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn time_invariant_column_is_flagged() {
        let m = single_column(&[5.0, 5.0, 5.0, 7.0, 7.0, 7.0], 2, 3);
        let w = within_transform(&m).unwrap();
        assert!(w.x().column(0).iter().all(|v| *v == 0.0));
        assert_eq!(w.degenerate_names(), vec!["x".to_string()]);
    }

    #[test]
    fn single_row_entity_rejected() {
        let m = DesignMatrix::new(
            "y",
            DVector::from_vec(vec![1.0, 2.0, 3.0]),
            vec!["x".into()],
            DMatrix::from_vec(3, 1, vec![1.0, 2.0, 3.0]),
            vec![0, 0, 1],
            vec![1, 2, 1],
        )
        .unwrap();
        assert!(within_transform(&m).is_err());
    }

    #[test]
    fn quasi_demean_hand_arithmetic() {
        let m = DesignMatrix::new(
            "y",
            DVector::from_vec(vec![2.0, 4.0, 1.0, 1.0]),
            vec!["x".into()],
            DMatrix::from_vec(4, 1, vec![2.0, 4.0, 1.0, 1.0]),
            vec![0, 0, 1, 1],
            vec![1, 2, 1, 2],
        )
        .unwrap();
        let q = quasi_demean(&m, &[0.5, 0.5]).unwrap();
        assert_eq!(q.x()[(0, 0)], 0.5);
        assert_eq!(q.x()[(1, 0)], 2.5);
        let same = quasi_demean(&m, &[0.0, 0.0]).unwrap();
        assert_eq!(same.x(), m.x());
        assert_eq!(same.y(), m.y());
        assert!(quasi_demean(&m, &[1.5, 0.0]).is_err());
        assert!(quasi_demean(&m, &[-0.1, 0.0]).is_err());
    }

    #[test]
    fn lag_shifts_within_entity() {
        let s = PanelSeries::from_complete("v", idx(2, 3), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let l = lag(&s, 1).unwrap();
        assert_eq!(l.entity_values(0), &[None, Some(1.0), Some(2.0)]);
        assert_eq!(l.entity_values(1), &[None, Some(4.0), Some(5.0)]);
        let l2 = lag(&s, 2).unwrap();
        assert_eq!(l2.entity_values(1), &[None, None, Some(4.0)]);
        assert!(lag(&s, 3).is_err());
        assert!(lag(&s, 0).is_err());
    }

    #[test]
    fn missing_propagates_through_zip() {
        let i = idx(2, 3);
        let a = PanelSeries::new("a", i.clone(), vec![Some(1.0), None, Some(3.0), Some(1.0), Some(1.0), Some(1.0)]).unwrap();
        let b = PanelSeries::from_complete("b", i, &[1.0; 6]).unwrap();
        let c = a.try_zip(&b, "c", |x, y, _, _| Ok(x + y)).unwrap();
        assert_eq!(c.get(0, 1), None);
        assert!(!c.is_complete());
        assert_eq!(c.missing_count(), 1);
    }

    #[test]
    fn from_series_drops_incomplete_rows() {
        let s = PanelSeries::from_complete("v", idx(2, 4), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        let l = lag(&s, 1).unwrap();
        let m = DesignMatrix::from_series(&s, &[&l]).unwrap();
        assert_eq!(m.n_rows(), 6);
        assert_eq!(m.period_of_row()[0], 2001);
        assert_eq!(m.entity_ids(), &["E0".to_string(), "E1".to_string()]);
        assert_eq!(m.row_of(1, 2002), Some(4));
    }
}
