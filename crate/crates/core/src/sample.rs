//! Point storage shared by sample sets, embeddings and herding pools.

use crate::error::{Error, Result};

/// Borrowed view of a single (optionally labeled) point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointRef<'a> {
    pub x: &'a [f64],
    pub y: Option<i64>,
}

impl<'a> PointRef<'a> {
    pub fn new(x: &'a [f64], y: Option<i64>) -> Self {
        Self { x, y }
    }

    pub fn unlabeled(x: &'a [f64]) -> Self {
        Self { x, y: None }
    }
}

impl<'a> From<&'a [f64]> for PointRef<'a> {
    fn from(x: &'a [f64]) -> Self {
        Self::unlabeled(x)
    }
}

/// Dense row-major list of points with uniform dimension and optional labels.
///
/// A cloud may be empty; an empty cloud has dimension 0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
    labels: Option<Vec<i64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>, labels: Option<Vec<i64>>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(points.len() * dim);
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch(dim, p.len()));
            }
            data.extend_from_slice(p);
        }
        Self::from_flat(dim, data, labels)
    }

    pub fn from_flat(dim: usize, data: Vec<f64>, labels: Option<Vec<i64>>) -> Result<Self> {
        if dim == 0 && !data.is_empty() {
            return Err(Error::InvalidArgument("zero-dimensional points".into()));
        }
        if dim > 0 && data.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "flat buffer of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        let n = if dim == 0 { 0 } else { data.len() / dim };
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "{} labels for {n} points",
                    l.len()
                )));
            }
        }
        Ok(Self { dim, data, labels })
    }

    /// One-dimensional cloud from scalars.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::from_flat(1, values.to_vec(), None)
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> Option<i64> {
        self.labels.as_ref().map(|l| l[i])
    }

    pub fn point(&self, i: usize) -> PointRef<'_> {
        PointRef {
            x: self.x(i),
            y: self.label(i),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = PointRef<'_>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    /// Copy of this cloud with the labels removed.
    pub fn without_labels(&self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.clone(),
            labels: None,
        }
    }

    /// Concatenates clouds. All must agree on dimension and on being labeled.
    pub fn concat<'a, I>(clouds: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a PointCloud>,
    {
        let mut out: Option<PointCloud> = None;
        for c in clouds {
            if c.is_empty() {
                continue;
            }
            match &mut out {
                None => out = Some(c.clone()),
                Some(acc) => acc.extend(c)?,
            }
        }
        Ok(out.unwrap_or_default())
    }

    pub(crate) fn extend(&mut self, other: &PointCloud) -> Result<()> {
        if other.is_empty() {
            return Ok(());
        }
        if self.is_empty() {
            *self = other.clone();
            return Ok(());
        }
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        match (&mut self.labels, &other.labels) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            (None, None) => {}
            _ => {
                return Err(Error::InvalidArgument(
                    "cannot mix labeled and unlabeled points".into(),
                ))
            }
        }
        self.data.extend_from_slice(&other.data);
        Ok(())
    }

    pub(crate) fn push(&mut self, p: PointRef<'_>) -> Result<()> {
        if self.data.is_empty() {
            self.dim = p.x.len();
            self.labels = p.y.map(|_| Vec::new());
        }
        if p.x.len() != self.dim {
            return Err(Error::DimensionMismatch(self.dim, p.x.len()));
        }
        match (&mut self.labels, p.y) {
            (Some(l), Some(y)) => l.push(y),
            (None, None) => {}
            _ => {
                return Err(Error::InvalidArgument(
                    "cannot mix labeled and unlabeled points".into(),
                ))
            }
        }
        self.data.extend_from_slice(p.x);
        Ok(())
    }

    /// Subset by index, preserving order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            data.extend_from_slice(self.x(i));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| idx.iter().map(|&i| l[i]).collect());
        Self {
            dim: self.dim,
            data,
            labels,
        }
    }

    /// Smallest and largest coordinate along axis `axis`.
    pub fn range(&self, axis: usize) -> Option<(f64, f64)> {
        if self.is_empty() {
            return None;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.len() {
            let v = self.x(i)[axis];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Some((lo, hi))
    }
}

/// Sample set observed at one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    time_index: i64,
    cloud: PointCloud,
}

impl SampleSet {
    pub fn new(time_index: i64, points: Vec<Vec<f64>>, labels: Option<Vec<i64>>) -> Result<Self> {
        Self::from_cloud(time_index, PointCloud::new(points, labels)?)
    }

    pub fn from_cloud(time_index: i64, cloud: PointCloud) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::Empty("sample set"));
        }
        Ok(Self { time_index, cloud })
    }

    pub fn from_scalars(time_index: i64, values: &[f64]) -> Result<Self> {
        Self::from_cloud(time_index, PointCloud::from_scalars(values)?)
    }

    pub fn time_index(&self) -> i64 {
        self.time_index
    }

    pub fn with_time_index(mut self, t: i64) -> Self {
        self.time_index = t;
        self
    }

    pub fn points(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn into_points(self) -> PointCloud {
        self.cloud
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.cloud.dim()
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.cloud.labels()
    }

    pub fn without_labels(&self) -> Self {
        Self {
            time_index: self.time_index,
            cloud: self.cloud.without_labels(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_points() {
        let err = PointCloud::new(vec![vec![0.0, 1.0], vec![2.0]], None).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(2, 1)));
    }

    #[test]
    fn rejects_misaligned_labels() {
        assert!(PointCloud::new(vec![vec![0.0], vec![1.0]], Some(vec![1])).is_err());
    }

    #[test]
    fn empty_sample_set_is_an_error() {
        assert!(matches!(
            SampleSet::new(0, vec![], None),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn push_and_concat_keep_labels_aligned() {
        let a = PointCloud::new(vec![vec![0.0], vec![1.0]], Some(vec![1, 2])).unwrap();
        let mut b = PointCloud::default();
        b.push(PointRef::new(&[5.0], Some(7))).unwrap();
        let c = PointCloud::concat([&a, &b]).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.labels().unwrap(), &[1, 2, 7]);
        assert!(b.push(PointRef::unlabeled(&[1.0])).is_err());
    }
}
