use std::ops::Range;

/// Nodal (u, v, p) triple stored as one contiguous buffer `[u | v | p]`,
/// each component x-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub nx: usize,
    pub ny: usize,
    pub data: Vec<f64>,
}

impl StateField {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            data: vec![0.0; 3 * nx * ny],
        }
    }

    pub fn n(&self) -> usize {
        self.nx * self.ny
    }

    fn range(&self, c: usize) -> Range<usize> {
        let n = self.n();
        c * n..(c + 1) * n
    }

    pub fn comp(&self, c: usize) -> &[f64] {
        &self.data[self.range(c)]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        let r = self.range(c);
        &mut self.data[r]
    }

    pub fn u(&self) -> &[f64] {
        self.comp(0)
    }

    pub fn v(&self) -> &[f64] {
        self.comp(1)
    }

    pub fn p(&self) -> &[f64] {
        self.comp(2)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &StateField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &StateField) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }
}
