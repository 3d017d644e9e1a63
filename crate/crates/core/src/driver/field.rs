use super::{Idx, IndexBox};

/// Read-only copy of one rank's local buffer (owned points plus ghosts),
/// addressed by global index.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub(crate) data: Vec<f64>,
    pub(crate) local: IndexBox,
}

impl Field {
    pub fn at(&self, g: Idx) -> f64 {
        self.data[self.local.offset(g)]
    }

    pub fn get(&self, g: Idx) -> Option<f64> {
        self.local.contains(g).then(|| self.at(g))
    }

    /// 1-D shorthand for `at([i, 0, 0])`.
    pub fn at1(&self, i: usize) -> f64 {
        self.at([i, 0, 0])
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn local_box(&self) -> IndexBox {
        self.local
    }
}

/// Mutable view of one rank's local buffer.
#[derive(Debug)]
pub struct FieldMut<'a> {
    pub(crate) data: &'a mut [f64],
    pub(crate) local: IndexBox,
}

impl FieldMut<'_> {
    pub fn at(&self, g: Idx) -> f64 {
        self.data[self.local.offset(g)]
    }

    pub fn set(&mut self, g: Idx, v: f64) {
        let o = self.local.offset(g);
        self.data[o] = v;
    }

    pub fn set1(&mut self, i: usize, v: f64) {
        self.set([i, 0, 0], v);
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        self.data
    }

    pub fn local_box(&self) -> IndexBox {
        self.local
    }
}
