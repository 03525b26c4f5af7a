use std::collections::BTreeMap;

use crate::relcore::PredId;

/// Sparse binary relation under the closed-world assumption: absent cells are 0.
///
/// Cells are sorted row-major. Each cell carries an order key (a timestamp or
/// the source line number) used by truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryRelation {
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
    row_ptr: Vec<usize>,
    /// Cell indices sorted by (col, row).
    col_order: Vec<usize>,
    col_ptr: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub row: u32,
    pub col: u32,
    pub value: f64,
    pub key: i64,
}

impl BinaryRelation {
    /// Builds the relation, rejecting duplicate or out-of-range cells.
    pub fn new(rows: usize, cols: usize, mut cells: Vec<Cell>) -> Result<Self, String> {
        for c in &cells {
            if c.row as usize >= rows || c.col as usize >= cols {
                return Err(format!("cell ({}, {}) outside {rows}x{cols}", c.row, c.col));
            }
        }
        cells.sort_by_key(|c| (c.row, c.col));
        if let Some(w) = cells
            .windows(2)
            .find(|w| w[0].row == w[1].row && w[0].col == w[1].col)
        {
            return Err(format!("duplicate cell ({}, {})", w[0].row, w[0].col));
        }
        let mut row_ptr = vec![0usize; rows + 1];
        for c in &cells {
            row_ptr[c.row as usize + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut col_order: Vec<usize> = (0..cells.len()).collect();
        col_order.sort_by_key(|&i| (cells[i].col, cells[i].row));
        let mut col_ptr = vec![0usize; cols + 1];
        for c in &cells {
            col_ptr[c.col as usize + 1] += 1;
        }
        for i in 0..cols {
            col_ptr[i + 1] += col_ptr[i];
        }
        Ok(Self {
            rows,
            cols,
            cells,
            row_ptr,
            col_order,
            col_ptr,
        })
    }

    /// A fully materialized relation from a row-major dense matrix.
    pub fn from_dense(rows: usize, cols: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), rows * cols);
        let cells = (0..rows * cols)
            .map(|i| Cell {
                row: (i / cols) as u32,
                col: (i % cols) as u32,
                value: values[i],
                key: i as i64,
            })
            .collect();
        Self::new(rows, cols, cells).expect("dense cells are unique and in range")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn row(&self, r: usize) -> &[Cell] {
        &self.cells[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    pub fn col(&self, c: usize) -> impl Iterator<Item = &Cell> {
        self.col_order[self.col_ptr[c]..self.col_ptr[c + 1]]
            .iter()
            .map(move |&i| &self.cells[i])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = self.row(r);
        match row.binary_search_by_key(&(c as u32), |cell| cell.col) {
            Ok(i) => row[i].value,
            Err(_) => 0.0,
        }
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for c in &self.cells {
            out[c.row as usize * self.cols + c.col as usize] = c.value;
        }
        out
    }

    /// Keeps the cells for which `keep` returns true.
    pub fn filter(&self, mut keep: impl FnMut(&Cell) -> bool) -> Self {
        let cells = self.cells.iter().filter(|c| keep(c)).copied().collect();
        Self::new(self.rows, self.cols, cells).expect("subset of a valid relation")
    }
}

/// Values of the observed predicates: dense vectors for unary predicates and
/// sparse relations for binary ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Interpretation {
    pub unary: BTreeMap<PredId, Vec<f64>>,
    pub binary: BTreeMap<PredId, BinaryRelation>,
}

impl Interpretation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_unary(&mut self, pred: PredId, values: Vec<f64>) {
        self.unary.insert(pred, values);
    }

    pub fn insert_binary(&mut self, pred: PredId, rel: BinaryRelation) {
        self.binary.insert(pred, rel);
    }

    pub fn contains(&self, pred: PredId) -> bool {
        self.unary.contains_key(&pred) || self.binary.contains_key(&pred)
    }

    /// Total number of stored binary cells.
    pub fn cell_count(&self) -> usize {
        self.binary.values().map(BinaryRelation::len).sum()
    }
}
