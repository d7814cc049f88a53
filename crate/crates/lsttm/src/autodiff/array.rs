use crate::error::{Error, Result};

/// Shape of a dense value: scalars, vectors, and row-major matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Vector(usize),
    Matrix { rows: usize, cols: usize },
}

impl Shape {
    pub fn numel(&self) -> usize {
        match *self {
            Shape::Scalar => 1,
            Shape::Vector(n) => n,
            Shape::Matrix { rows, cols } => rows * cols,
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, Shape::Scalar)
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Shape::Scalar => write!(f, "[]"),
            Shape::Vector(n) => write!(f, "[{n}]"),
            Shape::Matrix { rows, cols } => write!(f, "[{rows}x{cols}]"),
        }
    }
}

/// A dense 64-bit float value with explicit shape. Matrices are row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    shape: Shape,
    data: Vec<f64>,
}

impl Array {
    pub fn new(shape: Shape, data: Vec<f64>) -> Self {
        assert_eq!(shape.numel(), data.len(), "shape/data length mismatch");
        Array { shape, data }
    }

    pub fn zeros(shape: Shape) -> Self {
        Array { shape, data: vec![0.0; shape.numel()] }
    }

    pub fn scalar(v: f64) -> Self {
        Array { shape: Shape::Scalar, data: vec![v] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Array { shape: Shape::Vector(data.len()), data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length mismatch");
        Array { shape: Shape::Matrix { rows, cols }, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |v| v.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Array::matrix(r, c, data)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Scalar contents; panics on non-scalar.
    pub fn item(&self) -> f64 {
        assert!(self.shape.is_scalar(), "item() on {}", self.shape);
        self.data[0]
    }

    /// Row `i` of a matrix as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        match self.shape {
            Shape::Matrix { cols, .. } => &self.data[i * cols..(i + 1) * cols],
            _ => panic!("row() on {}", self.shape),
        }
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        match self.shape {
            Shape::Matrix { cols, .. } => &mut self.data[i * cols..(i + 1) * cols],
            _ => panic!("row_mut() on {}", self.shape),
        }
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::NonFinite { what: what.to_string(), coord: Some(i) }),
        }
    }
}
