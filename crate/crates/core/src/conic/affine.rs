//! Sparse affine expressions over program columns.

use std::ops::{Add, Mul, Neg, Sub};

/// `constant + Σ coeff·x[col]`, kept sparse and unsorted until [`Affine::compact`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(col: usize) -> Self {
        Self::term(col, 1.0)
    }

    pub fn term(col: usize, coeff: f64) -> Self {
        Self { terms: vec![(col, coeff)], constant: 0.0 }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    pub fn max_col(&self) -> Option<usize> {
        self.terms.iter().map(|&(j, _)| j).max()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(j, c)| acc + c * x[j])
    }

    pub fn add_term(&mut self, col: usize, coeff: f64) {
        self.terms.push((col, coeff));
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= s;
        }
        self.constant *= s;
        self
    }

    /// Merges duplicate columns and drops exact zeros.
    pub fn compact(mut self) -> Self {
        self.terms.sort_by_key(|&(j, _)| j);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (j, c) in self.terms {
            match out.last_mut() {
                Some(last) if last.0 == j => last.1 += c,
                _ => out.push((j, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        Self { terms: out, constant: self.constant }
    }
}

impl From<f64> for Affine {
    fn from(c: f64) -> Self {
        Affine::constant(c)
    }
}

impl Add for Affine {
    type Output = Affine;
    fn add(mut self, rhs: Affine) -> Affine {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl Add<f64> for Affine {
    type Output = Affine;
    fn add(mut self, rhs: f64) -> Affine {
        self.constant += rhs;
        self
    }
}

impl Sub for Affine {
    type Output = Affine;
    fn sub(self, rhs: Affine) -> Affine {
        self + (-rhs)
    }
}

impl Sub<f64> for Affine {
    type Output = Affine;
    fn sub(self, rhs: f64) -> Affine {
        self + (-rhs)
    }
}

impl Neg for Affine {
    type Output = Affine;
    fn neg(self) -> Affine {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for Affine {
    type Output = Affine;
    fn mul(self, rhs: f64) -> Affine {
        self.scaled(rhs)
    }
}

impl Mul<Affine> for f64 {
    type Output = Affine;
    fn mul(self, rhs: Affine) -> Affine {
        rhs.scaled(self)
    }
}

impl std::iter::Sum for Affine {
    fn sum<I: Iterator<Item = Affine>>(iter: I) -> Affine {
        iter.fold(Affine::zero(), |a, b| a + b)
    }
}
