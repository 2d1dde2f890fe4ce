//! Truncated power series in the perturbative order, with tracked errors.

use num_traits::{Float, Num};

use crate::error::{Error, Result};

/// `exp(c)` of a formal series with `c[0] = 0`, truncated at `c.len()`.
pub fn formal_exp<T: Num + Clone>(c: &[T]) -> Result<Vec<T>> {
    if c.is_empty() {
        return Ok(Vec::new());
    }
    if !c[0].is_zero() {
        return Err(Error::invalid("formal exponential needs a vanishing constant term"));
    }
    // n e_n = sum_{k=1}^n k c_k e_{n-k}
    let mut e = vec![T::one()];
    let mut n_t = T::zero();
    for n in 1..c.len() {
        n_t = n_t + T::one();
        let mut acc = T::zero();
        let mut k_t = T::zero();
        for k in 1..=n {
            k_t = k_t + T::one();
            acc = acc + k_t.clone() * c[k].clone() * e[n - k].clone();
        }
        e.push(acc / n_t.clone());
    }
    Ok(e)
}

/// `log(a)` of a formal series with `a[0] = 1`, truncated at `a.len()`.
pub fn formal_log<T: Num + Clone>(a: &[T]) -> Result<Vec<T>> {
    if a.is_empty() {
        return Ok(Vec::new());
    }
    if !a[0].is_one() {
        return Err(Error::invalid("formal logarithm needs a unit constant term"));
    }
    // n c_n = n a_n - sum_{k=1}^{n-1} k c_k a_{n-k}
    let mut c = vec![T::zero()];
    let mut n_t = T::zero();
    for n in 1..a.len() {
        n_t = n_t + T::one();
        let mut acc = n_t.clone() * a[n].clone();
        let mut k_t = T::zero();
        for k in 1..n {
            k_t = k_t + T::one();
            acc = acc - k_t.clone() * c[k].clone() * a[n - k].clone();
        }
        c.push(acc / n_t.clone());
    }
    Ok(c)
}

/// Cauchy product truncated at `min(a.len(), b.len())`.
pub fn formal_mul<T: Num + Clone>(a: &[T], b: &[T]) -> Vec<T> {
    let n = a.len().min(b.len());
    (0..n)
        .map(|m| (0..=m).fold(T::zero(), |s, k| s + a[k].clone() * b[m - k].clone()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesTerm<T> {
    pub value: T,
    pub error: T,
    pub graph_count: u64,
}

/// Terms of orders `0..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series<T> {
    terms: Vec<SeriesTerm<T>>,
}

impl<T: Float> Series<T> {
    pub fn new(terms: Vec<SeriesTerm<T>>) -> Self {
        Series { terms }
    }

    /// Exact coefficients with zero error.
    pub fn exact(values: &[T]) -> Self {
        Series {
            terms: values
                .iter()
                .map(|&value| SeriesTerm {
                    value,
                    error: T::zero(),
                    graph_count: 0,
                })
                .collect(),
        }
    }

    /// `1 + 0 + ... + 0` up to order `max_order`.
    pub fn one(max_order: usize) -> Self {
        let mut v = vec![T::zero(); max_order + 1];
        v[0] = T::one();
        Series::exact(&v)
    }

    pub fn terms(&self) -> &[SeriesTerm<T>] {
        &self.terms
    }

    pub fn max_order(&self) -> usize {
        self.terms.len().saturating_sub(1)
    }

    pub fn values(&self) -> Vec<T> {
        self.terms.iter().map(|t| t.value).collect()
    }

    pub fn errors(&self) -> Vec<T> {
        self.terms.iter().map(|t| t.error).collect()
    }

    pub fn value(&self, order: usize) -> T {
        self.terms[order].value
    }

    /// Sum of all terms with the quadrature-combined error.
    pub fn total(&self) -> (T, T) {
        let v = self.terms.iter().fold(T::zero(), |s, t| s + t.value);
        let e = self.terms.iter().fold(T::zero(), |s, t| s + t.error * t.error).sqrt();
        (v, e)
    }

    /// Formal exponential; errors are propagated to first order,
    /// `d e_n / d c_k = e_{n-k}`.
    pub fn exp(&self) -> Result<Self> {
        let e = formal_exp(&self.values())?;
        let errs = self.errors();
        let terms = (0..e.len())
            .map(|n| {
                let var = (1..=n).fold(T::zero(), |s, k| {
                    let x = e[n - k] * errs[k];
                    s + x * x
                });
                SeriesTerm {
                    value: e[n],
                    error: var.sqrt(),
                    graph_count: 0,
                }
            })
            .collect();
        Ok(Series { terms })
    }

    /// Cauchy product with first-order error propagation.
    pub fn mul(&self, other: &Series<T>) -> Self {
        let (a, b) = (self.values(), other.values());
        let (ea, eb) = (self.errors(), other.errors());
        let v = formal_mul(&a, &b);
        let terms = (0..v.len())
            .map(|m| {
                let var = (0..=m).fold(T::zero(), |s, k| {
                    let x = ea[k] * b[m - k];
                    let y = a[k] * eb[m - k];
                    s + x * x + y * y
                });
                SeriesTerm {
                    value: v[m],
                    error: var.sqrt(),
                    graph_count: self.terms[m].graph_count + other.terms[m].graph_count,
                }
            })
            .collect();
        Series { terms }
    }
}
