//! Composite Gauss-Kronrod grids over boxes and contraction of dense factor
//! tensors by variable elimination.
//!
//! An integrand that is a product of factors, each depending on a few
//! variables, is integrated on the tensor-product grid without ever forming
//! the full product: variables are summed out one at a time, always picking
//! the one whose elimination touches the smallest index space.

use super::kronrod15_reference;

/// Nodes of a composite 15-point rule on `[a, b]` with Kronrod and embedded
/// Gauss weights.
#[derive(Debug, Clone)]
pub struct Grid1d {
    pub nodes: Vec<f64>,
    pub kronrod: Vec<f64>,
    pub gauss: Vec<f64>,
}

impl Grid1d {
    pub fn composite(a: f64, b: f64, panels: usize) -> Self {
        let rule = kronrod15_reference::<f64>();
        let n = panels * rule.len();
        let mut grid = Grid1d {
            nodes: Vec::with_capacity(n),
            kronrod: Vec::with_capacity(n),
            gauss: Vec::with_capacity(n),
        };
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + h * p as f64;
            let center = lo + 0.5 * h;
            for &(x, wk, wg) in &rule {
                grid.nodes.push(center + 0.5 * h * x);
                grid.kronrod.push(0.5 * h * wk);
                grid.gauss.push(0.5 * h * wg);
            }
        }
        grid
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Product grid over a `d`-dimensional box; points are stored contiguously,
/// `d` coordinates each.
#[derive(Debug, Clone)]
pub struct BoxGrid {
    pub dim: usize,
    pub points: Vec<f64>,
    pub kronrod: Vec<f64>,
    pub gauss: Vec<f64>,
}

impl BoxGrid {
    pub fn new(bounds: &[(f64, f64)], panels: usize) -> Self {
        let dim = bounds.len();
        let axes: Vec<Grid1d> = bounds
            .iter()
            .map(|&(a, b)| Grid1d::composite(a, b, panels))
            .collect();
        let per_axis = axes.first().map_or(1, Grid1d::len);
        let total = per_axis.pow(dim as u32);
        let mut grid = BoxGrid {
            dim,
            points: Vec::with_capacity(total * dim),
            kronrod: Vec::with_capacity(total),
            gauss: Vec::with_capacity(total),
        };
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let mut wk = 1.0;
            let mut wg = 1.0;
            for (axis, &i) in axes.iter().zip(&idx) {
                grid.points.push(axis.nodes[i]);
                wk *= axis.kronrod[i];
                wg *= axis.gauss[i];
            }
            grid.kronrod.push(wk);
            grid.gauss.push(wg);
            for k in (0..dim).rev() {
                idx[k] += 1;
                if idx[k] < per_axis {
                    break;
                }
                idx[k] = 0;
            }
        }
        grid
    }

    pub fn len(&self) -> usize {
        self.kronrod.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kronrod.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

/// A dense tensor over a sorted list of variables, row-major in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseFactor {
    pub vars: Vec<usize>,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl DenseFactor {
    pub fn scalar(value: f64) -> Self {
        DenseFactor {
            vars: Vec::new(),
            dims: Vec::new(),
            data: vec![value],
        }
    }

    /// Tabulates `f` over the grids of `vars` (which must be sorted and
    /// distinct). `f` receives one point slice per variable.
    pub fn tabulate<F>(vars: &[usize], grids: &[&BoxGrid], f: F) -> Self
    where
        F: Fn(&[&[f64]]) -> f64,
    {
        debug_assert!(vars.windows(2).all(|w| w[0] < w[1]));
        let dims: Vec<usize> = vars.iter().map(|&v| grids[v].len()).collect();
        let total: usize = dims.iter().product();
        let mut data = Vec::with_capacity(total);
        let mut idx = vec![0usize; vars.len()];
        let mut pts: Vec<&[f64]> = vars.iter().map(|&v| grids[v].point(0)).collect();
        for _ in 0..total {
            data.push(f(&pts));
            for k in (0..vars.len()).rev() {
                idx[k] += 1;
                if idx[k] < dims[k] {
                    pts[k] = grids[vars[k]].point(idx[k]);
                    break;
                }
                idx[k] = 0;
                pts[k] = grids[vars[k]].point(0);
            }
        }
        DenseFactor { vars: vars.to_vec(), dims, data }
    }

    fn size(&self) -> usize {
        self.data.len()
    }
}

/// Sums the product of `factors` against the per-variable weights.
/// Variables `0..weights.len()` that appear in no factor contribute the sum
/// of their weights.
pub fn contract(factors: &[DenseFactor], weights: &[&[f64]]) -> f64 {
    let mut live: Vec<DenseFactor> = factors.to_vec();
    let mut result = 1.0;
    for (v, w) in weights.iter().enumerate() {
        if !live.iter().any(|f| f.vars.contains(&v)) {
            result *= w.iter().sum::<f64>();
        }
    }
    loop {
        // pick the variable whose elimination has the smallest index space
        let mut best: Option<(usize, usize)> = None;
        for f in &live {
            for &v in &f.vars {
                let cost = union_size(&live, v, weights);
                if best.is_none_or(|(c, bv)| cost < c || (cost == c && v < bv)) {
                    best = Some((cost, v));
                }
            }
        }
        let Some((_, v)) = best else { break };
        let (touching, rest): (Vec<_>, Vec<_>) = live.into_iter().partition(|f| f.vars.contains(&v));
        live = rest;
        live.push(eliminate(&touching, v, weights));
    }
    for f in &live {
        result *= f.data[0];
    }
    result
}

fn union_vars(factors: &[&DenseFactor]) -> Vec<usize> {
    let mut u: Vec<usize> = factors.iter().flat_map(|f| f.vars.iter().copied()).collect();
    u.sort_unstable();
    u.dedup();
    u
}

fn union_size(live: &[DenseFactor], v: usize, weights: &[&[f64]]) -> usize {
    let touching: Vec<&DenseFactor> = live.iter().filter(|f| f.vars.contains(&v)).collect();
    union_vars(&touching)
        .iter()
        .map(|&u| weights[u].len())
        .product::<usize>()
        .saturating_mul(touching.len())
}

fn eliminate(touching: &[DenseFactor], v: usize, weights: &[&[f64]]) -> DenseFactor {
    let refs: Vec<&DenseFactor> = touching.iter().collect();
    let union = union_vars(&refs);
    let out_vars: Vec<usize> = union.iter().copied().filter(|&u| u != v).collect();
    let out_dims: Vec<usize> = out_vars.iter().map(|&u| weights[u].len()).collect();
    let out_size: usize = out_dims.iter().product();

    // strides of each factor along each output variable and along v
    let strides = |f: &DenseFactor, var: usize| -> usize {
        match f.vars.iter().position(|&x| x == var) {
            Some(k) => f.dims[k + 1..].iter().product(),
            None => 0,
        }
    };
    let out_strides: Vec<Vec<usize>> = touching
        .iter()
        .map(|f| out_vars.iter().map(|&u| strides(f, u)).collect())
        .collect();
    let v_strides: Vec<usize> = touching.iter().map(|f| strides(f, v)).collect();
    let wv = weights[v];

    let mut data = vec![0.0; out_size];
    let mut idx = vec![0usize; out_vars.len()];
    let mut base = vec![0usize; touching.len()];
    for slot in data.iter_mut() {
        let mut acc = 0.0;
        for (iv, &w) in wv.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let mut prod = w;
            for (f, (&b, &s)) in touching.iter().zip(base.iter().zip(&v_strides)) {
                prod *= f.data[b + iv * s];
            }
            acc += prod;
        }
        *slot = acc;
        for k in (0..out_vars.len()).rev() {
            idx[k] += 1;
            for (b, s) in base.iter_mut().zip(&out_strides) {
                *b += s[k];
            }
            if idx[k] < out_dims[k] {
                break;
            }
            for (b, s) in base.iter_mut().zip(&out_strides) {
                *b -= s[k] * out_dims[k];
            }
            idx[k] = 0;
        }
    }
    DenseFactor {
        vars: out_vars,
        dims: out_dims,
        data,
    }
}

/// Number of tensor entries evaluated when tabulating the given factors.
pub fn tabulated_entries(factors: &[DenseFactor]) -> u64 {
    factors.iter().map(|f| f.size() as u64).sum()
}
