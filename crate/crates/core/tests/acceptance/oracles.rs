//! Reference computations that share no numerical code with the library:
//! their own Gauss-Legendre rules, adaptive bisection and graph
//! factorization.

use std::collections::HashMap;
use std::f64::consts::PI;

use levyflow::{Configuration, LegLabel};
use nalgebra::DMatrix;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite rule: every segment between consecutive `breaks` is split into
/// `panels` equal panels carrying an `order`-point rule.
pub fn composite(breaks: &[f64], panels: usize, order: usize) -> Vec<(f64, f64)> {
    let rule = gauss_legendre(order);
    let mut out = Vec::new();
    for seg in breaks.windows(2) {
        let h = (seg[1] - seg[0]) / panels as f64;
        for p in 0..panels {
            let (a, b) = (seg[0] + p as f64 * h, seg[0] + (p + 1) as f64 * h);
            for &(x, w) in &rule {
                out.push((0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w));
            }
        }
    }
    out
}

/// Adaptive bisection with a 10-point / 20-point Gauss-Legendre pair,
/// started on the segments between `breaks`.
pub struct Adaptive {
    low: Vec<(f64, f64)>,
    high: Vec<(f64, f64)>,
}

impl Adaptive {
    pub fn new() -> Self {
        Adaptive {
            low: gauss_legendre(10),
            high: gauss_legendre(20),
        }
    }

    fn rule(rule: &[(f64, f64)], f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        rule.iter().map(|&(x, w)| w * f(c + h * x)).sum::<f64>() * h
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64, breaks: &[f64], tol: f64) -> f64 {
        let total = breaks[breaks.len() - 1] - breaks[0];
        let mut stack: Vec<(f64, f64)> = breaks.windows(2).map(|s| (s[0], s[1])).collect();
        let mut sum = 0.0;
        let mut comp = 0.0;
        while let Some((a, b)) = stack.pop() {
            let lo = Self::rule(&self.low, &mut f, a, b);
            let hi = Self::rule(&self.high, &mut f, a, b);
            if (hi - lo).abs() <= tol * (b - a) / total || b - a < 1e-9 * total {
                // Neumaier summation
                let t = sum + hi;
                comp += if sum.abs() >= hi.abs() { (sum - t) + hi } else { (hi - t) + sum };
                sum = t;
            } else {
                let m = 0.5 * (a + b);
                stack.push((a, m));
                stack.push((m, b));
            }
        }
        sum + comp
    }
}

pub fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (1.0 - 1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

pub fn smooth_step_down(u: f64) -> f64 {
    let psi = |v: f64| if v > 0.0 { (-1.0 / v).exp() } else { 0.0 };
    if u <= 0.0 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        psi(1.0 - u) / (psi(1.0 - u) + psi(u))
    }
}

/// `-int int g exp(-(x-y)^2/(2 w^2)) chi(x) chi(y) (G_t - G_T0)(x - y) dx dy`
/// for the d=1 heat covariance with standard deviation `length * t`: the
/// order-one effective action at zero field.
#[allow(clippy::too_many_arguments)]
pub fn gaussian_first_order(g: f64, w: f64, plateau: f64, shoulder: f64, length: f64, t: f64, t0: f64, tol: f64) -> f64 {
    let heat = |s: f64, u: f64| (-u * u / (2.0 * s * s)).exp() / (2.0 * PI * s * s).sqrt();
    let chi = |x: f64| smooth_step_down((x.abs() - plateau) / shoulder);
    let r = plateau + shoulder;
    let breaks = [-r, -plateau, plateau, r];
    let q = Adaptive::new();
    let outer = q.integrate(
        |x| {
            let cx = chi(x);
            if cx == 0.0 {
                return 0.0;
            }
            cx * q.integrate(
                |y| {
                    let u = x - y;
                    g * (-u * u / (2.0 * w * w)).exp() * chi(y) * (heat(length * t, u) - heat(length * t0, u))
                },
                &breaks,
                tol * 1e-2,
            )
        },
        &breaks,
        tol,
    );
    -outer
}

/// Parameters of the d=1 Poisson graph integrals checked by
/// [`MollifiedGraphs`]. The vertex cutoff must equal 1 wherever the field
/// and the diagonal weight live.
pub struct PoissonSetup {
    pub charges: Vec<(f64, f64)>,
    pub amplitude: f64,
    /// Incremental window `sigma_t - sigma_T0`.
    pub t: f64,
    pub t0: f64,
    /// `(coupling, width)` by degree 1..=3.
    pub kernels: [(f64, f64); 3],
    /// A single field bump `(center, width, height)`.
    pub field: (f64, f64, f64),
}

/// Evaluates Poisson graphs with every leg carrying its own variable: the
/// diagonal constraint of a block is replaced by a normalized Gaussian of
/// width `eps` around a block anchor. Each vertex profile is written as
/// `exp(-sum_{i<j}(x_i-x_j)^2/(2a^2)) = p/(sqrt(2 pi) a) int prod_i exp(-p (x_i-z)^2/(2a^2)) dz`,
/// after which each leg integral is an explicit Gaussian convolution and
/// the graph reduces to sums over the vertex centres `z` and the anchors.
pub struct MollifiedGraphs {
    setup: PoissonSetup,
    z: Vec<(f64, f64)>,
    anchors: Vec<(f64, f64)>,
    /// Diagonal weight at the anchor nodes.
    weight: Vec<f64>,
    /// `int -phi(x) exp(-p (x-z)^2/(2a^2)) dx` at the z nodes, by degree.
    outer_leg: Vec<Vec<f64>>,
    blocks: HashMap<(usize, usize, usize, usize, u64), DMatrix<f64>>,
}

impl MollifiedGraphs {
    pub fn new(setup: PoissonSetup) -> Self {
        let r = setup.t.max(setup.t0);
        let (t_lo, t_hi) = (setup.t.min(setup.t0), r);
        let anchors = composite(&[-t_hi, -t_lo, t_lo, t_hi], 12, 12);
        let zr = r + 12.0 * setup.kernels.iter().map(|k| k.1).fold(0.0, f64::max);
        let z = composite(&[-zr, zr], 40, 12);
        let sigma = |y: f64, s: f64| setup.amplitude * bump(y * y / (s * s));
        let weight = anchors.iter().map(|&(y, _)| sigma(y, setup.t) - sigma(y, setup.t0)).collect();
        let (fc, fw, fh) = setup.field;
        let field_nodes = composite(&[fc - fw, fc + fw], 16, 12);
        let outer_leg = (1..=3)
            .map(|p| {
                let s2 = setup.kernels[p - 1].1.powi(2) / p as f64;
                z.iter()
                    .map(|&(zz, _)| {
                        field_nodes
                            .iter()
                            .map(|&(x, w)| {
                                let phi = fh * bump((x - fc).powi(2) / (fw * fw));
                                -w * phi * (-(x - zz).powi(2) / (2.0 * s2)).exp()
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect();
        MollifiedGraphs {
            setup,
            z,
            anchors,
            weight,
            outer_leg,
            blocks: HashMap::new(),
        }
    }

    fn moment(&self, n: usize) -> f64 {
        self.setup.charges.iter().map(|&(s, w)| w * s.powi(n as i32)).sum()
    }

    /// `int dy weight(y) M_1(y - z1)^n1 M_2(y - z2)^n2` on the z grid, where
    /// `M_v` is the leg convolution for a vertex of degree `p_v`.
    fn block(&mut self, p1: usize, n1: usize, p2: usize, n2: usize, eps: f64) -> &DMatrix<f64> {
        let key = (p1, n1, p2, n2, eps.to_bits());
        if !self.blocks.contains_key(&key) {
            let leg = |p: usize, n: usize| -> DMatrix<f64> {
                let s2 = self.setup.kernels[p.max(1) - 1].1.powi(2) / p.max(1) as f64;
                let v = s2 + eps * eps;
                let amp = (s2 / v).sqrt();
                DMatrix::from_fn(self.anchors.len(), self.z.len(), |i, j| {
                    if n == 0 {
                        1.0
                    } else {
                        let u = self.anchors[i].0 - self.z[j].0;
                        (amp * (-u * u / (2.0 * v)).exp()).powi(n as i32)
                    }
                })
            };
            let mut a = leg(p1, n1);
            for i in 0..a.nrows() {
                let scale = self.anchors[i].1 * self.weight[i];
                a.row_mut(i).scale_mut(scale);
            }
            let b = leg(p2, n2);
            let m = a.transpose() * b;
            self.blocks.insert(key, m);
        }
        &self.blocks[&key]
    }

    /// The graph value for mollifier width `eps`.
    pub fn value(&mut self, c: &Configuration, eps: f64) -> f64 {
        let degrees = c.degrees().to_vec();
        assert!(degrees.len() <= 2 && degrees.iter().all(|&p| (1..=3).contains(&p)));
        let m = degrees.len();
        let mut prefactor = 1.0;
        for &p in &degrees {
            let (g, a) = self.setup.kernels[p - 1];
            prefactor *= g * p as f64 / ((2.0 * PI).sqrt() * a);
        }
        let blocks: Vec<Vec<LegLabel>> = c.blocks().blocks().to_vec();
        for b in &blocks {
            prefactor *= self.moment(b.len());
        }
        if m == 0 {
            return prefactor;
        }
        let nz = self.z.len();
        let p1 = degrees[0];
        let p2 = if m == 2 { degrees[1] } else { 1 };
        // integrand on the (z1, z2) grid; z2 is a dummy for one vertex
        let mut grid = DMatrix::from_element(nz, if m == 2 { nz } else { 1 }, 1.0);
        for leg in c.outer() {
            let f = &self.outer_leg[degrees[leg.vertex - 1] - 1];
            for i in 0..nz {
                for j in 0..grid.ncols() {
                    grid[(i, j)] *= if leg.vertex == 1 { f[i] } else { f[j] };
                }
            }
        }
        for b in &blocks {
            let n1 = b.iter().filter(|l| l.vertex == 1).count();
            let n2 = b.len() - n1;
            let mat = self.block(p1, n1, p2, n2, eps).clone();
            for i in 0..nz {
                for j in 0..grid.ncols() {
                    grid[(i, j)] *= mat[(i, j)];
                }
            }
        }
        let mut sum = 0.0;
        for i in 0..nz {
            for j in 0..grid.ncols() {
                let w2 = if m == 2 { self.z[j].1 } else { 1.0 };
                sum += self.z[i].1 * w2 * grid[(i, j)];
            }
        }
        prefactor * sum
    }

    /// Richardson extrapolation to zero width; the widths must halve.
    pub fn extrapolated(&mut self, c: &Configuration, widths: &[f64]) -> f64 {
        let mut table: Vec<f64> = widths.iter().map(|&e| self.value(c, e)).collect();
        // error expansion in even powers of the width
        let mut factor = 4.0;
        while table.len() > 1 {
            table = table.windows(2).map(|w| (factor * w[1] - w[0]) / (factor - 1.0)).collect();
            factor *= 4.0;
        }
        table[0]
    }
}
