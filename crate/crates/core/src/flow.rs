//! Perturbative series assembled from graph values: the partition function
//! `exp(-V_eff)`, the effective action, the correlation functional, the
//! vacuum counterterm and thermodynamic-limit scans.
//!
//! Order `m` carries the weight `(-1)^m / m!` and sums over all ordered
//! degree tuples with nonzero couplings and all configurations of each
//! tuple. The constant `lambda^(0)` has no legs; it enters the partition
//! function as the formal factor `exp(-g0)` and the effective action as
//! `-g0` at order one.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluator::{evaluate_configuration, IntegrationResult, QuadratureSpec};
use crate::field::TestField;
use crate::graphs::{connected_components, enumerate_configurations, Configuration, GraphFilter};
use crate::kernels::VertexKernelSet;
use crate::noise::{FlowWindow, NoiseModel};
use crate::series::{Series, SeriesTerm};

/// Compensated summation, independent of thread scheduling because the
/// inputs arrive in a fixed order.
fn neumaier(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

/// All ordered `m`-tuples over `degrees`, lexicographic.
fn degree_tuples(degrees: &[usize], m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|t| {
                degrees.iter().map(move |&p| {
                    let mut t = t.clone();
                    t.push(p);
                    t
                })
            })
            .collect();
    }
    out
}

/// Which configurations an order sum includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Selection {
    All,
    Connected,
    ConnectedVacuum,
    /// Every connected component carries an outer leg.
    NoVacuumComponent,
}

impl Selection {
    fn filter(self) -> Option<GraphFilter> {
        match self {
            Selection::All | Selection::NoVacuumComponent => None,
            Selection::Connected => Some(GraphFilter::connected()),
            Selection::ConnectedVacuum => Some(GraphFilter::connected_vacuum()),
        }
    }

    fn keep(self, c: &Configuration) -> bool {
        match self {
            Selection::NoVacuumComponent => connected_components(c)
                .blocks()
                .iter()
                .all(|comp| c.outer().iter().any(|l| comp.contains(&l.vertex))),
            _ => true,
        }
    }
}

/// The data shared by every series computation.
#[derive(Debug, Clone)]
pub struct FlowProblem {
    pub kernels: VertexKernelSet,
    pub model: NoiseModel,
    pub field: TestField,
    pub spec: QuadratureSpec,
}

/// The two formulations of the renormalized correlation functional.
#[derive(Debug, Clone, PartialEq)]
pub struct RenormalizedCorrelation {
    /// `lambda^(0)` replaced by `lambda^(0) - counterterm`, re-expanded.
    pub subtracted: Series<f64>,
    /// Graphs with a component lacking outer legs dropped.
    pub dropped: Series<f64>,
    pub counterterm: Series<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScanQuantity {
    /// The order-one connected vacuum graph sum.
    Vacuum,
    /// A single configuration evaluated at the problem's field.
    Graph(Configuration),
}

impl std::fmt::Display for ScanQuantity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScanQuantity::Vacuum => write!(f, "vacuum"),
            ScanQuantity::Graph(c) => write!(f, "graph {c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub t0: f64,
    pub value: f64,
    pub error: f64,
}

/// Least-squares fit of `log |value| = a + exponent * log T0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    /// Two standard errors of the slope.
    pub width: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub quantity: String,
    pub rows: Vec<ScanRow>,
    pub fit: Option<PowerLawFit>,
    /// All values equal (for example all zero); no fit is possible.
    pub degenerate: bool,
    /// `value[i+1] - value[i]`.
    pub differences: Vec<f64>,
    /// Successive differences strictly decrease in magnitude.
    pub cauchy_decreasing: bool,
}

impl ScanResult {
    /// A short human-readable summary.
    pub fn summary(&self) -> String {
        let mut s = format!("quantity: {}\npoints: {}\n", self.quantity, self.rows.len());
        match (&self.fit, self.degenerate) {
            (_, true) => s.push_str("fit: degenerate (all values equal)\n"),
            (Some(f), false) => s.push_str(&format!(
                "fit_exponent: {:.6}\nfit_width: {:.6}\nfit_intercept: {:.6}\n",
                f.exponent, f.width, f.intercept
            )),
            (None, false) => s.push_str("fit: not possible (a value is zero)\n"),
        }
        s.push_str(&format!("differences_decreasing: {}\n", self.cauchy_decreasing));
        s
    }
}

fn power_law_fit(rows: &[ScanRow]) -> Option<PowerLawFit> {
    if rows.iter().any(|r| r.value == 0.0 || !r.value.is_finite()) {
        return None;
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.t0.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.value.abs().ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    Some(PowerLawFit {
        exponent: slope,
        width: 2.0 * se,
        intercept,
    })
}

impl FlowProblem {
    pub fn new(kernels: VertexKernelSet, model: NoiseModel, field: TestField, spec: QuadratureSpec) -> Result<Self> {
        let d = model.dimension();
        if kernels.dimension() != d || field.dimension() != d {
            return Err(Error::invalid("kernel, field and model dimensions differ"));
        }
        spec.validate()?;
        Ok(FlowProblem {
            kernels,
            model,
            field,
            spec,
        })
    }

    pub fn with_field(&self, field: TestField) -> Self {
        FlowProblem {
            field,
            ..self.clone()
        }
    }

    pub fn with_kernels(&self, kernels: VertexKernelSet) -> Self {
        FlowProblem {
            kernels,
            ..self.clone()
        }
    }

    fn warn_if_cutoff_is_active(&self, window: FlowWindow) {
        let mut reach = self.field.support_radius();
        if self.model.is_poisson() {
            reach = reach.max(window.t.max(window.t0));
        }
        if self.kernels.cutoff().plateau < reach {
            log::warn!(
                "cutoff plateau {} does not cover the working region of radius {}",
                self.kernels.cutoff().plateau,
                reach
            );
        }
    }

    /// Evaluates a batch of configurations in parallel, keeping input order.
    fn evaluate_all(&self, configs: &[Configuration], field: &TestField, window: FlowWindow) -> Result<Vec<IntegrationResult>> {
        configs
            .par_iter()
            .map(|c| evaluate_configuration(c, &self.kernels, &self.model, field, window, &self.spec))
            .collect()
    }

    /// Unweighted sum of graph values at order `m`.
    fn order_sum(&self, field: &TestField, window: FlowWindow, m: usize, sel: Selection) -> Result<SeriesTerm<f64>> {
        let degrees = self.kernels.active_degrees();
        let mut configs = Vec::new();
        for tuple in degree_tuples(&degrees, m) {
            configs.extend(enumerate_configurations(&tuple, sel.filter())?.filter(|c| sel.keep(c)));
        }
        let results = self.evaluate_all(&configs, field, window)?;
        Ok(SeriesTerm {
            value: neumaier(results.iter().map(|r| r.value)),
            error: results.iter().map(|r| r.error_estimate.powi(2)).sum::<f64>().sqrt(),
            graph_count: results.len() as u64,
        })
    }

    /// `((-1)^m / m!) * order_sum` for `m = 0..=max_order`, with the empty
    /// graph at order zero contributing `empty`.
    fn weighted_series(
        &self,
        field: &TestField,
        window: FlowWindow,
        max_order: usize,
        sel: Selection,
        empty: f64,
    ) -> Result<Series<f64>> {
        window.validate()?;
        self.warn_if_cutoff_is_active(window);
        let mut terms = vec![SeriesTerm {
            value: empty,
            error: 0.0,
            graph_count: u64::from(empty != 0.0),
        }];
        for m in 1..=max_order {
            let s = self
                .order_sum(field, window, m, sel)
                .map_err(|e| e.context(format!("order {m}")))?;
            let w = if m % 2 == 0 { 1.0 } else { -1.0 } / factorial(m);
            terms.push(SeriesTerm {
                value: w * s.value,
                error: s.error / factorial(m),
                graph_count: s.graph_count,
            });
        }
        Ok(Series::new(terms))
    }

    /// `exp(-x * c)` as an exact series.
    fn exp_constant(c: f64, max_order: usize) -> Result<Series<f64>> {
        let mut v = vec![0.0; max_order + 1];
        if max_order >= 1 {
            v[1] = -c;
        }
        Series::exact(&v).exp()
    }

    fn fold_constant(&self, positive: Series<f64>, max_order: usize) -> Result<Series<f64>> {
        let g0 = self.kernels.constant();
        if g0 == 0.0 {
            return Ok(positive);
        }
        let folded = Self::exp_constant(g0, max_order)?.mul(&positive);
        // keep the graph counts of the positive-degree sums
        let terms = folded
            .terms()
            .iter()
            .zip(positive.terms())
            .map(|(f, p)| SeriesTerm {
                graph_count: p.graph_count,
                ..*f
            })
            .collect();
        Ok(Series::new(terms))
    }

    /// Series of `exp(-V_eff)` at the problem's field.
    pub fn partition_function_series(&self, window: FlowWindow, max_order: usize) -> Result<Series<f64>> {
        let positive = self.weighted_series(&self.field, window, max_order, Selection::All, 1.0)?;
        self.fold_constant(positive, max_order)
    }

    /// Series of `-V_eff`: connected graphs only.
    pub fn effective_action_series(&self, window: FlowWindow, max_order: usize) -> Result<Series<f64>> {
        let mut s = self.weighted_series(&self.field, window, max_order, Selection::Connected, 0.0)?;
        if max_order >= 1 && self.kernels.constant() != 0.0 {
            let mut terms = s.terms().to_vec();
            terms[1].value -= self.kernels.constant();
            s = Series::new(terms);
        }
        Ok(s)
    }

    /// `rho_t(phi) = E[exp(-V(phi + noise))]` with the noise at scale `t`.
    /// The graph rule attaches `-phi` to outer legs, so the series is the
    /// partition function at the reflected field.
    pub fn correlation_functional(&self, t: f64, max_order: usize) -> Result<Series<f64>> {
        let reflected = self.field.negated();
        let window = FlowWindow::absolute(t);
        let positive = self.weighted_series(&reflected, window, max_order, Selection::All, 1.0)?;
        self.fold_constant(positive, max_order)
    }

    /// Per-order counterterm `delta_m` such that replacing `lambda^(0)` by
    /// `lambda^(0) - sum_m delta_m` makes `log rho(0)` vanish. Order zero is
    /// zero.
    pub fn vacuum_counterterm(&self, t0: f64, max_order: usize) -> Result<Series<f64>> {
        let zero = TestField::zero(self.model.dimension());
        let w = self.weighted_series(&zero, FlowWindow::absolute(t0), max_order, Selection::ConnectedVacuum, 0.0)?;
        let g0 = self.kernels.constant();
        let terms = w
            .terms()
            .iter()
            .enumerate()
            .map(|(m, t)| SeriesTerm {
                value: if m == 1 { g0 - t.value } else { -t.value },
                ..*t
            })
            .collect();
        Ok(Series::new(terms))
    }

    /// The correlation functional at scale `t0` after the counterterm, in
    /// both formulations.
    pub fn renormalized_correlation(&self, t0: f64, max_order: usize) -> Result<RenormalizedCorrelation> {
        let counterterm = self.vacuum_counterterm(t0, max_order)?;
        let window = FlowWindow::absolute(t0);
        let reflected = self.field.negated();
        let positive = self.weighted_series(&reflected, window, max_order, Selection::All, 1.0)?;
        // exp(-(g0 x - delta(x)))
        let mut lambda: Vec<SeriesTerm<f64>> = counterterm
            .terms()
            .iter()
            .map(|t| SeriesTerm {
                value: t.value,
                error: t.error,
                graph_count: 0,
            })
            .collect();
        if max_order >= 1 {
            lambda[1].value -= self.kernels.constant();
        }
        let subtracted = Series::new(lambda).exp()?.mul(&positive);
        let subtracted = Series::new(
            subtracted
                .terms()
                .iter()
                .zip(positive.terms())
                .map(|(s, p)| SeriesTerm {
                    graph_count: p.graph_count,
                    ..*s
                })
                .collect(),
        );
        let dropped = self.weighted_series(&reflected, window, max_order, Selection::NoVacuumComponent, 1.0)?;
        Ok(RenormalizedCorrelation {
            subtracted,
            dropped,
            counterterm,
        })
    }

    /// Evaluates `quantity` over increasing `T0` values and fits a power law.
    pub fn td_limit_scan(&self, t0_list: &[f64], quantity: &ScanQuantity) -> Result<ScanResult> {
        if t0_list.len() < 4 {
            return Err(Error::invalid("a scan needs at least four T0 values"));
        }
        if t0_list.windows(2).any(|w| !(w[0] < w[1])) || !(t0_list[0] > 0.0) {
            return Err(Error::invalid("scan T0 values must be positive and strictly increasing"));
        }
        let zero = TestField::zero(self.model.dimension());
        let mut rows = Vec::with_capacity(t0_list.len());
        for &t0 in t0_list {
            let window = FlowWindow::absolute(t0);
            self.warn_if_cutoff_is_active(window);
            let (value, error) = match quantity {
                ScanQuantity::Vacuum => {
                    let s = self.order_sum(&zero, window, 1, Selection::ConnectedVacuum)?;
                    (s.value, s.error)
                }
                ScanQuantity::Graph(c) => {
                    let r = evaluate_configuration(c, &self.kernels, &self.model, &self.field, window, &self.spec)?;
                    (r.value, r.error_estimate)
                }
            };
            rows.push(ScanRow { t0, value, error });
        }
        let degenerate = rows.iter().all(|r| r.value == rows[0].value);
        let fit = if degenerate { None } else { power_law_fit(&rows) };
        let differences: Vec<f64> = rows.windows(2).map(|w| w[1].value - w[0].value).collect();
        let cauchy_decreasing = !degenerate && differences.windows(2).all(|w| w[1].abs() < w[0].abs());
        Ok(ScanResult {
            quantity: quantity.to_string(),
            rows,
            fit,
            degenerate,
            differences,
            cauchy_decreasing,
        })
    }
}
