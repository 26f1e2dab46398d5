//! Adaptive integration over convex regions and their faces.
//!
//! Each cell is a simplex carrying two Duffy-collapsed tensor Gauss–Legendre
//! rules (order p and p − 4); their difference is the cell error estimate.
//! The cell with the largest weighted error is bisected along its longest
//! edge until the requested tolerance is met. Totals are re-accumulated with
//! compensated summation in cell-creation order, so results do not depend on
//! heap tie-breaking.

use std::cell::Cell as StdCell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use thiserror::Error;

use crate::polytope::{DelzantPolytope, Face};
use crate::region::{ConvexRegion, Simplex};
use crate::sum::NeumaierSum;

/// Result of a plain integration.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub cells_used: usize,
    pub evaluations: usize,
}

/// Result of a log-mode integration: the integral is `sign · exp(log_value)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogQuadratureResult {
    pub log_value: f64,
    pub sign: f64,
    /// Relative error estimate of `exp(log_value)`.
    pub rel_error: f64,
    pub cells_used: usize,
    pub evaluations: usize,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum QuadratureError {
    #[error(
        "quadrature did not converge within {} evaluations (value {}, error estimate {:e})",
        partial.evaluations, partial.value, partial.error_estimate
    )]
    NotConverged { partial: QuadratureResult },
    #[error("tolerances must be non-negative with at least one positive")]
    InvalidTolerance,
    #[error("integrand is not finite at {point:?}")]
    NonFinite { point: Vec<f64> },
}

/// Pre-refinement around a point where the integrand is known to peak.
#[derive(Clone, Debug, PartialEq)]
pub struct Focus {
    pub center: Vec<f64>,
    pub radius: f64,
    pub max_diameter: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Budget on integrand evaluations.
    pub max_evals: usize,
    /// Gauss–Legendre points per axis of the high rule.
    pub order: usize,
    /// Initial cells larger than this are bisected before adaptation.
    pub max_initial_diameter: Option<f64>,
    pub focus: Option<Focus>,
    /// Hyperplanes `⟨u, y⟩ = c` where the integrand may be non-smooth;
    /// cells with a whole face on one are refined toward it geometrically.
    pub singular_hyperplanes: Vec<(Vec<f64>, f64)>,
}

pub const DEFAULT_PLAIN_TOL: f64 = 1e-9;
pub const DEFAULT_LOG_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_EVALS: usize = 2_000_000;
pub const DEFAULT_ORDER: usize = 12;

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: DEFAULT_PLAIN_TOL,
            rel_tol: 0.0,
            max_evals: DEFAULT_MAX_EVALS,
            order: DEFAULT_ORDER,
            max_initial_diameter: None,
            focus: None,
            singular_hyperplanes: Vec::new(),
        }
    }
}

impl QuadOptions {
    /// Absolute tolerance `tol`.
    pub fn absolute(tol: f64) -> Self {
        Self {
            abs_tol: tol,
            ..Self::default()
        }
    }

    /// Relative tolerance `tol`.
    pub fn relative(tol: f64) -> Self {
        Self {
            abs_tol: 0.0,
            rel_tol: tol,
            ..Self::default()
        }
    }

    pub fn with_focus(mut self, focus: Focus) -> Self {
        self.focus = Some(focus);
        self
    }

    pub fn with_max_evals(mut self, max_evals: usize) -> Self {
        self.max_evals = max_evals;
        self
    }

    pub fn with_singular_hyperplanes(mut self, planes: Vec<(Vec<f64>, f64)>) -> Self {
        self.singular_hyperplanes = planes;
        self
    }

    pub fn with_max_initial_diameter(mut self, d: f64) -> Self {
        self.max_initial_diameter = Some(d);
        self
    }

    fn validate(&self) -> Result<(), QuadratureError> {
        let ok = self.abs_tol >= 0.0
            && self.rel_tol >= 0.0
            && (self.abs_tol > 0.0 || self.rel_tol > 0.0)
            && self.order >= 2;
        if ok {
            Ok(())
        } else {
            Err(QuadratureError::InvalidTolerance)
        }
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Quadrature rule on the standard k-simplex `{b ≥ 0, Σb ≤ 1}`.
#[derive(Clone, Debug)]
pub struct SimplexRule {
    pub dim: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SimplexRule {
    /// Tensor Gauss–Legendre with `points` per axis, collapsed onto the
    /// simplex by the Duffy map.
    pub fn duffy(dim: usize, points: usize) -> Self {
        let (t, w) = gauss_legendre(points);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let total = points.pow(dim as u32);
        for idx in 0..total {
            let mut rem = idx;
            let mut b = vec![0.0; dim];
            let mut weight = 1.0;
            let mut remaining = 1.0;
            for j in 0..dim {
                let a = rem % points;
                rem /= points;
                let tj = t[a];
                b[j] = remaining * tj;
                weight *= w[a];
                if j + 1 < dim {
                    weight *= (1.0 - tj).powi((dim - j - 1) as i32);
                }
                remaining *= 1.0 - tj;
            }
            nodes.push(b);
            weights.push(weight);
        }
        Self {
            dim,
            nodes,
            weights,
        }
    }
}

fn cached_rules(dim: usize, order: usize) -> (&'static SimplexRule, &'static SimplexRule) {
    use std::collections::HashMap;
    use std::sync::Mutex;
    static RULES: OnceLock<Mutex<HashMap<(usize, usize), &'static SimplexRule>>> = OnceLock::new();
    let map = RULES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().expect("rule cache poisoned");
    let low = order.saturating_sub(4).max(1);
    let mut get = |p: usize| -> &'static SimplexRule {
        *guard
            .entry((dim, p))
            .or_insert_with(|| Box::leak(Box::new(SimplexRule::duffy(dim, p))))
    };
    (get(order), get(low))
}

/// Longest-edge bisection, except that a cell with two or more vertices on a
/// singular hyperplane (but not contained in it) is split along the longest
/// edge leaving that hyperplane.
fn split(s: &Simplex, planes: &[(Vec<f64>, f64)]) -> (Simplex, Simplex) {
    let m = s.vertices.len();
    let mut best: Option<(usize, usize, f64)> = None;
    for (u, c) in planes {
        let tol = 1e-12 * (1.0 + c.abs());
        let on: Vec<bool> = s
            .vertices
            .iter()
            .map(|v| (crate::region::dot(u, v) - c).abs() <= tol)
            .collect();
        let count = on.iter().filter(|&&b| b).count();
        if count < 2 || count == m {
            continue;
        }
        for i in 0..m {
            for j in 0..m {
                if on[i] && !on[j] {
                    let l = crate::region::dist(&s.vertices[i], &s.vertices[j]);
                    if best.map_or(true, |(_, _, b)| l > b) {
                        best = Some((i.min(j), i.max(j), l));
                    }
                }
            }
        }
    }
    match best {
        Some((i, j, _)) => s.bisect_edge(i, j),
        None => s.bisect(),
    }
}

/// Bisection depth beyond which a cell is no longer refined.
const MAX_DEPTH: u32 = 200;

struct CellData {
    depth: u32,
    simplex: Simplex,
    values: Vec<f64>,
    errors: Vec<f64>,
    alive: bool,
}

#[derive(PartialEq)]
struct Priority(f64, usize);

impl Eq for Priority {}

impl PartialOrd for Priority {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Priority {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .total_cmp(&other.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

/// Vector-valued adaptive integration of `f` over `simplices`, every
/// simplex's measure scaled by `scale`.
fn adaptive<F>(
    simplices: Vec<Simplex>,
    scale: f64,
    outputs: usize,
    f: F,
    opts: &QuadOptions,
) -> Result<Vec<QuadratureResult>, QuadratureError>
where
    F: Fn(&[f64], &mut [f64]),
{
    opts.validate()?;
    if simplices.is_empty() {
        return Ok(vec![
            QuadratureResult {
                value: 0.0,
                error_estimate: 0.0,
                cells_used: 0,
                evaluations: 0,
            };
            outputs
        ]);
    }
    let k = simplices[0].dim();
    let n = simplices[0].vertices[0].len();
    let mut buf = vec![0.0; outputs];
    let mut point = vec![0.0; n];

    if k == 0 {
        let mut acc = vec![NeumaierSum::new(); outputs];
        for s in &simplices {
            f(&s.vertices[0], &mut buf);
            check_finite(&buf, &s.vertices[0])?;
            for j in 0..outputs {
                acc[j].add(scale * buf[j]);
            }
        }
        return Ok(acc
            .into_iter()
            .map(|a| QuadratureResult {
                value: a.value(),
                error_estimate: 0.0,
                cells_used: simplices.len(),
                evaluations: simplices.len(),
            })
            .collect());
    }

    let (high, low) = cached_rules(k, opts.order);
    let per_cell = high.nodes.len() + low.nodes.len();
    let mut evaluations = 0usize;

    let mut eval_cell = |s: &Simplex,
                         evaluations: &mut usize|
     -> Result<(Vec<f64>, Vec<f64>), QuadratureError> {
        let jac = s.jacobian() * scale;
        let mut hi = vec![NeumaierSum::new(); outputs];
        let mut lo = vec![NeumaierSum::new(); outputs];
        for (rule, acc) in [(high, &mut hi), (low, &mut lo)] {
            for (b, w) in rule.nodes.iter().zip(&rule.weights) {
                s.map_point(b, &mut point);
                f(&point, &mut buf);
                check_finite(&buf, &point)?;
                for j in 0..outputs {
                    acc[j].add(w * buf[j]);
                }
            }
        }
        *evaluations += per_cell;
        let values: Vec<f64> = hi.iter().map(|a| a.value() * jac).collect();
        let errors: Vec<f64> = hi
            .iter()
            .zip(&lo)
            .map(|(h, l)| ((h.value() - l.value()) * jac).abs())
            .collect();
        Ok((values, errors))
    };

    // Initial mesh, pre-refined where requested.
    let domain_diam = simplices.iter().map(Simplex::diameter).fold(0.0, f64::max);
    let mut initial = Vec::new();
    let mut stack: Vec<Simplex> = simplices.into_iter().rev().collect();
    while let Some(s) = stack.pop() {
        let d = s.diameter();
        let mut split = opts.max_initial_diameter.is_some_and(|m| d > m);
        if let Some(focus) = &opts.focus {
            if d > focus.max_diameter {
                let c = s.centroid();
                let near = crate::region::dist(&c, &focus.center) <= focus.radius + d;
                split |= near;
            }
        }
        if split && initial.len() + stack.len() < 200_000 {
            let (a, b) = s.bisect();
            stack.push(b);
            stack.push(a);
        } else {
            initial.push(s);
        }
    }

    let mut cells: Vec<CellData> = Vec::with_capacity(initial.len() * 2);
    for s in initial {
        let (values, errors) = eval_cell(&s, &mut evaluations)?;
        cells.push(CellData {
            depth: 0,
            simplex: s,
            values,
            errors,
            alive: true,
        });
    }

    let totals = |cells: &[CellData]| {
        let mut v = vec![NeumaierSum::new(); outputs];
        let mut e = vec![NeumaierSum::new(); outputs];
        let mut a = vec![NeumaierSum::new(); outputs];
        for c in cells.iter().filter(|c| c.alive) {
            for j in 0..outputs {
                v[j].add(c.values[j]);
                e[j].add(c.errors[j]);
                a[j].add(c.values[j].abs());
            }
        }
        (
            v.iter().map(NeumaierSum::value).collect::<Vec<_>>(),
            e.iter().map(NeumaierSum::value).collect::<Vec<_>>(),
            a.iter().map(NeumaierSum::value).collect::<Vec<_>>(),
        )
    };

    let (mut val, mut err, mut abs_sum) = totals(&cells);
    let weights: Vec<f64> = val
        .iter()
        .zip(&abs_sum)
        .map(|(v, a)| 1.0 / v.abs().max(1e-3 * a).max(opts.abs_tol).max(f64::MIN_POSITIVE))
        .collect();
    let priority = |c: &CellData| -> f64 {
        c.errors
            .iter()
            .zip(&weights)
            .map(|(e, w)| e * w)
            .fold(0.0, f64::max)
    };
    let mut heap: BinaryHeap<Priority> = cells
        .iter()
        .enumerate()
        .map(|(i, c)| Priority(priority(c), i))
        .collect();
    let min_diam = 1e-14 * domain_diam.max(f64::MIN_POSITIVE);
    let mut frozen = vec![false; cells.len()];
    let mut iterations = 0usize;

    let converged = |val: &[f64], err: &[f64], abs_sum: &[f64]| {
        (0..outputs).all(|j| {
            let tol = opts
                .abs_tol
                .max(opts.rel_tol * val[j].abs())
                .max(64.0 * f64::EPSILON * abs_sum[j]);
            err[j] <= tol
        })
    };

    loop {
        if converged(&val, &err, &abs_sum) {
            break;
        }
        if evaluations >= opts.max_evals {
            return Err(not_converged(&cells, outputs, evaluations));
        }
        let Some(Priority(_, id)) = heap.pop() else {
            return Err(not_converged(&cells, outputs, evaluations));
        };
        if !cells[id].alive || frozen[id] {
            continue;
        }
        if cells[id].simplex.diameter() < min_diam || cells[id].depth >= MAX_DEPTH {
            frozen[id] = true;
            continue;
        }
        let depth = cells[id].depth + 1;
        let (a, b) = split(&cells[id].simplex, &opts.singular_hyperplanes);
        cells[id].alive = false;
        for j in 0..outputs {
            val[j] -= cells[id].values[j];
            err[j] -= cells[id].errors[j];
            abs_sum[j] -= cells[id].values[j].abs();
        }
        for child in [a, b] {
            let (values, errors) = eval_cell(&child, &mut evaluations)?;
            for j in 0..outputs {
                val[j] += values[j];
                err[j] += errors[j];
                abs_sum[j] += values[j].abs();
            }
            let cell = CellData {
                depth,
                simplex: child,
                values,
                errors,
                alive: true,
            };
            heap.push(Priority(priority(&cell), cells.len()));
            cells.push(cell);
            frozen.push(false);
        }
        iterations += 1;
        if iterations % 512 == 0 {
            (val, err, abs_sum) = totals(&cells);
        }
    }

    let (val, err, _) = totals(&cells);
    let cells_used = cells.iter().filter(|c| c.alive).count();
    Ok((0..outputs)
        .map(|j| QuadratureResult {
            value: val[j],
            error_estimate: err[j],
            cells_used,
            evaluations,
        })
        .collect())
}

fn check_finite(values: &[f64], point: &[f64]) -> Result<(), QuadratureError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(QuadratureError::NonFinite {
            point: point.to_vec(),
        })
    }
}

fn not_converged(cells: &[CellData], outputs: usize, evaluations: usize) -> QuadratureError {
    let mut v = NeumaierSum::new();
    let mut e = NeumaierSum::new();
    for c in cells.iter().filter(|c| c.alive) {
        v.add(c.values[0]);
        e.add(c.errors[0]);
    }
    let _ = outputs;
    QuadratureError::NotConverged {
        partial: QuadratureResult {
            value: v.value(),
            error_estimate: e.value(),
            cells_used: cells.iter().filter(|c| c.alive).count(),
            evaluations,
        },
    }
}

/// `∫_region g`.
pub fn integrate<R, G>(region: &R, g: G, opts: &QuadOptions) -> Result<QuadratureResult, QuadratureError>
where
    R: AsRef<ConvexRegion> + ?Sized,
    G: Fn(&[f64]) -> f64,
{
    let region = region.as_ref();
    let mut out = adaptive(
        region.decomposition().simplices.clone(),
        1.0,
        1,
        |x, o| o[0] = g(x),
        opts,
    )?;
    Ok(out.remove(0))
}

/// Several integrals over the same adaptive mesh; `g` fills one slot per
/// output. Every output must meet the tolerance.
pub fn integrate_many<R, G>(
    region: &R,
    outputs: usize,
    g: G,
    opts: &QuadOptions,
) -> Result<Vec<QuadratureResult>, QuadratureError>
where
    R: AsRef<ConvexRegion> + ?Sized,
    G: Fn(&[f64], &mut [f64]),
{
    adaptive(
        region.as_ref().decomposition().simplices.clone(),
        1.0,
        outputs,
        g,
        opts,
    )
}

/// `log ∫ exp(log_g)`, with `-inf` samples treated as zeros.
pub fn integrate_log<R, L>(region: &R, log_g: L, opts: &QuadOptions) -> Result<LogQuadratureResult, QuadratureError>
where
    R: AsRef<ConvexRegion> + ?Sized,
    L: Fn(&[f64]) -> f64,
{
    integrate_log_weighted(region, log_g, |_| 1.0, opts)
}

/// `∫ exp(log_w) · g`, reported as sign and log-magnitude.
///
/// The exponent is shifted by its observed maximum; if a larger value shows up
/// during adaptation the integral is recomputed with the new shift.
pub fn integrate_log_weighted<R, L, G>(
    region: &R,
    log_w: L,
    g: G,
    opts: &QuadOptions,
) -> Result<LogQuadratureResult, QuadratureError>
where
    R: AsRef<ConvexRegion> + ?Sized,
    L: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    let region = region.as_ref();
    opts.validate()?;
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: if opts.rel_tol > 0.0 { opts.rel_tol } else { opts.abs_tol },
        ..opts.clone()
    };
    // Initial shift from the vertices and fan barycenters.
    let mut shift = f64::NEG_INFINITY;
    let mut fallback = f64::NEG_INFINITY;
    for s in &region.decomposition().simplices {
        for p in s.vertices.iter().chain(std::iter::once(&s.centroid())) {
            let lw = log_w(p);
            if lw.is_finite() {
                fallback = fallback.max(lw);
                let gv = g(p);
                if gv != 0.0 && gv.is_finite() {
                    shift = shift.max(lw + gv.abs().ln());
                }
            }
        }
    }
    if !shift.is_finite() {
        shift = fallback;
    }
    if !shift.is_finite() {
        shift = 0.0;
    }
    integrate_log_shifted(region, log_w, g, shift, &opts)
}

/// As [`integrate_log_weighted`], starting from a caller-supplied shift
/// (ideally the maximum of `log_w + log|g|`).
pub fn integrate_log_shifted<R, L, G>(
    region: &R,
    log_w: L,
    g: G,
    shift: f64,
    opts: &QuadOptions,
) -> Result<LogQuadratureResult, QuadratureError>
where
    R: AsRef<ConvexRegion> + ?Sized,
    L: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    let region = region.as_ref();
    opts.validate()?;
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: if opts.rel_tol > 0.0 { opts.rel_tol } else { opts.abs_tol },
        ..opts.clone()
    };
    let mut shift = shift;
    for _ in 0..6 {
        let observed = StdCell::new(f64::NEG_INFINITY);
        let overflow = StdCell::new(false);
        let res = integrate(
            region,
            |x| {
                let lw = log_w(x);
                if lw == f64::NEG_INFINITY {
                    return 0.0;
                }
                let gv = g(x);
                if gv == 0.0 {
                    return 0.0;
                }
                let l = lw + gv.abs().ln();
                if l > observed.get() {
                    observed.set(l);
                }
                if l - shift > 600.0 {
                    overflow.set(true);
                    return 0.0;
                }
                (lw - shift).exp() * gv
            },
            &opts,
        );
        let obs = observed.get();
        if overflow.get() || (obs.is_finite() && obs < shift - 600.0) {
            shift = obs;
            continue;
        }
        let res = res?;
        if res.value == 0.0 {
            return Ok(LogQuadratureResult {
                log_value: f64::NEG_INFINITY,
                sign: 0.0,
                rel_error: 0.0,
                cells_used: res.cells_used,
                evaluations: res.evaluations,
            });
        }
        return Ok(LogQuadratureResult {
            log_value: shift + res.value.abs().ln(),
            sign: res.value.signum(),
            rel_error: res.error_estimate / res.value.abs(),
            cells_used: res.cells_used,
            evaluations: res.evaluations,
        });
    }
    Err(QuadratureError::NonFinite {
        point: Vec::new(),
    })
}

/// Integral over a proper face with respect to lattice-normalized measure
/// (a primitive lattice segment has length one).
pub fn integrate_face<G>(
    polytope: &DelzantPolytope,
    face: &Face,
    g: G,
    opts: &QuadOptions,
) -> Result<QuadratureResult, QuadratureError>
where
    G: Fn(&[f64]) -> f64,
{
    let simplices = polytope.region().face_simplices(&face.active_set);
    let scale = 1.0 / polytope.face_covolume(face);
    let mut out = adaptive(simplices, scale, 1, |x, o| o[0] = g(x), opts)?;
    Ok(out.remove(0))
}

/// Non-adaptive rule: one `points`-per-axis Duffy rule on each simplex,
/// scaled by `scale`. Meant for integrands too expensive to adapt on.
fn fixed_rule<G>(simplices: &[Simplex], scale: f64, g: G, points: usize) -> f64
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    use rayon::prelude::*;
    let Some(first) = simplices.first() else {
        return 0.0;
    };
    let k = first.dim();
    if k == 0 {
        return simplices.iter().map(|s| scale * g(&s.vertices[0])).sum();
    }
    let rule = SimplexRule::duffy(k, points);
    let mut jobs = Vec::new();
    for s in simplices {
        let jac = s.jacobian() * scale;
        for (b, w) in rule.nodes.iter().zip(&rule.weights) {
            let mut x = vec![0.0; s.vertices[0].len()];
            s.map_point(b, &mut x);
            jobs.push((x, w * jac));
        }
    }
    let values: Vec<f64> = jobs.par_iter().map(|(x, w)| w * g(x)).collect();
    crate::sum::compensated_sum(&values)
}

/// Fixed-rule `∫_region g`.
pub fn integrate_fixed<R, G>(region: &R, g: G, points: usize) -> f64
where
    R: AsRef<ConvexRegion> + ?Sized,
    G: Fn(&[f64]) -> f64 + Sync,
{
    fixed_rule(&region.as_ref().decomposition().simplices, 1.0, g, points)
}

/// Fixed-rule face integral in lattice-normalized measure.
pub fn integrate_face_fixed<G>(polytope: &DelzantPolytope, face: &Face, g: G, points: usize) -> f64
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let simplices = polytope.region().face_simplices(&face.active_set);
    fixed_rule(&simplices, 1.0 / polytope.face_covolume(face), g, points)
}

/// Volume of the part of a simplex where the linear interpolant of the
/// vertex values is at least `t`. Exact for k ≤ 2, vertex-fraction otherwise.
fn clipped_volume(s: &Simplex, vals: &[f64], t: f64) -> f64 {
    let above = vals.iter().filter(|&&v| v >= t).count();
    if above == vals.len() {
        return s.volume();
    }
    if above == 0 {
        return 0.0;
    }
    let clamp = |v: f64| v.clamp(t - 1e300, t + 1e300);
    match s.dim() {
        1 => {
            let (a, b) = (clamp(vals[0]), clamp(vals[1]));
            let frac = if a >= t { (a - t) / (a - b) } else { (b - t) / (b - a) };
            s.volume() * frac
        }
        2 if s.vertices[0].len() == 2 => {
            // Sutherland–Hodgman against the half-plane {value ≥ t}.
            let mut poly: Vec<[f64; 2]> = Vec::with_capacity(4);
            for i in 0..3 {
                let j = (i + 1) % 3;
                let (pi, pj) = (&s.vertices[i], &s.vertices[j]);
                let (vi, vj) = (clamp(vals[i]), clamp(vals[j]));
                if vi >= t {
                    poly.push([pi[0], pi[1]]);
                }
                if (vi >= t) != (vj >= t) {
                    let r = (t - vi) / (vj - vi);
                    poly.push([pi[0] + r * (pj[0] - pi[0]), pi[1] + r * (pj[1] - pi[1])]);
                }
            }
            let m = poly.len();
            let twice: f64 = (0..m)
                .map(|i| {
                    let (a, b) = (poly[i], poly[(i + 1) % m]);
                    a[0] * b[1] - a[1] * b[0]
                })
                .sum();
            0.5 * twice.abs()
        }
        _ => s.volume() * above as f64 / vals.len() as f64,
    }
}

/// Lebesgue volume of `{y ∈ region : g(y) ≥ t}`.
///
/// Cells straddling the level set are bisected; within a cell the level set
/// is approximated through the linear interpolant of the vertex values.
pub fn superlevel_volume<R, G>(region: &R, g: G, t: f64, opts: &QuadOptions) -> Result<QuadratureResult, QuadratureError>
where
    R: AsRef<ConvexRegion> + ?Sized,
    G: Fn(&[f64]) -> f64,
{
    let region = region.as_ref();
    opts.validate()?;
    if t == f64::NEG_INFINITY {
        return Ok(QuadratureResult {
            value: region.volume(),
            error_estimate: 0.0,
            cells_used: region.decomposition().simplices.len(),
            evaluations: 0,
        });
    }
    struct LevelCell {
        simplex: Simplex,
        vals: Vec<f64>,
        estimate: f64,
        error: f64,
        alive: bool,
    }
    let evaluations = StdCell::new(0usize);
    let eval = |x: &[f64]| {
        evaluations.set(evaluations.get() + 1);
        g(x)
    };
    let make = |simplex: Simplex, vals: Vec<f64>| -> LevelCell {
        let centroid = simplex.centroid();
        let c = eval(&centroid);
        let above = vals.iter().filter(|&&v| v >= t).count() + usize::from(c >= t);
        if above == 0 || above == vals.len() + 1 {
            let estimate = if above == 0 { 0.0 } else { simplex.volume() };
            return LevelCell {
                simplex,
                vals,
                estimate,
                error: 0.0,
                alive: true,
            };
        }
        let coarse = clipped_volume(&simplex, &vals, t);
        let (a, b, mid_val) = split_with_values(&simplex, &vals, &eval);
        let fine = clipped_volume(&a.0, &a.1, t) + clipped_volume(&b.0, &b.1, t);
        let _ = mid_val;
        LevelCell {
            simplex,
            vals,
            estimate: fine,
            error: (fine - coarse).abs().max(f64::EPSILON * fine),
            alive: true,
        }
    };
    fn split_with_values(
        s: &Simplex,
        vals: &[f64],
        eval: &dyn Fn(&[f64]) -> f64,
    ) -> ((Simplex, Vec<f64>), (Simplex, Vec<f64>), f64) {
        let (a, b) = s.bisect();
        // The bisected edge's midpoint is the only new vertex.
        let idx_a = (0..a.vertices.len())
            .find(|&i| a.vertices[i] != s.vertices[i])
            .expect("bisection moves one vertex");
        let mid = a.vertices[idx_a].clone();
        let mv = eval(&mid);
        let mut va = vals.to_vec();
        va[idx_a] = mv;
        let idx_b = (0..b.vertices.len())
            .find(|&i| b.vertices[i] != s.vertices[i])
            .expect("bisection moves one vertex");
        let mut vb = vals.to_vec();
        vb[idx_b] = mv;
        ((a, va), (b, vb), mv)
    }

    let max_diam = opts.max_initial_diameter.unwrap_or_else(|| {
        let (lo, hi) = region.bounding_box();
        crate::region::dist(&lo, &hi) / 8.0
    });
    let mut stack: Vec<Simplex> = region.decomposition().simplices.iter().rev().cloned().collect();
    let mut cells: Vec<LevelCell> = Vec::new();
    while let Some(s) = stack.pop() {
        if s.diameter() > max_diam {
            let (a, b) = s.bisect();
            stack.push(b);
            stack.push(a);
        } else {
            let vals: Vec<f64> = s.vertices.iter().map(|v| eval(v)).collect();
            cells.push(make(s, vals));
        }
    }
    let tol_of = |v: f64| opts.abs_tol.max(opts.rel_tol * v.abs());
    let mut heap: BinaryHeap<Priority> = cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.error > 0.0)
        .map(|(i, c)| Priority(c.error, i))
        .collect();
    let sum_of = |cells: &[LevelCell]| {
        let mut v = NeumaierSum::new();
        let mut e = NeumaierSum::new();
        for c in cells.iter().filter(|c| c.alive) {
            v.add(c.estimate);
            e.add(c.error);
        }
        (v.value(), e.value())
    };
    let (mut value, mut error) = sum_of(&cells);
    let mut iterations = 0usize;
    while error > tol_of(value) {
        if evaluations.get() >= opts.max_evals {
            return Err(QuadratureError::NotConverged {
                partial: QuadratureResult {
                    value,
                    error_estimate: error,
                    cells_used: cells.iter().filter(|c| c.alive).count(),
                    evaluations: evaluations.get(),
                },
            });
        }
        let Some(Priority(_, id)) = heap.pop() else { break };
        if !cells[id].alive {
            continue;
        }
        cells[id].alive = false;
        value -= cells[id].estimate;
        error -= cells[id].error;
        let ((sa, va), (sb, vb), _) = split_with_values(&cells[id].simplex, &cells[id].vals, &eval);
        for (s, v) in [(sa, va), (sb, vb)] {
            let c = make(s, v);
            value += c.estimate;
            error += c.error;
            if c.error > 0.0 {
                heap.push(Priority(c.error, cells.len()));
            }
            cells.push(c);
        }
        iterations += 1;
        if iterations % 512 == 0 {
            (value, error) = sum_of(&cells);
        }
    }
    let (value, error) = sum_of(&cells);
    Ok(QuadratureResult {
        value,
        error_estimate: error,
        cells_used: cells.iter().filter(|c| c.alive).count(),
        evaluations: evaluations.get(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::DelzantPolytope;

    #[test]
    fn gauss_legendre_integrates_monomials() {
        let (x, w) = gauss_legendre(6);
        for p in 0..12 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-15, "p={p}");
        }
    }

    #[test]
    fn duffy_rule_weights_sum_to_simplex_volume() {
        for k in 1..=3 {
            let r = SimplexRule::duffy(k, 5);
            let s: f64 = r.weights.iter().sum();
            let vol = 1.0 / (1..=k).product::<usize>() as f64;
            assert!((s - vol).abs() < 1e-15, "k={k}");
        }
        // ∫_T b1 b2 = 1!1!/4! on the standard triangle.
        let r = SimplexRule::duffy(2, 6);
        let q: f64 = r.nodes.iter().zip(&r.weights).map(|(b, w)| w * b[0] * b[1]).sum();
        assert!((q - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn spec_examples() {
        let i = DelzantPolytope::interval();
        let o = QuadOptions::absolute(1e-10);
        assert!((integrate(&i, |_| 1.0, &o).unwrap().value - 1.0).abs() < 1e-14);
        let s = DelzantPolytope::simplex(2);
        assert!((integrate(&s, |_| 1.0, &o).unwrap().value - 0.5).abs() < 1e-14);
        assert!((integrate(&i, |y| y[0] * y[0], &o).unwrap().value - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn endpoint_singularity_converges() {
        let i = DelzantPolytope::interval();
        let r = integrate(&i, |y| y[0].powf(0.3), &QuadOptions::relative(1e-11)).unwrap();
        assert!((r.value - 1.0 / 1.3).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn budget_exhaustion_reports_partial() {
        let i = DelzantPolytope::interval();
        let err = integrate(&i, |y| y[0].powf(-0.9), &QuadOptions::relative(1e-14).with_max_evals(2000))
            .unwrap_err();
        match err {
            QuadratureError::NotConverged { partial } => assert!(partial.value > 0.0),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            integrate(&i, |_| 1.0, &QuadOptions::absolute(0.0)),
            Err(QuadratureError::InvalidTolerance)
        ));
    }

    #[test]
    fn log_mode_examples() {
        let i = DelzantPolytope::interval();
        let r = integrate_log(&i, |_| 0.0, &QuadOptions::relative(1e-10)).unwrap();
        assert!(r.log_value.abs() < 1e-14);
        let huge = integrate_log(&i, |y| 2000.0 * y[0], &QuadOptions::relative(1e-10)).unwrap();
        // ∫ e^{2000y} = (e^{2000} − 1)/2000.
        assert!((huge.log_value - (2000.0 - 2000f64.ln())).abs() < 1e-9, "{huge:?}");
        let boundary = integrate_log(
            &i,
            |y| if y[0] < 0.5 { f64::NEG_INFINITY } else { 0.0 },
            &QuadOptions::relative(1e-10),
        )
        .unwrap();
        assert!((boundary.log_value - 0.5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn face_examples() {
        let sq = DelzantPolytope::unit_square();
        let facet = Face {
            active_set: vec![2],
            dimension: 1,
        };
        let o = QuadOptions::absolute(1e-12);
        assert!((integrate_face(&sq, &facet, |_| 1.0, &o).unwrap().value - 1.0).abs() < 1e-14);
        let s = DelzantPolytope::simplex(2);
        let hyp = Face {
            active_set: vec![2],
            dimension: 1,
        };
        assert!((integrate_face(&s, &hyp, |_| 1.0, &o).unwrap().value - 1.0).abs() < 1e-14);
        let i = DelzantPolytope::interval();
        let v0 = Face {
            active_set: vec![0],
            dimension: 0,
        };
        assert_eq!(integrate_face(&i, &v0, |y| y[0] * y[0], &o).unwrap().value, 0.0);
        let v1 = Face {
            active_set: vec![1],
            dimension: 0,
        };
        assert_eq!(integrate_face(&i, &v1, |y| y[0] * y[0] + 1.0, &o).unwrap().value, 2.0);
    }

    #[test]
    fn superlevel_examples() {
        let i = DelzantPolytope::interval();
        let o = QuadOptions::absolute(1e-10);
        let v = superlevel_volume(&i, |y| y[0], 0.25, &o).unwrap();
        assert!((v.value - 0.75).abs() < 1e-10);
        let v = superlevel_volume(&i, |y| y[0] * (1.0 - y[0]), 3.0 / 16.0, &o).unwrap();
        assert!((v.value - 0.5).abs() < 1e-9, "{v:?}");
        let sq = DelzantPolytope::unit_square();
        let v = superlevel_volume(&sq, |_| 0.0, f64::NEG_INFINITY, &o).unwrap();
        assert_eq!(v.value, 1.0);
        // Disc of radius 0.3 inside the square.
        let disc = superlevel_volume(
            &sq,
            |y| 0.09 - (y[0] - 0.5).powi(2) - (y[1] - 0.5).powi(2),
            0.0,
            &QuadOptions::absolute(1e-6),
        )
        .unwrap();
        assert!((disc.value - std::f64::consts::PI * 0.09).abs() < 1e-5, "{disc:?}");
    }
}
